#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ossr/common.hpp"
#include "ossr/dataset.hpp"
#include "ossr/rng.hpp"
#include "ossr/signal.hpp"

namespace ossr {

// ----------------------------------------------------------------------------
// Seeded synthetic benchmark: six vibration-signal categories with distinct
// structure but overlapping noise floors.
//
//   0 noise                 colored Gaussian noise, elevated floor
//   1 spike                 baseline noise + Poisson-timed unipolar impulses
//   2 jam                   drifting narrow-band tone cluster + noise
//   3 impact                decaying resonant bursts at random onsets + noise
//   4 hydraulic_fluctuation low-frequency AM oscillation + noise
//   5 self_check            deterministic linear chirp + noise
//
// Every record is a pure function of (seed, class_id, record_index); samples
// are quantized to float32 so csv and bin files round-trip bit-exactly.
// ----------------------------------------------------------------------------

struct GeneratorConfig {
  std::uint64_t seed = 42;
  int records_per_class = 100;
  std::size_t record_length = 5000;
  double sample_rate = 50000.0;

  struct NoiseParams {
    double floor = 1.0;       // RMS of the colored noise
    double color_pole = 0.9;  // one-pole low-pass coefficient
  } noise;

  struct SpikeParams {
    double floor = 0.35;
    double mean_count = 9.0;  // expected impulses per record
    double amp_lo = 4.0;
    double amp_hi = 9.0;
    double decay_samples = 0.9;
  } spike;

  struct JamParams {
    double floor = 0.35;
    double band_center_hz = 12500.0;
    double band_jitter_hz = 250.0;   // per-record carrier offset
    double tone_spacing_hz = 320.0;
    double drift_span_hz = 180.0;    // slow carrier wander
    double drift_rate_hz = 0.7;
    double amp = 1.3;
  } jam;

  struct ImpactParams {
    double floor = 0.3;
    double mean_bursts = 7.0;  // extra bursts beyond the guaranteed one
    double resonance_hz = 8000.0;
    double resonance_jitter_hz = 400.0;
    double mode2_hz = 3200.0;  // secondary structural mode
    double mode2_amp = 0.6;
    double decay_s = 0.004;
    double amp_lo = 4.0;
    double amp_hi = 8.0;
  } impact;

  struct HydraulicParams {
    double floor = 0.3;
    double carrier_hz = 300.0;
    double mod_hz = 5.0;
    double mod_depth = 0.8;
    double amp = 2.0;
  } hydraulic;

  struct SelfCheckParams {
    double floor = 0.25;
    double chirp_start_hz = 1000.0;
    double chirp_end_hz = 20000.0;
    double amp = 1.2;
  } self_check;

  void validate() const {
    if (records_per_class < 1) throw UsageError("generator: records_per_class must be >= 1");
    if (record_length < 2) throw UsageError("generator: record_length must be >= 2");
    if (sample_rate <= 0.0) throw UsageError("generator: sample_rate must be positive");
  }
};

inline const std::array<std::string, 6>& synth_class_names() {
  static const std::array<std::string, 6> names = {
      "noise", "spike", "jam", "impact", "hydraulic_fluctuation", "self_check"};
  return names;
}

namespace detail {

inline void add_white_noise(std::vector<double>& x, double rms, Rng& rng) {
  if (rms <= 0.0) return;
  for (double& v : x) v += rms * rng.normal();
}

inline std::vector<double> colored_noise(std::size_t n, double rms, double pole, Rng& rng) {
  // one-pole low-pass driven by white noise, scaled to the requested RMS
  std::vector<double> x(n, 0.0);
  const double g = rms * std::sqrt(1.0 - pole * pole);
  double y = 0.0;
  for (int k = 0; k < 256; ++k) y = pole * y + g * rng.normal();  // reach stationarity
  for (std::size_t i = 0; i < n; ++i) {
    y = pole * y + g * rng.normal();
    x[i] = y;
  }
  return x;
}

inline void quantize_f32(std::vector<double>& x) {
  for (double& v : x) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace detail

/// Generate one record. Pure in (cfg.seed, class_id, index).
inline RawSignal generate_record(int class_id, int index, const GeneratorConfig& cfg) {
  if (class_id < 0 || class_id > 5) {
    throw UsageError("generate_record: class_id must be in 0..5, got " + std::to_string(class_id));
  }
  cfg.validate();

  Rng rng(derive_stream(cfg.seed, {0x53594eull /* synth */, static_cast<std::uint64_t>(class_id),
                                   static_cast<std::uint64_t>(index)}));
  const std::size_t n = cfg.record_length;
  const double dt = 1.0 / cfg.sample_rate;
  const double two_pi = 6.283185307179586476925286766559;
  std::vector<double> x(n, 0.0);

  switch (class_id) {
    case 0: {
      x = detail::colored_noise(n, cfg.noise.floor, cfg.noise.color_pole, rng);
      break;
    }
    case 1: {
      const int count = rng.poisson(cfg.spike.mean_count);
      for (int s = 0; s < count; ++s) {
        const auto t0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
        const double amp = rng.uniform(cfg.spike.amp_lo, cfg.spike.amp_hi);
        for (std::size_t k = 0; t0 + k < n && k < 12; ++k) {
          x[t0 + k] += amp * std::exp(-static_cast<double>(k) / cfg.spike.decay_samples);
        }
      }
      detail::add_white_noise(x, cfg.spike.floor, rng);
      break;
    }
    case 2: {
      const double fc = cfg.jam.band_center_hz +
                        rng.uniform(-cfg.jam.band_jitter_hz, cfg.jam.band_jitter_hz);
      const std::array<double, 3> offsets = {-cfg.jam.tone_spacing_hz, 0.0, cfg.jam.tone_spacing_hz};
      const std::array<double, 3> weights = {0.65, 1.0, 0.65};
      std::array<double, 3> phase;
      std::array<double, 3> gains;
      for (std::size_t t = 0; t < 3; ++t) {
        phase[t] = rng.uniform(0.0, two_pi);
        gains[t] = cfg.jam.amp * weights[t] * rng.uniform(0.9, 1.1);
      }
      const double drift_phase = rng.uniform(0.0, two_pi);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double wander = cfg.jam.drift_span_hz *
                              std::sin(two_pi * cfg.jam.drift_rate_hz * t + drift_phase);
        for (std::size_t k = 0; k < 3; ++k) {
          phase[k] += two_pi * (fc + offsets[k] + wander) * dt;
          x[i] += gains[k] * std::sin(phase[k]);
        }
      }
      detail::add_white_noise(x, cfg.jam.floor, rng);
      break;
    }
    case 3: {
      // each strike rings two structural modes; dense strikes make the
      // resonances stand out of the floor
      const int bursts = 1 + rng.poisson(cfg.impact.mean_bursts);
      const auto tau_samples = cfg.impact.decay_s * cfg.sample_rate;
      for (int b = 0; b < bursts; ++b) {
        const auto t0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 16));
        const double amp = rng.uniform(cfg.impact.amp_lo, cfg.impact.amp_hi);
        const double fr = cfg.impact.resonance_hz +
                          rng.uniform(-cfg.impact.resonance_jitter_hz, cfg.impact.resonance_jitter_hz);
        const double f2 = cfg.impact.mode2_hz +
                          rng.uniform(-cfg.impact.resonance_jitter_hz, cfg.impact.resonance_jitter_hz);
        const double tau = tau_samples * rng.uniform(0.8, 1.2);
        const auto span = static_cast<std::size_t>(tau * 7.0);
        const double p2 = rng.uniform(0.0, two_pi);
        for (std::size_t k = 0; t0 + k < n && k < span; ++k) {
          const double kk = static_cast<double>(k);
          const double env = amp * std::exp(-kk / tau);
          x[t0 + k] += env * (std::sin(two_pi * fr * kk * dt) +
                              cfg.impact.mode2_amp * std::sin(two_pi * f2 * kk * dt + p2));
        }
      }
      detail::add_white_noise(x, cfg.impact.floor, rng);
      break;
    }
    case 4: {
      // amplitude-modulated low-frequency oscillation with a short harmonic
      // stack, the usual signature of pressure pulsation
      const double carrier = cfg.hydraulic.carrier_hz * rng.uniform(0.9, 1.1);
      const double fm = cfg.hydraulic.mod_hz * rng.uniform(0.8, 1.2);
      const double p1 = rng.uniform(0.0, two_pi);
      const std::array<double, 3> harmonic_amps = {1.0, 0.5, 0.3};
      std::array<double, 3> hp;
      for (auto& p : hp) p = rng.uniform(0.0, two_pi);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double env = 1.0 + cfg.hydraulic.mod_depth * std::sin(two_pi * fm * t + p1);
        double v = 0.0;
        for (std::size_t h = 0; h < 3; ++h) {
          v += harmonic_amps[h] * std::sin(two_pi * carrier * static_cast<double>(h + 1) * t + hp[h]);
        }
        x[i] = cfg.hydraulic.amp * env * v;
      }
      detail::add_white_noise(x, cfg.hydraulic.floor, rng);
      break;
    }
    case 5: {
      // repeatable sweep: the waveform is identical across records, only the
      // noise realization differs
      const double f0 = cfg.self_check.chirp_start_hz;
      const double f1 = cfg.self_check.chirp_end_hz;
      const double total_t = static_cast<double>(n) * dt;
      const double rate = (f1 - f0) / total_t;
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        x[i] = cfg.self_check.amp * std::sin(two_pi * (f0 * t + 0.5 * rate * t * t));
      }
      detail::add_white_noise(x, cfg.self_check.floor, rng);
      break;
    }
    default:
      break;
  }

  detail::quantize_f32(x);
  RawSignal r;
  r.samples = std::move(x);
  r.sample_rate = cfg.sample_rate;
  r.label = class_id;
  return r;
}

/// All records of one class, in index order.
inline std::vector<RawSignal> generate_class(int class_id, const GeneratorConfig& cfg) {
  std::vector<RawSignal> out;
  out.reserve(static_cast<std::size_t>(cfg.records_per_class));
  for (int i = 0; i < cfg.records_per_class; ++i) out.push_back(generate_record(class_id, i, cfg));
  return out;
}

// ----------------------------------------------------------------------------
// Stratified train/val/test split, 8:1:1 per class, membership a pure
// function of the seed.
// ----------------------------------------------------------------------------

struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
};

inline SplitCounts split_counts(int records_per_class) {
  const auto r = static_cast<std::size_t>(records_per_class);
  SplitCounts c;
  c.val = std::max<std::size_t>(1, r / 10);
  c.test = c.val;
  if (c.val + c.test >= r) throw UsageError("split: records_per_class too small for 8:1:1");
  c.train = r - c.val - c.test;
  return c;
}

struct GeneratedDataset {
  std::vector<RawSignal> train, val, test;
};

inline GeneratedDataset generate_splits(const GeneratorConfig& cfg) {
  cfg.validate();
  const SplitCounts counts = split_counts(cfg.records_per_class);
  GeneratedDataset ds;
  for (int c = 0; c < 6; ++c) {
    std::vector<int> order(static_cast<std::size_t>(cfg.records_per_class));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng split_rng(derive_stream(cfg.seed, {0x53504cull /* split */, static_cast<std::uint64_t>(c)}));
    split_rng.shuffle(order);
    for (std::size_t i = 0; i < order.size(); ++i) {
      RawSignal rec = generate_record(c, order[i], cfg);
      if (i < counts.train) {
        ds.train.push_back(std::move(rec));
      } else if (i < counts.train + counts.val) {
        ds.val.push_back(std::move(rec));
      } else {
        ds.test.push_back(std::move(rec));
      }
    }
  }
  return ds;
}

/// Generate and write a full dataset (manifest + three split files).
inline DatasetManifest generate_dataset(const GeneratorConfig& cfg,
                                        const std::filesystem::path& dir,
                                        const std::string& format) {
  GeneratedDataset ds = generate_splits(cfg);
  DatasetManifest manifest;
  manifest.format = format;
  manifest.record_length = cfg.record_length;
  manifest.sample_rate = cfg.sample_rate;
  manifest.class_names.assign(synth_class_names().begin(), synth_class_names().end());
  manifest.records_per_class = cfg.records_per_class;
  manifest.seed = cfg.seed;
  return write_dataset(dir, manifest,
                       {{"train", std::move(ds.train)},
                        {"val", std::move(ds.val)},
                        {"test", std::move(ds.test)}});
}

}  // namespace ossr
