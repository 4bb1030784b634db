#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ossr/common.hpp"

namespace ossr {

// ----------------------------------------------------------------------------
// Domain types
// ----------------------------------------------------------------------------

/// One raw sensor record: time-domain amplitudes at a fixed sample rate.
struct RawSignal {
  std::vector<double> samples;
  double sample_rate = 0.0;
  int label = kUnlabeled;
};

/// One-sided magnitude spectrum. For a transform of length N there are
/// N/2 + 1 bins spaced bin_width Hz apart.
struct Spectrum {
  std::vector<double> magnitudes;
  double bin_width = 0.0;
};

/// Model-ready feature vector: [standardized time window | standardized
/// log-magnitude spectrum].
struct FusedSample {
  std::vector<double> features;
  int label = kUnlabeled;
};

// ----------------------------------------------------------------------------
// FFT
// ----------------------------------------------------------------------------

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace detail {

// Iterative radix-2 Cooley-Tukey, in place, re/im as separate arrays.
inline void fft_pow2(std::vector<double>& re, std::vector<double>& im) {
  const std::size_t n = re.size();
  if (n < 2) return;

  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const double wr = std::cos(ang);
    const double wi = std::sin(ang);
    for (std::size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::size_t a = i + k;
        const std::size_t b = i + k + len / 2;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

}  // namespace detail

/// One-sided magnitude spectrum of the input, zero-padded to a power of two.
/// Magnitudes are raw |X_k| (a unit-amplitude tone at bin f peaks at N/2).
inline Spectrum fft_magnitude(const RawSignal& signal) {
  if (signal.samples.size() < 2) {
    throw UsageError("fft_magnitude: need at least 2 samples, got " +
                     std::to_string(signal.samples.size()));
  }
  require_finite(signal.samples, "fft_magnitude input");

  const std::size_t n = next_pow2(signal.samples.size());
  std::vector<double> re(n, 0.0), im(n, 0.0);
  std::copy(signal.samples.begin(), signal.samples.end(), re.begin());
  detail::fft_pow2(re, im);

  Spectrum spec;
  spec.magnitudes.resize(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    spec.magnitudes[k] = std::hypot(re[k], im[k]);
  }
  spec.bin_width = signal.sample_rate > 0.0 ? signal.sample_rate / static_cast<double>(n) : 0.0;
  return spec;
}

/// Energy of the full complex spectrum recovered from a one-sided magnitude
/// spectrum of a real signal (bins 1..N/2-1 appear twice).
inline double full_spectrum_energy(const Spectrum& spec) {
  const std::size_t m = spec.magnitudes.size();
  double e = spec.magnitudes.front() * spec.magnitudes.front();
  if (m > 1) e += spec.magnitudes.back() * spec.magnitudes.back();
  for (std::size_t k = 1; k + 1 < m; ++k) {
    e += 2.0 * spec.magnitudes[k] * spec.magnitudes[k];
  }
  return e;
}

// ----------------------------------------------------------------------------
// Time-frequency fusion
// ----------------------------------------------------------------------------

struct FusionConfig {
  /// Raw samples consumed from the head of each record.
  std::size_t window = 4096;
  /// Time-channel length after decimation (== window means plain truncation).
  std::size_t time_points = 4096;

  std::size_t fft_points() const { return next_pow2(window); }
  std::size_t freq_points() const { return fft_points() / 2 + 1; }
  std::size_t fused_dim() const { return time_points + freq_points(); }
};

/// Per-channel standardization statistics, fitted on the training split only.
struct FusionStats {
  double time_mean = 0.0;
  double time_scale = 1.0;
  double freq_mean = 0.0;
  double freq_scale = 1.0;
  bool fitted = false;
};

namespace detail {

struct RawChannels {
  std::vector<double> time;
  std::vector<double> freq;  // log(1 + magnitude)
};

inline RawChannels extract_channels(const RawSignal& signal, const FusionConfig& cfg) {
  if (cfg.window < 2 || cfg.time_points < 1) {
    throw UsageError("fusion: window must be >= 2 and time_points >= 1");
  }
  if (signal.samples.size() < cfg.window) {
    throw DataError("fusion: signal has " + std::to_string(signal.samples.size()) +
                    " samples, window needs " + std::to_string(cfg.window));
  }
  require_finite(signal.samples, "fusion input");

  RawChannels ch;
  ch.time.resize(cfg.time_points);
  if (cfg.time_points == cfg.window) {
    std::copy(signal.samples.begin(), signal.samples.begin() + static_cast<std::ptrdiff_t>(cfg.window),
              ch.time.begin());
  } else {
    for (std::size_t i = 0; i < cfg.time_points; ++i) {
      ch.time[i] = signal.samples[i * cfg.window / cfg.time_points];
    }
  }

  RawSignal head;
  head.samples.assign(signal.samples.begin(),
                      signal.samples.begin() + static_cast<std::ptrdiff_t>(cfg.window));
  head.sample_rate = signal.sample_rate;
  const Spectrum spec = fft_magnitude(head);
  ch.freq.resize(spec.magnitudes.size());
  for (std::size_t k = 0; k < ch.freq.size(); ++k) {
    ch.freq[k] = std::log1p(spec.magnitudes[k]);
  }
  return ch;
}

}  // namespace detail

/// Fit per-channel mean/scale over the training split. Zero-variance channels
/// get scale 1 so degenerate data passes through unscaled.
template <typename SignalRange>
FusionStats fit_fusion_stats(const SignalRange& training_signals, const FusionConfig& cfg) {
  double tsum = 0.0, tsq = 0.0, fsum = 0.0, fsq = 0.0;
  std::size_t tn = 0, fn = 0;
  for (const RawSignal& s : training_signals) {
    const auto ch = detail::extract_channels(s, cfg);
    for (double v : ch.time) {
      tsum += v;
      tsq += v * v;
    }
    for (double v : ch.freq) {
      fsum += v;
      fsq += v * v;
    }
    tn += ch.time.size();
    fn += ch.freq.size();
  }
  if (tn == 0 || fn == 0) throw UsageError("fit_fusion_stats: empty training split");

  FusionStats st;
  st.time_mean = tsum / static_cast<double>(tn);
  st.freq_mean = fsum / static_cast<double>(fn);
  const double tvar = std::max(0.0, tsq / static_cast<double>(tn) - st.time_mean * st.time_mean);
  const double fvar = std::max(0.0, fsq / static_cast<double>(fn) - st.freq_mean * st.freq_mean);
  st.time_scale = tvar > 0.0 ? std::sqrt(tvar) : 1.0;
  st.freq_scale = fvar > 0.0 ? std::sqrt(fvar) : 1.0;
  st.fitted = true;
  return st;
}

/// Fuse one record into a standardized feature vector of dimension
/// time_points + freq_points. Deterministic given (cfg, stats).
inline FusedSample fuse_time_frequency(const RawSignal& signal, const FusionConfig& cfg,
                                       const FusionStats& stats) {
  if (!stats.fitted) throw UsageError("fuse_time_frequency: standardization statistics not fitted");
  const auto ch = detail::extract_channels(signal, cfg);

  FusedSample out;
  out.label = signal.label;
  out.features.resize(cfg.fused_dim());
  std::size_t j = 0;
  for (double v : ch.time) out.features[j++] = (v - stats.time_mean) / stats.time_scale;
  for (double v : ch.freq) out.features[j++] = (v - stats.freq_mean) / stats.freq_scale;
  return out;
}

template <typename SignalRange>
std::vector<FusedSample> fuse_all(const SignalRange& signals, const FusionConfig& cfg,
                                  const FusionStats& stats) {
  std::vector<FusedSample> out;
  out.reserve(signals.size());
  for (const RawSignal& s : signals) out.push_back(fuse_time_frequency(s, cfg, stats));
  return out;
}

}  // namespace ossr
