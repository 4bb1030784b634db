#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ossr/rng.hpp"
#include "ossr/signal.hpp"

using namespace ossr;

namespace {

RawSignal make_signal(std::vector<double> samples, double rate = 50000.0, int label = 0) {
  RawSignal s;
  s.samples = std::move(samples);
  s.sample_rate = rate;
  s.label = label;
  return s;
}

RawSignal tone(std::size_t n, std::size_t bin, double amp, double rate = 50000.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = amp * std::sin(2.0 * M_PI * static_cast<double>(bin) * static_cast<double>(i) /
                          static_cast<double>(n));
  }
  return make_signal(std::move(x), rate);
}

}  // namespace

TEST(FftMagnitude, PureToneHitsSingleBin) {
  const std::size_t n = 1024;
  const std::size_t bin = 37;
  const double amp = 2.5;
  const Spectrum spec = fft_magnitude(tone(n, bin, amp));
  ASSERT_EQ(spec.magnitudes.size(), n / 2 + 1);

  const double expected = amp * static_cast<double>(n) / 2.0;
  EXPECT_NEAR(spec.magnitudes[bin], expected, 1e-6 * expected);
  for (std::size_t k = 0; k < spec.magnitudes.size(); ++k) {
    if (k == bin) continue;
    EXPECT_LT(spec.magnitudes[k], 1e-6 * amp * static_cast<double>(n)) << "bin " << k;
  }
}

TEST(FftMagnitude, ZeroSignalIsExactlyZero) {
  const Spectrum spec = fft_magnitude(make_signal(std::vector<double>(256, 0.0)));
  for (double m : spec.magnitudes) EXPECT_EQ(m, 0.0);
}

TEST(FftMagnitude, MatchesNaiveDftOnWhiteNoise) {
  Rng rng(123);
  std::vector<double> x(4096);
  for (double& v : x) v = rng.normal();

  const Spectrum spec = fft_magnitude(make_signal(x));
  const auto expected = oracle::dft_magnitudes(x);
  ASSERT_EQ(spec.magnitudes.size(), expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) {
    EXPECT_NEAR(spec.magnitudes[k], expected[k], 1e-7 * (1.0 + expected[k]));
  }
}

TEST(FftMagnitude, ParsevalOnWhiteNoise) {
  Rng rng(99);
  std::vector<double> x(4096);
  for (double& v : x) v = rng.normal();

  const Spectrum spec = fft_magnitude(make_signal(x));
  const double te = oracle::time_energy(x);
  const double fe = full_spectrum_energy(spec) / 4096.0;
  EXPECT_NEAR(fe, te, 1e-9 * te);
}

TEST(FftMagnitude, ParsevalHoldsWithZeroPadding) {
  // 5000 samples pad to 8192; zero padding adds no energy
  Rng rng(7);
  std::vector<double> x(5000);
  for (double& v : x) v = rng.normal();
  const Spectrum spec = fft_magnitude(make_signal(x));
  ASSERT_EQ(spec.magnitudes.size(), 8192 / 2 + 1);
  const double te = oracle::time_energy(x);
  const double fe = full_spectrum_energy(spec) / 8192.0;
  EXPECT_NEAR(fe, te, 1e-9 * te);
}

TEST(FftMagnitude, LinearInAmplitude) {
  Rng rng(5);
  std::vector<double> x(512);
  for (double& v : x) v = rng.normal();
  const double c = -3.7;
  std::vector<double> cx(x);
  for (double& v : cx) v *= c;

  const Spectrum a = fft_magnitude(make_signal(x));
  const Spectrum b = fft_magnitude(make_signal(cx));
  for (std::size_t k = 0; k < a.magnitudes.size(); ++k) {
    EXPECT_NEAR(b.magnitudes[k], std::abs(c) * a.magnitudes[k],
                1e-9 * (1.0 + std::abs(c) * a.magnitudes[k]));
  }
}

TEST(FftMagnitude, RejectsNonFiniteAndTooShort) {
  EXPECT_THROW(fft_magnitude(make_signal({1.0})), UsageError);
  std::vector<double> bad = {1.0, std::nan(""), 0.5, 0.25};
  EXPECT_THROW(fft_magnitude(make_signal(std::move(bad))), DataError);
}

TEST(Fusion, OutputDimensionIsTimePlusFreq) {
  FusionConfig cfg;
  cfg.window = 256;
  cfg.time_points = 256;
  Rng rng(1);
  std::vector<RawSignal> train;
  for (int i = 0; i < 4; ++i) {
    std::vector<double> x(300);
    for (double& v : x) v = rng.normal();
    train.push_back(make_signal(std::move(x)));
  }
  const FusionStats stats = fit_fusion_stats(train, cfg);
  const FusedSample f = fuse_time_frequency(train[0], cfg, stats);
  EXPECT_EQ(f.features.size(), cfg.fused_dim());
  EXPECT_EQ(f.features.size(), 256u + 129u);
}

TEST(Fusion, DeterministicGivenStats) {
  FusionConfig cfg;
  cfg.window = 128;
  cfg.time_points = 128;
  Rng rng(2);
  std::vector<double> x(128);
  for (double& v : x) v = rng.normal();
  const auto sig = make_signal(std::move(x));
  const FusionStats stats = fit_fusion_stats(std::vector<RawSignal>{sig}, cfg);

  const FusedSample a = fuse_time_frequency(sig, cfg, stats);
  const FusedSample b = fuse_time_frequency(sig, cfg, stats);
  ASSERT_EQ(a.features.size(), b.features.size());
  for (std::size_t i = 0; i < a.features.size(); ++i) {
    EXPECT_EQ(a.features[i], b.features[i]);
  }
}

TEST(Fusion, TrainingChannelsAreStandardized) {
  FusionConfig cfg;
  cfg.window = 512;
  cfg.time_points = 512;
  Rng rng(3);
  std::vector<RawSignal> train;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> x(512);
    for (double& v : x) v = 4.0 + 2.5 * rng.normal();
    train.push_back(make_signal(std::move(x)));
  }
  const FusionStats stats = fit_fusion_stats(train, cfg);

  // recompute pooled moments of the emitted features, per channel
  std::vector<double> time_vals, freq_vals;
  for (const auto& s : train) {
    const FusedSample f = fuse_time_frequency(s, cfg, stats);
    for (std::size_t i = 0; i < cfg.time_points; ++i) time_vals.push_back(f.features[i]);
    for (std::size_t i = cfg.time_points; i < f.features.size(); ++i) {
      freq_vals.push_back(f.features[i]);
    }
  }
  EXPECT_LT(std::abs(oracle::mean(time_vals)), 1e-9);
  EXPECT_NEAR(oracle::variance(time_vals), 1.0, 1e-6);
  EXPECT_LT(std::abs(oracle::mean(freq_vals)), 1e-9);
  EXPECT_NEAR(oracle::variance(freq_vals), 1.0, 1e-6);
}

TEST(Fusion, WindowLongerThanSignalFails) {
  FusionConfig cfg;
  cfg.window = 1024;
  cfg.time_points = 1024;
  FusionStats stats;
  stats.fitted = true;
  EXPECT_THROW(fuse_time_frequency(make_signal(std::vector<double>(512, 1.0)), cfg, stats),
               DataError);
}

TEST(Fusion, ZeroVarianceChannelClampsScale) {
  FusionConfig cfg;
  cfg.window = 64;
  cfg.time_points = 64;
  // constant signals: both channels have zero variance
  std::vector<RawSignal> train = {make_signal(std::vector<double>(64, 0.0))};
  const FusionStats stats = fit_fusion_stats(train, cfg);
  EXPECT_EQ(stats.time_scale, 1.0);
  EXPECT_EQ(stats.freq_scale, 1.0);
  const FusedSample f = fuse_time_frequency(train[0], cfg, stats);
  for (double v : f.features) EXPECT_TRUE(std::isfinite(v));
}

TEST(Fusion, DecimationCompressesTimeChannel) {
  FusionConfig cfg;
  cfg.window = 256;
  cfg.time_points = 64;
  std::vector<double> ramp(256);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i);
  std::vector<RawSignal> train = {make_signal(std::move(ramp))};
  const FusionStats stats = fit_fusion_stats(train, cfg);
  const FusedSample f = fuse_time_frequency(train[0], cfg, stats);
  EXPECT_EQ(f.features.size(), 64u + 129u);
}
