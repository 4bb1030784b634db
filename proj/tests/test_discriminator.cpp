#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ossr/discriminator.hpp"
#include "ossr/dvec.hpp"
#include "ossr/rng.hpp"
#include "ossr/weibull.hpp"

using namespace ossr;

namespace {

std::vector<double> weibull_draws(std::size_t n, double shape, double scale, double shift,
                                  std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(n);
  for (double& d : out) d = weibull_sample(rng.uniform(), shape, scale, shift);
  return out;
}

DvecModel passthrough_model(std::size_t dim, const std::vector<int>& known) {
  DvecConfig cfg;
  cfg.hidden = {};
  cfg.latent_dim = dim;
  DvecModel m = build_model(dim, known, cfg);
  std::fill(m.mu_head.weight.value.begin(), m.mu_head.weight.value.end(), 0.0);
  for (std::size_t i = 0; i < dim; ++i) m.mu_head.weight.value[i * dim + i] = 1.0;
  std::fill(m.mu_head.bias.value.begin(), m.mu_head.bias.value.end(), 0.0);
  std::fill(m.logvar_head.weight.value.begin(), m.logvar_head.weight.value.end(), 0.0);
  std::fill(m.logvar_head.bias.value.begin(), m.logvar_head.bias.value.end(), 0.0);
  return m;
}

}  // namespace

TEST(WeibullProb, ZeroAtLocation) {
  const WeibullParams p{2.0, 1.7, 0.8};
  EXPECT_EQ(weibull_outlier_prob(2.0, p), 0.0);
}

TEST(WeibullProb, UnitScalePointIsOneMinusInvE) {
  const WeibullParams p{5.0, 2.0, 1.5};
  const double expected = 1.0 - std::exp(-1.0);
  EXPECT_NEAR(weibull_outlier_prob(5.0 + 1.5, p), expected, 1e-9);
  EXPECT_NEAR(weibull_outlier_prob(5.0 - 1.5, p), expected, 1e-9);
}

TEST(WeibullProb, StrictlyIncreasingInDistanceFromLocation) {
  const WeibullParams p{1.0, 1.3, 0.7};
  double prev = -1.0;
  for (double d = 1.0; d < 6.0; d += 0.25) {
    const double prob = weibull_outlier_prob(d, p);
    EXPECT_GT(prob, prev);
    EXPECT_GE(prob, 0.0);
    EXPECT_LT(prob, 1.0);
    prev = prob;
  }
}

TEST(WeibullFit, RecoversKnownParameters) {
  const auto draws = weibull_draws(1000, 2.0, 1.0, 5.0, 321);
  const WeibullParams p = fit_weibull(draws, 1.0);
  EXPECT_NEAR(p.shape, 2.0, 0.10) << "within 5% of the true shape";
  EXPECT_NEAR(p.scale, 1.0, 0.05) << "within 5% of the true scale";
  EXPECT_NEAR(p.location, 5.0, 0.15);
}

TEST(WeibullFit, KnownLocationRemovesAnchorBias) {
  const auto draws = weibull_draws(1000, 2.0, 1.0, 5.0, 321);
  const WeibullParams p = fit_weibull(draws, 1.0, 5.0);
  EXPECT_EQ(p.location, 5.0);
  EXPECT_NEAR(p.shape, 2.0, 0.10);
  EXPECT_NEAR(p.scale, 1.0, 0.05);
  EXPECT_THROW(fit_weibull(draws, 1.0, 10.0), UsageError) << "location above the tail";
}

TEST(WeibullFit, AgreesWithGridSearchOracle) {
  const auto draws = weibull_draws(1000, 2.0, 1.0, 5.0, 321);
  const WeibullParams p = fit_weibull(draws, 1.0);

  // grid search on exactly the same shifted data the fitter used
  std::vector<double> shifted;
  shifted.reserve(draws.size());
  for (double d : draws) shifted.push_back(d - p.location);
  const auto grid = oracle::weibull_grid_mle(shifted);
  EXPECT_NEAR(p.shape, grid.shape, 0.01 * grid.shape);
  EXPECT_NEAR(p.scale, grid.scale, 0.01 * grid.scale);
}

TEST(WeibullFit, TooFewOrDegenerateSamplesFail) {
  EXPECT_THROW(fit_weibull(std::vector<double>(10, 1.0), 1.0), DataError);
  EXPECT_THROW(fit_weibull(std::vector<double>(50, 3.25), 1.0), NumericError);
  std::vector<double> with_negative(30, 1.0);
  with_negative[7] = -0.5;
  EXPECT_THROW(fit_weibull(with_negative, 1.0), DataError);
}

TEST(WeibullFit, ScaleEquivariant) {
  const auto draws = weibull_draws(400, 1.6, 2.0, 3.0, 99);
  const WeibullParams base = fit_weibull(draws, 0.5);

  const double c = 7.25;
  std::vector<double> scaled;
  scaled.reserve(draws.size());
  for (double d : draws) scaled.push_back(c * d);
  const WeibullParams s = fit_weibull(scaled, 0.5);

  EXPECT_NEAR(s.shape, base.shape, 1e-6 * base.shape);
  EXPECT_NEAR(s.scale, c * base.scale, 1e-6 * c * base.scale);
  EXPECT_NEAR(s.location, c * base.location, 1e-6 * c * base.location);
}

TEST(WeibullFit, TailOnlyUsesUpperQuantile) {
  // mixture: bulk far below, Weibull tail on top; a tail fit should track the top
  auto tail = weibull_draws(300, 2.5, 0.4, 6.0, 55);
  std::vector<double> data(2700, 1.0);
  Rng rng(56);
  for (double& d : data) d = rng.uniform(0.0, 2.0);
  data.insert(data.end(), tail.begin(), tail.end());
  const WeibullParams p = fit_weibull(data, 0.10);
  EXPECT_GE(p.location, 2.0) << "tail fit anchored inside the bulk";
}

TEST(Threshold, AlphaZeroIsMaxAndNothingExceeds) {
  const std::vector<double> vals = {0.2, 0.9, 0.4, 0.7};
  const double thr = upper_tail_threshold(vals, 0.0);
  EXPECT_EQ(thr, 0.9);
  for (double v : vals) EXPECT_LE(v, thr);
}

TEST(Threshold, Alpha50OnTenValues) {
  std::vector<double> vals;
  for (int i = 1; i <= 10; ++i) vals.push_back(0.1 * i);
  const double thr = upper_tail_threshold(vals, 50.0);
  EXPECT_NEAR(thr, 0.5, 1e-12);
  int above = 0;
  for (double v : vals) above += v > thr ? 1 : 0;
  EXPECT_EQ(above, 5);
}

TEST(Entropy, OneHotIsZero) {
  EXPECT_EQ(shannon_entropy({1.0, 0.0, 0.0}), 0.0);
}

TEST(Entropy, UniformIsLogK) {
  EXPECT_NEAR(shannon_entropy({0.5, 0.5}), std::log(2.0), 1e-12);
  EXPECT_NEAR(shannon_entropy({0.25, 0.25, 0.25, 0.25}), std::log(4.0), 1e-12);
}

TEST(Entropy, KnownSpotValue) {
  EXPECT_NEAR(shannon_entropy({0.7, 0.2, 0.1}), 0.801819, 1e-6);
}

TEST(Entropy, PermutationInvariantAndBounded) {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(5);
    double s = 0.0;
    for (double& v : p) {
      v = rng.uniform(0.0, 1.0) + 1e-9;
      s += v;
    }
    for (double& v : p) v /= s;
    const double h = shannon_entropy(p);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log(5.0) + 1e-12);

    std::vector<double> q = p;
    rng.shuffle(q);
    EXPECT_NEAR(shannon_entropy(q), h, 1e-12);
  }
}

TEST(Entropy, MalformedDistributionRejected) {
  EXPECT_THROW(shannon_entropy({0.7, 0.7}), DataError);
  EXPECT_THROW(shannon_entropy({1.2, -0.2}), DataError);
  EXPECT_THROW(shannon_entropy({}), UsageError);
}

TEST(CalibrateEvt, ReplayFlagsAlphaPercent) {
  // 200 validation distances per class, alpha = 5 -> 10 +- 1 flagged on replay
  DvecModel m = passthrough_model(2, {0});
  ClassStats stats;
  stats.centers = {{0.0, 0.0}};
  stats.val_distances = {weibull_draws(200, 2.0, 1.0, 0.5, 1001)};
  stats.train_distances = {{}};

  const auto classes = calibrate_evt(m, stats, 5.0, 1.0);
  ASSERT_EQ(classes.size(), 1u);
  int flagged = 0;
  for (double d : stats.val_distances[0]) {
    flagged += weibull_outlier_prob(d, classes[0].weibull) > classes[0].cdf_threshold ? 1 : 0;
  }
  EXPECT_GE(flagged, 9);
  EXPECT_LE(flagged, 11);
}

TEST(CalibrateEvt, SmallValidationListsAreToppedUpFromTraining) {
  DvecModel m = passthrough_model(2, {0});
  ClassStats stats;
  stats.centers = {{0.0, 0.0}};
  stats.val_distances = {weibull_draws(10, 2.0, 1.0, 0.5, 1002)};
  stats.train_distances = {weibull_draws(80, 2.0, 1.0, 0.5, 1003)};

  const auto classes = calibrate_evt(m, stats, 5.0, 0.10);
  EXPECT_GT(classes[0].weibull.shape, 0.0);
  EXPECT_LT(classes[0].cdf_threshold, 1.0);
}

TEST(CalibrateEvt, EmptyValidationListFails) {
  DvecModel m = passthrough_model(2, {0});
  ClassStats stats;
  stats.centers = {{0.0, 0.0}};
  stats.val_distances = {{}};
  stats.train_distances = {{}};
  EXPECT_THROW(calibrate_evt(m, stats, 5.0, 0.1), DataError);
}

TEST(CalibrateEntropy, SingleClassIsNotApplicable) {
  ValPredictions vp;
  vp.softmax = {{1.0}};
  vp.predicted_dense = {0};
  EXPECT_THROW(calibrate_entropy(vp, 1, 5.0), NotApplicableError);
}

TEST(CalibrateEntropy, ConstantEntropiesFlagNothingOnReplay) {
  ValPredictions vp;
  for (int i = 0; i < 40; ++i) {
    vp.softmax.push_back({0.5, 0.5});
    vp.predicted_dense.push_back(i % 2);
  }
  const auto thresholds = calibrate_entropy(vp, 2, 5.0);
  const double h = shannon_entropy({0.5, 0.5});
  for (double t : thresholds) EXPECT_EQ(t, h);
  // replay: nothing strictly above the constant
  for (const auto& p : vp.softmax) EXPECT_FALSE(shannon_entropy(p) > thresholds[0]);
}

TEST(CalibrateEntropy, ReplayFlagsAlphaPercent) {
  ValPredictions vp;
  Rng rng(2024);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> p(3);
    double s = 0.0;
    for (double& v : p) {
      v = std::exp(rng.uniform(0.0, 4.0));
      s += v;
    }
    for (double& v : p) v /= s;
    vp.softmax.push_back(p);
    vp.predicted_dense.push_back(0);
  }
  for (int i = 0; i < 50; ++i) {
    vp.softmax.push_back({0.1, 0.8, 0.1});
    vp.predicted_dense.push_back(1);
  }
  for (int i = 0; i < 50; ++i) {
    vp.softmax.push_back({0.05, 0.05, 0.9});
    vp.predicted_dense.push_back(2);
  }

  const auto thresholds = calibrate_entropy(vp, 3, 5.0);
  int flagged = 0, class0 = 0;
  for (std::size_t i = 0; i < vp.softmax.size(); ++i) {
    if (vp.predicted_dense[i] != 0) continue;
    ++class0;
    flagged += shannon_entropy(vp.softmax[i]) > thresholds[0] ? 1 : 0;
  }
  ASSERT_EQ(class0, 200);
  EXPECT_GE(flagged, 9);
  EXPECT_LE(flagged, 11);
}

TEST(CalibrateEntropy, MissingPredictedClassFails) {
  ValPredictions vp;
  vp.softmax = {{0.9, 0.1}, {0.8, 0.2}};
  vp.predicted_dense = {0, 0};  // class 1 never predicted
  EXPECT_THROW(calibrate_entropy(vp, 2, 5.0), DataError);
}

namespace {

Calibration two_class_calibration() {
  Calibration cal;
  cal.alpha = 5.0;
  cal.tail_fraction = 1.0;
  cal.entropy_applicable = true;
  ClassCalibration c0;
  c0.class_id = 7;
  c0.center = {0.0, 0.0};
  c0.weibull = {0.0, 2.0, 1.0};
  c0.cdf_threshold = 0.9;
  c0.entropy_threshold = 0.5;
  ClassCalibration c1;
  c1.class_id = 8;
  c1.center = {5.0, 5.0};
  c1.weibull = {0.0, 2.0, 1.0};
  c1.cdf_threshold = 0.9;
  c1.entropy_threshold = 0.5;
  cal.classes = {c0, c1};
  return cal;
}

DvecModel two_class_model() {
  DvecModel m = passthrough_model(2, {7, 8});
  // strong bias makes the classifier confidently pick class 7 near the origin
  m.classifier.weight.value = {-1.0, -1.0, 1.0, 1.0};
  m.classifier.bias.value = {30.0, -30.0};
  return m;
}

}  // namespace

TEST(Discriminate, CenterSampleIsKnownUnderEveryPolicy) {
  const DvecModel m = two_class_model();
  const Calibration cal = two_class_calibration();
  const std::vector<double> at_center = {0.0, 0.0};

  for (Policy p : {Policy::Evt, Policy::Entropy, Policy::OpennessGated}) {
    const Verdict v = discriminate(m, cal, at_center, p, 0.5);
    EXPECT_EQ(v.predicted, 7) << policy_name(p);
    EXPECT_EQ(v.outlier_prob, 0.0);
    EXPECT_LT(v.entropy, 1e-10);
  }
}

TEST(Discriminate, ExtremeOutlierIsUnknownUnderEvt) {
  const DvecModel m = two_class_model();
  const Calibration cal = two_class_calibration();
  const std::vector<double> far = {100.0, 100.0};
  const Verdict v = discriminate(m, cal, far, Policy::Evt, 0.5);
  EXPECT_GT(v.outlier_prob, 1.0 - 1e-9);
  EXPECT_EQ(v.predicted, kUnknownClass);
}

TEST(Discriminate, GatedPolicySwitchesOnOpenness) {
  const DvecModel m = two_class_model();
  Calibration cal = two_class_calibration();
  // make EVT reject and entropy accept at a mildly offset point
  cal.classes[0].cdf_threshold = 0.0001;
  cal.classes[0].entropy_threshold = 10.0;
  const std::vector<double> x = {0.8, 0.0};

  // high openness -> EVT branch -> reject
  const Verdict high = discriminate(m, cal, x, Policy::OpennessGated, 0.5918);
  EXPECT_EQ(high.predicted, kUnknownClass);
  // low openness -> entropy branch -> accept
  const Verdict low = discriminate(m, cal, x, Policy::OpennessGated, 0.0871);
  EXPECT_EQ(low.predicted, 7);
}

TEST(Discriminate, EntropyPolicyWithSingleClassIsNotApplicable) {
  DvecModel m = passthrough_model(2, {3});
  Calibration cal;
  cal.entropy_applicable = false;
  ClassCalibration c;
  c.class_id = 3;
  c.center = {0.0, 0.0};
  c.weibull = {0.0, 2.0, 1.0};
  c.cdf_threshold = 0.9;
  cal.classes = {c};

  EXPECT_THROW(discriminate(m, cal, {0.0, 0.0}, Policy::Entropy, 0.6), NotApplicableError);
  // EVT still works for one known class
  const Verdict v = discriminate(m, cal, {0.0, 0.0}, Policy::Evt, 0.6);
  EXPECT_EQ(v.predicted, 3);
}

TEST(CalibrationFile, RoundTrips) {
  const Calibration cal = two_class_calibration();
  const auto path = std::filesystem::temp_directory_path() / "ossr_cal_test.json";
  save_calibration(path, cal);
  const Calibration loaded = load_calibration(path);

  EXPECT_EQ(loaded.alpha, cal.alpha);
  EXPECT_EQ(loaded.entropy_applicable, cal.entropy_applicable);
  ASSERT_EQ(loaded.classes.size(), cal.classes.size());
  for (std::size_t k = 0; k < cal.classes.size(); ++k) {
    EXPECT_EQ(loaded.classes[k].class_id, cal.classes[k].class_id);
    EXPECT_EQ(loaded.classes[k].weibull.shape, cal.classes[k].weibull.shape);
    EXPECT_EQ(loaded.classes[k].cdf_threshold, cal.classes[k].cdf_threshold);
    EXPECT_EQ(loaded.classes[k].center, cal.classes[k].center);
  }
}
