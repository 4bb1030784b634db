#include <cmath>
#include <filesystem>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ossr/dvec.hpp"
#include "ossr/rng.hpp"

using namespace ossr;

namespace {

DvecConfig small_cfg() {
  DvecConfig cfg;
  cfg.hidden = {16, 12};
  cfg.latent_dim = 6;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  cfg.seed = 42;
  return cfg;
}

std::vector<FusedSample> blob_dataset(std::size_t per_class, std::size_t dim, Rng& rng,
                                      const std::vector<int>& labels) {
  // well-separated Gaussian blobs, one per label
  std::vector<FusedSample> out;
  for (std::size_t c = 0; c < labels.size(); ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      FusedSample s;
      s.label = labels[c];
      s.features.resize(dim);
      for (std::size_t j = 0; j < dim; ++j) {
        const double center = (j % labels.size()) == c ? 3.0 : -1.0;
        s.features[j] = center + 0.3 * rng.normal();
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

/// Model with no trunk whose mu head is the identity: latents == features.
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

TEST(Encode, EvaluationModeReturnsMu) {
  DvecConfig cfg = small_cfg();
  DvecModel m = build_model(10, {0, 1}, cfg);
  Rng rng(3);
  std::vector<double> x(10);
  for (double& v : x) v = rng.normal();
  const Encoding e = encode(m, x);
  for (std::size_t i = 0; i < e.z.size(); ++i) EXPECT_EQ(e.z[i], e.mu[i]);
}

TEST(Encode, SameNoiseGivesSameLatent) {
  DvecConfig cfg = small_cfg();
  DvecModel m = build_model(10, {0, 1}, cfg);
  Rng rng(4);
  std::vector<double> x(10), eps(cfg.latent_dim);
  for (double& v : x) v = rng.normal();
  for (double& v : eps) v = rng.normal();
  const Encoding a = encode(m, x, &eps);
  const Encoding b = encode(m, x, &eps);
  for (std::size_t i = 0; i < a.z.size(); ++i) EXPECT_EQ(a.z[i], b.z[i]);
}

TEST(Encode, ZeroedLogVarHeadGivesUnitVariance) {
  DvecConfig cfg = small_cfg();
  DvecModel m = build_model(10, {0, 1}, cfg);
  std::fill(m.logvar_head.weight.value.begin(), m.logvar_head.weight.value.end(), 0.0);
  std::fill(m.logvar_head.bias.value.begin(), m.logvar_head.bias.value.end(), 0.0);
  std::vector<double> x(10, 0.7);
  const Encoding e = encode(m, x);
  for (double v : e.var) EXPECT_EQ(v, 1.0);
}

TEST(KlGaussian, StandardNormalPosteriorIsZero) {
  const std::vector<double> mu(8, 0.0), var(8, 1.0);
  EXPECT_NEAR(kl_gaussian(mu, var), 0.0, 1e-12);
}

TEST(KlGaussian, UnitMeanOneDimIsHalf) {
  EXPECT_NEAR(kl_gaussian({1.0}, {1.0}), 0.5, 1e-12);
}

TEST(KlGaussian, NonPositiveVarianceThrows) {
  EXPECT_THROW(kl_gaussian({0.0}, {0.0}), UsageError);
  EXPECT_THROW(kl_gaussian({0.0}, {-1.0}), UsageError);
}

TEST(KlGaussian, NonNegativeAndZeroOnlyAtPrior) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> mu(4), var(4);
    for (std::size_t i = 0; i < 4; ++i) {
      mu[i] = rng.uniform(-2.0, 2.0);
      var[i] = rng.uniform(0.1, 4.0);
    }
    const double kl = kl_gaussian(mu, var);
    EXPECT_GE(kl, 0.0);
    // equality within 1e-12 only at the prior itself
    double dev = 0.0;
    for (std::size_t i = 0; i < 4; ++i) dev += std::abs(mu[i]) + std::abs(var[i] - 1.0);
    if (kl < 1e-12) EXPECT_LT(dev, 1e-5);
  }
}

TEST(KlGaussian, MatchesMonteCarloEstimate) {
  Rng param_rng(6);
  Rng mc_rng(7);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<double> mu(8), var(8);
    for (std::size_t i = 0; i < 8; ++i) {
      mu[i] = param_rng.uniform(-2.0, 2.0);
      var[i] = param_rng.uniform(0.25, 4.0);
    }
    const double exact = kl_gaussian(mu, var);
    const double estimate = oracle::mc_kl_standard_normal(mu, var, 200000, mc_rng);
    EXPECT_NEAR(estimate, exact, 0.02 * std::max(1.0, exact));
  }
}

TEST(KlGateWeight, MisclassifiedIsZero) {
  EXPECT_EQ(kl_gate_weight(100, 1, 2, small_cfg()), 0.0);
}

TEST(KlGateWeight, SaturatesAfterWarmup) {
  DvecConfig cfg = small_cfg();
  cfg.kl_warmup_epochs = 10;
  EXPECT_EQ(kl_gate_weight(10, 1, 1, cfg), 1.0);
  EXPECT_EQ(kl_gate_weight(50, 1, 1, cfg), 1.0);
}

TEST(KlGateWeight, FloorAppliesAtEpochZero) {
  DvecConfig cfg = small_cfg();
  cfg.kl_warmup_epochs = 10;
  cfg.kl_min_weight = 0.1;
  EXPECT_DOUBLE_EQ(kl_gate_weight(0, 1, 1, cfg), 0.1);
}

TEST(KlGateWeight, NoWarmupMeansFullWeight) {
  DvecConfig cfg = small_cfg();
  cfg.kl_warmup_epochs = 0;
  EXPECT_EQ(kl_gate_weight(0, 1, 1, cfg), 1.0);
}

TEST(KlGateWeight, RangeIsZeroOrAboveFloor) {
  DvecConfig cfg = small_cfg();
  cfg.kl_warmup_epochs = 7;
  cfg.kl_min_weight = 0.25;
  for (std::size_t epoch = 0; epoch < 20; ++epoch) {
    for (int pred = 0; pred < 3; ++pred) {
      const double w = kl_gate_weight(epoch, 1, pred, cfg);
      if (pred != 1) {
        EXPECT_EQ(w, 0.0);
      } else {
        EXPECT_GE(w, cfg.kl_min_weight);
        EXPECT_LE(w, 1.0);
      }
    }
  }
}

TEST(DvecLoss, ZeroLambdaEqualsPlainCrossEntropyBitwise) {
  DvecConfig cfg = small_cfg();
  DvecModel m = build_model(12, {0, 1, 2}, cfg);
  Rng rng(8);
  nn::Mat x(6, 12);
  for (double& v : x.data) v = rng.normal();
  std::vector<int> y = {0, 1, 2, 0, 1, 2};
  std::vector<nn::Mat> eps(1);
  eps[0] = nn::Mat(6, cfg.latent_dim);
  for (double& v : eps[0].data) v = rng.normal();

  const std::vector<double> zeros(6, 0.0);
  const BatchLoss with_zero = dvec_batch_loss(m, x, y, 0, eps, cfg, false, &zeros);
  EXPECT_EQ(with_zero.loss, with_zero.ce);
  EXPECT_EQ(with_zero.kl, 0.0);
}

TEST(DvecLoss, StandardPosteriorHasZeroKl) {
  DvecConfig cfg = small_cfg();
  DvecModel m = build_model(12, {0, 1}, cfg);
  // zero both heads: mu = 0, logvar = 0 -> KL exactly 0
  std::fill(m.mu_head.weight.value.begin(), m.mu_head.weight.value.end(), 0.0);
  std::fill(m.mu_head.bias.value.begin(), m.mu_head.bias.value.end(), 0.0);
  std::fill(m.logvar_head.weight.value.begin(), m.logvar_head.weight.value.end(), 0.0);
  std::fill(m.logvar_head.bias.value.begin(), m.logvar_head.bias.value.end(), 0.0);

  Rng rng(9);
  nn::Mat x(4, 12);
  for (double& v : x.data) v = rng.normal();
  std::vector<int> y = {0, 1, 0, 1};
  std::vector<nn::Mat> eps(1);
  eps[0] = nn::Mat(4, cfg.latent_dim);
  for (double& v : eps[0].data) v = rng.normal();

  const std::vector<double> ones(4, 1.0);
  const BatchLoss bl = dvec_batch_loss(m, x, y, 0, eps, cfg, false, &ones);
  EXPECT_EQ(bl.kl, 0.0);
  EXPECT_EQ(bl.loss, bl.ce);
}

TEST(DvecLoss, UnknownLabelInBatchThrows) {
  DvecConfig cfg = small_cfg();
  DvecModel m = build_model(12, {0, 1}, cfg);
  nn::Mat x(2, 12);
  std::vector<int> y = {0, 5};
  std::vector<nn::Mat> eps(1);
  eps[0] = nn::Mat(2, cfg.latent_dim);
  EXPECT_THROW(dvec_batch_loss(m, x, y, 0, eps, cfg, false), DataError);
}

TEST(DvecLoss, GradientsMatchFiniteDifferences) {
  DvecConfig cfg = small_cfg();
  cfg.hidden = {14, 10};
  cfg.latent_dim = 5;
  DvecModel m = build_model(9, {0, 1, 2}, cfg);

  Rng rng(10);
  nn::Mat x(6, 9);
  for (double& v : x.data) v = rng.normal();
  std::vector<int> y = {0, 1, 2, 2, 1, 0};
  std::vector<nn::Mat> eps(2);  // exercise the multi-draw path too
  for (auto& e : eps) {
    e = nn::Mat(6, cfg.latent_dim);
    for (double& v : e.data) v = rng.normal();
  }
  cfg.latent_samples = 2;

  // pin gate weights at the base point so probes stay smooth
  std::vector<double> lambda(6);
  {
    const auto before = dvec_batch_loss(m, x, y, 2, eps, cfg, false);
    (void)before;
    for (std::size_t r = 0; r < 6; ++r) lambda[r] = 0.5;  // fixed weights exercise the KL path
  }

  auto loss = [&]() { return dvec_batch_loss(m, x, y, 2, eps, cfg, false, &lambda).loss; };
  auto grads = [&]() { dvec_batch_loss(m, x, y, 2, eps, cfg, true, &lambda); };
  Rng probe(11);
  const auto reports = nn::finite_difference_check(m.parameters(), loss, grads, 25, probe);
  for (const auto& r : reports) {
    EXPECT_TRUE(r.pass) << r.tensor << " rel " << r.max_rel_err << " abs " << r.max_abs_err;
  }
}

TEST(DvecLoss, ClassConditionalPriorGradientsMatch) {
  DvecConfig cfg = small_cfg();
  cfg.class_conditional_prior = true;
  cfg.prior_anchor_radius = 2.0;
  DvecModel m = build_model(8, {0, 1}, cfg);

  Rng rng(12);
  nn::Mat x(4, 8);
  for (double& v : x.data) v = rng.normal();
  std::vector<int> y = {0, 1, 1, 0};
  std::vector<nn::Mat> eps(1);
  eps[0] = nn::Mat(4, cfg.latent_dim);
  for (double& v : eps[0].data) v = rng.normal();
  const std::vector<double> lambda(4, 1.0);

  auto loss = [&]() { return dvec_batch_loss(m, x, y, 0, eps, cfg, false, &lambda).loss; };
  auto grads = [&]() { dvec_batch_loss(m, x, y, 0, eps, cfg, true, &lambda); };
  Rng probe(13);
  const auto reports = nn::finite_difference_check(m.parameters(), loss, grads, 20, probe);
  for (const auto& r : reports) EXPECT_TRUE(r.pass) << r.tensor;
}

TEST(Train, ZeroEpochsLeavesModelUnchanged) {
  DvecConfig cfg = small_cfg();
  cfg.epochs = 0;
  DvecModel m = build_model(8, {0, 1}, cfg);
  const auto before = m.mu_head.weight.value;

  Rng rng(14);
  const auto data = blob_dataset(4, 8, rng, {0, 1});
  const TrainResult r = train(m, data, data, cfg);
  EXPECT_TRUE(r.history.empty());
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(m.mu_head.weight.value[i], before[i]);
}

TEST(Train, DeterministicGivenSeed) {
  DvecConfig cfg = small_cfg();
  cfg.epochs = 4;
  Rng rng(15);
  const auto data = blob_dataset(6, 10, rng, {0, 1, 2});

  DvecModel m1 = build_model(10, {0, 1, 2}, cfg);
  DvecModel m2 = build_model(10, {0, 1, 2}, cfg);
  const TrainResult r1 = train(m1, data, data, cfg);
  const TrainResult r2 = train(m2, data, data, cfg);

  ASSERT_EQ(r1.history.size(), r2.history.size());
  for (std::size_t e = 0; e < r1.history.size(); ++e) {
    EXPECT_EQ(r1.history[e].train_loss, r2.history[e].train_loss);
    EXPECT_EQ(r1.history[e].val_accuracy, r2.history[e].val_accuracy);
  }
  const auto p1 = m1.parameters();
  const auto p2 = m2.parameters();
  for (std::size_t t = 0; t < p1.size(); ++t) {
    for (std::size_t i = 0; i < p1[t]->size(); ++i) {
      EXPECT_EQ(p1[t]->value[i], p2[t]->value[i]);
    }
  }
}

TEST(Train, LearnsSeparableBlobs) {
  DvecConfig cfg = small_cfg();
  cfg.epochs = 30;
  Rng rng(16);
  const auto train_data = blob_dataset(20, 12, rng, {0, 1, 2});
  const auto val_data = blob_dataset(6, 12, rng, {0, 1, 2});

  DvecModel m = build_model(12, {0, 1, 2}, cfg);
  const TrainResult r = train(m, train_data, val_data, cfg);
  EXPECT_GE(r.best_val_accuracy, 0.95);
  EXPECT_EQ(r.history.size(), cfg.epochs);
}

TEST(Train, UnknownLabelRejected) {
  DvecConfig cfg = small_cfg();
  DvecModel m = build_model(8, {0, 1}, cfg);
  Rng rng(17);
  auto data = blob_dataset(4, 8, rng, {0, 1});
  data[0].label = 4;
  EXPECT_THROW(train(m, data, data, cfg), DataError);
}

TEST(ClassStats, CenterAndDistanceArithmetic) {
  DvecModel m = passthrough_model(2, {0});
  std::vector<FusedSample> train_split = {{{0.0, 0.0}, 0}, {{3.0, 4.0}, 0}};
  std::vector<FusedSample> val_split = train_split;

  const ClassStats stats = extract_class_stats(m, train_split, val_split);
  ASSERT_EQ(stats.centers.size(), 1u);
  EXPECT_DOUBLE_EQ(stats.centers[0][0], 1.5);
  EXPECT_DOUBLE_EQ(stats.centers[0][1], 2.0);
  ASSERT_EQ(stats.val_distances[0].size(), 2u);
  EXPECT_DOUBLE_EQ(stats.val_distances[0][0], 2.5);
  EXPECT_DOUBLE_EQ(stats.val_distances[0][1], 2.5);
}

TEST(ClassStats, IdenticalLatentsGiveZeroSelfDistance) {
  DvecModel m = passthrough_model(3, {0});
  std::vector<FusedSample> split = {{{1.0, 2.0, 3.0}, 0}, {{1.0, 2.0, 3.0}, 0}};
  const ClassStats stats = extract_class_stats(m, split, split);
  for (double d : stats.val_distances[0]) EXPECT_EQ(d, 0.0);
  EXPECT_DOUBLE_EQ(stats.centers[0][2], 3.0);
}

TEST(ClassStats, WithinClassTighterThanBetweenClass) {
  DvecConfig cfg = small_cfg();
  cfg.epochs = 25;
  Rng rng(18);
  const auto train_data = blob_dataset(20, 12, rng, {0, 1, 2});
  const auto val_data = blob_dataset(6, 12, rng, {0, 1, 2});
  DvecModel m = build_model(12, {0, 1, 2}, cfg);
  train(m, train_data, val_data, cfg);

  const ClassStats stats = extract_class_stats(m, train_data, val_data);
  double within = 0.0;
  std::size_t n = 0;
  for (const auto& lst : stats.val_distances) {
    for (double d : lst) {
      within += d;
      ++n;
    }
  }
  within /= static_cast<double>(n);

  double between = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = a + 1; b < 3; ++b) {
      double d = 0.0;
      for (std::size_t j = 0; j < stats.centers[a].size(); ++j) {
        const double diff = stats.centers[a][j] - stats.centers[b][j];
        d += diff * diff;
      }
      between += std::sqrt(d);
      ++pairs;
    }
  }
  between /= static_cast<double>(pairs);
  EXPECT_LT(within, between);
}

TEST(Checkpoint, SaveLoadRoundTripsModelAndFusion) {
  DvecConfig cfg = small_cfg();
  DvecModel m = build_model(10, {2, 3}, cfg);
  FusionConfig fusion;
  fusion.window = 8;
  fusion.time_points = 8;
  FusionStats stats;
  stats.time_mean = 0.5;
  stats.time_scale = 2.0;
  stats.freq_mean = -0.25;
  stats.freq_scale = 1.5;
  stats.fitted = true;

  const auto path = std::filesystem::temp_directory_path() / "ossr_dvec_ckpt.bin";
  save_model(path, m, cfg, fusion, stats);
  const ModelBundle b = load_model(path);

  EXPECT_EQ(b.model.input_dim, 10u);
  EXPECT_EQ(b.model.known_class_ids, (std::vector<int>{2, 3}));
  EXPECT_EQ(b.fusion_cfg.window, 8u);
  EXPECT_EQ(b.fusion_stats.time_scale, 2.0);

  const auto pa = m.parameters();
  const auto pb = b.model.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t t = 0; t < pa.size(); ++t) {
    ASSERT_EQ(pa[t]->size(), pb[t]->size());
    for (std::size_t i = 0; i < pa[t]->size(); ++i) {
      EXPECT_EQ(pa[t]->value[i], pb[t]->value[i]);
    }
  }

  // evaluation agrees after reload
  Rng rng(19);
  std::vector<double> x(10);
  for (double& v : x) v = rng.normal();
  const Encoding ea = encode(m, x);
  const Encoding eb = encode(b.model, x);
  for (std::size_t i = 0; i < ea.mu.size(); ++i) EXPECT_EQ(ea.mu[i], eb.mu[i]);
}

TEST(Softmax, RowsSumToOneAndStayPositive) {
  Rng rng(20);
  nn::Mat logits(50, 6);
  for (double& v : logits.data) v = rng.uniform(-30.0, 30.0);
  const nn::Mat p = nn::softmax_rows(logits);
  for (std::size_t r = 0; r < p.rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < p.cols; ++c) {
      EXPECT_GT(p.at(r, c), 0.0);
      s += p.at(r, c);
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}
