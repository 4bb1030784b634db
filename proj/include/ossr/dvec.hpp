#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ossr/common.hpp"
#include "ossr/nn.hpp"
#include "ossr/rng.hpp"
#include "ossr/signal.hpp"

namespace ossr {

// ----------------------------------------------------------------------------
// Deep variational encoder-classifier.
//
// A dense trunk feeds two parallel heads producing the latent Gaussian
// (mean, log-variance); a linear classifier maps sampled latents to known
// classes. Training minimizes cross-entropy plus a gated KL penalty toward
// the latent prior: the KL weight is zero for misclassified samples and
// ramps from a floor to 1 over a warmup window otherwise, which keeps the
// variational constraint from crushing the latent code early on.
// ----------------------------------------------------------------------------

struct DvecConfig {
  std::vector<std::size_t> hidden = {512, 256, 128};
  std::size_t latent_dim = 32;

  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;
  double learning_rate = 1e-3;

  std::size_t kl_warmup_epochs = 10;  // epochs to ramp the KL weight to 1
  double kl_min_weight = 0.1;         // weight floor for correct samples, in (0,1]
  std::size_t latent_samples = 1;     // reparameterized draws per item

  // Optional per-class prior means (axis-aligned anchors). Off by default:
  // the prior is standard normal.
  bool class_conditional_prior = false;
  double prior_anchor_radius = 3.0;

  void validate() const {
    if (kl_min_weight <= 0.0 || kl_min_weight > 1.0) {
      throw UsageError("dvec: kl_min_weight must be in (0, 1]");
    }
    if (latent_dim < 1) throw UsageError("dvec: latent_dim must be >= 1");
    if (batch_size < 1) throw UsageError("dvec: batch_size must be >= 1");
    if (latent_samples < 1) throw UsageError("dvec: latent_samples must be >= 1");
    if (learning_rate <= 0.0) throw UsageError("dvec: learning_rate must be positive");
  }
};

struct DvecModel {
  std::vector<nn::DenseLayer> trunk;
  nn::DenseLayer mu_head;
  nn::DenseLayer logvar_head;
  nn::DenseLayer classifier;
  std::size_t input_dim = 0;
  std::size_t latent_dim = 0;
  std::vector<int> known_class_ids;  // original ids; position = dense label
  bool class_conditional_prior = false;
  double prior_anchor_radius = 3.0;

  std::size_t class_count() const { return known_class_ids.size(); }

  int dense_label(int original_id) const {
    for (std::size_t k = 0; k < known_class_ids.size(); ++k) {
      if (known_class_ids[k] == original_id) return static_cast<int>(k);
    }
    return -1;
  }

  std::vector<nn::ParamTensor*> parameters() {
    std::vector<nn::ParamTensor*> ps;
    for (auto& l : trunk) {
      ps.push_back(&l.weight);
      ps.push_back(&l.bias);
    }
    ps.push_back(&mu_head.weight);
    ps.push_back(&mu_head.bias);
    ps.push_back(&logvar_head.weight);
    ps.push_back(&logvar_head.bias);
    ps.push_back(&classifier.weight);
    ps.push_back(&classifier.bias);
    return ps;
  }

  std::vector<const nn::ParamTensor*> parameters() const {
    std::vector<const nn::ParamTensor*> ps;
    for (const auto& l : trunk) {
      ps.push_back(&l.weight);
      ps.push_back(&l.bias);
    }
    ps.push_back(&mu_head.weight);
    ps.push_back(&mu_head.bias);
    ps.push_back(&logvar_head.weight);
    ps.push_back(&logvar_head.bias);
    ps.push_back(&classifier.weight);
    ps.push_back(&classifier.bias);
    return ps;
  }

  /// Prior mean for a dense label (all zeros unless class-conditional).
  std::vector<double> prior_mean(int dense) const {
    std::vector<double> m(latent_dim, 0.0);
    if (class_conditional_prior && dense >= 0) {
      m[static_cast<std::size_t>(dense) % latent_dim] = prior_anchor_radius;
    }
    return m;
  }
};

inline DvecModel build_model(std::size_t input_dim, std::vector<int> known_class_ids,
                             const DvecConfig& cfg) {
  cfg.validate();
  if (known_class_ids.empty()) throw UsageError("dvec: need at least one known class");
  Rng rng(derive_stream(cfg.seed, {0x494e49ull /* init */}));

  DvecModel m;
  m.input_dim = input_dim;
  m.latent_dim = cfg.latent_dim;
  m.known_class_ids = std::move(known_class_ids);
  m.class_conditional_prior = cfg.class_conditional_prior;
  m.prior_anchor_radius = cfg.prior_anchor_radius;

  std::size_t in = input_dim;
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
    m.trunk.push_back(nn::DenseLayer::create("trunk" + std::to_string(i), in, cfg.hidden[i],
                                             nn::Activation::Relu, rng));
    in = cfg.hidden[i];
  }
  m.mu_head = nn::DenseLayer::create("mu_head", in, cfg.latent_dim, nn::Activation::Identity, rng);
  m.logvar_head =
      nn::DenseLayer::create("logvar_head", in, cfg.latent_dim, nn::Activation::Identity, rng);
  m.classifier = nn::DenseLayer::create("classifier", cfg.latent_dim, m.class_count(),
                                        nn::Activation::Identity, rng);
  return m;
}

// ----------------------------------------------------------------------------
// Encoding
// ----------------------------------------------------------------------------

struct Encoding {
  std::vector<double> mu;
  std::vector<double> var;  // sigma^2 = exp(logvar)
  std::vector<double> z;
};

/// Single-sample encode. eps == nullptr is deterministic evaluation (z = mu);
/// otherwise z = mu + sigma * eps elementwise.
inline Encoding encode(const DvecModel& model, const std::vector<double>& features,
                       const std::vector<double>* eps = nullptr) {
  if (features.size() != model.input_dim) {
    throw UsageError("encode: feature dim " + std::to_string(features.size()) + " != model input " +
                     std::to_string(model.input_dim));
  }
  nn::Mat x(1, features.size());
  std::copy(features.begin(), features.end(), x.data.begin());
  const auto acts = nn::forward_stack(model.trunk, x);
  const nn::Mat& h = acts.empty() ? x : acts.back();
  const nn::Mat mu = nn::dense_forward(model.mu_head, h);
  const nn::Mat lv = nn::dense_forward(model.logvar_head, h);

  Encoding e;
  e.mu.assign(mu.data.begin(), mu.data.end());
  e.var.resize(model.latent_dim);
  e.z.resize(model.latent_dim);
  if (!all_finite(e.mu) || !all_finite(lv.data)) {
    throw NumericError("encode: non-finite activations");
  }
  for (std::size_t i = 0; i < model.latent_dim; ++i) {
    e.var[i] = std::exp(lv.data[i]);
    const double sigma = std::exp(0.5 * lv.data[i]);
    e.z[i] = eps != nullptr ? e.mu[i] + sigma * (*eps)[i] : e.mu[i];
  }
  return e;
}

// ----------------------------------------------------------------------------
// Loss pieces
// ----------------------------------------------------------------------------

/// KL( N(mu, diag(var)) || N(prior_mean, I) ), closed form, always >= 0.
inline double kl_gaussian(const std::vector<double>& mu, const std::vector<double>& var,
                          const std::vector<double>* prior_mean = nullptr) {
  if (mu.size() != var.size()) throw UsageError("kl_gaussian: mu/var size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!(var[i] > 0.0)) throw UsageError("kl_gaussian: variance must be positive");
    const double m = prior_mean != nullptr ? mu[i] - (*prior_mean)[i] : mu[i];
    kl += m * m + var[i] - std::log(var[i]) - 1.0;
  }
  return 0.5 * kl;
}

/// Gated KL weight: 0 when the classifier currently disagrees with the label,
/// otherwise max(warmup(epoch), floor) in (0, 1].
inline double kl_gate_weight(std::size_t epoch, int label, int predicted, const DvecConfig& cfg) {
  if (label != predicted) return 0.0;
  const double ramp = cfg.kl_warmup_epochs == 0
                          ? 1.0
                          : std::min(1.0, static_cast<double>(epoch) /
                                              static_cast<double>(cfg.kl_warmup_epochs));
  return std::max(ramp, cfg.kl_min_weight);
}

// ----------------------------------------------------------------------------
// Batched training loss
// ----------------------------------------------------------------------------

struct BatchLoss {
  double loss = 0.0;      // mean over the batch
  double ce = 0.0;        // mean cross-entropy part
  double kl = 0.0;        // mean weighted KL part
};

/// Forward (and optionally backward) of the full objective on one batch.
///
/// eps_draws holds latent_samples matrices of shape [B x L]; pass the same
/// draws to get a deterministic loss (finite-difference checks rely on this).
/// lambda_override pins the per-sample KL weights; when null they are
/// recomputed from the first draw's predictions.
inline BatchLoss dvec_batch_loss(DvecModel& model, const nn::Mat& x, const std::vector<int>& y_dense,
                                 std::size_t epoch, const std::vector<nn::Mat>& eps_draws,
                                 const DvecConfig& cfg, bool compute_grads,
                                 const std::vector<double>* lambda_override = nullptr) {
  const std::size_t B = x.rows;
  if (B == 0) throw UsageError("dvec loss: empty batch");
  if (y_dense.size() != B) throw UsageError("dvec loss: label count mismatch");
  const std::size_t K = model.class_count();
  const std::size_t L = model.latent_dim;
  const std::size_t S = eps_draws.size();
  if (S == 0) throw UsageError("dvec loss: need at least one latent draw");
  for (int y : y_dense) {
    if (y < 0 || static_cast<std::size_t>(y) >= K) {
      throw DataError("dvec loss: label outside the known classes");
    }
  }

  std::vector<nn::DenseCache> trunk_caches;
  const auto trunk_acts = nn::forward_stack(model.trunk, x, compute_grads ? &trunk_caches : nullptr);
  const nn::Mat& h = trunk_acts.empty() ? x : trunk_acts.back();

  nn::DenseCache mu_cache, lv_cache;
  const nn::Mat mu = nn::dense_forward(model.mu_head, h, compute_grads ? &mu_cache : nullptr);
  const nn::Mat lv = nn::dense_forward(model.logvar_head, h, compute_grads ? &lv_cache : nullptr);

  nn::Mat sigma(B, L);
  for (std::size_t i = 0; i < sigma.data.size(); ++i) sigma.data[i] = std::exp(0.5 * lv.data[i]);

  // per-draw classifier passes
  std::vector<nn::Mat> zs(S), logits(S), probs(S);
  std::vector<nn::DenseCache> cls_caches(S);
  for (std::size_t s = 0; s < S; ++s) {
    const nn::Mat& eps = eps_draws[s];
    if (eps.rows != B || eps.cols != L) throw UsageError("dvec loss: eps shape mismatch");
    nn::Mat z(B, L);
    for (std::size_t i = 0; i < z.data.size(); ++i) {
      z.data[i] = mu.data[i] + sigma.data[i] * eps.data[i];
    }
    zs[s] = std::move(z);
    logits[s] = nn::dense_forward(model.classifier, zs[s], compute_grads ? &cls_caches[s] : nullptr);
    probs[s] = nn::softmax_rows(logits[s]);
  }

  // KL weights from the first draw's predictions unless pinned by the caller
  std::vector<double> lambda(B);
  if (lambda_override != nullptr) {
    lambda = *lambda_override;
    if (lambda.size() != B) throw UsageError("dvec loss: lambda override size mismatch");
  } else {
    for (std::size_t r = 0; r < B; ++r) {
      const int yhat = static_cast<int>(nn::argmax_row(logits[0], r));
      lambda[r] = kl_gate_weight(epoch, y_dense[r], yhat, cfg);
    }
  }

  BatchLoss out;
  std::vector<double> kl_terms(B);
  for (std::size_t r = 0; r < B; ++r) {
    double ce = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      ce += nn::log_sum_exp(logits[s].row(r), K) -
            logits[s].at(r, static_cast<std::size_t>(y_dense[r]));
    }
    ce /= static_cast<double>(S);

    const auto prior = model.prior_mean(y_dense[r]);
    double kl = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      const double m = mu.at(r, i) - prior[i];
      kl += m * m + std::exp(lv.at(r, i)) - lv.at(r, i) - 1.0;
    }
    kl *= 0.5;
    kl_terms[r] = kl;

    out.ce += ce;
    out.kl += lambda[r] * kl;
    out.loss += ce + lambda[r] * kl;
  }
  const double inv_b = 1.0 / static_cast<double>(B);
  out.ce *= inv_b;
  out.kl *= inv_b;
  out.loss *= inv_b;

  if (!compute_grads) return out;

  // reverse pass
  nn::Mat dmu(B, L), dlv(B, L);
  const double draw_w = inv_b / static_cast<double>(S);
  for (std::size_t s = 0; s < S; ++s) {
    nn::Mat dlogits(B, K);
    for (std::size_t r = 0; r < B; ++r) {
      for (std::size_t c = 0; c < K; ++c) {
        const double onehot = c == static_cast<std::size_t>(y_dense[r]) ? 1.0 : 0.0;
        dlogits.at(r, c) = (probs[s].at(r, c) - onehot) * draw_w;
      }
    }
    const nn::Mat dz = nn::dense_backward(model.classifier, cls_caches[s], dlogits);
    for (std::size_t i = 0; i < dmu.data.size(); ++i) {
      dmu.data[i] += dz.data[i];
      dlv.data[i] += dz.data[i] * 0.5 * sigma.data[i] * eps_draws[s].data[i];
    }
  }
  for (std::size_t r = 0; r < B; ++r) {
    const auto prior = model.prior_mean(y_dense[r]);
    const double w = lambda[r] * inv_b;
    if (w == 0.0) continue;
    for (std::size_t i = 0; i < L; ++i) {
      dmu.at(r, i) += w * (mu.at(r, i) - prior[i]);
      dlv.at(r, i) += w * 0.5 * (std::exp(lv.at(r, i)) - 1.0);
    }
  }

  const bool trunk_nonempty = !model.trunk.empty();
  nn::Mat dh = nn::dense_backward(model.mu_head, mu_cache, dmu, trunk_nonempty);
  if (trunk_nonempty) {
    const nn::Mat dh2 = nn::dense_backward(model.logvar_head, lv_cache, dlv, true);
    for (std::size_t i = 0; i < dh.data.size(); ++i) dh.data[i] += dh2.data[i];
    nn::backward_stack(model.trunk, trunk_caches, std::move(dh));
  } else {
    nn::dense_backward(model.logvar_head, lv_cache, dlv, false);
  }
  return out;
}

// ----------------------------------------------------------------------------
// Batch assembly and evaluation
// ----------------------------------------------------------------------------

namespace detail {

inline nn::Mat gather_features(const std::vector<FusedSample>& samples,
                               const std::vector<std::size_t>& idx, std::size_t input_dim) {
  nn::Mat x(idx.size(), input_dim);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& f = samples[idx[r]].features;
    if (f.size() != input_dim) throw UsageError("inconsistent feature dimension in dataset");
    std::copy(f.begin(), f.end(), x.row(r));
  }
  return x;
}

}  // namespace detail

struct EvalOutput {
  nn::Mat mu;          // [N x L], evaluation mode latents
  nn::Mat probs;       // [N x K]
  std::vector<int> predicted_dense;
};

/// Deterministic evaluation pass (z = mu) over a whole sample list.
inline EvalOutput evaluate_samples(const DvecModel& model, const std::vector<FusedSample>& samples,
                                   std::size_t batch_size = 256) {
  EvalOutput out;
  out.mu = nn::Mat(samples.size(), model.latent_dim);
  out.probs = nn::Mat(samples.size(), model.class_count());
  out.predicted_dense.resize(samples.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t stop = std::min(samples.size(), start + batch_size);
    idx.clear();
    for (std::size_t i = start; i < stop; ++i) idx.push_back(i);
    const nn::Mat x = detail::gather_features(samples, idx, model.input_dim);
    const auto acts = nn::forward_stack(model.trunk, x);
    const nn::Mat& h = acts.empty() ? x : acts.back();
    const nn::Mat mu = nn::dense_forward(model.mu_head, h);
    const nn::Mat logits = nn::dense_forward(model.classifier, mu);
    const nn::Mat probs = nn::softmax_rows(logits);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::copy(mu.row(r), mu.row(r) + model.latent_dim, out.mu.row(idx[r]));
      std::copy(probs.row(r), probs.row(r) + model.class_count(), out.probs.row(idx[r]));
      out.predicted_dense[idx[r]] = static_cast<int>(nn::argmax_row(logits, r));
    }
  }
  return out;
}

// ----------------------------------------------------------------------------
// Training
// ----------------------------------------------------------------------------

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
};

inline double closed_set_accuracy(const DvecModel& model, const std::vector<FusedSample>& samples) {
  if (samples.empty()) return 0.0;
  const auto eval = evaluate_samples(model, samples);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int dense = model.dense_label(samples[i].label);
    if (dense >= 0 && dense == eval.predicted_dense[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

/// Shuffled mini-batch training; returns the per-epoch history and restores
/// the parameters of the best-validation-accuracy epoch into the model.
inline TrainResult train(DvecModel& model, const std::vector<FusedSample>& train_split,
                         const std::vector<FusedSample>& val_split, const DvecConfig& cfg) {
  cfg.validate();
  if (train_split.empty() || val_split.empty()) {
    throw UsageError("train: train and validation splits must be non-empty");
  }

  // labels must all be known classes, mapped once up front
  std::vector<int> dense_labels(train_split.size());
  for (std::size_t i = 0; i < train_split.size(); ++i) {
    const int d = model.dense_label(train_split[i].label);
    if (d < 0) {
      throw DataError("train: sample " + std::to_string(i) + " has label " +
                      std::to_string(train_split[i].label) + " outside the known classes");
    }
    dense_labels[i] = d;
  }

  TrainResult result;
  if (cfg.epochs == 0) return result;

  Rng rng(derive_stream(cfg.seed, {0x545241ull /* train */}));
  auto params = model.parameters();
  nn::AdamOptimizer opt(params, {cfg.learning_rate, 0.9, 0.999, 1e-8});

  auto snapshot = [&params]() {
    std::vector<std::vector<double>> s;
    s.reserve(params.size());
    for (const auto* p : params) s.push_back(p->value);
    return s;
  };
  std::vector<std::vector<double>> best_params = snapshot();

  std::vector<std::size_t> order(train_split.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const std::size_t L = model.latent_dim;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(stop));
      const nn::Mat x = detail::gather_features(train_split, idx, model.input_dim);
      std::vector<int> y(idx.size());
      for (std::size_t r = 0; r < idx.size(); ++r) y[r] = dense_labels[idx[r]];

      std::vector<nn::Mat> eps(cfg.latent_samples);
      for (auto& e : eps) {
        e = nn::Mat(idx.size(), L);
        for (double& v : e.data) v = rng.normal();
      }

      const BatchLoss bl = dvec_batch_loss(model, x, y, epoch, eps, cfg, true);
      if (!std::isfinite(bl.loss)) {
        throw NumericError("training diverged (non-finite loss) at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batches));
      }
      opt.step("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches));
      loss_sum += bl.loss;
      ++batches;
    }

    const double val_acc = closed_set_accuracy(model, val_split);
    result.history.push_back({epoch, loss_sum / static_cast<double>(batches), val_acc});
    if (result.history.size() == 1 || val_acc > result.best_val_accuracy) {
      result.best_val_accuracy = val_acc;
      result.best_epoch = epoch;
      best_params = snapshot();
    }
  }

  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_params[i];
  return result;
}

// ----------------------------------------------------------------------------
// Latent class statistics for the discriminators
// ----------------------------------------------------------------------------

struct ClassStats {
  std::vector<std::vector<double>> centers;          // [K][L]
  std::vector<std::vector<double>> val_distances;    // grouped by true class
  std::vector<std::vector<double>> train_distances;  // correctly classified, by true class
};

namespace detail {

inline double euclidean(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace detail

/// Class centers from correctly classified training latents plus distance
/// lists of training (correct) and validation samples to their own class
/// center, all in deterministic evaluation mode.
inline ClassStats extract_class_stats(const DvecModel& model,
                                      const std::vector<FusedSample>& train_split,
                                      const std::vector<FusedSample>& val_split) {
  const std::size_t K = model.class_count();
  const std::size_t L = model.latent_dim;

  const auto train_eval = evaluate_samples(model, train_split);
  ClassStats stats;
  stats.centers.assign(K, std::vector<double>(L, 0.0));
  std::vector<std::size_t> counts(K, 0);
  std::vector<std::vector<std::size_t>> correct_idx(K);

  for (std::size_t i = 0; i < train_split.size(); ++i) {
    const int dense = model.dense_label(train_split[i].label);
    if (dense < 0) continue;
    if (train_eval.predicted_dense[i] != dense) continue;
    const auto k = static_cast<std::size_t>(dense);
    const double* m = train_eval.mu.row(i);
    for (std::size_t j = 0; j < L; ++j) stats.centers[k][j] += m[j];
    ++counts[k];
    correct_idx[k].push_back(i);
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (counts[k] == 0) {
      throw DataError("class " + std::to_string(model.known_class_ids[k]) +
                      " has no correctly classified training samples");
    }
    for (double& v : stats.centers[k]) v /= static_cast<double>(counts[k]);
  }

  stats.train_distances.assign(K, {});
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i : correct_idx[k]) {
      stats.train_distances[k].push_back(
          detail::euclidean(train_eval.mu.row(i), stats.centers[k].data(), L));
    }
  }

  const auto val_eval = evaluate_samples(model, val_split);
  stats.val_distances.assign(K, {});
  for (std::size_t i = 0; i < val_split.size(); ++i) {
    const int dense = model.dense_label(val_split[i].label);
    if (dense < 0) continue;
    const auto k = static_cast<std::size_t>(dense);
    stats.val_distances[k].push_back(
        detail::euclidean(val_eval.mu.row(i), stats.centers[k].data(), L));
  }
  return stats;
}

// ----------------------------------------------------------------------------
// Checkpoints: DVEC architecture + fusion setup in the JSON header, raw
// little-endian float64 parameters as payload.
// ----------------------------------------------------------------------------

struct ModelBundle {
  DvecModel model;
  FusionConfig fusion_cfg;
  FusionStats fusion_stats;
  nlohmann::ordered_json header;  // as read / as written
};

inline void save_model(const std::filesystem::path& path, const DvecModel& model,
                       const DvecConfig& cfg, const FusionConfig& fusion_cfg,
                       const FusionStats& fusion_stats,
                       const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  nlohmann::ordered_json j;
  j["kind"] = "ossr-dvec-checkpoint";
  j["ckpt_version"] = 1;
  nlohmann::ordered_json arch;
  arch["input_dim"] = model.input_dim;
  std::vector<std::size_t> hidden;
  for (const auto& l : model.trunk) hidden.push_back(l.out_dim);
  arch["hidden"] = hidden;
  arch["latent_dim"] = model.latent_dim;
  arch["known_class_ids"] = model.known_class_ids;
  arch["class_conditional_prior"] = model.class_conditional_prior;
  arch["prior_anchor_radius"] = model.prior_anchor_radius;
  j["arch"] = arch;

  nlohmann::ordered_json fus;
  fus["window"] = fusion_cfg.window;
  fus["time_points"] = fusion_cfg.time_points;
  fus["stats"] = {{"time_mean", fusion_stats.time_mean},
                  {"time_scale", fusion_stats.time_scale},
                  {"freq_mean", fusion_stats.freq_mean},
                  {"freq_scale", fusion_stats.freq_scale},
                  {"fitted", fusion_stats.fitted}};
  j["fusion"] = fus;

  nlohmann::ordered_json tc;
  tc["epochs"] = cfg.epochs;
  tc["batch_size"] = cfg.batch_size;
  tc["learning_rate"] = cfg.learning_rate;
  tc["kl_warmup_epochs"] = cfg.kl_warmup_epochs;
  tc["kl_min_weight"] = cfg.kl_min_weight;
  tc["latent_samples"] = cfg.latent_samples;
  tc["seed"] = cfg.seed;
  j["train_config"] = tc;

  const auto params = model.parameters();
  std::size_t count = 0;
  for (const auto* p : params) count += p->size();
  j["param_count"] = count;
  j["payload"] = "float64-le";
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();

  nn::write_checkpoint_file(path, j, params);
}

inline ModelBundle load_model(const std::filesystem::path& path) {
  std::vector<double> payload;
  const auto j = nn::read_checkpoint_file(path, payload);
  if (j.value("kind", "") != "ossr-dvec-checkpoint") {
    throw DataError("not a dvec checkpoint: " + path.string());
  }

  const auto& arch = j.at("arch");
  DvecConfig cfg;
  cfg.hidden = arch.at("hidden").get<std::vector<std::size_t>>();
  cfg.latent_dim = arch.at("latent_dim").get<std::size_t>();
  cfg.class_conditional_prior = arch.value("class_conditional_prior", false);
  cfg.prior_anchor_radius = arch.value("prior_anchor_radius", 3.0);
  if (j.contains("train_config")) {
    const auto& tc = j.at("train_config");
    cfg.epochs = tc.value("epochs", cfg.epochs);
    cfg.batch_size = tc.value("batch_size", cfg.batch_size);
    cfg.learning_rate = tc.value("learning_rate", cfg.learning_rate);
    cfg.kl_warmup_epochs = tc.value("kl_warmup_epochs", cfg.kl_warmup_epochs);
    cfg.kl_min_weight = tc.value("kl_min_weight", cfg.kl_min_weight);
    cfg.latent_samples = tc.value("latent_samples", cfg.latent_samples);
    cfg.seed = tc.value("seed", cfg.seed);
  }

  ModelBundle b;
  b.header = j;
  b.model = build_model(arch.at("input_dim").get<std::size_t>(),
                        arch.at("known_class_ids").get<std::vector<int>>(), cfg);

  auto params = b.model.parameters();
  std::size_t offset = 0;
  for (auto* p : params) {
    if (offset + p->size() > payload.size()) throw DataError("checkpoint payload too short");
    std::copy(payload.begin() + static_cast<std::ptrdiff_t>(offset),
              payload.begin() + static_cast<std::ptrdiff_t>(offset + p->size()), p->value.begin());
    offset += p->size();
  }
  if (offset != payload.size()) throw DataError("checkpoint payload size mismatch");

  const auto& fus = j.at("fusion");
  b.fusion_cfg.window = fus.at("window").get<std::size_t>();
  b.fusion_cfg.time_points = fus.at("time_points").get<std::size_t>();
  const auto& st = fus.at("stats");
  b.fusion_stats.time_mean = st.at("time_mean").get<double>();
  b.fusion_stats.time_scale = st.at("time_scale").get<double>();
  b.fusion_stats.freq_mean = st.at("freq_mean").get<double>();
  b.fusion_stats.freq_scale = st.at("freq_scale").get<double>();
  b.fusion_stats.fitted = st.value("fitted", true);
  return b;
}

}  // namespace ossr
