#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ossr/common.hpp"
#include "ossr/rng.hpp"

namespace ossr::nn {

// ----------------------------------------------------------------------------
// Dense math. Row-major matrices, double precision, fixed summation order so
// every run of the same binary reproduces bit-identical results.
// ----------------------------------------------------------------------------

struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

namespace detail {

inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; k < n; ++k) s += a[k] * b[k];
  return s;
}

inline void axpy(double* y, const double* x, double c, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += c * x[k];
}

}  // namespace detail

// ----------------------------------------------------------------------------
// Parameters
// ----------------------------------------------------------------------------

struct ParamTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;

  std::size_t size() const { return value.size(); }

  static ParamTensor zeros(std::string name, std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    ParamTensor t;
    t.name = std::move(name);
    t.shape = std::move(shape);
    t.value.assign(n, 0.0);
    t.grad.assign(n, 0.0);
    return t;
  }
};

enum class Activation { Identity, Relu, Softplus };

inline std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Softplus: return "softplus";
    default: return "identity";
  }
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "softplus") return Activation::Softplus;
  if (s == "identity") return Activation::Identity;
  throw DataError("unknown activation '" + s + "'");
}

inline double apply_activation(Activation a, double x) {
  switch (a) {
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Softplus: return x > 30.0 ? x : std::log1p(std::exp(x));
    default: return x;
  }
}

inline double activation_grad(Activation a, double pre) {
  switch (a) {
    case Activation::Relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::Softplus: return 1.0 / (1.0 + std::exp(-pre));
    default: return 1.0;
  }
}

// ----------------------------------------------------------------------------
// Dense layer
// ----------------------------------------------------------------------------

struct DenseCache {
  Mat input;   // [B x in]
  Mat preact;  // [B x out]
};

struct DenseLayer {
  std::string name;
  std::size_t in_dim = 0, out_dim = 0;
  Activation activation = Activation::Identity;
  ParamTensor weight;  // [out x in]
  ParamTensor bias;    // [out]

  /// Zero-mean uniform init scaled by 1/sqrt(fan_in); zero bias.
  static DenseLayer create(std::string name, std::size_t in, std::size_t out, Activation act,
                           Rng& rng) {
    if (in < 1 || out < 1) throw UsageError("dense layer '" + name + "': dims must be >= 1");
    DenseLayer l;
    l.name = std::move(name);
    l.in_dim = in;
    l.out_dim = out;
    l.activation = act;
    l.weight = ParamTensor::zeros(l.name + ".weight", {out, in});
    l.bias = ParamTensor::zeros(l.name + ".bias", {out});
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : l.weight.value) w = rng.uniform(-bound, bound);
    return l;
  }
};

inline Mat dense_forward(const DenseLayer& layer, const Mat& x, DenseCache* cache = nullptr) {
  if (x.cols != layer.in_dim) {
    throw UsageError("layer '" + layer.name + "': input dim " + std::to_string(x.cols) +
                     " != expected " + std::to_string(layer.in_dim));
  }
  const std::size_t B = x.rows;
  Mat pre(B, layer.out_dim);
  for (std::size_t o = 0; o < layer.out_dim; ++o) {
    const double* w = layer.weight.value.data() + o * layer.in_dim;
    const double b = layer.bias.value[o];
    for (std::size_t r = 0; r < B; ++r) {
      pre.at(r, o) = detail::dot(x.row(r), w, layer.in_dim) + b;
    }
  }
  Mat out = pre;
  if (layer.activation != Activation::Identity) {
    for (double& v : out.data) v = apply_activation(layer.activation, v);
  }
  if (cache != nullptr) {
    cache->input = x;
    cache->preact = std::move(pre);
  }
  return out;
}

/// Accumulates weight/bias grads; returns grad w.r.t. the layer input unless
/// want_input_grad is false (skipped for the first layer of a stack).
inline Mat dense_backward(DenseLayer& layer, const DenseCache& cache, const Mat& grad_out,
                          bool want_input_grad = true) {
  const std::size_t B = cache.input.rows;
  if (grad_out.rows != B || grad_out.cols != layer.out_dim) {
    throw UsageError("layer '" + layer.name + "': bad grad shape in backward");
  }

  Mat dpre = grad_out;
  if (layer.activation != Activation::Identity) {
    for (std::size_t i = 0; i < dpre.data.size(); ++i) {
      dpre.data[i] *= activation_grad(layer.activation, cache.preact.data[i]);
    }
  }

  for (std::size_t o = 0; o < layer.out_dim; ++o) {
    double* dw = layer.weight.grad.data() + o * layer.in_dim;
    double db = 0.0;
    for (std::size_t r = 0; r < B; ++r) {
      const double g = dpre.at(r, o);
      if (g != 0.0) detail::axpy(dw, cache.input.row(r), g, layer.in_dim);
      db += g;
    }
    layer.bias.grad[o] += db;
  }

  Mat dx;
  if (want_input_grad) {
    dx = Mat(B, layer.in_dim);
    for (std::size_t r = 0; r < B; ++r) {
      double* dxr = dx.row(r);
      for (std::size_t o = 0; o < layer.out_dim; ++o) {
        const double g = dpre.at(r, o);
        if (g != 0.0) detail::axpy(dxr, layer.weight.value.data() + o * layer.in_dim, g, layer.in_dim);
      }
    }
  }
  return dx;
}

/// Forward through a stack, returning every layer's output (index 0 = first
/// layer output). Caches are filled for backward when given.
inline std::vector<Mat> forward_stack(const std::vector<DenseLayer>& layers, const Mat& input,
                                      std::vector<DenseCache>* caches = nullptr) {
  if (caches != nullptr) caches->assign(layers.size(), DenseCache{});
  std::vector<Mat> acts;
  acts.reserve(layers.size());
  const Mat* cur = &input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    acts.push_back(dense_forward(layers[i], *cur, caches != nullptr ? &(*caches)[i] : nullptr));
    cur = &acts.back();
  }
  return acts;
}

inline Mat backward_stack(std::vector<DenseLayer>& layers, const std::vector<DenseCache>& caches,
                          Mat grad, bool want_input_grad = false) {
  if (caches.size() != layers.size()) throw UsageError("backward_stack: run forward first");
  for (std::size_t i = layers.size(); i-- > 0;) {
    const bool need = want_input_grad || i > 0;
    grad = dense_backward(layers[i], caches[i], grad, need);
  }
  return grad;
}

// ----------------------------------------------------------------------------
// Softmax / cross-entropy helpers
// ----------------------------------------------------------------------------

inline double log_sum_exp(const double* v, std::size_t n) {
  double m = v[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, v[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

inline Mat softmax_rows(const Mat& logits) {
  Mat p(logits.rows, logits.cols);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const double* l = logits.row(r);
    double m = l[0];
    for (std::size_t c = 1; c < logits.cols; ++c) m = std::max(m, l[c]);
    double s = 0.0;
    double* pr = p.row(r);
    for (std::size_t c = 0; c < logits.cols; ++c) {
      pr[c] = std::exp(l[c] - m);
      s += pr[c];
    }
    for (std::size_t c = 0; c < logits.cols; ++c) pr[c] /= s;
  }
  return p;
}

inline std::size_t argmax_row(const Mat& m, std::size_t r) {
  const double* v = m.row(r);
  std::size_t best = 0;
  for (std::size_t c = 1; c < m.cols; ++c) {
    if (v[c] > v[best]) best = c;
  }
  return best;
}

// ----------------------------------------------------------------------------
// Adam optimizer
// ----------------------------------------------------------------------------

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<ParamTensor*> params, AdamConfig cfg)
      : params_(std::move(params)), cfg_(cfg) {
    if (cfg_.learning_rate <= 0.0) throw UsageError("adam: learning_rate must be positive");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const ParamTensor* p : params_) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }

  /// Apply one update from the accumulated gradients, then clear them.
  /// Non-finite gradients abort with the tensor name and caller context.
  void step(const std::string& context = {}) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      ParamTensor& p = *params_[i];
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double g = p.grad[k];
        if (!std::isfinite(g)) {
          throw NumericError("non-finite gradient in '" + p.name + "'" +
                             (context.empty() ? "" : " (" + context + ")"));
        }
        m_[i][k] = cfg_.beta1 * m_[i][k] + (1.0 - cfg_.beta1) * g;
        v_[i][k] = cfg_.beta2 * v_[i][k] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m_[i][k] / bc1;
        const double vhat = v_[i][k] / bc2;
        p.value[k] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.eps);
        p.grad[k] = 0.0;
      }
    }
  }

  void zero_grad() {
    for (ParamTensor* p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0);
  }

  std::int64_t steps() const { return t_; }

 private:
  std::vector<ParamTensor*> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

// ----------------------------------------------------------------------------
// Central finite-difference gradient check
// ----------------------------------------------------------------------------

struct GradCheckReport {
  std::string tensor;
  std::size_t probes = 0;
  std::size_t skipped_nonsmooth = 0;  // probes straddling an activation kink
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  bool pass = true;
};

/// Probes random parameter entries per tensor. loss() must be a deterministic
/// function of the parameter values (freeze any sampling before calling);
/// compute_grads() must populate tensor .grad for the same loss.
///
/// Central differences are only valid where the loss is differentiable; a
/// probe whose [p-h, p+h] interval straddles a relu kink shows up as a large
/// disagreement between the two one-sided slopes and is resampled instead of
/// counted as a failure.
inline std::vector<GradCheckReport> finite_difference_check(
    const std::vector<ParamTensor*>& tensors, const std::function<double()>& loss,
    const std::function<void()>& compute_grads, std::size_t probes_per_tensor, Rng& rng,
    double h = 1e-5, double rel_tol = 1e-4, double abs_tol = 1e-8) {
  for (ParamTensor* t : tensors) std::fill(t->grad.begin(), t->grad.end(), 0.0);
  compute_grads();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(tensors.size());
  for (ParamTensor* t : tensors) analytic.push_back(t->grad);

  const double base = loss();

  std::vector<GradCheckReport> reports;
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    ParamTensor& t = *tensors[ti];
    GradCheckReport rep;
    rep.tensor = t.name;
    const std::size_t probes = std::min(probes_per_tensor, t.size());
    const std::size_t max_attempts = probes * 5;
    std::size_t attempts = 0;
    while (rep.probes < probes && attempts < max_attempts) {
      ++attempts;
      const auto idx = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(t.size()) - 1));
      const double saved = t.value[idx];
      t.value[idx] = saved + h;
      const double lp = loss();
      t.value[idx] = saved - h;
      const double lm = loss();
      t.value[idx] = saved;
      const double fd = (lp - lm) / (2.0 * h);
      const double an = analytic[ti][idx];
      const double abs_err = std::abs(fd - an);
      const double rel = abs_err / std::max(std::max(std::abs(fd), std::abs(an)), 1e-300);
      const bool ok = abs_err <= abs_tol || rel <= rel_tol;
      if (!ok) {
        const double fwd = (lp - base) / h;
        const double bwd = (base - lm) / h;
        const double disagreement = std::abs(fwd - bwd);
        if (disagreement > 0.1 * std::max(std::abs(fwd), std::abs(bwd)) + abs_tol) {
          ++rep.skipped_nonsmooth;
          continue;
        }
        rep.pass = false;
      }
      ++rep.probes;
      rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
      if (abs_err > abs_tol) rep.max_rel_err = std::max(rep.max_rel_err, rel);
    }
    if (rep.probes < probes) rep.pass = false;  // too many non-smooth resamples
    reports.push_back(rep);
  }
  return reports;
}

// ----------------------------------------------------------------------------
// Checkpoint file: one compact JSON header line, then the parameter payload
// as raw little-endian float64 in declared order.
// ----------------------------------------------------------------------------

inline void write_checkpoint_file(const std::filesystem::path& path,
                                  const nlohmann::ordered_json& header,
                                  const std::vector<const ParamTensor*>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());
  const std::string h = header.dump() + "\n";
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const ParamTensor* p : params) {
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!out) throw IoError("checkpoint write failed: " + path.string());
}

inline nlohmann::ordered_json read_checkpoint_file(const std::filesystem::path& path,
                                                   std::vector<double>& payload) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw DataError("checkpoint missing header: " + path.string());
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint header parse error: " + std::string(e.what()));
  }
  const auto count = j.at("param_count").get<std::size_t>();
  payload.resize(count);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double)) {
    throw DataError("checkpoint payload truncated: " + path.string());
  }
  return j;
}

}  // namespace ossr::nn
