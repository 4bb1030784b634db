#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "ossr/common.hpp"
#include "ossr/dvec.hpp"
#include "ossr/weibull.hpp"

namespace ossr {

// ----------------------------------------------------------------------------
// Open-set decision layer: per-class Weibull outlier probabilities and
// softmax-entropy scores, each thresholded at the boundary of the alpha%
// highest validation values.
// ----------------------------------------------------------------------------

/// Shannon entropy in nats, with 0 ln 0 := 0. Validates the distribution.
inline double shannon_entropy(const std::vector<double>& probs) {
  if (probs.empty()) throw UsageError("shannon_entropy: empty distribution");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw DataError("shannon_entropy: probabilities must be finite and >= 0");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw DataError("shannon_entropy: probabilities sum to " + std::to_string(sum));
  }
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(0.0, h);
}

/// Nearest-rank threshold at the boundary of the alpha% highest values:
/// sorted ascending, element ceil((100 - alpha)/100 * n), 1-indexed.
inline double upper_tail_threshold(std::vector<double> values, double alpha_percent) {
  if (values.empty()) throw UsageError("threshold: empty value list");
  if (alpha_percent < 0.0 || alpha_percent >= 100.0) {
    throw UsageError("threshold: alpha must be in [0, 100)");
  }
  std::sort(values.begin(), values.end());
  const double q = (100.0 - alpha_percent) / 100.0;
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  rank = std::min(std::max<std::size_t>(rank, 1), values.size());
  return values[rank - 1];
}

// ----------------------------------------------------------------------------
// Calibration artifacts
// ----------------------------------------------------------------------------

struct ClassCalibration {
  int class_id = 0;  // original id
  std::vector<double> center;
  WeibullParams weibull;
  double cdf_threshold = 0.0;      // in [0, 1)
  double entropy_threshold = 0.0;  // meaningful only when entropy_applicable
};

struct Calibration {
  int cal_version = 1;
  double alpha = 5.0;           // percent of highest validation scores flagged
  double tail_fraction = 0.10;  // upper quantile used for the Weibull fit
  bool entropy_applicable = false;
  std::vector<ClassCalibration> classes;  // dense-label order

  const ClassCalibration& by_dense(std::size_t k) const { return classes.at(k); }
};

/// Per-class Weibull fits and CDF thresholds. The fit uses the class's
/// validation distances, topped up with training distances when the
/// validation list alone is below the minimum fit size; thresholds always
/// come from validation outlier probabilities only.
inline std::vector<ClassCalibration> calibrate_evt(const DvecModel& model, const ClassStats& stats,
                                                   double alpha, double tail_fraction) {
  const std::size_t K = model.class_count();
  std::vector<ClassCalibration> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& val_d = stats.val_distances[k];
    if (val_d.empty()) {
      throw DataError("calibrate_evt: class " + std::to_string(model.known_class_ids[k]) +
                      " has no validation distances");
    }
    std::vector<double> fit_d = val_d;
    if (fit_d.size() < kWeibullMinPoints && k < stats.train_distances.size()) {
      fit_d.insert(fit_d.end(), stats.train_distances[k].begin(), stats.train_distances[k].end());
    }

    ClassCalibration cc;
    cc.class_id = model.known_class_ids[k];
    cc.center = stats.centers[k];
    cc.weibull = fit_weibull(fit_d, tail_fraction);

    std::vector<double> probs;
    probs.reserve(val_d.size());
    for (double d : val_d) probs.push_back(weibull_outlier_prob(d, cc.weibull));
    cc.cdf_threshold = upper_tail_threshold(probs, alpha);
    out[k] = std::move(cc);
  }
  return out;
}

/// Validation softmax vectors with their predicted classes, the input to the
/// entropy calibration.
struct ValPredictions {
  std::vector<std::vector<double>> softmax;
  std::vector<int> predicted_dense;
};

inline ValPredictions collect_val_predictions(const DvecModel& model,
                                              const std::vector<FusedSample>& val_split) {
  const auto eval = evaluate_samples(model, val_split);
  ValPredictions vp;
  vp.softmax.resize(val_split.size());
  vp.predicted_dense = eval.predicted_dense;
  for (std::size_t i = 0; i < val_split.size(); ++i) {
    vp.softmax[i].assign(eval.probs.row(i), eval.probs.row(i) + model.class_count());
  }
  return vp;
}

/// Per-class entropy thresholds from validation entropies grouped by
/// predicted class. Undefined for a single known class (entropy of a
/// one-class softmax is identically zero).
inline std::vector<double> calibrate_entropy(const ValPredictions& vp, std::size_t class_count,
                                             double alpha) {
  if (class_count < 2) {
    throw NotApplicableError("entropy discriminator needs at least 2 known classes");
  }
  std::vector<std::vector<double>> per_class(class_count);
  for (std::size_t i = 0; i < vp.softmax.size(); ++i) {
    per_class[static_cast<std::size_t>(vp.predicted_dense[i])].push_back(
        shannon_entropy(vp.softmax[i]));
  }
  std::vector<double> thresholds(class_count);
  for (std::size_t k = 0; k < class_count; ++k) {
    if (per_class[k].empty()) {
      throw DataError("calibrate_entropy: no validation sample predicted as dense class " +
                      std::to_string(k));
    }
    thresholds[k] = upper_tail_threshold(per_class[k], alpha);
  }
  return thresholds;
}

/// Full calibration of both discriminators from extracted class statistics.
inline Calibration calibrate(const DvecModel& model, const ClassStats& stats,
                             const std::vector<FusedSample>& val_split, double alpha,
                             double tail_fraction) {
  Calibration cal;
  cal.alpha = alpha;
  cal.tail_fraction = tail_fraction;
  cal.classes = calibrate_evt(model, stats, alpha, tail_fraction);
  if (model.class_count() >= 2) {
    const auto vp = collect_val_predictions(model, val_split);
    const auto thresholds = calibrate_entropy(vp, model.class_count(), alpha);
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
      cal.classes[k].entropy_threshold = thresholds[k];
    }
    cal.entropy_applicable = true;
  } else {
    cal.entropy_applicable = false;
    for (auto& cc : cal.classes) cc.entropy_threshold = std::numeric_limits<double>::quiet_NaN();
  }
  return cal;
}

// ----------------------------------------------------------------------------
// Verdicts
// ----------------------------------------------------------------------------

enum class Policy { Evt, Entropy, OpennessGated };

inline std::string policy_name(Policy p) {
  switch (p) {
    case Policy::Evt: return "evt";
    case Policy::Entropy: return "entropy";
    default: return "openness-gated";
  }
}

inline Policy policy_from_name(const std::string& s) {
  if (s == "evt") return Policy::Evt;
  if (s == "entropy") return Policy::Entropy;
  if (s == "openness-gated" || s == "gated") return Policy::OpennessGated;
  throw UsageError("unknown policy '" + s + "'");
}

/// Default openness above which the gated policy trusts the EVT
/// discriminator over entropy.
constexpr double kDefaultOpennessGate = 0.29;

struct Verdict {
  int predicted = kUnknownClass;    // original class id or kUnknownClass
  int classifier_choice = 0;        // original id picked before rejection
  double outlier_prob = 0.0;
  double entropy = 0.0;
  bool evt_reject = false;
  bool entropy_reject = false;
  Policy policy = Policy::Evt;
};

/// Open-set decision for one sample: the classifier proposes a known class,
/// then the active discriminator(s) either accept it or reject to UNKNOWN.
inline Verdict discriminate(const DvecModel& model, const Calibration& cal,
                            const std::vector<double>& features, Policy policy,
                            double mission_openness = 1.0,
                            double openness_gate = kDefaultOpennessGate) {
  const Encoding enc = encode(model, features);  // evaluation mode, z = mu

  nn::Mat z(1, model.latent_dim);
  std::copy(enc.mu.begin(), enc.mu.end(), z.data.begin());
  const nn::Mat logits = nn::dense_forward(model.classifier, z);
  const nn::Mat probs = nn::softmax_rows(logits);
  const auto yhat = nn::argmax_row(logits, 0);

  const ClassCalibration& cc = cal.by_dense(yhat);
  const double dist =
      detail::euclidean(enc.mu.data(), cc.center.data(), model.latent_dim);

  Verdict v;
  v.policy = policy;
  v.classifier_choice = cc.class_id;
  v.outlier_prob = weibull_outlier_prob(dist, cc.weibull);
  v.evt_reject = v.outlier_prob > cc.cdf_threshold;

  std::vector<double> p(probs.row(0), probs.row(0) + model.class_count());
  v.entropy = shannon_entropy(p);
  if (cal.entropy_applicable) {
    v.entropy_reject = v.entropy > cc.entropy_threshold;
  }

  bool reject = false;
  switch (policy) {
    case Policy::Evt:
      reject = v.evt_reject;
      break;
    case Policy::Entropy:
      if (!cal.entropy_applicable) {
        throw NotApplicableError("entropy policy is undefined with one known class");
      }
      reject = v.entropy_reject;
      break;
    case Policy::OpennessGated:
      if (mission_openness >= openness_gate) {
        reject = v.evt_reject;
      } else {
        if (!cal.entropy_applicable) {
          throw NotApplicableError("entropy policy is undefined with one known class");
        }
        reject = v.entropy_reject;
      }
      break;
  }
  v.predicted = reject ? kUnknownClass : cc.class_id;
  return v;
}

// ----------------------------------------------------------------------------
// Calibration file I/O (JSON)
// ----------------------------------------------------------------------------

inline nlohmann::ordered_json calibration_to_json(const Calibration& cal) {
  nlohmann::ordered_json j;
  j["kind"] = "ossr-calibration";
  j["cal_version"] = cal.cal_version;
  j["alpha"] = cal.alpha;
  j["tail_fraction"] = cal.tail_fraction;
  j["entropy_applicable"] = cal.entropy_applicable;
  nlohmann::ordered_json cs = nlohmann::ordered_json::array();
  for (const auto& c : cal.classes) {
    nlohmann::ordered_json cj;
    cj["class_id"] = c.class_id;
    cj["location"] = c.weibull.location;
    cj["shape"] = c.weibull.shape;
    cj["scale"] = c.weibull.scale;
    cj["cdf_threshold"] = c.cdf_threshold;
    if (cal.entropy_applicable) {
      cj["entropy_threshold"] = c.entropy_threshold;
    } else {
      cj["entropy_threshold"] = nullptr;
    }
    cj["center"] = c.center;
    cs.push_back(cj);
  }
  j["classes"] = cs;
  return j;
}

inline Calibration calibration_from_json(const nlohmann::ordered_json& j) {
  if (j.value("kind", "") != "ossr-calibration") throw DataError("not a calibration file");
  Calibration cal;
  cal.cal_version = j.at("cal_version").get<int>();
  cal.alpha = j.at("alpha").get<double>();
  cal.tail_fraction = j.at("tail_fraction").get<double>();
  cal.entropy_applicable = j.at("entropy_applicable").get<bool>();
  for (const auto& cj : j.at("classes")) {
    ClassCalibration c;
    c.class_id = cj.at("class_id").get<int>();
    c.weibull.location = cj.at("location").get<double>();
    c.weibull.shape = cj.at("shape").get<double>();
    c.weibull.scale = cj.at("scale").get<double>();
    c.cdf_threshold = cj.at("cdf_threshold").get<double>();
    c.entropy_threshold = cj.at("entropy_threshold").is_null()
                              ? std::numeric_limits<double>::quiet_NaN()
                              : cj.at("entropy_threshold").get<double>();
    c.center = cj.at("center").get<std::vector<double>>();
    cal.classes.push_back(std::move(c));
  }
  return cal;
}

inline void save_calibration(const std::filesystem::path& path, const Calibration& cal,
                             const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  auto j = calibration_to_json(cal);
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write calibration: " + path.string());
  out << j.dump(2) << "\n";
}

inline Calibration load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open calibration: " + path.string());
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("calibration parse error: " + std::string(e.what()));
  }
  return calibration_from_json(j);
}

}  // namespace ossr
