#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ossr/common.hpp"

namespace ossr {

// ----------------------------------------------------------------------------
// Open-set missions: which classes are known at training time, which appear
// only at test time, and how open the task is.
// ----------------------------------------------------------------------------

/// openness = 1 - sqrt(known_class_count / test_class_count).
inline double openness(std::size_t n_training_classes, std::size_t n_testing_classes) {
  if (n_training_classes < 1 || n_training_classes > n_testing_classes) {
    throw UsageError("openness: need 1 <= training classes <= testing classes");
  }
  return 1.0 - std::sqrt(static_cast<double>(n_training_classes) /
                         static_cast<double>(n_testing_classes));
}

struct Mission {
  int id = 0;
  std::vector<int> known_class_ids;
  std::vector<int> unknown_class_ids;
  double openness_value = 0.0;

  bool is_known(int class_id) const {
    return std::find(known_class_ids.begin(), known_class_ids.end(), class_id) !=
           known_class_ids.end();
  }
};

inline Mission build_custom_mission(int id, std::vector<int> known_ids,
                                    const std::vector<int>& all_class_ids) {
  if (known_ids.empty()) throw UsageError("mission: known class set must be non-empty");
  Mission m;
  m.id = id;
  std::sort(known_ids.begin(), known_ids.end());
  for (int k : known_ids) {
    if (std::find(all_class_ids.begin(), all_class_ids.end(), k) == all_class_ids.end()) {
      throw UsageError("mission: known class " + std::to_string(k) + " not in the dataset");
    }
  }
  m.known_class_ids = std::move(known_ids);
  for (int c : all_class_ids) {
    if (!m.is_known(c)) m.unknown_class_ids.push_back(c);
  }
  m.openness_value = openness(m.known_class_ids.size(), all_class_ids.size());
  return m;
}

/// The five benchmark missions over a six-class dataset, with the expected
/// openness values asserted to four decimals.
inline std::vector<Mission> build_missions(std::size_t class_count) {
  if (class_count != 6) {
    throw UsageError("build_missions expects the 6-class benchmark; use build_custom_mission");
  }
  const std::vector<int> all = {0, 1, 2, 3, 4, 5};
  const std::vector<std::vector<int>> known = {
      {2}, {2, 3}, {0, 1, 2}, {2, 3, 4, 5}, {0, 1, 2, 4, 5}};
  const std::vector<double> expected = {0.5918, 0.4226, 0.2929, 0.1835, 0.0871};

  std::vector<Mission> missions;
  for (std::size_t i = 0; i < known.size(); ++i) {
    Mission m = build_custom_mission(static_cast<int>(i) + 1, known[i], all);
    if (std::abs(m.openness_value - expected[i]) > 5e-5) {
      throw NumericError("mission " + std::to_string(m.id) + ": openness " +
                         std::to_string(m.openness_value) + " does not round to " +
                         std::to_string(expected[i]));
    }
    missions.push_back(std::move(m));
  }
  return missions;
}

// ----------------------------------------------------------------------------
// Scoring over the (K+1)-label space: all unknown classes collapse to one
// UNKNOWN label, accuracy is micro-averaged over every decision.
// ----------------------------------------------------------------------------

struct MissionReport {
  int mission_id = 0;
  std::string policy;
  double a0 = 0.0;
  std::vector<int> known_ids;
  std::vector<double> per_class_accuracy;  // known classes, known_ids order
  double unknown_detection_rate = 0.0;     // recall of UNKNOWN; NaN when no unknowns
  double false_unknown_rate = 0.0;         // known-truth samples rejected; NaN when no knowns
  std::vector<std::vector<std::size_t>> confusion;  // (K+1)x(K+1), truth-major, UNKNOWN last
  std::size_t total = 0;
};

/// predictions: original class ids or kUnknownClass; truths: original ids.
inline MissionReport score(const std::vector<int>& predictions, const std::vector<int>& truths,
                           const std::vector<int>& known_ids) {
  if (predictions.size() != truths.size()) {
    throw UsageError("score: predictions and truths must have equal length");
  }
  if (known_ids.empty()) throw UsageError("score: known class set must be non-empty");
  const std::size_t K = known_ids.size();

  auto dense = [&known_ids, K](int id) -> std::size_t {
    for (std::size_t k = 0; k < known_ids.size(); ++k) {
      if (known_ids[k] == id) return k;
    }
    return K;  // UNKNOWN bucket
  };

  MissionReport rep;
  rep.known_ids = known_ids;
  rep.total = predictions.size();
  rep.confusion.assign(K + 1, std::vector<std::size_t>(K + 1, 0));

  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const std::size_t t = dense(truths[i]);
    std::size_t p = K;
    if (predictions[i] != kUnknownClass) {
      p = dense(predictions[i]);
      if (p == K) {
        throw DataError("score: prediction " + std::to_string(predictions[i]) +
                        " is neither a known class nor UNKNOWN");
      }
    }
    ++rep.confusion[t][p];
  }

  std::size_t correct = 0;
  for (std::size_t k = 0; k <= K; ++k) correct += rep.confusion[k][k];
  rep.a0 = rep.total > 0 ? static_cast<double>(correct) / static_cast<double>(rep.total) : 0.0;

  rep.per_class_accuracy.resize(K);
  std::size_t known_support = 0, known_rejected = 0;
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t support = 0;
    for (std::size_t p = 0; p <= K; ++p) support += rep.confusion[k][p];
    rep.per_class_accuracy[k] =
        support > 0 ? static_cast<double>(rep.confusion[k][k]) / static_cast<double>(support)
                    : std::nan("");
    known_support += support;
    known_rejected += rep.confusion[k][K];
  }

  std::size_t unknown_support = 0;
  for (std::size_t p = 0; p <= K; ++p) unknown_support += rep.confusion[K][p];
  rep.unknown_detection_rate =
      unknown_support > 0
          ? static_cast<double>(rep.confusion[K][K]) / static_cast<double>(unknown_support)
          : std::nan("");
  rep.false_unknown_rate =
      known_support > 0 ? static_cast<double>(known_rejected) / static_cast<double>(known_support)
                        : std::nan("");
  return rep;
}

/// Accuracy of the known-truth subset only (correct class and not rejected).
inline double known_class_accuracy(const MissionReport& rep) {
  const std::size_t K = rep.known_ids.size();
  std::size_t correct = 0, support = 0;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t p = 0; p <= K; ++p) support += rep.confusion[k][p];
    correct += rep.confusion[k][k];
  }
  return support > 0 ? static_cast<double>(correct) / static_cast<double>(support) : std::nan("");
}

}  // namespace ossr
