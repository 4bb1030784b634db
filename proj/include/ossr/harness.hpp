#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "ossr/common.hpp"
#include "ossr/dataset.hpp"
#include "ossr/discriminator.hpp"
#include "ossr/dvec.hpp"
#include "ossr/mission.hpp"
#include "ossr/rng.hpp"
#include "ossr/signal.hpp"

namespace ossr {

// ----------------------------------------------------------------------------
// One mission end to end: train on the known-class train split, calibrate on
// the known-class validation split, evaluate on the full test split.
// ----------------------------------------------------------------------------

struct MissionRunConfig {
  DvecConfig train;
  FusionConfig fusion;
  double alpha = 5.0;
  double tail_fraction = 0.10;
  double openness_gate = kDefaultOpennessGate;
  std::uint64_t seed = 42;
};

struct MissionArtifacts {
  Mission mission;
  DvecModel model;
  FusionConfig fusion_cfg;
  FusionStats fusion_stats;
  Calibration cal;
  TrainResult train_result;
  std::vector<FusedSample> test_fused;
  std::vector<int> test_truths;
  double openness_gate = kDefaultOpennessGate;
};

namespace detail {

inline std::vector<RawSignal> filter_known(const std::vector<RawSignal>& records,
                                           const Mission& mission) {
  std::vector<RawSignal> out;
  for (const auto& r : records) {
    if (mission.is_known(r.label)) out.push_back(r);
  }
  return out;
}

}  // namespace detail

/// Train and calibrate everything a mission's evaluation needs. All
/// randomness derives from one per-mission seed.
inline MissionArtifacts prepare_mission(const Mission& mission, const DatasetSplits& dataset,
                                        const MissionRunConfig& cfg) {
  for (int c : mission.known_class_ids) {
    if (c < 0 || c >= dataset.manifest.class_count()) {
      throw UsageError("mission " + std::to_string(mission.id) + ": class " + std::to_string(c) +
                       " not present in the dataset");
    }
  }

  MissionArtifacts art;
  art.mission = mission;
  art.fusion_cfg = cfg.fusion;
  art.openness_gate = cfg.openness_gate;

  const auto train_known = detail::filter_known(dataset.train, mission);
  const auto val_known = detail::filter_known(dataset.val, mission);
  if (train_known.empty() || val_known.empty()) {
    throw DataError("mission " + std::to_string(mission.id) +
                    ": empty known-class train or validation split");
  }

  // standardization is fitted on this mission's training data only
  art.fusion_stats = fit_fusion_stats(train_known, cfg.fusion);
  const auto train_fused = fuse_all(train_known, cfg.fusion, art.fusion_stats);
  const auto val_fused = fuse_all(val_known, cfg.fusion, art.fusion_stats);

  DvecConfig train_cfg = cfg.train;
  train_cfg.seed = derive_stream(cfg.seed, {0x4d534eull /* mission */,
                                            static_cast<std::uint64_t>(mission.id)});
  art.model = build_model(cfg.fusion.fused_dim(), mission.known_class_ids, train_cfg);
  art.train_result = train(art.model, train_fused, val_fused, train_cfg);

  const ClassStats stats = extract_class_stats(art.model, train_fused, val_fused);
  art.cal = calibrate(art.model, stats, val_fused, cfg.alpha, cfg.tail_fraction);

  art.test_fused = fuse_all(dataset.test, cfg.fusion, art.fusion_stats);
  art.test_truths.reserve(dataset.test.size());
  for (const auto& r : dataset.test) art.test_truths.push_back(r.label);
  return art;
}

inline MissionReport evaluate_policy(const MissionArtifacts& art, Policy policy) {
  std::vector<int> predictions;
  predictions.reserve(art.test_fused.size());
  for (const auto& s : art.test_fused) {
    const Verdict v = discriminate(art.model, art.cal, s.features, policy,
                                   art.mission.openness_value, art.openness_gate);
    predictions.push_back(v.predicted);
  }
  MissionReport rep = score(predictions, art.test_truths, art.mission.known_class_ids);
  rep.mission_id = art.mission.id;
  rep.policy = policy_name(policy);
  return rep;
}

inline MissionReport run_mission(const Mission& mission, const DatasetSplits& dataset,
                                 const MissionRunConfig& cfg, Policy policy) {
  const MissionArtifacts art = prepare_mission(mission, dataset, cfg);
  return evaluate_policy(art, policy);
}

// ----------------------------------------------------------------------------
// Sweep: the full missions x policies grid. Cell failures are recorded, not
// fatal; missions run independently (optionally in parallel) and the grid is
// assembled in mission order, so reports are identical for any thread count.
// ----------------------------------------------------------------------------

struct SweepCell {
  int mission_id = 0;
  std::string policy;
  std::string status;  // "ok" | "not_applicable" | "error"
  double a0 = std::numeric_limits<double>::quiet_NaN();
  std::string message;
  MissionReport report;
};

struct SweepResult {
  std::vector<Mission> missions;
  std::vector<Policy> policies;
  std::vector<SweepCell> cells;  // mission-major, policy-minor

  const SweepCell* find(int mission_id, Policy policy) const {
    for (const auto& c : cells) {
      if (c.mission_id == mission_id && c.policy == policy_name(policy)) return &c;
    }
    return nullptr;
  }
};

/// Gap rows for the openness trend: (entropy A0 - EVT A0) per mission where
/// both discriminators produced a result, ordered by decreasing openness.
struct TrendRow {
  int mission_id = 0;
  double openness_value = 0.0;
  double gap = 0.0;
};

inline std::vector<TrendRow> openness_trend(const SweepResult& sweep) {
  std::vector<TrendRow> rows;
  for (const auto& m : sweep.missions) {
    const SweepCell* evt = sweep.find(m.id, Policy::Evt);
    const SweepCell* ent = sweep.find(m.id, Policy::Entropy);
    if (evt == nullptr || ent == nullptr) continue;
    if (evt->status != "ok" || ent->status != "ok") continue;
    rows.push_back({m.id, m.openness_value, ent->a0 - evt->a0});
  }
  std::sort(rows.begin(), rows.end(),
            [](const TrendRow& a, const TrendRow& b) { return a.openness_value > b.openness_value; });
  return rows;
}

inline SweepResult sweep_missions(const std::vector<Mission>& missions,
                                  const std::vector<Policy>& policies,
                                  const DatasetSplits& dataset, const MissionRunConfig& cfg,
                                  unsigned threads = 1) {
  SweepResult result;
  result.missions = missions;
  result.policies = policies;
  result.cells.resize(missions.size() * policies.size());

  auto run_one = [&](std::size_t mi) {
    const Mission& mission = missions[mi];
    MissionArtifacts art;
    bool prepared = false;
    std::string prep_error;
    try {
      art = prepare_mission(mission, dataset, cfg);
      prepared = true;
    } catch (const std::exception& e) {
      prep_error = e.what();
    }
    for (std::size_t pi = 0; pi < policies.size(); ++pi) {
      SweepCell& cell = result.cells[mi * policies.size() + pi];
      cell.mission_id = mission.id;
      cell.policy = policy_name(policies[pi]);
      if (!prepared) {
        cell.status = "error";
        cell.message = prep_error;
        continue;
      }
      try {
        cell.report = evaluate_policy(art, policies[pi]);
        cell.status = "ok";
        cell.a0 = cell.report.a0;
      } catch (const NotApplicableError& e) {
        cell.status = "not_applicable";
        cell.message = e.what();
      } catch (const std::exception& e) {
        cell.status = "error";
        cell.message = e.what();
      }
    }
  };

  if (threads <= 1 || missions.size() <= 1) {
    for (std::size_t mi = 0; mi < missions.size(); ++mi) run_one(mi);
  } else {
    std::atomic<std::size_t> next{0};
    const unsigned n = std::min<unsigned>(threads, static_cast<unsigned>(missions.size()));
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (unsigned t = 0; t < n; ++t) {
      pool.emplace_back([&]() {
        while (true) {
          const std::size_t mi = next.fetch_add(1);
          if (mi >= missions.size()) break;
          run_one(mi);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  return result;
}

}  // namespace ossr
