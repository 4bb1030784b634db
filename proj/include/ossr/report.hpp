#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ossr/common.hpp"
#include "ossr/harness.hpp"
#include "ossr/version.hpp"

namespace ossr {

// ----------------------------------------------------------------------------
// Provenance: every artifact records the tool version, the seed, the merged
// effective config, and content hashes of its inputs. Paths are reduced to
// basenames so identical runs from different directories stay byte-identical.
// ----------------------------------------------------------------------------

inline std::string hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot hash missing file: " + path.string());
  Fnv1a64 h;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h.update(buf, static_cast<std::size_t>(in.gcount()));
    if (in.eof()) break;
  }
  return "fnv1a64:" + h.hex();
}

class ProvenanceBuilder {
 public:
  ProvenanceBuilder& seed(std::uint64_t s) {
    seed_ = s;
    return *this;
  }
  ProvenanceBuilder& config(nlohmann::ordered_json cfg) {
    config_ = std::move(cfg);
    return *this;
  }
  ProvenanceBuilder& input(const std::filesystem::path& path) {
    inputs_.push_back({path.filename().string(), hash_file(path)});
    return *this;
  }

  nlohmann::ordered_json json() const {
    nlohmann::ordered_json j;
    j["tool"] = "ossr";
    j["version"] = kVersion;
    j["seed"] = seed_;
    j["config"] = config_;
    nlohmann::ordered_json ins = nlohmann::ordered_json::array();
    for (const auto& [name, hash] : inputs_) ins.push_back({{"name", name}, {"hash", hash}});
    j["inputs"] = ins;
    return j;
  }

 private:
  std::uint64_t seed_ = 0;
  nlohmann::ordered_json config_ = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, std::string>> inputs_;
};

// ----------------------------------------------------------------------------
// Report serialization
// ----------------------------------------------------------------------------

inline nlohmann::ordered_json mission_report_to_json(const MissionReport& rep) {
  nlohmann::ordered_json j;
  j["mission_id"] = rep.mission_id;
  j["policy"] = rep.policy;
  j["a0"] = rep.a0;
  j["known_ids"] = rep.known_ids;
  nlohmann::ordered_json pca = nlohmann::ordered_json::array();
  for (double v : rep.per_class_accuracy) {
    if (std::isnan(v)) {
      pca.push_back(nullptr);
    } else {
      pca.push_back(v);
    }
  }
  j["per_class_accuracy"] = pca;
  j["unknown_detection_rate"] =
      std::isnan(rep.unknown_detection_rate) ? nlohmann::ordered_json(nullptr)
                                             : nlohmann::ordered_json(rep.unknown_detection_rate);
  j["false_unknown_rate"] = std::isnan(rep.false_unknown_rate)
                                ? nlohmann::ordered_json(nullptr)
                                : nlohmann::ordered_json(rep.false_unknown_rate);
  j["confusion"] = rep.confusion;
  j["total"] = rep.total;
  return j;
}

inline nlohmann::ordered_json sweep_to_json(const SweepResult& sweep,
                                            const nlohmann::ordered_json& provenance) {
  nlohmann::ordered_json j;
  j["kind"] = "ossr-sweep-report";
  j["report_version"] = 1;

  nlohmann::ordered_json ms = nlohmann::ordered_json::array();
  for (const auto& m : sweep.missions) {
    ms.push_back({{"id", m.id},
                  {"known", m.known_class_ids},
                  {"unknown", m.unknown_class_ids},
                  {"openness", m.openness_value}});
  }
  j["missions"] = ms;

  nlohmann::ordered_json ps = nlohmann::ordered_json::array();
  for (Policy p : sweep.policies) ps.push_back(policy_name(p));
  j["policies"] = ps;

  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& c : sweep.cells) {
    nlohmann::ordered_json cj;
    cj["mission_id"] = c.mission_id;
    cj["policy"] = c.policy;
    cj["status"] = c.status;
    if (c.status == "ok") {
      cj["a0"] = c.a0;
      cj["report"] = mission_report_to_json(c.report);
    } else {
      cj["a0"] = nullptr;
      cj["message"] = c.message;
    }
    cells.push_back(cj);
  }
  j["cells"] = cells;

  nlohmann::ordered_json trend = nlohmann::ordered_json::array();
  for (const auto& row : openness_trend(sweep)) {
    trend.push_back({{"mission_id", row.mission_id},
                     {"openness", row.openness_value},
                     {"entropy_minus_evt_a0", row.gap}});
  }
  j["openness_trend"] = trend;
  j["provenance"] = provenance;
  return j;
}

namespace detail {

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace detail

/// Flat grid, one row per policy, one column per mission; "/" marks
/// not-applicable cells, "error" marks failed cells.
inline std::string sweep_to_csv(const SweepResult& sweep, const std::string& provenance_line) {
  std::ostringstream out;
  out << "# " << provenance_line << "\n";
  out << "policy";
  for (const auto& m : sweep.missions) out << ",mission_" << m.id;
  out << "\n";
  out << "openness";
  for (const auto& m : sweep.missions) out << "," << detail::fixed4(m.openness_value);
  out << "\n";
  for (Policy p : sweep.policies) {
    out << policy_name(p);
    for (const auto& m : sweep.missions) {
      const SweepCell* c = sweep.find(m.id, p);
      out << ",";
      if (c == nullptr || c->status == "error") {
        out << "error";
      } else if (c->status == "not_applicable") {
        out << "/";
      } else {
        out << detail::fixed4(c->a0);
      }
    }
    out << "\n";
  }
  return out.str();
}

/// Line plot of A0 against openness, one polyline per policy.
inline std::string sweep_to_svg(const SweepResult& sweep) {
  const double W = 640, H = 420;
  const double ml = 70, mr = 30, mt = 40, mb = 60;
  const double pw = W - ml - mr, ph = H - mt - mb;

  double xmax = 0.0;
  for (const auto& m : sweep.missions) xmax = std::max(xmax, m.openness_value);
  xmax = std::max(0.1, xmax * 1.1);

  auto px = [&](double openness) { return ml + openness / xmax * pw; };
  auto py = [&](double a0) { return mt + (1.0 - a0) * ph; };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  s << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"16\">Open-set accuracy vs openness</text>\n";

  // axes
  s << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\"" << mt + ph
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double a0 = i / 5.0;
    s << "<line x1=\"" << ml - 4 << "\" y1=\"" << py(a0) << "\" x2=\"" << ml << "\" y2=\"" << py(a0)
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << ml - 8 << "\" y=\"" << py(a0) + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << detail::fixed4(a0)
      << "</text>\n";
  }
  for (int i = 0; i <= 6; ++i) {
    const double ox = xmax * i / 6.0;
    s << "<line x1=\"" << px(ox) << "\" y1=\"" << mt + ph << "\" x2=\"" << px(ox) << "\" y2=\""
      << mt + ph + 4 << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << px(ox) << "\" y=\"" << mt + ph + 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
      << detail::fixed4(ox) << "</text>\n";
  }
  s << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 16
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">openness</text>\n";
  s << "<text x=\"20\" y=\"" << mt + ph / 2
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 "
       "20 "
    << mt + ph / 2 << ")\">A0</text>\n";

  for (std::size_t pi = 0; pi < sweep.policies.size(); ++pi) {
    const char* color = colors[pi % 4];
    std::ostringstream pts;
    bool first = true;
    for (const auto& m : sweep.missions) {
      const SweepCell* c = sweep.find(m.id, sweep.policies[pi]);
      if (c == nullptr || c->status != "ok") continue;
      pts << (first ? "" : " ") << detail::fixed4(px(m.openness_value)) << ","
          << detail::fixed4(py(c->a0));
      first = false;
      s << "<circle cx=\"" << detail::fixed4(px(m.openness_value)) << "\" cy=\""
        << detail::fixed4(py(c->a0)) << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
    }
    if (!first) {
      s << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    }
    const double ly = mt + 14 + 18 * static_cast<double>(pi);
    s << "<line x1=\"" << ml + pw - 110 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw - 86
      << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << ml + pw - 80 << "\" y=\"" << ly + 4
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << policy_name(sweep.policies[pi])
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace ossr
