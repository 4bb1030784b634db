// ossr — open-set signal diagnosis toolkit.
//
// Subcommands: gen, train, calibrate, eval, sweep, gradcheck, report.
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ossr/common.hpp"
#include "ossr/dataset.hpp"
#include "ossr/discriminator.hpp"
#include "ossr/dvec.hpp"
#include "ossr/harness.hpp"
#include "ossr/mission.hpp"
#include "ossr/nn.hpp"
#include "ossr/report.hpp"
#include "ossr/rng.hpp"
#include "ossr/signal.hpp"
#include "ossr/synth.hpp"
#include "ossr/version.hpp"

namespace fs = std::filesystem;
using ossr::ordered_json;

namespace {

// ----------------------------------------------------------------------------
// Config file support: CLI flags > config file > built-in defaults. The file
// is JSON with one section per subcommand, keys matching the long flag names.
// ----------------------------------------------------------------------------

ordered_json preload_config(int argc, char** argv) {
  std::string path;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) {
      path = argv[i + 1];
      break;
    }
    if (a.rfind("--config=", 0) == 0) {
      path = a.substr(9);
      break;
    }
  }
  if (path.empty()) return ordered_json::object();
  std::ifstream in(path);
  if (!in) throw ossr::UsageError("cannot open config file: " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ossr::UsageError("config parse error in " + path + ": " + e.what());
  }
  const int version = j.value("config_version", 1);
  if (version != 1) {
    throw ossr::UsageError("unsupported config_version " + std::to_string(version));
  }
  return j;
}

template <typename T>
T cfg_or(const ordered_json& section, const char* key, T fallback) {
  if (section.contains(key)) return section.at(key).get<T>();
  return fallback;
}

fs::path resolve_output(const std::string& path) {
  const char* root = std::getenv("OSSR_OUTPUT_ROOT");
  fs::path p(path);
  if (root != nullptr && *root != '\0' && p.is_relative()) return fs::path(root) / p;
  return p;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t comma = s.find(',', pos);
    const std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!tok.empty()) out.push_back(std::stoi(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw ossr::UsageError("expected a comma-separated integer list, got '" + s + "'");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  for (int v : parse_int_list(s)) {
    if (v < 1) throw ossr::UsageError("list entries must be positive: '" + s + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::string config_hash(const ordered_json& cfg) {
  return "fnv1a64:" + ossr::fnv1a64_hex(cfg.dump());
}

std::string provenance_line(const ordered_json& cfg, std::uint64_t seed) {
  return "provenance tool=ossr version=" + std::string(ossr::kVersion) +
         " seed=" + std::to_string(seed) + " config_hash=" + config_hash(cfg);
}

void write_json_file(const fs::path& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ossr::IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

// ----------------------------------------------------------------------------
// Shared option bundles
// ----------------------------------------------------------------------------

struct TrainFlags {
  std::uint64_t seed = 42;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::size_t latent_dim = 32;
  std::string hidden = "512,256,128";
  std::size_t kl_warmup = 10;
  double kl_min_weight = 0.1;
  double learning_rate = 1e-3;
  std::size_t window = 4096;
  std::size_t time_points = 4096;

  void add_options(CLI::App* cmd, const ordered_json& sec) {
    seed = cfg_or(sec, "seed", seed);
    epochs = cfg_or(sec, "epochs", epochs);
    batch_size = cfg_or(sec, "batch-size", batch_size);
    latent_dim = cfg_or(sec, "latent-dim", latent_dim);
    hidden = cfg_or(sec, "hidden", hidden);
    kl_warmup = cfg_or(sec, "kl-warmup", kl_warmup);
    kl_min_weight = cfg_or(sec, "kl-min-weight", kl_min_weight);
    learning_rate = cfg_or(sec, "learning-rate", learning_rate);
    window = cfg_or(sec, "window", window);
    time_points = cfg_or(sec, "time-points", time_points);

    cmd->add_option("--seed", seed, "RNG seed");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--batch-size", batch_size, "mini-batch size");
    cmd->add_option("--latent-dim", latent_dim, "latent dimension");
    cmd->add_option("--hidden", hidden, "trunk widths, comma-separated");
    cmd->add_option("--kl-warmup", kl_warmup, "KL warmup epochs");
    cmd->add_option("--kl-min-weight", kl_min_weight, "KL weight floor in (0,1]");
    cmd->add_option("--learning-rate", learning_rate, "Adam learning rate");
    cmd->add_option("--window", window, "raw samples fused per record");
    cmd->add_option("--time-points", time_points, "time-channel length");
  }

  ossr::DvecConfig dvec_config() const {
    ossr::DvecConfig c;
    c.hidden = parse_size_list(hidden);
    c.latent_dim = latent_dim;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.seed = seed;
    c.learning_rate = learning_rate;
    c.kl_warmup_epochs = kl_warmup;
    c.kl_min_weight = kl_min_weight;
    return c;
  }

  ossr::FusionConfig fusion_config() const {
    ossr::FusionConfig f;
    f.window = window;
    f.time_points = time_points;
    return f;
  }

  ordered_json to_json() const {
    return ordered_json{{"seed", seed},
                        {"epochs", epochs},
                        {"batch-size", batch_size},
                        {"latent-dim", latent_dim},
                        {"hidden", hidden},
                        {"kl-warmup", kl_warmup},
                        {"kl-min-weight", kl_min_weight},
                        {"learning-rate", learning_rate},
                        {"window", window},
                        {"time-points", time_points}};
  }
};

// ----------------------------------------------------------------------------
// Subcommand bodies
// ----------------------------------------------------------------------------

int cmd_gen(std::uint64_t seed, int records_per_class, std::size_t record_length,
            double sample_rate, const std::string& out_dir, const std::string& format) {
  ossr::GeneratorConfig cfg;
  cfg.seed = seed;
  cfg.records_per_class = records_per_class;
  cfg.record_length = record_length;
  cfg.sample_rate = sample_rate;

  const fs::path dir = resolve_output(out_dir);
  const ordered_json eff{{"seed", seed},
                         {"records-per-class", records_per_class},
                         {"record-length", record_length},
                         {"sample-rate", sample_rate},
                         {"format", format}};
  const auto manifest = ossr::generate_dataset(cfg, dir, format);

  // re-stamp the manifest with provenance
  ordered_json mj = ossr::manifest_to_json(manifest);
  mj["provenance"] = ossr::ProvenanceBuilder().seed(seed).config(eff).json();
  write_json_file(dir / "manifest.json", mj);

  std::cout << "wrote dataset to " << dir.string() << " (" << manifest.checksum << ")\n";
  for (const auto& [name, info] : manifest.splits) {
    std::cout << "  " << name << ": " << info.records << " records -> " << info.file << "\n";
  }
  return 0;
}

struct KnownSplit {
  std::vector<ossr::RawSignal> train, val;
};

KnownSplit filter_known(const ossr::DatasetSplits& ds, const std::vector<int>& known) {
  KnownSplit ks;
  for (const auto& r : ds.train) {
    if (std::find(known.begin(), known.end(), r.label) != known.end()) ks.train.push_back(r);
  }
  for (const auto& r : ds.val) {
    if (std::find(known.begin(), known.end(), r.label) != known.end()) ks.val.push_back(r);
  }
  return ks;
}

int cmd_train(const std::string& data_dir, const std::string& known_str, const TrainFlags& tf,
              const std::string& out_path, const std::string& history_path) {
  const fs::path data(data_dir);
  const auto ds = ossr::load_dataset_dir(data);

  std::vector<int> known;
  if (known_str == "all") {
    for (int c = 0; c < ds.manifest.class_count(); ++c) known.push_back(c);
  } else {
    known = parse_int_list(known_str);
  }

  const KnownSplit ks = filter_known(ds, known);
  if (ks.train.empty() || ks.val.empty()) {
    throw ossr::DataError("no training or validation records for known classes " + known_str);
  }

  const ossr::FusionConfig fusion = tf.fusion_config();
  const ossr::FusionStats stats = ossr::fit_fusion_stats(ks.train, fusion);
  const auto train_fused = ossr::fuse_all(ks.train, fusion, stats);
  const auto val_fused = ossr::fuse_all(ks.val, fusion, stats);

  const ossr::DvecConfig dcfg = tf.dvec_config();
  ossr::DvecModel model = ossr::build_model(fusion.fused_dim(), known, dcfg);
  const ossr::TrainResult result = ossr::train(model, train_fused, val_fused, dcfg);

  ordered_json eff = tf.to_json();
  eff["data"] = data.filename().string();
  eff["known"] = known;
  const auto prov =
      ossr::ProvenanceBuilder().seed(tf.seed).config(eff).input(data / "manifest.json").json();

  const fs::path out = resolve_output(out_path);
  ossr::save_model(out, model, dcfg, fusion, stats, ordered_json{{"provenance", prov}});

  ordered_json hist;
  hist["kind"] = "ossr-training-history";
  hist["best_epoch"] = result.best_epoch;
  hist["best_val_accuracy"] = result.best_val_accuracy;
  ordered_json rows = ordered_json::array();
  for (const auto& e : result.history) {
    rows.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_accuracy", e.val_accuracy}});
  }
  hist["epochs"] = rows;
  hist["provenance"] = prov;
  const fs::path hp = history_path.empty() ? fs::path(out.string() + ".history.json")
                                            : resolve_output(history_path);
  write_json_file(hp, hist);

  std::cout << "trained " << known.size() << "-class model: best val accuracy "
            << result.best_val_accuracy << " at epoch " << result.best_epoch << "\n";
  std::cout << "checkpoint: " << out.string() << "\nhistory: " << hp.string() << "\n";
  return 0;
}

int cmd_calibrate(const std::string& model_path, const std::string& data_dir, double alpha,
                  double tail, const std::string& out_path) {
  auto bundle = ossr::load_model(model_path);
  const auto ds = ossr::load_dataset_dir(data_dir);
  const KnownSplit ks = filter_known(ds, bundle.model.known_class_ids);
  if (ks.train.empty() || ks.val.empty()) {
    throw ossr::DataError("dataset lacks records for the model's known classes");
  }
  const auto train_fused = ossr::fuse_all(ks.train, bundle.fusion_cfg, bundle.fusion_stats);
  const auto val_fused = ossr::fuse_all(ks.val, bundle.fusion_cfg, bundle.fusion_stats);

  const ossr::ClassStats stats = ossr::extract_class_stats(bundle.model, train_fused, val_fused);
  const ossr::Calibration cal = ossr::calibrate(bundle.model, stats, val_fused, alpha, tail);

  const ordered_json eff{{"model", fs::path(model_path).filename().string()},
                         {"data", fs::path(data_dir).filename().string()},
                         {"alpha", alpha},
                         {"tail", tail}};
  const auto prov = ossr::ProvenanceBuilder()
                        .seed(bundle.header.value("train_config", ordered_json::object())
                                  .value("seed", std::uint64_t{0}))
                        .config(eff)
                        .input(model_path)
                        .input(fs::path(data_dir) / "manifest.json")
                        .json();
  const fs::path out = resolve_output(out_path);
  ossr::save_calibration(out, cal, ordered_json{{"provenance", prov}});

  std::cout << "calibrated " << cal.classes.size() << " classes (alpha=" << alpha
            << "%, tail=" << tail << "); entropy "
            << (cal.entropy_applicable ? "applicable" : "not applicable") << "\n";
  std::cout << "calibration: " << out.string() << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& cal_path,
             const std::string& data_dir, const std::string& policy_str, const std::string& split,
             double gate, const std::string& out_path) {
  auto bundle = ossr::load_model(model_path);
  const ossr::Calibration cal = ossr::load_calibration(cal_path);
  const auto ds = ossr::load_dataset_dir(data_dir);
  const ossr::Policy policy = ossr::policy_from_name(policy_str);

  const std::vector<ossr::RawSignal>* records = nullptr;
  if (split == "train") {
    records = &ds.train;
  } else if (split == "val") {
    records = &ds.val;
  } else if (split == "test") {
    records = &ds.test;
  } else {
    throw ossr::UsageError("--split must be train, val or test");
  }

  std::vector<int> all_ids;
  for (int c = 0; c < ds.manifest.class_count(); ++c) all_ids.push_back(c);
  const ossr::Mission mission =
      ossr::build_custom_mission(0, bundle.model.known_class_ids, all_ids);

  std::vector<int> predictions, truths;
  for (const auto& r : *records) {
    const auto fused = ossr::fuse_time_frequency(r, bundle.fusion_cfg, bundle.fusion_stats);
    const ossr::Verdict v = ossr::discriminate(bundle.model, cal, fused.features, policy,
                                               mission.openness_value, gate);
    predictions.push_back(v.predicted);
    truths.push_back(r.label);
  }
  ossr::MissionReport rep = ossr::score(predictions, truths, bundle.model.known_class_ids);
  rep.policy = ossr::policy_name(policy);

  ordered_json j = ossr::mission_report_to_json(rep);
  j["openness"] = mission.openness_value;
  j["split"] = split;
  const ordered_json eff{{"model", fs::path(model_path).filename().string()},
                         {"cal", fs::path(cal_path).filename().string()},
                         {"data", fs::path(data_dir).filename().string()},
                         {"policy", policy_str},
                         {"split", split},
                         {"gate", gate}};
  j["provenance"] = ossr::ProvenanceBuilder()
                        .seed(bundle.header.value("train_config", ordered_json::object())
                                  .value("seed", std::uint64_t{0}))
                        .config(eff)
                        .input(model_path)
                        .input(cal_path)
                        .json();

  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    const fs::path out = resolve_output(out_path);
    write_json_file(out, j);
    std::cout << "A0 " << rep.a0 << " on " << split << " split; report: " << out.string() << "\n";
  }
  return 0;
}

int cmd_sweep(const std::string& data_dir, const std::string& missions_str,
              const std::string& policies_str, double alpha, double tail, double gate,
              const TrainFlags& tf, unsigned threads, const std::string& report_dir) {
  const auto ds = ossr::load_dataset_dir(data_dir);

  std::vector<ossr::Mission> missions;
  if (missions_str == "table3") {
    missions = ossr::build_missions(static_cast<std::size_t>(ds.manifest.class_count()));
  } else {
    const auto all = ossr::build_missions(static_cast<std::size_t>(ds.manifest.class_count()));
    for (int id : parse_int_list(missions_str)) {
      if (id < 1 || id > static_cast<int>(all.size())) {
        throw ossr::UsageError("mission id " + std::to_string(id) + " out of range 1.." +
                               std::to_string(all.size()));
      }
      missions.push_back(all[static_cast<std::size_t>(id - 1)]);
    }
  }

  std::vector<ossr::Policy> policies;
  std::size_t pos = 0;
  while (pos < policies_str.size()) {
    const std::size_t comma = policies_str.find(',', pos);
    const std::string tok =
        policies_str.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!tok.empty()) policies.push_back(ossr::policy_from_name(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (policies.empty()) throw ossr::UsageError("--policies must name at least one policy");

  ossr::MissionRunConfig cfg;
  cfg.train = tf.dvec_config();
  cfg.fusion = tf.fusion_config();
  cfg.alpha = alpha;
  cfg.tail_fraction = tail;
  cfg.openness_gate = gate;
  cfg.seed = tf.seed;

  const ossr::SweepResult result = ossr::sweep_missions(missions, policies, ds, cfg, threads);

  ordered_json eff = tf.to_json();
  eff["data"] = fs::path(data_dir).filename().string();
  eff["missions"] = missions_str;
  eff["policies"] = policies_str;
  eff["alpha"] = alpha;
  eff["tail"] = tail;
  eff["gate"] = gate;
  const auto prov = ossr::ProvenanceBuilder()
                        .seed(tf.seed)
                        .config(eff)
                        .input(fs::path(data_dir) / "manifest.json")
                        .json();

  const fs::path dir = resolve_output(report_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  write_json_file(dir / "sweep.json", ossr::sweep_to_json(result, prov));
  ossr::write_text_file(dir / "sweep.csv", ossr::sweep_to_csv(result, provenance_line(eff, tf.seed)));
  std::string svg = "<!-- " + provenance_line(eff, tf.seed) + " -->\n" + ossr::sweep_to_svg(result);
  ossr::write_text_file(dir / "sweep.svg", svg);

  std::cout << ossr::sweep_to_csv(result, provenance_line(eff, tf.seed));
  std::cout << "reports: " << (dir / "sweep.json").string() << ", .csv, .svg\n";
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t probes, std::size_t batch) {
  // small synthetic model: the check exercises the full composed objective
  ossr::DvecConfig cfg;
  cfg.hidden = {24, 16};
  cfg.latent_dim = 8;
  cfg.seed = seed;
  const std::size_t input_dim = 32;
  ossr::DvecModel model = ossr::build_model(input_dim, {0, 1, 2}, cfg);

  ossr::Rng rng(ossr::derive_stream(seed, {0x474349ull}));
  ossr::nn::Mat x(batch, input_dim);
  for (double& v : x.data) v = rng.normal();
  std::vector<int> y(batch);
  for (auto& lbl : y) lbl = static_cast<int>(rng.uniform_int(0, 2));
  std::vector<ossr::nn::Mat> eps(1);
  eps[0] = ossr::nn::Mat(batch, cfg.latent_dim);
  for (double& v : eps[0].data) v = rng.normal();

  // pin the KL gate weights at the base point so the probed loss is smooth
  std::vector<double> lambda(batch);
  {
    ossr::nn::Mat z0(batch, cfg.latent_dim);
    const auto acts = ossr::nn::forward_stack(model.trunk, x);
    const auto& h = acts.back();
    const auto mu = ossr::nn::dense_forward(model.mu_head, h);
    const auto lv = ossr::nn::dense_forward(model.logvar_head, h);
    for (std::size_t i = 0; i < z0.data.size(); ++i) {
      z0.data[i] = mu.data[i] + std::exp(0.5 * lv.data[i]) * eps[0].data[i];
    }
    const auto logits = ossr::nn::dense_forward(model.classifier, z0);
    for (std::size_t r = 0; r < batch; ++r) {
      const int yhat = static_cast<int>(ossr::nn::argmax_row(logits, r));
      lambda[r] = ossr::kl_gate_weight(3, y[r], yhat, cfg);
    }
  }

  auto loss = [&]() {
    return ossr::dvec_batch_loss(model, x, y, 3, eps, cfg, false, &lambda).loss;
  };
  auto grads = [&]() { ossr::dvec_batch_loss(model, x, y, 3, eps, cfg, true, &lambda); };

  ossr::Rng probe_rng(ossr::derive_stream(seed, {0x505242ull}));
  const auto reports = ossr::nn::finite_difference_check(model.parameters(), loss, grads, probes,
                                                         probe_rng);
  bool all_pass = true;
  for (const auto& r : reports) {
    std::cout << (r.pass ? "[ok]   " : "[FAIL] ") << r.tensor << ": " << r.probes
              << " probes, max rel err " << r.max_rel_err << ", max abs err " << r.max_abs_err
              << "\n";
    all_pass = all_pass && r.pass;
  }
  std::cout << (all_pass ? "gradient check passed\n" : "gradient check FAILED\n");
  return all_pass ? 0 : 1;
}

int cmd_report(const std::string& in_path, const std::string& format, const std::string& out_path) {
  std::ifstream in(in_path);
  if (!in) throw ossr::IoError("cannot open report: " + in_path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ossr::DataError("report parse error: " + std::string(e.what()));
  }
  if (j.value("kind", "") != "ossr-sweep-report") {
    throw ossr::DataError("not a sweep report: " + in_path);
  }

  // rebuild enough of the sweep to re-render
  ossr::SweepResult sweep;
  for (const auto& mj : j.at("missions")) {
    ossr::Mission m;
    m.id = mj.at("id").get<int>();
    m.known_class_ids = mj.at("known").get<std::vector<int>>();
    m.unknown_class_ids = mj.at("unknown").get<std::vector<int>>();
    m.openness_value = mj.at("openness").get<double>();
    sweep.missions.push_back(std::move(m));
  }
  for (const auto& pj : j.at("policies")) {
    sweep.policies.push_back(ossr::policy_from_name(pj.get<std::string>()));
  }
  for (const auto& cj : j.at("cells")) {
    ossr::SweepCell c;
    c.mission_id = cj.at("mission_id").get<int>();
    c.policy = cj.at("policy").get<std::string>();
    c.status = cj.at("status").get<std::string>();
    if (!cj.at("a0").is_null()) c.a0 = cj.at("a0").get<double>();
    sweep.cells.push_back(std::move(c));
  }

  std::string rendered;
  if (format == "csv") {
    const auto prov = j.value("provenance", ordered_json::object());
    rendered = ossr::sweep_to_csv(sweep, "rendered from " + fs::path(in_path).filename().string() +
                                             " config_hash=" + config_hash(prov));
  } else if (format == "svg") {
    rendered = ossr::sweep_to_svg(sweep);
  } else if (format == "text") {
    std::ostringstream s;
    s << "sweep over " << sweep.missions.size() << " missions, " << sweep.policies.size()
      << " policies\n";
    for (const auto& m : sweep.missions) {
      s << "mission " << m.id << " (openness " << ossr::detail::fixed4(m.openness_value) << "):";
      for (ossr::Policy p : sweep.policies) {
        const auto* c = sweep.find(m.id, p);
        s << "  " << ossr::policy_name(p) << "=";
        if (c == nullptr || c->status == "error") {
          s << "error";
        } else if (c->status == "not_applicable") {
          s << "/";
        } else {
          s << ossr::detail::fixed4(c->a0);
        }
      }
      s << "\n";
    }
    if (j.contains("openness_trend")) {
      for (const auto& t : j.at("openness_trend")) {
        s << "trend mission " << t.at("mission_id").get<int>() << ": entropy-evt gap "
          << ossr::detail::fixed4(t.at("entropy_minus_evt_a0").get<double>()) << "\n";
      }
    }
    rendered = s.str();
  } else {
    throw ossr::UsageError("--format must be text, csv or svg");
  }

  if (out_path.empty()) {
    std::cout << rendered;
  } else {
    ossr::write_text_file(resolve_output(out_path), rendered);
    std::cout << "wrote " << resolve_output(out_path).string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  ordered_json config;
  try {
    config = preload_config(argc, argv);
  } catch (const ossr::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"ossr " + std::string(ossr::kVersion) +
               " — open-set signal diagnosis: synthetic benchmark generation, "
               "variational encoder-classifier training, EVT/entropy calibration, "
               "and openness-parameterized evaluation"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (flags override it)");

  // gen
  auto gen_sec = config.value("gen", ordered_json::object());
  auto* gen = app.add_subcommand("gen", "generate the seeded synthetic benchmark dataset");
  std::uint64_t gen_seed = cfg_or(gen_sec, "seed", std::uint64_t{42});
  int gen_rpc = cfg_or(gen_sec, "records-per-class", 100);
  std::size_t gen_len = cfg_or(gen_sec, "record-length", std::size_t{5000});
  double gen_rate = cfg_or(gen_sec, "sample-rate", 50000.0);
  std::string gen_out = cfg_or(gen_sec, "out", std::string{});
  std::string gen_format = cfg_or(gen_sec, "format", std::string{"csv"});
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--records-per-class", gen_rpc, "records per class");
  gen->add_option("--record-length", gen_len, "samples per record");
  gen->add_option("--sample-rate", gen_rate, "sample rate in Hz");
  auto* gen_out_opt = gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--format", gen_format, "csv or bin")
      ->check(CLI::IsMember({"csv", "bin"}));
  if (gen_out.empty()) gen_out_opt->required();

  // train
  auto train_sec = config.value("train", ordered_json::object());
  auto* train_cmd = app.add_subcommand("train", "train the variational encoder-classifier");
  std::string train_data = cfg_or(train_sec, "data", std::string{});
  std::string train_known = cfg_or(train_sec, "known", std::string{"all"});
  std::string train_out = cfg_or(train_sec, "out", std::string{});
  std::string train_history = cfg_or(train_sec, "history", std::string{});
  TrainFlags train_flags;
  auto* train_data_opt = train_cmd->add_option("--data", train_data, "dataset directory");
  train_cmd->add_option("--known", train_known, "known class ids, e.g. 2,3 (default all)");
  auto* train_out_opt = train_cmd->add_option("--out", train_out, "checkpoint path");
  train_cmd->add_option("--history", train_history, "training history JSON path");
  train_flags.add_options(train_cmd, train_sec);
  if (train_data.empty()) train_data_opt->required();
  if (train_out.empty()) train_out_opt->required();

  // calibrate
  auto cal_sec = config.value("calibrate", ordered_json::object());
  auto* cal_cmd = app.add_subcommand("calibrate", "fit EVT/entropy thresholds on validation data");
  std::string cal_model = cfg_or(cal_sec, "model", std::string{});
  std::string cal_data = cfg_or(cal_sec, "data", std::string{});
  double cal_alpha = cfg_or(cal_sec, "alpha", 5.0);
  double cal_tail = cfg_or(cal_sec, "tail", 0.10);
  std::string cal_out = cfg_or(cal_sec, "out", std::string{});
  auto* cal_model_opt = cal_cmd->add_option("--model", cal_model, "model checkpoint");
  auto* cal_data_opt = cal_cmd->add_option("--data", cal_data, "dataset directory");
  cal_cmd->add_option("--alpha", cal_alpha, "percent of highest validation scores flagged");
  cal_cmd->add_option("--tail", cal_tail, "tail fraction for the Weibull fit");
  auto* cal_out_opt = cal_cmd->add_option("--out", cal_out, "calibration output path");
  if (cal_model.empty()) cal_model_opt->required();
  if (cal_data.empty()) cal_data_opt->required();
  if (cal_out.empty()) cal_out_opt->required();

  // eval
  auto eval_sec = config.value("eval", ordered_json::object());
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a calibrated model on a dataset split");
  std::string eval_model = cfg_or(eval_sec, "model", std::string{});
  std::string eval_cal = cfg_or(eval_sec, "cal", std::string{});
  std::string eval_data = cfg_or(eval_sec, "data", std::string{});
  std::string eval_policy = cfg_or(eval_sec, "policy", std::string{"evt"});
  std::string eval_split = cfg_or(eval_sec, "split", std::string{"test"});
  double eval_gate = cfg_or(eval_sec, "gate", ossr::kDefaultOpennessGate);
  std::string eval_out = cfg_or(eval_sec, "out", std::string{});
  auto* eval_model_opt = eval_cmd->add_option("--model", eval_model, "model checkpoint");
  auto* eval_cal_opt = eval_cmd->add_option("--cal", eval_cal, "calibration file");
  auto* eval_data_opt = eval_cmd->add_option("--data", eval_data, "dataset directory");
  eval_cmd->add_option("--policy", eval_policy, "evt, entropy or openness-gated");
  eval_cmd->add_option("--split", eval_split, "train, val or test");
  eval_cmd->add_option("--gate", eval_gate, "openness gate for the gated policy");
  eval_cmd->add_option("--out", eval_out, "report JSON path (stdout if omitted)");
  if (eval_model.empty()) eval_model_opt->required();
  if (eval_cal.empty()) eval_cal_opt->required();
  if (eval_data.empty()) eval_data_opt->required();

  // sweep
  auto sweep_sec = config.value("sweep", ordered_json::object());
  auto* sweep_cmd = app.add_subcommand("sweep", "run the missions x policies evaluation grid");
  std::string sweep_data = cfg_or(sweep_sec, "data", std::string{});
  std::string sweep_missions = cfg_or(sweep_sec, "missions", std::string{"table3"});
  std::string sweep_policies = cfg_or(sweep_sec, "policies", std::string{"evt,entropy"});
  double sweep_alpha = cfg_or(sweep_sec, "alpha", 5.0);
  double sweep_tail = cfg_or(sweep_sec, "tail", 0.10);
  double sweep_gate = cfg_or(sweep_sec, "gate", ossr::kDefaultOpennessGate);
  unsigned sweep_threads = cfg_or(sweep_sec, "threads", 1u);
  std::string sweep_report = cfg_or(sweep_sec, "report", std::string{});
  TrainFlags sweep_flags;
  auto* sweep_data_opt = sweep_cmd->add_option("--data", sweep_data, "dataset directory");
  sweep_cmd->add_option("--missions", sweep_missions, "'table3' or mission ids, e.g. 2,3");
  sweep_cmd->add_option("--policies", sweep_policies, "comma list of evt,entropy,openness-gated");
  sweep_cmd->add_option("--alpha", sweep_alpha, "percent of highest validation scores flagged");
  sweep_cmd->add_option("--tail", sweep_tail, "tail fraction for the Weibull fit");
  sweep_cmd->add_option("--gate", sweep_gate, "openness gate for the gated policy");
  sweep_cmd->add_option("--threads", sweep_threads, "parallel missions (default 1)");
  auto* sweep_report_opt = sweep_cmd->add_option("--report", sweep_report, "report output directory");
  sweep_flags.add_options(sweep_cmd, sweep_sec);
  if (sweep_data.empty()) sweep_data_opt->required();
  if (sweep_report.empty()) sweep_report_opt->required();

  // gradcheck
  auto gc_sec = config.value("gradcheck", ordered_json::object());
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of the training gradients");
  std::uint64_t gc_seed = cfg_or(gc_sec, "seed", std::uint64_t{42});
  std::size_t gc_probes = cfg_or(gc_sec, "probes", std::size_t{50});
  std::size_t gc_batch = cfg_or(gc_sec, "batch", std::size_t{8});
  gc_cmd->add_option("--seed", gc_seed, "RNG seed");
  gc_cmd->add_option("--probes", gc_probes, "random parameters probed per tensor");
  gc_cmd->add_option("--batch", gc_batch, "batch size for the probed loss");

  // report
  auto rep_sec = config.value("report", ordered_json::object());
  auto* rep_cmd = app.add_subcommand("report", "re-render a saved sweep report");
  std::string rep_in = cfg_or(rep_sec, "in", std::string{});
  std::string rep_format = cfg_or(rep_sec, "format", std::string{"text"});
  std::string rep_out = cfg_or(rep_sec, "out", std::string{});
  auto* rep_in_opt = rep_cmd->add_option("--in", rep_in, "sweep.json produced by sweep");
  rep_cmd->add_option("--format", rep_format, "text, csv or svg");
  rep_cmd->add_option("--out", rep_out, "output path (stdout if omitted)");
  if (rep_in.empty()) rep_in_opt->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_seed, gen_rpc, gen_len, gen_rate, gen_out, gen_format);
    if (train_cmd->parsed()) {
      return cmd_train(train_data, train_known, train_flags, train_out, train_history);
    }
    if (cal_cmd->parsed()) return cmd_calibrate(cal_model, cal_data, cal_alpha, cal_tail, cal_out);
    if (eval_cmd->parsed()) {
      return cmd_eval(eval_model, eval_cal, eval_data, eval_policy, eval_split, eval_gate, eval_out);
    }
    if (sweep_cmd->parsed()) {
      return cmd_sweep(sweep_data, sweep_missions, sweep_policies, sweep_alpha, sweep_tail,
                       sweep_gate, sweep_flags, sweep_threads, sweep_report);
    }
    if (gc_cmd->parsed()) return cmd_gradcheck(gc_seed, gc_probes, gc_batch);
    if (rep_cmd->parsed()) return cmd_report(rep_in, rep_format, rep_out);
  } catch (const ossr::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ossr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
