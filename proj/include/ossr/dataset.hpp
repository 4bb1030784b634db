#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ossr/common.hpp"
#include "ossr/signal.hpp"

namespace ossr {

using ordered_json = nlohmann::ordered_json;

// ----------------------------------------------------------------------------
// Dataset on disk: manifest.json next to one data file per split.
//
//   csv  — one record per line: "label,v1,...,vN", N = record_length
//   bin  — manifest JSON line, then rows of (1 + record_length) little-endian
//          float32: label first, samples after
//
// Values are float32-quantized at generation time, so both formats round-trip
// the stored doubles bit-exactly.
// ----------------------------------------------------------------------------

struct SplitInfo {
  std::string file;
  std::size_t records = 0;
};

struct DatasetManifest {
  int manifest_version = 1;
  std::string format = "csv";  // "csv" | "bin"
  std::size_t record_length = 5000;
  double sample_rate = 50000.0;
  std::vector<std::string> class_names;
  int records_per_class = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, SplitInfo>> splits;  // keeps file order
  std::string checksum;

  int class_count() const { return static_cast<int>(class_names.size()); }

  const SplitInfo* find_split(const std::string& name) const {
    for (const auto& [n, info] : splits) {
      if (n == name) return &info;
    }
    return nullptr;
  }
};

inline ordered_json manifest_to_json(const DatasetManifest& m) {
  ordered_json j;
  j["manifest_version"] = m.manifest_version;
  j["kind"] = "ossr-dataset";
  j["format"] = m.format;
  j["record_length"] = m.record_length;
  j["sample_rate"] = m.sample_rate;
  j["class_names"] = m.class_names;
  j["records_per_class"] = m.records_per_class;
  j["seed"] = m.seed;
  ordered_json js = ordered_json::object();
  for (const auto& [name, info] : m.splits) {
    js[name] = {{"file", info.file}, {"records", info.records}};
  }
  j["splits"] = js;
  j["checksum"] = m.checksum;
  return j;
}

inline DatasetManifest manifest_from_json(const ordered_json& j) {
  DatasetManifest m;
  try {
    m.manifest_version = j.at("manifest_version").get<int>();
    m.format = j.at("format").get<std::string>();
    m.record_length = j.at("record_length").get<std::size_t>();
    m.sample_rate = j.at("sample_rate").get<double>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.records_per_class = j.value("records_per_class", 0);
    m.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("splits")) {
      for (const auto& [name, info] : j.at("splits").items()) {
        m.splits.emplace_back(name, SplitInfo{info.at("file").get<std::string>(),
                                              info.at("records").get<std::size_t>()});
      }
    }
    m.checksum = j.value("checksum", "");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
  if (m.record_length == 0) throw DataError("manifest: record_length must be positive");
  if (m.sample_rate <= 0.0) throw DataError("manifest: sample_rate must be positive");
  if (m.format != "csv" && m.format != "bin") {
    throw DataError("manifest: unknown format '" + m.format + "'");
  }
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest parse error in " + path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

// ----------------------------------------------------------------------------
// Number formatting: exact round-trip, locale-free
// ----------------------------------------------------------------------------

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  out.append(buf, p);
}

inline double parse_double(const char* first, const char* last, std::size_t row,
                           std::size_t column) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || p != last) {
    throw DataError("row " + std::to_string(row) + ": malformed value in column " +
                    std::to_string(column));
  }
  return v;
}

inline void validate_label(int label, int class_count, std::size_t row) {
  if (label == kUnlabeled) return;
  if (label < 0 || label >= class_count) {
    throw DataError("row " + std::to_string(row) + ": unknown label " + std::to_string(label));
  }
}

}  // namespace detail

// ----------------------------------------------------------------------------
// Checksums: FNV-1a over (label, float32 samples) of every record, split by
// split in manifest order. Format-independent.
// ----------------------------------------------------------------------------

inline void checksum_records(Fnv1a64& h, const std::vector<RawSignal>& records) {
  for (const auto& r : records) {
    h.update_u32(static_cast<std::uint32_t>(r.label));
    for (double v : r.samples) h.update_f32(static_cast<float>(v));
  }
}

// ----------------------------------------------------------------------------
// Writers
// ----------------------------------------------------------------------------

inline void write_split_csv(const std::filesystem::path& path,
                            const std::vector<RawSignal>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  std::string line;
  for (const auto& r : records) {
    line.clear();
    line += std::to_string(r.label);
    for (double v : r.samples) {
      line += ',';
      detail::append_double(line, v);
    }
    line += '\n';
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_split_bin(const std::filesystem::path& path, const DatasetManifest& manifest,
                            const std::vector<RawSignal>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const std::string header = manifest_to_json(manifest).dump() + "\n";
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::vector<float> row(1 + manifest.record_length);
  for (const auto& r : records) {
    row[0] = static_cast<float>(r.label);
    for (std::size_t i = 0; i < r.samples.size(); ++i) row[1 + i] = static_cast<float>(r.samples[i]);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

/// Write manifest + one data file per split into dir. Fills in split records
/// and checksum on the manifest it returns.
inline DatasetManifest write_dataset(const std::filesystem::path& dir, DatasetManifest manifest,
                                     const std::vector<std::pair<std::string, std::vector<RawSignal>>>& splits) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);

  Fnv1a64 h;
  manifest.splits.clear();
  for (const auto& [name, records] : splits) {
    const std::string file = name + (manifest.format == "bin" ? ".bin" : ".csv");
    manifest.splits.emplace_back(name, SplitInfo{file, records.size()});
    checksum_records(h, records);
  }
  manifest.checksum = "fnv1a64:" + h.hex();

  for (const auto& [name, records] : splits) {
    const auto* info = manifest.find_split(name);
    const auto path = dir / info->file;
    if (manifest.format == "bin") {
      write_split_bin(path, manifest, records);
    } else {
      write_split_csv(path, records);
    }
  }

  std::ofstream mo(dir / "manifest.json", std::ios::binary);
  if (!mo) throw IoError("cannot write manifest in " + dir.string());
  mo << manifest_to_json(manifest).dump(2) << "\n";
  return manifest;
}

// ----------------------------------------------------------------------------
// Loaders
// ----------------------------------------------------------------------------

inline std::vector<RawSignal> load_records_csv(const std::filesystem::path& path,
                                               const DatasetManifest& manifest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<RawSignal> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    RawSignal r;
    r.sample_rate = manifest.sample_rate;
    r.samples.reserve(manifest.record_length);

    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto comma = static_cast<const char*>(std::memchr(p, ',', static_cast<std::size_t>(end - p)));
    if (comma == nullptr) throw DataError("row " + std::to_string(row) + ": missing label field");
    {
      int label = 0;
      auto [lp, lec] = std::from_chars(p, comma, label);
      if (lec != std::errc{} || lp != comma) {
        throw DataError("row " + std::to_string(row) + ": malformed label");
      }
      detail::validate_label(label, manifest.class_count(), row);
      r.label = label;
    }
    p = comma + 1;
    std::size_t col = 0;
    while (p <= end) {
      auto next = static_cast<const char*>(std::memchr(p, ',', static_cast<std::size_t>(end - p)));
      const char* stop = next != nullptr ? next : end;
      ++col;
      r.samples.push_back(detail::parse_double(p, stop, row, col));
      if (next == nullptr) break;
      p = next + 1;
    }
    if (r.samples.size() != manifest.record_length) {
      throw DataError("row " + std::to_string(row) + ": expected " +
                      std::to_string(manifest.record_length) + " values, got " +
                      std::to_string(r.samples.size()));
    }
    require_finite(r.samples, "row " + std::to_string(row));
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<RawSignal> load_records_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw DataError("binary file missing manifest header: " + path.string());
  DatasetManifest manifest;
  try {
    manifest = manifest_from_json(ordered_json::parse(header));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("binary header parse error in " + path.string() + ": " + e.what());
  }

  std::vector<RawSignal> out;
  std::vector<float> row(1 + manifest.record_length);
  const auto row_bytes = static_cast<std::streamsize>(row.size() * sizeof(float));
  std::size_t idx = 0;
  while (in.read(reinterpret_cast<char*>(row.data()), row_bytes)) {
    ++idx;
    RawSignal r;
    r.sample_rate = manifest.sample_rate;
    const int label = static_cast<int>(row[0]);
    detail::validate_label(label, manifest.class_count(), idx);
    r.label = label;
    r.samples.assign(row.begin() + 1, row.end());
    require_finite(r.samples, "row " + std::to_string(idx));
    out.push_back(std::move(r));
  }
  if (in.gcount() != 0) {
    throw DataError("row " + std::to_string(idx + 1) + ": truncated record in " + path.string());
  }
  return out;
}

/// Load one data file. CSV needs manifest.json next to it; binary files are
/// self-describing. Preserves file order.
inline std::vector<RawSignal> load_dataset(const std::filesystem::path& data_path,
                                           const std::string& format) {
  if (format == "bin") return load_records_bin(data_path);
  if (format == "csv") {
    const DatasetManifest manifest = load_manifest(data_path.parent_path());
    return load_records_csv(data_path, manifest);
  }
  throw UsageError("load_dataset: unknown format '" + format + "'");
}

/// Full train/val/test view of a dataset directory.
struct DatasetSplits {
  DatasetManifest manifest;
  std::vector<RawSignal> train, val, test;
};

inline std::vector<RawSignal> load_split(const std::filesystem::path& dir,
                                         const DatasetManifest& manifest, const std::string& name) {
  const auto* info = manifest.find_split(name);
  if (info == nullptr) throw DataError("dataset has no split '" + name + "'");
  const auto path = dir / info->file;
  auto records = manifest.format == "bin" ? load_records_bin(path) : load_records_csv(path, manifest);
  if (records.size() != info->records) {
    throw DataError("split '" + name + "': manifest says " + std::to_string(info->records) +
                    " records, file has " + std::to_string(records.size()));
  }
  return records;
}

inline DatasetSplits load_dataset_dir(const std::filesystem::path& dir) {
  DatasetSplits ds;
  ds.manifest = load_manifest(dir);
  ds.train = load_split(dir, ds.manifest, "train");
  ds.val = load_split(dir, ds.manifest, "val");
  ds.test = load_split(dir, ds.manifest, "test");
  return ds;
}

}  // namespace ossr
