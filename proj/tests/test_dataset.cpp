#include <filesystem>
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "ossr/dataset.hpp"
#include "ossr/rng.hpp"
#include "ossr/synth.hpp"

using namespace ossr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("ossr_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

DatasetManifest small_manifest(const std::string& format, std::size_t record_length) {
  DatasetManifest m;
  m.format = format;
  m.record_length = record_length;
  m.sample_rate = 50000.0;
  m.class_names.assign(synth_class_names().begin(), synth_class_names().end());
  return m;
}

std::vector<RawSignal> one_record_per_class(std::size_t record_length) {
  std::vector<RawSignal> out;
  Rng rng(11);
  for (int c = 0; c < 6; ++c) {
    RawSignal r;
    r.sample_rate = 50000.0;
    r.label = c;
    r.samples.resize(record_length);
    for (double& v : r.samples) v = static_cast<double>(static_cast<float>(rng.normal()));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

TEST(Dataset, CsvRoundTripIsBitExact) {
  const auto dir = temp_dir("csv_rt");
  const auto records = one_record_per_class(64);
  write_dataset(dir, small_manifest("csv", 64), {{"train", records}});

  const auto manifest = load_manifest(dir);
  const auto loaded = load_split(dir, manifest, "train");
  ASSERT_EQ(loaded.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(loaded[i].label, records[i].label);
    ASSERT_EQ(loaded[i].samples.size(), records[i].samples.size());
    for (std::size_t j = 0; j < records[i].samples.size(); ++j) {
      EXPECT_EQ(loaded[i].samples[j], records[i].samples[j]) << "record " << i << " sample " << j;
    }
  }
}

TEST(Dataset, BinRoundTripIsBitExact) {
  const auto dir = temp_dir("bin_rt");
  const auto records = one_record_per_class(64);
  write_dataset(dir, small_manifest("bin", 64), {{"train", records}});

  const auto manifest = load_manifest(dir);
  const auto loaded = load_split(dir, manifest, "train");
  ASSERT_EQ(loaded.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(loaded[i].label, records[i].label);
    for (std::size_t j = 0; j < records[i].samples.size(); ++j) {
      EXPECT_EQ(loaded[i].samples[j], records[i].samples[j]);
    }
  }
}

TEST(Dataset, CsvAndBinLoadIdentically) {
  const auto dir_a = temp_dir("fmt_csv");
  const auto dir_b = temp_dir("fmt_bin");
  const auto records = one_record_per_class(32);
  write_dataset(dir_a, small_manifest("csv", 32), {{"train", records}});
  write_dataset(dir_b, small_manifest("bin", 32), {{"train", records}});

  const auto a = load_split(dir_a, load_manifest(dir_a), "train");
  const auto b = load_split(dir_b, load_manifest(dir_b), "train");
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].samples.size(); ++j) {
      EXPECT_EQ(a[i].samples[j], b[i].samples[j]);
    }
  }
}

TEST(Dataset, SixRowFileYieldsSixLabels) {
  const auto dir = temp_dir("six");
  write_dataset(dir, small_manifest("csv", 16), {{"train", one_record_per_class(16)}});
  const auto loaded = load_split(dir, load_manifest(dir), "train");
  ASSERT_EQ(loaded.size(), 6u);
  for (int c = 0; c < 6; ++c) EXPECT_EQ(loaded[static_cast<std::size_t>(c)].label, c);
}

TEST(Dataset, ShortRowIsRejectedWithRowIndex) {
  const auto dir = temp_dir("short_row");
  write_dataset(dir, small_manifest("csv", 16), {{"train", one_record_per_class(16)}});

  // truncate the third row by one value
  const auto path = dir / "train.csv";
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  in.close();
  lines[2] = lines[2].substr(0, lines[2].rfind(','));
  std::ofstream out(path, std::ios::binary);
  for (const auto& l : lines) out << l << "\n";
  out.close();

  const auto manifest = load_manifest(dir);
  try {
    load_records_csv(path, manifest);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
}

TEST(Dataset, UnknownLabelIsRejectedOnLoad) {
  const auto dir = temp_dir("bad_label_load");
  write_dataset(dir, small_manifest("csv", 8), {{"train", one_record_per_class(8)}});
  // corrupt the label of row 2
  const auto path = dir / "train.csv";
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  in.close();
  lines[1] = "9" + lines[1].substr(lines[1].find(','));
  std::ofstream out(path, std::ios::binary);
  for (const auto& l : lines) out << l << "\n";
  out.close();

  try {
    load_records_csv(path, load_manifest(dir));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("label"), std::string::npos);
  }
}

TEST(Dataset, MissingSplitIsReported) {
  const auto dir = temp_dir("missing_split");
  write_dataset(dir, small_manifest("csv", 8), {{"train", one_record_per_class(8)}});
  EXPECT_THROW(load_split(dir, load_manifest(dir), "test"), DataError);
}
