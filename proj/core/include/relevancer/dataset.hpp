#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "relevancer/core.hpp"

namespace relevancer {

struct Dataset {
  LabelScheme scheme;
  std::vector<LabeledExample> examples;  // file order unless stated otherwise
  std::string split_name;

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }
  // Per-label counts in scheme order.
  std::vector<std::size_t> histogram() const;
};

/// Adapts a third-party CSV layout to the canonical one.
struct ColumnMapping {
  std::string query_col = "query";
  std::string title_col = "product_title";
  std::string label_col = "label";
  std::string rationale_col = "rationale";  // used when the header has it
  std::optional<std::string> id_col;
  std::optional<std::string> locale_col;
  std::map<std::string, std::string> label_map;  // raw -> canonical
  char delimiter = ',';

  void validate(const LabelScheme& scheme) const;
};

ColumnMapping parse_mapping_toml(std::string_view text);
ColumnMapping load_mapping_file(const std::filesystem::path& path);

Dataset read_dataset(std::istream& in, const ColumnMapping& mapping, const LabelScheme& scheme,
                     std::string split_name = {});
Dataset load_dataset(const std::filesystem::path& path, const ColumnMapping& mapping,
                     const LabelScheme& scheme);
inline Dataset load_dataset(const std::filesystem::path& path, const LabelScheme& scheme) {
  return load_dataset(path, ColumnMapping{}, scheme);
}

/// Canonical CSV: `query,product_title,label[,rationale]`. The rationale
/// column is written only when some example carries one.
void write_dataset(std::ostream& out, const Dataset& ds);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);

/// A pair to be labeled; gold is present when the file has a label column.
struct TestItem {
  QPPair pair;
  std::optional<std::string> gold;
};

std::vector<TestItem> read_test_set(std::istream& in, const ColumnMapping& mapping,
                                    const LabelScheme& scheme);
std::vector<TestItem> load_test_set(const std::filesystem::path& path, const ColumnMapping& mapping,
                                    const LabelScheme& scheme);
std::vector<TestItem> to_test_set(const Dataset& ds);

/// Exactly total/|labels| examples per class, drawn without replacement and
/// shuffled, all driven by one seeded Rng.
Dataset stratified_sample(const Dataset& ds, std::size_t total, std::uint64_t seed);

/// Drops pool examples whose fold-and-trim pair key occurs in test.
Dataset exclude_overlap(const Dataset& pool, const Dataset& test);
Dataset exclude_overlap(const Dataset& pool, const std::vector<TestItem>& test);

}  // namespace relevancer
