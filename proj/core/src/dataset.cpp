#include "relevancer/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <toml.hpp>

#include "relevancer/csv.hpp"
#include "relevancer/rng.hpp"

namespace relevancer {

std::vector<std::size_t> Dataset::histogram() const {
  std::vector<std::size_t> h(scheme.size(), 0);
  for (const auto& ex : examples) {
    if (auto i = scheme.index_of(ex.label)) ++h[*i];
  }
  return h;
}

void ColumnMapping::validate(const LabelScheme& scheme) const {
  if (query_col == title_col || query_col == label_col || title_col == label_col) {
    throw Error(Errc::kInvalidConfig, "query, title and label columns must be distinct");
  }
  for (const auto& [raw, canonical] : label_map) {
    if (!scheme.contains(canonical)) {
      throw Error(Errc::kInvalidConfig,
                  "label_map sends '" + raw + "' to '" + canonical + "', which is not a scheme label");
    }
  }
}

ColumnMapping parse_mapping_toml(std::string_view text) {
  toml::table doc;
  try {
    doc = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw Error(Errc::kInvalidConfig, std::string("mapping file: ") + std::string(e.description()));
  }
  ColumnMapping m;
  m.query_col = doc["query_col"].value_or(m.query_col);
  m.title_col = doc["title_col"].value_or(m.title_col);
  m.label_col = doc["label_col"].value_or(m.label_col);
  m.rationale_col = doc["rationale_col"].value_or(m.rationale_col);
  if (auto v = doc["id_col"].value<std::string>()) m.id_col = *v;
  if (auto v = doc["locale_col"].value<std::string>()) m.locale_col = *v;
  if (auto d = doc["delimiter"].value<std::string>()) {
    if (d->size() != 1) throw Error(Errc::kInvalidConfig, "delimiter must be a single character");
    m.delimiter = (*d)[0];
  }
  if (const auto* map = doc["label_map"].as_table()) {
    for (const auto& [k, v] : *map) {
      auto canonical = v.value<std::string>();
      if (!canonical) throw Error(Errc::kInvalidConfig, "label_map values must be strings");
      m.label_map.emplace(std::string(k.str()), *canonical);
    }
  }
  return m;
}

ColumnMapping load_mapping_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open mapping file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_mapping_toml(buf.str());
}

namespace {

struct Layout {
  std::size_t width = 0;
  std::size_t query = 0;
  std::size_t title = 0;
  std::optional<std::size_t> label;
  std::optional<std::size_t> rationale;
  std::optional<std::size_t> id;
  std::optional<std::size_t> locale;
};

std::optional<std::size_t> find_col(const csv::Row& header, std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string_view h = header[i];
    if (i == 0 && h.starts_with("\xEF\xBB\xBF")) h.remove_prefix(3);  // UTF-8 BOM
    if (trim(h) == name) return i;
  }
  return std::nullopt;
}

std::size_t require_col(const csv::Row& header, const std::string& name) {
  if (auto i = find_col(header, name)) return *i;
  throw Error(Errc::kMissingColumn, "header lacks column '" + name + "'");
}

Layout read_layout(csv::Reader& reader, const ColumnMapping& mapping, bool label_required) {
  auto header = reader.next();
  if (!header) throw Error(Errc::kMissingColumn, "file is empty; expected a header row");
  Layout l;
  l.width = header->size();
  l.query = require_col(*header, mapping.query_col);
  l.title = require_col(*header, mapping.title_col);
  l.label = label_required ? std::optional(require_col(*header, mapping.label_col))
                           : find_col(*header, mapping.label_col);
  l.rationale = find_col(*header, mapping.rationale_col);
  if (mapping.id_col) l.id = require_col(*header, *mapping.id_col);
  if (mapping.locale_col) l.locale = require_col(*header, *mapping.locale_col);
  return l;
}

bool blank_row(const csv::Row& row) { return row.size() == 1 && trim(row[0]).empty(); }

std::string row_tag(std::size_t row) { return "row " + std::to_string(row); }

// Parses one data row. `row` is the 1-based data row number.
QPPair parse_pair(const csv::Row& cells, const Layout& l, std::size_t row) {
  if (cells.size() != l.width) {
    throw Error(Errc::kMalformedRow, row_tag(row) + ": expected " + std::to_string(l.width) +
                                         " fields, found " + std::to_string(cells.size()));
  }
  QPPair pair;
  pair.query = cells[l.query];
  pair.product_title = cells[l.title];
  if (l.id && !cells[*l.id].empty()) pair.id = cells[*l.id];
  if (l.locale && !cells[*l.locale].empty()) pair.locale = cells[*l.locale];
  try {
    pair.validate();
  } catch (const Error& e) {
    throw Error(Errc::kMalformedRow, row_tag(row) + ": " + e.what());
  }
  return pair;
}

std::string map_label(const std::string& raw, const ColumnMapping& mapping, const LabelScheme& scheme,
                      std::size_t row) {
  std::string text = raw;
  if (auto it = mapping.label_map.find(trim(raw)); it != mapping.label_map.end()) text = it->second;
  auto label = try_normalize_label(text, scheme);
  if (!label) {
    throw Error(Errc::kUnknownLabel, row_tag(row) + ": label '" + raw + "' is not in scheme " + scheme.name);
  }
  return *label;
}

}  // namespace

Dataset read_dataset(std::istream& in, const ColumnMapping& mapping, const LabelScheme& scheme,
                     std::string split_name) {
  scheme.validate();
  mapping.validate(scheme);
  csv::Reader reader(in, mapping.delimiter);
  Layout layout = read_layout(reader, mapping, true);
  Dataset ds{scheme, {}, std::move(split_name)};
  std::size_t row = 0;
  while (auto cells = reader.next()) {
    if (blank_row(*cells)) continue;
    ++row;
    LabeledExample ex;
    ex.pair = parse_pair(*cells, layout, row);
    ex.label = map_label((*cells)[*layout.label], mapping, scheme, row);
    if (layout.rationale && !trim((*cells)[*layout.rationale]).empty()) {
      ex.rationale = (*cells)[*layout.rationale];
    }
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, const ColumnMapping& mapping,
                     const LabelScheme& scheme) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  return read_dataset(in, mapping, scheme, path.stem().string());
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  bool with_rationale = std::any_of(ds.examples.begin(), ds.examples.end(),
                                    [](const LabeledExample& e) { return e.rationale.has_value(); });
  csv::Row header{"query", "product_title", "label"};
  if (with_rationale) header.emplace_back("rationale");
  csv::write_row(out, header);
  for (const auto& ex : ds.examples) {
    csv::Row row{ex.pair.query, ex.pair.product_title, ex.label};
    if (with_rationale) row.push_back(ex.rationale.value_or(""));
    csv::write_row(out, row);
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kOutputUnwritable, "cannot write " + path.string());
  write_dataset(out, ds);
  if (!out) throw Error(Errc::kOutputUnwritable, "write failed for " + path.string());
}

std::vector<TestItem> read_test_set(std::istream& in, const ColumnMapping& mapping,
                                    const LabelScheme& scheme) {
  scheme.validate();
  mapping.validate(scheme);
  csv::Reader reader(in, mapping.delimiter);
  Layout layout = read_layout(reader, mapping, false);
  std::vector<TestItem> items;
  std::size_t row = 0;
  while (auto cells = reader.next()) {
    if (blank_row(*cells)) continue;
    ++row;
    TestItem item;
    item.pair = parse_pair(*cells, layout, row);
    if (layout.label && !trim((*cells)[*layout.label]).empty()) {
      item.gold = map_label((*cells)[*layout.label], mapping, scheme, row);
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<TestItem> load_test_set(const std::filesystem::path& path, const ColumnMapping& mapping,
                                    const LabelScheme& scheme) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  return read_test_set(in, mapping, scheme);
}

std::vector<TestItem> to_test_set(const Dataset& ds) {
  std::vector<TestItem> items;
  items.reserve(ds.size());
  for (const auto& ex : ds.examples) items.push_back({ex.pair, ex.label});
  return items;
}

Dataset stratified_sample(const Dataset& ds, std::size_t total, std::uint64_t seed) {
  const std::size_t classes = ds.scheme.size();
  if (total == 0 || classes == 0 || total % classes != 0) {
    throw Error(Errc::kIndivisibleTotal, std::to_string(total) + " is not a positive multiple of " +
                                             std::to_string(classes) + " classes");
  }
  const std::size_t per_class = total / classes;
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    by_class[*ds.scheme.index_of(ds.examples[i].label)].push_back(i);
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (by_class[c].size() < per_class) {
      throw Error(Errc::kInsufficientSupport,
                  "class " + ds.scheme.labels[c] + " has " + std::to_string(by_class[c].size()) +
                      " examples, needs " + std::to_string(per_class));
    }
  }

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  chosen.reserve(total);
  for (auto& members : by_class) {
    // Partial Fisher-Yates: the first per_class slots become the sample.
    for (std::size_t i = 0; i < per_class; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.uniform(members.size() - i));
      std::swap(members[i], members[j]);
      chosen.push_back(members[i]);
    }
  }
  for (std::size_t i = chosen.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform(i));
    std::swap(chosen[i - 1], chosen[j]);
  }

  Dataset out{ds.scheme, {}, ds.split_name};
  out.examples.reserve(total);
  for (auto i : chosen) out.examples.push_back(ds.examples[i]);
  return out;
}

namespace {

Dataset drop_keys(const Dataset& pool, const std::unordered_set<std::string>& keys) {
  Dataset out{pool.scheme, {}, pool.split_name};
  for (const auto& ex : pool.examples) {
    if (!keys.contains(pair_key(ex.pair))) out.examples.push_back(ex);
  }
  return out;
}

}  // namespace

Dataset exclude_overlap(const Dataset& pool, const Dataset& test) {
  if (!(pool.scheme == test.scheme)) {
    throw Error(Errc::kSchemeMismatch, "pool uses scheme " + pool.scheme.name + ", test uses " +
                                           test.scheme.name);
  }
  std::unordered_set<std::string> keys;
  for (const auto& ex : test.examples) keys.insert(pair_key(ex.pair));
  return drop_keys(pool, keys);
}

Dataset exclude_overlap(const Dataset& pool, const std::vector<TestItem>& test) {
  std::unordered_set<std::string> keys;
  for (const auto& item : test) keys.insert(pair_key(item.pair));
  return drop_keys(pool, keys);
}

}  // namespace relevancer
