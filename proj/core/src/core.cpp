#include "relevancer/core.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

namespace relevancer {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kUnknownLabel: return "UnknownLabel";
    case Errc::kUnknownScheme: return "UnknownScheme";
    case Errc::kInvalidScheme: return "InvalidScheme";
    case Errc::kInvalidPair: return "InvalidPair";
    case Errc::kMissingColumn: return "MissingColumn";
    case Errc::kMalformedRow: return "MalformedRow";
    case Errc::kInsufficientSupport: return "InsufficientSupport";
    case Errc::kIndivisibleTotal: return "IndivisibleTotal";
    case Errc::kSchemeMismatch: return "SchemeMismatch";
    case Errc::kRemoteUnavailable: return "RemoteUnavailable";
    case Errc::kDimensionMismatch: return "DimensionMismatch";
    case Errc::kFrozen: return "Frozen";
    case Errc::kNotFrozen: return "NotFrozen";
    case Errc::kEmptyStore: return "EmptyStore";
    case Errc::kBadLambda: return "BadLambda";
    case Errc::kCorruptStore: return "CorruptStore";
    case Errc::kPoolTooSmall: return "PoolTooSmall";
    case Errc::kMissingRationale: return "MissingRationale";
    case Errc::kExampleCountMismatch: return "ExampleCountMismatch";
    case Errc::kBackendUnavailable: return "BackendUnavailable";
    case Errc::kBackendRejected: return "BackendRejected";
    case Errc::kCacheCorrupt: return "CacheCorrupt";
    case Errc::kUnknownPair: return "UnknownPair";
    case Errc::kNoLabelFound: return "NoLabelFound";
    case Errc::kMissingGold: return "MissingGold";
    case Errc::kEmptyMatrix: return "EmptyMatrix";
    case Errc::kDuplicateConfig: return "DuplicateConfig";
    case Errc::kOutputUnwritable: return "OutputUnwritable";
    case Errc::kInvalidConfig: return "InvalidConfig";
    case Errc::kIo: return "Io";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

// --- text helpers ----------------------------------------------------------

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// ASCII quotes plus the UTF-8 encodings of ‘ ’ “ ”.
constexpr std::array<std::string_view, 7> kQuotes = {
    "'", "\"", "`", "\xE2\x80\x98", "\xE2\x80\x99", "\xE2\x80\x9C", "\xE2\x80\x9D"};

std::string_view strip_quotes_and_space(std::string_view s) {
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    while (!s.empty() && is_space(s.front())) { s.remove_prefix(1); changed = true; }
    while (!s.empty() && is_space(s.back())) { s.remove_suffix(1); changed = true; }
    for (auto q : kQuotes) {
      if (s.starts_with(q)) { s.remove_prefix(q.size()); changed = true; }
      if (s.ends_with(q)) { s.remove_suffix(q.size()); changed = true; }
    }
  }
  return s;
}

const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) throw std::runtime_error("ICU NFC normalizer unavailable");
  return *n;
}

}  // namespace

std::string trim(std::string_view text) {
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  return std::string(text);
}

std::string fold_text(std::string_view text) {
  auto trimmed = trim(text);
  bool ascii = std::all_of(trimmed.begin(), trimmed.end(),
                           [](char c) { return static_cast<unsigned char>(c) < 0x80; });
  if (ascii) {
    for (auto& c : trimmed) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return trimmed;
  }
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(trimmed);
  icu::UnicodeString normalized = nfc().normalize(u, status);
  if (U_FAILURE(status)) normalized = u;
  normalized.foldCase();
  normalized = nfc().normalize(normalized, status);
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

std::string pair_key(std::string_view query, std::string_view product_title) {
  std::string key = fold_text(query);
  key.push_back('\x1f');
  key += fold_text(product_title);
  return key;
}

std::string render_pair_line(const QPPair& pair) {
  std::string line;
  line.reserve(pair.query.size() + pair.product_title.size() + 24);
  line += "query: ";
  line += pair.query;
  line += ", product title: ";
  line += pair.product_title;
  return line;
}

std::vector<QPPair> parse_pair_line(std::string_view line) {
  constexpr std::string_view kPrefix = "query: ";
  constexpr std::string_view kSep = ", product title: ";
  std::vector<QPPair> out;
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  if (!line.starts_with(kPrefix)) return out;
  line.remove_prefix(kPrefix.size());
  for (auto pos = line.find(kSep); pos != std::string_view::npos; pos = line.find(kSep, pos + 1)) {
    QPPair p;
    p.query = std::string(line.substr(0, pos));
    p.product_title = std::string(line.substr(pos + kSep.size()));
    out.push_back(std::move(p));
  }
  return out;
}

// --- pairs & examples ------------------------------------------------------

void QPPair::validate() const {
  if (trim(query).empty()) throw Error(Errc::kInvalidPair, "query is empty");
  if (trim(product_title).empty()) throw Error(Errc::kInvalidPair, "product title is empty");
}

QPPair make_qp_pair(std::string query, std::string product_title) {
  QPPair p{std::move(query), std::move(product_title), std::nullopt, std::nullopt};
  p.validate();
  return p;
}

void LabeledExample::validate(const LabelScheme& scheme) const {
  pair.validate();
  if (!scheme.contains(label)) {
    throw Error(Errc::kUnknownLabel, "label '" + label + "' is not in scheme " + scheme.name);
  }
  if (rationale && trim(*rationale).empty()) {
    throw Error(Errc::kMissingRationale, "rationale present but empty");
  }
}

// --- schemes ---------------------------------------------------------------

void LabelScheme::validate() const {
  if (name.empty()) throw Error(Errc::kInvalidScheme, "scheme has no name");
  if (labels.empty()) throw Error(Errc::kInvalidScheme, "scheme " + name + " has no labels");
  if (definitions.size() != labels.size()) {
    throw Error(Errc::kInvalidScheme, "scheme " + name + " needs one definition per label");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (trim(labels[i]).empty() || trim(labels[i]) != labels[i]) {
      throw Error(Errc::kInvalidScheme, "scheme " + name + " has a blank or padded label");
    }
    if (!seen.insert(fold_text(labels[i])).second) {
      throw Error(Errc::kInvalidScheme, "duplicate label '" + labels[i] + "' in scheme " + name);
    }
    if (trim(definitions[i]).empty()) {
      throw Error(Errc::kInvalidScheme, "label '" + labels[i] + "' has no definition");
    }
  }
}

std::optional<std::size_t> LabelScheme::index_of(std::string_view canonical) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == canonical) return i;
  }
  return std::nullopt;
}

LabelScheme builtin_scheme(std::string_view name) {
  if (name == "wands") {
    return {"wands",
            {"Exact", "Partial", "Irrelevant"},
            {"this label represents the surfaced product fully matches the search query.",
             "this label represents the surfaced product that does not fully match the search query. "
             "It only matches the target entity of the query, but does not satisfy the modifiers for "
             "the query.",
             "this label indicates the product is not relevant to the query."}};
  }
  if (name == "esci") {
    return {"esci",
            {"Exact", "Substitute", "Complement", "Irrelevant"},
            {"this label represents the item is relevant for the query, and satisfies all the query "
             "specifications (e.g., water bottle matching all attributes of a query \"plastic water "
             "bottle 24oz\", such as material and size).",
             "this label represents the item is somewhat relevant: it fails to fulfill some aspects of "
             "the query but the item can be used as a functional substitute (e.g., fleece for a "
             "\"sweater\" query).",
             "this label represents the item does not fulfill the query, but could be used in "
             "combination with an item that exactly matches the query (e.g., track pants for a "
             "\"running shoe\" query).",
             "this label indicates the item is irrelevant for the query, or it fails to fulfill a "
             "central aspect of the query (e.g., socks for a \"pant\" query)."}};
  }
  if (name == "five_level") {
    return {"five_level",
            {"Excellent", "Good", "Okay", "Bad", "Embarrassing"},
            {"this label represents the product is exactly what the query asks for and satisfies every "
             "attribute in it.",
             "this label represents the product matches the main intent of the query but differs in a "
             "minor attribute.",
             "this label represents the product is related to the query and could be acceptable, but "
             "differs in an important attribute.",
             "this label represents the product does not satisfy the query intent, although it shares "
             "some connection with it.",
             "this label indicates the product is completely unrelated to the query and would be "
             "embarrassing to show for it."}};
  }
  throw Error(Errc::kUnknownScheme, "no builtin scheme named '" + std::string(name) + "'");
}

std::vector<std::string> builtin_scheme_names() { return {"esci", "wands", "five_level"}; }

LabelScheme parse_scheme_toml(std::string_view text) {
  toml::table doc;
  try {
    doc = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw Error(Errc::kInvalidScheme, std::string("scheme file: ") + std::string(e.description()));
  }
  LabelScheme scheme;
  scheme.name = doc["name"].value_or(std::string{});
  const auto* labels = doc["labels"].as_array();
  const auto* defs = doc["definitions"].as_table();
  if (labels == nullptr) throw Error(Errc::kInvalidScheme, "scheme file lacks a 'labels' list");
  if (defs == nullptr) throw Error(Errc::kInvalidScheme, "scheme file lacks a 'definitions' table");
  for (const auto& node : *labels) {
    auto label = node.value<std::string>();
    if (!label) throw Error(Errc::kInvalidScheme, "labels must be strings");
    scheme.labels.push_back(*label);
    auto def = (*defs)[*label].value<std::string>();
    if (!def) throw Error(Errc::kInvalidScheme, "no definition for label '" + *label + "'");
    scheme.definitions.push_back(*def);
  }
  if (defs->size() != scheme.labels.size()) {
    throw Error(Errc::kInvalidScheme, "definitions name labels that are not in 'labels'");
  }
  scheme.validate();
  return scheme;
}

std::string scheme_to_toml(const LabelScheme& scheme) {
  toml::array labels;
  toml::table defs;
  for (std::size_t i = 0; i < scheme.labels.size(); ++i) {
    labels.push_back(scheme.labels[i]);
    defs.insert(scheme.labels[i], scheme.definitions[i]);
  }
  toml::table doc;
  doc.insert("name", scheme.name);
  doc.insert("labels", std::move(labels));
  doc.insert("definitions", std::move(defs));
  std::ostringstream out;
  out << doc << '\n';
  return out.str();
}

LabelScheme load_scheme_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open scheme file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scheme_toml(buf.str());
}

LabelScheme resolve_scheme(std::string_view name_or_path) {
  for (const auto& n : builtin_scheme_names()) {
    if (n == name_or_path) return builtin_scheme(n);
  }
  std::filesystem::path p{std::string(name_or_path)};
  if (std::filesystem::exists(p)) return load_scheme_file(p);
  throw Error(Errc::kUnknownScheme,
              "'" + std::string(name_or_path) + "' is neither a builtin scheme nor a scheme file");
}

// --- label normalization ---------------------------------------------------

std::optional<std::string> try_normalize_label(std::string_view raw, const LabelScheme& scheme) {
  auto wanted = fold_text(strip_quotes_and_space(raw));
  if (wanted.empty()) return std::nullopt;
  for (const auto& label : scheme.labels) {
    if (fold_text(label) == wanted) return label;
  }
  return std::nullopt;
}

std::string normalize_label(std::string_view raw, const LabelScheme& scheme) {
  if (auto label = try_normalize_label(raw, scheme)) return *label;
  throw Error(Errc::kUnknownLabel,
              "'" + std::string(raw) + "' does not match any label of scheme " + scheme.name);
}

}  // namespace relevancer
