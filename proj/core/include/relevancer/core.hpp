#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace relevancer {

enum class Errc {
  kUnknownLabel,
  kUnknownScheme,
  kInvalidScheme,
  kInvalidPair,
  kMissingColumn,
  kMalformedRow,
  kInsufficientSupport,
  kIndivisibleTotal,
  kSchemeMismatch,
  kRemoteUnavailable,
  kDimensionMismatch,
  kFrozen,
  kNotFrozen,
  kEmptyStore,
  kBadLambda,
  kCorruptStore,
  kPoolTooSmall,
  kMissingRationale,
  kExampleCountMismatch,
  kBackendUnavailable,
  kBackendRejected,
  kCacheCorrupt,
  kUnknownPair,
  kNoLabelFound,
  kMissingGold,
  kEmptyMatrix,
  kDuplicateConfig,
  kOutputUnwritable,
  kInvalidConfig,
  kIo,
};

std::string_view errc_name(Errc code);

/// Every failure in the library surfaces as this exception; `code()` names
/// the contract that was violated.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// An ordered, closed set of relevance classes. `definitions[i]` describes
/// `labels[i]` and is pasted verbatim into prompts.
struct LabelScheme {
  std::string name;
  std::vector<std::string> labels;
  std::vector<std::string> definitions;

  void validate() const;
  std::size_t size() const noexcept { return labels.size(); }
  // Index of an already-canonical label, or nullopt.
  std::optional<std::size_t> index_of(std::string_view canonical) const;
  bool contains(std::string_view canonical) const { return index_of(canonical).has_value(); }

  friend bool operator==(const LabelScheme&, const LabelScheme&) = default;
};

/// esci | wands | five_level
LabelScheme builtin_scheme(std::string_view name);
std::vector<std::string> builtin_scheme_names();

LabelScheme parse_scheme_toml(std::string_view text);
std::string scheme_to_toml(const LabelScheme& scheme);
LabelScheme load_scheme_file(const std::filesystem::path& path);
// A builtin name, or a path to a scheme file.
LabelScheme resolve_scheme(std::string_view name_or_path);

struct QPPair {
  std::string query;
  std::string product_title;
  std::optional<std::string> id;
  std::optional<std::string> locale;  // carried, never interpreted

  void validate() const;
  friend bool operator==(const QPPair&, const QPPair&) = default;
};

QPPair make_qp_pair(std::string query, std::string product_title);

struct LabeledExample {
  QPPair pair;
  std::string label;
  std::optional<std::string> rationale;

  void validate(const LabelScheme& scheme) const;
  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

struct TokenCounts {
  std::int64_t prompt = 0;
  std::int64_t completion = 0;
  friend bool operator==(const TokenCounts&, const TokenCounts&) = default;
};

struct Prediction {
  QPPair pair;
  std::optional<std::string> gold;
  std::optional<std::string> predicted;
  std::string raw_response;
  std::string config_id;
  double latency_ms = 0.0;
  std::optional<std::string> parse_error;

  std::string prompt_hash;
  std::optional<std::string> prompt;
  std::vector<std::size_t> example_ids;
  std::optional<TokenCounts> tokens;
  bool backend_failure = false;

  bool ok() const noexcept { return predicted.has_value(); }
  // Exactly one of predicted / parse_error is populated.
  bool well_formed() const noexcept { return predicted.has_value() != parse_error.has_value(); }
};

std::string trim(std::string_view text);
// NFC + Unicode case fold + whitespace trim. Used for every equality test on
// user text (labels, pair keys).
std::string fold_text(std::string_view text);
// Fold-and-trim key identifying a (query, title) pair.
std::string pair_key(std::string_view query, std::string_view product_title);
inline std::string pair_key(const QPPair& pair) { return pair_key(pair.query, pair.product_title); }

/// Canonical single-line rendering shared by the embedder and the prompt:
/// `query: {query}, product title: {product_title}`.
std::string render_pair_line(const QPPair& pair);
// Inverse of render_pair_line. A line can admit more than one split when the
// query itself contains ", product title: "; all candidates are returned,
// shortest query first.
std::vector<QPPair> parse_pair_line(std::string_view line);

/// Maps raw label text onto the scheme's canonical spelling: case-insensitive,
/// ignoring surrounding whitespace and ASCII/typographic quotes.
std::string normalize_label(std::string_view raw, const LabelScheme& scheme);
std::optional<std::string> try_normalize_label(std::string_view raw, const LabelScheme& scheme);

}  // namespace relevancer
