#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "relevancer/core.hpp"

namespace relevancer {

inline constexpr std::string_view kInvalidColumn = "INVALID";

/// Rows are gold labels in scheme order; columns are the scheme labels
/// followed by one INVALID column for unparseable responses.
struct ConfusionMatrix {
  LabelScheme scheme;
  std::vector<std::vector<std::uint64_t>> counts;

  explicit ConfusionMatrix(LabelScheme s);
  std::size_t invalid_column() const noexcept { return scheme.size(); }
  std::uint64_t total() const noexcept;
  std::uint64_t invalid() const noexcept;
  void add(std::size_t gold, std::size_t predicted_or_invalid, std::uint64_t n = 1);
};

ConfusionMatrix confusion(const std::vector<Prediction>& preds, const LabelScheme& scheme);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct MetricsReport {
  double accuracy = 0.0;
  std::vector<std::pair<std::string, ClassMetrics>> per_class;  // scheme order
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::uint64_t n = 0;
  std::uint64_t invalid = 0;
};

// Precision, recall and F1 use 0/0 := 0. Macro F1 averages every scheme
// label, including ones with no support.
MetricsReport metrics(const ConfusionMatrix& cm);

enum class SortKey { kWeightedF1, kMacroF1, kAccuracy, kConfigId };
SortKey parse_sort_key(std::string_view text);

struct ReportRow {
  std::string config_id;
  MetricsReport metrics;
};

/// Sorted copy: descending by metric (ascending for config_id), ties by
/// config_id.
std::vector<ReportRow> compare(std::vector<ReportRow> rows, SortKey key = SortKey::kWeightedF1);

// Fixed 3-decimal rendering used by every table format.
std::string format_metric(double value);

// config_id,accuracy,macro_f1,weighted_f1,n,invalid,<label>_precision,...
std::vector<std::string> metrics_csv_header(const LabelScheme& scheme);
std::vector<std::string> metrics_csv_fields(const ReportRow& row);
void write_metrics_csv(std::ostream& out, const std::vector<ReportRow>& rows, const LabelScheme& scheme);

void write_aligned_table(std::ostream& out, const std::vector<std::vector<std::string>>& cells);
void write_markdown_table(std::ostream& out, const std::vector<std::vector<std::string>>& cells);
// `id & acc & macro & weighted \\`
std::string latex_row(const ReportRow& row);

void write_confusion(std::ostream& out, const ConfusionMatrix& cm);

}  // namespace relevancer
