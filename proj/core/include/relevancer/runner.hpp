#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "relevancer/annotate.hpp"
#include "relevancer/dataset.hpp"
#include "relevancer/embed.hpp"
#include "relevancer/eval.hpp"
#include "relevancer/llmclient.hpp"
#include "relevancer/promptkit.hpp"

namespace relevancer {

/// One [[strategies]] entry. Expands to one PromptConfig per k (and per
/// lambda for rag_mmr_fs).
struct StrategyTemplate {
  Strategy strategy = Strategy::kZeroShot;
  std::vector<std::size_t> k;
  std::vector<double> lambdas;
  bool cot = false;
  std::uint64_t seed = 0;
  std::size_t mmr_pool = 0;
  bool reverse = false;
};

// VANILLA, {8,16}_FS, _FS_COT, _FS_RAG, _FS_RAG_COT, _FS_RAG_MMR_{0.75,0.5,0.25,0}.
std::vector<StrategyTemplate> standard_strategies(std::uint64_t seed = 0);

struct Price {
  double prompt_per_1k = 0.0;
  double completion_per_1k = 0.0;
};

// A row copied verbatim into the report, e.g. a human-labeler reference.
struct BaselineRow {
  std::string config_id;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
};

/// Declarative experiment manifest. Relative paths in a grid file resolve
/// against the file's directory.
struct ExperimentGrid {
  std::vector<LlmConfig> models;
  std::vector<StrategyTemplate> strategies;
  std::string scheme = "wands";  // builtin name or scheme file
  std::filesystem::path test_set;
  std::filesystem::path pool;
  std::optional<std::filesystem::path> test_mapping;
  std::optional<std::filesystem::path> pool_mapping;
  std::optional<std::filesystem::path> store;  // reused when it matches the pool
  EmbedderSpec embedder;
  std::filesystem::path cache_dir = ".cache";
  std::filesystem::path output_dir = "runs";
  std::filesystem::path report = "report.csv";
  std::size_t concurrency = 4;
  bool keep_prompts = false;
  std::map<std::string, Price> prices;  // keyed by model id
  std::vector<BaselineRow> baselines;

  void validate() const;
};

ExperimentGrid parse_grid_toml(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentGrid load_grid_file(const std::filesystem::path& path);

// Shortest decimal that round-trips: 0, 0.25, 0.5, 0.75.
std::string format_lambda(double lambda);
// The part of a config id after "{MODEL} + ", e.g. "16_FS_RAG_MMR_0.25".
std::string config_tag(const PromptConfig& config);
std::string config_id(const LlmConfig& model, const PromptConfig& config);

struct ParsedConfigId {
  std::string model;
  Strategy strategy = Strategy::kZeroShot;
  std::size_t k = 0;
  std::optional<double> lambda;
  bool cot = false;
  bool reverse = false;
};
ParsedConfigId parse_config_id(std::string_view id);

struct ExpandedConfig {
  std::string config_id;
  PromptConfig prompt;
  LlmConfig llm;
};

/// Model-major expansion in manifest order. Throws DuplicateConfig.
std::vector<ExpandedConfig> expand_grid(const ExperimentGrid& grid);

struct ResultRow {
  std::string config_id;
  MetricsReport metrics;
  double wall_clock_s = 0.0;
  double seconds_per_record = 0.0;
  std::uint64_t backend_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t backend_failures = 0;
  std::optional<TokenCounts> token_totals;
  std::optional<double> cost_estimate;
};

using BackendFactory =
    std::function<std::unique_ptr<Backend>(const LlmConfig&, const LabelScheme&, const GoldMap&)>;

struct RunOptions {
  http::RetryPolicy retry;
  BackendFactory backend_factory;  // default: make_backend
  std::vector<std::string> only;   // config ids to run; empty runs all
  std::ostream* log = nullptr;
};

struct GridResult {
  std::vector<ResultRow> rows;
  std::size_t backend_failures = 0;
};

/// Runs every expanded config sequentially and writes
///   output_dir/<config>.jsonl   predictions
///   report                      deterministic metrics table
///   report.timing.csv           wall clock, calls and cache hits
/// Data and config problems throw before any backend call.
GridResult run_grid(const ExperimentGrid& grid, const RunOptions& options = {});

/// Inputs shared by every config of a grid: the scheme, the test set, the
/// overlap-free pool and (when needed) its frozen store.
struct PreparedData {
  LabelScheme scheme;
  std::vector<TestItem> test;
  Dataset pool;
  std::optional<Store> store;
  std::unique_ptr<Embedder> embedder;
};

PreparedData prepare_data(const ExperimentGrid& grid, bool need_store);

// Labels the test set with one config against prepared data.
BatchResult run_config(const ExpandedConfig& config, const PreparedData& data, const ExperimentGrid& grid,
                       const RunOptions& options, const std::filesystem::path& output_path);

std::filesystem::path timing_path_for(const std::filesystem::path& report);

void write_report_csv(std::ostream& out, const std::vector<ResultRow>& rows, const LabelScheme& scheme,
                      const std::vector<BaselineRow>& baselines = {});
void write_timing_csv(std::ostream& out, const std::vector<ResultRow>& rows);

/// A report row as read back from disk, with the timing sidecar merged in
/// when present.
struct ReportEntry {
  std::string config_id;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::optional<std::uint64_t> n;
  std::optional<std::uint64_t> invalid;
  std::optional<double> seconds_per_record;
  std::optional<double> cost_estimate;
};

std::vector<ReportEntry> load_report(const std::filesystem::path& report);
std::vector<ReportEntry> sort_report(std::vector<ReportEntry> rows, SortKey key);
enum class ReportFormat { kMarkdown, kCsv, kTable, kLatex };
ReportFormat parse_report_format(std::string_view text);
void render_report(std::ostream& out, const std::vector<ReportEntry>& rows, ReportFormat format);

}  // namespace relevancer
