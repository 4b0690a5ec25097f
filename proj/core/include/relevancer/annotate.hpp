#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "relevancer/core.hpp"
#include "relevancer/dataset.hpp"
#include "relevancer/embed.hpp"
#include "relevancer/llmclient.hpp"
#include "relevancer/promptkit.hpp"
#include "relevancer/vectorstore.hpp"

namespace relevancer {

/// Extracts the label from an LLM response. Takes the last `{'rating': X}` /
/// `{"rating": "X"}` structure (any spacing, either quote style); when there
/// is none, accepts prose that names exactly one scheme label as a whole word.
/// Throws NoLabelFound, or UnknownLabel when a structure names a non-label.
std::string parse_label(std::string_view response, const LabelScheme& scheme);

struct AnnotationJob {
  std::vector<TestItem> test_set;
  Dataset pool;
  PromptConfig prompt_config;
  LlmConfig llm_config;
  std::string config_id;
  std::size_t concurrency = 1;
  std::filesystem::path output_path;  // empty: keep predictions in memory only
  bool keep_prompts = false;

  void validate() const;
};

/// Collaborators a job runs against. The store and embedder may be null for
/// strategies that do not retrieve.
struct AnnotationContext {
  const Store* store = nullptr;
  Embedder* embedder = nullptr;
  Backend* backend = nullptr;
  CompletionCache* cache = nullptr;
  http::RetryPolicy retry;
};

/// One pair end to end. Backend and parse failures come back as a
/// Prediction with parse_error set; configuration errors are thrown.
Prediction label_pair(const TestItem& item, const AnnotationJob& job, const AnnotationContext& ctx,
                      bool* cache_hit = nullptr);

struct BatchSummary {
  std::size_t n = 0;
  std::size_t errors = 0;            // predictions with parse_error
  std::size_t backend_failures = 0;  // subset of errors caused by the backend
  std::uint64_t backend_calls = 0;   // attempts, including retries
  std::size_t cache_hits = 0;
  double wall_clock_s = 0.0;
  double mean_latency_ms = 0.0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  bool has_tokens = false;
};

struct BatchResult {
  std::vector<Prediction> predictions;  // test-set order
  BatchSummary summary;
};

/// Labels every test pair with at most `concurrency` backend calls in flight.
/// Predictions are appended to output_path in input order as they complete.
BatchResult label_batch(const AnnotationJob& job, const AnnotationContext& ctx);

// One JSON object per line: query, product_title, gold, predicted,
// parse_error, latency_ms, config_id, prompt_hash, example_ids,
// raw_response [, prompt].
std::string prediction_to_json(const Prediction& p, bool keep_prompt);
Prediction prediction_from_json(std::string_view line);
std::vector<Prediction> read_predictions(std::istream& in);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

}  // namespace relevancer
