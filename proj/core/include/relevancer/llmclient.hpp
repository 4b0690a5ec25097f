#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "relevancer/core.hpp"
#include "relevancer/http.hpp"

namespace relevancer {

struct LlmConfig {
  std::string name;       // display name used in config ids, e.g. "LLM2"; defaults to model
  std::string model;      // id sent to the endpoint
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 256;
  std::string endpoint;   // http(s) URL, or a mock spec such as "mock:oracle"

  void validate() const;
  const std::string& display_name() const noexcept { return name.empty() ? model : name; }
};

struct CompletionRecord {
  std::string cache_key;
  std::string prompt;
  std::string response;
  std::string model;
  double latency_ms = 0.0;           // this call; 0 on cache hits
  double recorded_latency_ms = 0.0;  // backend latency when the response was produced
  std::optional<TokenCounts> token_counts;
  bool cache_hit = false;
  int retries = 0;
};

std::string sha256_hex(std::string_view bytes);

/// SHA-256 (hex) of
///   "relevancer-cache-v1\nmodel=<model>\ntemperature=<%.17g>\ntop_p=<%.17g>\n"
///   "max_tokens=<int>\n\n<prompt>"
std::string cache_key(const LlmConfig& config, std::string_view prompt);

/// What a backend returns for one attempt.
struct BackendReply {
  enum class Status { kOk, kRetryable, kRejected };
  Status status = Status::kOk;
  std::string text;
  int http_status = 0;
  std::string error;
  std::optional<TokenCounts> tokens;
  // Backends that simulate latency report it; otherwise the call is timed.
  std::optional<double> reported_latency_ms;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendReply send(const LlmConfig& config, std::string_view prompt) = 0;
  std::uint64_t calls() const noexcept { return calls_.load(); }

 protected:
  void count_call() noexcept { calls_.fetch_add(1); }

 private:
  std::atomic<std::uint64_t> calls_{0};
};

/// Chat-completions style endpoint: one user message carrying the prompt.
/// Bearer token from RELEVANCER_LLM_API_KEY.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(std::string endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(120));
  BackendReply send(const LlmConfig& config, std::string_view prompt) override;

 private:
  http::Url url_;
  std::chrono::milliseconds timeout_;
  std::optional<std::string> api_key_;
};

// Gold labels keyed by pair_key().
using GoldMap = std::unordered_map<std::string, std::string>;

struct MockMode {
  enum class Kind { kOracle, kFixed, kNoisy };
  Kind kind = Kind::kOracle;
  std::string label;        // fixed
  double flip_rate = 0.0;   // noisy
  std::uint64_t seed = 0;   // noisy
  double delay_ms = 0.0;    // simulated latency; the mock sleeps this long
};

/// "mock:oracle" | "mock:fixed:<Label>" | "mock:noisy:<flip_rate>:<seed>",
/// each optionally followed by "?delay_ms=<ms>".
MockMode parse_mock_spec(std::string_view spec);
bool is_mock_endpoint(std::string_view endpoint);

/// Desk-scale stand-in for a hosted model. Reads the question pair from the
/// prompt's final line and answers with `{'rating': '<Label>'}`.
class MockBackend final : public Backend {
 public:
  MockBackend(MockMode mode, LabelScheme scheme, GoldMap gold);
  BackendReply send(const LlmConfig& config, std::string_view prompt) override;

  // Label the mock would answer for a pair; throws Error(kUnknownPair).
  std::string answer(const QPPair& pair) const;

 private:
  MockMode mode_;
  LabelScheme scheme_;
  GoldMap gold_;
};

std::unique_ptr<Backend> make_backend(const LlmConfig& config, const LabelScheme& scheme, GoldMap gold = {});

/// Append-only JSONL cache of completion records, one file per
/// (model, config). A torn final line from an interrupted writer is dropped
/// on open; any other unreadable line is CacheCorrupt.
class CompletionCache {
 public:
  explicit CompletionCache(std::filesystem::path path);

  std::optional<CompletionRecord> lookup(const std::string& key) const;
  void append(const CompletionRecord& record);
  std::size_t size() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, CompletionRecord> records_;
  std::ofstream out_;
};

std::filesystem::path cache_file_for(const std::filesystem::path& cache_dir, const std::string& model,
                                     const std::string& config_tag);

/// Returns the cached record when present; otherwise calls the backend with
/// the retry policy (429, 5xx and transport errors only), appends the record
/// and returns it. Throws BackendUnavailable / BackendRejected.
CompletionRecord complete(std::string_view prompt, const LlmConfig& config, Backend& backend,
                          CompletionCache* cache, const http::RetryPolicy& retry = {});

}  // namespace relevancer
