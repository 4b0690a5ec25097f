#include "relevancer/annotate.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include <json.hpp>

namespace relevancer {

namespace {

bool word_char(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80;
}

bool contains_word(std::string_view haystack, std::string_view word) {
  if (word.empty()) return false;
  for (auto pos = haystack.find(word); pos != std::string_view::npos; pos = haystack.find(word, pos + 1)) {
    bool left_ok = pos == 0 || !word_char(static_cast<unsigned char>(haystack[pos - 1]));
    auto end = pos + word.size();
    bool right_ok = end == haystack.size() || !word_char(static_cast<unsigned char>(haystack[end]));
    if (left_ok && right_ok) return true;
  }
  return false;
}

const std::regex& rating_regex() {
  // {"rating": "X"} | {'rating': 'X'} | {"rating": X}
  static const std::regex re(R"re(\{\s*(["'])rating\1\s*:\s*(?:(["'])([^"'{}]*)\2|([^"'{},\s][^"'{},]*?))\s*\})re");
  return re;
}

}  // namespace

std::string parse_label(std::string_view response, const LabelScheme& scheme) {
  std::optional<std::string> last_value;
  const std::string text(response);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), rating_regex()); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    last_value = m[3].matched ? m[3].str() : m[4].str();
  }
  if (last_value) return normalize_label(*last_value, scheme);

  const std::string folded = fold_text(response);
  std::set<std::string> found;
  for (const auto& label : scheme.labels) {
    if (contains_word(folded, fold_text(label))) found.insert(label);
  }
  if (found.size() == 1) return *found.begin();
  throw Error(Errc::kNoLabelFound, found.empty() ? "response names no scheme label"
                                                 : "response names " + std::to_string(found.size()) +
                                                       " different labels and has no rating structure");
}

void AnnotationJob::validate() const {
  if (concurrency < 1) throw Error(Errc::kInvalidConfig, "concurrency must be >= 1");
  prompt_config.validate();
  llm_config.validate();
  if (!(pool.scheme == prompt_config.scheme)) {
    throw Error(Errc::kSchemeMismatch, "pool scheme " + pool.scheme.name + " differs from prompt scheme " +
                                           prompt_config.scheme.name);
  }
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    if (test_set[i].gold && !pool.scheme.contains(*test_set[i].gold)) {
      throw Error(Errc::kSchemeMismatch, "test pair " + std::to_string(i + 1) + " has gold label '" +
                                             *test_set[i].gold + "' outside scheme " + pool.scheme.name);
    }
  }
}

Prediction label_pair(const TestItem& item, const AnnotationJob& job, const AnnotationContext& ctx,
                      bool* cache_hit) {
  if (ctx.backend == nullptr) throw Error(Errc::kInvalidConfig, "no backend configured");
  Prediction p;
  p.pair = item.pair;
  p.gold = item.gold;
  p.config_id = job.config_id;

  auto examples = select_examples(job.prompt_config, item.pair, job.pool, ctx.store, ctx.embedder);
  auto prompt = assemble(job.prompt_config, item.pair, examples, job.config_id);
  p.prompt_hash = sha256_hex(prompt.text);
  p.example_ids = prompt.example_ids;
  if (job.keep_prompts) p.prompt = prompt.text;

  try {
    auto rec = complete(prompt.text, job.llm_config, *ctx.backend, ctx.cache, ctx.retry);
    if (cache_hit != nullptr) *cache_hit = rec.cache_hit;
    p.raw_response = rec.response;
    p.latency_ms = rec.recorded_latency_ms;
    p.tokens = rec.token_counts;
  } catch (const Error& e) {
    switch (e.code()) {
      case Errc::kBackendUnavailable:
      case Errc::kBackendRejected:
      case Errc::kUnknownPair:
        p.parse_error = e.what();
        p.backend_failure = true;
        return p;
      default:
        throw;
    }
  }

  try {
    p.predicted = parse_label(p.raw_response, job.prompt_config.scheme);
  } catch (const Error& e) {
    if (e.code() != Errc::kNoLabelFound && e.code() != Errc::kUnknownLabel) throw;
    p.parse_error = e.what();
  }
  return p;
}

BatchResult label_batch(const AnnotationJob& job, const AnnotationContext& ctx) {
  job.validate();
  if (job.prompt_config.uses_store() && (ctx.store == nullptr || ctx.embedder == nullptr)) {
    throw Error(Errc::kInvalidConfig, "config " + job.config_id + " retrieves examples but no store was given");
  }
  if (ctx.backend == nullptr) throw Error(Errc::kInvalidConfig, "no backend configured");

  std::ofstream out;
  if (!job.output_path.empty()) {
    if (job.output_path.has_parent_path()) {
      std::error_code ec;
      std::filesystem::create_directories(job.output_path.parent_path(), ec);
    }
    out.open(job.output_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::kOutputUnwritable, "cannot write " + job.output_path.string());
  }

  const std::size_t n = job.test_set.size();
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t calls_before = ctx.backend->calls();

  std::vector<std::optional<Prediction>> slots(n);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> cache_hits{0};
  std::atomic<bool> abort{false};
  std::mutex mu;
  std::size_t next_to_write = 0;
  std::exception_ptr failure;
  bool write_failed = false;

  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        bool hit = false;
        Prediction p = label_pair(job.test_set[i], job, ctx, &hit);
        if (hit) cache_hits.fetch_add(1);
        std::lock_guard lock(mu);
        slots[i] = std::move(p);
        while (next_to_write < n && slots[next_to_write]) {
          if (out.is_open()) {
            out << prediction_to_json(*slots[next_to_write], job.keep_prompts) << '\n';
            out.flush();
            if (!out) write_failed = true;
          }
          ++next_to_write;
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        abort.store(true);
        return;
      }
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(job.concurrency, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  if (write_failed) throw Error(Errc::kOutputUnwritable, "write failed for " + job.output_path.string());

  BatchResult result;
  result.predictions.reserve(n);
  BatchSummary& s = result.summary;
  s.n = n;
  double latency_sum = 0.0;
  for (auto& slot : slots) {
    Prediction& p = *slot;
    if (p.parse_error) ++s.errors;
    if (p.backend_failure) ++s.backend_failures;
    latency_sum += p.latency_ms;
    if (p.tokens) {
      s.has_tokens = true;
      s.prompt_tokens += p.tokens->prompt;
      s.completion_tokens += p.tokens->completion;
    }
    result.predictions.push_back(std::move(p));
  }
  s.backend_calls = ctx.backend->calls() - calls_before;
  s.cache_hits = cache_hits.load();
  s.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  s.mean_latency_ms = n == 0 ? 0.0 : latency_sum / static_cast<double>(n);
  return result;
}

// --- prediction files ------------------------------------------------------

namespace {

template <typename J>
J opt(const std::optional<std::string>& v) {
  return v ? J(*v) : J(nullptr);
}

std::optional<std::string> get_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

}  // namespace

std::string prediction_to_json(const Prediction& p, bool keep_prompt) {
  using J = nlohmann::ordered_json;
  J j;
  j["query"] = p.pair.query;
  j["product_title"] = p.pair.product_title;
  j["gold"] = opt<J>(p.gold);
  j["predicted"] = opt<J>(p.predicted);
  j["parse_error"] = opt<J>(p.parse_error);
  j["latency_ms"] = p.latency_ms;
  j["config_id"] = p.config_id;
  j["prompt_hash"] = p.prompt_hash;
  j["example_ids"] = p.example_ids;
  j["raw_response"] = p.raw_response;
  if (keep_prompt && p.prompt) j["prompt"] = *p.prompt;
  return j.dump();
}

Prediction prediction_from_json(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
    Prediction p;
    p.pair.query = j.at("query").get<std::string>();
    p.pair.product_title = j.at("product_title").get<std::string>();
    p.gold = get_opt(j, "gold");
    p.predicted = get_opt(j, "predicted");
    p.parse_error = get_opt(j, "parse_error");
    p.latency_ms = j.value("latency_ms", 0.0);
    p.config_id = j.value("config_id", std::string{});
    p.prompt_hash = j.value("prompt_hash", std::string{});
    if (j.contains("example_ids")) p.example_ids = j["example_ids"].get<std::vector<std::size_t>>();
    p.raw_response = j.value("raw_response", std::string{});
    p.prompt = get_opt(j, "prompt");
    if (!p.well_formed()) throw Error(Errc::kMalformedRow, "exactly one of predicted/parse_error must be set");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kMalformedRow, std::string("prediction line: ") + e.what());
  }
}

std::vector<Prediction> read_predictions(std::istream& in) {
  std::vector<Prediction> preds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      preds.push_back(prediction_from_json(line));
    } catch (const Error& e) {
      throw Error(Errc::kMalformedRow, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return preds;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  return read_predictions(in);
}

}  // namespace relevancer
