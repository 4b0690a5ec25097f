#include "relevancer/llmclient.hpp"

#include <openssl/evp.h>

#include <cassert>
#include <charconv>
#include <chrono>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "relevancer/embed.hpp"
#include "relevancer/promptkit.hpp"
#include "relevancer/rng.hpp"

namespace relevancer {

void LlmConfig::validate() const {
  if (model.empty()) throw Error(Errc::kInvalidConfig, "model id is empty");
  if (!(temperature >= 0.0)) throw Error(Errc::kInvalidConfig, "temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw Error(Errc::kInvalidConfig, "top_p must lie in (0, 1]");
  if (max_tokens <= 0) throw Error(Errc::kInvalidConfig, "max_tokens must be positive");
  if (endpoint.empty()) throw Error(Errc::kInvalidConfig, "endpoint is empty for model " + model);
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string cache_key(const LlmConfig& config, std::string_view prompt) {
  std::string material = fmt::format("relevancer-cache-v1\nmodel={}\ntemperature={:.17g}\ntop_p={:.17g}\nmax_tokens={}\n\n",
                                     config.model, config.temperature, config.top_p, config.max_tokens);
  material.append(prompt);
  return sha256_hex(material);
}

// --- http backend ----------------------------------------------------------

HttpBackend::HttpBackend(std::string endpoint, std::chrono::milliseconds timeout)
    : url_(http::parse_url(endpoint)), timeout_(timeout), api_key_(http::env("RELEVANCER_LLM_API_KEY")) {}

BackendReply HttpBackend::send(const LlmConfig& config, std::string_view prompt) {
  count_call();
  nlohmann::ordered_json req;
  req["model"] = config.model;
  req["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", std::string(prompt)}}});
  req["temperature"] = config.temperature;
  req["top_p"] = config.top_p;
  req["max_tokens"] = config.max_tokens;
  auto res = http::post_json(url_, req.dump(), api_key_, timeout_);

  BackendReply reply;
  reply.http_status = res.status;
  if (res.status == 0) {
    reply.status = BackendReply::Status::kRetryable;
    reply.error = "transport error: " + res.transport_error;
    return reply;
  }
  if (res.status < 200 || res.status >= 300) {
    reply.status = http::retryable_status(res.status) ? BackendReply::Status::kRetryable
                                                      : BackendReply::Status::kRejected;
    reply.error = "HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 200);
    return reply;
  }
  try {
    auto doc = nlohmann::json::parse(res.body);
    reply.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
    if (doc.contains("usage") && doc["usage"].is_object()) {
      const auto& u = doc["usage"];
      reply.tokens = TokenCounts{u.value("prompt_tokens", std::int64_t{0}), u.value("completion_tokens", std::int64_t{0})};
    }
  } catch (const nlohmann::json::exception& e) {
    // Only 429, 5xx and transport failures are retried.
    reply.status = BackendReply::Status::kRejected;
    reply.error = std::string("malformed completion response: ") + e.what();
  }
  return reply;
}

// --- mock backend ----------------------------------------------------------

bool is_mock_endpoint(std::string_view endpoint) { return endpoint.starts_with("mock:"); }

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(Errc::kInvalidConfig, "bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t parse_u64(std::string_view s, std::string_view what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(Errc::kInvalidConfig, "bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

std::int64_t count_words(std::string_view s) {
  std::int64_t n = 0;
  bool in_word = false;
  for (char c : s) {
    bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

}  // namespace

MockMode parse_mock_spec(std::string_view spec) {
  if (!is_mock_endpoint(spec)) throw Error(Errc::kInvalidConfig, "not a mock spec: " + std::string(spec));
  MockMode mode;
  std::string_view body = spec.substr(5);
  if (auto q = body.find('?'); q != std::string_view::npos) {
    for (auto opt : split(body.substr(q + 1), '&')) {
      auto eq = opt.find('=');
      if (eq == std::string_view::npos || opt.substr(0, eq) != "delay_ms") {
        throw Error(Errc::kInvalidConfig, "unknown mock option '" + std::string(opt) + "'");
      }
      mode.delay_ms = parse_double(opt.substr(eq + 1), "delay_ms");
    }
    body = body.substr(0, q);
  }
  auto parts = split(body, ':');
  if (parts[0] == "oracle" && parts.size() == 1) {
    mode.kind = MockMode::Kind::kOracle;
  } else if (parts[0] == "fixed" && parts.size() == 2 && !parts[1].empty()) {
    mode.kind = MockMode::Kind::kFixed;
    mode.label = std::string(parts[1]);
  } else if (parts[0] == "noisy" && (parts.size() == 2 || parts.size() == 3)) {
    mode.kind = MockMode::Kind::kNoisy;
    mode.flip_rate = parse_double(parts[1], "flip rate");
    if (!(mode.flip_rate >= 0.0 && mode.flip_rate <= 1.0)) {
      throw Error(Errc::kInvalidConfig, "flip rate must lie in [0, 1]");
    }
    if (parts.size() == 3) mode.seed = parse_u64(parts[2], "seed");
  } else {
    throw Error(Errc::kInvalidConfig, "unrecognized mock spec '" + std::string(spec) + "'");
  }
  return mode;
}

MockBackend::MockBackend(MockMode mode, LabelScheme scheme, GoldMap gold)
    : mode_(std::move(mode)), scheme_(std::move(scheme)), gold_(std::move(gold)) {}

std::string MockBackend::answer(const QPPair& pair) const {
  if (mode_.kind == MockMode::Kind::kFixed) return mode_.label;
  const std::string key = pair_key(pair);
  auto it = gold_.find(key);
  if (it == gold_.end()) {
    throw Error(Errc::kUnknownPair, "no gold label for " + render_pair_line(pair));
  }
  if (mode_.kind == MockMode::Kind::kOracle) return it->second;

  Rng rng(derive_seed(mode_.seed, key));
  if (!(rng.unit() < mode_.flip_rate)) return it->second;
  std::vector<std::string> others;
  for (const auto& l : scheme_.labels) {
    if (l != it->second) others.push_back(l);
  }
  if (others.empty()) return it->second;
  return others[static_cast<std::size_t>(rng.uniform(others.size()))];
}

BackendReply MockBackend::send(const LlmConfig&, std::string_view prompt) {
  count_call();
  while (!prompt.empty() && (prompt.back() == '\n' || prompt.back() == '\r')) prompt.remove_suffix(1);
  auto nl = prompt.rfind('\n');
  std::string_view last = nl == std::string_view::npos ? prompt : prompt.substr(nl + 1);

  auto candidates = parse_pair_line(last);
  if (candidates.empty()) {
    throw Error(Errc::kUnknownPair, "prompt does not end with a query/product line");
  }
  if (mode_.delay_ms > 0) {
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(mode_.delay_ms));
  }
  BackendReply reply;
  reply.reported_latency_ms = mode_.delay_ms;
  auto finish = [&](std::string text) {
    // Whitespace-separated words stand in for tokens so cost reports have data.
    reply.tokens = TokenCounts{count_words(prompt), count_words(text)};
    reply.text = std::move(text);
    return reply;
  };
  if (mode_.kind == MockMode::Kind::kFixed) return finish(rating_line(mode_.label));
  for (const auto& pair : candidates) {
    if (gold_.contains(pair_key(pair))) return finish(rating_line(answer(pair)));
  }
  throw Error(Errc::kUnknownPair, "no gold label for " + std::string(last));
}

std::unique_ptr<Backend> make_backend(const LlmConfig& config, const LabelScheme& scheme, GoldMap gold) {
  if (is_mock_endpoint(config.endpoint)) {
    return std::make_unique<MockBackend>(parse_mock_spec(config.endpoint), scheme, std::move(gold));
  }
  return std::make_unique<HttpBackend>(config.endpoint);
}

// --- cache -----------------------------------------------------------------

namespace {

nlohmann::ordered_json to_json(const CompletionRecord& r) {
  nlohmann::ordered_json j;
  j["cache_key"] = r.cache_key;
  j["prompt"] = r.prompt;
  j["response"] = r.response;
  j["model"] = r.model;
  j["latency_ms"] = r.recorded_latency_ms;
  if (r.token_counts) {
    j["token_counts"] = {{"prompt", r.token_counts->prompt}, {"completion", r.token_counts->completion}};
  } else {
    j["token_counts"] = nullptr;
  }
  return j;
}

CompletionRecord from_json(const nlohmann::json& j) {
  CompletionRecord r;
  r.cache_key = j.at("cache_key").get<std::string>();
  r.prompt = j.at("prompt").get<std::string>();
  r.response = j.at("response").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.recorded_latency_ms = j.at("latency_ms").get<double>();
  if (j.contains("token_counts") && j["token_counts"].is_object()) {
    r.token_counts = TokenCounts{j["token_counts"].at("prompt").get<std::int64_t>(),
                                 j["token_counts"].at("completion").get<std::int64_t>()};
  }
  return r;
}

std::string sanitize(std::string_view s) {
  std::string out;
  for (char c : s) {
    bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                c == '_' || c == '.';
    out.push_back(keep ? c : '_');
  }
  return out;
}

}  // namespace

std::filesystem::path cache_file_for(const std::filesystem::path& cache_dir, const std::string& model,
                                     const std::string& config_tag) {
  return cache_dir / (sanitize(model) + "__" + sanitize(config_tag) + ".jsonl");
}

CompletionCache::CompletionCache(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::uintmax_t good_bytes = 0;
  bool torn_tail = false;
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < content.size()) {
      auto nl = content.find('\n', pos);
      const bool terminated = nl != std::string::npos;
      std::string_view line(content.data() + pos, (terminated ? nl : content.size()) - pos);
      ++line_no;
      try {
        if (!terminated) throw std::runtime_error("unterminated");
        auto rec = from_json(nlohmann::json::parse(line));
        records_.insert_or_assign(rec.cache_key, std::move(rec));
      } catch (const std::exception&) {
        if (terminated) {
          throw Error(Errc::kCacheCorrupt, path_.string() + ": line " + std::to_string(line_no) + " is unreadable");
        }
        torn_tail = true;
        break;
      }
      pos = nl + 1;
      good_bytes = pos;
    }
  }
  if (torn_tail) std::filesystem::resize_file(path_, good_bytes);
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(Errc::kOutputUnwritable, "cannot open cache file " + path_.string());
}

std::optional<CompletionRecord> CompletionCache::lookup(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = records_.find(key);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

void CompletionCache::append(const CompletionRecord& record) {
  std::lock_guard lock(mu_);
  if (records_.contains(record.cache_key)) return;
  out_ << to_json(record).dump() << '\n';
  out_.flush();
  if (!out_) throw Error(Errc::kOutputUnwritable, "cache append failed for " + path_.string());
  records_.emplace(record.cache_key, record);
}

std::size_t CompletionCache::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

// --- complete --------------------------------------------------------------

CompletionRecord complete(std::string_view prompt, const LlmConfig& config, Backend& backend,
                          CompletionCache* cache, const http::RetryPolicy& retry) {
  if (prompt.empty()) throw Error(Errc::kInvalidConfig, "prompt is empty");
  const std::string key = cache_key(config, prompt);
  if (cache != nullptr) {
    if (auto hit = cache->lookup(key)) {
      assert(hit->prompt == prompt && "cache key collision");
      hit->cache_hit = true;
      hit->latency_ms = 0.0;
      return *hit;
    }
  }

  std::string last_error;
  const std::uint64_t salt = fnv1a64(key);
  for (int attempt = 0; attempt < retry.max_attempts; ++attempt) {
    if (attempt > 0) retry.wait(attempt - 1, salt);
    auto start = std::chrono::steady_clock::now();
    BackendReply reply = backend.send(config, prompt);
    double measured = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    if (reply.status == BackendReply::Status::kOk) {
      CompletionRecord rec;
      rec.cache_key = key;
      rec.prompt = std::string(prompt);
      rec.response = std::move(reply.text);
      rec.model = config.model;
      rec.latency_ms = reply.reported_latency_ms.value_or(measured);
      rec.recorded_latency_ms = rec.latency_ms;
      rec.token_counts = reply.tokens;
      rec.retries = attempt;
      if (cache != nullptr) cache->append(rec);
      return rec;
    }
    last_error = reply.error;
    if (reply.status == BackendReply::Status::kRejected) {
      throw Error(Errc::kBackendRejected, last_error);
    }
  }
  throw Error(Errc::kBackendUnavailable,
              "gave up after " + std::to_string(retry.max_attempts) + " attempts: " + last_error);
}

}  // namespace relevancer
