#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace relevancer::http {

struct Url {
  std::string scheme_host_port;  // e.g. "http://localhost:8080"
  std::string path;              // e.g. "/v1/chat/completions"
};

// Throws Error(kInvalidConfig) on anything that is not http(s)://host[:port][/path].
Url parse_url(std::string_view url);

struct Response {
  int status = 0;          // 0 when the request never got a response
  std::string body;
  std::string transport_error;
};

Response post_json(const Url& url, const std::string& body, const std::optional<std::string>& bearer,
                   std::chrono::milliseconds timeout);

inline bool retryable_status(int status) { return status == 0 || status == 429 || status >= 500; }

/// Exponential backoff: attempt n (0-based) waits base * 2^n, scaled by a
/// uniform factor in [1 - jitter, 1 + jitter].
struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds base_delay{1000};
  double jitter = 0.25;
  std::uint64_t seed = 0x5eed;
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for

  std::chrono::milliseconds delay_for(int retry_index, std::uint64_t salt) const;
  void wait(int retry_index, std::uint64_t salt) const;
};

std::optional<std::string> env(const char* name);

}  // namespace relevancer::http
