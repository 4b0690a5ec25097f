#include "relevancer/http.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "relevancer/core.hpp"
#include "relevancer/rng.hpp"

namespace relevancer::http {

Url parse_url(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw Error(Errc::kInvalidConfig, "endpoint '" + std::string(url) + "' has no scheme");
  }
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(Errc::kInvalidConfig, "endpoint scheme must be http or https: " + std::string(url));
  }
  auto path_start = url.find('/', scheme_end + 3);
  Url out;
  out.scheme_host_port = std::string(url.substr(0, path_start));
  out.path = path_start == std::string_view::npos ? "/" : std::string(url.substr(path_start));
  if (out.scheme_host_port.size() <= scheme_end + 3) {
    throw Error(Errc::kInvalidConfig, "endpoint has no host: " + std::string(url));
  }
  return out;
}

Response post_json(const Url& url, const std::string& body, const std::optional<std::string>& bearer,
                   std::chrono::milliseconds timeout) {
  httplib::Client client(url.scheme_host_port);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (bearer && !bearer->empty()) headers.emplace("Authorization", "Bearer " + *bearer);
  auto res = client.Post(url.path, headers, body, "application/json");
  Response out;
  if (!res) {
    out.transport_error = httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  return out;
}

std::chrono::milliseconds RetryPolicy::delay_for(int retry_index, std::uint64_t salt) const {
  Rng rng(seed ^ (salt * 0x9e3779b97f4a7c15ULL) ^ static_cast<std::uint64_t>(retry_index));
  double factor = 1.0 + jitter * (2.0 * rng.unit() - 1.0);
  double ms = static_cast<double>(base_delay.count()) * std::ldexp(1.0, retry_index) * factor;
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(ms)));
}

void RetryPolicy::wait(int retry_index, std::uint64_t salt) const {
  auto d = delay_for(retry_index, salt);
  if (sleep) {
    sleep(d);
  } else {
    std::this_thread::sleep_for(d);
  }
}

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

}  // namespace relevancer::http
