#include "relevancer/embed.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace relevancer {

double EmbeddingVector::norm() const noexcept {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

bool EmbeddingVector::is_zero() const noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

void EmbeddingVector::normalize() noexcept {
  double n = norm();
  if (n == 0.0) return;
  for (double& v : values) v /= n;
}

double cosine(std::span<const double> a, std::span<const double> b) noexcept {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

void EmbedderSpec::validate() const {
  if (dim == 0) throw Error(Errc::kInvalidConfig, "embedding dim must be positive");
  if (kind == EmbedderKind::kHash && dim < 16) {
    throw Error(Errc::kInvalidConfig, "hash embedder needs dim >= 16");
  }
  if (kind == EmbedderKind::kRemote && (endpoint.empty() || model.empty())) {
    throw Error(Errc::kInvalidConfig, "remote embedder needs both endpoint and model");
  }
}

std::string_view to_string(EmbedderKind kind) { return kind == EmbedderKind::kHash ? "hash" : "remote"; }

EmbedderKind parse_embedder_kind(std::string_view text) {
  if (text == "hash") return EmbedderKind::kHash;
  if (text == "remote") return EmbedderKind::kRemote;
  throw Error(Errc::kInvalidConfig, "embedder must be 'hash' or 'remote', got '" + std::string(text) + "'");
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string lower_nfc(std::string_view text) {
  bool ascii = std::all_of(text.begin(), text.end(),
                           [](char c) { return static_cast<unsigned char>(c) < 0x80; });
  if (ascii) {
    std::string out(text);
    for (auto& c : out) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
  }
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  u.toLower(icu::Locale::getRoot());
  if (nfc != nullptr && U_SUCCESS(status)) {
    icu::UnicodeString n = nfc->normalize(u, status);
    if (U_SUCCESS(status)) u = n;
  }
  std::string out;
  u.toUTF8String(out);
  return out;
}

// Byte offsets of UTF-8 codepoint starts, plus a final end offset.
std::vector<std::size_t> codepoint_offsets(const std::string& s) {
  std::vector<std::size_t> offs;
  offs.reserve(s.size() + 1);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) offs.push_back(i);
  }
  offs.push_back(s.size());
  return offs;
}

}  // namespace

EmbeddingVector hash_embed(std::string_view text, std::size_t dim) {
  if (dim < 16) throw Error(Errc::kInvalidConfig, "hash_embed needs dim >= 16");
  EmbeddingVector out{std::vector<double>(dim, 0.0)};
  if (text.empty()) return out;

  std::string padded = "^" + lower_nfc(text) + "$";
  auto offs = codepoint_offsets(padded);
  const std::size_t codepoints = offs.size() - 1;
  for (std::size_t i = 0; i + 3 <= codepoints; ++i) {
    std::string_view gram(padded.data() + offs[i], offs[i + 3] - offs[i]);
    std::uint64_t h = fnv1a64(gram);
    out.values[h % dim] += (h >> 63) == 0 ? 1.0 : -1.0;
  }
  out.normalize();
  return out;
}

EmbeddingVector Embedder::embed_text(std::string_view text) {
  auto v = embed_texts({std::string(text)});
  return std::move(v.front());
}

HashEmbedder::HashEmbedder(std::size_t dim) : spec_{EmbedderKind::kHash, dim, {}, {}} { spec_.validate(); }

std::vector<EmbeddingVector> HashEmbedder::embed_texts(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(hash_embed(t, spec_.dim));
  return out;
}

http::RetryPolicy RemoteEmbedder::remote_retry_policy() {
  http::RetryPolicy p;
  p.max_attempts = 4;
  p.base_delay = std::chrono::milliseconds(500);
  return p;
}

RemoteEmbedder::RemoteEmbedder(EmbedderSpec spec, http::RetryPolicy retry)
    : spec_(std::move(spec)), retry_(std::move(retry)) {
  spec_.validate();
  url_ = http::parse_url(spec_.endpoint);
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_texts(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  std::span<const std::string> all(texts);
  for (std::size_t start = 0; start < texts.size(); start += kRemoteBatchSize) {
    auto batch = all.subspan(start, std::min(kRemoteBatchSize, texts.size() - start));
    auto vecs = embed_batch(batch);
    for (auto& v : vecs) out.push_back(std::move(v));
  }
  return out;
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> batch) {
  nlohmann::json req;
  req["model"] = spec_.model;
  req["input"] = nlohmann::json::array();
  for (const auto& t : batch) req["input"].push_back(t);
  const std::string body = req.dump();
  const auto key = http::env("RELEVANCER_EMBED_API_KEY");

  std::string last_error;
  for (int attempt = 0; attempt < retry_.max_attempts; ++attempt) {
    if (attempt > 0) retry_.wait(attempt - 1, fnv1a64(body));
    auto res = http::post_json(url_, body, key, std::chrono::seconds(60));
    if (res.status >= 200 && res.status < 300) {
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(res.body);
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::kRemoteUnavailable, std::string("embedding response is not JSON: ") + e.what());
      }
      std::vector<EmbeddingVector> out;
      auto take = [&](const nlohmann::json& arr) {
        EmbeddingVector v;
        for (const auto& x : arr) v.values.push_back(x.get<double>());
        if (v.dim() != spec_.dim) {
          throw Error(Errc::kDimensionMismatch, "remote embedder returned dim " + std::to_string(v.dim()) +
                                                    ", expected " + std::to_string(spec_.dim));
        }
        if (!std::all_of(v.values.begin(), v.values.end(), [](double d) { return std::isfinite(d); })) {
          throw Error(Errc::kRemoteUnavailable, "remote embedder returned a non-finite value");
        }
        v.normalize();
        out.push_back(std::move(v));
      };
      if (doc.contains("data")) {
        auto data = doc["data"];
        std::stable_sort(data.begin(), data.end(), [](const nlohmann::json& a, const nlohmann::json& b) {
          return a.value("index", 0) < b.value("index", 0);
        });
        for (const auto& item : data) take(item.at("embedding"));
      } else if (doc.contains("embeddings")) {
        for (const auto& arr : doc["embeddings"]) take(arr);
      }
      if (out.size() != batch.size()) {
        throw Error(Errc::kRemoteUnavailable, "remote embedder returned " + std::to_string(out.size()) +
                                                  " vectors for " + std::to_string(batch.size()) + " inputs");
      }
      return out;
    }
    last_error = res.status == 0 ? res.transport_error : "HTTP " + std::to_string(res.status);
    if (!http::retryable_status(res.status)) break;
  }
  throw Error(Errc::kRemoteUnavailable, "embedding endpoint failed: " + last_error);
}

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec) {
  spec.validate();
  if (spec.kind == EmbedderKind::kHash) return std::make_unique<HashEmbedder>(spec.dim);
  return std::make_unique<RemoteEmbedder>(spec);
}

EmbeddingVector embed_pair(const QPPair& pair, Embedder& embedder) {
  return embedder.embed_text(pair_text(pair));
}

EmbeddingVector embed_pair(const QPPair& pair, const EmbedderSpec& spec) {
  auto e = make_embedder(spec);
  return embed_pair(pair, *e);
}

}  // namespace relevancer
