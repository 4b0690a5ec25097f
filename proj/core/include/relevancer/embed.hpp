#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relevancer/core.hpp"
#include "relevancer/http.hpp"

namespace relevancer {

/// Fixed-length real vector; unit L2 norm, or all-zero for empty text.
struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
  double norm() const noexcept;
  bool is_zero() const noexcept;
  void normalize() noexcept;  // leaves the zero vector alone

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

// Zero when either side is the zero vector.
double cosine(std::span<const double> a, std::span<const double> b) noexcept;
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) noexcept {
  return cosine(std::span<const double>(a.values), std::span<const double>(b.values));
}

enum class EmbedderKind { kHash, kRemote };

constexpr std::size_t kDefaultEmbeddingDim = 256;
constexpr std::size_t kRemoteBatchSize = 64;

struct EmbedderSpec {
  EmbedderKind kind = EmbedderKind::kHash;
  std::size_t dim = kDefaultEmbeddingDim;
  std::string endpoint;  // remote only
  std::string model;     // remote only

  void validate() const;
  friend bool operator==(const EmbedderSpec&, const EmbedderSpec&) = default;
};

std::string_view to_string(EmbedderKind kind);
EmbedderKind parse_embedder_kind(std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Lowercase + NFC, pad with `^`/`$`, hash each codepoint trigram with 64-bit
/// FNV-1a into bucket `h % dim` with sign + when the top bit is clear, then
/// L2-normalize. Empty text maps to the zero vector. dim must be >= 16.
EmbeddingVector hash_embed(std::string_view text, std::size_t dim = kDefaultEmbeddingDim);

// The exact text the pipeline embeds for a pair (same as the prompt line).
inline std::string pair_text(const QPPair& pair) { return render_pair_line(pair); }

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual const EmbedderSpec& spec() const noexcept = 0;
  virtual std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts) = 0;

  EmbeddingVector embed_text(std::string_view text);
};

class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dim = kDefaultEmbeddingDim);
  const EmbedderSpec& spec() const noexcept override { return spec_; }
  std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts) override;

 private:
  EmbedderSpec spec_;
};

/// HTTP+JSON embeddings client. Request `{"model", "input": [texts]}`;
/// accepts `{"data": [{"embedding": [...]}, ...]}` or `{"embeddings": [[...]]}`.
/// Bearer token from RELEVANCER_EMBED_API_KEY.
class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(EmbedderSpec spec, http::RetryPolicy retry = remote_retry_policy());
  const EmbedderSpec& spec() const noexcept override { return spec_; }
  std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts) override;

  // 3 retries (4 attempts) with exponential backoff from 500 ms.
  static http::RetryPolicy remote_retry_policy();

 private:
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> batch);

  EmbedderSpec spec_;
  http::Url url_;
  http::RetryPolicy retry_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec);

EmbeddingVector embed_pair(const QPPair& pair, Embedder& embedder);
EmbeddingVector embed_pair(const QPPair& pair, const EmbedderSpec& spec);

}  // namespace relevancer
