#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "relevancer/core.hpp"
#include "relevancer/dataset.hpp"
#include "relevancer/embed.hpp"

namespace relevancer {

struct StoredExample {
  std::size_t id = 0;  // insertion index
  LabeledExample example;
  EmbeddingVector vector;
};

struct Retrieved {
  std::size_t id = 0;
  double similarity = 0.0;  // cosine to the query vector
  friend bool operator==(const Retrieved&, const Retrieved&) = default;
};

// Fold-and-trim pair keys (see pair_key()).
using PairKeySet = std::unordered_set<std::string>;

std::size_t default_mmr_pool(std::size_t k) noexcept;

/// Exact in-memory cosine index over labeled examples. Mutable until
/// freeze(); read-only and safe to share between threads afterwards.
class Store {
 public:
  explicit Store(std::size_t dim, LabelScheme scheme = {}, EmbedderSpec embedder = {});

  std::size_t insert(LabeledExample example, EmbeddingVector vector);
  void freeze();

  bool frozen() const noexcept { return frozen_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return examples_.size(); }
  bool empty() const noexcept { return examples_.empty(); }
  const LabelScheme& scheme() const noexcept { return scheme_; }
  const EmbedderSpec& embedder() const noexcept { return embedder_; }

  const LabeledExample& example(std::size_t id) const { return examples_.at(id); }
  std::span<const double> vector(std::size_t id) const;
  StoredExample entry(std::size_t id) const;

  /// The k most similar entries (fewer if the store is smaller) in
  /// descending cosine order, ties broken by ascending id. Entries whose pair
  /// key is in `exclude` are skipped.
  std::vector<Retrieved> top_k(const EmbeddingVector& query, std::size_t k,
                               const PairKeySet& exclude = {}) const;

  /// Greedy maximal marginal relevance over the top-`pool` candidates:
  /// first pick is the most similar; each next pick maximizes
  ///   lambda * cos(d, q) - (1 - lambda) * max_{s in selected} cos(d, s)
  /// with ties broken by higher cos(d, q), then lower id. pool == 0 means
  /// default_mmr_pool(k).
  std::vector<Retrieved> mmr_select(const EmbeddingVector& query, std::size_t k, double lambda,
                                    std::size_t pool = 0, const PairKeySet& exclude = {}) const;

  // Binary layout documented in docs/store-format.md. Round-trips bit-exactly.
  void save(const std::filesystem::path& path) const;
  static Store load(const std::filesystem::path& path);
  void write(std::ostream& out) const;
  static Store read(std::istream& in);

 private:
  void check_query(const EmbeddingVector& query) const;

  std::size_t dim_;
  LabelScheme scheme_;
  EmbedderSpec embedder_;
  bool frozen_ = false;
  std::vector<LabeledExample> examples_;
  std::vector<double> matrix_;  // row-major, size() x dim_
  std::vector<double> norms_;
  std::unordered_map<std::string, std::vector<std::size_t>> ids_by_key_;
};

/// Embeds every pool example (in pool order, so id == pool index) and
/// returns a frozen store.
Store build_store(const Dataset& pool, Embedder& embedder);

/// Recovers the pool a store was built from.
Dataset store_to_dataset(const Store& store);

}  // namespace relevancer
