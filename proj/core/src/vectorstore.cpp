#include "relevancer/vectorstore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace relevancer {

std::size_t default_mmr_pool(std::size_t k) noexcept { return std::max<std::size_t>(10 * k, 64); }

Store::Store(std::size_t dim, LabelScheme scheme, EmbedderSpec embedder)
    : dim_(dim), scheme_(std::move(scheme)), embedder_(std::move(embedder)) {
  if (dim_ == 0) throw Error(Errc::kInvalidConfig, "store dim must be positive");
  embedder_.dim = dim_;
}

std::size_t Store::insert(LabeledExample example, EmbeddingVector vector) {
  if (frozen_) throw Error(Errc::kFrozen, "store is frozen");
  if (vector.dim() != dim_) {
    throw Error(Errc::kDimensionMismatch,
                "vector dim " + std::to_string(vector.dim()) + " != store dim " + std::to_string(dim_));
  }
  for (double v : vector.values) {
    if (!std::isfinite(v)) throw Error(Errc::kInvalidConfig, "embedding has a non-finite entry");
  }
  const std::size_t id = examples_.size();
  double sq = 0.0;
  for (double v : vector.values) sq += v * v;
  norms_.push_back(std::sqrt(sq));
  matrix_.insert(matrix_.end(), vector.values.begin(), vector.values.end());
  ids_by_key_[pair_key(example.pair)].push_back(id);
  examples_.push_back(std::move(example));
  return id;
}

void Store::freeze() { frozen_ = true; }

std::span<const double> Store::vector(std::size_t id) const {
  if (id >= size()) throw std::out_of_range("store id out of range");
  return {matrix_.data() + id * dim_, dim_};
}

StoredExample Store::entry(std::size_t id) const {
  auto v = vector(id);
  return {id, examples_[id], EmbeddingVector{std::vector<double>(v.begin(), v.end())}};
}

void Store::check_query(const EmbeddingVector& query) const {
  if (!frozen_) throw Error(Errc::kNotFrozen, "freeze the store before querying it");
  if (empty()) throw Error(Errc::kEmptyStore, "store has no entries");
  if (query.dim() != dim_) {
    throw Error(Errc::kDimensionMismatch,
                "query dim " + std::to_string(query.dim()) + " != store dim " + std::to_string(dim_));
  }
}

namespace {

bool better(const Retrieved& a, const Retrieved& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.id < b.id;
}

}  // namespace

std::vector<Retrieved> Store::top_k(const EmbeddingVector& query, std::size_t k,
                                    const PairKeySet& exclude) const {
  check_query(query);
  if (k == 0) throw Error(Errc::kInvalidConfig, "k must be >= 1");

  std::vector<char> skip;
  if (!exclude.empty()) {
    skip.assign(size(), 0);
    for (const auto& key : exclude) {
      if (auto it = ids_by_key_.find(key); it != ids_by_key_.end()) {
        for (auto id : it->second) skip[id] = 1;
      }
    }
  }

  double qsq = 0.0;
  for (double v : query.values) qsq += v * v;
  const double qnorm = std::sqrt(qsq);
  const double* q = query.values.data();

  std::vector<Retrieved> scored;
  scored.reserve(size());
  for (std::size_t id = 0; id < size(); ++id) {
    if (!skip.empty() && skip[id]) continue;
    const double* row = matrix_.data() + id * dim_;
    double dot = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) dot += row[j] * q[j];
    double sim = (qnorm == 0.0 || norms_[id] == 0.0) ? 0.0 : dot / (norms_[id] * qnorm);
    scored.push_back({id, sim});
  }

  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), better);
  scored.resize(n);
  return scored;
}

std::vector<Retrieved> Store::mmr_select(const EmbeddingVector& query, std::size_t k, double lambda,
                                         std::size_t pool, const PairKeySet& exclude) const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(Errc::kBadLambda, "lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  if (k == 0) throw Error(Errc::kInvalidConfig, "k must be >= 1");
  if (pool == 0) pool = default_mmr_pool(k);
  if (pool < k) {
    throw Error(Errc::kInvalidConfig, "MMR candidate pool (" + std::to_string(pool) + ") is smaller than k");
  }

  std::vector<Retrieved> candidates = top_k(query, pool, exclude);
  std::vector<Retrieved> selected;
  if (candidates.empty()) return selected;
  const std::size_t want = std::min(k, candidates.size());
  selected.reserve(want);

  // candidates[0] is the relevance argmax under the (sim desc, id asc) order.
  std::vector<double> max_redundancy(candidates.size(), -std::numeric_limits<double>::infinity());
  std::vector<char> taken(candidates.size(), 0);
  std::size_t pick = 0;
  const double diversity_weight = 1.0 - lambda;

  while (true) {
    taken[pick] = 1;
    selected.push_back(candidates[pick]);
    if (selected.size() == want) break;

    auto picked_vec = vector(candidates[pick].id);
    std::size_t best = candidates.size();
    double best_score = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (taken[i]) continue;
      double s2 = cosine(vector(candidates[i].id), picked_vec);
      if (s2 > max_redundancy[i]) max_redundancy[i] = s2;
      double score = lambda * candidates[i].similarity - diversity_weight * max_redundancy[i];
      if (best == candidates.size() || score > best_score ||
          (score == best_score && better(candidates[i], candidates[best]))) {
        best = i;
        best_score = score;
      }
    }
    pick = best;
  }
  return selected;
}

// --- persistence -----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'R', 'L', 'V', 'S', 'T', 'O', 'R', 'E'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(buf, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw Error(Errc::kCorruptStore, "store file is truncated");
  }
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

void put_str(std::ostream& out, std::string_view s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& in) {
  auto n = get_le<std::uint32_t>(in);
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) throw Error(Errc::kCorruptStore, "store file is truncated");
  return s;
}

}  // namespace

void Store::write(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  put_str(out, scheme_.name);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(scheme_.labels.size()));
  for (std::size_t i = 0; i < scheme_.labels.size(); ++i) {
    put_str(out, scheme_.labels[i]);
    put_str(out, scheme_.definitions[i]);
  }
  put_le<std::uint8_t>(out, embedder_.kind == EmbedderKind::kHash ? 0 : 1);
  put_str(out, embedder_.endpoint);
  put_str(out, embedder_.model);
  put_le<std::uint64_t>(out, examples_.size());
  for (std::size_t id = 0; id < examples_.size(); ++id) {
    const auto& ex = examples_[id];
    std::uint8_t flags = (ex.pair.id ? 1 : 0) | (ex.pair.locale ? 2 : 0) | (ex.rationale ? 4 : 0);
    put_str(out, ex.pair.query);
    put_str(out, ex.pair.product_title);
    put_le<std::uint8_t>(out, flags);
    if (ex.pair.id) put_str(out, *ex.pair.id);
    if (ex.pair.locale) put_str(out, *ex.pair.locale);
    put_str(out, ex.label);
    if (ex.rationale) put_str(out, *ex.rationale);
    for (double v : vector(id)) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
}

Store Store::read(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(Errc::kCorruptStore, "not a relevancer store file");
  }
  auto version = get_le<std::uint32_t>(in);
  if (version != kVersion) {
    throw Error(Errc::kCorruptStore, "unsupported store version " + std::to_string(version));
  }
  auto dim = get_le<std::uint32_t>(in);
  LabelScheme scheme;
  scheme.name = get_str(in);
  auto nlabels = get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < nlabels; ++i) {
    scheme.labels.push_back(get_str(in));
    scheme.definitions.push_back(get_str(in));
  }
  EmbedderSpec spec;
  spec.kind = get_le<std::uint8_t>(in) == 0 ? EmbedderKind::kHash : EmbedderKind::kRemote;
  spec.endpoint = get_str(in);
  spec.model = get_str(in);
  spec.dim = dim;
  Store store(dim, std::move(scheme), std::move(spec));
  auto count = get_le<std::uint64_t>(in);
  for (std::uint64_t n = 0; n < count; ++n) {
    LabeledExample ex;
    ex.pair.query = get_str(in);
    ex.pair.product_title = get_str(in);
    auto flags = get_le<std::uint8_t>(in);
    if (flags & 1) ex.pair.id = get_str(in);
    if (flags & 2) ex.pair.locale = get_str(in);
    ex.label = get_str(in);
    if (flags & 4) ex.rationale = get_str(in);
    EmbeddingVector v{std::vector<double>(dim)};
    for (auto& x : v.values) x = std::bit_cast<double>(get_le<std::uint64_t>(in));
    store.insert(std::move(ex), std::move(v));
  }
  store.freeze();
  return store;
}

void Store::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kOutputUnwritable, "cannot write " + path.string());
  write(out);
  if (!out) throw Error(Errc::kOutputUnwritable, "write failed for " + path.string());
}

Store Store::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  return read(in);
}

Store build_store(const Dataset& pool, Embedder& embedder) {
  Store store(embedder.spec().dim, pool.scheme, embedder.spec());
  std::vector<std::string> texts;
  texts.reserve(pool.size());
  for (const auto& ex : pool.examples) texts.push_back(pair_text(ex.pair));
  auto vectors = embedder.embed_texts(texts);
  for (std::size_t i = 0; i < pool.size(); ++i) store.insert(pool.examples[i], std::move(vectors[i]));
  store.freeze();
  return store;
}

Dataset store_to_dataset(const Store& store) {
  Dataset ds{store.scheme(), {}, "store"};
  ds.examples.reserve(store.size());
  for (std::size_t id = 0; id < store.size(); ++id) ds.examples.push_back(store.example(id));
  return ds;
}

}  // namespace relevancer
