#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "relevancer/rng.hpp"
#include "relevancer/vectorstore.hpp"
#include "synthetic.hpp"

using namespace relevancer;

namespace {

LabeledExample ex(const std::string& title, const std::string& label = "Exact") {
  return LabeledExample{make_qp_pair("q", title), label, std::nullopt};
}

EmbeddingVector at_degrees(double deg) {
  double r = deg * std::numbers::pi / 180.0;
  return EmbeddingVector{{std::cos(r), std::sin(r)}};
}

Store angles_store() {
  Store s(2, builtin_scheme("wands"));
  s.insert(ex("d1"), at_degrees(10));
  s.insert(ex("d2"), at_degrees(15));
  s.insert(ex("d3"), at_degrees(80));
  s.freeze();
  return s;
}

std::vector<std::size_t> ids(const std::vector<Retrieved>& r) {
  std::vector<std::size_t> out;
  for (auto& x : r) out.push_back(x.id);
  return out;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::kIo;
}

}  // namespace

TEST(Store, InsertIdsAndFreeze) {
  Store s(2);
  EXPECT_EQ(s.insert(ex("a"), EmbeddingVector{{1, 0}}), 0u);
  EXPECT_EQ(s.insert(ex("b"), EmbeddingVector{{0, 1}}), 1u);
  EXPECT_EQ(code_of([&] { s.top_k(EmbeddingVector{{1, 0}}, 1); }), Errc::kNotFrozen);
  s.freeze();
  EXPECT_EQ(code_of([&] { s.insert(ex("c"), EmbeddingVector{{1, 1}}); }), Errc::kFrozen);
  EXPECT_EQ(code_of([&] { s.top_k(EmbeddingVector{{1, 0, 0}}, 1); }), Errc::kDimensionMismatch);
}

TEST(Store, InsertRejectsWrongDim) {
  Store s(3);
  EXPECT_EQ(code_of([&] { s.insert(ex("a"), EmbeddingVector{{1, 0}}); }), Errc::kDimensionMismatch);
}

TEST(Store, EmptyStore) {
  Store s(2);
  s.freeze();
  EXPECT_EQ(code_of([&] { s.top_k(EmbeddingVector{{1, 0}}, 1); }), Errc::kEmptyStore);
}

TEST(TopK, UndersizedStore) {
  Store s(2);
  s.insert(ex("only"), EmbeddingVector{{1, 0}});
  s.freeze();
  auto r = s.top_k(EmbeddingVector{{1, 1}}, 5);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].id, 0u);
}

TEST(TopK, OrderingByCosine) {
  Store s(2);
  // cosines to (1, 0): 0.7, 0.9, 0.8
  for (double c : {0.7, 0.9, 0.8}) s.insert(ex(std::to_string(c)), EmbeddingVector{{c, std::sqrt(1 - c * c)}});
  s.freeze();
  auto r = s.top_k(EmbeddingVector{{1, 0}}, 2);
  EXPECT_EQ(ids(r), (std::vector<std::size_t>{1, 2}));
  EXPECT_NEAR(r[0].similarity, 0.9, 1e-12);
}

TEST(TopK, TiesGoToEarlierInsert) {
  Store s(2);
  s.insert(ex("first"), EmbeddingVector{{0.6, 0.8}});
  s.insert(ex("second"), EmbeddingVector{{0.6, 0.8}});
  s.freeze();
  EXPECT_EQ(ids(s.top_k(EmbeddingVector{{1, 0}}, 1)), (std::vector<std::size_t>{0}));
}

TEST(TopK, ExcludeByFoldedPairKey) {
  Store s(2);
  s.insert(ex("Twin"), EmbeddingVector{{1, 0}});
  s.insert(ex("other"), EmbeddingVector{{0.9, 0.1}});
  s.freeze();
  auto r = s.top_k(EmbeddingVector{{1, 0}}, 2, {pair_key("Q", " twin")});
  EXPECT_EQ(ids(r), (std::vector<std::size_t>{1}));
}

TEST(Mmr, HandDerivedAngles) {
  Store s = angles_store();
  auto q = at_degrees(0);
  EXPECT_EQ(ids(s.mmr_select(q, 2, 0.5, 3)), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(ids(s.mmr_select(q, 2, 0.1, 3)), (std::vector<std::size_t>{0, 2}));
}

TEST(Mmr, LambdaOneIsTopK) {
  Store s = angles_store();
  auto q = at_degrees(40);
  EXPECT_EQ(s.mmr_select(q, 3, 1.0, 3), s.top_k(q, 3));
}

TEST(Mmr, SingleCandidate) {
  Store s(2);
  s.insert(ex("a"), EmbeddingVector{{1, 0}});
  s.freeze();
  for (double l : {0.0, 0.3, 1.0}) EXPECT_EQ(ids(s.mmr_select(EmbeddingVector{{0, 1}}, 3, l)), (std::vector<std::size_t>{0}));
}

TEST(Mmr, Errors) {
  Store s = angles_store();
  EXPECT_EQ(code_of([&] { s.mmr_select(at_degrees(0), 2, 1.5); }), Errc::kBadLambda);
  EXPECT_EQ(code_of([&] { s.mmr_select(at_degrees(0), 2, -0.1); }), Errc::kBadLambda);
  EXPECT_EQ(code_of([&] { s.mmr_select(at_degrees(0), 4, 0.5, 3); }), Errc::kInvalidConfig);
  EXPECT_EQ(default_mmr_pool(16), 160u);
  EXPECT_EQ(default_mmr_pool(2), 64u);
}

TEST(Mmr, MatchesOracleOnRandomInstances) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng.uniform(20), dim = 2 + rng.uniform(6), k = 1 + rng.uniform(5);
    std::vector<std::vector<double>> docs(n, std::vector<double>(dim));
    Store s(dim);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& x : docs[i]) x = rng.unit() * 2 - 1;
      s.insert(ex("t" + std::to_string(i)), EmbeddingVector{docs[i]});
    }
    s.freeze();
    std::vector<double> q(dim);
    for (auto& x : q) x = rng.unit() * 2 - 1;
    double lambda = 0.25 * double(rng.uniform(5));
    std::size_t pool = std::max<std::size_t>(k, n);
    EXPECT_EQ(ids(s.mmr_select(EmbeddingVector{q}, k, lambda, pool)), oracle::mmr(docs, q, k, lambda, pool));
  }
}

TEST(Store, SaveLoadRoundTripIsBitExact) {
  auto pool = synth::corpus(builtin_scheme("esci"), 40, 9);
  pool.examples[3].rationale.reset();
  pool.examples[5].pair.id = "sku-5";
  pool.examples[5].pair.locale = "us";
  HashEmbedder embedder(64);
  Store s = build_store(pool, embedder);
  std::stringstream buf;
  s.write(buf);
  Store back = Store::read(buf);
  ASSERT_EQ(back.size(), s.size());
  EXPECT_EQ(back.dim(), 64u);
  EXPECT_EQ(back.scheme(), s.scheme());
  EXPECT_EQ(back.embedder(), s.embedder());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(back.example(i), s.example(i));
    auto a = s.vector(i), b = back.vector(i);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
  EXPECT_TRUE(back.frozen());
  EXPECT_EQ(store_to_dataset(back).examples, pool.examples);
}

TEST(Store, CorruptFiles) {
  std::stringstream junk("not a store");
  EXPECT_EQ(code_of([&] { Store::read(junk); }), Errc::kCorruptStore);

  auto pool = synth::corpus(builtin_scheme("wands"), 5, 1);
  HashEmbedder embedder(16);
  std::stringstream buf;
  build_store(pool, embedder).write(buf);
  std::string bytes = buf.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 9));
  EXPECT_EQ(code_of([&] { Store::read(truncated); }), Errc::kCorruptStore);
}
