#include <gtest/gtest.h>

#include <cmath>

#include <json.hpp>

#include "fake_server.hpp"
#include "oracles.hpp"
#include "relevancer/embed.hpp"

using namespace relevancer;

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ull);
  EXPECT_EQ(fnv1a64("abc"), oracle::fnv1a("abc"));
}

TEST(HashEmbed, EmptyTextIsZero) {
  auto v = hash_embed("", 256);
  EXPECT_EQ(v.dim(), 256u);
  EXPECT_TRUE(v.is_zero());
}

TEST(HashEmbed, AbcMatchesIndependentHashing) {
  auto v = hash_embed("abc", 64);
  std::vector<double> expect(64, 0.0);
  for (const char* gram : {"^ab", "abc", "bc$"}) {
    std::uint64_t h = oracle::fnv1a(gram);
    expect[h % 64] += (h >> 63) ? -1.0 : 1.0;
  }
  double n = std::sqrt(oracle::dot(expect, expect));
  for (auto& x : expect) x /= n;
  EXPECT_EQ(v.values, expect);
}

TEST(HashEmbed, MatchesOracleOnAsciiText) {
  for (const char* text : {"wood coffee table", "A", "ab", "Mikell 2 Piece Coffee Table Set", "x,y: z!"}) {
    EXPECT_EQ(hash_embed(text, 256).values, oracle::hashed_trigrams(text, 256)) << text;
  }
}

TEST(HashEmbed, CaseAndNormalizationInsensitive) {
  EXPECT_EQ(hash_embed("Wood Table", 128).values, hash_embed("wood table", 128).values);
  EXPECT_EQ(hash_embed("CAF\xC3\x89", 128).values, hash_embed("cafe\xCC\x81", 128).values);
}

TEST(HashEmbed, Deterministic) { EXPECT_EQ(hash_embed("aaa", 256).values, hash_embed("aaa", 256).values); }

TEST(HashEmbed, RejectsTinyDim) { EXPECT_THROW(hash_embed("abc", 8), Error); }

TEST(EmbedPair, UnitNormAndOracleCosine) {
  EmbedderSpec spec;
  auto a = make_qp_pair("wood coffee table set by storage", "coffee table with storage");
  auto b = make_qp_pair("wood coffee table set by storage", "gabrielle end table storage");
  auto va = embed_pair(a, spec), vb = embed_pair(b, spec);
  EXPECT_NEAR(va.norm(), 1.0, 1e-6);
  EXPECT_EQ(va.values, embed_pair(a, spec).values);
  double c = cosine(va, vb);
  EXPECT_GT(c, -1.0);
  EXPECT_LT(c, 1.0);
  auto oa = oracle::hashed_trigrams(render_pair_line(a), 256), ob = oracle::hashed_trigrams(render_pair_line(b), 256);
  EXPECT_NEAR(c, oracle::cos_sim(oa, ob), 1e-12);
}

TEST(Cosine, ZeroVectorGivesZero) {
  std::vector<double> z(4, 0.0), x{1, 0, 0, 0};
  EXPECT_EQ(cosine(z, x), 0.0);
  EXPECT_DOUBLE_EQ(cosine(x, x), 1.0);
}

TEST(EmbedderSpec, Validation) {
  EXPECT_THROW((EmbedderSpec{EmbedderKind::kHash, 8, "", ""}.validate()), Error);
  EXPECT_THROW((EmbedderSpec{EmbedderKind::kRemote, 8, "", "m"}.validate()), Error);
  EXPECT_EQ(parse_embedder_kind("remote"), EmbedderKind::kRemote);
  EXPECT_THROW(parse_embedder_kind("bert"), Error);
}

TEST(RemoteEmbedder, ParsesDataArrayAndRenormalizes) {
  synth::FakeServer server([](const httplib::Request& req, httplib::Response& res, int) {
    auto body = nlohmann::json::parse(req.body);
    nlohmann::json out;
    out["data"] = nlohmann::json::array();
    const auto& input = body["input"];
    // Reverse order with explicit indices; the client must sort them.
    for (std::size_t i = input.size(); i-- > 0;) {
      out["data"].push_back({{"index", i}, {"embedding", {3.0 * double(i + 1), 4.0 * double(i + 1)}}});
    }
    res.set_content(out.dump(), "application/json");
  });
  EmbedderSpec spec{EmbedderKind::kRemote, 2, server.url("/v1/embeddings"), "emb-model"};
  RemoteEmbedder e(spec);
  auto vs = e.embed_texts({"a", "b"});
  ASSERT_EQ(vs.size(), 2u);
  EXPECT_NEAR(vs[0].values[0], 0.6, 1e-12);
  EXPECT_NEAR(vs[1].values[1], 0.8, 1e-12);
  EXPECT_EQ(nlohmann::json::parse(server.last_body())["model"], "emb-model");
}

TEST(RemoteEmbedder, DimensionMismatch) {
  synth::FakeServer server([](const httplib::Request&, httplib::Response& res, int) {
    res.set_content(R"({"embeddings": [[1.0, 2.0, 3.0]]})", "application/json");
  });
  RemoteEmbedder e(EmbedderSpec{EmbedderKind::kRemote, 2, server.url("/e"), "m"});
  try {
    e.embed_texts({"a"});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), Errc::kDimensionMismatch);
  }
}

TEST(RemoteEmbedder, RetriesThenGivesUp) {
  synth::FakeServer server([](const httplib::Request&, httplib::Response& res, int) { res.status = 503; });
  http::RetryPolicy fast;
  fast.base_delay = std::chrono::milliseconds(1);
  RemoteEmbedder e(EmbedderSpec{EmbedderKind::kRemote, 2, server.url("/e"), "m"}, fast);
  try {
    e.embed_texts({"a"});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), Errc::kRemoteUnavailable);
  }
  EXPECT_EQ(server.calls(), 4);
}
