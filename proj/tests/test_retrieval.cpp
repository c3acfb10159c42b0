#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "hulirag/error.hpp"
#include "hulirag/retrieval.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace hulirag;

namespace {

EmbeddingVector vec(std::vector<float> v) { return EmbeddingVector::make("v", std::move(v)); }

ImageRecord image(const std::string& id, std::vector<float> emb) {
  ImageRecord img;
  img.image_id = id;
  img.width = 1;
  img.height = 1;
  img.embedding = EmbeddingVector::make(id, std::move(emb));
  return img;
}

QueryRecord query(std::vector<float> emb) {
  QueryRecord q;
  q.query_id = "q";
  q.text = "x";
  q.text_embedding = EmbeddingVector::make("q", std::move(emb));
  q.gt_image_ids = {"a"};
  return q;
}

// Full sort by (score desc, id asc) with every score computed independently.
std::vector<RankedEntry> brute_force(const std::vector<ImageRecord>& corpus, const QueryRecord& q) {
  std::vector<RankedEntry> all;
  for (const auto& img : corpus) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < img.embedding.values.size(); ++i) {
      const double a = q.text_embedding.values[i], b = img.embedding.values[i];
      dot += a * b;
      na += a * a;
      nb += b * b;
    }
    all.push_back({img.image_id, dot / std::sqrt(na * nb)});
  }
  std::stable_sort(all.begin(), all.end(), [](const RankedEntry& x, const RankedEntry& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.image_id < y.image_id;
  });
  return all;
}

}  // namespace

TEST(Cosine, Examples) {
  EXPECT_DOUBLE_EQ(cosine_similarity(vec({1, 0}), vec({1, 0})), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(vec({1, 0}), vec({0, 1})), 0.0);
  EXPECT_NEAR(cosine_similarity(vec({3, 4}), vec({4, 3})), 0.96, 1e-12);
}

TEST(Cosine, Errors) {
  try {
    cosine_similarity(vec({1, 0}), vec({1, 0, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
  try {
    cosine_similarity(vec({0, 0}), vec({1, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroNorm);
  }
}

TEST(Cosine, SymmetricBoundedScaleInvariant) {
  Rng rng(5);
  for (int t = 0; t < 300; ++t) {
    const std::size_t dim = 1 + uniform_index(rng, 32);
    auto a = synth::gaussian_vector(rng, dim);
    auto b = synth::gaussian_vector(rng, dim);
    const double c = 1e-3 + 100 * uniform_unit(rng);
    std::vector<float> scaled(a);
    for (auto& x : scaled) x = static_cast<float>(x * c);
    const double ab = cosine_similarity(vec(a), vec(b));
    EXPECT_DOUBLE_EQ(ab, cosine_similarity(vec(b), vec(a)));
    EXPECT_LE(std::fabs(ab), 1.0 + 1e-12);
    EXPECT_NEAR(cosine_similarity(vec(a), vec(scaled)), 1.0, 1e-6);
  }
}

TEST(TopK, Examples) {
  // scores 0.9, 0.1, 0.5 via unit vectors at chosen angles
  auto at = [](double s) { return std::vector<float>{static_cast<float>(s), static_cast<float>(std::sqrt(1 - s * s))}; };
  std::vector<ImageRecord> corpus{image("A", at(0.9)), image("B", at(0.1)), image("C", at(0.5))};
  const auto q = query({1, 0});
  const auto top1 = top_k(corpus, q, 1);
  ASSERT_EQ(top1.entries.size(), 1u);
  EXPECT_EQ(top1.entries[0].image_id, "A");

  const auto all = top_k(corpus, q, 10);
  ASSERT_EQ(all.entries.size(), 3u);
  EXPECT_EQ(all.entries[1].image_id, "C");
  EXPECT_EQ(all.entries[2].image_id, "B");

  std::vector<ImageRecord> tied{image("B", {1, 1}), image("A", {1, 1})};
  const auto t = top_k(tied, query({1, 0}), 2);
  EXPECT_EQ(t.entries[0].image_id, "A");
  EXPECT_EQ(t.entries[1].image_id, "B");
}

TEST(TopK, Errors) {
  EXPECT_THROW(top_k({}, query({1, 0}), 1), Error);
  EXPECT_THROW(top_k({image("a", {1, 0})}, query({1, 0}), 0), Error);
}

TEST(TopK, MatchesBruteForceSort) {
  Rng rng(99);
  for (std::size_t n : {1u, 7u, 50u, 333u, 2000u, 10000u}) {
    std::vector<ImageRecord> corpus;
    const std::size_t dim = 16;
    for (std::size_t i = 0; i < n; ++i) {
      auto v = synth::gaussian_vector(rng, dim);
      // coarse values force exact ties
      for (auto& x : v) x = std::round(x);
      if (std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; })) v[0] = 1.0f;
      corpus.push_back(image("img" + std::to_string(uniform_index(rng, 1u << 30)) + "_" + std::to_string(i), v));
    }
    auto qv = synth::gaussian_vector(rng, dim);
    const auto q = query(qv);
    const auto oracle = brute_force(corpus, q);
    const ExactIndex index(corpus);
    for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{20}, n}) {
      const auto got = index.search(q, k);
      ASSERT_EQ(got.entries.size(), std::min(k, n));
      for (std::size_t i = 0; i < got.entries.size(); ++i) {
        ASSERT_EQ(got.entries[i].image_id, oracle[i].image_id) << "n=" << n << " k=" << k << " i=" << i;
        ASSERT_NEAR(got.entries[i].score, oracle[i].score, 1e-12);
      }
    }
  }
}

TEST(TopK, PrefixNested) {
  Rng rng(3);
  std::vector<ImageRecord> corpus;
  for (int i = 0; i < 200; ++i) corpus.push_back(image("i" + std::to_string(i), synth::gaussian_vector(rng, 8)));
  const auto q = query(synth::gaussian_vector(rng, 8));
  for (std::size_t k = 1; k < 60; ++k) {
    const auto a = top_k(corpus, q, k);
    const auto b = top_k(corpus, q, k + 1);
    std::set<std::string> sb;
    for (const auto& e : b.entries) sb.insert(e.image_id);
    for (const auto& e : a.entries) ASSERT_TRUE(sb.count(e.image_id));
  }
}

TEST(RankedListIo, RoundTripAndDuplicates) {
  testutil::TempDir dir;
  RankedList list{"q1", {{"b", 0.9}, {"a", 0.5}}};
  write_ranked_lists(dir.file("r.jsonl"), {list});
  EXPECT_EQ(read_ranked_lists(dir.file("r.jsonl")), std::vector<RankedList>{list});
  testutil::write_text(dir.file("dup.jsonl"),
                       R"({"query_id":"q","entries":[{"image_id":"a","score":0.5},{"image_id":"a","score":0.4}]})" "\n");
  EXPECT_THROW(read_ranked_lists(dir.file("dup.jsonl")), Error);
}
