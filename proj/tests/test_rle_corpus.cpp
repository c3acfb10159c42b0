#include <gtest/gtest.h>

#include "hulirag/corpus.hpp"
#include "hulirag/error.hpp"
#include "hulirag/rle.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace hulirag;

namespace {

BinaryGrid grid2x2(std::vector<std::uint8_t> cells) { return BinaryGrid{2, 2, std::move(cells)}; }

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kStage;
}

std::string image_line(const std::string& id, std::size_t dim, const std::string& runs = "[0,4]") {
  std::string emb = "[";
  for (std::size_t i = 0; i < dim; ++i) emb += (i ? "," : "") + std::to_string(i + 1);
  emb += "]";
  return R"({"image_id":")" + id + R"(","width":2,"height":2,"embedding":)" + emb +
         R"(,"regions":[{"region_id":"r1","phrase_key":"cat","bbox":[0,0,2,2],"confidence":0.9,)" +
         R"("mask":{"width":2,"height":2,"runs":)" + runs + R"(},"embedding":)" + emb + "}]}\n";
}

}  // namespace

TEST(Rle, EncodeExamples) {
  EXPECT_EQ(rle_encode(grid2x2({0, 0, 0, 0})).runs, (std::vector<std::uint32_t>{4}));
  EXPECT_EQ(rle_encode(grid2x2({1, 1, 1, 1})).runs, (std::vector<std::uint32_t>{0, 4}));
  EXPECT_EQ(rle_encode(grid2x2({1, 0, 0, 1})).runs, (std::vector<std::uint32_t>{0, 1, 2, 1}));
}

TEST(Rle, DecodeExamples) {
  EXPECT_EQ(rle_decode({2, 2, {4}}).cells, (std::vector<std::uint8_t>{0, 0, 0, 0}));
  EXPECT_EQ(rle_decode({2, 2, {0, 4}}).cells, (std::vector<std::uint8_t>{1, 1, 1, 1}));
  EXPECT_EQ(rle_decode({2, 2, {0, 1, 2, 1}}).cells, (std::vector<std::uint8_t>{1, 0, 0, 1}));
}

TEST(Rle, Errors) {
  EXPECT_EQ(code_of([] { rle_encode(BinaryGrid{}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { rle_encode(BinaryGrid{2, 2, {1, 0, 1}}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { rle_decode({2, 2, {3}}); }), ErrorCode::kMaskMismatch);
  EXPECT_EQ(code_of([] { validate(RleMask{2, 2, {1, 0, 3}}); }), ErrorCode::kMaskMismatch);
  EXPECT_EQ(code_of([] { validate(RleMask{0, 2, {}}); }), ErrorCode::kMaskMismatch);
}

TEST(Rle, RoundTripMatchesScanlineOracle) {
  Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const auto g = synth::random_grid(rng, 64, 64, uniform_unit(rng));
    const auto mask = rle_encode(g);
    std::vector<int> cells(g.cells.begin(), g.cells.end());
    ASSERT_EQ(mask.runs, oracle::scanline_runs(cells));
    ASSERT_EQ(rle_decode(mask), g);
    std::size_t ones = 0;
    for (auto c : g.cells) ones += c;
    ASSERT_EQ(foreground_count(mask), ones);
  }
}

TEST(Embedding, ZeroNormFlagged) {
  auto v = EmbeddingVector::make("z", {0.0f, 0.0f});
  EXPECT_TRUE(v.degenerate);
  EXPECT_FALSE(EmbeddingVector::make("a", {1.0f, 0.0f}).degenerate);
  EXPECT_EQ(code_of([] { EmbeddingVector::make("e", {}); }), ErrorCode::kMalformedRecord);
}

TEST(Corpus, LoadsValidRecords) {
  testutil::TempDir dir;
  testutil::write_text(dir.file("c.jsonl"), image_line("a", 4) + "\n" + image_line("b", 4));
  const auto corpus = load_corpus(dir.file("c.jsonl"));
  ASSERT_EQ(corpus.size(), 2u);
  EXPECT_EQ(corpus[1].image_id, "b");
  EXPECT_EQ(corpus_dim(corpus), 4u);
  for (const auto& img : corpus) {
    for (const auto& r : img.regions) EXPECT_EQ(rle_decode(r.mask).cells.size(), img.width * img.height);
  }
}

TEST(Corpus, DimensionMismatchReportsLine) {
  testutil::TempDir dir;
  testutil::write_text(dir.file("c.jsonl"), image_line("a", 768) + image_line("b", 512));
  try {
    load_corpus(dir.file("c.jsonl"));
    FAIL();
  } catch (const RecordError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Corpus, MalformedMaskRejected) {
  testutil::TempDir dir;
  testutil::write_text(dir.file("c.jsonl"), image_line("a", 3, "[0,3]"));
  try {
    load_corpus(dir.file("c.jsonl"));
    FAIL();
  } catch (const RecordError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMaskMismatch);
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(Corpus, DuplicateIdRejected) {
  testutil::TempDir dir;
  testutil::write_text(dir.file("c.jsonl"), image_line("a", 3) + image_line("a", 3));
  EXPECT_EQ(code_of([&] { load_corpus(dir.file("c.jsonl")); }), ErrorCode::kDuplicateId);
}

TEST(Corpus, BrokenJsonReportsLine) {
  testutil::TempDir dir;
  testutil::write_text(dir.file("c.jsonl"), image_line("a", 3) + "{not json\n");
  try {
    load_corpus(dir.file("c.jsonl"));
    FAIL();
  } catch (const RecordError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedRecord);
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Corpus, RegionInvariants) {
  RegionRecord r;
  r.region_id = "r";
  r.phrase_key = "p";
  r.bbox = {0, 0, 2, 2};
  r.confidence = 0.5;
  r.mask = {2, 2, {4}};
  r.embedding = EmbeddingVector::make("r", {1.0f});
  EXPECT_NO_THROW(validate_region(r, 2, 2));
  EXPECT_EQ(code_of([&] { validate_region(r, 3, 2); }), ErrorCode::kMaskMismatch);
  auto bad = r;
  bad.bbox = {1, 0, 1, 2};
  EXPECT_EQ(code_of([&] { validate_region(bad, 2, 2); }), ErrorCode::kMalformedRecord);
  bad = r;
  bad.confidence = 1.5;
  EXPECT_EQ(code_of([&] { validate_region(bad, 2, 2); }), ErrorCode::kMalformedRecord);
  ImageRecord img{"i", 2, 2, EmbeddingVector::make("i", {1.0f}), {r, r}};
  EXPECT_EQ(code_of([&] { validate_image(img); }), ErrorCode::kDuplicateId);
}

TEST(Corpus, ReserializeIsFieldEqual) {
  testutil::TempDir dir;
  const auto fixture = std::string(HULIRAG_FIXTURE_DIR) + "/corpus.jsonl";
  const auto first = load_corpus(fixture);
  write_corpus(dir.file("again.jsonl"), first);
  const auto second = load_corpus(dir.file("again.jsonl"));
  EXPECT_EQ(first, second);

  const auto queries = load_queries(std::string(HULIRAG_FIXTURE_DIR) + "/queries.jsonl", corpus_dim(first));
  write_queries(dir.file("q.jsonl"), queries);
  EXPECT_EQ(load_queries(dir.file("q.jsonl")), queries);
}

TEST(Corpus, QueryChecks) {
  testutil::TempDir dir;
  testutil::write_text(dir.file("q.jsonl"), R"({"query_id":"q","text":"","embedding":[1,0],"gt_image_ids":[]})" "\n");
  EXPECT_EQ(code_of([&] { load_queries(dir.file("q.jsonl")); }), ErrorCode::kMalformedRecord);
  testutil::write_text(dir.file("q.jsonl"), R"({"query_id":"q","text":"cat","embedding":[1,0],"gt_image_ids":["a"]})" "\n");
  EXPECT_EQ(code_of([&] { load_queries(dir.file("q.jsonl"), 3); }), ErrorCode::kDimensionMismatch);
  const auto qs = load_queries(dir.file("q.jsonl"), 2);
  EXPECT_FALSE(qs[0].local_embedding.has_value());
  EXPECT_EQ(&qs[0].region_query_embedding(), &qs[0].text_embedding);
}
