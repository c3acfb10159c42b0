#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hulirag/jsonl.hpp"
#include "hulirag/rle.hpp"

namespace hulirag {

/// Dense embedding. Stored at single precision (the encoder export format);
/// all arithmetic on it is done in double.
struct EmbeddingVector {
  std::string id;
  std::vector<float> values;
  // Set at load time when the vector has zero norm. Cosine refuses these.
  bool degenerate = false;

  std::size_t dim() const { return values.size(); }
  double norm() const;

  static EmbeddingVector make(std::string id, std::vector<float> values);

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

/// Pixel box, half-open: [x0, x1) x [y0, y1).
struct BoundingBox {
  std::int32_t x0 = 0;
  std::int32_t y0 = 0;
  std::int32_t x1 = 0;
  std::int32_t y1 = 0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct RegionRecord {
  std::string region_id;
  std::string phrase_key;
  // Detections produced for one query carry its id; empty means the region
  // applies to every query.
  std::string query_id;
  BoundingBox bbox;
  double confidence = 0.0;
  RleMask mask;
  EmbeddingVector embedding;
  double alpha = 0.0;

  friend bool operator==(const RegionRecord&, const RegionRecord&) = default;
};

struct ImageRecord {
  std::string image_id;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  EmbeddingVector embedding;
  std::vector<RegionRecord> regions;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct QueryRecord {
  std::string query_id;
  std::string text;
  EmbeddingVector text_embedding;
  // Embedding used against region embeddings. Falls back to text_embedding
  // when the query file does not provide one.
  std::optional<EmbeddingVector> local_embedding;
  std::vector<std::string> gt_image_ids;
  std::optional<std::string> gold_answer;

  const EmbeddingVector& region_query_embedding() const {
    return local_embedding ? *local_embedding : text_embedding;
  }

  friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

void validate_region(const RegionRecord& region, std::uint32_t width, std::uint32_t height);
void validate_image(const ImageRecord& image);

/// Reads a line-delimited corpus file and validates every record. Failures
/// raise RecordError carrying the offending line number.
std::vector<ImageRecord> load_corpus(const std::string& path);
void write_corpus(const std::string& path, const std::vector<ImageRecord>& images);

/// `expected_dim`, when given, must match every query embedding.
std::vector<QueryRecord> load_queries(const std::string& path,
                                      std::optional<std::size_t> expected_dim = std::nullopt);
void write_queries(const std::string& path, const std::vector<QueryRecord>& queries);

/// Embedding dimension shared by the corpus; 0 for an empty corpus.
std::size_t corpus_dim(const std::vector<ImageRecord>& images);

jsonl::Json to_json(const RleMask& mask);
RleMask rle_from_json(const jsonl::Json& j);
jsonl::Json to_json(const BoundingBox& box);
BoundingBox bbox_from_json(const jsonl::Json& j);
jsonl::Json to_json(const RegionRecord& region);
RegionRecord region_from_json(const jsonl::Json& j, const std::string& image_id);
jsonl::Json to_json(const ImageRecord& image);
ImageRecord image_from_json(const jsonl::Json& j);
jsonl::Json to_json(const QueryRecord& query);
QueryRecord query_from_json(const jsonl::Json& j);

}  // namespace hulirag
