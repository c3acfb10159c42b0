#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hulirag/corpus.hpp"

namespace hulirag {

/// Cosine similarity computed in double precision. Throws on dimension
/// mismatch (kDimensionMismatch) and on zero-norm inputs (kZeroNorm).
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

struct RankedEntry {
  std::string image_id;
  double score = 0.0;

  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

/// Candidates for one query, sorted by (score desc, image_id asc).
struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;

  friend bool operator==(const RankedList&, const RankedList&) = default;
};

/// Ordering used by every ranked output in the engine.
bool ranks_before(const RankedEntry& a, const RankedEntry& b);

/// Search interface over image embeddings. The exact scan below is the only
/// implementation shipped; an approximate index can slot in behind it.
class SimilarityIndex {
 public:
  virtual ~SimilarityIndex() = default;
  virtual RankedList search(const QueryRecord& query, std::size_t k) const = 0;
  virtual std::size_t size() const = 0;
};

class ExactIndex final : public SimilarityIndex {
 public:
  explicit ExactIndex(const std::vector<ImageRecord>& corpus);

  RankedList search(const QueryRecord& query, std::size_t k) const override;
  std::size_t size() const override { return ids_.size(); }

 private:
  std::vector<std::string> ids_;
  std::vector<const EmbeddingVector*> embeddings_;
};

/// Exact top-k by brute-force scan. Throws kInvalidArgument on an empty
/// corpus or k == 0.
RankedList top_k(const std::vector<ImageRecord>& corpus, const QueryRecord& query, std::size_t k);

std::vector<RankedList> read_ranked_lists(const std::string& path);
void write_ranked_lists(const std::string& path, const std::vector<RankedList>& lists);
jsonl::Json to_json(const RankedList& list);
RankedList ranked_list_from_json(const jsonl::Json& j);

}  // namespace hulirag
