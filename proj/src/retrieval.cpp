#include "hulirag/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "hulirag/error.hpp"

namespace hulirag {

using jsonl::Json;

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "cosine: dim " + std::to_string(a.dim()) + " vs " +
                                                   std::to_string(b.dim()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double x = a.values[i];
    const double y = b.values[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) {
    throw Error(ErrorCode::kZeroNorm, "cosine: zero-norm embedding '" +
                                          (na == 0.0 ? a.id : b.id) + "'");
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

bool ranks_before(const RankedEntry& a, const RankedEntry& b) {
  if (a.score != b.score) {
    return a.score > b.score;
  }
  return a.image_id < b.image_id;
}

ExactIndex::ExactIndex(const std::vector<ImageRecord>& corpus) {
  ids_.reserve(corpus.size());
  embeddings_.reserve(corpus.size());
  for (const auto& image : corpus) {
    ids_.push_back(image.image_id);
    embeddings_.push_back(&image.embedding);
  }
}

RankedList ExactIndex::search(const QueryRecord& query, std::size_t k) const {
  if (ids_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "top_k: empty corpus");
  }
  if (k == 0) {
    throw Error(ErrorCode::kInvalidArgument, "top_k: k must be >= 1");
  }
  std::vector<RankedEntry> all;
  all.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    all.push_back({ids_[i], cosine_similarity(query.text_embedding, *embeddings_[i])});
  }
  const std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), ranks_before);
  all.resize(n);
  return {query.query_id, std::move(all)};
}

RankedList top_k(const std::vector<ImageRecord>& corpus, const QueryRecord& query, std::size_t k) {
  return ExactIndex(corpus).search(query, k);
}

Json to_json(const RankedList& list) {
  Json entries = Json::array();
  for (const auto& e : list.entries) {
    entries.push_back(Json{{"image_id", e.image_id}, {"score", e.score}});
  }
  return Json{{"query_id", list.query_id}, {"entries", std::move(entries)}};
}

RankedList ranked_list_from_json(const Json& j) {
  RankedList list;
  list.query_id = jsonl::require_string(j, "query_id");
  const auto& entries = jsonl::require(j, "entries");
  if (!entries.is_array()) {
    throw Error(ErrorCode::kMalformedRecord, "entries must be an array");
  }
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) {
    RankedEntry entry{jsonl::require_string(e, "image_id"), jsonl::require_number(e, "score")};
    if (!seen.insert(entry.image_id).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate image '" + entry.image_id + "' in ranking");
    }
    list.entries.push_back(std::move(entry));
  }
  return list;
}

std::vector<RankedList> read_ranked_lists(const std::string& path) {
  std::vector<RankedList> out;
  jsonl::for_each(path, [&](const Json& j, std::size_t) { out.push_back(ranked_list_from_json(j)); });
  return out;
}

void write_ranked_lists(const std::string& path, const std::vector<RankedList>& lists) {
  std::vector<Json> records;
  records.reserve(lists.size());
  for (const auto& l : lists) {
    records.push_back(to_json(l));
  }
  jsonl::write(path, records);
}

}  // namespace hulirag
