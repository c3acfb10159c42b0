#include "hulirag/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "hulirag/error.hpp"

namespace hulirag {

using jsonl::Json;

double EmbeddingVector::norm() const {
  double s = 0.0;
  for (float v : values) {
    s += static_cast<double>(v) * static_cast<double>(v);
  }
  return std::sqrt(s);
}

EmbeddingVector EmbeddingVector::make(std::string id, std::vector<float> values) {
  if (values.empty()) {
    throw Error(ErrorCode::kMalformedRecord, "embedding '" + id + "' is empty");
  }
  for (float v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kMalformedRecord, "embedding '" + id + "' has a non-finite value");
    }
  }
  EmbeddingVector e{std::move(id), std::move(values), false};
  e.degenerate = e.norm() == 0.0;
  return e;
}

void validate_region(const RegionRecord& region, std::uint32_t width, std::uint32_t height) {
  const auto& b = region.bbox;
  if (!(b.x0 < b.x1) || !(b.y0 < b.y1)) {
    throw Error(ErrorCode::kMalformedRecord, "region '" + region.region_id + "' has an empty bbox");
  }
  if (!(region.confidence >= 0.0 && region.confidence <= 1.0)) {
    throw Error(ErrorCode::kMalformedRecord,
                "region '" + region.region_id + "' confidence outside [0,1]");
  }
  if (region.mask.width != width || region.mask.height != height) {
    throw Error(ErrorCode::kMaskMismatch, "region '" + region.region_id +
                                              "' mask dims differ from the image");
  }
  validate(region.mask);
}

void validate_image(const ImageRecord& image) {
  if (image.width == 0 || image.height == 0) {
    throw Error(ErrorCode::kMalformedRecord, "image '" + image.image_id + "' has zero size");
  }
  std::unordered_set<std::string> ids;
  for (const auto& r : image.regions) {
    if (!ids.insert(r.region_id).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate region id '" + r.region_id + "'");
    }
    validate_region(r, image.width, image.height);
    if (r.embedding.dim() != image.embedding.dim()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "region '" + r.region_id + "' embedding dim " + std::to_string(r.embedding.dim()) +
                      " != " + std::to_string(image.embedding.dim()));
    }
  }
}

namespace {

std::uint32_t positive_u32(const Json& obj, const char* key) {
  const auto& v = jsonl::require(obj, key);
  if (!v.is_number_integer() || v.get<std::int64_t>() <= 0 ||
      v.get<std::int64_t>() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kMalformedRecord, std::string("key '") + key + "' must be a positive integer");
  }
  return v.get<std::uint32_t>();
}

Json floats_json(const std::vector<float>& values) {
  Json arr = Json::array();
  for (float v : values) {
    arr.push_back(static_cast<double>(v));
  }
  return arr;
}

}  // namespace

Json to_json(const RleMask& mask) {
  return Json{{"width", mask.width}, {"height", mask.height}, {"runs", mask.runs}};
}

RleMask rle_from_json(const Json& j) {
  RleMask m;
  m.width = positive_u32(j, "width");
  m.height = positive_u32(j, "height");
  const auto& runs = jsonl::require(j, "runs");
  if (!runs.is_array()) {
    throw Error(ErrorCode::kMalformedRecord, "mask runs must be an array");
  }
  for (const auto& r : runs) {
    if (!r.is_number_unsigned() && !(r.is_number_integer() && r.get<std::int64_t>() >= 0)) {
      throw Error(ErrorCode::kMalformedRecord, "mask runs must be non-negative integers");
    }
    m.runs.push_back(r.get<std::uint32_t>());
  }
  validate(m);
  return m;
}

Json to_json(const BoundingBox& b) { return Json::array({b.x0, b.y0, b.x1, b.y1}); }

BoundingBox bbox_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw Error(ErrorCode::kMalformedRecord, "bbox must be [x0, y0, x1, y1]");
  }
  for (const auto& v : j) {
    if (!v.is_number_integer()) {
      throw Error(ErrorCode::kMalformedRecord, "bbox coordinates must be integers");
    }
  }
  return {j[0].get<std::int32_t>(), j[1].get<std::int32_t>(), j[2].get<std::int32_t>(),
          j[3].get<std::int32_t>()};
}

Json to_json(const RegionRecord& r) {
  Json j{{"region_id", r.region_id},
         {"phrase_key", r.phrase_key},
         {"bbox", to_json(r.bbox)},
         {"confidence", r.confidence},
         {"mask", to_json(r.mask)},
         {"embedding", floats_json(r.embedding.values)}};
  if (!r.query_id.empty()) {
    j["query_id"] = r.query_id;
  }
  if (r.alpha != 0.0) {
    j["alpha"] = r.alpha;
  }
  return j;
}

RegionRecord region_from_json(const Json& j, const std::string& image_id) {
  RegionRecord r;
  r.region_id = jsonl::require_string(j, "region_id");
  r.phrase_key = jsonl::require_string(j, "phrase_key");
  if (auto it = j.find("query_id"); it != j.end()) {
    r.query_id = it->get<std::string>();
  }
  r.bbox = bbox_from_json(jsonl::require(j, "bbox"));
  r.confidence = jsonl::require_number(j, "confidence");
  r.mask = rle_from_json(jsonl::require(j, "mask"));
  r.embedding = EmbeddingVector::make(image_id + "/" + r.region_id,
                                      jsonl::require_floats(j, "embedding"));
  if (auto it = j.find("alpha"); it != j.end()) {
    r.alpha = it->get<double>();
  }
  return r;
}

Json to_json(const ImageRecord& image) {
  Json regions = Json::array();
  for (const auto& r : image.regions) {
    regions.push_back(to_json(r));
  }
  return Json{{"image_id", image.image_id},
              {"width", image.width},
              {"height", image.height},
              {"embedding", floats_json(image.embedding.values)},
              {"regions", std::move(regions)}};
}

ImageRecord image_from_json(const Json& j) {
  ImageRecord image;
  image.image_id = jsonl::require_string(j, "image_id");
  image.width = positive_u32(j, "width");
  image.height = positive_u32(j, "height");
  image.embedding = EmbeddingVector::make(image.image_id, jsonl::require_floats(j, "embedding"));
  if (auto it = j.find("regions"); it != j.end()) {
    if (!it->is_array()) {
      throw Error(ErrorCode::kMalformedRecord, "regions must be an array");
    }
    for (const auto& r : *it) {
      image.regions.push_back(region_from_json(r, image.image_id));
    }
  }
  validate_image(image);
  return image;
}

Json to_json(const QueryRecord& q) {
  Json j{{"query_id", q.query_id},
         {"text", q.text},
         {"embedding", floats_json(q.text_embedding.values)},
         {"gt_image_ids", q.gt_image_ids}};
  if (q.local_embedding) {
    j["local_embedding"] = floats_json(q.local_embedding->values);
  }
  if (q.gold_answer) {
    j["gold_answer"] = *q.gold_answer;
  }
  return j;
}

QueryRecord query_from_json(const Json& j) {
  QueryRecord q;
  q.query_id = jsonl::require_string(j, "query_id");
  q.text = jsonl::require_string(j, "text");
  if (q.text.empty()) {
    throw Error(ErrorCode::kMalformedRecord, "query '" + q.query_id + "' has empty text");
  }
  q.text_embedding = EmbeddingVector::make(q.query_id, jsonl::require_floats(j, "embedding"));
  if (j.contains("local_embedding")) {
    q.local_embedding =
        EmbeddingVector::make(q.query_id + "/local", jsonl::require_floats(j, "local_embedding"));
    if (q.local_embedding->dim() != q.text_embedding.dim()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "query '" + q.query_id + "' local embedding dim differs from text embedding");
    }
  }
  const auto& gt = jsonl::require(j, "gt_image_ids");
  if (!gt.is_array() || gt.empty()) {
    throw Error(ErrorCode::kMalformedRecord, "gt_image_ids must be a non-empty array");
  }
  for (const auto& id : gt) {
    const auto s = id.get<std::string>();
    if (std::find(q.gt_image_ids.begin(), q.gt_image_ids.end(), s) == q.gt_image_ids.end()) {
      q.gt_image_ids.push_back(s);
    }
  }
  if (auto it = j.find("gold_answer"); it != j.end() && !it->is_null()) {
    q.gold_answer = it->get<std::string>();
  }
  return q;
}

std::vector<ImageRecord> load_corpus(const std::string& path) {
  std::vector<ImageRecord> images;
  std::unordered_set<std::string> seen;
  std::size_t dim = 0;
  jsonl::for_each(path, [&](const Json& j, std::size_t) {
    ImageRecord image = image_from_json(j);
    if (dim == 0) {
      dim = image.embedding.dim();
    } else if (image.embedding.dim() != dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "image '" + image.image_id + "' embedding dim " +
                      std::to_string(image.embedding.dim()) + " != corpus dim " + std::to_string(dim));
    }
    if (!seen.insert(image.image_id).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate image_id '" + image.image_id + "'");
    }
    images.push_back(std::move(image));
  });
  return images;
}

void write_corpus(const std::string& path, const std::vector<ImageRecord>& images) {
  std::vector<Json> records;
  records.reserve(images.size());
  for (const auto& image : images) {
    records.push_back(to_json(image));
  }
  jsonl::write(path, records);
}

std::vector<QueryRecord> load_queries(const std::string& path, std::optional<std::size_t> expected_dim) {
  std::vector<QueryRecord> queries;
  std::unordered_set<std::string> seen;
  jsonl::for_each(path, [&](const Json& j, std::size_t) {
    QueryRecord q = query_from_json(j);
    if (expected_dim && q.text_embedding.dim() != *expected_dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "query '" + q.query_id + "' embedding dim " + std::to_string(q.text_embedding.dim()) +
                      " != corpus dim " + std::to_string(*expected_dim));
    }
    if (!seen.insert(q.query_id).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate query_id '" + q.query_id + "'");
    }
    queries.push_back(std::move(q));
  });
  return queries;
}

void write_queries(const std::string& path, const std::vector<QueryRecord>& queries) {
  std::vector<Json> records;
  records.reserve(queries.size());
  for (const auto& q : queries) {
    records.push_back(to_json(q));
  }
  jsonl::write(path, records);
}

std::size_t corpus_dim(const std::vector<ImageRecord>& images) {
  return images.empty() ? 0 : images.front().embedding.dim();
}

}  // namespace hulirag
