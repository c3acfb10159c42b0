#include "hulirag/region_evidence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hulirag/error.hpp"
#include "hulirag/retrieval.hpp"

namespace hulirag {

using jsonl::Json;

std::vector<Detection> filter_detections(std::vector<Detection> dets, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "confidence threshold outside [0,1]");
  }
  std::erase_if(dets, [&](const Detection& d) { return !(d.confidence > threshold); });
  return dets;
}

RleMask binarize_mask(const SoftMask& soft, double threshold) {
  if (soft.values.size() != static_cast<std::size_t>(soft.width) * soft.height) {
    throw Error(ErrorCode::kMaskMismatch, "soft mask size does not match its dims");
  }
  BinaryGrid grid{soft.width, soft.height, std::vector<std::uint8_t>(soft.values.size())};
  for (std::size_t i = 0; i < soft.values.size(); ++i) {
    const double v = soft.values[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "soft mask value outside [0,1]");
    }
    grid.cells[i] = v >= threshold ? 1 : 0;
  }
  return rle_encode(grid);
}

PatchDescriptor apply_mask(std::uint32_t width, std::uint32_t height, const RleMask& mask) {
  if (mask.width != width || mask.height != height) {
    throw Error(ErrorCode::kMaskMismatch, "mask dims differ from the image");
  }
  validate(mask);
  PatchDescriptor d{width, height, 0, std::nullopt};
  std::uint32_t x0 = width, y0 = height, x1 = 0, y1 = 0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < mask.runs.size(); ++i) {
    const std::size_t len = mask.runs[i];
    if (i % 2 == 1 && len > 0) {
      d.foreground_count += len;
      const auto first_y = static_cast<std::uint32_t>(pos / width);
      const auto last_y = static_cast<std::uint32_t>((pos + len - 1) / width);
      y0 = std::min(y0, first_y);
      y1 = std::max(y1, last_y + 1);
      if (first_y != last_y) {
        // the run wraps a row boundary, so it touches both edges
        x0 = 0;
        x1 = width;
      } else {
        x0 = std::min(x0, static_cast<std::uint32_t>(pos % width));
        x1 = std::max(x1, static_cast<std::uint32_t>((pos + len - 1) % width) + 1);
      }
    }
    pos += len;
  }
  if (d.foreground_count > 0) {
    d.bbox = BoundingBox{static_cast<std::int32_t>(x0), static_cast<std::int32_t>(y0),
                         static_cast<std::int32_t>(x1), static_cast<std::int32_t>(y1)};
  }
  return d;
}

std::vector<double> compute_alpha_weights(std::span<const RleMask> masks, double epsilon) {
  if (masks.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "alpha weights need at least one mask");
  }
  if (!(epsilon >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "epsilon must be non-negative");
  }
  const auto width = masks.front().width;
  const auto height = masks.front().height;
  for (const auto& m : masks) {
    if (m.width != width || m.height != height) {
      throw Error(ErrorCode::kMaskMismatch, "alpha weights: masks have different dims");
    }
    validate(m);
  }
  const std::size_t area = masks.front().area();

  std::vector<std::uint32_t> coverage(area, 0);
  for (const auto& m : masks) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < m.runs.size(); ++i) {
      if (i % 2 == 1) {
        for (std::size_t p = pos; p < pos + m.runs[i]; ++p) {
          ++coverage[p];
        }
      }
      pos += m.runs[i];
    }
  }

  std::vector<double> alphas;
  alphas.reserve(masks.size());
  for (const auto& m : masks) {
    double sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < m.runs.size(); ++i) {
      if (i % 2 == 1) {
        for (std::size_t p = pos; p < pos + m.runs[i]; ++p) {
          sum += 1.0 / (static_cast<double>(coverage[p]) + epsilon);
        }
      }
      pos += m.runs[i];
    }
    alphas.push_back(sum / static_cast<double>(area));
  }
  return alphas;
}

LocalScore local_score(const EmbeddingVector& query, std::span<const RegionRecord> regions,
                       std::string image_id) {
  LocalScore out;
  out.image_id = std::move(image_id);
  if (regions.empty()) {
    out.degenerate = true;
    return out;
  }
  for (const auto& r : regions) {
    const double c = cosine_similarity(query, r.embedding);
    out.per_region.push_back({r.region_id, r.alpha, c});
    out.s_local += r.alpha * c;
  }
  return out;
}

std::vector<RegionRecord> cap_regions(std::vector<RegionRecord> regions, std::size_t max_regions) {
  if (regions.size() <= max_regions) {
    return regions;
  }
  std::vector<std::size_t> idx(regions.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return regions[a].confidence > regions[b].confidence;
  });
  idx.resize(max_regions);
  std::sort(idx.begin(), idx.end());
  std::vector<RegionRecord> kept;
  kept.reserve(max_regions);
  for (std::size_t i : idx) {
    kept.push_back(std::move(regions[i]));
  }
  return kept;
}

std::vector<RegionRecord> select_regions(const ImageRecord& image, const QueryRecord& query,
                                         const std::unordered_set<std::string>* phrase_keys) {
  std::vector<RegionRecord> out;
  for (const auto& r : image.regions) {
    if (!r.query_id.empty() && r.query_id != query.query_id) {
      continue;
    }
    if (phrase_keys && !phrase_keys->count(r.phrase_key)) {
      continue;
    }
    out.push_back(r);
  }
  return out;
}

LocalScore score_image(const ImageRecord& image, const QueryRecord& query,
                       const std::unordered_set<std::string>* phrase_keys,
                       const RegionEvidenceConfig& config) {
  auto regions = cap_regions(select_regions(image, query, phrase_keys), config.max_regions);
  if (!regions.empty()) {
    std::vector<RleMask> masks;
    masks.reserve(regions.size());
    for (const auto& r : regions) {
      masks.push_back(r.mask);
    }
    const auto alphas = compute_alpha_weights(masks, config.epsilon);
    for (std::size_t k = 0; k < regions.size(); ++k) {
      regions[k].alpha = alphas[k];
    }
  }
  LocalScore s = local_score(query.region_query_embedding(), regions, image.image_id);
  s.query_id = query.query_id;
  return s;
}

void attach_detections(std::vector<ImageRecord>& corpus, const std::vector<Detection>& detections,
                       const RegionEvidenceConfig& config) {
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    by_id.emplace(corpus[i].image_id, i);
  }
  for (const auto& d : filter_detections(detections, config.confidence_threshold)) {
    auto it = by_id.find(d.image_id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kNotFound, "detection '" + d.region_id + "' references unknown image '" +
                                            d.image_id + "'");
    }
    ImageRecord& image = corpus[it->second];
    RegionRecord r;
    r.region_id = d.region_id;
    r.phrase_key = d.phrase_key;
    r.query_id = d.query_id;
    r.bbox = d.bbox;
    r.confidence = d.confidence;
    r.mask = d.mask ? *d.mask : binarize_mask(*d.soft_mask, config.mask_threshold);
    r.embedding = d.embedding;
    for (const auto& existing : image.regions) {
      if (existing.region_id == r.region_id) {
        throw Error(ErrorCode::kDuplicateId, "duplicate region id '" + r.region_id + "' in image '" +
                                                 image.image_id + "'");
      }
    }
    validate_region(r, image.width, image.height);
    if (r.embedding.dim() != image.embedding.dim()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "detection '" + r.region_id + "' embedding dim differs from the corpus");
    }
    image.regions.push_back(std::move(r));
  }
}

namespace {

Detection detection_from_json(const Json& j) {
  Detection d;
  d.image_id = jsonl::require_string(j, "image_id");
  d.region_id = jsonl::require_string(j, "region_id");
  d.phrase_key = jsonl::require_string(j, "phrase_key");
  d.query_id = j.value("query_id", std::string{});
  d.bbox = bbox_from_json(jsonl::require(j, "bbox"));
  d.confidence = jsonl::require_number(j, "confidence");
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
    throw Error(ErrorCode::kMalformedRecord, "detection confidence outside [0,1]");
  }
  const bool has_soft = j.contains("soft_mask");
  const bool has_rle = j.contains("mask");
  if (has_soft == has_rle) {
    throw Error(ErrorCode::kMalformedRecord, "detection needs exactly one of soft_mask or mask");
  }
  if (has_soft) {
    const auto& sj = j.at("soft_mask");
    SoftMask s;
    s.width = static_cast<std::uint32_t>(jsonl::require_number(sj, "width"));
    s.height = static_cast<std::uint32_t>(jsonl::require_number(sj, "height"));
    s.values = jsonl::require_doubles(sj, "values");
    if (s.width == 0 || s.height == 0 || s.values.size() != static_cast<std::size_t>(s.width) * s.height) {
      throw Error(ErrorCode::kMaskMismatch, "soft mask size does not match its dims");
    }
    d.soft_mask = std::move(s);
  } else {
    d.mask = rle_from_json(j.at("mask"));
  }
  d.embedding = EmbeddingVector::make(d.image_id + "/" + d.region_id, jsonl::require_floats(j, "embedding"));
  return d;
}

Json detection_to_json(const Detection& d) {
  Json emb = Json::array();
  for (float v : d.embedding.values) {
    emb.push_back(static_cast<double>(v));
  }
  Json j{{"image_id", d.image_id}, {"region_id", d.region_id}, {"phrase_key", d.phrase_key},
         {"bbox", to_json(d.bbox)},  {"confidence", d.confidence}, {"embedding", std::move(emb)}};
  if (!d.query_id.empty()) {
    j["query_id"] = d.query_id;
  }
  if (d.soft_mask) {
    j["soft_mask"] = Json{{"width", d.soft_mask->width}, {"height", d.soft_mask->height},
                          {"values", d.soft_mask->values}};
  }
  if (d.mask) {
    j["mask"] = to_json(*d.mask);
  }
  return j;
}

}  // namespace

std::vector<Detection> read_detections(const std::string& path) {
  std::vector<Detection> out;
  jsonl::for_each(path, [&](const Json& j, std::size_t) { out.push_back(detection_from_json(j)); });
  return out;
}

void write_detections(const std::string& path, const std::vector<Detection>& detections) {
  std::vector<Json> records;
  for (const auto& d : detections) {
    records.push_back(detection_to_json(d));
  }
  jsonl::write(path, records);
}

Json to_json(const LocalScore& s) {
  Json regions = Json::array();
  for (const auto& r : s.per_region) {
    regions.push_back(Json{{"region_id", r.region_id}, {"alpha", r.alpha}, {"cosine", r.cosine}});
  }
  return Json{{"query_id", s.query_id}, {"image_id", s.image_id}, {"s_local", s.s_local},
              {"degenerate", s.degenerate}, {"per_region", std::move(regions)}};
}

LocalScore local_score_from_json(const Json& j) {
  LocalScore s;
  s.query_id = jsonl::require_string(j, "query_id");
  s.image_id = jsonl::require_string(j, "image_id");
  s.s_local = jsonl::require_number(j, "s_local");
  s.degenerate = j.value("degenerate", false);
  if (auto it = j.find("per_region"); it != j.end()) {
    for (const auto& r : *it) {
      s.per_region.push_back({jsonl::require_string(r, "region_id"), jsonl::require_number(r, "alpha"),
                              jsonl::require_number(r, "cosine")});
    }
  }
  return s;
}

std::vector<LocalScore> read_local_scores(const std::string& path) {
  std::vector<LocalScore> out;
  jsonl::for_each(path, [&](const Json& j, std::size_t) { out.push_back(local_score_from_json(j)); });
  return out;
}

void write_local_scores(const std::string& path, const std::vector<LocalScore>& scores) {
  std::vector<Json> records;
  records.reserve(scores.size());
  for (const auto& s : scores) {
    records.push_back(to_json(s));
  }
  jsonl::write(path, records);
}

}  // namespace hulirag
