#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hulirag/corpus.hpp"

namespace hulirag {

/// Row-major grid of per-pixel mask probabilities in [0, 1].
struct SoftMask {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<double> values;
};

/// Grounding output for one phrase in one image, before thresholding.
struct Detection {
  std::string image_id;
  std::string region_id;
  std::string phrase_key;
  std::string query_id;
  BoundingBox bbox;
  double confidence = 0.0;
  std::optional<SoftMask> soft_mask;
  std::optional<RleMask> mask;  // set when the producer already binarized
  EmbeddingVector embedding;
};

struct RegionEvidenceConfig {
  double confidence_threshold = 0.3;  // keep strictly above
  double mask_threshold = 0.5;        // pixel on iff value >= threshold
  double epsilon = 1e-6;
  std::size_t max_regions = 32;
};

/// Keeps detections with confidence strictly above `threshold`, in order.
std::vector<Detection> filter_detections(std::vector<Detection> dets, double threshold = 0.3);

/// Pixel is 1 iff its soft value >= threshold. Values outside [0,1] throw.
RleMask binarize_mask(const SoftMask& soft, double threshold = 0.5);

/// Stand-in for the masked RGBA patch: pixels are not stored, so the patch is
/// described by its foreground size and extent.
struct PatchDescriptor {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::size_t foreground_count = 0;
  std::optional<BoundingBox> bbox;  // empty when the mask has no 1-pixels

  bool degenerate() const { return !bbox.has_value(); }
};

PatchDescriptor apply_mask(std::uint32_t width, std::uint32_t height, const RleMask& mask);

/// Soft partition weights:
///   alpha_k = (1/|Ω|) Σ_p m_k(p) / (Σ_l m_l(p) + epsilon)
/// Pixels covered by several masks are shared fractionally; uncovered pixels
/// contribute nothing, so the weights sum to 1 only when the masks cover the
/// image. Throws kInvalidArgument for an empty list and kMaskMismatch when
/// dims differ.
std::vector<double> compute_alpha_weights(std::span<const RleMask> masks, double epsilon = 1e-6);

struct RegionContribution {
  std::string region_id;
  double alpha = 0.0;
  double cosine = 0.0;
};

struct LocalScore {
  std::string query_id;
  std::string image_id;
  double s_local = 0.0;
  std::vector<RegionContribution> per_region;
  // No region survived for this pair; fusion falls back to the global score.
  bool degenerate = false;
};

/// s_local = Σ_k alpha_k · cos(query, r_k) using each region's stored alpha.
LocalScore local_score(const EmbeddingVector& query, std::span<const RegionRecord> regions,
                       std::string image_id = {});

/// Drops the lowest-confidence regions beyond `max_regions`; survivors keep
/// their relative order.
std::vector<RegionRecord> cap_regions(std::vector<RegionRecord> regions, std::size_t max_regions);

/// Regions of `image` that apply to `query`: query_id must be empty or equal,
/// and when `phrase_keys` is given the region's phrase_key must be in it.
std::vector<RegionRecord> select_regions(const ImageRecord& image, const QueryRecord& query,
                                         const std::unordered_set<std::string>* phrase_keys);

/// Selection, cap, alpha weighting and aggregation for one (query, image).
LocalScore score_image(const ImageRecord& image, const QueryRecord& query,
                       const std::unordered_set<std::string>* phrase_keys,
                       const RegionEvidenceConfig& config);

/// Filters and binarizes detections, then appends them as regions of the
/// matching images. Unknown image ids, dim mismatches and duplicate region
/// ids throw.
void attach_detections(std::vector<ImageRecord>& corpus, const std::vector<Detection>& detections,
                       const RegionEvidenceConfig& config);

std::vector<Detection> read_detections(const std::string& path);
void write_detections(const std::string& path, const std::vector<Detection>& detections);

jsonl::Json to_json(const LocalScore& score);
LocalScore local_score_from_json(const jsonl::Json& j);
std::vector<LocalScore> read_local_scores(const std::string& path);
void write_local_scores(const std::string& path, const std::vector<LocalScore>& scores);

}  // namespace hulirag
