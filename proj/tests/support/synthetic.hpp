#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hulirag/corpus.hpp"
#include "hulirag/phrases.hpp"
#include "hulirag/random.hpp"
#include "hulirag/reweight.hpp"
#include "hulirag/rle.hpp"

namespace synth {

double normal(hulirag::Rng& rng);
std::vector<float> gaussian_vector(hulirag::Rng& rng, std::size_t dim);

hulirag::BinaryGrid random_grid(hulirag::Rng& rng, std::uint32_t max_w, std::uint32_t max_h, double density);

// Between 1 and max_masks masks over one random grid size; densities vary
// per mask so overlaps, gaps and empty masks all occur.
std::vector<hulirag::RleMask> random_mask_set(hulirag::Rng& rng, std::uint32_t max_dim, std::size_t max_masks);

// Disjoint masks that cover every pixel; some may be empty.
std::vector<hulirag::RleMask> random_partition(hulirag::Rng& rng, std::uint32_t max_dim, std::size_t max_masks);

// Phrases over a small vocabulary so overlaps and exact duplicates are common.
std::vector<hulirag::Phrase> random_phrases(hulirag::Rng& rng, std::size_t max_phrases);

hulirag::RankedList random_ranking(hulirag::Rng& rng, const std::string& query_id, std::size_t n);

// All positives at (1, 1) and all negatives at (0, 0).
std::vector<hulirag::CalibrationExample> canonical_separable_set(std::size_t n);
// Positives drawn from [0.6, 1]^2, negatives from [0, 0.4]^2.
std::vector<hulirag::CalibrationExample> separable_set(hulirag::Rng& rng, std::size_t n);
std::vector<hulirag::CalibrationExample> random_examples(hulirag::Rng& rng, std::size_t n);

struct FusionSpec {
  std::size_t num_images = 500;
  std::size_t num_scenes = 50;
  std::size_t dim = 64;
  std::size_t vocabulary = 10;
  std::size_t palette = 10;
  std::size_t objects_per_image = 3;
  std::size_t objects_per_query = 3;
  // Global embeddings are cluttered (large per-image noise) and carry only a
  // weak object trace; region embeddings are clean.
  double image_object_weight = 0.35;
  double image_noise = 1.5;
  double query_object_weight = 0.4;
  double query_noise = 0.2;
  double region_noise = 0.1;
  double local_query_noise = 0.2;
  double region_drop = 0.05;
  double spurious_region = 0.1;
  std::size_t calibration_queries = 150;
  std::size_t heldout_queries = 200;
  std::uint64_t seed = 7;
};

struct FusionDataset {
  std::vector<hulirag::ImageRecord> corpus;
  std::vector<hulirag::QueryRecord> calibration;
  std::vector<hulirag::QueryRecord> heldout;
};

// Images grouped into scenes. The global embedding is dominated by the scene
// and carries only a faint trace of the objects, so the target of a query is
// identifiable within its scene only through region embeddings. Region
// evidence is itself noisy (dropped and spurious detections), and objects
// recur across scenes, so neither level suffices alone.
FusionDataset make_fusion_dataset(const FusionSpec& spec);

}  // namespace synth
