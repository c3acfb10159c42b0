#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hulirag/jsonl.hpp"

namespace hulirag {

inline constexpr double kDefaultTemperature = 0.07;

/// Square similarity matrix; row i is an image-side item whose positive is
/// text-side column i.
struct ContrastiveBatch {
  std::size_t n = 0;
  std::vector<double> sims;  // row-major n x n
  double temperature = kDefaultTemperature;

  static ContrastiveBatch from_rows(const std::vector<std::vector<double>>& rows, double temperature);
  double at(std::size_t row, std::size_t col) const { return sims[row * n + col]; }
  void validate() const;
};

/// Mean over rows of -log softmax(row / temperature) at the diagonal.
double info_nce(const ContrastiveBatch& batch);

/// Global InfoNCE plus the mean regional InfoNCE; an empty regional list
/// contributes 0.
double combined_contrastive_loss(const ContrastiveBatch& global_batch,
                                 std::span<const ContrastiveBatch> regional_batches);
double combine_contrastive_losses(double global_loss, std::span<const double> regional_losses);

struct RegionalPair {
  std::string region_id;
  std::string text;
  double alpha = 0.0;
  bool full_image = false;
};

/// Indices (ascending) of round(fraction * n) distinct items drawn uniformly
/// with a generator seeded by `seed`.
std::vector<std::size_t> sample_substitutions(std::size_t n, double fraction, std::uint64_t seed);

/// Marks the sampled pairs as full-image queries (alpha = 1).
std::vector<RegionalPair> hybrid_sample(std::vector<RegionalPair> pairs, double fraction, std::uint64_t seed);

struct AnswerDistribution {
  std::map<std::string, double> probs;

  /// Probabilities in [0,1] summing to 1 within 1e-9.
  void validate() const;
};

/// -ln p(gold). Returns +inf when p(gold) == 0; throws kNotFound when gold is
/// outside the vocabulary.
double vqa_loss(const AnswerDistribution& dist, const std::string& gold);

/// Squared Euclidean distance between two distributions over the same
/// vocabulary.
double consistency_loss(const AnswerDistribution& p_full, const AnswerDistribution& p_masked);

double total_ft_loss(double vqa, double cons);

ContrastiveBatch contrastive_batch_from_json(const jsonl::Json& j);
AnswerDistribution answer_distribution_from_json(const jsonl::Json& j);

/// Evaluates one loss document for the `loss` subcommand. `kind` is one of
/// nce, combined, vqa, cons, total.
jsonl::Json evaluate_loss_document(std::string_view kind, const jsonl::Json& doc);

}  // namespace hulirag
