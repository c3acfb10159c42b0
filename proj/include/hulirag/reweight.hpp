#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hulirag/jsonl.hpp"
#include "hulirag/region_evidence.hpp"
#include "hulirag/retrieval.hpp"

namespace hulirag {

/// How global and local similarity are combined. kGlobal and kLocal are the
/// single-level baselines.
enum class FusionStrategy { kGlobal, kLocal, kAdd, kMultiply, kReweight };

std::string_view to_string(FusionStrategy s);
FusionStrategy parse_fusion_strategy(std::string_view name);

struct ReweightParams {
  double w_g = 0.5;
  double w_l = 0.5;
  double b = 0.0;

  friend bool operator==(const ReweightParams&, const ReweightParams&) = default;
};

struct ScorePair {
  double s_global = 0.0;
  double s_local = 0.0;
};

/// Exact fusion formula. kReweight needs `params`; other strategies ignore it.
double fuse(FusionStrategy strategy, const std::optional<ReweightParams>& params, double s_g, double s_l);

struct CalibrationExample {
  std::string query_id;
  ScorePair pos;
  ScorePair neg;
};

/// One calibration query with its pool of hard negatives; a negative is
/// drawn from the pool every epoch.
struct CalibrationQuery {
  std::string query_id;
  ScorePair pos;
  std::vector<ScorePair> negatives;
};

struct CalibrationConfig {
  double learning_rate = 0.05;
  int max_epochs = 500;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CalibrationResult {
  ReweightParams params;
  double final_loss = 0.0;
  int epochs = 0;
  std::vector<double> loss_history;  // loss after each epoch, index 0 = initial
};

inline constexpr ReweightParams kInitialParams{0.5, 0.5, 0.0};

/// (1 - S+)^2 + (S-)^2 with S = w_g*s_g + w_l*s_l + b.
double reweight_loss(const ReweightParams& params, const CalibrationExample& ex);
double mean_reweight_loss(const ReweightParams& params, const std::vector<CalibrationExample>& examples);

/// Analytic gradient of the mean loss with respect to (w_g, w_l, b).
ReweightParams reweight_gradient(const ReweightParams& params, const std::vector<CalibrationExample>& examples);

/// Full-batch gradient descent from (0.5, 0.5, 0). Stops when the loss moves
/// less than `tolerance` or after max_epochs. A non-finite loss throws
/// kDivergence naming the epoch.
CalibrationResult calibrate(const std::vector<CalibrationExample>& examples, const CalibrationConfig& config);

/// Variant that redraws each query's hard negative every epoch with a
/// generator seeded from config.seed. Convergence is judged on the loss
/// averaged over each query's whole pool.
CalibrationResult calibrate_resampled(const std::vector<CalibrationQuery>& queries,
                                      const CalibrationConfig& config);

inline constexpr std::size_t kHardNegativePool = 5;

/// First `pool` non-GT entries of a global ranking.
std::vector<RankedEntry> hard_negative_pool(const RankedList& ranked, const std::unordered_set<std::string>& gt_ids,
                                            std::size_t pool = kHardNegativePool);

/// Uniform draw from hard_negative_pool. Throws kInvalidArgument when every
/// entry is ground truth.
std::string select_hard_negative(const RankedList& ranked, const std::unordered_set<std::string>& gt_ids,
                                 std::uint64_t rng_seed);

/// Maps values to [0,1] by min-max; a constant column maps to 0.5.
std::vector<double> minmax_normalize(const std::vector<double>& values);

enum class ScoreNormalization { kMinMax, kNone };

struct ScoredCandidate {
  std::string image_id;
  double s_global = 0.0;  // raw
  double s_local = 0.0;   // raw
  double norm_global = 0.0;
  double norm_local = 0.0;
  double fused = 0.0;
  bool degenerate = false;
  int rank = 0;
};

struct RerankedList {
  std::string query_id;
  std::vector<ScoredCandidate> candidates;

  RankedList ranked() const;
};

using LocalScoreLookup = std::unordered_map<std::string, const LocalScore*>;

/// Normalized (global, local) pairs for a shortlist, in shortlist order.
/// Degenerate images get local 0 (the floor of the normalized range) and the
/// local column is normalized over non-degenerate images only. Throws
/// kNotFound for a shortlisted image with no local score unless
/// `require_local` is false.
std::vector<ScoredCandidate> normalized_candidates(const RankedList& shortlist, const LocalScoreLookup& local,
                                                   ScoreNormalization normalization, bool require_local = true);

/// Sorts by fused score desc, then raw global desc, then image_id asc.
RerankedList rerank(const RankedList& shortlist, const LocalScoreLookup& local, FusionStrategy strategy,
                    const std::optional<ReweightParams>& params,
                    ScoreNormalization normalization = ScoreNormalization::kMinMax);

RankedList truncate(RankedList list, std::size_t top_n);

/// Positive = best-ranked GT image in the shortlist, pool = top non-GT
/// entries of the global ranking. Queries lacking either are skipped.
std::vector<CalibrationQuery> build_calibration_queries(
    const std::vector<RankedList>& shortlists, const std::unordered_map<std::string, LocalScoreLookup>& local,
    const std::unordered_map<std::string, std::unordered_set<std::string>>& gt,
    ScoreNormalization normalization = ScoreNormalization::kMinMax, std::size_t pool = kHardNegativePool);

jsonl::Json to_json(const ReweightParams& p);
ReweightParams reweight_params_from_json(const jsonl::Json& j);
jsonl::Json to_json(const CalibrationConfig& c);
CalibrationConfig calibration_config_from_json(const jsonl::Json& j);
jsonl::Json to_json(const RerankedList& list);

std::vector<CalibrationQuery> read_calibration_queries(const std::string& path);
void write_calibration_queries(const std::string& path, const std::vector<CalibrationQuery>& queries);

}  // namespace hulirag
