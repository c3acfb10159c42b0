#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hulirag/metrics.hpp"
#include "hulirag/region_evidence.hpp"
#include "hulirag/reweight.hpp"

namespace hulirag {

struct PipelineThresholds {
  double confidence = 0.3;
  double mask = 0.5;
  double jaccard = 0.7;
  double epsilon = 1e-6;
};

struct PipelineConfig {
  std::filesystem::path corpus;
  std::filesystem::path queries;
  std::optional<std::filesystem::path> detections;
  std::optional<std::filesystem::path> phrases;  // externally parsed phrases
  std::optional<std::filesystem::path> calibration_queries;
  std::optional<std::filesystem::path> answers;
  std::filesystem::path output_dir;

  std::size_t k_shortlist = 20;
  std::size_t top_n = 1;
  FusionStrategy fusion = FusionStrategy::kReweight;
  std::optional<ReweightParams> reweight_params;  // skips calibration when set
  ScoreNormalization normalization = ScoreNormalization::kMinMax;
  PipelineThresholds thresholds;
  std::size_t max_regions = 32;
  // Restrict each query's regions to those grounded from its own phrases.
  bool use_phrases = true;
  CalibrationConfig calibration;
  std::uint64_t seed = 0;
  int workers = 1;
  std::vector<std::size_t> recall_ks = {1, 5, 10};

  /// Ranges and file existence. Failures throw StageError naming the stage
  /// that needs the offending setting.
  void validate() const;
  RegionEvidenceConfig region_config() const;
};

/// Relative paths resolve against the directory holding the config file.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
PipelineConfig pipeline_config_from_json(const jsonl::Json& j, const std::filesystem::path& base_dir);
jsonl::Json to_json(const PipelineConfig& config);

inline constexpr std::string_view kStages[] = {"retrieve", "decompose", "score-local",
                                               "calibrate", "rerank", "evaluate"};

/// Artifact names inside output_dir.
namespace artifacts {
inline constexpr const char* kShortlist = "shortlist.jsonl";
inline constexpr const char* kPhrases = "phrases.jsonl";
inline constexpr const char* kLocalScores = "local_scores.jsonl";
inline constexpr const char* kCalibShortlist = "calib_shortlist.jsonl";
inline constexpr const char* kCalibPhrases = "calib_phrases.jsonl";
inline constexpr const char* kCalibLocalScores = "calib_local_scores.jsonl";
inline constexpr const char* kCalibrationExamples = "calibration_examples.jsonl";
inline constexpr const char* kParams = "params.json";
inline constexpr const char* kReranked = "reranked.jsonl";
inline constexpr const char* kTopN = "top_n.jsonl";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kManifest = "manifest.json";
}  // namespace artifacts

/// Seed handed to a stage: derive_seed(root, stage name).
std::uint64_t stage_seed(std::uint64_t root, std::string_view stage);

void run_stage(const PipelineConfig& config, std::string_view stage);

/// Runs the stages in order starting at `from_stage` (earlier artifacts must
/// already exist), then writes the manifest.
EvalReport run_pipeline(const PipelineConfig& config, std::string_view from_stage = "retrieve");

}  // namespace hulirag
