#include "hulirag/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hulirag/error.hpp"
#include "hulirag/random.hpp"

namespace hulirag {

using jsonl::Json;

ContrastiveBatch ContrastiveBatch::from_rows(const std::vector<std::vector<double>>& rows, double temperature) {
  ContrastiveBatch b;
  b.n = rows.size();
  b.temperature = temperature;
  b.sims.reserve(b.n * b.n);
  for (const auto& row : rows) {
    if (row.size() != b.n) {
      throw Error(ErrorCode::kInvalidArgument, "similarity matrix must be square");
    }
    b.sims.insert(b.sims.end(), row.begin(), row.end());
  }
  b.validate();
  return b;
}

void ContrastiveBatch::validate() const {
  if (n == 0) {
    throw Error(ErrorCode::kInvalidArgument, "contrastive batch is empty");
  }
  if (sims.size() != n * n) {
    throw Error(ErrorCode::kInvalidArgument, "similarity matrix must be square");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be positive");
  }
  for (double v : sims) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, "similarity matrix has a non-finite entry");
    }
  }
}

double info_nce(const ContrastiveBatch& batch) {
  batch.validate();
  double total = 0.0;
  for (std::size_t i = 0; i < batch.n; ++i) {
    double max = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < batch.n; ++j) {
      max = std::max(max, batch.at(i, j) / batch.temperature);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < batch.n; ++j) {
      sum += std::exp(batch.at(i, j) / batch.temperature - max);
    }
    const double log_norm = max + std::log(sum);
    total += log_norm - batch.at(i, i) / batch.temperature;
  }
  // rounding can leave a tiny negative when the diagonal dominates
  return std::max(0.0, total / static_cast<double>(batch.n));
}

double combine_contrastive_losses(double global_loss, std::span<const double> regional_losses) {
  if (regional_losses.empty()) {
    return global_loss;
  }
  const double sum = std::accumulate(regional_losses.begin(), regional_losses.end(), 0.0);
  return global_loss + sum / static_cast<double>(regional_losses.size());
}

double combined_contrastive_loss(const ContrastiveBatch& global_batch,
                                 std::span<const ContrastiveBatch> regional_batches) {
  std::vector<double> regional;
  regional.reserve(regional_batches.size());
  for (const auto& b : regional_batches) {
    regional.push_back(info_nce(b));
  }
  return combine_contrastive_losses(info_nce(global_batch), regional);
}

std::vector<std::size_t> sample_substitutions(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fraction must be in [0, 1]");
  }
  const auto m = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + uniform_index(rng, n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<RegionalPair> hybrid_sample(std::vector<RegionalPair> pairs, double fraction, std::uint64_t seed) {
  for (std::size_t i : sample_substitutions(pairs.size(), fraction, seed)) {
    pairs[i].full_image = true;
    pairs[i].alpha = 1.0;
  }
  return pairs;
}

void AnswerDistribution::validate() const {
  if (probs.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "answer distribution is empty");
  }
  double sum = 0.0;
  for (const auto& [answer, p] : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "probability of '" + answer + "' outside [0,1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "answer distribution sums to " + std::to_string(sum));
  }
}

double vqa_loss(const AnswerDistribution& dist, const std::string& gold) {
  dist.validate();
  auto it = dist.probs.find(gold);
  if (it == dist.probs.end()) {
    throw Error(ErrorCode::kNotFound, "gold answer '" + gold + "' is not in the vocabulary");
  }
  if (it->second == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return -std::log(it->second);
}

double consistency_loss(const AnswerDistribution& p_full, const AnswerDistribution& p_masked) {
  p_full.validate();
  p_masked.validate();
  if (p_full.probs.size() != p_masked.probs.size()) {
    throw Error(ErrorCode::kInvalidArgument, "answer vocabularies differ");
  }
  double sum = 0.0;
  for (const auto& [answer, p] : p_full.probs) {
    auto it = p_masked.probs.find(answer);
    if (it == p_masked.probs.end()) {
      throw Error(ErrorCode::kInvalidArgument, "answer vocabularies differ at '" + answer + "'");
    }
    const double d = p - it->second;
    sum += d * d;
  }
  return sum;
}

double total_ft_loss(double vqa, double cons) { return vqa + cons; }

ContrastiveBatch contrastive_batch_from_json(const Json& j) {
  const auto& m = jsonl::require(j, "sim_matrix");
  if (!m.is_array()) {
    throw Error(ErrorCode::kMalformedRecord, "sim_matrix must be an array of rows");
  }
  std::vector<std::vector<double>> rows;
  for (const auto& r : m) {
    rows.push_back(r.get<std::vector<double>>());
  }
  return ContrastiveBatch::from_rows(rows, j.value("temperature", kDefaultTemperature));
}

AnswerDistribution answer_distribution_from_json(const Json& j) {
  if (!j.is_object()) {
    throw Error(ErrorCode::kMalformedRecord, "answer distribution must be an object");
  }
  AnswerDistribution d;
  for (const auto& [answer, p] : j.items()) {
    if (!p.is_number()) {
      throw Error(ErrorCode::kMalformedRecord, "probability of '" + answer + "' must be a number");
    }
    d.probs[answer] = p.get<double>();
  }
  d.validate();
  return d;
}

namespace {

Json scalar(std::string_view kind, double value) {
  Json out{{"kind", kind}};
  if (std::isinf(value)) {
    out["value"] = nullptr;
    out["infinite"] = true;
  } else {
    out["value"] = value;
  }
  return out;
}

double vqa_from(const Json& doc) {
  return vqa_loss(answer_distribution_from_json(jsonl::require(doc, "distribution")),
                  jsonl::require_string(doc, "gold"));
}

double cons_from(const Json& doc) {
  return consistency_loss(answer_distribution_from_json(jsonl::require(doc, "p_full")),
                          answer_distribution_from_json(jsonl::require(doc, "p_masked")));
}

}  // namespace

Json evaluate_loss_document(std::string_view kind, const Json& doc) {
  if (kind == "nce") {
    return scalar(kind, info_nce(contrastive_batch_from_json(doc)));
  }
  if (kind == "combined") {
    const auto global = contrastive_batch_from_json(jsonl::require(doc, "global"));
    std::vector<ContrastiveBatch> regional;
    if (auto it = doc.find("regional"); it != doc.end()) {
      for (const auto& b : *it) {
        regional.push_back(contrastive_batch_from_json(b));
      }
    }
    Json out = scalar(kind, combined_contrastive_loss(global, regional));
    out["regional_batches"] = regional.size();
    return out;
  }
  if (kind == "vqa") {
    return scalar(kind, vqa_from(doc));
  }
  if (kind == "cons") {
    return scalar(kind, cons_from(doc));
  }
  if (kind == "total") {
    const double vqa = doc.contains("vqa") ? jsonl::require_number(doc, "vqa") : vqa_from(doc);
    const double cons = doc.contains("cons") ? jsonl::require_number(doc, "cons") : cons_from(doc);
    return scalar(kind, total_ft_loss(vqa, cons));
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown loss kind '" + std::string(kind) + "'");
}

}  // namespace hulirag
