#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hulirag/corpus.hpp"
#include "hulirag/retrieval.hpp"

namespace hulirag {

/// 1 when any ground-truth id is among the first k entries, else 0.
int recall_at_k(const RankedList& ranked, const std::unordered_set<std::string>& gt_ids, std::size_t k);

/// Mean recall@k over `queries`. A query without a ranking counts as a miss.
double mean_recall_at_k(const std::vector<RankedList>& rankings, const std::vector<QueryRecord>& queries,
                        std::size_t k);

/// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace.
std::string normalize_answer(std::string_view text);

int exact_match(std::string_view pred, std::string_view gold);

/// Token-multiset F1 over normalized answers. Both empty gives 1, one empty 0.
double token_f1(std::string_view pred, std::string_view gold);

struct RubricScores {
  double helpfulness = 0.0;
  double accuracy = 0.0;
  double depth = 0.0;
  double clarity = 0.0;
};

struct EvalReport {
  std::map<std::size_t, double> recall_at;
  std::optional<double> em;
  std::optional<double> f1;
  std::size_t num_queries = 0;
  std::size_t num_answers = 0;
  std::vector<int> judge_scores;
  std::vector<RubricScores> rubric_scores;
};

struct PredictedAnswer {
  std::string query_id;
  std::string answer;
  std::string question;  // optional; used by the judge
};

std::vector<PredictedAnswer> read_answers(const std::string& path);

/// Recall at each k over the rankings; EM and F1 over answers whose query has
/// a gold answer.
EvalReport evaluate(const std::vector<RankedList>& rankings, const std::vector<QueryRecord>& queries,
                    const std::vector<std::size_t>& ks, const std::vector<PredictedAnswer>& answers = {});

jsonl::Json to_json(const EvalReport& report);

}  // namespace hulirag
