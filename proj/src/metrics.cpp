#include "hulirag/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "hulirag/error.hpp"

namespace hulirag {

using jsonl::Json;

int recall_at_k(const RankedList& ranked, const std::unordered_set<std::string>& gt_ids, std::size_t k) {
  if (k == 0) {
    throw Error(ErrorCode::kInvalidArgument, "recall@k: k must be >= 1");
  }
  if (ranked.entries.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "recall@k: empty ranking for '" + ranked.query_id + "'");
  }
  const std::size_t n = std::min(k, ranked.entries.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (gt_ids.count(ranked.entries[i].image_id)) {
      return 1;
    }
  }
  return 0;
}

double mean_recall_at_k(const std::vector<RankedList>& rankings, const std::vector<QueryRecord>& queries,
                        std::size_t k) {
  if (queries.empty()) {
    return 0.0;
  }
  std::unordered_map<std::string, const RankedList*> by_query;
  for (const auto& r : rankings) {
    by_query.emplace(r.query_id, &r);
  }
  std::size_t hits = 0;
  for (const auto& q : queries) {
    auto it = by_query.find(q.query_id);
    if (it == by_query.end() || it->second->entries.empty()) {
      continue;
    }
    hits += recall_at_k(*it->second, {q.gt_image_ids.begin(), q.gt_image_ids.end()}, k);
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

namespace {

std::vector<std::string> normalized_tokens(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (unsigned char c : text) {
    if (c < 0x80 && std::ispunct(c)) {
      continue;
    }
    cleaned.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
  }
  std::istringstream in(cleaned);
  std::vector<std::string> tokens;
  std::string tok;
  while (in >> tok) {
    if (tok != "a" && tok != "an" && tok != "the") {
      tokens.push_back(tok);
    }
  }
  return tokens;
}

}  // namespace

std::string normalize_answer(std::string_view text) {
  std::string out;
  for (const auto& t : normalized_tokens(text)) {
    if (!out.empty()) {
      out += ' ';
    }
    out += t;
  }
  return out;
}

int exact_match(std::string_view pred, std::string_view gold) {
  return normalize_answer(pred) == normalize_answer(gold) ? 1 : 0;
}

double token_f1(std::string_view pred, std::string_view gold) {
  const auto p = normalized_tokens(pred);
  const auto g = normalized_tokens(gold);
  if (p.empty() && g.empty()) {
    return 1.0;
  }
  if (p.empty() || g.empty()) {
    return 0.0;
  }
  std::unordered_map<std::string, int> counts;
  for (const auto& t : g) {
    ++counts[t];
  }
  std::size_t common = 0;
  for (const auto& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) {
    return 0.0;
  }
  const double precision = static_cast<double>(common) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

std::vector<PredictedAnswer> read_answers(const std::string& path) {
  std::vector<PredictedAnswer> out;
  jsonl::for_each(path, [&](const Json& j, std::size_t) {
    out.push_back({jsonl::require_string(j, "query_id"), jsonl::require_string(j, "answer"),
                   j.value("question", std::string{})});
  });
  return out;
}

EvalReport evaluate(const std::vector<RankedList>& rankings, const std::vector<QueryRecord>& queries,
                    const std::vector<std::size_t>& ks, const std::vector<PredictedAnswer>& answers) {
  EvalReport report;
  report.num_queries = queries.size();
  std::vector<std::size_t> sorted_ks = ks;
  std::sort(sorted_ks.begin(), sorted_ks.end());
  for (std::size_t k : sorted_ks) {
    report.recall_at[k] = mean_recall_at_k(rankings, queries, k);
  }
  if (!answers.empty()) {
    std::unordered_map<std::string, const QueryRecord*> by_id;
    for (const auto& q : queries) {
      by_id.emplace(q.query_id, &q);
    }
    double em = 0.0;
    double f1 = 0.0;
    for (const auto& a : answers) {
      auto it = by_id.find(a.query_id);
      if (it == by_id.end() || !it->second->gold_answer) {
        continue;
      }
      em += exact_match(a.answer, *it->second->gold_answer);
      f1 += token_f1(a.answer, *it->second->gold_answer);
      ++report.num_answers;
    }
    if (report.num_answers > 0) {
      report.em = em / static_cast<double>(report.num_answers);
      report.f1 = f1 / static_cast<double>(report.num_answers);
    }
  }
  return report;
}

Json to_json(const EvalReport& report) {
  Json recall = Json::object();
  for (const auto& [k, v] : report.recall_at) {
    recall[std::to_string(k)] = v;
  }
  Json j{{"recall_at", std::move(recall)},
         {"em", report.em ? Json(*report.em) : Json(nullptr)},
         {"f1", report.f1 ? Json(*report.f1) : Json(nullptr)},
         {"num_queries", report.num_queries},
         {"num_answers", report.num_answers}};
  if (!report.judge_scores.empty()) {
    j["judge_scores"] = report.judge_scores;
  }
  if (!report.rubric_scores.empty()) {
    Json rubric = Json::array();
    for (const auto& r : report.rubric_scores) {
      rubric.push_back(Json::array({r.helpfulness, r.accuracy, r.depth, r.clarity}));
    }
    j["rubric_scores"] = std::move(rubric);
  }
  return j;
}

}  // namespace hulirag
