// Command-line front end: one subcommand per pipeline stage plus `run`.

#include <cstdlib>
#include <iostream>
#include <unordered_map>
#include <unordered_set>

#include <CLI11.hpp>

#include "hulirag/corpus.hpp"
#include "hulirag/error.hpp"
#include "hulirag/judge.hpp"
#include "hulirag/metrics.hpp"
#include "hulirag/objectives.hpp"
#include "hulirag/phrases.hpp"
#include "hulirag/pipeline.hpp"
#include "hulirag/region_evidence.hpp"
#include "hulirag/retrieval.hpp"
#include "hulirag/reweight.hpp"
#include "hulirag/service_client.hpp"

namespace {

using namespace hulirag;
using jsonl::Json;

void write_json_out(const std::string& path, const Json& doc) {
  if (path.empty() || path == "-") {
    std::cout << doc.dump(2) << '\n';
  } else {
    jsonl::write_document(path, doc);
  }
}

int cmd_retrieve(const std::string& corpus_path, const std::string& queries_path, std::size_t k,
                 const std::string& out) {
  const auto corpus = load_corpus(corpus_path);
  const auto queries = load_queries(queries_path, corpus_dim(corpus));
  const ExactIndex index(corpus);
  std::vector<RankedList> lists;
  for (const auto& q : queries) lists.push_back(index.search(q, k));
  write_ranked_lists(out, lists);
  return 0;
}

int cmd_decompose(const std::string& queries_path, const std::string& phrases_path, double jaccard_threshold,
                  const std::string& out) {
  std::unordered_map<std::string, std::vector<Phrase>> external;
  if (!phrases_path.empty()) {
    for (auto& qp : read_query_phrases(phrases_path)) external[qp.query_id] = std::move(qp.phrases);
  }
  std::vector<QueryPhrases> result;
  for (const auto& q : load_queries(queries_path)) {
    auto it = external.find(q.query_id);
    auto phrases = it != external.end() ? it->second : extract_phrases(q.text);
    result.push_back({q.query_id, merge_phrases(std::move(phrases), jaccard_threshold)});
  }
  write_query_phrases(out, result);
  return 0;
}

struct ScoreLocalArgs {
  std::string corpus, queries, shortlist, detections, phrases, out;
  RegionEvidenceConfig config;
};

int cmd_score_local(const ScoreLocalArgs& a) {
  auto corpus = load_corpus(a.corpus);
  if (!a.detections.empty()) attach_detections(corpus, read_detections(a.detections), a.config);
  std::unordered_map<std::string, const ImageRecord*> images;
  for (const auto& i : corpus) images[i.image_id] = &i;
  const auto queries = load_queries(a.queries, corpus_dim(corpus));
  std::unordered_map<std::string, const QueryRecord*> by_id;
  for (const auto& q : queries) by_id[q.query_id] = &q;
  std::unordered_map<std::string, std::unordered_set<std::string>> keys;
  if (!a.phrases.empty()) {
    for (const auto& qp : read_query_phrases(a.phrases))
      for (const auto& p : qp.phrases) keys[qp.query_id].insert(p.key());
  }
  std::vector<LocalScore> scores;
  for (const auto& list : read_ranked_lists(a.shortlist)) {
    auto qit = by_id.find(list.query_id);
    if (qit == by_id.end()) throw Error(ErrorCode::kNotFound, "shortlist for unknown query '" + list.query_id + "'");
    const std::unordered_set<std::string>* pk = nullptr;
    if (!a.phrases.empty()) pk = &keys[list.query_id];
    for (const auto& e : list.entries) {
      auto iit = images.find(e.image_id);
      if (iit == images.end()) throw Error(ErrorCode::kNotFound, "unknown image '" + e.image_id + "'");
      scores.push_back(score_image(*iit->second, *qit->second, pk, a.config));
    }
  }
  write_local_scores(a.out, scores);
  return 0;
}

int cmd_calibrate(const std::string& examples, const std::string& config_path, const std::string& out) {
  const CalibrationConfig cfg =
      config_path.empty() ? CalibrationConfig{} : calibration_config_from_json(jsonl::read_document(config_path));
  const auto queries = read_calibration_queries(examples);
  const bool fixed = std::all_of(queries.begin(), queries.end(),
                                 [](const CalibrationQuery& q) { return q.negatives.size() == 1; });
  CalibrationResult result;
  if (fixed) {
    std::vector<CalibrationExample> ex;
    for (const auto& q : queries) ex.push_back({q.query_id, q.pos, q.negatives.front()});
    result = calibrate(ex, cfg);
  } else {
    result = calibrate_resampled(queries, cfg);
  }
  Json doc = to_json(result.params);
  doc["final_loss"] = result.final_loss;
  doc["epochs"] = result.epochs;
  write_json_out(out, doc);
  return 0;
}

int cmd_rerank(const std::string& shortlist, const std::string& local_path, const std::string& strategy_name,
               const std::string& params_path, std::size_t top_n, const std::string& normalization,
               const std::string& out) {
  const auto strategy = parse_fusion_strategy(strategy_name);
  std::optional<ReweightParams> params;
  if (strategy == FusionStrategy::kReweight) {
    if (params_path.empty()) throw Error(ErrorCode::kConfig, "--params is required for reweight");
    params = reweight_params_from_json(jsonl::read_document(params_path));
  }
  std::vector<LocalScore> local;
  if (!local_path.empty()) local = read_local_scores(local_path);
  std::unordered_map<std::string, LocalScoreLookup> idx;
  for (const auto& s : local) idx[s.query_id][s.image_id] = &s;
  const auto norm = normalization == "none" ? ScoreNormalization::kNone : ScoreNormalization::kMinMax;
  std::vector<RankedList> lists;
  for (const auto& list : read_ranked_lists(shortlist)) {
    lists.push_back(truncate(rerank(list, idx[list.query_id], strategy, params, norm).ranked(), top_n));
  }
  write_ranked_lists(out, lists);
  return 0;
}

int cmd_evaluate(const std::string& rankings, const std::string& queries, const std::string& answers,
                 const std::vector<std::size_t>& ks, const std::string& out) {
  std::vector<PredictedAnswer> preds;
  if (!answers.empty()) preds = read_answers(answers);
  const auto report = evaluate(read_ranked_lists(rankings), load_queries(queries), ks, preds);
  write_json_out(out, to_json(report));
  return 0;
}

int cmd_judge(ServiceConfig service, const std::string& answers_path, const std::string& queries_path, int workers,
              const std::string& out) {
  auto answers = read_answers(answers_path);
  if (!queries_path.empty()) {
    std::unordered_map<std::string, std::string> text;
    for (const auto& q : load_queries(queries_path)) text[q.query_id] = q.text;
    for (auto& a : answers) {
      if (a.question.empty()) a.question = text[a.query_id];
    }
  }
  JudgeClient client(std::make_shared<ChatClient>(std::move(service)));
  std::vector<Json> records;
  int failures = 0;
  for (const auto& o : judge_all(client, answers, workers)) {
    Json j{{"query_id", o.query_id}};
    if (o.rating) {
      j["rating"] = *o.rating;
    } else {
      j["error"] = o.error;
      ++failures;
    }
    records.push_back(std::move(j));
  }
  jsonl::write(out, records);
  if (failures > 0) std::cerr << "judge: " << failures << " request(s) failed\n";
  return failures > 0 ? 1 : 0;
}

int cmd_loss(const std::string& kind, const std::string& in, const std::string& out) {
  write_json_out(out, evaluate_loss_document(kind, jsonl::read_document(in)));
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& from) {
  const auto config = load_pipeline_config(config_path);
  const auto report = run_pipeline(config, from);
  std::cout << to_json(report).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Staged multimodal retrieval and reranking engine"};
  app.require_subcommand(1);
  std::function<int()> action;

  std::string corpus, queries, out, shortlist, phrases, detections;
  std::size_t k = 20;
  auto* retrieve = app.add_subcommand("retrieve", "Global top-K shortlist by cosine similarity");
  retrieve->add_option("--corpus", corpus)->required();
  retrieve->add_option("--queries", queries)->required();
  retrieve->add_option("--k", k, "shortlist size")->capture_default_str();
  retrieve->add_option("--out", out)->required();
  retrieve->callback([&] { action = [&] { return cmd_retrieve(corpus, queries, k, out); }; });

  double jaccard_threshold = kDefaultMergeThreshold;
  auto* decompose_cmd = app.add_subcommand("decompose", "Split queries into merged, indexed phrases");
  decompose_cmd->add_option("--queries", queries)->required();
  decompose_cmd->add_option("--phrases", phrases, "externally parsed phrases to use instead of the chunker");
  decompose_cmd->add_option("--jaccard", jaccard_threshold)->capture_default_str();
  decompose_cmd->add_option("--out", out)->required();
  decompose_cmd->callback([&] { action = [&] { return cmd_decompose(queries, phrases, jaccard_threshold, out); }; });

  ScoreLocalArgs sl;
  auto* score_local = app.add_subcommand("score-local", "Alpha-weighted region relevance per shortlisted image");
  score_local->add_option("--corpus", sl.corpus)->required();
  score_local->add_option("--queries", sl.queries)->required();
  score_local->add_option("--shortlist", sl.shortlist)->required();
  score_local->add_option("--detections", sl.detections);
  score_local->add_option("--phrases", sl.phrases, "restrict regions to each query's phrase keys");
  score_local->add_option("--confidence", sl.config.confidence_threshold)->capture_default_str();
  score_local->add_option("--mask-threshold", sl.config.mask_threshold)->capture_default_str();
  score_local->add_option("--epsilon", sl.config.epsilon)->capture_default_str();
  score_local->add_option("--max-regions", sl.config.max_regions)->capture_default_str();
  score_local->add_option("--out", sl.out)->required();
  score_local->callback([&] { action = [&] { return cmd_score_local(sl); }; });

  std::string examples, config_path;
  auto* calibrate_cmd = app.add_subcommand("calibrate", "Fit the three fusion parameters");
  calibrate_cmd->add_option("--examples", examples)->required();
  calibrate_cmd->add_option("--config", config_path);
  calibrate_cmd->add_option("--out", out)->required();
  calibrate_cmd->callback([&] { action = [&] { return cmd_calibrate(examples, config_path, out); }; });

  std::string local_path, strategy = "reweight", params_path, normalization = "minmax";
  std::size_t top_n = 1;
  auto* rerank_cmd = app.add_subcommand("rerank", "Fuse global and local scores and re-sort");
  rerank_cmd->add_option("--shortlist", shortlist)->required();
  rerank_cmd->add_option("--local", local_path);
  rerank_cmd->add_option("--strategy", strategy)
      ->check(CLI::IsMember({"global", "local", "add", "multiply", "reweight"}))
      ->capture_default_str();
  rerank_cmd->add_option("--params", params_path);
  rerank_cmd->add_option("--top-n", top_n)->capture_default_str();
  rerank_cmd->add_option("--normalization", normalization)->check(CLI::IsMember({"minmax", "none"}));
  rerank_cmd->add_option("--out", out)->required();
  rerank_cmd->callback([&] {
    action = [&] { return cmd_rerank(shortlist, local_path, strategy, params_path, top_n, normalization, out); };
  });

  std::string rankings, answers;
  std::vector<std::size_t> ks = {1, 5, 10};
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Recall@K, EM and token F1");
  evaluate_cmd->add_option("--rankings", rankings)->required();
  evaluate_cmd->add_option("--queries", queries)->required();
  evaluate_cmd->add_option("--answers", answers);
  evaluate_cmd->add_option("--k", ks)->delimiter(',');
  evaluate_cmd->add_option("--out", out);
  evaluate_cmd->callback([&] { action = [&] { return cmd_evaluate(rankings, queries, answers, ks, out); }; });

  ServiceConfig service;
  int workers = 4;
  auto* judge_cmd = app.add_subcommand("judge", "Rate answers 1-100 with an external judge model");
  judge_cmd->add_option("--endpoint", service.endpoint)->required();
  judge_cmd->add_option("--answers", answers)->required();
  judge_cmd->add_option("--queries", queries, "query file supplying question text");
  judge_cmd->add_option("--model", service.model)->capture_default_str();
  judge_cmd->add_option("--api-key-env", service.api_key_env)->capture_default_str();
  judge_cmd->add_option("--workers", workers)->capture_default_str();
  judge_cmd->add_option("--out", out)->required();
  judge_cmd->callback([&] {
    service.max_in_flight = workers;
    action = [&] { return cmd_judge(service, answers, queries, workers, out); };
  });

  std::string kind, in;
  auto* loss_cmd = app.add_subcommand("loss", "Evaluate a training objective from a file");
  loss_cmd->add_option("--kind", kind)->required()->check(CLI::IsMember({"nce", "combined", "vqa", "cons", "total"}));
  loss_cmd->add_option("--in", in)->required();
  loss_cmd->add_option("--out", out);
  loss_cmd->callback([&] { action = [&] { return cmd_loss(kind, in, out); }; });

  std::string from = "retrieve";
  auto* run_cmd = app.add_subcommand("run", "Run the whole pipeline from a config file");
  run_cmd->add_option("--config", config_path)->required();
  run_cmd->add_option("--from", from, "first stage to run")
      ->check(CLI::IsMember({"retrieve", "decompose", "score-local", "calibrate", "rerank", "evaluate"}));
  run_cmd->callback([&] { action = [&] { return cmd_run(config_path, from); }; });

  CLI11_PARSE(app, argc, argv);
  try {
    return action();
  } catch (const StageError& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error [" << app.get_subcommands().front()->get_name() << "] (" << to_string(e.code())
              << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
