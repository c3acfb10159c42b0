#include "hulirag/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <thread>
#include <unordered_map>

#include "hulirag/error.hpp"
#include "hulirag/phrases.hpp"
#include "hulirag/random.hpp"

namespace hulirag {

using jsonl::Json;
namespace fs = std::filesystem;

namespace {

StageError config_error(std::string_view stage, const std::string& message) {
  return StageError(std::string(stage), "", "configuration error: " + message);
}

void require_file(std::string_view stage, const char* what, const fs::path& p) {
  if (!fs::exists(p)) {
    throw config_error(stage, std::string(what) + " file '" + p.string() + "' not found");
  }
}

void check_unit(std::string_view stage, const char* what, double v) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw config_error(stage, std::string(what) + " must be in [0, 1]");
  }
}

bool needs_local(FusionStrategy s) { return s != FusionStrategy::kGlobal; }

}  // namespace

void PipelineConfig::validate() const {
  if (k_shortlist == 0) throw config_error("retrieve", "k_shortlist must be >= 1");
  if (top_n == 0) throw config_error("rerank", "top_n must be >= 1");
  check_unit("score-local", "confidence threshold", thresholds.confidence);
  check_unit("score-local", "mask threshold", thresholds.mask);
  check_unit("decompose", "jaccard threshold", thresholds.jaccard);
  if (!(thresholds.epsilon > 0.0 && thresholds.epsilon < 1.0)) {
    throw config_error("score-local", "epsilon must be in (0, 1)");
  }
  if (max_regions == 0) throw config_error("score-local", "max_regions must be >= 1");
  if (recall_ks.empty() || std::find(recall_ks.begin(), recall_ks.end(), 0u) != recall_ks.end()) {
    throw config_error("evaluate", "recall_ks must be a non-empty list of positive integers");
  }
  if (output_dir.empty()) throw config_error("retrieve", "output_dir is required");
  require_file("retrieve", "corpus", corpus);
  require_file("retrieve", "queries", queries);
  if (phrases) require_file("decompose", "phrases", *phrases);
  if (detections) require_file("score-local", "detections", *detections);
  if (answers) require_file("evaluate", "answers", *answers);
  if (calibration_queries) require_file("retrieve", "calibration queries", *calibration_queries);
  if (fusion == FusionStrategy::kReweight && !reweight_params && !calibration_queries) {
    throw config_error("calibrate", "reweight fusion needs reweight_params or calibration_queries");
  }
  try {
    calibration.validate();
  } catch (const Error& e) {
    throw config_error("calibrate", e.what());
  }
}

RegionEvidenceConfig PipelineConfig::region_config() const {
  return {thresholds.confidence, thresholds.mask, thresholds.epsilon, max_regions};
}

PipelineConfig pipeline_config_from_json(const Json& j, const fs::path& base_dir) {
  auto path = [&](const char* key) -> fs::path {
    fs::path p = jsonl::require_string(j, key);
    return p.is_absolute() ? p : base_dir / p;
  };
  auto opt_path = [&](const char* key) -> std::optional<fs::path> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return path(key);
  };
  PipelineConfig c;
  c.corpus = path("corpus");
  c.queries = path("queries");
  c.detections = opt_path("detections");
  c.phrases = opt_path("phrases");
  c.calibration_queries = opt_path("calibration_queries");
  c.answers = opt_path("answers");
  c.output_dir = path("output_dir");
  c.k_shortlist = j.value("k_shortlist", c.k_shortlist);
  c.top_n = j.value("top_n", c.top_n);
  c.fusion = parse_fusion_strategy(j.value("fusion", std::string(to_string(c.fusion))));
  if (j.contains("reweight_params") && !j.at("reweight_params").is_null()) {
    c.reweight_params = reweight_params_from_json(j.at("reweight_params"));
  }
  const auto norm = j.value("normalization", std::string("minmax"));
  if (norm == "minmax") {
    c.normalization = ScoreNormalization::kMinMax;
  } else if (norm == "none") {
    c.normalization = ScoreNormalization::kNone;
  } else {
    throw Error(ErrorCode::kConfig, "unknown normalization '" + norm + "'");
  }
  if (auto it = j.find("thresholds"); it != j.end()) {
    c.thresholds.confidence = it->value("confidence", c.thresholds.confidence);
    c.thresholds.mask = it->value("mask", c.thresholds.mask);
    c.thresholds.jaccard = it->value("jaccard", c.thresholds.jaccard);
    c.thresholds.epsilon = it->value("epsilon", c.thresholds.epsilon);
  }
  c.max_regions = j.value("max_regions", c.max_regions);
  c.use_phrases = j.value("use_phrases", c.use_phrases);
  if (auto it = j.find("calibration"); it != j.end()) {
    c.calibration = calibration_config_from_json(*it);
  }
  c.seed = j.value("seed", c.seed);
  c.workers = j.value("workers", c.workers);
  if (j.contains("recall_ks")) {
    c.recall_ks = j.at("recall_ks").get<std::vector<std::size_t>>();
  }
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  const Json j = jsonl::read_document(path.string());
  try {
    return pipeline_config_from_json(j, path.parent_path());
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
}

Json to_json(const PipelineConfig& c) {
  auto opt = [](const std::optional<fs::path>& p) { return p ? Json(p->string()) : Json(nullptr); };
  return Json{{"corpus", c.corpus.string()},
              {"queries", c.queries.string()},
              {"detections", opt(c.detections)},
              {"phrases", opt(c.phrases)},
              {"calibration_queries", opt(c.calibration_queries)},
              {"answers", opt(c.answers)},
              {"output_dir", c.output_dir.string()},
              {"k_shortlist", c.k_shortlist},
              {"top_n", c.top_n},
              {"fusion", to_string(c.fusion)},
              {"reweight_params", c.reweight_params ? to_json(*c.reweight_params) : Json(nullptr)},
              {"normalization", c.normalization == ScoreNormalization::kMinMax ? "minmax" : "none"},
              {"thresholds", Json{{"confidence", c.thresholds.confidence},
                                  {"mask", c.thresholds.mask},
                                  {"jaccard", c.thresholds.jaccard},
                                  {"epsilon", c.thresholds.epsilon}}},
              {"max_regions", c.max_regions},
              {"use_phrases", c.use_phrases},
              {"calibration", to_json(c.calibration)},
              {"seed", c.seed},
              {"workers", c.workers},
              {"recall_ks", c.recall_ks}};
}

std::uint64_t stage_seed(std::uint64_t root, std::string_view stage) { return derive_seed(root, stage); }

namespace {

/// Calls fn(i) for i in [0, n) on up to `workers` threads. The first
/// exception is rethrown after all threads finish.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> threads;
  const auto count = static_cast<std::size_t>(std::max(1, workers));
  for (std::size_t t = 1; t < std::min(count, n); ++t) {
    threads.emplace_back(work);
  }
  work();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct QuerySet {
  fs::path queries;
  const char* shortlist;
  const char* phrases;
  const char* local_scores;
};

std::vector<QuerySet> query_sets(const PipelineConfig& c) {
  std::vector<QuerySet> sets{{c.queries, artifacts::kShortlist, artifacts::kPhrases, artifacts::kLocalScores}};
  if (c.calibration_queries && c.fusion == FusionStrategy::kReweight && !c.reweight_params) {
    sets.push_back({*c.calibration_queries, artifacts::kCalibShortlist, artifacts::kCalibPhrases,
                    artifacts::kCalibLocalScores});
  }
  return sets;
}

std::string out(const PipelineConfig& c, const char* name) { return (c.output_dir / name).string(); }

template <typename Fn>
auto in_stage(std::string_view stage, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const RecordError& e) {
    throw StageError(std::string(stage), e.path() + ":" + std::to_string(e.line()), e.what());
  } catch (const std::exception& e) {
    throw StageError(std::string(stage), "", e.what());
  }
}

template <typename Fn>
auto per_record(std::string_view stage, const std::string& record_id, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(std::string(stage), record_id, e.what());
  }
}

void stage_retrieve(const PipelineConfig& c) {
  const auto corpus = load_corpus(c.corpus.string());
  const ExactIndex index(corpus);
  for (const auto& set : query_sets(c)) {
    const auto queries = load_queries(set.queries.string(), corpus_dim(corpus));
    std::vector<RankedList> lists(queries.size());
    parallel_for(queries.size(), c.workers, [&](std::size_t i) {
      lists[i] = per_record("retrieve", queries[i].query_id, [&] { return index.search(queries[i], c.k_shortlist); });
    });
    write_ranked_lists(out(c, set.shortlist), lists);
  }
}

void stage_decompose(const PipelineConfig& c) {
  std::unordered_map<std::string, QueryPhrases> external;
  if (c.phrases) {
    for (auto& qp : read_query_phrases(c.phrases->string())) {
      external.emplace(qp.query_id, std::move(qp));
    }
  }
  for (const auto& set : query_sets(c)) {
    const auto queries = load_queries(set.queries.string());
    std::vector<QueryPhrases> result(queries.size());
    parallel_for(queries.size(), c.workers, [&](std::size_t i) {
      const auto& q = queries[i];
      result[i] = per_record("decompose", q.query_id, [&] {
        auto it = external.find(q.query_id);
        auto extracted = it != external.end() ? it->second.phrases : extract_phrases(q.text);
        return QueryPhrases{q.query_id, merge_phrases(std::move(extracted), c.thresholds.jaccard)};
      });
    });
    write_query_phrases(out(c, set.phrases), result);
  }
}

void stage_score_local(const PipelineConfig& c) {
  auto corpus = load_corpus(c.corpus.string());
  const auto rc = c.region_config();
  if (c.detections) {
    attach_detections(corpus, read_detections(c.detections->string()), rc);
  } else if (needs_local(c.fusion) &&
             std::none_of(corpus.begin(), corpus.end(), [](const ImageRecord& i) { return !i.regions.empty(); })) {
    throw config_error("score-local", "no region evidence: the corpus has no regions and no detections file is configured");
  }
  std::unordered_map<std::string, const ImageRecord*> images;
  for (const auto& img : corpus) images.emplace(img.image_id, &img);

  for (const auto& set : query_sets(c)) {
    const auto queries = load_queries(set.queries.string(), corpus_dim(corpus));
    std::unordered_map<std::string, const QueryRecord*> by_id;
    for (const auto& q : queries) by_id.emplace(q.query_id, &q);
    std::unordered_map<std::string, std::unordered_set<std::string>> keys;
    if (c.use_phrases) {
      for (const auto& qp : read_query_phrases(out(c, set.phrases))) {
        auto& k = keys[qp.query_id];
        for (const auto& p : qp.phrases) k.insert(p.key());
      }
    }
    const auto shortlists = read_ranked_lists(out(c, set.shortlist));
    std::vector<std::vector<LocalScore>> scores(shortlists.size());
    parallel_for(shortlists.size(), c.workers, [&](std::size_t i) {
      const auto& list = shortlists[i];
      per_record("score-local", list.query_id, [&] {
        auto qit = by_id.find(list.query_id);
        if (qit == by_id.end()) throw Error(ErrorCode::kNotFound, "shortlist for unknown query");
        const std::unordered_set<std::string>* phrase_keys = nullptr;
        static const std::unordered_set<std::string> kNone;
        if (c.use_phrases) {
          auto kit = keys.find(list.query_id);
          phrase_keys = kit == keys.end() ? &kNone : &kit->second;
        }
        for (const auto& e : list.entries) {
          auto iit = images.find(e.image_id);
          if (iit == images.end()) throw Error(ErrorCode::kNotFound, "unknown image '" + e.image_id + "'");
          scores[i].push_back(score_image(*iit->second, *qit->second, phrase_keys, rc));
        }
        return 0;
      });
    });
    std::vector<LocalScore> flat;
    for (auto& s : scores) std::move(s.begin(), s.end(), std::back_inserter(flat));
    write_local_scores(out(c, set.local_scores), flat);
  }
}

using LocalIndex = std::unordered_map<std::string, LocalScoreLookup>;

LocalIndex index_local(const std::vector<LocalScore>& scores) {
  LocalIndex idx;
  for (const auto& s : scores) idx[s.query_id][s.image_id] = &s;
  return idx;
}

void stage_calibrate(const PipelineConfig& c) {
  const std::string params_path = out(c, artifacts::kParams);
  if (c.fusion != FusionStrategy::kReweight) {
    std::remove(params_path.c_str());
    return;
  }
  if (c.reweight_params) {
    Json doc = to_json(*c.reweight_params);
    doc["source"] = "config";
    jsonl::write_document(params_path, doc);
    return;
  }
  const auto queries = load_queries(c.calibration_queries->string());
  std::unordered_map<std::string, std::unordered_set<std::string>> gt;
  for (const auto& q : queries) gt[q.query_id].insert(q.gt_image_ids.begin(), q.gt_image_ids.end());
  const auto shortlists = read_ranked_lists(out(c, artifacts::kCalibShortlist));
  const auto local = read_local_scores(out(c, artifacts::kCalibLocalScores));
  const auto cal_queries = build_calibration_queries(shortlists, index_local(local), gt, c.normalization);
  if (cal_queries.empty()) {
    throw StageError("calibrate", "", "no calibration query has its ground truth in the shortlist");
  }
  write_calibration_queries(out(c, artifacts::kCalibrationExamples), cal_queries);
  CalibrationConfig cc = c.calibration;
  cc.seed = stage_seed(c.seed, "calibrate");
  const auto result = calibrate_resampled(cal_queries, cc);
  Json doc = to_json(result.params);
  doc["source"] = "calibrated";
  doc["final_loss"] = result.final_loss;
  doc["epochs"] = result.epochs;
  doc["num_queries"] = cal_queries.size();
  jsonl::write_document(params_path, doc);
}

void stage_rerank(const PipelineConfig& c) {
  std::optional<ReweightParams> params;
  if (c.fusion == FusionStrategy::kReweight) {
    params = reweight_params_from_json(jsonl::read_document(out(c, artifacts::kParams)));
  }
  const auto shortlists = read_ranked_lists(out(c, artifacts::kShortlist));
  std::vector<LocalScore> local;
  if (needs_local(c.fusion)) local = read_local_scores(out(c, artifacts::kLocalScores));
  const auto idx = index_local(local);
  static const LocalScoreLookup kEmpty;
  std::vector<RerankedList> reranked(shortlists.size());
  parallel_for(shortlists.size(), c.workers, [&](std::size_t i) {
    reranked[i] = per_record("rerank", shortlists[i].query_id, [&] {
      auto it = idx.find(shortlists[i].query_id);
      return rerank(shortlists[i], it == idx.end() ? kEmpty : it->second, c.fusion, params, c.normalization);
    });
  });
  std::vector<Json> full;
  std::vector<RankedList> top;
  for (const auto& r : reranked) {
    full.push_back(to_json(r));
    top.push_back(truncate(r.ranked(), c.top_n));
  }
  jsonl::write(out(c, artifacts::kReranked), full);
  write_ranked_lists(out(c, artifacts::kTopN), top);
}

EvalReport stage_evaluate(const PipelineConfig& c) {
  const auto rankings = read_ranked_lists(out(c, artifacts::kReranked));
  const auto queries = load_queries(c.queries.string());
  std::vector<PredictedAnswer> answers;
  if (c.answers) answers = read_answers(c.answers->string());
  auto report = evaluate(rankings, queries, c.recall_ks, answers);
  jsonl::write_document(out(c, artifacts::kReport), to_json(report));
  return report;
}

std::size_t stage_index(std::string_view stage) {
  for (std::size_t i = 0; i < std::size(kStages); ++i) {
    if (kStages[i] == stage) return i;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown stage '" + std::string(stage) + "'");
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void run_stage(const PipelineConfig& c, std::string_view stage) {
  fs::create_directories(c.output_dir);
  switch (stage_index(stage)) {
    case 0: in_stage(stage, [&] { stage_retrieve(c); return 0; }); break;
    case 1: in_stage(stage, [&] { stage_decompose(c); return 0; }); break;
    case 2: in_stage(stage, [&] { stage_score_local(c); return 0; }); break;
    case 3: in_stage(stage, [&] { stage_calibrate(c); return 0; }); break;
    case 4: in_stage(stage, [&] { stage_rerank(c); return 0; }); break;
    case 5: in_stage(stage, [&] { stage_evaluate(c); return 0; }); break;
  }
}

EvalReport run_pipeline(const PipelineConfig& c, std::string_view from_stage) {
  c.validate();
  const std::size_t first = stage_index(from_stage);
  fs::create_directories(c.output_dir);
  Json timings = Json::object();
  EvalReport report;
  for (std::size_t i = first; i < std::size(kStages); ++i) {
    const auto start = std::chrono::steady_clock::now();
    if (kStages[i] == "evaluate") {
      report = in_stage("evaluate", [&] { return stage_evaluate(c); });
    } else {
      run_stage(c, kStages[i]);
    }
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    timings[std::string(kStages[i])] = ms;
  }
  Json seeds = Json::object();
  for (auto s : kStages) seeds[std::string(s)] = stage_seed(c.seed, s);
  const Json config_json = to_json(c);
  jsonl::write_document(out(c, artifacts::kManifest),
                        Json{{"config_hash", hex64(fnv1a(config_json.dump()))},
                             {"config", config_json},
                             {"seed", c.seed},
                             {"stage_seeds", seeds},
                             {"first_stage", from_stage},
                             {"timings_ms", timings}});
  return report;
}

}  // namespace hulirag
