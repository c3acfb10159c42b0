#include "hulirag/reweight.hpp"

#include <algorithm>
#include <cmath>

#include "hulirag/error.hpp"
#include "hulirag/random.hpp"

namespace hulirag {

using jsonl::Json;

std::string_view to_string(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::kGlobal: return "global";
    case FusionStrategy::kLocal: return "local";
    case FusionStrategy::kAdd: return "add";
    case FusionStrategy::kMultiply: return "multiply";
    case FusionStrategy::kReweight: return "reweight";
  }
  return "unknown";
}

FusionStrategy parse_fusion_strategy(std::string_view name) {
  for (auto s : {FusionStrategy::kGlobal, FusionStrategy::kLocal, FusionStrategy::kAdd,
                 FusionStrategy::kMultiply, FusionStrategy::kReweight}) {
    if (to_string(s) == name) {
      return s;
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown fusion strategy '" + std::string(name) + "'");
}

double fuse(FusionStrategy strategy, const std::optional<ReweightParams>& params, double s_g, double s_l) {
  switch (strategy) {
    case FusionStrategy::kGlobal: return s_g;
    case FusionStrategy::kLocal: return s_l;
    case FusionStrategy::kAdd: return s_g + s_l;
    case FusionStrategy::kMultiply: return s_g * s_l;
    case FusionStrategy::kReweight:
      if (!params) {
        throw Error(ErrorCode::kInvalidArgument, "reweight fusion requires parameters");
      }
      return params->w_g * s_g + params->w_l * s_l + params->b;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown fusion strategy");
}

void CalibrationConfig::validate() const {
  if (!(learning_rate >= 0.0 && learning_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "learning_rate must be in [0, 1]");
  }
  if (max_epochs < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_epochs must be positive");
  }
  if (!(tolerance > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tolerance must be positive");
  }
}

namespace {

double apply(const ReweightParams& p, const ScorePair& s) { return p.w_g * s.s_global + p.w_l * s.s_local + p.b; }

void accumulate_gradient(const ReweightParams& p, const ScorePair& pos, const ScorePair& neg, double weight,
                         ReweightParams& g) {
  const double rp = -2.0 * (1.0 - apply(p, pos)) * weight;
  const double rn = 2.0 * apply(p, neg) * weight;
  g.w_g += rp * pos.s_global + rn * neg.s_global;
  g.w_l += rp * pos.s_local + rn * neg.s_local;
  g.b += rp + rn;
}

void step(ReweightParams& p, const ReweightParams& g, double lr) {
  p.w_g -= lr * g.w_g;
  p.w_l -= lr * g.w_l;
  p.b -= lr * g.b;
}

void check_finite(double loss, int epoch) {
  if (!std::isfinite(loss)) {
    throw Error(ErrorCode::kDivergence, "calibration diverged at epoch " + std::to_string(epoch));
  }
}

}  // namespace

double reweight_loss(const ReweightParams& params, const CalibrationExample& ex) {
  const double sp = apply(params, ex.pos);
  const double sn = apply(params, ex.neg);
  return (1.0 - sp) * (1.0 - sp) + sn * sn;
}

double mean_reweight_loss(const ReweightParams& params, const std::vector<CalibrationExample>& examples) {
  if (examples.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no calibration examples");
  }
  double sum = 0.0;
  for (const auto& ex : examples) {
    sum += reweight_loss(params, ex);
  }
  return sum / static_cast<double>(examples.size());
}

ReweightParams reweight_gradient(const ReweightParams& params, const std::vector<CalibrationExample>& examples) {
  if (examples.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no calibration examples");
  }
  ReweightParams g{0.0, 0.0, 0.0};
  const double w = 1.0 / static_cast<double>(examples.size());
  for (const auto& ex : examples) {
    accumulate_gradient(params, ex.pos, ex.neg, w, g);
  }
  return g;
}

CalibrationResult calibrate(const std::vector<CalibrationExample>& examples, const CalibrationConfig& config) {
  config.validate();
  if (examples.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no calibration examples");
  }
  CalibrationResult result;
  result.params = kInitialParams;
  double loss = mean_reweight_loss(result.params, examples);
  check_finite(loss, 0);
  result.loss_history.push_back(loss);
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    step(result.params, reweight_gradient(result.params, examples), config.learning_rate);
    const double next = mean_reweight_loss(result.params, examples);
    check_finite(next, epoch);
    result.loss_history.push_back(next);
    result.epochs = epoch;
    const double delta = std::abs(next - loss);
    loss = next;
    if (delta < config.tolerance) {
      break;
    }
  }
  result.final_loss = loss;
  return result;
}

namespace {

double pooled_loss(const ReweightParams& p, const std::vector<CalibrationQuery>& queries) {
  double sum = 0.0;
  for (const auto& q : queries) {
    const double sp = apply(p, q.pos);
    double neg = 0.0;
    for (const auto& n : q.negatives) {
      const double sn = apply(p, n);
      neg += sn * sn;
    }
    sum += (1.0 - sp) * (1.0 - sp) + neg / static_cast<double>(q.negatives.size());
  }
  return sum / static_cast<double>(queries.size());
}

}  // namespace

CalibrationResult calibrate_resampled(const std::vector<CalibrationQuery>& queries, const CalibrationConfig& config) {
  config.validate();
  if (queries.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no calibration queries");
  }
  for (const auto& q : queries) {
    if (q.negatives.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "calibration query '" + q.query_id + "' has no negatives");
    }
  }
  Rng rng(config.seed);
  CalibrationResult result;
  result.params = kInitialParams;
  double loss = pooled_loss(result.params, queries);
  check_finite(loss, 0);
  result.loss_history.push_back(loss);
  const double w = 1.0 / static_cast<double>(queries.size());
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    ReweightParams g{0.0, 0.0, 0.0};
    for (const auto& q : queries) {
      const auto& neg = q.negatives[uniform_index(rng, q.negatives.size())];
      accumulate_gradient(result.params, q.pos, neg, w, g);
    }
    step(result.params, g, config.learning_rate);
    const double next = pooled_loss(result.params, queries);
    check_finite(next, epoch);
    result.loss_history.push_back(next);
    result.epochs = epoch;
    const double delta = std::abs(next - loss);
    loss = next;
    if (delta < config.tolerance) {
      break;
    }
  }
  result.final_loss = loss;
  return result;
}

std::vector<RankedEntry> hard_negative_pool(const RankedList& ranked, const std::unordered_set<std::string>& gt_ids,
                                            std::size_t pool) {
  std::vector<RankedEntry> out;
  for (const auto& e : ranked.entries) {
    if (out.size() == pool) {
      break;
    }
    if (!gt_ids.count(e.image_id)) {
      out.push_back(e);
    }
  }
  return out;
}

std::string select_hard_negative(const RankedList& ranked, const std::unordered_set<std::string>& gt_ids,
                                 std::uint64_t rng_seed) {
  const auto pool = hard_negative_pool(ranked, gt_ids);
  if (pool.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no non-GT candidate for query '" + ranked.query_id + "'");
  }
  Rng rng(rng_seed);
  return pool[uniform_index(rng, pool.size())].image_id;
}

std::vector<double> minmax_normalize(const std::vector<double>& values) {
  if (values.empty()) {
    return {};
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo;
  const double range = *hi - *lo;
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) {
    out.push_back(range > 0.0 ? (v - min) / range : 0.5);
  }
  return out;
}

RankedList RerankedList::ranked() const {
  RankedList list{query_id, {}};
  list.entries.reserve(candidates.size());
  for (const auto& c : candidates) {
    list.entries.push_back({c.image_id, c.fused});
  }
  return list;
}

std::vector<ScoredCandidate> normalized_candidates(const RankedList& shortlist, const LocalScoreLookup& local,
                                                   ScoreNormalization normalization, bool require_local) {
  std::vector<ScoredCandidate> cands;
  cands.reserve(shortlist.entries.size());
  for (const auto& e : shortlist.entries) {
    ScoredCandidate c;
    c.image_id = e.image_id;
    c.s_global = e.score;
    auto it = local.find(e.image_id);
    if (it == local.end() || it->second == nullptr) {
      if (require_local) {
        throw Error(ErrorCode::kNotFound, "no local score for image '" + e.image_id + "' in query '" +
                                              shortlist.query_id + "'");
      }
      c.degenerate = true;
    } else {
      c.s_local = it->second->s_local;
      c.degenerate = it->second->degenerate;
    }
    cands.push_back(std::move(c));
  }

  std::vector<double> globals;
  std::vector<double> locals;
  for (const auto& c : cands) {
    globals.push_back(c.s_global);
    if (!c.degenerate) {
      locals.push_back(c.s_local);
    }
  }
  if (normalization == ScoreNormalization::kMinMax) {
    globals = minmax_normalize(globals);
    locals = minmax_normalize(locals);
  }
  std::size_t li = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    cands[i].norm_global = globals[i];
    cands[i].norm_local = cands[i].degenerate ? 0.0 : locals[li++];
  }
  return cands;
}

RerankedList rerank(const RankedList& shortlist, const LocalScoreLookup& local, FusionStrategy strategy,
                    const std::optional<ReweightParams>& params, ScoreNormalization normalization) {
  if (strategy == FusionStrategy::kReweight && !params) {
    throw Error(ErrorCode::kInvalidArgument, "reweight fusion requires parameters");
  }
  RerankedList out{shortlist.query_id,
                   normalized_candidates(shortlist, local, normalization, strategy != FusionStrategy::kGlobal)};
  for (auto& c : out.candidates) {
    c.fused = fuse(strategy, params, c.norm_global, c.norm_local);
  }
  std::sort(out.candidates.begin(), out.candidates.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.fused != b.fused) {
      return a.fused > b.fused;
    }
    if (a.s_global != b.s_global) {
      return a.s_global > b.s_global;
    }
    return a.image_id < b.image_id;
  });
  for (std::size_t i = 0; i < out.candidates.size(); ++i) {
    out.candidates[i].rank = static_cast<int>(i) + 1;
  }
  return out;
}

RankedList truncate(RankedList list, std::size_t top_n) {
  if (list.entries.size() > top_n) {
    list.entries.resize(top_n);
  }
  return list;
}

std::vector<CalibrationQuery> build_calibration_queries(
    const std::vector<RankedList>& shortlists, const std::unordered_map<std::string, LocalScoreLookup>& local,
    const std::unordered_map<std::string, std::unordered_set<std::string>>& gt, ScoreNormalization normalization,
    std::size_t pool) {
  static const LocalScoreLookup kEmpty;
  std::vector<CalibrationQuery> out;
  for (const auto& list : shortlists) {
    auto git = gt.find(list.query_id);
    if (git == gt.end()) {
      continue;
    }
    auto lit = local.find(list.query_id);
    const auto cands = normalized_candidates(list, lit == local.end() ? kEmpty : lit->second, normalization);
    CalibrationQuery q{list.query_id, {}, {}};
    bool has_pos = false;
    for (const auto& c : cands) {
      const ScorePair pair{c.norm_global, c.norm_local};
      if (git->second.count(c.image_id)) {
        if (!has_pos) {
          q.pos = pair;
          has_pos = true;
        }
      } else if (q.negatives.size() < pool) {
        q.negatives.push_back(pair);
      }
    }
    if (has_pos && !q.negatives.empty()) {
      out.push_back(std::move(q));
    }
  }
  return out;
}

Json to_json(const ReweightParams& p) { return Json{{"w_g", p.w_g}, {"w_l", p.w_l}, {"b", p.b}}; }

ReweightParams reweight_params_from_json(const Json& j) {
  ReweightParams p{jsonl::require_number(j, "w_g"), jsonl::require_number(j, "w_l"), jsonl::require_number(j, "b")};
  if (!std::isfinite(p.w_g) || !std::isfinite(p.w_l) || !std::isfinite(p.b)) {
    throw Error(ErrorCode::kMalformedRecord, "reweight parameters must be finite");
  }
  return p;
}

Json to_json(const CalibrationConfig& c) {
  return Json{{"learning_rate", c.learning_rate},
              {"max_epochs", c.max_epochs},
              {"tolerance", c.tolerance},
              {"seed", c.seed}};
}

CalibrationConfig calibration_config_from_json(const Json& j) {
  CalibrationConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.tolerance = j.value("tolerance", c.tolerance);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

Json to_json(const RerankedList& list) {
  Json entries = Json::array();
  for (const auto& c : list.candidates) {
    entries.push_back(Json{{"image_id", c.image_id},
                           {"score", c.fused},
                           {"s_global", c.s_global},
                           {"s_local", c.s_local},
                           {"degenerate", c.degenerate},
                           {"rank", c.rank}});
  }
  return Json{{"query_id", list.query_id}, {"entries", std::move(entries)}};
}

namespace {

ScorePair pair_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw Error(ErrorCode::kMalformedRecord, "score pair must be [s_global, s_local]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

Json pair_to_json(const ScorePair& p) { return Json::array({p.s_global, p.s_local}); }

}  // namespace

std::vector<CalibrationQuery> read_calibration_queries(const std::string& path) {
  std::vector<CalibrationQuery> out;
  jsonl::for_each(path, [&](const Json& j, std::size_t) {
    CalibrationQuery q;
    q.query_id = jsonl::require_string(j, "query_id");
    q.pos = pair_from_json(jsonl::require(j, "pos"));
    if (j.contains("neg")) {
      q.negatives.push_back(pair_from_json(j.at("neg")));
    } else {
      for (const auto& n : jsonl::require(j, "negatives")) {
        q.negatives.push_back(pair_from_json(n));
      }
    }
    if (q.negatives.empty()) {
      throw Error(ErrorCode::kMalformedRecord, "calibration record has no negative");
    }
    out.push_back(std::move(q));
  });
  return out;
}

void write_calibration_queries(const std::string& path, const std::vector<CalibrationQuery>& queries) {
  std::vector<Json> records;
  for (const auto& q : queries) {
    Json j{{"query_id", q.query_id}, {"pos", pair_to_json(q.pos)}};
    if (q.negatives.size() == 1) {
      j["neg"] = pair_to_json(q.negatives.front());
    } else {
      Json negs = Json::array();
      for (const auto& n : q.negatives) {
        negs.push_back(pair_to_json(n));
      }
      j["negatives"] = std::move(negs);
    }
    records.push_back(std::move(j));
  }
  jsonl::write(path, records);
}

}  // namespace hulirag
