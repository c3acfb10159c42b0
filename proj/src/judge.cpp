#include "hulirag/judge.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>
#include <vector>

#include "hulirag/error.hpp"

namespace hulirag {

const std::string_view kJudgeInstruction =
    "Please act as an impartial judge and evaluate the quality of the response provided by an AI "
    "assistant to the user question displayed below. Your evaluation should consider factors such as "
    "the helpfulness, relevance, accuracy, depth, creativity, and level of detail of the response.\n"
    "Begin your evaluation by providing a short explanation. Be as objective as possible. After "
    "providing your explanation, please rate the response on a scale of 1 to 100, where only integer "
    "scores are allowed, by strictly following this format: \"Rating: [[X]]\", for example: "
    "\"Rating: [[85]]\".";

std::string render_judge_prompt(std::string_view question, std::string_view answer) {
  std::string out(kJudgeInstruction);
  out += "\n\n[Question]\n";
  out += question;
  out += "\n\n[The Start of Assistant's Answer]\n";
  out += answer;
  out += "\n[The End of Assistant's Answer]";
  return out;
}

JudgeRequest make_judge_request(std::string question, std::string answer) {
  if (question.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "judge request needs a question");
  }
  std::string prompt = render_judge_prompt(question, answer);
  return {std::move(question), std::move(answer), std::move(prompt)};
}

int parse_rating(std::string_view text) {
  static constexpr std::string_view kOpen = "Rating: [[";
  const auto start = text.rfind(kOpen);
  if (start == std::string_view::npos) {
    throw Error(ErrorCode::kParse, "no 'Rating: [[X]]' in judge output");
  }
  const auto body_start = start + kOpen.size();
  const auto close = text.find("]]", body_start);
  if (close == std::string_view::npos) {
    throw Error(ErrorCode::kParse, "unterminated rating");
  }
  std::string_view body = text.substr(body_start, close - body_start);
  while (!body.empty() && std::isspace(static_cast<unsigned char>(body.front()))) body.remove_prefix(1);
  while (!body.empty() && std::isspace(static_cast<unsigned char>(body.back()))) body.remove_suffix(1);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
  if (body.empty() || ec != std::errc{} || ptr != body.data() + body.size()) {
    throw Error(ErrorCode::kParse, "rating '" + std::string(body) + "' is not an integer");
  }
  if (value < 1 || value > 100) {
    throw Error(ErrorCode::kParse, "rating " + std::to_string(value) + " outside 1..100");
  }
  return value;
}

double rubric_score(const RubricScores& s, double adjustment, const RubricWeights& w) {
  for (double v : {s.helpfulness, s.accuracy, s.depth, s.clarity}) {
    if (!(v >= 0.0 && v <= 10.0)) {
      throw Error(ErrorCode::kInvalidArgument, "rubric component outside [0, 10]");
    }
  }
  const double weighted =
      w.helpfulness * s.helpfulness + w.accuracy * s.accuracy + w.depth * s.depth + w.clarity * s.clarity;
  return std::clamp(weighted + adjustment, 0.0, 10.0);
}

double rubric_score(double h, double a, double d, double c) { return rubric_score(RubricScores{h, a, d, c}); }

RubricScores parse_rubric_output(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<double> values;
  std::string tok;
  while (in >> tok) {
    const auto dot = tok.find('.');
    const bool digits_ok = dot != std::string::npos && dot > 0 && tok.size() - dot - 1 == 2 &&
                           std::all_of(tok.begin(), tok.end(), [](char c) {
                             return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
                           });
    if (!digits_ok) {
      throw Error(ErrorCode::kParse, "rubric value '" + tok + "' is not a two-decimal number");
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw Error(ErrorCode::kParse, "rubric value '" + tok + "' is not a number");
    }
    values.push_back(v);
  }
  if (values.size() != 4) {
    throw Error(ErrorCode::kParse, "rubric output must hold exactly four numbers");
  }
  RubricScores s{values[0], values[1], values[2], values[3]};
  for (double v : values) {
    if (v > 10.0) {
      throw Error(ErrorCode::kParse, "rubric value above 10");
    }
  }
  return s;
}

}  // namespace hulirag
