#pragma once

#include <string>
#include <string_view>

#include "hulirag/metrics.hpp"

namespace hulirag {

struct JudgeRequest {
  std::string question;
  std::string answer;
  std::string rendered_prompt;
};

/// Instruction block of the 1-100 judging protocol.
extern const std::string_view kJudgeInstruction;

/// Instruction, a blank line, then the question and the answer between the
/// "[The Start of Assistant's Answer]" / "[The End of Assistant's Answer]"
/// delimiters. The answer is inserted verbatim.
std::string render_judge_prompt(std::string_view question, std::string_view answer);

/// Throws kInvalidArgument for an empty question.
JudgeRequest make_judge_request(std::string question, std::string answer);

/// Integer inside the last "Rating: [[X]]" in `judge_output`. Throws kParse
/// when the pattern is absent, X is not an integer, or X is outside 1..100.
int parse_rating(std::string_view judge_output);

struct RubricWeights {
  double helpfulness = 0.35;
  double accuracy = 0.35;
  double depth = 0.20;
  double clarity = 0.10;
};

/// Weighted 1-10 rubric. Adjustments (bonuses positive, penalties negative)
/// are added to the weighted sum, which is then clamped to [0, 10].
/// Components outside [0, 10] throw kInvalidArgument.
double rubric_score(const RubricScores& scores, double adjustment = 0.0, const RubricWeights& weights = {});
double rubric_score(double h, double a, double d, double c);

/// Parses the rubric judge's reply: exactly four numbers with two decimals
/// each ("8.50 9.25 7.00 9.00"). Throws kParse otherwise.
RubricScores parse_rubric_output(std::string_view text);

}  // namespace hulirag
