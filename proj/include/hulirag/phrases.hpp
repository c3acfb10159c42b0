#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hulirag/jsonl.hpp"

namespace hulirag {

using LexicalSet = std::set<std::string>;

/// A minimal noun phrase with its lemmatized content words.
struct Phrase {
  std::string surface;
  LexicalSet lexical_set;
  int order = 0;
  int mention_index = 1;

  /// Key linking detections to this phrase: the surface, suffixed with
  /// "#n" for repeated mentions n >= 2.
  std::string key() const;

  friend bool operator==(const Phrase&, const Phrase&) = default;
};

inline constexpr double kDefaultMergeThreshold = 0.7;

/// Lowercased word tokens; possessive 's is dropped.
std::vector<std::string> tokenize(std::string_view text);

/// Suffix-stripping lemmatizer for plural nouns plus a small irregular table.
std::string lemmatize(std::string_view word);

/// Rule-based chunker. Content words form chunks; stopwords and spatial
/// relation words delimit them; "in", "with" and "of" join two content words
/// into one phrase ("man in blue"). Returns phrases in first-occurrence order
/// with mention_index 1; text without content words yields an empty list.
std::vector<Phrase> extract_phrases(std::string_view text);

/// |a ∩ b| / |a ∪ b|. Throws kInvalidArgument if either set is empty.
double jaccard(const LexicalSet& a, const LexicalSet& b);

/// Merges any pair whose Jaccard overlap exceeds `threshold` until none is
/// left. The phrase with the larger lexical set survives (the earlier one on
/// ties) and absorbs the other's words. Surviving phrases that share a
/// surface are then re-indexed 1..m in order.
std::vector<Phrase> merge_phrases(std::vector<Phrase> phrases,
                                  double threshold = kDefaultMergeThreshold);

/// extract_phrases followed by merge_phrases.
std::vector<Phrase> decompose(std::string_view text, double threshold = kDefaultMergeThreshold);

struct QueryPhrases {
  std::string query_id;
  std::vector<Phrase> phrases;

  friend bool operator==(const QueryPhrases&, const QueryPhrases&) = default;
};

jsonl::Json to_json(const QueryPhrases& qp);
QueryPhrases query_phrases_from_json(const jsonl::Json& j);
std::vector<QueryPhrases> read_query_phrases(const std::string& path);
void write_query_phrases(const std::string& path, const std::vector<QueryPhrases>& sets);

}  // namespace hulirag
