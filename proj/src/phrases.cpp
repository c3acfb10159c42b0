#include "hulirag/phrases.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include "hulirag/error.hpp"

namespace hulirag {

using jsonl::Json;

namespace {

const std::unordered_set<std::string_view>& stopwords() {
  static const std::unordered_set<std::string_view> words = {
      // determiners, pronouns, question words
      "a", "an", "the", "this", "that", "these", "those", "some", "any", "each", "every", "another",
      "such", "i", "me", "my", "mine", "we", "us", "our", "you", "your", "he", "him", "his", "she",
      "her", "hers", "it", "its", "they", "them", "their", "theirs", "what", "which", "who", "whom",
      "whose", "where", "when", "why", "how", "many", "much", "there", "here", "one", "ones",
      // auxiliaries and common verbs
      "is", "are", "was", "were", "be", "been", "being", "am", "do", "does", "did", "done", "have",
      "has", "had", "can", "could", "will", "would", "shall", "should", "may", "might", "must",
      "wear", "wears", "wore", "worn", "wearing", "hang", "hangs", "hanging", "hung", "hold",
      "holds", "holding", "held", "sit", "sits", "sitting", "stand", "stands", "standing", "show",
      "shows", "shown", "showing", "look", "looks", "looking", "appear", "appears", "see", "seen",
      "hit", "hits", "hitting", "get", "gets", "make", "makes", "made", "use", "uses", "used",
      "contain", "contains", "play", "plays", "playing", "find", "found", "go", "goes",
      // conjunctions and adverbs
      "and", "or", "but", "nor", "so", "yet", "if", "than", "then", "as", "not", "no", "very",
      "also", "just", "only", "too", "more", "most", "less", "both", "either", "neither",
      "whether", "to",
  };
  return words;
}

// Spatial and relational words separate phrases and are not kept as content.
const std::unordered_set<std::string_view>& relations() {
  static const std::unordered_set<std::string_view> words = {
      "near", "behind", "beside", "besides", "between", "above", "below", "under", "underneath",
      "over", "on", "onto", "at", "inside", "outside", "around", "across", "along", "against",
      "toward", "towards", "into", "through", "beneath", "among", "from", "by", "for", "off",
      "about", "during", "after", "before", "within", "without", "upon", "via",
  };
  return words;
}

const std::array<std::array<std::string_view, 3>, 5> kMultiwordRelations = {{
    {"in", "front", "of"},
    {"on", "top", "of"},
    {"next", "to", ""},
    {"close", "to", ""},
    {"in", "between", ""},
}};

const std::unordered_set<std::string_view>& linkers() {
  static const std::unordered_set<std::string_view> words = {"in", "with", "of"};
  return words;
}

enum class TokenKind { kContent, kBreak, kLink };

bool is_word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

}  // namespace

std::string Phrase::key() const {
  return mention_index > 1 ? surface + "#" + std::to_string(mention_index) : surface;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 2 && cur.compare(cur.size() - 2, 2, "'s") == 0) {
      cur.resize(cur.size() - 2);
    }
    while (!cur.empty() && (cur.back() == '-' || cur.back() == '\'')) {
      cur.pop_back();
    }
    if (!cur.empty()) {
      tokens.push_back(std::move(cur));
    }
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_word_char(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if ((c == '-' || c == '\'') && !cur.empty() && i + 1 < text.size() &&
               is_word_char(static_cast<unsigned char>(text[i + 1]))) {
      cur.push_back(static_cast<char>(c));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::string lemmatize(std::string_view word) {
  static const std::unordered_map<std::string_view, std::string_view> irregular = {
      {"men", "man"},     {"women", "woman"}, {"children", "child"}, {"people", "person"},
      {"feet", "foot"},   {"teeth", "tooth"}, {"mice", "mouse"},     {"geese", "goose"},
      {"leaves", "leaf"}, {"knives", "knife"}, {"wolves", "wolf"},   {"shelves", "shelf"},
  };
  if (auto it = irregular.find(word); it != irregular.end()) {
    return std::string(it->second);
  }
  std::string w(word);
  auto ends_with = [&](std::string_view suffix) {
    return w.size() >= suffix.size() && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (w.size() <= 3 || std::isdigit(static_cast<unsigned char>(w.back()))) {
    return w;
  }
  if (ends_with("ss") || ends_with("us") || ends_with("is")) {
    return w;
  }
  if (ends_with("ies") && w.size() > 4) {
    return w.substr(0, w.size() - 3) + "y";
  }
  if (ends_with("sses") || ends_with("xes") || ends_with("ches") || ends_with("shes") ||
      ends_with("zzes")) {
    return w.substr(0, w.size() - 2);
  }
  if (ends_with("s")) {
    return w.substr(0, w.size() - 1);
  }
  return w;
}

std::vector<Phrase> extract_phrases(std::string_view text) {
  if (text.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "extract_phrases: empty text");
  }
  const auto tokens = tokenize(text);
  std::vector<TokenKind> kinds(tokens.size(), TokenKind::kContent);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    bool multi = false;
    for (const auto& rel : kMultiwordRelations) {
      std::size_t len = rel[2].empty() ? 2 : 3;
      if (i + len > tokens.size()) {
        continue;
      }
      bool match = true;
      for (std::size_t k = 0; k < len; ++k) {
        match = match && tokens[i + k] == rel[k];
      }
      if (match) {
        for (std::size_t k = 0; k < len; ++k) {
          kinds[i + k] = TokenKind::kBreak;
        }
        i += len - 1;
        multi = true;
        break;
      }
    }
    if (multi) {
      continue;
    }
    const std::string_view t = tokens[i];
    if (linkers().count(t)) {
      kinds[i] = TokenKind::kLink;
    } else if (stopwords().count(t) || relations().count(t)) {
      kinds[i] = TokenKind::kBreak;
    }
  }

  std::vector<Phrase> phrases;
  Phrase current;
  auto close = [&] {
    if (!current.lexical_set.empty()) {
      current.order = static_cast<int>(phrases.size());
      phrases.push_back(std::move(current));
    }
    current = Phrase{};
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    switch (kinds[i]) {
      case TokenKind::kContent:
        if (!current.surface.empty()) {
          current.surface += ' ';
        }
        current.surface += tokens[i];
        current.lexical_set.insert(lemmatize(tokens[i]));
        break;
      case TokenKind::kLink:
        if (!current.lexical_set.empty() && i + 1 < tokens.size() &&
            kinds[i + 1] == TokenKind::kContent) {
          current.surface += ' ';
          current.surface += tokens[i];
        } else {
          close();
        }
        break;
      case TokenKind::kBreak:
        close();
        break;
    }
  }
  close();
  return phrases;
}

double jaccard(const LexicalSet& a, const LexicalSet& b) {
  if (a.empty() || b.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "jaccard: empty lexical set");
  }
  std::size_t inter = 0;
  for (const auto& w : a) {
    inter += b.count(w);
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Phrase> merge_phrases(std::vector<Phrase> phrases, double threshold) {
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < phrases.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < phrases.size() && !merged; ++j) {
        if (jaccard(phrases[i].lexical_set, phrases[j].lexical_set) <= threshold) {
          continue;
        }
        const std::size_t keep =
            phrases[j].lexical_set.size() > phrases[i].lexical_set.size() ? j : i;
        const std::size_t drop = keep == i ? j : i;
        phrases[keep].lexical_set.insert(phrases[drop].lexical_set.begin(),
                                         phrases[drop].lexical_set.end());
        phrases.erase(phrases.begin() + static_cast<std::ptrdiff_t>(drop));
        merged = true;
      }
    }
  }
  std::unordered_map<std::string, int> seen;
  for (auto& p : phrases) {
    p.mention_index = ++seen[p.surface];
  }
  return phrases;
}

std::vector<Phrase> decompose(std::string_view text, double threshold) {
  return merge_phrases(extract_phrases(text), threshold);
}

Json to_json(const QueryPhrases& qp) {
  Json arr = Json::array();
  for (const auto& p : qp.phrases) {
    arr.push_back(Json{{"surface", p.surface},
                       {"lexical_set", std::vector<std::string>(p.lexical_set.begin(), p.lexical_set.end())},
                       {"mention_index", p.mention_index}});
  }
  return Json{{"query_id", qp.query_id}, {"phrases", std::move(arr)}};
}

QueryPhrases query_phrases_from_json(const Json& j) {
  QueryPhrases qp;
  qp.query_id = jsonl::require_string(j, "query_id");
  const auto& arr = jsonl::require(j, "phrases");
  if (!arr.is_array()) {
    throw Error(ErrorCode::kMalformedRecord, "phrases must be an array");
  }
  int order = 0;
  for (const auto& pj : arr) {
    Phrase p;
    p.surface = jsonl::require_string(pj, "surface");
    for (const auto& w : jsonl::require(pj, "lexical_set")) {
      p.lexical_set.insert(w.get<std::string>());
    }
    if (p.lexical_set.empty()) {
      throw Error(ErrorCode::kMalformedRecord, "phrase '" + p.surface + "' has an empty lexical set");
    }
    p.mention_index = pj.value("mention_index", 1);
    p.order = order++;
    qp.phrases.push_back(std::move(p));
  }
  return qp;
}

std::vector<QueryPhrases> read_query_phrases(const std::string& path) {
  std::vector<QueryPhrases> out;
  jsonl::for_each(path, [&](const Json& j, std::size_t) { out.push_back(query_phrases_from_json(j)); });
  return out;
}

void write_query_phrases(const std::string& path, const std::vector<QueryPhrases>& sets) {
  std::vector<Json> records;
  for (const auto& s : sets) {
    records.push_back(to_json(s));
  }
  jsonl::write(path, records);
}

}  // namespace hulirag
