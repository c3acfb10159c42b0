#include "oracles.hpp"

#include <cmath>
#include <map>
#include <regex>

namespace oracle {

std::vector<int> expand_runs(const hulirag::RleMask& mask) {
  std::vector<int> cells;
  int value = 0;
  for (auto r : mask.runs) {
    for (std::uint32_t i = 0; i < r; ++i) cells.push_back(value);
    value = 1 - value;
  }
  return cells;
}

std::vector<double> alpha_weights(const std::vector<hulirag::RleMask>& masks, double eps) {
  std::vector<std::vector<int>> grids;
  for (const auto& m : masks) grids.push_back(expand_runs(m));
  const std::size_t omega = grids.front().size();
  std::vector<double> alpha(masks.size(), 0.0);
  for (std::size_t p = 0; p < omega; ++p) {
    double total = 0;
    for (const auto& g : grids) total += g[p];
    for (std::size_t k = 0; k < grids.size(); ++k) {
      alpha[k] += grids[k][p] / (total + eps);
    }
  }
  for (auto& a : alpha) a /= static_cast<double>(omega);
  return alpha;
}

std::vector<std::uint32_t> scanline_runs(const std::vector<int>& cells) {
  std::vector<std::uint32_t> runs;
  int current = 0;
  std::uint32_t length = 0;
  for (int c : cells) {
    if (c != current) {
      runs.push_back(length);
      current = c;
      length = 0;
    }
    ++length;
  }
  runs.push_back(length);
  return runs;
}

namespace {

// Rows of the design matrix and targets; row weights fold in the 1/N mean.
void design(const std::vector<hulirag::CalibrationExample>& examples, std::vector<std::array<double, 3>>& rows,
            std::vector<double>& y) {
  for (const auto& e : examples) {
    rows.push_back({e.pos.s_global, e.pos.s_local, 1.0});
    y.push_back(1.0);
    rows.push_back({e.neg.s_global, e.neg.s_local, 1.0});
    y.push_back(0.0);
  }
}

}  // namespace

double least_squares_min_loss(const std::vector<hulirag::CalibrationExample>& examples) {
  std::vector<std::array<double, 3>> rows;
  std::vector<double> y;
  design(examples, rows, y);
  const std::size_t m = rows.size();
  std::vector<std::vector<double>> basis;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> v(m);
    for (std::size_t i = 0; i < m; ++i) v[i] = rows[i][c];
    double original = 0;
    for (double x : v) original += x * x;
    // two passes of modified Gram-Schmidt for stability
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis) {
        double d = 0;
        for (std::size_t i = 0; i < m; ++i) d += q[i] * v[i];
        for (std::size_t i = 0; i < m; ++i) v[i] -= d * q[i];
      }
    }
    double n2 = 0;
    for (double x : v) n2 += x * x;
    if (n2 <= 1e-20 * std::max(1.0, original)) continue;
    const double n = std::sqrt(n2);
    for (auto& x : v) x /= n;
    basis.push_back(std::move(v));
  }
  std::vector<double> r = y;
  for (const auto& q : basis) {
    double d = 0;
    for (std::size_t i = 0; i < m; ++i) d += q[i] * r[i];
    for (std::size_t i = 0; i < m; ++i) r[i] -= d * q[i];
  }
  double sse = 0;
  for (double x : r) sse += x * x;
  return sse / static_cast<double>(examples.size());
}

std::optional<std::array<double, 3>> normal_equations(const std::vector<hulirag::CalibrationExample>& examples) {
  std::vector<std::array<double, 3>> rows;
  std::vector<double> y;
  design(examples, rows, y);
  double a[3][4] = {};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) a[r][c] += rows[i][r] * rows[i][c];
      a[r][3] += rows[i][r] * y[i];
    }
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    }
    if (std::fabs(a[piv][col]) < 1e-12) return std::nullopt;
    for (int c = 0; c < 4; ++c) std::swap(a[col][c], a[piv][c]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
    }
  }
  return std::array<double, 3>{a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]};
}

std::vector<std::string> answer_tokens(const std::string& text) {
  // Python's string.punctuation, spelled out.
  static const std::string kPunct = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
  static const std::string kSpace = " \t\n\r\v\f";
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty() && word != "a" && word != "an" && word != "the") out.push_back(word);
    word.clear();
  };
  for (char ch : text) {
    if (kPunct.find(ch) != std::string::npos) continue;
    if (kSpace.find(ch) != std::string::npos) {
      flush();
      continue;
    }
    word.push_back(ch >= 'A' && ch <= 'Z' ? static_cast<char>(ch - 'A' + 'a') : ch);
  }
  flush();
  return out;
}

double token_f1(const std::string& pred, const std::string& gold) {
  const auto p = answer_tokens(pred);
  const auto g = answer_tokens(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::map<std::string, int> pc, gc;
  for (const auto& t : p) ++pc[t];
  for (const auto& t : g) ++gc[t];
  int common = 0;
  for (const auto& [t, n] : pc) {
    auto it = gc.find(t);
    if (it != gc.end()) common += std::min(n, it->second);
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / p.size();
  const double recall = static_cast<double>(common) / g.size();
  return 2 * precision * recall / (precision + recall);
}

int exact_match(const std::string& pred, const std::string& gold) {
  return answer_tokens(pred) == answer_tokens(gold) ? 1 : 0;
}

std::optional<int> rating(const std::string& text) {
  static const std::regex re(R"(Rating: \[\[(\d+)\]\])");
  std::optional<int> last;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    last = std::stoi((*it)[1].str());
  }
  return last;
}

double info_nce_direct(const std::vector<std::vector<double>>& sims, double tau) {
  double total = 0;
  for (std::size_t i = 0; i < sims.size(); ++i) {
    double denom = 0;
    for (double s : sims[i]) denom += std::exp(s / tau);
    total += -std::log(std::exp(sims[i][i] / tau) / denom);
  }
  return total / static_cast<double>(sims.size());
}

}  // namespace oracle
