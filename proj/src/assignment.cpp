#include "regtrack/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace regtrack {

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

CostMatrix CostMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  CostMatrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) {
      throw std::invalid_argument("CostMatrix: ragged rows");
    }
    std::size_t j = 0;
    for (double v : row) {
      m(i, j++) = v;
    }
    ++i;
  }
  return m;
}

CostMatrix CostMatrix::transposed() const {
  CostMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) {
      t(j, i) = (*this)(i, j);
    }
  }
  return t;
}

void CostMatrix::validate() const {
  for (double v : data_) {
    if (std::isnan(v) || v == -kForbidden) {
      throw std::invalid_argument("CostMatrix: entries must be finite or +infinity");
    }
  }
}

namespace {

// Cost ordered first by the number of forbidden pairs, then by finite sum.
// Keeps forbidden entries out of the floating-point sum entirely.
struct LexCost {
  long forbidden{0};
  double value{0.0};

  LexCost operator+(const LexCost& o) const { return {forbidden + o.forbidden, value + o.value}; }
  LexCost operator-(const LexCost& o) const { return {forbidden - o.forbidden, value - o.value}; }
  bool operator<(const LexCost& o) const {
    return forbidden != o.forbidden ? forbidden < o.forbidden : value < o.value;
  }
};

constexpr LexCost kLexInfinity{std::numeric_limits<long>::max() / 4, 0.0};

LexCost lex(double c) { return std::isinf(c) ? LexCost{1, 0.0} : LexCost{0, c}; }

// Requires rows <= cols. Returns the column assigned to each row.
std::vector<std::size_t> hungarian_rows_le_cols(const CostMatrix& a) {
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();
  // 1-based potentials and matching, column 0 is the virtual root.
  std::vector<LexCost> u(n + 1), v(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<LexCost> minv(m + 1, kLexInfinity);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      LexCost delta = kLexInfinity;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) {
          continue;
        }
        const LexCost cur = lex(a(i0 - 1, j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] = u[p[j]] + delta;
          v[j] = v[j] - delta;
        } else {
          minv[j] = minv[j] - delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) {
      row_to_col[p[j] - 1] = j - 1;
    }
  }
  return row_to_col;
}

}  // namespace

std::vector<Match> solve_min_cost(const CostMatrix& costs) {
  costs.validate();
  std::vector<Match> out;
  if (costs.empty()) {
    return out;
  }
  const bool transpose = costs.rows() > costs.cols();
  const CostMatrix work = transpose ? costs.transposed() : costs;
  const auto row_to_col = hungarian_rows_le_cols(work);
  for (std::size_t r = 0; r < row_to_col.size(); ++r) {
    const std::size_t c = row_to_col[r];
    if (std::isinf(work(r, c))) {
      continue;
    }
    out.push_back(transpose ? Match{c, r} : Match{r, c});
  }
  std::sort(out.begin(), out.end(), [](const Match& a, const Match& b) { return a.row < b.row; });
  return out;
}

namespace {

struct BruteSearch {
  const CostMatrix& m;
  std::vector<std::size_t> current;
  std::vector<bool> col_used;
  std::vector<std::size_t> best;
  LexCost best_cost = kLexInfinity;

  void recurse(std::size_t row, LexCost acc) {
    if (row == m.rows()) {
      if (acc < best_cost) {
        best_cost = acc;
        best = current;
      }
      return;
    }
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (col_used[c]) {
        continue;
      }
      col_used[c] = true;
      current[row] = c;
      recurse(row + 1, acc + lex(m(row, c)));
      col_used[c] = false;
    }
  }
};

}  // namespace

std::vector<Match> brute_force_min_cost(const CostMatrix& costs) {
  costs.validate();
  if (std::min(costs.rows(), costs.cols()) > 8 || std::max(costs.rows(), costs.cols()) > 10) {
    throw std::length_error("brute_force_min_cost: matrix exceeds enumeration cap");
  }
  std::vector<Match> out;
  if (costs.empty()) {
    return out;
  }
  const bool transpose = costs.rows() > costs.cols();
  const CostMatrix work = transpose ? costs.transposed() : costs;
  BruteSearch search{work, std::vector<std::size_t>(work.rows(), 0),
                     std::vector<bool>(work.cols(), false), {}, kLexInfinity};
  search.recurse(0, LexCost{});
  for (std::size_t r = 0; r < search.best.size(); ++r) {
    const std::size_t c = search.best[r];
    if (std::isinf(work(r, c))) {
      continue;
    }
    out.push_back(transpose ? Match{c, r} : Match{r, c});
  }
  std::sort(out.begin(), out.end(), [](const Match& a, const Match& b) { return a.row < b.row; });
  return out;
}

double total_cost(const CostMatrix& costs, std::span<const Match> matching) {
  double sum = 0.0;
  for (const auto& mt : matching) {
    sum += costs(mt.row, mt.col);
  }
  return sum;
}

}  // namespace regtrack
