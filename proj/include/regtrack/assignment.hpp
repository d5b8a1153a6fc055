#pragma once

#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

namespace regtrack {

/// Marks a pairing that must never be selected.
inline constexpr double kForbidden = std::numeric_limits<double>::infinity();

/// Dense row-major cost matrix. Entries are finite or +infinity.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  static CostMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  CostMatrix transposed() const;
  /// Throws std::invalid_argument on NaN or -infinity entries.
  void validate() const;

 private:
  std::size_t rows_{0};
  std::size_t cols_{0};
  std::vector<double> data_;
};

struct Match {
  std::size_t row;
  std::size_t col;

  friend bool operator==(const Match&, const Match&) = default;
};

/// Minimum-cost assignment (shortest augmenting path Hungarian method).
///
/// Among all matchings of size min(rows, cols) the solver first minimises the
/// number of forbidden pairs and then the total finite cost. Forbidden pairs
/// are dropped from the result, so a row whose only options are forbidden
/// stays unmatched. Result is sorted by row.
std::vector<Match> solve_min_cost(const CostMatrix& costs);

/// Exhaustive reference with the same objective as solve_min_cost.
/// Throws std::length_error when min(rows, cols) > 8 or max(rows, cols) > 10.
std::vector<Match> brute_force_min_cost(const CostMatrix& costs);

/// Sum of the selected entries, in the order given.
double total_cost(const CostMatrix& costs, std::span<const Match> matching);

}  // namespace regtrack
