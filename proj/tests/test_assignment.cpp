#include <gtest/gtest.h>

#include <set>

#include "regtrack/assignment.hpp"
#include "regtrack/rng.hpp"

using namespace regtrack;

namespace {

CostMatrix random_matrix(KeyedRng& rng, std::size_t r, std::size_t c, double forbid_p) {
  CostMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      // Small integer costs make ties common; exact sums stay exact.
      m(i, j) = rng.bernoulli(forbid_p) ? kForbidden : static_cast<double>(rng.uniform_int(0, 9));
    }
  }
  return m;
}

std::size_t forbidden_count(const CostMatrix& m, std::span<const Match> matching) {
  std::size_t n = 0;
  for (const auto& p : matching) {
    n += m(p.row, p.col) == kForbidden;
  }
  return n;
}

void expect_proper(const CostMatrix& m, const std::vector<Match>& matching) {
  std::set<std::size_t> rows, cols;
  for (const auto& p : matching) {
    EXPECT_LT(p.row, m.rows());
    EXPECT_LT(p.col, m.cols());
    EXPECT_TRUE(rows.insert(p.row).second);
    EXPECT_TRUE(cols.insert(p.col).second);
    EXPECT_NE(m(p.row, p.col), kForbidden);
  }
}

}  // namespace

TEST(Hungarian, SingleCell) {
  EXPECT_EQ(solve_min_cost(CostMatrix::from_rows({{0}})), (std::vector<Match>{{0, 0}}));
}

TEST(Hungarian, IdentityOptimal) {
  const auto m = CostMatrix::from_rows({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
  EXPECT_EQ(solve_min_cost(m), (std::vector<Match>{{0, 0}, {1, 1}, {2, 2}}));
}

TEST(Hungarian, TwoByTwo) {
  const auto m = CostMatrix::from_rows({{1, 2}, {3, 1}});
  const auto r = solve_min_cost(m);
  EXPECT_EQ(r, (std::vector<Match>{{0, 0}, {1, 1}}));
  EXPECT_EQ(total_cost(m, r), 2.0);
}

TEST(Hungarian, EmptyMatrices) {
  EXPECT_TRUE(solve_min_cost(CostMatrix()).empty());
  EXPECT_TRUE(solve_min_cost(CostMatrix(0, 4)).empty());
  EXPECT_TRUE(solve_min_cost(CostMatrix(3, 0)).empty());
}

TEST(Hungarian, RectangularSizes) {
  const auto wide = CostMatrix::from_rows({{5, 1, 9}, {2, 8, 7}});
  EXPECT_EQ(solve_min_cost(wide), (std::vector<Match>{{0, 1}, {1, 0}}));
  const auto tall = wide.transposed();
  EXPECT_EQ(solve_min_cost(tall), (std::vector<Match>{{0, 1}, {1, 0}}));
}

TEST(Hungarian, ForbiddenRowStaysUnmatched) {
  const auto m = CostMatrix::from_rows({{kForbidden, kForbidden}, {1, 2}});
  EXPECT_EQ(solve_min_cost(m), (std::vector<Match>{{1, 0}}));
}

TEST(Hungarian, PrefersMoreFinitePairsOverLowerCost) {
  // Taking (0,0) alone is cheap but leaves row 1 without an option.
  const auto m = CostMatrix::from_rows({{0, 100}, {1, kForbidden}});
  EXPECT_EQ(solve_min_cost(m), (std::vector<Match>{{0, 1}, {1, 0}}));
}

TEST(Hungarian, RejectsNaN) {
  auto m = CostMatrix::from_rows({{0, NAN}});
  EXPECT_THROW(m.validate(), std::invalid_argument);
  EXPECT_THROW(solve_min_cost(m), std::invalid_argument);
}

TEST(BruteForce, Examples) {
  EXPECT_EQ(brute_force_min_cost(CostMatrix::from_rows({{0}})), (std::vector<Match>{{0, 0}}));
  const auto m = CostMatrix::from_rows({{1, 2}, {3, 1}});
  EXPECT_EQ(total_cost(m, brute_force_min_cost(m)), 2.0);
  EXPECT_TRUE(brute_force_min_cost(CostMatrix(0, 5)).empty());
}

TEST(BruteForce, RejectsLargeInputs) {
  EXPECT_THROW(brute_force_min_cost(CostMatrix(9, 9)), std::length_error);
  EXPECT_NO_THROW(brute_force_min_cost(CostMatrix(8, 8)));
}

TEST(Hungarian, MatchesBruteForceOnRandomMatrices) {
  KeyedRng rng(77);
  for (int rep = 0; rep < 2000; ++rep) {
    const auto r = static_cast<std::size_t>(rng.uniform_int(0, 6));
    const auto c = static_cast<std::size_t>(rng.uniform_int(0, 6));
    const double forbid = rep % 3 == 0 ? 0.3 : 0.0;
    const auto m = random_matrix(rng, r, c, forbid);
    const auto h = solve_min_cost(m);
    const auto b = brute_force_min_cost(m);
    expect_proper(m, h);
    ASSERT_EQ(h.size(), b.size()) << "instance " << rep;
    ASSERT_EQ(total_cost(m, h), total_cost(m, b)) << "instance " << rep;
    ASSERT_EQ(forbidden_count(m, h), 0u);
  }
}

TEST(Hungarian, RowConstantShiftsOptimumByConstant) {
  KeyedRng rng(78);
  for (int rep = 0; rep < 300; ++rep) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const auto c = static_cast<std::size_t>(rng.uniform_int(n, 6));
    auto m = random_matrix(rng, n, c, 0.0);
    const double before = total_cost(m, solve_min_cost(m));
    const auto row = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(n) - 1));
    for (std::size_t j = 0; j < c; ++j) {
      m(row, j) += 7.0;
    }
    EXPECT_EQ(total_cost(m, solve_min_cost(m)), before + 7.0);
  }
}
