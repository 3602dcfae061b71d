#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

#include "reposim/matching.hpp"

using namespace reposim;

namespace {

// Factorial enumeration over the smaller side; exact reference optimum.
double brute_force_min(const Eigen::MatrixXd& cost) {
  int rows = static_cast<int>(cost.rows());
  int cols = static_cast<int>(cost.cols());
  Eigen::MatrixXd m = cost;
  if (rows > cols) m = cost.transpose();
  int n = static_cast<int>(m.rows()), k = static_cast<int>(m.cols());
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double tot = 0;
    for (int i = 0; i < n; ++i) tot += m(i, perm[i]);
    best = std::min(best, tot);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("degenerate shapes") {
  CHECK(min_cost_assignment(Eigen::MatrixXd(0, 0)).row_to_col.empty());
  CHECK(min_cost_assignment(Eigen::MatrixXd(3, 0)).row_to_col ==
        std::vector<int>{-1, -1, -1});

  Eigen::MatrixXd one(1, 1);
  one << 4.2;
  auto a = min_cost_assignment(one);
  CHECK(a.row_to_col == std::vector<int>{0});
  CHECK(a.total_cost == 4.2);
}

TEST_CASE("2x2 example") {
  Eigen::MatrixXd c(2, 2);
  c << 1, 2, 2, 1;
  auto a = min_cost_assignment(c);
  CHECK(a.row_to_col == std::vector<int>{0, 1});
  CHECK(a.total_cost == 2.0);
}

TEST_CASE("assignment is a matching on the smaller side") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 100);
  for (int trial = 0; trial < 50; ++trial) {
    int rows = 1 + static_cast<int>(rng() % 9);
    int cols = 1 + static_cast<int>(rng() % 9);
    Eigen::MatrixXd c(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) c(i, j) = u(rng);
    auto a = min_cost_assignment(c);
    int matched = 0;
    std::vector<char> col_used(cols, 0);
    for (int i = 0; i < rows; ++i) {
      int j = a.row_to_col[i];
      if (j < 0) continue;
      ++matched;
      CHECK(j < cols);
      CHECK(!col_used[j]);
      col_used[j] = 1;
    }
    CHECK(matched == std::min(rows, cols));
  }
}

TEST_CASE("optimal on 100 random instances up to 7x7") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> u(0, 1000);
  auto start = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 100; ++trial) {
    int rows = 1 + static_cast<int>(rng() % 7);
    int cols = 1 + static_cast<int>(rng() % 7);
    Eigen::MatrixXd c(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) c(i, j) = u(rng);
    auto a = min_cost_assignment(c);
    CHECK(a.total_cost == doctest::Approx(brute_force_min(c)).epsilon(1e-12));
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(secs < 1.0);
}

TEST_CASE("handles ties and negative costs") {
  Eigen::MatrixXd c(3, 3);
  c << 5, 5, 5, 5, 5, 5, 5, 5, 5;
  auto a = min_cost_assignment(c);
  CHECK(a.total_cost == 15.0);

  Eigen::MatrixXd neg(2, 3);
  neg << -4, 0, 1, 2, -3, 5;
  auto b = min_cost_assignment(neg);
  CHECK(b.total_cost == doctest::Approx(-7.0));
  CHECK(b.row_to_col == std::vector<int>{0, 1});
}

TEST_CASE("larger instances stay optimal against a greedy lower bound") {
  // sanity: optimum <= cost of identity assignment and >= sum of row minima
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0, 10);
  for (int trial = 0; trial < 10; ++trial) {
    int n = 40;
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = u(rng);
    auto a = min_cost_assignment(c);
    double diag = c.diagonal().sum();
    double row_min = c.rowwise().minCoeff().sum();
    CHECK(a.total_cost <= diag + 1e-9);
    CHECK(a.total_cost >= row_min - 1e-9);
  }
}
