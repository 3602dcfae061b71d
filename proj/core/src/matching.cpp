#include "reposim/matching.hpp"

#include <limits>

namespace reposim {

namespace {

// Shortest augmenting path formulation; expects rows <= cols. Returns
// col_of_row over the original orientation handled by the caller.
std::vector<int> solve_rows_le_cols(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; p[j] = row currently matched to column j (0 = none)
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = -1;
      double delta = inf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> col_of_row(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] > 0) col_of_row[p[j] - 1] = j - 1;
  return col_of_row;
}

}  // namespace

Assignment min_cost_assignment(const Eigen::MatrixXd& cost) {
  Assignment out;
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  out.row_to_col.assign(rows, -1);
  if (rows == 0 || cols == 0) return out;

  if (rows <= cols) {
    out.row_to_col = solve_rows_le_cols(cost);
  } else {
    std::vector<int> row_of_col = solve_rows_le_cols(cost.transpose());
    for (int j = 0; j < cols; ++j)
      if (row_of_col[j] >= 0) out.row_to_col[row_of_col[j]] = j;
  }
  for (int i = 0; i < rows; ++i)
    if (out.row_to_col[i] >= 0) out.total_cost += cost(i, out.row_to_col[i]);
  return out;
}

}  // namespace reposim
