#pragma once

#include <vector>

#include <Eigen/Dense>

namespace reposim {

struct Assignment {
  // row_to_col[i] = column matched to row i, -1 when the row is unmatched.
  // Every row is matched when rows <= cols, every column otherwise.
  std::vector<int> row_to_col;
  double total_cost = 0.0;
};

// Minimum-cost bipartite assignment (Kuhn-Munkres with row/column
// potentials, O(n^2 m)). Costs may be any finite doubles; empty matrices
// yield an empty assignment.
Assignment min_cost_assignment(const Eigen::MatrixXd& cost);

}  // namespace reposim
