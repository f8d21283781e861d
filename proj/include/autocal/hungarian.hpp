#pragma once

#include <limits>
#include <vector>

#include "autocal/error.hpp"

namespace autocal {

namespace detail {

/// Potentials-based Hungarian algorithm, O(rows^2 * cols), rows <= cols.
/// Returns the assigned column per row; the assignment minimizes total
/// cost over all row-complete matchings.
inline std::vector<int> hungarian_rows_le_cols(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const int m = n > 0 ? static_cast<int>(cost[0].size()) : 0;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace detail

/// Minimum-cost linear assignment for a rectangular cost matrix.
/// Every entry on the smaller side is assigned; the larger side may have
/// unassigned entries (-1 is never returned for rows when rows <= cols).
inline std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t rows = cost.size();
  if (rows == 0) return {};
  const std::size_t cols = cost[0].size();
  for (const auto& row : cost)
    if (row.size() != cols)
      fail(ErrorCode::invalid_argument, "cost matrix rows have unequal length");
  if (cols == 0) return std::vector<int>(rows, -1);

  if (rows <= cols) return detail::hungarian_rows_le_cols(cost);

  // Transpose, solve, and invert the mapping.
  std::vector<std::vector<double>> tr(cols, std::vector<double>(rows));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) tr[j][i] = cost[i][j];
  const std::vector<int> col_to_row = detail::hungarian_rows_le_cols(tr);
  std::vector<int> row_to_col(rows, -1);
  for (std::size_t j = 0; j < cols; ++j)
    if (col_to_row[j] >= 0) row_to_col[col_to_row[j]] = static_cast<int>(j);
  return row_to_col;
}

inline double assignment_cost(const std::vector<std::vector<double>>& cost,
                              const std::vector<int>& row_to_col) {
  double total = 0.0;
  for (std::size_t i = 0; i < row_to_col.size(); ++i)
    if (row_to_col[i] >= 0) total += cost[i][row_to_col[i]];
  return total;
}

}  // namespace autocal
