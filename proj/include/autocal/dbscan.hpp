#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace autocal {

/// DBSCAN labels: cluster id per point, -1 for noise.
struct DbscanResult {
  std::vector<int> labels;
  int n_clusters = 0;
};

/// Density-based clustering over n points with a caller-supplied distance.
/// Neighborhoods are closed balls (dist <= eps) and include the point
/// itself, so a cluster needs min_pts points total, matching the usual
/// DBSCAN convention.
///
/// Clusters are the connected components of core points; border points
/// join the cluster of their nearest core neighbor (ties to the lowest
/// cluster id). The member sets are therefore invariant to input order
/// apart from exact distance ties.
template <typename DistFn>
DbscanResult dbscan(std::size_t n, DistFn&& dist, double eps, std::size_t min_pts) {
  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i) {
    neighbors[i].push_back(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (dist(i, j) <= eps) {
        neighbors[i].push_back(j);
        neighbors[j].push_back(i);
      }
    }
  }

  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) core[i] = neighbors[i].size() >= min_pts;

  DbscanResult result;
  result.labels.assign(n, -1);

  // Connected components of core points, labeled in first-seen order.
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || result.labels[i] != -1) continue;
    const int id = result.n_clusters++;
    result.labels[i] = id;
    stack.push_back(i);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      for (std::size_t q : neighbors[p]) {
        if (core[q] && result.labels[q] == -1) {
          result.labels[q] = id;
          stack.push_back(q);
        }
      }
    }
  }

  // Border points attach to the nearest reachable core point.
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i] || result.labels[i] != -1) continue;
    double best = 0.0;
    int best_label = -1;
    for (std::size_t q : neighbors[i]) {
      if (!core[q]) continue;
      const double d = dist(i, q);
      if (best_label == -1 || d < best ||
          (d == best && result.labels[q] < best_label)) {
        best = d;
        best_label = result.labels[q];
      }
    }
    result.labels[i] = best_label;
  }

  return result;
}

}  // namespace autocal
