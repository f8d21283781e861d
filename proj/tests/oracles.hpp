// Independent reference implementations used as test oracles. These stay
// deliberately naive and separate from the library code paths they check.
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace oracle {

/// Geodesic angle between two rotations via unit quaternions.
inline double quaternion_angle(const Eigen::Matrix3d& Ra, const Eigen::Matrix3d& Rb) {
  Eigen::Quaterniond qa(Ra), qb(Rb);
  const double dot = std::abs(qa.dot(qb));
  return 2.0 * std::acos(std::min(1.0, dot));
}

/// Reference DBSCAN: neighbor counts by full pairwise scan, core points,
/// BFS components, border points to the nearest core (ties to the lowest
/// component id). Semantics intentionally match the library contract but
/// through an independent implementation.
inline std::vector<int> naive_dbscan(std::size_t n,
                                     const std::function<double(std::size_t, std::size_t)>& dist,
                                     double eps, std::size_t min_pts) {
  std::vector<std::vector<std::size_t>> nb(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (dist(i, j) <= eps) nb[i].push_back(j);  // includes self (dist 0)

  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = nb[i].size() >= min_pts;

  std::vector<int> label(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || label[i] != -1) continue;
    std::vector<std::size_t> queue{i};
    label[i] = next;
    while (!queue.empty()) {
      const std::size_t p = queue.back();
      queue.pop_back();
      for (std::size_t q : nb[p])
        if (core[q] && label[q] == -1) {
          label[q] = next;
          queue.push_back(q);
        }
    }
    ++next;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    double best = 0.0;
    int best_label = -1;
    for (std::size_t q : nb[i]) {
      if (!core[q]) continue;
      const double d = dist(i, q);
      if (best_label == -1 || d < best || (d == best && label[q] < best_label)) {
        best = d;
        best_label = label[q];
      }
    }
    label[i] = best_label;
  }

  // Clusters that end up smaller than min_pts (their borders were pulled
  // toward nearer clusters) are discarded as noise, matching the contract.
  std::vector<std::size_t> sizes(static_cast<std::size_t>(next), 0);
  for (int l : label)
    if (l >= 0) ++sizes[static_cast<std::size_t>(l)];
  for (int& l : label)
    if (l >= 0 && sizes[static_cast<std::size_t>(l)] < min_pts) l = -1;
  return label;
}

/// Exhaustive minimum-cost assignment over all permutations (square
/// matrices, n <= ~8).
inline double brute_force_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost[i][perm[i]];
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// RK4 integration of the CTRA ODE (x' = v cos th, y' = v sin th,
/// th' = w, v' = a) with many substeps.
struct CtraOde {
  double x, y, theta, v, a, omega;
};

inline CtraOde rk4_ctra(CtraOde s, double dt, int steps = 20000) {
  auto deriv = [](const CtraOde& q) {
    return CtraOde{q.v * std::cos(q.theta), q.v * std::sin(q.theta), q.omega, q.a, 0.0, 0.0};
  };
  auto axpy = [](const CtraOde& q, const CtraOde& d, double h) {
    return CtraOde{q.x + h * d.x, q.y + h * d.y, q.theta + h * d.theta,
                   q.v + h * d.v, q.a, q.omega};
  };
  const double h = dt / steps;
  for (int i = 0; i < steps; ++i) {
    const CtraOde k1 = deriv(s);
    const CtraOde k2 = deriv(axpy(s, k1, h / 2));
    const CtraOde k3 = deriv(axpy(s, k2, h / 2));
    const CtraOde k4 = deriv(axpy(s, k3, h));
    s.x += h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
    s.y += h / 6 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y);
    s.theta += h / 6 * (k1.theta + 2 * k2.theta + 2 * k3.theta + k4.theta);
    s.v += h / 6 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v);
  }
  return s;
}

}  // namespace oracle
