#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <functional>
#include <vector>

namespace autocal {

/// Classic Nelder-Mead coefficients plus the convergence rules used here:
/// stop when the simplex diameter or the function-value spread collapses.
struct NelderMeadOptions {
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
  double simplex_edge = 0.5;
  double diameter_tol = 1e-3;
  double fspread_tol = 1e-6;
  int max_iter = 500;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Derivative-free simplex minimization started from x0 with an
/// axis-aligned initial simplex. The best vertex only ever improves, so
/// the result is never worse than f(x0).
inline NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x0,
                                    const NelderMeadOptions& opt = {}) {
  const int n = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> x(n + 1, x0);
  for (int i = 0; i < n; ++i) x[i + 1](i) += opt.simplex_edge;
  std::vector<double> fx(n + 1);
  for (int i = 0; i <= n; ++i) fx[i] = f(x[i]);

  auto order = [&]() {
    std::vector<int> idx(n + 1);
    for (int i = 0; i <= n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return fx[a] < fx[b]; });
    std::vector<Eigen::VectorXd> x2(n + 1);
    std::vector<double> f2(n + 1);
    for (int i = 0; i <= n; ++i) {
      x2[i] = x[idx[i]];
      f2[i] = fx[idx[i]];
    }
    x.swap(x2);
    fx.swap(f2);
  };

  auto diameter = [&]() {
    double d = 0.0;
    for (int i = 0; i <= n; ++i)
      for (int j = i + 1; j <= n; ++j) d = std::max(d, (x[i] - x[j]).norm());
    return d;
  };

  NelderMeadResult result;
  int iter = 0;
  for (; iter < opt.max_iter; ++iter) {
    order();
    if (diameter() < opt.diameter_tol || fx[n] - fx[0] < opt.fspread_tol) {
      result.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += x[i];
    centroid /= n;

    const Eigen::VectorXd xr = centroid + opt.reflection * (centroid - x[n]);
    const double fr = f(xr);
    if (fr < fx[0]) {
      const Eigen::VectorXd xe = centroid + opt.expansion * (xr - centroid);
      const double fe = f(xe);
      if (fe < fr) {
        x[n] = xe;
        fx[n] = fe;
      } else {
        x[n] = xr;
        fx[n] = fr;
      }
    } else if (fr < fx[n - 1]) {
      x[n] = xr;
      fx[n] = fr;
    } else if (fr < fx[n]) {
      // Outside contraction.
      const Eigen::VectorXd xc = centroid + opt.contraction * (xr - centroid);
      const double fc = f(xc);
      if (fc <= fr) {
        x[n] = xc;
        fx[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          x[i] = x[0] + opt.shrink * (x[i] - x[0]);
          fx[i] = f(x[i]);
        }
      }
    } else {
      // Inside contraction.
      const Eigen::VectorXd xc = centroid - opt.contraction * (centroid - x[n]);
      const double fc = f(xc);
      if (fc < fx[n]) {
        x[n] = xc;
        fx[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          x[i] = x[0] + opt.shrink * (x[i] - x[0]);
          fx[i] = f(x[i]);
        }
      }
    }
  }

  order();
  result.x = x[0];
  result.f = fx[0];
  result.iterations = iter;
  return result;
}

}  // namespace autocal
