#pragma once

// Unconstrained quadratic program f(x) = 1/2 x'Qx + p'x and its exact
// plaintext helpers. Shared by the problem generator, the solvers and the
// benchmark harness.

#include <cmath>
#include <cstddef>
#include <vector>

#include "hegd/errors.hpp"

namespace hegd {

struct QpInstance {
  size_t d = 0;
  std::vector<double> Q;       // row-major, exactly symmetric
  std::vector<double> p;
  std::vector<double> x_star;  // unconstrained minimizer, Q x* + p = 0
  std::vector<double> x0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double kappa = 0.0;          // lambda_max / lambda_min
  double radius = 0.0;         // ||x0 - x*||_2
};

inline std::vector<double> mat_vec(const std::vector<double>& m,
                                   const std::vector<double>& v) {
  size_t d = v.size();
  std::vector<double> out(d, 0.0);
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j) out[i] += m[i * d + j] * v[j];
  return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const std::vector<double>& v) { return std::sqrt(dot(v, v)); }

inline double qp_objective(const QpInstance& inst, const std::vector<double>& x) {
  return 0.5 * dot(x, mat_vec(inst.Q, x)) + dot(inst.p, x);
}

// Optimality gap f(x) - f(x*); nonnegative up to floating-point noise for a
// positive-definite Q.
inline double qp_tolerance(const QpInstance& inst, const std::vector<double>& x) {
  return qp_objective(inst, x) - qp_objective(inst, inst.x_star);
}

inline std::vector<double> qp_gradient(const QpInstance& inst,
                                       const std::vector<double>& x) {
  std::vector<double> g = mat_vec(inst.Q, x);
  for (size_t i = 0; i < inst.d; ++i) g[i] += inst.p[i];
  return g;
}

inline double distance_to_optimum(const QpInstance& inst,
                                  const std::vector<double>& x) {
  double s = 0.0;
  for (size_t i = 0; i < inst.d; ++i) {
    double dxi = x[i] - inst.x_star[i];
    s += dxi * dxi;
  }
  return std::sqrt(s);
}

}  // namespace hegd
