#pragma once

// Random QP instance generation with a prescribed dimension and condition
// number, plus a cyclic-Jacobi symmetric eigensolver that certifies the
// spectrum. Everything is a pure function of the seed.

#include <algorithm>
#include <numeric>
#include <random>

#include <json.hpp>

#include "hegd/qp.hpp"
#include "hegd/ring.hpp"

namespace hegd {

enum class EigenProfile : uint8_t { TwoPoint = 0, UniformSpread = 1 };

struct GenSpec {
  size_t d = 2;
  double kappa = 1.0;
  uint64_t seed = 0;
  EigenProfile eigen_profile = EigenProfile::UniformSpread;
};

struct SymEigResult {
  std::vector<double> eigenvalues;   // ascending
  std::vector<double> eigenvectors;  // row-major, column i pairs with eigenvalue i
};

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
// 1e-12. Input must be symmetric to within 1e-12.
inline SymEigResult sym_eig(const std::vector<double>& M, size_t d) {
  if (M.size() != d * d) throw ContractError("sym_eig: expected d*d entries");
  for (size_t i = 0; i < d; ++i)
    for (size_t j = i + 1; j < d; ++j)
      if (std::abs(M[i * d + j] - M[j * d + i]) > 1e-12)
        throw ContractError("sym_eig: matrix is not symmetric");

  std::vector<double> A = M;
  std::vector<double> V(d * d, 0.0);
  for (size_t i = 0; i < d; ++i) V[i * d + i] = 1.0;

  auto off_norm = [&]() {
    double s = 0.0;
    for (size_t i = 0; i < d; ++i)
      for (size_t j = 0; j < d; ++j)
        if (i != j) s += A[i * d + j] * A[i * d + j];
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && off_norm() >= 1e-12; ++sweep) {
    for (size_t p = 0; p < d; ++p) {
      for (size_t q = p + 1; q < d; ++q) {
        double apq = A[p * d + q];
        if (std::abs(apq) < 1e-300) continue;
        double theta = (A[q * d + q] - A[p * d + p]) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        double tau = s / (1.0 + c);
        double app = A[p * d + p], aqq = A[q * d + q];
        A[p * d + q] = A[q * d + p] = 0.0;
        A[p * d + p] = app - t * apq;
        A[q * d + q] = aqq + t * apq;
        for (size_t r = 0; r < d; ++r) {
          double vrp = V[r * d + p], vrq = V[r * d + q];
          V[r * d + p] = vrp - s * (vrq + tau * vrp);
          V[r * d + q] = vrq + s * (vrp - tau * vrq);
          if (r == p || r == q) continue;
          double arp = A[r * d + p], arq = A[r * d + q];
          A[p * d + r] = A[r * d + p] = arp - s * (arq + tau * arp);
          A[q * d + r] = A[r * d + q] = arq + s * (arp - tau * arq);
        }
      }
    }
  }

  std::vector<size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return A[a * d + a] < A[b * d + b]; });
  SymEigResult out;
  out.eigenvalues.resize(d);
  out.eigenvectors.assign(d * d, 0.0);
  for (size_t k = 0; k < d; ++k) {
    out.eigenvalues[k] = A[order[k] * d + order[k]];
    for (size_t r = 0; r < d; ++r)
      out.eigenvectors[r * d + k] = V[r * d + order[k]];
  }
  return out;
}

namespace detail {

// Random orthogonal factor: modified Gram-Schmidt on a Gaussian matrix, run
// twice for orthogonality down to machine precision.
inline std::vector<double> random_orthogonal(size_t d, std::mt19937_64& rng) {
  std::vector<double> cols(d * d);  // column-major during the factorization
  for (auto& x : cols) x = standard_normal(rng);
  auto col = [&](size_t j) { return cols.begin() + j * d; };
  for (int pass = 0; pass < 2; ++pass) {
    for (size_t j = 0; j < d; ++j) {
      for (size_t i = 0; i < j; ++i) {
        double proj = 0.0;
        for (size_t r = 0; r < d; ++r) proj += col(i)[r] * col(j)[r];
        for (size_t r = 0; r < d; ++r) col(j)[r] -= proj * col(i)[r];
      }
      double norm = 0.0;
      for (size_t r = 0; r < d; ++r) norm += col(j)[r] * col(j)[r];
      norm = std::sqrt(norm);
      for (size_t r = 0; r < d; ++r) col(j)[r] /= norm;
    }
  }
  std::vector<double> U(d * d);
  for (size_t r = 0; r < d; ++r)
    for (size_t j = 0; j < d; ++j) U[r * d + j] = cols[j * d + r];
  return U;
}

}  // namespace detail

// Q = U diag(lambda) U' with lambda_1 = 1 and lambda_d = kappa, symmetrized
// exactly. UniformSpread draws interior eigenvalues uniformly in [1, kappa];
// TwoPoint pins every eigenvalue to one of the endpoints.
inline std::vector<double> random_spd(const GenSpec& spec) {
  if (spec.d < 2) throw ContractError("random_spd: d must be at least 2");
  if (spec.kappa < 1.0) throw ContractError("random_spd: kappa must be >= 1");
  std::mt19937_64 rng(spec.seed);
  size_t d = spec.d;
  std::vector<double> lambda(d);
  lambda.front() = 1.0;
  lambda.back() = spec.kappa;
  std::uniform_real_distribution<double> interior(1.0, spec.kappa);
  std::bernoulli_distribution coin(0.5);
  for (size_t i = 1; i + 1 < d; ++i)
    lambda[i] = spec.eigen_profile == EigenProfile::UniformSpread
                    ? interior(rng)
                    : (coin(rng) ? spec.kappa : 1.0);
  std::vector<double> U = detail::random_orthogonal(d, rng);
  std::vector<double> Q(d * d, 0.0);
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (size_t k = 0; k < d; ++k) s += U[i * d + k] * lambda[k] * U[j * d + k];
      Q[i * d + j] = s;
    }
  for (size_t i = 0; i < d; ++i)
    for (size_t j = i + 1; j < d; ++j) {
      double s = 0.5 * (Q[i * d + j] + Q[j * d + i]);
      Q[i * d + j] = Q[j * d + i] = s;
    }
  return Q;
}

// Full instance: x* uniform in [-1,1]^d, p = -Q x*, x0 on the unit sphere
// around x* (so ||x0 - x*|| = 1), eigenvalues normalized to [1, kappa].
inline QpInstance make_instance(const GenSpec& spec) {
  QpInstance inst;
  inst.d = spec.d;
  inst.Q = random_spd(spec);
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  inst.x_star.resize(spec.d);
  for (auto& x : inst.x_star) x = unit(rng);
  std::vector<double> qx = mat_vec(inst.Q, inst.x_star);
  inst.p.resize(spec.d);
  for (size_t i = 0; i < spec.d; ++i) inst.p[i] = -qx[i];
  std::vector<double> u(spec.d);
  double norm = 0.0;
  do {
    for (auto& x : u) x = detail::standard_normal(rng);
    norm = norm2(u);
  } while (norm < 1e-8);
  inst.x0.resize(spec.d);
  for (size_t i = 0; i < spec.d; ++i) inst.x0[i] = inst.x_star[i] + u[i] / norm;
  inst.lambda_min = 1.0;
  inst.lambda_max = spec.kappa;
  inst.kappa = spec.kappa;
  inst.radius = 1.0;
  return inst;
}

// --- JSON fixtures -------------------------------------------------------------

inline nlohmann::json instance_to_json(const QpInstance& inst) {
  nlohmann::json j;
  j["d"] = inst.d;
  j["Q"] = inst.Q;
  j["p"] = inst.p;
  j["x_star"] = inst.x_star;
  j["x0"] = inst.x0;
  j["lambda_min"] = inst.lambda_min;
  j["lambda_max"] = inst.lambda_max;
  j["kappa"] = inst.kappa;
  j["radius"] = inst.radius;
  return j;
}

inline QpInstance instance_from_json(const nlohmann::json& j) {
  QpInstance inst;
  inst.d = j.at("d").get<size_t>();
  inst.Q = j.at("Q").get<std::vector<double>>();
  inst.p = j.at("p").get<std::vector<double>>();
  inst.x_star = j.at("x_star").get<std::vector<double>>();
  inst.x0 = j.at("x0").get<std::vector<double>>();
  inst.lambda_min = j.at("lambda_min").get<double>();
  inst.lambda_max = j.at("lambda_max").get<double>();
  inst.kappa = j.at("kappa").get<double>();
  inst.radius = j.at("radius").get<double>();
  if (inst.Q.size() != inst.d * inst.d || inst.p.size() != inst.d ||
      inst.x_star.size() != inst.d || inst.x0.size() != inst.d)
    throw ContractError("instance_from_json: inconsistent dimensions");
  return inst;
}

}  // namespace hegd
