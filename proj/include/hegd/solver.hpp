#pragma once

// Gradient descent and Nesterov accelerated gradient descent for
// unconstrained QPs, in three flavors: exact plaintext, plaintext with a
// simulated level ledger, and fully encrypted over the CKKS evaluator.
// Includes the step-size rules, the closed-form reference solve, and the
// multiplication-depth accounting that produces the 9-vs-6 iteration caps
// at a depth-18 budget.

#include <chrono>
#include <optional>

#include "hegd/enclin.hpp"
#include "hegd/qp.hpp"

namespace hegd {

enum class Algorithm : uint8_t { GD = 0, AGD = 1 };
enum class SolverBackend : uint8_t { PlainExact = 0, PlainSimulatedDepth = 1, Ckks = 2 };
enum class MatmulScheme : uint8_t { Ours = 0, JKLS = 1 };

struct Trace {
  std::vector<std::vector<double>> iterates;  // x_0 .. x_N
  std::vector<double> tolerances;             // f(x_t) - f(x*), per iterate
  std::vector<int> levels;                    // level after each iterate (ledger backends)
  std::vector<double> seconds;                // wall clock per iterate, 0 for x_0
};

struct SolverConfig {
  int iterations = 9;
  SolverBackend backend = SolverBackend::PlainExact;
  int depth_budget = 18;
  bool record_trajectory = true;
};

// Signed step sizes exactly as the iteration folds them: the update is
// x ⊞ eta*(Qx) ⊞ eta*p with eta negative.
inline double gd_step_size(double lambda_min, double lambda_max) {
  if (!(lambda_min > 0) || !(lambda_max > 0) || lambda_min > lambda_max)
    throw ContractError("gd_step_size: eigenvalue bounds must satisfy 0 < min <= max");
  return -2.0 / (lambda_min + lambda_max);
}

inline double agd_step_size(double lambda_max) {
  if (!(lambda_max > 0))
    throw ContractError("agd_step_size: lambda_max must be positive");
  return -1.0 / lambda_max;
}

inline double agd_momentum(double kappa) {
  if (!(kappa >= 1.0)) throw ContractError("agd_momentum: kappa must be >= 1");
  double rk = std::sqrt(kappa);
  return (rk - 1.0) / (rk + 1.0);
}

// --- depth accounting ----------------------------------------------------------

// Levels consumed by N iterations: GD spends 2 per step (the depth-2 matrix
// product), AGD 3 (one more for the momentum ⊙). Under the JKLS product the
// costs are 3 and 4.
inline int depth_cost(Algorithm algo, int iterations,
                      MatmulScheme scheme = MatmulScheme::Ours) {
  if (iterations < 0) throw ContractError("depth_cost: negative iteration count");
  int per = scheme == MatmulScheme::Ours ? (algo == Algorithm::GD ? 2 : 3)
                                         : (algo == Algorithm::GD ? 3 : 4);
  return per * iterations;
}

inline int max_iterations(Algorithm algo, int budget,
                          MatmulScheme scheme = MatmulScheme::Ours) {
  if (budget < 0) throw ContractError("max_iterations: negative budget");
  return budget / depth_cost(algo, 1, scheme);
}

// --- plaintext solvers -----------------------------------------------------------

namespace detail {

inline void record_plain(Trace& trace, const QpInstance& inst,
                         const std::vector<double>& x, double secs) {
  trace.iterates.push_back(x);
  trace.tolerances.push_back(qp_tolerance(inst, x));
  trace.seconds.push_back(secs);
}

}  // namespace detail

inline Trace gd_plain(const QpInstance& inst, int iterations) {
  double eta = gd_step_size(inst.lambda_min, inst.lambda_max);
  Trace trace;
  std::vector<double> x = inst.x0;
  detail::record_plain(trace, inst, x, 0.0);
  for (int t = 0; t < iterations; ++t) {
    auto start = std::chrono::steady_clock::now();
    std::vector<double> g = qp_gradient(inst, x);
    for (size_t i = 0; i < inst.d; ++i) x[i] += eta * g[i];
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start).count();
    detail::record_plain(trace, inst, x, secs);
  }
  return trace;
}

inline Trace agd_plain(const QpInstance& inst, int iterations) {
  double eta = agd_step_size(inst.lambda_max);
  double theta = agd_momentum(inst.kappa);
  Trace trace;
  std::vector<double> x_minus = inst.x0;
  std::vector<double> y_minus = inst.x0;
  detail::record_plain(trace, inst, x_minus, 0.0);
  for (int t = 0; t < iterations; ++t) {
    auto start = std::chrono::steady_clock::now();
    std::vector<double> g = qp_gradient(inst, x_minus);
    std::vector<double> y_plus(inst.d), x_plus(inst.d);
    for (size_t i = 0; i < inst.d; ++i) y_plus[i] = x_minus[i] + eta * g[i];
    for (size_t i = 0; i < inst.d; ++i)
      x_plus[i] = (1.0 + theta) * y_plus[i] - theta * y_minus[i];
    y_minus = y_plus;
    x_minus = x_plus;
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start).count();
    detail::record_plain(trace, inst, x_minus, secs);
  }
  return trace;
}

// Plaintext arithmetic with the encrypted pipeline's level ledger bolted on:
// validates depth budgets without touching a single ciphertext.
inline Trace solve_simulated(Algorithm algo, const QpInstance& inst,
                             int iterations, int depth_budget) {
  int per = depth_cost(algo, 1);
  Trace trace = algo == Algorithm::GD ? gd_plain(inst, iterations)
                                      : agd_plain(inst, iterations);
  trace.levels.resize(trace.iterates.size());
  trace.levels[0] = depth_budget;
  for (size_t t = 1; t < trace.levels.size(); ++t) {
    int level = depth_budget - per * static_cast<int>(t);
    if (level < 0)
      throw DepthExhausted("solve_simulated: depth budget exhausted before N iterations");
    trace.levels[t] = level;
  }
  return trace;
}

// Single entry point for the plaintext backends; the config's budget
// invariant is enforced whenever a level ledger is in play. With
// record_trajectory off only the endpoints of the run are kept.
inline Trace solve(Algorithm algo, const QpInstance& inst,
                   const SolverConfig& config) {
  if (config.backend != SolverBackend::PlainExact &&
      depth_cost(algo, config.iterations) > config.depth_budget)
    throw ContractError("SolverConfig: depth cost exceeds the depth budget");
  if (config.backend == SolverBackend::Ckks)
    throw ContractError("solve: the Ckks backend needs keys; use he_gd/he_agd");
  Trace trace = config.backend == SolverBackend::PlainExact
                    ? (algo == Algorithm::GD ? gd_plain(inst, config.iterations)
                                             : agd_plain(inst, config.iterations))
                    : solve_simulated(algo, inst, config.iterations,
                                      config.depth_budget);
  if (!config.record_trajectory && trace.iterates.size() > 2) {
    auto keep_ends = [](auto& v) {
      if (v.size() > 2) v = {v.front(), v.back()};
    };
    keep_ends(trace.iterates);
    keep_ends(trace.tolerances);
    keep_ends(trace.levels);
    keep_ends(trace.seconds);
  }
  return trace;
}

// Closed-form reference: solves Q x = -p by Cholesky factorization (the
// plaintext-only baseline the iterative methods are measured against).
inline std::vector<double> closed_form(const QpInstance& inst) {
  size_t d = inst.d;
  std::vector<double> L(d * d, 0.0);
  for (size_t i = 0; i < d; ++i) {
    for (size_t j = 0; j <= i; ++j) {
      double s = inst.Q[i * d + j];
      for (size_t k = 0; k < j; ++k) s -= L[i * d + k] * L[j * d + k];
      if (i == j) {
        if (s <= 0.0)
          throw ContractError("closed_form: Q is not positive definite");
        L[i * d + i] = std::sqrt(s);
      } else {
        L[i * d + j] = s / L[j * d + j];
      }
    }
  }
  std::vector<double> y(d), x(d);
  for (size_t i = 0; i < d; ++i) {
    double s = -inst.p[i];
    for (size_t k = 0; k < i; ++k) s -= L[i * d + k] * y[k];
    y[i] = s / L[i * d + i];
  }
  for (size_t ii = d; ii-- > 0;) {
    double s = y[ii];
    for (size_t k = ii + 1; k < d; ++k) s -= L[k * d + ii] * x[k];
    x[ii] = s / L[ii * d + ii];
  }
  return x;
}

// --- encrypted solvers -----------------------------------------------------------

// Plaintext metadata the user ships alongside the encrypted problem data.
struct QpMeta {
  size_t d = 0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

struct HeSolverKeys {
  const PublicKey& pub;
  const RelinKey& relin;
  const GaloisKeys& galois;
};

// Present only in test/benchmark contexts: holding the secret key lets the
// solver record a decrypted Trace. The server-side path passes nullptr.
struct TraceContext {
  const SecretKey* secret = nullptr;
  const QpInstance* instance = nullptr;
};

struct HeSolveResult {
  EncodedVector x;
  Trace trace;
};

namespace detail {

inline Plaintext encode_constant(const CkksEncoder& encoder, double value,
                                 double scale, int level) {
  return encoder.encode(std::vector<double>(encoder.slots(), value), scale,
                        level);
}

inline void record_encrypted(Trace& trace, const EncodedVector& x,
                             const TraceContext& ctx, const CkksEncoder& encoder,
                             double secs) {
  if (!ctx.secret) return;
  std::vector<double> xt = decode_vector(x, *ctx.secret, encoder);
  trace.levels.push_back(x.ct.level());
  trace.seconds.push_back(secs);
  if (ctx.instance) trace.tolerances.push_back(qp_tolerance(*ctx.instance, xt));
  trace.iterates.push_back(std::move(xt));
}

// eta ⊙ p, computed once at p's level; iterations mod-switch it down instead
// of spending a fresh ⊙ every step.
inline Ciphertext make_eta_p(const EncodedVector& p, double eta,
                             const CkksEncoder& encoder, const Evaluator& eval) {
  double delta = p.ct.parts[0].basis()->scale();
  Plaintext eta_pt = encode_constant(encoder, eta, delta, p.ct.level());
  return eval.rescale(eval.mul_plain(p.ct, eta_pt));
}

}  // namespace detail

// HE GD: x+ <- x- ⊞ MMult(Q, x-, d, eta) ⊞ eta ⊙ p, two levels per
// iteration. Iterations run until done or the chain runs out (DepthExhausted).
inline HeSolveResult he_gd(const EncodedMatrix& Q, const EncodedVector& p,
                           const QpMeta& meta, std::optional<EncodedVector> x0,
                           int iterations, const HeSolverKeys& keys,
                           const CkksEncoder& encoder, const Evaluator& eval,
                           std::mt19937_64& rng, TraceContext trace_ctx = {}) {
  if (Q.d != meta.d || p.d != meta.d)
    throw ContractError("he_gd: dimension mismatch");
  double eta = gd_step_size(meta.lambda_min, meta.lambda_max);
  double delta = Q.ct.parts[0].basis()->scale();
  EncodedVector x = x0 ? std::move(*x0)
                       : encode_vector_replicated(
                             std::vector<double>(meta.d, 0.0), meta.d, encoder,
                             keys.pub, rng, Q.ct.level(), delta);
  Ciphertext eta_p = detail::make_eta_p(p, eta, encoder, eval);

  Trace trace;
  detail::record_encrypted(trace, x, trace_ctx, encoder, 0.0);
  for (int t = 0; t < iterations; ++t) {
    auto start = std::chrono::steady_clock::now();
    int level = x.ct.level();
    EncodedMatrix q_here{eval.mod_switch_to(Q.ct, level), Q.d};
    EncodedVector grad = mmult(q_here, x, eta, keys.relin, keys.galois, encoder,
                               eval);
    Ciphertext sum = eval.add(eval.mod_switch_to(x.ct, grad.ct.level()), grad.ct);
    sum = eval.add(sum, eval.mod_switch_to(eta_p, grad.ct.level()));
    x = EncodedVector{std::move(sum), meta.d};
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start).count();
    detail::record_encrypted(trace, x, trace_ctx, encoder, secs);
  }
  return {std::move(x), std::move(trace)};
}

// HE AGD: the GD update lands on y+, then the momentum combination
// x+ <- (1+theta) ⊙ y+ ⊟ theta ⊙ y- costs the third level per iteration;
// y- is mod-switched down so the ⊟ stays aligned.
inline HeSolveResult he_agd(const EncodedMatrix& Q, const EncodedVector& p,
                            const QpMeta& meta, std::optional<EncodedVector> x0,
                            int iterations, const HeSolverKeys& keys,
                            const CkksEncoder& encoder, const Evaluator& eval,
                            std::mt19937_64& rng, TraceContext trace_ctx = {}) {
  if (Q.d != meta.d || p.d != meta.d)
    throw ContractError("he_agd: dimension mismatch");
  double eta = agd_step_size(meta.lambda_max);
  double theta = agd_momentum(meta.lambda_max / meta.lambda_min);
  double delta = Q.ct.parts[0].basis()->scale();
  EncodedVector x = x0 ? std::move(*x0)
                       : encode_vector_replicated(
                             std::vector<double>(meta.d, 0.0), meta.d, encoder,
                             keys.pub, rng, Q.ct.level(), delta);
  Ciphertext eta_p = detail::make_eta_p(p, eta, encoder, eval);
  Ciphertext y_minus = x.ct;

  Trace trace;
  detail::record_encrypted(trace, x, trace_ctx, encoder, 0.0);
  for (int t = 0; t < iterations; ++t) {
    auto start = std::chrono::steady_clock::now();
    int level = x.ct.level();
    EncodedMatrix q_here{eval.mod_switch_to(Q.ct, level), Q.d};
    EncodedVector grad = mmult(q_here, x, eta, keys.relin, keys.galois, encoder,
                               eval);
    Ciphertext y_plus = eval.add(eval.mod_switch_to(x.ct, grad.ct.level()),
                                 grad.ct);
    y_plus = eval.add(y_plus, eval.mod_switch_to(eta_p, grad.ct.level()));

    Plaintext w_plus = detail::encode_constant(encoder, 1.0 + theta, delta,
                                               y_plus.level());
    Ciphertext t1 = eval.rescale(eval.mul_plain(y_plus, w_plus));
    Ciphertext y_minus_here = eval.mod_switch_to(y_minus, y_plus.level());
    Plaintext w_minus = detail::encode_constant(encoder, theta, delta,
                                                y_plus.level());
    Ciphertext t2 = eval.rescale(eval.mul_plain(y_minus_here, w_minus));
    x = EncodedVector{eval.sub(t1, t2), meta.d};
    y_minus = std::move(y_plus);
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start).count();
    detail::record_encrypted(trace, x, trace_ctx, encoder, secs);
  }
  return {std::move(x), std::move(trace)};
}

}  // namespace hegd
