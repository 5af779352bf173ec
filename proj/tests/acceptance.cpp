// Acceptance suite: one pass/fail line per criterion, details beneath each.
// Exit status is the number of failed criteria.

#include <algorithm>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>

#include "hegd/harness.hpp"
#include "oracles.hpp"

using namespace hegd;

namespace {

struct CriterionResult {
  std::vector<std::pair<bool, std::string>> checks;
  bool passed = true;

  void expect(bool ok, const std::string& detail) {
    checks.emplace_back(ok, detail);
    passed = passed && ok;
  }
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

std::vector<double> random_vec(size_t len, std::mt19937_64& rng, double lo = -1.0,
                               double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(len);
  for (auto& x : v) x = dist(rng);
  return v;
}

struct Runtime {
  CkksParams params;
  CkksEncoder encoder;
  KeySet keys;
  Runtime(CkksParams p, uint64_t seed) : params(p), encoder(params) {
    std::mt19937_64 rng(seed);
    keys = keygen(params, rng);
  }
};

// --- criterion 1 -----------------------------------------------------------------

void criterion_depth_budget(CriterionResult& r) {
  auto check_eq = [&](const char* label, int got, int want) {
    std::ostringstream os;
    os << label << " = " << got << " (expected " << want << ")";
    r.expect(got == want, os.str());
  };
  check_eq("max_iterations(GD, 18, Ours)",
           max_iterations(Algorithm::GD, 18, MatmulScheme::Ours), 9);
  check_eq("max_iterations(AGD, 18, Ours)",
           max_iterations(Algorithm::AGD, 18, MatmulScheme::Ours), 6);
  check_eq("max_iterations(GD, 18, JKLS)",
           max_iterations(Algorithm::GD, 18, MatmulScheme::JKLS), 6);
  check_eq("max_iterations(AGD, 18, JKLS)",
           max_iterations(Algorithm::AGD, 18, MatmulScheme::JKLS), 4);
}

// --- criterion 2 -----------------------------------------------------------------

void criterion_mmult(CriterionResult& r) {
  Runtime rt(CkksParams::insecure_test(8192, 4, 40), 2025);
  Evaluator eval;
  for (size_t d : {2u, 4u, 8u}) {
    std::vector<double> rel_errors(50, 0.0);
    std::vector<char> depth_flags(50, 0);
    detail::parallel_for(50, 0, [&](size_t pair_idx) {
      std::mt19937_64 rng(detail::derive_seed(99, d, 0.0, pair_idx));
      auto A = random_vec(d * d, rng);
      auto x = random_vec(d, rng);
      EncodedMatrix eA = encode_matrix(A, d, rt.encoder, rt.keys.pub, rng,
                                       rt.params.depth(), rt.params.scale());
      EncodedVector ex = encode_vector_replicated(x, d, rt.encoder, rt.keys.pub,
                                                  rng, rt.params.depth(),
                                                  rt.params.scale());
      EncodedVector out = mmult(eA, ex, 1.0, rt.keys.relin, rt.keys.galois,
                                rt.encoder, eval);
      depth_flags[pair_idx] = out.ct.level() == eA.ct.level() - 2 ? 1 : 0;
      auto got = decode_vector(out, rt.keys.secret, rt.encoder);
      auto want = oracles::matvec(A, x);
      double num = 0, den = 0;
      for (size_t i = 0; i < d; ++i) {
        num += (got[i] - want[i]) * (got[i] - want[i]);
        den += want[i] * want[i];
      }
      rel_errors[pair_idx] = std::sqrt(num / den);
    });
    double worst = *std::max_element(rel_errors.begin(), rel_errors.end());
    bool depth_ok = std::all_of(depth_flags.begin(), depth_flags.end(),
                                [](char f) { return f == 1; });
    r.expect(worst < 1e-4, "d=" + std::to_string(d) +
                               ": worst relative error over 50 pairs " +
                               fmt(worst) + " < 1e-4");
    r.expect(depth_ok,
             "d=" + std::to_string(d) + ": every product consumed exactly 2 levels");
  }
}

// --- criterion 3 -----------------------------------------------------------------

void criterion_decomposition(CriterionResult& r) {
  std::mt19937_64 rng(33);
  double worst = 0.0;
  for (size_t d : {2u, 3u, 4u, 8u}) {
    for (int trial = 0; trial < 50; ++trial) {
      auto A = random_vec(d * d, rng);
      auto B = random_vec(d * d, rng);
      double a = trial % 3 == 0 ? -0.125 : 1.0;
      std::vector<double> acc(d * d, 0.0);
      for (size_t k = 0; k < d; ++k) {
        auto ak = make_Vk(d, k, a).apply(A);
        auto bk = make_Wk(d, k).apply(B);
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += ak[i] * bk[i];
      }
      auto expect = oracles::matmul(A, B, d);
      for (size_t i = 0; i < acc.size(); ++i)
        worst = std::max(worst, std::abs(acc[i] - a * expect[i]));
    }
  }
  r.expect(worst < 1e-12, "worst entry error over d in {2,3,4,8}, 50 pairs each: " +
                              fmt(worst) + " < 1e-12");
}

// --- criterion 4 -----------------------------------------------------------------

void criterion_contraction(CriterionResult& r) {
  std::vector<double> kappas = {1.5, 2, 3, 5, 10, 20, 50};
  std::vector<size_t> dims = {2, 4, 8};
  int instances = 0;
  double worst_excess = -1.0;
  for (double kappa : kappas) {
    for (size_t d : dims) {
      for (uint64_t rep = 0; rep < 5; ++rep) {
        GenSpec spec{d, kappa, detail::derive_seed(4, d, kappa, rep),
                     EigenProfile::UniformSpread};
        QpInstance inst = make_instance(spec);
        ++instances;
        double factor = (kappa - 1.0) / (kappa + 1.0);
        Trace t = gd_plain(inst, 9);
        for (size_t s = 1; s < t.iterates.size(); ++s) {
          double before = distance_to_optimum(inst, t.iterates[s - 1]);
          double after = distance_to_optimum(inst, t.iterates[s]);
          worst_excess = std::max(worst_excess, after - factor * before);
        }
      }
    }
  }
  std::ostringstream os;
  os << instances << " instances, per-step excess over ((kappa-1)/(kappa+1))*dist: "
     << fmt(worst_excess) << " <= 1e-12";
  r.expect(worst_excess <= 1e-12, os.str());
}

// --- criterion 5 -----------------------------------------------------------------

void criterion_crossover(CriterionResult& r) {
  SweepSpec spec;
  spec.repetitions = 20;
  spec.seed = 0;
  SweepReport report = run_sweep(spec);

  bool split_ok = true;
  std::string first_bad;
  for (size_t d : spec.dims) {
    for (double kappa : spec.kappas) {
      Algorithm want = kappa <= 5.0 ? Algorithm::GD : Algorithm::AGD;
      const SweepRow* row = report.find(d, kappa, Algorithm::GD);
      if (row->winner != want) {
        split_ok = false;
        if (first_bad.empty())
          first_bad = " (first miss: d=" + std::to_string(d) +
                      " kappa=" + fmt(kappa) + ")";
      }
    }
  }
  r.expect(split_ok,
           "winner split: GD wins every kappa<=5 cell, AGD every kappa>=10 cell" +
               first_bad);

  double spot10 = report.find(2, 10.0, Algorithm::AGD)->median_tol;
  r.expect(spot10 >= 7e-5 && spot10 <= 7e-1,
           "d=2 kappa=10 AGD median " + fmt(spot10) + " within [7e-05, 7e-01]");

  double spot15 = report.find(2, 1.5, Algorithm::GD)->median_tol;
  r.expect(spot15 >= 3e-11 && spot15 <= 3e-7,
           "d=2 kappa=1.5 GD median " + fmt(spot15) +
               " within [3e-11, 3e-07]; exact arithmetic lands below this "
               "reference band, which presumes an encrypted-noise floor");
}

// --- criteria 6 and 7 (share the depth-18 context) ---------------------------------

QpInstance fig2_instance(uint64_t rep_seed) {
  TrajectorySpec spec;  // defaults: d=2, kappa=2, fixed endpoints
  return trajectory_instance(spec, rep_seed);
}

void criterion_fig2_agreement(CriterionResult& r, Runtime& rt) {
  QpInstance inst = fig2_instance(detail::derive_seed(0, 2, 2.0, 0));
  std::mt19937_64 rng(606);
  Evaluator eval;
  EncodedMatrix q = encode_matrix(inst.Q, inst.d, rt.encoder, rt.keys.pub, rng,
                                  rt.params.depth(), rt.params.scale());
  EncodedVector p = encode_vector_replicated(inst.p, inst.d, rt.encoder,
                                             rt.keys.pub, rng, rt.params.depth(),
                                             rt.params.scale());
  EncodedVector x0 = encode_vector_replicated(inst.x0, inst.d, rt.encoder,
                                              rt.keys.pub, rng, rt.params.depth(),
                                              rt.params.scale());
  HeSolverKeys keys{rt.keys.pub, rt.keys.relin, rt.keys.galois};
  QpMeta meta{inst.d, inst.lambda_min, inst.lambda_max};
  HeSolveResult result = he_agd(q, p, meta, x0, 6, keys, rt.encoder, eval, rng,
                                {&rt.keys.secret, &inst});
  Trace plain = agd_plain(inst, 6);

  double worst_gap = 0.0;
  for (size_t t = 0; t < result.trace.iterates.size(); ++t)
    for (size_t i = 0; i < inst.d; ++i)
      worst_gap = std::max(worst_gap,
                           std::abs(result.trace.iterates[t][i] -
                                    plain.iterates[t][i]));
  r.expect(worst_gap <= 1e-3, "per-iterate inf-norm gap vs plain AGD " +
                                  fmt(worst_gap) + " <= 1e-3 over 6 iterations");

  bool decreasing = true;
  double prev = distance_to_optimum(inst, result.trace.iterates[0]);
  for (size_t t = 1; t < result.trace.iterates.size(); ++t) {
    double cur = distance_to_optimum(inst, result.trace.iterates[t]);
    if (cur >= prev) decreasing = false;
    prev = cur;
  }
  r.expect(decreasing,
           "decrypted distance to x* decreases at every iteration (final " +
               fmt(prev) + ")");
}

void criterion_depth_exhaustion(CriterionResult& r, Runtime& rt) {
  QpInstance inst = fig2_instance(detail::derive_seed(0, 2, 2.0, 1));
  std::mt19937_64 rng(707);
  Evaluator eval;
  HeSolverKeys keys{rt.keys.pub, rt.keys.relin, rt.keys.galois};
  QpMeta meta{inst.d, inst.lambda_min, inst.lambda_max};
  auto enc_all = [&] {
    EncodedMatrix q = encode_matrix(inst.Q, inst.d, rt.encoder, rt.keys.pub, rng,
                                    rt.params.depth(), rt.params.scale());
    EncodedVector p = encode_vector_replicated(inst.p, inst.d, rt.encoder,
                                               rt.keys.pub, rng,
                                               rt.params.depth(), rt.params.scale());
    EncodedVector x0 = encode_vector_replicated(inst.x0, inst.d, rt.encoder,
                                                rt.keys.pub, rng,
                                                rt.params.depth(), rt.params.scale());
    return std::tuple{std::move(q), std::move(p), std::move(x0)};
  };
  {
    auto [q, p, x0] = enc_all();
    bool threw = false;
    try {
      he_gd(q, p, meta, std::move(x0), 10, keys, rt.encoder, eval, rng);
    } catch (const DepthExhausted&) {
      threw = true;
    }
    r.expect(threw, "he_gd with N=10 at depth 18 raises DepthExhausted");
  }
  {
    auto [q, p, x0] = enc_all();
    bool threw = false;
    try {
      he_agd(q, p, meta, std::move(x0), 7, keys, rt.encoder, eval, rng);
    } catch (const DepthExhausted&) {
      threw = true;
    }
    r.expect(threw, "he_agd with N=7 at depth 18 raises DepthExhausted");
  }
}

// --- criterion 8 -----------------------------------------------------------------

void criterion_homomorphism(CriterionResult& r) {
  Runtime rt(CkksParams::insecure_test(2048, 4, 40), 808);
  Evaluator eval;
  std::mt19937_64 rng(909);
  size_t len = 32;
  double scale = rt.params.scale();
  int top = rt.params.depth();
  Plaintext ones = rt.encoder.encode(std::vector<double>(rt.params.slots(), 1.0),
                                     scale, top);

  auto enc = [&](const std::vector<double>& v) {
    return encrypt(rt.encoder.encode(v, scale, top), rt.keys.pub, rng);
  };
  auto dec = [&](const Ciphertext& ct) {
    auto slots = rt.encoder.decode(decrypt(ct, rt.keys.secret));
    std::vector<double> out(len);
    for (size_t i = 0; i < len; ++i) out[i] = slots[i].real();
    return out;
  };

  double worst_add = 0, worst_sub = 0, worst_mul = 0, worst_mul_plain = 0,
         worst_rot = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto u = random_vec(len, rng), v = random_vec(len, rng);
    Ciphertext cu = enc(u), cv = enc(v);
    auto sum = dec(eval.add(cu, cv));
    auto diff = dec(eval.sub(cu, cv));
    auto prod = dec(eval.rescale(eval.relinearize(eval.mul(cu, cv), rt.keys.relin)));
    auto scaled = dec(eval.rescale(eval.mul_plain(cu, ones)));
    int steps = 1 + trial % 7;
    auto rot_slots = rt.encoder.decode(
        decrypt(eval.rotate(cu, steps, rt.keys.galois), rt.keys.secret));
    for (size_t i = 0; i < len; ++i) {
      worst_add = std::max(worst_add, std::abs(sum[i] - (u[i] + v[i])));
      worst_sub = std::max(worst_sub, std::abs(diff[i] - (u[i] - v[i])));
      worst_mul = std::max(worst_mul, std::abs(prod[i] - u[i] * v[i]));
      worst_mul_plain = std::max(worst_mul_plain, std::abs(scaled[i] - u[i]));
      if (i + steps < len)
        worst_rot = std::max(worst_rot,
                             std::abs(rot_slots[i].real() - u[i + steps]));
    }
  }
  r.expect(worst_add < 1e-5, "⊞ worst error " + fmt(worst_add) + " < 1e-5");
  r.expect(worst_sub < 1e-5, "⊟ worst error " + fmt(worst_sub) + " < 1e-5");
  r.expect(worst_mul < 1e-5, "• worst error " + fmt(worst_mul) + " < 1e-5");
  r.expect(worst_mul_plain < 1e-5,
           "⊙ worst error " + fmt(worst_mul_plain) + " < 1e-5");
  r.expect(worst_rot < 1e-5, "rotate worst error " + fmt(worst_rot) + " < 1e-5");

  // Serialization round trips, bit-exact.
  bool serial_ok = true;
  {
    auto v = random_vec(len, rng);
    Ciphertext ct = enc(v);
    std::stringstream ss;
    save_ciphertext(ct, rt.params, ss);
    Ciphertext back = load_ciphertext(ss, rt.params);
    serial_ok = serial_ok && back.parts.size() == ct.parts.size();
    for (size_t i = 0; i < ct.parts.size() && serial_ok; ++i)
      serial_ok = back.parts[i] == ct.parts[i];
    serial_ok = serial_ok &&
                std::memcmp(&back.scale, &ct.scale, sizeof(double)) == 0;
  }
  {
    std::stringstream ss;
    save_secret_key(rt.keys.secret, rt.params, ss);
    serial_ok = serial_ok &&
                load_secret_key(ss, rt.params).coeffs == rt.keys.secret.coeffs;
  }
  {
    std::stringstream ss;
    save_relin_key(rt.keys.relin, rt.params, ss);
    RelinKey back = load_relin_key(ss, rt.params);
    serial_ok = serial_ok && back.digits.size() == rt.keys.relin.digits.size();
    if (serial_ok)
      serial_ok = back.digits[0].b == rt.keys.relin.digits[0].b &&
                  back.digits[0].a == rt.keys.relin.digits[0].a;
  }
  {
    std::stringstream ss;
    save_galois_keys(rt.keys.galois, rt.params, ss);
    GaloisKeys back = load_galois_keys(ss, rt.params);
    serial_ok = serial_ok && back.by_step.size() == rt.keys.galois.by_step.size();
  }
  r.expect(serial_ok, "serialization round trips are bit-exact");
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* name;
    std::function<void(CriterionResult&)> fn;
  };

  std::optional<Runtime> deep;  // depth-18 context shared by criteria 6 and 7
  auto deep_runtime = [&]() -> Runtime& {
    if (!deep) deep.emplace(CkksParams::insecure_test(8192, 18, 40), 1618);
    return *deep;
  };

  std::vector<Entry> criteria = {
      {1, "depth-budget iteration caps (9/6 ours, 6/4 JKLS)",
       criterion_depth_budget},
      {2, "encrypted matrix product: 50 pairs per d in {2,4,8}, error < 1e-4, depth 2",
       criterion_mmult},
      {3, "plaintext decomposition identity to 1e-12", criterion_decomposition},
      {4, "GD contraction factor (kappa-1)/(kappa+1) per step",
       criterion_contraction},
      {5, "sweep crossover (GD <=5, AGD >=10) and spot medians",
       criterion_crossover},
      {6, "encrypted-vs-plain AGD trajectory at depth 18",
       [&](CriterionResult& r) { criterion_fig2_agreement(r, deep_runtime()); }},
      {7, "depth exhaustion past the 9/6 iteration caps",
       [&](CriterionResult& r) { criterion_depth_exhaustion(r, deep_runtime()); }},
      {8, "homomorphism suite within 1e-5 and bit-exact serialization",
       criterion_homomorphism},
  };

  int failed = 0;
  for (auto& entry : criteria) {
    CriterionResult result;
    try {
      entry.fn(result);
    } catch (const std::exception& e) {
      result.expect(false, std::string("unexpected exception: ") + e.what());
    }
    std::printf("[%s] criterion %d: %s\n", result.passed ? "PASS" : "FAIL",
                entry.id, entry.name);
    for (const auto& [ok, detail] : result.checks)
      std::printf("        %s %s\n", ok ? "ok:" : "FAILED:", detail.c_str());
    if (!result.passed) ++failed;
    if (entry.id == 7) deep.reset();
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed;
}
