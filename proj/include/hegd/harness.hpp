#pragma once

// Experiment runner: the fixed-instance trajectory study, the (d, kappa)
// sweep comparing GD@9 against AGD@6 under the depth-18 budget, and
// machine-readable result emission. Work items (cell x repetition) run on a
// bounded worker pool; per-repetition RNG streams are derived from
// (seed, d, kappa, repetition) so the thread count never changes results.

#include <array>
#include <atomic>
#include <bit>
#include <cstdio>
#include <mutex>
#include <thread>

#include "hegd/probgen.hpp"
#include "hegd/serialize.hpp"
#include "hegd/solver.hpp"

namespace hegd {

inline const char* algorithm_name(Algorithm a) {
  return a == Algorithm::GD ? "gd" : "agd";
}

inline Algorithm algorithm_from_name(const std::string& s) {
  if (s == "gd") return Algorithm::GD;
  if (s == "agd") return Algorithm::AGD;
  throw ContractError("unknown algorithm: " + s);
}

inline const char* backend_name(SolverBackend b) {
  switch (b) {
    case SolverBackend::PlainExact: return "plain";
    case SolverBackend::PlainSimulatedDepth: return "sim";
    case SolverBackend::Ckks: return "ckks";
  }
  return "?";
}

inline SolverBackend backend_from_name(const std::string& s) {
  if (s == "plain") return SolverBackend::PlainExact;
  if (s == "sim") return SolverBackend::PlainSimulatedDepth;
  if (s == "ckks") return SolverBackend::Ckks;
  throw ContractError("unknown backend: " + s);
}

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t d, double kappa,
                            uint64_t repetition) {
  uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ d);
  h = splitmix64(h ^ std::bit_cast<uint64_t>(kappa));
  h = splitmix64(h ^ repetition);
  return h;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename Fn>
void parallel_for(size_t count, int threads, Fn&& fn) {
  if (threads <= 0)
    threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = static_cast<int>(std::min<size_t>(threads, count));
  if (threads <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// Quantile of a sorted sample with linear interpolation.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ContractError("quantile of an empty sample");
  double pos = q * static_cast<double>(sorted.size() - 1);
  size_t lo = static_cast<size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace detail

// Shared CKKS state for encrypted runs; keys are immutable and usable from
// every worker thread at once.
struct CkksRuntime {
  const CkksParams& params;
  const CkksEncoder& encoder;
  const KeySet& keys;
};

// --- trajectory study ------------------------------------------------------------

struct TrajectorySpec {
  size_t d = 2;
  double kappa = 2.0;
  int repetitions = 100;
  int iterations = 6;
  Algorithm algorithm = Algorithm::AGD;
  SolverBackend backend = SolverBackend::PlainExact;
  int depth_budget = 18;
  uint64_t seed = 0;
  // Fixed optimum (1,1,...) and start (3,3,...) with a fresh random Q per
  // repetition; when false, instances come from make_instance (unit offset).
  bool fixed_endpoints = true;
  int threads = 0;
};

struct TrajectoryDataset {
  TrajectorySpec spec;
  std::vector<QpInstance> instances;
  std::vector<Trace> traces;
};

inline QpInstance trajectory_instance(const TrajectorySpec& spec,
                                      uint64_t rep_seed) {
  GenSpec gen{spec.d, spec.kappa, rep_seed, EigenProfile::UniformSpread};
  if (!spec.fixed_endpoints) return make_instance(gen);
  QpInstance inst;
  inst.d = spec.d;
  inst.Q = random_spd(gen);
  inst.x_star.assign(spec.d, 1.0);
  std::vector<double> qx = mat_vec(inst.Q, inst.x_star);
  inst.p.resize(spec.d);
  for (size_t i = 0; i < spec.d; ++i) inst.p[i] = -qx[i];
  inst.x0.assign(spec.d, 3.0);
  inst.lambda_min = 1.0;
  inst.lambda_max = spec.kappa;
  inst.kappa = spec.kappa;
  std::vector<double> off(spec.d, 2.0);
  inst.radius = norm2(off);
  return inst;
}

namespace detail {

inline Trace run_one(Algorithm algo, SolverBackend backend,
                     const QpInstance& inst, int iterations, int depth_budget,
                     const CkksRuntime* ckks, uint64_t rep_seed) {
  switch (backend) {
    case SolverBackend::PlainExact:
      return algo == Algorithm::GD ? gd_plain(inst, iterations)
                                   : agd_plain(inst, iterations);
    case SolverBackend::PlainSimulatedDepth:
      return solve_simulated(algo, inst, iterations, depth_budget);
    case SolverBackend::Ckks: {
      if (!ckks)
        throw ContractError("Ckks backend requires keys and parameters");
      std::mt19937_64 rng(splitmix64(rep_seed ^ 0xc0ffee));
      const CkksParams& params = ckks->params;
      CkksEncoder const& encoder = ckks->encoder;
      Evaluator eval;
      EncodedMatrix q = encode_matrix(inst.Q, inst.d, encoder, ckks->keys.pub,
                                      rng, params.depth(), params.scale());
      EncodedVector p = encode_vector_replicated(inst.p, inst.d, encoder,
                                                 ckks->keys.pub, rng,
                                                 params.depth(), params.scale());
      EncodedVector x0 = encode_vector_replicated(inst.x0, inst.d, encoder,
                                                  ckks->keys.pub, rng,
                                                  params.depth(), params.scale());
      HeSolverKeys keys{ckks->keys.pub, ckks->keys.relin, ckks->keys.galois};
      QpMeta meta{inst.d, inst.lambda_min, inst.lambda_max};
      TraceContext trace_ctx{&ckks->keys.secret, &inst};
      HeSolveResult result =
          algo == Algorithm::GD
              ? he_gd(q, p, meta, x0, iterations, keys, encoder, eval, rng,
                      trace_ctx)
              : he_agd(q, p, meta, x0, iterations, keys, encoder, eval, rng,
                       trace_ctx);
      return std::move(result.trace);
    }
  }
  throw ContractError("unknown backend");
}

}  // namespace detail

inline TrajectoryDataset run_trajectory(const TrajectorySpec& spec,
                                        const CkksRuntime* ckks = nullptr) {
  if (spec.backend != SolverBackend::PlainExact &&
      spec.iterations > max_iterations(spec.algorithm, spec.depth_budget))
    throw ContractError("run_trajectory: iterations exceed the depth budget");
  TrajectoryDataset out;
  out.spec = spec;
  out.instances.resize(spec.repetitions);
  out.traces.resize(spec.repetitions);
  detail::parallel_for(spec.repetitions, spec.threads, [&](size_t rep) {
    uint64_t rep_seed = detail::derive_seed(spec.seed, spec.d, spec.kappa, rep);
    QpInstance inst = trajectory_instance(spec, rep_seed);
    out.traces[rep] = detail::run_one(spec.algorithm, spec.backend, inst,
                                      spec.iterations, spec.depth_budget, ckks,
                                      rep_seed);
    out.instances[rep] = std::move(inst);
  });
  return out;
}

// Median over repetitions of ||x_t - x*|| for each iteration t.
inline std::vector<double> median_distance_per_iteration(
    const TrajectoryDataset& data) {
  size_t steps = data.traces.at(0).iterates.size();
  std::vector<double> medians(steps);
  for (size_t t = 0; t < steps; ++t) {
    std::vector<double> dists;
    dists.reserve(data.traces.size());
    for (size_t rep = 0; rep < data.traces.size(); ++rep)
      dists.push_back(
          distance_to_optimum(data.instances[rep], data.traces[rep].iterates[t]));
    std::sort(dists.begin(), dists.end());
    medians[t] = detail::quantile_sorted(dists, 0.5);
  }
  return medians;
}

inline void emit_trajectory_csv(const TrajectoryDataset& data, std::ostream& os) {
  size_t d = data.spec.d;
  os << "repetition,iteration";
  for (size_t i = 0; i < d; ++i) os << ",x" << i;
  os << ",dist,tol\n";
  for (size_t rep = 0; rep < data.traces.size(); ++rep) {
    const Trace& trace = data.traces[rep];
    for (size_t t = 0; t < trace.iterates.size(); ++t) {
      os << rep << "," << t;
      for (size_t i = 0; i < d; ++i)
        os << "," << detail::format_double(trace.iterates[t][i]);
      os << ","
         << detail::format_double(
                distance_to_optimum(data.instances[rep], trace.iterates[t]))
         << "," << detail::format_double(trace.tolerances[t]) << "\n";
    }
  }
  if (!os) throw IoError("emit_trajectory_csv: write failed");
}

// --- kappa sweep -----------------------------------------------------------------

struct SweepSpec {
  std::vector<size_t> dims = {2, 4, 8};
  std::vector<double> kappas = {1.5, 2, 3, 5, 10, 20, 50};
  int repetitions = 100;
  SolverBackend backend = SolverBackend::PlainExact;
  int gd_iterations = 9;
  int agd_iterations = 6;
  int depth_budget = 18;
  EigenProfile eigen_profile = EigenProfile::UniformSpread;
  uint64_t seed = 0;
  int threads = 0;

  void validate() const {
    if (dims.empty() || kappas.empty() || repetitions < 1)
      throw ContractError("SweepSpec: empty sweep");
    if (gd_iterations > max_iterations(Algorithm::GD, depth_budget) ||
        agd_iterations > max_iterations(Algorithm::AGD, depth_budget))
      throw ContractError(
          "SweepSpec: iteration counts exceed the depth budget");
  }
};

struct SweepRow {
  size_t d = 0;
  double kappa = 0.0;
  Algorithm algorithm = Algorithm::GD;
  int iterations = 0;
  SolverBackend backend = SolverBackend::PlainExact;
  double median_tol = 0.0;
  double q1_tol = 0.0;
  double q3_tol = 0.0;
  Algorithm winner = Algorithm::GD;
  uint64_t seed = 0;
};

struct SweepReport {
  SweepSpec spec;
  std::vector<SweepRow> rows;  // two per cell: GD then AGD

  const SweepRow* find(size_t d, double kappa, Algorithm algo) const {
    for (const auto& r : rows)
      if (r.d == d && r.kappa == kappa && r.algorithm == algo) return &r;
    return nullptr;
  }
};

inline SweepReport run_sweep(const SweepSpec& spec,
                             const CkksRuntime* ckks = nullptr) {
  spec.validate();
  size_t cells = spec.dims.size() * spec.kappas.size();
  size_t reps = static_cast<size_t>(spec.repetitions);
  std::vector<double> gd_tols(cells * reps), agd_tols(cells * reps);

  detail::parallel_for(cells * reps, spec.threads, [&](size_t item) {
    size_t cell = item / reps;
    size_t rep = item % reps;
    size_t d = spec.dims[cell / spec.kappas.size()];
    double kappa = spec.kappas[cell % spec.kappas.size()];
    uint64_t rep_seed = detail::derive_seed(spec.seed, d, kappa, rep);
    GenSpec gen{d, kappa, rep_seed, spec.eigen_profile};
    QpInstance inst = make_instance(gen);
    Trace gd = detail::run_one(Algorithm::GD, spec.backend, inst,
                               spec.gd_iterations, spec.depth_budget, ckks,
                               rep_seed);
    Trace agd = detail::run_one(Algorithm::AGD, spec.backend, inst,
                                spec.agd_iterations, spec.depth_budget, ckks,
                                rep_seed);
    gd_tols[item] = std::max(0.0, gd.tolerances.back());
    agd_tols[item] = std::max(0.0, agd.tolerances.back());
  });

  SweepReport report;
  report.spec = spec;
  for (size_t cell = 0; cell < cells; ++cell) {
    size_t d = spec.dims[cell / spec.kappas.size()];
    double kappa = spec.kappas[cell % spec.kappas.size()];
    auto stats = [&](const std::vector<double>& all) {
      std::vector<double> tols(all.begin() + cell * reps,
                               all.begin() + (cell + 1) * reps);
      std::sort(tols.begin(), tols.end());
      return std::array<double, 3>{detail::quantile_sorted(tols, 0.5),
                                   detail::quantile_sorted(tols, 0.25),
                                   detail::quantile_sorted(tols, 0.75)};
    };
    auto [gd_med, gd_q1, gd_q3] = stats(gd_tols);
    auto [agd_med, agd_q1, agd_q3] = stats(agd_tols);
    Algorithm winner = gd_med <= agd_med ? Algorithm::GD : Algorithm::AGD;
    report.rows.push_back({d, kappa, Algorithm::GD, spec.gd_iterations,
                           spec.backend, gd_med, gd_q1, gd_q3, winner,
                           spec.seed});
    report.rows.push_back({d, kappa, Algorithm::AGD, spec.agd_iterations,
                           spec.backend, agd_med, agd_q1, agd_q3, winner,
                           spec.seed});
  }
  return report;
}

// --- emission ---------------------------------------------------------------------

inline void emit_csv(const SweepReport& report, std::ostream& os) {
  os << "d,kappa,algorithm,iterations,backend,median_tol,q1_tol,q3_tol,winner,seed\n";
  for (const auto& r : report.rows) {
    os << r.d << "," << detail::format_double(r.kappa) << ","
       << algorithm_name(r.algorithm) << "," << r.iterations << ","
       << backend_name(r.backend) << "," << detail::format_double(r.median_tol)
       << "," << detail::format_double(r.q1_tol) << ","
       << detail::format_double(r.q3_tol) << "," << algorithm_name(r.winner)
       << "," << r.seed << "\n";
  }
  if (!os) throw IoError("emit_csv: write failed");
}

inline nlohmann::json sweep_row_to_json(const SweepRow& r) {
  return nlohmann::json{{"d", r.d},
                        {"kappa", r.kappa},
                        {"algorithm", algorithm_name(r.algorithm)},
                        {"iterations", r.iterations},
                        {"backend", backend_name(r.backend)},
                        {"median_tol", r.median_tol},
                        {"q1_tol", r.q1_tol},
                        {"q3_tol", r.q3_tol},
                        {"winner", algorithm_name(r.winner)},
                        {"seed", r.seed}};
}

inline void emit_json(const SweepReport& report, std::ostream& os) {
  nlohmann::json j;
  j["spec"] = {{"dims", report.spec.dims},
               {"kappas", report.spec.kappas},
               {"repetitions", report.spec.repetitions},
               {"backend", backend_name(report.spec.backend)},
               {"gd_iterations", report.spec.gd_iterations},
               {"agd_iterations", report.spec.agd_iterations},
               {"depth_budget", report.spec.depth_budget},
               {"eigen_profile",
                report.spec.eigen_profile == EigenProfile::UniformSpread
                    ? "uniform-spread"
                    : "two-point"},
               {"seed", report.spec.seed}};
  j["rows"] = nlohmann::json::array();
  for (const auto& r : report.rows) j["rows"].push_back(sweep_row_to_json(r));
  os << j.dump(2) << "\n";
  if (!os) throw IoError("emit_json: write failed");
}

enum class EmitFormat { Csv, Json };

inline void emit(const SweepReport& report, EmitFormat format,
                 const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("emit: cannot open " + path);
  if (format == EmitFormat::Csv)
    emit_csv(report, os);
  else
    emit_json(report, os);
  os.flush();
  if (!os) throw IoError("emit: write failed for " + path);
}

// --- parsing (round-trip oracle and downstream tooling) -----------------------------

inline std::vector<SweepRow> parse_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw IoError("parse_csv: empty input");
  if (header !=
      "d,kappa,algorithm,iterations,backend,median_tol,q1_tol,q3_tol,winner,seed")
    throw IoError("parse_csv: unexpected header");
  std::vector<SweepRow> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 10) throw IoError("parse_csv: malformed row");
    SweepRow r;
    r.d = std::stoull(fields[0]);
    r.kappa = std::stod(fields[1]);
    r.algorithm = algorithm_from_name(fields[2]);
    r.iterations = std::stoi(fields[3]);
    r.backend = backend_from_name(fields[4]);
    r.median_tol = std::stod(fields[5]);
    r.q1_tol = std::stod(fields[6]);
    r.q3_tol = std::stod(fields[7]);
    r.winner = algorithm_from_name(fields[8]);
    r.seed = std::stoull(fields[9]);
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<SweepRow> parse_json_rows(std::istream& is) {
  nlohmann::json j = nlohmann::json::parse(is);
  std::vector<SweepRow> rows;
  for (const auto& jr : j.at("rows")) {
    SweepRow r;
    r.d = jr.at("d").get<size_t>();
    r.kappa = jr.at("kappa").get<double>();
    r.algorithm = algorithm_from_name(jr.at("algorithm").get<std::string>());
    r.iterations = jr.at("iterations").get<int>();
    r.backend = backend_from_name(jr.at("backend").get<std::string>());
    r.median_tol = jr.at("median_tol").get<double>();
    r.q1_tol = jr.at("q1_tol").get<double>();
    r.q3_tol = jr.at("q3_tol").get<double>();
    r.winner = algorithm_from_name(jr.at("winner").get<std::string>());
    r.seed = jr.at("seed").get<uint64_t>();
    rows.push_back(r);
  }
  return rows;
}

}  // namespace hegd
