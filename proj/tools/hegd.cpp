// Command-line front end: key generation, single solves, the kappa sweep
// and the fixed-endpoint trajectory study. Exit codes: 0 success,
// 2 contract violation, 3 depth exhaustion, 4 I/O failure.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <random>

#include "hegd/harness.hpp"

using namespace hegd;
namespace fs = std::filesystem;

namespace {

std::vector<double> split_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

std::vector<size_t> split_sizes(const std::string& csv) {
  std::vector<size_t> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoull(tok));
  return out;
}

struct LoadedKeys {
  CkksParams params;
  KeySet keys;
};

LoadedKeys load_key_dir(const std::string& dir) {
  std::ifstream pj(dir + "/params.json");
  if (!pj) throw IoError("cannot open " + dir + "/params.json");
  CkksParams params = params_from_json(nlohmann::json::parse(pj));
  LoadedKeys out{params, {}};
  out.keys.secret = load_from_file(dir + "/secret.key", [&](std::istream& is) {
    return load_secret_key(is, params);
  });
  out.keys.pub = load_from_file(dir + "/public.key", [&](std::istream& is) {
    return load_public_key(is, params);
  });
  out.keys.relin = load_from_file(dir + "/relin.key", [&](std::istream& is) {
    return load_relin_key(is, params);
  });
  out.keys.galois = load_from_file(dir + "/galois.keys", [&](std::istream& is) {
    return load_galois_keys(is, params);
  });
  return out;
}

int run_keygen(const std::string& preset, const std::string& out_dir,
               uint32_t n, int depth, int scale_bits, uint64_t seed,
               bool seeded) {
  SecurityPreset sp;
  uint32_t def_n;
  if (preset == "secure128") {
    sp = SecurityPreset::Secure128;
    def_n = 32768;
  } else if (preset == "insecure-test") {
    sp = SecurityPreset::InsecureTest;
    def_n = 8192;
  } else {
    throw ContractError("keygen: preset must be secure128 or insecure-test");
  }
  if (n == 0) n = def_n;
  CkksParams params = CkksParams::make(n, depth, scale_bits, sp,
                                       /*allow_insecure=*/sp ==
                                           SecurityPreset::InsecureTest);
  std::mt19937_64 rng(seeded ? seed : std::random_device{}());
  fs::create_directories(out_dir);

  {
    std::ofstream os(out_dir + "/params.json");
    if (!os) throw IoError("cannot write " + out_dir + "/params.json");
    os << params_to_json(params).dump(2) << "\n";
  }
  SecretKey sk = make_secret_key(params, rng);
  save_to_file(out_dir + "/secret.key",
               [&](std::ostream& os) { save_secret_key(sk, params, os); });
  PublicKey pk = make_public_key(params, sk, rng);
  save_to_file(out_dir + "/public.key",
               [&](std::ostream& os) { save_public_key(pk, params, os); });
  {
    RelinKey rlk = make_relin_key(params, sk, rng);
    save_to_file(out_dir + "/relin.key",
                 [&](std::ostream& os) { save_relin_key(rlk, params, os); });
  }
  // Galois keys are written one at a time; the full set can run to
  // gigabytes at the secure128 ring degree.
  std::vector<int> steps = default_galois_steps(params);
  save_to_file(out_dir + "/galois.keys", [&](std::ostream& os) {
    io::put_header(os, ObjectTag::GaloisKeys);
    io::put_fingerprint(os, params);
    io::put_uint<uint32_t>(os, static_cast<uint32_t>(steps.size()));
    for (int step : steps) {
      GaloisKey gk = make_galois_key(params, sk, step, rng);
      io::put_uint<uint64_t>(os, static_cast<uint64_t>(static_cast<int64_t>(step)));
      io::put_uint<uint64_t>(os, gk.galois_elt);
      io::put_ksk(os, gk.key);
    }
  });
  std::cout << "wrote keys for n=" << params.n() << " depth=" << params.depth()
            << " scale_bits=" << params.scale_bits() << " ("
            << (sp == SecurityPreset::Secure128 ? "secure128" : "insecure-test")
            << ") to " << out_dir << "\n";
  return 0;
}

nlohmann::json trace_to_json(const Trace& trace) {
  nlohmann::json per = nlohmann::json::array();
  for (size_t t = 0; t < trace.iterates.size(); ++t) {
    nlohmann::json entry;
    entry["t"] = t;
    entry["x"] = trace.iterates[t];
    if (t < trace.tolerances.size()) entry["tolerance"] = trace.tolerances[t];
    if (t < trace.levels.size()) entry["level"] = trace.levels[t];
    if (t < trace.seconds.size()) entry["seconds"] = trace.seconds[t];
    per.push_back(std::move(entry));
  }
  return per;
}

int run_solve(const std::string& instance_path, const std::string& algo_name_s,
              int iters, const std::string& backend_s,
              const std::string& keys_dir, const std::string& trace_out,
              int depth_budget, uint64_t seed) {
  std::ifstream is(instance_path);
  if (!is) throw IoError("cannot open instance file " + instance_path);
  QpInstance inst = instance_from_json(nlohmann::json::parse(is));
  Algorithm algo = algorithm_from_name(algo_name_s);
  SolverBackend backend = backend_from_name(backend_s);

  Trace trace;
  if (backend == SolverBackend::PlainExact) {
    trace = algo == Algorithm::GD ? gd_plain(inst, iters) : agd_plain(inst, iters);
  } else if (backend == SolverBackend::PlainSimulatedDepth) {
    trace = solve_simulated(algo, inst, iters, depth_budget);
  } else {
    if (keys_dir.empty())
      throw ContractError("solve: --keys DIR is required for the ckks backend");
    LoadedKeys lk = load_key_dir(keys_dir);
    CkksEncoder encoder(lk.params);
    CkksRuntime runtime{lk.params, encoder, lk.keys};
    trace = detail::run_one(algo, SolverBackend::Ckks, inst, iters,
                            lk.params.depth(), &runtime, seed);
  }

  nlohmann::json j;
  j["instance_id"] = instance_path;
  j["algorithm"] = algorithm_name(algo);
  j["backend"] = backend_name(backend);
  j["iterations"] = iters;
  j["final_tolerance"] = trace.tolerances.back();
  j["per_iteration"] = trace_to_json(trace);
  if (!trace_out.empty()) {
    std::ofstream os(trace_out);
    if (!os) throw IoError("cannot write " + trace_out);
    os << j.dump(2) << "\n";
  }
  std::cout << "final_tolerance " << detail::format_double(trace.tolerances.back())
            << "\n";
  return 0;
}

int run_bench(const std::string& dims_s, const std::string& kappas_s, int reps,
              const std::string& backend_s, const std::string& out_path,
              const std::string& format_s, uint64_t seed, int gd_iters,
              int agd_iters, int depth_budget, int threads,
              const std::string& keys_dir) {
  SweepSpec spec;
  spec.dims = split_sizes(dims_s);
  spec.kappas = split_doubles(kappas_s);
  spec.repetitions = reps;
  spec.backend = backend_from_name(backend_s);
  spec.gd_iterations = gd_iters;
  spec.agd_iterations = agd_iters;
  spec.depth_budget = depth_budget;
  spec.seed = seed;
  spec.threads = threads;

  SweepReport report;
  if (spec.backend == SolverBackend::Ckks) {
    if (keys_dir.empty())
      throw ContractError("bench: --keys DIR is required for the ckks backend");
    LoadedKeys lk = load_key_dir(keys_dir);
    CkksEncoder encoder(lk.params);
    CkksRuntime runtime{lk.params, encoder, lk.keys};
    spec.depth_budget = lk.params.depth();
    report = run_sweep(spec, &runtime);
  } else {
    report = run_sweep(spec);
  }
  EmitFormat format = format_s == "json" ? EmitFormat::Json : EmitFormat::Csv;
  emit(report, format, out_path);
  std::cout << "wrote " << report.rows.size() << " rows to " << out_path << "\n";
  return 0;
}

int run_trace(bool fig2, size_t d, double kappa, int reps, int iters,
              const std::string& algo_s, const std::string& backend_s,
              const std::string& out_path, uint64_t seed, int threads,
              const std::string& keys_dir) {
  TrajectorySpec spec;
  spec.d = fig2 ? 2 : d;
  spec.kappa = fig2 ? 2.0 : kappa;
  spec.repetitions = reps;
  spec.iterations = iters;
  spec.algorithm = algorithm_from_name(algo_s);
  spec.backend = backend_from_name(backend_s);
  spec.seed = seed;
  spec.threads = threads;
  spec.fixed_endpoints = true;  // x* = (1,..), x0 = (3,..)

  TrajectoryDataset data;
  if (spec.backend == SolverBackend::Ckks) {
    if (keys_dir.empty())
      throw ContractError("trace: --keys DIR is required for the ckks backend");
    LoadedKeys lk = load_key_dir(keys_dir);
    CkksEncoder encoder(lk.params);
    CkksRuntime runtime{lk.params, encoder, lk.keys};
    spec.depth_budget = lk.params.depth();
    data = run_trajectory(spec, &runtime);
  } else {
    data = run_trajectory(spec);
  }
  std::ofstream os(out_path);
  if (!os) throw IoError("cannot write " + out_path);
  emit_trajectory_csv(data, os);
  auto medians = median_distance_per_iteration(data);
  std::cout << "median distance to x* per iteration:";
  for (double m : medians) std::cout << " " << detail::format_double(m);
  std::cout << "\nwrote " << out_path << "\n";
  return 0;
}

int run_gen(size_t d, double kappa, uint64_t seed, const std::string& profile_s,
            const std::string& out_path) {
  GenSpec spec{d, kappa, seed,
               profile_s == "two-point" ? EigenProfile::TwoPoint
                                        : EigenProfile::UniformSpread};
  QpInstance inst = make_instance(spec);
  std::ofstream os(out_path);
  if (!os) throw IoError("cannot write " + out_path);
  os << instance_to_json(inst).dump(2) << "\n";
  std::cout << "wrote instance d=" << d << " kappa=" << kappa << " to "
            << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"homomorphically encrypted gradient descent for quadratic programs"};
  app.require_subcommand(1);

  // keygen
  auto* keygen_cmd = app.add_subcommand("keygen", "generate a CKKS key set");
  std::string kg_preset = "insecure-test", kg_out = "keys";
  uint32_t kg_n = 0;
  int kg_depth = 18, kg_scale = 40;
  uint64_t kg_seed = 0;
  bool kg_seeded = false;
  keygen_cmd->add_option("--preset", kg_preset, "secure128 | insecure-test");
  keygen_cmd->add_option("--out", kg_out, "output directory")->required();
  keygen_cmd->add_option("--n", kg_n, "ring degree override");
  keygen_cmd->add_option("--depth", kg_depth, "rescaling levels (default 18)");
  keygen_cmd->add_option("--scale-bits", kg_scale, "log2 of the scale (default 40)");
  keygen_cmd->add_option("--seed", kg_seed, "deterministic keygen seed")
      ->each([&](const std::string&) { kg_seeded = true; });

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "run one solver on one instance");
  std::string sv_instance, sv_algo = "gd", sv_backend = "plain", sv_keys,
              sv_trace_out;
  int sv_iters = 9, sv_budget = 18;
  uint64_t sv_seed = 0;
  solve_cmd->add_option("--instance", sv_instance, "instance JSON file")->required();
  solve_cmd->add_option("--algo", sv_algo, "gd | agd");
  solve_cmd->add_option("--iters", sv_iters, "iteration count");
  solve_cmd->add_option("--backend", sv_backend, "plain | sim | ckks");
  solve_cmd->add_option("--keys", sv_keys, "key directory (ckks backend)");
  solve_cmd->add_option("--trace", sv_trace_out, "trace output JSON path");
  solve_cmd->add_option("--depth-budget", sv_budget, "levels for the sim backend");
  solve_cmd->add_option("--seed", sv_seed, "encryption randomness seed");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "run the (d, kappa) sweep");
  std::string bn_dims = "2,4,8", bn_kappas = "1.5,2,3,5,10,20,50",
              bn_backend = "plain", bn_out = "report.csv", bn_format = "csv",
              bn_keys;
  int bn_reps = 100, bn_gd = 9, bn_agd = 6, bn_budget = 18, bn_threads = 0;
  uint64_t bn_seed = 0;
  bench_cmd->add_option("--dims", bn_dims, "comma-separated dimensions");
  bench_cmd->add_option("--kappas", bn_kappas, "comma-separated condition numbers");
  bench_cmd->add_option("--reps", bn_reps, "repetitions per cell (default 100)");
  bench_cmd->add_option("--backend", bn_backend, "plain | sim | ckks");
  bench_cmd->add_option("--out", bn_out, "report path")->required();
  bench_cmd->add_option("--format", bn_format, "csv | json");
  bench_cmd->add_option("--seed", bn_seed, "sweep seed");
  bench_cmd->add_option("--gd-iters", bn_gd, "GD iterations (default 9)");
  bench_cmd->add_option("--agd-iters", bn_agd, "AGD iterations (default 6)");
  bench_cmd->add_option("--depth-budget", bn_budget, "level budget (default 18)");
  bench_cmd->add_option("--threads", bn_threads, "worker threads (0 = auto)");
  bench_cmd->add_option("--keys", bn_keys, "key directory (ckks backend)");

  // trace
  auto* trace_cmd = app.add_subcommand("trace", "trajectory study");
  bool tr_fig2 = false;
  size_t tr_d = 2;
  double tr_kappa = 2.0;
  int tr_reps = 100, tr_iters = 6, tr_threads = 0;
  std::string tr_algo = "agd", tr_backend = "plain", tr_out = "trajectory.csv",
              tr_keys;
  uint64_t tr_seed = 0;
  trace_cmd->add_flag("--fig2", tr_fig2,
                      "fixed preset: d=2, kappa=2, x*=(1,1), x0=(3,3)");
  trace_cmd->add_option("--d", tr_d, "dimension");
  trace_cmd->add_option("--kappa", tr_kappa, "condition number");
  trace_cmd->add_option("--reps", tr_reps, "repetitions (default 100)");
  trace_cmd->add_option("--iters", tr_iters, "iterations (default 6)");
  trace_cmd->add_option("--algo", tr_algo, "gd | agd");
  trace_cmd->add_option("--backend", tr_backend, "plain | sim | ckks");
  trace_cmd->add_option("--out", tr_out, "CSV output path")->required();
  trace_cmd->add_option("--seed", tr_seed, "seed");
  trace_cmd->add_option("--threads", tr_threads, "worker threads (0 = auto)");
  trace_cmd->add_option("--keys", tr_keys, "key directory (ckks backend)");

  // gen
  auto* gen_cmd = app.add_subcommand("gen", "generate a QP instance fixture");
  size_t gn_d = 2;
  double gn_kappa = 2.0;
  uint64_t gn_seed = 0;
  std::string gn_profile = "uniform-spread", gn_out = "instance.json";
  gen_cmd->add_option("--d", gn_d, "dimension");
  gen_cmd->add_option("--kappa", gn_kappa, "condition number");
  gen_cmd->add_option("--seed", gn_seed, "seed");
  gen_cmd->add_option("--profile", gn_profile, "uniform-spread | two-point");
  gen_cmd->add_option("--out", gn_out, "output JSON path")->required();

  try {
    app.parse(argc, argv);
    if (keygen_cmd->parsed())
      return run_keygen(kg_preset, kg_out, kg_n, kg_depth, kg_scale, kg_seed,
                        kg_seeded);
    if (solve_cmd->parsed())
      return run_solve(sv_instance, sv_algo, sv_iters, sv_backend, sv_keys,
                       sv_trace_out, sv_budget, sv_seed);
    if (bench_cmd->parsed())
      return run_bench(bn_dims, bn_kappas, bn_reps, bn_backend, bn_out,
                       bn_format, bn_seed, bn_gd, bn_agd, bn_budget, bn_threads,
                       bn_keys);
    if (trace_cmd->parsed())
      return run_trace(tr_fig2, tr_d, tr_kappa, tr_reps, tr_iters, tr_algo,
                       tr_backend, tr_out, tr_seed, tr_threads, tr_keys);
    if (gen_cmd->parsed())
      return run_gen(gn_d, gn_kappa, gn_seed, gn_profile, gn_out);
    return 2;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const DepthExhausted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
