#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rkhsbound/baselines.hpp"
#include "rkhsbound/benchmark.hpp"
#include "rkhsbound/errors.hpp"
#include "rkhsbound/io.hpp"
#include "rkhsbound/oracle.hpp"
#include "rkhsbound/scenarios.hpp"

using namespace rkhsbound;

namespace {

constexpr int kExitInfeasible = 2;
constexpr int kExitNonConvergence = 3;

VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

struct BoundArgs {
  std::string problem;
  std::vector<double> x;
  std::vector<double> h;
  std::string method{"dual"};
  std::vector<double> sigma;
  bool json{false};
  int iterations{0};
  double learning_rate{0};
};

int run_bound(const BoundArgs& a) {
  const Problem<double> problem = load_problem(a.problem);
  const VectorXd x = to_vector(a.x);
  const VectorXd h = a.h.empty() ? VectorXd::Ones(problem.output_dim()).eval() : to_vector(a.h);
  const BoundQuery<double> query{x, h};
  Json out{{"method", a.method}};
  int code = 0;

  if (a.method == "dual") {
    auto opts = OptimizerOptions<double>::tight();
    if (a.iterations > 0) {
      opts.max_iterations = a.iterations;
      opts.refine_iterations = 0;
    }
    if (a.learning_rate > 0) opts.learning_rate = a.learning_rate;
    if (!a.sigma.empty()) opts.initial_sigma = to_vector(a.sigma);
    const auto cert = optimize_bound(problem, query, opts);
    out["certificate"] = to_json(cert);
    out["value"] = cert.value;
    if (cert.status == BoundStatus::IterationLimit) code = kExitNonConvergence;
  } else if (a.method == "dual-value") {
    const VectorXd sigma = a.sigma.empty() ? problem.noise.default_sigma() : to_vector(a.sigma);
    const auto ev = DualObjective<double>(problem, query).evaluate(sigma, true);
    out["value"] = ev.value;
    out["beta"] = ev.beta;
    out["sigma"] = vector_json(sigma);
    out["gradient"] = vector_json(ev.gradient);
  } else if (a.method == "oracle") {
    const auto sol = solve_primal(problem, query);
    out["value"] = sol.value;
    out["dual_value"] = sol.dual_value;
    out["kkt_residual"] = sol.kkt_residual;
    out["sigma"] = vector_json(sol.sigma());
  } else if (a.method == "reed" || a.method == "fixed-hashimoto" || a.method == "fixed-yang") {
    Envelope env;
    if (a.method == "reed") {
      const double sb = a.sigma.empty() ? uniform_noise_bound(problem) : a.sigma.front();
      env = reed_bound(problem, x, h, sb);
    } else {
      env = fixed_sigma_bound(problem, x, h,
                              a.method == "fixed-yang" ? FixedSigmaVariant::Yang : FixedSigmaVariant::Hashimoto);
    }
    out["value"] = env.upper();
    out["lower"] = env.lower();
    out["center"] = env.center;
    out["radius"] = env.radius;
  } else if (a.method == "alternating") {
    const auto res = scharnhorst_alternating(problem, query);
    out["value"] = res.value;
    out["iterations"] = res.iterations;
    out["converged"] = res.converged;
    if (!res.converged) code = kExitNonConvergence;
  } else {
    throw std::invalid_argument("unknown method '" + a.method + "'");
  }

  if (a.json) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::printf("%.12g\n", out["value"].get<double>());
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Worst-case bounds for kernel regression under bounded noise"};
  app.require_subcommand(1);

  BoundArgs ba;
  auto* bound = app.add_subcommand("bound", "Upper bound on h^T f(x) for one query");
  bound->set_help_flag("--help", "Print this help message and exit");
  bound->add_option("--problem", ba.problem, "Problem JSON file")->required()->check(CLI::ExistingFile);
  bound->add_option("--x", ba.x, "Test input")->required()->delimiter(',');
  bound->add_option("--h", ba.h, "Output direction (default: all ones)")->delimiter(',');
  bound->add_option("--method", ba.method,
                    "dual | dual-value | oracle | reed | fixed-hashimoto | fixed-yang | alternating")
      ->capture_default_str();
  bound->add_option("--sigma", ba.sigma, "Noise parameters (initial point, evaluation point or reed sigma)")
      ->delimiter(',');
  bound->add_option("--iterations", ba.iterations, "Adam iterations without refinement");
  bound->add_option("--learning-rate", ba.learning_rate, "Adam learning rate");
  bound->add_flag("--json", ba.json, "Print the full result as JSON");

  std::string config_path;
  std::string bench_output;
  auto* bench = app.add_subcommand("benchmark", "Run the method comparison");
  bench->add_option("--config", config_path, "Benchmark JSON config")->check(CLI::ExistingFile);
  bench->add_option("--output", bench_output, "CSV output path (sidecar gets .json appended)");

  QuadrotorConfig qc;
  std::string quad_out{"quadrotor.json"};
  auto* quad = app.add_subcommand("quadrotor", "Generate a quadrotor problem file");
  quad->add_option("--n-data", qc.n_data)->capture_default_str();
  quad->add_option("--seed", qc.seed)->capture_default_str();
  quad->add_option("--wind-a", qc.wind_a)->capture_default_str();
  quad->add_option("--wind-b", qc.wind_b)->capture_default_str();
  quad->add_option("--out", quad_out)->capture_default_str();

  std::uint64_t illu_seed = 0;
  int illu_n = 2;
  std::string illu_out{"illustrative.json"};
  auto* illu = app.add_subcommand("illustrative", "Generate the two-point illustrative problem");
  illu->add_option("--seed", illu_seed)->capture_default_str();
  illu->add_option("--n-data", illu_n, "Must be 2")->check(CLI::Range(2, 2));
  illu->add_option("--out", illu_out)->capture_default_str();

  std::uint64_t fig_seed = 0;
  std::string fig_out{"fig1.csv"};
  auto* fig = app.add_subcommand("fig1", "Optimal and dual curves for the illustrative problem");
  fig->add_option("--seed", fig_seed)->capture_default_str();
  fig->add_option("--out", fig_out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*bound) return run_bound(ba);
    if (*bench) {
      BenchmarkConfig cfg;
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        cfg = BenchmarkConfig::from_json(Json::parse(in));
      }
      if (!bench_output.empty()) cfg.output = bench_output;
      const auto result = run_benchmark(cfg);
      write_benchmark(result);
      std::printf("%-16s %-3s %8s %8s %8s %9s %9s %9s %5s\n", "method", "tag", "sub_min", "sub_avg", "sub_max",
                  "t_min", "t_avg", "t_max", "excl");
      for (const auto& r : result.rows) {
        std::printf("%-16s %-3s %8.3f %8.3f %8.3f %9.4f %9.4f %9.4f %5d\n", r.method.c_str(), r.tag.c_str(),
                    r.sub_min, r.sub_avg, r.sub_max, r.t_min, r.t_avg, r.t_max, r.excluded);
      }
      return 0;
    }
    if (*quad) {
      save_problem(gen_quadrotor(qc).problem, quad_out);
      return 0;
    }
    if (*illu) {
      save_problem(gen_illustrative(illu_seed).problem, illu_out);
      return 0;
    }
    if (*fig) {
      emit_fig1_data(gen_illustrative(fig_seed), fig_out);
      return 0;
    }
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const NonConvergenceError& e) {
    std::cerr << "non-convergence: " << e.what() << "\n";
    return kExitNonConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
