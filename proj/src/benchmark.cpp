#include "rkhsbound/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

#include "rkhsbound/baselines.hpp"
#include "rkhsbound/errors.hpp"
#include "rkhsbound/oracle.hpp"

#ifndef RKHSBOUND_GIT_HASH
#define RKHSBOUND_GIT_HASH "unknown"
#endif

namespace rkhsbound {

double suboptimality(double bound_value, double optimal_value, double prior_value) {
  if (!(prior_value > optimal_value + 1e-12)) {
    throw std::invalid_argument("suboptimality: prior bound does not exceed the optimal bound");
  }
  if (bound_value < optimal_value - 1e-8) {
    throw std::invalid_argument("suboptimality: bound is below the optimal value");
  }
  return std::max(0.0, (bound_value - optimal_value) / (prior_value - optimal_value));
}

void BenchmarkConfig::validate() const {
  if (scenario != "quadrotor" && scenario != "illustrative" && scenario != "file") {
    throw std::invalid_argument("benchmark: unknown scenario '" + scenario + "'");
  }
  if (scenario == "file" && problem_file.empty()) throw std::invalid_argument("benchmark: problem_file is required");
  if (methods.empty()) throw std::invalid_argument("benchmark: at least one method is required");
  for (const auto& m : methods) {
    if (std::find(all_methods().begin(), all_methods().end(), m) == all_methods().end()) {
      throw std::invalid_argument("benchmark: unknown method '" + m + "'");
    }
  }
  if (std::find(methods.begin(), methods.end(), "oracle-e") == methods.end()) {
    throw std::invalid_argument("benchmark: oracle-e is required to report suboptimality");
  }
  if (seeds.empty()) throw std::invalid_argument("benchmark: at least one seed is required");
  if (test_points < 1) throw std::invalid_argument("benchmark: test_points must be positive");
  if (directions.empty()) throw std::invalid_argument("benchmark: at least one direction is required");
  if (dualgd_iterations < 1 || !(dualgd_learning_rate > 0)) throw std::invalid_argument("benchmark: bad Dual-GD options");
  if (!(alternating_target > 0)) throw std::invalid_argument("benchmark: alternating_target must be positive");
  if (scenario == "quadrotor") quadrotor.validate();
}

BenchmarkConfig BenchmarkConfig::from_json(const Json& j) {
  BenchmarkConfig c;
  c.scenario = j.value("scenario", c.scenario);
  c.problem_file = j.value("problem_file", c.problem_file);
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
  c.test_points = j.value("test_points", c.test_points);
  if (j.contains("directions")) c.directions = j.at("directions").get<std::vector<Index>>();
  c.quadrotor.n_data = j.value("n_data", c.quadrotor.n_data);
  if (j.contains("quadrotor")) {
    const auto& q = j.at("quadrotor");
    c.quadrotor.n_data = q.value("n_data", c.quadrotor.n_data);
    c.quadrotor.wind_a = q.value("wind_a", c.quadrotor.wind_a);
    c.quadrotor.wind_b = q.value("wind_b", c.quadrotor.wind_b);
    c.quadrotor.lengthscale = q.value("lengthscale", c.quadrotor.lengthscale);
    c.quadrotor.period = q.value("period", c.quadrotor.period);
    c.quadrotor.gamma_f = q.value("gamma_f", c.quadrotor.gamma_f);
    c.quadrotor.gamma_target = q.value("gamma_target", c.quadrotor.gamma_target);
    c.quadrotor.n_centers = q.value("n_centers", c.quadrotor.n_centers);
  }
  if (j.contains("dualgd")) {
    c.dualgd_iterations = j.at("dualgd").value("iterations", c.dualgd_iterations);
    c.dualgd_learning_rate = j.at("dualgd").value("learning_rate", c.dualgd_learning_rate);
  }
  if (j.contains("alternating")) c.alternating_target = j.at("alternating").value("target", c.alternating_target);
  if (j.contains("reed")) c.reed_sigma = j.at("reed").value("sigma", c.reed_sigma);
  c.output = j.value("output", c.output);
  c.validate();
  return c;
}

Json BenchmarkConfig::to_json() const {
  return {{"scenario", scenario},
          {"problem_file", problem_file},
          {"seeds", seeds},
          {"methods", methods},
          {"test_points", test_points},
          {"directions", directions},
          {"n_data", quadrotor.n_data},
          {"quadrotor",
           {{"n_data", quadrotor.n_data},
            {"wind_a", quadrotor.wind_a},
            {"wind_b", quadrotor.wind_b},
            {"lengthscale", quadrotor.lengthscale},
            {"period", quadrotor.period},
            {"gamma_f", quadrotor.gamma_f},
            {"gamma_target", quadrotor.gamma_target},
            {"n_centers", quadrotor.n_centers}}},
          {"dualgd", {{"iterations", dualgd_iterations}, {"learning_rate", dualgd_learning_rate}}},
          {"alternating", {{"target", alternating_target}}},
          {"reed", {{"sigma", reed_sigma}}},
          {"output", output}};
}

namespace {

constexpr double kTwoPi = 6.283185307179586;

struct Instance {
  Problem<double> ellipsoidal;
  std::function<std::optional<Problem<double>>(Index)> pointwise;
  std::function<VectorXd(std::mt19937_64&)> draw_test_point;
};

bool uniform_pointwise(const Problem<double>& p) {
  if (p.noise.kind() != NoiseKind::Pointwise || p.size() == 0) return false;
  const VectorXd g = p.noise.gammas();
  return g.maxCoeff() - g.minCoeff() <= 1e-12 * g.maxCoeff();
}

Instance make_instance(const BenchmarkConfig& config, std::uint64_t seed) {
  Instance inst;
  if (config.scenario == "quadrotor") {
    QuadrotorConfig qc = config.quadrotor;
    qc.seed = seed;
    auto scen = std::make_shared<QuadrotorScenario>(gen_quadrotor(qc));
    inst.ellipsoidal = scen->problem;
    inst.pointwise = [scen](Index d) -> std::optional<Problem<double>> { return pointwise_variant(*scen, d); };
    inst.draw_test_point = [](std::mt19937_64& rng) {
      return VectorXd::Constant(1, std::uniform_real_distribution<double>(0.0, kTwoPi)(rng));
    };
    return inst;
  }
  inst.ellipsoidal = config.scenario == "illustrative" ? gen_illustrative(seed).problem
                                                       : load_problem(config.problem_file);
  const auto same = inst.ellipsoidal;
  inst.pointwise = [same](Index) -> std::optional<Problem<double>> {
    if (uniform_pointwise(same)) return same;
    return std::nullopt;
  };
  VectorXd lo = VectorXd::Constant(same.kernel.input_dim(), -3.0);
  VectorXd hi = VectorXd::Constant(same.kernel.input_dim(), 3.0);
  if (config.scenario == "file" && same.size() > 0) {
    lo = hi = same.inputs.front();
    for (const auto& x : same.inputs) {
      lo = lo.cwiseMin(x);
      hi = hi.cwiseMax(x);
    }
  }
  inst.draw_test_point = [lo, hi](std::mt19937_64& rng) {
    VectorXd x(lo.size());
    for (Index d = 0; d < x.size(); ++d) x(d) = std::uniform_real_distribution<double>(lo(d), hi(d))(rng);
    return x;
  };
  return inst;
}

std::string method_tag(const std::string& m) { return m.size() > 2 && m.substr(m.size() - 2) == "-e" ? "e" : "p"; }

bool wants(const BenchmarkConfig& c, const std::string& m) {
  return std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end();
}

template <typename F>
double timed(F&& f, double& value) {
  const auto t0 = std::chrono::steady_clock::now();
  value = f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<BenchmarkRow> aggregate(const std::vector<RunRecord>& runs, const std::vector<std::string>& methods) {
  std::vector<BenchmarkRow> rows;
  for (const auto& m : methods) {
    BenchmarkRow row;
    row.method = m;
    row.tag = method_tag(m);
    double sub_sum = 0;
    double t_sum = 0;
    row.sub_min = row.t_min = std::numeric_limits<double>::infinity();
    row.sub_max = row.t_max = -std::numeric_limits<double>::infinity();
    for (const auto& r : runs) {
      if (r.method != m) continue;
      if (r.excluded) {
        ++row.excluded;
        continue;
      }
      ++row.runs;
      sub_sum += r.suboptimality;
      t_sum += r.seconds;
      row.sub_min = std::min(row.sub_min, r.suboptimality);
      row.sub_max = std::max(row.sub_max, r.suboptimality);
      row.t_min = std::min(row.t_min, r.seconds);
      row.t_max = std::max(row.t_max, r.seconds);
    }
    if (row.runs == 0) {
      row.sub_min = row.sub_avg = row.sub_max = std::numeric_limits<double>::quiet_NaN();
      row.t_min = row.t_avg = row.t_max = std::numeric_limits<double>::quiet_NaN();
    } else {
      row.sub_avg = sub_sum / row.runs;
      row.t_avg = t_sum / row.runs;
    }
    rows.push_back(row);
  }
  return rows;
}

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
  config.validate();
  BenchmarkResult result;
  result.config = config;
  const Index nf_dirs = static_cast<Index>(config.directions.size());

  for (const auto seed : config.seeds) {
    const Instance inst = make_instance(config, seed);
    const auto& pe = inst.ellipsoidal;
    const Index nf = pe.output_dim();
    for (Index d : config.directions) {
      if (d < 0 || d >= nf) throw std::invalid_argument("benchmark: direction index out of range");
    }
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 17);
    std::vector<VectorXd> points;
    for (int t = 0; t < config.test_points; ++t) points.push_back(inst.draw_test_point(rng));

    for (Index di = 0; di < nf_dirs; ++di) {
      const Index d = config.directions[static_cast<std::size_t>(di)];
      const VectorXd h = VectorXd::Unit(nf, d);
      const std::optional<Problem<double>> pp = inst.pointwise(d);
      for (int t = 0; t < config.test_points; ++t) {
        const VectorXd& x = points[static_cast<std::size_t>(t)];
        const BoundQuery<double> query{x, h};
        const double prior = pe.gamma_f * std::sqrt(std::max(0.0, h.dot(pe.kernel(x, x) * h)));

        std::vector<RunRecord> recs;
        auto record = [&](const std::string& method, const std::function<double(std::string&)>& f) {
          RunRecord r;
          r.method = method;
          r.tag = method_tag(method);
          r.seed = seed;
          r.test_point = t;
          r.x = x(0);
          r.direction = d;
          r.prior = prior;
          try {
            std::string status = "ok";
            r.seconds = timed([&] { return f(status); }, r.value);
            r.status = status;
          } catch (const InfeasibleError& e) {
            r.excluded = true;
            r.status = "infeasible";
            r.note = e.what();
          } catch (const NonConvergenceError& e) {
            r.excluded = true;
            r.status = "non-convergence";
            r.note = e.what();
          } catch (const NumericalError& e) {
            r.excluded = true;
            r.status = "numerical";
            r.note = e.what();
          }
          recs.push_back(r);
          return recs.back();
        };

        const RunRecord oracle_e = record("oracle-e", [&](std::string& status) {
          const auto sol = solve_primal(pe, query);
          std::ostringstream os;
          os << "gap " << sol.kkt_residual;
          status = os.str();
          return sol.value;
        });

        std::optional<RunRecord> oracle_p;
        const bool need_p = wants(config, "oracle-p") || wants(config, "alternating-p");
        if (pp && need_p) {
          oracle_p = record("oracle-p", [&](std::string& status) {
            const auto sol = solve_primal(*pp, query);
            std::ostringstream os;
            os << "gap " << sol.kkt_residual;
            status = os.str();
            return sol.value;
          });
          if (!wants(config, "oracle-p")) recs.pop_back();
        }

        for (const auto& m : config.methods) {
          if (m == "oracle-e" || m == "oracle-p") continue;
          const bool pointwise_method = method_tag(m) == "p";
          if (pointwise_method && !pp) {
            RunRecord r;
            r.method = m;
            r.tag = "p";
            r.seed = seed;
            r.test_point = t;
            r.x = x(0);
            r.direction = d;
            r.prior = prior;
            r.excluded = true;
            r.status = "unsupported";
            r.note = "no uniform point-wise variant of this problem";
            recs.push_back(r);
            continue;
          }
          if (m == "alternating-p") {
            if (!oracle_p || oracle_p->excluded) {
              RunRecord r = oracle_p ? *oracle_p : RunRecord{};
              r.method = m;
              r.excluded = true;
              r.status = "no-reference";
              recs.push_back(r);
              continue;
            }
            const double opt_p = oracle_p->value;
            record(m, [&](std::string& status) {
              AlternatingOptions ao;
              ao.target_value = opt_p + config.alternating_target * (prior - opt_p);
              const auto res = scharnhorst_alternating(*pp, query, ao);
              std::ostringstream os;
              os << (res.converged ? "converged" : "iteration-limit") << " outer " << res.iterations
                 << " sub_p " << (res.value - opt_p) / (prior - opt_p);
              status = os.str();
              return res.value;
            });
          } else if (m == "reed-p") {
            record(m, [&](std::string&) {
              const double sb = config.reed_sigma > 0 ? config.reed_sigma : uniform_noise_bound(*pp);
              return reed_bound(*pp, x, h, sb).upper();
            });
          } else if (m == "dualgd-e" || m == "dualgd-p") {
            const Problem<double>& prob = m == "dualgd-e" ? pe : *pp;
            record(m, [&](std::string& status) {
              OptimizerOptions<double> oo;
              oo.learning_rate = config.dualgd_learning_rate;
              oo.max_iterations = config.dualgd_iterations;
              const auto cert = optimize_bound(prob, query, oo);
              status = to_string(cert.status);
              return cert.value;
            });
          } else if (m == "fixed-hashimoto" || m == "fixed-yang") {
            const auto v = m == "fixed-hashimoto" ? FixedSigmaVariant::Hashimoto : FixedSigmaVariant::Yang;
            record(m, [&](std::string&) { return fixed_sigma_bound(*pp, x, h, v).upper(); });
          }
        }

        for (auto& r : recs) {
          if (r.tag == "p" && oracle_p && !oracle_p->excluded) r.reference = oracle_p->value;
          if (r.excluded) continue;
          if (oracle_e.excluded) {
            r.excluded = true;
            r.note = "reference oracle failed";
            continue;
          }
          r.optimal = oracle_e.value;
          try {
            r.suboptimality = suboptimality(r.value, oracle_e.value, prior);
          } catch (const std::invalid_argument& e) {
            r.excluded = true;
            r.status = "degenerate";
            r.note = e.what();
          }
        }
        result.runs.insert(result.runs.end(), recs.begin(), recs.end());
      }
    }
  }
  result.rows = aggregate(result.runs, config.methods);
  return result;
}

void write_csv(const std::vector<BenchmarkRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "method,tag,sub_min,sub_avg,sub_max,t_min,t_avg,t_max\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.tag << ',' << r.sub_min << ',' << r.sub_avg << ',' << r.sub_max << ',' << r.t_min
        << ',' << r.t_avg << ',' << r.t_max << '\n';
  }
}

Json sidecar_json(const BenchmarkResult& result) {
  Json runs = Json::array();
  for (const auto& r : result.runs) {
    runs.push_back({{"method", r.method},
                    {"tag", r.tag},
                    {"seed", r.seed},
                    {"test_point", r.test_point},
                    {"x", r.x},
                    {"direction", r.direction},
                    {"value", r.value},
                    {"optimal", r.optimal},
                    {"prior", r.prior},
                    {"reference", std::isnan(r.reference) ? Json(nullptr) : Json(r.reference)},
                    {"suboptimality", r.suboptimality},
                    {"seconds", r.seconds},
                    {"status", r.status},
                    {"excluded", r.excluded},
                    {"note", r.note}});
  }
  Json rows = Json::array();
  for (const auto& r : result.rows) {
    rows.push_back({{"method", r.method},
                    {"tag", r.tag},
                    {"runs", r.runs},
                    {"excluded", r.excluded},
                    {"sub_min", r.sub_min},
                    {"sub_avg", r.sub_avg},
                    {"sub_max", r.sub_max},
                    {"t_min", r.t_min},
                    {"t_avg", r.t_avg},
                    {"t_max", r.t_max}});
  }
  return {{"git_hash", RKHSBOUND_GIT_HASH},
          {"timing", "wall clock per method call, including Gram assembly"},
          {"config", result.config.to_json()},
          {"rows", rows},
          {"runs", runs}};
}

void write_benchmark(const BenchmarkResult& result) {
  write_csv(result.rows, result.config.output);
  std::ofstream out(result.config.output + ".json");
  if (!out) throw std::runtime_error("cannot write '" + result.config.output + ".json'");
  out << sidecar_json(result).dump(2) << '\n';
}

Fig1Data fig1_data(const IllustrativeScenario& scenario) {
  const auto& problem = scenario.problem;
  const VectorXd up = VectorXd::Ones(1);
  const VectorXd down = -up;
  const auto opts = OptimizerOptions<double>::tight();
  const MatrixXd gram = projected_gram(problem);

  Fig1Data data;
  data.anchor = scenario.anchor;
  const VectorXd xa = VectorXd::Constant(1, scenario.grid[static_cast<std::size_t>(scenario.anchor)]);
  data.anchor_sigma_upper = optimize_bound(DualObjective<double>(problem, gram, {xa, up}), opts).sigma;
  data.anchor_sigma_lower = optimize_bound(DualObjective<double>(problem, gram, {xa, down}), opts).sigma;

  for (double xv : scenario.grid) {
    const VectorXd x = VectorXd::Constant(1, xv);
    Fig1Row row;
    row.x = xv;
    row.truth = scenario.truth(x)(0);

    const DualObjective<double> upper(problem, gram, {x, up});
    auto o = opts;
    o.initial_sigma = data.anchor_sigma_upper;
    const auto cu = optimize_bound(upper, o);
    row.dual_upper = upper.evaluate(data.anchor_sigma_upper, false).value;
    row.optimal_upper = std::min(cu.value, row.dual_upper);
    row.sigma_upper = cu.sigma;

    const DualObjective<double> lower(problem, gram, {x, down});
    o.initial_sigma = data.anchor_sigma_lower;
    const auto cl = optimize_bound(lower, o);
    const double dl = lower.evaluate(data.anchor_sigma_lower, false).value;
    row.dual_lower = -dl;
    row.optimal_lower = -std::min(cl.value, dl);
    row.sigma_lower = cl.sigma;
    data.rows.push_back(std::move(row));
  }
  return data;
}

void write_fig1_csv(const Fig1Data& data, double cap, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  const Index m = data.rows.empty() ? 0 : data.rows.front().sigma_upper.size();
  out << "x,optimal_upper,optimal_lower,dual_upper,dual_lower,truth";
  for (Index j = 0; j < m; ++j) out << ",sigma_upper_" << j + 1;
  for (Index j = 0; j < m; ++j) out << ",sigma_lower_" << j + 1;
  out << ",capped_upper,capped_lower\n";
  for (const auto& r : data.rows) {
    out << r.x << ',' << r.optimal_upper << ',' << r.optimal_lower << ',' << r.dual_upper << ',' << r.dual_lower << ','
        << r.truth;
    for (Index j = 0; j < m; ++j) out << ',' << r.sigma_upper(j);
    for (Index j = 0; j < m; ++j) out << ',' << r.sigma_lower(j);
    out << ',' << (r.sigma_upper.array() >= cap).count() << ',' << (r.sigma_lower.array() >= cap).count() << '\n';
  }
}

Fig1Data emit_fig1_data(const IllustrativeScenario& scenario, const std::string& path) {
  Fig1Data data = fig1_data(scenario);
  write_fig1_csv(data, kDefaultSigmaCap, path);
  return data;
}

}  // namespace rkhsbound
