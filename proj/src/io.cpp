#include "rkhsbound/io.hpp"

#include <fstream>
#include <stdexcept>

namespace rkhsbound {

Json vector_json(const VectorXd& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

VectorXd vector_from_json(const Json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected a JSON array of numbers");
  VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

Json matrix_json(const MatrixXd& m) {
  Json out = Json::array();
  for (Index r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose()));
  return out;
}

MatrixXd matrix_from_json(const Json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected a JSON array of rows");
  if (j.empty()) return MatrixXd(0, 0);
  const std::size_t cols = j[0].size();
  MatrixXd m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != cols) throw std::invalid_argument("matrix rows have unequal length");
    m.row(static_cast<Index>(r)) = vector_from_json(j[r]).transpose();
  }
  return m;
}

namespace {

Json scalar_kernel_json(const ScalarKernel<double>& k) {
  return std::visit(
      [](const auto& kk) -> Json {
        using T = std::decay_t<decltype(kk)>;
        if constexpr (std::is_same_v<T, SquaredExponential<double>>) {
          return {{"type", "se"}, {"lengthscale", kk.lengthscale}};
        } else {
          return {{"type", "periodic"}, {"lengthscale", kk.lengthscale}, {"period", kk.period}};
        }
      },
      k);
}

ScalarKernel<double> scalar_kernel_from_json(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  const double ell = j.value("lengthscale", 1.0);
  if (type == "se") return SquaredExponential<double>{ell};
  if (type == "periodic") return Periodic<double>{ell, j.value("period", 6.283185307179586)};
  throw std::invalid_argument("unknown scalar kernel type '" + type + "'");
}

}  // namespace

Json to_json(const Kernel<double>& kernel) {
  Json out;
  const auto& fam = kernel.family();
  if (const auto* se = std::get_if<SquaredExponential<double>>(&fam)) {
    out = scalar_kernel_json(*se);
  } else if (const auto* pk = std::get_if<Periodic<double>>(&fam)) {
    out = scalar_kernel_json(*pk);
  } else if (const auto* dk = std::get_if<DiagonalKernel<double>>(&fam)) {
    out["type"] = "diagonal";
    out["outputs"] = Json::array();
    for (const auto& o : dk->outputs) out["outputs"].push_back(scalar_kernel_json(o));
  } else {
    const auto& fk = std::get<FeatureKernel<double>>(fam);
    if (fk.polynomial_degree < 0) throw std::invalid_argument("custom feature kernels cannot be serialized");
    out = {{"type", "polynomial"}, {"output_dim", fk.output_dim}, {"degree", fk.polynomial_degree}};
  }
  out["input_dim"] = kernel.input_dim();
  return out;
}

Kernel<double> kernel_from_json(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  const Index d = j.value("input_dim", Index{1});
  if (type == "se") return Kernel<double>::squared_exponential(d, j.value("lengthscale", 1.0));
  if (type == "periodic") {
    return Kernel<double>::periodic(d, j.value("lengthscale", 1.0), j.value("period", 6.283185307179586));
  }
  if (type == "diagonal") {
    std::vector<ScalarKernel<double>> outs;
    for (const auto& o : j.at("outputs")) outs.push_back(scalar_kernel_from_json(o));
    return Kernel<double>::diagonal(d, std::move(outs));
  }
  if (type == "polynomial") {
    return Kernel<double>::features(
        d, polynomial_features<double>(d, j.value("output_dim", Index{1}), j.value("degree", 1)));
  }
  throw std::invalid_argument("unknown kernel type '" + type + "'");
}

Json to_json(const NoiseModel<double>& noise) {
  switch (noise.kind()) {
    case NoiseKind::Pointwise:
      return {{"type", "pointwise"}, {"bounds", vector_json(noise.gammas())}};
    case NoiseKind::Energy:
      return {{"type", "energy"}, {"matrix", matrix_json(noise.constraint(0).block)},
              {"gamma", noise.constraint(0).gamma}};
    case NoiseKind::General:
      break;
  }
  Json cons = Json::array();
  for (const auto& c : noise.constraints()) {
    cons.push_back({{"support", c.support}, {"matrix", matrix_json(c.block)}, {"gamma", c.gamma}});
  }
  return {{"type", "general"}, {"constraints", cons}};
}

NoiseModel<double> noise_from_json(const Json& j, Index n) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "pointwise") {
    const VectorXd b = vector_from_json(j.at("bounds"));
    if (b.size() != n) throw std::invalid_argument("pointwise noise needs one bound per measurement");
    return NoiseModel<double>::pointwise(b);
  }
  if (type == "energy") {
    const MatrixXd p = matrix_from_json(j.at("matrix"));
    if (p.rows() != n) throw std::invalid_argument("energy noise matrix must be N x N");
    return NoiseModel<double>::energy(p, j.at("gamma").get<double>());
  }
  if (type == "general") {
    std::vector<NoiseConstraint<double>> cons;
    for (const auto& c : j.at("constraints")) {
      NoiseConstraint<double> nc;
      nc.block = matrix_from_json(c.at("matrix"));
      nc.gamma = c.at("gamma").get<double>();
      if (c.contains("support")) {
        nc.support = c.at("support").get<std::vector<Index>>();
      } else {
        for (Index i = 0; i < n; ++i) nc.support.push_back(i);
      }
      cons.push_back(std::move(nc));
    }
    return NoiseModel<double>::from_blocks(n, std::move(cons));
  }
  throw std::invalid_argument("unknown noise type '" + type + "'");
}

Json to_json(const Problem<double>& problem) {
  Json inputs = Json::array();
  for (const auto& x : problem.inputs) inputs.push_back(vector_json(x));
  return {{"kernel", to_json(problem.kernel)},
          {"inputs", inputs},
          {"measurements", matrix_json(problem.measurements.transpose())},
          {"y", vector_json(problem.y)},
          {"noise", to_json(problem.noise)},
          {"gamma_f", problem.gamma_f}};
}

Problem<double> problem_from_json(const Json& j) {
  Problem<double> p;
  p.kernel = kernel_from_json(j.at("kernel"));
  for (const auto& x : j.at("inputs")) p.inputs.push_back(vector_from_json(x));
  const Index n = p.size();
  if (j.contains("measurements")) {
    const MatrixXd m = matrix_from_json(j.at("measurements"));
    p.measurements = n == 0 ? MatrixXd(p.kernel.output_dim(), 0) : MatrixXd(m.transpose());
  } else if (p.kernel.output_dim() == 1) {
    p.measurements = MatrixXd::Ones(1, n);
  } else {
    throw std::invalid_argument("problem: measurements are required for multi-output kernels");
  }
  p.y = vector_from_json(j.at("y"));
  p.noise = noise_from_json(j.at("noise"), n);
  p.gamma_f = j.at("gamma_f").get<double>();
  p.validate();
  return p;
}

Problem<double> load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open problem file '" + path + "'");
  return problem_from_json(Json::parse(in));
}

void save_problem(const Problem<double>& problem, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << to_json(problem).dump(2) << "\n";
}

Json to_json(const BoundCertificate<double>& cert) {
  return {{"value", cert.value},
          {"sigma", vector_json(cert.sigma)},
          {"beta", cert.beta},
          {"posterior_mean", vector_json(cert.posterior.mean)},
          {"posterior_covariance", matrix_json(cert.posterior.covariance)},
          {"gradient_norm", cert.gradient_norm},
          {"iterations", cert.iterations},
          {"status", to_string(cert.status)},
          {"initial_value", cert.initial_value},
          {"prior_bound", cert.prior_bound},
          {"frozen", cert.frozen}};
}

}  // namespace rkhsbound
