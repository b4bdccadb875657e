#pragma once

// JSON problem files.
//
//   {"kernel": {...}, "inputs": [[x]...], "measurements": [[c]...],
//    "y": [...], "noise": {...}, "gamma_f": g}
//
// kernel: {"type": "se" | "periodic", "input_dim", "lengthscale", "period"},
//         {"type": "diagonal", "input_dim", "outputs": [scalar kernels]},
//         {"type": "polynomial", "input_dim", "output_dim", "degree"}
// noise:  {"type": "pointwise", "bounds": [...]},
//         {"type": "energy", "matrix": [[...]], "gamma": g},
//         {"type": "general", "constraints": [{"support": [...], "matrix": [[...]], "gamma": g}]}
// A general constraint without "support" spans all N measurements.

#include <string>

#include "json.hpp"
#include "rkhsbound/dual_bound.hpp"
#include "rkhsbound/gp_core.hpp"

namespace rkhsbound {

using Json = nlohmann::json;

Json to_json(const Kernel<double>& kernel);
Kernel<double> kernel_from_json(const Json& j);

Json to_json(const NoiseModel<double>& noise);
NoiseModel<double> noise_from_json(const Json& j, Index n);

Json to_json(const Problem<double>& problem);
Problem<double> problem_from_json(const Json& j);

Problem<double> load_problem(const std::string& path);
void save_problem(const Problem<double>& problem, const std::string& path);

Json to_json(const BoundCertificate<double>& cert);

Json vector_json(const VectorXd& v);
VectorXd vector_from_json(const Json& j);
Json matrix_json(const MatrixXd& m);
MatrixXd matrix_from_json(const Json& j);

}  // namespace rkhsbound
