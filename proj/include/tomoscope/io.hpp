#pragma once

#include <Eigen/Dense>

#include <iomanip>
#include <locale>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "tomoscope/estimators.hpp"
#include "tomoscope/quantum.hpp"
#include "tomoscope/sdp.hpp"

namespace tomoscope {

/// Round-trip decimal rendering (17 significant digits, C locale), shared by
/// every artifact that must be byte-identical across runs.
inline std::string repr17(double x) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out << std::setprecision(17) << x;
  return out.str();
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXcd& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      entries.push_back({m(r, c).real(), m(r, c).imag()});
    }
  }
  return entries;
}

inline Eigen::MatrixXcd matrix_from_json(const nlohmann::json& entries,
                                         Eigen::Index rows, Eigen::Index cols) {
  if (!entries.is_array() || entries.size() != static_cast<std::size_t>(rows * cols)) {
    throw std::invalid_argument("matrix_from_json: expected " +
                                std::to_string(rows * cols) + " [re, im] pairs");
  }
  Eigen::MatrixXcd m(rows, cols);
  std::size_t pos = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c, ++pos) {
      const nlohmann::json& pair = entries.at(pos);
      if (!pair.is_array() || pair.size() != 2) {
        throw std::invalid_argument("matrix_from_json: entry is not a [re, im] pair");
      }
      m(r, c) = std::complex<double>(pair.at(0).get<double>(), pair.at(1).get<double>());
    }
  }
  return m;
}

inline nlohmann::json record_to_json(const MeasurementRecord& record) {
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t pos = 0; pos < record.size(); ++pos) {
    entries.push_back({{"index", record.indices()[pos]},
                       {"frequency", record.frequencies()[static_cast<Eigen::Index>(pos)]}});
  }
  return {{"povm_size", record.povm_size()}, {"entries", entries}};
}

inline MeasurementRecord record_from_json(const nlohmann::json& j) {
  if (!j.contains("povm_size") || !j.contains("entries")) {
    throw std::invalid_argument("record_from_json: needs povm_size and entries");
  }
  const std::size_t povm_size = j.at("povm_size").get<std::size_t>();
  const nlohmann::json& entries = j.at("entries");
  if (!entries.is_array()) {
    throw std::invalid_argument("record_from_json: entries must be an array");
  }
  std::vector<std::size_t> indices;
  Eigen::VectorXd frequencies(static_cast<Eigen::Index>(entries.size()));
  indices.reserve(entries.size());
  for (std::size_t pos = 0; pos < entries.size(); ++pos) {
    const nlohmann::json& entry = entries.at(pos);
    indices.push_back(entry.at("index").get<std::size_t>());
    frequencies[static_cast<Eigen::Index>(pos)] = entry.at("frequency").get<double>();
  }
  return MeasurementRecord(povm_size, std::move(indices), std::move(frequencies));
}

inline nlohmann::json density_to_json(const DensityMatrix& rho) {
  return {{"dim", rho.dim()}, {"matrix", matrix_to_json(rho.mat())}};
}

inline DensityMatrix density_from_json(const nlohmann::json& j) {
  const Eigen::Index d = j.at("dim").get<Eigen::Index>();
  return DensityMatrix(HermitianMatrix(matrix_from_json(j.at("matrix"), d, d)));
}

inline nlohmann::json report_to_json(const EstimatorReport& report) {
  nlohmann::json j{{"method", to_string(report.method)},
                   {"objective", report.objective_value},
                   {"deltas", std::vector<double>(report.deltas.begin(), report.deltas.end())},
                   {"unmeasured_probs",
                    std::vector<double>(report.unmeasured_probs.begin(),
                                        report.unmeasured_probs.end())},
                   {"iterations", report.iterations},
                   {"wall_time", report.wall_time},
                   {"dim", report.estimate.dim()},
                   {"estimate", matrix_to_json(report.estimate.mat())}};
  if (report.delta_sup) {
    j["delta_sup"] = *report.delta_sup;
  }
  if (report.maxent_state) {
    j["maxent_state"] = {
        {"lambdas", std::vector<double>(report.maxent_state->lambdas.begin(),
                                        report.maxent_state->lambdas.end())},
        {"normalization", report.maxent_state->normalization},
        {"residual_norm", report.maxent_state->residual_norm}};
  }
  if (report.method == EstimatorMethod::MAXLIK_MAXENT) {
    j["stage1_iterations"] = report.stage1_iterations;
  }
  return j;
}

/// Debug normal form for SDP instances; dense, not stability-guaranteed.
inline nlohmann::json sdp_to_json(const SdpProblem& prob) {
  const auto slack_vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.begin(), v.end());
  };
  nlohmann::json constraints = nlohmann::json::array();
  for (const SdpConstraint& con : prob.constraints()) {
    constraints.push_back({{"matrix", matrix_to_json(con.a.mat())},
                           {"slack_coeffs", slack_vec(con.b)},
                           {"sense", con.sense == ConstraintSense::EQ ? "eq" : "le"},
                           {"rhs", con.rhs}});
  }
  return {{"dim", prob.dim()},
          {"slacks", prob.n_slack()},
          {"objective_matrix", matrix_to_json(prob.c_matrix().mat())},
          {"objective_slack_costs", slack_vec(prob.c_slack())},
          {"constraints", constraints}};
}

inline SdpProblem sdp_from_json(const nlohmann::json& j) {
  const Eigen::Index d = j.at("dim").get<Eigen::Index>();
  const Eigen::Index n_slack = j.at("slacks").get<Eigen::Index>();
  SdpProblem prob(d, n_slack);
  const auto slack_vec = [n_slack](const nlohmann::json& arr) {
    if (!arr.is_array() || arr.size() != static_cast<std::size_t>(n_slack)) {
      throw std::invalid_argument("sdp_from_json: slack vector size mismatch");
    }
    Eigen::VectorXd v(n_slack);
    for (Eigen::Index i = 0; i < n_slack; ++i) {
      v[i] = arr.at(static_cast<std::size_t>(i)).get<double>();
    }
    return v;
  };
  prob.set_objective(HermitianMatrix(matrix_from_json(j.at("objective_matrix"), d, d)),
                     slack_vec(j.at("objective_slack_costs")));
  for (const nlohmann::json& con : j.at("constraints")) {
    const std::string sense = con.at("sense").get<std::string>();
    if (sense != "eq" && sense != "le") {
      throw std::invalid_argument("sdp_from_json: sense must be eq or le");
    }
    prob.add_constraint(HermitianMatrix(matrix_from_json(con.at("matrix"), d, d)),
                        slack_vec(con.at("slack_coeffs")),
                        sense == "eq" ? ConstraintSense::EQ : ConstraintSense::LE,
                        con.at("rhs").get<double>());
  }
  return prob;
}

}  // namespace tomoscope
