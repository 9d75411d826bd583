#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "oracles.hpp"
#include "tomoscope/estimators.hpp"
#include "tomoscope/metrics.hpp"
#include "tomoscope/quantum.hpp"

using namespace tomoscope;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

MeasurementRecord full_record(const DensityMatrix& rho, const Povm& povm) {
  const Eigen::VectorXd p = born_probabilities(rho, povm);
  std::vector<std::size_t> indices(povm.size());
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  return MeasurementRecord(povm.size(), indices, p);
}

MeasurementRecord prefix_record(const DensityMatrix& rho, const Povm& povm, std::size_t k) {
  const Eigen::VectorXd p = born_probabilities(rho, povm);
  std::vector<std::size_t> order(povm.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return record_from_prefix(p, order, k);
}

DensityMatrix uniform_remainder_state(const Povm& eigb, const MeasurementRecord& record) {
  const Eigen::Index d = eigb.dim();
  const double mass = record.frequencies().sum();
  const double c = (1.0 - mass) /
                   static_cast<double>(eigb.size() - record.size());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(d, d);
  for (std::size_t pos = 0; pos < record.size(); ++pos) {
    out += record.frequencies()[static_cast<Eigen::Index>(pos)] *
           eigb.effect(record.indices()[pos]).mat();
  }
  for (std::size_t i : record.unmeasured()) {
    out += c * eigb.effect(i).mat();
  }
  return DensityMatrix(HermitianMatrix(out));
}

double herm_log_span_residual(const DensityMatrix& rho, const Povm& povm,
                              const MeasurementRecord& record) {
  const HermitianMatrix log_rho =
      spectral_map(rho.matrix(), [](double w) { return std::log(w); });
  const Eigen::Index d = rho.dim();
  Eigen::MatrixXd basis(d * d, static_cast<Eigen::Index>(record.size()) + 1);
  basis.col(0) = detail::svec(Eigen::MatrixXcd::Identity(d, d));
  for (std::size_t pos = 0; pos < record.size(); ++pos) {
    basis.col(static_cast<Eigen::Index>(pos) + 1) =
        detail::svec(povm.effect(record.indices()[pos]).mat());
  }
  const Eigen::VectorXd v = detail::svec(log_rho.mat());
  return (v - basis * basis.colPivHouseholderQr().solve(v)).norm();
}

}  // namespace

TEST_CASE("vqt_l1 recovers a state from full noiseless data", "[estimators]") {
  const Povm sic = qubit_sic_povm();
  for (int rank : {1, 2}) {
    Rng rng(mix_seed(0xe1, rank));
    const DensityMatrix rho = sample_ginibre_state(2, rank, rng);
    const EstimatorReport report = vqt_l1(full_record(rho, sic), sic);
    REQUIRE(trace_distance(report.estimate, rho) <= 1e-6);
    REQUIRE(report.deltas.maxCoeff() <= 1e-7);
    REQUIRE(report.unmeasured_probs.size() == 0);
    REQUIRE(report.method == EstimatorMethod::VQT_L1);
    REQUIRE(report.iterations > 0);
  }
}

TEST_CASE("vqt_l1 with nothing measured has unit objective", "[estimators]") {
  const Povm sic = qubit_sic_povm();
  const MeasurementRecord empty(sic.size(), {}, Eigen::VectorXd());
  const EstimatorReport report = vqt_l1(empty, sic);
  REQUIRE_THAT(report.objective_value, WithinAbs(1.0, 1e-6));
  REQUIRE_THAT(report.estimate.mat().trace().real(), WithinAbs(1.0, 1e-8));
  REQUIRE(report.deltas.size() == 0);
}

TEST_CASE("vqt_l1 objective on a partial eigenbasis record is the missing mass",
          "[estimators]") {
  Rng rng(0xe2);
  const Povm eigb = eigenbasis_projectors(sample_ginibre_state(4, 4, rng));
  Eigen::VectorXd f(2);
  f << 0.5, 0.3;
  const MeasurementRecord record(eigb.size(), {0, 1}, f);
  const EstimatorReport report = vqt_l1(record, eigb);
  REQUIRE_THAT(report.objective_value, WithinAbs(0.2, 1e-6));
  REQUIRE_THAT(report.unmeasured_probs.sum(), WithinAbs(0.2, 1e-6));
}

TEST_CASE("vqt_l1 objective matches its recomputation from the estimate",
          "[estimators]") {
  Rng rng(0xe3);
  const Povm povm = tensor_povm(qubit_sic_povm(), 2);
  const DensityMatrix rho = sample_ginibre_state(4, 2, rng);
  const EstimatorReport report = vqt_l1(prefix_record(rho, povm, 7), povm);
  const double recomputed = report.deltas.sum() + report.unmeasured_probs.sum();
  REQUIRE_THAT(report.objective_value, WithinAbs(recomputed, 1e-7));
}

TEST_CASE("vqt_l1 reports incompatible data with a certificate", "[estimators]") {
  const Povm sic = qubit_sic_povm();
  const MeasurementRecord record(sic.size(), {0}, Eigen::VectorXd::Constant(1, 0.9));
  EstimatorConfig cfg;
  cfg.delta_max = 0.1;
  try {
    vqt_l1(record, sic, cfg);
    FAIL("expected IncompatibleDataError");
  } catch (const IncompatibleDataError& err) {
    REQUIRE(err.certificate().merit >= 1e-7);
    REQUIRE(err.certificate().cone_violation <= 1e-7);
    REQUIRE_THAT(err.what(), ContainsSubstring("incompatible"));
  }
}

TEST_CASE("vqt_l1 respects delta_max when it binds", "[estimators]") {
  const Povm sic = qubit_sic_povm();
  const MeasurementRecord record(sic.size(), {0}, Eigen::VectorXd::Constant(1, 0.45));
  EstimatorConfig cfg;
  cfg.delta_max = 0.5;
  const EstimatorReport report = vqt_l1(record, sic, cfg);
  REQUIRE(report.deltas.maxCoeff() <= 0.5 + 1e-8);
}

TEST_CASE("vqt iteration cap surfaces as an estimation error", "[estimators]") {
  const Povm sic = qubit_sic_povm();
  EstimatorConfig cfg;
  cfg.sdp.max_iter = 2;
  REQUIRE_THROWS_AS(vqt_l1(full_record(DensityMatrix::maximally_mixed(2), sic), sic, cfg),
                    EstimationError);
}

TEST_CASE("vqt_inf spreads unmeasured mass uniformly on an eigenbasis record",
          "[estimators]") {
  Rng rng(0xe4);
  const Povm eigb = eigenbasis_projectors(sample_ginibre_state(4, 4, rng));
  Eigen::VectorXd f(2);
  f << 0.5, 0.3;
  const MeasurementRecord record(eigb.size(), {0, 1}, f);
  const EstimatorReport report = vqt_inf(record, eigb);
  REQUIRE(report.unmeasured_probs.size() == 2);
  REQUIRE_THAT(report.unmeasured_probs[0], WithinAbs(0.1, 1e-7));
  REQUIRE_THAT(report.unmeasured_probs[1], WithinAbs(0.1, 1e-7));
  REQUIRE(report.delta_sup.has_value());
  REQUIRE_THAT(*report.delta_sup, WithinAbs(0.1, 1e-6));
  const double recomputed = report.deltas.sum() + *report.delta_sup;
  REQUIRE_THAT(report.objective_value, WithinAbs(recomputed, 1e-7));
  REQUIRE(trace_distance(report.estimate, uniform_remainder_state(eigb, record)) <= 1e-6);
}

TEST_CASE("vqt_inf pins the qubit state from one projector frequency", "[estimators]") {
  Eigen::MatrixXcd p0 = Eigen::MatrixXcd::Zero(2, 2);
  p0(0, 0) = 1.0;
  Eigen::MatrixXcd p1 = Eigen::MatrixXcd::Zero(2, 2);
  p1(1, 1) = 1.0;
  const Povm basis({HermitianMatrix(p0), HermitianMatrix(p1)}, {"up", "down"});
  const MeasurementRecord record(2, {0}, Eigen::VectorXd::Constant(1, 0.7));
  const EstimatorReport report = vqt_inf(record, basis);
  REQUIRE_THAT(report.estimate.mat()(0, 0).real(), WithinAbs(0.7, 1e-6));
  REQUIRE_THAT(report.estimate.mat()(1, 1).real(), WithinAbs(0.3, 1e-6));
  REQUIRE(std::abs(report.estimate.mat()(0, 1)) <= 1e-6);
}

TEST_CASE("vqt_inf recovers a state from full noiseless data", "[estimators]") {
  const Povm sic = qubit_sic_povm();
  Rng rng(0xe5);
  const DensityMatrix rho = sample_ginibre_state(2, 2, rng);
  const EstimatorReport report = vqt_inf(full_record(rho, sic), sic);
  REQUIRE(trace_distance(report.estimate, rho) <= 1e-6);
}

TEST_CASE("vqt_inf centers the flat state when nothing is measured", "[estimators]") {
  const Povm sic = qubit_sic_povm();
  const MeasurementRecord empty(sic.size(), {}, Eigen::VectorXd());
  const EstimatorReport report = vqt_inf(empty, sic);
  REQUIRE_THAT(*report.delta_sup, WithinAbs(0.25, 1e-7));
  REQUIRE(trace_distance(report.estimate, DensityMatrix::maximally_mixed(2)) <= 1e-6);
}

TEST_CASE("vqt_inf and maxent agree on noise-free eigenbasis records", "[estimators]") {
  for (int trial = 0; trial < 5; ++trial) {
    Rng rng(mix_seed(0xe6, trial));
    const DensityMatrix rho = sample_ginibre_state(4, 4, rng);
    const Povm eigb = eigenbasis_projectors(rho);
    const std::size_t m = 1 + rng.below(3);
    const MeasurementRecord record = prefix_record(rho, eigb, m);
    const EstimatorReport inf_report = vqt_inf(record, eigb);
    const EstimatorReport ent_report = maxent(record, eigb);
    const DensityMatrix closed = uniform_remainder_state(eigb, record);
    REQUIRE(trace_distance(inf_report.estimate, ent_report.estimate) <= 1e-6);
    REQUIRE(trace_distance(inf_report.estimate, closed) <= 1e-6);
    REQUIRE(trace_distance(ent_report.estimate, closed) <= 1e-6);
    const double c = (1.0 - record.frequencies().sum()) / static_cast<double>(4 - m);
    for (Eigen::Index i = 0; i < inf_report.unmeasured_probs.size(); ++i) {
      REQUIRE_THAT(inf_report.unmeasured_probs[i], WithinAbs(c, 1e-7));
    }
  }
}

TEST_CASE("maxent with no data returns the maximally mixed state", "[estimators]") {
  const Povm povm = tensor_povm(qubit_sic_povm(), 2);
  const MeasurementRecord empty(povm.size(), {}, Eigen::VectorXd());
  const EstimatorReport report = maxent(empty, povm);
  REQUIRE(trace_distance(report.estimate, DensityMatrix::maximally_mixed(4)) <= 1e-12);
  REQUIRE(report.maxent_state.has_value());
  REQUIRE_THAT(report.maxent_state->normalization, WithinAbs(4.0, 1e-12));
  REQUIRE_THAT(report.objective_value, WithinAbs(std::log(4.0), 1e-12));
}

TEST_CASE("maxent keeps the flat state for one consistent frequency", "[estimators]") {
  const Povm sic = qubit_sic_povm();
  const Eigen::VectorXd p = born_probabilities(DensityMatrix::maximally_mixed(2), sic);
  const MeasurementRecord record(sic.size(), {1}, p.segment(1, 1));
  const EstimatorReport report = maxent(record, sic);
  REQUIRE(trace_distance(report.estimate, DensityMatrix::maximally_mixed(2)) <= 1e-9);
  REQUIRE(report.iterations == 0);
  REQUIRE(std::abs(report.maxent_state->lambdas[0]) <= 1e-12);
}

TEST_CASE("maxent fills a partial eigenbasis record uniformly", "[estimators]") {
  Rng rng(0xe7);
  const Povm eigb = eigenbasis_projectors(sample_ginibre_state(4, 4, rng));
  Eigen::VectorXd f(2);
  f << 0.5, 0.3;
  const MeasurementRecord record(eigb.size(), {0, 1}, f);
  const EstimatorReport report = maxent(record, eigb);
  REQUIRE(trace_distance(report.estimate, uniform_remainder_state(eigb, record)) <= 1e-8);
}

TEST_CASE("maxent recovers full-rank states from complete data", "[estimators]") {
  SECTION("single qubit") {
    Rng rng(0xe8);
    const Povm sic = qubit_sic_povm();
    const DensityMatrix rho = sample_ginibre_state(2, 2, rng);
    const EstimatorReport report = maxent(full_record(rho, sic), sic);
    REQUIRE(trace_distance(report.estimate, rho) <= 1e-6);
  }
  SECTION("two qubits") {
    Rng rng(0xe9);
    const Povm povm = tensor_povm(qubit_sic_povm(), 2);
    const DensityMatrix rho = sample_ginibre_state(4, 4, rng);
    const EstimatorReport report = maxent(full_record(rho, povm), povm);
    REQUIRE(trace_distance(report.estimate, rho) <= 1e-5);
  }
}

TEST_CASE("maxent diagnostics are self-consistent", "[estimators]") {
  Rng rng(0xea);
  const Povm povm = tensor_povm(qubit_sic_povm(), 2);
  const DensityMatrix rho = sample_ginibre_state(4, 4, rng);
  const MeasurementRecord record = prefix_record(rho, povm, 9);
  const EstimatorReport report = maxent(record, povm);
  REQUIRE(report.maxent_state.has_value());
  const MaxEntState& state = *report.maxent_state;
  REQUIRE(state.normalization > 0.0);
  REQUIRE(state.residual_norm <= 1e-10 * static_cast<double>(record.size()));

  Eigen::MatrixXcd k = Eigen::MatrixXcd::Zero(4, 4);
  for (std::size_t pos = 0; pos < record.size(); ++pos) {
    k -= state.lambdas[static_cast<Eigen::Index>(pos)] *
         povm.effect(record.indices()[pos]).mat();
  }
  const SpectralDecomposition ek = eig_hermitian(HermitianMatrix(k));
  const double norm = ek.eigenvalues.array().exp().sum();
  REQUIRE(std::abs(norm - state.normalization) <= 1e-9 * state.normalization);

  REQUIRE(herm_log_span_residual(report.estimate, povm, record) <= 1e-6);
}

TEST_CASE("maxent flags unattainable moments with residual history", "[estimators]") {
  const Povm sic = qubit_sic_povm();
  const MeasurementRecord record(sic.size(), {0}, Eigen::VectorXd::Constant(1, 0.9));
  try {
    maxent(record, sic);
    FAIL("expected MaxEntError");
  } catch (const MaxEntError& err) {
    REQUIRE(!err.residual_history().empty());
    REQUIRE_THAT(err.what(), ContainsSubstring("maxent"));
  }
}

TEST_CASE("maxent converges on a near-boundary record", "[estimators]") {
  Rng rng(0xec);
  const Povm eigb = eigenbasis_projectors(sample_ginibre_state(2, 2, rng));
  const MeasurementRecord record(eigb.size(), {0}, Eigen::VectorXd::Constant(1, 0.999));
  const EstimatorReport report = maxent(record, eigb);
  const Eigen::VectorXd w = eig_hermitian(report.estimate.matrix()).eigenvalues;
  REQUIRE_THAT(w.maxCoeff(), WithinAbs(0.999, 1e-6));
  REQUIRE(report.iterations < 500);
}

TEST_CASE("maxent Jacobian matches central finite differences", "[estimators]") {
  const Povm sic = qubit_sic_povm();
  for (int trial = 0; trial < 5; ++trial) {
    Rng rng(mix_seed(0xed, trial));
    const std::size_t m = 1 + rng.below(4);
    const std::vector<std::size_t> order = rng.permutation(4);
    std::vector<Eigen::MatrixXcd> effects;
    Eigen::VectorXd f(static_cast<Eigen::Index>(m));
    Eigen::VectorXd lambda(static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j) {
      effects.push_back(sic.effect(order[j]).mat());
      f[static_cast<Eigen::Index>(j)] = 0.9 * rng.uniform01() / static_cast<double>(m);
      lambda[static_cast<Eigen::Index>(j)] = 2.0 * rng.uniform01() - 1.0;
    }
    const detail::MaxEntEval eval = detail::maxent_eval(effects, f, lambda, true);
    const Eigen::MatrixXd fd = oracles::fd_jacobian(
        [&](const Eigen::VectorXd& x) { return detail::maxent_eval(effects, f, x, false).r; },
        lambda, 1e-6);
    const double rel = (eval.jac - fd).norm() / std::max(1.0, fd.norm());
    REQUIRE(rel <= 1e-4);
  }
}

TEST_CASE("maxlik recovers states from full noiseless data", "[estimators]") {
  SECTION("single qubit, rank 1") {
    Rng rng(0xee);
    const Povm sic = qubit_sic_povm();
    const DensityMatrix rho = sample_ginibre_state(2, 1, rng);
    const EstimatorReport report = maxlik(full_record(rho, sic), sic);
    REQUIRE(trace_distance(report.estimate, rho) <= 1e-5);
    REQUIRE(report.objective_value >= -1e-10);
  }
  SECTION("two qubits, rank 1") {
    Rng rng(0xef);
    const Povm povm = tensor_povm(qubit_sic_povm(), 2);
    const DensityMatrix rho = sample_ginibre_state(4, 1, rng);
    const EstimatorReport report = maxlik(full_record(rho, povm), povm);
    REQUIRE(trace_distance(report.estimate, rho) <= 1e-5);
    REQUIRE(report.objective_value >= -1e-10);
  }
}

TEST_CASE("maxlik keeps the flat state when it already fits", "[estimators]") {
  const Povm sic = qubit_sic_povm();
  const Eigen::VectorXd p = born_probabilities(DensityMatrix::maximally_mixed(2), sic);
  const MeasurementRecord record(sic.size(), {2}, p.segment(2, 1));
  const EstimatorReport report = maxlik(record, sic);
  REQUIRE(trace_distance(report.estimate, DensityMatrix::maximally_mixed(2)) <= 1e-12);
  REQUIRE(report.iterations == 0);
  REQUIRE_THAT(report.objective_value, WithinAbs(0.0, 1e-15));
}

TEST_CASE("maxlik matches a Bloch-ball grid search on a noisy record", "[estimators]") {
  Rng rng(0xf0);
  const Povm sic = qubit_sic_povm();
  const DensityMatrix rho = sample_ginibre_state(2, 1, rng);
  const Eigen::VectorXd noisy =
      perturb(born_probabilities(rho, sic), NoiseModel::gaussian(0.01), rng);
  const MeasurementRecord record(sic.size(), {0, 1, 2}, noisy.head(3));
  const EstimatorReport report = maxlik(record, sic);

  std::vector<Eigen::MatrixXcd> effects;
  for (std::size_t i : record.indices()) {
    effects.push_back(sic.effect(i).mat());
  }
  const Eigen::Vector3d r =
      oracles::bloch_grid_maxlik(effects, record.frequencies(), 1e-12, 0.005);
  const std::complex<double> im(0.0, 1.0);
  Eigen::MatrixXcd oracle_state(2, 2);
  oracle_state << 1.0 + r[2], r[0] - im * r[1], r[0] + im * r[1], 1.0 - r[2];
  oracle_state *= 0.5;
  for (std::size_t pos = 0; pos < record.size(); ++pos) {
    const double predicted = hs_inner(effects[pos], report.estimate.mat());
    const double oracle = hs_inner(effects[pos], oracle_state);
    REQUIRE_THAT(predicted, WithinAbs(oracle, 1e-3));
  }
}

TEST_CASE("maxlik restricts to the face pinned by zero frequencies", "[estimators]") {
  Rng rng(0xf1);
  const DensityMatrix rho = sample_ginibre_state(4, 2, rng);
  const Povm eigb = eigenbasis_projectors(rho);
  const EstimatorReport report = maxlik(full_record(rho, eigb), eigb);
  REQUIRE(trace_distance(report.estimate, rho) <= 1e-6);
  const Eigen::VectorXd w = eig_hermitian(report.estimate.matrix()).eigenvalues;
  REQUIRE(w.minCoeff() >= -1e-8);
}

TEST_CASE("maxlik_maxent coincides with maxent on noiseless data", "[estimators]") {
  Rng rng(0xf2);
  const Povm sic = qubit_sic_povm();
  const DensityMatrix rho = sample_ginibre_state(2, 2, rng);
  const MeasurementRecord record = prefix_record(rho, sic, 3);
  const EstimatorReport two_stage = maxlik_maxent(record, sic);
  const EstimatorReport direct = maxent(record, sic);
  REQUIRE(trace_distance(two_stage.estimate, direct.estimate) <= 1e-6);
  REQUIRE(two_stage.method == EstimatorMethod::MAXLIK_MAXENT);
  REQUIRE(two_stage.maxent_state.has_value());
}

TEST_CASE("maxlik_maxent with no data returns the maximally mixed state", "[estimators]") {
  const Povm sic = qubit_sic_povm();
  const MeasurementRecord empty(sic.size(), {}, Eigen::VectorXd());
  const EstimatorReport report = maxlik_maxent(empty, sic);
  REQUIRE(trace_distance(report.estimate, DensityMatrix::maximally_mixed(2)) <= 1e-12);
}

TEST_CASE("maxlik_maxent keeps the eigenbasis after a small perturbation",
          "[estimators]") {
  Rng rng(0xf3);
  const DensityMatrix seed_state = sample_ginibre_state(4, 4, rng);
  const Povm eigb = eigenbasis_projectors(seed_state);
  Eigen::VectorXd f(2);
  f << 0.5 + 1e-6, 0.3;
  const MeasurementRecord record(eigb.size(), {0, 1}, f);
  const EstimatorReport report = maxlik_maxent(record, eigb);

  const SpectralDecomposition basis = eig_hermitian(seed_state.matrix());
  const Eigen::MatrixXcd rotated =
      basis.eigenvectors.adjoint() * report.estimate.mat() * basis.eigenvectors;
  double offdiag = 0.0;
  for (Eigen::Index a = 0; a < 4; ++a) {
    for (Eigen::Index b = 0; b < 4; ++b) {
      if (a != b) {
        offdiag += std::norm(rotated(a, b));
      }
    }
  }
  REQUIRE(std::sqrt(offdiag) <= 1e-8);
}

TEST_CASE("maxlik_maxent labels stage failures", "[estimators]") {
  Rng rng(0xf4);
  const Povm sic = qubit_sic_povm();
  const DensityMatrix rho = sample_ginibre_state(2, 2, rng);
  const MeasurementRecord record = full_record(rho, sic);
  EstimatorConfig cfg;
  cfg.maxent_max_iter = 1;
  REQUIRE_THROWS_WITH(maxlik_maxent(record, sic, cfg), ContainsSubstring("stage 2"));
}

TEST_CASE("vqt_inf unmeasured mass is closer to uniform on average", "[estimators]") {
  const Povm sic = qubit_sic_povm();
  double kl_inf = 0.0;
  double kl_l1 = 0.0;
  const int trials = 50;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(mix_seed(0xf5, trial));
    const DensityMatrix rho = sample_ginibre_state(2, 1, rng);
    const Eigen::VectorXd p = born_probabilities(rho, sic);
    const MeasurementRecord record = subset_record(p, 2, rng);
    kl_inf += kl_to_uniform(vqt_inf(record, sic).unmeasured_probs);
    kl_l1 += kl_to_uniform(vqt_l1(record, sic).unmeasured_probs);
  }
  REQUIRE(kl_inf / trials <= kl_l1 / trials + 1e-9);
}

TEST_CASE("every estimator emits a normalized PSD estimate", "[estimators]") {
  Rng rng(0xf6);
  const Povm povm = tensor_povm(qubit_sic_povm(), 2);
  const DensityMatrix rho = sample_ginibre_state(4, 2, rng);
  const MeasurementRecord record = prefix_record(rho, povm, 5);
  for (EstimatorMethod method :
       {EstimatorMethod::VQT_L1, EstimatorMethod::VQT_INF, EstimatorMethod::MAXENT,
        EstimatorMethod::MAXLIK, EstimatorMethod::MAXLIK_MAXENT}) {
    const EstimatorReport report = estimate(method, record, povm);
    REQUIRE(report.method == method);
    REQUIRE_THAT(report.estimate.mat().trace().real(), WithinAbs(1.0, 1e-8));
    const Eigen::VectorXd w = eig_hermitian(report.estimate.matrix()).eigenvalues;
    REQUIRE(w.minCoeff() >= -1e-8);
    REQUIRE(report.unmeasured_probs.size() == 11);
    REQUIRE(report.unmeasured_probs.minCoeff() >= -1e-9);
    REQUIRE(report.wall_time >= 0.0);
  }
}

TEST_CASE("estimator configuration validation", "[estimators]") {
  const Povm sic = qubit_sic_povm();
  const MeasurementRecord record(sic.size(), {0}, Eigen::VectorXd::Constant(1, 0.25));
  EstimatorConfig bad_tol;
  bad_tol.maxent_tol = 0.0;
  REQUIRE_THROWS_AS(maxent(record, sic, bad_tol), std::invalid_argument);
  EstimatorConfig bad_iter;
  bad_iter.maxlik_max_iter = 0;
  REQUIRE_THROWS_AS(maxlik(record, sic, bad_iter), std::invalid_argument);
  EstimatorConfig bad_bound;
  bad_bound.delta_max = -1.0;
  REQUIRE_THROWS_AS(vqt_l1(record, sic, bad_bound), std::invalid_argument);
  const MeasurementRecord wrong_size(8, {0}, Eigen::VectorXd::Constant(1, 0.25));
  REQUIRE_THROWS_AS(vqt_l1(wrong_size, sic), std::invalid_argument);
}

TEST_CASE("estimator method names round-trip", "[estimators]") {
  for (EstimatorMethod method :
       {EstimatorMethod::VQT_L1, EstimatorMethod::VQT_INF, EstimatorMethod::MAXENT,
        EstimatorMethod::MAXLIK, EstimatorMethod::MAXLIK_MAXENT}) {
    REQUIRE(parse_estimator(to_string(method)) == method);
  }
  REQUIRE_THROWS_AS(parse_estimator("bogus"), std::invalid_argument);
}
