#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tomoscope/hermitian.hpp"
#include "tomoscope/metrics.hpp"
#include "tomoscope/quantum.hpp"
#include "tomoscope/sdp.hpp"

namespace tomoscope {

enum class EstimatorMethod { VQT_L1, VQT_INF, MAXENT, MAXLIK, MAXLIK_MAXENT };

inline const char* to_string(EstimatorMethod m) {
  switch (m) {
    case EstimatorMethod::VQT_L1:
      return "vqt_l1";
    case EstimatorMethod::VQT_INF:
      return "vqt_inf";
    case EstimatorMethod::MAXENT:
      return "maxent";
    case EstimatorMethod::MAXLIK:
      return "maxlik";
    case EstimatorMethod::MAXLIK_MAXENT:
      return "maxlik_maxent";
  }
  return "unknown";
}

inline EstimatorMethod parse_estimator(const std::string& name) {
  if (name == "vqt_l1") return EstimatorMethod::VQT_L1;
  if (name == "vqt_inf") return EstimatorMethod::VQT_INF;
  if (name == "maxent") return EstimatorMethod::MAXENT;
  if (name == "maxlik") return EstimatorMethod::MAXLIK;
  if (name == "maxlik_maxent") return EstimatorMethod::MAXLIK_MAXENT;
  throw std::invalid_argument("unknown estimator: " + name);
}

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The SDP reported a verified Farkas certificate: no density matrix is
/// compatible with the record within the requested tolerances.
class IncompatibleDataError : public EstimationError {
 public:
  IncompatibleDataError(const std::string& msg, SdpCertificate cert)
      : EstimationError(msg), certificate_(std::move(cert)) {}
  const SdpCertificate& certificate() const { return certificate_; }

 private:
  SdpCertificate certificate_;
};

class MaxEntError : public EstimationError {
 public:
  MaxEntError(const std::string& msg, std::vector<double> history)
      : EstimationError(msg), residual_history_(std::move(history)) {}
  const std::vector<double>& residual_history() const { return residual_history_; }

 private:
  std::vector<double> residual_history_;
};

namespace detail {
inline SdpSolverOptions estimator_sdp_defaults() {
  SdpSolverOptions opts;
  opts.eps_gap = 1e-8;
  // Newton systems below the centering floor are unreliable; the polish
  // phase cannot center deeper than the floor either.
  opts.mu_target = opts.centering_mu_floor;
  opts.centering_steps = 12;
  return opts;
}
}  // namespace detail

struct EstimatorConfig {
  std::optional<double> delta_max{};
  double maxent_tol = 1e-10;
  int maxent_max_iter = 500;
  double maxlik_tol = 1e-7;
  int maxlik_max_iter = 100000;
  double noise_floor = 1e-12;  // floor for f_i in relative tolerances and weights
  SdpSolverOptions sdp = detail::estimator_sdp_defaults();

  void validate() const {
    if (maxent_tol <= 0.0 || maxlik_tol <= 0.0 || noise_floor <= 0.0 ||
        (delta_max && *delta_max <= 0.0)) {
      throw std::invalid_argument("EstimatorConfig: tolerances must be > 0");
    }
    if (maxent_max_iter < 1 || maxlik_max_iter < 1) {
      throw std::invalid_argument("EstimatorConfig: iteration caps must be >= 1");
    }
  }
};

/// Lagrange multipliers of the entropy maximum, aligned with the record's
/// measured indices.
struct MaxEntState {
  Eigen::VectorXd lambdas;
  double normalization = 0.0;
  double residual_norm = 0.0;
};

struct EstimatorReport {
  DensityMatrix estimate;
  EstimatorMethod method;
  Eigen::VectorXd deltas;            // per measured index, SDP methods only
  double objective_value = 0.0;
  Eigen::VectorXd unmeasured_probs;  // c~, aligned with record.unmeasured()
  int iterations = 0;
  double wall_time = 0.0;            // seconds
  std::optional<double> delta_sup{};          // VQT_INF only
  std::optional<MaxEntState> maxent_state{};  // MAXENT and MAXLIK_MAXENT
  int stage1_iterations = 0;                  // MAXLIK_MAXENT only
};

namespace detail {

class StopWatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline Eigen::VectorXd unmeasured_probs(const MeasurementRecord& record, const Povm& povm,
                                        const DensityMatrix& rho) {
  const std::vector<std::size_t> rest = record.unmeasured();
  Eigen::VectorXd c(static_cast<Eigen::Index>(rest.size()));
  for (std::size_t pos = 0; pos < rest.size(); ++pos) {
    c[static_cast<Eigen::Index>(pos)] = hs_inner(povm.effect(rest[pos]).mat(), rho.mat());
  }
  return c;
}

inline void check_record(const MeasurementRecord& record, const Povm& povm) {
  if (record.povm_size() != povm.size()) {
    throw std::invalid_argument("estimator: record does not match POVM size");
  }
}

/// Shared SDP front-end for both VQT variants.  Slack layout: one Delta per
/// measured index (record order), plus one trailing delta for the sup variant.
inline SdpProblem build_vqt_problem(const MeasurementRecord& record, const Povm& povm,
                                    const EstimatorConfig& cfg, bool sup_variant) {
  const Eigen::Index d = povm.dim();
  const Eigen::Index m = static_cast<Eigen::Index>(record.size());
  const Eigen::Index n_slack = sup_variant ? m + 1 : m;
  SdpProblem prob(d, n_slack);

  Eigen::VectorXd cost = Eigen::VectorXd::Ones(n_slack);
  if (sup_variant) {
    prob.set_objective(HermitianMatrix::zero(d), cost);
  } else {
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(d, d);
    for (std::size_t i : record.unmeasured()) {
      h += povm.effect(i).mat();
    }
    prob.set_objective(HermitianMatrix(std::move(h)), cost);
  }

  prob.add_constraint(HermitianMatrix::identity(d), Eigen::VectorXd::Zero(n_slack),
                      ConstraintSense::EQ, 1.0);
  for (Eigen::Index j = 0; j < m; ++j) {
    const std::size_t idx = record.indices()[static_cast<std::size_t>(j)];
    const double f = record.frequencies()[j];
    const double t = std::max(f, cfg.noise_floor);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n_slack);
    b[j] = -t;
    prob.add_constraint(povm.effect(idx), b, ConstraintSense::LE, f);
    prob.add_constraint(HermitianMatrix(Eigen::MatrixXcd(-povm.effect(idx).mat())), b,
                        ConstraintSense::LE, -f);
    if (cfg.delta_max) {
      Eigen::VectorXd bound = Eigen::VectorXd::Zero(n_slack);
      bound[j] = 1.0;
      prob.add_constraint(HermitianMatrix::zero(d), bound, ConstraintSense::LE,
                          *cfg.delta_max);
    }
  }
  if (sup_variant) {
    for (std::size_t i : record.unmeasured()) {
      Eigen::VectorXd b = Eigen::VectorXd::Zero(n_slack);
      b[m] = -1.0;
      prob.add_constraint(povm.effect(i), b, ConstraintSense::LE, 0.0);
    }
  }
  return prob;
}

inline EstimatorReport run_vqt(const MeasurementRecord& record, const Povm& povm,
                               const EstimatorConfig& cfg, bool sup_variant) {
  const StopWatch watch;
  cfg.validate();
  check_record(record, povm);
  const SdpProblem prob = build_vqt_problem(record, povm, cfg, sup_variant);
  const SdpSolution sol = solve(prob, cfg.sdp);
  const char* name = sup_variant ? "vqt_inf" : "vqt_l1";
  if (sol.status == SdpStatus::INFEASIBLE) {
    std::ostringstream msg;
    msg << name << ": record incompatible with any density matrix (Farkas merit "
        << sol.certificate->merit << ")";
    throw IncompatibleDataError(msg.str(), *sol.certificate);
  }
  if (sol.status != SdpStatus::OPTIMAL) {
    std::ostringstream msg;
    msg << name << ": solver returned " << to_string(sol.status) << " after "
        << sol.iterations << " iterations (primal " << sol.primal_residual << ", gap "
        << sol.duality_gap << ")";
    throw EstimationError(msg.str());
  }

  const Eigen::Index m = static_cast<Eigen::Index>(record.size());
  EstimatorReport report{
      DensityMatrix::normalized(sol.x),
      sup_variant ? EstimatorMethod::VQT_INF : EstimatorMethod::VQT_L1,
      sol.s.head(m),
      sol.objective_value,
      Eigen::VectorXd(),
      sol.iterations,
      0.0};
  report.unmeasured_probs = unmeasured_probs(record, povm, report.estimate);
  if (sup_variant) {
    report.delta_sup = sol.s[m];
  }
  report.wall_time = watch.seconds();
  return report;
}

struct MaxEntEval {
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  double normalization = 0.0;
  Eigen::MatrixXcd g;  // exp(-K) rescaled by exp(-max eig); trace in [1, d]
};

/// Residuals r_j = tr(E_j exp(-K))/N - f_j with K = sum lambda_i E_i and
/// N = tr exp(-K), plus their analytic Jacobian on request (spectral form of
/// the Frechet derivative of the matrix exponential).  Normalized residuals
/// are invariant under uniform lambda shifts, so boundary moments cannot be
/// faked by deflating N; everything is computed from the spectrum shifted by
/// its top eigenvalue and never overflows.
inline MaxEntEval maxent_eval(const std::vector<Eigen::MatrixXcd>& effects,
                              const Eigen::VectorXd& f, const Eigen::VectorXd& lambda,
                              bool with_jacobian) {
  const Eigen::Index m = static_cast<Eigen::Index>(effects.size());
  const Eigen::Index d = effects.empty() ? 1 : effects.front().rows();
  Eigen::MatrixXcd k = Eigen::MatrixXcd::Zero(d, d);
  for (Eigen::Index i = 0; i < m; ++i) {
    k -= lambda[i] * effects[static_cast<std::size_t>(i)];
  }
  const EigPair ek = eig_sym(k);
  const double wmax = ek.w.maxCoeff();
  Eigen::VectorXd expw(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    expw[i] = std::exp(ek.w[i] - wmax);
  }
  const double ns = expw.sum();

  MaxEntEval eval;
  eval.g = ek.v * expw.asDiagonal() * ek.v.adjoint();
  eval.g = 0.5 * (eval.g + eval.g.adjoint()).eval();
  eval.normalization = std::exp(wmax) * ns;
  eval.r.resize(m);
  Eigen::VectorXd moments(m);
  std::vector<Eigen::MatrixXcd> rotated(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) {
    rotated[static_cast<std::size_t>(j)] =
        ek.v.adjoint() * effects[static_cast<std::size_t>(j)] * ek.v;
    const Eigen::MatrixXcd& p = rotated[static_cast<std::size_t>(j)];
    double tr_eg = 0.0;
    for (Eigen::Index a = 0; a < d; ++a) {
      tr_eg += expw[a] * p(a, a).real();
    }
    moments[j] = tr_eg / ns;
    eval.r[j] = moments[j] - f[j];
  }
  if (!with_jacobian) {
    return eval;
  }

  // divided differences of exp over the shifted spectrum, stable sinh form
  Eigen::MatrixXd gamma(d, d);
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = 0; b < d; ++b) {
      const double mean = 0.5 * (ek.w[a] + ek.w[b]) - wmax;
      const double half = 0.5 * (ek.w[a] - ek.w[b]);
      const double sinch =
          std::abs(half) < 1e-5 ? 1.0 + half * half / 6.0 : std::sinh(half) / half;
      gamma(a, b) = std::exp(mean) * sinch;
    }
  }
  eval.jac.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::MatrixXcd& pi = rotated[static_cast<std::size_t>(i)];
    const Eigen::MatrixXcd di = -gamma.cast<std::complex<double>>().cwiseProduct(pi);
    double tr_di = 0.0;
    for (Eigen::Index a = 0; a < d; ++a) {
      tr_di += di(a, a).real();
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::MatrixXcd& pj = rotated[static_cast<std::size_t>(j)];
      std::complex<double> acc = 0.0;
      for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = 0; b < d; ++b) {
          acc += pj(a, b) * di(b, a);
        }
      }
      eval.jac(j, i) = (acc.real() - moments[j] * tr_di) / ns;
    }
  }
  return eval;
}

struct MaxEntResult {
  Eigen::VectorXd lambda;
  MaxEntEval eval;
  int iterations = 0;
};

/// Levenberg-Marquardt on the moment-matching residuals, starting from
/// lambda = 0 (the maximally mixed state).
inline MaxEntResult maxent_fit(const std::vector<Eigen::MatrixXcd>& effects,
                               const Eigen::VectorXd& f, const EstimatorConfig& cfg) {
  const Eigen::Index m = static_cast<Eigen::Index>(effects.size());
  const double tol = cfg.maxent_tol * static_cast<double>(m);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  MaxEntEval eval = maxent_eval(effects, f, lambda, true);
  std::vector<double> history{eval.r.norm()};

  // Boundary moment vectors make lambda diverge along a recession ray and the
  // residual bottom out at the precision floor; a stalled fit within the
  // relaxed band is still a valid Gibbs-family fit and is returned as such.
  constexpr double stall_band = 100.0;
  double damping = -1.0;
  double growth = 2.0;
  int rejected_streak = 0;
  int iter = 0;
  for (; iter < cfg.maxent_max_iter; ++iter) {
    if (eval.r.norm() <= tol) {
      return {lambda, std::move(eval), iter};
    }
    if (rejected_streak >= 30 || damping > 1e30) {
      if (eval.r.norm() <= stall_band * tol) {
        return {lambda, std::move(eval), iter};
      }
      break;
    }
    const Eigen::MatrixXd jtj = eval.jac.transpose() * eval.jac;
    const Eigen::VectorXd jtr = eval.jac.transpose() * eval.r;
    if (damping < 0.0) {
      damping = 1e-3;
    }
    // Marquardt scaling: damp each direction relative to its own curvature,
    // so weakly coupled multipliers (tiny Jacobian columns, e.g. effects with
    // near-zero frequency) still take Newton-sized steps.
    const Eigen::VectorXd scale =
        jtj.diagonal().cwiseMax(1e-12 * jtj.diagonal().maxCoeff());
    Eigen::MatrixXd damped = jtj;
    damped.diagonal() += damping * scale;
    const Eigen::VectorXd step = damped.ldlt().solve(-jtr);
    const Eigen::VectorXd trial = lambda + step;
    std::optional<MaxEntEval> trial_eval{};
    if (trial.allFinite()) {
      try {
        trial_eval = maxent_eval(effects, f, trial, true);
      } catch (const std::runtime_error&) {
        // a wild step can defeat the eigensolver; treat it as rejected
      }
    }
    const double predicted = step.dot(damping * scale.cwiseProduct(step) - jtr);
    const double actual =
        trial_eval ? eval.r.squaredNorm() - trial_eval->r.squaredNorm() : 0.0;
    const bool finite = trial_eval && trial_eval->r.allFinite();
    const double rho = finite && predicted > 0.0 ? actual / predicted : -1.0;
    if (finite && rho > 0.0) {
      lambda = trial;
      eval = std::move(*trial_eval);
      history.push_back(eval.r.norm());
      damping *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3.0));
      growth = 2.0;
      rejected_streak = 0;
    } else {
      damping *= growth;
      growth *= 2.0;
      ++rejected_streak;
    }
  }
  if (eval.r.norm() <= tol) {
    return {lambda, std::move(eval), iter};
  }
  std::ostringstream msg;
  msg << "maxent: residual " << eval.r.norm() << " above tolerance " << tol << " after "
      << iter << " iterations (moments may be unattainable)";
  throw MaxEntError(msg.str(), std::move(history));
}

}  // namespace detail

/// VQT: minimize sum Delta_i + tr(H rho) with H the sum of unmeasured
/// effects, subject to |tr(E_i rho) - f_i| <= Delta_i max(f_i, noise_floor).
inline EstimatorReport vqt_l1(const MeasurementRecord& record, const Povm& povm,
                              const EstimatorConfig& cfg = {}) {
  return detail::run_vqt(record, povm, cfg, false);
}

/// VQT-infinity: same data constraints, but the unmeasured mass is bounded in
/// the sup norm: tr(E_i rho) <= delta for all unmeasured i, objective
/// sum Delta_i + delta.
inline EstimatorReport vqt_inf(const MeasurementRecord& record, const Povm& povm,
                               const EstimatorConfig& cfg = {}) {
  return detail::run_vqt(record, povm, cfg, true);
}

/// Maximum-entropy estimate exp(-sum lambda_i E_i)/N, with the multipliers
/// found by damped Gauss-Newton on the moment conditions.
inline EstimatorReport maxent(const MeasurementRecord& record, const Povm& povm,
                              const EstimatorConfig& cfg = {}) {
  const detail::StopWatch watch;
  cfg.validate();
  detail::check_record(record, povm);
  const Eigen::Index d = povm.dim();
  if (record.empty()) {
    EstimatorReport report{DensityMatrix::maximally_mixed(d), EstimatorMethod::MAXENT,
                           Eigen::VectorXd(), std::log(static_cast<double>(d)),
                           Eigen::VectorXd(), 0, 0.0};
    report.maxent_state = MaxEntState{Eigen::VectorXd(), static_cast<double>(d), 0.0};
    report.unmeasured_probs = detail::unmeasured_probs(record, povm, report.estimate);
    report.wall_time = watch.seconds();
    return report;
  }

  std::vector<Eigen::MatrixXcd> effects;
  effects.reserve(record.size());
  for (std::size_t i : record.indices()) {
    effects.push_back(povm.effect(i).mat());
  }
  detail::MaxEntResult fit = detail::maxent_fit(effects, record.frequencies(), cfg);

  EstimatorReport report{
      DensityMatrix::normalized(HermitianMatrix(fit.eval.g)),
      EstimatorMethod::MAXENT,
      Eigen::VectorXd(),
      0.0,
      Eigen::VectorXd(),
      fit.iterations,
      0.0};
  report.maxent_state =
      MaxEntState{fit.lambda, fit.eval.normalization, fit.eval.r.norm()};
  report.unmeasured_probs = detail::unmeasured_probs(record, povm, report.estimate);
  report.objective_value = von_neumann_entropy(report.estimate);
  report.wall_time = watch.seconds();
  return report;
}

namespace detail {

struct MaxLikProblem {
  std::vector<Eigen::MatrixXcd> effects;  // face-reduced, dropped zero-frequency terms
  Eigen::VectorXd f, weights;
  Eigen::MatrixXcd lift;  // maps the face back to the full space
  Eigen::Index dim = 0;
};

/// Restricts the search to the common kernel of the zero-frequency effects
/// (the face of the PSD cone those constraints pin), which removes the
/// 1/noise_floor curvature they would otherwise inject.
inline MaxLikProblem reduce_maxlik(const MeasurementRecord& record, const Povm& povm,
                                   const EstimatorConfig& cfg) {
  const Eigen::Index d = povm.dim();
  MaxLikProblem prob;
  Eigen::MatrixXcd zero_sum = Eigen::MatrixXcd::Zero(d, d);
  bool any_zero = false;
  for (std::size_t pos = 0; pos < record.size(); ++pos) {
    if (record.frequencies()[static_cast<Eigen::Index>(pos)] <= cfg.noise_floor) {
      zero_sum += povm.effect(record.indices()[pos]).mat();
      any_zero = true;
    }
  }
  prob.lift = Eigen::MatrixXcd::Identity(d, d);
  prob.dim = d;
  if (any_zero) {
    const EigPair ez = eig_sym(zero_sum);
    Eigen::Index kernel = 0;
    while (kernel < d && ez.w[kernel] <= 1e-12) {
      ++kernel;
    }
    if (kernel > 0 && kernel < d) {
      prob.lift = ez.v.leftCols(kernel);
      prob.dim = kernel;
    }
  }
  std::vector<double> fs;
  for (std::size_t pos = 0; pos < record.size(); ++pos) {
    const double f = record.frequencies()[static_cast<Eigen::Index>(pos)];
    if (f <= cfg.noise_floor && prob.dim < d) {
      continue;  // exactly satisfied on the face
    }
    const Eigen::MatrixXcd& e = povm.effect(record.indices()[pos]).mat();
    prob.effects.push_back(prob.lift.adjoint() * e * prob.lift);
    fs.push_back(f);
  }
  prob.f = Eigen::Map<Eigen::VectorXd>(fs.data(), static_cast<Eigen::Index>(fs.size()));
  prob.weights.resize(prob.f.size());
  for (Eigen::Index j = 0; j < prob.f.size(); ++j) {
    prob.weights[j] = 1.0 / std::max(prob.f[j], cfg.noise_floor);
  }
  return prob;
}

inline double maxlik_value(const MaxLikProblem& prob, const Eigen::MatrixXcd& x) {
  double val = 0.0;
  for (std::size_t j = 0; j < prob.effects.size(); ++j) {
    const double resid =
        hs_inner(prob.effects[j], x) - prob.f[static_cast<Eigen::Index>(j)];
    val -= 0.5 * prob.weights[static_cast<Eigen::Index>(j)] * resid * resid;
  }
  return val;
}

inline Eigen::MatrixXcd maxlik_gradient(const MaxLikProblem& prob, const Eigen::MatrixXcd& x) {
  Eigen::MatrixXcd grad = Eigen::MatrixXcd::Zero(prob.dim, prob.dim);
  for (std::size_t j = 0; j < prob.effects.size(); ++j) {
    const double resid =
        hs_inner(prob.effects[j], x) - prob.f[static_cast<Eigen::Index>(j)];
    grad -= prob.weights[static_cast<Eigen::Index>(j)] * resid * prob.effects[j];
  }
  // remove the trace component: steps stay on the unit-trace slice, so the
  // stationarity measure vanishes at constrained optima
  const std::complex<double> shift = grad.trace() / static_cast<double>(prob.dim);
  grad -= shift * Eigen::MatrixXcd::Identity(prob.dim, prob.dim);
  return grad;
}

/// Euclidean projection onto the density-matrix set: eigenvalues are
/// projected onto the probability simplex, eigenvectors kept.
inline Eigen::MatrixXcd retract(const Eigen::MatrixXcd& z) {
  const EigPair ez = eig_sym(z);
  std::vector<double> sorted(ez.w.data(), ez.w.data() + ez.w.size());
  std::sort(sorted.rbegin(), sorted.rend());
  double cum = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    cum += sorted[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (sorted[i] - t > 0.0) {
      theta = t;
    }
  }
  const Eigen::VectorXd lam = (ez.w.array() - theta).cwiseMax(0.0);
  return ez.v * lam.asDiagonal() * ez.v.adjoint();
}

struct MaxLikResult {
  Eigen::MatrixXcd x;
  double value = 0.0;
  double stationarity = 0.0;
  int iterations = 0;
};

/// Projected gradient ascent with Nesterov momentum and function-value
/// restarts.  Each step backtracks from 1.0, halving until the Armijo
/// condition with constant 1e-4 holds.
inline MaxLikResult maxlik_optimize(const MaxLikProblem& prob, const EstimatorConfig& cfg) {
  const Eigen::Index df = prob.dim;
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Identity(df, df) / static_cast<double>(df);
  Eigen::MatrixXcd x_prev = x;
  double value = maxlik_value(prob, x);
  double momentum = 1.0;

  const auto backtrack = [&](const Eigen::MatrixXcd& from, const Eigen::MatrixXcd& grad,
                             double from_value) {
    double alpha = 1.0;
    for (;;) {
      const Eigen::MatrixXcd cand = retract(from + alpha * grad);
      const double cand_value = maxlik_value(prob, cand);
      const double slope = hs_inner(grad, Eigen::MatrixXcd(cand - from));
      if (cand_value >= from_value + 1e-4 * slope || alpha < 1e-14) {
        return std::pair{cand, cand_value};
      }
      alpha *= 0.5;
    }
  };

  int iter = 0;
  double stat = 0.0;
  for (; iter < cfg.maxlik_max_iter; ++iter) {
    const Eigen::MatrixXcd grad = maxlik_gradient(prob, x);
    stat = (retract(x + grad) - x).norm();
    if (stat <= cfg.maxlik_tol) {
      return {x, value, stat, iter};
    }

    const double beta = (momentum - 1.0) / (0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum)));
    const double momentum_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    const Eigen::MatrixXcd y = x + beta * (x - x_prev);
    const Eigen::MatrixXcd grad_y = maxlik_gradient(prob, y);
    auto [cand, cand_value] = backtrack(y, grad_y, maxlik_value(prob, y));
    if (cand_value < value) {
      // momentum overshot: restart from the best point
      momentum = 1.0;
      std::tie(cand, cand_value) = backtrack(x, grad, value);
    } else if (hs_inner(grad_y, Eigen::MatrixXcd(cand - x)) < 0.0) {
      // ascent direction opposes the momentum extrapolation: drop momentum
      // before it starts oscillating around the optimum
      momentum = 1.0;
    } else {
      momentum = momentum_next;
    }
    x_prev = x;
    x = cand;
    value = cand_value;
  }
  stat = (retract(x + maxlik_gradient(prob, x)) - x).norm();
  return {x, value, stat, iter};
}

}  // namespace detail

/// Maximum-likelihood estimate under the Gaussian-weight objective
/// -(1/2) sum (tr(E_j rho) - f_j)^2 / max(f_j, noise_floor).
inline EstimatorReport maxlik(const MeasurementRecord& record, const Povm& povm,
                              const EstimatorConfig& cfg = {}) {
  const detail::StopWatch watch;
  cfg.validate();
  detail::check_record(record, povm);
  const Eigen::Index d = povm.dim();
  if (record.empty()) {
    EstimatorReport report{DensityMatrix::maximally_mixed(d), EstimatorMethod::MAXLIK,
                           Eigen::VectorXd(), 0.0, Eigen::VectorXd(), 0, 0.0};
    report.unmeasured_probs = detail::unmeasured_probs(record, povm, report.estimate);
    report.wall_time = watch.seconds();
    return report;
  }
  const detail::MaxLikProblem prob = detail::reduce_maxlik(record, povm, cfg);
  const detail::MaxLikResult result = detail::maxlik_optimize(prob, cfg);
  if (result.stationarity > cfg.maxlik_tol) {
    std::ostringstream msg;
    msg << "maxlik: no stationary point within " << result.iterations
        << " iterations (projected-gradient norm " << result.stationarity << " vs tolerance "
        << cfg.maxlik_tol << ")";
    throw EstimationError(msg.str());
  }
  const Eigen::MatrixXcd full = prob.lift * result.x * prob.lift.adjoint();
  EstimatorReport report{DensityMatrix::normalized(HermitianMatrix(full)),
                         EstimatorMethod::MAXLIK,
                         Eigen::VectorXd(),
                         result.value,
                         Eigen::VectorXd(),
                         result.iterations,
                         0.0};
  report.unmeasured_probs = detail::unmeasured_probs(record, povm, report.estimate);
  report.wall_time = watch.seconds();
  return report;
}

/// Two-stage scheme: fit by maximum likelihood, then rerun maximum entropy on
/// the fitted probabilities tr(E_i rho_ML).
inline EstimatorReport maxlik_maxent(const MeasurementRecord& record, const Povm& povm,
                                     const EstimatorConfig& cfg = {}) {
  const detail::StopWatch watch;
  EstimatorReport stage1 = [&] {
    try {
      return maxlik(record, povm, cfg);
    } catch (const EstimationError& err) {
      throw EstimationError(std::string("maxlik_maxent stage 1: ") + err.what());
    }
  }();

  Eigen::VectorXd fitted(static_cast<Eigen::Index>(record.size()));
  for (std::size_t pos = 0; pos < record.size(); ++pos) {
    const double p = hs_inner(povm.effect(record.indices()[pos]).mat(), stage1.estimate.mat());
    fitted[static_cast<Eigen::Index>(pos)] = std::max(p, 0.0);
  }
  const MeasurementRecord refit(record.povm_size(),
                                std::vector<std::size_t>(record.indices()), fitted);
  EstimatorReport report = [&] {
    try {
      return maxent(refit, povm, cfg);
    } catch (const EstimationError& err) {
      throw EstimationError(std::string("maxlik_maxent stage 2: ") + err.what());
    }
  }();
  report.method = EstimatorMethod::MAXLIK_MAXENT;
  report.stage1_iterations = stage1.iterations;
  report.wall_time = watch.seconds();
  return report;
}

/// Dispatch by method tag.
inline EstimatorReport estimate(EstimatorMethod method, const MeasurementRecord& record,
                                const Povm& povm, const EstimatorConfig& cfg = {}) {
  switch (method) {
    case EstimatorMethod::VQT_L1:
      return vqt_l1(record, povm, cfg);
    case EstimatorMethod::VQT_INF:
      return vqt_inf(record, povm, cfg);
    case EstimatorMethod::MAXENT:
      return maxent(record, povm, cfg);
    case EstimatorMethod::MAXLIK:
      return maxlik(record, povm, cfg);
    case EstimatorMethod::MAXLIK_MAXENT:
      return maxlik_maxent(record, povm, cfg);
  }
  throw std::invalid_argument("estimate: unknown method");
}

}  // namespace tomoscope
