#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tomoscope/hermitian.hpp"

namespace tomoscope {

enum class ConstraintSense { EQ, LE };
enum class SdpStatus { OPTIMAL, INFEASIBLE, UNBOUNDED, MAX_ITER };

inline const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::OPTIMAL:
      return "OPTIMAL";
    case SdpStatus::INFEASIBLE:
      return "INFEASIBLE";
    case SdpStatus::UNBOUNDED:
      return "UNBOUNDED";
    case SdpStatus::MAX_ITER:
      return "MAX_ITER";
  }
  return "UNKNOWN";
}

struct SdpConstraint {
  HermitianMatrix a;
  Eigen::VectorXd b;
  ConstraintSense sense;
  double rhs;
};

/// Linear SDP in one Hermitian PSD matrix variable X plus nonnegative scalar
/// slacks s:
///
///   minimize    tr(C X) + c's
///   subject to  tr(A_k X) + b_k's  {=, <=}  g_k,   X PSD,  s >= 0.
class SdpProblem {
 public:
  SdpProblem(Eigen::Index dim, Eigen::Index n_slack)
      : dim_(dim),
        n_slack_(n_slack),
        c_matrix_(HermitianMatrix::zero(std::max<Eigen::Index>(dim, 1))),
        c_slack_(Eigen::VectorXd::Zero(std::max<Eigen::Index>(n_slack, 0))) {
    if (dim < 1 || n_slack < 0) {
      throw std::invalid_argument("SdpProblem: dim must be >= 1 and n_slack >= 0");
    }
  }

  void set_objective(HermitianMatrix c, Eigen::VectorXd c_slack) {
    if (c.dim() != dim_ || c_slack.size() != n_slack_) {
      throw std::invalid_argument("SdpProblem: objective sizes do not match");
    }
    c_matrix_ = std::move(c);
    c_slack_ = std::move(c_slack);
  }

  void add_constraint(HermitianMatrix a, Eigen::VectorXd b, ConstraintSense sense, double rhs) {
    if (a.dim() != dim_ || b.size() != n_slack_) {
      throw std::invalid_argument("SdpProblem: constraint sizes do not match");
    }
    if (!std::isfinite(rhs)) {
      throw std::invalid_argument("SdpProblem: constraint rhs must be finite");
    }
    constraints_.push_back({std::move(a), std::move(b), sense, rhs});
  }

  Eigen::Index dim() const { return dim_; }
  Eigen::Index n_slack() const { return n_slack_; }
  const HermitianMatrix& c_matrix() const { return c_matrix_; }
  const Eigen::VectorXd& c_slack() const { return c_slack_; }
  const std::vector<SdpConstraint>& constraints() const { return constraints_; }

  Eigen::Index n_le() const {
    Eigen::Index n = 0;
    for (const SdpConstraint& con : constraints_) {
      if (con.sense == ConstraintSense::LE) {
        ++n;
      }
    }
    return n;
  }

  void validate() const {
    if (constraints_.empty()) {
      throw std::invalid_argument("SdpProblem: needs at least one constraint");
    }
  }

 private:
  Eigen::Index dim_;
  Eigen::Index n_slack_;
  HermitianMatrix c_matrix_;
  Eigen::VectorXd c_slack_;
  std::vector<SdpConstraint> constraints_;
};

/// Farkas-type ray proving infeasibility (dual ray over the constraints) or
/// unboundedness (primal improving ray in the internal svec layout).
struct SdpCertificate {
  Eigen::VectorXd ray;
  double merit;           // g'y for infeasibility (> 0), q'u for unboundedness (< 0)
  double cone_violation;  // distance of the ray image from the required cone
};

struct SdpSolution {
  HermitianMatrix x;
  Eigen::VectorXd s;
  Eigen::VectorXd y;  // one multiplier per constraint, in input order
  double objective_value;
  SdpStatus status;
  double primal_residual;
  double dual_residual;
  double duality_gap;
  double mu;
  int iterations;
  std::optional<SdpCertificate> certificate;
};

struct SdpSolverOptions {
  double eps_primal = 1e-8;
  double eps_dual = 1e-8;
  double eps_gap = 1e-7;
  double eps_infeasible = 1e-7;
  double mu_target = 0.0;  // when > 0, convergence also requires recovered mu below this
  int max_iter = 50000;
  int centering_steps = 2;
  double step_back = 0.99;
  int stall_window = 30;
  double mu_floor = 5e-15;
  double centering_mu_floor = 1e-10;  // smallest mu the polish phase aims at
  bool verbose = false;
};

namespace detail {

constexpr double kSqrt2 = 1.4142135623730951;

/// Isometry between Hermitian d x d matrices and R^{d^2}: diagonal first,
/// then sqrt(2) * (Re, Im) of the strict upper triangle, column-major.
inline Eigen::VectorXd svec(const Eigen::MatrixXcd& a) {
  const Eigen::Index d = a.rows();
  Eigen::VectorXd out(d * d);
  for (Eigen::Index j = 0; j < d; ++j) {
    out[j] = a(j, j).real();
  }
  Eigen::Index pos = d;
  for (Eigen::Index k = 1; k < d; ++k) {
    for (Eigen::Index j = 0; j < k; ++j) {
      out[pos++] = kSqrt2 * a(j, k).real();
      out[pos++] = kSqrt2 * a(j, k).imag();
    }
  }
  return out;
}

inline Eigen::MatrixXcd smat(const Eigen::VectorXd& v, Eigen::Index d) {
  Eigen::MatrixXcd out(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    out(j, j) = v[j];
  }
  Eigen::Index pos = d;
  for (Eigen::Index k = 1; k < d; ++k) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const double re = v[pos++] / kSqrt2;
      const double im = v[pos++] / kSqrt2;
      out(j, k) = std::complex<double>(re, im);
      out(k, j) = std::complex<double>(re, -im);
    }
  }
  return out;
}

struct EigPair {
  Eigen::VectorXd w;
  Eigen::MatrixXcd v;
};

inline EigPair eig_sym(const Eigen::MatrixXcd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (a + a.adjoint()));
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("sdp: eigendecomposition failed");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

inline Eigen::MatrixXcd pow_from_eig(const EigPair& e, double p) {
  Eigen::VectorXd w(e.w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    w[i] = std::pow(std::max(e.w[i], 1e-200), p);
  }
  return e.v * w.asDiagonal() * e.v.adjoint();
}

inline double eig_min(const Eigen::MatrixXcd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (a + a.adjoint()),
                                                     Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Primal-dual interior point method on the homogeneous self-dual embedding
/// with Nesterov-Todd scaling and a Mehrotra predictor-corrector step.  The
/// cone is PSD(d) x R+^{n_slack + n_le}; LE rows get one internal slack each.
class HsdeSolver {
 public:
  HsdeSolver(const SdpProblem& prob, const SdpSolverOptions& opts)
      : opts_(opts), d_(prob.dim()), n_slack_(prob.n_slack()) {
    prob.validate();
    m_ = static_cast<Eigen::Index>(prob.constraints().size());
    n_le_ = prob.n_le();
    n_orth_ = n_slack_ + n_le_;
    nsv_ = d_ * d_;
    N_ = nsv_ + n_orth_;
    nu_ = static_cast<double>(d_ + n_orth_);

    A0_.resize(m_, N_);
    g0_.resize(m_);
    q0_ = Eigen::VectorXd::Zero(N_);
    q0_.head(nsv_) = svec(prob.c_matrix().mat());
    q0_.segment(nsv_, n_slack_) = prob.c_slack();
    Eigen::Index le_seen = 0;
    for (Eigen::Index k = 0; k < m_; ++k) {
      const SdpConstraint& con = prob.constraints()[static_cast<std::size_t>(k)];
      Eigen::VectorXd row = Eigen::VectorXd::Zero(N_);
      row.head(nsv_) = svec(con.a.mat());
      row.segment(nsv_, n_slack_) = con.b;
      if (con.sense == ConstraintSense::LE) {
        row[nsv_ + n_slack_ + le_seen] = 1.0;
        ++le_seen;
      }
      A0_.row(k) = row;
      g0_[k] = con.rhs;
    }

    equilibrate();

    e_ = Eigen::VectorXd::Zero(N_);
    e_.head(nsv_) = svec(Eigen::MatrixXcd::Identity(d_, d_));
    e_.tail(n_orth_).setOnes();

    u_ = e_;
    v_ = e_;
    y_ = Eigen::VectorXd::Zero(m_);
    tau_ = 1.0;
    kappa_ = 1.0;
  }

  SdpSolution run() {
    int centering_left = std::max(opts_.centering_steps, 0);
    double best_score = std::numeric_limits<double>::infinity();
    double best_mu = std::numeric_limits<double>::infinity();
    int last_improvement = 0;
    int tiny_steps = 0;
    bool accept_stall = false;
    bool polishing = false;
    double polish_mu = 0.0;

    for (int iter = 0;; ++iter) {
      mu_ = (u_.dot(v_) + tau_ * kappa_) / (nu_ + 1.0);
      recover();
      if (!std::isfinite(mu_) || !std::isfinite(pr_) || !std::isfinite(dr_) ||
          !std::isfinite(gap_)) {
        return finish_relaxed(iter);
      }

      if (polishing) {
        // Pure centering at a frozen, numerically safe mu.  Each healthy step
        // is snapshotted; any degradation ends the phase with the last good
        // iterate, so polish is strictly best effort.
        const bool healthy = pr_ <= 10.0 * opts_.eps_primal &&
                             dr_ <= 10.0 * opts_.eps_dual &&
                             gap_ <= std::max(10.0 * opts_.eps_gap,
                                              10.0 * (nu_ + 1.0) * polish_mu);
        if (opts_.verbose) {
          trace_iteration(iter, healthy);
        }
        if (!healthy) {
          return finish(SdpStatus::OPTIMAL, iter);
        }
        snapshot(iter);
        if (centering_left == 0 || iter >= opts_.max_iter) {
          return finish(SdpStatus::OPTIMAL, iter);
        }
        compute_scaling();
        assemble_kkt();
        const Direction dir =
            newton(Eigen::VectorXd::Zero(m_), Eigen::VectorXd::Zero(N_), 0.0,
                   scale_mu_target(polish_mu), polish_mu - tau_ * kappa_);
        --centering_left;
        const double alpha = std::min(1.0, opts_.step_back * step_to_boundary(dir));
        if (alpha < 1e-9) {
          return finish(SdpStatus::OPTIMAL, iter);
        }
        u_ += alpha * dir.du;
        v_ += alpha * dir.dv;
        y_ += alpha * dir.dy;
        tau_ += alpha * dir.dtau;
        kappa_ += alpha * dir.dkappa;
        continue;
      }

      const bool basic = pr_ <= opts_.eps_primal && dr_ <= opts_.eps_dual &&
                         gap_ <= opts_.eps_gap;
      const bool relaxed = pr_ <= 10.0 * opts_.eps_primal &&
                           dr_ <= 10.0 * opts_.eps_dual &&
                           gap_ <= 10.0 * opts_.eps_gap;
      const bool stalled = iter - last_improvement > opts_.stall_window ||
                           tiny_steps >= 2 || mu_ < opts_.mu_floor;
      // mu_target is best effort: when progress dies at the numerical floor
      // with the residual criteria met (exactly, or within 10x on a stall),
      // the iterate is accepted rather than ground into MAX_ITER.
      if (relaxed && stalled) {
        accept_stall = true;
      }
      const bool conv = (basic && (opts_.mu_target <= 0.0 ||
                                   mu_rec_ <= opts_.mu_target)) ||
                        (relaxed && accept_stall);
      if (opts_.verbose) {
        trace_iteration(iter, conv);
      }
      const double score = std::max({pr_, dr_, gap_});
      if (score < best_score || (opts_.mu_target > 0.0 && mu_rec_ < 0.99 * best_mu)) {
        if (score < best_score) {
          best_score = score;
          snapshot(iter);
        }
        best_mu = std::min(best_mu, mu_rec_);
        last_improvement = iter;
      }
      if (conv) {
        if (basic) {
          snapshot(iter);
        }
        if (centering_left == 0 || iter >= opts_.max_iter) {
          return finish(SdpStatus::OPTIMAL, iter);
        }
        polishing = true;
        polish_mu = std::max(mu_, opts_.centering_mu_floor);
        continue;
      }
      if (auto cert = infeasibility_certificate()) {
        return finish_certificate(SdpStatus::INFEASIBLE, iter, std::move(*cert));
      }
      if (auto cert = unboundedness_certificate()) {
        return finish_certificate(SdpStatus::UNBOUNDED, iter, std::move(*cert));
      }
      if (iter >= opts_.max_iter || stalled) {
        return finish_relaxed(iter);
      }

      compute_scaling();
      assemble_kkt();
      const Direction aff = newton(-rp_, -rd_, -rg_, jordan_sq_neg(), -tau_ * kappa_);
      const double alpha_aff = std::min(1.0, step_to_boundary(aff));
      const double mu_aff = complementarity_after(aff, alpha_aff);
      double sigma = std::pow(std::max(mu_aff, 0.0) / mu_, 3.0);
      sigma = std::clamp(sigma, 0.0, 0.9999);
      const Direction dir =
          newton(-(1.0 - sigma) * rp_, -(1.0 - sigma) * rd_, -(1.0 - sigma) * rg_,
                 combined_dc(aff, sigma), combined_dt(aff, sigma));

      const double alpha = std::min(1.0, opts_.step_back * step_to_boundary(dir));
      tiny_steps = alpha < 1e-9 ? tiny_steps + 1 : 0;
      u_ += alpha * dir.du;
      v_ += alpha * dir.dv;
      y_ += alpha * dir.dy;
      tau_ += alpha * dir.dtau;
      kappa_ += alpha * dir.dkappa;
    }
  }

 private:
  struct Direction {
    Eigen::VectorXd du, dv, dy;
    double dtau = 0.0, dkappa = 0.0;
  };

  struct Snapshot {
    Eigen::VectorXd x_svec, s, y;
    double objective = 0.0, pr = 0.0, dr = 0.0, gap = 0.0, mu = 0.0;
  };

  void equilibrate() {
    A_ = A0_;
    g_ = g0_;
    q_ = q0_;
    row_scale_ = Eigen::VectorXd::Ones(m_);
    col_scale_ = Eigen::VectorXd::Ones(N_);
    for (int pass = 0; pass < 3; ++pass) {
      for (Eigen::Index k = 0; k < m_; ++k) {
        const double rmax = A_.row(k).cwiseAbs().maxCoeff();
        if (rmax > 0.0) {
          const double f = 1.0 / std::sqrt(rmax);
          A_.row(k) *= f;
          g_[k] *= f;
          row_scale_[k] *= f;
        }
      }
      // Only orthant columns may be scaled individually; scaling svec
      // coordinates unevenly would break the PSD cone automorphism.
      for (Eigen::Index j = nsv_; j < N_; ++j) {
        const double cmax = A_.col(j).cwiseAbs().maxCoeff();
        if (cmax > 0.0) {
          const double f = 1.0 / std::sqrt(cmax);
          A_.col(j) *= f;
          q_[j] *= f;
          col_scale_[j] *= f;
        }
      }
    }
  }

  // --- cone algebra on the scaled iterate -----------------------------------

  void compute_scaling() {
    const Eigen::MatrixXcd up = smat(u_.head(nsv_), d_);
    const Eigen::MatrixXcd vp = smat(v_.head(nsv_), d_);
    const EigPair eu = eig_sym(up);
    const Eigen::MatrixXcd u_half = pow_from_eig(eu, 0.5);
    const EigPair es = eig_sym(u_half * vp * u_half);
    wnt_ = u_half * pow_from_eig(es, -0.5) * u_half;
    wnt_ = 0.5 * (wnt_ + wnt_.adjoint());
    const EigPair ew = eig_sym(wnt_);
    ws_ = pow_from_eig(ew, 0.5);
    wis_ = pow_from_eig(ew, -0.5);
    lam_mat_ = wis_ * up * wis_;
    lam_mat_ = 0.5 * (lam_mat_ + lam_mat_.adjoint());
    lam_eig_ = eig_sym(lam_mat_);
    lam_isqrt_ = pow_from_eig(lam_eig_, -0.5);

    w_orth_ = (u_.tail(n_orth_).cwiseQuotient(v_.tail(n_orth_))).cwiseSqrt();
    lam_orth_ = (u_.tail(n_orth_).cwiseProduct(v_.tail(n_orth_))).cwiseSqrt();
  }

  Eigen::VectorXd conjugate_block(const Eigen::VectorXd& z, const Eigen::MatrixXcd& outer,
                                  const Eigen::VectorXd& orth_factor) const {
    Eigen::VectorXd out(N_);
    out.head(nsv_) = svec(outer * smat(z.head(nsv_), d_) * outer);
    out.tail(n_orth_) = z.tail(n_orth_).cwiseProduct(orth_factor);
    return out;
  }

  Eigen::VectorXd apply_h(const Eigen::VectorXd& z) const {
    return conjugate_block(z, wnt_, w_orth_.cwiseAbs2());
  }
  Eigen::VectorXd apply_w(const Eigen::VectorXd& z) const {
    return conjugate_block(z, ws_, w_orth_);
  }
  Eigen::VectorXd apply_winv(const Eigen::VectorXd& z) const {
    return conjugate_block(z, wis_, w_orth_.cwiseInverse());
  }

  /// Solves lambda o x = rhs (Jordan product) in the scaled space.
  Eigen::VectorXd jordan_div(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd out(N_);
    const Eigen::MatrixXcd r = lam_eig_.v.adjoint() * smat(rhs.head(nsv_), d_) * lam_eig_.v;
    Eigen::MatrixXcd x(d_, d_);
    for (Eigen::Index j = 0; j < d_; ++j) {
      for (Eigen::Index k = 0; k < d_; ++k) {
        x(j, k) = 2.0 * r(j, k) / (lam_eig_.w[j] + lam_eig_.w[k]);
      }
    }
    out.head(nsv_) = svec(lam_eig_.v * x * lam_eig_.v.adjoint());
    out.tail(n_orth_) = rhs.tail(n_orth_).cwiseQuotient(lam_orth_);
    return out;
  }

  Eigen::VectorXd jordan_sq_neg() const {
    Eigen::VectorXd out(N_);
    out.head(nsv_) = -svec(lam_mat_ * lam_mat_);
    out.tail(n_orth_) = -lam_orth_.cwiseAbs2();
    return out;
  }

  Eigen::VectorXd scale_mu_target(double target) const {
    Eigen::VectorXd out = jordan_sq_neg();
    out += target * e_;
    return out;
  }

  Eigen::VectorXd combined_dc(const Direction& aff, double sigma) const {
    const Eigen::VectorXd du_s = apply_winv(aff.du);
    const Eigen::VectorXd dv_s = apply_w(aff.dv);
    Eigen::VectorXd corr(N_);
    const Eigen::MatrixXcd a = smat(du_s.head(nsv_), d_);
    const Eigen::MatrixXcd b = smat(dv_s.head(nsv_), d_);
    corr.head(nsv_) = svec(0.5 * (a * b + b * a));
    corr.tail(n_orth_) = du_s.tail(n_orth_).cwiseProduct(dv_s.tail(n_orth_));
    return scale_mu_target(sigma * mu_) - corr;
  }

  double combined_dt(const Direction& aff, double sigma) const {
    return sigma * mu_ - tau_ * kappa_ - aff.dtau * aff.dkappa;
  }

  double step_to_boundary(const Direction& dir) const {
    double alpha = std::numeric_limits<double>::infinity();
    const Eigen::VectorXd du_s = apply_winv(dir.du);
    const Eigen::VectorXd dv_s = apply_w(dir.dv);
    for (const Eigen::VectorXd* z : {&du_s, &dv_s}) {
      const double wmin = eig_min(lam_isqrt_ * smat(z->head(nsv_), d_) * lam_isqrt_);
      if (wmin < 0.0) {
        alpha = std::min(alpha, -1.0 / wmin);
      }
      for (Eigen::Index i = 0; i < n_orth_; ++i) {
        const double dz = (*z)[nsv_ + i];
        if (dz < 0.0) {
          alpha = std::min(alpha, -lam_orth_[i] / dz);
        }
      }
    }
    if (dir.dtau < 0.0) {
      alpha = std::min(alpha, -tau_ / dir.dtau);
    }
    if (dir.dkappa < 0.0) {
      alpha = std::min(alpha, -kappa_ / dir.dkappa);
    }
    return alpha;
  }

  double complementarity_after(const Direction& dir, double alpha) const {
    const double dot = (u_ + alpha * dir.du).dot(v_ + alpha * dir.dv);
    const double tk = (tau_ + alpha * dir.dtau) * (kappa_ + alpha * dir.dkappa);
    return (dot + tk) / (nu_ + 1.0);
  }

  // --- KKT system -----------------------------------------------------------

  void assemble_kkt() {
    rp_ = A_ * u_ - g_ * tau_;
    rd_ = -A_.transpose() * y_ + q_ * tau_ - v_;
    rg_ = g_.dot(y_) - q_.dot(u_) - kappa_;

    hat_.resize(N_, m_);
    for (Eigen::Index k = 0; k < m_; ++k) {
      hat_.col(k) = apply_h(A_.row(k).transpose());
    }
    kkt_m_ = A_ * hat_;
    kkt_m_ = 0.5 * (kkt_m_ + kkt_m_.transpose()).eval();
    hq_ = apply_h(q_);
    ahq_ = A_ * hq_;
    qhq_ = q_.dot(hq_);

    llt_.compute(kkt_m_);
    use_llt_ = llt_.info() == Eigen::Success;
    if (!use_llt_) {
      double jitter = 1e-14 * (kkt_m_.trace() / static_cast<double>(m_) + 1.0);
      for (int attempt = 0; attempt < 4; ++attempt) {
        ldlt_.compute(kkt_m_ + jitter * Eigen::MatrixXd::Identity(m_, m_));
        if (ldlt_.info() == Eigen::Success) {
          break;
        }
        jitter *= 100.0;
      }
    }
    z2_ = msolve(ahq_ + g_);
    denom_ = (g_ - ahq_).dot(z2_) + qhq_ + kappa_ / tau_;
  }

  Eigen::VectorXd msolve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = use_llt_ ? Eigen::VectorXd(llt_.solve(b)) : Eigen::VectorXd(ldlt_.solve(b));
    const Eigen::VectorXd r = b - kkt_m_ * x;
    x += use_llt_ ? Eigen::VectorXd(llt_.solve(r)) : Eigen::VectorXd(ldlt_.solve(r));
    return x;
  }

  Direction newton(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, double r3,
                   const Eigen::VectorXd& dc, double dt) const {
    Direction dir;
    const Eigen::VectorXd t = apply_w(jordan_div(dc)) + apply_h(r2);
    const Eigen::VectorXd z1 = msolve(r1 - A_ * t);
    dir.dtau =
        (r3 + q_.dot(t) + dt / tau_ - (g_ - ahq_).dot(z1)) / denom_;
    dir.dy = z1 + z2_ * dir.dtau;
    dir.du = t + hat_ * dir.dy - hq_ * dir.dtau;
    dir.dv = -A_.transpose() * dir.dy + q_ * dir.dtau - r2;
    dir.dkappa = (dt - kappa_ * dir.dtau) / tau_;
    if (opts_.verbose) {
      const double e1 = (A_ * dir.du - g_ * dir.dtau - r1).norm();
      const double e2 = (-A_.transpose() * dir.dy + q_ * dir.dtau - dir.dv - r2).norm();
      const double e3 = std::abs(g_.dot(dir.dy) - q_.dot(dir.du) - dir.dkappa - r3);
      const Eigen::VectorXd sum = apply_winv(dir.du) + apply_w(dir.dv);
      Eigen::VectorXd prod(N_);
      const Eigen::MatrixXcd sp = smat(sum.head(nsv_), d_);
      prod.head(nsv_) = svec(0.5 * (lam_mat_ * sp + sp * lam_mat_));
      prod.tail(n_orth_) = lam_orth_.cwiseProduct(sum.tail(n_orth_));
      const double e4 = (prod - dc).norm();
      std::fprintf(stderr, "  newton eq residuals %.3e %.3e %.3e %.3e\n", e1, e2, e3, e4);
    }
    return dir;
  }

  // --- termination ----------------------------------------------------------

  void recover() {
    u0_ = col_scale_.cwiseProduct(u_);
    v0_ = v_.cwiseQuotient(col_scale_);
    y0_ = row_scale_.cwiseProduct(y_);
    pr_ = (A0_ * u0_ / tau_ - g0_).norm() / (1.0 + g0_.norm());
    dr_ = (q0_ - A0_.transpose() * y0_ / tau_ - v0_ / tau_).norm() / (1.0 + q0_.norm());
    pobj_ = q0_.dot(u0_) / tau_;
    dobj_ = g0_.dot(y0_) / tau_;
    gap_ = std::abs(pobj_ - dobj_) / (1.0 + std::max(std::abs(pobj_), std::abs(dobj_)));
    mu_rec_ = u0_.dot(v0_) / (nu_ * tau_ * tau_);
  }

  double cone_violation(const Eigen::VectorXd& z) const {
    const double psd = eig_min(smat(z.head(nsv_), d_));
    const double orth = n_orth_ > 0 ? z.tail(n_orth_).minCoeff() : 0.0;
    return std::max({0.0, -psd, -orth});
  }

  std::optional<SdpCertificate> infeasibility_certificate() const {
    if (tau_ > 1e-6 * std::max(1.0, kappa_)) {
      return std::nullopt;
    }
    const double norm = y0_.norm();
    if (norm <= 0.0) {
      return std::nullopt;
    }
    const Eigen::VectorXd yhat = y0_ / norm;
    const double merit = g0_.dot(yhat);
    if (!std::isfinite(merit) || merit < opts_.eps_infeasible) {
      return std::nullopt;
    }
    const double viol = cone_violation(-A0_.transpose() * yhat);
    if (!std::isfinite(viol) || viol > opts_.eps_infeasible) {
      return std::nullopt;
    }
    return SdpCertificate{yhat, merit, viol};
  }

  std::optional<SdpCertificate> unboundedness_certificate() const {
    if (tau_ > 1e-6 * std::max(1.0, kappa_)) {
      return std::nullopt;
    }
    const double norm = u0_.norm();
    if (norm <= 0.0) {
      return std::nullopt;
    }
    const Eigen::VectorXd uhat = u0_ / norm;
    const double merit = q0_.dot(uhat);
    if (!std::isfinite(merit) || merit > -opts_.eps_infeasible) {
      return std::nullopt;
    }
    const double drift = (A0_ * uhat).norm();
    if (!std::isfinite(drift) || drift > opts_.eps_infeasible) {
      return std::nullopt;
    }
    return SdpCertificate{uhat, merit, cone_violation(uhat)};
  }

  void snapshot(int iter) {
    best_.x_svec = u0_.head(nsv_) / tau_;
    best_.s = u0_.segment(nsv_, n_slack_) / tau_;
    best_.y = y0_ / tau_;
    best_.objective = pobj_;
    best_.pr = pr_;
    best_.dr = dr_;
    best_.gap = gap_;
    best_.mu = mu_rec_;
    have_best_ = true;
    (void)iter;
  }

  SdpSolution finish(SdpStatus status, int iter) {
    if (!have_best_) {
      snapshot(iter);
    }
    return SdpSolution{HermitianMatrix(smat(best_.x_svec, d_)),
                       best_.s,
                       best_.y,
                       best_.objective,
                       status,
                       best_.pr,
                       best_.dr,
                       best_.gap,
                       best_.mu,
                       iter,
                       std::nullopt};
  }

  /// Terminal fallback: the best snapshot counts as solved if it meets the
  /// tolerances within a factor of 10, otherwise the run is a MAX_ITER.
  SdpSolution finish_relaxed(int iter) {
    if (have_best_ && best_.pr <= 10.0 * opts_.eps_primal &&
        best_.dr <= 10.0 * opts_.eps_dual && best_.gap <= 10.0 * opts_.eps_gap) {
      return finish(SdpStatus::OPTIMAL, iter);
    }
    return finish(SdpStatus::MAX_ITER, iter);
  }

  SdpSolution finish_certificate(SdpStatus status, int iter, SdpCertificate cert) {
    SdpSolution sol = finish(status, iter);
    sol.status = status;
    sol.certificate = std::move(cert);
    return sol;
  }

  void trace_iteration(int iter, bool conv) const {
    std::ostringstream line;
    line << "sdp iter " << iter << " mu " << mu_ << " pr " << pr_ << " dr " << dr_
         << " gap " << gap_ << " tau " << tau_ << " kappa " << kappa_
         << (conv ? " [conv]" : "");
    std::fprintf(stderr, "%s\n", line.str().c_str());
  }

  SdpSolverOptions opts_;
  Eigen::Index d_, n_slack_, n_le_ = 0, n_orth_ = 0, nsv_ = 0, N_ = 0, m_ = 0;
  double nu_ = 0.0;
  Eigen::MatrixXd A0_, A_;
  Eigen::VectorXd g0_, g_, q0_, q_, row_scale_, col_scale_, e_;

  Eigen::VectorXd u_, v_, y_;
  double tau_ = 1.0, kappa_ = 1.0, mu_ = 1.0;

  Eigen::MatrixXcd wnt_, ws_, wis_, lam_mat_, lam_isqrt_;
  EigPair lam_eig_;
  Eigen::VectorXd w_orth_, lam_orth_;

  Eigen::VectorXd rp_, rd_;
  double rg_ = 0.0;
  Eigen::MatrixXd hat_, kkt_m_;
  Eigen::VectorXd hq_, ahq_, z2_;
  double qhq_ = 0.0, denom_ = 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  bool use_llt_ = true;

  Eigen::VectorXd u0_, v0_, y0_;
  double pr_ = 0.0, dr_ = 0.0, gap_ = 0.0, pobj_ = 0.0, dobj_ = 0.0, mu_rec_ = 0.0;

  Snapshot best_;
  bool have_best_ = false;
};

}  // namespace detail

inline SdpSolution solve(const SdpProblem& problem, const SdpSolverOptions& opts = {}) {
  detail::HsdeSolver solver(problem, opts);
  return solver.run();
}

/// Independent optimality check: recomputes feasibility, dual feasibility,
/// complementary slackness, and the objective gap from the problem data and
/// the returned (X, s, y) only.
struct KktReport {
  double max_primal_violation = 0.0;
  Eigen::Index worst_constraint = -1;
  double x_min_eigenvalue = 0.0;
  double slack_min = 0.0;
  double dual_cone_violation = 0.0;
  double complementarity = 0.0;
  double objective_gap = 0.0;
  bool primal_feasible = false;
  bool dual_feasible = false;
  bool complementary = false;
  bool gap_ok = false;

  bool all_ok() const { return primal_feasible && dual_feasible && complementary && gap_ok; }
};

inline KktReport check_kkt(const SdpProblem& problem, const SdpSolution& sol,
                           double tol = 1e-7) {
  KktReport report;
  const Eigen::Index m = static_cast<Eigen::Index>(problem.constraints().size());
  Eigen::MatrixXcd dual_slack = problem.c_matrix().mat();
  Eigen::VectorXd z = problem.c_slack();
  double comp = 0.0;
  double le_dual_min = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    const SdpConstraint& con = problem.constraints()[static_cast<std::size_t>(k)];
    const double lhs = hs_inner(con.a.mat(), sol.x.mat()) + con.b.dot(sol.s);
    const double viol = con.sense == ConstraintSense::EQ ? std::abs(lhs - con.rhs)
                                                         : std::max(0.0, lhs - con.rhs);
    if (viol > report.max_primal_violation) {
      report.max_primal_violation = viol;
      report.worst_constraint = k;
    }
    dual_slack -= sol.y[k] * con.a.mat();
    z -= sol.y[k] * con.b;
    if (con.sense == ConstraintSense::LE) {
      le_dual_min = std::min(le_dual_min, -sol.y[k]);
      comp += std::abs(sol.y[k] * (con.rhs - lhs));
    }
  }
  report.x_min_eigenvalue = detail::eig_min(sol.x.mat());
  report.slack_min = sol.s.size() > 0 ? sol.s.minCoeff() : 0.0;
  const double dual_psd_min = detail::eig_min(dual_slack);
  const double dual_orth_min = z.size() > 0 ? z.minCoeff() : 0.0;
  report.dual_cone_violation =
      std::max({0.0, -dual_psd_min, -dual_orth_min, -le_dual_min});
  comp += std::abs(hs_inner(HermitianMatrix(dual_slack), sol.x));
  comp += sol.s.size() > 0 ? sol.s.cwiseProduct(z).cwiseAbs().sum() : 0.0;
  report.complementarity = comp;
  const double pobj = hs_inner(problem.c_matrix(), sol.x) + problem.c_slack().dot(sol.s);
  Eigen::VectorXd g(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    g[k] = problem.constraints()[static_cast<std::size_t>(k)].rhs;
  }
  const double dobj = g.dot(sol.y);
  report.objective_gap =
      std::abs(pobj - dobj) / (1.0 + std::max(std::abs(pobj), std::abs(dobj)));

  report.primal_feasible = report.max_primal_violation <= tol &&
                           report.x_min_eigenvalue >= -1e-9 && report.slack_min >= -1e-12;
  report.dual_feasible = report.dual_cone_violation <= tol;
  report.complementary = report.complementarity <= tol * (1.0 + std::abs(pobj));
  report.gap_ok = report.objective_gap <= tol;
  return report;
}

}  // namespace tomoscope
