#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace tomoscope {

/// Numeric tolerances used by construction checks and library invariants.
/// The acceptance tests pin these values; change them only together with the
/// tests that reference them.
struct Tolerances {
  double hermiticity = 1e-12;        // construction check, relative to 1 + ||A||_F
  double eig_reconstruction = 1e-10;  // ||V diag(w) V' - A||_F / (1 + ||A||_F)
  double orthonormality = 1e-10;      // ||V'V - I||_F
  double identity_map = 1e-12;        // spectral_map with identity fn
  double psd_idempotence = 1e-12;     // project_psd applied twice
  double density_trace = 1e-10;       // |tr(rho) - 1|
  double density_min_eig = 1e-10;     // allowed dip of min eigenvalue below 0
  double povm_min_eig = 1e-10;        // same, per effect
  double povm_completeness = 1e-9;    // ||sum of effects - I||_F
  double record_mass_slack = 1e-6;    // sum of frequencies may exceed 1 by this
  double rank_cutoff = 1e-12;         // eigenvalues above this count toward rank
};

inline constexpr Tolerances kTol{};

/// Dense complex Hermitian matrix.  Construction symmetrizes the input and
/// rejects anything that deviates from Hermitian beyond kTol.hermiticity
/// (relative to 1 + ||A||_F).
class HermitianMatrix {
 public:
  explicit HermitianMatrix(Eigen::MatrixXcd entries) : entries_(std::move(entries)) {
    if (entries_.rows() < 1 || entries_.rows() != entries_.cols()) {
      std::ostringstream msg;
      msg << "HermitianMatrix: expected square matrix with dim >= 1, got "
          << entries_.rows() << "x" << entries_.cols();
      throw std::invalid_argument(msg.str());
    }
    if (!entries_.allFinite()) {
      throw std::invalid_argument("HermitianMatrix: entries must be finite");
    }
    const double asym = (entries_ - entries_.adjoint()).norm();
    if (asym > kTol.hermiticity * (1.0 + entries_.norm())) {
      std::ostringstream msg;
      msg << "HermitianMatrix: input deviates from Hermitian by " << asym;
      throw std::invalid_argument(msg.str());
    }
    Eigen::MatrixXcd sym = 0.5 * (entries_ + entries_.adjoint());
    entries_ = std::move(sym);
  }

  Eigen::Index dim() const { return entries_.rows(); }
  const Eigen::MatrixXcd& mat() const { return entries_; }

  static HermitianMatrix identity(Eigen::Index d) {
    return HermitianMatrix(Eigen::MatrixXcd::Identity(d, d));
  }
  static HermitianMatrix zero(Eigen::Index d) {
    return HermitianMatrix(Eigen::MatrixXcd::Zero(d, d));
  }
  static HermitianMatrix diagonal(const Eigen::VectorXd& w) {
    Eigen::MatrixXcd m = w.cast<std::complex<double>>().asDiagonal();
    return HermitianMatrix(std::move(m));
  }

 private:
  Eigen::MatrixXcd entries_;
};

/// Eigendecomposition of a Hermitian matrix: eigenvalues ascending, column k
/// of eigenvectors pairs with eigenvalues[k].
struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXcd eigenvectors;
};

inline SpectralDecomposition eig_hermitian(const HermitianMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(a.mat());
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "eig_hermitian: QL iteration failed to converge within "
        << 30 * a.dim() << " sweeps at dim " << a.dim();
    throw std::runtime_error(msg.str());
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Applies a real scalar function to the spectrum: V diag(fn(w)) V'.
/// Throws std::domain_error naming the offending eigenvalue when fn returns
/// a non-finite value (e.g. log of a nonpositive eigenvalue).
template <class Fn>
HermitianMatrix spectral_map(const HermitianMatrix& a, Fn&& fn) {
  const SpectralDecomposition eig = eig_hermitian(a);
  Eigen::VectorXd mapped(eig.eigenvalues.size());
  for (Eigen::Index k = 0; k < mapped.size(); ++k) {
    mapped[k] = fn(eig.eigenvalues[k]);
    if (!std::isfinite(mapped[k])) {
      std::ostringstream msg;
      msg << "spectral_map: fn is not finite at eigenvalue " << eig.eigenvalues[k];
      throw std::domain_error(msg.str());
    }
  }
  Eigen::MatrixXcd out =
      eig.eigenvectors * mapped.asDiagonal() * eig.eigenvectors.adjoint();
  return HermitianMatrix(std::move(out));
}

/// Frobenius-nearest PSD matrix: eigenvalues clipped at zero.
inline HermitianMatrix project_psd(const HermitianMatrix& a) {
  return spectral_map(a, [](double w) { return w > 0.0 ? w : 0.0; });
}

/// Re tr(ab) for a Hermitian pair, accumulated in an elementwise form that is
/// symmetric in its arguments bit-for-bit.
inline double hs_inner(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("hs_inner: dimension mismatch");
  }
  double acc = 0.0;
  for (Eigen::Index j = 0; j < a.rows(); ++j) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      const std::complex<double> x = a(j, k);
      const std::complex<double> y = b(j, k);
      acc += x.real() * y.real() + x.imag() * y.imag();
    }
  }
  return acc;
}

inline double hs_inner(const HermitianMatrix& a, const HermitianMatrix& b) {
  return hs_inner(a.mat(), b.mat());
}

}  // namespace tomoscope
