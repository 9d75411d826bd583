#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tomoscope/hermitian.hpp"
#include "tomoscope/random.hpp"

namespace tomoscope {

/// Unit-trace PSD Hermitian matrix.  Construction re-checks both invariants
/// (|tr - 1| <= kTol.density_trace, min eigenvalue >= -kTol.density_min_eig).
class DensityMatrix {
 public:
  explicit DensityMatrix(HermitianMatrix m) : matrix_(std::move(m)) {
    const double tr = matrix_.mat().trace().real();
    if (std::abs(tr - 1.0) > kTol.density_trace) {
      std::ostringstream msg;
      msg << "DensityMatrix: trace " << tr << " is not 1";
      throw std::invalid_argument(msg.str());
    }
    const double wmin = eig_hermitian(matrix_).eigenvalues.minCoeff();
    if (wmin < -kTol.density_min_eig) {
      std::ostringstream msg;
      msg << "DensityMatrix: minimum eigenvalue " << wmin << " is negative";
      throw std::invalid_argument(msg.str());
    }
  }

  Eigen::Index dim() const { return matrix_.dim(); }
  const HermitianMatrix& matrix() const { return matrix_; }
  const Eigen::MatrixXcd& mat() const { return matrix_.mat(); }

  static DensityMatrix maximally_mixed(Eigen::Index d) {
    return DensityMatrix(HermitianMatrix(
        Eigen::MatrixXcd::Identity(d, d) / static_cast<double>(d)));
  }

  /// Divides by the trace and validates.  For wrapping optimizer output that
  /// is PSD but not exactly normalized.
  static DensityMatrix normalized(const HermitianMatrix& m) {
    const double tr = m.mat().trace().real();
    if (!(tr > 0.0)) {
      std::ostringstream msg;
      msg << "DensityMatrix::normalized: trace " << tr << " is not positive";
      throw std::invalid_argument(msg.str());
    }
    return DensityMatrix(HermitianMatrix(m.mat() / tr));
  }

 private:
  HermitianMatrix matrix_;
};

/// Ordered set of PSD effects summing to identity.
class Povm {
 public:
  Povm(std::vector<HermitianMatrix> effects, std::vector<std::string> labels)
      : effects_(std::move(effects)), labels_(std::move(labels)) {
    if (effects_.empty()) {
      throw std::invalid_argument("Povm: needs at least one effect");
    }
    if (labels_.size() != effects_.size()) {
      throw std::invalid_argument("Povm: labels and effects differ in count");
    }
    const Eigen::Index d = effects_.front().dim();
    Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(d, d);
    for (std::size_t i = 0; i < effects_.size(); ++i) {
      if (effects_[i].dim() != d) {
        throw std::invalid_argument("Povm: effects differ in dim");
      }
      const double wmin = eig_hermitian(effects_[i]).eigenvalues.minCoeff();
      if (wmin < -kTol.povm_min_eig) {
        std::ostringstream msg;
        msg << "Povm: effect " << i << " has negative eigenvalue " << wmin;
        throw std::invalid_argument(msg.str());
      }
      sum += effects_[i].mat();
    }
    const double defect = (sum - Eigen::MatrixXcd::Identity(d, d)).norm();
    if (defect > kTol.povm_completeness) {
      std::ostringstream msg;
      msg << "Povm: effects sum to identity only within " << defect;
      throw std::invalid_argument(msg.str());
    }
  }

  std::size_t size() const { return effects_.size(); }
  Eigen::Index dim() const { return effects_.front().dim(); }
  const HermitianMatrix& effect(std::size_t i) const { return effects_.at(i); }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<HermitianMatrix>& effects() const { return effects_; }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<HermitianMatrix> effects_;
  std::vector<std::string> labels_;
};

/// Indices of the measured effects plus their observed frequencies.  Indices
/// are stored sorted; frequencies follow that order.  The total frequency may
/// exceed 1 only by mass_slack (noise models can push it past 1).
class MeasurementRecord {
 public:
  MeasurementRecord(std::size_t povm_size, std::vector<std::size_t> indices,
                    Eigen::VectorXd frequencies,
                    double mass_slack = kTol.record_mass_slack)
      : povm_size_(povm_size) {
    if (static_cast<std::size_t>(frequencies.size()) != indices.size()) {
      throw std::invalid_argument(
          "MeasurementRecord: indices and frequencies differ in count");
    }
    std::vector<std::size_t> order(indices.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return indices[a] < indices[b]; });
    indices_.reserve(indices.size());
    frequencies_.resize(frequencies.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      indices_.push_back(indices[order[pos]]);
      frequencies_[static_cast<Eigen::Index>(pos)] = frequencies[static_cast<Eigen::Index>(order[pos])];
    }
    double mass = 0.0;
    for (std::size_t pos = 0; pos < indices_.size(); ++pos) {
      if (indices_[pos] >= povm_size_) {
        throw std::invalid_argument("MeasurementRecord: index out of range");
      }
      if (pos > 0 && indices_[pos] == indices_[pos - 1]) {
        throw std::invalid_argument("MeasurementRecord: duplicate index");
      }
      const double f = frequencies_[static_cast<Eigen::Index>(pos)];
      if (!(f >= 0.0)) {
        throw std::invalid_argument("MeasurementRecord: negative frequency");
      }
      mass += f;
    }
    if (mass > 1.0 + mass_slack) {
      std::ostringstream msg;
      msg << "MeasurementRecord: total frequency " << mass
          << " exceeds 1 beyond slack " << mass_slack;
      throw std::invalid_argument(msg.str());
    }
  }

  std::size_t povm_size() const { return povm_size_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  const std::vector<std::size_t>& indices() const { return indices_; }
  const Eigen::VectorXd& frequencies() const { return frequencies_; }

  /// Indices not in the measured set, ascending.
  std::vector<std::size_t> unmeasured() const {
    std::vector<std::size_t> out;
    out.reserve(povm_size_ - indices_.size());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < povm_size_; ++i) {
      if (pos < indices_.size() && indices_[pos] == i) {
        ++pos;
      } else {
        out.push_back(i);
      }
    }
    return out;
  }

 private:
  std::size_t povm_size_;
  std::vector<std::size_t> indices_;
  Eigen::VectorXd frequencies_;
};

/// Rank-r state from the Ginibre ensemble: rho = GG' / tr(GG') with G a d x r
/// matrix of i.i.d. standard complex Gaussians, drawn row by row.
inline DensityMatrix sample_ginibre_state(Eigen::Index d, Eigen::Index r, Rng& rng) {
  if (r < 1 || r > d) {
    std::ostringstream msg;
    msg << "sample_ginibre_state: rank " << r << " outside [1, " << d << "]";
    throw std::invalid_argument(msg.str());
  }
  Eigen::MatrixXcd g(d, r);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = 0; k < r; ++k) {
      const double re = rng.gaussian();
      const double im = rng.gaussian();
      g(j, k) = std::complex<double>(re, im);
    }
  }
  Eigen::MatrixXcd w = g * g.adjoint();
  w /= w.trace().real();
  return DensityMatrix(HermitianMatrix(std::move(w)));
}

/// Tetrahedral qubit SIC-POVM: effects (I + n_k . sigma)/4 with Bloch vectors
/// (1,1,1), (1,-1,-1), (-1,1,-1), (-1,-1,1), each scaled by 1/sqrt(3).
inline Povm qubit_sic_povm() {
  const double s = 1.0 / std::sqrt(3.0);
  const double bloch[4][3] = {
      {s, s, s}, {s, -s, -s}, {-s, s, -s}, {-s, -s, s}};
  std::vector<HermitianMatrix> effects;
  std::vector<std::string> labels;
  for (int k = 0; k < 4; ++k) {
    const double nx = bloch[k][0], ny = bloch[k][1], nz = bloch[k][2];
    Eigen::MatrixXcd e(2, 2);
    e(0, 0) = 0.25 * (1.0 + nz);
    e(0, 1) = 0.25 * std::complex<double>(nx, -ny);
    e(1, 0) = 0.25 * std::complex<double>(nx, ny);
    e(1, 1) = 0.25 * (1.0 - nz);
    effects.emplace_back(std::move(e));
    labels.push_back("sic" + std::to_string(k));
  }
  return Povm(std::move(effects), std::move(labels));
}

inline Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index j = 0; j < a.rows(); ++j) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      out.block(j * b.rows(), k * b.cols(), b.rows(), b.cols()) = a(j, k) * b;
    }
  }
  return out;
}

/// n-fold tensor product of a base POVM.  Effects are ordered
/// lexicographically with the first factor most significant, so effect(i)
/// for base size M decomposes i in base M, leading digit first.
inline Povm tensor_povm(const Povm& base, int n, Eigen::Index dim_cap = 64) {
  if (n < 1) {
    throw std::invalid_argument("tensor_povm: n must be >= 1");
  }
  Eigen::Index d = 1;
  for (int i = 0; i < n; ++i) {
    d *= base.dim();
    if (d > dim_cap) {
      std::ostringstream msg;
      msg << "tensor_povm: dimension " << d << "+ exceeds cap " << dim_cap;
      throw std::length_error(msg.str());
    }
  }
  if (n == 1) {
    return base;
  }
  std::vector<HermitianMatrix> effects;
  std::vector<std::string> labels;
  std::vector<std::size_t> digits(static_cast<std::size_t>(n), 0);
  const std::size_t m = base.size();
  for (;;) {
    Eigen::MatrixXcd acc = base.effect(digits[0]).mat();
    std::string label = base.label(digits[0]);
    for (int f = 1; f < n; ++f) {
      acc = kron(acc, base.effect(digits[static_cast<std::size_t>(f)]).mat());
      label += "." + base.label(digits[static_cast<std::size_t>(f)]);
    }
    effects.emplace_back(std::move(acc));
    labels.push_back(std::move(label));
    int pos = n - 1;
    while (pos >= 0 && ++digits[static_cast<std::size_t>(pos)] == m) {
      digits[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) {
      break;
    }
  }
  return Povm(std::move(effects), std::move(labels));
}

/// Rank-1 projectors onto the eigenvectors of rho, ordered by descending
/// eigenvalue.  Degenerate eigenvalues keep the (deterministic) order the
/// eigensolver returned.
inline Povm eigenbasis_projectors(const DensityMatrix& rho) {
  const SpectralDecomposition eig = eig_hermitian(rho.matrix());
  const Eigen::Index d = rho.dim();
  std::vector<HermitianMatrix> effects;
  std::vector<std::string> labels;
  for (Eigen::Index i = 0; i < d; ++i) {
    const Eigen::VectorXcd v = eig.eigenvectors.col(d - 1 - i);
    effects.emplace_back(Eigen::MatrixXcd(v * v.adjoint()));
    labels.push_back("P" + std::to_string(i));
  }
  return Povm(std::move(effects), std::move(labels));
}

/// Born-rule outcome probabilities p_i = tr(E_i rho), clipped to [0, 1].
inline Eigen::VectorXd born_probabilities(const DensityMatrix& rho, const Povm& povm) {
  if (rho.dim() != povm.dim()) {
    throw std::invalid_argument("born_probabilities: dimension mismatch");
  }
  Eigen::VectorXd p(static_cast<Eigen::Index>(povm.size()));
  for (std::size_t i = 0; i < povm.size(); ++i) {
    const double raw = hs_inner(povm.effect(i), rho.matrix());
    p[static_cast<Eigen::Index>(i)] = std::clamp(raw, 0.0, 1.0);
  }
  return p;
}

/// Record holding the first k entries of a fixed index order.  The order is
/// typically one per-trial permutation, so records for increasing k nest.
inline MeasurementRecord record_from_prefix(const Eigen::VectorXd& p,
                                            const std::vector<std::size_t>& order,
                                            std::size_t k,
                                            double mass_slack = kTol.record_mass_slack) {
  if (k > order.size()) {
    throw std::invalid_argument("record_from_prefix: k exceeds order length");
  }
  std::vector<std::size_t> indices(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  Eigen::VectorXd f(static_cast<Eigen::Index>(k));
  for (std::size_t pos = 0; pos < k; ++pos) {
    f[static_cast<Eigen::Index>(pos)] = p[static_cast<Eigen::Index>(indices[pos])];
  }
  return MeasurementRecord(static_cast<std::size_t>(p.size()), std::move(indices),
                           std::move(f), mass_slack);
}

/// k POVM indices drawn uniformly without replacement; frequencies are the
/// corresponding entries of p.
inline MeasurementRecord subset_record(const Eigen::VectorXd& p, std::size_t k, Rng& rng) {
  const std::size_t m = static_cast<std::size_t>(p.size());
  if (k < 1 || k > m) {
    std::ostringstream msg;
    msg << "subset_record: k " << k << " outside [1, " << m << "]";
    throw std::invalid_argument(msg.str());
  }
  return record_from_prefix(p, rng.permutation(m), k);
}

}  // namespace tomoscope
