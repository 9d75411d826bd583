#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "tomoscope/hermitian.hpp"
#include "tomoscope/quantum.hpp"
#include "tomoscope/random.hpp"

namespace tomoscope {

/// The two error models applied to Born probabilities: additive Gaussian
/// noise of standard deviation sigma, or multiplicative uniform noise of
/// relative magnitude eta.
struct NoiseModel {
  enum class Kind { GAUSSIAN, UNIFORM_PCT };

  Kind kind;
  double param;

  static NoiseModel gaussian(double sigma) {
    if (!(sigma > 0.0)) {
      throw std::invalid_argument("NoiseModel::gaussian: sigma must be > 0");
    }
    return {Kind::GAUSSIAN, sigma};
  }

  static NoiseModel uniform_pct(double eta) {
    if (!(eta > 0.0 && eta < 1.0)) {
      throw std::invalid_argument("NoiseModel::uniform_pct: eta must be in (0, 1)");
    }
    return {Kind::UNIFORM_PCT, eta};
  }
};

/// Perturbs each probability independently; results are clamped below at 0
/// and not renormalized.
inline Eigen::VectorXd perturb(const Eigen::VectorXd& p, const NoiseModel& model, Rng& rng) {
  Eigen::VectorXd f(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) {
      std::ostringstream msg;
      msg << "perturb: probability " << p[i] << " outside [0, 1]";
      throw std::invalid_argument(msg.str());
    }
    double x = p[i];
    switch (model.kind) {
      case NoiseModel::Kind::GAUSSIAN:
        x += model.param * rng.gaussian();
        break;
      case NoiseModel::Kind::UNIFORM_PCT:
        x *= 1.0 + model.param * (2.0 * rng.uniform01() - 1.0);
        break;
    }
    f[i] = x < 0.0 ? 0.0 : x;
  }
  return f;
}

/// Half the sum of absolute eigenvalues of a - b.
inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("trace_distance: dimension mismatch");
  }
  const HermitianMatrix diff(a.mat() - b.mat());
  return 0.5 * eig_hermitian(diff).eigenvalues.cwiseAbs().sum();
}

/// -sum w ln w over the spectrum, with 0 ln 0 := 0.  Eigenvalues within the
/// density tolerance below zero contribute nothing.
inline double von_neumann_entropy(const DensityMatrix& rho) {
  const Eigen::VectorXd w = eig_hermitian(rho.matrix()).eigenvalues;
  double s = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    if (w[k] > 0.0) {
      s -= w[k] * std::log(w[k]);
    }
  }
  return s;
}

/// KL divergence of c, normalized to a distribution, from the uniform
/// distribution on its support size.  All-zero input (total mass <= 1e-14)
/// returns 0.
inline double kl_to_uniform(const Eigen::VectorXd& c) {
  if (c.size() == 0) {
    return 0.0;
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (c[i] < -1e-9) {
      std::ostringstream msg;
      msg << "kl_to_uniform: entry " << c[i] << " below -1e-9";
      throw std::invalid_argument(msg.str());
    }
    total += c[i] > 0.0 ? c[i] : 0.0;
  }
  if (total <= 1e-14) {
    return 0.0;
  }
  const double n = static_cast<double>(c.size());
  double kl = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const double q = (c[i] > 0.0 ? c[i] : 0.0) / total;
    if (q > 0.0) {
      kl += q * std::log(q * n);
    }
  }
  return kl < 0.0 ? 0.0 : kl;
}

/// Likelihood model: observed counts (multinomial) or the Gaussian variant
/// whose weights use observed frequencies.
struct LikelihoodModel {
  enum class Kind { MULTINOMIAL, GAUSSIAN_VARIANT };

  Kind kind;
  std::vector<std::uint64_t> counts;  // aligned with record entries, MULTINOMIAL only

  static LikelihoodModel multinomial(std::vector<std::uint64_t> counts) {
    return {Kind::MULTINOMIAL, std::move(counts)};
  }
  static LikelihoodModel gaussian_variant() { return {Kind::GAUSSIAN_VARIANT, {}}; }
};

/// Log-likelihood value; diverged marks the -infinity sentinel (a zero
/// predicted probability paired with a positive count).
struct LogLikelihood {
  double value;
  bool diverged;
};

/// MULTINOMIAL: sum n_j ln tr(E_j rho), dropping the combinatorial prefactor.
/// GAUSSIAN_VARIANT: -(1/2) sum (tr(E_j rho) - f_j)^2 / max(f_j, noise_floor).
inline LogLikelihood log_likelihood(const MeasurementRecord& record, const Povm& povm,
                                    const DensityMatrix& rho, const LikelihoodModel& model,
                                    double noise_floor = 1e-12) {
  if (record.povm_size() != povm.size()) {
    throw std::invalid_argument("log_likelihood: record does not match POVM size");
  }
  if (povm.dim() != rho.dim()) {
    throw std::invalid_argument("log_likelihood: dimension mismatch");
  }
  if (model.kind == LikelihoodModel::Kind::MULTINOMIAL &&
      model.counts.size() != record.size()) {
    throw std::invalid_argument("log_likelihood: counts do not match record size");
  }
  double value = 0.0;
  for (std::size_t pos = 0; pos < record.size(); ++pos) {
    const std::size_t i = record.indices()[pos];
    const double predicted = hs_inner(povm.effect(i), rho.matrix());
    if (model.kind == LikelihoodModel::Kind::MULTINOMIAL) {
      const std::uint64_t n = model.counts[pos];
      if (n == 0) {
        continue;
      }
      if (predicted <= 0.0) {
        return {-std::numeric_limits<double>::infinity(), true};
      }
      value += static_cast<double>(n) * std::log(predicted);
    } else {
      const double f = record.frequencies()[static_cast<Eigen::Index>(pos)];
      const double resid = predicted - f;
      value -= 0.5 * resid * resid / std::max(f, noise_floor);
    }
  }
  return {value, false};
}

}  // namespace tomoscope
