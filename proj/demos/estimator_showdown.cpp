// Runs all four estimators on one informationally incomplete record and
// prints a side-by-side comparison against the true state.
//
// Usage: estimator_showdown [seed]

#include <cstdint>
#include <cstdio>
#include <string>

#include "tomoscope/tomoscope.hpp"

using namespace tomoscope;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 7;
  Rng rng(seed);

  const int qubits = 2;
  const Povm sic = tensor_povm(qubit_sic_povm(), qubits);
  const DensityMatrix rho = sample_ginibre_state(1 << qubits, 2, rng);
  const Eigen::VectorXd p = born_probabilities(rho, sic);

  const std::size_t k = 6;
  const MeasurementRecord record = subset_record(p, k, rng);

  std::printf("true state: %d qubits, rank 2, entropy %.6f\n", qubits,
              von_neumann_entropy(rho));
  std::printf("record: %zu of %zu SIC effects measured (seed %llu)\n\n", k,
              sic.size(), static_cast<unsigned long long>(seed));
  std::printf("%-14s %14s %10s %12s %6s %9s\n", "method", "trace_dist",
              "entropy", "kl_uniform", "iters", "wall_ms");

  for (const EstimatorMethod method :
       {EstimatorMethod::VQT_L1, EstimatorMethod::VQT_INF,
        EstimatorMethod::MAXENT, EstimatorMethod::MAXLIK_MAXENT}) {
    const EstimatorReport report = estimate(method, record, sic);
    std::printf("%-14s %14.3e %10.6f %12.3e %6d %9.2f\n", to_string(method),
                trace_distance(report.estimate, rho),
                von_neumann_entropy(report.estimate),
                kl_to_uniform(report.unmeasured_probs), report.iterations,
                1e3 * report.wall_time);
  }
  return 0;
}
