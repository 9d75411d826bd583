// Scans the number of measured SIC effects for a single pure two-qubit state
// and reports the smallest record that reconstructs it to a trace-distance
// threshold, per estimator.
//
// Usage: convergence_scan [seed]

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "tomoscope/tomoscope.hpp"

using namespace tomoscope;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 11;
  const double threshold = 1e-4;

  const int qubits = 2;
  const Povm sic = tensor_povm(qubit_sic_povm(), qubits);

  Rng state_rng(seed);
  const DensityMatrix rho = sample_ginibre_state(1 << qubits, 1, state_rng);
  const Eigen::VectorXd p = born_probabilities(rho, sic);

  const std::vector<EstimatorMethod> methods = {
      EstimatorMethod::VQT_INF, EstimatorMethod::MAXENT,
      EstimatorMethod::MAXLIK_MAXENT};

  std::printf("pure two-qubit state, threshold %.0e (seed %llu)\n\n", threshold,
              static_cast<unsigned long long>(seed));
  std::printf("%4s", "k");
  for (const EstimatorMethod method : methods) std::printf(" %14s", to_string(method));
  std::printf("\n");

  std::vector<std::size_t> minimal(methods.size(), 0);
  for (std::size_t k = 1; k <= sic.size(); ++k) {
    Rng subset_rng(mix_seed(seed, k));
    const MeasurementRecord record = subset_record(p, k, subset_rng);
    std::printf("%4zu", k);
    for (std::size_t m = 0; m < methods.size(); ++m) {
      double td = -1.0;
      try {
        const EstimatorReport report = estimate(methods[m], record, sic);
        td = trace_distance(report.estimate, rho);
      } catch (const EstimationError&) {
      }
      if (td < 0.0) {
        std::printf(" %14s", "failed");
      } else {
        std::printf(" %14.3e", td);
        if (minimal[m] == 0 && td <= threshold) minimal[m] = k;
      }
    }
    std::printf("\n");
  }

  std::printf("\nminimal k:");
  for (std::size_t m = 0; m < methods.size(); ++m) {
    if (minimal[m] == 0) {
      std::printf("  %s none", to_string(methods[m]));
    } else {
      std::printf("  %s %zu", to_string(methods[m]), minimal[m]);
    }
  }
  std::printf("  (full POVM has %zu effects)\n", sic.size());
  return 0;
}
