#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "tomoscope/estimators.hpp"
#include "tomoscope/io.hpp"
#include "tomoscope/metrics.hpp"
#include "tomoscope/quantum.hpp"
#include "tomoscope/random.hpp"
#include "tomoscope/version.hpp"

namespace tomoscope {

enum class PovmKind { SIC, EIGENBASIS };

inline const char* to_string(PovmKind kind) {
  return kind == PovmKind::SIC ? "sic" : "eigenbasis";
}

struct ExperimentConfig {
  int qubits = 2;
  std::vector<int> ranks{1};
  int trials = 100;
  std::vector<std::size_t> grid{};  // empty: runs fill their natural full grid
  std::vector<EstimatorMethod> estimators{
      EstimatorMethod::VQT_L1, EstimatorMethod::VQT_INF, EstimatorMethod::MAXENT,
      EstimatorMethod::MAXLIK_MAXENT};
  std::optional<NoiseModel> noise{};
  double convergence_threshold = 1e-4;
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";
  PovmKind povm_kind = PovmKind::SIC;
  bool record_timing = false;
  EstimatorConfig estimator_config{};

  Eigen::Index dim() const { return Eigen::Index{1} << qubits; }
  std::size_t povm_size() const {
    return povm_kind == PovmKind::SIC ? std::size_t{1} << (2 * qubits)
                                      : static_cast<std::size_t>(dim());
  }

  /// Ranks above d are dropped rather than rejected; callers may warn.
  std::vector<int> valid_ranks() const {
    std::vector<int> out;
    for (int r : ranks) {
      if (r >= 1 && r <= dim()) {
        out.push_back(r);
      }
    }
    return out;
  }

  void validate() const {
    if (qubits < 1 || qubits > 4) {
      throw std::invalid_argument("ExperimentConfig: qubits must be in [1, 4]");
    }
    if (trials < 1) {
      throw std::invalid_argument("ExperimentConfig: trials must be >= 1");
    }
    if (!(convergence_threshold > 0.0)) {
      throw std::invalid_argument("ExperimentConfig: threshold must be > 0");
    }
    if (valid_ranks().empty()) {
      throw std::invalid_argument("ExperimentConfig: no rank in [1, dim]");
    }
    if (estimators.empty()) {
      throw std::invalid_argument("ExperimentConfig: estimator list is empty");
    }
    for (EstimatorMethod m : estimators) {
      if (m == EstimatorMethod::MAXLIK) {
        throw std::invalid_argument(
            "ExperimentConfig: maxlik runs only inside maxlik_maxent");
      }
    }
    for (std::size_t k : grid) {
      if (k > povm_size()) {
        throw std::invalid_argument("ExperimentConfig: grid value exceeds POVM size");
      }
    }
    estimator_config.validate();
  }
};

struct TrialResult {
  int rank = 0;
  int trial = 0;
  std::size_t k = 0;
  EstimatorMethod estimator = EstimatorMethod::VQT_L1;
  double trace_distance = 0.0;
  double entropy = 0.0;
  double kl_uniform = 0.0;
  bool converged = false;
  double wall_time = 0.0;  // seconds
  int iterations = 0;
  bool failed = false;
};

struct RunOutput {
  std::vector<TrialResult> rows;
  std::string trial_csv;
  std::string summary_csv;
  int failures = 0;
};

inline constexpr const char* kTrialCsvHeader =
    "rank,trial,k,estimator,trace_distance,entropy,kl_uniform,converged,iterations,"
    "wall_time_ms";

namespace detail {

inline int thread_cap() {
  int cap = static_cast<int>(std::thread::hardware_concurrency());
  if (cap < 1) {
    cap = 1;
  }
  if (const char* env = std::getenv("TOMOSCOPE_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && parsed >= 1) {
      cap = static_cast<int>(parsed);
    }
  }
  return cap;
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t threads =
      std::min<std::size_t>(static_cast<std::size_t>(thread_cap()), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) {
          return;
        }
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) {
            error = std::current_exception();
          }
          return;
        }
      }
    });
  }
  for (std::thread& th : pool) {
    th.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

/// Default tolerance cap for the VQT methods in batch runs.  Noise-free data
/// is fit essentially exactly (an uncapped Delta trade-off underfits records
/// that nearly determine the state); under noise the cap widens with the
/// noise scale so the vanishing-noise limit reproduces the clean run.
inline ExperimentConfig with_delta_cap(ExperimentConfig cfg) {
  if (cfg.estimator_config.delta_max) {
    return cfg;
  }
  double cap = 1e-6;
  if (cfg.noise) {
    if (cfg.noise->kind == NoiseModel::Kind::UNIFORM_PCT) {
      cap += 2.0 * cfg.noise->param;
    } else {
      cap += 20.0 * cfg.noise->param / cfg.estimator_config.noise_floor;
    }
  }
  cfg.estimator_config.delta_max = cap;
  return cfg;
}

/// Frequency-mass headroom a record needs under the configured noise model.
inline double record_slack(const std::optional<NoiseModel>& noise, std::size_t m) {
  if (!noise) {
    return kTol.record_mass_slack;
  }
  if (noise->kind == NoiseModel::Kind::UNIFORM_PCT) {
    return noise->param + kTol.record_mass_slack;
  }
  return std::max(kTol.record_mass_slack,
                  20.0 * noise->param * std::sqrt(static_cast<double>(m)));
}

inline TrialResult evaluate_trial(const ExperimentConfig& cfg, int rank, int trial,
                                  EstimatorMethod method, const MeasurementRecord& record,
                                  const Povm& povm, const DensityMatrix& rho) {
  TrialResult row;
  row.rank = rank;
  row.trial = trial;
  row.k = record.size();
  row.estimator = method;
  try {
    const EstimatorReport report = estimate(method, record, povm, cfg.estimator_config);
    row.trace_distance = trace_distance(report.estimate, rho);
    row.entropy = von_neumann_entropy(report.estimate);
    row.kl_uniform = kl_to_uniform(report.unmeasured_probs);
    row.converged = row.trace_distance < cfg.convergence_threshold;
    row.iterations = report.iterations;
    row.wall_time = report.wall_time;
  } catch (const std::runtime_error&) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.trace_distance = nan;
    row.entropy = nan;
    row.kl_uniform = nan;
    row.failed = true;
  }
  return row;
}

struct TrialData {
  DensityMatrix rho;
  Povm povm;
  Eigen::VectorXd frequencies;
  std::vector<std::size_t> order;
  double slack = 0.0;
};

/// All randomness of a trial flows from mix_seed(master_seed, rank, trial), in
/// a fixed draw order: state, subset permutation, noise.  Noise draws come
/// last so noisy and clean runs share states and subsets.
inline TrialData prepare_trial(const ExperimentConfig& cfg, const Povm& sic, int rank,
                               int trial) {
  Rng rng(mix_seed(cfg.master_seed, static_cast<std::uint64_t>(rank),
                   static_cast<std::uint64_t>(trial)));
  DensityMatrix rho = sample_ginibre_state(cfg.dim(), rank, rng);
  Povm povm = cfg.povm_kind == PovmKind::SIC ? sic : eigenbasis_projectors(rho);
  Eigen::VectorXd p = born_probabilities(rho, povm);
  std::vector<std::size_t> order = rng.permutation(povm.size());
  if (cfg.noise) {
    p = perturb(p, *cfg.noise, rng);
  }
  const double slack = record_slack(cfg.noise, povm.size());
  return TrialData{std::move(rho), std::move(povm), std::move(p), std::move(order), slack};
}

inline bool result_order(const TrialResult& a, const TrialResult& b) {
  return std::tuple(a.rank, a.trial, a.k, static_cast<int>(a.estimator)) <
         std::tuple(b.rank, b.trial, b.k, static_cast<int>(b.estimator));
}

inline std::vector<std::size_t> effective_grid(const ExperimentConfig& cfg,
                                               std::size_t min_k) {
  std::vector<std::size_t> grid = cfg.grid;
  if (grid.empty()) {
    for (std::size_t k = min_k; k <= cfg.povm_size(); ++k) {
      grid.push_back(k);
    }
    return grid;
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  while (!grid.empty() && grid.front() < min_k) {
    grid.erase(grid.begin());
  }
  return grid;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  int n = 0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe out;
  out.n = static_cast<int>(xs.size());
  if (xs.empty()) {
    return out;
  }
  double sum = 0.0;
  for (double x : xs) {
    sum += x;
  }
  out.mean = sum / out.n;
  if (out.n >= 2) {
    double sq = 0.0;
    for (double x : xs) {
      sq += (x - out.mean) * (x - out.mean);
    }
    out.se = std::sqrt(sq / (out.n - 1)) / std::sqrt(static_cast<double>(out.n));
  }
  return out;
}

inline std::string render_trial_csv(const std::vector<TrialResult>& rows, bool timing) {
  std::ostringstream out;
  out << kTrialCsvHeader << "\n";
  for (const TrialResult& row : rows) {
    out << row.rank << ',' << row.trial << ',' << row.k << ','
        << to_string(row.estimator) << ',' << repr17(row.trace_distance) << ','
        << repr17(row.entropy) << ',' << repr17(row.kl_uniform) << ','
        << (row.converged ? 1 : 0) << ',' << row.iterations << ','
        << (timing ? repr17(row.wall_time * 1e3) : std::string("0")) << "\n";
  }
  return out.str();
}

/// Runs every estimator on every grid point of every (rank, trial) cell.
inline RunOutput run_sweep(const ExperimentConfig& cfg_in, std::size_t min_k) {
  const ExperimentConfig cfg = with_delta_cap(cfg_in);
  cfg.validate();
  const Povm sic = tensor_povm(qubit_sic_povm(), cfg.qubits);
  const std::vector<int> ranks = cfg.valid_ranks();
  const std::vector<std::size_t> grid = effective_grid(cfg, min_k);
  const std::size_t cells = ranks.size() * static_cast<std::size_t>(cfg.trials);
  std::vector<std::vector<TrialResult>> per_cell(cells);

  parallel_for(cells, [&](std::size_t cell) {
    const int rank = ranks[cell / static_cast<std::size_t>(cfg.trials)];
    const int trial = static_cast<int>(cell % static_cast<std::size_t>(cfg.trials));
    const TrialData data = prepare_trial(cfg, sic, rank, trial);
    for (std::size_t k : grid) {
      const MeasurementRecord record =
          record_from_prefix(data.frequencies, data.order, k, data.slack);
      for (EstimatorMethod method : cfg.estimators) {
        per_cell[cell].push_back(
            evaluate_trial(cfg, rank, trial, method, record, data.povm, data.rho));
      }
    }
  });

  RunOutput out;
  for (const std::vector<TrialResult>& cell : per_cell) {
    out.rows.insert(out.rows.end(), cell.begin(), cell.end());
  }
  std::sort(out.rows.begin(), out.rows.end(), result_order);
  for (const TrialResult& row : out.rows) {
    out.failures += row.failed ? 1 : 0;
  }
  out.trial_csv = render_trial_csv(out.rows, cfg.record_timing);
  return out;
}

}  // namespace detail

/// Minimal converging measurement count per (rank, trial, estimator): scans
/// the nested subsets in increasing k and keeps the first row under the
/// threshold (or the last scanned row when none converges).
inline RunOutput run_convergence(const ExperimentConfig& cfg_in) {
  const ExperimentConfig cfg = detail::with_delta_cap(cfg_in);
  cfg.validate();
  if (cfg.noise) {
    throw std::invalid_argument("run_convergence: noise-free by contract");
  }
  const Povm sic = tensor_povm(qubit_sic_povm(), cfg.qubits);
  const std::vector<int> ranks = cfg.valid_ranks();
  const std::vector<std::size_t> grid = detail::effective_grid(cfg, 1);
  if (grid.empty()) {
    throw std::invalid_argument("run_convergence: empty measurement grid");
  }
  const std::size_t cells = ranks.size() * static_cast<std::size_t>(cfg.trials);
  std::vector<std::vector<TrialResult>> per_cell(cells);

  detail::parallel_for(cells, [&](std::size_t cell) {
    const int rank = ranks[cell / static_cast<std::size_t>(cfg.trials)];
    const int trial = static_cast<int>(cell % static_cast<std::size_t>(cfg.trials));
    const detail::TrialData data = detail::prepare_trial(cfg, sic, rank, trial);
    for (EstimatorMethod method : cfg.estimators) {
      std::optional<TrialResult> last;
      for (std::size_t k : grid) {
        const MeasurementRecord record =
            record_from_prefix(data.frequencies, data.order, k, data.slack);
        const TrialResult row =
            detail::evaluate_trial(cfg, rank, trial, method, record, data.povm, data.rho);
        if (row.failed) {
          per_cell[cell].push_back(row);
          last.reset();
          continue;
        }
        last = row;
        if (row.converged) {
          break;
        }
      }
      if (last) {
        per_cell[cell].push_back(*last);
      }
    }
  });

  RunOutput out;
  for (const std::vector<TrialResult>& cell : per_cell) {
    out.rows.insert(out.rows.end(), cell.begin(), cell.end());
  }
  std::sort(out.rows.begin(), out.rows.end(), detail::result_order);
  for (const TrialResult& row : out.rows) {
    out.failures += row.failed ? 1 : 0;
  }
  out.trial_csv = detail::render_trial_csv(out.rows, cfg.record_timing);

  std::map<std::pair<int, int>, std::vector<const TrialResult*>> groups;
  for (const TrialResult& row : out.rows) {
    groups[{row.rank, static_cast<int>(row.estimator)}].push_back(&row);
  }
  std::ostringstream summary;
  summary << "rank,estimator,best_k,average_k,worst_k,converged_trials,"
             "unconverged_trials,failures\n";
  for (const auto& [key, rows] : groups) {
    std::size_t best = 0, worst = 0;
    double total = 0.0;
    int converged = 0, unconverged = 0, failures = 0;
    for (const TrialResult* row : rows) {
      if (row->failed) {
        ++failures;
      } else if (!row->converged) {
        ++unconverged;
      } else {
        best = converged == 0 ? row->k : std::min(best, row->k);
        worst = std::max(worst, row->k);
        total += static_cast<double>(row->k);
        ++converged;
      }
    }
    summary << key.first << ',' << to_string(static_cast<EstimatorMethod>(key.second))
            << ',' << best << ',' << repr17(converged > 0 ? total / converged : 0.0)
            << ',' << worst << ',' << converged << ',' << unconverged << ',' << failures
            << "\n";
  }
  out.summary_csv = summary.str();
  return out;
}

namespace detail {

inline std::string sweep_summary(const std::vector<TrialResult>& rows,
                                 bool kl_only) {
  std::map<std::tuple<int, std::size_t, int>, std::vector<const TrialResult*>> groups;
  for (const TrialResult& row : rows) {
    groups[{row.rank, row.k, static_cast<int>(row.estimator)}].push_back(&row);
  }
  std::ostringstream out;
  if (kl_only) {
    out << "rank,k,estimator,trials,failures,mean_kl,se_kl\n";
  } else {
    out << "rank,k,estimator,trials,failures,mean_trace_distance,se_trace_distance,"
           "mean_entropy,se_entropy\n";
  }
  for (const auto& [key, cell] : groups) {
    std::vector<double> td, entropy, kl;
    int failures = 0;
    for (const TrialResult* row : cell) {
      if (row->failed) {
        ++failures;
        continue;
      }
      td.push_back(row->trace_distance);
      entropy.push_back(row->entropy);
      kl.push_back(row->kl_uniform);
    }
    out << std::get<0>(key) << ',' << std::get<1>(key) << ','
        << to_string(static_cast<EstimatorMethod>(std::get<2>(key))) << ','
        << td.size() << ',' << failures;
    if (kl_only) {
      const MeanSe m = mean_se(kl);
      out << ',' << repr17(m.mean) << ',' << repr17(m.se) << "\n";
    } else {
      const MeanSe mt = mean_se(td);
      const MeanSe ms = mean_se(entropy);
      out << ',' << repr17(mt.mean) << ',' << repr17(mt.se) << ',' << repr17(ms.mean)
          << ',' << repr17(ms.se) << "\n";
    }
  }
  return out.str();
}

}  // namespace detail

/// Mean trace distance and entropy versus k.
inline RunOutput run_distance_entropy(const ExperimentConfig& cfg) {
  RunOutput out = detail::run_sweep(cfg, 0);
  out.summary_csv = detail::sweep_summary(out.rows, false);
  return out;
}

/// Mean KL divergence of the unmeasured-probability vector versus k.
inline RunOutput run_kl(const ExperimentConfig& cfg) {
  RunOutput out = detail::run_sweep(cfg, 0);
  out.summary_csv = detail::sweep_summary(out.rows, true);
  return out;
}

/// Distance-versus-k sweep with the configured noise model applied to the
/// Born probabilities before records are formed.
inline RunOutput run_noisy(const ExperimentConfig& cfg) {
  if (!cfg.noise) {
    throw std::invalid_argument("run_noisy: needs a noise model");
  }
  RunOutput out = detail::run_sweep(cfg, 0);
  out.summary_csv = detail::sweep_summary(out.rows, false);
  return out;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg,
                                     const std::string& run_name) {
  nlohmann::json noise = nullptr;
  if (cfg.noise) {
    noise = {{"kind", cfg.noise->kind == NoiseModel::Kind::GAUSSIAN ? "gaussian"
                                                                    : "uniform_pct"},
             {"param", cfg.noise->param}};
  }
  std::vector<std::string> estimators;
  for (EstimatorMethod m : cfg.estimators) {
    estimators.emplace_back(to_string(m));
  }
  return {{"run", run_name},
          {"version", version()},
          {"qubits", cfg.qubits},
          {"ranks", cfg.ranks},
          {"trials", cfg.trials},
          {"grid", cfg.grid},
          {"estimators", estimators},
          {"noise", noise},
          {"convergence_threshold", cfg.convergence_threshold},
          {"master_seed", cfg.master_seed},
          {"output_dir", cfg.output_dir},
          {"povm_kind", to_string(cfg.povm_kind)},
          {"timing", cfg.record_timing}};
}

/// Writes <run>.csv, <run>_summary.csv and config.json under cfg.output_dir.
inline void write_run_files(const ExperimentConfig& cfg, const std::string& run_name,
                            const RunOutput& output) {
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  const auto dump = [&](const std::filesystem::path& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary);
    if (!file) {
      throw std::runtime_error("cannot write " + path.string());
    }
    file << text;
  };
  dump(dir / (run_name + ".csv"), output.trial_csv);
  dump(dir / (run_name + "_summary.csv"), output.summary_csv);
  dump(dir / "config.json", config_to_json(cfg, run_name).dump(2) + "\n");
}

}  // namespace tomoscope
