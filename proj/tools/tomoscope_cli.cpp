#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tomoscope/tomoscope.hpp"

namespace {

using namespace tomoscope;

struct BatchOpts {
  int qubits = 2;
  std::vector<int> ranks;
  int trials = 100;
  bool trials_set = false;
  std::vector<std::size_t> grid;
  std::vector<std::string> estimators;
  std::string noise;
  double threshold = 1e-4;
  std::uint64_t seed = 0;
  std::string out = "out";
  bool large = false;
  bool timing = false;
  std::string povm = "sic";
};

std::optional<NoiseModel> parse_noise(const std::string& text) {
  if (text.empty()) {
    return std::nullopt;
  }
  const std::size_t colon = text.find(':');
  if (colon == std::string::npos || colon + 1 >= text.size()) {
    throw std::invalid_argument("--noise expects gaussian:SIGMA or uniform:PCT");
  }
  const std::string kind = text.substr(0, colon);
  std::string value = text.substr(colon + 1);
  double scale = 1.0;
  if (!value.empty() && value.back() == '%') {
    value.pop_back();
    scale = 0.01;
  }
  double param = 0.0;
  try {
    std::size_t used = 0;
    param = std::stod(value, &used) * scale;
    if (used != value.size()) {
      throw std::invalid_argument("trailing characters");
    }
  } catch (const std::exception&) {
    throw std::invalid_argument("--noise: cannot parse level '" + value + "'");
  }
  if (kind == "gaussian") {
    return NoiseModel::gaussian(param);
  }
  if (kind == "uniform") {
    return NoiseModel::uniform_pct(param);
  }
  throw std::invalid_argument("--noise kind must be gaussian or uniform");
}

PovmKind parse_povm_kind(const std::string& name) {
  if (name == "sic") {
    return PovmKind::SIC;
  }
  if (name == "eigenbasis") {
    return PovmKind::EIGENBASIS;
  }
  throw std::invalid_argument("--povm must be sic or eigenbasis");
}

void add_batch_options(CLI::App* cmd, BatchOpts& opts, bool with_noise,
                       bool with_povm) {
  cmd->add_option("--qubits", opts.qubits, "System size n, dimension 2^n")
      ->capture_default_str();
  cmd->add_option("--ranks", opts.ranks, "Comma-separated state ranks")
      ->delimiter(',');
  cmd->add_option("--trials", opts.trials, "Random states per rank")
      ->capture_default_str();
  cmd->add_option("--grid", opts.grid, "Comma-separated measurement counts k")
      ->delimiter(',');
  cmd->add_option("--estimators", opts.estimators,
                  "Subset of vqt_l1,vqt_inf,maxent,maxlik_maxent")
      ->delimiter(',');
  if (with_noise) {
    cmd->add_option("--noise", opts.noise,
                    "Noise model, gaussian:SIGMA or uniform:PCT (5% accepted)");
  }
  if (with_povm) {
    cmd->add_option("--povm", opts.povm, "Measurement family: sic or eigenbasis")
        ->capture_default_str();
  }
  cmd->add_option("--threshold", opts.threshold, "Convergence trace-distance threshold")
      ->capture_default_str();
  cmd->add_option("--seed", opts.seed, "Master seed; all randomness derives from it")
      ->capture_default_str();
  cmd->add_option("--out", opts.out, "Output directory")->capture_default_str();
  cmd->add_flag("--large", opts.large, "Allow 4-qubit runs (20 trials, sparse grid)");
  cmd->add_flag("--timing", opts.timing,
                "Record wall times in the CSV (breaks byte-identical reruns)");
}

ExperimentConfig build_config(const CLI::App* cmd, BatchOpts& opts,
                              const std::vector<EstimatorMethod>& default_estimators,
                              const std::vector<int>& default_ranks) {
  opts.trials_set = cmd->count("--trials") > 0;
  ExperimentConfig cfg;
  cfg.qubits = opts.qubits;
  cfg.ranks = opts.ranks.empty() ? default_ranks : opts.ranks;
  cfg.grid = opts.grid;
  cfg.convergence_threshold = opts.threshold;
  cfg.master_seed = opts.seed;
  cfg.output_dir = opts.out;
  cfg.noise = parse_noise(opts.noise);
  cfg.povm_kind = parse_povm_kind(opts.povm);
  cfg.record_timing = opts.timing;

  if (opts.qubits >= 4 && !opts.large) {
    throw std::invalid_argument("4-qubit runs are expensive; pass --large to confirm");
  }
  cfg.trials = opts.trials;
  if (!opts.trials_set && opts.qubits >= 4) {
    cfg.trials = 20;
  }
  if (cfg.grid.empty() && opts.qubits >= 4 && cmd->get_name() != "estimate") {
    cfg.grid = {1, 2, 4, 8, 16, 32, 64, 96, 128, 192, 256};
    if (cmd->get_name() != "convergence") {
      cfg.grid.insert(cfg.grid.begin(), 0);
    }
  }

  if (!opts.estimators.empty()) {
    cfg.estimators.clear();
    for (const std::string& name : opts.estimators) {
      cfg.estimators.push_back(parse_estimator(name));
    }
  } else {
    cfg.estimators = default_estimators;
  }

  for (int rank : cfg.ranks) {
    if (rank < 1 || rank > cfg.dim()) {
      std::cerr << "warning: dropping rank " << rank << " (outside [1, " << cfg.dim()
                << "])\n";
    }
  }
  cfg.validate();
  return cfg;
}

int run_batch(const std::string& name, const ExperimentConfig& cfg,
              RunOutput (*runner)(const ExperimentConfig&)) {
  std::filesystem::create_directories(cfg.output_dir);
  {
    std::ofstream echo(std::filesystem::path(cfg.output_dir) / "config.json",
                       std::ios::binary);
    echo << config_to_json(cfg, name).dump(2) << "\n";
  }
  const RunOutput out = runner(cfg);
  write_run_files(cfg, name, out);
  std::cout << "wrote " << cfg.output_dir << "/" << name << ".csv ("
            << out.rows.size() << " rows, " << out.failures << " failures) and "
            << name << "_summary.csv\n";
  return 0;
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw std::invalid_argument("cannot read " + path);
  }
  try {
    return nlohmann::json::parse(file);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

struct EstimateOpts {
  std::string record_path;
  std::string method = "vqt_inf";
  std::string povm = "sic";
  std::string reference_path;
  std::string out_path;
  int qubits = 0;
};

int run_estimate(const EstimateOpts& opts) {
  const MeasurementRecord record = record_from_json(load_json(opts.record_path));
  std::optional<DensityMatrix> reference;
  if (!opts.reference_path.empty()) {
    reference = density_from_json(load_json(opts.reference_path));
  }

  const Povm povm = [&]() -> Povm {
    if (opts.povm == "sic") {
      int qubits = opts.qubits;
      if (qubits == 0) {
        while ((std::size_t{1} << (2 * (qubits + 1))) <= record.povm_size()) {
          ++qubits;
        }
      }
      if ((std::size_t{1} << (2 * qubits)) != record.povm_size()) {
        throw std::invalid_argument("record povm_size is not 4^qubits");
      }
      return tensor_povm(qubit_sic_povm(), qubits);
    }
    if (opts.povm == "eigenbasis") {
      if (!reference) {
        throw std::invalid_argument("--povm eigenbasis needs --reference");
      }
      Povm out = eigenbasis_projectors(*reference);
      if (out.size() != record.povm_size()) {
        throw std::invalid_argument("record povm_size does not match reference dim");
      }
      return out;
    }
    throw std::invalid_argument("--povm must be sic or eigenbasis");
  }();

  const EstimatorReport report =
      estimate(parse_estimator(opts.method), record, povm);
  nlohmann::json j = report_to_json(report);
  if (reference) {
    j["trace_distance_to_reference"] = trace_distance(report.estimate, *reference);
  }
  const std::string text = j.dump(2) + "\n";
  if (opts.out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream file(opts.out_path, std::ios::binary);
    if (!file) {
      throw std::invalid_argument("cannot write " + opts.out_path);
    }
    file << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tomoscope: density-matrix reconstruction from incomplete measurements"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tomoscope::version()));

  BatchOpts convergence_opts, distance_opts, kl_opts, noisy_opts;
  CLI::App* convergence =
      app.add_subcommand("convergence", "Minimal converging k per rank and trial");
  add_batch_options(convergence, convergence_opts, false, false);
  CLI::App* distance =
      app.add_subcommand("distance", "Mean trace distance and entropy versus k");
  add_batch_options(distance, distance_opts, true, false);
  CLI::App* kl = app.add_subcommand(
      "kl", "Mean KL divergence of the unmeasured probabilities versus k");
  add_batch_options(kl, kl_opts, true, true);
  CLI::App* noisy =
      app.add_subcommand("noisy", "Distance sweep with perturbed probabilities");
  add_batch_options(noisy, noisy_opts, true, false);

  EstimateOpts estimate_opts;
  CLI::App* est = app.add_subcommand(
      "estimate", "Reconstruct one state from a measurement record JSON");
  est->add_option("--record", estimate_opts.record_path, "Measurement record JSON file")
      ->required();
  est->add_option("--method", estimate_opts.method,
                  "vqt_l1, vqt_inf, maxent, maxlik or maxlik_maxent")
      ->capture_default_str();
  est->add_option("--povm", estimate_opts.povm, "Measurement family: sic or eigenbasis")
      ->capture_default_str();
  est->add_option("--reference", estimate_opts.reference_path,
                  "Reference density matrix JSON for trace distance");
  est->add_option("--qubits", estimate_opts.qubits,
                  "Qubit count (default: inferred from povm_size)");
  est->add_option("--out", estimate_opts.out_path, "Write the report here, not stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    using tomoscope::run_convergence;
    using tomoscope::run_distance_entropy;
    using tomoscope::run_kl;
    using tomoscope::run_noisy;
    const std::vector<EstimatorMethod> all{
        EstimatorMethod::VQT_L1, EstimatorMethod::VQT_INF, EstimatorMethod::MAXENT,
        EstimatorMethod::MAXLIK_MAXENT};
    if (convergence->parsed()) {
      return run_batch("convergence",
                       build_config(convergence, convergence_opts, all, {1, 2, 3, 4}),
                       &run_convergence);
    }
    if (distance->parsed()) {
      return run_batch("distance", build_config(distance, distance_opts, all, {1}),
                       &run_distance_entropy);
    }
    if (kl->parsed()) {
      return run_batch("kl", build_config(kl, kl_opts, all, {1, 3}), &run_kl);
    }
    if (noisy->parsed()) {
      return run_batch(
          "noisy",
          build_config(noisy, noisy_opts,
                       {EstimatorMethod::VQT_INF, EstimatorMethod::MAXLIK_MAXENT}, {1}),
          &run_noisy);
    }
    return run_estimate(estimate_opts);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
