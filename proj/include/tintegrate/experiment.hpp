#pragma once

#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "tintegrate/dataset.hpp"
#include "tintegrate/evalrollout.hpp"
#include "tintegrate/training.hpp"

namespace ti {

/// Desk-scale (or --paper-scale) training defaults for one benchmark/regime,
/// with network widths wired to the dataset's grid.
TrainConfig train_defaults(const std::string& pde, Regime regime, long sensors_m,
                           double domain_length, double t_final, bool paper_scale);

/// One JSON document describing a whole experiment; command-line flags
/// override individual fields by flat dotted key (e.g. "train.lr0").
struct ExperimentConfig {
  std::string pde = "burgers1d";
  std::uint64_t seed = 0;
  bool paper_scale = false;
  int jobs = 1;
  nlohmann::json dataset_overrides;  // applied onto DatasetConfig::defaults
  nlohmann::json train_overrides;    // applied onto train_defaults
  nlohmann::json eval;               // dt_e, integrator, dt_list, trials, max_test_samples

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  void apply_override(const std::string& dotted_key, const nlohmann::json& value);

  DatasetConfig make_dataset_config() const;
  TrainConfig make_train_config(Regime regime, const TrajectoryDataset& ds) const;
};

// CLI command bodies (shared between the tool and the acceptance suite).
// Each returns a process exit code: 0 ok, 2 config, 3 solver blow-up,
// 4 training divergence, 5 missing input, 6 acceptance failure.
int cmd_generate(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_train(const ExperimentConfig& cfg, const std::string& dataset_dir, Regime regime,
              const std::string& out_dir);
int cmd_eval(const ExperimentConfig& cfg, const std::string& dataset_dir,
             const std::map<std::string, std::string>& checkpoint_paths,
             const std::vector<double>& dt_list, long trials, const std::string& trial_regime,
             const std::string& out_dir);
int cmd_report(const std::string& eval_dir);

/// Per-benchmark evaluation timestep for the summary columns.
double default_dt_e(const std::string& pde);

}  // namespace ti
