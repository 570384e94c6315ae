#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tintegrate/dataset.hpp"
#include "tintegrate/integrators.hpp"
#include "tintegrate/training.hpp"

namespace ti {

/// ||pred - truth||_2 / ||truth||_2 over the flattened field. A zero-norm
/// truth degenerates to ||pred||_2 and sets *degenerate when provided.
double relative_l2(const Tensor& pred, const Tensor& truth, bool* degenerate = nullptr);

/// How a trained operator is rolled forward at evaluation time.
struct EvalMode {
  enum class Kind { kTiIntegrator, kArDirect, kFrDirect };
  Kind kind = Kind::kTiIntegrator;
  IntegratorKind::Variant integrator = IntegratorKind::Variant::kAb2Am3;  // TI only

  static EvalMode ti(IntegratorKind::Variant v = IntegratorKind::Variant::kAb2Am3) {
    return {Kind::kTiIntegrator, v};
  }
  static EvalMode ar_direct() { return {Kind::kArDirect, IntegratorKind::Variant::kRk4}; }
  static EvalMode fr_direct() { return {Kind::kFrDirect, IntegratorKind::Variant::kRk4}; }
};

struct RolloutResult {
  /// Predicted trajectory [frames x space] on the eval time grid
  /// (t = 0, dt_eval, ...); frame 0 equals the supplied IC.
  Tensor traj;
  double dt_eval = 0.0;
  /// Index of the last valid frame when a blow-up truncated the rollout.
  std::optional<long> blowup_frame;
};

/// Rolls one dataset sample forward to t_final. TI modes accept any dt_eval;
/// AR_DIRECT requires dt_eval == dt_train (the learned map is tied to its
/// training step); FR queries the spacetime grid directly.
RolloutResult rollout_model(const Checkpoint& ck, const TrajectoryDataset& ds, long sample,
                            const EvalMode& mode, double dt_eval, double t_final);

struct MetricSeries {
  std::string method;
  std::vector<double> t;
  std::vector<double> rel_l2;  // mean over test samples per timestep
  long boundary_index = 0;     // first extrapolation frame boundary (t_train)
  /// Relative L2 at t_train + {10,20,40} dt_e and at T.
  double summary[4] = {0, 0, 0, 0};
  double summary_times[4] = {0, 0, 0, 0};
  bool any_blowup = false;
  bool any_degenerate = false;
};

struct EvalOptions {
  double dt_e = 0.0;  // evaluation timestep for summary columns; 0 = dt_save
  IntegratorKind::Variant ti_integrator = IntegratorKind::Variant::kAb2Am3;
  long max_test_samples = 0;  // 0 = all
};

/// Mean-over-test-samples error series for each provided method checkpoint
/// ("fr", "ar", "ti", "til"). Missing methods are skipped with a notice.
std::vector<MetricSeries> evaluate_suite(const std::map<std::string, Checkpoint>& checkpoints,
                                         const TrajectoryDataset& ds, const EvalOptions& opts);

/// Error curves of one TI checkpoint rolled out at several inference steps;
/// errors are sampled at times shared between the eval and save grids.
std::vector<MetricSeries> timestep_refinement_study(const Checkpoint& ck,
                                                    const TrajectoryDataset& ds,
                                                    const std::vector<double>& dt_list,
                                                    const EvalOptions& opts);

struct AlphaHistogram {
  long bins = 50;
  /// counts[coef][bin] over [0, 1].
  std::vector<std::vector<long>> counts;
  double median[4] = {0, 0, 0, 0};
  long states = 0;
};

/// Stage-weight distribution over every training-window state of the dataset.
AlphaHistogram alpha_histogram(const Checkpoint& ck, const TrajectoryDataset& ds);

struct TrialSummary {
  std::string method;
  long n_trials = 0;
  double mean[4] = {0, 0, 0, 0};
  double stddev[4] = {0, 0, 0, 0};
  std::vector<std::uint64_t> failed_seeds;
};

/// Independent train+evaluate per seed; mean and sample std of the summary
/// points. Failed trials are excluded and flagged.
TrialSummary multi_trial(const TrainConfig& config, const TrajectoryDataset& ds,
                         const std::vector<std::uint64_t>& seeds, const EvalOptions& opts);

// ---- CSV emission (gnuplot-ready; formats fixed by the external interface)

void write_metrics_csv(const std::vector<MetricSeries>& series, const std::string& path);
void write_summary_csv(const std::vector<MetricSeries>& series, const std::string& path);
void write_alpha_hist_csv(const AlphaHistogram& h, const std::string& path);
void write_trials_csv(const std::vector<TrialSummary>& trials, const std::string& path);

}  // namespace ti
