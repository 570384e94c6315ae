#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "tintegrate/dataset.hpp"
#include "tintegrate/nets.hpp"
#include "tintegrate/tape.hpp"

namespace ti {

enum class Regime { kFR, kAR, kTiRk4, kTiLearnable };
Regime regime_from_string(const std::string& s);
std::string to_string(Regime r);

struct TrainConfig {
  Regime regime = Regime::kTiRk4;
  /// One epoch is one sampled-batch gradient update.
  long epochs = 1000;
  long batch_size = 128;
  double lr0 = 1e-3;
  double decay_factor = 0.95;
  long decay_every = 5000;
  double weight_decay = 0.0;
  std::string optimizer = "adam";  // adam | adamw
  double alpha_lr0 = 1e-3;         // auxiliary stage-weight net (TI learnable)
  long query_batch = 512;          // FR: spacetime queries per update
  long eval_every = 100;           // test-loss monitoring cadence
  long test_pair_cap = 512;
  std::uint64_t seed = 0;

  MLPSpec branch_spec, trunk_spec, alpha_spec;
  FourierFeatureSpec trunk_features;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct OptimizerState {
  enum class Variant { kAdam, kAdamW };
  Variant variant = Variant::kAdam;
  long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double weight_decay = 0.0;
  std::vector<Tensor> m, v;  // aligned with the ParamSet order

  void init(const ParamSet& params);
};

/// Standard Adam with bias correction; AdamW adds decoupled weight decay.
/// Throws DivergenceError naming the parameter on a non-finite gradient.
void adam_step(ParamSet& params, OptimizerState& state, double lr);

/// Staircase schedule lr0 * factor^(step div every).
double lr_exponential(double lr0, double factor, long every, long step);

// ---- loss builders (recorded; return the scalar loss node)

/// Time-integrator one-step loss: the model predicts du/dt, an RK4 update
/// (fixed weights, or alpha_net(u) softmax weights when alpha_net != null)
/// advances u_in by dt, and the result is compared to u_out by MSE.
NodeId one_step_ti_loss(Tape& tape, DeepONetModel& model, MlpParams* alpha_net,
                        const Tensor& u_in, const Tensor& u_out, const Tensor& queries, double dt);

/// Direct state-to-next-state MSE.
NodeId one_step_ar_loss(Tape& tape, DeepONetModel& model, const Tensor& u_in,
                        const Tensor& u_out, const Tensor& queries);

/// Full-rollout loss: branch reads ICs, trunk reads (x.., t) queries,
/// MSE against targets[B x n_q].
NodeId fr_loss(Tape& tape, DeepONetModel& model, const Tensor& ics, const Tensor& queries,
               const Tensor& targets);

struct LossCurvePoint {
  long epoch;
  double train_loss, test_loss, lr;
};

struct AlphaStat {
  long epoch;
  double mean[4];
};

/// Serialized training product: the best-test-loss parameters (the model of
/// record) plus the final state needed to resume bit-exactly.
struct Checkpoint {
  int version = 1;
  Regime regime = Regime::kTiRk4;
  long epoch = 0;
  long best_epoch = 0;
  double best_test_loss = 0.0;
  long sensors_m = 0;
  double dt_train = 0.0;

  MLPSpec branch_spec, trunk_spec, alpha_spec;
  FourierFeatureSpec trunk_features;
  bool has_alpha = false;

  std::vector<Parameter> best_params;   // branch.*, trunk.*, then alpha.*
  std::vector<Parameter> final_params;
  OptimizerState opt_main, opt_alpha;
  std::string rng_state;
  nlohmann::json config_json;

  DeepONetModel make_model(bool best = true) const;
  MlpParams make_alpha(bool best = true) const;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossCurvePoint> curve;
  std::vector<AlphaStat> alpha_stats;  // TI learnable only
  long skipped_steps = 0;
};

/// Runs the configured regime on the dataset's training split. Fully seeded:
/// identical (config, dataset) reruns produce identical results. Passing
/// `resume` continues from that checkpoint's final state.
TrainResult train(const TrainConfig& config, const TrajectoryDataset& ds,
                  const Checkpoint* resume = nullptr);

void write_loss_curve_csv(const std::vector<LossCurvePoint>& curve, const std::string& path);

}  // namespace ti
