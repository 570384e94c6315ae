#pragma once

#include <functional>
#include <vector>

#include "tintegrate/tape.hpp"
#include "tintegrate/tensor.hpp"

namespace ti {

/// Right-hand-side field: (t, u[B x m]) -> du/dt[B x m]. Plain evaluation.
using RhsFn = std::function<Tensor(double, const Tensor&)>;
/// Recorded evaluation of the same contract for differentiable training.
using DiffRhsFn = std::function<NodeId(double, NodeId)>;
/// State-conditioned stage weights: u[B x m] -> alpha[B x 4], rows sum to 1.
using AlphaFn = std::function<Tensor(const Tensor&)>;

struct StageSlopes {
  Tensor k1, k2, k3, k4;
};

struct IntegratorKind {
  enum class Variant { kRk4, kRk4Weighted, kAb2Am3, kMidpoint, kEuler };
  Variant variant = Variant::kRk4;
  AlphaFn alpha;  // required for kRk4Weighted

  static IntegratorKind rk4() { return {Variant::kRk4, nullptr}; }
  static IntegratorKind rk4_weighted(AlphaFn a) { return {Variant::kRk4Weighted, std::move(a)}; }
  static IntegratorKind ab2am3() { return {Variant::kAb2Am3, nullptr}; }
  static IntegratorKind midpoint() { return {Variant::kMidpoint, nullptr}; }
  static IntegratorKind euler() { return {Variant::kEuler, nullptr}; }
};

IntegratorKind::Variant integrator_from_string(const std::string& s);
std::string to_string(IntegratorKind::Variant v);

/// Classical RK4 update. Throws BlowupError on a non-finite stage.
Tensor rk4_step(const RhsFn& rhs, double t, const Tensor& u, double dt,
                StageSlopes* slopes = nullptr);
/// Recorded RK4: same stages, differentiable through every slope.
NodeId rk4_step(Tape& tape, const DiffRhsFn& rhs, double t, NodeId u, double dt);

/// RK4 stages with per-sample combination weights alpha[B x 4]
/// (u_next = u + dt * (a1 k1 + a2 k2 + a3 k3 + a4 k4)).
/// Each alpha row must sum to 1 within 1e-9.
Tensor rk4_weighted_step(const RhsFn& rhs, double t, const Tensor& u, double dt,
                         const Tensor& alpha, StageSlopes* slopes = nullptr);
NodeId rk4_weighted_step(Tape& tape, const DiffRhsFn& rhs, double t, NodeId u, double dt,
                         NodeId alpha);

Tensor midpoint_step(const RhsFn& rhs, double t, const Tensor& u, double dt);
Tensor euler_step(const RhsFn& rhs, double t, const Tensor& u, double dt);

/// Rolling record of the previous accepted step for multistep schemes.
struct StepHistory {
  bool has_prev = false;
  double t_prev = 0.0;
  Tensor u_prev;
  Tensor f_prev;  // rhs(t_prev, u_prev)

  void seed(double t, Tensor u, Tensor f);
};

/// Heun-type AB2 predictor / AM3 corrector (PECE, one correction).
/// Requires history at t_n - dt; rolls the history forward on success.
Tensor ab2am3_step(const RhsFn& rhs, StepHistory& history, double t_n, const Tensor& u_n,
                   double dt);

struct RolloutTraj {
  /// [(steps_completed + 1) x B x m]; frame 0 is u0.
  Tensor states;
  long last_valid_step = 0;
  bool blew_up = false;

  long frames() const { return states.dim(0); }
  Tensor frame(long i) const;
};

/// Inference-mode trajectory: states are detached values between steps.
/// AB2/AM3 bootstraps its first step with one RK4 step. A state with any
/// non-finite entry or max-norm above 1e6 truncates the trajectory and sets
/// the blow-up diagnostic.
RolloutTraj rollout(const RhsFn& rhs, const Tensor& u0, double t0, double dt, long n_steps,
                    const IntegratorKind& kind);

/// Known-solution problem for order verification.
struct TestOde {
  RhsFn rhs;
  std::function<Tensor(double)> exact;
  Tensor u0;
  double t0 = 0.0;
  double t1 = 1.0;
};

struct OrderEstimate {
  double slope = 0.0;
  std::vector<double> dts_used;
  std::vector<double> errors;
  std::vector<double> dts_excluded;  // global error under the 1e-13 floor
};

/// Least-squares slope of log(global error at t1) vs log(dt) over a geometric
/// dt sequence (>= 3 values).
OrderEstimate estimate_convergence_order(const IntegratorKind& kind, const TestOde& ode,
                                         const std::vector<double>& dt_list);

}  // namespace ti
