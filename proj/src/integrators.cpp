#include "tintegrate/integrators.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "tintegrate/errors.hpp"

namespace ti {

namespace {
void check_finite_stage(const Tensor& k, double t, const char* which) {
  if (!k.all_finite())
    throw BlowupError(std::string("non-finite integrator stage ") + which, t, 0);
}

void check_alpha_rows(const Tensor& alpha, long batch) {
  if (alpha.rank() != 2 || alpha.dim(1) != 4 || alpha.dim(0) != batch)
    throw std::invalid_argument("alpha must be [B x 4], got " + alpha.shape_str());
  for (long i = 0; i < alpha.dim(0); ++i) {
    double s = 0.0;
    for (long j = 0; j < 4; ++j) s += alpha.at(i, j);
    if (std::abs(s - 1.0) > 1e-9)
      throw std::invalid_argument("alpha row " + std::to_string(i) +
                                  " does not sum to 1 (got " + std::to_string(s) + ")");
  }
}
}  // namespace

IntegratorKind::Variant integrator_from_string(const std::string& s) {
  using V = IntegratorKind::Variant;
  if (s == "rk4") return V::kRk4;
  if (s == "rk4_weighted") return V::kRk4Weighted;
  if (s == "ab2am3") return V::kAb2Am3;
  if (s == "midpoint") return V::kMidpoint;
  if (s == "euler") return V::kEuler;
  throw std::invalid_argument("unknown integrator: " + s);
}

std::string to_string(IntegratorKind::Variant v) {
  using V = IntegratorKind::Variant;
  switch (v) {
    case V::kRk4: return "rk4";
    case V::kRk4Weighted: return "rk4_weighted";
    case V::kAb2Am3: return "ab2am3";
    case V::kMidpoint: return "midpoint";
    case V::kEuler: return "euler";
  }
  return "?";
}

Tensor rk4_step(const RhsFn& rhs, double t, const Tensor& u, double dt, StageSlopes* slopes) {
  if (dt <= 0.0) throw std::invalid_argument("rk4_step requires dt > 0");
  Tensor k1 = rhs(t, u);
  check_finite_stage(k1, t, "k1");
  Tensor u2 = u;
  axpy(u2, 0.5 * dt, k1);
  Tensor k2 = rhs(t + 0.5 * dt, u2);
  check_finite_stage(k2, t, "k2");
  Tensor u3 = u;
  axpy(u3, 0.5 * dt, k2);
  Tensor k3 = rhs(t + 0.5 * dt, u3);
  check_finite_stage(k3, t, "k3");
  Tensor u4 = u;
  axpy(u4, dt, k3);
  Tensor k4 = rhs(t + dt, u4);
  check_finite_stage(k4, t, "k4");

  Tensor next = u;
  axpy(next, dt / 6.0, k1);
  axpy(next, dt / 3.0, k2);
  axpy(next, dt / 3.0, k3);
  axpy(next, dt / 6.0, k4);
  if (slopes) *slopes = {std::move(k1), std::move(k2), std::move(k3), std::move(k4)};
  return next;
}

NodeId rk4_step(Tape& tape, const DiffRhsFn& rhs, double t, NodeId u, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("rk4_step requires dt > 0");
  NodeId k1 = rhs(t, u);
  NodeId k2 = rhs(t + 0.5 * dt, tape.add(u, tape.scale(k1, 0.5 * dt)));
  NodeId k3 = rhs(t + 0.5 * dt, tape.add(u, tape.scale(k2, 0.5 * dt)));
  NodeId k4 = rhs(t + dt, tape.add(u, tape.scale(k3, dt)));
  NodeId sum = tape.add(tape.add(k1, tape.scale(k2, 2.0)), tape.add(tape.scale(k3, 2.0), k4));
  return tape.add(u, tape.scale(sum, dt / 6.0));
}

Tensor rk4_weighted_step(const RhsFn& rhs, double t, const Tensor& u, double dt,
                         const Tensor& alpha, StageSlopes* slopes) {
  if (dt <= 0.0) throw std::invalid_argument("rk4_weighted_step requires dt > 0");
  check_alpha_rows(alpha, u.dim(0));
  StageSlopes k;
  rk4_step(rhs, t, u, dt, &k);  // stages are identical; discard the fixed combination

  Tensor next = u;
  const long m = u.dim(1);
  for (long i = 0; i < u.dim(0); ++i) {
    const double a1 = alpha.at(i, 0), a2 = alpha.at(i, 1), a3 = alpha.at(i, 2), a4 = alpha.at(i, 3);
    for (long j = 0; j < m; ++j)
      next.at(i, j) += dt * (a1 * k.k1.at(i, j) + a2 * k.k2.at(i, j) + a3 * k.k3.at(i, j) +
                             a4 * k.k4.at(i, j));
  }
  if (slopes) *slopes = std::move(k);
  return next;
}

NodeId rk4_weighted_step(Tape& tape, const DiffRhsFn& rhs, double t, NodeId u, double dt,
                         NodeId alpha) {
  if (dt <= 0.0) throw std::invalid_argument("rk4_weighted_step requires dt > 0");
  check_alpha_rows(tape.value(alpha), tape.value(u).dim(0));
  NodeId k1 = rhs(t, u);
  NodeId k2 = rhs(t + 0.5 * dt, tape.add(u, tape.scale(k1, 0.5 * dt)));
  NodeId k3 = rhs(t + 0.5 * dt, tape.add(u, tape.scale(k2, 0.5 * dt)));
  NodeId k4 = rhs(t + dt, tape.add(u, tape.scale(k3, dt)));

  // Column j of alpha as a [B x 1] factor, extracted by multiplying with a
  // basis vector so the whole composition stays inside the recorded op set.
  NodeId cols[4];
  for (int j = 0; j < 4; ++j) {
    Tensor e = Tensor::zeros({4, 1});
    e.at(j, 0) = 1.0;
    cols[j] = tape.matmul(alpha, tape.constant(std::move(e)));
  }
  NodeId sum = tape.add(tape.add(tape.mul(k1, cols[0]), tape.mul(k2, cols[1])),
                        tape.add(tape.mul(k3, cols[2]), tape.mul(k4, cols[3])));
  return tape.add(u, tape.scale(sum, dt));
}

Tensor midpoint_step(const RhsFn& rhs, double t, const Tensor& u, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("midpoint_step requires dt > 0");
  Tensor k1 = rhs(t, u);
  check_finite_stage(k1, t, "k1");
  Tensor mid = u;
  axpy(mid, 0.5 * dt, k1);
  Tensor k2 = rhs(t + 0.5 * dt, mid);
  check_finite_stage(k2, t, "k2");
  Tensor next = u;
  axpy(next, dt, k2);
  return next;
}

Tensor euler_step(const RhsFn& rhs, double t, const Tensor& u, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("euler_step requires dt > 0");
  Tensor k1 = rhs(t, u);
  check_finite_stage(k1, t, "k1");
  Tensor next = u;
  axpy(next, dt, k1);
  return next;
}

void StepHistory::seed(double t, Tensor u, Tensor f) {
  t_prev = t;
  u_prev = std::move(u);
  f_prev = std::move(f);
  has_prev = true;
}

Tensor ab2am3_step(const RhsFn& rhs, StepHistory& history, double t_n, const Tensor& u_n,
                   double dt) {
  if (dt <= 0.0) throw std::invalid_argument("ab2am3_step requires dt > 0");
  if (!history.has_prev)
    throw std::logic_error("ab2am3_step needs one prior step; bootstrap with rk4_step");
  if (std::abs((t_n - history.t_prev) - dt) > 1e-12 * std::max(1.0, std::abs(t_n)))
    throw std::invalid_argument("ab2am3_step dt does not match history spacing");

  Tensor f_n = rhs(t_n, u_n);
  check_finite_stage(f_n, t_n, "F(t_n)");

  Tensor pred = u_n;  // u + dt (3/2 F_n - 1/2 F_{n-1})
  axpy(pred, 1.5 * dt, f_n);
  axpy(pred, -0.5 * dt, history.f_prev);

  Tensor f_pred = rhs(t_n + dt, pred);
  check_finite_stage(f_pred, t_n, "F(t_n+1, predictor)");

  Tensor next = u_n;  // u + dt (5/12 F(pred) + 8/12 F_n - 1/12 F_{n-1})
  axpy(next, dt * (5.0 / 12.0), f_pred);
  axpy(next, dt * (8.0 / 12.0), f_n);
  axpy(next, dt * (-1.0 / 12.0), history.f_prev);

  history.seed(t_n, u_n, std::move(f_n));
  return next;
}

Tensor RolloutTraj::frame(long i) const {
  const long b = states.dim(1), m = states.dim(2);
  Tensor f({b, m});
  std::memcpy(f.data(), states.data() + i * b * m, sizeof(double) * static_cast<std::size_t>(b * m));
  return f;
}

RolloutTraj rollout(const RhsFn& rhs, const Tensor& u0, double t0, double dt, long n_steps,
                    const IntegratorKind& kind) {
  if (n_steps < 1) throw std::invalid_argument("rollout requires n_steps >= 1");
  if (u0.rank() != 2) throw std::invalid_argument("rollout expects u0 as [B x m]");
  using V = IntegratorKind::Variant;
  if (kind.variant == V::kRk4Weighted && !kind.alpha)
    throw std::invalid_argument("weighted RK4 rollout needs an alpha provider");

  const long b = u0.dim(0), m = u0.dim(1);
  RolloutTraj out;
  out.states = Tensor({n_steps + 1, b, m});
  std::memcpy(out.states.data(), u0.data(), sizeof(double) * static_cast<std::size_t>(b * m));

  Tensor u = u0;
  StepHistory hist;
  for (long s = 0; s < n_steps; ++s) {
    const double t = t0 + static_cast<double>(s) * dt;
    Tensor next;
    try {
      switch (kind.variant) {
        case V::kRk4:
          next = rk4_step(rhs, t, u, dt);
          break;
        case V::kRk4Weighted:
          next = rk4_weighted_step(rhs, t, u, dt, kind.alpha(u));
          break;
        case V::kMidpoint:
          next = midpoint_step(rhs, t, u, dt);
          break;
        case V::kEuler:
          next = euler_step(rhs, t, u, dt);
          break;
        case V::kAb2Am3:
          if (!hist.has_prev) {
            StageSlopes k;
            next = rk4_step(rhs, t, u, dt, &k);
            hist.seed(t, u, std::move(k.k1));  // k1 == rhs(t, u)
          } else {
            next = ab2am3_step(rhs, hist, t, u, dt);
          }
          break;
      }
    } catch (const BlowupError&) {
      out.blew_up = true;
    }
    if (!out.blew_up && (!next.all_finite() || next.max_abs() > 1e6)) out.blew_up = true;
    if (out.blew_up) {
      out.last_valid_step = s;
      Tensor trunc({s + 1, b, m});
      std::memcpy(trunc.data(), out.states.data(),
                  sizeof(double) * static_cast<std::size_t>((s + 1) * b * m));
      out.states = std::move(trunc);
      return out;
    }
    std::memcpy(out.states.data() + (s + 1) * b * m, next.data(),
                sizeof(double) * static_cast<std::size_t>(b * m));
    u = std::move(next);
  }
  out.last_valid_step = n_steps;
  return out;
}

OrderEstimate estimate_convergence_order(const IntegratorKind& kind, const TestOde& ode,
                                         const std::vector<double>& dt_list) {
  if (dt_list.size() < 3)
    throw std::invalid_argument("order estimate needs at least 3 dt values");
  for (std::size_t i = 2; i < dt_list.size(); ++i) {
    const double r1 = dt_list[i - 1] / dt_list[i - 2];
    const double r2 = dt_list[i] / dt_list[i - 1];
    if (std::abs(r1 - r2) > 1e-9 * r1)
      throw std::invalid_argument("dt list must be a geometric sequence");
  }

  OrderEstimate est;
  for (double dt : dt_list) {
    const double span = ode.t1 - ode.t0;
    const long n = static_cast<long>(std::llround(span / dt));
    if (n < 1 || std::abs(static_cast<double>(n) * dt - span) > 1e-9 * span)
      throw std::invalid_argument("dt does not divide the integration span");
    RolloutTraj traj = rollout(ode.rhs, ode.u0, ode.t0, dt, n, kind);
    if (traj.blew_up) throw BlowupError("order-estimate rollout blew up", ode.t0, traj.last_valid_step);
    Tensor uf = traj.frame(n);
    Tensor ex = ode.exact(ode.t1);
    double err2 = 0.0;
    for (long i = 0; i < uf.numel(); ++i) {
      const double d = uf.at(i) - ex.at(i);
      err2 += d * d;
    }
    const double err = std::sqrt(err2);
    if (err < 1e-13) {
      est.dts_excluded.push_back(dt);
    } else {
      est.dts_used.push_back(dt);
      est.errors.push_back(err);
    }
  }
  if (est.dts_used.size() < 2)
    throw std::invalid_argument("too few points above the error floor for a slope");

  // least-squares slope of log(err) vs log(dt)
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(est.dts_used.size());
  for (std::size_t i = 0; i < est.dts_used.size(); ++i) {
    const double x = std::log(est.dts_used[i]);
    const double y = std::log(est.errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  est.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return est;
}

}  // namespace ti
