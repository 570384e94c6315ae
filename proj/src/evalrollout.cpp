#include "tintegrate/evalrollout.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>

#include "tintegrate/errors.hpp"
#include "tintegrate/rng.hpp"

namespace ti {

double relative_l2(const Tensor& pred, const Tensor& truth, bool* degenerate) {
  if (!pred.same_shape(truth))
    throw std::invalid_argument("relative_l2 shape mismatch: " + pred.shape_str() + " vs " +
                                truth.shape_str());
  double num = 0.0, den = 0.0;
  for (long i = 0; i < pred.numel(); ++i) {
    const double d = pred.at(i) - truth.at(i);
    num += d * d;
    den += truth.at(i) * truth.at(i);
  }
  if (den == 0.0) {
    if (degenerate) *degenerate = true;
    return std::sqrt(num);
  }
  if (degenerate) *degenerate = false;
  return std::sqrt(num) / std::sqrt(den);
}

namespace {

/// Frozen model plus the precomputed spatial trunk table shared by every
/// rollout step (the trunk does not depend on the state).
struct ModelContext {
  DeepONetModel model;
  MlpParams alpha;
  bool has_alpha = false;
  Tensor coords;         // [space x d]
  Tensor trunk_spatial;  // [space x p]

  Tensor rhs_eval(const Tensor& u) const {
    return matmul_nt_value(mlp_forward(model.branch, u), trunk_spatial);
  }
};

ModelContext make_context(const Checkpoint& ck, const TrajectoryDataset& ds) {
  if (ck.sensors_m != ds.space())
    throw ConfigError("checkpoint sensors (" + std::to_string(ck.sensors_m) +
                      ") do not match the dataset grid (" + std::to_string(ds.space()) + ")");
  ModelContext ctx;
  ctx.model = ck.make_model(true);
  ctx.has_alpha = ck.has_alpha;
  if (ck.has_alpha) ctx.alpha = ck.make_alpha(true);
  ctx.coords = ds.space_coords();
  ctx.trunk_spatial =
      mlp_forward(ctx.model.trunk, fourier_encode(ctx.coords, ctx.model.trunk_features));
  return ctx;
}

Tensor squeeze_batch(const Tensor& frames3) {
  // [(F) x 1 x m] -> [F x m]
  return Tensor({frames3.dim(0), frames3.dim(2)}, frames3.vec());
}

RolloutResult rollout_sample(const ModelContext& ctx, const Checkpoint& ck,
                             const TrajectoryDataset& ds, long sample, const EvalMode& mode,
                             double dt_eval, double t_final) {
  const long n_eval = static_cast<long>(std::llround(t_final / dt_eval));
  if (n_eval < 1 || std::abs(n_eval * dt_eval - t_final) > 1e-9 * t_final)
    throw ConfigError("dt_eval must divide t_final");
  const long sp = ds.space();
  Tensor ic = ds.state(sample, 0);

  RolloutResult res;
  res.dt_eval = dt_eval;

  if (mode.kind == EvalMode::Kind::kFrDirect) {
    const long d = ctx.coords.dim(1);
    Tensor queries({(n_eval + 1) * sp, d + 1});
    for (long f = 0; f <= n_eval; ++f)
      for (long c = 0; c < sp; ++c) {
        const long row = f * sp + c;
        for (long j = 0; j < d; ++j) queries.at(row, j) = ctx.coords.at(c, j);
        queries.at(row, d) = static_cast<double>(f) * dt_eval;
      }
    Tensor out = deeponet_forward(ctx.model, ic, queries);  // [1 x frames*space]
    res.traj = Tensor({n_eval + 1, sp}, out.vec());
    // frame 0 is the model's own reconstruction of the IC; keep it (FR is a
    // pure function of (IC, x, t), degradation is measured, not prevented)
    return res;
  }

  if (mode.kind == EvalMode::Kind::kArDirect) {
    if (std::abs(dt_eval - ck.dt_train) > 1e-12)
      throw ConfigError("AR_DIRECT is tied to its training step dt=" + std::to_string(ck.dt_train));
    res.traj = Tensor({n_eval + 1, sp});
    std::memcpy(res.traj.data(), ic.data(), sizeof(double) * static_cast<std::size_t>(sp));
    Tensor u = ic;
    for (long f = 0; f < n_eval; ++f) {
      u = ctx.rhs_eval(u);  // the AR model *is* the next-state map
      if (!u.all_finite() || u.max_abs() > 1e6) {
        res.blowup_frame = f;
        Tensor trunc({f + 1, sp});
        std::memcpy(trunc.data(), res.traj.data(), sizeof(double) * static_cast<std::size_t>((f + 1) * sp));
        res.traj = std::move(trunc);
        return res;
      }
      std::memcpy(res.traj.data() + (f + 1) * sp, u.data(), sizeof(double) * static_cast<std::size_t>(sp));
    }
    return res;
  }

  // TI rollout through a numerical integrator
  RhsFn rhs = [&](double, const Tensor& u) { return ctx.rhs_eval(u); };
  IntegratorKind kind;
  if (ctx.has_alpha) {
    const MlpParams* alpha = &ctx.alpha;
    kind = IntegratorKind::rk4_weighted([alpha](const Tensor& u) { return mlp_forward(*alpha, u); });
  } else {
    kind.variant = mode.integrator;
  }
  RolloutTraj rt = rollout(rhs, ic, 0.0, dt_eval, n_eval, kind);
  res.traj = squeeze_batch(rt.states);
  if (rt.blew_up) res.blowup_frame = rt.last_valid_step;
  return res;
}

EvalMode mode_for(Regime regime, IntegratorKind::Variant ti_integrator) {
  switch (regime) {
    case Regime::kFR: return EvalMode::fr_direct();
    case Regime::kAR: return EvalMode::ar_direct();
    case Regime::kTiRk4: return EvalMode::ti(ti_integrator);
    case Regime::kTiLearnable: return EvalMode::ti();  // weighted via the alpha net
  }
  return EvalMode::ti();
}

Tensor gather_cells(const Tensor& row_frame, const std::vector<long>& cells) {
  Tensor out({static_cast<long>(cells.size())});
  for (std::size_t i = 0; i < cells.size(); ++i) out.at(static_cast<long>(i)) = row_frame.at(cells[i]);
  return out;
}

MetricSeries eval_one_method(const std::string& name, const Checkpoint& ck,
                             const TrajectoryDataset& ds, const EvalOptions& opts) {
  ModelContext ctx = make_context(ck, ds);
  const EvalMode mode = mode_for(ck.regime, opts.ti_integrator);
  const double dt_save = ds.config.dt_save;
  const long n_t = ds.n_t();
  const long frames = n_t + 1;
  const std::vector<long> active = ds.active_cells();

  long n_test = ds.n_test();
  if (opts.max_test_samples > 0) n_test = std::min(n_test, opts.max_test_samples);

  MetricSeries series;
  series.method = name;
  series.boundary_index = ds.train_boundary_frame();
  series.t.resize(static_cast<std::size_t>(frames));
  series.rel_l2.assign(static_cast<std::size_t>(frames), 0.0);
  for (long f = 0; f < frames; ++f) series.t[f] = ds.frame_time(f);

  for (long i = 0; i < n_test; ++i) {
    const long sample = ds.n_train() + i;
    RolloutResult r =
        rollout_sample(ctx, ck, ds, sample, mode, dt_save, ds.config.t_final);
    if (r.blowup_frame) series.any_blowup = true;
    double frozen = 0.0;
    for (long f = 0; f < frames; ++f) {
      const long sp = ds.space();
      double err;
      if (f < r.traj.dim(0)) {
        bool degen = false;
        Tensor pred({sp}, std::vector<double>(r.traj.data() + f * sp, r.traj.data() + (f + 1) * sp));
        Tensor truth = ds.state(sample, f);
        err = relative_l2(gather_cells(pred, active),
                          gather_cells(Tensor({sp}, truth.vec()), active), &degen);
        if (degen) series.any_degenerate = true;
        if (!std::isfinite(err)) err = frozen;  // freeze on the last finite value
        frozen = err;
      } else {
        err = frozen;  // trajectory truncated by blow-up
      }
      series.rel_l2[static_cast<std::size_t>(f)] += err / static_cast<double>(n_test);
    }
  }

  const double dt_e = opts.dt_e > 0.0 ? opts.dt_e : dt_save;
  const long horizons[3] = {10, 20, 40};
  for (int k = 0; k < 3; ++k) {
    long idx = series.boundary_index +
               static_cast<long>(std::llround(horizons[k] * dt_e / dt_save));
    idx = std::min(idx, n_t);
    series.summary[k] = series.rel_l2[static_cast<std::size_t>(idx)];
    series.summary_times[k] = series.t[static_cast<std::size_t>(idx)];
  }
  series.summary[3] = series.rel_l2[static_cast<std::size_t>(n_t)];
  series.summary_times[3] = series.t[static_cast<std::size_t>(n_t)];
  return series;
}

}  // namespace

RolloutResult rollout_model(const Checkpoint& ck, const TrajectoryDataset& ds, long sample,
                            const EvalMode& mode, double dt_eval, double t_final) {
  ModelContext ctx = make_context(ck, ds);
  return rollout_sample(ctx, ck, ds, sample, mode, dt_eval, t_final);
}

std::vector<MetricSeries> evaluate_suite(const std::map<std::string, Checkpoint>& checkpoints,
                                         const TrajectoryDataset& ds, const EvalOptions& opts) {
  std::vector<MetricSeries> out;
  for (const char* name : {"fr", "ar", "ti", "til"}) {
    auto it = checkpoints.find(name);
    if (it == checkpoints.end()) {
      std::cerr << "evaluate_suite: no checkpoint for method '" << name << "', skipping\n";
      continue;
    }
    out.push_back(eval_one_method(name, it->second, ds, opts));
  }
  return out;
}

std::vector<MetricSeries> timestep_refinement_study(const Checkpoint& ck,
                                                    const TrajectoryDataset& ds,
                                                    const std::vector<double>& dt_list,
                                                    const EvalOptions& opts) {
  ModelContext ctx = make_context(ck, ds);
  const EvalMode mode = mode_for(ck.regime, opts.ti_integrator);
  const double dt_save = ds.config.dt_save;
  const long n_t = ds.n_t();
  const std::vector<long> active = ds.active_cells();

  long n_test = ds.n_test();
  if (opts.max_test_samples > 0) n_test = std::min(n_test, opts.max_test_samples);

  std::vector<MetricSeries> out;
  for (double dt_eval : dt_list) {
    // truth frames whose time is a multiple of dt_eval are comparable
    std::vector<long> shared_truth, shared_eval;
    for (long f = 0; f <= n_t; ++f) {
      const double tt = static_cast<double>(f) * dt_save;
      const double ratio = tt / dt_eval;
      const long ef = static_cast<long>(std::llround(ratio));
      if (std::abs(ratio - static_cast<double>(ef)) < 1e-9) {
        shared_truth.push_back(f);
        shared_eval.push_back(ef);
      }
    }
    MetricSeries s;
    char label[48];
    std::snprintf(label, sizeof(label), "dt=%g", dt_eval);
    s.method = label;
    s.boundary_index = 0;
    for (std::size_t j = 0; j < shared_truth.size(); ++j) {
      const double tt = static_cast<double>(shared_truth[j]) * dt_save;
      s.t.push_back(tt);
      if (tt <= ds.config.t_train + 1e-12) s.boundary_index = static_cast<long>(j);
    }
    s.rel_l2.assign(shared_truth.size(), 0.0);

    for (long i = 0; i < n_test; ++i) {
      const long sample = ds.n_train() + i;
      RolloutResult r = rollout_sample(ctx, ck, ds, sample, mode, dt_eval, ds.config.t_final);
      if (r.blowup_frame) s.any_blowup = true;
      double frozen = 0.0;
      const long sp = ds.space();
      for (std::size_t j = 0; j < shared_truth.size(); ++j) {
        double err;
        if (shared_eval[j] < r.traj.dim(0)) {
          Tensor pred({sp}, std::vector<double>(r.traj.data() + shared_eval[j] * sp,
                                                r.traj.data() + (shared_eval[j] + 1) * sp));
          bool degen = false;
          err = relative_l2(gather_cells(pred, active),
                            gather_cells(ds.state(sample, shared_truth[j]), active), &degen);
          if (degen) s.any_degenerate = true;
          if (!std::isfinite(err)) err = frozen;
          frozen = err;
        } else {
          err = frozen;
        }
        s.rel_l2[j] += err / static_cast<double>(n_test);
      }
    }
    for (int k = 0; k < 4; ++k) {
      s.summary[k] = s.rel_l2.empty() ? 0.0 : s.rel_l2.back();
      s.summary_times[k] = s.t.empty() ? 0.0 : s.t.back();
    }
    out.push_back(std::move(s));
  }
  return out;
}

AlphaHistogram alpha_histogram(const Checkpoint& ck, const TrajectoryDataset& ds) {
  if (!ck.has_alpha) throw ConfigError("alpha_histogram requires a TI-learnable checkpoint");
  MlpParams alpha = ck.make_alpha(true);

  AlphaHistogram h;
  h.counts.assign(4, std::vector<long>(static_cast<std::size_t>(h.bins), 0));
  std::vector<double> values[4];

  const long boundary = std::min(ds.train_boundary_frame(), ds.n_t());
  const long n_train = ds.n_train();
  std::vector<std::pair<long, long>> picks;
  for (long s = 0; s < n_train; ++s)
    for (long f = 0; f <= boundary; ++f) picks.emplace_back(s, f);

  const long chunk = 512;
  const long sp = ds.space();
  for (std::size_t start = 0; start < picks.size(); start += chunk) {
    const long b = std::min<long>(chunk, static_cast<long>(picks.size() - start));
    Tensor states({b, sp});
    for (long i = 0; i < b; ++i) {
      const auto [smp, frm] = picks[start + static_cast<std::size_t>(i)];
      std::memcpy(states.data() + i * sp, ds.u.data() + (smp * (ds.n_t() + 1) + frm) * sp,
                  sizeof(double) * static_cast<std::size_t>(sp));
    }
    Tensor a = mlp_forward(alpha, states);
    for (long i = 0; i < b; ++i)
      for (int c = 0; c < 4; ++c) {
        const double v = a.at(i, c);
        values[c].push_back(v);
        long bin = static_cast<long>(v * static_cast<double>(h.bins));
        bin = std::clamp<long>(bin, 0, h.bins - 1);
        h.counts[c][static_cast<std::size_t>(bin)] += 1;
      }
  }
  h.states = static_cast<long>(picks.size());
  for (int c = 0; c < 4; ++c) {
    std::sort(values[c].begin(), values[c].end());
    const std::size_t n = values[c].size();
    h.median[c] = n == 0 ? 0.0
                         : (n % 2 ? values[c][n / 2]
                                  : 0.5 * (values[c][n / 2 - 1] + values[c][n / 2]));
  }
  return h;
}

TrialSummary multi_trial(const TrainConfig& config, const TrajectoryDataset& ds,
                         const std::vector<std::uint64_t>& seeds, const EvalOptions& opts) {
  if (seeds.size() < 2) throw ConfigError("multi_trial needs at least 2 trials");
  TrialSummary out;
  out.method = to_string(config.regime);
  std::vector<std::array<double, 4>> rows;
  for (std::uint64_t seed : seeds) {
    try {
      TrainConfig c = config;
      c.seed = seed;
      TrainResult tr = train(c, ds);
      std::map<std::string, Checkpoint> one;
      const char* name = config.regime == Regime::kFR   ? "fr"
                         : config.regime == Regime::kAR ? "ar"
                         : config.regime == Regime::kTiRk4 ? "ti" : "til";
      one[name] = std::move(tr.checkpoint);
      std::vector<MetricSeries> ms = evaluate_suite(one, ds, opts);
      rows.push_back({ms[0].summary[0], ms[0].summary[1], ms[0].summary[2], ms[0].summary[3]});
    } catch (const std::exception& e) {
      std::cerr << "multi_trial: trial with seed " << seed << " failed: " << e.what() << "\n";
      out.failed_seeds.push_back(seed);
    }
  }
  out.n_trials = static_cast<long>(rows.size());
  if (rows.empty()) return out;
  for (int k = 0; k < 4; ++k) {
    double s = 0.0;
    for (const auto& r : rows) s += r[k];
    out.mean[k] = s / static_cast<double>(rows.size());
    double var = 0.0;
    for (const auto& r : rows) var += (r[k] - out.mean[k]) * (r[k] - out.mean[k]);
    out.stddev[k] = rows.size() > 1 ? std::sqrt(var / static_cast<double>(rows.size() - 1)) : 0.0;
  }
  return out;
}

void write_metrics_csv(const std::vector<MetricSeries>& series, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw MissingInputError("cannot write " + path);
  f << "method,t,rel_l2\n";
  char buf[128];
  for (const MetricSeries& s : series)
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%s,%.10g,%.17g\n", s.method.c_str(), s.t[i], s.rel_l2[i]);
      f << buf;
    }
}

void write_summary_csv(const std::vector<MetricSeries>& series, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw MissingInputError("cannot write " + path);
  f << "method,t_plus_10dte,t_plus_20dte,t_plus_40dte,T\n";
  char buf[200];
  for (const MetricSeries& s : series) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g\n", s.method.c_str(), s.summary[0],
                  s.summary[1], s.summary[2], s.summary[3]);
    f << buf;
  }
}

void write_alpha_hist_csv(const AlphaHistogram& h, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw MissingInputError("cannot write " + path);
  f << "coef,bin_left,bin_right,count\n";
  char buf[128];
  const double w = 1.0 / static_cast<double>(h.bins);
  for (int c = 0; c < 4; ++c)
    for (long b = 0; b < h.bins; ++b) {
      std::snprintf(buf, sizeof(buf), "alpha%d,%.10g,%.10g,%ld\n", c + 1, b * w, (b + 1) * w,
                    h.counts[c][static_cast<std::size_t>(b)]);
      f << buf;
    }
}

void write_trials_csv(const std::vector<TrialSummary>& trials, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw MissingInputError("cannot write " + path);
  f << "method,point,mean,std,n\n";
  const char* points[4] = {"t_plus_10dte", "t_plus_20dte", "t_plus_40dte", "T"};
  char buf[200];
  for (const TrialSummary& t : trials)
    for (int k = 0; k < 4; ++k) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g,%ld\n", t.method.c_str(), points[k],
                    t.mean[k], t.stddev[k], t.n_trials);
      f << buf;
    }
}

}  // namespace ti
