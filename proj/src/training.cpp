#include "tintegrate/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "tintegrate/errors.hpp"
#include "tintegrate/integrators.hpp"
#include "tintegrate/rng.hpp"

namespace ti {

using nlohmann::json;

Regime regime_from_string(const std::string& s) {
  if (s == "fr") return Regime::kFR;
  if (s == "ar") return Regime::kAR;
  if (s == "ti_rk4" || s == "ti") return Regime::kTiRk4;
  if (s == "ti_learnable" || s == "til") return Regime::kTiLearnable;
  throw ConfigError("unknown regime: " + s);
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::kFR: return "fr";
    case Regime::kAR: return "ar";
    case Regime::kTiRk4: return "ti_rk4";
    case Regime::kTiLearnable: return "ti_learnable";
  }
  return "?";
}

namespace {

json spec_to_json(const MLPSpec& s) {
  return {{"widths", s.layer_widths},
          {"activation", to_string(s.activation)},
          {"output_activation", to_string(s.output_activation)}};
}

MLPSpec spec_from_json(const json& j) {
  MLPSpec s;
  s.layer_widths = j.at("widths").get<std::vector<long>>();
  s.activation = activation_from_string(j.at("activation").get<std::string>());
  s.output_activation = output_activation_from_string(j.at("output_activation").get<std::string>());
  return s;
}

json features_to_json(const FourierFeatureSpec& f) {
  return {{"num_frequencies", f.num_frequencies}, {"domain_scale", f.domain_scale}};
}

FourierFeatureSpec features_from_json(const json& j) {
  FourierFeatureSpec f;
  f.num_frequencies = j.at("num_frequencies").get<long>();
  f.domain_scale = j.at("domain_scale").get<std::vector<double>>();
  return f;
}

double mse_value(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (long i = 0; i < a.numel(); ++i) {
    const double d = a.at(i) - b.at(i);
    s += d * d;
  }
  return s / static_cast<double>(a.numel());
}

}  // namespace

json TrainConfig::to_json() const {
  json j;
  j["regime"] = to_string(regime);
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["lr0"] = lr0;
  j["decay_factor"] = decay_factor;
  j["decay_every"] = decay_every;
  j["weight_decay"] = weight_decay;
  j["optimizer"] = optimizer;
  j["alpha_lr0"] = alpha_lr0;
  j["query_batch"] = query_batch;
  j["eval_every"] = eval_every;
  j["test_pair_cap"] = test_pair_cap;
  j["seed"] = seed;
  j["branch_spec"] = spec_to_json(branch_spec);
  j["trunk_spec"] = spec_to_json(trunk_spec);
  j["alpha_spec"] = spec_to_json(alpha_spec);
  j["trunk_features"] = features_to_json(trunk_features);
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.regime = regime_from_string(j.at("regime").get<std::string>());
  c.epochs = j.at("epochs").get<long>();
  c.batch_size = j.at("batch_size").get<long>();
  c.lr0 = j.at("lr0").get<double>();
  c.decay_factor = j.at("decay_factor").get<double>();
  c.decay_every = j.at("decay_every").get<long>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.optimizer = j.at("optimizer").get<std::string>();
  c.alpha_lr0 = j.at("alpha_lr0").get<double>();
  c.query_batch = j.at("query_batch").get<long>();
  c.eval_every = j.at("eval_every").get<long>();
  c.test_pair_cap = j.at("test_pair_cap").get<long>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.branch_spec = spec_from_json(j.at("branch_spec"));
  c.trunk_spec = spec_from_json(j.at("trunk_spec"));
  c.alpha_spec = spec_from_json(j.at("alpha_spec"));
  c.trunk_features = features_from_json(j.at("trunk_features"));
  return c;
}

void OptimizerState::init(const ParamSet& params) {
  step = 0;
  m.clear();
  v.clear();
  for (const Parameter* p : params.items()) {
    m.push_back(Tensor::zeros(p->value.shape()));
    v.push_back(Tensor::zeros(p->value.shape()));
  }
}

void adam_step(ParamSet& params, OptimizerState& state, double lr) {
  if (state.m.size() != params.size())
    throw std::invalid_argument("optimizer state does not match the parameter set");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter* p = params.items()[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (long k = 0; k < p->value.numel(); ++k) {
      const double g = p->grad.at(k);
      if (!std::isfinite(g))
        throw DivergenceError("non-finite gradient for parameter " + p->name);
      m.at(k) = state.beta1 * m.at(k) + (1.0 - state.beta1) * g;
      v.at(k) = state.beta2 * v.at(k) + (1.0 - state.beta2) * g * g;
      const double mhat = m.at(k) / bc1;
      const double vhat = v.at(k) / bc2;
      double upd = lr * mhat / (std::sqrt(vhat) + state.eps);
      if (state.variant == OptimizerState::Variant::kAdamW)
        upd += lr * state.weight_decay * p->value.at(k);
      p->value.at(k) -= upd;
    }
  }
}

double lr_exponential(double lr0, double factor, long every, long step) {
  if (every < 1) throw std::invalid_argument("lr schedule requires every >= 1");
  return lr0 * std::pow(factor, static_cast<double>(step / every));
}

NodeId one_step_ti_loss(Tape& tape, DeepONetModel& model, MlpParams* alpha_net,
                        const Tensor& u_in, const Tensor& u_out, const Tensor& queries,
                        double dt) {
  NodeId trunk_cache = kNoNode;
  DiffRhsFn rhs = [&](double, NodeId u) {
    return deeponet_forward(tape, model, u, queries, &trunk_cache);
  };
  NodeId u = tape.constant(u_in);
  NodeId pred;
  if (alpha_net) {
    NodeId alpha = mlp_forward(tape, *alpha_net, u);
    pred = rk4_weighted_step(tape, rhs, 0.0, u, dt, alpha);
  } else {
    pred = rk4_step(tape, rhs, 0.0, u, dt);
  }
  return tape.mean(tape.square(tape.sub(pred, tape.constant(u_out))));
}

NodeId one_step_ar_loss(Tape& tape, DeepONetModel& model, const Tensor& u_in,
                        const Tensor& u_out, const Tensor& queries) {
  NodeId pred = deeponet_forward(tape, model, tape.constant(u_in), queries);
  return tape.mean(tape.square(tape.sub(pred, tape.constant(u_out))));
}

NodeId fr_loss(Tape& tape, DeepONetModel& model, const Tensor& ics, const Tensor& queries,
               const Tensor& targets) {
  NodeId pred = deeponet_forward(tape, model, tape.constant(ics), queries);
  return tape.mean(tape.square(tape.sub(pred, tape.constant(targets))));
}

namespace {

// (sample, input-frame) pair list for the one-step regimes.
std::vector<std::pair<long, long>> window_pairs(const TrajectoryDataset& ds, long sample_begin,
                                                long sample_end) {
  const long max_in = std::min(ds.train_boundary_frame(), ds.n_t() - 1);
  std::vector<std::pair<long, long>> out;
  out.reserve(static_cast<std::size_t>((sample_end - sample_begin) * (max_in + 1)));
  for (long s = sample_begin; s < sample_end; ++s)
    for (long f = 0; f <= max_in; ++f) out.emplace_back(s, f);
  return out;
}

template <typename T>
std::vector<T> evenly_spaced(const std::vector<T>& in, long cap) {
  if (static_cast<long>(in.size()) <= cap) return in;
  std::vector<T> out;
  out.reserve(static_cast<std::size_t>(cap));
  const double stride = static_cast<double>(in.size()) / static_cast<double>(cap);
  for (long i = 0; i < cap; ++i)
    out.push_back(in[static_cast<std::size_t>(static_cast<double>(i) * stride)]);
  return out;
}

void gather_rows(const TrajectoryDataset& ds, const std::vector<std::pair<long, long>>& picks,
                 long frame_offset, Tensor& out) {
  const long sp = ds.space();
  const long frames = ds.n_t() + 1;
  for (std::size_t i = 0; i < picks.size(); ++i)
    std::memcpy(out.data() + static_cast<long>(i) * sp,
                ds.u.data() + (picks[i].first * frames + picks[i].second + frame_offset) * sp,
                sizeof(double) * static_cast<std::size_t>(sp));
}

struct FrBatch {
  Tensor ics;      // [B x m]
  Tensor queries;  // [q x (d+1)]
  Tensor targets;  // [B x q]
};

FrBatch gather_fr_batch(const TrajectoryDataset& ds, const Tensor& coords,
                        const std::vector<long>& samples,
                        const std::vector<std::pair<long, long>>& query_picks) {
  const long d = coords.dim(1);
  const long q = static_cast<long>(query_picks.size());
  const long frames = ds.n_t() + 1;
  FrBatch b;
  b.ics = ds.states(samples, 0);
  b.queries = Tensor({q, d + 1});
  for (long i = 0; i < q; ++i) {
    const auto [frame, cell] = query_picks[static_cast<std::size_t>(i)];
    for (long j = 0; j < d; ++j) b.queries.at(i, j) = coords.at(cell, j);
    b.queries.at(i, d) = ds.frame_time(frame);
  }
  b.targets = Tensor({static_cast<long>(samples.size()), q});
  for (std::size_t s = 0; s < samples.size(); ++s)
    for (long i = 0; i < q; ++i) {
      const auto [frame, cell] = query_picks[static_cast<std::size_t>(i)];
      b.targets.at(static_cast<long>(s), i) = ds.u.at((samples[s] * frames + frame) * ds.space() + cell);
    }
  return b;
}

// Plain-mode evaluation of the training objective on a fixed pair set.
double plain_pair_loss(const TrainConfig& cfg, DeepONetModel& model, MlpParams* alpha,
                       const Tensor& u_in, const Tensor& u_out, const Tensor& queries, double dt) {
  Tensor trunk_out = mlp_forward(model.trunk, fourier_encode(queries, model.trunk_features));
  RhsFn rhs = [&](double, const Tensor& u) {
    return matmul_nt_value(mlp_forward(model.branch, u), trunk_out);
  };
  Tensor pred;
  switch (cfg.regime) {
    case Regime::kAR:
      pred = rhs(0.0, u_in);
      break;
    case Regime::kTiRk4:
      pred = rk4_step(rhs, 0.0, u_in, dt);
      break;
    case Regime::kTiLearnable:
      pred = rk4_weighted_step(rhs, 0.0, u_in, dt, mlp_forward(*alpha, u_in));
      break;
    case Regime::kFR:
      throw std::logic_error("plain_pair_loss does not handle FR");
  }
  return mse_value(pred, u_out);
}

}  // namespace

DeepONetModel Checkpoint::make_model(bool best) const {
  DeepONetModel m;
  m.branch.spec = branch_spec;
  m.trunk.spec = trunk_spec;
  m.trunk_features = trunk_features;
  m.latent_p = branch_spec.output_width();
  m.sensors_m = branch_spec.input_width();
  const std::vector<Parameter>& src = best ? best_params : final_params;
  const std::size_t nb = 2 * (branch_spec.layer_widths.size() - 1);
  const std::size_t nt = 2 * (trunk_spec.layer_widths.size() - 1);
  if (src.size() < nb + nt) throw MissingInputError("checkpoint parameter list is truncated");
  m.branch.values.assign(src.begin(), src.begin() + static_cast<long>(nb));
  m.trunk.values.assign(src.begin() + static_cast<long>(nb),
                        src.begin() + static_cast<long>(nb + nt));
  m.validate();
  return m;
}

MlpParams Checkpoint::make_alpha(bool best) const {
  if (!has_alpha) throw MissingInputError("checkpoint carries no stage-weight network");
  MlpParams a;
  a.spec = alpha_spec;
  const std::vector<Parameter>& src = best ? best_params : final_params;
  const std::size_t nb = 2 * (branch_spec.layer_widths.size() - 1);
  const std::size_t nt = 2 * (trunk_spec.layer_widths.size() - 1);
  const std::size_t na = 2 * (alpha_spec.layer_widths.size() - 1);
  if (src.size() != nb + nt + na) throw MissingInputError("checkpoint parameter list is truncated");
  a.values.assign(src.begin() + static_cast<long>(nb + nt), src.end());
  return a;
}

TrainResult train(const TrainConfig& config, const TrajectoryDataset& ds,
                  const Checkpoint* resume) {
  const long m = ds.space();
  if (config.branch_spec.input_width() != m)
    throw ConfigError("branch input width " + std::to_string(config.branch_spec.input_width()) +
                      " does not match the dataset grid size " + std::to_string(m));
  const bool learnable = config.regime == Regime::kTiLearnable;
  const bool one_step = config.regime != Regime::kFR;
  const double dt = ds.config.dt_save;

  DeepONetModel model = deeponet_init(config.branch_spec, config.trunk_spec,
                                      config.trunk_features, derive_seed(config.seed, "init"));
  MlpParams alpha;
  if (learnable) {
    if (config.alpha_spec.output_width() != 4 ||
        config.alpha_spec.output_activation != OutputActivation::kSoftmax)
      throw ConfigError("stage-weight net must have 4 softmax outputs");
    alpha = mlp_init(config.alpha_spec, "alpha", derive_seed(config.seed, "alpha_init"));
  }

  ParamSet main_params = model.param_set();
  ParamSet alpha_params = learnable ? alpha.param_set() : ParamSet{};

  OptimizerState opt_main, opt_alpha;
  opt_main.variant = config.optimizer == "adamw" ? OptimizerState::Variant::kAdamW
                                                 : OptimizerState::Variant::kAdam;
  opt_main.weight_decay = config.weight_decay;
  opt_main.init(main_params);
  if (learnable) opt_alpha.init(alpha_params);  // auxiliary net: plain Adam

  Rng batch_rng(derive_seed(config.seed, "batching"));

  if (resume) {
    std::vector<Parameter*> dst;
    for (Parameter* p : main_params.items()) dst.push_back(p);
    for (Parameter* p : alpha_params.items()) dst.push_back(p);
    if (dst.size() != resume->final_params.size())
      throw ConfigError("resume checkpoint does not match the configured specs");
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (!dst[i]->value.same_shape(resume->final_params[i].value))
        throw ConfigError("resume shape mismatch for " + dst[i]->name + ": checkpoint " +
                          resume->final_params[i].value.shape_str() + " vs model " +
                          dst[i]->value.shape_str());
      dst[i]->value = resume->final_params[i].value;
    }
    opt_main = resume->opt_main;
    if (learnable) opt_alpha = resume->opt_alpha;
    batch_rng.set_state(resume->rng_state);
  }

  const Tensor coords = ds.space_coords();
  const long n_train = ds.n_train();
  const long max_in = std::min(ds.train_boundary_frame(), ds.n_t() - 1);
  const long boundary = ds.train_boundary_frame();

  // fixed monitoring fixtures on the held-out samples
  auto test_pairs = evenly_spaced(window_pairs(ds, n_train, ds.config.n_samples),
                                  config.test_pair_cap);
  Tensor test_in, test_out;
  std::vector<long> fr_test_samples;
  std::vector<std::pair<long, long>> fr_test_queries;
  if (one_step) {
    if (test_pairs.empty()) throw ConfigError("dataset has no held-out pairs for monitoring");
    test_in = Tensor({static_cast<long>(test_pairs.size()), m});
    test_out = test_in;
    gather_rows(ds, test_pairs, 0, test_in);
    gather_rows(ds, test_pairs, 1, test_out);
  } else {
    std::vector<long> all_test;
    for (long s = n_train; s < ds.config.n_samples; ++s) all_test.push_back(s);
    fr_test_samples = evenly_spaced(all_test, 64);
    std::vector<std::pair<long, long>> all_q;
    for (long f = 0; f <= boundary; ++f)
      for (long c = 0; c < m; ++c) all_q.emplace_back(f, c);
    fr_test_queries = evenly_spaced(all_q, 4096);
  }

  const long n_pairs_avail = n_train * (max_in + 1);
  if (one_step && config.batch_size > n_pairs_avail)
    throw ConfigError("batch_size exceeds the available training pairs");

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  long best_epoch = 0;
  std::vector<Parameter> best_snapshot;
  auto snapshot_params = [&]() {
    std::vector<Parameter> out;
    for (Parameter* p : main_params.items()) out.emplace_back(p->name, p->value);
    for (Parameter* p : alpha_params.items()) out.emplace_back(p->name, p->value);
    return out;
  };

  auto test_loss_now = [&]() {
    if (one_step)
      return plain_pair_loss(config, model, learnable ? &alpha : nullptr, test_in, test_out,
                             coords, dt);
    FrBatch b = gather_fr_batch(ds, coords, fr_test_samples, fr_test_queries);
    return mse_value(deeponet_forward(model, b.ics, b.queries), b.targets);
  };

  long consecutive_bad = 0;
  Tensor u_in({config.batch_size, m}), u_out({config.batch_size, m});
  for (long epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_exponential(config.lr0, config.decay_factor, config.decay_every, epoch);
    Tape tape;
    NodeId loss_node;
    Tensor batch_in;  // kept for the stage-weight statistics
    if (one_step) {
      std::vector<std::pair<long, long>> picks(static_cast<std::size_t>(config.batch_size));
      for (auto& p : picks) {
        p.first = static_cast<long>(batch_rng.below(static_cast<std::uint64_t>(n_train)));
        p.second = static_cast<long>(batch_rng.below(static_cast<std::uint64_t>(max_in + 1)));
      }
      gather_rows(ds, picks, 0, u_in);
      gather_rows(ds, picks, 1, u_out);
      if (config.regime == Regime::kAR)
        loss_node = one_step_ar_loss(tape, model, u_in, u_out, coords);
      else
        loss_node = one_step_ti_loss(tape, model, learnable ? &alpha : nullptr, u_in, u_out,
                                     coords, dt);
    } else {
      std::vector<long> samples(static_cast<std::size_t>(config.batch_size));
      for (long& s : samples) s = static_cast<long>(batch_rng.below(static_cast<std::uint64_t>(n_train)));
      std::vector<std::pair<long, long>> qpicks(static_cast<std::size_t>(config.query_batch));
      for (auto& p : qpicks) {
        p.first = static_cast<long>(batch_rng.below(static_cast<std::uint64_t>(boundary + 1)));
        p.second = static_cast<long>(batch_rng.below(static_cast<std::uint64_t>(m)));
      }
      FrBatch b = gather_fr_batch(ds, coords, samples, qpicks);
      loss_node = fr_loss(tape, model, b.ics, b.queries, b.targets);
    }

    const double loss = tape.value(loss_node).at(0);
    if (!std::isfinite(loss)) {
      result.skipped_steps += 1;
      consecutive_bad += 1;
      if (consecutive_bad >= 10)
        throw DivergenceError("training loss non-finite for 10 consecutive steps at epoch " +
                              std::to_string(epoch));
      continue;
    }
    consecutive_bad = 0;

    main_params.zero_grad();
    alpha_params.zero_grad();
    tape.backward(loss_node);
    adam_step(main_params, opt_main, lr);
    if (learnable)
      adam_step(alpha_params, opt_alpha,
                lr_exponential(config.alpha_lr0, config.decay_factor, config.decay_every, epoch));

    if ((epoch + 1) % config.eval_every == 0 || epoch + 1 == config.epochs) {
      const double tl = test_loss_now();
      result.curve.push_back({epoch + 1, loss, tl, lr});
      if (tl < best) {
        best = tl;
        best_epoch = epoch + 1;
        best_snapshot = snapshot_params();
      }
      if (learnable) {
        Tensor a = mlp_forward(alpha, u_in);
        AlphaStat st{epoch + 1, {0, 0, 0, 0}};
        for (long i = 0; i < a.dim(0); ++i)
          for (int j = 0; j < 4; ++j) st.mean[j] += a.at(i, j);
        for (int j = 0; j < 4; ++j) st.mean[j] /= static_cast<double>(a.dim(0));
        result.alpha_stats.push_back(st);
      }
    }
  }

  if (best_snapshot.empty()) best_snapshot = snapshot_params();

  Checkpoint ck;
  ck.regime = config.regime;
  ck.epoch = config.epochs + (resume ? resume->epoch : 0);
  ck.best_epoch = best_epoch;
  ck.best_test_loss = best;
  ck.sensors_m = m;
  ck.dt_train = dt;
  ck.branch_spec = config.branch_spec;
  ck.trunk_spec = config.trunk_spec;
  ck.alpha_spec = config.alpha_spec;
  ck.trunk_features = config.trunk_features;
  ck.has_alpha = learnable;
  ck.best_params = std::move(best_snapshot);
  ck.final_params = snapshot_params();
  ck.opt_main = std::move(opt_main);
  ck.opt_alpha = std::move(opt_alpha);
  ck.rng_state = batch_rng.state();
  ck.config_json = config.to_json();
  ck.config_json["dataset"] = {{"pde", ds.config.pde},
                               {"dt_save", ds.config.dt_save},
                               {"t_train", ds.config.t_train},
                               {"t_final", ds.config.t_final},
                               {"space", m}};
  result.checkpoint = std::move(ck);
  return result;
}

namespace {
constexpr char kCkptMagic[9] = "TIDONCK1";

void append_blobs(json& names, std::vector<const Tensor*>& blobs, const std::string& group,
                  const std::vector<Parameter>& params) {
  json list = json::array();
  for (const Parameter& p : params) {
    list.push_back({{"name", p.name}, {"shape", p.value.shape()}});
    blobs.push_back(&p.value);
  }
  names[group] = list;
}

void append_opt(json& names, std::vector<const Tensor*>& blobs, const std::string& group,
                const OptimizerState& st) {
  names[group] = {{"variant", st.variant == OptimizerState::Variant::kAdamW ? "adamw" : "adam"},
                  {"step", st.step},
                  {"weight_decay", st.weight_decay},
                  {"count", st.m.size()}};
  for (const Tensor& t : st.m) blobs.push_back(&t);
  for (const Tensor& t : st.v) blobs.push_back(&t);
}
}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  json manifest;
  manifest["version"] = ck.version;
  manifest["regime"] = to_string(ck.regime);
  manifest["epoch"] = ck.epoch;
  manifest["best_epoch"] = ck.best_epoch;
  manifest["best_test_loss"] = ck.best_test_loss;
  manifest["sensors_m"] = ck.sensors_m;
  manifest["dt_train"] = ck.dt_train;
  manifest["branch_spec"] = spec_to_json(ck.branch_spec);
  manifest["trunk_spec"] = spec_to_json(ck.trunk_spec);
  manifest["alpha_spec"] = spec_to_json(ck.alpha_spec);
  manifest["trunk_features"] = features_to_json(ck.trunk_features);
  manifest["has_alpha"] = ck.has_alpha;
  manifest["rng_state"] = ck.rng_state;
  manifest["config"] = ck.config_json;

  std::vector<const Tensor*> blobs;
  append_blobs(manifest, blobs, "best_params", ck.best_params);
  append_blobs(manifest, blobs, "final_params", ck.final_params);
  append_opt(manifest, blobs, "opt_main", ck.opt_main);
  append_opt(manifest, blobs, "opt_alpha", ck.opt_alpha);

  const std::string js = manifest.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw MissingInputError("cannot write checkpoint " + path);
  f.write(kCkptMagic, 8);
  const std::uint64_t len = js.size();
  f.write(reinterpret_cast<const char*>(&len), sizeof(len));
  f.write(js.data(), static_cast<std::streamsize>(js.size()));
  for (const Tensor* t : blobs)
    f.write(reinterpret_cast<const char*>(t->data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(t->numel())));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingInputError("checkpoint not found: " + path);
  char magic[8];
  f.read(magic, 8);
  if (f.gcount() != 8 || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw MissingInputError("not a checkpoint file (bad magic/version): " + path);
  std::uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string js(len, '\0');
  f.read(js.data(), static_cast<std::streamsize>(len));
  json manifest = json::parse(js);
  if (manifest.at("version").get<int>() != 1)
    throw MissingInputError("unsupported checkpoint version in " + path);

  Checkpoint ck;
  ck.regime = regime_from_string(manifest.at("regime").get<std::string>());
  ck.epoch = manifest.at("epoch").get<long>();
  ck.best_epoch = manifest.at("best_epoch").get<long>();
  ck.best_test_loss = manifest.at("best_test_loss").get<double>();
  ck.sensors_m = manifest.at("sensors_m").get<long>();
  ck.dt_train = manifest.at("dt_train").get<double>();
  ck.branch_spec = spec_from_json(manifest.at("branch_spec"));
  ck.trunk_spec = spec_from_json(manifest.at("trunk_spec"));
  ck.alpha_spec = spec_from_json(manifest.at("alpha_spec"));
  ck.trunk_features = features_from_json(manifest.at("trunk_features"));
  ck.has_alpha = manifest.at("has_alpha").get<bool>();
  ck.rng_state = manifest.at("rng_state").get<std::string>();
  ck.config_json = manifest.at("config");

  auto read_params = [&](const json& list) {
    std::vector<Parameter> out;
    for (const json& e : list) {
      Tensor t(e.at("shape").get<std::vector<long>>());
      f.read(reinterpret_cast<char*>(t.data()),
             static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(t.numel())));
      out.emplace_back(e.at("name").get<std::string>(), std::move(t));
    }
    return out;
  };
  ck.best_params = read_params(manifest.at("best_params"));
  ck.final_params = read_params(manifest.at("final_params"));

  auto read_opt = [&](const json& j, const std::vector<Parameter>& shapes_from) {
    OptimizerState st;
    st.variant = j.at("variant").get<std::string>() == "adamw" ? OptimizerState::Variant::kAdamW
                                                               : OptimizerState::Variant::kAdam;
    st.step = j.at("step").get<long>();
    st.weight_decay = j.at("weight_decay").get<double>();
    const std::size_t count = j.at("count").get<std::size_t>();
    auto read_group = [&](std::vector<Tensor>& dst) {
      for (std::size_t i = 0; i < count; ++i) {
        Tensor t(shapes_from[i].value.shape());
        f.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(t.numel())));
        dst.push_back(std::move(t));
      }
    };
    read_group(st.m);
    read_group(st.v);
    return st;
  };
  const std::size_t n_main = 2 * (ck.branch_spec.layer_widths.size() - 1) +
                             2 * (ck.trunk_spec.layer_widths.size() - 1);
  std::vector<Parameter> main_shapes(ck.final_params.begin(),
                                     ck.final_params.begin() + static_cast<long>(n_main));
  std::vector<Parameter> alpha_shapes(ck.final_params.begin() + static_cast<long>(n_main),
                                      ck.final_params.end());
  ck.opt_main = read_opt(manifest.at("opt_main"), main_shapes);
  ck.opt_alpha = read_opt(manifest.at("opt_alpha"), alpha_shapes);
  if (!f) throw MissingInputError("checkpoint truncated: " + path);
  return ck;
}

void write_loss_curve_csv(const std::vector<LossCurvePoint>& curve, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw MissingInputError("cannot write " + path);
  f << "epoch,train_loss,test_loss,lr\n";
  char buf[160];
  for (const LossCurvePoint& p : curve) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g\n", p.epoch, p.train_loss, p.test_loss,
                  p.lr);
    f << buf;
  }
}

}  // namespace ti
