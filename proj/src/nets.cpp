#include "tintegrate/nets.hpp"

#include <cmath>
#include <stdexcept>

#include "tintegrate/rng.hpp"

namespace ti {

namespace {
constexpr double kPi = 3.14159265358979323846;

double apply_act(Activation a, double x) {
  switch (a) {
    case Activation::kTanh: return std::tanh(x);
    case Activation::kSine: return std::sin(x);
    case Activation::kGelu: return 0.5 * x * (1.0 + std::erf(x * 0.70710678118654752440));
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
  }
  return x;
}

NodeId apply_act(Tape& tape, Activation a, NodeId x) {
  switch (a) {
    case Activation::kTanh: return tape.tanh(x);
    case Activation::kSine: return tape.sin(x);
    case Activation::kGelu: return tape.gelu(x);
    case Activation::kRelu: return tape.relu(x);
  }
  return x;
}
}  // namespace

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "sine" || s == "sin") return Activation::kSine;
  if (s == "gelu") return Activation::kGelu;
  if (s == "relu") return Activation::kRelu;
  throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kSine: return "sine";
    case Activation::kGelu: return "gelu";
    case Activation::kRelu: return "relu";
  }
  return "?";
}

OutputActivation output_activation_from_string(const std::string& s) {
  if (s == "identity") return OutputActivation::kIdentity;
  if (s == "softmax") return OutputActivation::kSoftmax;
  throw std::invalid_argument("unknown output activation: " + s);
}

std::string to_string(OutputActivation a) {
  return a == OutputActivation::kSoftmax ? "softmax" : "identity";
}

void MLPSpec::validate() const {
  if (layer_widths.size() < 2) throw std::invalid_argument("MLP needs at least 2 widths");
  for (long w : layer_widths)
    if (w <= 0) throw std::invalid_argument("MLP widths must be positive");
}

Tensor fourier_encode(const Tensor& coords, const FourierFeatureSpec& spec) {
  if (coords.rank() != 2)
    throw std::invalid_argument("fourier_encode expects [n x d] coords, got " + coords.shape_str());
  const long n = coords.dim(0), d = coords.dim(1);
  if (!spec.domain_scale.empty() && static_cast<long>(spec.domain_scale.size()) != d)
    throw std::invalid_argument("domain_scale size does not match coordinate dimension");

  const long K = spec.num_frequencies;
  Tensor out({n, spec.encoded_width(d)});
  for (long i = 0; i < n; ++i) {
    long col = 0;
    for (long j = 0; j < d; ++j) {
      const double s = spec.domain_scale.empty() ? 1.0 : spec.domain_scale[static_cast<std::size_t>(j)];
      const double c = coords.at(i, j) * s;
      out.at(i, col++) = c;
      for (long k = 1; k <= K; ++k) {
        out.at(i, col++) = std::sin(kPi * k * c);
        out.at(i, col++) = std::cos(kPi * k * c);
      }
    }
  }
  return out;
}

ParamSet MlpParams::param_set() {
  ParamSet s;
  for (Parameter& p : values) s.add(&p);
  return s;
}

MlpParams mlp_init(const MLPSpec& spec, const std::string& prefix, std::uint64_t seed) {
  spec.validate();
  MlpParams mlp;
  mlp.spec = spec;
  Rng rng(seed);
  const std::size_t layers = spec.layer_widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const long fan_in = spec.layer_widths[l];
    const long fan_out = spec.layer_widths[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w({fan_in, fan_out});
    for (double& v : w.vec()) v = rng.uniform(-bound, bound);
    const std::string base = prefix + ".layer" + std::to_string(l);
    mlp.values.emplace_back(base + ".weight", std::move(w));
    mlp.values.emplace_back(base + ".bias", Tensor::zeros({fan_out}));
  }
  return mlp;
}

Tensor mlp_forward(const MlpParams& mlp, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != mlp.spec.input_width())
    throw std::invalid_argument("MLP input mismatch: got " + x.shape_str() + ", expected cols " +
                                std::to_string(mlp.spec.input_width()));
  const std::size_t layers = mlp.values.size() / 2;
  Tensor h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const Tensor& w = mlp.values[2 * l].value;
    const Tensor& b = mlp.values[2 * l + 1].value;
    Tensor z = matmul_value(h, w);
    for (long i = 0; i < z.dim(0); ++i)
      for (long j = 0; j < z.dim(1); ++j) z.at(i, j) += b.at(j);
    if (l + 1 < layers) {
      for (double& v : z.vec()) v = apply_act(mlp.spec.activation, v);
    } else if (mlp.spec.output_activation == OutputActivation::kSoftmax) {
      for (long i = 0; i < z.dim(0); ++i) {
        double m = z.at(i, 0);
        for (long j = 1; j < z.dim(1); ++j) m = std::max(m, z.at(i, j));
        double s = 0.0;
        for (long j = 0; j < z.dim(1); ++j) {
          z.at(i, j) = std::exp(z.at(i, j) - m);
          s += z.at(i, j);
        }
        for (long j = 0; j < z.dim(1); ++j) z.at(i, j) /= s;
      }
    }
    h = std::move(z);
  }
  return h;
}

NodeId mlp_forward(Tape& tape, MlpParams& mlp, NodeId x) {
  const std::size_t layers = mlp.values.size() / 2;
  NodeId h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    NodeId w = tape.param(mlp.values[2 * l]);
    NodeId b = tape.param(mlp.values[2 * l + 1]);
    NodeId z = tape.add(tape.matmul(h, w), b);
    if (l + 1 < layers)
      h = apply_act(tape, mlp.spec.activation, z);
    else if (mlp.spec.output_activation == OutputActivation::kSoftmax)
      h = tape.softmax(z);
    else
      h = z;
  }
  return h;
}

void DeepONetModel::validate() const {
  branch.spec.validate();
  trunk.spec.validate();
  if (branch.spec.output_width() != latent_p || trunk.spec.output_width() != latent_p)
    throw std::invalid_argument("branch/trunk output widths must both equal latent p");
  if (branch.spec.input_width() != sensors_m)
    throw std::invalid_argument("branch input width must equal sensor count m");
}

ParamSet DeepONetModel::param_set() {
  ParamSet s;
  s.extend(branch.param_set());
  s.extend(trunk.param_set());
  return s;
}

DeepONetModel deeponet_init(const MLPSpec& branch, const MLPSpec& trunk,
                            const FourierFeatureSpec& trunk_features, std::uint64_t seed) {
  DeepONetModel m;
  m.branch = mlp_init(branch, "branch", derive_seed(seed, "branch"));
  m.trunk = mlp_init(trunk, "trunk", derive_seed(seed, "trunk"));
  m.trunk_features = trunk_features;
  m.latent_p = branch.output_width();
  m.sensors_m = branch.input_width();
  m.validate();
  return m;
}

Tensor deeponet_forward(const DeepONetModel& model, const Tensor& states, const Tensor& queries) {
  if (states.rank() != 2 || states.dim(1) != model.sensors_m)
    throw std::invalid_argument("deeponet states mismatch: got " + states.shape_str() +
                                ", expected " + std::to_string(model.sensors_m) + " sensors");
  Tensor b_out = mlp_forward(model.branch, states);
  Tensor t_out = mlp_forward(model.trunk, fourier_encode(queries, model.trunk_features));
  return matmul_nt_value(b_out, t_out);
}

NodeId deeponet_forward(Tape& tape, DeepONetModel& model, NodeId states, const Tensor& queries,
                        NodeId* trunk_out_cache) {
  if (tape.value(states).rank() != 2 || tape.value(states).dim(1) != model.sensors_m)
    throw std::invalid_argument("deeponet states mismatch: got " +
                                tape.value(states).shape_str() + ", expected " +
                                std::to_string(model.sensors_m) + " sensors");
  NodeId t_out;
  if (trunk_out_cache && *trunk_out_cache != kNoNode) {
    t_out = *trunk_out_cache;
  } else {
    NodeId q = tape.constant(fourier_encode(queries, model.trunk_features));
    t_out = mlp_forward(tape, model.trunk, q);
    if (trunk_out_cache) *trunk_out_cache = t_out;
  }
  NodeId b_out = mlp_forward(tape, model.branch, states);
  return tape.matmul_nt(b_out, t_out);
}

}  // namespace ti
