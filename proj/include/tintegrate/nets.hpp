#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tintegrate/tape.hpp"
#include "tintegrate/tensor.hpp"

namespace ti {

enum class Activation : std::uint8_t { kTanh, kSine, kGelu, kRelu };
enum class OutputActivation : std::uint8_t { kIdentity, kSoftmax };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);
OutputActivation output_activation_from_string(const std::string& s);
std::string to_string(OutputActivation a);

struct MLPSpec {
  std::vector<long> layer_widths;  // input, hidden..., output
  Activation activation = Activation::kTanh;
  OutputActivation output_activation = OutputActivation::kIdentity;

  void validate() const;
  long input_width() const { return layer_widths.front(); }
  long output_width() const { return layer_widths.back(); }
};

/// Sinusoidal coordinate features: the original (normalized) coordinate is
/// kept and [sin(pi k c), cos(pi k c)] appended for k = 1..K, so dimension d
/// becomes d*(2K+1). K = 0 is pass-through.
struct FourierFeatureSpec {
  long num_frequencies = 0;
  /// Multiplier taking each raw coordinate into its normalized period
  /// (e.g. 2/L maps [0,L) onto [0,2), one full period of sin(pi x)).
  std::vector<double> domain_scale;

  long encoded_width(long d) const { return d * (2 * num_frequencies + 1); }
};

/// Normalizes then encodes coordinates [n x d] -> [n x d(2K+1)].
Tensor fourier_encode(const Tensor& coords, const FourierFeatureSpec& spec);

/// Weight/bias parameters of one MLP, named "<prefix>.layer<i>.weight|bias".
struct MlpParams {
  MLPSpec spec;
  std::vector<Parameter> values;  // W0, b0, W1, b1, ...

  ParamSet param_set();
};

/// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
MlpParams mlp_init(const MLPSpec& spec, const std::string& prefix, std::uint64_t seed);

/// Plain evaluation, no recording. X is [B x in].
Tensor mlp_forward(const MlpParams& mlp, const Tensor& x);
/// Recorded evaluation on a tape; `x` is an existing node.
NodeId mlp_forward(Tape& tape, MlpParams& mlp, NodeId x);

/// Branch-trunk operator model. The branch reads the state at the m sensor
/// locations, the trunk reads (encoded) query coordinates, and the field is
/// their inner product over the shared latent width p.
struct DeepONetModel {
  MlpParams branch;
  MlpParams trunk;
  FourierFeatureSpec trunk_features;
  long latent_p = 0;
  long sensors_m = 0;

  void validate() const;
  ParamSet param_set();
};

DeepONetModel deeponet_init(const MLPSpec& branch, const MLPSpec& trunk,
                            const FourierFeatureSpec& trunk_features, std::uint64_t seed);

/// out[b, j] = sum_i branch(states[b])[i] * trunk(queries[j])[i].
/// `states` is [B x m], `queries` is [n x d] in physical coordinates
/// (feature encoding happens inside). Plain mode.
Tensor deeponet_forward(const DeepONetModel& model, const Tensor& states, const Tensor& queries);

/// Recorded mode. `trunk_out` caches the trunk evaluation so multi-stage
/// integrator losses evaluate the trunk once per step: pass kNoNode the first
/// time and reuse the returned id afterwards.
NodeId deeponet_forward(Tape& tape, DeepONetModel& model, NodeId states, const Tensor& queries,
                        NodeId* trunk_out_cache = nullptr);

}  // namespace ti
