#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "more/rng.hpp"

namespace more::nn {

enum class Activation { relu, tanh };
enum class OutputActivation { identity, tanh };

// Fully connected network shape. hidden_dims may be empty (pure affine map).
struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int output_dim = 0;
  Activation hidden_activation = Activation::relu;
  OutputActivation output_activation = OutputActivation::identity;

  int num_layers() const { return static_cast<int>(hidden_dims.size()) + 1; }
  int layer_input_dim(int layer) const;
  int layer_output_dim(int layer) const;

  // Sum over layers of (fan_in + 1) * fan_out.
  std::size_t param_count() const;

  // Throws UsageError if any dimension is < 1.
  void validate() const;

  bool operator==(const MlpSpec&) const = default;
};

// Flat parameter vector. Layout is layer-major: for each layer, the weight
// matrix in row-major (fan_out x fan_in) order followed by the bias
// (fan_out). This ordering is part of the checkpoint format.
using ParamVector = std::vector<double>;

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)) per layer, biases zero.
ParamVector init_params(const MlpSpec& spec, Rng& rng);

// Activations kept for the backward pass. activations[0] is the input batch;
// activations[i] the post-activation output of layer i (columns = samples).
struct ForwardCache {
  std::vector<Eigen::MatrixXd> pre_activations;
  std::vector<Eigen::MatrixXd> activations;
};

// Batched forward: inputs is (input_dim x batch), returns (output_dim x batch).
Eigen::MatrixXd forward_batch(const MlpSpec& spec, std::span<const double> params,
                              const Eigen::MatrixXd& inputs,
                              ForwardCache* cache = nullptr);

// Batched reverse-mode pass. grad_outputs is dLoss/dY (output_dim x batch);
// the returned flat gradient is summed over batch columns (scale grad_outputs
// by 1/batch beforehand for a mean loss). If grad_inputs is non-null it
// receives dLoss/dX with the same shape as the forward inputs.
ParamVector backward_batch(const MlpSpec& spec, std::span<const double> params,
                           const ForwardCache& cache,
                           const Eigen::MatrixXd& grad_outputs,
                           Eigen::MatrixXd* grad_inputs = nullptr);

// Single-sample forward. Rejects dimension mismatches and non-finite inputs.
std::vector<double> mlp_forward(const MlpSpec& spec,
                                std::span<const double> params,
                                std::span<const double> input);

// Scalar loss over network outputs; fills grad_output with dLoss/doutput.
using LossClosure =
    std::function<double(std::span<const double> output, std::span<double> grad_output)>;

// dLoss/dparams for the given input via reverse-mode accumulation.
ParamVector mlp_gradient(const MlpSpec& spec, std::span<const double> params,
                         std::span<const double> input, const LossClosure& loss);

struct FiniteDiffReport {
  double max_relative_error = 0.0;
  bool pass = false;
};

// Compares mlp_gradient against central finite differences, coordinate-wise.
// Relative error uses max(|a|, |b|, 1e-8) as denominator.
FiniteDiffReport finite_diff_check(const MlpSpec& spec, const ParamVector& params,
                                   std::span<const double> input,
                                   const LossClosure& loss, double step,
                                   double tolerance);

// Generic central-difference check between a scalar function of a parameter
// vector and a claimed gradient. Used by the objective-level gradient gates.
FiniteDiffReport finite_diff_check_function(
    const std::function<double(const ParamVector&)>& f, const ParamVector& at,
    const ParamVector& analytic_grad, double step, double tolerance);

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  long step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam(std::size_t param_count, double learning_rate);

// Bias-corrected Adam update, in place. Rejects non-finite gradients with the
// offending coordinate index; verifies parameters stay finite.
void adam_step(ParamVector& params, std::span<const double> grad, AdamState& state);

}  // namespace more::nn
