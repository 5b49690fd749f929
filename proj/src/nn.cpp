#include "more/nn.hpp"

#include <cmath>
#include <cstddef>

#include "more/errors.hpp"

namespace more::nn {

namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;
using RowMajorMutMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>;
using VecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMutMap = Eigen::Map<Eigen::VectorXd>;

void apply_hidden_activation(Activation act, Eigen::MatrixXd& z) {
  if (act == Activation::relu) {
    z = z.cwiseMax(0.0);
  } else {
    z = z.array().tanh().matrix();
  }
}

}  // namespace

int MlpSpec::layer_input_dim(int layer) const {
  return layer == 0 ? input_dim : hidden_dims[layer - 1];
}

int MlpSpec::layer_output_dim(int layer) const {
  return layer == num_layers() - 1 ? output_dim : hidden_dims[layer];
}

std::size_t MlpSpec::param_count() const {
  std::size_t count = 0;
  for (int layer = 0; layer < num_layers(); ++layer) {
    count += static_cast<std::size_t>(layer_input_dim(layer) + 1) *
             static_cast<std::size_t>(layer_output_dim(layer));
  }
  return count;
}

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw UsageError("MlpSpec: input_dim and output_dim must be >= 1");
  }
  for (int h : hidden_dims) {
    if (h < 1) throw UsageError("MlpSpec: hidden dims must be >= 1");
  }
}

ParamVector init_params(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  ParamVector params(spec.param_count(), 0.0);
  std::size_t offset = 0;
  for (int layer = 0; layer < spec.num_layers(); ++layer) {
    const int fan_in = spec.layer_input_dim(layer);
    const int fan_out = spec.layer_output_dim(layer);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (int i = 0; i < fan_in * fan_out; ++i) {
      params[offset + i] = rng.uniform(-limit, limit);
    }
    offset += static_cast<std::size_t>(fan_in + 1) * fan_out;
  }
  return params;
}

Eigen::MatrixXd forward_batch(const MlpSpec& spec, std::span<const double> params,
                              const Eigen::MatrixXd& inputs, ForwardCache* cache) {
  spec.validate();
  if (params.size() != spec.param_count()) {
    throw UsageError("forward: parameter vector length " +
                     std::to_string(params.size()) + " does not match spec (" +
                     std::to_string(spec.param_count()) + ")");
  }
  if (inputs.rows() != spec.input_dim) {
    throw UsageError("forward: input dim " + std::to_string(inputs.rows()) +
                     " does not match spec input_dim " +
                     std::to_string(spec.input_dim));
  }

  if (cache) {
    cache->pre_activations.assign(static_cast<std::size_t>(spec.num_layers()), {});
    cache->activations.assign(static_cast<std::size_t>(spec.num_layers()) + 1, {});
    cache->activations[0] = inputs;
  }

  Eigen::MatrixXd x = inputs;
  std::size_t offset = 0;
  for (int layer = 0; layer < spec.num_layers(); ++layer) {
    const int fan_in = spec.layer_input_dim(layer);
    const int fan_out = spec.layer_output_dim(layer);
    RowMajorMap w(params.data() + offset, fan_out, fan_in);
    VecMap b(params.data() + offset + static_cast<std::size_t>(fan_in) * fan_out,
             fan_out);
    offset += static_cast<std::size_t>(fan_in + 1) * fan_out;

    Eigen::MatrixXd z = (w * x).colwise() + b;
    if (cache) cache->pre_activations[static_cast<std::size_t>(layer)] = z;

    const bool last = layer == spec.num_layers() - 1;
    if (last) {
      if (spec.output_activation == OutputActivation::tanh) {
        z = z.array().tanh().matrix();
      }
    } else {
      apply_hidden_activation(spec.hidden_activation, z);
    }
    if (cache) cache->activations[static_cast<std::size_t>(layer) + 1] = z;
    x = std::move(z);
  }
  return x;
}

ParamVector backward_batch(const MlpSpec& spec, std::span<const double> params,
                           const ForwardCache& cache,
                           const Eigen::MatrixXd& grad_outputs,
                           Eigen::MatrixXd* grad_inputs) {
  if (grad_outputs.rows() != spec.output_dim) {
    throw UsageError("backward: grad_outputs has wrong output dim");
  }

  ParamVector grad(spec.param_count(), 0.0);

  // Per-layer parameter offsets.
  std::vector<std::size_t> offsets(static_cast<std::size_t>(spec.num_layers()));
  std::size_t offset = 0;
  for (int layer = 0; layer < spec.num_layers(); ++layer) {
    offsets[static_cast<std::size_t>(layer)] = offset;
    offset += static_cast<std::size_t>(spec.layer_input_dim(layer) + 1) *
              spec.layer_output_dim(layer);
  }

  Eigen::MatrixXd delta = grad_outputs;
  for (int layer = spec.num_layers() - 1; layer >= 0; --layer) {
    const int fan_in = spec.layer_input_dim(layer);
    const int fan_out = spec.layer_output_dim(layer);
    const auto li = static_cast<std::size_t>(layer);
    const bool last = layer == spec.num_layers() - 1;

    if (last) {
      if (spec.output_activation == OutputActivation::tanh) {
        // d tanh(z) = 1 - tanh(z)^2, tanh(z) is the cached activation.
        delta = delta.cwiseProduct(
            (1.0 - cache.activations[li + 1].array().square()).matrix());
      }
    } else {
      if (spec.hidden_activation == Activation::relu) {
        // Subgradient 0 at exactly 0.
        delta = delta.cwiseProduct(
            (cache.pre_activations[li].array() > 0.0).cast<double>().matrix());
      } else {
        delta = delta.cwiseProduct(
            (1.0 - cache.activations[li + 1].array().square()).matrix());
      }
    }

    RowMajorMutMap w_grad(grad.data() + offsets[li], fan_out, fan_in);
    VecMutMap b_grad(
        grad.data() + offsets[li] + static_cast<std::size_t>(fan_in) * fan_out,
        fan_out);
    w_grad.noalias() = delta * cache.activations[li].transpose();
    b_grad.noalias() = delta.rowwise().sum();

    if (layer > 0 || grad_inputs) {
      RowMajorMap w(params.data() + offsets[li], fan_out, fan_in);
      Eigen::MatrixXd next = w.transpose() * delta;
      if (layer == 0) {
        *grad_inputs = std::move(next);
      } else {
        delta = std::move(next);
      }
    }
  }
  return grad;
}

std::vector<double> mlp_forward(const MlpSpec& spec,
                                std::span<const double> params,
                                std::span<const double> input) {
  if (input.size() != static_cast<std::size_t>(spec.input_dim)) {
    throw UsageError("mlp_forward: input length " + std::to_string(input.size()) +
                     " does not match spec input_dim " +
                     std::to_string(spec.input_dim));
  }
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (!std::isfinite(input[i])) {
      throw UsageError("mlp_forward: non-finite input at index " +
                       std::to_string(i));
    }
  }
  Eigen::MatrixXd x(spec.input_dim, 1);
  for (int i = 0; i < spec.input_dim; ++i) x(i, 0) = input[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd y = forward_batch(spec, params, x);
  return {y.data(), y.data() + spec.output_dim};
}

ParamVector mlp_gradient(const MlpSpec& spec, std::span<const double> params,
                         std::span<const double> input, const LossClosure& loss) {
  Eigen::MatrixXd x(spec.input_dim, 1);
  if (input.size() != static_cast<std::size_t>(spec.input_dim)) {
    throw UsageError("mlp_gradient: input length does not match spec");
  }
  for (int i = 0; i < spec.input_dim; ++i) x(i, 0) = input[static_cast<std::size_t>(i)];

  ForwardCache cache;
  const Eigen::MatrixXd y = forward_batch(spec, params, x, &cache);

  std::vector<double> grad_out(static_cast<std::size_t>(spec.output_dim), 0.0);
  loss({y.data(), static_cast<std::size_t>(spec.output_dim)}, grad_out);

  Eigen::MatrixXd gy(spec.output_dim, 1);
  for (int i = 0; i < spec.output_dim; ++i) gy(i, 0) = grad_out[static_cast<std::size_t>(i)];
  return backward_batch(spec, params, cache, gy);
}

FiniteDiffReport finite_diff_check(const MlpSpec& spec, const ParamVector& params,
                                   std::span<const double> input,
                                   const LossClosure& loss, double step,
                                   double tolerance) {
  if (step <= 0.0 || tolerance <= 0.0) {
    throw UsageError("finite_diff_check: step and tolerance must be > 0");
  }
  const ParamVector analytic = mlp_gradient(spec, params, input, loss);

  auto eval = [&](const ParamVector& p) {
    const std::vector<double> out = mlp_forward(spec, p, input);
    std::vector<double> scratch(out.size(), 0.0);
    return loss(out, scratch);
  };
  return finite_diff_check_function(eval, params, analytic, step, tolerance);
}

FiniteDiffReport finite_diff_check_function(
    const std::function<double(const ParamVector&)>& f, const ParamVector& at,
    const ParamVector& analytic_grad, double step, double tolerance) {
  if (at.size() != analytic_grad.size()) {
    throw UsageError("finite_diff_check: gradient length mismatch");
  }
  FiniteDiffReport report;
  ParamVector p = at;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + step;
    const double f_plus = f(p);
    p[i] = saved - step;
    const double f_minus = f(p);
    p[i] = saved;

    const double numeric = (f_plus - f_minus) / (2.0 * step);
    const double denom =
        std::max({std::abs(numeric), std::abs(analytic_grad[i]), 1e-8});
    const double rel = std::abs(numeric - analytic_grad[i]) / denom;
    report.max_relative_error = std::max(report.max_relative_error, rel);
  }
  report.pass = report.max_relative_error < tolerance;
  return report;
}

AdamState make_adam(std::size_t param_count, double learning_rate) {
  if (learning_rate <= 0.0) throw UsageError("adam: learning_rate must be > 0");
  AdamState state;
  state.first_moment.assign(param_count, 0.0);
  state.second_moment.assign(param_count, 0.0);
  state.learning_rate = learning_rate;
  return state;
}

void adam_step(ParamVector& params, std::span<const double> grad, AdamState& state) {
  const std::size_t n = params.size();
  if (grad.size() != n || state.first_moment.size() != n ||
      state.second_moment.size() != n) {
    throw UsageError("adam_step: length mismatch between params, grad and moments");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grad[i])) {
      throw DivergenceError("adam_step: non-finite gradient at coordinate " +
                            std::to_string(i));
    }
  }

  state.step_count += 1;
  const double bias1 = 1.0 - std::pow(state.beta1, state.step_count);
  const double bias2 = 1.0 - std::pow(state.beta2, state.step_count);
  for (std::size_t i = 0; i < n; ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grad[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    if (!std::isfinite(params[i])) {
      throw DivergenceError("adam_step: parameter became non-finite at coordinate " +
                            std::to_string(i));
    }
  }
}

}  // namespace more::nn
