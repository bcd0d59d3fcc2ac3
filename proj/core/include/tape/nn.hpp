#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tape/dataset.hpp"
#include "tape/matrix.hpp"
#include "tape/rng.hpp"

namespace tape {

enum class Head { softmax_ce, mse };

// MLP layout: ReLU on hidden layers, identity on the last affine layer,
// plus the chosen loss head on top.
struct MlpSpec {
  std::vector<std::size_t> layer_widths;  // input -> hidden... -> output
  Head head = Head::softmax_ce;

  std::size_t num_layers() const { return layer_widths.size() - 1; }
  std::size_t input_width() const { return layer_widths.front(); }
  std::size_t output_width() const { return layer_widths.back(); }
  std::size_t param_count() const;
  void check() const;
};

// Flat parameter vector. Per layer l: weight block (out x in, row-major by
// output unit) followed by the bias block (out).
struct ModelParams {
  std::vector<double> values;

  void check(const MlpSpec& spec) const;
};

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;

  void check() const;
};

// Offset of layer l's weight / bias block in the flat parameter vector.
std::size_t weight_offset(const MlpSpec& spec, std::size_t layer);
std::size_t bias_offset(const MlpSpec& spec, std::size_t layer);

// Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer, drawn in layer order.
ModelParams init_params(const MlpSpec& spec, Rng& rng);

// Single-sample forward pass. Softmax head returns class probabilities
// (each in (0,1), summing to 1); mse head returns the last affine output.
std::vector<double> mlp_forward(const ModelParams& params, const MlpSpec& spec,
                                std::span<const double> x);

// Per-layer activations of one forward pass, kept for backprop.
struct ForwardTrace {
  std::vector<std::vector<double>> activations;  // [0]=input, per-layer post-act
  std::vector<std::vector<double>> pre_acts;     // per-layer affine outputs
};

ForwardTrace mlp_forward_trace(const ModelParams& params, const MlpSpec& spec,
                               std::span<const double> x);

// Backprop from an arbitrary gradient at the network output (post-identity,
// pre-head). Accumulates into param_grad and returns the input gradient.
std::vector<double> mlp_backprop(const ModelParams& params, const MlpSpec& spec,
                                 const ForwardTrace& trace,
                                 std::span<const double> output_grad,
                                 std::span<double> param_grad);

// Mean loss and its gradient over the selected rows. Softmax head uses
// cross-entropy against the integer label; mse head uses the squared L2
// distance to the label's one-hot vector.
struct LossGrad {
  double loss;
  std::vector<double> grad;
};
LossGrad loss_and_grad(const ModelParams& params, const MlpSpec& spec,
                       const LabeledDataset& data,
                       std::span<const std::size_t> batch);
LossGrad loss_and_grad(const ModelParams& params, const MlpSpec& spec,
                       const LabeledDataset& data);

// Regression variant: mean of ||f(x_r) - targets_r||^2 over the given rows.
LossGrad loss_and_grad_mse(const ModelParams& params, const MlpSpec& spec,
                           const Matrix& inputs, const Matrix& targets,
                           std::span<const std::size_t> batch);

// Central-difference gradient oracle, (L(t+h e_i) - L(t-h e_i)) / 2h.
std::vector<double> finite_diff_grad(const ModelParams& params,
                                     const MlpSpec& spec,
                                     const LabeledDataset& data,
                                     std::span<const std::size_t> batch,
                                     double h);

// Minibatch SGD, deterministic given (spec, data, cfg.seed).
ModelParams sgd_train(const MlpSpec& spec, const LabeledDataset& data,
                      const TrainConfig& cfg);
ModelParams sgd_train(const MlpSpec& spec, const LabeledDataset& data,
                      const IndexSet& rows, const TrainConfig& cfg);

// SGD on the regression objective; used by the reconstructor.
ModelParams sgd_train_mse(const MlpSpec& spec, const Matrix& inputs,
                          const Matrix& targets, const TrainConfig& cfg,
                          ModelParams initial);

// Fraction of rows whose argmax prediction matches the label.
double accuracy(const ModelParams& params, const MlpSpec& spec,
                const LabeledDataset& data);

// tape-ckpt-1 model checkpoint (structured text, value-exact round trip).
void save_checkpoint(const std::string& path, const MlpSpec& spec,
                     std::uint64_t seed, const ModelParams& params);
struct Checkpoint {
  MlpSpec spec;
  std::uint64_t seed;
  ModelParams params;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tape
