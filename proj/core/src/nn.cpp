#include "tape/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "tape/errors.hpp"

namespace tape {

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l)
    n += layer_widths[l] * layer_widths[l + 1] + layer_widths[l + 1];
  return n;
}

void MlpSpec::check() const {
  if (layer_widths.size() < 2)
    throw ArgumentError("MlpSpec: need at least input and output layers");
  for (std::size_t w : layer_widths)
    if (w < 1) throw ArgumentError("MlpSpec: zero layer width");
}

void ModelParams::check(const MlpSpec& spec) const {
  if (values.size() != spec.param_count())
    throw ShapeError("ModelParams: length does not match spec");
  for (double v : values)
    if (!std::isfinite(v)) throw ShapeError("ModelParams: non-finite value");
}

void TrainConfig::check() const {
  if (epochs < 1) throw ArgumentError("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw ArgumentError("TrainConfig: batch_size must be >= 1");
  if (learning_rate < 0.0)
    throw ArgumentError("TrainConfig: negative learning rate");
}

std::size_t weight_offset(const MlpSpec& spec, std::size_t layer) {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l)
    off += spec.layer_widths[l] * spec.layer_widths[l + 1] +
           spec.layer_widths[l + 1];
  return off;
}

std::size_t bias_offset(const MlpSpec& spec, std::size_t layer) {
  return weight_offset(spec, layer) +
         spec.layer_widths[layer] * spec.layer_widths[layer + 1];
}

ModelParams init_params(const MlpSpec& spec, Rng& rng) {
  spec.check();
  ModelParams p;
  p.values.reserve(spec.param_count());
  for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
    const double bound = 1.0 / std::sqrt(double(spec.layer_widths[l]));
    const std::size_t n = spec.layer_widths[l] * spec.layer_widths[l + 1] +
                          spec.layer_widths[l + 1];
    for (std::size_t i = 0; i < n; ++i)
      p.values.push_back(rng.uniform(-bound, bound));
  }
  return p;
}

ForwardTrace mlp_forward_trace(const ModelParams& params, const MlpSpec& spec,
                               std::span<const double> x) {
  if (x.size() != spec.input_width())
    throw ShapeError("mlp_forward: input width mismatch");
  if (params.values.size() != spec.param_count())
    throw ShapeError("mlp_forward: parameter length mismatch");

  ForwardTrace t;
  t.activations.emplace_back(x.begin(), x.end());
  const std::size_t L = spec.num_layers();
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = spec.layer_widths[l];
    const std::size_t out = spec.layer_widths[l + 1];
    const double* W = params.values.data() + weight_offset(spec, l);
    const double* b = params.values.data() + bias_offset(spec, l);
    const std::vector<double>& a = t.activations.back();
    std::vector<double> z(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      const double* wrow = W + o * in;
      for (std::size_t i = 0; i < in; ++i) s += wrow[i] * a[i];
      z[o] = s;
    }
    t.pre_acts.push_back(z);
    if (l + 1 < L) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;  // ReLU; subgradient 0 at 0
    }
    t.activations.push_back(std::move(z));
  }
  return t;
}

namespace {

std::vector<double> softmax(std::span<const double> z) {
  double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace

std::vector<double> mlp_forward(const ModelParams& params, const MlpSpec& spec,
                                std::span<const double> x) {
  ForwardTrace t = mlp_forward_trace(params, spec, x);
  if (spec.head == Head::softmax_ce) return softmax(t.activations.back());
  return t.activations.back();
}

std::vector<double> mlp_backprop(const ModelParams& params, const MlpSpec& spec,
                                 const ForwardTrace& trace,
                                 std::span<const double> output_grad,
                                 std::span<double> param_grad) {
  if (output_grad.size() != spec.output_width())
    throw ShapeError("mlp_backprop: output gradient width mismatch");
  if (param_grad.size() != spec.param_count())
    throw ShapeError("mlp_backprop: parameter gradient length mismatch");

  std::vector<double> delta(output_grad.begin(), output_grad.end());
  const std::size_t L = spec.num_layers();
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t in = spec.layer_widths[l];
    const std::size_t out = spec.layer_widths[l + 1];
    const double* W = params.values.data() + weight_offset(spec, l);
    double* gW = param_grad.data() + weight_offset(spec, l);
    double* gb = param_grad.data() + bias_offset(spec, l);
    const std::vector<double>& a = trace.activations[l];

    for (std::size_t o = 0; o < out; ++o) {
      gb[o] += delta[o];
      double* grow = gW + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += delta[o] * a[i];
    }
    std::vector<double> prev(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double* wrow = W + o * in;
      for (std::size_t i = 0; i < in; ++i) prev[i] += wrow[i] * delta[o];
    }
    if (l > 0) {
      const std::vector<double>& z = trace.pre_acts[l - 1];
      for (std::size_t i = 0; i < in; ++i)
        if (z[i] <= 0.0) prev[i] = 0.0;
    }
    delta = std::move(prev);
  }
  return delta;
}

namespace {

// Per-sample head loss and output gradient against a one-hot target class.
double head_loss_grad(const MlpSpec& spec, std::span<const double> out,
                      int label, std::vector<double>& output_grad) {
  output_grad.assign(out.size(), 0.0);
  if (spec.head == Head::softmax_ce) {
    std::vector<double> p = softmax(out);
    for (std::size_t i = 0; i < p.size(); ++i) output_grad[i] = p[i];
    output_grad[static_cast<std::size_t>(label)] -= 1.0;
    return -std::log(p[static_cast<std::size_t>(label)]);
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double t = (static_cast<std::size_t>(label) == i) ? 1.0 : 0.0;
    double d = out[i] - t;
    loss += d * d;
    output_grad[i] = 2.0 * d;
  }
  return loss;
}

}  // namespace

LossGrad loss_and_grad(const ModelParams& params, const MlpSpec& spec,
                       const LabeledDataset& data,
                       std::span<const std::size_t> batch) {
  if (batch.empty()) throw ArgumentError("loss_and_grad: empty batch");
  LossGrad lg{0.0, std::vector<double>(spec.param_count(), 0.0)};
  std::vector<double> og;
  for (std::size_t r : batch) {
    ForwardTrace t = mlp_forward_trace(params, spec, data.features.row(r));
    lg.loss += head_loss_grad(spec, t.activations.back(), data.labels[r], og);
    mlp_backprop(params, spec, t, og, lg.grad);
  }
  const double inv = 1.0 / double(batch.size());
  lg.loss *= inv;
  for (double& g : lg.grad) g *= inv;
  return lg;
}

LossGrad loss_and_grad(const ModelParams& params, const MlpSpec& spec,
                       const LabeledDataset& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  return loss_and_grad(params, spec, data, all);
}

LossGrad loss_and_grad_mse(const ModelParams& params, const MlpSpec& spec,
                           const Matrix& inputs, const Matrix& targets,
                           std::span<const std::size_t> batch) {
  if (batch.empty()) throw ArgumentError("loss_and_grad_mse: empty batch");
  if (targets.cols != spec.output_width() || targets.rows != inputs.rows)
    throw ShapeError("loss_and_grad_mse: target shape mismatch");
  LossGrad lg{0.0, std::vector<double>(spec.param_count(), 0.0)};
  std::vector<double> og;
  for (std::size_t r : batch) {
    ForwardTrace t = mlp_forward_trace(params, spec, inputs.row(r));
    const std::vector<double>& out = t.activations.back();
    og.assign(out.size(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
      double d = out[i] - targets.at(r, i);
      lg.loss += d * d;
      og[i] = 2.0 * d;
    }
    mlp_backprop(params, spec, t, og, lg.grad);
  }
  const double inv = 1.0 / double(batch.size());
  lg.loss *= inv;
  for (double& g : lg.grad) g *= inv;
  return lg;
}

std::vector<double> finite_diff_grad(const ModelParams& params,
                                     const MlpSpec& spec,
                                     const LabeledDataset& data,
                                     std::span<const std::size_t> batch,
                                     double h) {
  if (h <= 0.0) throw ArgumentError("finite_diff_grad: h must be positive");
  ModelParams p = params;
  std::vector<double> g(spec.param_count());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double orig = p.values[i];
    p.values[i] = orig + h;
    double lp = loss_and_grad(p, spec, data, batch).loss;
    p.values[i] = orig - h;
    double lm = loss_and_grad(p, spec, data, batch).loss;
    p.values[i] = orig;
    g[i] = (lp - lm) / (2.0 * h);
  }
  return g;
}

namespace {

template <typename StepLoss>
ModelParams sgd_loop(ModelParams params, std::size_t n, const TrainConfig& cfg,
                     Rng& rng, StepLoss&& batch_step) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      std::size_t len = std::min(cfg.batch_size, n - start);
      double loss = batch_step(
          params, std::span<const std::size_t>(order.data() + start, len));
      if (!std::isfinite(loss))
        throw DivergenceError(
            "sgd_train: non-finite loss at epoch " + std::to_string(epoch),
            static_cast<long>(epoch));
    }
  }
  return params;
}

}  // namespace

ModelParams sgd_train(const MlpSpec& spec, const LabeledDataset& data,
                      const IndexSet& rows, const TrainConfig& cfg) {
  spec.check();
  cfg.check();
  if (rows.empty()) throw ArgumentError("sgd_train: empty training set");
  if (data.dims() != spec.input_width())
    throw ShapeError("sgd_train: feature width does not match spec");

  Rng rng(cfg.seed);
  ModelParams params = init_params(spec, rng);
  const std::vector<std::size_t>& idx = rows.values();
  return sgd_loop(std::move(params), idx.size(), cfg, rng,
                  [&](ModelParams& p, std::span<const std::size_t> ord) {
                    std::vector<std::size_t> batch(ord.size());
                    for (std::size_t i = 0; i < ord.size(); ++i)
                      batch[i] = idx[ord[i]];
                    LossGrad lg = loss_and_grad(p, spec, data, batch);
                    for (std::size_t i = 0; i < p.values.size(); ++i)
                      p.values[i] -= cfg.learning_rate * lg.grad[i];
                    return lg.loss;
                  });
}

ModelParams sgd_train(const MlpSpec& spec, const LabeledDataset& data,
                      const TrainConfig& cfg) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  return sgd_train(spec, data, IndexSet(std::move(all)), cfg);
}

ModelParams sgd_train_mse(const MlpSpec& spec, const Matrix& inputs,
                          const Matrix& targets, const TrainConfig& cfg,
                          ModelParams initial) {
  spec.check();
  cfg.check();
  if (inputs.rows == 0) throw ArgumentError("sgd_train_mse: empty training set");
  initial.check(spec);

  Rng rng(derive_seed(cfg.seed, 1));  // init stream consumed by the caller
  return sgd_loop(std::move(initial), inputs.rows, cfg, rng,
                  [&](ModelParams& p, std::span<const std::size_t> batch) {
                    LossGrad lg = loss_and_grad_mse(p, spec, inputs, targets, batch);
                    for (std::size_t i = 0; i < p.values.size(); ++i)
                      p.values[i] -= cfg.learning_rate * lg.grad[i];
                    return lg.loss;
                  });
}

double accuracy(const ModelParams& params, const MlpSpec& spec,
                const LabeledDataset& data) {
  if (data.size() == 0) throw ArgumentError("accuracy: empty dataset");
  std::size_t hits = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    std::vector<double> out = mlp_forward(params, spec, data.features.row(r));
    std::size_t pred = static_cast<std::size_t>(
        std::max_element(out.begin(), out.end()) - out.begin());
    if (static_cast<int>(pred) == data.labels[r]) ++hits;
  }
  return double(hits) / double(data.size());
}

namespace {

std::string head_name(Head h) {
  return h == Head::softmax_ce ? "softmax-ce" : "mse";
}

Head head_from_name(const std::string& s) {
  if (s == "softmax-ce") return Head::softmax_ce;
  if (s == "mse") return Head::mse;
  throw ParseError("checkpoint: unknown head '" + s + "'");
}

}  // namespace

void save_checkpoint(const std::string& path, const MlpSpec& spec,
                     std::uint64_t seed, const ModelParams& params) {
  nlohmann::json j;
  j["format_version"] = "tape-ckpt-1";
  j["spec"] = {{"layer_widths", spec.layer_widths},
               {"head", head_name(spec.head)}};
  j["seed"] = seed;
  j["values"] = params.values;
  std::ofstream f(path);
  if (!f) throw ArgumentError("save_checkpoint: cannot open " + path);
  f << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("load_checkpoint: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("load_checkpoint: bad document: " + std::string(e.what()));
  }
  if (j.value("format_version", "") != "tape-ckpt-1")
    throw ParseError("load_checkpoint: unexpected format_version");
  Checkpoint c;
  c.spec.layer_widths = j.at("spec").at("layer_widths").get<std::vector<std::size_t>>();
  c.spec.head = head_from_name(j.at("spec").at("head").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.params.values = j.at("values").get<std::vector<double>>();
  c.params.check(c.spec);
  return c;
}

}  // namespace tape
