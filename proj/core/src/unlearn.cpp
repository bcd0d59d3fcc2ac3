#include "tape/unlearn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "tape/errors.hpp"

namespace tape {

void UnlearnRequest::check() const {
  dataset.check();
  spec.check();
  train_cfg.check();
  if (unlearn.empty()) throw ArgumentError("UnlearnRequest: empty unlearn set");
  if (unlearn[unlearn.size() - 1] >= dataset.size())
    throw ArgumentError("UnlearnRequest: unlearn index out of range");
}

ModelParams retrain_unlearn(const UnlearnRequest& req) {
  req.check();
  IndexSet remaining = req.unlearn.complement(req.dataset.size());
  if (remaining.empty())
    throw ArgumentError("retrain_unlearn: nothing left to train on");
  return sgd_train(req.spec, req.dataset, remaining, req.train_cfg);
}

SisaEnsemble sisa_train(const LabeledDataset& data, std::size_t k,
                        const MlpSpec& spec, const TrainConfig& cfg, Rng& rng) {
  if (k < 1 || k > data.size())
    throw ArgumentError("sisa_train: shard count out of range");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::size_t> assignment(data.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    assignment[order[pos]] = pos * k / order.size();
  return sisa_train(data, spec, cfg, std::move(assignment));
}

SisaEnsemble sisa_train(const LabeledDataset& data, const MlpSpec& spec,
                        const TrainConfig& cfg,
                        std::vector<std::size_t> shard_assignment) {
  if (shard_assignment.size() != data.size())
    throw ArgumentError("sisa_train: assignment length mismatch");
  SisaEnsemble e;
  e.shard_count =
      1 + *std::max_element(shard_assignment.begin(), shard_assignment.end());
  e.shard_assignment = std::move(shard_assignment);
  e.spec = spec;
  e.cfg = cfg;
  for (std::size_t s = 0; s < e.shard_count; ++s) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (e.shard_assignment[i] == s) members.push_back(i);
    if (members.empty()) throw ArgumentError("sisa_train: empty shard");
    TrainConfig shard_cfg = cfg;
    shard_cfg.seed = cfg.seed + s;
    e.submodels.push_back(
        sgd_train(spec, data, IndexSet(std::move(members)), shard_cfg));
  }
  return e;
}

SisaEnsemble sisa_unlearn(const SisaEnsemble& ensemble, const UnlearnRequest& req) {
  req.check();
  if (ensemble.shard_assignment.size() != req.dataset.size())
    throw ArgumentError("sisa_unlearn: ensemble/dataset size mismatch");

  SisaEnsemble out = ensemble;
  std::vector<bool> affected(ensemble.shard_count, false);
  for (std::size_t i : req.unlearn) {
    if (out.shard_assignment[i] == SisaEnsemble::kRemoved)
      throw ArgumentError("sisa_unlearn: sample already removed");
    affected[out.shard_assignment[i]] = true;
    out.shard_assignment[i] = SisaEnsemble::kRemoved;
  }
  for (std::size_t s = 0; s < out.shard_count; ++s) {
    if (!affected[s]) continue;  // untouched shards keep their exact params
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < req.dataset.size(); ++i)
      if (out.shard_assignment[i] == s) members.push_back(i);
    if (members.empty())
      throw ArgumentError("sisa_unlearn: shard emptied by unlearning");
    TrainConfig shard_cfg = out.cfg;
    shard_cfg.seed = out.cfg.seed + s;
    out.submodels[s] =
        sgd_train(out.spec, req.dataset, IndexSet(std::move(members)), shard_cfg);
  }
  return out;
}

std::vector<double> sisa_predict(const SisaEnsemble& ensemble,
                                 std::span<const double> x) {
  std::vector<double> mean(ensemble.spec.output_width(), 0.0);
  for (const ModelParams& sub : ensemble.submodels) {
    std::vector<double> p = mlp_forward(sub, ensemble.spec, x);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += p[i];
  }
  for (double& v : mean) v /= double(ensemble.submodels.size());
  return mean;
}

namespace {

// sum_{u in unlearn} grad l(x_u; theta) -- per-sample gradients, not the mean.
std::vector<double> unlearn_grad_sum(const ModelParams& theta,
                                     const MlpSpec& spec,
                                     const LabeledDataset& data,
                                     const IndexSet& unlearn) {
  LossGrad lg = loss_and_grad(theta, spec, data, unlearn.values());
  for (double& g : lg.grad) g *= double(unlearn.size());
  return lg.grad;
}

}  // namespace

ModelParams influence_unlearn(const ModelParams& theta_t, const MlpSpec& spec,
                              const LabeledDataset& data, const IndexSet& unlearn,
                              double epsilon) {
  if (epsilon < -1.0 || epsilon > 0.0)
    throw ArgumentError("influence_unlearn: epsilon must be in [-1, 0]");
  if (unlearn.empty()) throw ArgumentError("influence_unlearn: empty unlearn set");
  theta_t.check(spec);
  const std::size_t n = data.size();
  const std::size_t m = unlearn.size();
  if (n == m)
    throw ArgumentError("influence_unlearn: n == m leaves no remaining data");
  if (epsilon == 0.0) return theta_t;

  std::vector<double> g = unlearn_grad_sum(theta_t, spec, data, unlearn);
  ModelParams out = theta_t;
  const double scale = epsilon / double(n - m);
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] -= scale * g[i];
  return out;
}

ModelParams newton_unlearn(const ModelParams& theta_t, const MlpSpec& spec,
                           const LabeledDataset& data, const IndexSet& unlearn,
                           double damping) {
  if (damping < 0.0) throw ArgumentError("newton_unlearn: negative damping");
  if (unlearn.empty()) throw ArgumentError("newton_unlearn: empty unlearn set");
  theta_t.check(spec);
  const std::size_t p = spec.param_count();
  if (p > 2000)
    throw ArgumentError("newton_unlearn: model too large for explicit Hessian");
  IndexSet remaining = unlearn.complement(data.size());
  if (remaining.empty())
    throw ArgumentError("newton_unlearn: no remaining data");

  // Hessian of the remaining-data sum loss, by central differences of the
  // analytic gradient. Exact (up to rounding) for quadratic objectives.
  const double h = 1e-5;
  const double sum_scale = double(remaining.size());
  Eigen::MatrixXd H(p, p);
  ModelParams theta = theta_t;
  for (std::size_t i = 0; i < p; ++i) {
    const double orig = theta.values[i];
    theta.values[i] = orig + h;
    LossGrad gp = loss_and_grad(theta, spec, data, remaining.values());
    theta.values[i] = orig - h;
    LossGrad gm = loss_and_grad(theta, spec, data, remaining.values());
    theta.values[i] = orig;
    for (std::size_t j = 0; j < p; ++j)
      H(Eigen::Index(j), Eigen::Index(i)) =
          sum_scale * (gp.grad[j] - gm.grad[j]) / (2.0 * h);
  }
  H = 0.5 * (H + H.transpose()).eval();
  for (std::size_t i = 0; i < p; ++i)
    H(Eigen::Index(i), Eigen::Index(i)) += damping;

  std::vector<double> g = unlearn_grad_sum(theta_t, spec, data, unlearn);
  Eigen::VectorXd b = Eigen::Map<Eigen::VectorXd>(g.data(), Eigen::Index(p));
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("newton_unlearn: Hessian factorization failed");
  Eigen::VectorXd step = ldlt.solve(b);
  double residual = (H * step - b).cwiseAbs().maxCoeff();
  if (!step.allFinite() || residual > 1e-6 * (1.0 + b.cwiseAbs().maxCoeff()))
    throw NumericalError("newton_unlearn: singular system after damping");

  ModelParams out = theta_t;
  for (std::size_t i = 0; i < p; ++i) out.values[i] += step(Eigen::Index(i));
  return out;
}

std::vector<AscentRecord> ascent_unlearn(
    const ModelParams& theta_t, const MlpSpec& spec,
    const LabeledDataset& forget_set,
    const std::vector<const LabeledDataset*>& eval_sets, std::size_t epochs,
    double lr) {
  if (epochs < 1) throw ArgumentError("ascent_unlearn: epochs must be >= 1");
  if (forget_set.size() == 0)
    throw ArgumentError("ascent_unlearn: empty forget set");
  theta_t.check(spec);

  auto eval_all = [&](const ModelParams& p) {
    std::vector<double> accs;
    accs.reserve(eval_sets.size());
    for (const LabeledDataset* ds : eval_sets)
      accs.push_back(accuracy(p, spec, *ds));
    return accs;
  };

  std::vector<AscentRecord> traj;
  ModelParams params = theta_t;
  traj.push_back({0, params, eval_all(params)});
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    LossGrad lg = loss_and_grad(params, spec, forget_set);
    if (!std::isfinite(lg.loss))
      throw DivergenceError(
          "ascent_unlearn: non-finite loss at epoch " + std::to_string(epoch),
          static_cast<long>(epoch));
    for (std::size_t i = 0; i < params.values.size(); ++i)
      params.values[i] += lr * lg.grad[i];
    traj.push_back({epoch, params, eval_all(params)});
  }
  return traj;
}

}  // namespace tape
