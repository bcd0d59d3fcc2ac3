#include "tape/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "tape/errors.hpp"
#include "tape/unlearn.hpp"

namespace tape {

void UdpConfig::check() const {
  if (alpha < 0.0) throw ArgumentError("UdpConfig: negative alpha");
  if (restarts < 1) throw ArgumentError("UdpConfig: restarts must be >= 1");
  if (steps < 1) throw ArgumentError("UdpConfig: steps must be >= 1");
  if (step_size <= 0.0) throw ArgumentError("UdpConfig: step size must be positive");
}

void UidConfig::check() const {
  if (sigma < 0.0) throw ArgumentError("UidConfig: negative sigma");
}

double udp_loss(const ModelParams& theta_t, const MlpSpec& spec,
                const Reconstructor& ae, const LabeledDataset& data,
                const IndexSet& local, const PosteriorVector& y_t,
                std::size_t erased_index, std::span<const double> perturbation,
                double epsilon) {
  // Shadow model that unlearns the perturbed sample: a single-sample
  // influence step with the perturbed features in place.
  LabeledDataset perturbed = data;
  auto row = perturbed.features.row(erased_index);
  for (std::size_t j = 0; j < row.size(); ++j) row[j] += perturbation[j];

  ModelParams theta_p = influence_unlearn(theta_t, spec, perturbed,
                                          IndexSet({erased_index}), epsilon);
  PosteriorVector y_p = posteriors(theta_p, spec, perturbed, local);
  PosteriorDiff delta = posterior_difference(y_t, y_p);
  std::vector<double> x_hat = reconstruct(ae, delta);

  double loss = 0.0;
  for (std::size_t j = 0; j < x_hat.size(); ++j) {
    double d = x_hat[j] - perturbed.features.at(erased_index, j);
    loss += d * d;
  }
  return loss;
}

namespace {

void clamp_inf(std::vector<double>& v, double alpha) {
  for (double& x : v) x = std::min(alpha, std::max(-alpha, x));
}

}  // namespace

Matrix udp_perturb(const ModelParams& theta_t, const MlpSpec& spec,
                   const Reconstructor& ae, const LabeledDataset& data,
                   const IndexSet& local, const IndexSet& unlearn,
                   double epsilon, const UdpConfig& cfg) {
  cfg.check();
  if (unlearn.empty()) throw ArgumentError("udp_perturb: empty unlearn set");
  const std::size_t dims = data.dims();
  if (ae.output_width() != dims)
    throw ShapeError("udp_perturb: reconstructor output width mismatch");

  PosteriorVector y_t = posteriors(theta_t, spec, data, local);
  const double fd_h = 1e-4;

  Matrix out(unlearn.size(), dims);
  for (std::size_t u = 0; u < unlearn.size(); ++u) {
    const std::size_t idx = unlearn[u];
    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<double> best_delta(dims, 0.0);

    for (std::size_t r = 0; r < cfg.restarts; ++r) {
      Rng rng(derive_seed(cfg.seed, idx * cfg.restarts + r));
      std::vector<double> dp(dims);
      for (double& v : dp) v = cfg.alpha * rng.normal();
      clamp_inf(dp, cfg.alpha);

      double loss = 0.0;
      for (std::size_t step = 0; step < cfg.steps; ++step) {
        loss = udp_loss(theta_t, spec, ae, data, local, y_t, idx, dp, epsilon);
        if (!std::isfinite(loss))
          throw DivergenceError("udp_perturb: non-finite loss at restart " +
                                    std::to_string(r) + " step " +
                                    std::to_string(step),
                                static_cast<long>(step));
        // Forward finite differences on the perturbation coordinates.
        std::vector<double> grad(dims);
        for (std::size_t j = 0; j < dims; ++j) {
          double orig = dp[j];
          dp[j] = orig + fd_h;
          grad[j] = (udp_loss(theta_t, spec, ae, data, local, y_t, idx, dp,
                              epsilon) -
                     loss) /
                    fd_h;
          dp[j] = orig;
        }
        for (std::size_t j = 0; j < dims; ++j)
          dp[j] -= cfg.step_size * grad[j];
        clamp_inf(dp, cfg.alpha);
      }
      loss = udp_loss(theta_t, spec, ae, data, local, y_t, idx, dp, epsilon);
      if (loss < best_loss) {
        best_loss = loss;
        best_delta = dp;
      }
    }
    for (std::size_t j = 0; j < dims; ++j) {
      double x = data.features.at(idx, j);
      double v = x + best_delta[j];
      // x + delta can round one ulp past the budget; nudge back so the
      // emitted row itself satisfies |x' - x| <= alpha.
      while (std::abs(v - x) > cfg.alpha) v = std::nextafter(v, x);
      out.at(u, j) = v;
    }
  }
  return out;
}

std::vector<PosteriorDiff> uid_divide(const PosteriorDiff& delta_overall,
                                      const ModelParams& theta_t,
                                      const MlpSpec& spec,
                                      const LabeledDataset& data,
                                      const IndexSet& unlearn,
                                      const UidConfig& cfg) {
  cfg.check();
  if (unlearn.empty()) throw ArgumentError("uid_divide: empty unlearn set");
  const std::size_t m = unlearn.size();
  if (m == 1) return {delta_overall};  // the sum constraint forces it

  std::vector<double> weights(m);
  double total = 0.0;
  for (std::size_t u = 0; u < m; ++u) {
    std::size_t one[] = {unlearn[u]};
    LossGrad lg = loss_and_grad(theta_t, spec, data, one);
    weights[u] = norm2(lg.grad);
    total += weights[u];
  }
  if (total == 0.0)
    throw ArgumentError("uid_divide: all per-sample gradients are zero");
  for (double& w : weights) w /= total;

  const std::size_t len = delta_overall.values.size();
  Rng rng(cfg.seed);
  std::vector<PosteriorDiff> shares(m);
  for (std::size_t u = 0; u < m; ++u) {
    shares[u].local_size = delta_overall.local_size;
    shares[u].num_classes = delta_overall.num_classes;
    shares[u].values.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
      double noise = cfg.sigma > 0.0 ? cfg.sigma * rng.normal() : 0.0;
      shares[u].values[i] = weights[u] * delta_overall.values[i] + noise;
    }
  }
  // Redistribute the residual so the shares sum to delta_overall exactly.
  for (std::size_t i = 0; i < len; ++i) {
    double sum = 0.0;
    for (std::size_t u = 0; u < m; ++u) sum += shares[u].values[i];
    double residual = delta_overall.values[i] - sum;
    for (std::size_t u = 0; u < m; ++u)
      shares[u].values[i] += weights[u] * residual;
  }
  return shares;
}

void export_perturbed_csv(const IndexSet& unlearn, const Matrix& perturbed,
                          const std::string& path) {
  if (unlearn.size() != perturbed.rows)
    throw ShapeError("export_perturbed_csv: row count mismatch");
  std::ofstream f(path);
  if (!f) throw ArgumentError("export_perturbed_csv: cannot open " + path);
  f << "erased_index";
  for (std::size_t j = 0; j < perturbed.cols; ++j) f << ",x'_" << j;
  f << "\n";
  char buf[32];
  for (std::size_t r = 0; r < perturbed.rows; ++r) {
    f << unlearn[r];
    for (std::size_t j = 0; j < perturbed.cols; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", perturbed.at(r, j));
      f << ',' << buf;
    }
    f << "\n";
  }
}

}  // namespace tape
