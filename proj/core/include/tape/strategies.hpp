#pragma once

#include <cstdint>
#include <vector>

#include "tape/dataset.hpp"
#include "tape/nn.hpp"
#include "tape/reconstructor.hpp"
#include "tape/shadow.hpp"

namespace tape {

struct UdpConfig {
  double alpha = 0.1;       // infinity-norm perturbation limit
  std::size_t restarts = 3;
  std::size_t steps = 20;   // inner optimization steps per restart
  double step_size = 0.05;
  std::uint64_t seed = 0;

  void check() const;
};

struct UidConfig {
  double sigma = 1e-3;  // per-coordinate deviation scale
  std::uint64_t seed = 0;

  void check() const;
};

// Unlearned-data perturbation with random restarts. For each erased sample,
// searches an infinity-norm-bounded perturbation that minimizes the AE
// reconstruction loss of the single-sample shadow pipeline, and keeps the
// restart with the lowest final loss (ties break to the lowest index).
// Returns the perturbed samples, one row per erased index in ascending order.
Matrix udp_perturb(const ModelParams& theta_t, const MlpSpec& spec,
                   const Reconstructor& ae, const LabeledDataset& data,
                   const IndexSet& local, const IndexSet& unlearn,
                   double epsilon, const UdpConfig& cfg);

// Reconstruction loss ||AE(delta_{\(x+dp)}) - (x+dp)||^2 of one erased
// sample under a candidate perturbation; shared with udp_perturb's descent.
double udp_loss(const ModelParams& theta_t, const MlpSpec& spec,
                const Reconstructor& ae, const LabeledDataset& data,
                const IndexSet& local, const PosteriorVector& y_t,
                std::size_t erased_index, std::span<const double> perturbation,
                double epsilon);

// Splits a multi-sample posterior difference into per-sample shares with
// gradient-norm weights, Gaussian deviation sigma, and an exact-sum residual
// redistribution. Outputs follow ascending unlearn-index order.
std::vector<PosteriorDiff> uid_divide(const PosteriorDiff& delta_overall,
                                      const ModelParams& theta_t,
                                      const MlpSpec& spec,
                                      const LabeledDataset& data,
                                      const IndexSet& unlearn,
                                      const UidConfig& cfg);

// CSV export: erased_index, x'_0..x'_{d-1}.
void export_perturbed_csv(const IndexSet& unlearn, const Matrix& perturbed,
                          const std::string& path);

}  // namespace tape
