#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "tape/dataset.hpp"
#include "tape/nn.hpp"

namespace tape {

struct UnlearnRequest {
  LabeledDataset dataset;
  IndexSet unlearn;
  ModelParams base_params;
  MlpSpec spec;
  TrainConfig train_cfg;

  void check() const;
};

// Exact baseline: retrains from scratch on D \ D_u with the request's seed.
ModelParams retrain_unlearn(const UnlearnRequest& req);

// SISA-style sharded ensemble. Removed samples keep their slot in
// shard_assignment but are marked with kRemoved.
struct SisaEnsemble {
  static constexpr std::size_t kRemoved = std::numeric_limits<std::size_t>::max();

  std::size_t shard_count = 0;
  std::vector<std::size_t> shard_assignment;  // per original dataset row
  std::vector<ModelParams> submodels;
  MlpSpec spec;
  TrainConfig cfg;
};

// Trains k shard submodels; the default assignment is a seeded random
// equal-size partition. Shard i trains with seed cfg.seed + i.
SisaEnsemble sisa_train(const LabeledDataset& data, std::size_t k,
                        const MlpSpec& spec, const TrainConfig& cfg, Rng& rng);
SisaEnsemble sisa_train(const LabeledDataset& data, const MlpSpec& spec,
                        const TrainConfig& cfg,
                        std::vector<std::size_t> shard_assignment);

// Retrains only the shards that contain erased indices.
SisaEnsemble sisa_unlearn(const SisaEnsemble& ensemble, const UnlearnRequest& req);

// Mean of the submodels' probability vectors.
std::vector<double> sisa_predict(const SisaEnsemble& ensemble,
                                 std::span<const double> x);

// First-order influence removal:
//   theta' = theta_t - epsilon/(n-m) * sum_{u} grad l(x_u; theta_t),
// epsilon in [-1, 0], n = |data|, m = |unlearn|.
ModelParams influence_unlearn(const ModelParams& theta_t, const MlpSpec& spec,
                              const LabeledDataset& data, const IndexSet& unlearn,
                              double epsilon);

// Newton-step removal against the remaining-data sum loss Hessian:
//   solve (H + damping I) step = sum_{u} grad l(x_u; theta_t),
// then return theta_t + step. Parameter count capped at 2000.
ModelParams newton_unlearn(const ModelParams& theta_t, const MlpSpec& spec,
                           const LabeledDataset& data, const IndexSet& unlearn,
                           double damping);

struct AscentRecord {
  std::size_t epoch;
  ModelParams params;
  std::vector<double> accuracies;  // one per eval set, in input order
};

// Gradient ascent on the forget-set loss; records accuracy on every eval
// set per epoch (entry 0 is the pre-ascent state).
std::vector<AscentRecord> ascent_unlearn(
    const ModelParams& theta_t, const MlpSpec& spec,
    const LabeledDataset& forget_set,
    const std::vector<const LabeledDataset*>& eval_sets, std::size_t epochs,
    double lr);

}  // namespace tape
