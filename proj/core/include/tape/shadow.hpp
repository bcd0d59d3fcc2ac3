#pragma once

#include <string>
#include <vector>

#include "tape/dataset.hpp"
#include "tape/nn.hpp"

namespace tape {

// Concatenated per-sample class-probability vectors over a local query set,
// in ascending dataset-index order.
struct PosteriorVector {
  std::vector<double> values;
  std::size_t local_size = 0;
  std::size_t num_classes = 0;

  void check() const;
};

// Elementwise difference of two PosteriorVectors; every per-sample block
// sums to ~0 (difference of probability simplexes).
struct PosteriorDiff {
  std::vector<double> values;
  std::size_t local_size = 0;
  std::size_t num_classes = 0;
};

struct ShadowPair {
  PosteriorDiff diff;
  std::vector<double> target;  // the erased sample's features
  std::size_t erased_index;
};

// Queries the model with every local sample, ascending index order.
PosteriorVector posteriors(const ModelParams& theta, const MlpSpec& spec,
                           const LabeledDataset& data, const IndexSet& local);

PosteriorDiff posterior_difference(const PosteriorVector& y_t,
                                   const PosteriorVector& y_u);

// Unlearned shadow model; alias for first-order influence removal.
ModelParams shadow_model(const ModelParams& theta_t, const MlpSpec& spec,
                         const LabeledDataset& data, const IndexSet& erase,
                         double epsilon);

// One single-sample shadow model and posterior difference per local sample.
std::vector<ShadowPair> build_shadow_corpus(const ModelParams& theta_t,
                                            const MlpSpec& spec,
                                            const LabeledDataset& data,
                                            const IndexSet& local,
                                            double epsilon);

// CSV export: erased_index, delta_0..delta_{L-1}, x_0..x_{d-1}.
void export_corpus_csv(const std::vector<ShadowPair>& corpus,
                       const std::string& path);

}  // namespace tape
