#pragma once

#include <map>
#include <string>
#include <vector>

#include "tape/dataset.hpp"
#include "tape/nn.hpp"
#include "tape/reconstructor.hpp"
#include "tape/shadow.hpp"

namespace tape {

struct VerificationEntry {
  std::vector<double> reconstructed;
  std::vector<double> candidate;
  int label;  // 1 = erased-sample pair, 0 = other local sample
};

struct VerificationDataset {
  std::vector<VerificationEntry> entries;
  std::size_t feature_width = 0;
};

// Binary classifier over concatenated (reconstructed || candidate) inputs.
struct VerifierModel {
  MlpSpec spec;
  ModelParams params;
};

// Cartesian loop over (x_u in unlearn) x (x_i in local \ unlearn): one
// positive (AE(delta_u), x_u; 1) and one negative (AE(delta_u), x_i; 0)
// per pair. When dedupe_positives is set, the repeated positive is added
// only once per x_u.
VerificationDataset build_verification_set(
    const Reconstructor& ae,
    const std::map<std::size_t, PosteriorDiff>& per_sample_diffs,
    const LabeledDataset& data, const IndexSet& local, const IndexSet& unlearn,
    bool dedupe_positives = false);

VerifierModel train_verifier(const VerificationDataset& dset,
                             const TrainConfig& cfg,
                             std::size_t hidden_width = 32);

// Fraction of erased samples whose (AE(delta_u), x_u) pair the verifier
// labels 1.
double verifiability(const VerifierModel& v, const Reconstructor& ae,
                     const std::map<std::size_t, PosteriorDiff>& per_sample_diffs,
                     const LabeledDataset& data, const IndexSet& unlearn);

// CSV export: label, r0..r{d-1}, c0..c{d-1}.
void export_verification_csv(const VerificationDataset& dset,
                             const std::string& path);

}  // namespace tape
