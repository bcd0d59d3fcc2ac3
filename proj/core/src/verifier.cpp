#include "tape/verifier.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "tape/errors.hpp"

namespace tape {

VerificationDataset build_verification_set(
    const Reconstructor& ae,
    const std::map<std::size_t, PosteriorDiff>& per_sample_diffs,
    const LabeledDataset& data, const IndexSet& local, const IndexSet& unlearn,
    bool dedupe_positives) {
  if (!unlearn.subset_of(local))
    throw ArgumentError("build_verification_set: unlearn not within local");
  IndexSet rest = local.minus(unlearn);
  if (rest.empty())
    throw ArgumentError("build_verification_set: local \\ unlearn is empty");

  VerificationDataset out;
  out.feature_width = data.dims();
  for (std::size_t u : unlearn) {
    auto it = per_sample_diffs.find(u);
    if (it == per_sample_diffs.end())
      throw ArgumentError("build_verification_set: missing diff for index " +
                          std::to_string(u));
    std::vector<double> rec = reconstruct(ae, it->second);
    auto xu = data.features.row(u);
    bool positive_added = false;
    for (std::size_t i : rest) {
      if (!dedupe_positives || !positive_added) {
        out.entries.push_back({rec, {xu.begin(), xu.end()}, 1});
        positive_added = true;
      }
      auto xi = data.features.row(i);
      out.entries.push_back({rec, {xi.begin(), xi.end()}, 0});
    }
  }
  return out;
}

VerifierModel train_verifier(const VerificationDataset& dset,
                             const TrainConfig& cfg, std::size_t hidden_width) {
  if (dset.entries.empty())
    throw ArgumentError("train_verifier: empty verification set");
  bool has_pos = false, has_neg = false;
  for (const VerificationEntry& e : dset.entries)
    (e.label == 1 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw ArgumentError("train_verifier: need both labels present");

  const std::size_t d = dset.feature_width;
  LabeledDataset train;
  train.num_classes = 2;
  train.features = Matrix(dset.entries.size(), 2 * d);
  train.labels.reserve(dset.entries.size());
  for (std::size_t r = 0; r < dset.entries.size(); ++r) {
    const VerificationEntry& e = dset.entries[r];
    if (e.reconstructed.size() != d || e.candidate.size() != d)
      throw ShapeError("train_verifier: entry width mismatch");
    std::copy(e.reconstructed.begin(), e.reconstructed.end(),
              train.features.row(r).begin());
    std::copy(e.candidate.begin(), e.candidate.end(),
              train.features.row(r).begin() + long(d));
    train.labels.push_back(e.label);
  }

  VerifierModel v;
  v.spec.layer_widths = {2 * d, hidden_width, 2};
  v.spec.head = Head::softmax_ce;
  v.params = sgd_train(v.spec, train, cfg);
  return v;
}

double verifiability(const VerifierModel& v, const Reconstructor& ae,
                     const std::map<std::size_t, PosteriorDiff>& per_sample_diffs,
                     const LabeledDataset& data, const IndexSet& unlearn) {
  if (unlearn.empty()) throw ArgumentError("verifiability: empty unlearn set");
  const std::size_t d = data.dims();
  std::size_t hits = 0;
  for (std::size_t u : unlearn) {
    auto it = per_sample_diffs.find(u);
    if (it == per_sample_diffs.end())
      throw ArgumentError("verifiability: missing diff for index " +
                          std::to_string(u));
    std::vector<double> input = reconstruct(ae, it->second);
    auto xu = data.features.row(u);
    input.insert(input.end(), xu.begin(), xu.end());
    if (input.size() != 2 * d)
      throw ShapeError("verifiability: input width mismatch");
    std::vector<double> p = mlp_forward(v.params, v.spec, input);
    if (p[1] > p[0]) ++hits;
  }
  return double(hits) / double(unlearn.size());
}

void export_verification_csv(const VerificationDataset& dset,
                             const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ArgumentError("export_verification_csv: cannot open " + path);
  f << "label";
  for (std::size_t j = 0; j < dset.feature_width; ++j) f << ",r" << j;
  for (std::size_t j = 0; j < dset.feature_width; ++j) f << ",c" << j;
  f << "\n";
  char buf[32];
  for (const VerificationEntry& e : dset.entries) {
    f << e.label;
    for (double v : e.reconstructed) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      f << ',' << buf;
    }
    for (double v : e.candidate) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      f << ',' << buf;
    }
    f << "\n";
  }
}

}  // namespace tape
