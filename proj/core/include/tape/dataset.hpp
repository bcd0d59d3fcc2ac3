#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tape/matrix.hpp"
#include "tape/rng.hpp"

namespace tape {

// Sorted, unique indices into a dataset.
class IndexSet {
 public:
  IndexSet() = default;
  // Sorts its input; duplicates are an error.
  explicit IndexSet(std::vector<std::size_t> indices);

  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  std::size_t operator[](std::size_t i) const { return indices_[i]; }
  const std::vector<std::size_t>& values() const { return indices_; }
  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

  bool contains(std::size_t i) const;
  bool subset_of(const IndexSet& other) const;
  // All indices in [0, n) not in this set.
  IndexSet complement(std::size_t n) const;
  // Set difference this \ other.
  IndexSet minus(const IndexSet& other) const;

 private:
  std::vector<std::size_t> indices_;
};

struct LabeledDataset {
  Matrix features;             // samples x dims
  std::vector<int> labels;     // class indices, one per row
  int num_classes = 0;

  std::size_t size() const { return features.rows; }
  std::size_t dims() const { return features.cols; }
  void check() const;

  LabeledDataset subset(const IndexSet& idx) const;
};

struct SyntheticSpec {
  int num_classes = 2;
  std::size_t dims = 8;
  std::size_t samples_per_class = 200;
  double class_center_spread = 0.25;
  double noise_sigma = 0.05;
  std::uint64_t seed = 42;
};

struct TriggerSpec {
  IndexSet patch_indices;     // feature dimensions to overwrite
  double patch_value = 1.0;
  int target_label = 0;
};

// Gaussian blobs, one seeded random center per class, features clamped to
// [0,1]. Rows are ordered class-major and labels are balanced.
LabeledDataset gen_synthetic(const SyntheticSpec& spec);
LabeledDataset gen_synthetic(const SyntheticSpec& spec, Rng& rng);

// IDX (MNIST-style) ingestion; pixel bytes scaled to [0,1].
LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path);

// Uniform sample of `count` dataset rows without replacement.
IndexSet select_local(const LabeledDataset& data, std::size_t count, Rng& rng);
// Uniform subset of `ess` indices from the local set.
IndexSet select_unlearn(const IndexSet& local, std::size_t ess, Rng& rng);

// Overwrites patch dimensions of the target rows with patch_value; flips
// their labels to target_label iff flip_labels. When inf_limit is set, the
// written value is clamped so |patched - original| <= inf_limit per coord.
LabeledDataset apply_trigger(const LabeledDataset& data, const IndexSet& targets,
                             const TriggerSpec& trig, bool flip_labels,
                             std::optional<double> inf_limit = std::nullopt);

// CSV export with header `label,f0,f1,...`.
void export_dataset_csv(const LabeledDataset& data, const std::string& path);

}  // namespace tape
