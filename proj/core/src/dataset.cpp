#include "tape/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "tape/errors.hpp"

namespace tape {

IndexSet::IndexSet(std::vector<std::size_t> indices)
    : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end())
    throw ArgumentError("IndexSet: duplicate index");
}

bool IndexSet::contains(std::size_t i) const {
  return std::binary_search(indices_.begin(), indices_.end(), i);
}

bool IndexSet::subset_of(const IndexSet& other) const {
  return std::includes(other.indices_.begin(), other.indices_.end(),
                       indices_.begin(), indices_.end());
}

IndexSet IndexSet::complement(std::size_t n) const {
  std::vector<std::size_t> out;
  out.reserve(n - indices_.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (k < indices_.size() && indices_[k] == i) {
      ++k;
    } else {
      out.push_back(i);
    }
  }
  return IndexSet(std::move(out));
}

IndexSet IndexSet::minus(const IndexSet& other) const {
  std::vector<std::size_t> out;
  std::set_difference(indices_.begin(), indices_.end(),
                      other.indices_.begin(), other.indices_.end(),
                      std::back_inserter(out));
  return IndexSet(std::move(out));
}

void LabeledDataset::check() const {
  features.check();
  if (labels.size() != features.rows)
    throw ShapeError("LabeledDataset: label count does not match rows");
  for (int y : labels)
    if (y < 0 || y >= num_classes)
      throw ArgumentError("LabeledDataset: label out of range");
}

LabeledDataset LabeledDataset::subset(const IndexSet& idx) const {
  LabeledDataset out;
  out.num_classes = num_classes;
  out.features = Matrix(idx.size(), dims());
  out.labels.reserve(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::size_t src = idx[r];
    if (src >= size()) throw ArgumentError("subset: index out of range");
    std::copy(features.row(src).begin(), features.row(src).end(),
              out.features.row(r).begin());
    out.labels.push_back(labels[src]);
  }
  return out;
}

LabeledDataset gen_synthetic(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  return gen_synthetic(spec, rng);
}

LabeledDataset gen_synthetic(const SyntheticSpec& spec, Rng& rng) {
  if (spec.num_classes < 1 || spec.dims == 0 || spec.samples_per_class == 0 ||
      spec.class_center_spread <= 0.0 || spec.noise_sigma < 0.0)
    throw ArgumentError("gen_synthetic: invalid spec");

  const std::size_t n =
      spec.samples_per_class * static_cast<std::size_t>(spec.num_classes);
  LabeledDataset out;
  out.num_classes = spec.num_classes;
  out.features = Matrix(n, spec.dims);
  out.labels.resize(n);

  Matrix centers(static_cast<std::size_t>(spec.num_classes), spec.dims);
  for (double& v : centers.data)
    v = 0.5 + spec.class_center_spread * rng.normal();

  auto clamp01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };
  std::size_t r = 0;
  for (int c = 0; c < spec.num_classes; ++c) {
    for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++r) {
      for (std::size_t j = 0; j < spec.dims; ++j)
        out.features.at(r, j) = clamp01(
            centers.at(static_cast<std::size_t>(c), j) +
            spec.noise_sigma * rng.normal());
      out.labels[r] = c;
    }
  }
  return out;
}

namespace {

std::uint32_t read_be32(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4))
    throw ParseError("IDX: truncated header in " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw ParseError("IDX: cannot open " + images_path);
  if (read_be32(img, images_path) != 0x00000803u)
    throw ParseError("IDX: bad image magic in " + images_path);
  std::uint32_t count = read_be32(img, images_path);
  std::uint32_t h = read_be32(img, images_path);
  std::uint32_t w = read_be32(img, images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw ParseError("IDX: cannot open " + labels_path);
  if (read_be32(lab, labels_path) != 0x00000801u)
    throw ParseError("IDX: bad label magic in " + labels_path);
  std::uint32_t lab_count = read_be32(lab, labels_path);
  if (lab_count != count)
    throw ParseError("IDX: image/label count mismatch (" +
                     std::to_string(count) + " vs " +
                     std::to_string(lab_count) + ")");

  LabeledDataset out;
  const std::size_t dims = std::size_t(h) * std::size_t(w);
  out.features = Matrix(count, dims);
  out.labels.resize(count);

  std::vector<unsigned char> buf(dims);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!img.read(reinterpret_cast<char*>(buf.data()),
                  static_cast<std::streamsize>(dims)))
      throw ParseError("IDX: truncated image payload in " + images_path);
    for (std::size_t j = 0; j < dims; ++j)
      out.features.at(i, j) = buf[j] / 255.0;
    char y;
    if (!lab.get(y))
      throw ParseError("IDX: truncated label payload in " + labels_path);
    out.labels[i] = static_cast<unsigned char>(y);
  }
  out.num_classes =
      1 + *std::max_element(out.labels.begin(), out.labels.end());
  return out;
}

IndexSet select_local(const LabeledDataset& data, std::size_t count, Rng& rng) {
  if (count > data.size())
    throw ArgumentError("select_local: count exceeds dataset size");
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  rng.shuffle(all);
  all.resize(count);
  return IndexSet(std::move(all));
}

IndexSet select_unlearn(const IndexSet& local, std::size_t ess, Rng& rng) {
  if (ess > local.size())
    throw ArgumentError("select_unlearn: ess exceeds local size");
  std::vector<std::size_t> pool = local.values();
  rng.shuffle(pool);
  pool.resize(ess);
  return IndexSet(std::move(pool));
}

LabeledDataset apply_trigger(const LabeledDataset& data, const IndexSet& targets,
                             const TriggerSpec& trig, bool flip_labels,
                             std::optional<double> inf_limit) {
  if (trig.patch_indices.empty())
    throw ArgumentError("apply_trigger: empty patch");
  if (!targets.empty() && targets[targets.size() - 1] >= data.size())
    throw ArgumentError("apply_trigger: target index out of range");
  for (std::size_t j : trig.patch_indices)
    if (j >= data.dims()) throw ArgumentError("apply_trigger: patch dim out of range");
  if (trig.target_label < 0 || trig.target_label >= data.num_classes)
    throw ArgumentError("apply_trigger: bad target label");

  LabeledDataset out = data;
  for (std::size_t r : targets) {
    for (std::size_t j : trig.patch_indices) {
      double v = trig.patch_value;
      if (inf_limit) {
        double orig = data.features.at(r, j);
        v = std::min(orig + *inf_limit, std::max(orig - *inf_limit, v));
      }
      out.features.at(r, j) = v;
    }
    if (flip_labels) out.labels[r] = trig.target_label;
  }
  return out;
}

void export_dataset_csv(const LabeledDataset& data, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ArgumentError("export_dataset_csv: cannot open " + path);
  f << "label";
  for (std::size_t j = 0; j < data.dims(); ++j) f << ",f" << j;
  f << "\n";
  char buf[32];
  for (std::size_t r = 0; r < data.size(); ++r) {
    f << data.labels[r];
    for (std::size_t j = 0; j < data.dims(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.features.at(r, j));
      f << ',' << buf;
    }
    f << "\n";
  }
}

}  // namespace tape
