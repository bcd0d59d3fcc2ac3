#include "tape/shadow.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "tape/errors.hpp"
#include "tape/unlearn.hpp"

namespace tape {

void PosteriorVector::check() const {
  if (values.size() != local_size * num_classes)
    throw ShapeError("PosteriorVector: length mismatch");
  for (std::size_t s = 0; s < local_size; ++s) {
    double sum = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c)
      sum += values[s * num_classes + c];
    if (std::fabs(sum - 1.0) > 1e-9)
      throw ShapeError("PosteriorVector: block does not sum to 1");
  }
}

PosteriorVector posteriors(const ModelParams& theta, const MlpSpec& spec,
                           const LabeledDataset& data, const IndexSet& local) {
  if (local.empty()) throw ArgumentError("posteriors: empty local set");
  if (spec.head != Head::softmax_ce)
    throw ArgumentError("posteriors: model must have a probability head");
  PosteriorVector out;
  out.local_size = local.size();
  out.num_classes = spec.output_width();
  out.values.reserve(out.local_size * out.num_classes);
  for (std::size_t i : local) {
    std::vector<double> p = mlp_forward(theta, spec, data.features.row(i));
    out.values.insert(out.values.end(), p.begin(), p.end());
  }
  return out;
}

PosteriorDiff posterior_difference(const PosteriorVector& y_t,
                                   const PosteriorVector& y_u) {
  if (y_t.local_size != y_u.local_size || y_t.num_classes != y_u.num_classes ||
      y_t.values.size() != y_u.values.size())
    throw ShapeError("posterior_difference: shape mismatch");
  PosteriorDiff d;
  d.local_size = y_t.local_size;
  d.num_classes = y_t.num_classes;
  d.values.resize(y_t.values.size());
  for (std::size_t i = 0; i < d.values.size(); ++i)
    d.values[i] = y_t.values[i] - y_u.values[i];
  return d;
}

ModelParams shadow_model(const ModelParams& theta_t, const MlpSpec& spec,
                         const LabeledDataset& data, const IndexSet& erase,
                         double epsilon) {
  return influence_unlearn(theta_t, spec, data, erase, epsilon);
}

std::vector<ShadowPair> build_shadow_corpus(const ModelParams& theta_t,
                                            const MlpSpec& spec,
                                            const LabeledDataset& data,
                                            const IndexSet& local,
                                            double epsilon) {
  if (local.size() < 2)
    throw ArgumentError("build_shadow_corpus: need at least 2 local samples");
  PosteriorVector y_t = posteriors(theta_t, spec, data, local);

  std::vector<ShadowPair> corpus;
  corpus.reserve(local.size());
  for (std::size_t i : local) {
    ModelParams theta_i =
        shadow_model(theta_t, spec, data, IndexSet({i}), epsilon);
    PosteriorVector y_i = posteriors(theta_i, spec, data, local);
    ShadowPair pair;
    pair.diff = posterior_difference(y_t, y_i);
    auto row = data.features.row(i);
    pair.target.assign(row.begin(), row.end());
    pair.erased_index = i;
    corpus.push_back(std::move(pair));
  }
  return corpus;
}

void export_corpus_csv(const std::vector<ShadowPair>& corpus,
                       const std::string& path) {
  if (corpus.empty()) throw ArgumentError("export_corpus_csv: empty corpus");
  std::ofstream f(path);
  if (!f) throw ArgumentError("export_corpus_csv: cannot open " + path);
  f << "erased_index";
  for (std::size_t i = 0; i < corpus.front().diff.values.size(); ++i)
    f << ",delta_" << i;
  for (std::size_t i = 0; i < corpus.front().target.size(); ++i)
    f << ",x_" << i;
  f << "\n";
  char buf[32];
  for (const ShadowPair& p : corpus) {
    f << p.erased_index;
    for (double v : p.diff.values) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      f << ',' << buf;
    }
    for (double v : p.target) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      f << ',' << buf;
    }
    f << "\n";
  }
}

}  // namespace tape
