#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "tape/dataset.hpp"
#include "tape/errors.hpp"
#include "tape/nn.hpp"
#include "tape/shadow.hpp"

using namespace tape;

namespace {

LabeledDataset blobs(std::size_t per_class, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.samples_per_class = per_class;
  spec.dims = 4;
  spec.seed = seed;
  return gen_synthetic(spec);
}

}  // namespace

TEST_CASE("posteriors of an all-zero net are uniform") {
  LabeledDataset data = blobs(6, 3);
  MlpSpec spec{{4, 5, 2}, Head::softmax_ce};
  ModelParams zero;
  zero.values.assign(spec.param_count(), 0.0);
  IndexSet local({0, 2, 9});
  PosteriorVector y = posteriors(zero, spec, data, local);
  CHECK(y.values.size() == 6);
  CHECK(y.local_size == 3);
  CHECK(y.num_classes == 2);
  for (double v : y.values) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("posterior vector length is local_size * num_classes") {
  SyntheticSpec ds;
  ds.num_classes = 10;
  ds.dims = 6;
  ds.samples_per_class = 40;  // 400 samples total
  ds.seed = 7;
  LabeledDataset data = gen_synthetic(ds);
  MlpSpec spec{{6, 8, 10}, Head::softmax_ce};
  Rng rng(1);
  ModelParams theta = init_params(spec, rng);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < 300; ++i) idx.push_back(i);
  PosteriorVector y = posteriors(theta, spec, data, IndexSet(std::move(idx)));
  CHECK(y.values.size() == 3000);
  for (std::size_t s = 0; s < 300; ++s) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 10; ++c) sum += y.values[s * 10 + c];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("posteriors follow ascending dataset-index order") {
  LabeledDataset data = blobs(5, 12);
  MlpSpec spec{{4, 3, 2}, Head::softmax_ce};
  Rng rng(2);
  ModelParams theta = init_params(spec, rng);
  IndexSet local({1, 4, 8});
  PosteriorVector y = posteriors(theta, spec, data, local);
  std::size_t slot = 0;
  for (std::size_t i : local) {
    std::vector<double> p = mlp_forward(theta, spec, data.features.row(i));
    CHECK(y.values[slot * 2] == p[0]);
    CHECK(y.values[slot * 2 + 1] == p[1]);
    ++slot;
  }
  MlpSpec reg{{4, 2}, Head::mse};
  CHECK_THROWS_AS(posteriors(theta, reg, data, local), ArgumentError);
  CHECK_THROWS_AS(posteriors(theta, spec, data, IndexSet()), ArgumentError);
}

TEST_CASE("posterior difference arithmetic and simplex block sums") {
  LabeledDataset data = blobs(8, 9);
  MlpSpec spec{{4, 6, 2}, Head::softmax_ce};
  Rng rng(3);
  ModelParams a = init_params(spec, rng);
  ModelParams b = init_params(spec, rng);
  IndexSet local({0, 3, 5, 11});
  PosteriorVector ya = posteriors(a, spec, data, local);
  PosteriorVector yb = posteriors(b, spec, data, local);

  PosteriorDiff d = posterior_difference(ya, yb);
  CHECK(d.values.size() == ya.values.size());
  for (std::size_t i = 0; i < d.values.size(); ++i)
    CHECK(d.values[i] == ya.values[i] - yb.values[i]);

  // Same model twice: exactly zero.
  PosteriorDiff z = posterior_difference(ya, ya);
  for (double v : z.values) CHECK(v == 0.0);

  // Each per-sample block is a difference of two probability simplices.
  for (std::size_t s = 0; s < d.local_size; ++s) {
    double sum = 0.0;
    for (std::size_t c = 0; c < d.num_classes; ++c)
      sum += d.values[s * d.num_classes + c];
    CHECK(std::abs(sum) <= 1e-9);
  }

  PosteriorVector short_y = ya;
  short_y.values.pop_back();
  short_y.local_size = 3;
  CHECK_THROWS_AS(posterior_difference(ya, short_y), ShapeError);
}

TEST_CASE("shadow corpus has one pair per local sample") {
  LabeledDataset data = blobs(10, 42);
  MlpSpec spec{{4, 6, 2}, Head::softmax_ce};
  TrainConfig cfg{10, 8, 0.1, 42};
  ModelParams theta = sgd_train(spec, data, cfg);
  IndexSet local({0, 2, 5, 7, 13, 19});

  auto corpus = build_shadow_corpus(theta, spec, data, local, -1.0);
  CHECK(corpus.size() == local.size());
  std::size_t slot = 0;
  for (std::size_t i : local) {
    CHECK(corpus[slot].erased_index == i);
    CHECK(corpus[slot].diff.values.size() == local.size() * 2);
    CHECK(corpus[slot].target.size() == data.dims());
    for (std::size_t j = 0; j < data.dims(); ++j)
      CHECK(corpus[slot].target[j] == data.features.at(i, j));
    ++slot;
  }

  // Distinct erased samples give distinct difference signatures.
  std::set<std::vector<double>> uniq;
  for (const ShadowPair& p : corpus) uniq.insert(p.diff.values);
  CHECK(uniq.size() == corpus.size());
}

TEST_CASE("epsilon zero collapses every shadow difference to zero") {
  LabeledDataset data = blobs(6, 17);
  MlpSpec spec{{4, 4, 2}, Head::softmax_ce};
  TrainConfig cfg{5, 8, 0.1, 5};
  ModelParams theta = sgd_train(spec, data, cfg);
  IndexSet local({0, 1, 4});
  auto corpus = build_shadow_corpus(theta, spec, data, local, 0.0);
  for (const ShadowPair& p : corpus)
    for (double v : p.diff.values) CHECK(v == 0.0);

  CHECK_THROWS_AS(build_shadow_corpus(theta, spec, data, IndexSet({3}), -1.0),
                  ArgumentError);  // needs at least two local samples
}

TEST_CASE("corpus csv export") {
  LabeledDataset data = blobs(4, 23);
  MlpSpec spec{{4, 3, 2}, Head::softmax_ce};
  TrainConfig cfg{4, 4, 0.1, 6};
  ModelParams theta = sgd_train(spec, data, cfg);
  IndexSet local({1, 6});
  auto corpus = build_shadow_corpus(theta, spec, data, local, -0.5);

  const std::string path = "corpus_test.csv";
  export_corpus_csv(corpus, path);
  std::ifstream in(path);
  std::string header;
  REQUIRE(std::getline(in, header));
  CHECK(header ==
        "erased_index,delta_0,delta_1,delta_2,delta_3,x_0,x_1,x_2,x_3");
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 2);
  in.close();
  std::remove(path.c_str());
}
