#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "tape/dataset.hpp"
#include "tape/errors.hpp"
#include "tape/matrix.hpp"
#include "tape/nn.hpp"
#include "tape/reconstructor.hpp"
#include "tape/shadow.hpp"
#include "tape/strategies.hpp"

using namespace tape;

namespace {

struct Pipeline {
  LabeledDataset data;
  MlpSpec spec{{4, 8, 2}, Head::softmax_ce};
  ModelParams theta;
  IndexSet local;
  IndexSet unlearn;
  Reconstructor ae;
};

Pipeline make_pipeline(std::uint64_t seed) {
  Pipeline p;
  SyntheticSpec ds;
  ds.dims = 4;
  ds.samples_per_class = 30;
  ds.seed = seed;
  p.data = gen_synthetic(ds);
  TrainConfig cfg{20, 16, 0.1, seed};
  p.theta = sgd_train(p.spec, p.data, cfg);
  Rng rng(seed);
  p.local = select_local(p.data, 8, rng);
  p.unlearn = select_unlearn(p.local, 2, rng);
  auto corpus = build_shadow_corpus(p.theta, p.spec, p.data, p.local, -1.0);
  RecTrainConfig rcfg;
  rcfg.epochs = 40;
  rcfg.seed = seed;
  rcfg.latent_width = 6;
  rcfg.hidden_width = 16;
  p.ae = train_reconstructor(corpus, rcfg);
  return p;
}

}  // namespace

TEST_CASE("uid division of a single-sample difference is the identity") {
  Pipeline p = make_pipeline(11);
  IndexSet one({p.unlearn[0]});
  PosteriorVector y_t = posteriors(p.theta, p.spec, p.data, p.local);
  ModelParams shadow = shadow_model(p.theta, p.spec, p.data, one, -1.0);
  PosteriorDiff delta =
      posterior_difference(y_t, posteriors(shadow, p.spec, p.data, p.local));

  UidConfig cfg;
  cfg.sigma = 0.5;  // must not matter for m = 1
  auto parts = uid_divide(delta, p.theta, p.spec, p.data, one, cfg);
  REQUIRE(parts.size() == 1);
  CHECK(parts[0].values == delta.values);
}

TEST_CASE("uid shares always sum back to the overall difference") {
  Pipeline p = make_pipeline(21);
  Rng rng(3);
  IndexSet unlearn = select_unlearn(p.local, 4, rng);
  PosteriorVector y_t = posteriors(p.theta, p.spec, p.data, p.local);
  ModelParams shadow = shadow_model(p.theta, p.spec, p.data, unlearn, -1.0);
  PosteriorDiff delta =
      posterior_difference(y_t, posteriors(shadow, p.spec, p.data, p.local));

  for (double sigma : {0.0, 1e-3, 0.1}) {
    UidConfig cfg;
    cfg.sigma = sigma;
    cfg.seed = 17;
    auto parts = uid_divide(delta, p.theta, p.spec, p.data, unlearn, cfg);
    REQUIRE(parts.size() == unlearn.size());
    for (std::size_t i = 0; i < delta.values.size(); ++i) {
      double sum = 0.0;
      for (const PosteriorDiff& part : parts) sum += part.values[i];
      CHECK(std::abs(sum - delta.values[i]) <= 1e-9);
    }
  }
}

TEST_CASE("uid with zero sigma yields exact gradient-norm-weighted shares") {
  Pipeline p = make_pipeline(31);
  PosteriorVector y_t = posteriors(p.theta, p.spec, p.data, p.local);
  ModelParams shadow = shadow_model(p.theta, p.spec, p.data, p.unlearn, -1.0);
  PosteriorDiff delta =
      posterior_difference(y_t, posteriors(shadow, p.spec, p.data, p.local));

  UidConfig cfg;
  cfg.sigma = 0.0;
  auto parts = uid_divide(delta, p.theta, p.spec, p.data, p.unlearn, cfg);

  // Recompute weights: per-sample gradient L2 norms, normalized.
  std::vector<double> weights;
  double total = 0.0;
  for (std::size_t u : p.unlearn) {
    std::vector<std::size_t> row{u};
    LossGrad g = loss_and_grad(p.theta, p.spec, p.data, row);
    double n2 = 0.0;
    for (double v : g.grad) n2 += v * v;
    weights.push_back(std::sqrt(n2));
    total += weights.back();
  }
  REQUIRE(total > 0.0);
  CHECK(weights[0] / total + weights[1] / total == doctest::Approx(1.0));

  for (std::size_t s = 0; s < parts.size(); ++s)
    for (std::size_t i = 0; i < delta.values.size(); ++i)
      CHECK(parts[s].values[i] ==
            doctest::Approx(weights[s] / total * delta.values[i]).epsilon(1e-10));
}

TEST_CASE("uid rejects degenerate inputs") {
  Pipeline p = make_pipeline(41);
  PosteriorDiff delta;
  delta.values.assign(p.local.size() * 2, 0.0);
  delta.local_size = p.local.size();
  delta.num_classes = 2;

  UidConfig cfg;
  CHECK_THROWS_AS(
      uid_divide(delta, p.theta, p.spec, p.data, IndexSet(), cfg),
      ArgumentError);

  // all-zero parameters give zero gradients for every sample
  ModelParams zero;
  zero.values.assign(p.spec.param_count(), 0.0);
  MlpSpec onec{{4, 1}, Head::softmax_ce};
  ModelParams zp;
  zp.values.assign(onec.param_count(), 0.0);
  LabeledDataset mono = p.data;
  mono.num_classes = 1;
  for (int& y : mono.labels) y = 0;
  PosteriorDiff d1;
  d1.values.assign(p.local.size(), 0.1);
  d1.local_size = p.local.size();
  d1.num_classes = 1;
  CHECK_THROWS_AS(uid_divide(d1, zp, onec, mono, p.unlearn, cfg),
                  ArgumentError);

  UidConfig bad;
  bad.sigma = -1.0;
  CHECK_THROWS_AS(bad.check(), ArgumentError);
}

TEST_CASE("uid is deterministic per seed") {
  Pipeline p = make_pipeline(51);
  PosteriorVector y_t = posteriors(p.theta, p.spec, p.data, p.local);
  ModelParams shadow = shadow_model(p.theta, p.spec, p.data, p.unlearn, -1.0);
  PosteriorDiff delta =
      posterior_difference(y_t, posteriors(shadow, p.spec, p.data, p.local));

  UidConfig cfg;
  cfg.sigma = 0.01;
  cfg.seed = 99;
  auto a = uid_divide(delta, p.theta, p.spec, p.data, p.unlearn, cfg);
  auto b = uid_divide(delta, p.theta, p.spec, p.data, p.unlearn, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t s = 0; s < a.size(); ++s)
    CHECK(a[s].values == b[s].values);

  cfg.seed = 100;
  auto c = uid_divide(delta, p.theta, p.spec, p.data, p.unlearn, cfg);
  CHECK(a[0].values != c[0].values);
}

TEST_CASE("udp with zero radius returns the original samples") {
  Pipeline p = make_pipeline(61);
  UdpConfig cfg;
  cfg.alpha = 0.0;
  cfg.restarts = 2;
  cfg.steps = 2;
  cfg.seed = 5;
  Matrix out = udp_perturb(p.theta, p.spec, p.ae, p.data, p.local, p.unlearn,
                           -1.0, cfg);
  REQUIRE(out.rows == p.unlearn.size());
  REQUIRE(out.cols == p.data.dims());
  std::size_t r = 0;
  for (std::size_t u : p.unlearn) {
    for (std::size_t j = 0; j < p.data.dims(); ++j)
      CHECK(out.at(r, j) == doctest::Approx(p.data.features.at(u, j)));
    ++r;
  }
}

TEST_CASE("udp perturbations respect the infinity-norm budget") {
  Pipeline p = make_pipeline(71);
  UdpConfig cfg;
  cfg.alpha = 0.08;
  cfg.restarts = 2;
  cfg.steps = 4;
  cfg.step_size = 0.3;  // large steps so the clamp actually engages
  cfg.seed = 8;
  Matrix out = udp_perturb(p.theta, p.spec, p.ae, p.data, p.local, p.unlearn,
                           -1.0, cfg);
  std::size_t r = 0;
  for (std::size_t u : p.unlearn) {
    for (std::size_t j = 0; j < p.data.dims(); ++j)
      CHECK(std::abs(out.at(r, j) - p.data.features.at(u, j)) <=
            cfg.alpha + 1e-12);
    ++r;
  }

  Matrix again = udp_perturb(p.theta, p.spec, p.ae, p.data, p.local, p.unlearn,
                             -1.0, cfg);
  CHECK(out.data == again.data);
}

TEST_CASE("udp loss matches a hand-built zero-perturbation evaluation") {
  Pipeline p = make_pipeline(81);
  PosteriorVector y_t = posteriors(p.theta, p.spec, p.data, p.local);
  std::size_t u = p.unlearn[0];
  std::vector<double> zero(p.data.dims(), 0.0);
  double got = udp_loss(p.theta, p.spec, p.ae, p.data, p.local, y_t, u, zero,
                        -1.0);

  ModelParams shadow = shadow_model(p.theta, p.spec, p.data, IndexSet({u}), -1.0);
  PosteriorDiff delta =
      posterior_difference(y_t, posteriors(shadow, p.spec, p.data, p.local));
  std::vector<double> x_hat = reconstruct(p.ae, delta);
  double want = 0.0;
  for (std::size_t j = 0; j < x_hat.size(); ++j) {
    double d = x_hat[j] - p.data.features.at(u, j);
    want += d * d;
  }
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("udp config validation and csv export") {
  UdpConfig cfg;
  cfg.alpha = -0.1;
  CHECK_THROWS_AS(cfg.check(), ArgumentError);
  cfg.alpha = 0.1;
  cfg.restarts = 0;
  CHECK_THROWS_AS(cfg.check(), ArgumentError);

  Matrix rows(2, 3);
  rows.data = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  const std::string path = "perturbed_test.csv";
  export_perturbed_csv(IndexSet({4, 9}), rows, path);
  std::ifstream in(path);
  std::string header;
  REQUIRE(std::getline(in, header));
  CHECK(header == "erased_index,x'_0,x'_1,x'_2");
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line.substr(0, 2) == "4,");
  in.close();
  std::remove(path.c_str());
}
