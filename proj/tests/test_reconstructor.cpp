#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "tape/dataset.hpp"
#include "tape/errors.hpp"
#include "tape/reconstructor.hpp"
#include "tape/shadow.hpp"

using namespace tape;

namespace {

std::vector<ShadowPair> seed42_corpus(std::size_t local_size, double* out_loss = nullptr) {
  SyntheticSpec ds;  // defaults: 2 classes, d=8, 200 per class, seed 42
  LabeledDataset data = gen_synthetic(ds);
  Rng rng(42);
  IndexSet local = select_local(data, local_size, rng);
  MlpSpec spec{{8, 16, 2}, Head::softmax_ce};
  TrainConfig cfg{30, 16, 0.1, 42};
  ModelParams theta = sgd_train(spec, data, cfg);
  (void)out_loss;
  return build_shadow_corpus(theta, spec, data, local, -1.0);
}

double corpus_mse(const Reconstructor& ae, const std::vector<ShadowPair>& corpus) {
  double total = 0.0;
  for (const ShadowPair& p : corpus) {
    std::vector<double> x_hat = reconstruct(ae, p.diff);
    for (std::size_t j = 0; j < x_hat.size(); ++j) {
      double d = x_hat[j] - p.target[j];
      total += d * d;
    }
  }
  return total / double(corpus.size());
}

}  // namespace

TEST_CASE("cosine similarity basics") {
  std::vector<double> a{1.0, 0.0, 0.0};
  std::vector<double> b{0.0, 1.0, 0.0};
  std::vector<double> c{2.0, 0.0, 0.0};
  std::vector<double> d{-3.0, 0.0, 0.0};
  CHECK(reconstruction_similarity(a, a) == doctest::Approx(1.0));
  CHECK(reconstruction_similarity(a, b) == doctest::Approx(0.0));
  CHECK(reconstruction_similarity(a, c) == doctest::Approx(1.0));  // scale invariant
  CHECK(reconstruction_similarity(a, d) == doctest::Approx(-1.0));
  CHECK(reconstruction_similarity(b, a) ==
        doctest::Approx(reconstruction_similarity(a, b)));

  std::vector<double> zero{0.0, 0.0, 0.0};
  CHECK(reconstruction_similarity(a, zero) == 0.0);
  CHECK(reconstruction_similarity(zero, a) == 0.0);
  CHECK_THROWS_AS(reconstruction_similarity(zero, zero), ArgumentError);
  std::vector<double> shorter{1.0, 0.0};
  CHECK_THROWS_AS(reconstruction_similarity(a, shorter), ShapeError);
}

TEST_CASE("cosine similarity stays in [-1, 1]") {
  Rng rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> u(6), v(6);
    for (double& x : u) x = rng.normal();
    for (double& x : v) x = rng.normal();
    double s = reconstruction_similarity(u, v);
    CHECK(s >= -1.0 - 1e-12);
    CHECK(s <= 1.0 + 1e-12);
  }
}

TEST_CASE("mean cosine over matrix rows") {
  Matrix x_hat(2, 2), x(2, 2);
  x_hat.data = {1.0, 0.0, 0.0, 1.0};
  x.data = {1.0, 0.0, 1.0, 0.0};  // cosines 1 and 0
  CHECK(reconstruction_similarity(x_hat, x) == doctest::Approx(0.5));
  Matrix bad(1, 2);
  CHECK_THROWS_AS(reconstruction_similarity(x_hat, bad), ShapeError);
}

TEST_CASE("all-zero reconstructor outputs zeros") {
  Reconstructor ae;
  ae.encoder_spec = MlpSpec{{4, 3, 2}, Head::mse};
  ae.decoder_spec = MlpSpec{{2, 3, 4}, Head::mse};
  ae.encoder_params.values.assign(ae.encoder_spec.param_count(), 0.0);
  ae.decoder_params.values.assign(ae.decoder_spec.param_count(), 0.0);
  std::vector<double> delta{0.3, -0.3, 0.1, -0.1};
  std::vector<double> mu = encode(ae, delta);
  CHECK(mu.size() == 2);
  for (double v : mu) CHECK(v == 0.0);
  std::vector<double> out = reconstruct(ae, delta);
  CHECK(out.size() == 4);
  for (double v : out) CHECK(v == 0.0);

  std::vector<double> wrong{1.0, 2.0};
  CHECK_THROWS_AS(encode(ae, wrong), ShapeError);
}

TEST_CASE("latent activations are never negative") {
  auto corpus = seed42_corpus(10);
  RecTrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 1;
  cfg.latent_width = 6;
  cfg.hidden_width = 12;
  Reconstructor ae = train_reconstructor(corpus, cfg);
  for (const ShadowPair& p : corpus) {
    std::vector<double> mu = encode(ae, p.diff.values);
    for (double v : mu) CHECK(v >= 0.0);
    // decode(encode(.)) is the same computation as reconstruct(.)
    std::vector<double> via_latent = decode(ae, mu);
    std::vector<double> direct = reconstruct(ae, p.diff);
    for (std::size_t j = 0; j < direct.size(); ++j)
      CHECK(via_latent[j] == direct[j]);
  }
}

TEST_CASE("training the reconstructor does not mutate the corpus") {
  auto corpus = seed42_corpus(8);
  auto snapshot = corpus;
  RecTrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 2;
  train_reconstructor(corpus, cfg);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(corpus[i].diff.values == snapshot[i].diff.values);
    CHECK(corpus[i].target == snapshot[i].target);
  }
}

TEST_CASE("near-zero learning rate leaves the parameters near their init") {
  auto corpus = seed42_corpus(8);
  RecTrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 1e-300;
  cfg.seed = 7;
  Reconstructor a = train_reconstructor(corpus, cfg);
  cfg.epochs = 30;
  Reconstructor b = train_reconstructor(corpus, cfg);
  for (std::size_t i = 0; i < a.encoder_params.values.size(); ++i)
    CHECK(a.encoder_params.values[i] ==
          doctest::Approx(b.encoder_params.values[i]).epsilon(1e-12));
}

TEST_CASE("reconstruction loss drops by at least half over training") {
  auto corpus = seed42_corpus(40);
  RecTrainConfig cfg;
  cfg.seed = 42;

  RecTrainConfig init_cfg = cfg;
  init_cfg.epochs = 200;
  init_cfg.learning_rate = 1e-300;  // effectively the initial parameters
  Reconstructor before = train_reconstructor(corpus, init_cfg);
  Reconstructor after = train_reconstructor(corpus, cfg);

  double loss_before = corpus_mse(before, corpus);
  double loss_after = corpus_mse(after, corpus);
  CHECK(loss_after <= 0.5 * loss_before);
}

TEST_CASE("reconstructor training is deterministic") {
  auto corpus = seed42_corpus(10);
  RecTrainConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 9;
  Reconstructor a = train_reconstructor(corpus, cfg);
  Reconstructor b = train_reconstructor(corpus, cfg);
  CHECK(a.encoder_params.values == b.encoder_params.values);
  CHECK(a.decoder_params.values == b.decoder_params.values);

  CHECK_THROWS_AS(train_reconstructor({}, cfg), ArgumentError);
}

TEST_CASE("reconstructor checkpoint round trip") {
  auto corpus = seed42_corpus(6);
  RecTrainConfig cfg;
  cfg.epochs = 4;
  cfg.seed = 13;
  Reconstructor ae = train_reconstructor(corpus, cfg);

  const std::string path = "recon_test.json";
  save_reconstructor(path, ae, 13);
  Reconstructor back = load_reconstructor(path);
  CHECK(back.encoder_spec.layer_widths == ae.encoder_spec.layer_widths);
  CHECK(back.decoder_spec.layer_widths == ae.decoder_spec.layer_widths);
  CHECK(back.encoder_params.values == ae.encoder_params.values);
  CHECK(back.decoder_params.values == ae.decoder_params.values);
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_reconstructor("no_such_file.json"), ParseError);
}
