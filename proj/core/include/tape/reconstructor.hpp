#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tape/nn.hpp"
#include "tape/shadow.hpp"

namespace tape {

// Encoder/decoder pair mapping a posterior difference to a reconstructed
// sample. The latent vector is the encoder's (ReLU-activated) output, so
// decode(encode(x)) matches the jointly trained stack exactly.
struct Reconstructor {
  MlpSpec encoder_spec;
  ModelParams encoder_params;
  MlpSpec decoder_spec;
  ModelParams decoder_params;

  std::size_t input_width() const { return encoder_spec.input_width(); }
  std::size_t output_width() const { return decoder_spec.output_width(); }
  std::size_t latent_width() const { return encoder_spec.output_width(); }
  void check() const;
};

struct RecTrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 8;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  std::size_t latent_width = 16;
  std::size_t hidden_width = 64;

  void check() const;
};

// Trains encoder+decoder jointly with SGD on mean ||AE(delta) - x||^2.
Reconstructor train_reconstructor(const std::vector<ShadowPair>& corpus,
                                  const RecTrainConfig& cfg);

std::vector<double> encode(const Reconstructor& ae,
                           std::span<const double> delta);
std::vector<double> decode(const Reconstructor& ae, std::span<const double> mu);
std::vector<double> reconstruct(const Reconstructor& ae,
                                const PosteriorDiff& delta);
std::vector<double> reconstruct(const Reconstructor& ae,
                                std::span<const double> delta);

// Cosine similarity (x_hat . x) / (||x_hat|| ||x||).
double reconstruction_similarity(std::span<const double> x_hat,
                                 std::span<const double> x);
// Unweighted mean cosine over pairs.
double reconstruction_similarity(const Matrix& x_hat, const Matrix& x);

// Reconstructor checkpoint: tape-ckpt-1 with two embedded models.
void save_reconstructor(const std::string& path, const Reconstructor& ae,
                        std::uint64_t seed);
Reconstructor load_reconstructor(const std::string& path);

}  // namespace tape
