#include <benchmark/benchmark.h>

#include <numeric>

#include "tape/dataset.hpp"
#include "tape/nn.hpp"
#include "tape/shadow.hpp"

namespace {

tape::LabeledDataset make_data() {
  tape::SyntheticSpec spec;
  spec.samples_per_class = 200;
  return tape::gen_synthetic(spec);
}

tape::MlpSpec make_spec(const tape::LabeledDataset& data) {
  tape::MlpSpec spec;
  spec.layer_widths = {data.dims(), 16, 16, 16,
                       std::size_t(data.num_classes)};
  return spec;
}

void BM_mlp_forward(benchmark::State& state) {
  tape::LabeledDataset data = make_data();
  tape::MlpSpec spec = make_spec(data);
  tape::Rng rng(1);
  tape::ModelParams params = tape::init_params(spec, rng);
  std::size_t r = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        tape::mlp_forward(params, spec, data.features.row(r)));
    r = (r + 1) % data.size();
  }
}
BENCHMARK(BM_mlp_forward);

void BM_loss_and_grad(benchmark::State& state) {
  tape::LabeledDataset data = make_data();
  tape::MlpSpec spec = make_spec(data);
  tape::Rng rng(1);
  tape::ModelParams params = tape::init_params(spec, rng);
  std::vector<std::size_t> batch(std::size_t(state.range(0)));
  std::iota(batch.begin(), batch.end(), 0);
  for (auto _ : state)
    benchmark::DoNotOptimize(tape::loss_and_grad(params, spec, data, batch));
}
BENCHMARK(BM_loss_and_grad)->Arg(16)->Arg(64);

void BM_shadow_corpus(benchmark::State& state) {
  tape::LabeledDataset data = make_data();
  tape::MlpSpec spec = make_spec(data);
  tape::Rng rng(1);
  tape::ModelParams params = tape::init_params(spec, rng);
  tape::Rng sel(2);
  tape::IndexSet local =
      tape::select_local(data, std::size_t(state.range(0)), sel);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        tape::build_shadow_corpus(params, spec, data, local, -1.0));
}
BENCHMARK(BM_shadow_corpus)->Arg(20)->Arg(40);

}  // namespace

BENCHMARK_MAIN();
