#include <benchmark/benchmark.h>

#include "pmseg/losses.hpp"
#include "pmseg/ops.hpp"
#include "pmseg/rng.hpp"
#include "pmseg/synthetic.hpp"
#include "pmseg/train.hpp"
#include "pmseg/unet.hpp"

using namespace pmseg;

namespace {

Tensor filled(Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

// Args: channels in/out, spatial extent.
void BM_Conv2dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const Tensor x = filled({c, n, n}, 1), w = filled({c, c, 3, 3}, 2), b = filled({c}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d_forward(x, w, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c * c * 9 * n * n));
}
BENCHMARK(BM_Conv2dForward)->Args({4, 64})->Args({8, 64})->Args({16, 32})->Args({32, 16});

void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const Tensor x = filled({c, n, n}, 1), w = filled({c, c, 3, 3}, 2), b = filled({c}, 3);
  for (auto _ : state) {
    Tape t;
    const NodeId xi = t.variable(x), wi = t.variable(w), bi = t.variable(b);
    t.backward(ops::sum(t, ops::conv2d(t, xi, wi, bi)));
    benchmark::DoNotOptimize(t.grad(wi));
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({8, 64})->Args({16, 32});

void BM_MaskedLoss(benchmark::State& state) {
  const LossConfig loss = parse_loss_preset("xent_plus+0.1*dice_soft");
  const Tensor p = ops::channel_softmax_forward(filled({4, 64, 64}, 4));
  LabelMap y(64, 64);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<std::uint8_t>(i % 4);
  const PresenceArray k(std::vector<bool>{false, true, false, true});
  for (auto _ : state) {
    Tape t;
    const NodeId pi = t.variable(p);
    t.backward(sample_loss(t, loss, pi, y, k));
    benchmark::DoNotOptimize(t.grad(pi));
  }
}
BENCHMARK(BM_MaskedLoss);

// One optimizer step's forward and backward pass on a batch of 64x64 images.
void BM_TrainingStep(benchmark::State& state) {
  SyntheticSpec spec = default_synthetic_spec();
  const auto samples = generate_synthetic(spec, 15);
  NetConfig net;
  net.levels = 2;
  net.base_channels = static_cast<std::size_t>(state.range(0));
  const NetParams params = init_xavier(net);
  const LossConfig loss = parse_loss_preset("xent_or");
  std::vector<const Sample*> batch;
  for (const auto& s : samples) batch.push_back(&s);
  std::vector<Tensor> grads;
  for (auto _ : state) benchmark::DoNotOptimize(batch_loss_and_grads(net, loss, params, batch, &grads));
}
BENCHMARK(BM_TrainingStep)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
