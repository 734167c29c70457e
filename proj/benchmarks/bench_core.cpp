#include <benchmark/benchmark.h>

#include "xsdepth/losses.hpp"
#include "xsdepth/networks.hpp"
#include "xsdepth/training.hpp"

using namespace xsdepth;

namespace {

Tensor rand_tensor(std::vector<long> shape, uint64_t seed) {
  Rng rng(seed);
  return random_uniform(std::move(shape), rng);
}

NetworkConfig bench_config() {
  NetworkConfig cfg;
  cfg.input_width = 64;
  cfg.input_height = 48;
  return cfg;
}

void BM_WarpForward(benchmark::State& state) {
  Tensor src = rand_tensor({3, 48, 64}, 1);
  Rng rng(2);
  Tensor disp({1, 48, 64});
  for (long i = 0; i < disp.numel(); ++i) disp[i] = rng.uniform(0.0, 0.25);
  for (auto _ : state) {
    Tensor out = warp_horizontal_tensor(src, disp, WarpDirection::to_left);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_WarpForward);

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const long c = state.range(0);
  Tensor input = rand_tensor({c, 24, 32}, 3);
  Rng rng(4);
  Tensor weight = random_normal({c, c, 3, 3}, rng, 0.0, 0.05);
  for (auto _ : state) {
    Var x = parameter(input);
    Var w = parameter(weight);
    Var loss = mean_all(conv2d(x, w, nullptr, 1, 1));
    backward(loss);
    benchmark::DoNotOptimize(x->grad.data());
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(16)->Arg(64);

void BM_SsimLoss(benchmark::State& state) {
  Var a = constant(rand_tensor({3, 48, 64}, 5));
  Var b = constant(rand_tensor({3, 48, 64}, 6));
  const LossWeights w{};
  const SsimConfig cfg{};
  for (auto _ : state) {
    Var loss = photometric_loss(a, b, w, cfg);
    benchmark::DoNotOptimize(loss->value.item());
  }
}
BENCHMARK(BM_SsimLoss);

void BM_EncodeDecode(benchmark::State& state) {
  NetworkBundle bundle = build_networks(bench_config(), 7);
  Var img = constant(rand_tensor({3, 48, 64}, 8));
  for (auto _ : state) {
    std::vector<Var> pyr = bundle.encoder_vis->forward(img);
    std::vector<Var> disps = bundle.depth_decoder.forward(pyr);
    benchmark::DoNotOptimize(disps[0]->value.data());
  }
}
BENCHMARK(BM_EncodeDecode);

void BM_VisStep(benchmark::State& state) {
  TrainConfig cfg;
  cfg.network = bench_config();
  NetworkBundle bundle = build_networks(cfg.network, 9);
  OptimizerSet opt = make_optimizers(bundle, cfg);
  SynthParams p;
  p.seed = 10;
  RenderedScene scene = render_scene(p, "train", 0);
  VisStereoSample sample{scene.vis_left, scene.vis_right};
  for (auto _ : state) {
    LossBreakdown b = vis_step(bundle, opt, sample, cfg);
    benchmark::DoNotOptimize(b["total"]);
  }
}
BENCHMARK(BM_VisStep);

void BM_TransferStep(benchmark::State& state) {
  TrainConfig cfg;
  cfg.network = bench_config();
  NetworkBundle bundle = build_networks(cfg.network, 11);
  OptimizerSet opt = make_optimizers(bundle, cfg);
  SynthParams p;
  p.seed = 12;
  RenderedScene s0 = render_scene(p, "train", 0);
  RenderedScene s1 = render_scene(p, "train", 1);
  CrossSpectrumSample target{s0.tir_left, s0.vis_right, std::nullopt};
  VisStereoSample source{s1.vis_left, s1.vis_right};
  for (auto _ : state) {
    LossBreakdown b = transfer_step(bundle, opt, target, source, cfg);
    benchmark::DoNotOptimize(b["total"]);
  }
}
BENCHMARK(BM_TransferStep);

}  // namespace

BENCHMARK_MAIN();
