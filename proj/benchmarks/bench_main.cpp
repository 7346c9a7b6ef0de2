#include "atl/at_loss.hpp"
#include "atl/audio.hpp"
#include "atl/layers.hpp"
#include "atl/model_zoo.hpp"
#include "atl/rng.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace atl;

namespace {

Tensor random_tensor(const Shape& shape, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t(shape);
    for (double& v : t.values()) v = rng.uniform(0.0, 1.0);
    return t;
}

// args: channels in, channels out, extent
void BM_Conv2dForward(benchmark::State& state) {
    const auto cin = state.range(0), cout = state.range(1), n = state.range(2);
    const Tensor x = random_tensor({4, cin, n, n}, 1), w = random_tensor({cout, cin, 3, 3}, 2), b({cout});
    for (auto _ : state) benchmark::DoNotOptimize(conv2d_forward(x, w, b, 1, 1));
    state.SetItemsProcessed(state.iterations() * 4 * cin * cout * 9 * n * n);
}
BENCHMARK(BM_Conv2dForward)->Args({1, 16, 32})->Args({16, 32, 16})->Args({64, 64, 32});

void BM_Conv2dBackward(benchmark::State& state) {
    const auto cin = state.range(0), cout = state.range(1), n = state.range(2);
    const Tensor x = random_tensor({4, cin, n, n}, 1), w = random_tensor({cout, cin, 3, 3}, 2);
    const Tensor dy = random_tensor({4, cout, n, n}, 3);
    Tensor dx, dw(w.shape()), db({cout});
    for (auto _ : state) {
        conv2d_backward(x, w, dy, 1, 1, &dx, &dw, &db);
        benchmark::DoNotOptimize(dx.data());
    }
    state.SetItemsProcessed(state.iterations() * 2 * 4 * cin * cout * 9 * n * n);
}
BENCHMARK(BM_Conv2dBackward)->Args({1, 16, 32})->Args({16, 32, 16})->Args({64, 64, 32});

// args: channels, extent
void BM_Gram(benchmark::State& state) {
    const auto c = state.range(0), n = state.range(1);
    const Tensor f = random_tensor({13, c, n, n}, 4);
    for (auto _ : state) benchmark::DoNotOptimize(gram(f));
}
BENCHMARK(BM_Gram)->Args({16, 32})->Args({64, 16})->Args({512, 8});

void BM_AtLoss(benchmark::State& state) {
    const auto c = state.range(0), n = state.range(1);
    const Tensor a = random_tensor({13, c, n, n}, 5), p = random_tensor({13, c, n, n}, 6);
    ATConfig cfg;
    cfg.layers = {1};
    cfg.aggregation = state.range(2) == 0 ? Aggregation::gram : Aggregation::mean;
    for (auto _ : state) benchmark::DoNotOptimize(at_loss(a, p, cfg));
}
BENCHMARK(BM_AtLoss)->Args({16, 32, 0})->Args({16, 32, 1})->Args({64, 16, 0});

void BM_Stft(benchmark::State& state) {
    AudioClip clip;
    for (int i = 0; i < 16000; ++i) clip.samples.push_back(std::sin(0.05 * i));
    for (auto _ : state) benchmark::DoNotOptimize(stft_magnitude(clip));
}
BENCHMARK(BM_Stft);

void BM_TinyTrainStep(benchmark::State& state) {
    PresetOptions po;
    po.input_shape = {1, 32, 32};
    Network net = build(vgg_tiny(po), 1);
    const Tensor x = random_tensor({13, 1, 32, 32}, 7);
    const std::vector<int> labels(13, 1);
    Rng rng(3);
    for (auto _ : state) {
        Tape tape;
        ForwardOptions fo;
        fo.mode = Mode::train;
        fo.rng = &rng;
        fo.tape = &tape;
        const auto fwd = net.forward(x, fo);
        const auto loss = total_loss(fwd.output, labels, {});
        net.zero_grad();
        net.backward(tape, loss.grad_logits);
    }
}
BENCHMARK(BM_TinyTrainStep);

}  // namespace
BENCHMARK_MAIN();
