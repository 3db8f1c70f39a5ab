#include <benchmark/benchmark.h>

#include <random>

#include "msnet/losses.hpp"
#include "msnet/model.hpp"
#include "msnet/ops.hpp"

namespace {

msnet::Tensor random_tensor(msnet::Shape shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return msnet::Tensor::randn(std::move(shape), rng);
}

void BM_Conv2dForward(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    msnet::Tensor input = random_tensor({1, 16, size, size}, 1);
    msnet::Tensor weight = random_tensor({16, 16, 3, 3}, 2);
    msnet::Tensor bias = random_tensor({16}, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(msnet::conv2d(input, weight, bias, 1, 1));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(size) * size * 16 * 16 * 9);
}
BENCHMARK(BM_Conv2dForward)->Arg(32)->Arg(64);

void BM_ConvBackward(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    msnet::Tensor input = random_tensor({1, 16, size, size}, 1);
    input.set_requires_grad(true);
    msnet::Tensor weight = random_tensor({16, 16, 3, 3}, 2);
    weight.set_requires_grad(true);
    msnet::Tensor bias = random_tensor({16}, 3);
    for (auto _ : state) {
        msnet::Tensor loss = msnet::sum(msnet::conv2d(input, weight, bias, 1, 1));
        msnet::backward(loss);
        input.zero_grad();
        weight.zero_grad();
    }
}
BENCHMARK(BM_ConvBackward)->Arg(32)->Arg(64);

void BM_ModelForward(benchmark::State& state) {
    msnet::ModelConfig config;
    config.input_size = static_cast<int>(state.range(0));
    config.channels = 16;
    msnet::ModelParams params = msnet::init_params(config);
    params.freeze();
    msnet::Tensor image = random_tensor({1, 3, config.input_size, config.input_size}, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(msnet::forward(image, params));
    }
}
BENCHMARK(BM_ModelForward)->Arg(64)->Arg(96);

void BM_TotalLoss(benchmark::State& state) {
    msnet::ModelConfig config;
    msnet::ModelParams params = msnet::init_params(config);
    msnet::LossNetParams lossnet = msnet::LossNetParams::init(7);
    msnet::LossConfig loss_cfg;
    msnet::Tensor image = random_tensor({1, 3, 64, 64}, 5);
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> bit(0, 1);
    std::vector<double> gv(64 * 64);
    for (double& v : gv) v = bit(rng);
    msnet::Tensor gt = msnet::Tensor::from_values({1, 1, 64, 64}, std::move(gv));
    for (auto _ : state) {
        msnet::Tensor pred = msnet::forward(image, params);
        msnet::TotalLoss loss = msnet::total_loss(pred, gt, &lossnet, loss_cfg, true);
        msnet::backward(loss.value);
        params.zero_grad();
    }
}
BENCHMARK(BM_TotalLoss);

}  // namespace

int main(int argc, char** argv) {
    benchmark::Initialize(&argc, argv);
    benchmark::RunSpecifiedBenchmarks();
    return 0;
}
