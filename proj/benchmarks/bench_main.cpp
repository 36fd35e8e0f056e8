#include <benchmark/benchmark.h>

#include "qnrl/gridworld.hpp"
#include "qnrl/lbfgs.hpp"
#include "qnrl/qnet.hpp"
#include "qnrl/rng.hpp"
#include "qnrl/trainer.hpp"

using namespace qnrl;

namespace {

ParamVector random_vector(Rng& rng, std::size_t n) {
    ParamVector v(n);
    for (double& x : v) x = standard_normal(rng);
    return v;
}

// Pairs with y = s + small noise so that every pair is accepted.
LbfgsMemory filled_memory(std::size_t m, std::size_t n, Rng& rng) {
    LbfgsMemory mem(m, n);
    while (mem.size() < m) {
        ParamVector s = random_vector(rng, n);
        ParamVector y = s;
        for (double& v : y) v += 0.1 * standard_normal(rng);
        mem.push(std::move(s), std::move(y));
    }
    return mem;
}

void BM_TwoLoop(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const auto n = static_cast<std::size_t>(state.range(1));
    Rng rng(1);
    const LbfgsMemory mem = filled_memory(m, n, rng);
    const ParamVector g = random_vector(rng, n);
    for (auto _ : state) benchmark::DoNotOptimize(two_loop(mem, g));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(4 * m * n));
}
BENCHMARK(BM_TwoLoop)->Args({20, 1000})->Args({40, 10000})->Args({80, 100000});

void BM_GradQ(benchmark::State& state) {
    NetworkSpec spec;
    const auto width = static_cast<std::size_t>(state.range(0));
    spec.layer_sizes = {36, width, width, 4};
    const ParamVector w = init_weights(spec, 1);
    std::vector<double> x(36, 0.0);
    x[7] = 1.0;
    for (auto _ : state) benchmark::DoNotOptimize(grad_q(spec, w, x, 2));
}
BENCHMARK(BM_GradQ)->Arg(16)->Arg(64)->Arg(256);

void BM_OverlapGradient(benchmark::State& state) {
    const GridWorld env = default_gridworld();
    NetworkSpec spec;
    spec.layer_sizes = {env.num_cells(), 32, kNumActions};
    const auto b = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    ExperienceMemory memory(b);
    for (std::size_t i = 0; i < b; ++i) {
        const Cell c = env.cell(uniform_index(rng, env.num_cells()));
        const auto a = static_cast<Action>(uniform_index(rng, kNumActions));
        memory.push({features(env, c), static_cast<std::size_t>(a), env.step_reward, features(env, env.move(c, a)),
                     false});
    }
    const ParamVector w = init_weights(spec, 3);
    for (auto _ : state) benchmark::DoNotOptimize(overlap_gradient(spec, w, w, memory, 0.95));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(b));
}
BENCHMARK(BM_OverlapGradient)->Arg(512)->Arg(2048);

void BM_ValueIteration(benchmark::State& state) {
    const GridWorld env = default_gridworld();
    for (auto _ : state) benchmark::DoNotOptimize(value_iteration(env, 0.95, 1e-10));
}
BENCHMARK(BM_ValueIteration);

}  // namespace

BENCHMARK_MAIN();
