#include <benchmark/benchmark.h>

#include "droute/instance.hpp"
#include "droute/policy.hpp"
#include "droute/solvers.hpp"
#include "droute/trainer.hpp"

namespace {

using namespace droute;

Instance uniform_instance(std::size_t n, std::uint64_t seed = 7) {
  return generate(DistributionSpec{}, n, seed);
}

void BM_GreedyRollout(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PolicyParams params = PolicyParams::init(PolicyConfig::desk(ProblemType::tsp), 1);
  const AnyInstance inst = uniform_instance(n);
  const RolloutOptions opts{DecodeMode::greedy, default_starts(n), 0};
  for (auto _ : state) benchmark::DoNotOptimize(rollout(params, inst, opts));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GreedyRollout)->Arg(10)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_ReinforceGradient(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PolicyParams params = PolicyParams::init(PolicyConfig::desk(ProblemType::tsp), 1);
  const AnyInstance inst = uniform_instance(n);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(reinforce_gradient(params, inst, default_starts(n), ++seed));
}
BENCHMARK(BM_ReinforceGradient)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  std::vector<GroupSpec> specs(2);
  specs[0] = {DistributionSpec{}, 32, 20, 1, std::nullopt};
  specs[1] = {DistributionSpec{DistributionKind::cluster}, 8, 20, 2, std::nullopt};
  const GroupedDataset data = build_group_dataset(specs);
  TrainConfig cfg;
  cfg.policy = PolicyConfig::desk(ProblemType::tsp);
  cfg.batch_size = static_cast<std::size_t>(state.range(0));
  const PolicyParams init = PolicyParams::init(cfg.policy, 3);
  TrainState s = TrainState::fresh(init, data, cfg);
  for (auto _ : state) {
    cfg.outer_steps = s.outer_step + 1;
    s = resume_training(std::move(s), cfg, data);
  }
}
BENCHMARK(BM_TrainStep)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_HeldKarp(benchmark::State& state) {
  const Instance inst = uniform_instance(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(held_karp(inst));
}
BENCHMARK(BM_HeldKarp)->DenseRange(8, 13, 1)->Unit(benchmark::kMillisecond);

void BM_TwoOpt(benchmark::State& state) {
  const Instance inst = uniform_instance(static_cast<std::size_t>(state.range(0)));
  const Tour start = nearest_neighbor(inst);
  for (auto _ : state) benchmark::DoNotOptimize(two_opt(inst, start));
}
BENCHMARK(BM_TwoOpt)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_SavingsCvrp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const CvrpInstance inst = attach_vrp(uniform_instance(n), default_capacity(n), 5);
  for (auto _ : state) benchmark::DoNotOptimize(cvrp_reference(inst));
}
BENCHMARK(BM_SavingsCvrp)->Arg(20)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
