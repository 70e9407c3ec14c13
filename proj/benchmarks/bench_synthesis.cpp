#include <benchmark/benchmark.h>

#include <memory>

#include "shieldkit/envs/grid.hpp"
#include "shieldkit/envs/watertank.hpp"
#include "shieldkit/game.hpp"
#include "shieldkit/shield.hpp"
#include "shieldkit/verify.hpp"

using namespace shieldkit;

namespace {

std::unique_ptr<envs::Environment> make(int which) {
  switch (which) {
    case 0: return std::make_unique<envs::WaterTank>();
    case 1: return std::make_unique<envs::GridWorld>(envs::default_map_9x9(), "grid9x9");
    default: return std::make_unique<envs::GridWorld>(envs::default_map_15x9(), "grid15x9");
  }
}

const char* kNames[] = {"watertank", "grid9x9", "grid15x9"};

void BM_BuildGame(benchmark::State& state) {
  const auto env = make(static_cast<int>(state.range(0)));
  const auto& spec = env->specification();
  const auto& abs = env->abstraction();
  for (auto _ : state) {
    auto g = game::build_safety_game(spec, abs);
    benchmark::DoNotOptimize(g);
  }
  state.SetLabel(kNames[state.range(0)]);
}

void BM_Solve(benchmark::State& state) {
  const auto env = make(static_cast<int>(state.range(0)));
  const auto g = game::build_safety_game(env->specification(), env->abstraction());
  for (auto _ : state) {
    auto w = game::solve(g);
    benchmark::DoNotOptimize(w);
  }
  state.SetLabel(kNames[state.range(0)]);
}

void BM_ExtractPreemptive(benchmark::State& state) {
  const auto env = make(static_cast<int>(state.range(0)));
  const auto g = game::build_safety_game(env->specification(), env->abstraction());
  const auto w = game::solve(g);
  for (auto _ : state) {
    auto s = shield::extract_preemptive(g, w);
    benchmark::DoNotOptimize(s);
  }
  state.SetLabel(kNames[state.range(0)]);
}

void BM_VerifyExhaustive(benchmark::State& state) {
  const auto env = make(static_cast<int>(state.range(0)));
  const auto g = game::build_safety_game(env->specification(), env->abstraction());
  const auto s = shield::extract_preemptive(g, game::solve(g));
  for (auto _ : state) {
    auto r = shield::verify_shield(s, env->specification(), env->abstraction());
    benchmark::DoNotOptimize(r);
  }
  state.SetLabel(kNames[state.range(0)]);
}

}  // namespace

BENCHMARK(BM_BuildGame)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Solve)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExtractPreemptive)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_VerifyExhaustive)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
