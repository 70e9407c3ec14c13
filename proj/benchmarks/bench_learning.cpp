#include <benchmark/benchmark.h>

#include "shieldkit/envs/watertank.hpp"
#include "shieldkit/game.hpp"
#include "shieldkit/learn.hpp"
#include "shieldkit/shield.hpp"

using namespace shieldkit;

namespace {

// Range 0: 0 unshielded, 1 preemptive, 2 post-posed.
void BM_TankEpisodes(benchmark::State& state) {
  const envs::WaterTank env;
  const auto g = game::build_safety_game(env.specification(), env.abstraction());
  const auto w = game::solve(g);
  const auto pre = shield::extract_preemptive(g, w);
  const auto post = shield::extract_postposed(g, w);
  const auto mode = static_cast<learn::ShieldMode>(state.range(0));
  const shield::Shield* s = state.range(0) == 0 ? nullptr : state.range(0) == 1 ? &pre : &post;

  learn::LearnerConfig config;
  config.initial_value = 100;
  learn::TrainOptions options;
  options.episodes = 100;
  std::size_t steps = 0;
  for (auto _ : state) {
    learn::ValueTable table(env.actions().size(), config.initial_value);
    const auto log = learn::train(env, s, mode, config, options, table);
    for (const auto& e : log.episodes) steps += e.steps;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(steps));
  state.SetLabel(learn::to_string(mode));
}

}  // namespace

BENCHMARK(BM_TankEpisodes)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
