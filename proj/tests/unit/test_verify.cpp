#include <gtest/gtest.h>

#include "json.hpp"
#include "oracles.hpp"
#include "shieldkit/automata.hpp"
#include "shieldkit/envs/grid.hpp"
#include "shieldkit/errors.hpp"
#include "shieldkit/envs/watertank.hpp"
#include "shieldkit/game.hpp"
#include "shieldkit/shield.hpp"
#include "shieldkit/verify.hpp"

using namespace shieldkit;
using namespace shieldkit::shield;
using automata::SafetyAutomaton;

namespace {

struct Setup {
  SafetyAutomaton spec;
  SafetyAutomaton abs;
  Shield shield;
};

Setup synthesize(const SafetyAutomaton& spec, const SafetyAutomaton& abs) {
  const auto g = game::build_safety_game(spec, abs);
  return {spec, abs, extract_preemptive(g, game::solve(g))};
}

Setup synthesize(const envs::Environment& env) { return synthesize(env.specification(), env.abstraction()); }

// Replays a counterexample on the automata: the abstraction stays safe and
// the specification fails exactly at the end.
void expect_replays_to_failure(const Counterexample& c, const Setup& s) {
  automata::Word w;
  if (s.shield.order() == game::TurnOrder::EnvironmentFirst) {
    for (const auto& step : c.trace) w.push_back({step.label, step.action});
  } else {
    ASSERT_GE(c.trace.size(), 2u);
    EXPECT_EQ(c.trace.back().action, kNoAction);
    for (std::size_t k = 0; k + 1 < c.trace.size(); ++k) w.push_back({c.trace[k + 1].label, c.trace[k].action});
  }
  ASSERT_FALSE(w.empty());
  EXPECT_TRUE(s.abs.accepts(w));
  EXPECT_EQ(s.spec.first_violation(w), std::optional<std::size_t>(w.size() - 1));
}

SafetyAutomaton random_automaton(Rng& rng, std::size_t n, const Alphabet& labels, const Alphabet& actions,
                                 double unsafe_share, automata::Role role, automata::LetterTiming timing) {
  automata::AutomatonTable t;
  t.labels = labels;
  t.actions = actions;
  t.num_states = n;
  t.safe.assign(n, true);
  for (std::size_t s = 1; s < n; ++s) t.safe[s] = !rng.bernoulli(unsafe_share);
  t.delta.resize(n * labels.size() * actions.size());
  for (auto& d : t.delta) d = static_cast<StateId>(rng.below(n));
  t.role = role;
  t.timing = timing;
  return SafetyAutomaton::from_table(std::move(t));
}

}  // namespace

TEST(Verify, ShippedShieldsAreClean) {
  const envs::WaterTank tank;
  const envs::GridWorld g9(envs::default_map_9x9());
  const envs::GridWorld g15(envs::default_map_15x9());
  for (const envs::Environment* env : std::initializer_list<const envs::Environment*>{&tank, &g9, &g15}) {
    const auto s = synthesize(*env);
    const auto r = verify_shield(s.shield, s.spec, s.abs);
    EXPECT_TRUE(r.clean()) << env->name();
    EXPECT_TRUE(r.oracle_checked);
    EXPECT_FALSE(r.partial);
    EXPECT_GT(r.decisions_checked, 0u);
  }
}

TEST(Verify, RandomSynthesizedShieldsAreClean) {
  Rng rng(41);
  const Alphabet labels{"x", "y", "z"};
  const Alphabet actions{"a", "b"};
  int checked = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const auto timing = trial % 2 ? automata::LetterTiming::ActionThenOutcome : automata::LetterTiming::SameStep;
    const auto spec = random_automaton(rng, 2 + rng.below(5), labels, actions, 0.3,
                                       automata::Role::Specification, timing);
    const auto abs = automata::demote_offenders(random_automaton(rng, 2 + rng.below(5), labels, actions, 0.2,
                                                                 automata::Role::Abstraction, timing));
    if (!abs.is_safe(abs.initial())) continue;
    const auto g = game::build_safety_game(spec, abs);
    const auto w = game::solve(g);
    if (!w.realizable) continue;
    const auto sh = extract_preemptive(g, w);
    const auto r = verify_shield(sh, spec, abs);
    EXPECT_TRUE(r.clean()) << "trial " << trial;
    ++checked;
  }
  EXPECT_GT(checked, 30);
}

TEST(Verify, RemovedMenuEntryIsAnOverRestriction) {
  const auto s = synthesize(envs::GridWorld(envs::default_map_9x9()));
  for (const auto& d : oracle::reachable_decisions(s.shield)) {
    const ActionSet m = s.shield.menu(d.shield_state, d.label);
    if (d.paradise || count(m) < 2) continue;
    const ActionId dropped = to_list(m).front();
    const auto broken = s.shield.with_menu(d.shield_state, d.label, m & ~action_bit(dropped));
    const auto r = verify_shield(broken, s.spec, s.abs);
    ASSERT_FALSE(r.over_restrictions.empty());
    bool found = false;
    for (const auto& e : r.over_restrictions) {
      EXPECT_EQ(e.shield_state, d.shield_state);
      found = found || (e.label == d.label && e.action == dropped);
    }
    EXPECT_TRUE(found);
    EXPECT_TRUE(r.violations.empty());
    EXPECT_TRUE(r.unsafe_allowances.empty());
    return;
  }
  FAIL() << "no decision with two allowed actions";
}

TEST(Verify, AddedUnsafeActionGivesCounterexample) {
  const envs::GridWorld world(envs::default_map_9x9());
  const auto s = synthesize(world);
  for (const auto& d : oracle::reachable_decisions(s.shield, world.label(world.initial_state()))) {
    const ActionSet m = s.shield.menu(d.shield_state, d.label);
    if (d.paradise || m == full_set(4)) continue;
    const auto broken = s.shield.with_menu(d.shield_state, d.label, full_set(4));
    const auto r = verify_shield(broken, s.spec, s.abs);
    ASSERT_FALSE(r.violations.empty());
    ASSERT_FALSE(r.unsafe_allowances.empty());
    EXPECT_TRUE(r.missing_successors.empty());
    for (const auto& c : r.violations) expect_replays_to_failure(c, s);
    return;
  }
  FAIL() << "no restricted decision";
}

TEST(Verify, TankCounterexampleReplays) {
  const auto s = synthesize(envs::WaterTank());
  // Let the shield allow opening at level 99 in every state.
  Shield broken = s.shield;
  for (StateId q = 0; q < broken.num_states(); ++q) {
    if (!broken.is_paradise(q)) broken = broken.with_menu(q, 99, full_set(2));
  }
  const auto r = verify_shield(broken, s.spec, s.abs);
  ASSERT_FALSE(r.violations.empty());
  ASSERT_FALSE(r.unsafe_allowances.empty());
  for (const auto& c : r.violations) expect_replays_to_failure(c, s);
  const auto j = nlohmann::json::parse(to_json(r, broken));
  EXPECT_FALSE(j["clean"].get<bool>());
  EXPECT_TRUE(j["violations"][0]["trace"].back()[2].is_null());
}

TEST(Verify, StateBoundGivesPartialResult) {
  const auto s = synthesize(envs::WaterTank());
  VerifyOptions o;
  o.max_states = 50;
  const auto r = verify_shield(s.shield, s.spec, s.abs, o);
  EXPECT_TRUE(r.partial);
  EXPECT_LE(r.joint_states, 50u);

  VerifyOptions no_oracle;
  no_oracle.max_oracle_states = 10;
  const auto r2 = verify_shield(s.shield, s.spec, s.abs, no_oracle);
  EXPECT_TRUE(r2.partial);
  EXPECT_FALSE(r2.oracle_checked);
  EXPECT_TRUE(r2.violations.empty());
}

TEST(Verify, RandomizedModeOn15x9) {
  const auto s = synthesize(envs::GridWorld(envs::default_map_15x9()));
  VerifyOptions o;
  o.mode = VerifyOptions::Mode::Randomized;
  o.walks = 1000;
  o.walk_length = 1000;
  const auto r = verify_shield(s.shield, s.spec, s.abs, o);
  EXPECT_TRUE(r.clean());
  EXPECT_EQ(r.joint_states, 1'000'000u);
}

TEST(Verify, RandomizedModeFindsPlantedDefect) {
  const auto s = synthesize(envs::WaterTank());
  Shield broken = s.shield;
  for (StateId q = 0; q < broken.num_states(); ++q) {
    if (broken.is_paradise(q)) continue;
    for (LabelId l = 0; l < 101; ++l) broken = broken.with_menu(q, l, full_set(2));
  }
  VerifyOptions o;
  o.mode = VerifyOptions::Mode::Randomized;
  o.walks = 200;
  o.walk_length = 500;
  const auto r = verify_shield(broken, s.spec, s.abs, o);
  EXPECT_FALSE(r.unsafe_allowances.empty());
}

TEST(Verify, RejectsMismatchedInputs) {
  const auto s = synthesize(envs::WaterTank());
  const envs::GridWorld world(envs::default_map_9x9());
  EXPECT_THROW(verify_shield(s.shield, world.specification(), world.abstraction()), AlphabetMismatch);
  EXPECT_THROW(verify_shield(s.shield, s.spec.with_timing(automata::LetterTiming::SameStep),
                             s.abs.with_timing(automata::LetterTiming::SameStep)),
               AlphabetMismatch);
}
