#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "shieldkit/envs/grid.hpp"
#include "shieldkit/envs/watertank.hpp"
#include "shieldkit/errors.hpp"

using namespace shieldkit;
using namespace shieldkit::envs;

namespace {

const std::filesystem::path kData = SHIELDKIT_DATA_DIR;

std::map<unsigned, double> level_distribution(const WaterTank& tank, const WaterTank::State& from, ActionId a) {
  std::map<unsigned, double> out;
  for (const auto& o : tank.outcomes(tank.encode(from), a)) out[tank.decode(o.transition.next).level] += o.probability;
  return out;
}

// Runs random actions and checks every step against the environment's own
// automata: the abstraction never fails, and the specification fails exactly
// when the environment reports a violation.
void soak(const Environment& env, std::size_t steps, std::uint64_t seed) {
  const auto spec = env.specification();
  const auto abs = env.abstraction();
  const bool same_step = spec.timing() == automata::LetterTiming::SameStep;
  Rng rng(seed);
  EnvState s = env.initial_state();
  StateId q = spec.initial();
  StateId m = abs.initial();
  std::size_t t = 0;
  std::size_t violations = 0;
  for (std::size_t i = 0; i < steps; ++i) {
    const ActionId a = static_cast<ActionId>(rng.below(env.actions().size()));
    const LabelId before = env.label(s);
    const Transition tr = env.step(s, a, rng);
    const LabelId seen = same_step ? before : env.label(tr.next);
    m = abs.next(m, seen, a);
    ASSERT_TRUE(abs.is_safe(m)) << env.name() << " step " << i << " " << env.describe(s);
    q = spec.next(q, seen, a);
    bool spec_failed = !spec.is_safe(q);
    if (!spec_failed && tr.violation && same_step) {
      // Bounded stays are only visible once the next label is read.
      bool all_fail = true;
      for (ActionId b = 0; b < env.actions().size(); ++b) all_fail = all_fail && !spec.is_safe(spec.next(q, env.label(tr.next), b));
      spec_failed = all_fail;
    }
    ASSERT_EQ(spec_failed, tr.violation) << env.name() << " step " << i << " " << env.describe(s) << " action " << a;
    violations += tr.violation;
    ++t;
    if (tr.terminal || t >= env.horizon()) {
      s = env.initial_state();
      q = spec.initial();
      m = abs.initial();
      t = 0;
    } else {
      s = tr.next;
    }
  }
  EXPECT_GT(violations, 0u) << env.name();
}

bool same_map(const GridMap& a, const GridMap& b) {
  return a.width == b.width && a.height == b.height && a.wall == b.wall && a.bomb == b.bomb && a.target == b.target &&
         a.num_targets == b.num_targets && a.start == b.start && a.cycle == b.cycle;
}

// Return of a shortest violation-free run that completes every target, by
// breadth-first search over concrete states.
std::optional<double> planned_completion_return(const GridWorld& w) {
  std::map<EnvState, std::pair<EnvState, double>> parent;
  std::queue<EnvState> frontier;
  frontier.push(w.initial_state());
  parent[w.initial_state()] = {w.initial_state(), 0.0};
  Rng rng(0);
  while (!frontier.empty()) {
    const EnvState s = frontier.front();
    frontier.pop();
    for (ActionId a = 0; a < 4; ++a) {
      const Transition tr = w.step(s, a, rng);
      if (tr.violation || parent.count(tr.next)) continue;
      parent[tr.next] = {s, tr.reward};
      if (tr.terminal) {
        double ret = 0;
        for (EnvState x = tr.next; x != w.initial_state(); x = parent[x].first) ret += parent[x].second;
        return ret;
      }
      frontier.push(tr.next);
    }
  }
  return std::nullopt;
}

const std::array<std::pair<int, int>, 4> kShift = {{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};

}  // namespace

TEST(WaterTank, OpenOutcomeDistribution) {
  const WaterTank tank;
  const auto d = level_distribution(tank, {50, WaterTank::kOpen, 0}, WaterTank::kOpen);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_DOUBLE_EQ(d.at(50), 0.25);
  EXPECT_DOUBLE_EQ(d.at(51), 0.5);
  EXPECT_DOUBLE_EQ(d.at(52), 0.25);
}

TEST(WaterTank, CloseOutcomeDistribution) {
  const WaterTank tank;
  const auto d = level_distribution(tank, {50, WaterTank::kClose, 0}, WaterTank::kClose);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d.at(49), 0.5);
  EXPECT_DOUBLE_EQ(d.at(50), 0.5);
}

TEST(WaterTank, OutcomesSumToOne) {
  const WaterTank tank;
  for (EnvState s = 0; s < tank.num_states(); ++s) {
    for (ActionId a = 0; a < 2; ++a) {
      double total = 0;
      for (const auto& o : tank.outcomes(s, a)) total += o.probability;
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(WaterTank, SampledIncrementsMatchDistribution) {
  const WaterTank tank;
  Rng rng(7);
  const EnvState s = tank.encode({50, WaterTank::kOpen, 0});
  const int n = 40000;
  std::array<int, 3> open{};
  std::array<int, 2> close{};
  for (int i = 0; i < n; ++i) {
    ++open[tank.decode(tank.step(s, WaterTank::kOpen, rng).next).level - 50];
    ++close[50 - tank.decode(tank.step(tank.encode({50, WaterTank::kClose, 0}), WaterTank::kClose, rng).next).level];
  }
  const std::array<double, 3> p_open{0.25, 0.5, 0.25};
  double chi_open = 0;
  for (int k = 0; k < 3; ++k) chi_open += std::pow(open[k] - n * p_open[k], 2) / (n * p_open[k]);
  double chi_close = 0;
  for (int k = 0; k < 2; ++k) chi_close += std::pow(close[k] - n * 0.5, 2) / (n * 0.5);
  EXPECT_LT(chi_open, 13.82);  // df 2, p = 0.001
  EXPECT_LT(chi_close, 10.83);  // df 1, p = 0.001
}

TEST(WaterTank, HoldAndBounds) {
  const WaterTank tank;
  Rng rng(1);
  // Switching before the hold has run out is a violation.
  auto t = tank.step(tank.encode({50, WaterTank::kOpen, 1}), WaterTank::kClose, rng);
  EXPECT_TRUE(t.violation);
  EXPECT_TRUE(t.terminal);
  EXPECT_DOUBLE_EQ(t.reward, tank.config().violation_penalty);
  t = tank.step(tank.encode({50, WaterTank::kOpen, 0}), WaterTank::kClose, rng);
  EXPECT_FALSE(t.violation);
  EXPECT_EQ(tank.decode(t.next).remaining, WaterTank::kHold - 1);
  // Level 1 closed can drain to 0.
  bool drained = false;
  for (const auto& o : tank.outcomes(tank.encode({1, WaterTank::kClose, 0}), WaterTank::kClose)) {
    if (tank.decode(o.transition.next).level == 0) drained = o.transition.violation;
  }
  EXPECT_TRUE(drained);
  bool overflow = false;
  for (const auto& o : tank.outcomes(tank.encode({98, WaterTank::kOpen, 0}), WaterTank::kOpen)) {
    overflow = overflow || (o.transition.violation && tank.decode(o.transition.next).level == 100);
  }
  EXPECT_TRUE(overflow);
}

TEST(WaterTank, RewardIsOneMinusEnergy) {
  const WaterTank tank;
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto t = tank.step(tank.encode({50, WaterTank::kClose, 0}), WaterTank::kClose, rng);
    EXPECT_DOUBLE_EQ(t.reward, 1.0 - tank.energy(tank.decode(t.next).level));
  }
}

TEST(WaterTank, EnergyProfile) {
  const auto e = default_energy();
  ASSERT_EQ(e.size(), 101u);
  std::vector<unsigned> minima;
  for (unsigned x = 1; x < 100; ++x) {
    if (e[x] < e[x - 1] && e[x] <= e[x + 1]) minima.push_back(x);
  }
  ASSERT_EQ(minima.size(), 2u);
  EXPECT_NEAR(minima[0], 20, 2);
  EXPECT_NEAR(minima[1], 70, 2);
  EXPECT_LT(e[minima[1]], e[minima[0]]);
  for (double v : e) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(WaterTank, BundledEnergyFileMatches) {
  EXPECT_EQ(load_energy_csv(kData / "watertank_energy.csv"), default_energy());
}

TEST(WaterTank, EnergyFileErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "shieldkit_energy";
  std::filesystem::create_directories(dir);
  const auto write = [&](const std::string& body) {
    const auto p = dir / "e.csv";
    std::ofstream(p) << body;
    return p;
  };
  EXPECT_THROW(load_energy_csv(write("level,energy\n0,0.5\n")), SchemaError);
  EXPECT_THROW(load_energy_csv(write("level,energy\n0;0.5\n")), SchemaError);
  EXPECT_THROW(load_energy_csv(dir / "missing.csv"), IoError);
}

TEST(WaterTank, ConfigValidation) {
  WaterTank::Config c;
  c.initial_level = 0;
  EXPECT_THROW(WaterTank{c}, ConstructionError);
  c = {};
  c.energy = {0.5};
  EXPECT_THROW(WaterTank{c}, ConstructionError);
  c = {};
  c.violation_penalty = 0;
  EXPECT_THROW(WaterTank{c}, ConstructionError);
}

TEST(WaterTank, ConformsToAutomata) { soak(WaterTank(), 100000, 11); }

TEST(Grid, ConformsToAutomata) {
  soak(GridWorld(default_map_9x9()), 100000, 12);
  soak(GridWorld(default_map_15x9()), 100000, 13);
}

TEST(Grid, BundledMapsMatchDataFiles) {
  EXPECT_TRUE(same_map(load_map(kData / "maps" / "grid9x9.map"), default_map_9x9()));
  EXPECT_TRUE(same_map(load_map(kData / "maps" / "grid15x9.map"), default_map_15x9()));
}

TEST(Grid, MapContents) {
  const auto m9 = default_map_9x9();
  EXPECT_EQ(m9.width, 9);
  EXPECT_EQ(m9.height, 9);
  EXPECT_EQ(m9.num_targets, 3);
  EXPECT_TRUE(m9.has_bombs());
  EXPECT_FALSE(m9.has_opponent());
  const auto m15 = default_map_15x9();
  EXPECT_EQ(m15.width, 15);
  EXPECT_EQ(m15.height, 9);
  EXPECT_FALSE(m15.has_bombs());
  EXPECT_TRUE(m15.has_opponent());
  EXPECT_EQ(m15.cycle.size(), 16u);
}

// Breadth-first search over (cell, phase). A blocked move keeps the robot in
// place when `stay_on_block` is set and is dropped otherwise.
std::size_t reachable_pairs(const GridMap& map, bool stay_on_block) {
  std::set<std::pair<int, std::size_t>> seen;
  std::queue<std::pair<Cell, std::size_t>> frontier;
  frontier.push({map.start, 0});
  seen.insert({map.index(map.start), 0});
  while (!frontier.empty()) {
    const auto [c, p] = frontier.front();
    frontier.pop();
    const Cell opp_now = map.has_opponent() ? map.cycle[p] : Cell{-1, -1};
    const Cell opp_next = map.has_opponent() ? map.cycle[(p + 1) % map.phases()] : Cell{-1, -1};
    const std::size_t np = (p + 1) % map.phases();
    for (int d = 0; d < 4; ++d) {
      Cell to{c.x + kShift[d].first, c.y + kShift[d].second};
      if (!map.free(to) || to == opp_next || (to == opp_now && opp_next == c)) {
        if (!stay_on_block) continue;
        to = c;
      }
      if (seen.insert({map.index(to), np}).second) frontier.push({to, np});
    }
  }
  return seen.size();
}

TEST(Grid, AbstractionSizeIsFreeCellsTimesPhases) {
  for (const auto& map : {default_map_9x9(), default_map_15x9()}) {
    const GridWorld w(map);
    std::size_t free = 0;
    for (int i = 0; i < map.width * map.height; ++i) free += !map.wall[i];
    EXPECT_EQ(w.abstraction_size(), reachable_pairs(map, true));
    EXPECT_EQ(w.abstraction_size(), free * map.phases());
  }
  const auto m15 = default_map_15x9();
  EXPECT_EQ(GridWorld(m15).abstraction_size(), 86u * 16u);
  // Without blocked moves the robot never waits, and with an even cycle only
  // one parity class of (cell, phase) is visited.
  EXPECT_EQ(reachable_pairs(m15, false), 86u * 16u / 2);
}

TEST(Grid, BlockedMaskFollowsWallsAndOpponent) {
  const GridWorld w(default_map_15x9());
  const auto& m = w.map();
  for (std::size_t p = 0; p < m.phases(); ++p) {
    for (int i = 0; i < m.width * m.height; ++i) {
      const Cell c = m.cell(i);
      if (!m.free(c)) continue;
      for (int d = 0; d < 4; ++d) {
        const Cell to{c.x + kShift[d].first, c.y + kShift[d].second};
        const Cell next = m.cycle[(p + 1) % m.phases()];
        const bool hit = !m.free(to) || to == next || (to == m.cycle[p] && next == c);
        EXPECT_EQ(((w.blocked(c, p) >> d) & 1) != 0, hit);
      }
    }
  }
}

TEST(Grid, BombStayLimit) {
  const GridWorld w(default_map_9x9());
  Rng rng(0);
  // Bombs at (3,1) and (3,2): entering twice in a row is fine, a third bomb step is not.
  GridWorld::State s{{2, 1}, 0, 0, 0};
  auto t = w.step(w.encode(s), 1, rng);  // east onto (3,1)
  ASSERT_FALSE(t.violation);
  EXPECT_EQ(w.decode(t.next).on_bomb, 1u);
  t = w.step(t.next, 2, rng);  // south onto (3,2)
  ASSERT_FALSE(t.violation);
  EXPECT_EQ(w.decode(t.next).on_bomb, 2u);
  const auto back = w.step(t.next, 0, rng);  // north onto (3,1) again
  EXPECT_TRUE(back.violation);
  EXPECT_TRUE(back.terminal);
  const auto leave = w.step(t.next, 3, rng);  // west onto (2,2)
  EXPECT_FALSE(leave.violation);
  EXPECT_EQ(w.decode(leave.next).on_bomb, 0u);
}

TEST(Grid, CompletionOutranksEveryViolatingEpisode) {
  for (const auto& map : {default_map_9x9(), default_map_15x9()}) {
    const GridWorld w(map);
    const auto planned = planned_completion_return(w);
    ASSERT_TRUE(planned.has_value());
    EXPECT_DOUBLE_EQ(*planned, map.num_targets * w.config().target_bonus + w.config().completion_bonus);
    Rng rng(5);
    int violating = 0;
    for (int ep = 0; ep < 2000; ++ep) {
      EnvState s = w.initial_state();
      double ret = 0;
      for (std::size_t t = 0; t < w.horizon(); ++t) {
        const auto tr = w.step(s, static_cast<ActionId>(rng.below(4)), rng);
        ret += tr.reward;
        if (tr.terminal) {
          if (tr.violation) {
            ++violating;
            EXPECT_LT(ret, *planned);
          }
          break;
        }
        s = tr.next;
      }
    }
    EXPECT_GT(violating, 0);
  }
}

TEST(Grid, TargetsCountInOrder) {
  const GridWorld w(default_map_9x9());
  Rng rng(0);
  // Target 2 at (2,6) before target 1 has been reached gives nothing.
  const auto t = w.step(w.encode({{2, 5}, 0, 0, 0}), 2, rng);
  ASSERT_FALSE(t.violation);
  EXPECT_DOUBLE_EQ(t.reward, 0.0);
  EXPECT_EQ(w.decode(t.next).progress, 0);
  const auto u = w.step(w.encode({{2, 5}, 0, 0, 1}), 2, rng);
  EXPECT_DOUBLE_EQ(u.reward, w.config().target_bonus);
  EXPECT_EQ(w.decode(u.next).progress, 2);
}

TEST(Grid, EncodeDecodeRoundTrip) {
  for (const auto& map : {default_map_9x9(), default_map_15x9()}) {
    const GridWorld w(map);
    for (EnvState e = 0; e < w.num_states(); ++e) EXPECT_EQ(w.encode(w.decode(e)), e);
  }
  const WaterTank tank;
  for (EnvState e = 0; e < tank.num_states(); ++e) EXPECT_EQ(tank.encode(tank.decode(e)), e);
}

TEST(Grid, LabelsNameBlockedDirections) {
  const auto l = grid_labels(true);
  ASSERT_EQ(l.size(), 32u);
  EXPECT_EQ(l.name(0), "----");
  EXPECT_EQ(l.name(5), "N-S-");
  EXPECT_EQ(l.name(15 + 16), "NESW+bomb");
  EXPECT_EQ(grid_labels(false).size(), 16u);
}

TEST(MapParsing, Errors) {
  EXPECT_THROW(parse_map(""), SchemaError);
  EXPECT_THROW(parse_map("###\n#R#\n##\n"), SchemaError);
  EXPECT_THROW(parse_map("####\n#RR#\n####\n"), SchemaError);
  EXPECT_THROW(parse_map("###\n#.#\n###\n"), SchemaError);
  EXPECT_THROW(parse_map("####\n#R?#\n####\n"), SchemaError);
  EXPECT_THROW(parse_map("#####\n#R.2#\n#####\n"), SchemaError);
  const std::string with_opp = "######\n#R...#\n#.O..#\n######\n";
  EXPECT_THROW(parse_map(with_opp, ""), SchemaError);
  EXPECT_THROW(parse_map(with_opp, "2 2\n4 2\n"), SchemaError);        // jumps two cells
  EXPECT_THROW(parse_map(with_opp, "3 2\n2 2\n"), SchemaError);        // does not start at 'O'
  EXPECT_THROW(parse_map(with_opp, "2 2\n2 3\n"), SchemaError);        // into a wall
  EXPECT_THROW(parse_map(with_opp, "2 2\n3\n"), SchemaError);          // missing coordinate
  EXPECT_THROW(parse_map("####\n#R.#\n####\n", "1 1\n2 1\n"), SchemaError);
  EXPECT_NO_THROW(parse_map(with_opp, "# loop\n2 2\n3 2\n\n"));
  EXPECT_THROW(load_map(kData / "maps" / "missing.map"), IoError);
}
