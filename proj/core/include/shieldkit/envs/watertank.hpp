#pragma once

#include <filesystem>
#include <vector>

#include "shieldkit/envs/environment.hpp"

namespace shieldkit::envs {

/// Water tank with a valve that has to stay in a mode for three steps after
/// every switch. Levels are whole liters; the label after each step is the
/// liter class of the new level.
class WaterTank final : public Environment {
 public:
  static constexpr unsigned kCapacity = 100;
  static constexpr unsigned kHold = 3;
  static constexpr ActionId kOpen = 0;
  static constexpr ActionId kClose = 1;

  struct Config {
    unsigned initial_level = 50;
    std::size_t horizon = 100;
    double violation_penalty = -10.0;
    std::vector<double> energy;  // 101 entries; empty means default_energy()
  };

  struct State {
    unsigned level = 0;
    ActionId mode = kClose;  // last executed valve setting
    unsigned remaining = 0;  // further steps the current mode must be kept
  };

  WaterTank();
  explicit WaterTank(Config config);

  std::string name() const override { return "watertank"; }
  const Alphabet& labels() const override { return labels_; }
  const Alphabet& actions() const override { return actions_; }
  std::size_t num_states() const override { return (kCapacity + 1) * 2 * kHold; }
  EnvState initial_state() const override;
  LabelId label(EnvState s) const override;
  Transition step(EnvState s, ActionId a, Rng& rng) const override;
  std::vector<Outcome> outcomes(EnvState s, ActionId a) const override;
  std::size_t horizon() const override { return config_.horizon; }
  std::string describe(EnvState s) const override;

  automata::SafetyAutomaton specification() const override;
  automata::SafetyAutomaton abstraction() const override;

  EnvState encode(const State& s) const;
  State decode(EnvState s) const;
  double energy(unsigned level) const { return config_.energy.at(level); }
  /// Reward for ending a safe step at `level`.
  double reward(unsigned level) const { return 1.0 - energy(level); }
  const Config& config() const noexcept { return config_; }

 private:
  Transition finish(const State& from, ActionId a, int inflow, int outflow) const;

  Config config_;
  Alphabet labels_;
  Alphabet actions_;
};

/// Label alphabet: "level<1", "k<=level<k+1" for k = 1..99, "level>99".
Alphabet watertank_labels();
Alphabet watertank_actions();

/// Abstraction over (action, resulting level class): closing keeps the level
/// or lowers it by one, opening raises it by zero to two.
automata::SafetyAutomaton watertank_abstraction(unsigned initial_level = 50);

/// Level invariance plus the three-step hold in both valve directions, with
/// states named q_a..q_f: q_a closed and settled, q_b/q_c freshly opened,
/// q_d open and settled, q_e/q_f freshly closed.
automata::SafetyAutomaton watertank_spec();

/// Energy profile with a shallow minimum near 20 liters and a deep one near 70.
std::vector<double> default_energy();
std::vector<double> load_energy_csv(const std::filesystem::path& path);

}  // namespace shieldkit::envs
