#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shieldkit/alphabet.hpp"
#include "shieldkit/automata.hpp"
#include "shieldkit/rng.hpp"

namespace shieldkit::envs {

/// Dense index of a concrete environment state.
using EnvState = std::uint32_t;

struct Transition {
  EnvState next = 0;
  double reward = 0.0;
  bool violation = false;  // the raw environment broke the safety requirement
  bool terminal = false;   // episode ends after this step
};

struct Outcome {
  double probability = 0.0;
  Transition transition;
};

/// Simulated MDP with its observer function and the automata describing
/// its safety requirement and its behaviour.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual const Alphabet& labels() const = 0;
  virtual const Alphabet& actions() const = 0;

  /// Upper bound on state indices.
  virtual std::size_t num_states() const = 0;
  virtual EnvState initial_state() const = 0;
  /// Observer function f: S -> L.
  virtual LabelId label(EnvState s) const = 0;
  /// Samples one step. Violations terminate the episode.
  virtual Transition step(EnvState s, ActionId a, Rng& rng) const = 0;
  /// The full distribution sampled by step().
  virtual std::vector<Outcome> outcomes(EnvState s, ActionId a) const = 0;
  /// Episode length cap.
  virtual std::size_t horizon() const = 0;
  virtual std::string describe(EnvState s) const = 0;

  virtual automata::SafetyAutomaton specification() const = 0;
  virtual automata::SafetyAutomaton abstraction() const = 0;
};

}  // namespace shieldkit::envs
