#pragma once

// Reference implementations used only by the tests. They are written for
// clarity, not speed, and share no code with the library algorithms they
// check.

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "shieldkit/envs/environment.hpp"
#include "shieldkit/game.hpp"
#include "shieldkit/learn.hpp"
#include "shieldkit/rng.hpp"
#include "shieldkit/shield.hpp"

namespace oracle {

using shieldkit::ActionId;
using shieldkit::LabelId;
using shieldkit::StateId;

/// Greatest fixed point by global recomputation until nothing changes.
std::vector<bool> naive_winning_region(const shieldkit::game::SafetyGame& game);

/// Random game: state 0 is fail, optionally state 1 is paradise, the rest
/// are product states with random successors; `unsafe_bias` tunes how many
/// edges lead to fail.
shieldkit::game::SafetyGame random_game(shieldkit::Rng& rng, std::size_t states, std::size_t labels,
                                        std::size_t actions, shieldkit::game::TurnOrder order,
                                        double unsafe_bias, bool with_paradise);

/// A (shield state, label) pair reachable from the shield's initial state,
/// with the game state the menu was computed from. At the initial state only
/// `initial_label` is considered when given: a system-first shield does not
/// read the first label, so other labels there are not meaningful.
struct Decision {
  StateId shield_state = 0;
  LabelId label = 0;
  StateId game_state = 0;
  bool paradise = false;
};
std::vector<Decision> reachable_decisions(const shieldkit::shield::Shield& shield,
                                          std::optional<LabelId> initial_label = {});

/// Joint state of environment and shield.
struct JointState {
  shieldkit::envs::EnvState env = 0;
  StateId shield = 0;
  auto operator<=>(const JointState&) const = default;
};

/// Decision rule: (joint state, label, allowed actions) -> executed action.
using Policy = std::function<ActionId(const JointState&, LabelId, shieldkit::shield::ActionSet)>;

enum class Placement { None, Preemptive, Postposed };

/// Exact expected undiscounted return over the environment's horizon,
/// propagating the state distribution forward. For post-posed placement the
/// policy's choice is corrected by the shield as at runtime.
struct Evaluation {
  double expected_return = 0.0;
  double violation_probability = 0.0;
};
Evaluation evaluate(const shieldkit::envs::Environment& env, const shieldkit::shield::Shield* shield,
                    Placement placement, const Policy& policy);

/// Discounted value iteration on the environment x shield product with the
/// preemptive menus as action sets (all actions without a shield).
/// Returns the greedy policy (lowest index on ties).
struct ViResult {
  std::map<JointState, std::vector<double>> q;
  Policy policy;
  std::size_t iterations = 0;
};
ViResult value_iteration(const shieldkit::envs::Environment& env, const shieldkit::shield::Shield* shield,
                         double gamma, double tolerance = 1e-10, std::size_t max_iterations = 100000);

/// Greedy policy of a learned table under the given placement. Holds
/// references to `env` and `table`.
Policy table_policy(const shieldkit::envs::Environment& env, const shieldkit::learn::ValueTable& table, const shieldkit::shield::Shield* shield,
                    Placement placement, bool single_state_view = false);

}  // namespace oracle
