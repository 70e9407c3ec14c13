#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "shieldkit/envs/environment.hpp"
#include "shieldkit/rng.hpp"
#include "shieldkit/shield.hpp"

namespace shieldkit::learn {

enum class Algorithm { QLearning, Sarsa };
enum class RewardVariant { Punish, Passthrough };
enum class ShieldMode { None, Preemptive, Postposed };

std::string to_string(Algorithm a);
std::string to_string(RewardVariant v);
std::string to_string(ShieldMode m);

/// Linear interpolation from `start` to `end` over `decay_episodes`, then
/// constant. Without decay episodes epsilon stays at `start`.
struct EpsilonSchedule {
  double start = 0.1;
  double end = 0.1;
  std::size_t decay_episodes = 0;

  double at(std::size_t episode) const;
};

struct LearnerConfig {
  Algorithm algorithm = Algorithm::QLearning;
  double alpha = 0.1;
  double gamma = 0.99;
  EpsilonSchedule epsilon;
  std::size_t rank_width = 1;
  RewardVariant reward_variant = RewardVariant::Punish;
  double punishment = -10.0;
  bool random_tie_break = false;
  bool single_state_view = false;
  double initial_value = 0.0;
  std::uint64_t seed = 1;

  /// Every violated constraint, one message each; empty when valid.
  std::vector<std::string> problems() const;
  /// Throws ConstructionError listing every problem.
  void validate() const;
};

struct Observation {
  envs::EnvState env = 0;
  StateId shield = 0;

  std::uint64_t key() const { return (static_cast<std::uint64_t>(env) << 32) | shield; }
  friend bool operator==(const Observation&, const Observation&) = default;
};

/// What the learner sees in environment state s with the shield in state q:
/// s paired with the shield's decision state for the current label, or s
/// alone without a shield or under the single-state view.
Observation observe(const envs::Environment& env, const shield::Shield* shield, bool single_state_view,
                    envs::EnvState s, StateId q);

/// Action values keyed by observation; unseen observations read as the initial value.
class ValueTable {
 public:
  ValueTable(std::size_t num_actions, double initial_value = 0.0);

  std::size_t num_actions() const noexcept { return num_actions_; }
  double initial_value() const noexcept { return init_; }
  std::size_t size() const noexcept { return index_.size(); }

  double get(const Observation& o, ActionId a) const;
  void set(const Observation& o, ActionId a, double v);
  /// Highest value over `available`; the initial value for unseen observations.
  double max(const Observation& o, shield::ActionSet available) const;
  bool seen(const Observation& o) const { return index_.count(o.key()) != 0; }

  friend bool operator==(const ValueTable& a, const ValueTable& b);

 private:
  std::size_t num_actions_;
  double init_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<double> values_;
};

/// One-step temporal-difference updates. `next_available` restricts the
/// bootstrap maximum (the shield menu under preemptive shielding).
void q_update(ValueTable& table, const Observation& obs, ActionId a, double reward, const Observation& next,
              shield::ActionSet next_available, bool terminal, const LearnerConfig& config);
void sarsa_update(ValueTable& table, const Observation& obs, ActionId a, double reward, const Observation& next,
                  ActionId next_action, bool terminal, const LearnerConfig& config);

/// With probability epsilon a uniformly random ordered prefix of `available`
/// of length k; otherwise the k best actions by value, ties to the lowest
/// index (or broken at random when configured).
shield::Ranking select_ranking(const ValueTable& table, const Observation& obs, shield::ActionSet available,
                               double epsilon, std::size_t k, Rng& rng, bool random_tie_break = false);

struct StepRecord {
  std::size_t episode = 0;
  std::size_t time = 0;
  Observation obs;
  LabelId label = 0;
  shield::ActionSet available = 0;
  std::vector<ActionId> ranking;
  ActionId executed = 0;
  bool overridden = false;
  bool intervened = false;
  double reward = 0.0;
  bool violation = false;
  std::size_t table_writes = 0;
};

struct EpisodeRecord {
  std::size_t episode = 0;
  double accumulated_reward = 0.0;
  std::size_t violations = 0;
  std::size_t interventions = 0;
  std::size_t steps = 0;
};

struct RunLog {
  std::vector<EpisodeRecord> episodes;
  std::vector<StepRecord> steps;  // filled only when requested
  /// Steps taken after the environment left the abstraction; the shield
  /// allows everything there and its guarantee no longer holds.
  std::size_t paradise_steps = 0;

  std::size_t total_violations() const;
  /// Header "episode,accumulated_reward,violations,interventions,steps".
  std::string to_csv() const;
};

struct TrainOptions {
  std::size_t episodes = 0;
  bool record_steps = false;
};

/// Trains `table` in place. `shield` must be null for ShieldMode::None.
RunLog train(const envs::Environment& env, const shield::Shield* shield, ShieldMode mode,
             const LearnerConfig& config, const TrainOptions& options, ValueTable& table);

RunLog train_unshielded(const envs::Environment& env, const LearnerConfig& config, const TrainOptions& options,
                        ValueTable& table);
RunLog train_preemptive(const envs::Environment& env, const shield::Shield& shield, const LearnerConfig& config,
                        const TrainOptions& options, ValueTable& table);
RunLog train_postposed(const envs::Environment& env, const shield::Shield& shield, const LearnerConfig& config,
                       const TrainOptions& options, ValueTable& table);

/// Greedy action for a trained table: the best available action under
/// preemptive shielding, the shield's correction of the best action under
/// post-posed shielding. Ties go to the lowest index.
ActionId greedy_action(const ValueTable& table, const Observation& obs, shield::ActionSet available);

}  // namespace shieldkit::learn
