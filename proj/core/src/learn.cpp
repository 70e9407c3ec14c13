#include "shieldkit/learn.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "shieldkit/errors.hpp"

namespace shieldkit::learn {

using shield::ActionSet;
using shield::contains;

std::string to_string(Algorithm a) { return a == Algorithm::QLearning ? "q" : "sarsa"; }
std::string to_string(RewardVariant v) { return v == RewardVariant::Punish ? "punish" : "passthrough"; }
std::string to_string(ShieldMode m) {
  switch (m) {
    case ShieldMode::None: return "none";
    case ShieldMode::Preemptive: return "preemptive";
    case ShieldMode::Postposed: return "postposed";
  }
  return "?";
}

double EpsilonSchedule::at(std::size_t episode) const {
  if (decay_episodes == 0 || episode >= decay_episodes) return decay_episodes == 0 ? start : end;
  const double f = static_cast<double>(episode) / static_cast<double>(decay_episodes);
  return start + (end - start) * f;
}

std::vector<std::string> LearnerConfig::problems() const {
  std::vector<std::string> out;
  if (!(alpha > 0.0 && alpha <= 1.0)) out.emplace_back("alpha must lie in (0, 1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) out.emplace_back("gamma must lie in [0, 1]");
  if (!(epsilon.start >= 0.0 && epsilon.start <= 1.0)) out.emplace_back("epsilon start must lie in [0, 1]");
  if (!(epsilon.end >= 0.0 && epsilon.end <= 1.0)) out.emplace_back("epsilon end must lie in [0, 1]");
  if (rank_width == 0) out.emplace_back("rank width must be at least 1");
  if (reward_variant == RewardVariant::Punish && !(punishment < 0.0)) {
    out.emplace_back("punish variant needs a negative punishment");
  }
  if (!std::isfinite(initial_value)) out.emplace_back("initial value must be finite");
  return out;
}

void LearnerConfig::validate() const {
  const auto p = problems();
  if (p.empty()) return;
  std::string msg = "invalid learner configuration:";
  for (const auto& s : p) msg += "\n  " + s;
  throw ConstructionError(msg);
}

ValueTable::ValueTable(std::size_t num_actions, double initial_value)
    : num_actions_(num_actions), init_(initial_value) {
  if (num_actions == 0) throw ConstructionError("value table: no actions");
}

Observation observe(const envs::Environment& env, const shield::Shield* sh, bool single_state_view,
                    envs::EnvState s, StateId q) {
  if (!sh || single_state_view) return {s, 0};
  return {s, sh->decision_state(q, env.label(s))};
}

double ValueTable::get(const Observation& o, ActionId a) const {
  const auto it = index_.find(o.key());
  return it == index_.end() ? init_ : values_[it->second + a];
}

void ValueTable::set(const Observation& o, ActionId a, double v) {
  auto [it, fresh] = index_.emplace(o.key(), values_.size());
  if (fresh) values_.resize(values_.size() + num_actions_, init_);
  values_[it->second + a] = v;
}

double ValueTable::max(const Observation& o, ActionSet available) const {
  const auto it = index_.find(o.key());
  if (it == index_.end() || available == 0) return available == 0 ? 0.0 : init_;
  double best = -std::numeric_limits<double>::infinity();
  for (ActionId a : shield::to_list(available)) best = std::max(best, values_[it->second + a]);
  return best;
}

bool operator==(const ValueTable& a, const ValueTable& b) {
  if (a.num_actions_ != b.num_actions_ || a.index_.size() != b.index_.size()) return false;
  for (const auto& [key, row] : a.index_) {
    const auto it = b.index_.find(key);
    if (it == b.index_.end()) return false;
    if (!std::equal(a.values_.begin() + static_cast<std::ptrdiff_t>(row),
                    a.values_.begin() + static_cast<std::ptrdiff_t>(row + a.num_actions_),
                    b.values_.begin() + static_cast<std::ptrdiff_t>(it->second))) {
      return false;
    }
  }
  return true;
}

void q_update(ValueTable& table, const Observation& obs, ActionId a, double reward, const Observation& next,
              ActionSet next_available, bool terminal, const LearnerConfig& config) {
  const double target = reward + (terminal ? 0.0 : config.gamma * table.max(next, next_available));
  const double old = table.get(obs, a);
  table.set(obs, a, old + config.alpha * (target - old));
}

void sarsa_update(ValueTable& table, const Observation& obs, ActionId a, double reward, const Observation& next,
                  ActionId next_action, bool terminal, const LearnerConfig& config) {
  const double target = reward + (terminal ? 0.0 : config.gamma * table.get(next, next_action));
  const double old = table.get(obs, a);
  table.set(obs, a, old + config.alpha * (target - old));
}

shield::Ranking select_ranking(const ValueTable& table, const Observation& obs, ActionSet available,
                               double epsilon, std::size_t k, Rng& rng, bool random_tie_break) {
  std::vector<ActionId> acts = shield::to_list(available);
  if (acts.empty()) throw ContractViolation("select_ranking: no available actions");
  if (k == 0 || k > acts.size()) throw ContractViolation("select_ranking: rank width out of range");
  const bool explore = rng.uniform() < epsilon;
  if (explore) {
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng.below(acts.size() - i);
      std::swap(acts[i], acts[j]);
    }
  } else {
    std::vector<std::size_t> tie(acts.size());
    std::iota(tie.begin(), tie.end(), 0);
    if (random_tie_break) {
      for (std::size_t i = tie.size(); i > 1; --i) std::swap(tie[i - 1], tie[rng.below(i)]);
    }
    std::vector<std::size_t> order(acts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      const double vx = table.get(obs, acts[x]);
      const double vy = table.get(obs, acts[y]);
      if (vx != vy) return vx > vy;
      return tie[x] < tie[y];
    });
    std::vector<ActionId> sorted;
    for (std::size_t i : order) sorted.push_back(acts[i]);
    acts = std::move(sorted);
  }
  acts.resize(k);
  return shield::Ranking(std::move(acts), table.num_actions());
}

ActionId greedy_action(const ValueTable& table, const Observation& obs, ActionSet available) {
  ActionId best = shield::kNoAction;
  double best_v = 0;
  for (ActionId a : shield::to_list(available)) {
    const double v = table.get(obs, a);
    if (best == shield::kNoAction || v > best_v) {
      best = a;
      best_v = v;
    }
  }
  return best;
}

std::size_t RunLog::total_violations() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.violations;
  return n;
}

std::string RunLog::to_csv() const {
  std::ostringstream out;
  out << "episode,accumulated_reward,violations,interventions,steps\n";
  out << std::setprecision(10);
  for (const auto& e : episodes) {
    out << e.episode << ',' << e.accumulated_reward << ',' << e.violations << ',' << e.interventions << ','
        << e.steps << '\n';
  }
  return out.str();
}

namespace {

struct PendingUpdate {
  Observation obs;
  ActionId action;
  double reward;
  Observation next;
};

}  // namespace

RunLog train(const envs::Environment& env, const shield::Shield* sh, ShieldMode mode, const LearnerConfig& config,
             const TrainOptions& options, ValueTable& table) {
  config.validate();
  if ((mode == ShieldMode::None) != (sh == nullptr)) {
    throw ContractViolation("train: a shield is required exactly for shielded modes");
  }
  if (table.num_actions() != env.actions().size()) throw ContractViolation("train: table has the wrong width");
  if (sh) {
    if (!(sh->labels() == env.labels()) || !(sh->actions() == env.actions())) {
      throw AlphabetMismatch("train: shield and environment alphabets differ");
    }
    if (config.single_state_view && !sh->single_state_certified()) {
      throw ContractViolation("train: single-state view needs a shield with one ordinary state");
    }
  }
  const bool sarsa = config.algorithm == Algorithm::Sarsa;
  const ActionSet all = shield::full_set(env.actions().size());
  Rng env_rng(Rng::derive(config.seed, 0));
  Rng agent_rng(Rng::derive(config.seed, 1));

  auto available_at = [&](envs::EnvState s, StateId q) {
    return mode == ShieldMode::Preemptive ? sh->menu(q, env.label(s)) : all;
  };

  RunLog log;
  log.episodes.reserve(options.episodes);
  std::vector<PendingUpdate> pending;
  for (std::size_t ep = 0; ep < options.episodes; ++ep) {
    const double eps = config.epsilon.at(ep);
    envs::EnvState s = env.initial_state();
    StateId q = sh ? sh->initial() : 0;
    EpisodeRecord rec;
    rec.episode = ep;
    pending.clear();
    for (std::size_t t = 0; t < env.horizon(); ++t) {
      const LabelId l = env.label(s);
      const Observation obs = observe(env, sh, config.single_state_view, s, q);
      const ActionSet available = available_at(s, q);
      const std::size_t k = std::min(config.rank_width, shield::count(available));
      const shield::Ranking rank = select_ranking(table, obs, available, eps, k, agent_rng, config.random_tie_break);

      ActionId executed = rank[0];
      StateId next_q = 0;
      bool overridden = false;
      bool intervened = false;
      std::vector<ActionId> unsafe;
      if (mode == ShieldMode::Postposed) {
        const auto res = shield::postposed_step(*sh, q, l, rank);
        executed = res.action;
        overridden = res.overridden;
        next_q = res.next;
        for (ActionId a : rank.actions()) {
          if (a == executed) break;
          unsafe.push_back(a);
        }
        intervened = executed != rank[0];
      } else if (mode == ShieldMode::Preemptive) {
        next_q = shield::advance(*sh, q, l, executed);
        intervened = available != all;
      }

      // SARSA bootstraps the previous step's updates with the action actually executed now.
      for (const auto& p : pending) sarsa_update(table, p.obs, p.action, p.reward, p.next, executed, false, config);
      pending.clear();

      const envs::Transition tr = env.step(s, executed, env_rng);
      const Observation next_obs =
          tr.terminal ? Observation{tr.next, 0} : observe(env, sh, config.single_state_view, tr.next, next_q);
      const bool last = t + 1 == env.horizon();
      std::vector<std::pair<ActionId, double>> updates{{executed, tr.reward}};
      for (ActionId b : unsafe) {
        updates.emplace_back(b, config.reward_variant == RewardVariant::Punish ? config.punishment : tr.reward);
      }
      const ActionSet next_available = tr.terminal ? ActionSet{0} : available_at(tr.next, next_q);
      for (const auto& [a, r] : updates) {
        if (!sarsa) {
          q_update(table, obs, a, r, next_obs, next_available, tr.terminal, config);
        } else if (tr.terminal) {
          sarsa_update(table, obs, a, r, next_obs, 0, true, config);
        } else if (last) {
          // Truncated episode: bootstrap with the greedy continuation.
          sarsa_update(table, obs, a, r, next_obs, greedy_action(table, next_obs, next_available), false, config);
        } else {
          pending.push_back({obs, a, r, next_obs});
        }
      }

      if (sh && sh->is_paradise(q)) ++log.paradise_steps;
      rec.accumulated_reward += tr.reward;
      rec.violations += tr.violation ? 1 : 0;
      rec.interventions += intervened ? 1 : 0;
      ++rec.steps;
      if (options.record_steps) {
        StepRecord sr;
        sr.episode = ep;
        sr.time = t;
        sr.obs = Observation{s, sh ? q : 0};
        sr.label = l;
        sr.available = available;
        sr.ranking = rank.actions();
        sr.executed = executed;
        sr.overridden = overridden;
        sr.intervened = intervened;
        sr.reward = tr.reward;
        sr.violation = tr.violation;
        sr.table_writes = updates.size();
        log.steps.push_back(std::move(sr));
      }
      s = tr.next;
      q = next_q;
      if (tr.terminal) break;
    }
    log.episodes.push_back(rec);
  }
  return log;
}

RunLog train_unshielded(const envs::Environment& env, const LearnerConfig& config, const TrainOptions& options,
                        ValueTable& table) {
  return train(env, nullptr, ShieldMode::None, config, options, table);
}

RunLog train_preemptive(const envs::Environment& env, const shield::Shield& shield, const LearnerConfig& config,
                        const TrainOptions& options, ValueTable& table) {
  return train(env, &shield, ShieldMode::Preemptive, config, options, table);
}

RunLog train_postposed(const envs::Environment& env, const shield::Shield& shield, const LearnerConfig& config,
                       const TrainOptions& options, ValueTable& table) {
  return train(env, &shield, ShieldMode::Postposed, config, options, table);
}

}  // namespace shieldkit::learn
