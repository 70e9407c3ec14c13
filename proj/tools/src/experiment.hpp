#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shieldkit/automata.hpp"
#include "shieldkit/envs/environment.hpp"
#include "shieldkit/learn.hpp"
#include "shieldkit/shield.hpp"

namespace shieldkit::cli {

/// Process exit codes.
enum Exit : int { kOk = 0, kInvalid = 1, kFailed = 2, kIoFailure = 3 };

/// Raised when a configuration has problems; carries all of them.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Flat "key = value" pairs, one per line; '#' starts a comment.
std::map<std::string, std::string> parse_key_values(const std::string& text);

enum class Placement { None, Preemptive, Postposed };
std::string to_string(Placement p);

struct ExperimentConfig {
  std::string env = "watertank";  // watertank | grid9x9 | grid15x9 | grid
  std::optional<std::filesystem::path> map;
  std::optional<std::filesystem::path> cycle;
  std::optional<std::filesystem::path> energy;
  std::string spec = "builtin";         // builtin | accept-all | path to automaton JSON
  std::string abstraction = "builtin";  // builtin | path to automaton JSON
  Placement placement = Placement::Preemptive;
  learn::LearnerConfig learner;
  std::size_t episodes = 1000;
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path out = "out";
  std::size_t jobs = 0;  // 0: one per hardware thread

  /// Keys that were set explicitly, for the placement=none check.
  std::vector<std::string> explicit_keys;

  /// Applies `values` on top of the current fields. Every unknown key and
  /// unparsable value is collected before ConfigError is thrown.
  void apply(const std::map<std::string, std::string>& values);
  /// Every violated constraint, including missing files.
  std::vector<std::string> problems() const;
};

/// Canonical "key = value" text of every setting that affects results;
/// apply() reads it back.
std::string to_key_values(const ExperimentConfig& c);

/// Known configuration keys, in file order.
const std::vector<std::string>& config_keys();

std::vector<std::uint64_t> parse_seeds(const std::string& text);

std::unique_ptr<envs::Environment> make_environment(const ExperimentConfig& c);
automata::SafetyAutomaton load_spec(const std::string& source, const envs::Environment& env);
automata::SafetyAutomaton load_abstraction(const std::string& source, const envs::Environment& env);

/// Per-episode mean and standard error of the accumulated reward over seeds.
/// Header "episode,seeds,reward_mean,reward_stderr,violations_mean,interventions_mean".
std::string aggregate_csv(const std::vector<learn::RunLog>& logs);

/// Writes `text` to `path` through a temporary sibling and a rename.
void write_atomically(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

}  // namespace shieldkit::cli
