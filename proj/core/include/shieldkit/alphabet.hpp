#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace shieldkit {

using LabelId = std::uint32_t;
using ActionId = std::uint32_t;
using StateId = std::uint32_t;

inline constexpr StateId kNoState = static_cast<StateId>(-1);

/// Dense symbol table: identifiers are 0..size()-1, names are unique.
class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(std::vector<std::string> names);
  Alphabet(std::initializer_list<std::string> names)
      : Alphabet(std::vector<std::string>(names)) {}

  std::size_t size() const noexcept { return names_.size(); }
  bool empty() const noexcept { return names_.empty(); }

  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  std::optional<std::uint32_t> find(std::string_view name) const;
  /// Like find() but throws ConstructionError for unknown names.
  std::uint32_t at(std::string_view name) const;

  friend bool operator==(const Alphabet& a, const Alphabet& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

}  // namespace shieldkit
