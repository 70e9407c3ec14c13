#include "shieldkit/alphabet.hpp"

#include "shieldkit/errors.hpp"

namespace shieldkit {

Alphabet::Alphabet(std::vector<std::string> names) : names_(std::move(names)) {
  index_.reserve(names_.size());
  for (std::uint32_t i = 0; i < names_.size(); ++i) {
    if (!index_.emplace(names_[i], i).second) {
      throw ConstructionError("duplicate symbol name '" + names_[i] + "'");
    }
  }
}

std::optional<std::uint32_t> Alphabet::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Alphabet::at(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw ConstructionError("unknown symbol '" + std::string(name) + "'");
}

}  // namespace shieldkit
