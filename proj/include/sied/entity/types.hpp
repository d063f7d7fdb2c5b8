#pragma once

#include <array>
#include <charconv>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sied::entity {

enum class EntityType { Location, Hour, Minute, AmPm, DateTime };

inline constexpr std::array<EntityType, 5> kAllEntityTypes{EntityType::Location, EntityType::Hour,
                                                           EntityType::Minute, EntityType::AmPm,
                                                           EntityType::DateTime};

inline constexpr std::size_t type_index(EntityType t) { return static_cast<std::size_t>(t); }

inline std::string_view to_string(EntityType t) {
  switch (t) {
    case EntityType::Location: return "LOCATION";
    case EntityType::Hour: return "HOUR";
    case EntityType::Minute: return "MINUTE";
    case EntityType::AmPm: return "AMPM";
    case EntityType::DateTime: return "DATETIME";
  }
  return "?";
}

inline std::optional<EntityType> parse_entity_type(std::string_view s) {
  for (auto t : kAllEntityTypes)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

inline constexpr std::string_view kKbSearch = "[kb-search]";

// A typed, occurrence-ordered entity reference such as [LOCATION-1].
struct Slot {
  EntityType type;
  int index;

  std::string token() const { return "[" + std::string(to_string(type)) + "-" + std::to_string(index) + "]"; }
  bool operator==(const Slot&) const = default;
};

inline std::optional<Slot> parse_slot(std::string_view tok) {
  if (tok.size() < 5 || tok.front() != '[' || tok.back() != ']') return std::nullopt;
  const auto inner = tok.substr(1, tok.size() - 2);
  const auto dash = inner.rfind('-');
  if (dash == std::string_view::npos) return std::nullopt;
  const auto type = parse_entity_type(inner.substr(0, dash));
  if (!type) return std::nullopt;
  const auto digits = inner.substr(dash + 1);
  int idx = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || digits.empty() || idx < 0) return std::nullopt;
  return Slot{*type, idx};
}

enum class TokenKind { Word, Slot, KbSearch };

inline TokenKind classify_token(std::string_view tok) {
  if (tok == kKbSearch) return TokenKind::KbSearch;
  if (parse_slot(tok)) return TokenKind::Slot;
  return TokenKind::Word;
}

// Token that looks like a slot of the given type but can never resolve; used
// when indexing text against a table that lacks the value.
inline std::string unresolved_slot_token(EntityType t) { return "[" + std::string(to_string(t)) + "-?]"; }

class UnresolvedIndex : public std::runtime_error {
 public:
  explicit UnresolvedIndex(Slot s)
      : std::runtime_error(s.token() + " cannot be found in the indexed entity table"), slot(s) {}
  Slot slot;
};

class MalformedQuery : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CorpusValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sied::entity
