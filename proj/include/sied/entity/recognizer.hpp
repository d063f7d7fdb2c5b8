#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sied/entity/rules.hpp"

namespace sied::entity {

struct EntityMention {
  EntityType type;
  std::string surface;
  std::string normalized;
  std::size_t start;  // token offsets, [start, end)
  std::size_t end;

  bool operator==(const EntityMention&) const = default;
};

// Deterministic longest-match recognizer over lowercased tokens. At each
// position it tries every gazetteer entry and every clock pattern, keeps the
// longest match (earliest rule on ties) and resumes after it, so mentions
// never overlap.
class Recognizer {
 public:
  explicit Recognizer(RuleSet rules = default_rules()) : rules_(std::move(rules)) {
    for (std::size_t i = 0; i < rules_.gazetteer.size(); ++i) by_first_[rules_.gazetteer[i].surface.front()].push_back(i);
    for (std::size_t i = 0; i < rules_.numbers.size(); ++i)
      numbers_by_first_[rules_.numbers[i].surface.front()].push_back(i);
  }

  const RuleSet& rules() const { return rules_; }

  std::vector<EntityMention> recognize(const Tokens& tokens) const {
    std::vector<EntityMention> out;
    std::size_t i = 0;
    while (i < tokens.size()) {
      Match best;
      if (auto it = by_first_.find(tokens[i]); it != by_first_.end()) {
        for (auto idx : it->second) {
          const auto& e = rules_.gazetteer[idx];
          if (matches_at(tokens, i, e.surface) && e.surface.size() > best.length) {
            best.length = e.surface.size();
            best.mentions = {EntityMention{e.type, join(e.surface), e.normalized, i, i + e.surface.size()}};
          }
        }
      }
      for (const auto& pattern : rules_.clock_patterns) {
        Match m;
        if (match_pattern(tokens, i, pattern, 0, m) && m.length > best.length) best = std::move(m);
      }
      if (best.length == 0) {
        ++i;
        continue;
      }
      for (auto& m : best.mentions) {
        m.surface = join(Tokens(tokens.begin() + static_cast<long>(m.start), tokens.begin() + static_cast<long>(m.end)));
        out.push_back(std::move(m));
      }
      i += best.length;
    }
    return out;
  }

  // Surface form of an entity value, used to render values that were never
  // seen as text (e.g. times coming back from the knowledge base).
  std::optional<LexEntry> lookup(EntityType type, const std::string& normalized) const {
    for (const auto& e : rules_.gazetteer)
      if (e.type == type && e.normalized == normalized) return e;
    for (const auto& e : rules_.numbers)
      if (e.type == type && e.normalized == normalized) return e;
    return std::nullopt;
  }

 private:
  struct Match {
    std::size_t length = 0;
    std::vector<EntityMention> mentions;
  };

  static bool matches_at(const Tokens& tokens, std::size_t pos, const Tokens& surface) {
    if (pos + surface.size() > tokens.size()) return false;
    for (std::size_t k = 0; k < surface.size(); ++k)
      if (tokens[pos + k] != surface[k]) return false;
    return true;
  }

  // Longest match of pattern[sym..] starting at tokens[pos]; accumulates into
  // `acc` and returns whether the whole pattern matched.
  bool match_pattern(const Tokens& tokens, std::size_t pos, const Tokens& pattern, std::size_t sym, Match& acc) const {
    if (sym == pattern.size()) return true;
    if (pos >= tokens.size()) return false;
    const auto type = parse_entity_type(pattern[sym]);
    if (!type) {
      if (tokens[pos] != pattern[sym]) return false;
      Match next = acc;
      next.length += 1;
      if (!match_pattern(tokens, pos + 1, pattern, sym + 1, next)) return false;
      acc = std::move(next);
      return true;
    }
    auto it = numbers_by_first_.find(tokens[pos]);
    if (it == numbers_by_first_.end()) return false;
    std::optional<Match> best;
    for (auto idx : it->second) {
      const auto& e = rules_.numbers[idx];
      if (e.type != *type || !matches_at(tokens, pos, e.surface)) continue;
      Match next = acc;
      next.length += e.surface.size();
      next.mentions.push_back(EntityMention{e.type, {}, e.normalized, pos, pos + e.surface.size()});
      if (match_pattern(tokens, pos + e.surface.size(), pattern, sym + 1, next) &&
          (!best || next.length > best->length)) {
        best = std::move(next);
      }
    }
    if (!best) return false;
    acc = std::move(*best);
    return true;
  }

  RuleSet rules_;
  std::map<std::string, std::vector<std::size_t>> by_first_;
  std::map<std::string, std::vector<std::size_t>> numbers_by_first_;
};

}  // namespace sied::entity
