#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sied/entity/types.hpp"

namespace sied::entity {

struct TableEntry {
  EntityType type;
  int index;
  std::string normalized;
  std::string surface;  // first surface form seen

  bool operator==(const TableEntry&) const = default;
};

// Per-conversation registry of (type, index) <-> value. Indexes are handed
// out per type in order of first appearance. By default a value mentioned
// again keeps its index; with mint_fresh every mention gets a new one.
class IndexedEntityTable {
 public:
  explicit IndexedEntityTable(bool mint_fresh = false) : mint_fresh_(mint_fresh) {}

  bool mint_fresh() const { return mint_fresh_; }
  const std::vector<TableEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  int count(EntityType t) const { return next_[type_index(t)]; }

  // Most recent index carrying this value.
  std::optional<int> find(EntityType t, const std::string& normalized) const {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
      if (it->type == t && it->normalized == normalized) return it->index;
    return std::nullopt;
  }

  const TableEntry* lookup(Slot s) const {
    for (const auto& e : entries_)
      if (e.type == s.type && e.index == s.index) return &e;
    return nullptr;
  }

  const TableEntry& resolve(Slot s) const {
    if (const auto* e = lookup(s)) return *e;
    throw UnresolvedIndex(s);
  }

  Slot intern(EntityType t, const std::string& normalized, const std::string& surface) {
    if (!mint_fresh_)
      if (auto idx = find(t, normalized)) return {t, *idx};
    const int idx = next_[type_index(t)]++;
    entries_.push_back({t, idx, normalized, surface});
    return {t, idx};
  }

  bool operator==(const IndexedEntityTable&) const = default;

 private:
  bool mint_fresh_ = false;
  std::vector<TableEntry> entries_;
  std::array<int, kAllEntityTypes.size()> next_{};
};

inline nlohmann::ordered_json to_json(const IndexedEntityTable& table) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : table.entries())
    arr.push_back({{"slot", Slot{e.type, e.index}.token()}, {"value", e.normalized}, {"surface", e.surface}});
  return arr;
}

inline IndexedEntityTable table_from_json(const nlohmann::ordered_json& arr, bool mint_fresh = false) {
  IndexedEntityTable t(mint_fresh);
  for (const auto& row : arr) {
    const auto slot = parse_slot(row.at("slot").get<std::string>());
    if (!slot) throw CorpusValidationError("bad table slot " + row.at("slot").dump());
    const auto got = t.intern(slot->type, row.at("value").get<std::string>(), row.at("surface").get<std::string>());
    if (!(got == *slot)) throw CorpusValidationError("table rows out of order at " + slot->token());
  }
  return t;
}

}  // namespace sied::entity
