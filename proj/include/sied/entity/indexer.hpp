#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sied/entity/recognizer.hpp"
#include "sied/entity/table.hpp"
#include "sied/kb/types.hpp"

namespace sied::entity {

// What to do with a mention whose value is not in the table.
enum class OnUnknown { Intern, Throw, Unresolved };

namespace detail {

inline Tokens index_mentions(const Tokens& tokens, IndexedEntityTable* table, const IndexedEntityTable& view,
                             const Recognizer& rec, OnUnknown policy) {
  Tokens out;
  std::size_t pos = 0;
  for (const auto& m : rec.recognize(tokens)) {
    out.insert(out.end(), tokens.begin() + static_cast<long>(pos), tokens.begin() + static_cast<long>(m.start));
    pos = m.end;
    if (policy == OnUnknown::Intern) {
      out.push_back(table->intern(m.type, m.normalized, m.surface).token());
      continue;
    }
    if (auto idx = view.find(m.type, m.normalized)) {
      out.push_back(Slot{m.type, *idx}.token());
    } else if (policy == OnUnknown::Unresolved) {
      out.push_back(unresolved_slot_token(m.type));
    } else {
      throw CorpusValidationError("system mentions " + std::string(to_string(m.type)) + " '" + m.surface +
                                  "' that no earlier user turn introduced");
    }
  }
  out.insert(out.end(), tokens.begin() + static_cast<long>(pos), tokens.end());
  return out;
}

}  // namespace detail

// User side: every mention is replaced by its slot, new values extend the table.
inline Tokens index_utterance(const Tokens& tokens, IndexedEntityTable& table, const Recognizer& rec) {
  return detail::index_mentions(tokens, &table, table, rec, OnUnknown::Intern);
}

// System side: values must already be in the table.
inline Tokens index_system_utterance(const Tokens& tokens, const IndexedEntityTable& table, const Recognizer& rec,
                                     OnUnknown policy = OnUnknown::Throw) {
  return detail::index_mentions(tokens, nullptr, table, rec, policy);
}

inline std::optional<std::size_t> find_span(const Tokens& hay, const Tokens& needle) {
  if (needle.empty() || needle.size() > hay.size()) return std::nullopt;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < needle.size() && ok; ++k) ok = hay[i + k] == needle[k];
    if (ok) return i;
  }
  return std::nullopt;
}

inline std::vector<Slot> query_slots(const kb::RouteQuery& q, const IndexedEntityTable& table) {
  const std::vector<std::pair<EntityType, std::string>> args{
      {EntityType::Location, q.departure},
      {EntityType::Location, q.arrival},
      {EntityType::Hour, std::to_string(q.time.hour)},
      {EntityType::Minute, two_digits(q.time.minute)},
      {EntityType::AmPm, kb::to_string(q.time.meridiem)}};
  std::vector<Slot> slots;
  for (const auto& [type, value] : args) {
    auto idx = table.find(type, value);
    if (!idx)
      throw CorpusValidationError("kb query argument " + std::string(to_string(type)) + " '" + value +
                                  "' was never mentioned by the user");
    slots.push_back({type, *idx});
  }
  return slots;
}

// Replaces the rendered KB answer inside a system turn by [kb-search] and the
// query's argument slots; the rest of the turn is indexed as system text.
inline Tokens index_kb_result(const Tokens& system, const std::optional<kb::KbEvent>& event,
                              const IndexedEntityTable& table, const Recognizer& rec,
                              OnUnknown policy = OnUnknown::Throw) {
  if (!event) return index_system_utterance(system, table, rec, policy);
  const auto rendered = split_ws(kb::render_result(event->results));
  const auto at = find_span(system, rendered);
  if (!at) throw CorpusValidationError("kb-bearing system turn does not contain its rendered result");
  const Tokens before(system.begin(), system.begin() + static_cast<long>(*at));
  const Tokens after(system.begin() + static_cast<long>(*at + rendered.size()), system.end());
  Tokens out = index_system_utterance(before, table, rec, policy);
  out.emplace_back(kKbSearch);
  for (const auto& s : query_slots(event->query, table)) out.push_back(s.token());
  for (auto& t : index_system_utterance(after, table, rec, policy)) out.push_back(std::move(t));
  return out;
}

struct KbQuerySpan {
  std::size_t begin;  // position of [kb-search]
  std::size_t end;    // one past the last argument slot
  std::vector<Slot> slots;
};

inline std::optional<KbQuerySpan> extract_kb_query(const Tokens& tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] != kKbSearch) continue;
    KbQuerySpan span{i, i + 1, {}};
    while (span.end < tokens.size()) {
      auto s = parse_slot(tokens[span.end]);
      if (!s) break;
      span.slots.push_back(*s);
      ++span.end;
    }
    return span;
  }
  return std::nullopt;
}

// Argument order is fixed: departure, arrival, hour, minute, am/pm.
inline kb::RouteQuery compile_query(const std::vector<Slot>& slots, const IndexedEntityTable& table) {
  static const EntityType expected[] = {EntityType::Location, EntityType::Location, EntityType::Hour,
                                        EntityType::Minute, EntityType::AmPm};
  std::string got;
  for (const auto& s : slots) got += " " + s.token();
  if (slots.size() != std::size(expected)) throw MalformedQuery("[kb-search] needs 5 arguments, got:" + got);
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (slots[i].type != expected[i]) throw MalformedQuery("[kb-search] arguments out of order:" + got);
  kb::RouteQuery q;
  q.departure = table.resolve(slots[0]).normalized;
  q.arrival = table.resolve(slots[1]).normalized;
  q.time.hour = std::stoi(table.resolve(slots[2]).normalized);
  q.time.minute = std::stoi(table.resolve(slots[3]).normalized);
  q.time.meridiem = *kb::parse_meridiem(table.resolve(slots[4]).normalized);
  q.validate();
  return q;
}

struct Lexicalized {
  Tokens tokens;
  std::optional<kb::KbEvent> kb;
};

// Inverse of indexing. Every slot must resolve (UnresolvedIndex otherwise);
// the first [kb-search] span is executed against the backend and replaced by
// the rendered answer.
inline Lexicalized lexicalize(const Tokens& indexed, const IndexedEntityTable& table, const kb::KbBackend* backend) {
  Lexicalized out;
  const auto span = extract_kb_query(indexed);
  for (std::size_t i = 0; i < indexed.size(); ++i) {
    if (span && i == span->begin) {
      if (backend == nullptr) throw kb::BackendUnavailable("no knowledge base configured");
      kb::KbEvent ev{compile_query(span->slots, table), {}};
      ev.results = backend->query(ev.query);
      for (auto& t : split_ws(kb::render_result(ev.results))) out.tokens.push_back(std::move(t));
      out.kb = std::move(ev);
      i = span->end - 1;
      continue;
    }
    if (auto s = parse_slot(indexed[i])) {
      for (auto& t : split_ws(table.resolve(*s).surface)) out.tokens.push_back(std::move(t));
    } else {
      out.tokens.push_back(indexed[i]);
    }
  }
  return out;
}

// Every recognized mention replaced by "<TYPE:value>"; two utterances that
// differ only in how an entity was spelled share a canonical form.
inline Tokens canonical_form(const Tokens& tokens, const Recognizer& rec) {
  Tokens out;
  std::size_t pos = 0;
  for (const auto& m : rec.recognize(tokens)) {
    out.insert(out.end(), tokens.begin() + static_cast<long>(pos), tokens.begin() + static_cast<long>(m.start));
    out.push_back("<" + std::string(to_string(m.type)) + ":" + m.normalized + ">");
    pos = m.end;
  }
  out.insert(out.end(), tokens.begin() + static_cast<long>(pos), tokens.end());
  return out;
}

}  // namespace sied::entity
