#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sied/corpus/dialog.hpp"
#include "sied/entity/indexer.hpp"
#include "sied/util/rng.hpp"

namespace sied::corpus {

// A consistent renaming of entity values. Values without an entry are kept.
struct ValueSubstitution {
  std::map<std::string, std::string> places;
  std::map<int, int> hours;    // 1-12
  std::map<int, int> minutes;  // 0-59
  bool swap_meridiem = false;

  // Must be injective per type, or two distinct values could merge.
  void validate() const {
    auto injective = [](const auto& m, const char* what) {
      std::vector<typename std::decay_t<decltype(m)>::mapped_type> seen;
      for (const auto& [_, v] : m) seen.push_back(v);
      std::sort(seen.begin(), seen.end());
      if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
        throw std::invalid_argument(std::string("substitution maps two ") + what + " to one value");
    };
    injective(places, "places");
    injective(hours, "hours");
    injective(minutes, "minutes");
    for (const auto& [a, b] : hours)
      if (a < 1 || a > 12 || b < 1 || b > 12) throw std::invalid_argument("hour outside 1-12");
    for (const auto& [a, b] : minutes)
      if (a < 0 || a > 59 || b < 0 || b > 59) throw std::invalid_argument("minute outside 0-59");
  }
};

// Places go to the fresh gazetteer, minutes on the generator's 5-minute grid
// go to off-grid minutes, hours are shuffled and am/pm swapped. Every target
// surface is one the recognizer knows.
inline ValueSubstitution unseen_value_substitution(std::uint64_t seed) {
  Rng rng(seed);
  ValueSubstitution s;
  auto fresh = entity::fresh_places();
  rng.shuffle(fresh);
  for (std::size_t i = 0; i < entity::default_places().size(); ++i) s.places[entity::default_places()[i]] = fresh[i];
  std::vector<int> hours{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  std::vector<int> shuffled = hours;
  rng.shuffle(shuffled);
  for (std::size_t i = 0; i < hours.size(); ++i) s.hours[hours[i]] = shuffled[i];
  std::vector<int> off_grid;
  for (int m = 0; m < 60; ++m)
    if (m % 5) off_grid.push_back(m);
  rng.shuffle(off_grid);
  for (int m = 0, k = 0; m < 60; m += 5) s.minutes[m] = off_grid[static_cast<std::size_t>(k++)];
  s.swap_meridiem = true;
  return s;
}

namespace detail {

inline bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// New surface for one mention, in the same spelling style as the old one.
inline Tokens substitute_mention(const entity::EntityMention& m, const ValueSubstitution& s) {
  using entity::EntityType;
  switch (m.type) {
    case EntityType::Location: {
      const auto it = s.places.find(m.normalized);
      return split_ws(it == s.places.end() ? m.surface : it->second);
    }
    case EntityType::Hour: {
      const int h = std::stoi(m.normalized);
      const auto it = s.hours.find(h);
      const int to = it == s.hours.end() ? h : it->second;
      return {all_digits(m.surface) ? std::to_string(to) : entity::hour_words()[static_cast<std::size_t>(to - 1)]};
    }
    case EntityType::Minute: {
      const int v = std::stoi(m.normalized);
      const auto it = s.minutes.find(v);
      const int to = it == s.minutes.end() ? v : it->second;
      return split_ws(all_digits(m.surface) ? entity::two_digits(to) : entity::minute_words(to));
    }
    case EntityType::AmPm: {
      if (!s.swap_meridiem) return split_ws(m.surface);
      static const std::map<std::string, std::string> flip{{"am", "pm"}, {"pm", "am"}, {"a m", "p m"}, {"p m", "a m"}};
      const auto it = flip.find(m.surface);
      if (it == flip.end()) throw std::invalid_argument("unknown am/pm spelling '" + m.surface + "'");
      return split_ws(it->second);
    }
    case EntityType::DateTime:
      break;
  }
  return split_ws(m.surface);
}

}  // namespace detail

inline Tokens substitute_utterance(const Tokens& tokens, const ValueSubstitution& s, const entity::Recognizer& rec) {
  Tokens out;
  std::size_t pos = 0;
  for (const auto& m : rec.recognize(tokens)) {
    out.insert(out.end(), tokens.begin() + static_cast<long>(pos), tokens.begin() + static_cast<long>(m.start));
    for (auto& w : detail::substitute_mention(m, s)) out.push_back(std::move(w));
    pos = m.end;
  }
  out.insert(out.end(), tokens.begin() + static_cast<long>(pos), tokens.end());
  return out;
}

inline kb::RouteQuery substitute_query(const kb::RouteQuery& q, const ValueSubstitution& s) {
  auto place = [&](const std::string& p) {
    const auto it = s.places.find(p);
    return it == s.places.end() ? p : it->second;
  };
  kb::RouteQuery out = q;
  out.departure = place(q.departure);
  out.arrival = place(q.arrival);
  if (auto it = s.hours.find(q.time.hour); it != s.hours.end()) out.time.hour = it->second;
  if (auto it = s.minutes.find(q.time.minute); it != s.minutes.end()) out.time.minute = it->second;
  if (s.swap_meridiem) out.time.meridiem = q.time.meridiem == kb::Meridiem::AM ? kb::Meridiem::PM : kb::Meridiem::AM;
  return out;
}

// The same dialog with every entity value renamed. Knowledge-base answers are
// re-queried with the renamed arguments and re-rendered in place, since the
// schedule text itself is not a user-supplied value.
inline Dialog substitute_values(const Dialog& d, const ValueSubstitution& s, const entity::Recognizer& rec,
                                const kb::KbBackend& backend) {
  s.validate();
  Dialog out{d.id, {}};
  for (const auto& t : d.turns) {
    Turn nt = t;
    nt.user = substitute_utterance(t.user, s, rec);
    if (!t.kb) {
      nt.system = substitute_utterance(t.system, s, rec);
    } else {
      const auto rendered = split_ws(kb::render_result(t.kb->results));
      const auto at = entity::find_span(t.system, rendered);
      if (!at) throw CorpusValidationError("dialog " + d.id + ": kb answer not found in system turn");
      kb::KbEvent ev{substitute_query(t.kb->query, s), {}};
      ev.results = backend.query(ev.query);
      nt.system = substitute_utterance(Tokens(t.system.begin(), t.system.begin() + static_cast<long>(*at)), s, rec);
      for (auto& w : split_ws(kb::render_result(ev.results))) nt.system.push_back(std::move(w));
      const auto rest = substitute_utterance(Tokens(t.system.begin() + static_cast<long>(*at + rendered.size()), t.system.end()), s, rec);
      nt.system.insert(nt.system.end(), rest.begin(), rest.end());
      nt.kb = std::move(ev);
    }
    out.turns.push_back(std::move(nt));
  }
  return out;
}

}  // namespace sied::corpus
