#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sied/corpus/synthetic.hpp"
#include "sied/entity/indexer.hpp"
#include "sied/kb/types.hpp"

namespace sied::service {

class SessionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const char* kFallbackRepeat = "sorry , could you repeat that ?";
inline const char* kFallbackBackend = "sorry , i am having trouble looking up the schedule right now . please try again .";
inline const char* kTurnLimit = "sorry , this is taking too long .";

inline Tokens greeting() { return concat(split_ws(corpus::synth::kWelcome), split_ws(corpus::synth::request_text(corpus::synth::kDep))); }

struct Goal {
  std::string departure;
  std::string arrival;
  kb::ClockTime time;

  std::string text() const {
    return "travel from " + departure + " to " + arrival + " , leaving at " + std::to_string(time.hour) + ":" +
           entity::two_digits(time.minute) + " " + kb::to_string(time.meridiem);
  }
  bool operator==(const Goal&) const = default;
};

inline nlohmann::ordered_json query_to_json(const kb::RouteQuery& q) {
  return {{"departure", q.departure},
          {"arrival", q.arrival},
          {"hour", q.time.hour},
          {"minute", q.time.minute},
          {"meridiem", kb::to_string(q.time.meridiem)}};
}

inline kb::RouteQuery query_from_json(const nlohmann::ordered_json& j) {
  kb::RouteQuery q;
  q.departure = j.at("departure").get<std::string>();
  q.arrival = j.at("arrival").get<std::string>();
  q.time.hour = j.at("hour").get<int>();
  q.time.minute = j.at("minute").get<int>();
  const auto m = kb::parse_meridiem(j.at("meridiem").get<std::string>());
  if (!m) throw std::runtime_error("bad meridiem in query");
  q.time.meridiem = *m;
  return q;
}

inline nlohmann::ordered_json goal_to_json(const Goal& g) {
  auto j = query_to_json({g.departure, g.arrival, g.time});
  j["text"] = g.text();
  return j;
}

inline Goal goal_from_json(const nlohmann::ordered_json& j) {
  const auto q = query_from_json(j);
  return {q.departure, q.arrival, q.time};
}

// One slot token in a decoder output and the value it resolved to, as
// "TYPE:value"; empty when it did not resolve.
struct SlotUse {
  std::string token;
  std::string value;
  bool operator==(const SlotUse&) const = default;
};

// Everything logged about one user turn and the system's answer to it.
struct TurnRecord {
  Tokens user;
  double confidence = 1.0;
  Tokens raw;    // first decoder output, indexed
  Tokens reply;  // what the user saw
  std::vector<SlotUse> slots;               // slot tokens of `raw`
  bool kb_attempted = false;                // `raw` contains [kb-search]
  std::optional<kb::RouteQuery> kb_query;   // compiled from `raw`, when it compiled
  std::optional<kb::RouteQuery> executed;   // query actually run for the reply
  bool invalid = false;                     // `raw` could not be resolved
  bool backend_error = false;
  bool closing = false;                     // reply is the closing utterance, not model output

  bool operator==(const TurnRecord&) const = default;
};

enum class Status { Active, Ended };

struct Rating {
  int correctness = 0;
  int naturalness = 0;
  bool operator==(const Rating&) const = default;
};

struct SessionRecord {
  std::string id;
  std::string model;
  Goal goal;
  Tokens greeting = service::greeting();
  std::vector<TurnRecord> turns;
  Status status = Status::Active;
  bool gave_up = false;
  std::optional<Rating> rating;

  std::size_t user_turns() const { return turns.size(); }
  bool operator==(const SessionRecord&) const = default;
};

// Slot values the user has stated so far, latest wins. A place is the
// departure after "from" and the arrival after "to" (an optional "the" in
// between); a bare place answers whatever the system just asked for.
struct ExpressedSlots {
  std::optional<std::string> departure, arrival;
  std::optional<int> hour, minute;
  std::optional<kb::Meridiem> meridiem;

  bool complete() const { return departure && arrival && hour; }
  bool operator==(const ExpressedSlots&) const = default;
};

inline void update_expressed(ExpressedSlots& e, const Tokens& prompt, const Tokens& user, const entity::Recognizer& rec) {
  using entity::EntityType;
  const auto asked_for = [&](const char* q) { return entity::find_span(prompt, split_ws(q)).has_value(); };
  bool time_seen = false, dep_seen = false, arr_seen = false;
  for (const auto& m : rec.recognize(user)) {
    switch (m.type) {
      case EntityType::Location: {
        std::size_t k = m.start;
        if (k > 0 && user[k - 1] == "the") --k;
        const std::string cue = k > 0 ? user[k - 1] : "";
        bool dep;
        if (cue == "from")
          dep = true;
        else if (cue == "to")
          dep = false;
        else if (asked_for(corpus::synth::request_text(corpus::synth::kDep)))
          dep = !dep_seen;
        else if (asked_for(corpus::synth::request_text(corpus::synth::kArr)))
          dep = arr_seen;
        else
          dep = !e.departure && !dep_seen;
        (dep ? e.departure : e.arrival) = m.normalized;
        (dep ? dep_seen : arr_seen) = true;
        break;
      }
      case EntityType::Hour:
        e.hour = std::stoi(m.normalized);
        if (!time_seen) {
          e.minute = 0;
          e.meridiem.reset();
        }
        time_seen = true;
        break;
      case EntityType::Minute: e.minute = std::stoi(m.normalized); break;
      case EntityType::AmPm: e.meridiem = kb::parse_meridiem(m.normalized); break;
      case EntityType::DateTime: break;
    }
  }
}

inline bool query_matches(const kb::RouteQuery& q, const ExpressedSlots& e) {
  return e.complete() && q.departure == *e.departure && q.arrival == *e.arrival && q.time.hour == *e.hour &&
         q.time.minute == e.minute.value_or(0) && (!e.meridiem || q.time.meridiem == *e.meridiem);
}

inline bool slot_use_correct(const SlotUse& s, const ExpressedSlots& e) {
  const auto colon = s.value.find(':');
  if (colon == std::string::npos) return false;
  const auto type = entity::parse_entity_type(s.value.substr(0, colon));
  const auto v = s.value.substr(colon + 1);
  if (!type) return false;
  switch (*type) {
    case entity::EntityType::Location: return v == e.departure || v == e.arrival;
    case entity::EntityType::Hour: return e.hour && std::stoi(v) == *e.hour;
    case entity::EntityType::Minute: return e.minute && std::stoi(v) == *e.minute;
    case entity::EntityType::AmPm: return e.meridiem && kb::parse_meridiem(v) == e.meridiem;
    case entity::EntityType::DateTime: return true;
  }
  return false;
}

// Expressed slots after each user turn.
inline std::vector<ExpressedSlots> expressed_trace(const SessionRecord& s, const entity::Recognizer& rec) {
  std::vector<ExpressedSlots> out;
  ExpressedSlots e;
  const Tokens* prompt = &s.greeting;
  for (const auto& t : s.turns) {
    update_expressed(e, *prompt, t.user, rec);
    out.push_back(e);
    prompt = &t.reply;
  }
  return out;
}

struct SuccessLabel {
  bool success = false;
  std::optional<kb::RouteQuery> matched;
};

// Success when some executed query agrees with every slot the user had
// expressed by the end of the session.
inline SuccessLabel label_success(const SessionRecord& s, const entity::Recognizer& rec) {
  const auto trace = expressed_trace(s, rec);
  if (trace.empty()) return {};
  for (const auto& t : s.turns)
    if (t.executed && query_matches(*t.executed, trace.back())) return {true, t.executed};
  return {};
}

// --- serialization -------------------------------------------------------

inline nlohmann::ordered_json to_json(const TurnRecord& t) {
  nlohmann::ordered_json slots = nlohmann::ordered_json::array();
  for (const auto& s : t.slots) slots.push_back({{"token", s.token}, {"value", s.value}});
  nlohmann::ordered_json j{{"user", join(t.user)},
                           {"confidence", t.confidence},
                           {"raw", join(t.raw)},
                           {"reply", join(t.reply)},
                           {"slots", slots},
                           {"kb_attempted", t.kb_attempted},
                           {"kb_query", t.kb_query ? query_to_json(*t.kb_query) : nlohmann::ordered_json()},
                           {"executed", t.executed ? query_to_json(*t.executed) : nlohmann::ordered_json()},
                           {"invalid", t.invalid},
                           {"backend_error", t.backend_error},
                           {"closing", t.closing}};
  return j;
}

inline TurnRecord turn_record_from_json(const nlohmann::ordered_json& j) {
  TurnRecord t;
  t.user = split_ws(j.at("user").get<std::string>());
  t.confidence = j.at("confidence").get<double>();
  t.raw = split_ws(j.at("raw").get<std::string>());
  t.reply = split_ws(j.at("reply").get<std::string>());
  for (const auto& s : j.at("slots")) t.slots.push_back({s.at("token").get<std::string>(), s.at("value").get<std::string>()});
  t.kb_attempted = j.at("kb_attempted").get<bool>();
  if (!j.at("kb_query").is_null()) t.kb_query = query_from_json(j.at("kb_query"));
  if (!j.at("executed").is_null()) t.executed = query_from_json(j.at("executed"));
  t.invalid = j.at("invalid").get<bool>();
  t.backend_error = j.at("backend_error").get<bool>();
  t.closing = j.at("closing").get<bool>();
  return t;
}

// Per-session event log: one JSON object per line, appended as things
// happen. Replaying it gives back the session record.
inline nlohmann::ordered_json created_event(const SessionRecord& s) {
  return {{"event", "created"}, {"session", s.id}, {"model", s.model}, {"goal", goal_to_json(s.goal)}, {"greeting", join(s.greeting)}};
}

inline nlohmann::ordered_json turn_event(const TurnRecord& t) { return {{"event", "turn"}, {"turn", to_json(t)}}; }

inline nlohmann::ordered_json ended_event(bool gave_up) { return {{"event", "ended"}, {"gave_up", gave_up}}; }

inline nlohmann::ordered_json rating_event(const Rating& r) {
  return {{"event", "rating"}, {"correctness", r.correctness}, {"naturalness", r.naturalness}};
}

inline SessionRecord replay_events(const std::vector<nlohmann::ordered_json>& events) {
  SessionRecord s;
  bool created = false;
  for (const auto& e : events) {
    const auto kind = e.at("event").get<std::string>();
    if (kind == "created") {
      s.id = e.at("session").get<std::string>();
      s.model = e.at("model").get<std::string>();
      s.goal = goal_from_json(e.at("goal"));
      s.greeting = split_ws(e.at("greeting").get<std::string>());
      created = true;
    } else if (!created) {
      throw std::runtime_error("session log does not start with a created event");
    } else if (kind == "turn") {
      s.turns.push_back(turn_record_from_json(e.at("turn")));
    } else if (kind == "ended") {
      s.status = Status::Ended;
      s.gave_up = e.at("gave_up").get<bool>();
    } else if (kind == "rating") {
      s.rating = Rating{e.at("correctness").get<int>(), e.at("naturalness").get<int>()};
    } else {
      throw std::runtime_error("unknown session event '" + kind + "'");
    }
  }
  if (!created) throw std::runtime_error("empty session log");
  return s;
}

}  // namespace sied::service
