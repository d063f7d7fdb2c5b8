#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sied/corpus/acts.hpp"
#include "sied/corpus/dialog.hpp"
#include "sied/entity/indexer.hpp"
#include "sied/kb/mock.hpp"
#include "sied/util/rng.hpp"

namespace sied::corpus {

struct SyntheticConfig {
  int n_dialogs = 1000;
  std::vector<std::string> places = entity::default_places();
  std::vector<int> hours{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  std::vector<int> minutes{0, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55};
  std::uint64_t kb_seed = 7;
  std::string id_prefix = "syn";

  double p_low_confidence = 0.2;
  double p_misheard = 0.5;  // given low confidence, one value was misrecognized
  double p_compound = 0.25;
  double p_restate = 0.1;
  double p_bare = 0.4;
  double p_digits = 0.3;
  double p_noise = 0.04;
  double p_help = 0.03;
  double p_fare = 0.03;
  double p_restart = 0.02;
  double p_change = 0.2;  // after a result, ask about another arrival or time
  int max_turns = 20;
};

namespace synth {

inline constexpr double kConfirmThreshold = 0.5;

inline const char* kWelcome = "welcome to the lets go bus information system .";
inline const char* kGoodbye = "thank you for using the lets go bus information system . goodbye .";
inline const char* kAnythingElse = "is there anything else ?";
inline const char* kRepeat = "sorry , i did not catch that .";
inline const char* kCantHelp = "i am sorry , i can not help you with that .";
inline const char* kInstructions =
    "you can tell me where you are leaving from , where you are going , and when you want to travel .";
inline const char* kRestart = "okay , let us start over .";
inline const char* kSorry = "sorry about that .";
inline const char* kOkay = "okay .";

enum SlotId { kDep = 0, kArr = 1, kTime = 2 };

inline const char* request_text(int s) {
  static const char* t[] = {"where are you leaving from ?", "where are you going ?", "when do you want to travel ?"};
  return t[s];
}
inline const char* request_act(int s) {
  static const char* t[] = {"request-departure", "request-arrival", "request-time"};
  return t[s];
}

struct Time {
  int hour, minute;
  kb::Meridiem meridiem;
  bool operator==(const Time&) const = default;
};

struct Value {
  std::string place;  // dep / arr
  Time time{};        // time
  bool operator==(const Value&) const = default;
};

struct Frame {
  std::array<std::optional<Value>, 3> slots;
  bool any() const { return slots[0] || slots[1] || slots[2]; }
};

class Generator {
 public:
  Generator(const SyntheticConfig& cfg, std::uint64_t seed, const entity::Recognizer& rec,
            const kb::MockBackend& backend)
      : cfg_(cfg), rng_(seed), rec_(rec), kb_(backend) {}

  Dialog run(const std::string& id) {
    Dialog d{id, {}};
    goal_ = {Value{pick_place({}), {}}, Value{}, Value{}};
    goal_[kArr]->place = pick_place({goal_[kDep]->place});
    goal_[kTime]->time = pick_time();

    Tokens sys = concat(split_ws(kWelcome), split_ws(request_text(kDep)));
    std::vector<std::string> acts{"welcome", "request-departure"};
    std::optional<kb::KbEvent> kb_event;
    asked_ = kDep;
    changes_left_ = 1;

    while (true) {
      const double conf = draw_confidence();
      Tokens user;
      const auto act = user_turn(conf, user);
      d.turns.push_back({sys, user, conf, acts, kb_event});
      entity::index_utterance(user, table_, rec_);
      kb_event.reset();
      acts.clear();
      if (act == UserAct::Bye || static_cast<int>(d.turns.size()) + 1 >= cfg_.max_turns) {
        d.turns.push_back({split_ws(kGoodbye), {}, 1.0, {"goodbye"}, std::nullopt});
        break;
      }
      sys = respond(act, conf, acts, kb_event);
    }
    return d;
  }

 private:
  enum class UserAct { Inform, Yes, No, Noise, Help, Fare, Restart, Bye };

  double draw_confidence() {
    const double c = rng_.bernoulli(cfg_.p_low_confidence) ? rng_.uniform(0.1, 0.4) : rng_.uniform(0.6, 1.0);
    return std::round(c * 100.0) / 100.0;
  }

  std::string pick_place(const std::vector<std::string>& avoid) {
    while (true) {
      const auto& p = rng_.pick(cfg_.places);
      if (std::find(avoid.begin(), avoid.end(), p) == avoid.end()) return p;
    }
  }

  Time pick_time() {
    return {rng_.pick(cfg_.hours), rng_.pick(cfg_.minutes), rng_.bernoulli(0.5) ? kb::Meridiem::AM : kb::Meridiem::PM};
  }

  Tokens time_words(const Time& t) {
    Tokens out;
    if (rng_.bernoulli(cfg_.p_digits)) {
      out = {std::to_string(t.hour), ":", entity::two_digits(t.minute)};
      out.push_back(t.meridiem == kb::Meridiem::AM ? "am" : "pm");
      return out;
    }
    out = {entity::hour_words()[t.hour - 1]};
    for (auto& w : split_ws(entity::minute_words(t.minute))) out.push_back(w);
    out.push_back(t.meridiem == kb::Meridiem::AM ? "a" : "p");
    out.push_back("m");
    return out;
  }

  // First surface of a value in the dialog's entity table; the system always
  // echoes the user's own wording.
  std::string surface(entity::EntityType type, const std::string& normalized) const {
    const auto idx = table_.find(type, normalized);
    return table_.resolve({type, *idx}).surface;
  }

  Tokens place_surface(const std::string& p) const { return split_ws(surface(entity::EntityType::Location, p)); }

  Tokens time_surface(const Time& t) const {
    Tokens out = split_ws(surface(entity::EntityType::Hour, std::to_string(t.hour)));
    for (auto& w : split_ws(surface(entity::EntityType::Minute, entity::two_digits(t.minute)))) out.push_back(w);
    for (auto& w : split_ws(surface(entity::EntityType::AmPm, kb::to_string(t.meridiem)))) out.push_back(w);
    return out;
  }

  // Cue phrase plus value; later slots in a compound utterance take the
  // shortest cue ("from cmu to airport at ...").
  Tokens slot_phrase(int s, const Value& v, bool bare, bool short_cue = false) {
    static const std::vector<std::vector<const char*>> dep{{"from"}, {"leaving", "from"}, {"i", "am", "leaving", "from"}};
    static const std::vector<std::vector<const char*>> arr{{"to"}, {"going", "to"}, {"i", "want", "to", "go", "to"}};
    static const std::vector<std::vector<const char*>> tim{{"at"}, {"leaving", "at"}, {"i", "want", "to", "leave", "at"}};
    const Tokens value = s == kTime ? time_words(v.time) : split_ws(v.place);
    if (bare) return value;
    const auto& cues = s == kDep ? dep : s == kArr ? arr : tim;
    const auto& cue = short_cue ? cues.front() : rng_.pick(cues);
    Tokens out(cue.begin(), cue.end());
    for (const auto& w : value) out.push_back(w);
    return out;
  }

  Tokens render_frame(const Frame& f, int asked) {
    std::vector<int> present;
    for (int s = 0; s < 3; ++s)
      if (f.slots[s]) present.push_back(s);
    const bool bare = present.size() == 1 && present[0] == asked && rng_.bernoulli(cfg_.p_bare);
    Tokens out;
    for (std::size_t k = 0; k < present.size(); ++k)
      for (auto& w : slot_phrase(present[k], *f.slots[present[k]], bare, k > 0)) out.push_back(std::move(w));
    return out;
  }

  int first_missing() const {
    for (int s = 0; s < 3; ++s)
      if (!confirmed_[s]) return s;
    return -1;
  }

  Value mishear(int s, const Value& v) {
    Value out = v;
    if (s == kTime) {
      while (out.time == v.time) out.time = pick_time();
    } else {
      std::vector<std::string> avoid{goal_[kDep]->place, goal_[kArr]->place};
      for (int k = 0; k < 2; ++k)
        if (values_[k]) avoid.push_back(values_[k]->place);
      out.place = pick_place(avoid);
    }
    return out;
  }

  UserAct user_turn(double conf, Tokens& text) {
    heard_ = Frame{};
    if (!pending_.empty()) {
      bool right = true;
      for (int s : pending_) right = right && values_[s] == goal_[s];
      static const std::vector<const char*> yes{"yes", "yes that is right", "yeah", "correct"};
      static const std::vector<const char*> no{"no", "no that is wrong", "nope"};
      text = split_ws(rng_.pick(right ? yes : no));
      return right ? UserAct::Yes : UserAct::No;
    }
    if (result_given_ && first_missing() < 0) {
      if (changes_left_ > 0 && rng_.bernoulli(cfg_.p_change)) {
        --changes_left_;
        const int s = cfg_.places.size() > 2 && rng_.bernoulli(0.5) ? kArr : kTime;
        if (s == kArr) {
          goal_[kArr]->place = pick_place({goal_[kDep]->place, goal_[kArr]->place});
        } else {
          const auto old = goal_[kTime]->time;
          while (goal_[kTime]->time == old) goal_[kTime]->time = pick_time();
        }
        Frame f;
        f.slots[s] = goal_[s];
        heard_ = maybe_mishear(conf, f);
        text = split_ws("what about");
        for (auto& w : slot_phrase(s, *heard_.slots[s], false)) text.push_back(std::move(w));
        return UserAct::Inform;
      }
      static const std::vector<const char*> bye{"goodbye", "no thank you goodbye", "thank you goodbye", "no thanks bye"};
      text = split_ws(rng_.pick(bye));
      return UserAct::Bye;
    }
    const double r = rng_.uniform();
    double acc = cfg_.p_noise;
    if (r < acc) {
      static const std::vector<const char*> noise{"uh", "um", "hmm", "what", "huh uh"};
      text = split_ws(rng_.pick(noise));
      return UserAct::Noise;
    }
    if (r < (acc += cfg_.p_help)) {
      static const std::vector<const char*> help{"help", "what can i say", "how does this work"};
      text = split_ws(rng_.pick(help));
      return UserAct::Help;
    }
    if (r < (acc += cfg_.p_fare)) {
      static const std::vector<const char*> fare{"how much is the fare", "how much does it cost",
                                                 "can i bring my bike"};
      text = split_ws(rng_.pick(fare));
      return UserAct::Fare;
    }
    if (r < (acc += cfg_.p_restart) && first_missing() != kDep) {
      static const std::vector<const char*> restart{"start over", "let us start over", "i want to start again"};
      text = split_ws(rng_.pick(restart));
      return UserAct::Restart;
    }
    Frame f;
    f.slots[asked_] = goal_[asked_];
    if (rng_.bernoulli(cfg_.p_compound))
      for (int s = asked_ + 1; s < 3; ++s)
        if (!confirmed_[s] && (s == asked_ + 1 || rng_.bernoulli(0.5))) f.slots[s] = goal_[s];
    if (rng_.bernoulli(cfg_.p_restate))
      for (int s = 0; s < 3; ++s)
        if (confirmed_[s] && s != kTime) {
          f.slots[s] = goal_[s];
          break;
        }
    heard_ = maybe_mishear(conf, f);
    text = render_frame(heard_, asked_);
    return UserAct::Inform;
  }

  // With low confidence one of the values may come out of the recognizer
  // wrong; the user text then carries the wrong value.
  Frame maybe_mishear(double conf, const Frame& said) {
    if (conf >= kConfirmThreshold || cfg_.places.size() < 5 || !rng_.bernoulli(cfg_.p_misheard)) return said;
    std::vector<int> fresh;
    for (int s = 0; s < 3; ++s)
      if (said.slots[s] && !(confirmed_[s] && values_[s] == said.slots[s])) fresh.push_back(s);
    if (fresh.empty()) return said;
    const int s = rng_.pick(fresh);
    Frame f = said;
    f.slots[s] = mishear(s, *said.slots[s]);
    return f;
  }

  Tokens kb_answer(std::optional<kb::KbEvent>& kb_event, std::vector<std::string>& acts) {
    kb::RouteQuery q{values_[kDep]->place, values_[kArr]->place,
                     {values_[kTime]->time.hour, values_[kTime]->time.minute, values_[kTime]->time.meridiem}};
    kb::KbEvent ev{q, kb_.query(q)};
    Tokens out = split_ws(kb::render_result(ev.results));
    out.push_back(".");
    for (auto& w : split_ws(kAnythingElse)) out.push_back(std::move(w));
    kb_event = std::move(ev);
    acts.push_back("kb-query");
    acts.push_back("inform-result");
    result_given_ = true;
    return out;
  }

  Tokens next_step(std::optional<kb::KbEvent>& kb_event, std::vector<std::string>& acts) {
    const int s = first_missing();
    if (s < 0) return kb_answer(kb_event, acts);
    asked_ = s;
    acts.push_back(request_act(s));
    return split_ws(request_text(s));
  }

  Tokens implicit_confirm(int s) const {
    if (s == kDep) return concat(split_ws("leaving from"), concat(place_surface(values_[s]->place), {"."}));
    if (s == kArr) return concat(split_ws("going to"), concat(place_surface(values_[s]->place), {"."}));
    return concat(split_ws("traveling at"), concat(time_surface(values_[s]->time), {"."}));
  }

  Tokens explicit_confirm(const std::vector<int>& slots) const {
    Tokens out = split_ws("you want to");
    for (std::size_t k = 0; k < slots.size(); ++k) {
      if (k) out.push_back("and");
      const int s = slots[k];
      if (s == kDep) out = concat(concat(out, split_ws("leave from")), place_surface(values_[s]->place));
      if (s == kArr) out = concat(concat(out, split_ws("go to")), place_surface(values_[s]->place));
      if (s == kTime) out = concat(concat(out, split_ws("travel at")), time_surface(values_[s]->time));
    }
    return concat(out, split_ws(". is that right ?"));
  }

  Tokens respond(UserAct act, double conf, std::vector<std::string>& acts, std::optional<kb::KbEvent>& kb_event) {
    auto with = [&](const char* prefix, const char* prefix_act) {
      if (prefix_act) acts.push_back(prefix_act);
      return concat(split_ws(prefix), next_step(kb_event, acts));
    };
    switch (act) {
      case UserAct::Noise: return with(kRepeat, "repeat");
      case UserAct::Help: return with(kInstructions, "instructions");
      case UserAct::Fare: return with(kCantHelp, "cant-help");
      case UserAct::Restart:
        values_ = {};
        confirmed_ = {};
        return with(kRestart, "restart");
      case UserAct::Yes:
        for (int s : pending_) confirmed_[s] = true;
        pending_.clear();
        return with(kOkay, nullptr);
      case UserAct::No:
        for (int s : pending_) values_[s].reset();
        pending_.clear();
        return with(kSorry, nullptr);
      case UserAct::Bye: break;
      case UserAct::Inform: {
        std::vector<int> fresh;
        for (int s = 0; s < 3; ++s) {
          if (!heard_.slots[s]) continue;
          if (confirmed_[s] && values_[s] == heard_.slots[s]) continue;
          values_[s] = heard_.slots[s];
          confirmed_[s] = false;
          fresh.push_back(s);
        }
        if (fresh.empty()) return next_step(kb_event, acts);
        if (conf < kConfirmThreshold) {
          pending_ = fresh;
          acts.push_back("explicit-confirm");
          return explicit_confirm(fresh);
        }
        Tokens out;
        for (int s : fresh) {
          out = concat(out, implicit_confirm(s));
          confirmed_[s] = true;
        }
        acts.push_back("implicit-confirm");
        return concat(out, next_step(kb_event, acts));
      }
    }
    return {};
  }

  const SyntheticConfig& cfg_;
  Rng rng_;
  const entity::Recognizer& rec_;
  const kb::MockBackend& kb_;
  entity::IndexedEntityTable table_;

  std::array<std::optional<Value>, 3> goal_{};
  std::array<std::optional<Value>, 3> values_{};
  std::array<bool, 3> confirmed_{};
  std::vector<int> pending_;
  Frame heard_;
  int asked_ = kDep;
  int changes_left_ = 1;
  bool result_given_ = false;
};

}  // namespace synth

// Dialogs between the rule-based bus policy and a simulated caller. Each
// dialog gets its own RNG stream so a dialog does not depend on the ones
// generated before it.
inline Dataset generate_synthetic_corpus(const SyntheticConfig& cfg, std::uint64_t seed) {
  if (cfg.places.size() < 2) throw std::invalid_argument("synthetic corpus needs at least two places");
  if (cfg.hours.empty() || cfg.minutes.empty()) throw std::invalid_argument("synthetic corpus needs hours and minutes");
  Dataset ds;
  ds.provenance = Provenance::Synthetic;
  const entity::Recognizer rec;
  const kb::MockBackend backend(cfg.kb_seed);
  for (int i = 0; i < cfg.n_dialogs; ++i) {
    synth::Generator gen(cfg, combine_seed(seed, static_cast<std::uint64_t>(i)), rec, backend);
    char id[32];
    std::snprintf(id, sizeof id, "%s-%05d", cfg.id_prefix.c_str(), i);
    ds.dialogs.push_back(gen.run(id));
  }
  return ds;
}

}  // namespace sied::corpus
