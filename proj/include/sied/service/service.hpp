#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sied/model/sied_model.hpp"
#include "sied/service/report.hpp"
#include "sied/service/session.hpp"

namespace sied::service {

class UnknownSession : public SessionError {
 public:
  explicit UnknownSession(const std::string& id) : SessionError("unknown session " + id) {}
};

class SessionEnded : public SessionError {
 public:
  explicit SessionEnded(const std::string& id) : SessionError("session " + id + " has ended") {}
};

class UnknownModel : public SessionError {
 public:
  explicit UnknownModel(const std::string& id) : SessionError("unknown model " + id) {}
};

// What the service needs from a response generator.
class ResponseModel {
 public:
  virtual ~ResponseModel() = default;
  virtual model::DecodeResult decode(const std::vector<model::HistoryTurn>& history,
                                     const model::DecodeOptions& opt) const = 0;
  virtual const corpus::Vocabulary& system_vocab() const = 0;
};

class SiedResponder : public ResponseModel {
 public:
  explicit SiedResponder(std::shared_ptr<const model::SiedModel> m) : m_(std::move(m)) {}
  model::DecodeResult decode(const std::vector<model::HistoryTurn>& history, const model::DecodeOptions& opt) const override {
    return m_->decode(history, opt);
  }
  const corpus::Vocabulary& system_vocab() const override { return m_->system_vocab(); }

 private:
  std::shared_ptr<const model::SiedModel> m_;
};

// Invalid decoder output either becomes the fixed repeat request, or the
// decoder is run again with the unresolvable slot tokens banned (falling
// back to the repeat request if that is still unusable).
enum class FallbackMode { Repeat, Mask };

struct ServiceConfig {
  bool debug = false;
  FallbackMode fallback = FallbackMode::Repeat;
  std::size_t turn_cap = 30;
  std::string log_dir;  // empty: no logs
  std::uint64_t seed = 1;
  std::vector<std::string> goal_places = entity::default_places();
};

struct TurnDebug {
  std::vector<entity::EntityMention> mentions;
  Tokens indexed_user;
  Tokens raw;
  Tokens resolved;
  std::optional<kb::KbEvent> kb;
  std::vector<std::vector<double>> attention;  // per emitted token, over turns
  bool invalid = false;
  bool masked_retry = false;
  nlohmann::ordered_json table;
};

inline nlohmann::ordered_json to_json(const TurnDebug& d) {
  nlohmann::ordered_json mentions = nlohmann::ordered_json::array();
  for (const auto& m : d.mentions)
    mentions.push_back({{"type", std::string(entity::to_string(m.type))}, {"surface", m.surface}, {"value", m.normalized}});
  nlohmann::ordered_json kb;
  if (d.kb) {
    nlohmann::ordered_json results = nlohmann::ordered_json::array();
    for (const auto& r : d.kb->results)
      results.push_back({{"line", r.line}, {"depart", kb::render_clock(r.depart_time)}, {"arrive", kb::render_clock(r.arrive_time)}});
    kb = {{"query", query_to_json(d.kb->query)}, {"results", results}};
  }
  return {{"mentions", mentions},     {"indexed_user", join(d.indexed_user)}, {"raw_output", join(d.raw)},
          {"resolved", join(d.resolved)}, {"kb", kb},                          {"attention", d.attention},
          {"invalid_output", d.invalid}, {"masked_retry", d.masked_retry},     {"table", d.table}};
}

struct CreatedSession {
  std::string id;
  Goal goal;
  std::string greeting;
};

struct TurnResult {
  std::string reply;
  bool ended = false;
  TurnDebug debug;
};

inline bool is_goodbye(const Tokens& user) {
  for (const auto& t : user)
    if (t == "goodbye" || t == "bye") return true;
  return false;
}

inline Goal sample_goal(Rng& rng, const std::vector<std::string>& places) {
  if (places.size() < 2) throw std::invalid_argument("goal sampling needs two places");
  Goal g;
  g.departure = rng.pick(places);
  do g.arrival = rng.pick(places);
  while (g.arrival == g.departure);
  g.time.hour = 1 + static_cast<int>(rng.below(12));
  g.time.minute = 5 * static_cast<int>(rng.below(12));
  g.time.meridiem = rng.bernoulli(0.5) ? kb::Meridiem::AM : kb::Meridiem::PM;
  return g;
}

// User-side entity table of a transcript, rebuilt from scratch.
inline entity::IndexedEntityTable rederive_table(const SessionRecord& s, const entity::Recognizer& rec) {
  entity::IndexedEntityTable t;
  for (const auto& turn : s.turns) entity::index_utterance(turn.user, t, rec);
  return t;
}

class DialogService {
 public:
  DialogService(std::map<std::string, std::shared_ptr<const ResponseModel>> models,
                std::shared_ptr<const kb::KbBackend> backend, ServiceConfig cfg = {},
                entity::Recognizer rec = entity::Recognizer())
      : models_(std::move(models)), backend_(std::move(backend)), cfg_(std::move(cfg)), rec_(std::move(rec)),
        ab_rng_(combine_seed(cfg_.seed, 0xab)) {
    if (models_.empty()) throw std::invalid_argument("dialog service needs at least one model");
    for (const auto& [name, m] : models_)
      if (!m) throw std::invalid_argument("model " + name + " is null");
    if (!cfg_.log_dir.empty()) std::filesystem::create_directories(cfg_.log_dir);
  }

  const ServiceConfig& config() const { return cfg_; }
  const entity::Recognizer& recognizer() const { return rec_; }

  // With no model id, one is drawn uniformly from the registered models.
  CreatedSession create_session(const std::optional<std::string>& model_id = std::nullopt,
                                std::optional<std::uint64_t> seed = std::nullopt) {
    std::lock_guard lock(mu_);
    std::string chosen;
    if (model_id) {
      if (!models_.count(*model_id)) throw UnknownModel(*model_id);
      chosen = *model_id;
    } else {
      auto it = models_.begin();
      std::advance(it, static_cast<long>(ab_rng_.below(models_.size())));
      chosen = it->first;
    }
    const auto n = counter_++;
    Rng goal_rng(seed ? *seed : combine_seed(cfg_.seed, n));
    auto s = std::make_shared<Live>();
    char id[32];
    std::snprintf(id, sizeof id, "s%06llu", static_cast<unsigned long long>(n));
    s->rec.id = id;
    s->rec.model = chosen;
    s->rec.goal = sample_goal(goal_rng, cfg_.goal_places);
    s->history.push_back({s->rec.greeting, {}, 1.0});
    s->model = models_.at(chosen);
    if (!cfg_.log_dir.empty()) {
      s->log.emplace(std::filesystem::path(cfg_.log_dir) / (s->rec.id + ".jsonl"), std::ios::app);
      if (!*s->log) throw std::runtime_error("cannot open session log in " + cfg_.log_dir);
    }
    log(*s, created_event(s->rec));
    sessions_[s->rec.id] = s;
    return {s->rec.id, s->rec.goal, join(s->rec.greeting)};
  }

  TurnResult process_turn(const std::string& id, const std::string& text, std::optional<double> confidence = std::nullopt) {
    auto s = get(id);
    std::lock_guard lock(s->mu);
    if (s->rec.status == Status::Ended) throw SessionEnded(id);
    const double conf = confidence.value_or(1.0);
    if (!(conf >= 0.0 && conf <= 1.0)) throw std::invalid_argument("confidence must be in [0, 1]");

    TurnRecord t;
    TurnDebug dbg;
    t.user = tokenize(text);
    t.confidence = conf;
    dbg.mentions = rec_.recognize(t.user);
    dbg.indexed_user = entity::index_utterance(t.user, s->table, rec_);
    s->history.back().user = dbg.indexed_user;
    s->history.back().confidence = conf;

    bool end = false;
    if (is_goodbye(t.user)) {
      t.reply = split_ws(corpus::synth::kGoodbye);
      t.closing = true;
      end = true;
    } else if (s->rec.turns.size() + 1 >= cfg_.turn_cap) {
      t.reply = concat(split_ws(kTurnLimit), split_ws(corpus::synth::kGoodbye));
      t.closing = true;
      end = true;
      s->rec.gave_up = true;
    } else {
      respond(*s, t, dbg);
    }
    dbg.resolved = t.reply;
    dbg.table = entity::to_json(s->table);

    s->rec.turns.push_back(t);
    log(*s, turn_event(t));
    if (end) {
      s->rec.status = Status::Ended;
      log(*s, ended_event(s->rec.gave_up));
    } else {
      std::optional<kb::KbEvent> ev;
      if (dbg.kb) ev = dbg.kb;
      Tokens indexed_reply;
      try {
        indexed_reply = entity::index_kb_result(t.reply, ev, s->table, rec_, entity::OnUnknown::Unresolved);
      } catch (const std::exception&) {
        indexed_reply = t.raw;
      }
      s->history.push_back({indexed_reply, {}, 1.0});
    }
    return {join(t.reply), end, std::move(dbg)};
  }

  void rate_session(const std::string& id, int correctness, int naturalness) {
    auto s = get(id);
    std::lock_guard lock(s->mu);
    if (correctness < 1 || correctness > 5 || naturalness < 1 || naturalness > 5)
      throw std::out_of_range("ratings are integers from 1 to 5");
    if (s->rec.status != Status::Ended) throw SessionError("session " + id + " is still active");
    if (s->rec.rating) throw SessionError("session " + id + " was already rated");
    s->rec.rating = Rating{correctness, naturalness};
    log(*s, rating_event(*s->rec.rating));
  }

  SessionRecord record(const std::string& id) const {
    auto s = get(id);
    std::lock_guard lock(s->mu);
    return s->rec;
  }

  entity::IndexedEntityTable table(const std::string& id) const {
    auto s = get(id);
    std::lock_guard lock(s->mu);
    return s->table;
  }

  std::vector<SessionRecord> records() const {
    std::vector<std::shared_ptr<Live>> all;
    {
      std::lock_guard lock(mu_);
      for (const auto& [_, s] : sessions_) all.push_back(s);
    }
    std::vector<SessionRecord> out;
    for (const auto& s : all) {
      std::lock_guard lock(s->mu);
      out.push_back(s->rec);
    }
    return out;
  }

  SuccessLabel label(const std::string& id) const {
    const auto r = record(id);
    if (r.status != Status::Ended) throw SessionError("session " + id + " is still active");
    return label_success(r, rec_);
  }

  std::vector<ModelReport> report() const { return session_report(records(), rec_); }

 private:
  struct Live {
    std::mutex mu;
    SessionRecord rec;
    entity::IndexedEntityTable table;
    std::vector<model::HistoryTurn> history;
    std::shared_ptr<const ResponseModel> model;
    std::optional<std::ofstream> log;
  };

  std::shared_ptr<Live> get(const std::string& id) const {
    std::lock_guard lock(mu_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw UnknownSession(id);
    return it->second;
  }

  void log(Live& s, const nlohmann::ordered_json& event) {
    if (!s.log) return;
    *s.log << event.dump() << '\n';
    s.log->flush();
  }

  // Decode, resolve slots, run the query. Sets reply, raw and the flags.
  void respond(Live& s, TurnRecord& t, TurnDebug& dbg) {
    auto r = s.model->decode(s.history, {});
    t.raw = r.tokens;
    dbg.raw = r.tokens;
    dbg.attention = std::move(r.attention);
    for (const auto& tok : t.raw) {
      const auto slot = entity::parse_slot(tok);
      if (!slot) continue;
      const auto* e = s.table.lookup(*slot);
      t.slots.push_back({tok, e ? std::string(entity::to_string(e->type)) + ":" + e->normalized : ""});
    }
    if (const auto span = entity::extract_kb_query(t.raw)) {
      t.kb_attempted = true;
      try {
        t.kb_query = entity::compile_query(span->slots, s.table);
      } catch (const std::exception&) {
      }
    }

    Tokens candidate = t.raw;
    for (int attempt = 0; attempt < 2; ++attempt) {
      try {
        auto lex = entity::lexicalize(candidate, s.table, backend_.get());
        t.reply = std::move(lex.tokens);
        if (lex.kb) {
          t.executed = lex.kb->query;
          dbg.kb = std::move(lex.kb);
        }
        return;
      } catch (const entity::UnresolvedIndex&) {
      } catch (const entity::MalformedQuery&) {
      } catch (const kb::UnknownPlace&) {
        t.backend_error = true;
        t.reply = split_ws(kFallbackBackend);
        return;
      } catch (const kb::BackendUnavailable&) {
        t.backend_error = true;
        t.reply = split_ws(kFallbackBackend);
        return;
      }
      t.invalid = true;
      dbg.invalid = true;
      if (cfg_.fallback != FallbackMode::Mask || attempt > 0) break;
      model::DecodeOptions opt;
      const auto& vocab = s.model->system_vocab();
      opt.banned.assign(vocab.size(), false);
      for (std::size_t i = 0; i < vocab.size(); ++i)
        if (const auto slot = entity::parse_slot(vocab.token(i)); slot && !s.table.lookup(*slot)) opt.banned[i] = true;
      candidate = s.model->decode(s.history, opt).tokens;
      dbg.masked_retry = true;
    }
    t.reply = split_ws(kFallbackRepeat);
  }

  std::map<std::string, std::shared_ptr<const ResponseModel>> models_;
  std::shared_ptr<const kb::KbBackend> backend_;
  ServiceConfig cfg_;
  entity::Recognizer rec_;
  mutable std::mutex mu_;
  Rng ab_rng_;
  std::uint64_t counter_ = 0;
  std::map<std::string, std::shared_ptr<Live>> sessions_;
};

inline std::vector<SessionRecord> load_session_logs(const std::string& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<SessionRecord> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::vector<nlohmann::ordered_json> events;
    std::string line;
    while (std::getline(in, line))
      if (!trim(line).empty()) events.push_back(nlohmann::ordered_json::parse(line));
    out.push_back(replay_events(events));
  }
  return out;
}

}  // namespace sied::service
