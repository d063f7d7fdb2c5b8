#pragma once

#include <string>

#include <httplib.h>
#include <json.hpp>

#include "sied/service/service.hpp"

namespace sied::service {

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

inline nlohmann::ordered_json parse_body(const httplib::Request& req) {
  if (trim(req.body).empty()) return nlohmann::ordered_json::object();
  auto j = nlohmann::ordered_json::parse(req.body);
  if (!j.is_object()) throw std::invalid_argument("request body must be a JSON object");
  return j;
}

// Runs a handler and maps service errors to HTTP statuses.
template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const UnknownSession& e) {
    send_json(res, 404, {{"error", e.what()}});
  } catch (const UnknownModel& e) {
    send_json(res, 404, {{"error", e.what()}});
  } catch (const SessionError& e) {
    send_json(res, 409, {{"error", e.what()}});
  } catch (const nlohmann::json::exception& e) {
    send_json(res, 400, {{"error", std::string("bad request body: ") + e.what()}});
  } catch (const std::invalid_argument& e) {
    send_json(res, 400, {{"error", e.what()}});
  } catch (const std::out_of_range& e) {
    send_json(res, 400, {{"error", e.what()}});
  } catch (const std::exception& e) {
    send_json(res, 500, {{"error", e.what()}});
  }
}

}  // namespace detail

inline nlohmann::ordered_json transcript_json(const SessionRecord& s) {
  nlohmann::ordered_json turns = nlohmann::ordered_json::array();
  turns.push_back({{"speaker", "system"}, {"text", join(s.greeting)}});
  for (const auto& t : s.turns) {
    turns.push_back({{"speaker", "user"}, {"text", join(t.user)}});
    turns.push_back({{"speaker", "system"}, {"text", join(t.reply)}});
  }
  nlohmann::ordered_json rating;
  if (s.rating) rating = {{"correctness", s.rating->correctness}, {"naturalness", s.rating->naturalness}};
  return {{"session_id", s.id},
          {"goal", goal_to_json(s.goal)},
          {"status", s.status == Status::Ended ? "ended" : "active"},
          {"transcript", turns},
          {"rating", rating}};
}

// Routes:
//   POST /sessions                 {seed?}                  -> {session_id, goal, greeting}
//   POST /sessions/{id}/turns      {text, confidence?}      -> {reply, ended, debug?}
//   POST /sessions/{id}/rating     {correctness, naturalness}
//   GET  /sessions/{id}                                     -> transcript
//   GET  /report                                            -> per-model aggregates
// The model a session talks to is never part of a session payload.
inline void install_routes(httplib::Server& srv, DialogService& svc) {
  using detail::guarded;
  using detail::send_json;
  srv.Post("/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = detail::parse_body(req);
      std::optional<std::uint64_t> seed;
      if (body.contains("seed")) seed = body.at("seed").get<std::uint64_t>();
      const auto s = svc.create_session(std::nullopt, seed);
      send_json(res, 201, {{"session_id", s.id}, {"goal", goal_to_json(s.goal)}, {"greeting", s.greeting}});
    });
  });
  srv.Post(R"(/sessions/([^/]+)/turns)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = detail::parse_body(req);
      if (!body.contains("text") || !body.at("text").is_string()) throw std::invalid_argument("missing 'text'");
      std::optional<double> conf;
      if (body.contains("confidence") && !body.at("confidence").is_null()) conf = body.at("confidence").get<double>();
      const auto r = svc.process_turn(req.matches[1], body.at("text").get<std::string>(), conf);
      nlohmann::ordered_json out{{"reply", r.reply}, {"ended", r.ended}};
      if (svc.config().debug) out["debug"] = to_json(r.debug);
      send_json(res, 200, out);
    });
  });
  srv.Post(R"(/sessions/([^/]+)/rating)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = detail::parse_body(req);
      auto score = [&](const char* k) {
        if (!body.contains(k) || !body.at(k).is_number_integer()) throw std::invalid_argument(std::string("'") + k + "' must be an integer");
        return body.at(k).get<int>();
      };
      const int c = score("correctness"), n = score("naturalness");
      svc.rate_session(req.matches[1], c, n);
      send_json(res, 200, {{"session_id", std::string(req.matches[1])}, {"correctness", c}, {"naturalness", n}});
    });
  });
  srv.Get(R"(/sessions/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, transcript_json(svc.record(req.matches[1]))); });
  });
  srv.Get("/report", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (const auto& r : svc.report()) rows.push_back(to_json(r));
      send_json(res, 200, {{"models", rows}});
    });
  });
}

}  // namespace sied::service
