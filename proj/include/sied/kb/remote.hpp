#pragma once

#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "sied/kb/types.hpp"

namespace sied::kb {

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Transport failures (connection refused, timeout) are thrown as
// BackendUnavailable; a response with any status is returned.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& path, const std::string& body, const std::string& content_type) = 0;
};

struct RemoteConfig {
  std::string base_url;
  std::string path = "/directions";
  std::string key;
  int timeout_ms = 5000;
};

// Client for a directions service. One POST per query; the response lists
// routes, and each route contributes the first transit step of its first leg.
class RemoteBackend : public KbBackend {
 public:
  using EpochClock = std::function<long long()>;  // epoch seconds of the service day's midnight

  RemoteBackend(RemoteConfig cfg, std::shared_ptr<HttpTransport> transport, EpochClock day_start)
      : cfg_(std::move(cfg)), transport_(std::move(transport)), day_start_(std::move(day_start)) {
    if (cfg_.timeout_ms <= 0) throw std::invalid_argument("remote backend needs a positive timeout");
  }

  nlohmann::ordered_json request_body(const RouteQuery& q) const {
    return {{"origin", q.departure},
            {"destination", q.arrival},
            {"departure_time", day_start_() + q.time.minutes_since_midnight() * 60LL},
            {"mode", q.mode},
            {"key", cfg_.key}};
  }

  std::vector<RouteResult> query(const RouteQuery& q) const override {
    q.validate();
    const auto resp = transport_->post(cfg_.path, request_body(q).dump(), "application/json");
    if (resp.status != 200) throw BackendUnavailable("directions service returned HTTP " + std::to_string(resp.status));
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(resp.body);
    } catch (const nlohmann::json::exception& e) {
      throw BackendUnavailable(std::string("unreadable directions response: ") + e.what());
    }
    const auto status = body.value("status", std::string{});
    if (status == "ZERO_RESULTS") return {};
    if (status == "NOT_FOUND") throw UnknownPlace(q.departure + " / " + q.arrival);
    if (status != "OK") throw BackendUnavailable("directions service status '" + status + "'");
    std::vector<RouteResult> out;
    const long long midnight = day_start_();
    for (const auto& route : body.value("routes", nlohmann::json::array())) {
      if (out.size() >= 2) break;
      if (!route.contains("legs") || route["legs"].empty()) continue;
      for (const auto& step : route["legs"][0].value("steps", nlohmann::json::array())) {
        if (step.value("travel_mode", std::string{}) != "TRANSIT" || !step.contains("transit_details")) continue;
        const auto& td = step["transit_details"];
        RouteResult r;
        r.line = td.at("line").at("short_name").get<std::string>();
        r.depart_stop = td.at("departure_stop").at("name").get<std::string>();
        r.arrive_stop = td.at("arrival_stop").at("name").get<std::string>();
        r.depart_time = static_cast<int>((td.at("departure_time").at("value").get<long long>() - midnight) / 60);
        r.arrive_time = static_cast<int>((td.at("arrival_time").at("value").get<long long>() - midnight) / 60);
        out.push_back(std::move(r));
        break;
      }
    }
    return out;
  }

  const RemoteConfig& config() const { return cfg_; }

 private:
  RemoteConfig cfg_;
  std::shared_ptr<HttpTransport> transport_;
  EpochClock day_start_;
};

// Serves recorded request/response pairs. Each line of the fixture file is
// {"request": <body json>, "status": <int>, "response": <body json or string>}.
// A request with no recording fails the way a dead backend would.
class ReplayTransport : public HttpTransport {
 public:
  explicit ReplayTransport(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open replay fixture " + path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      const auto& r = j.at("response");
      records_.push_back({j.at("request"), {j.value("status", 200), r.is_string() ? r.get<std::string>() : r.dump()}});
    }
  }

  HttpResponse post(const std::string&, const std::string& body, const std::string&) override {
    const auto req = nlohmann::json::parse(body);
    requests_.push_back(req);
    for (const auto& [recorded, resp] : records_)
      if (recorded == req) return resp;
    throw BackendUnavailable("no recorded response for request " + body);
  }

  const std::vector<nlohmann::json>& requests() const { return requests_; }

 private:
  std::vector<std::pair<nlohmann::json, HttpResponse>> records_;
  std::vector<nlohmann::json> requests_;
};

}  // namespace sied::kb
