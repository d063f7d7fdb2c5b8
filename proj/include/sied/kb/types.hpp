#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sied/entity/types.hpp"

namespace sied::kb {

using entity::MalformedQuery;

class UnknownPlace : public std::runtime_error {
 public:
  explicit UnknownPlace(const std::string& place) : std::runtime_error("unknown place: " + place), place(place) {}
  std::string place;
};

class BackendUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Meridiem { AM, PM };

inline std::string to_string(Meridiem m) { return m == Meridiem::AM ? "am" : "pm"; }

inline std::optional<Meridiem> parse_meridiem(const std::string& s) {
  if (s == "am") return Meridiem::AM;
  if (s == "pm") return Meridiem::PM;
  return std::nullopt;
}

// 12-hour wall clock time.
struct ClockTime {
  int hour = 12;
  int minute = 0;
  Meridiem meridiem = Meridiem::AM;

  bool valid() const { return hour >= 1 && hour <= 12 && minute >= 0 && minute <= 59; }
  int minutes_since_midnight() const { return (hour % 12 + (meridiem == Meridiem::PM ? 12 : 0)) * 60 + minute; }
  static ClockTime from_minutes(int total) {
    total = ((total % 1440) + 1440) % 1440;
    const int h24 = total / 60;
    return {h24 % 12 == 0 ? 12 : h24 % 12, total % 60, h24 < 12 ? Meridiem::AM : Meridiem::PM};
  }
  bool operator==(const ClockTime&) const = default;
};

inline constexpr const char* kTransit = "TRANSIT";

struct RouteQuery {
  std::string departure;
  std::string arrival;
  ClockTime time;
  std::string mode = kTransit;

  void validate() const {
    if (departure.empty() || arrival.empty()) throw MalformedQuery("route query needs departure and arrival");
    if (departure == arrival) throw MalformedQuery("departure and arrival are both '" + departure + "'");
    if (!time.valid()) throw MalformedQuery("departure time out of range");
    if (mode != kTransit) throw MalformedQuery("travel mode must be TRANSIT");
  }
  bool operator==(const RouteQuery&) const = default;
};

// Times are minutes since midnight of the service day.
struct RouteResult {
  std::string line;
  std::string depart_stop;
  std::string arrive_stop;
  int depart_time = 0;
  int arrive_time = 0;

  bool operator==(const RouteResult&) const = default;
};

// A query the system issued together with what came back.
struct KbEvent {
  RouteQuery query;
  std::vector<RouteResult> results;

  bool operator==(const KbEvent&) const = default;
};

class KbBackend {
 public:
  virtual ~KbBackend() = default;
  virtual std::vector<RouteResult> query(const RouteQuery& q) const = 0;
};

inline std::string render_clock(int minutes) {
  const auto t = ClockTime::from_minutes(minutes);
  return std::to_string(t.hour) + " " + (t.minute < 10 ? "0" : "") + std::to_string(t.minute) + " " +
         (t.meridiem == Meridiem::AM ? "a m" : "p m");
}

inline constexpr const char* kNoRouteText = "i am sorry i could not find any bus for that trip";

// The single response template for schedule answers.
inline std::string render_result(const std::vector<RouteResult>& results) {
  if (results.empty()) return kNoRouteText;
  std::string s = "the next bus is " + results[0].line + " leaving at " + render_clock(results[0].depart_time);
  for (std::size_t i = 1; i < results.size(); ++i)
    s += " , then " + results[i].line + " leaving at " + render_clock(results[i].depart_time);
  return s;
}

}  // namespace sied::kb
