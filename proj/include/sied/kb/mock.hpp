#pragma once

#include <algorithm>
#include <functional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "sied/entity/rules.hpp"
#include "sied/kb/types.hpp"
#include "sied/util/rng.hpp"

namespace sied::kb {

// Service for one (origin, destination) pair on one service day.
struct RouteService {
  std::string line;
  int headway = 30;   // minutes
  int first = 300;    // first departure, minutes since midnight
  int travel = 20;    // ride time in minutes
};

inline constexpr int kServiceStart = 5 * 60;
inline constexpr int kServiceEnd = 24 * 60 - 1;

inline std::vector<std::string> known_places() {
  std::vector<std::string> out;
  for (const auto& e : entity::default_rules().gazetteer)
    if (e.type == entity::EntityType::Location) out.push_back(e.normalized);
  return out;
}

// Deterministic timetable: every quantity is a hash of (seed, pair, day), so
// the same query gives the same answer in any process. The clock picks the
// service day; moving it shifts departures.
class MockBackend : public KbBackend {
 public:
  using Clock = std::function<long()>;

  explicit MockBackend(std::uint64_t seed, std::vector<std::string> places = known_places(), Clock clock = nullptr)
      : seed_(seed), places_(places.begin(), places.end()), clock_(std::move(clock)) {}

  void set_clock(Clock clock) { clock_ = std::move(clock); }
  long service_day() const { return clock_ ? clock_() : 0; }
  const std::set<std::string>& places() const { return places_; }
  std::uint64_t seed() const { return seed_; }

  RouteService service(const std::string& origin, const std::string& dest, long day) const {
    const auto pair = combine_seed(seed_, stable_hash(origin + "\x1f" + dest));
    static const int headways[] = {15, 20, 30};
    RouteService s;
    s.headway = headways[pair % 3];
    s.line = std::to_string(1 + (mix64(pair) >> 8) % 99) + static_cast<char>('A' + (mix64(pair + 1) >> 8) % 4);
    s.travel = 10 + static_cast<int>((mix64(pair + 2) >> 8) % 41);
    s.first = kServiceStart + static_cast<int>(combine_seed(pair, static_cast<std::uint64_t>(day)) % s.headway);
    return s;
  }

  std::vector<RouteResult> query(const RouteQuery& q) const override {
    q.validate();
    for (const auto* p : {&q.departure, &q.arrival})
      if (!places_.count(*p)) throw UnknownPlace(*p);
    const auto s = service(q.departure, q.arrival, service_day());
    const int t = q.time.minutes_since_midnight();
    int dep = s.first;
    if (t > dep) dep += ((t - dep + s.headway - 1) / s.headway) * s.headway;
    std::vector<RouteResult> out;
    for (; dep <= kServiceEnd && out.size() < kMaxResults; dep += s.headway)
      out.push_back({s.line, q.departure, q.arrival, dep, dep + s.travel});
    return out;
  }

  // Plain-text dump: one row per ordered pair.
  void export_timetable(std::ostream& os, long day) const {
    os << "# day " << day << "\n# origin\tdestination\tline\theadway\tfirst\tlast\tride_minutes\n";
    for (const auto& a : places_)
      for (const auto& b : places_) {
        if (a == b) continue;
        const auto s = service(a, b, day);
        const int last = s.first + (kServiceEnd - s.first) / s.headway * s.headway;
        os << a << '\t' << b << '\t' << s.line << '\t' << s.headway << '\t' << render_clock(s.first) << '\t'
           << render_clock(last) << '\t' << s.travel << '\n';
      }
  }

  static constexpr std::size_t kMaxResults = 2;

 private:
  std::uint64_t seed_;
  std::set<std::string> places_;
  Clock clock_;
};

}  // namespace sied::kb
