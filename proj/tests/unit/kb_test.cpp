#include <gtest/gtest.h>

#include <regex>
#include <sstream>

#include "sied/kb/mock.hpp"
#include "sied/kb/remote.hpp"

using namespace sied::kb;

namespace {

RouteQuery q(const char* a, const char* b, int h, int m, Meridiem mer) { return {a, b, {h, m, mer}}; }

// Brute force over the whole service day of one pair.
std::vector<int> all_departures(const RouteService& s) {
  std::vector<int> out;
  for (int t = s.first; t <= kServiceEnd; t += s.headway) out.push_back(t);
  return out;
}

}  // namespace

TEST(ClockTime, MinutesRoundTrip) {
  for (int t = 0; t < 1440; ++t) EXPECT_EQ(ClockTime::from_minutes(t).minutes_since_midnight(), t);
  EXPECT_EQ((ClockTime{12, 5, Meridiem::AM}).minutes_since_midnight(), 5);
  EXPECT_EQ((ClockTime{12, 0, Meridiem::PM}).minutes_since_midnight(), 720);
}

TEST(Mock, NextTwoDeparturesMatchTimetable) {
  const MockBackend mock(7);
  const auto query = q("cmu", "airport", 10, 30, Meridiem::AM);
  const auto res = mock.query(query);
  const auto svc = mock.service("cmu", "airport", 0);
  std::vector<int> expected;
  for (int t : all_departures(svc))
    if (t >= 630 && expected.size() < 2) expected.push_back(t);
  ASSERT_EQ(res.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(res[i].depart_time, expected[i]);
    EXPECT_EQ(res[i].arrive_time, expected[i] + svc.travel);
    EXPECT_EQ(res[i].line, svc.line);
    EXPECT_EQ(res[i].depart_stop, "cmu");
    EXPECT_EQ(res[i].arrive_stop, "airport");
  }
  EXPECT_EQ(mock.query(query), res);
  EXPECT_EQ(MockBackend(7).query(query), res);
}

TEST(Mock, TimetableShape) {
  const MockBackend mock(11);
  const std::regex line_re("[0-9]{1,2}[A-D]");
  for (const auto& a : mock.places())
    for (const auto& b : mock.places()) {
      if (a == b) continue;
      const auto s = mock.service(a, b, 0);
      EXPECT_TRUE(s.headway == 15 || s.headway == 20 || s.headway == 30);
      EXPECT_TRUE(std::regex_match(s.line, line_re)) << s.line;
      EXPECT_GE(s.first, kServiceStart);
      EXPECT_LT(s.first, kServiceStart + s.headway);
    }
}

TEST(Mock, ResultsSortedAndNotBeforeQuery) {
  const MockBackend mock(5);
  sied::Rng rng(1);
  const std::vector<std::string> places(mock.places().begin(), mock.places().end());
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = rng.pick(places);
    auto b = rng.pick(places);
    if (a == b) continue;
    const int t = static_cast<int>(rng.below(1440));
    const auto ct = ClockTime::from_minutes(t);
    const auto res = mock.query({a, b, ct});
    EXPECT_LE(res.size(), 2u);
    for (std::size_t i = 0; i < res.size(); ++i) {
      EXPECT_GE(res[i].depart_time, t);
      EXPECT_GE(res[i].arrive_time, res[i].depart_time);
      if (i) {
        EXPECT_LT(res[i - 1].depart_time, res[i].depart_time);
      }
    }
    if (t < kServiceStart) {
      EXPECT_EQ(res.size(), 2u);
    }
  }
}

TEST(Mock, LateNightHasNoBus) {
  const MockBackend mock(7);
  const auto svc = mock.service("cmu", "airport", 0);
  const int last = all_departures(svc).back();
  EXPECT_TRUE(mock.query({"cmu", "airport", ClockTime::from_minutes(last + 1)}).empty());
}

TEST(Mock, Errors) {
  const MockBackend mock(7);
  EXPECT_THROW(mock.query(q("cmu", "cmu", 10, 30, Meridiem::AM)), MalformedQuery);
  try {
    mock.query(q("atlantis", "cmu", 10, 30, Meridiem::AM));
    FAIL();
  } catch (const UnknownPlace& e) {
    EXPECT_EQ(e.place, "atlantis");
  }
  EXPECT_THROW(mock.query(q("cmu", "airport", 13, 0, Meridiem::AM)), MalformedQuery);
}

TEST(Mock, ClockMovesTimetable) {
  long day = 0;
  const MockBackend mock(7, known_places(), [&day] { return day; });
  const auto query = q("cmu", "airport", 10, 30, Meridiem::AM);
  bool changed = false;
  const auto first = mock.query(query);
  for (day = 1; day < 10 && !changed; ++day) changed = mock.query(query) != first;
  EXPECT_TRUE(changed);
}

TEST(Mock, ExportListsEveryPair) {
  const MockBackend mock(7, {"cmu", "airport", "oakland"});
  std::ostringstream os;
  mock.export_timetable(os, 0);
  const auto text = os.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2 + 6);
  EXPECT_NE(text.find("cmu\tairport\t" + mock.service("cmu", "airport", 0).line), std::string::npos);
}

TEST(Render, Templates) {
  EXPECT_EQ(render_result({{"61C", "cmu", "airport", 635, 660}}), "the next bus is 61C leaving at 10 35 a m");
  EXPECT_EQ(render_result({}), "i am sorry i could not find any bus for that trip");
  EXPECT_EQ(render_result({{"61C", "a", "b", 635, 660}, {"61C", "a", "b", 665, 690}}),
            "the next bus is 61C leaving at 10 35 a m , then 61C leaving at 11 05 a m");
  EXPECT_EQ(render_clock(12 * 60 + 5), "12 05 p m");
  EXPECT_EQ(render_clock(0), "12 00 a m");
}

namespace {

RemoteBackend replay_backend(std::shared_ptr<ReplayTransport> t) {
  return RemoteBackend({"http://directions.invalid", "/directions", "test-key", 2000}, std::move(t),
                       [] { return 1699920000LL; });
}

}  // namespace

TEST(Remote, MapsFirstTransitStepOfEachRoute) {
  auto transport = std::make_shared<ReplayTransport>(std::string(SIED_TEST_FIXTURES) + "/remote_replay.jsonl");
  const auto backend = replay_backend(transport);
  const auto res = backend.query(q("cmu", "airport", 10, 30, Meridiem::AM));
  ASSERT_EQ(res.size(), 2u);
  EXPECT_EQ(res[0], (RouteResult{"61C", "forbes ave at morewood", "airport", 635, 662}));
  EXPECT_EQ(res[1], (RouteResult{"28X", "forbes ave at craig", "airport", 650, 690}));
  ASSERT_EQ(transport->requests().size(), 1u);
  EXPECT_EQ(transport->requests()[0]["mode"], "TRANSIT");
  EXPECT_EQ(transport->requests()[0]["departure_time"], 1699920000LL + 630 * 60);
}

TEST(Remote, EmptyIsNotFailure) {
  auto transport = std::make_shared<ReplayTransport>(std::string(SIED_TEST_FIXTURES) + "/remote_replay.jsonl");
  const auto backend = replay_backend(transport);
  EXPECT_TRUE(backend.query(q("oakland", "downtown", 11, 0, Meridiem::PM)).empty());
  EXPECT_THROW(backend.query(q("downtown", "cmu", 9, 0, Meridiem::AM)), BackendUnavailable);
  EXPECT_THROW(backend.query(q("cmu", "oakland", 9, 0, Meridiem::AM)), BackendUnavailable);
  EXPECT_THROW(backend.query(q("cmu", "cmu", 9, 0, Meridiem::AM)), MalformedQuery);
}
