#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sied/entity/types.hpp"
#include "sied/util/text.hpp"

namespace sied::entity {

struct LexEntry {
  EntityType type;
  Tokens surface;
  std::string normalized;

  bool operator==(const LexEntry&) const = default;
};

// Rule tables for the recognizer. Gazetteer entries (LOCATION, DATETIME)
// match anywhere; number entries (HOUR, MINUTE, AMPM) only match inside a
// clock pattern. A pattern is a sequence of HOUR / MINUTE / AMPM symbols and
// literal tokens, e.g. "HOUR : MINUTE AMPM".
struct RuleSet {
  std::vector<LexEntry> gazetteer;
  std::vector<LexEntry> numbers;
  std::vector<Tokens> clock_patterns;

  bool operator==(const RuleSet&) const = default;
};

inline const std::vector<std::string>& default_places() {
  static const std::vector<std::string> places{
      "cmu",           "airport",      "downtown",      "oakland",      "squirrel hill",
      "shadyside",     "east liberty", "south side",    "forbes avenue", "fifth avenue",
      "north side",    "mount lebanon", "bloomfield",   "lawrenceville", "greenfield",
      "highland park", "wilkinsburg",  "homestead",     "carnegie",     "station square"};
  return places;
}

// Places never used when generating training data; the recognizer knows
// them, models trained on the default corpus have never seen them.
inline const std::vector<std::string>& fresh_places() {
  static const std::vector<std::string> places{
      "mckeesport",   "monroeville",  "bethel park",   "robinson",   "sewickley",
      "penn hills",   "brookline",    "polish hill",   "hazelwood",  "point breeze",
      "regent square", "swissvale",   "braddock",      "crafton",    "bellevue",
      "millvale",     "etna",         "aspinwall",     "oakmont",    "dormont"};
  return places;
}

inline const std::vector<std::string>& default_datetimes() {
  static const std::vector<std::string> words{"today", "tomorrow", "tonight"};
  return words;
}

inline const std::vector<std::string>& hour_words() {
  static const std::vector<std::string> w{"one", "two",   "three", "four",   "five",   "six",
                                          "seven", "eight", "nine",  "ten", "eleven", "twelve"};
  return w;
}

// Spoken form of a minute 0-59 as used by the clock rules ("oh five",
// "thirty", "forty five"); 0 is "o'clock".
inline std::string minute_words(int m) {
  static const char* units[] = {"", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"};
  static const char* teens[] = {"ten",     "eleven",  "twelve",    "thirteen", "fourteen",
                                "fifteen", "sixteen", "seventeen", "eighteen", "nineteen"};
  static const char* tens[] = {"", "", "twenty", "thirty", "forty", "fifty"};
  if (m == 0) return "o'clock";
  if (m < 10) return std::string("oh ") + units[m];
  if (m < 20) return teens[m - 10];
  std::string s = tens[m / 10];
  if (m % 10) s += std::string(" ") + units[m % 10];
  return s;
}

inline std::string two_digits(int v) { return (v < 10 ? "0" : "") + std::to_string(v); }

inline RuleSet default_rules() {
  RuleSet r;
  for (const auto& p : default_places()) r.gazetteer.push_back({EntityType::Location, split_ws(p), p});
  for (const auto& p : fresh_places()) r.gazetteer.push_back({EntityType::Location, split_ws(p), p});
  for (const auto& d : default_datetimes()) r.gazetteer.push_back({EntityType::DateTime, split_ws(d), d});

  for (int h = 1; h <= 12; ++h) {
    r.numbers.push_back({EntityType::Hour, {hour_words()[h - 1]}, std::to_string(h)});
    r.numbers.push_back({EntityType::Hour, {std::to_string(h)}, std::to_string(h)});
  }
  for (int m = 0; m < 60; ++m) {
    r.numbers.push_back({EntityType::Minute, split_ws(minute_words(m)), two_digits(m)});
    if (m > 0 && m < 10) r.numbers.push_back({EntityType::Minute, {"o", split_ws(minute_words(m))[1]}, two_digits(m)});
    r.numbers.push_back({EntityType::Minute, {two_digits(m)}, two_digits(m)});
  }
  r.numbers.push_back({EntityType::AmPm, {"a", "m"}, "am"});
  r.numbers.push_back({EntityType::AmPm, {"am"}, "am"});
  r.numbers.push_back({EntityType::AmPm, {"p", "m"}, "pm"});
  r.numbers.push_back({EntityType::AmPm, {"pm"}, "pm"});

  for (const char* p : {"HOUR MINUTE AMPM", "HOUR : MINUTE AMPM", "HOUR : MINUTE", "HOUR MINUTE", "HOUR AMPM"})
    r.clock_patterns.push_back(split_ws(p));
  return r;
}

namespace detail {

inline std::vector<std::string> rule_lines(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace detail

// Gazetteer file: one "<TYPE>\t<surface>" per line, '#' starts a comment.
// Number file: one "<TYPE>\t<surface>\t<normalized>" per line.
// Pattern file: one whitespace-separated pattern per line.
inline void parse_gazetteer(std::istream& in, RuleSet& rules) {
  for (const auto& line : detail::rule_lines(in)) {
    const auto cols = split(line, '\t');
    const auto type = parse_entity_type(trim(cols[0]));
    if (cols.size() != 2 || !type) throw std::runtime_error("bad gazetteer line: " + line);
    const auto surface = to_lower(trim(cols[1]));
    rules.gazetteer.push_back({*type, split_ws(surface), join(split_ws(surface))});
  }
}

inline void parse_numbers(std::istream& in, RuleSet& rules) {
  for (const auto& line : detail::rule_lines(in)) {
    const auto cols = split(line, '\t');
    const auto type = parse_entity_type(trim(cols[0]));
    if (cols.size() != 3 || !type) throw std::runtime_error("bad number rule line: " + line);
    rules.numbers.push_back({*type, split_ws(to_lower(cols[1])), trim(cols[2])});
  }
}

inline void parse_patterns(std::istream& in, RuleSet& rules) {
  for (const auto& line : detail::rule_lines(in)) rules.clock_patterns.push_back(split_ws(line));
}

inline RuleSet load_rules(const std::string& gazetteer_path, const std::string& numbers_path,
                          const std::string& patterns_path) {
  RuleSet r;
  auto open = [](const std::string& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open rule file " + p);
    return in;
  };
  auto g = open(gazetteer_path);
  parse_gazetteer(g, r);
  auto n = open(numbers_path);
  parse_numbers(n, r);
  auto p = open(patterns_path);
  parse_patterns(p, r);
  return r;
}

inline void write_rules(const RuleSet& r, std::ostream& gazetteer, std::ostream& numbers, std::ostream& patterns) {
  gazetteer << "# entity gazetteer: TYPE<TAB>surface\n";
  for (const auto& e : r.gazetteer) gazetteer << to_string(e.type) << '\t' << join(e.surface) << '\n';
  numbers << "# clock vocabulary: TYPE<TAB>surface<TAB>normalized\n";
  for (const auto& e : r.numbers) numbers << to_string(e.type) << '\t' << join(e.surface) << '\t' << e.normalized << '\n';
  patterns << "# clock patterns over HOUR / MINUTE / AMPM and literal tokens\n";
  for (const auto& p : r.clock_patterns) patterns << join(p) << '\n';
}

}  // namespace sied::entity
