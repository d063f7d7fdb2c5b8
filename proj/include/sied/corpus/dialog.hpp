#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sied/entity/types.hpp"
#include "sied/kb/types.hpp"
#include "sied/util/text.hpp"

namespace sied::corpus {

using entity::CorpusValidationError;

struct Turn {
  Tokens system;
  Tokens user;
  double confidence = 1.0;
  std::vector<std::string> acts;  // gold dialog acts of the system side, when known
  std::optional<kb::KbEvent> kb;

  bool operator==(const Turn&) const = default;
};

struct Dialog {
  std::string id;
  std::vector<Turn> turns;

  bool operator==(const Dialog&) const = default;
};

enum class Provenance { Real, Synthetic, Augmented };

inline std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Real: return "real";
    case Provenance::Synthetic: return "synthetic";
    case Provenance::Augmented: return "augmented";
  }
  return "real";
}

inline Provenance parse_provenance(const std::string& s) {
  if (s == "synthetic") return Provenance::Synthetic;
  if (s == "augmented") return Provenance::Augmented;
  if (s == "real") return Provenance::Real;
  throw CorpusValidationError("unknown provenance '" + s + "'");
}

struct Dataset {
  std::vector<Dialog> dialogs;
  Provenance provenance = Provenance::Real;

  std::size_t turn_count() const {
    std::size_t n = 0;
    for (const auto& d : dialogs) n += d.turns.size();
    return n;
  }
  bool operator==(const Dataset&) const = default;
};

inline void check_unique_ids(const Dataset& ds) {
  std::set<std::string> seen;
  for (const auto& d : ds.dialogs)
    if (!seen.insert(d.id).second) throw CorpusValidationError("duplicate dialog id '" + d.id + "'");
}

// ---- JSON mapping -------------------------------------------------------

using ojson = nlohmann::ordered_json;

inline ojson kb_to_json(const kb::KbEvent& ev) {
  ojson results = ojson::array();
  for (const auto& r : ev.results)
    results.push_back({{"line", r.line},
                       {"dep_stop", r.depart_stop},
                       {"arr_stop", r.arrive_stop},
                       {"depart", r.depart_time},
                       {"arrive", r.arrive_time}});
  return {{"query",
           {{"dep", ev.query.departure},
            {"arr", ev.query.arrival},
            {"h", ev.query.time.hour},
            {"m", ev.query.time.minute},
            {"ampm", kb::to_string(ev.query.time.meridiem)}}},
          {"results", results}};
}

inline ojson dialog_to_json(const Dialog& d) {
  ojson turns = ojson::array();
  for (const auto& t : d.turns) {
    ojson j{{"sys", join(t.system)}, {"usr", join(t.user)}, {"conf", t.confidence}};
    if (!t.acts.empty()) j["acts"] = t.acts;
    if (t.kb) j["kb"] = kb_to_json(*t.kb);
    turns.push_back(std::move(j));
  }
  return {{"id", d.id}, {"turns", turns}};
}

namespace detail {

[[noreturn]] inline void schema_error(const std::string& where, const std::string& what) {
  throw CorpusValidationError(where + ": " + what);
}

inline kb::KbEvent kb_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.contains("query")) schema_error(where, "kb event without a recorded query");
  const auto& q = j.at("query");
  kb::KbEvent ev;
  ev.query.departure = q.at("dep").get<std::string>();
  ev.query.arrival = q.at("arr").get<std::string>();
  ev.query.time.hour = q.at("h").get<int>();
  ev.query.time.minute = q.at("m").get<int>();
  const auto mer = kb::parse_meridiem(q.at("ampm").get<std::string>());
  if (!mer) schema_error(where, "kb query am/pm must be \"am\" or \"pm\"");
  ev.query.time.meridiem = *mer;
  try {
    ev.query.validate();
  } catch (const std::exception& e) {
    schema_error(where, e.what());
  }
  for (const auto& r : j.value("results", nlohmann::json::array()))
    ev.results.push_back({r.at("line").get<std::string>(), r.at("dep_stop").get<std::string>(),
                          r.at("arr_stop").get<std::string>(), r.at("depart").get<int>(), r.at("arrive").get<int>()});
  return ev;
}

}  // namespace detail

inline Dialog dialog_from_json(const nlohmann::json& j, const std::string& where) {
  Dialog d;
  try {
    d.id = j.at("id").get<std::string>();
    const auto& turns = j.at("turns");
    if (!turns.is_array() || turns.empty()) detail::schema_error(where + " dialog " + d.id, "no turns");
    for (std::size_t i = 0; i < turns.size(); ++i) {
      const auto& tj = turns[i];
      const auto here = where + " dialog " + d.id + " turn " + std::to_string(i);
      Turn t;
      t.system = split_ws(tj.at("sys").get<std::string>());
      t.user = split_ws(tj.at("usr").get<std::string>());
      t.confidence = tj.value("conf", 1.0);
      if (!(t.confidence >= 0.0 && t.confidence <= 1.0))
        detail::schema_error(here, "confidence " + tj.at("conf").dump() + " outside [0,1]");
      if (tj.contains("acts")) t.acts = tj.at("acts").get<std::vector<std::string>>();
      if (tj.contains("kb")) t.kb = detail::kb_from_json(tj.at("kb"), here);
      d.turns.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    detail::schema_error(where + (d.id.empty() ? "" : " dialog " + d.id), e.what());
  }
  return d;
}

inline constexpr const char* kDialogFormat = "sied-dialogs";
inline constexpr int kDialogFormatVersion = 1;

// One header line, then one dialog per line.
inline void write_dataset(std::ostream& os, const Dataset& ds) {
  os << ojson{{"format", kDialogFormat}, {"version", kDialogFormatVersion}, {"provenance", to_string(ds.provenance)}}
            .dump()
     << '\n';
  for (const auto& d : ds.dialogs) os << dialog_to_json(d).dump() << '\n';
}

inline Dataset read_dataset(std::istream& in, const std::string& name = "<stream>") {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto where = name + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      detail::schema_error(where, e.what());
    }
    if (j.contains("format")) {
      if (j.at("format") != kDialogFormat || j.value("version", 0) != kDialogFormatVersion)
        detail::schema_error(where, "unsupported corpus header " + j.dump());
      ds.provenance = parse_provenance(j.value("provenance", std::string("real")));
      continue;
    }
    ds.dialogs.push_back(dialog_from_json(j, where));
  }
  check_unique_ids(ds);
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_dataset(out, ds);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_dataset(in, path);
}

inline std::string dataset_to_string(const Dataset& ds) {
  std::ostringstream os;
  write_dataset(os, ds);
  return os.str();
}

}  // namespace sied::corpus
