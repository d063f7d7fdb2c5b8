#pragma once

#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sied/service/session.hpp"

namespace sied::service {

struct MeanSd {
  double mean = 0;
  double sd = 0;  // sample standard deviation; 0 with fewer than two values
  std::size_t n = 0;
};

inline MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd out;
  out.n = xs.size();
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

// Per-model aggregates over ended sessions.
//   slot precision  slot tokens in model outputs that resolve to a value the
//                   user had expressed at that point / all such slot tokens
//   kb precision    attempted queries matching the user's slots at that
//                   point / all attempted queries
//   success rate    sessions labelled successful / sessions
//   avg turns       user turns per session
struct ModelReport {
  std::string model;
  std::size_t sessions = 0;
  std::size_t slot_correct = 0, slot_total = 0;
  std::size_t kb_correct = 0, kb_total = 0;
  std::size_t successes = 0;
  std::size_t user_turns = 0;
  std::size_t model_turns = 0, invalid_turns = 0;
  double slot_precision = 0, kb_precision = 0, success_rate = 0, avg_turns = 0, invalid_rate = 0;
  MeanSd correctness, naturalness;
};

inline std::vector<ModelReport> session_report(const std::vector<SessionRecord>& store, const entity::Recognizer& rec) {
  std::map<std::string, ModelReport> by_model;
  std::map<std::string, std::vector<double>> corr, nat;
  for (const auto& s : store) {
    if (s.status != Status::Ended) continue;
    auto& r = by_model[s.model];
    r.model = s.model;
    ++r.sessions;
    r.user_turns += s.user_turns();
    const auto trace = expressed_trace(s, rec);
    for (std::size_t i = 0; i < s.turns.size(); ++i) {
      const auto& t = s.turns[i];
      if (t.closing) continue;
      ++r.model_turns;
      r.invalid_turns += t.invalid;
      for (const auto& u : t.slots) {
        ++r.slot_total;
        r.slot_correct += slot_use_correct(u, trace[i]);
      }
      if (t.kb_attempted) {
        ++r.kb_total;
        r.kb_correct += t.kb_query && query_matches(*t.kb_query, trace[i]);
      }
    }
    r.successes += label_success(s, rec).success;
    if (s.rating) {
      corr[s.model].push_back(s.rating->correctness);
      nat[s.model].push_back(s.rating->naturalness);
    }
  }
  if (by_model.empty()) throw SessionError("no ended sessions to report on");
  std::vector<ModelReport> out;
  auto ratio = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  for (auto& [name, r] : by_model) {
    r.slot_precision = ratio(r.slot_correct, r.slot_total);
    r.kb_precision = ratio(r.kb_correct, r.kb_total);
    r.success_rate = ratio(r.successes, r.sessions);
    r.avg_turns = ratio(r.user_turns, r.sessions);
    r.invalid_rate = ratio(r.invalid_turns, r.model_turns);
    r.correctness = mean_sd(corr[name]);
    r.naturalness = mean_sd(nat[name]);
    out.push_back(r);
  }
  return out;
}

inline nlohmann::ordered_json to_json(const ModelReport& r) {
  auto ms = [](const MeanSd& m) { return nlohmann::ordered_json{{"mean", m.mean}, {"sd", m.sd}, {"n", m.n}}; };
  return {{"model", r.model},
          {"sessions", r.sessions},
          {"slot_precision", r.slot_precision},
          {"kb_precision", r.kb_precision},
          {"success_rate", r.success_rate},
          {"avg_turns", r.avg_turns},
          {"avg_correctness", ms(r.correctness)},
          {"avg_naturalness", ms(r.naturalness)},
          {"invalid_output_rate", r.invalid_rate},
          {"counts",
           {{"slot_correct", r.slot_correct},
            {"slot_total", r.slot_total},
            {"kb_correct", r.kb_correct},
            {"kb_total", r.kb_total},
            {"successes", r.successes},
            {"user_turns", r.user_turns},
            {"model_turns", r.model_turns},
            {"invalid_turns", r.invalid_turns}}}};
}

// Rows are the statistics, one column per model.
inline void write_report_table(const std::vector<ModelReport>& rs, std::ostream& out) {
  out << std::left << std::setw(18) << "metric";
  for (const auto& r : rs) out << std::setw(16) << r.model;
  out << '\n' << std::fixed;
  auto row = [&](const char* name, auto&& cell) {
    out << std::setw(18) << name;
    for (const auto& r : rs) out << std::setw(16) << cell(r);
    out << '\n';
  };
  auto pct = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << 100.0 * v << "%";
    return s.str();
  };
  auto msd = [](const MeanSd& m) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << m.mean << " (" << m.sd << ")";
    return s.str();
  };
  row("Sessions", [](const ModelReport& r) { return std::to_string(r.sessions); });
  row("Slot Precision", [&](const ModelReport& r) { return pct(r.slot_precision); });
  row("KB Precision", [&](const ModelReport& r) { return pct(r.kb_precision); });
  row("Success Rate", [&](const ModelReport& r) { return pct(r.success_rate); });
  row("Avg Turns", [](const ModelReport& r) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << r.avg_turns;
    return s.str();
  });
  row("Avg Correctness", [&](const ModelReport& r) { return msd(r.correctness); });
  row("Avg Naturalness", [&](const ModelReport& r) { return msd(r.naturalness); });
  row("Invalid Outputs", [&](const ModelReport& r) { return pct(r.invalid_rate); });
}

}  // namespace sied::service
