#pragma once

#include <algorithm>
#include <iomanip>
#include <optional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sied/eval/metrics.hpp"

namespace sied::eval {

inline const std::vector<std::string>& all_metrics() {
  static const std::vector<std::string> m{"da", "slot", "kb", "bleu"};
  return m;
}

struct EvalReport {
  std::string name;
  std::size_t utterances = 0;
  std::optional<PrfScore> da, slot, kb;
  std::optional<double> bleu;
};

// `tagger` is only needed when "da" is requested.
inline EvalReport evaluate(const std::string& name, const std::vector<Tokens>& pred, const std::vector<Tokens>& gold,
                           const std::set<std::string>& metrics, const DaTagger* tagger) {
  for (const auto& m : metrics)
    if (std::find(all_metrics().begin(), all_metrics().end(), m) == all_metrics().end())
      throw std::invalid_argument("unknown metric '" + m + "'");
  EvalReport r;
  r.name = name;
  r.utterances = pred.size();
  if (metrics.count("da")) {
    if (!tagger) throw std::invalid_argument("dialog act scoring needs a tagger");
    r.da = score_dialog_acts(pred, gold, *tagger);
  }
  if (metrics.count("slot")) r.slot = score_slots(pred, gold);
  if (metrics.count("kb")) r.kb = score_kb(pred, gold);
  if (metrics.count("bleu")) r.bleu = bleu4(pred, gold);
  return r;
}

// Flat "key = value" lines, one block per report.
inline void write_flat(const std::vector<EvalReport>& reports, std::ostream& out) {
  out << std::setprecision(6) << std::fixed;
  for (const auto& r : reports) {
    const std::string p = r.name + ".";
    out << p << "utterances = " << r.utterances << '\n';
    auto prf_lines = [&](const char* key, const std::optional<PrfScore>& s) {
      if (!s) return;
      out << p << key << ".precision = " << s->precision << '\n';
      out << p << key << ".recall = " << s->recall << '\n';
      out << p << key << ".f1 = " << s->f1 << '\n';
      out << p << key << ".tp = " << s->counts.tp << '\n';
      out << p << key << ".fp = " << s->counts.fp << '\n';
      out << p << key << ".fn = " << s->counts.fn << '\n';
    };
    prf_lines("da", r.da);
    prf_lines("slot", r.slot);
    prf_lines("kb", r.kb);
    if (r.bleu) out << p << "bleu = " << *r.bleu << '\n';
  }
}

// Tab-separated table: one row per model, P/R/F per metric then BLEU.
inline void write_table(const std::vector<EvalReport>& reports, std::ostream& out) {
  out << "model\tda_p\tda_r\tda_f1\tslot_p\tslot_r\tslot_f1\tkb_p\tkb_r\tkb_f1\tbleu\n";
  out << std::setprecision(4) << std::fixed;
  auto cell = [&](const std::optional<PrfScore>& s) {
    if (s)
      out << '\t' << s->precision << '\t' << s->recall << '\t' << s->f1;
    else
      out << "\t-\t-\t-";
  };
  for (const auto& r : reports) {
    out << r.name;
    cell(r.da);
    cell(r.slot);
    cell(r.kb);
    if (r.bleu)
      out << '\t' << *r.bleu;
    else
      out << "\t-";
    out << '\n';
  }
}

struct Interval {
  double mean = 0, low = 0, high = 0;
};

// Percentile bootstrap over utterance pairs for each F1 and BLEU.
inline std::map<std::string, Interval> bootstrap(const std::vector<Tokens>& pred, const std::vector<Tokens>& gold,
                                                 const std::set<std::string>& metrics, const DaTagger* tagger,
                                                 std::size_t samples, std::uint64_t seed, double level = 0.95) {
  if (pred.empty()) throw std::invalid_argument("bootstrap: empty corpus");
  Rng rng(seed);
  std::map<std::string, std::vector<double>> draws;
  std::vector<Tokens> p(pred.size()), g(gold.size());
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const auto k = rng.below(pred.size());
      p[i] = pred[k];
      g[i] = gold[k];
    }
    const auto r = evaluate("b", p, g, metrics, tagger);
    if (r.da) draws["da.f1"].push_back(r.da->f1);
    if (r.slot) draws["slot.f1"].push_back(r.slot->f1);
    if (r.kb) draws["kb.f1"].push_back(r.kb->f1);
    if (r.bleu) draws["bleu"].push_back(*r.bleu);
  }
  std::map<std::string, Interval> out;
  for (auto& [k, v] : draws) {
    std::sort(v.begin(), v.end());
    Interval iv;
    for (double x : v) iv.mean += x;
    iv.mean /= static_cast<double>(v.size());
    const double tail = (1.0 - level) / 2.0;
    iv.low = v[static_cast<std::size_t>(tail * static_cast<double>(v.size() - 1))];
    iv.high = v[static_cast<std::size_t>((1.0 - tail) * static_cast<double>(v.size() - 1) + 0.5)];
    out[k] = iv;
  }
  return out;
}

}  // namespace sied::eval
