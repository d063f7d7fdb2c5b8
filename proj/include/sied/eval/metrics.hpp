#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sied/entity/indexer.hpp"
#include "sied/eval/da_tagger.hpp"

namespace sied::eval {

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const Counts&) const = default;
};

struct PrfScore {
  double precision = 0, recall = 0, f1 = 0;
  Counts counts;
};

// Undefined ratios (no predictions, no gold) are 0.
inline PrfScore prf(const Counts& c) {
  PrfScore s;
  s.counts = c;
  if (c.tp + c.fp) s.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn) s.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (s.precision + s.recall > 0) s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

namespace detail {

inline void require_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(a) + " predictions for " +
                                std::to_string(b) + " references");
}

inline Counts multiset_counts(const std::map<std::string, int>& pred, const std::map<std::string, int>& gold) {
  Counts c;
  for (const auto& [k, n] : pred) {
    const auto it = gold.find(k);
    const int g = it == gold.end() ? 0 : it->second;
    c.tp += static_cast<std::size_t>(std::min(n, g));
    c.fp += static_cast<std::size_t>(std::max(0, n - g));
  }
  for (const auto& [k, g] : gold) {
    const auto it = pred.find(k);
    const int n = it == pred.end() ? 0 : it->second;
    c.fn += static_cast<std::size_t>(std::max(0, g - n));
  }
  return c;
}

// Slot tokens of an utterance, including unresolved "[TYPE-?]" markers.
inline std::map<std::string, int> slot_bag(const Tokens& tokens) {
  std::map<std::string, int> bag;
  for (const auto& t : tokens)
    if (entity::parse_slot(t) || (t.size() > 4 && t.front() == '[' && t.substr(t.size() - 3) == "-?]")) ++bag[t];
  return bag;
}

}  // namespace detail

inline Counts dialog_act_counts(const LabelSet& pred, const LabelSet& gold) {
  Counts c;
  for (const auto& l : pred) (gold.count(l) ? c.tp : c.fp) += 1;
  for (const auto& l : gold) c.fn += pred.count(l) ? 0 : 1;
  return c;
}

// Both sides are tagged by the same tagger, then compared label by label.
inline PrfScore score_dialog_acts(const std::vector<Tokens>& pred, const std::vector<Tokens>& gold,
                                  const DaTagger& tagger) {
  detail::require_aligned(pred.size(), gold.size(), "score_dialog_acts");
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) c += dialog_act_counts(tagger.tag(pred[i]), tagger.tag(gold[i]));
  return prf(c);
}

// Exact [TYPE-k] matches with bag semantics. Pairs where neither side has a
// slot contribute nothing.
inline Counts slot_counts(const Tokens& pred, const Tokens& gold) {
  return detail::multiset_counts(detail::slot_bag(pred), detail::slot_bag(gold));
}

inline PrfScore score_slots(const std::vector<Tokens>& pred, const std::vector<Tokens>& gold) {
  detail::require_aligned(pred.size(), gold.size(), "score_slots");
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) c += slot_counts(pred[i], gold[i]);
  return prf(c);
}

// A predicted query is a true positive only when the gold utterance has a
// query with exactly the same argument tokens; any other predicted query is a
// false positive, and a gold query not matched this way is a false negative.
inline Counts kb_counts(const Tokens& pred, const Tokens& gold) {
  auto args = [](const Tokens& t) -> std::optional<Tokens> {
    const auto span = entity::extract_kb_query(t);
    if (!span) return std::nullopt;
    return Tokens(t.begin() + static_cast<long>(span->begin) + 1, t.begin() + static_cast<long>(span->end));
  };
  const auto p = args(pred), g = args(gold);
  Counts c;
  if (p && g && *p == *g) {
    c.tp = 1;
  } else {
    c.fp = p ? 1 : 0;
    c.fn = g ? 1 : 0;
  }
  return c;
}

inline PrfScore score_kb(const std::vector<Tokens>& pred, const std::vector<Tokens>& gold) {
  detail::require_aligned(pred.size(), gold.size(), "score_kb");
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) c += kb_counts(pred[i], gold[i]);
  return prf(c);
}

inline constexpr double kBleuEpsilon = 1e-9;

struct BleuDetail {
  double bleu = 0;
  double brevity_penalty = 0;
  std::size_t candidate_length = 0, reference_length = 0;
  double precisions[4]{};
  std::size_t matches[4]{}, totals[4]{};
};

// Corpus-level BLEU-4 with one reference per candidate: clipped n-gram
// matches and totals are summed over the corpus, a zero match count is
// replaced by 1e-9, an order with no candidate n-grams at all has precision 1,
// and BP = exp(1 - r/c) when c <= r.
inline BleuDetail bleu4_detail(const std::vector<Tokens>& pred, const std::vector<Tokens>& refs) {
  detail::require_aligned(pred.size(), refs.size(), "bleu4");
  if (pred.empty()) throw std::invalid_argument("bleu4: empty corpus");
  BleuDetail d;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    d.candidate_length += pred[i].size();
    d.reference_length += refs[i].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      std::map<Tokens, int> ref_counts, cand_counts;
      for (std::size_t k = 0; k + n <= refs[i].size(); ++k) ++ref_counts[Tokens(refs[i].begin() + k, refs[i].begin() + k + n)];
      for (std::size_t k = 0; k + n <= pred[i].size(); ++k) ++cand_counts[Tokens(pred[i].begin() + k, pred[i].begin() + k + n)];
      for (const auto& [g, cnt] : cand_counts) {
        const auto it = ref_counts.find(g);
        d.matches[n - 1] += static_cast<std::size_t>(std::min(cnt, it == ref_counts.end() ? 0 : it->second));
        d.totals[n - 1] += static_cast<std::size_t>(cnt);
      }
    }
  }
  if (d.candidate_length == 0) return d;
  double log_sum = 0;
  for (int n = 0; n < 4; ++n) {
    const double m = d.matches[n] ? static_cast<double>(d.matches[n]) : kBleuEpsilon;
    d.precisions[n] = d.totals[n] ? m / static_cast<double>(d.totals[n]) : 1.0;
    log_sum += std::log(d.precisions[n]);
  }
  const double c = static_cast<double>(d.candidate_length), r = static_cast<double>(d.reference_length);
  d.brevity_penalty = c > r ? 1.0 : std::exp(1.0 - r / c);
  d.bleu = d.brevity_penalty * std::exp(log_sum / 4.0);
  return d;
}

inline double bleu4(const std::vector<Tokens>& pred, const std::vector<Tokens>& refs) {
  return bleu4_detail(pred, refs).bleu;
}

}  // namespace sied::eval
