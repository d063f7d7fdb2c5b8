#pragma once

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sied/corpus/dialog.hpp"
#include "sied/entity/indexer.hpp"
#include "sied/eval/da_tagger.hpp"
#include "sied/model/train.hpp"

namespace sied::eval {

// One system utterance: model output next to the reference, both in
// indexed-token form.
struct Prediction {
  std::string dialog_id;
  std::size_t turn = 0;
  Tokens predicted;
  Tokens gold;
  std::vector<std::vector<double>> attention;  // per emitted token, over turns 0..turn-1
  bool reached_eos = false;
};

// Greedy predictions for every system turn after the first.
inline std::vector<Prediction> predict(const model::SiedModel& m, const std::vector<corpus::IndexedDialog>& dialogs) {
  std::vector<Prediction> out;
  for (const auto& d : dialogs) {
    const auto turns = model::history_turns(d);
    for (std::size_t i = 1; i < turns.size(); ++i) {
      const std::vector<model::HistoryTurn> hist(turns.begin(), turns.begin() + static_cast<long>(i));
      auto r = m.decode(hist);
      out.push_back({d.id, i, std::move(r.tokens), turns[i].system, std::move(r.attention), r.reached_eos});
    }
  }
  return out;
}

// Maps a raw-text prediction for system turn `turn` of `d` into indexed form
// against the table built from the user turns before it. Values the user never
// mentioned become "[TYPE-?]".
inline Tokens index_raw_prediction(const Tokens& predicted, const corpus::Dialog& d, std::size_t turn,
                                   const entity::Recognizer& rec) {
  entity::IndexedEntityTable table;
  for (std::size_t k = 0; k < turn && k < d.turns.size(); ++k) entity::index_utterance(d.turns[k].user, table, rec);
  return entity::index_system_utterance(predicted, table, rec, entity::OnUnknown::Unresolved);
}

// Raw-view predictions re-expressed in indexed form, with indexed references.
inline std::vector<Prediction> predict_raw(const model::SiedModel& m, const corpus::Dataset& raw_dialogs,
                                           const entity::Recognizer& rec) {
  const auto raw = corpus::index_dataset(raw_dialogs, rec, corpus::EntityView::Raw);
  const auto indexed = corpus::index_dataset(raw_dialogs, rec);
  auto preds = predict(m, raw);
  std::map<std::string, std::size_t> at;
  for (std::size_t i = 0; i < raw_dialogs.dialogs.size(); ++i) at[raw_dialogs.dialogs[i].id] = i;
  for (auto& p : preds) {
    const auto k = at.at(p.dialog_id);
    p.predicted = index_raw_prediction(p.predicted, raw_dialogs.dialogs[k], p.turn, rec);
    p.gold = indexed[k].turns[p.turn].system;
  }
  return preds;
}

inline std::vector<Tokens> predicted_side(const std::vector<Prediction>& ps) {
  std::vector<Tokens> out;
  for (const auto& p : ps) out.push_back(p.predicted);
  return out;
}

inline std::vector<Tokens> gold_side(const std::vector<Prediction>& ps) {
  std::vector<Tokens> out;
  for (const auto& p : ps) out.push_back(p.gold);
  return out;
}

// Indexed system utterances with their gold dialog acts, for the tagger.
inline std::vector<LabeledUtterance> labeled_system_utterances(const std::vector<corpus::IndexedDialog>& ds) {
  std::vector<LabeledUtterance> out;
  for (const auto& d : ds)
    for (const auto& t : d.turns)
      if (!t.acts.empty()) out.push_back({t.system, LabelSet(t.acts.begin(), t.acts.end())});
  return out;
}

// Utterance files: one {"id", "turn", "text"} object per line.
struct UtteranceRecord {
  std::string dialog_id;
  std::size_t turn = 0;
  Tokens tokens;
  bool operator==(const UtteranceRecord&) const = default;
};

inline void write_utterances(const std::vector<UtteranceRecord>& rs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& r : rs) out << nlohmann::ordered_json{{"id", r.dialog_id}, {"turn", r.turn}, {"text", join(r.tokens)}}.dump() << '\n';
}

inline std::vector<UtteranceRecord> read_utterances(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<UtteranceRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::ordered_json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("turn").get<std::size_t>(), split_ws(j.at("text").get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<UtteranceRecord> prediction_records(const std::vector<Prediction>& ps, bool gold) {
  std::vector<UtteranceRecord> out;
  for (const auto& p : ps) out.push_back({p.dialog_id, p.turn, gold ? p.gold : p.predicted});
  return out;
}

// Pairs predictions with references by (dialog id, turn); every reference
// needs exactly one prediction.
inline std::pair<std::vector<Tokens>, std::vector<Tokens>> align(const std::vector<UtteranceRecord>& pred,
                                                                 const std::vector<UtteranceRecord>& gold) {
  std::map<std::pair<std::string, std::size_t>, const UtteranceRecord*> by_key;
  for (const auto& p : pred)
    if (!by_key.emplace(std::make_pair(p.dialog_id, p.turn), &p).second)
      throw std::invalid_argument("duplicate prediction for " + p.dialog_id + " turn " + std::to_string(p.turn));
  if (pred.size() != gold.size())
    throw std::invalid_argument(std::to_string(pred.size()) + " predictions for " + std::to_string(gold.size()) +
                                " references");
  std::pair<std::vector<Tokens>, std::vector<Tokens>> out;
  for (const auto& g : gold) {
    const auto it = by_key.find({g.dialog_id, g.turn});
    if (it == by_key.end()) throw std::invalid_argument("no prediction for " + g.dialog_id + " turn " + std::to_string(g.turn));
    out.first.push_back(it->second->tokens);
    out.second.push_back(g.tokens);
  }
  return out;
}

}  // namespace sied::eval
