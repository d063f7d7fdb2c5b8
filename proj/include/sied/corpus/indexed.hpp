#pragma once

#include <string>
#include <vector>

#include "sied/corpus/dialog.hpp"
#include "sied/entity/indexer.hpp"

namespace sied::corpus {

struct IndexedTurn {
  Tokens system;
  Tokens user;
  double confidence = 1.0;
  std::vector<std::string> acts;
  bool kb = false;

  bool operator==(const IndexedTurn&) const = default;
};

// A dialog as the model sees it, plus the entity table needed to map it back.
struct IndexedDialog {
  std::string id;
  std::vector<IndexedTurn> turns;
  entity::IndexedEntityTable table;

  bool operator==(const IndexedDialog&) const = default;
};

// How entities reach the model. Indexed replaces them by [TYPE-k]; Raw keeps
// surface words and only swaps a KB answer for [kb-search] followed by the
// argument words, which is the no-indexing baseline.
enum class EntityView { Indexed, Raw };

namespace detail {

inline Tokens raw_kb_args(const kb::RouteQuery& q, const entity::IndexedEntityTable& table) {
  Tokens out{std::string(entity::kKbSearch)};
  for (const auto& s : entity::query_slots(q, table))
    for (auto& w : split_ws(table.resolve(s).surface)) out.push_back(std::move(w));
  return out;
}

}  // namespace detail

// Walks the dialog in order: the system side of turn i is checked against the
// table built from user turns before it, then user turn i extends the table.
inline IndexedDialog index_dialog(const Dialog& d, const entity::Recognizer& rec,
                                  EntityView view = EntityView::Indexed, bool mint_fresh = false) {
  IndexedDialog out{d.id, {}, entity::IndexedEntityTable(mint_fresh)};
  for (std::size_t i = 0; i < d.turns.size(); ++i) {
    const auto& t = d.turns[i];
    IndexedTurn it;
    it.confidence = t.confidence;
    it.acts = t.acts;
    it.kb = t.kb.has_value();
    try {
      if (view == EntityView::Indexed) {
        it.system = entity::index_kb_result(t.system, t.kb, out.table, rec);
        it.user = entity::index_utterance(t.user, out.table, rec);
      } else {
        (void)entity::index_kb_result(t.system, t.kb, out.table, rec);  // same validation as the indexed view
        it.system = t.system;
        if (t.kb) {
          const auto rendered = split_ws(kb::render_result(t.kb->results));
          const auto at = *entity::find_span(t.system, rendered);
          Tokens sys(t.system.begin(), t.system.begin() + static_cast<long>(at));
          for (auto& w : detail::raw_kb_args(t.kb->query, out.table)) sys.push_back(std::move(w));
          sys.insert(sys.end(), t.system.begin() + static_cast<long>(at + rendered.size()), t.system.end());
          it.system = std::move(sys);
        }
        entity::index_utterance(t.user, out.table, rec);
        it.user = t.user;
      }
    } catch (const entity::CorpusValidationError& e) {
      throw entity::CorpusValidationError("dialog " + d.id + " turn " + std::to_string(i) + ": " + e.what());
    }
    out.turns.push_back(std::move(it));
  }
  return out;
}

inline std::vector<IndexedDialog> index_dataset(const Dataset& ds, const entity::Recognizer& rec,
                                                EntityView view = EntityView::Indexed, bool mint_fresh = false) {
  std::vector<IndexedDialog> out;
  out.reserve(ds.dialogs.size());
  for (const auto& d : ds.dialogs) out.push_back(index_dialog(d, rec, view, mint_fresh));
  return out;
}

// Lexicalizing every indexed utterance of every prefix of the dialog gives
// back the original text up to entity spelling, and indexing a prefix turn
// by turn ends in the same table as indexing it in one go. Returns an empty
// string on success, otherwise what went wrong.
inline std::string check_round_trip(const Dialog& d, const entity::Recognizer& rec, const kb::KbBackend& backend) {
  const auto full = index_dialog(d, rec);
  entity::IndexedEntityTable running;
  for (std::size_t k = 0; k < d.turns.size(); ++k) {
    const auto& t = d.turns[k];
    const auto sys = entity::index_kb_result(t.system, t.kb, running, rec);
    const auto usr = entity::index_utterance(t.user, running, rec);
    if (sys != full.turns[k].system || usr != full.turns[k].user) return "turn " + std::to_string(k) + " indexes differently";
    const auto back_sys = entity::lexicalize(sys, running, &backend);
    const auto back_usr = entity::lexicalize(usr, running, nullptr);
    if (entity::canonical_form(back_sys.tokens, rec) != entity::canonical_form(t.system, rec))
      return "system turn " + std::to_string(k) + " does not lexicalize back: " + join(back_sys.tokens);
    if (entity::canonical_form(back_usr.tokens, rec) != entity::canonical_form(t.user, rec))
      return "user turn " + std::to_string(k) + " does not lexicalize back: " + join(back_usr.tokens);
    if (t.kb && !(back_sys.kb && *back_sys.kb == *t.kb)) return "turn " + std::to_string(k) + " kb answer differs";
    Dialog prefix{d.id, {d.turns.begin(), d.turns.begin() + static_cast<long>(k + 1)}};
    if (!(index_dialog(prefix, rec).table == running)) return "prefix " + std::to_string(k + 1) + " table differs";
  }
  if (!(running == full.table)) return "final table differs";
  return {};
}

inline std::vector<Tokens> side_utterances(const std::vector<IndexedDialog>& ds, bool system) {
  std::vector<Tokens> out;
  for (const auto& d : ds)
    for (const auto& t : d.turns) out.push_back(system ? t.system : t.user);
  return out;
}

inline nlohmann::ordered_json to_json(const IndexedDialog& d) {
  auto turns = nlohmann::ordered_json::array();
  for (const auto& t : d.turns) {
    nlohmann::ordered_json j{{"sys", join(t.system)}, {"usr", join(t.user)}, {"conf", t.confidence}};
    if (!t.acts.empty()) j["acts"] = t.acts;
    if (t.kb) j["kb"] = true;
    turns.push_back(std::move(j));
  }
  return {{"id", d.id}, {"table", entity::to_json(d.table)}, {"turns", turns}};
}

inline IndexedDialog indexed_dialog_from_json(const nlohmann::ordered_json& j) {
  IndexedDialog d;
  d.id = j.at("id").get<std::string>();
  d.table = entity::table_from_json(j.at("table"));
  for (const auto& tj : j.at("turns")) {
    IndexedTurn t;
    t.system = split_ws(tj.at("sys").get<std::string>());
    t.user = split_ws(tj.at("usr").get<std::string>());
    t.confidence = tj.value("conf", 1.0);
    if (tj.contains("acts")) t.acts = tj.at("acts").get<std::vector<std::string>>();
    t.kb = tj.value("kb", false);
    d.turns.push_back(std::move(t));
  }
  return d;
}

inline void save_indexed(const std::vector<IndexedDialog>& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& d : ds) out << to_json(d).dump() << '\n';
}

inline std::vector<IndexedDialog> load_indexed(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<IndexedDialog> out;
  std::string line;
  while (std::getline(in, line))
    if (!trim(line).empty()) out.push_back(indexed_dialog_from_json(nlohmann::ordered_json::parse(line)));
  return out;
}

}  // namespace sied::corpus
