#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "sied/entity/types.hpp"
#include "sied/util/text.hpp"

namespace sied::corpus {

inline constexpr const char* kPad = "<pad>";
inline constexpr const char* kUnk = "<unk>";
inline constexpr const char* kEos = "<eos>";
inline constexpr const char* kBos = "<bos>";
inline constexpr int kDefaultSlotCap = 8;

enum class Side { System, User };

inline std::string to_string(Side s) { return s == Side::System ? "system" : "user"; }

class Vocabulary {
 public:
  static constexpr std::size_t kPadId = 0;
  static constexpr std::size_t kUnkId = 1;
  static constexpr std::size_t kEosId = 2;
  static constexpr std::size_t kBosId = 3;
  static constexpr std::size_t kKbSearchId = 4;

  // Specials only: PAD, UNK, EOS, BOS, [kb-search] and [TYPE-k] for k < cap.
  explicit Vocabulary(Side side = Side::System, int slot_cap = kDefaultSlotCap) : side_(side), slot_cap_(slot_cap) {
    for (const char* s : {kPad, kUnk, kEos, kBos}) add(s);
    add(std::string(entity::kKbSearch));
    for (auto t : entity::kAllEntityTypes)
      for (int k = 0; k < slot_cap; ++k) add(entity::Slot{t, k}.token());
    n_specials_ = tokens_.size();
  }

  std::size_t add(const std::string& tok) {
    auto [it, fresh] = ids_.emplace(tok, tokens_.size());
    if (fresh) tokens_.push_back(tok);
    return it->second;
  }

  std::size_t id(const std::string& tok) const {
    auto it = ids_.find(tok);
    return it == ids_.end() ? kUnkId : it->second;
  }
  bool contains(const std::string& tok) const { return ids_.count(tok) > 0; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  std::size_t special_count() const { return n_specials_; }
  Side side() const { return side_; }
  int slot_cap() const { return slot_cap_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<std::size_t> encode(const Tokens& toks) const {
    std::vector<std::size_t> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(id(t));
    return out;
  }

  nlohmann::ordered_json to_json() const {
    return {{"side", to_string(side_)}, {"slot_cap", slot_cap_}, {"tokens", tokens_}};
  }

  static Vocabulary from_json(const nlohmann::ordered_json& j) {
    Vocabulary v(j.at("side") == "user" ? Side::User : Side::System, j.at("slot_cap").get<int>());
    const auto toks = j.at("tokens").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i < v.size() && v.token(i) != toks[i]) throw std::runtime_error("vocabulary specials do not match");
      v.add(toks[i]);
    }
    if (v.size() != toks.size()) throw std::runtime_error("vocabulary has duplicate tokens");
    return v;
  }

  bool operator==(const Vocabulary& o) const { return side_ == o.side_ && tokens_ == o.tokens_; }

 private:
  Side side_;
  int slot_cap_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
  std::size_t n_specials_ = 0;
};

// Tokens reaching min_count are added by descending frequency, ties broken
// lexicographically; rarer tokens map to UNK.
inline Vocabulary build_vocab(const std::vector<Tokens>& utterances, Side side, int min_count = 1,
                              int slot_cap = kDefaultSlotCap) {
  std::map<std::string, int> counts;
  for (const auto& u : utterances)
    for (const auto& t : u) ++counts[t];
  std::vector<std::pair<std::string, int>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v(side, slot_cap);
  for (const auto& [tok, n] : items)
    if (n >= min_count) v.add(tok);
  return v;
}

}  // namespace sied::corpus
