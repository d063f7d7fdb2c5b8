#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "sied/corpus/dialog.hpp"
#include "sied/util/rng.hpp"

namespace sied::corpus {

struct AdjacencyPair {
  Tokens query;
  Tokens response;

  bool operator==(const AdjacencyPair&) const = default;
};

inline constexpr const char* kChatResponseAct = "chat-response";

// Bundled open-domain pairs. None of them mentions a place or a time.
inline const std::vector<AdjacencyPair>& default_chat_pairs() {
  static const std::vector<AdjacencyPair> pairs = [] {
    const char* raw[][2] = {
        {"hello", "hi , how are you ?"},
        {"hi there", "hello , nice to meet you ."},
        {"how are you", "i am doing well , thanks for asking ."},
        {"how is it going", "pretty good , thank you ."},
        {"what is your name", "i am a bus information robot ."},
        {"who are you", "i am a computer that knows about buses ."},
        {"are you a robot", "yes , i am a robot ."},
        {"are you human", "no , i am a machine ."},
        {"do you like music", "i like quiet music ."},
        {"what is your favorite movie", "i do not watch many movies ."},
        {"tell me a joke", "why did the bus stop ? it was tired ."},
        {"do you have any hobbies", "i like reading timetables ."},
        {"what do you think about the weather", "i hope it is nice outside ."},
        {"is it raining", "i can not see outside , sorry ."},
        {"i am bored", "maybe a trip would cheer you up ."},
        {"i am tired", "you should get some rest ."},
        {"i am happy", "that is great to hear ."},
        {"i am sad", "i am sorry to hear that ."},
        {"do you like cats", "cats are lovely animals ."},
        {"do you like dogs", "dogs are very friendly ."},
        {"what do you eat", "i do not eat anything ."},
        {"where do you live", "i live inside a computer ."},
        {"how old are you", "i am quite young for a machine ."},
        {"what is the meaning of life", "that is a deep question ."},
        {"can you sing", "i am not much of a singer ."},
        {"do you dream", "i dream of buses arriving on schedule ."},
        {"do you have friends", "everyone who talks to me is my friend ."},
        {"what are you doing", "i am talking with you ."},
        {"you are smart", "thank you , that is kind ."},
        {"you are stupid", "i am sorry , i am still learning ."},
        {"i love you", "that is very sweet of you ."},
        {"do you like sports", "i enjoy watching people run for the bus ."},
        {"what is your favorite color", "i like yellow , like a school bus ."},
        {"can you dance", "i do not have legs to dance ."},
        {"what should i cook for dinner", "pasta is always a good choice ."},
        {"do you read books", "i read a lot of schedules ."},
        {"what time is it in paris", "i only know about local buses ."},
        {"is this a real person", "no , you are talking to a computer ."},
        {"that is funny", "i am glad you liked it ."},
        {"i do not know", "that is okay ."},
        {"how was your day", "my day was busy but good ."},
        {"what is new", "not much , just helping riders ."},
        {"good morning", "good morning to you too ."},
        {"nice to meet you", "nice to meet you as well ."},
        {"do you like coffee", "i have never tasted coffee ."},
        {"what is your favorite food", "i run on electricity ."},
        {"are you busy", "never too busy to talk ."},
        {"what do you like", "i like helping people ."},
        {"where are you from", "i was built in a lab ."},
        {"can we be friends", "of course we can ."},
    };
    std::vector<AdjacencyPair> out;
    for (const auto& p : raw) out.push_back({split_ws(p[0]), split_ws(p[1])});
    return out;
  }();
  return pairs;
}

// One "query<TAB>response" per line; text is tokenized and lowercased.
inline std::vector<AdjacencyPair> load_chat_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open chat pair file " + path);
  std::vector<AdjacencyPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 2) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected query<TAB>response");
    AdjacencyPair p{tokenize(cols[0]), tokenize(cols[1])};
    if (p.query.empty() || p.response.empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty side in chat pair");
    out.push_back(std::move(p));
  }
  return out;
}

struct Injection {
  std::string dialog_id;      // id of the augmented copy
  std::size_t original_turn;  // index of t_i in the original dialog
  std::size_t position;       // index of t_i in the copy after all insertions
  std::size_t pair;           // index into the chat pairs
};

struct AugmentResult {
  Dataset augmented;  // D*: modified copies only
  std::vector<Injection> injections;
};

inline std::vector<std::string> merge_acts(std::vector<std::string> acts) {
  acts.insert(acts.begin(), kChatResponseAct);
  std::vector<std::string> out;
  for (auto& a : acts)
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(std::move(a));
  return out;
}

// Chat injection. Each repetition samples a dialog, an original turn of that
// dialog's copy not used yet, and a chat pair (q, r); the turn [a, u] becomes
// [a, q] and [r + a, u] is inserted right after it. A dialog whose copy has
// no unused turn is resampled, up to max_retries times.
inline AugmentResult augment_with_chat(const Dataset& ds, const std::vector<AdjacencyPair>& pairs, double rate,
                                       std::uint64_t seed, int max_retries = 1000) {
  if (rate < 0) throw std::invalid_argument("augmentation rate must be >= 0");
  AugmentResult res;
  res.augmented.provenance = Provenance::Augmented;
  const auto total = ds.turn_count();
  const auto n_inject = static_cast<std::size_t>(std::llround(rate * static_cast<double>(total)));
  if (n_inject == 0) return res;
  if (ds.dialogs.empty() || pairs.empty()) throw std::invalid_argument("augmentation needs dialogs and chat pairs");
  if (n_inject > total) throw std::invalid_argument("augmentation rate asks for more injections than there are turns");

  struct Copy {
    Dialog dialog;
    std::vector<std::size_t> position;  // original turn -> index in the copy
    std::vector<bool> used;
  };
  std::map<std::size_t, Copy> copies;
  Rng rng(seed);

  for (std::size_t k = 0; k < n_inject; ++k) {
    bool done = false;
    for (int attempt = 0; attempt <= max_retries && !done; ++attempt) {
      const auto dn = rng.below(ds.dialogs.size());
      const auto& orig = ds.dialogs[dn];
      auto it = copies.find(dn);
      if (it == copies.end()) {
        Copy c{orig, {}, std::vector<bool>(orig.turns.size(), false)};
        c.dialog.id = orig.id + "-aug";
        for (std::size_t i = 0; i < orig.turns.size(); ++i) c.position.push_back(i);
        it = copies.emplace(dn, std::move(c)).first;
      }
      auto& c = it->second;
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < c.used.size(); ++i)
        if (!c.used[i]) free.push_back(i);
      if (free.empty()) continue;
      const auto ti = free[rng.below(free.size())];
      const auto m = rng.below(pairs.size());

      const auto pos = c.position[ti];
      Turn& t = c.dialog.turns[pos];
      Turn inserted;
      inserted.system = concat(pairs[m].response, t.system);
      inserted.user = t.user;
      inserted.confidence = t.confidence;
      inserted.acts = merge_acts(t.acts);
      inserted.kb = t.kb;
      t.user = pairs[m].query;
      t.confidence = 1.0;
      c.dialog.turns.insert(c.dialog.turns.begin() + static_cast<long>(pos) + 1, std::move(inserted));
      for (std::size_t i = 0; i < c.position.size(); ++i)
        if (c.position[i] > pos) ++c.position[i];
      c.used[ti] = true;
      res.injections.push_back({c.dialog.id, ti, pos, m});
      done = true;
    }
    if (!done) throw std::runtime_error("augmentation could not find an unused turn after bounded retries");
  }
  // Positions recorded early may have shifted with later insertions.
  for (auto& inj : res.injections) {
    for (const auto& [dn, c] : copies)
      if (c.dialog.id == inj.dialog_id) inj.position = c.position[inj.original_turn];
  }
  for (auto& [dn, c] : copies) res.augmented.dialogs.push_back(std::move(c.dialog));
  return res;
}

// D+ = D followed by D*.
inline Dataset union_datasets(const Dataset& a, const Dataset& b) {
  Dataset out = a;
  out.dialogs.insert(out.dialogs.end(), b.dialogs.begin(), b.dialogs.end());
  if (!b.dialogs.empty()) out.provenance = Provenance::Augmented;
  check_unique_ids(out);
  return out;
}

}  // namespace sied::corpus
