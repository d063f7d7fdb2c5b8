#pragma once

#include <utility>
#include <vector>

#include "sied/corpus/indexed.hpp"
#include "sied/corpus/vocab.hpp"
#include "sied/model/train.hpp"

namespace sied::model {

// System and user vocabularies from the training dialogs.
inline std::pair<Vocabulary, Vocabulary> build_vocabs(const std::vector<corpus::IndexedDialog>& train_set,
                                                      int min_count = 1, int slot_cap = corpus::kDefaultSlotCap) {
  return {corpus::build_vocab(corpus::side_utterances(train_set, true), Side::System, min_count, slot_cap),
          corpus::build_vocab(corpus::side_utterances(train_set, false), Side::User, min_count, slot_cap)};
}

struct Trained {
  SiedModel model;
  TrainResult result;
};

inline Trained train_new(const ModelConfig& cfg, const std::vector<corpus::IndexedDialog>& train_set,
                         const std::vector<corpus::IndexedDialog>& dev_set, std::uint64_t seed,
                         TrainOptions opt = {}) {
  auto [sys, usr] = build_vocabs(train_set, 1, cfg.slot_cap);
  SiedModel m(cfg, std::move(sys), std::move(usr), seed);
  opt.seed = seed;
  auto r = train(m, train_set, dev_set, opt);
  return {std::move(m), std::move(r)};
}

}  // namespace sied::model
