#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "sied/util/rng.hpp"
#include "sied/util/text.hpp"

namespace sied::eval {

using LabelSet = std::set<std::string>;

struct LabeledUtterance {
  Tokens tokens;
  LabelSet labels;
};

// Boundary-padded word bigrams, each counted once.
inline std::vector<std::string> bigram_features(const Tokens& tokens) {
  std::vector<std::string> out;
  std::string prev = "<s>";
  for (const auto& t : tokens) {
    out.push_back(prev + " " + t);
    prev = t;
  }
  out.push_back(prev + " </s>");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct TaggerOptions {
  double lambda = 1e-4;
  std::size_t epochs = 15;
  std::uint64_t seed = 1;
  std::size_t min_label_count = 5;
};

// One-vs-rest linear SVMs over bag-of-bigram features, trained on the hinge
// loss with Pegasos-style subgradient steps. A label fires when its score is
// positive; when none does, the best-scoring label is returned.
class DaTagger {
 public:
  const std::vector<std::string>& labels() const { return labels_; }

  LabelSet tag(const Tokens& tokens) const {
    const auto feats = encode(tokens);
    LabelSet out;
    double best = -1e300;
    std::size_t arg = 0;
    for (std::size_t l = 0; l < labels_.size(); ++l) {
      const double s = score(l, feats);
      if (s > 0) out.insert(labels_[l]);
      if (s > best) {
        best = s;
        arg = l;
      }
    }
    if (out.empty() && !labels_.empty()) out.insert(labels_[arg]);
    return out;
  }

  double score(const std::string& label, const Tokens& tokens) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw std::out_of_range("unknown dialog act " + label);
    return score(static_cast<std::size_t>(it - labels_.begin()), encode(tokens));
  }

  nlohmann::ordered_json to_json() const {
    return {{"labels", labels_}, {"features", features_}, {"weights", weights_}, {"bias", bias_}};
  }

  static DaTagger from_json(const nlohmann::ordered_json& j) {
    DaTagger t;
    t.labels_ = j.at("labels").get<std::vector<std::string>>();
    t.features_ = j.at("features").get<std::vector<std::string>>();
    t.weights_ = j.at("weights").get<std::vector<std::vector<double>>>();
    t.bias_ = j.at("bias").get<std::vector<double>>();
    for (std::size_t i = 0; i < t.features_.size(); ++i) t.index_[t.features_[i]] = i;
    return t;
  }

  friend DaTagger train_da_tagger(const std::vector<LabeledUtterance>&, const TaggerOptions&);

 private:
  std::vector<std::size_t> encode(const Tokens& tokens) const {
    std::vector<std::size_t> out;
    for (const auto& f : bigram_features(tokens))
      if (auto it = index_.find(f); it != index_.end()) out.push_back(it->second);
    return out;
  }

  double score(std::size_t l, const std::vector<std::size_t>& feats) const {
    double s = bias_[l];
    for (auto f : feats) s += weights_[l][f];
    return s;
  }

  std::vector<std::string> labels_;
  std::vector<std::string> features_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<double>> weights_;  // [label][feature]
  std::vector<double> bias_;
};

inline DaTagger train_da_tagger(const std::vector<LabeledUtterance>& data, const TaggerOptions& opt = {}) {
  if (data.empty()) throw std::invalid_argument("train_da_tagger: no labeled utterances");
  std::map<std::string, std::size_t> counts;
  for (const auto& u : data) {
    if (u.labels.empty()) throw std::invalid_argument("train_da_tagger: utterance without a dialog act");
    for (const auto& l : u.labels) ++counts[l];
  }
  for (const auto& [label, n] : counts)
    if (n < opt.min_label_count)
      throw std::invalid_argument("train_da_tagger: act '" + label + "' has only " + std::to_string(n) +
                                  " examples, need " + std::to_string(opt.min_label_count));
  DaTagger t;
  for (const auto& [label, _] : counts) t.labels_.push_back(label);
  std::vector<std::vector<std::size_t>> encoded;
  for (const auto& u : data) {
    std::vector<std::size_t> ids;
    for (const auto& f : bigram_features(u.tokens)) {
      auto [it, fresh] = t.index_.emplace(f, t.features_.size());
      if (fresh) t.features_.push_back(f);
      ids.push_back(it->second);
    }
    encoded.push_back(std::move(ids));
  }
  t.weights_.assign(t.labels_.size(), std::vector<double>(t.features_.size(), 0.0));
  t.bias_.assign(t.labels_.size(), 0.0);

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t l = 0; l < t.labels_.size(); ++l) {
    Rng rng(combine_seed(opt.seed, l));
    auto& w = t.weights_[l];
    double& b = t.bias_[l];
    double scale = 1.0;  // w is stored as scale * w_raw so shrinkage is O(1)
    std::size_t step = 0;
    for (std::size_t e = 0; e < opt.epochs; ++e) {
      rng.shuffle(order);
      for (auto i : order) {
        ++step;
        const double eta = 1.0 / (opt.lambda * static_cast<double>(step + 100));
        const double y = data[i].labels.count(t.labels_[l]) ? 1.0 : -1.0;
        double s = b;
        for (auto f : encoded[i]) s += scale * w[f];
        scale *= 1.0 - eta * opt.lambda;
        if (y * s < 1.0) {
          for (auto f : encoded[i]) w[f] += eta * y / scale;
          b += eta * y * 0.01;
        }
        if (scale < 1e-9) {
          for (auto& v : w) v *= scale;
          scale = 1.0;
        }
      }
    }
    for (auto& v : w) v *= scale;
  }
  return t;
}

struct TaggerAccuracy {
  double label = 0;  // per (utterance, label) yes/no decisions
  double exact = 0;  // whole label set right
};

inline TaggerAccuracy tagger_accuracy(const DaTagger& tagger, const std::vector<LabeledUtterance>& held_out) {
  if (held_out.empty()) throw std::invalid_argument("tagger_accuracy: no utterances");
  std::size_t exact = 0, decisions = 0, right = 0;
  for (const auto& u : held_out) {
    const auto got = tagger.tag(u.tokens);
    exact += got == u.labels;
    for (const auto& l : tagger.labels()) {
      ++decisions;
      right += got.count(l) == u.labels.count(l);
    }
  }
  return {static_cast<double>(right) / static_cast<double>(decisions),
          static_cast<double>(exact) / static_cast<double>(held_out.size())};
}

}  // namespace sied::eval
