#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace sied::model {

struct ModelConfig {
  std::size_t embed_dim = 100;
  std::size_t hidden = 500;
  std::size_t layers = 1;
  std::size_t attn_ctx = 500;
  std::vector<std::size_t> filter_windows{1, 2, 3};
  std::size_t feature_maps = 100;
  double dropout = 0.4;
  double lr = 1e-3;
  std::size_t batch = 40;
  bool attention = true;
  std::size_t max_decode_len = 40;
  int slot_cap = 8;
  std::size_t beam = 1;  // only greedy search is implemented
  double clip = 5.0;
  double init_range = 0.08;
  double embed_sd = 0.1;

  std::size_t utterance_dim() const { return feature_maps * filter_windows.size(); }
  std::size_t turn_dim() const { return 2 * utterance_dim() + 1; }
  std::size_t max_window() const {
    std::size_t w = 0;
    for (auto x : filter_windows) w = std::max(w, x);
    return w;
  }

  void validate() const {
    auto positive = [](std::size_t v, const char* name) {
      if (v == 0) throw std::invalid_argument(std::string("model config: ") + name + " must be positive");
    };
    positive(embed_dim, "embed_dim");
    positive(hidden, "hidden");
    positive(attn_ctx, "attn_ctx");
    positive(feature_maps, "feature_maps");
    positive(batch, "batch");
    positive(max_decode_len, "max_decode_len");
    positive(beam, "beam");
    if (layers != 1) throw std::invalid_argument("model config: only single-layer LSTMs are supported");
    if (filter_windows.empty()) throw std::invalid_argument("model config: filter_windows is empty");
    for (auto w : filter_windows) positive(w, "filter window");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("model config: dropout must be in [0, 1)");
    if (!(lr >= 0.0)) throw std::invalid_argument("model config: lr must be non-negative");
    if (slot_cap <= 0) throw std::invalid_argument("model config: slot_cap must be positive");
    if (beam != 1) throw std::invalid_argument("model config: beam search is not implemented, use beam = 1");
  }

  bool operator==(const ModelConfig&) const = default;
};

inline nlohmann::ordered_json to_json(const ModelConfig& c) {
  return {{"embed_dim", c.embed_dim}, {"hidden", c.hidden},           {"layers", c.layers},
          {"attn_ctx", c.attn_ctx},   {"filter_windows", c.filter_windows}, {"feature_maps", c.feature_maps},
          {"dropout", c.dropout},     {"lr", c.lr},                   {"batch", c.batch},
          {"attention", c.attention}, {"max_decode_len", c.max_decode_len}, {"slot_cap", c.slot_cap},
          {"beam", c.beam},           {"clip", c.clip},               {"init_range", c.init_range},
          {"embed_sd", c.embed_sd}};
}

// Missing keys keep their defaults, so a config file only lists overrides.
inline ModelConfig config_from_json(const nlohmann::ordered_json& j) {
  ModelConfig c;
  for (const auto& [key, _] : j.items()) {
    static const std::vector<std::string> known{"embed_dim", "hidden",    "layers",         "attn_ctx",
                                                "filter_windows", "feature_maps", "dropout", "lr",
                                                "batch",     "attention", "max_decode_len", "slot_cap",
                                                "beam",      "clip",      "init_range",     "embed_sd"};
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("model config: unknown key '" + key + "'");
  }
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.attn_ctx = j.value("attn_ctx", c.attn_ctx);
  c.filter_windows = j.value("filter_windows", c.filter_windows);
  c.feature_maps = j.value("feature_maps", c.feature_maps);
  c.dropout = j.value("dropout", c.dropout);
  c.lr = j.value("lr", c.lr);
  c.batch = j.value("batch", c.batch);
  c.attention = j.value("attention", c.attention);
  c.max_decode_len = j.value("max_decode_len", c.max_decode_len);
  c.slot_cap = j.value("slot_cap", c.slot_cap);
  c.beam = j.value("beam", c.beam);
  c.clip = j.value("clip", c.clip);
  c.init_range = j.value("init_range", c.init_range);
  c.embed_sd = j.value("embed_sd", c.embed_sd);
  c.validate();
  return c;
}

}  // namespace sied::model
