#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sied/ad/lstm.hpp"
#include "sied/ad/ops.hpp"
#include "sied/ad/parameters.hpp"
#include "sied/corpus/vocab.hpp"
#include "sied/model/config.hpp"
#include "sied/util/rng.hpp"

namespace sied::model {

using corpus::Side;
using corpus::Vocabulary;

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// One (system, user, confidence) tuple of the dialog history, in indexed form.
struct HistoryTurn {
  Tokens system;
  Tokens user;
  double confidence = 1.0;
};

struct HistoryEncoding {
  std::vector<ad::LstmState> states;  // recurrent state after each turn
  std::vector<ad::Var> outputs;       // h_i as seen by attention (dropout applied in training)
  std::size_t size() const { return states.size(); }
};

struct DecodeOptions {
  std::size_t max_len = 0;      // 0: use the config value
  std::vector<bool> banned;     // per system-vocabulary id; banned ids are never emitted
};

struct DecodeResult {
  Tokens tokens;                               // without EOS
  std::vector<std::size_t> ids;
  std::vector<std::vector<double>> attention;  // per emitted token (EOS included), weights over turns
  bool reached_eos = false;
};

// Rows are turns, columns are generated tokens.
struct AttentionMatrix {
  std::size_t turns = 0;
  Tokens tokens;
  std::vector<std::vector<double>> weights;  // [turn][token]
};

struct ForcedResult {
  ad::Var loss;  // summed token cross-entropy
  std::size_t tokens = 0;
  std::size_t correct = 0;
  std::vector<std::size_t> predicted;
};

class SiedModel {
 public:
  SiedModel(ModelConfig cfg, Vocabulary system_vocab, Vocabulary user_vocab, std::uint64_t seed)
      : cfg_(std::move(cfg)), sys_(std::move(system_vocab)), usr_(std::move(user_vocab)) {
    cfg_.validate();
    if (sys_.side() != Side::System || usr_.side() != Side::User)
      throw std::invalid_argument("SiedModel: vocabularies passed for the wrong sides");
    Rng rng(seed);
    const auto D = cfg_.embed_dim, H = cfg_.hidden, L = cfg_.feature_maps, A = cfg_.attn_ctx;
    const double r = cfg_.init_range;
    sys_embed_ = &params_.add("embed.system", ad::normal_tensor({sys_.size(), D}, cfg_.embed_sd, rng));
    usr_embed_ = &params_.add("embed.user", ad::normal_tensor({usr_.size(), D}, cfg_.embed_sd, rng));
    for (auto w : cfg_.filter_windows) {
      const auto tag = std::to_string(w);
      conv_w_.push_back(&params_.add("cnn.w" + tag, ad::uniform_tensor({L, w * D}, r, rng)));
      conv_b_.push_back(&params_.add("cnn.b" + tag, ad::Tensor({L})));
    }
    enc_w_ = &params_.add("encoder.w", ad::uniform_tensor({4 * H, cfg_.turn_dim() + H}, r, rng));
    enc_b_ = &params_.add("encoder.b", ad::Tensor({4 * H}));
    const std::size_t dec_in = D + (cfg_.attention ? A : 0);
    dec_w_ = &params_.add("decoder.w", ad::uniform_tensor({4 * H, dec_in + H}, r, rng));
    dec_b_ = &params_.add("decoder.b", ad::Tensor({4 * H}));
    if (cfg_.attention) {
      attn_w_ = &params_.add("attention.w_a", ad::uniform_tensor({H, H}, r, rng));
      attn_b_ = &params_.add("attention.b_a", ad::Tensor({1}));
      attn_s_ = &params_.add("attention.w_s", ad::uniform_tensor({A, 2 * H}, r, rng));
    }
    out_w_ = &params_.add("output.w_o", ad::uniform_tensor({sys_.size(), cfg_.attention ? A : H}, r, rng));
  }

  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& system_vocab() const { return sys_; }
  const Vocabulary& user_vocab() const { return usr_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }

  // Ids fed to the CNN: out-of-vocabulary words become UNK and the sequence
  // is padded to the widest filter, so an empty utterance is all PAD.
  std::vector<std::size_t> utterance_ids(const Tokens& tokens, Side side) const {
    auto ids = (side == Side::System ? sys_ : usr_).encode(tokens);
    while (ids.size() < cfg_.max_window()) ids.push_back(Vocabulary::kPadId);
    return ids;
  }

  ad::Var encode_utterance(ad::Tape& tape, const Tokens& tokens, Side side, bool train, Rng* rng) const {
    const auto ids = utterance_ids(tokens, side);
    auto x = ad::embedding(tape.param(side == Side::System ? *sys_embed_ : *usr_embed_), ids);
    std::vector<ad::Var> fw, fb;
    for (std::size_t k = 0; k < conv_w_.size(); ++k) {
      fw.push_back(tape.param(*conv_w_[k]));
      fb.push_back(tape.param(*conv_b_[k]));
    }
    auto e = ad::conv_ngram_maxpool(x, fw, fb, cfg_.filter_windows);
    return drop(e, train, rng);
  }

  // One LSTM step per turn over [e(a_i); e(u_i); c_i], from a zero state.
  HistoryEncoding encode_history(ad::Tape& tape, const std::vector<HistoryTurn>& turns, bool train, Rng* rng) const {
    if (turns.empty()) throw std::invalid_argument("encode_history: empty history");
    const auto H = cfg_.hidden;
    HistoryEncoding enc;
    ad::LstmState s{tape.leaf(ad::Tensor({H})), tape.leaf(ad::Tensor({H}))};
    const auto w = tape.param(*enc_w_), b = tape.param(*enc_b_);
    for (const auto& t : turns) {
      const auto ea = encode_utterance(tape, t.system, Side::System, train, rng);
      const auto eu = encode_utterance(tape, t.user, Side::User, train, rng);
      const auto x = ad::concat({ea, eu, tape.leaf(ad::Tensor::scalar(t.confidence))});
      s = ad::lstm_cell(x, s.h, s.c, w, b);
      enc.states.push_back(s);
      enc.outputs.push_back(drop(s.h, train, rng));
    }
    return enc;
  }

  // Teacher-forced loss for the next system utterance given the first k
  // encoded turns. Targets are the tokens followed by EOS.
  ForcedResult teacher_force(ad::Tape& tape, const HistoryEncoding& enc, std::size_t k, const Tokens& target,
                             bool train, Rng* rng) const {
    auto ids = sys_.encode(target);
    ids.push_back(Vocabulary::kEosId);
    Decoder dec(*this, tape, enc, k, train, rng);
    ForcedResult out;
    std::vector<ad::Var> losses;
    std::size_t input = Vocabulary::kBosId;
    for (auto gold : ids) {
      const auto logits = dec.step(input, nullptr);
      losses.push_back(ad::cross_entropy(logits, gold));
      const auto pred = argmax(logits.value(), nullptr);
      out.predicted.push_back(pred);
      out.correct += pred == gold;
      ++out.tokens;
      input = gold;
    }
    out.loss = ad::sum(ad::concat(losses));
    return out;
  }

  // Greedy decoding until EOS or the length cap.
  DecodeResult decode(const std::vector<HistoryTurn>& history, const DecodeOptions& opt = {}) const {
    ad::Tape tape(false);
    const auto enc = encode_history(tape, history, false, nullptr);
    Decoder dec(*this, tape, enc, enc.size(), false, nullptr);
    const std::size_t cap = opt.max_len ? opt.max_len : cfg_.max_decode_len;
    DecodeResult out;
    std::size_t input = Vocabulary::kBosId;
    for (std::size_t j = 0; j < cap; ++j) {
      std::vector<double> attn;
      const auto logits = dec.step(input, cfg_.attention ? &attn : nullptr);
      if (cfg_.attention) out.attention.push_back(std::move(attn));
      const auto id = argmax(logits.value(), &opt.banned);
      if (id == Vocabulary::kEosId) {
        out.reached_eos = true;
        break;
      }
      out.ids.push_back(id);
      out.tokens.push_back(sys_.token(id));
      input = id;
    }
    return out;
  }

  // Attention distribution over turns while emitting each token of
  // `generated` (teacher-forced), one column per token.
  AttentionMatrix attention_weights(const std::vector<HistoryTurn>& history, const Tokens& generated) const {
    if (!cfg_.attention) throw UnsupportedOperation("attention_weights: model was built without attention");
    ad::Tape tape(false);
    const auto enc = encode_history(tape, history, false, nullptr);
    Decoder dec(*this, tape, enc, enc.size(), false, nullptr);
    AttentionMatrix m;
    m.turns = enc.size();
    m.tokens = generated;
    m.weights.assign(m.turns, {});
    std::size_t input = Vocabulary::kBosId;
    for (const auto& tok : generated) {
      std::vector<double> attn;
      dec.step(input, &attn);
      for (std::size_t i = 0; i < m.turns; ++i) m.weights[i].push_back(attn[i]);
      input = sys_.id(tok);
    }
    return m;
  }

  nlohmann::ordered_json checkpoint_meta() const {
    return {{"model", "sied"}, {"config", to_json(cfg_)}, {"system_vocab", sys_.to_json()}, {"user_vocab", usr_.to_json()}};
  }

  void save(const std::string& path, nlohmann::ordered_json extra = nlohmann::ordered_json::object()) const {
    auto meta = checkpoint_meta();
    for (auto& [k, v] : extra.items()) meta[k] = v;
    ad::save_checkpoint(path, params_, meta);
  }

  static SiedModel from_checkpoint(const nlohmann::ordered_json& ckpt) {
    const auto& meta = ckpt.at("meta");
    SiedModel m(config_from_json(meta.at("config")), Vocabulary::from_json(meta.at("system_vocab")),
                Vocabulary::from_json(meta.at("user_vocab")), 0);
    ad::load_parameters(ckpt, m.params_);
    return m;
  }

  static SiedModel load(const std::string& path) { return from_checkpoint(ad::read_checkpoint(path)); }

  SiedModel(const SiedModel& o) : SiedModel(o.cfg_, o.sys_, o.usr_, 0) { params_.restore(o.params_.snapshot()); }
  SiedModel& operator=(const SiedModel&) = delete;
  SiedModel(SiedModel&&) = default;

 private:
  // Decoder state for one target utterance. Attention follows
  //   a_ji = softmax_i(h_i^T W_a s_j + b_a), c_j = sum_i a_ji h_i,
  //   s~_j = tanh(W_s [s_j; c_j]), p_j = softmax(W_o s~_j)
  // and feeds s~_j back as extra LSTM input at the next step.
  class Decoder {
   public:
    Decoder(const SiedModel& m, ad::Tape& tape, const HistoryEncoding& enc, std::size_t k, bool train, Rng* rng)
        : m_(m), tape_(tape), train_(train), rng_(rng) {
      if (k == 0 || k > enc.size()) throw std::invalid_argument("decoder: history prefix out of range");
      state_ = enc.states[k - 1];
      w_ = tape.param(*m.dec_w_);
      b_ = tape.param(*m.dec_b_);
      wo_ = tape.param(*m.out_w_);
      embed_ = tape.param(*m.sys_embed_);
      if (m.cfg_.attention) {
        keys_ = ad::stack({enc.outputs.begin(), enc.outputs.begin() + static_cast<long>(k)});
        wa_ = tape.param(*m.attn_w_);
        ba_ = tape.param(*m.attn_b_);
        ws_ = tape.param(*m.attn_s_);
        feed_ = tape.leaf(ad::Tensor({m.cfg_.attn_ctx}));
      }
    }

    ad::Var step(std::size_t input, std::vector<double>* attn_out) {
      const std::size_t id[1] = {input};
      auto x = ad::embedding(embed_, id);
      if (m_.cfg_.attention) x = ad::concat({x, feed_});
      state_ = ad::lstm_cell(x, state_.h, state_.c, w_, b_);
      const auto s = m_.drop(state_.h, train_, rng_);
      if (!m_.cfg_.attention) return ad::matvec(wo_, s);
      const auto scores = ad::add_scalar(ad::matvec(keys_, ad::matvec(wa_, s)), ba_);
      const auto a = ad::softmax(scores);
      if (attn_out) *attn_out = a.value().values();
      const auto ctx = ad::matvec_t(keys_, a);
      feed_ = ad::tanh(ad::matvec(ws_, ad::concat({s, ctx})));
      return ad::matvec(wo_, feed_);
    }

   private:
    const SiedModel& m_;
    ad::Tape& tape_;
    bool train_;
    Rng* rng_;
    ad::LstmState state_;
    ad::Var w_, b_, wo_, embed_, keys_, wa_, ba_, ws_, feed_;
  };

  ad::Var drop(ad::Var v, bool train, Rng* rng) const {
    if (!train || cfg_.dropout == 0.0) return v;
    if (!rng) throw std::invalid_argument("dropout in training mode needs an rng");
    return ad::dropout(v, cfg_.dropout, *rng, true);
  }

  // PAD and BOS are never predicted.
  static std::size_t argmax(const ad::Tensor& logits, const std::vector<bool>* banned) {
    std::size_t best = Vocabulary::kEosId;
    double best_v = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < logits.size(); ++i) {
      if (i == Vocabulary::kPadId || i == Vocabulary::kBosId) continue;
      if (banned && i < banned->size() && (*banned)[i]) continue;
      if (logits[i] > best_v) {
        best_v = logits[i];
        best = i;
      }
    }
    return best;
  }

  ModelConfig cfg_;
  Vocabulary sys_, usr_;
  ad::ParameterSet params_;
  ad::Parameter *sys_embed_ = nullptr, *usr_embed_ = nullptr;
  std::vector<ad::Parameter*> conv_w_, conv_b_;
  ad::Parameter *enc_w_ = nullptr, *enc_b_ = nullptr, *dec_w_ = nullptr, *dec_b_ = nullptr;
  ad::Parameter *attn_w_ = nullptr, *attn_b_ = nullptr, *attn_s_ = nullptr, *out_w_ = nullptr;
};

}  // namespace sied::model
