#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "gradcheck.hpp"
#include "sied/corpus/synthetic.hpp"
#include "sied/model/attention_io.hpp"
#include "sied/model/train.hpp"

using namespace sied;
using namespace sied::model;

namespace {

corpus::Vocabulary vocab_of(const std::vector<Tokens>& utts, Side side, int cap = 8) {
  return corpus::build_vocab(utts, side, 1, cap);
}

ModelConfig small_config(bool attention) {
  ModelConfig c;
  c.embed_dim = 8;
  c.hidden = 10;
  c.attn_ctx = 9;
  c.feature_maps = 5;
  c.attention = attention;
  c.max_decode_len = 12;
  return c;
}

std::vector<HistoryTurn> sample_history() {
  return {{split_ws("welcome to the bus system ."), split_ws("leaving from [LOCATION-0]"), 0.9},
          {split_ws("leaving from [LOCATION-0] . where are you going ?"), split_ws("to [LOCATION-1]"), 0.3},
          {split_ws("going to [LOCATION-1] . when ?"), split_ws("[HOUR-0] [MINUTE-0] [AMPM-0]"), 1.0}};
}

struct Fixture {
  corpus::Vocabulary sys, usr;
  Fixture() {
    std::vector<Tokens> s, u;
    for (const auto& t : sample_history()) {
      s.push_back(t.system);
      u.push_back(t.user);
    }
    s.push_back(split_ws("[kb-search] [LOCATION-0] [LOCATION-1] [HOUR-0] [MINUTE-0] [AMPM-0] ."));
    sys = vocab_of(s, Side::System);
    usr = vocab_of(u, Side::User);
  }
};

std::vector<corpus::IndexedDialog> synthetic_indexed(int n, std::uint64_t seed) {
  corpus::SyntheticConfig cfg;
  cfg.n_dialogs = n;
  return corpus::index_dataset(corpus::generate_synthetic_corpus(cfg, seed), entity::Recognizer());
}

std::pair<corpus::Vocabulary, corpus::Vocabulary> vocabs(const std::vector<corpus::IndexedDialog>& ds) {
  return {corpus::build_vocab(corpus::side_utterances(ds, true), Side::System),
          corpus::build_vocab(corpus::side_utterances(ds, false), Side::User)};
}

}  // namespace

TEST(ModelConfig, DefaultHyperparameters) {
  const ModelConfig c;
  EXPECT_EQ(c.embed_dim, 100u);
  EXPECT_EQ(c.hidden, 500u);
  EXPECT_EQ(c.layers, 1u);
  EXPECT_EQ(c.attn_ctx, 500u);
  EXPECT_EQ(c.filter_windows, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(c.feature_maps, 100u);
  EXPECT_DOUBLE_EQ(c.dropout, 0.4);
  EXPECT_DOUBLE_EQ(c.lr, 1e-3);
  EXPECT_EQ(c.batch, 40u);
  EXPECT_EQ(c.utterance_dim(), 300u);
  EXPECT_EQ(c.turn_dim(), 601u);
}

TEST(ModelConfig, ValidationAndJson) {
  ModelConfig c;
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.dropout = 0.2;
  c.hidden = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  const auto d = small_config(false);
  EXPECT_EQ(config_from_json(to_json(d)), d);
  EXPECT_THROW(config_from_json({{"hiden", 3}}), std::invalid_argument);
  EXPECT_EQ(config_from_json({{"hidden", 64}}).hidden, 64u);
}

TEST(SiedModel, TiedCnnAndOptionalAttention) {
  Fixture f;
  const SiedModel attn(small_config(true), f.sys, f.usr, 1);
  const SiedModel plain(small_config(false), f.sys, f.usr, 1);
  EXPECT_NE(attn.params().find("cnn.w1"), nullptr);
  EXPECT_NE(attn.params().find("cnn.w3"), nullptr);
  EXPECT_EQ(attn.params().find("cnn.w4"), nullptr);
  EXPECT_NE(attn.params().find("attention.w_a"), nullptr);
  EXPECT_EQ(plain.params().find("attention.w_a"), nullptr);
  EXPECT_EQ(plain.params().find("attention.b_a"), nullptr);
  EXPECT_EQ(plain.params().find("attention.w_s"), nullptr);
  EXPECT_EQ(attn.params().size(), plain.params().size() + 3);
}

TEST(SiedModel, UtteranceEncodingBoundaries) {
  Fixture f;
  const SiedModel m(small_config(true), f.sys, f.usr, 2);
  ad::Tape tape(false);
  const auto a = m.encode_utterance(tape, split_ws("leaving from [LOCATION-0]"), Side::User, false, nullptr);
  const auto b = m.encode_utterance(tape, split_ws("leaving from [LOCATION-0]"), Side::User, false, nullptr);
  EXPECT_EQ(a.value(), b.value());
  EXPECT_EQ(a.size(), 15u);
  EXPECT_EQ(m.encode_utterance(tape, split_ws("to"), Side::User, false, nullptr).size(), 15u);
  EXPECT_EQ(m.encode_utterance(tape, {}, Side::User, false, nullptr).size(), 15u);
  EXPECT_EQ(m.utterance_ids({}, Side::User), (std::vector<std::size_t>(3, corpus::Vocabulary::kPadId)));
  Rng rng(3);
  ad::Tape train_tape;
  const auto dropped = m.encode_utterance(train_tape, split_ws("leaving from [LOCATION-0]"), Side::User, true, &rng);
  EXPECT_NE(dropped.value(), a.value());
}

TEST(SiedModel, WordOrderSeparatesSwappedSlots) {
  const auto u = std::vector<Tokens>{split_ws("leave from [LOCATION-0] and go to [LOCATION-1]")};
  const auto sys = vocab_of(u, Side::System);
  const auto usr = vocab_of(u, Side::User);
  const SiedModel m(small_config(false), sys, usr, 4);
  const auto x = split_ws("leave from [LOCATION-0] and go to [LOCATION-1]");
  const auto y = split_ws("leave from [LOCATION-1] and go to [LOCATION-0]");
  ad::Tape tape(false);
  const auto ex = m.encode_utterance(tape, x, Side::User, false, nullptr).value();
  const auto ey = m.encode_utterance(tape, y, Side::User, false, nullptr).value();
  EXPECT_NE(ex, ey);
  // A bag of embeddings cannot tell the two apart.
  auto bag = [&](const Tokens& t) {
    const auto ids = m.utterance_ids(t, Side::User);
    const auto& E = m.params().at("embed.user").value;
    std::vector<double> s(E.cols(), 0.0);
    for (auto id : ids)
      for (std::size_t c = 0; c < E.cols(); ++c) s[c] += E.at(id, c);
    return s;
  };
  const auto bx = bag(x), by = bag(y);
  for (std::size_t c = 0; c < bx.size(); ++c) EXPECT_NEAR(bx[c], by[c], 1e-12);
}

TEST(SiedModel, HistoryMatchesManualRecurrence) {
  Fixture f;
  const SiedModel m(small_config(true), f.sys, f.usr, 5);
  const auto hist = sample_history();
  ad::Tape tape(false);
  const auto enc = m.encode_history(tape, hist, false, nullptr);
  ASSERT_EQ(enc.size(), 3u);
  // Step-by-step recomputation with lstm_cell from a zero state.
  ad::Tape t2(false);
  const auto& p = m.params();
  auto w = t2.leaf(p.at("encoder.w").value), b = t2.leaf(p.at("encoder.b").value);
  auto h = t2.leaf(ad::Tensor({10})), c = t2.leaf(ad::Tensor({10}));
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const auto ea = m.encode_utterance(t2, hist[i].system, Side::System, false, nullptr);
    const auto eu = m.encode_utterance(t2, hist[i].user, Side::User, false, nullptr);
    const auto x = ad::concat({ea, eu, t2.leaf(ad::Tensor::scalar(hist[i].confidence))});
    EXPECT_EQ(x.size(), 31u);
    auto s = ad::lstm_cell(x, h, c, w, b);
    h = s.h;
    c = s.c;
    for (std::size_t j = 0; j < 10; ++j) EXPECT_DOUBLE_EQ(enc.outputs[i].value()[j], h.value()[j]);
  }
  // Causality: later turns do not change earlier outputs.
  auto changed = hist;
  changed[2].user = split_ws("to [LOCATION-0]");
  ad::Tape t3(false);
  const auto enc2 = m.encode_history(t3, changed, false, nullptr);
  EXPECT_EQ(enc2.outputs[0].value(), enc.outputs[0].value());
  EXPECT_EQ(enc2.outputs[1].value(), enc.outputs[1].value());
  EXPECT_NE(enc2.outputs[2].value(), enc.outputs[2].value());
  EXPECT_THROW(m.encode_history(t3, {}, false, nullptr), std::invalid_argument);
}

TEST(SiedModel, AttentionIsADistributionOverTurns) {
  Fixture f;
  const SiedModel m(small_config(true), f.sys, f.usr, 6);
  const auto r = m.decode(sample_history());
  ASSERT_FALSE(r.attention.empty());
  for (const auto& row : r.attention) {
    ASSERT_EQ(row.size(), 3u);
    double s = 0;
    for (double a : row) s += a;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
  const auto one = m.decode({sample_history()[0]});
  for (const auto& row : one.attention) EXPECT_EQ(row, std::vector<double>{1.0});
  const auto mat = m.attention_weights(sample_history(), split_ws("going to [LOCATION-1] ."));
  ASSERT_EQ(mat.weights.size(), 3u);
  for (std::size_t j = 0; j < 4; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 3; ++i) s += mat.weights[i][j];
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(SiedModel, ZeroAttentionParametersGiveUniformWeights) {
  Fixture f;
  SiedModel m(small_config(true), f.sys, f.usr, 7);
  m.params().at("attention.w_a").value.fill(0.0);
  m.params().at("attention.b_a").value.fill(0.0);
  const auto mat = m.attention_weights(sample_history(), split_ws("going to [LOCATION-1] ."));
  for (const auto& row : mat.weights)
    for (double a : row) EXPECT_DOUBLE_EQ(a, 1.0 / 3.0);
}

TEST(SiedModel, PlainDecoderRejectsAttentionQueries) {
  Fixture f;
  const SiedModel m(small_config(false), f.sys, f.usr, 8);
  EXPECT_THROW(m.attention_weights(sample_history(), split_ws("going")), UnsupportedOperation);
  EXPECT_TRUE(m.decode(sample_history()).attention.empty());
}

TEST(SiedModel, DecodingRespectsLengthCapAndMask) {
  Fixture f;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SiedModel m(small_config(seed % 2 == 0), f.sys, f.usr, seed);
    const auto r = m.decode(sample_history());
    EXPECT_LE(r.tokens.size(), 12u);
    DecodeOptions opt;
    opt.max_len = 3;
    opt.banned.assign(f.sys.size(), true);
    opt.banned[corpus::Vocabulary::kEosId] = false;
    opt.banned[f.sys.id("going")] = false;
    const auto masked = m.decode(sample_history(), opt);
    EXPECT_LE(masked.tokens.size(), 3u);
    for (const auto& t : masked.tokens) EXPECT_EQ(t, "going");
  }
}

// Finite differences over every parameter of a tiny model through the full
// loss: CNN, turn encoder, attention and decoder.
TEST(SiedModel, EndToEndGradientMatchesFiniteDifferences) {
  std::vector<Tokens> s{split_ws("a [LOCATION-0] b"), split_ws("b [HOUR-0]")};
  std::vector<Tokens> u{split_ws("x [LOCATION-0] y"), split_ws("z [HOUR-0]")};
  const auto sys = vocab_of(s, Side::System, 1);
  const auto usr = vocab_of(u, Side::User, 1);
  ASSERT_EQ(sys.size(), 12u);  // 5 fixed + one slot per type + 2 words
  for (bool attention : {true, false}) {
    ModelConfig c;
    c.embed_dim = 4;
    c.hidden = 6;
    c.attn_ctx = 5;
    c.feature_maps = 3;
    c.attention = attention;
    c.slot_cap = 1;
    c.init_range = 0.5;
    c.embed_sd = 0.5;
    SiedModel m(c, sys, usr, 11);
    corpus::IndexedDialog d{"g", {{s[0], u[0], 0.7, {}, false}, {s[1], u[1], 0.4, {}, false}, {s[0], {}, 1.0, {}, false}}, entity::IndexedEntityTable()};
    auto loss_of = [&](bool grad) {
      ad::Tape tape(grad);
      auto p = detail::dialog_pass(m, tape, d, false, nullptr);
      if (grad) tape.backward(p.loss);
      return p.loss.item();
    };
    m.params().zero_grad();
    loss_of(true);
    double worst = 0;
    for (auto* p : m.params().all()) {
      const auto analytic = p->grad.values();
      std::vector<double> numeric(analytic.size());
      for (std::size_t i = 0; i < numeric.size(); ++i) {
        const double keep = p->value[i];
        p->value[i] = keep + 1e-5;
        const double up = loss_of(false);
        p->value[i] = keep - 1e-5;
        const double down = loss_of(false);
        p->value[i] = keep;
        numeric[i] = (up - down) / 2e-5;
      }
      const double err = sied::testing::relative_error(analytic, numeric);
      EXPECT_LE(err, 1e-3) << p->name << (attention ? " (attention)" : " (plain)");
      worst = std::max(worst, err);
    }
    RecordProperty(attention ? "worst_rel_error_attention" : "worst_rel_error_plain", std::to_string(worst));
  }
}

TEST(Training, ZeroLearningRateLeavesParametersUnchanged) {
  const auto ds = synthetic_indexed(5, 3);
  const auto [sv, uv] = vocabs(ds);
  auto cfg = small_config(true);
  cfg.lr = 0.0;
  SiedModel m(cfg, sv, uv, 1);
  const auto before = m.params().snapshot();
  TrainOptions opt;
  opt.max_epochs = 1;
  train(m, ds, {}, opt);
  EXPECT_EQ(m.params().snapshot(), before);
}

TEST(Training, SameSeedSameCurve) {
  const auto ds = synthetic_indexed(8, 3);
  const auto dev = synthetic_indexed(3, 4);
  const auto [sv, uv] = vocabs(ds);
  auto run = [&, sv = sv, uv = uv] {
    SiedModel m(small_config(true), sv, uv, 9);
    TrainOptions opt;
    opt.max_epochs = 3;
    opt.seed = 5;
    std::vector<double> curve;
    for (const auto& e : train(m, ds, dev, opt).epochs) {
      curve.push_back(e.train_loss);
      curve.push_back(e.dev_loss);
    }
    return std::make_pair(curve, m.params().snapshot());
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_LT(a.first[4], a.first[0]);
}

TEST(Training, KeepsBestDevParametersAndStopsOnPatience) {
  const auto ds = synthetic_indexed(2, 3);
  const auto dev = synthetic_indexed(3, 8);
  const auto [sv, uv] = vocabs(ds);
  auto cfg = small_config(false);
  cfg.lr = 0.05;  // two dialogs, no dropout: dev loss turns around quickly
  cfg.dropout = 0.0;
  SiedModel m(cfg, sv, uv, 2);
  TrainOptions opt;
  opt.max_epochs = 300;
  opt.patience = 3;
  const auto r = train(m, ds, dev, opt);
  ASSERT_FALSE(r.epochs.empty());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : r.epochs) best = std::min(best, e.dev_loss);
  EXPECT_DOUBLE_EQ(r.best_dev_loss, best);
  EXPECT_NEAR(evaluate_forced(m, dev).loss, best, 1e-12);
  ASSERT_TRUE(r.stopped_early);
  EXPECT_EQ(r.epochs.size(), r.best_epoch + opt.patience);
}

TEST(Training, NonFiniteParametersAbortWithDiagnostics) {
  const auto ds = synthetic_indexed(2, 3);
  const auto [sv, uv] = vocabs(ds);
  SiedModel m(small_config(true), sv, uv, 1);
  m.params().at("encoder.w").value[0] = std::nan("");
  TrainOptions opt;
  opt.max_epochs = 1;
  try {
    train(m, ds, {}, opt);
    FAIL();
  } catch (const TrainingDiverged& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("dialog syn-"), std::string::npos) << e.what();
  }
}

TEST(Training, OverfitsOneDialog) {
  const auto ds = synthetic_indexed(1, 12);
  const auto [sv, uv] = vocabs(ds);
  auto cfg = small_config(true);
  cfg.embed_dim = 16;
  cfg.hidden = 32;
  cfg.attn_ctx = 32;
  cfg.feature_maps = 16;
  cfg.dropout = 0.0;
  cfg.lr = 0.01;
  cfg.max_decode_len = 40;
  SiedModel m(cfg, sv, uv, 3);
  TrainOptions opt;
  opt.max_epochs = 300;
  opt.stop_at_train_accuracy = 1.0;
  const auto r = train(m, ds, {}, opt);
  EXPECT_DOUBLE_EQ(r.final_train_accuracy, 1.0);
  const auto turns = history_turns(ds[0]);
  for (std::size_t i = 1; i < turns.size(); ++i) {
    const std::vector<HistoryTurn> hist(turns.begin(), turns.begin() + static_cast<long>(i));
    EXPECT_EQ(join(m.decode(hist).tokens), join(turns[i].system)) << "turn " << i;
  }
}

TEST(Checkpoint, RoundTripPreservesOutputs) {
  const auto ds = synthetic_indexed(3, 3);
  const auto [sv, uv] = vocabs(ds);
  const SiedModel m(small_config(true), sv, uv, 13);
  const auto path = (std::filesystem::temp_directory_path() / "sied_model_ckpt.json").string();
  m.save(path, {{"seed", 13}});
  const auto ckpt = ad::read_checkpoint(path);
  EXPECT_EQ(ckpt.at("meta").at("seed"), 13);
  EXPECT_EQ(config_from_json(ckpt.at("meta").at("config")), m.config());
  const auto back = SiedModel::load(path);
  EXPECT_EQ(back.system_vocab(), m.system_vocab());
  EXPECT_EQ(back.params().snapshot(), m.params().snapshot());
  const auto hist = history_turns(ds[0]);
  const std::vector<HistoryTurn> h(hist.begin(), hist.begin() + 2);
  EXPECT_EQ(back.decode(h).tokens, m.decode(h).tokens);
  EXPECT_EQ(back.decode(h).attention, m.decode(h).attention);
  const SiedModel copy(m);
  EXPECT_EQ(copy.decode(h).tokens, m.decode(h).tokens);
  std::filesystem::remove(path);
}

TEST(AttentionIo, CsvAndHeatmap) {
  AttentionMatrix m{2, split_ws("going \"x\""), {{1.0, 0.25}, {0.0, 0.75}}};
  std::ostringstream csv;
  write_attention_csv(m, csv);
  EXPECT_EQ(csv.str(), "turn,\"going\",\"\"\"x\"\"\"\n0,1,0.25\n1,0,0.75\n");
  const auto text = render_heatmap(m, {"t0", "t1"});
  EXPECT_NE(text.find("t0     |@:|"), std::string::npos) << text;
  EXPECT_NE(text.find("t1     | #|"), std::string::npos) << text;
}
