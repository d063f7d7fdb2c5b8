#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "sied/corpus/augment.hpp"
#include "sied/corpus/split.hpp"
#include "sied/corpus/synthetic.hpp"
#include "sied/eval/predict.hpp"
#include "sied/eval/report.hpp"

using namespace sied;
using namespace sied::eval;

namespace {

std::vector<Tokens> toks(std::initializer_list<const char*> xs) {
  std::vector<Tokens> out;
  for (auto x : xs) out.push_back(split_ws(x));
  return out;
}

const std::vector<corpus::IndexedDialog>& indexed_corpus() {
  static const auto ds = [] {
    corpus::SyntheticConfig cfg;
    cfg.n_dialogs = 1000;
    return corpus::index_dataset(corpus::generate_synthetic_corpus(cfg, 21), entity::Recognizer());
  }();
  return ds;
}

const DaTagger& trained_tagger() {
  static const DaTagger t = [] {
    const auto& ds = indexed_corpus();
    const std::vector<corpus::IndexedDialog> train(ds.begin(), ds.begin() + 800);
    return train_da_tagger(labeled_system_utterances(train));
  }();
  return t;
}

}  // namespace

TEST(Prf, DefinitionsAndConventions) {
  const auto s = prf({3, 1, 2});
  EXPECT_DOUBLE_EQ(s.precision, 0.75);
  EXPECT_DOUBLE_EQ(s.recall, 0.6);
  EXPECT_DOUBLE_EQ(s.f1, 2 * 0.75 * 0.6 / 1.35);
  const auto none = prf({0, 0, 4});
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);
}

TEST(DialogActs, HandCountedFixture) {
  // Six gold labels over three utterances; one spurious and one missed label.
  const std::vector<LabelSet> gold{{"implicit-confirm", "request-arrival"}, {"kb-query", "inform-result"},
                                   {"goodbye", "restart"}};
  const std::vector<LabelSet> pred{{"implicit-confirm", "request-arrival"},
                                   {"kb-query", "inform-result", "repeat"},
                                   {"goodbye"}};
  Counts c;
  for (std::size_t i = 0; i < 3; ++i) c += dialog_act_counts(pred[i], gold[i]);
  const auto s = prf(c);
  EXPECT_DOUBLE_EQ(s.precision, 5.0 / 6.0);
  EXPECT_DOUBLE_EQ(s.recall, 5.0 / 6.0);
}

TEST(DialogActs, IdenticalAndDisjointThroughTagger) {
  const auto& tagger = trained_tagger();
  const auto gold = toks({"where are you going ?", "where are you leaving from ?"});
  const auto same = score_dialog_acts(gold, gold, tagger);
  EXPECT_DOUBLE_EQ(same.f1, 1.0);
  const auto other = toks({"thank you for using the lets go bus information system . goodbye .",
                           "okay , let us start over ."});
  EXPECT_DOUBLE_EQ(score_dialog_acts(other, gold, tagger).f1, 0.0);
  EXPECT_THROW(score_dialog_acts(other, toks({"x"}), tagger), std::invalid_argument);
}

TEST(Slots, HandCountedPairs) {
  const auto s = score_slots(toks({"leaving from [LOCATION-0] ."}), toks({"from [LOCATION-0] to [LOCATION-1] ."}));
  EXPECT_DOUBLE_EQ(s.precision, 1.0);
  EXPECT_DOUBLE_EQ(s.recall, 0.5);
  EXPECT_EQ(score_slots(toks({"a [LOCATION-0]"}), toks({"a [LOCATION-0]"})).f1, 1.0);
  // Slot-free pairs add nothing to the counts.
  EXPECT_EQ(slot_counts(split_ws("okay ."), split_ws("hello .")), Counts{});
  const auto with_vacuous = score_slots(toks({"leaving from [LOCATION-0] .", "okay ."}),
                                        toks({"from [LOCATION-0] to [LOCATION-1] .", "yes ."}));
  EXPECT_EQ(with_vacuous.counts, s.counts);
  // Bag semantics and unresolved markers.
  EXPECT_EQ(slot_counts(split_ws("[HOUR-0] [HOUR-0] [LOCATION-?]"), split_ws("[HOUR-0]")), (Counts{1, 2, 0}));
}

TEST(Kb, HandCountedFixture) {
  const auto gold = toks({"[kb-search] [LOCATION-0] [LOCATION-1] [HOUR-0] [MINUTE-0] [AMPM-0] . is there anything else ?",
                          "[kb-search] [LOCATION-1] [LOCATION-0] [HOUR-0] [MINUTE-0] [AMPM-0] . is there anything else ?"});
  EXPECT_DOUBLE_EQ(score_kb(gold, gold).f1, 1.0);
  auto wrong = gold;
  wrong[1][5] = "[AMPM-1]";
  const auto s = score_kb(wrong, gold);
  EXPECT_EQ(s.counts, (Counts{1, 1, 1}));
  EXPECT_DOUBLE_EQ(s.precision, 0.5);
  EXPECT_DOUBLE_EQ(s.recall, 0.5);
  const auto never = score_kb(toks({"okay .", "okay ."}), gold);
  EXPECT_EQ(never.precision, 0.0);
  EXPECT_EQ(never.recall, 0.0);
  // A query where none was due is a false positive only.
  EXPECT_EQ(kb_counts(gold[0], split_ws("where are you going ?")), (Counts{0, 1, 0}));
}

TEST(Bleu, HandComputedTwoSentenceFixture) {
  const auto cand = toks({"the cat sat on the mat", "a dog ran"});
  const auto ref = toks({"the cat sat on a mat", "a dog ran away quickly"});
  const auto d = bleu4_detail(cand, ref);
  EXPECT_EQ(d.matches[0], 8u);
  EXPECT_EQ(d.totals[0], 9u);
  EXPECT_EQ(d.matches[1], 5u);
  EXPECT_EQ(d.totals[1], 7u);
  EXPECT_EQ(d.matches[2], 3u);
  EXPECT_EQ(d.totals[2], 5u);
  EXPECT_EQ(d.matches[3], 1u);
  EXPECT_EQ(d.totals[3], 3u);
  // exp(1 - 11/9) * (8/9 * 5/7 * 3/5 * 1/3)^(1/4)
  EXPECT_NEAR(d.bleu, 0.4779995354275013, 1e-9);
}

TEST(Bleu, RepeatedWordCandidate) {
  const auto d = bleu4_detail(toks({"the the the the"}), toks({"the cat sat"}));
  EXPECT_DOUBLE_EQ(d.precisions[0], 0.25);
  EXPECT_EQ(d.matches[1], 0u);
  EXPECT_EQ(d.brevity_penalty, 1.0);
  EXPECT_NEAR(d.bleu, 8.034284189446515e-08, 1e-15);
}

TEST(Bleu, IdentityMonotonicityAndErrors) {
  const auto x = toks({"where are you going ?", "okay .", "a"});
  EXPECT_DOUBLE_EQ(bleu4(x, x), 1.0);
  auto worse = x;
  worse[0][1] = "is";
  EXPECT_LE(bleu4(worse, x), bleu4(x, x));
  auto worst = worse;
  worst[0][3] = "leaving";
  EXPECT_LE(bleu4(worst, x), bleu4(worse, x));
  EXPECT_THROW(bleu4({}, {}), std::invalid_argument);
  EXPECT_THROW(bleu4(x, toks({"a"})), std::invalid_argument);
  EXPECT_EQ(bleu4(toks({""}), toks({"a b"})), 0.0);
}

TEST(Metrics, PermutationInvariant) {
  const auto& ds = indexed_corpus();
  std::vector<Tokens> gold, pred;
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t k = 1; k < ds[i].turns.size(); ++k) {
      gold.push_back(ds[i].turns[k].system);
      pred.push_back(ds[i].turns[k - 1].system);  // a deliberately wrong system
    }
  std::vector<std::size_t> perm(gold.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng(3).shuffle(perm);
  std::vector<Tokens> pg, pp;
  for (auto i : perm) {
    pg.push_back(gold[i]);
    pp.push_back(pred[i]);
  }
  EXPECT_EQ(score_slots(pp, pg).counts, score_slots(pred, gold).counts);
  EXPECT_EQ(score_kb(pp, pg).counts, score_kb(pred, gold).counts);
  EXPECT_EQ(score_dialog_acts(pp, pg, trained_tagger()).counts, score_dialog_acts(pred, gold, trained_tagger()).counts);
  EXPECT_DOUBLE_EQ(bleu4(pp, pg), bleu4(pred, gold));
  for (const auto& s : {score_slots(pred, gold), score_kb(pred, gold)}) {
    EXPECT_GE(s.f1, std::min(s.precision, s.recall));
    EXPECT_LE(s.f1, std::max(s.precision, s.recall));
  }
}

TEST(DaTagger, HeldOutAccuracyOnTemplates) {
  const auto& ds = indexed_corpus();
  const std::vector<corpus::IndexedDialog> test(ds.begin() + 800, ds.end());
  const auto& tagger = trained_tagger();
  const auto acc = tagger_accuracy(tagger, labeled_system_utterances(test));
  EXPECT_GE(acc.label, 0.99);
  EXPECT_GE(acc.exact, 0.99);
  EXPECT_EQ(tagger.tag(split_ws("where are you going ?")), LabelSet{"request-arrival"});
  EXPECT_EQ(tagger.tag(split_ws("where are you going ?")), tagger.tag(split_ws("where are you going ?")));
}

TEST(DaTagger, SingleLabelCorpusAndCoverage) {
  std::vector<LabeledUtterance> one;
  for (const char* s : {"hello there", "good morning", "hi", "welcome back", "hey you"}) one.push_back({split_ws(s), {"welcome"}});
  const auto t = train_da_tagger(one);
  EXPECT_EQ(t.tag(split_ws("completely unrelated words")), LabelSet{"welcome"});
  EXPECT_EQ(t.tag({}), LabelSet{"welcome"});
  one.push_back({split_ws("bye"), {"goodbye"}});
  EXPECT_THROW(train_da_tagger(one), std::invalid_argument);
  EXPECT_THROW(train_da_tagger({}), std::invalid_argument);
  const auto back = DaTagger::from_json(trained_tagger().to_json());
  EXPECT_EQ(back.tag(split_ws("going to [LOCATION-1] . when do you want to travel ?")),
            trained_tagger().tag(split_ws("going to [LOCATION-1] . when do you want to travel ?")));
}

TEST(RawPredictions, IndexedAgainstPriorUserTurns) {
  const entity::Recognizer rec;
  corpus::Dialog d{"r", {{split_ws("welcome ."), split_ws("from cmu"), 1.0, {"welcome"}, {}},
                         {split_ws("where are you going ?"), split_ws("to the airport"), 1.0, {"request-arrival"}, {}},
                         {split_ws("going to the airport ."), {}, 1.0, {"implicit-confirm"}, {}}}};
  EXPECT_EQ(join(index_raw_prediction(split_ws("leaving from cmu . where are you going ?"), d, 1, rec)),
            "leaving from [LOCATION-0] . where are you going ?");
  // The airport has not been mentioned before turn 1.
  EXPECT_EQ(join(index_raw_prediction(split_ws("going to the airport ."), d, 1, rec)), "going to the [LOCATION-?] .");
  EXPECT_EQ(join(index_raw_prediction(split_ws("going to the airport ."), d, 2, rec)), "going to the [LOCATION-1] .");
  EXPECT_EQ(join(index_raw_prediction(split_ws("going to mckeesport ."), d, 2, rec)), "going to [LOCATION-?] .");
}

TEST(Files, AlignByDialogAndTurn) {
  const std::vector<UtteranceRecord> gold{{"a", 1, split_ws("x y")}, {"a", 2, split_ws("z")}, {"b", 1, split_ws("w")}};
  std::vector<UtteranceRecord> pred{gold[2], gold[0], gold[1]};
  const auto path = (std::filesystem::temp_directory_path() / "sied_pred.jsonl").string();
  write_utterances(pred, path);
  EXPECT_EQ(read_utterances(path), pred);
  std::filesystem::remove(path);
  const auto [p, g] = align(pred, gold);
  EXPECT_EQ(p, g);
  pred.pop_back();
  EXPECT_THROW(align(pred, gold), std::invalid_argument);
  pred.push_back({"c", 1, {}});
  EXPECT_THROW(align(pred, gold), std::invalid_argument);
}

TEST(Report, FlatTableAndBootstrap) {
  const auto gold = toks({"from [LOCATION-0] to [LOCATION-1] .", "where are you going ?", "okay ."});
  const auto pred = toks({"from [LOCATION-0] .", "where are you going ?", "okay ."});
  const auto r = evaluate("ei+attn", pred, gold, {"slot", "kb", "bleu"}, nullptr);
  std::ostringstream flat, table;
  write_flat({r}, flat);
  write_table({r}, table);
  EXPECT_NE(flat.str().find("ei+attn.slot.recall = 0.500000"), std::string::npos) << flat.str();
  EXPECT_NE(flat.str().find("ei+attn.bleu = "), std::string::npos);
  EXPECT_EQ(table.str().substr(0, table.str().find('\n')),
            "model\tda_p\tda_r\tda_f1\tslot_p\tslot_r\tslot_f1\tkb_p\tkb_r\tkb_f1\tbleu");
  EXPECT_NE(table.str().find("ei+attn\t-\t-\t-\t1.0000\t0.5000\t0.6667"), std::string::npos) << table.str();
  EXPECT_THROW(evaluate("x", pred, gold, {"da"}, nullptr), std::invalid_argument);
  EXPECT_THROW(evaluate("x", pred, gold, {"rouge"}, nullptr), std::invalid_argument);
  const auto a = bootstrap(pred, gold, {"slot", "bleu"}, nullptr, 200, 4);
  const auto b = bootstrap(pred, gold, {"slot", "bleu"}, nullptr, 200, 4);
  ASSERT_EQ(a.size(), 2u);
  for (const auto& [k, iv] : a) {
    EXPECT_EQ(iv.mean, b.at(k).mean);
    EXPECT_LE(iv.low, iv.mean);
    EXPECT_GE(iv.high, iv.mean);
  }
}
