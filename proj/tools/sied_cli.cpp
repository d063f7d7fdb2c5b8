#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "sied/corpus/augment.hpp"
#include "sied/corpus/indexed.hpp"
#include "sied/corpus/split.hpp"
#include "sied/corpus/synthetic.hpp"
#include "sied/entity/rules.hpp"
#include "sied/eval/predict.hpp"
#include "sied/eval/report.hpp"
#include "sied/kb/mock.hpp"
#include "sied/model/attention_io.hpp"
#include "sied/model/pipeline.hpp"
#include "sied/service/http.hpp"
#include "sied/service/report.hpp"
#include "sied/service/service.hpp"

using namespace sied;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

nlohmann::ordered_json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return nlohmann::ordered_json::parse(in);
}

entity::Recognizer make_recognizer(const std::string& rules_dir) {
  if (rules_dir.empty()) return entity::Recognizer();
  const std::filesystem::path d(rules_dir);
  return entity::Recognizer(entity::load_rules((d / "gazetteer.txt").string(), (d / "clock_words.txt").string(),
                                               (d / "clock_patterns.txt").string()));
}

corpus::EntityView view_of(bool raw) { return raw ? corpus::EntityView::Raw : corpus::EntityView::Indexed; }

std::set<std::string> parse_metrics(const std::string& s) {
  std::set<std::string> out;
  std::stringstream ss(s);
  std::string m;
  while (std::getline(ss, m, ','))
    if (!trim(m).empty()) out.insert(trim(m));
  return out;
}

std::shared_ptr<const model::SiedModel> load_model(const std::string& path) {
  return std::make_shared<const model::SiedModel>(model::SiedModel::load(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dialog system with entity indexing: corpus tools, training, evaluation and serving"};
  app.require_subcommand(1);
  std::string rules_dir;
  app.add_option("--rules", rules_dir, "Directory with gazetteer.txt, clock_words.txt, clock_patterns.txt");

  // --- corpus ---------------------------------------------------------------
  auto* corpus_cmd = app.add_subcommand("corpus", "Generate, split, augment and index dialog corpora");
  corpus_cmd->require_subcommand(1);

  std::uint64_t seed = 1;
  std::string out_path, in_path;
  int n_dialogs = 1000;
  bool fresh = false;
  auto* gen = corpus_cmd->add_subcommand("gen", "Generate a synthetic corpus");
  gen->add_option("--seed", seed);
  gen->add_option("-n,--dialogs", n_dialogs)->check(CLI::PositiveNumber);
  gen->add_flag("--fresh-places", fresh, "Draw places from the held-out gazetteer");
  gen->add_option("--out", out_path)->required();
  gen->callback([&] {
    corpus::SyntheticConfig cfg;
    cfg.n_dialogs = n_dialogs;
    if (fresh) {
      cfg.places = entity::fresh_places();
      cfg.id_prefix = "fresh";
    }
    const auto ds = corpus::generate_synthetic_corpus(cfg, seed);
    corpus::save_dataset(ds, out_path);
    std::cout << "wrote " << ds.dialogs.size() << " dialogs to " << out_path << '\n';
  });

  std::vector<double> ratios{0.8, 0.1, 0.1};
  auto* split = corpus_cmd->add_subcommand("split", "Split dialogs into train, dev and test files");
  split->add_option("--in", in_path)->required()->check(CLI::ExistingFile);
  split->add_option("--seed", seed);
  split->add_option("--ratios", ratios)->expected(3)->delimiter(',');
  split->add_option("--out", out_path, "Output prefix; writes <prefix>.{train,dev,test}.jsonl")->required();
  split->callback([&] {
    const auto s = corpus::split_dataset(corpus::load_dataset(in_path), {ratios[0], ratios[1], ratios[2]}, seed);
    corpus::save_dataset(s.train, out_path + ".train.jsonl");
    corpus::save_dataset(s.dev, out_path + ".dev.jsonl");
    corpus::save_dataset(s.test, out_path + ".test.jsonl");
    std::cout << "train " << s.train.dialogs.size() << " dev " << s.dev.dialogs.size() << " test "
              << s.test.dialogs.size() << '\n';
  });

  double rate = 0.1;
  std::string pairs_path;
  bool with_original = false;
  auto* augment = corpus_cmd->add_subcommand("augment", "Inject chat adjacency pairs");
  augment->add_option("--in", in_path)->required()->check(CLI::ExistingFile);
  augment->add_option("--rate", rate)->check(CLI::NonNegativeNumber);
  augment->add_option("--seed", seed);
  augment->add_option("--pairs", pairs_path, "Chat pairs, one query<TAB>response per line")->check(CLI::ExistingFile);
  augment->add_flag("--union", with_original, "Write the original dialogs followed by the augmented copies");
  augment->add_option("--out", out_path)->required();
  augment->callback([&] {
    const auto ds = corpus::load_dataset(in_path);
    const auto pairs = pairs_path.empty() ? corpus::default_chat_pairs() : corpus::load_chat_pairs(pairs_path);
    const auto res = corpus::augment_with_chat(ds, pairs, rate, seed);
    corpus::save_dataset(with_original ? corpus::union_datasets(ds, res.augmented) : res.augmented, out_path);
    std::cout << res.injections.size() << " insertions in " << res.augmented.dialogs.size() << " dialogs\n";
  });

  int min_count = 1;
  bool raw = false;
  auto* vocab = corpus_cmd->add_subcommand("vocab", "Build system and user vocabularies");
  vocab->add_option("--in", in_path)->required()->check(CLI::ExistingFile);
  vocab->add_option("--min-count", min_count)->check(CLI::PositiveNumber);
  vocab->add_flag("--raw", raw, "Keep entity values instead of indexing them");
  vocab->add_option("--out", out_path)->required();
  vocab->callback([&] {
    const auto ix = corpus::index_dataset(corpus::load_dataset(in_path), make_recognizer(rules_dir), view_of(raw));
    const auto [sys, usr] = model::build_vocabs(ix, min_count);
    open_out(out_path) << nlohmann::ordered_json{{"system", sys.to_json()}, {"user", usr.to_json()}}.dump(1) << '\n';
    std::cout << "system " << sys.size() << " user " << usr.size() << '\n';
  });

  auto* index = corpus_cmd->add_subcommand("index", "Write the indexed form of each dialog");
  index->add_option("--in", in_path)->required()->check(CLI::ExistingFile);
  index->add_flag("--raw", raw);
  index->add_option("--out", out_path)->required();
  index->callback([&] {
    const auto ix = corpus::index_dataset(corpus::load_dataset(in_path), make_recognizer(rules_dir), view_of(raw));
    corpus::save_indexed(ix, out_path);
    std::cout << "wrote " << ix.size() << " indexed dialogs\n";
  });

  // --- model ----------------------------------------------------------------
  auto* model_cmd = app.add_subcommand("model", "Train and run the response generator");
  model_cmd->require_subcommand(1);

  std::string train_path, dev_path, config_path, ckpt_path;
  std::size_t epochs = 50, patience = 10;
  auto* train = model_cmd->add_subcommand("train", "Train a model");
  train->add_option("--train", train_path)->required()->check(CLI::ExistingFile);
  train->add_option("--dev", dev_path)->check(CLI::ExistingFile);
  train->add_option("--config", config_path, "Model config JSON; unset keys keep their defaults")->check(CLI::ExistingFile);
  train->add_option("--seed", seed);
  train->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
  train->add_option("--patience", patience)->check(CLI::PositiveNumber);
  train->add_flag("--raw", raw, "Train on raw entity values");
  train->add_option("--ckpt", ckpt_path)->required();
  train->callback([&] {
    const auto rec = make_recognizer(rules_dir);
    const auto cfg = config_path.empty() ? model::ModelConfig{} : model::config_from_json(read_json_file(config_path));
    const auto tr = corpus::index_dataset(corpus::load_dataset(train_path), rec, view_of(raw));
    const auto dv = dev_path.empty() ? std::vector<corpus::IndexedDialog>{}
                                     : corpus::index_dataset(corpus::load_dataset(dev_path), rec, view_of(raw));
    model::TrainOptions opt;
    opt.max_epochs = epochs;
    opt.patience = patience;
    opt.on_epoch = [](const model::EpochMetrics& e) {
      std::cout << "epoch " << e.epoch << " train_loss " << e.train_loss << " train_acc " << e.train_accuracy
                << " dev_loss " << e.dev_loss << " dev_acc " << e.dev_accuracy << " grad_norm " << e.grad_norm << " "
                << e.seconds << "s" << (e.improved ? " *" : "") << std::endl;
    };
    auto t = model::train_new(cfg, tr, dv, seed, opt);
    t.model.save(ckpt_path, {{"seed", seed}, {"entity_view", raw ? "raw" : "indexed"}, {"best_epoch", t.result.best_epoch}});
    std::cout << "saved " << ckpt_path << " (best epoch " << t.result.best_epoch << ")\n";
  });

  std::string gold_path;
  auto* decode = model_cmd->add_subcommand("decode", "Greedy responses for every system turn of a corpus");
  decode->add_option("--ckpt", ckpt_path)->required()->check(CLI::ExistingFile);
  decode->add_option("--in", in_path)->required()->check(CLI::ExistingFile);
  decode->add_flag("--raw", raw, "The checkpoint was trained on raw entity values");
  decode->add_option("--out", out_path, "Predictions, one utterance record per line")->required();
  decode->add_option("--gold", gold_path, "Also write the matching references here");
  decode->callback([&] {
    const auto rec = make_recognizer(rules_dir);
    const auto m = model::SiedModel::load(ckpt_path);
    const auto ds = corpus::load_dataset(in_path);
    const auto ps = raw ? eval::predict_raw(m, ds, rec) : eval::predict(m, corpus::index_dataset(ds, rec));
    eval::write_utterances(eval::prediction_records(ps, false), out_path);
    if (!gold_path.empty()) eval::write_utterances(eval::prediction_records(ps, true), gold_path);
    std::cout << "decoded " << ps.size() << " utterances\n";
  });

  std::string dialog_id, csv_path, heatmap_path;
  std::size_t turn = 1;
  auto* attend = model_cmd->add_subcommand("attend", "Export turn attention for one system response");
  attend->add_option("--ckpt", ckpt_path)->required()->check(CLI::ExistingFile);
  attend->add_option("--in", in_path)->required()->check(CLI::ExistingFile);
  attend->add_option("--dialog", dialog_id)->required();
  attend->add_option("--turn", turn, "System turn to generate; history is the turns before it")->check(CLI::PositiveNumber);
  attend->add_option("--csv", csv_path)->required();
  attend->add_option("--heatmap", heatmap_path);
  attend->callback([&] {
    const auto rec = make_recognizer(rules_dir);
    const auto m = model::SiedModel::load(ckpt_path);
    const auto ds = corpus::load_dataset(in_path);
    const auto it = std::find_if(ds.dialogs.begin(), ds.dialogs.end(), [&](const auto& d) { return d.id == dialog_id; });
    if (it == ds.dialogs.end()) throw std::runtime_error("no dialog " + dialog_id);
    corpus::Dataset one;
    one.dialogs.push_back(*it);
    const auto ix = corpus::index_dataset(one, rec).front();
    if (turn >= ix.turns.size()) throw std::runtime_error("dialog has " + std::to_string(ix.turns.size()) + " turns");
    auto hist = model::history_turns(ix);
    hist.resize(turn);
    const auto r = m.decode(hist);
    const auto a = m.attention_weights(hist, r.tokens);
    auto csv = open_out(csv_path);
    model::write_attention_csv(a, csv);
    std::vector<std::string> labels;
    for (const auto& h : hist) labels.push_back(join(h.user));
    const auto map = model::render_heatmap(a, labels);
    if (heatmap_path.empty())
      std::cout << map;
    else
      open_out(heatmap_path) << map;
  });

  // --- eval -----------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Score predicted system utterances");
  eval_cmd->require_subcommand(1);

  std::string pred_path, report_path, tagger_path, metrics = "da,slot,kb,bleu", name = "model";
  std::size_t bootstrap = 0;
  auto* run = eval_cmd->add_subcommand("run", "Compute metrics for one prediction file");
  run->add_option("--pred", pred_path)->required()->check(CLI::ExistingFile);
  run->add_option("--gold", gold_path)->required()->check(CLI::ExistingFile);
  run->add_option("--metrics", metrics);
  run->add_option("--tagger", tagger_path, "Dialog act tagger from 'eval tagger'; needed for da")->check(CLI::ExistingFile);
  run->add_option("--name", name);
  run->add_option("--bootstrap", bootstrap, "Resamples for percentile intervals (0: off)");
  run->add_option("--seed", seed);
  run->add_option("--report", report_path, "Flat report; a table is written next to it as <path>.tsv")->required();
  run->callback([&] {
    const auto wanted = parse_metrics(metrics);
    std::optional<eval::DaTagger> tagger;
    if (wanted.count("da")) {
      if (tagger_path.empty()) throw std::runtime_error("--metrics da needs --tagger");
      tagger = eval::DaTagger::from_json(read_json_file(tagger_path));
    }
    const auto [pred, gold] = eval::align(eval::read_utterances(pred_path), eval::read_utterances(gold_path));
    const auto r = eval::evaluate(name, pred, gold, wanted, tagger ? &*tagger : nullptr);
    auto flat = open_out(report_path);
    eval::write_flat({r}, flat);
    if (bootstrap) {
      for (const auto& [k, iv] : eval::bootstrap(pred, gold, wanted, tagger ? &*tagger : nullptr, bootstrap, seed))
        flat << name << '.' << k << ".ci = " << iv.low << ' ' << iv.high << '\n';
    }
    auto table = open_out(report_path + ".tsv");
    eval::write_table({r}, table);
    eval::write_table({r}, std::cout);
  });

  auto* tag = eval_cmd->add_subcommand("tagger", "Train the dialog act tagger on gold system turns");
  tag->add_option("--in", in_path)->required()->check(CLI::ExistingFile);
  tag->add_option("--seed", seed);
  tag->add_option("--out", out_path)->required();
  tag->callback([&] {
    const auto ix = corpus::index_dataset(corpus::load_dataset(in_path), make_recognizer(rules_dir));
    eval::TaggerOptions opt;
    opt.seed = seed;
    const auto t = eval::train_da_tagger(eval::labeled_system_utterances(ix), opt);
    open_out(out_path) << t.to_json().dump() << '\n';
  });

  // --- kb -------------------------------------------------------------------
  auto* kb_cmd = app.add_subcommand("kb", "Query or dump the mock timetable");
  kb_cmd->require_subcommand(1);
  std::uint64_t kb_seed = 1;
  long day = 0;
  kb_cmd->add_option("--kb-seed", kb_seed);
  kb_cmd->add_option("--day", day);

  kb::RouteQuery q;
  std::string meridiem = "am";
  auto* query = kb_cmd->add_subcommand("query", "Next bus for one trip");
  query->add_option("--from", q.departure)->required();
  query->add_option("--to", q.arrival)->required();
  query->add_option("--hour", q.time.hour)->required()->check(CLI::Range(1, 12));
  query->add_option("--minute", q.time.minute)->check(CLI::Range(0, 59));
  query->add_option("--meridiem", meridiem)->check(CLI::IsMember({"am", "pm"}));
  query->callback([&] {
    q.time.meridiem = *kb::parse_meridiem(meridiem);
    const kb::MockBackend backend(kb_seed, kb::known_places(), [&] { return day; });
    std::cout << kb::render_result(backend.query(q)) << '\n';
  });

  auto* dump = kb_cmd->add_subcommand("export", "Write the timetable as plain text");
  dump->add_option("--out", out_path);
  dump->callback([&] {
    const kb::MockBackend backend(kb_seed);
    if (out_path.empty()) {
      backend.export_timetable(std::cout, day);
    } else {
      auto out = open_out(out_path);
      backend.export_timetable(out, day);
    }
  });

  // --- ner ------------------------------------------------------------------
  auto* ner_cmd = app.add_subcommand("ner", "Entity recognizer rules");
  ner_cmd->require_subcommand(1);
  std::string dir;
  auto* ner_export = ner_cmd->add_subcommand("export", "Write the built-in rules as editable files");
  ner_export->add_option("--out", dir, "Directory")->required();
  ner_export->callback([&] {
    std::filesystem::create_directories(dir);
    const std::filesystem::path d(dir);
    auto g = open_out((d / "gazetteer.txt").string());
    auto n = open_out((d / "clock_words.txt").string());
    auto p = open_out((d / "clock_patterns.txt").string());
    entity::write_rules(entity::default_rules(), g, n, p);
  });

  auto* ner_tag = ner_cmd->add_subcommand("tag", "Index one utterance read from stdin");
  ner_tag->callback([&] {
    const auto rec = make_recognizer(rules_dir);
    entity::IndexedEntityTable table;
    std::string line;
    while (std::getline(std::cin, line)) std::cout << join(entity::index_utterance(tokenize(line), table, rec)) << '\n';
  });

  // --- serve / chat ---------------------------------------------------------
  std::string ckpt_b, host = "127.0.0.1", log_dir;
  int port = 8080;
  bool debug = false, mask = false;
  auto service_config = [&] {
    service::ServiceConfig cfg;
    cfg.debug = debug;
    cfg.fallback = mask ? service::FallbackMode::Mask : service::FallbackMode::Repeat;
    cfg.log_dir = log_dir;
    cfg.seed = seed;
    return cfg;
  };
  auto backend = [&] { return std::make_shared<const kb::MockBackend>(kb_seed); };

  auto* serve = app.add_subcommand("serve", "HTTP dialog service");
  serve->add_option("--ckpt", ckpt_path)->required()->check(CLI::ExistingFile);
  serve->add_option("--ckpt-b", ckpt_b, "Second model; sessions are split between A and B")->check(CLI::ExistingFile);
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_flag("--debug", debug, "Attach internals to each reply");
  serve->add_flag("--mask", mask, "Retry invalid outputs with unresolvable slots masked");
  serve->add_option("--log-dir", log_dir);
  serve->add_option("--seed", seed);
  serve->add_option("--kb-seed", kb_seed);
  serve->callback([&] {
    std::map<std::string, std::shared_ptr<const service::ResponseModel>> models;
    models["A"] = std::make_shared<service::SiedResponder>(load_model(ckpt_path));
    if (!ckpt_b.empty()) models["B"] = std::make_shared<service::SiedResponder>(load_model(ckpt_b));
    service::DialogService svc(models, backend(), service_config(), make_recognizer(rules_dir));
    httplib::Server srv;
    service::install_routes(srv, svc);
    std::cout << "listening on " << host << ":" << port << std::endl;
    if (!srv.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  });

  auto* chat = app.add_subcommand("chat", "Talk to a model on the terminal");
  chat->add_option("--ckpt", ckpt_path)->required()->check(CLI::ExistingFile);
  chat->add_flag("--debug", debug);
  chat->add_flag("--mask", mask);
  chat->add_option("--log-dir", log_dir);
  chat->add_option("--seed", seed);
  chat->add_option("--kb-seed", kb_seed);
  chat->callback([&] {
    std::map<std::string, std::shared_ptr<const service::ResponseModel>> models;
    models["A"] = std::make_shared<service::SiedResponder>(load_model(ckpt_path));
    service::DialogService svc(models, backend(), service_config(), make_recognizer(rules_dir));
    const auto s = svc.create_session();
    std::cout << "goal: " << s.goal.text() << "\n\nsystem: " << s.greeting << "\n";
    std::string line;
    bool ended = false;
    while (!ended && std::cout << "you: " << std::flush && std::getline(std::cin, line)) {
      if (trim(line).empty()) continue;
      const auto r = svc.process_turn(s.id, line);
      if (debug) std::cout << service::to_json(r.debug).dump(1) << '\n';
      std::cout << "system: " << r.reply << '\n';
      ended = r.ended;
    }
    if (!ended) return;
    int corr = 0, nat = 0;
    std::cout << "rate correctness and naturalness, 1-5 each: " << std::flush;
    if (std::cin >> corr >> nat) {
      svc.rate_session(s.id, corr, nat);
      std::cout << (svc.label(s.id).success ? "task completed\n" : "task not completed\n");
    }
  });

  try {
    CLI11_PARSE(app, argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
