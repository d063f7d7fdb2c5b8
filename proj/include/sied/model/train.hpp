#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "sied/ad/adam.hpp"
#include "sied/corpus/indexed.hpp"
#include "sied/model/sied_model.hpp"

namespace sied::model {

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// History tuples of a whole dialog. Predicting a_i uses the first i of them.
inline std::vector<HistoryTurn> history_turns(const corpus::IndexedDialog& d) {
  std::vector<HistoryTurn> out;
  out.reserve(d.turns.size());
  for (const auto& t : d.turns) out.push_back({t.system, t.user, t.confidence});
  return out;
}

// Number of training examples in a dialog: one per system turn after the first.
inline std::size_t example_count(const corpus::IndexedDialog& d) { return d.turns.size() > 1 ? d.turns.size() - 1 : 0; }

inline std::size_t example_count(const std::vector<corpus::IndexedDialog>& ds) {
  std::size_t n = 0;
  for (const auto& d : ds) n += example_count(d);
  return n;
}

struct ForcedMetrics {
  double loss = 0;  // per token
  double accuracy = 0;
  std::size_t tokens = 0;
};

namespace detail {

struct DialogPass {
  ad::Var loss;
  std::size_t examples = 0, tokens = 0, correct = 0;
};

// The encoder runs once per dialog; each example decodes from its prefix.
inline DialogPass dialog_pass(const SiedModel& model, ad::Tape& tape, const corpus::IndexedDialog& d, bool train,
                              Rng* rng) {
  DialogPass p;
  const auto turns = history_turns(d);
  const std::vector<HistoryTurn> context(turns.begin(), turns.end() - 1);
  const auto enc = model.encode_history(tape, context, train, rng);
  std::vector<ad::Var> losses;
  for (std::size_t i = 1; i < turns.size(); ++i) {
    auto r = model.teacher_force(tape, enc, i, turns[i].system, train, rng);
    losses.push_back(r.loss);
    p.tokens += r.tokens;
    p.correct += r.correct;
    ++p.examples;
  }
  p.loss = ad::sum(ad::concat(losses));
  return p;
}

}  // namespace detail

// Teacher-forced loss and token accuracy with dropout off.
inline ForcedMetrics evaluate_forced(const SiedModel& model, const std::vector<corpus::IndexedDialog>& ds) {
  ForcedMetrics m;
  double loss = 0;
  std::size_t correct = 0;
  for (const auto& d : ds) {
    if (example_count(d) == 0) continue;
    ad::Tape tape(false);
    const auto p = detail::dialog_pass(model, tape, d, false, nullptr);
    loss += p.loss.item();
    m.tokens += p.tokens;
    correct += p.correct;
  }
  if (m.tokens) {
    m.loss = loss / static_cast<double>(m.tokens);
    m.accuracy = static_cast<double>(correct) / static_cast<double>(m.tokens);
  }
  return m;
}

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0;  // per token, dropout on
  double train_accuracy = 0;
  double dev_loss = 0;
  double dev_accuracy = 0;
  double grad_norm = 0;  // mean pre-clip norm over steps
  double seconds = 0;
  bool improved = false;
};

struct TrainOptions {
  std::size_t max_epochs = 50;
  std::size_t patience = 10;
  std::uint64_t seed = 1;
  // Stop once the dropout-free training accuracy reaches this value (checked
  // each epoch when set). Used for capacity runs.
  std::optional<double> stop_at_train_accuracy;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochMetrics> epochs;
  std::size_t best_epoch = 0;
  double best_dev_loss = std::numeric_limits<double>::infinity();
  double final_train_accuracy = 0;  // dropout-free, when measured
  bool stopped_early = false;
};

// Adam on summed token cross-entropy averaged over the examples of a batch.
// Batches are whole dialogs taken in shuffled order until at least
// `batch` examples are collected. The parameters with the best dev loss are
// restored at the end; without a dev set the last epoch is kept.
inline TrainResult train(SiedModel& model, const std::vector<corpus::IndexedDialog>& train_set,
                         const std::vector<corpus::IndexedDialog>& dev_set, const TrainOptions& opt) {
  if (example_count(train_set) == 0) throw std::invalid_argument("train: no training examples");
  const auto& cfg = model.config();
  auto params = model.params().all();
  ad::AdamState adam;
  Rng rng(opt.seed);
  TrainResult result;
  std::vector<ad::Tensor> best;
  std::size_t since_best = 0;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order);
    EpochMetrics em;
    em.epoch = epoch;
    double loss_sum = 0, norm_sum = 0;
    std::size_t tokens = 0, correct = 0, steps = 0, in_batch = 0;
    model.params().zero_grad();
    auto flush = [&] {
      if (!in_batch) return;
      const double s = 1.0 / static_cast<double>(in_batch);
      for (auto* p : params)
        for (auto& g : p->grad.values()) g *= s;
      norm_sum += ad::clip_grad_norm(params, cfg.clip);
      ad::adam_step(params, adam, cfg.lr);
      model.params().zero_grad();
      ++steps;
      in_batch = 0;
    };
    for (auto idx : order) {
      const auto& d = train_set[idx];
      if (example_count(d) == 0) continue;
      try {
        ad::Tape tape;
        const auto p = detail::dialog_pass(model, tape, d, true, &rng);
        tape.backward(p.loss);
        loss_sum += p.loss.item();
        tokens += p.tokens;
        correct += p.correct;
        in_batch += p.examples;
      } catch (const ad::NumericError& e) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << " on dialog " << d.id << " after " << adam.step
            << " updates: " << e.what();
        throw TrainingDiverged(msg.str());
      }
      if (in_batch >= cfg.batch) flush();
    }
    flush();
    em.train_loss = loss_sum / static_cast<double>(tokens);
    em.train_accuracy = static_cast<double>(correct) / static_cast<double>(tokens);
    em.grad_norm = steps ? norm_sum / static_cast<double>(steps) : 0.0;
    if (!std::isfinite(em.train_loss)) throw TrainingDiverged("training loss is not finite at epoch " + std::to_string(epoch));

    if (!dev_set.empty()) {
      const auto dm = evaluate_forced(model, dev_set);
      em.dev_loss = dm.loss;
      em.dev_accuracy = dm.accuracy;
      if (dm.loss < result.best_dev_loss) {
        result.best_dev_loss = dm.loss;
        result.best_epoch = epoch;
        best = model.params().snapshot();
        em.improved = true;
        since_best = 0;
      } else {
        ++since_best;
      }
    } else {
      result.best_epoch = epoch;
    }
    em.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.epochs.push_back(em);
    if (opt.on_epoch) opt.on_epoch(em);

    if (opt.stop_at_train_accuracy) {
      result.final_train_accuracy = evaluate_forced(model, train_set).accuracy;
      if (result.final_train_accuracy >= *opt.stop_at_train_accuracy) {
        result.stopped_early = true;
        result.best_epoch = epoch;
        best.clear();
        break;
      }
    }
    if (!dev_set.empty() && since_best >= opt.patience) {
      result.stopped_early = true;
      break;
    }
  }
  if (!best.empty()) model.params().restore(best);
  return result;
}

}  // namespace sied::model
