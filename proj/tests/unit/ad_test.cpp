#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "gradcheck.hpp"
#include "sied/ad/adam.hpp"
#include "sied/ad/lstm.hpp"
#include "sied/ad/parameters.hpp"

using namespace sied;
using namespace sied::ad;
using sied::testing::grad_check;
using sied::testing::project;
using sied::testing::random_tensor;

namespace {

constexpr double kTol = 1e-4;
constexpr int kSeeds = 20;

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Step-by-step LSTM reference, independent of the fused kernel.
struct RefLstm {
  std::vector<double> h, c;
};
RefLstm ref_lstm(const Tensor& x, const Tensor& h, const Tensor& c, const Tensor& W, const Tensor& b) {
  const std::size_t H = h.size(), I = x.size();
  auto gate = [&](std::size_t block, std::size_t j) {
    double z = b[block * H + j];
    for (std::size_t k = 0; k < I; ++k) z += W.at(block * H + j, k) * x[k];
    for (std::size_t k = 0; k < H; ++k) z += W.at(block * H + j, I + k) * h[k];
    return z;
  };
  RefLstm out{std::vector<double>(H), std::vector<double>(H)};
  for (std::size_t j = 0; j < H; ++j) {
    const double i = sigm(gate(0, j));
    const double f = sigm(gate(1, j));
    const double g = std::tanh(gate(2, j));
    const double o = sigm(gate(3, j));
    out.c[j] = f * c[j] + i * g;
    out.h[j] = o * std::tanh(out.c[j]);
  }
  return out;
}

// Nested-loop reference for n-gram convolution + ReLU + max-over-time.
std::vector<double> ref_conv(const Tensor& X, const std::vector<Tensor>& F, const std::vector<Tensor>& B,
                             const std::vector<std::size_t>& windows) {
  std::vector<double> out;
  const std::size_t n = X.rows(), D = X.cols();
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const std::size_t w = windows[k];
    for (std::size_t l = 0; l < F[k].rows(); ++l) {
      double best = 0.0;
      for (std::size_t p = 0; p + w <= n; ++p) {
        double acc = B[k][l];
        for (std::size_t r = 0; r < w; ++r)
          for (std::size_t d = 0; d < D; ++d) acc += F[k].at(l, r * D + d) * X.at(p + r, d);
        best = std::max(best, std::max(0.0, acc));
      }
      out.push_back(best);
    }
  }
  return out;
}

}  // namespace

TEST(Backward, SquareHasAnalyticDerivative) {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(3.0), true);
  Var y = mul(x, x);
  tape.backward(y);
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 6.0);
}

TEST(Backward, SumOfSoftmaxHasZeroGradient) {
  Rng rng(3);
  Tape tape;
  Var x = tape.leaf(random_tensor({7}, rng, 3.0), true);
  tape.backward(sum(softmax(x)));
  for (double g : tape.grad(x)) EXPECT_NEAR(g, 0.0, 1e-12);
}

TEST(Backward, RejectsNonScalarLoss) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1.0, 2.0}), true);
  EXPECT_THROW(tape.backward(tanh(x)), ShapeError);
}

TEST(Backward, GradientsAccumulateAcrossUses) {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(2.0), true);
  Var y = add(mul(x, x), scale(x, 3.0));  // x^2 + 3x
  tape.backward(y);
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 7.0);
}

TEST(Backward, NonFiniteForwardValueIsRejected) {
  Tape tape;
  Tensor big = Tensor::vector({1e308, 1e308});
  Var x = tape.leaf(big, true);
  EXPECT_THROW(add(x, x), NumericError);
}

TEST(Backward, NonFiniteGradientNamesTheOp) {
  // Values stay finite, the gradient overflows inside mul's backward.
  Tape tape;
  Var a = tape.leaf(Tensor::scalar(1e300), true);
  Var b = tape.leaf(Tensor::scalar(1e-300), true);
  Var y = mul(a, b);
  Var z = scale(y, 1e300);
  try {
    tape.backward(z);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("mul"), std::string::npos) << e.what();
  }
}

TEST(Backward, DeterministicGivenSameTape) {
  Rng rng(11);
  const Tensor W = random_tensor({4, 3}, rng), x = random_tensor({3}, rng);
  auto run = [&] {
    Tape tape;
    Var w = tape.leaf(W, true), xv = tape.leaf(x, true);
    tape.backward(sum(tanh(matvec(w, xv))));
    return tape.grad(w);
  };
  EXPECT_EQ(run(), run());
}

TEST(GradCheck, ElementwiseAndReductionOps) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(seed);
    const auto a = random_tensor({5}, rng), b = random_tensor({5}, rng), s = random_tensor({1}, rng);
    auto check = [&](const char* name, sied::testing::LossBuilder f, std::vector<Tensor> in) {
      const auto r = grad_check(in, f);
      EXPECT_LT(r.max_rel_error, kTol) << name << " seed " << seed;
    };
    check("add", [&](Tape&, const std::vector<Var>& v) { return project(add(v[0], v[1]), seed); }, {a, b});
    check("sub", [&](Tape&, const std::vector<Var>& v) { return project(sub(v[0], v[1]), seed); }, {a, b});
    check("mul", [&](Tape&, const std::vector<Var>& v) { return project(mul(v[0], v[1]), seed); }, {a, b});
    check("scale", [&](Tape&, const std::vector<Var>& v) { return project(scale(v[0], -1.7), seed); }, {a});
    check("add_scalar", [&](Tape&, const std::vector<Var>& v) { return project(add_scalar(v[0], v[1]), seed); },
          {a, s});
    check("sum", [&](Tape&, const std::vector<Var>& v) { return mul(sum(v[0]), sum(v[0])); }, {a});
    check("dot", [&](Tape&, const std::vector<Var>& v) { return dot(v[0], v[1]); }, {a, b});
    check("sigmoid", [&](Tape&, const std::vector<Var>& v) { return project(sigmoid(v[0]), seed); }, {a});
    check("tanh", [&](Tape&, const std::vector<Var>& v) { return project(tanh(v[0]), seed); }, {a});
    check("relu", [&](Tape&, const std::vector<Var>& v) { return project(relu(v[0]), seed); }, {a});
    check("softmax", [&](Tape&, const std::vector<Var>& v) { return project(softmax(v[0]), seed); }, {a});
    check("cross_entropy", [&](Tape&, const std::vector<Var>& v) { return cross_entropy(v[0], seed % 5); }, {a});
    check("concat", [&](Tape&, const std::vector<Var>& v) { return project(concat({v[0], v[1], v[0]}), seed); },
          {a, b});
    check("slice", [&](Tape&, const std::vector<Var>& v) { return project(slice(v[0], 1, 3), seed); }, {a});
  }
}

TEST(GradCheck, MatrixOps) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(100 + seed);
    const auto W = random_tensor({4, 3}, rng), x = random_tensor({3}, rng), y = random_tensor({4}, rng);
    auto r = grad_check({W, x}, [&](Tape&, const std::vector<Var>& v) { return project(matvec(v[0], v[1]), seed); });
    EXPECT_LT(r.max_rel_error, kTol) << "matvec seed " << seed;
    r = grad_check({W, y}, [&](Tape&, const std::vector<Var>& v) { return project(matvec_t(v[0], v[1]), seed); });
    EXPECT_LT(r.max_rel_error, kTol) << "matvec_t seed " << seed;
    r = grad_check({x, x}, [&](Tape&, const std::vector<Var>& v) { return project(stack({v[0], v[1], v[0]}), seed); });
    EXPECT_LT(r.max_rel_error, kTol) << "stack seed " << seed;
    const auto S = random_tensor({3, 4}, rng, 2.0);
    r = grad_check({S}, [&](Tape&, const std::vector<Var>& v) { return project(softmax(v[0]), seed); });
    EXPECT_LT(r.max_rel_error, kTol) << "row softmax seed " << seed;
    const auto E = random_tensor({6, 3}, rng);
    const std::vector<std::size_t> ids{2, 0, 2, 5};
    r = grad_check({E}, [&](Tape&, const std::vector<Var>& v) { return project(embedding(v[0], ids), seed); });
    EXPECT_LT(r.max_rel_error, kTol) << "embedding seed " << seed;
  }
}

TEST(GradCheck, ConvNgramMaxpool) {
  const std::vector<std::size_t> windows{1, 2, 3};
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(200 + seed);
    std::vector<Tensor> in{random_tensor({5, 4}, rng)};
    for (auto w : windows) in.push_back(random_tensor({3, w * 4}, rng));
    for (std::size_t k = 0; k < windows.size(); ++k) in.push_back(random_tensor({3}, rng, 0.3));
    auto r = grad_check(in, [&](Tape&, const std::vector<Var>& v) {
      return project(conv_ngram_maxpool(v[0], {v[1], v[2], v[3]}, {v[4], v[5], v[6]}, windows), seed);
    });
    EXPECT_LT(r.max_rel_error, kTol) << "seed " << seed;
  }
}

TEST(GradCheck, LstmCellMatchesFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(300 + seed);
    const std::size_t I = 4, H = 3;
    std::vector<Tensor> in{random_tensor({I}, rng), random_tensor({H}, rng), random_tensor({H}, rng),
                           random_tensor({4 * H, I + H}, rng, 0.5), random_tensor({4 * H}, rng, 0.5)};
    auto r = grad_check(in, [](Tape&, const std::vector<Var>& v) {
      auto s = lstm_cell(v[0], v[1], v[2], v[3], v[4]);
      return sum(s.h);
    });
    EXPECT_LT(r.max_rel_error, kTol) << "sum(h') seed " << seed;
    r = grad_check(in, [seed](Tape&, const std::vector<Var>& v) {
      auto s = lstm_cell(v[0], v[1], v[2], v[3], v[4]);
      return add(project(s.h, seed), project(s.c, seed + 1));
    });
    EXPECT_LT(r.max_rel_error, kTol) << "(h', c') seed " << seed;
  }
}

TEST(LstmCell, ZeroParamsZeroCell) {
  Tape tape(false);
  const std::size_t I = 3, H = 2;
  auto s = lstm_cell(tape.leaf(Tensor::vector({0.3, -1, 2})), tape.leaf(Tensor({H})), tape.leaf(Tensor({H})),
                     tape.leaf(Tensor({4 * H, I + H})), tape.leaf(Tensor({4 * H})));
  for (double v : s.h.value().values()) EXPECT_EQ(v, 0.0);
  for (double v : s.c.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(LstmCell, ZeroParamsHalveTheCell) {
  Tape tape(false);
  const std::size_t I = 2, H = 3;
  const Tensor cell = Tensor::vector({1.0, -2.0, 0.5});
  auto s = lstm_cell(tape.leaf(Tensor::vector({1, 1})), tape.leaf(Tensor({H})), tape.leaf(cell),
                     tape.leaf(Tensor({4 * H, I + H})), tape.leaf(Tensor({4 * H})));
  for (std::size_t j = 0; j < H; ++j) {
    EXPECT_DOUBLE_EQ(s.c.value()[j], 0.5 * cell[j]);
    EXPECT_DOUBLE_EQ(s.h.value()[j], 0.5 * std::tanh(0.5 * cell[j]));
  }
}

TEST(LstmCell, MatchesStepByStepReference) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(400 + seed);
    const std::size_t I = 5, H = 4;
    const auto x = random_tensor({I}, rng), h = random_tensor({H}, rng), c = random_tensor({H}, rng);
    const auto W = random_tensor({4 * H, I + H}, rng), b = random_tensor({4 * H}, rng);
    Tape tape(false);
    auto s = lstm_cell(tape.leaf(x), tape.leaf(h), tape.leaf(c), tape.leaf(W), tape.leaf(b));
    const auto ref = ref_lstm(x, h, c, W, b);
    for (std::size_t j = 0; j < H; ++j) {
      EXPECT_NEAR(s.h.value()[j], ref.h[j], 1e-14);
      EXPECT_NEAR(s.c.value()[j], ref.c[j], 1e-14);
    }
  }
}

TEST(LstmCell, RejectsDimensionMismatch) {
  Tape tape(false);
  EXPECT_THROW(lstm_cell(tape.leaf(Tensor({3})), tape.leaf(Tensor({2})), tape.leaf(Tensor({2})),
                         tape.leaf(Tensor({8, 4})), tape.leaf(Tensor({8}))),
               ShapeError);
}

TEST(ConvNgram, IdentityWindowOneFilterOnSingleToken) {
  Tape tape(false);
  const Tensor emb({1, 3}, std::vector<double>{0.7, -0.4, 1.2});
  Tensor filt({3, 3});
  for (std::size_t i = 0; i < 3; ++i) filt.at(i, i) = 1.0;
  auto out = conv_ngram_maxpool(tape.leaf(emb), {tape.leaf(filt)}, {tape.leaf(Tensor({3}))}, {1});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(out.value()[i], std::max(0.0, emb[i]));
}

TEST(ConvNgram, NegativeBiasWithZeroFiltersClampsToZero) {
  Rng rng(5);
  Tape tape(false);
  std::vector<Var> f, b;
  for (std::size_t w = 1; w <= 3; ++w) {
    f.push_back(tape.leaf(Tensor({4, w * 2})));
    b.push_back(tape.leaf(Tensor({4}, -1.0)));
  }
  auto out = conv_ngram_maxpool(tape.leaf(random_tensor({5, 2}, rng)), f, b, {1, 2, 3});
  ASSERT_EQ(out.size(), 12u);
  for (double v : out.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(ConvNgram, MatchesNestedLoopReference) {
  const std::vector<std::size_t> windows{1, 2, 3};
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(500 + seed);
    const auto X = random_tensor({5, 6}, rng);
    std::vector<Tensor> F, B;
    for (auto w : windows) {
      F.push_back(random_tensor({4, w * 6}, rng));
      B.push_back(random_tensor({4}, rng, 0.2));
    }
    Tape tape(false);
    std::vector<Var> fv, bv;
    for (std::size_t k = 0; k < windows.size(); ++k) {
      fv.push_back(tape.leaf(F[k]));
      bv.push_back(tape.leaf(B[k]));
    }
    auto out = conv_ngram_maxpool(tape.leaf(X), fv, bv, windows);
    const auto ref = ref_conv(X, F, B, windows);
    ASSERT_EQ(out.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out.value()[i], ref[i], 1e-13);
  }
}

TEST(ConvNgram, WindowLargerThanInputIsAnError) {
  Tape tape(false);
  EXPECT_THROW(conv_ngram_maxpool(tape.leaf(Tensor({1, 2})), {tape.leaf(Tensor({1, 4}))}, {tape.leaf(Tensor({1}))}, {2}),
               ShapeError);
}

TEST(Softmax, RowsAreDistributions) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(600 + seed);
    Tape tape(false);
    auto p = softmax(tape.leaf(random_tensor({4, 9}, rng, 30.0)));
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < 9; ++c) {
        EXPECT_GE(p.value().at(r, c), 0.0);
        s += p.value().at(r, c);
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Dropout, InvertedScalingAtTrainIdentityAtEval) {
  Rng rng(9);
  Tape tape;
  Var x = tape.leaf(Tensor({20000}, 1.0), true);
  Var eval = dropout(x, 0.4, rng, false);
  EXPECT_EQ(eval.id, x.id);
  Var y = dropout(x, 0.4, rng, true);
  std::size_t zeros = 0;
  for (double v : y.value().values()) {
    if (v == 0.0) ++zeros;
    else EXPECT_NEAR(v, 1.0 / 0.6, 1e-15);
  }
  EXPECT_NEAR(static_cast<double>(zeros) / 20000.0, 0.4, 0.02);
  tape.backward(sum(y));
  const auto g = tape.grad(x);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g[i], y.value()[i]);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterSet ps;
  auto& p = ps.add("w", Tensor::scalar(1.0));
  p.grad[0] = 0.5;
  AdamState st;
  adam_step(ps.all(), st, 1e-3);
  EXPECT_NEAR(p.value[0], 1.0 - 1e-3, 1e-10);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  ParameterSet ps;
  auto& p = ps.add("w", Tensor::vector({0.2, -0.3}));
  AdamState st;
  adam_step(ps.all(), st, 1e-3);
  EXPECT_EQ(p.value[0], 0.2);
  EXPECT_EQ(p.value[1], -0.3);
}

TEST(Adam, ThreeStepsOnQuadraticMatchHandRolledRecurrence) {
  // f(w) = (w - 2)^2, gradient 2(w - 2).
  ParameterSet ps;
  auto& p = ps.add("w", Tensor::scalar(0.0));
  AdamState st;
  double w = 0.0, m = 0.0, v = 0.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int t = 1; t <= 3; ++t) {
    p.grad[0] = 2 * (p.value[0] - 2);
    adam_step(ps.all(), st, lr);
    const double g = 2 * (w - 2);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    w -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    EXPECT_NEAR(p.value[0], w, 1e-15) << "step " << t;
  }
  // Frozen from an independent Python run of the same recurrence.
  EXPECT_NEAR(w, 0.29937660795353477, 1e-12);
}

TEST(Adam, RejectsShapeMismatch) {
  ParameterSet ps;
  auto& p = ps.add("w", Tensor::vector({1, 2}));
  p.grad = Tensor({3});
  AdamState st;
  EXPECT_THROW(adam_step(ps.all(), st, 1e-3), ShapeError);
}

TEST(ClipGradNorm, ScalesToMaxNorm) {
  ParameterSet ps;
  auto& p = ps.add("w", Tensor::vector({0, 0}));
  p.grad = Tensor::vector({3, 4});
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps.all(), 1.0), 5.0);
  EXPECT_NEAR(global_grad_norm(ps.all()), 1.0, 1e-15);
}

TEST(Checkpoint, RoundTripsValuesExactly) {
  Rng rng(1);
  ParameterSet a;
  a.add("emb", normal_tensor({3, 4}, 0.1, rng));
  a.add("b", uniform_tensor({4}, 0.08, rng));
  const auto path = (std::filesystem::temp_directory_path() / "sied_ckpt_test.json").string();
  save_checkpoint(path, a, {{"seed", 7}});
  ParameterSet b;
  b.add("emb", Tensor({3, 4}));
  b.add("b", Tensor({4}));
  const auto j = read_checkpoint(path);
  load_parameters(j, b);
  EXPECT_EQ(a.at("emb").value, b.at("emb").value);
  EXPECT_EQ(a.at("b").value, b.at("b").value);
  EXPECT_EQ(j["meta"]["seed"], 7);
  ParameterSet c;
  c.add("emb", Tensor({4, 3}));
  c.add("b", Tensor({4}));
  EXPECT_THROW(load_parameters(j, c), ShapeError);
  std::remove(path.c_str());
}
