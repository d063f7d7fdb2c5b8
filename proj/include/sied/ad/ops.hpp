#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sied/ad/tape.hpp"
#include "sied/util/rng.hpp"

// Differentiable primitives. Every op checks shapes, records its result on
// the tape of its inputs and registers the vector-Jacobian product.
namespace sied::ad {

namespace detail {

inline void require_same(const char* op, const Var& a, const Var& b) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": size mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

inline Var add(Var a, Var b) {
  detail::require_same("add", a, b);
  Tensor out = a.value();
  const double* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.tape->record("add", std::move(out), {a, b}, [a, b](Tape& t, const double* g, const Tensor& y) {
    const std::size_t n = y.size();
    if (double* ga = t.grad_buffer(a))
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
    if (double* gb = t.grad_buffer(b))
      for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
  });
}

inline Var sub(Var a, Var b) {
  detail::require_same("sub", a, b);
  Tensor out = a.value();
  const double* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.tape->record("sub", std::move(out), {a, b}, [a, b](Tape& t, const double* g, const Tensor& y) {
    const std::size_t n = y.size();
    if (double* ga = t.grad_buffer(a))
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
    if (double* gb = t.grad_buffer(b))
      for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
  });
}

// Elementwise product.
inline Var mul(Var a, Var b) {
  detail::require_same("mul", a, b);
  Tensor out = a.value();
  const double* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.tape->record("mul", std::move(out), {a, b}, [a, b](Tape& t, const double* g, const Tensor& y) {
    const std::size_t n = y.size();
    const double* av = a.value().data();
    const double* bv = b.value().data();
    if (double* ga = t.grad_buffer(a))
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
    if (double* gb = t.grad_buffer(b))
      for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
  });
}

inline Var scale(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= s;
  return a.tape->record("scale", std::move(out), {a}, [a, s](Tape& t, const double* g, const Tensor& y) {
    if (double* ga = t.grad_buffer(a))
      for (std::size_t i = 0; i < y.size(); ++i) ga[i] += s * g[i];
  });
}

// a + s with s a one-element tensor broadcast over a.
inline Var add_scalar(Var a, Var s) {
  if (s.size() != 1) throw ShapeError("add_scalar: expected a scalar, got " + shape_str(s.shape()));
  Tensor out = a.value();
  const double sv = s.value()[0];
  for (auto& v : out.values()) v += sv;
  return a.tape->record("add_scalar", std::move(out), {a, s}, [a, s](Tape& t, const double* g, const Tensor& y) {
    const std::size_t n = y.size();
    if (double* ga = t.grad_buffer(a))
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
    if (double* gs = t.grad_buffer(s)) {
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) acc += g[i];
      gs[0] += acc;
    }
  });
}

inline Var sum(Var a) {
  double acc = 0;
  for (double v : a.value().values()) acc += v;
  const std::size_t n = a.size();
  return a.tape->record("sum", Tensor::scalar(acc), {a}, [a, n](Tape& t, const double* g, const Tensor&) {
    if (double* ga = t.grad_buffer(a))
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[0];
  });
}

inline Var dot(Var a, Var b) {
  detail::require_same("dot", a, b);
  const double* av = a.value().data();
  const double* bv = b.value().data();
  const std::size_t n = a.size();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += av[i] * bv[i];
  return a.tape->record("dot", Tensor::scalar(acc), {a, b}, [a, b, n](Tape& t, const double* g, const Tensor&) {
    const double* av = a.value().data();
    const double* bv = b.value().data();
    if (double* ga = t.grad_buffer(a))
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[0] * bv[i];
    if (double* gb = t.grad_buffer(b))
      for (std::size_t i = 0; i < n; ++i) gb[i] += g[0] * av[i];
  });
}

// W [m x n] times x [n] -> [m].
inline Var matvec(Var w, Var x) {
  const auto& W = w.value();
  if (W.rank() != 2 || W.cols() != x.size()) {
    throw ShapeError("matvec: cannot multiply " + shape_str(W.shape()) + " by " + shape_str(x.shape()));
  }
  const std::size_t m = W.rows(), n = W.cols();
  Tensor out({m});
  const double* wp = W.data();
  const double* xp = x.value().data();
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = wp + r * n;
    double acc = 0;
    for (std::size_t c = 0; c < n; ++c) acc += row[c] * xp[c];
    out[r] = acc;
  }
  return w.tape->record("matvec", std::move(out), {w, x}, [w, x, m, n](Tape& t, const double* g, const Tensor&) {
    const double* wp = w.value().data();
    const double* xp = x.value().data();
    if (double* gw = t.grad_buffer(w)) {
      for (std::size_t r = 0; r < m; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        double* row = gw + r * n;
        for (std::size_t c = 0; c < n; ++c) row[c] += gr * xp[c];
      }
    }
    if (double* gx = t.grad_buffer(x)) {
      for (std::size_t r = 0; r < m; ++r) {
        const double gr = g[r];
        const double* row = wp + r * n;
        for (std::size_t c = 0; c < n; ++c) gx[c] += gr * row[c];
      }
    }
  });
}

// M^T y for M [m x n], y [m] -> [n].
inline Var matvec_t(Var mat, Var y) {
  const auto& M = mat.value();
  if (M.rank() != 2 || M.rows() != y.size()) {
    throw ShapeError("matvec_t: cannot multiply transpose of " + shape_str(M.shape()) + " by " +
                     shape_str(y.shape()));
  }
  const std::size_t m = M.rows(), n = M.cols();
  Tensor out({n});
  const double* mp = M.data();
  const double* yp = y.value().data();
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = mp + r * n;
    for (std::size_t c = 0; c < n; ++c) out[c] += yp[r] * row[c];
  }
  return mat.tape->record("matvec_t", std::move(out), {mat, y}, [mat, y, m, n](Tape& t, const double* g, const Tensor&) {
    const double* mp = mat.value().data();
    const double* yp = y.value().data();
    if (double* gm = t.grad_buffer(mat)) {
      for (std::size_t r = 0; r < m; ++r) {
        double* row = gm + r * n;
        for (std::size_t c = 0; c < n; ++c) row[c] += yp[r] * g[c];
      }
    }
    if (double* gy = t.grad_buffer(y)) {
      for (std::size_t r = 0; r < m; ++r) {
        const double* row = mp + r * n;
        double acc = 0;
        for (std::size_t c = 0; c < n; ++c) acc += row[c] * g[c];
        gy[r] += acc;
      }
    }
  });
}

// Flattening concatenation into one vector.
inline Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  Tensor out({total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().values().begin(), p.value().values().end(), out.data() + off);
    off += p.size();
  }
  return parts.front().tape->record("concat", std::move(out), parts, [parts](Tape& t, const double* g, const Tensor&) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t n = p.size();
      if (double* gp = t.grad_buffer(p))
        for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
      off += n;
    }
  });
}

// Contiguous slice [begin, begin + len) of a flattened tensor.
inline Var slice(Var a, std::size_t begin, std::size_t len) {
  if (len == 0 || begin + len > a.size()) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(begin + len) +
                     ") outside " + shape_str(a.shape()));
  }
  Tensor out({len});
  std::copy_n(a.value().data() + begin, len, out.data());
  return a.tape->record("slice", std::move(out), {a}, [a, begin, len](Tape& t, const double* g, const Tensor&) {
    if (double* ga = t.grad_buffer(a))
      for (std::size_t i = 0; i < len; ++i) ga[begin + i] += g[i];
  });
}

// Stacks equally sized vectors as rows of a matrix.
inline Var stack(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("stack: no inputs");
  const std::size_t n = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != n) throw ShapeError("stack: rows differ in size");
  Tensor out({rows.size(), n});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].value().values().begin(), rows[i].value().values().end(), out.data() + i * n);
  return rows.front().tape->record("stack", std::move(out), rows, [rows, n](Tape& t, const double* g, const Tensor&) {
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (double* gr = t.grad_buffer(rows[i]))
        for (std::size_t c = 0; c < n; ++c) gr[c] += g[i * n + c];
  });
}

inline Var sigmoid(Var a) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = detail::sigmoid(v);
  return a.tape->record("sigmoid", std::move(out), {a}, [a](Tape& t, const double* g, const Tensor& y) {
    if (double* ga = t.grad_buffer(a))
      for (std::size_t i = 0; i < y.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

inline Var tanh(Var a) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = std::tanh(v);
  return a.tape->record("tanh", std::move(out), {a}, [a](Tape& t, const double* g, const Tensor& y) {
    if (double* ga = t.grad_buffer(a))
      for (std::size_t i = 0; i < y.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

inline Var relu(Var a) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = v > 0 ? v : 0.0;
  return a.tape->record("relu", std::move(out), {a}, [a](Tape& t, const double* g, const Tensor& y) {
    if (double* ga = t.grad_buffer(a))
      for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] > 0) ga[i] += g[i];
  });
}

namespace detail {

inline void softmax_inplace(double* v, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, v[i]);
  double z = 0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = std::exp(v[i] - mx);
    z += v[i];
  }
  for (std::size_t i = 0; i < n; ++i) v[i] /= z;
}

}  // namespace detail

// Softmax over the last axis (per row for matrices).
inline Var softmax(Var a) {
  Tensor out = a.value();
  const std::size_t cols = out.rank() == 2 ? out.cols() : out.size();
  const std::size_t rows = out.size() / cols;
  for (std::size_t r = 0; r < rows; ++r) detail::softmax_inplace(out.data() + r * cols, cols);
  return a.tape->record("softmax", std::move(out), {a}, [a, rows, cols](Tape& t, const double* g, const Tensor& y) {
    double* ga = t.grad_buffer(a);
    if (!ga) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yr = y.data() + r * cols;
      const double* gr = g + r * cols;
      double s = 0;
      for (std::size_t i = 0; i < cols; ++i) s += gr[i] * yr[i];
      for (std::size_t i = 0; i < cols; ++i) ga[r * cols + i] += yr[i] * (gr[i] - s);
    }
  });
}

// -log softmax(logits)[target], fused for stability.
inline Var cross_entropy(Var logits, std::size_t target) {
  const std::size_t n = logits.size();
  if (target >= n) {
    throw ShapeError("cross_entropy: target " + std::to_string(target) + " outside " + std::to_string(n) + " classes");
  }
  std::vector<double> probs(logits.value().values());
  detail::softmax_inplace(probs.data(), n);
  const auto& lv = logits.value();
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, lv[i]);
  double z = 0;
  for (std::size_t i = 0; i < n; ++i) z += std::exp(lv[i] - mx);
  const double loss = -(lv[target] - mx - std::log(z));
  return logits.tape->record("cross_entropy", Tensor::scalar(loss), {logits},
                             [logits, target, probs = std::move(probs)](Tape& t, const double* g, const Tensor&) {
                               if (double* gl = t.grad_buffer(logits)) {
                                 for (std::size_t i = 0; i < probs.size(); ++i) gl[i] += g[0] * probs[i];
                                 gl[target] -= g[0];
                               }
                             });
}

// Gathers rows of an embedding table E [V x D] -> [ids.size() x D].
inline Var embedding(Var table, std::span<const std::size_t> ids) {
  const auto& E = table.value();
  if (E.rank() != 2) throw ShapeError("embedding: table must be a matrix, got " + shape_str(E.shape()));
  if (ids.empty()) throw ShapeError("embedding: no ids");
  const std::size_t dim = E.cols();
  Tensor out({ids.size(), dim});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= E.rows()) throw ShapeError("embedding: id " + std::to_string(ids[i]) + " out of range");
    std::copy_n(E.data() + ids[i] * dim, dim, out.data() + i * dim);
  }
  std::vector<std::size_t> idv(ids.begin(), ids.end());
  return table.tape->record("embedding", std::move(out), {table},
                            [table, idv = std::move(idv), dim](Tape& t, const double* g, const Tensor&) {
                              if (double* ge = t.grad_buffer(table)) {
                                for (std::size_t i = 0; i < idv.size(); ++i)
                                  for (std::size_t c = 0; c < dim; ++c) ge[idv[i] * dim + c] += g[i * dim + c];
                              }
                            });
}

// N-gram convolution over the rows of X [n x D] followed by ReLU and
// max-pool over positions. filters[k] is [L x (w_k * D)] for window w_k,
// biases[k] is [L]. Output is [L * windows.size()], window-major.
inline Var conv_ngram_maxpool(Var x, const std::vector<Var>& filters, const std::vector<Var>& biases,
                              const std::vector<std::size_t>& windows) {
  const auto& X = x.value();
  if (X.rank() != 2) throw ShapeError("conv_ngram_maxpool: input must be a matrix, got " + shape_str(X.shape()));
  if (filters.size() != windows.size() || biases.size() != windows.size() || windows.empty()) {
    throw ShapeError("conv_ngram_maxpool: need one filter bank and bias per window size");
  }
  const std::size_t n = X.rows(), dim = X.cols();
  const std::size_t maps = filters.front().value().rows();
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const auto& F = filters[k].value();
    if (windows[k] == 0 || windows[k] > n) {
      throw ShapeError("conv_ngram_maxpool: window " + std::to_string(windows[k]) + " does not fit " +
                       std::to_string(n) + " rows");
    }
    if (F.rank() != 2 || F.rows() != maps || F.cols() != windows[k] * dim || biases[k].size() != maps) {
      throw ShapeError("conv_ngram_maxpool: filter bank " + std::to_string(k) + " has shape " + shape_str(F.shape()));
    }
  }
  Tensor out({maps * windows.size()});
  // Winning position per output unit; npos when every position was clamped.
  std::vector<std::size_t> argmax(out.size(), static_cast<std::size_t>(-1));
  const double* xp = X.data();
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const std::size_t w = windows[k], span = w * dim, positions = n - w + 1;
    const double* fp = filters[k].value().data();
    const double* bp = biases[k].value().data();
    for (std::size_t l = 0; l < maps; ++l) {
      const double* frow = fp + l * span;
      double best = 0.0;
      std::size_t best_pos = static_cast<std::size_t>(-1);
      for (std::size_t p = 0; p < positions; ++p) {
        const double* win = xp + p * dim;
        double acc = bp[l];
        for (std::size_t c = 0; c < span; ++c) acc += frow[c] * win[c];
        if (acc > best) {
          best = acc;
          best_pos = p;
        }
      }
      out[k * maps + l] = best;
      argmax[k * maps + l] = best_pos;
    }
  }
  std::vector<Var> inputs{x};
  inputs.insert(inputs.end(), filters.begin(), filters.end());
  inputs.insert(inputs.end(), biases.begin(), biases.end());
  return x.tape->record(
      "conv_ngram_maxpool", std::move(out), inputs,
      [x, filters, biases, windows, argmax = std::move(argmax), maps, dim](Tape& t, const double* g, const Tensor&) {
        const double* xp = x.value().data();
        double* gx = t.grad_buffer(x);
        for (std::size_t k = 0; k < windows.size(); ++k) {
          const std::size_t span = windows[k] * dim;
          const double* fp = filters[k].value().data();
          double* gf = t.grad_buffer(filters[k]);
          double* gb = t.grad_buffer(biases[k]);
          for (std::size_t l = 0; l < maps; ++l) {
            const std::size_t p = argmax[k * maps + l];
            const double go = g[k * maps + l];
            if (p == static_cast<std::size_t>(-1) || go == 0.0) continue;
            if (gb) gb[l] += go;
            if (gf)
              for (std::size_t c = 0; c < span; ++c) gf[l * span + c] += go * xp[p * dim + c];
            if (gx)
              for (std::size_t c = 0; c < span; ++c) gx[p * dim + c] += go * fp[l * span + c];
          }
        }
      });
}

// Inverted dropout: survivors are scaled by 1/(1-p) at train time; identity
// otherwise (no node is recorded).
inline Var dropout(Var a, double p, Rng& rng, bool train) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (!train || p == 0.0) return a;
  Tensor out = a.value();
  std::vector<double> mask(out.size());
  const double keep = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() < p ? 0.0 : keep;
    out[i] *= mask[i];
  }
  return a.tape->record("dropout", std::move(out), {a}, [a, mask = std::move(mask)](Tape& t, const double* g, const Tensor&) {
    if (double* ga = t.grad_buffer(a))
      for (std::size_t i = 0; i < mask.size(); ++i) ga[i] += g[i] * mask[i];
  });
}

}  // namespace sied::ad
