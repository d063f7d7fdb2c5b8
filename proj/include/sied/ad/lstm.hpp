#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "sied/ad/ops.hpp"

namespace sied::ad {

struct LstmState {
  Var h;
  Var c;
};

// One LSTM step with gates stacked as [input, forget, candidate, output]:
//   z = W [x; h] + b
//   c' = sigmoid(z_f) * c + sigmoid(z_i) * tanh(z_g)
//   h' = sigmoid(z_o) * tanh(c')
// W is [4H x (I + H)], b is [4H].
inline LstmState lstm_cell(Var x, Var h, Var c, Var w, Var b) {
  const std::size_t hid = h.size(), in = x.size();
  const auto& W = w.value();
  if (c.size() != hid || W.rank() != 2 || W.rows() != 4 * hid || W.cols() != in + hid || b.size() != 4 * hid) {
    throw ShapeError("lstm_cell: dimension mismatch (x " + shape_str(x.shape()) + ", h " + shape_str(h.shape()) +
                     ", c " + shape_str(c.shape()) + ", W " + shape_str(W.shape()) + ", b " +
                     shape_str(b.shape()) + ")");
  }
  const std::size_t cols = in + hid;
  std::vector<double> xh(cols);
  std::copy_n(x.value().data(), in, xh.data());
  std::copy_n(h.value().data(), hid, xh.data() + in);

  std::vector<double> gates(4 * hid);
  const double* wp = W.data();
  const double* bp = b.value().data();
  for (std::size_t r = 0; r < 4 * hid; ++r) {
    const double* row = wp + r * cols;
    double acc = bp[r];
    for (std::size_t k = 0; k < cols; ++k) acc += row[k] * xh[k];
    gates[r] = acc;
  }
  for (std::size_t j = 0; j < hid; ++j) {
    gates[j] = detail::sigmoid(gates[j]);
    gates[hid + j] = detail::sigmoid(gates[hid + j]);
    gates[2 * hid + j] = std::tanh(gates[2 * hid + j]);
    gates[3 * hid + j] = detail::sigmoid(gates[3 * hid + j]);
  }

  Tensor out({2 * hid});
  std::vector<double> tanh_c(hid);
  const double* cp = c.value().data();
  for (std::size_t j = 0; j < hid; ++j) {
    const double cn = gates[hid + j] * cp[j] + gates[j] * gates[2 * hid + j];
    tanh_c[j] = std::tanh(cn);
    out[j] = gates[3 * hid + j] * tanh_c[j];
    out[hid + j] = cn;
  }

  Var both = x.tape->record(
      "lstm_cell", std::move(out), {x, h, c, w, b},
      [x, h, c, w, b, hid, in, xh = std::move(xh), gates = std::move(gates), tanh_c = std::move(tanh_c)](
          Tape& t, const double* g, const Tensor&) {
        const std::size_t cols = in + hid;
        const double* cp = c.value().data();
        std::vector<double> dz(4 * hid);
        double* gc = t.grad_buffer(c);
        for (std::size_t j = 0; j < hid; ++j) {
          const double ig = gates[j], fg = gates[hid + j], cg = gates[2 * hid + j], og = gates[3 * hid + j];
          const double dc = g[hid + j] + g[j] * og * (1.0 - tanh_c[j] * tanh_c[j]);
          const double d_o = g[j] * tanh_c[j];
          dz[j] = dc * cg * ig * (1.0 - ig);
          dz[hid + j] = dc * cp[j] * fg * (1.0 - fg);
          dz[2 * hid + j] = dc * ig * (1.0 - cg * cg);
          dz[3 * hid + j] = d_o * og * (1.0 - og);
          if (gc) gc[j] += dc * fg;
        }
        if (double* gb = t.grad_buffer(b))
          for (std::size_t r = 0; r < 4 * hid; ++r) gb[r] += dz[r];
        if (double* gw = t.grad_buffer(w)) {
          for (std::size_t r = 0; r < 4 * hid; ++r) {
            const double d = dz[r];
            if (d == 0.0) continue;
            double* row = gw + r * cols;
            for (std::size_t k = 0; k < cols; ++k) row[k] += d * xh[k];
          }
        }
        double* gx = t.grad_buffer(x);
        double* gh = t.grad_buffer(h);
        if (gx || gh) {
          std::vector<double> dxh(cols, 0.0);
          const double* wp = w.value().data();
          for (std::size_t r = 0; r < 4 * hid; ++r) {
            const double d = dz[r];
            const double* row = wp + r * cols;
            for (std::size_t k = 0; k < cols; ++k) dxh[k] += d * row[k];
          }
          if (gx)
            for (std::size_t k = 0; k < in; ++k) gx[k] += dxh[k];
          if (gh)
            for (std::size_t k = 0; k < hid; ++k) gh[k] += dxh[in + k];
        }
      });
  return {slice(both, 0, hid), slice(both, hid, hid)};
}

}  // namespace sied::ad
