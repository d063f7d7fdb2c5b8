#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sied/ad/tape.hpp"

namespace sied::ad {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

// One bias-corrected Adam update over `params` using their accumulated
// gradients. Moment buffers are created on first use.
inline void adam_step(const std::vector<Parameter*>& params, AdamState& state, double lr) {
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: parameter count changed between steps");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (state.m[k].shape() != params[k]->value.shape() || params[k]->grad.shape() != params[k]->value.shape()) {
      throw ShapeError("adam_step: shape mismatch for parameter '" + params[k]->name + "'");
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    double* w = params[k]->value.data();
    const double* g = params[k]->grad.data();
    double* m = state.m[k].data();
    double* v = state.v[k].data();
    const std::size_t n = params[k]->value.size();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

inline double global_grad_norm(const std::vector<Parameter*>& params) {
  double sq = 0;
  for (const auto* p : params)
    for (double g : p->grad.values()) sq += g * g;
  return std::sqrt(sq);
}

// Rescales gradients so their global L2 norm is at most max_norm. Returns the
// norm before clipping.
inline double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto* p : params)
      for (auto& g : p->grad.values()) g *= s;
  }
  return norm;
}

}  // namespace sied::ad
