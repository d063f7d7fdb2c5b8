#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sied/ad/tensor.hpp"

namespace sied::ad {

// A named trainable tensor with a persistent gradient buffer. Gradients from
// any number of tapes accumulate here until zero_grad().
struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(0.0); }

  std::string name;
  Tensor value;
  Tensor grad;
};

class Tape;

// Handle to a node recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  double item() const;
};

// Append-only record of operations. Nodes are stored in creation order, so
// the record is topologically sorted by construction; backward() walks it in
// reverse exactly once.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const double* out_grad, const Tensor& out_value)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  Var leaf(Tensor value, bool requires_grad = false) {
    check_finite("leaf", value);
    return push("leaf", std::move(value), requires_grad && grad_enabled_, nullptr);
  }

  // Parameters are recorded once per tape; repeated calls return the same node.
  Var param(Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{this, it->second};
    Node node;
    node.op = "param";
    node.param = &p;
    node.requires_grad = grad_enabled_;
    nodes_.push_back(std::move(node));
    const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
    param_nodes_.emplace(&p, id);
    return Var{this, id};
  }

  const Tensor& value(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.param ? n.param->value : n.value;
  }

  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }

  // Records the result of an op. `inputs` decide whether a gradient is needed;
  // the backward closure is only kept when one is.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
    return record(op, std::move(value), std::vector<Var>(inputs), std::move(backward));
  }

  Var record(const char* op, Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
    check_finite(op, value);
    bool needs = false;
    if (grad_enabled_) {
      for (const auto& v : inputs) {
        if (v.tape != this) throw std::invalid_argument(std::string(op) + ": input recorded on another tape");
        needs = needs || nodes_[v.id].requires_grad;
      }
    }
    Var out = push(op, std::move(value), needs, nullptr);
    if (needs) {
      Node& n = nodes_[out.id];
      n.backward = std::move(backward);
      n.inputs.reserve(inputs.size());
      for (const auto& v : inputs) n.inputs.push_back(v.id);
    }
    return out;
  }

  // Accumulation buffer for the gradient of `v`, or nullptr when `v` does not
  // require one. Parameter gradients go straight into Parameter::grad.
  double* grad_buffer(Var v) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return nullptr;
    if (n.param) return n.param->grad.data();
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad.data();
  }

  // Gradient of the last backward() for a non-parameter node (zeros if none).
  std::vector<double> grad(Var v) const {
    const Node& n = nodes_[v.id];
    if (n.param) return n.param->grad.values();
    if (n.grad.empty()) return std::vector<double>(n.value.size(), 0.0);
    return n.grad;
  }

  void backward(Var loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: loss recorded on another tape");
    if (!grad_enabled_) throw std::logic_error("backward: tape was created with gradients disabled");
    if (value(loss.id).size() != 1) {
      throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(value(loss.id).shape()));
    }
    if (!nodes_[loss.id].requires_grad) return;
    grad_buffer(loss)[0] += 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
      // The closure may grow other nodes' buffers but never this node's, and
      // nodes_ itself does not grow during backward.
      n.backward(*this, n.grad.data(), n.value);
      for (auto in : n.inputs) {
        const Node& src = nodes_[in];
        if (src.param) continue;
        for (double g : src.grad) {
          if (!std::isfinite(g)) throw NumericError(std::string("non-finite gradient produced by op '") + n.op + "'");
        }
      }
    }
    for (const auto& [param, id] : param_nodes_) {
      if (!param->grad.all_finite()) {
        throw NumericError("non-finite gradient accumulated into parameter '" + param->name + "'");
      }
    }
  }

 private:
  struct Node {
    const char* op = "";
    Tensor value;
    Parameter* param = nullptr;
    std::vector<double> grad;
    bool requires_grad = false;
    BackwardFn backward;
    std::vector<std::uint32_t> inputs;
  };

  static void check_finite(const char* op, const Tensor& t) {
    if (!t.all_finite()) throw NumericError(std::string("non-finite value produced by op '") + op + "'");
  }

  Var push(const char* op, Tensor value, bool requires_grad, Parameter* param) {
    Node node;
    node.op = op;
    node.value = std::move(value);
    node.param = param;
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::uint32_t> param_nodes_;
};

inline const Tensor& Var::value() const { return tape->value(id); }
inline double Var::item() const {
  const auto& v = value();
  if (v.size() != 1) throw ShapeError("item() on non-scalar " + shape_str(v.shape()));
  return v[0];
}

}  // namespace sied::ad
