#pragma once

#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sied/ad/tape.hpp"
#include "sied/util/rng.hpp"

namespace sied::ad {

// Owns named parameters at stable addresses, in registration order.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, Tensor value) {
    if (find(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
    params_.push_back(std::make_unique<Parameter>(name, std::move(value)));
    return *params_.back();
  }

  Parameter* find(const std::string& name) {
    for (auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }
  const Parameter* find(const std::string& name) const {
    for (const auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }

  Parameter& at(const std::string& name) {
    if (auto* p = find(name)) return *p;
    throw std::out_of_range("no parameter '" + name + "'");
  }
  const Parameter& at(const std::string& name) const {
    if (const auto* p = find(name)) return *p;
    throw std::out_of_range("no parameter '" + name + "'");
  }

  std::vector<Parameter*> all() {
    std::vector<Parameter*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }
  std::vector<const Parameter*> all() const {
    std::vector<const Parameter*> out;
    for (const auto& p : params_) out.push_back(p.get());
    return out;
  }

  std::size_t size() const { return params_.size(); }
  std::size_t count_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  // Value snapshot, used for best-checkpoint bookkeeping.
  std::vector<Tensor> snapshot() const {
    std::vector<Tensor> out;
    for (const auto& p : params_) out.push_back(p->value);
    return out;
  }
  void restore(const std::vector<Tensor>& values) {
    if (values.size() != params_.size()) throw ShapeError("restore: parameter count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i].shape() != params_[i]->value.shape()) throw ShapeError("restore: shape mismatch for " + params_[i]->name);
      params_[i]->value = values[i];
    }
  }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

inline Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

inline Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.normal(0.0, stddev);
  return t;
}

inline constexpr int kCheckpointVersion = 1;

// Self-describing checkpoint: parameter names with shapes and row-major
// values, plus caller-supplied metadata (config echo, vocabularies, seed).
inline nlohmann::ordered_json checkpoint_json(const ParameterSet& params, const nlohmann::ordered_json& meta) {
  nlohmann::ordered_json j;
  j["format"] = "sied-checkpoint";
  j["version"] = kCheckpointVersion;
  j["meta"] = meta;
  auto& arr = j["params"] = nlohmann::ordered_json::array();
  for (const auto* p : params.all()) {
    arr.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"data", p->value.values()}});
  }
  return j;
}

inline void save_checkpoint(const std::string& path, const ParameterSet& params, const nlohmann::ordered_json& meta) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << checkpoint_json(params, meta).dump() << '\n';
}

inline nlohmann::ordered_json read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  auto j = nlohmann::ordered_json::parse(in);
  if (j.value("format", "") != "sied-checkpoint") throw std::runtime_error(path + ": not a checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version " + std::to_string(j.value("version", 0)));
  }
  return j;
}

// Copies stored values into an already-constructed parameter set. Every
// parameter must be present with a matching shape.
inline void load_parameters(const nlohmann::ordered_json& ckpt, ParameterSet& params) {
  std::size_t seen = 0;
  for (const auto& entry : ckpt.at("params")) {
    const auto name = entry.at("name").get<std::string>();
    auto* p = params.find(name);
    if (!p) throw std::runtime_error("checkpoint has unknown parameter '" + name + "'");
    Tensor t(entry.at("shape").get<Shape>(), entry.at("data").get<std::vector<double>>());
    if (t.shape() != p->value.shape()) {
      throw ShapeError("checkpoint shape " + shape_str(t.shape()) + " for '" + name + "' expected " +
                       shape_str(p->value.shape()));
    }
    p->value = std::move(t);
    ++seen;
  }
  if (seen != params.size()) throw std::runtime_error("checkpoint is missing parameters");
}

}  // namespace sied::ad
