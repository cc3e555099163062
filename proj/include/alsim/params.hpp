#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

#include "alsim/tensor.hpp"

namespace alsim {

/// Named parameter tensors plus their gradient accumulators and Adam moments.
/// Iteration order is the (deterministic) lexicographic order of the names.
class ParameterStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
    Tensor m;  // Adam first moment
    Tensor v;  // Adam second moment
  };

  void add(const std::string& name, Tensor init) {
    if (entries_.count(name)) {
      throw std::invalid_argument("ParameterStore: duplicate parameter '" +
                                  name + "'");
    }
    Entry e;
    e.grad = Tensor::zeros(init.shape());
    e.m = Tensor::zeros(init.shape());
    e.v = Tensor::zeros(init.shape());
    e.value = std::move(init);
    entries_.emplace(name, std::move(e));
  }

  bool has(const std::string& name) const { return entries_.count(name) > 0; }

  Tensor& value(const std::string& name) { return entry(name).value; }
  const Tensor& value(const std::string& name) const { return entry(name).value; }
  Tensor& grad(const std::string& name) { return entry(name).grad; }
  const Tensor& grad(const std::string& name) const { return entry(name).grad; }

  std::size_t size() const { return entries_.size(); }

  void zero_grads() {
    for (auto& [name, e] : entries_) {
      std::fill(e.grad.data(), e.grad.data() + e.grad.size(), 0.0);
    }
  }

  /// Standard Adam update with bias correction over every parameter.
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8) {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count_));
    for (auto& [name, e] : entries_) {
      for (std::size_t i = 0; i < e.value.size(); ++i) {
        const double g = e.grad[i];
        e.m[i] = beta1 * e.m[i] + (1.0 - beta1) * g;
        e.v[i] = beta2 * e.v[i] + (1.0 - beta2) * g * g;
        const double m_hat = e.m[i] / bc1;
        const double v_hat = e.v[i] / bc2;
        e.value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
      }
    }
  }

  long step_count() const { return step_count_; }

  /// Parameter values only; optimizer state is not part of a snapshot.
  std::map<std::string, Tensor> snapshot() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, e] : entries_) out.emplace(name, e.value);
    return out;
  }

  void restore(const std::map<std::string, Tensor>& snap) {
    for (const auto& [name, t] : snap) entry(name).value = t;
  }

  template <typename Fn>  // Fn(const std::string&, Tensor& value)
  void for_each(Fn&& fn) {
    for (auto& [name, e] : entries_) fn(name, e.value);
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& [name, e] : entries_) fn(name, e.value);
  }

 private:
  Entry& entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
      throw std::invalid_argument("ParameterStore: unknown parameter '" + name +
                                  "'");
    }
    return it->second;
  }
  const Entry& entry(const std::string& name) const {
    return const_cast<ParameterStore*>(this)->entry(name);
  }

  std::map<std::string, Entry> entries_;
  long step_count_ = 0;
};

}  // namespace alsim
