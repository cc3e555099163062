#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>

#include "alsim/params.hpp"
#include "alsim/tape.hpp"
#include "alsim/tensor.hpp"

namespace alsim {

/// Builds a fresh tape over the store's current values and returns the
/// scalar loss. When `accumulate_grads` is true the builder must also call
/// Tape::backward so parameter gradients land in the store. The builder has
/// to be a pure function of the store values: any stochastic choices
/// (dropout masks, epsilon draws) must be frozen by the caller.
using LossFn = std::function<double(ParameterStore&, bool accumulate_grads)>;

struct GradCheckResult {
  bool ok = true;
  double max_rel_err = 0.0;
  std::string worst;  // "name[i]" of the largest relative error
};

/// Central-difference gradients d loss / d theta for every parameter entry.
inline std::map<std::string, Tensor> finite_diff_grads(const LossFn& loss_of,
                                                       ParameterStore& store,
                                                       double h = 1e-5) {
  std::map<std::string, Tensor> out;
  store.for_each([&](const std::string& name, Tensor& value) {
    Tensor g = Tensor::zeros(value.shape());
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + h;
      const double up = loss_of(store, false);
      value[i] = saved - h;
      const double down = loss_of(store, false);
      value[i] = saved;
      g[i] = (up - down) / (2.0 * h);
    }
    out.emplace(name, std::move(g));
  });
  return out;
}

inline double relative_error(double a, double b) {
  return std::fabs(a - b) / std::max(1e-8, std::fabs(a) + std::fabs(b));
}

/// Verifies the builder is deterministic (two evaluations agree bit for
/// bit), runs one backward pass, and compares every parameter gradient
/// against the central-difference oracle.
inline GradCheckResult grad_check(const LossFn& loss_of, ParameterStore& store,
                                  double tol = 1e-4, double h = 1e-5) {
  const double l1 = loss_of(store, false);
  const double l2 = loss_of(store, false);
  if (l1 != l2) {
    throw std::invalid_argument(
        "grad_check: loss builder is not deterministic (" +
        std::to_string(l1) + " vs " + std::to_string(l2) +
        "); freeze stochastic draws first");
  }
  store.zero_grads();
  loss_of(store, true);

  GradCheckResult res;
  const auto numeric = finite_diff_grads(loss_of, store, h);
  for (const auto& [name, num] : numeric) {
    const Tensor& ana = store.grad(name);
    for (std::size_t i = 0; i < num.size(); ++i) {
      const double rel = relative_error(ana[i], num[i]);
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  res.ok = res.max_rel_err < tol;
  return res;
}

}  // namespace alsim
