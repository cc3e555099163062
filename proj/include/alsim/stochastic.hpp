#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "alsim/params.hpp"
#include "alsim/rng.hpp"
#include "alsim/tape.hpp"
#include "alsim/tensor.hpp"

namespace alsim {

inline constexpr double kLn2Pi = 1.8378770664093453;

/// Dropout configuration. Per-sequence scope means one mask is sampled per
/// (example, layer) pair and reused at every timestep of that example.
struct DropoutSpec {
  enum class Scope { kPerActivation, kPerSequence };

  double rate = 0.0;
  Scope scope = Scope::kPerActivation;

  DropoutSpec() = default;
  DropoutSpec(double p, Scope s) : rate(p), scope(s) {
    if (!(p >= 0.0 && p < 1.0)) {
      throw std::invalid_argument("dropout rate must be in [0, 1), got " +
                                  std::to_string(p));
    }
  }
};

/// Inverted dropout mask: entries are 0 with probability p, else 1/(1-p),
/// so the masked activation is an unbiased estimate of the unmasked one.
inline Tensor sample_dropout_mask(const DropoutSpec& spec, const Shape& shape,
                                  Rng& rng) {
  if (!(spec.rate >= 0.0 && spec.rate < 1.0)) {
    throw std::invalid_argument("dropout rate must be in [0, 1), got " +
                                std::to_string(spec.rate));
  }
  Tensor mask = Tensor::full(shape, 1.0);
  if (spec.rate == 0.0) return mask;
  const double keep = 1.0 / (1.0 - spec.rate);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng.bernoulli(spec.rate) ? 0.0 : keep;
  }
  return mask;
}

/// Prior over weights for variational layers.
struct PriorSpec {
  enum class Kind { kGaussian, kScaleMixture };

  Kind kind = Kind::kGaussian;
  double sigma1 = 1.0;  // the only stddev for kGaussian
  double sigma2 = 0.0;
  double pi = 0.0;  // mixing weight on the sigma1 component

  static PriorSpec gaussian(double stddev) {
    if (!(stddev > 0.0)) {
      throw std::invalid_argument("prior stddev must be positive, got " +
                                  std::to_string(stddev));
    }
    PriorSpec p;
    p.kind = Kind::kGaussian;
    p.sigma1 = stddev;
    return p;
  }

  static PriorSpec scale_mixture(double pi, double s1, double s2) {
    if (!(s1 > 0.0) || !(s2 > 0.0) || !(s1 > s2)) {
      throw std::invalid_argument("scale mixture requires s1 > s2 > 0, got " +
                                  std::to_string(s1) + " and " +
                                  std::to_string(s2));
    }
    if (!(pi > 0.0 && pi < 1.0)) {
      throw std::invalid_argument("mixing weight must be in (0, 1), got " +
                                  std::to_string(pi));
    }
    PriorSpec p;
    p.kind = Kind::kScaleMixture;
    p.sigma1 = s1;
    p.sigma2 = s2;
    p.pi = pi;
    return p;
  }
};

/// Registers the variational parameter pair for `name`: means at
/// `name + ".mu"` (uniform in [-0.1, 0.1]) and pre-softplus scales at
/// `name + ".rho"` (constant -3, i.e. sigma is about 0.049).
inline void add_variational(ParameterStore& store, const std::string& name,
                            const Shape& shape, Rng& rng) {
  Tensor mu(shape);
  for (std::size_t i = 0; i < mu.size(); ++i) mu[i] = rng.uniform(-0.1, 0.1);
  store.add(name + ".mu", std::move(mu));
  store.add(name + ".rho", Tensor::full(shape, -3.0));
}

/// A weight sample w = mu + softplus(rho) * eps living on a tape, with the
/// vars needed to build the variational loss terms afterwards.
struct BbbSample {
  Tape::Var w = -1;
  Tape::Var mu = -1;
  Tape::Var sigma = -1;
  Tensor eps;
};

inline Tensor draw_eps(const Shape& shape, Rng& rng) {
  Tensor eps(shape);
  for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
  return eps;
}

/// Samples concrete weights for the variational pair `name`. The epsilon
/// draw is a tape constant, so backward reaches mu and rho through w.
inline BbbSample bbb_sample_weights(Tape& tape, ParameterStore& store,
                                    const std::string& name,
                                    const Tensor& eps) {
  BbbSample s;
  s.mu = tape.param(store, name + ".mu");
  Tape::Var rho = tape.param(store, name + ".rho");
  if (!eps.same_shape(tape.value(s.mu))) {
    throw std::invalid_argument(
        "bbb_sample_weights: eps shape " + shape_str(eps.shape()) +
        " does not match " + shape_str(tape.value(s.mu).shape()));
  }
  s.eps = eps;
  s.sigma = tape.softplus(rho);
  s.w = tape.add(s.mu, tape.mul(s.sigma, tape.constant(eps)));
  return s;
}

/// log q(w | mu, sigma) - log p(w) for one sampled layer, as a tape scalar.
/// This is the N=1 Monte Carlo estimate of the complexity cost; gradients
/// flow to mu and rho both through the densities and through w itself.
inline Tape::Var bbb_loss_terms(Tape& tape, const BbbSample& s,
                                const PriorSpec& prior) {
  if (!tape.value(s.w).same_shape(tape.value(s.mu))) {
    throw std::invalid_argument("bbb_loss_terms: w shape " +
                                shape_str(tape.value(s.w).shape()) +
                                " does not match " +
                                shape_str(tape.value(s.mu).shape()));
  }
  // Diagonal Gaussian: log q = sum_i [-0.5 ln 2pi - ln sigma_i
  //                                   - (w_i - mu_i)^2 / (2 sigma_i^2)]
  Tape::Var diff_sq = tape.square(tape.sub(s.w, s.mu));
  Tape::Var frac = tape.div(diff_sq, tape.affine(tape.square(s.sigma), 2.0, 0.0));
  Tape::Var per_q =
      tape.affine(tape.add(tape.log(s.sigma), frac), -1.0, -0.5 * kLn2Pi);
  Tape::Var log_q = tape.sum_all(per_q);

  Tape::Var log_p;
  if (prior.kind == PriorSpec::Kind::kGaussian) {
    const double v = prior.sigma1 * prior.sigma1;
    Tape::Var per_p = tape.affine(tape.square(s.w), -0.5 / v,
                                  -0.5 * (kLn2Pi + std::log(v)));
    log_p = tape.sum_all(per_p);
  } else {
    const double v1 = prior.sigma1 * prior.sigma1;
    const double v2 = prior.sigma2 * prior.sigma2;
    const double c1 = prior.pi / std::sqrt(2.0 * M_PI * v1);
    const double c2 = (1.0 - prior.pi) / std::sqrt(2.0 * M_PI * v2);
    Tape::Var w_sq = tape.square(s.w);
    Tape::Var d1 = tape.affine(tape.exp(tape.affine(w_sq, -0.5 / v1, 0.0)), c1, 0.0);
    Tape::Var d2 = tape.affine(tape.exp(tape.affine(w_sq, -0.5 / v2, 0.0)), c2, 0.0);
    log_p = tape.sum_all(tape.log(tape.add(d1, d2)));
  }
  return tape.sub(log_q, log_p);
}

/// Apportions the total complexity cost uniformly across minibatches.
inline Tape::Var kl_weighting(Tape& tape, Tape::Var total_kl_terms,
                              std::size_t num_batches) {
  if (num_batches == 0) {
    throw std::invalid_argument("kl_weighting: num_batches must be >= 1");
  }
  return tape.affine(total_kl_terms, 1.0 / static_cast<double>(num_batches),
                     0.0);
}

inline double kl_weighting(double total_kl_terms, std::size_t num_batches) {
  if (num_batches == 0) {
    throw std::invalid_argument("kl_weighting: num_batches must be >= 1");
  }
  return total_kl_terms / static_cast<double>(num_batches);
}

}  // namespace alsim
