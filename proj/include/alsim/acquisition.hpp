#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "alsim/rng.hpp"
#include "alsim/tensor.hpp"

namespace alsim {

/// One pool example's acquisition priority. Higher score wins; among equal
/// scores a lower tiebreak wins; remaining ties fall to ascending id.
struct AcquisitionScore {
  long id = 0;
  double score = 0.0;
  double tiebreak = 0.0;
  long cost = 1;  // 1 under a sentence budget, token count under a word budget
};

struct BudgetSpec {
  enum class Unit { kSentences, kWords };
  Unit unit = Unit::kSentences;
  long amount = 1;
};

namespace detail {

inline void check_distribution(const Tensor& p, long id) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0) || !std::isfinite(p[i])) {
      throw std::invalid_argument("example " + std::to_string(id) +
                                  " has a malformed class distribution");
    }
    sum += p[i];
  }
  if (std::fabs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument("example " + std::to_string(id) +
                                " distribution sums to " + std::to_string(sum));
  }
}

}  // namespace detail

/// Uniformly random ranking; scores are a permutation of 0..n-1.
inline std::vector<AcquisitionScore> score_random(const std::vector<long>& ids,
                                                  std::uint64_t seed) {
  if (ids.empty()) throw std::invalid_argument("no ids to score");
  std::vector<std::size_t> perm(ids.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(perm);
  std::vector<AcquisitionScore> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out[i].id = ids[i];
    out[i].score = static_cast<double>(perm[i]);
  }
  return out;
}

/// Least confidence: 1 - max_k p_k, from deterministic predictions.
inline std::vector<AcquisitionScore> score_lc(
    const std::vector<long>& ids, const std::vector<Tensor>& distributions) {
  if (ids.size() != distributions.size()) {
    throw std::invalid_argument("ids and distributions disagree in length");
  }
  std::vector<AcquisitionScore> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Tensor& p = distributions[i];
    detail::check_distribution(p, ids[i]);
    double best = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) best = std::max(best, p[k]);
    out[i].id = ids[i];
    out[i].score = 1.0 - best;
  }
  return out;
}

/// Predictive entropy over the class distribution. Not part of the evaluated
/// set; provided as an extra uncertainty scorer.
inline std::vector<AcquisitionScore> score_entropy(
    const std::vector<long>& ids, const std::vector<Tensor>& distributions) {
  if (ids.size() != distributions.size()) {
    throw std::invalid_argument("ids and distributions disagree in length");
  }
  std::vector<AcquisitionScore> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Tensor& p = distributions[i];
    detail::check_distribution(p, ids[i]);
    double h = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (p[k] > 0.0) h -= p[k] * std::log(p[k]);
    }
    out[i].id = ids[i];
    out[i].score = h;
  }
  return out;
}

/// Length-normalized sequence confidence: the mean over tokens of
/// log max_k p. Negated so that higher score = less confident.
inline std::vector<AcquisitionScore> score_mnlp(
    const std::vector<long>& ids, const std::vector<Tensor>& per_token) {
  if (ids.size() != per_token.size()) {
    throw std::invalid_argument("ids and sequences disagree in length");
  }
  std::vector<AcquisitionScore> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Tensor& p = per_token[i];
    if (p.rank() != 2 || p.rows() == 0) {
      throw std::invalid_argument("example " + std::to_string(ids[i]) +
                                  " needs a nonempty [tokens x classes] grid");
    }
    double sum_log_max = 0.0;
    for (std::size_t t = 0; t < p.rows(); ++t) {
      double best = 0.0;
      for (std::size_t k = 0; k < p.cols(); ++k) {
        best = std::max(best, p.at(t, k));
      }
      if (!(best > 0.0)) {
        throw std::invalid_argument("example " + std::to_string(ids[i]) +
                                    " has a zero-probability best tag");
      }
      sum_log_max += std::log(best);
    }
    out[i].id = ids[i];
    out[i].score = -sum_log_max / static_cast<double>(p.rows());
  }
  return out;
}

/// Vote disagreement over T stochastic passes of a classifier: each pass
/// votes its argmax class, the score is 1 - (modal vote count)/T. The
/// tiebreak is the mean probability the passes assign to the modal class,
/// ascending, so equally contested examples fall to the least confident.
inline std::vector<AcquisitionScore> score_bald(
    const std::vector<long>& ids,
    const std::vector<std::vector<Tensor>>& ensemble) {
  const std::size_t T = ensemble.size();
  if (T < 2) throw std::invalid_argument("vote disagreement needs T >= 2");
  for (const auto& pass : ensemble) {
    if (pass.size() != ids.size()) {
      throw std::invalid_argument("a pass scored a different example count");
    }
  }
  std::vector<AcquisitionScore> out(ids.size());
  for (std::size_t j = 0; j < ids.size(); ++j) {
    std::map<long, std::size_t> votes;
    for (std::size_t t = 0; t < T; ++t) {
      const Tensor& p = ensemble[t][j];
      if (p.rank() != 1 || !p.same_shape(ensemble[0][j])) {
        throw std::invalid_argument("pass distributions disagree in shape");
      }
      long arg = 0;
      for (std::size_t k = 1; k < p.size(); ++k) {
        if (p[k] > p[static_cast<std::size_t>(arg)]) {
          arg = static_cast<long>(k);
        }
      }
      ++votes[arg];
    }
    // Map order is ascending class index, so the first maximal count is the
    // smallest class among tied modes.
    long mode = votes.begin()->first;
    std::size_t mode_count = 0;
    for (const auto& [cls, count] : votes) {
      if (count > mode_count) {
        mode = cls;
        mode_count = count;
      }
    }
    double consensus = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      consensus += ensemble[t][j][static_cast<std::size_t>(mode)];
    }
    out[j].id = ids[j];
    out[j].score =
        1.0 - static_cast<double>(mode_count) / static_cast<double>(T);
    out[j].tiebreak = consensus / static_cast<double>(T);
  }
  return out;
}

/// Tagging variant: a pass votes its entire argmax tag sequence, and
/// agreement is counted over whole sequences. The consensus probability of
/// a pass is the product over tokens of the probability it assigns to the
/// modal sequence.
inline std::vector<AcquisitionScore> score_bald_tagging(
    const std::vector<long>& ids,
    const std::vector<std::vector<Tensor>>& ensemble) {
  const std::size_t T = ensemble.size();
  if (T < 2) throw std::invalid_argument("vote disagreement needs T >= 2");
  for (const auto& pass : ensemble) {
    if (pass.size() != ids.size()) {
      throw std::invalid_argument("a pass scored a different example count");
    }
  }
  std::vector<AcquisitionScore> out(ids.size());
  for (std::size_t j = 0; j < ids.size(); ++j) {
    std::vector<std::vector<long>> seqs(T);
    for (std::size_t t = 0; t < T; ++t) {
      const Tensor& p = ensemble[t][j];
      if (p.rank() != 2 || !p.same_shape(ensemble[0][j])) {
        throw std::invalid_argument("pass distributions disagree in shape");
      }
      for (std::size_t row = 0; row < p.rows(); ++row) {
        long arg = 0;
        for (std::size_t k = 1; k < p.cols(); ++k) {
          if (p.at(row, k) > p.at(row, static_cast<std::size_t>(arg))) {
            arg = static_cast<long>(k);
          }
        }
        seqs[t].push_back(arg);
      }
    }
    // Keyed by sequence, so ties on the vote count resolve to the
    // lexicographically smallest sequence.
    std::map<std::vector<long>, std::size_t> votes;
    for (const auto& s : seqs) ++votes[s];
    const std::vector<long>* mode = &votes.begin()->first;
    std::size_t mode_count = 0;
    for (const auto& [seq, count] : votes) {
      if (count > mode_count) {
        mode = &seq;
        mode_count = count;
      }
    }
    double consensus = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const Tensor& p = ensemble[t][j];
      double prob = 1.0;
      for (std::size_t row = 0; row < p.rows(); ++row) {
        prob *= p.at(row, static_cast<std::size_t>((*mode)[row]));
      }
      consensus += prob;
    }
    out[j].id = ids[j];
    out[j].score =
        1.0 - static_cast<double>(mode_count) / static_cast<double>(T);
    out[j].tiebreak = consensus / static_cast<double>(T);
  }
  return out;
}

/// Descending score, then ascending tiebreak, then ascending id.
inline void sort_by_priority(std::vector<AcquisitionScore>& scores) {
  std::sort(scores.begin(), scores.end(),
            [](const AcquisitionScore& a, const AcquisitionScore& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.tiebreak != b.tiebreak) return a.tiebreak < b.tiebreak;
              return a.id < b.id;
            });
}

/// Greedy selection in priority order until the cumulative cost reaches the
/// budget; the example that crosses the boundary is included, since a
/// sentence cannot be partially labeled.
inline std::vector<long> select_batch(std::vector<AcquisitionScore> scores,
                                      const BudgetSpec& budget) {
  if (budget.amount < 1) {
    throw std::invalid_argument("budget amount must be >= 1");
  }
  for (const auto& s : scores) {
    if (!std::isfinite(s.score)) {
      throw std::invalid_argument("example " + std::to_string(s.id) +
                                  " has a non-finite score");
    }
    if (s.cost < 1) {
      throw std::invalid_argument("example " + std::to_string(s.id) +
                                  " has cost " + std::to_string(s.cost));
    }
  }
  sort_by_priority(scores);
  std::vector<long> acquired;
  long spent = 0;
  for (const auto& s : scores) {
    if (spent >= budget.amount) break;
    acquired.push_back(s.id);
    spent += s.cost;
  }
  return acquired;
}

}  // namespace alsim
