#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "alsim/acquisition.hpp"
#include "alsim/data.hpp"
#include "alsim/metrics.hpp"
#include "alsim/models.hpp"
#include "alsim/rng.hpp"

namespace alsim {

/// A loaded dataset ready for simulation: exactly one of the example
/// vectors is populated, matching `task`.
struct Corpus {
  Task task = Task::kClassification;
  std::vector<ClassificationExample> cls;
  std::vector<TaggedExample> tag;
  SplitIndices split;
  std::vector<std::string> label_names;  // class names or tag names
  EmbeddingMatrix embeddings;

  std::size_t num_examples() const {
    return task == Task::kClassification ? cls.size() : tag.size();
  }
  std::size_t tokens_of(std::size_t i) const {
    return task == Task::kClassification ? cls[i].token_ids.size()
                                         : tag[i].token_ids.size();
  }
};

enum class AcquisitionKind { kRandom, kLc, kEntropy, kMnlp, kDoBald, kBbBald };

inline AcquisitionKind acquisition_from(const std::string& name) {
  if (name == "random") return AcquisitionKind::kRandom;
  if (name == "lc") return AcquisitionKind::kLc;
  if (name == "entropy") return AcquisitionKind::kEntropy;
  if (name == "mnlp") return AcquisitionKind::kMnlp;
  if (name == "do-bald") return AcquisitionKind::kDoBald;
  if (name == "bb-bald") return AcquisitionKind::kBbBald;
  throw std::invalid_argument("unknown acquisition function " + name);
}

inline std::string acquisition_name(AcquisitionKind k) {
  switch (k) {
    case AcquisitionKind::kRandom: return "random";
    case AcquisitionKind::kLc: return "lc";
    case AcquisitionKind::kEntropy: return "entropy";
    case AcquisitionKind::kMnlp: return "mnlp";
    case AcquisitionKind::kDoBald: return "do-bald";
    case AcquisitionKind::kBbBald: return "bb-bald";
  }
  throw std::invalid_argument("unknown acquisition kind");
}

struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;  // the per-round seed is derived, not taken from here
  std::string acquisition = "random";
  double warmstart_fraction = 0.02;
  double step_fraction = 0.02;
  double stop_fraction = 0.50;
  std::size_t ensemble_passes = 25;  // T, for the disagreement scorers
  std::vector<std::uint64_t> seeds{1, 2, 3};

  enum class BbbMode { kSelf, kSibling };
  BbbMode bbb_mode = BbbMode::kSibling;
};

struct RoundRecord {
  std::size_t round = 0;
  std::size_t labeled_sentences = 0;
  std::size_t labeled_words = 0;
  double labeled_fraction = 0.0;  // in the task's budget unit
  double val_metric = 0.0;
  double test_metric = 0.0;
  std::size_t epochs = 0;
  double wall_ms = 0.0;
  std::vector<long> acquired_ids;  // chosen after this round's evaluation
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<long> warmstart_ids;
  std::vector<RoundRecord> rounds;
};

struct ExperimentResult {
  std::string metric_name;
  std::vector<double> schedule;  // nominal labeled fractions per round
  std::vector<SeedResult> seeds;
  CurveSummary curve;  // test metric vs nominal fraction, seed-aggregated
};

/// Labeled ids in acquisition order plus the remaining pool in ascending
/// order. Ids are positions into the corpus example vector.
struct LabeledPool {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
};

inline LabeledPool make_pool(const std::vector<std::size_t>& train_ids) {
  LabeledPool pool;
  pool.unlabeled = train_ids;
  std::sort(pool.unlabeled.begin(), pool.unlabeled.end());
  return pool;
}

inline void acquire_into(LabeledPool& pool, const std::vector<long>& ids) {
  for (long id : ids) {
    const std::size_t uid = static_cast<std::size_t>(id);
    auto it = std::find(pool.unlabeled.begin(), pool.unlabeled.end(), uid);
    if (it == pool.unlabeled.end()) {
      throw std::invalid_argument("id " + std::to_string(id) +
                                  " is not in the unlabeled pool");
    }
    pool.unlabeled.erase(it);
    pool.labeled.push_back(uid);
  }
}

/// Nominal labeled-fraction targets, one per round. The step count must hit
/// the stop fraction exactly (up to rounding noise).
inline std::vector<double> budget_schedule(double warmstart, double step,
                                           double stop) {
  if (!(warmstart > 0.0) || !(warmstart <= stop) || !(stop <= 1.0)) {
    throw std::invalid_argument("need 0 < warmstart <= stop <= 1");
  }
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  const double k = (stop - warmstart) / step;
  const long rounds = std::lround(k);
  if (std::fabs(k - static_cast<double>(rounds)) > 1e-9) {
    throw std::invalid_argument(
        "the step fraction must walk from warmstart to stop exactly");
  }
  std::vector<double> schedule;
  for (long r = 0; r <= rounds; ++r) {
    schedule.push_back(warmstart + static_cast<double>(r) * step);
  }
  schedule.back() = stop;
  return schedule;
}

/// Uniformly random validation subset of size round(f * |V|), at least 1.
/// Fixed per (seed, round) so early stopping within a round is stable.
inline std::vector<std::size_t> scaled_validation(
    const std::vector<std::size_t>& val_ids, double fraction,
    std::uint64_t seed) {
  if (!(fraction > 0.0) || !(fraction <= 1.0)) {
    throw std::invalid_argument("validation scale must be in (0, 1]");
  }
  if (val_ids.empty()) return {};
  const double target = fraction * static_cast<double>(val_ids.size());
  std::size_t n = static_cast<std::size_t>(std::llround(target));
  n = std::max<std::size_t>(1, std::min(n, val_ids.size()));
  std::vector<std::size_t> shuffled = val_ids;
  Rng rng(seed);
  rng.shuffle(shuffled);
  shuffled.resize(n);
  return shuffled;
}

namespace detail {

inline void validate_experiment(const ExperimentConfig& cfg,
                                const Corpus& corpus) {
  if (corpus.task != cfg.model.task) {
    throw std::invalid_argument("corpus task does not match the model task");
  }
  if (cfg.seeds.empty()) throw std::invalid_argument("need at least one seed");
  if (corpus.split.train.empty()) {
    throw std::invalid_argument("corpus has no training examples");
  }
  const AcquisitionKind kind = acquisition_from(cfg.acquisition);
  const bool tagging = corpus.task == Task::kTagging;
  switch (kind) {
    case AcquisitionKind::kLc:
    case AcquisitionKind::kEntropy:
      if (tagging) {
        throw std::invalid_argument(cfg.acquisition +
                                    " scores single-label predictions only");
      }
      break;
    case AcquisitionKind::kMnlp:
      if (!tagging) {
        throw std::invalid_argument("mnlp scores tag sequences only");
      }
      break;
    case AcquisitionKind::kDoBald:
      if (cfg.model.flavor != Flavor::kDropout) {
        throw std::invalid_argument(
            "do-bald needs the dropout flavor on the trained model");
      }
      break;
    case AcquisitionKind::kBbBald:
      if (cfg.bbb_mode == ExperimentConfig::BbbMode::kSelf &&
          cfg.model.flavor != Flavor::kBayesByBackprop) {
        throw std::invalid_argument(
            "bb-bald in self mode needs a bayes-by-backprop model");
      }
      break;
    case AcquisitionKind::kRandom:
      break;
  }
  if ((kind == AcquisitionKind::kDoBald || kind == AcquisitionKind::kBbBald) &&
      cfg.ensemble_passes < 2) {
    throw std::invalid_argument("disagreement scoring needs T >= 2 passes");
  }
  budget_schedule(cfg.warmstart_fraction, cfg.step_fraction,
                  cfg.stop_fraction);
}

inline double evaluate_test(Model& m, const Corpus& corpus) {
  if (corpus.task == Task::kClassification) {
    auto pred = predict_classes(m, corpus.cls, corpus.split.test,
                                PredictMode::deterministic());
    std::vector<long> gold;
    for (std::size_t i : corpus.split.test) gold.push_back(corpus.cls[i].label);
    return accuracy(pred, gold);
  }
  auto pred = predict_tag_seqs(m, corpus.tag, corpus.split.test,
                               PredictMode::deterministic());
  std::vector<std::vector<long>> gold;
  for (std::size_t i : corpus.split.test) gold.push_back(corpus.tag[i].tags);
  return span_f1(pred, gold, corpus.label_names).f1;
}

/// Scores the unlabeled pool with the configured function. `scorer` is the
/// model whose predictions drive acquisition (the trained model, or the
/// sibling in bb-bald sibling mode).
inline std::vector<AcquisitionScore> score_pool(
    Model& scorer, const Corpus& corpus, const LabeledPool& pool,
    AcquisitionKind kind, std::size_t T, std::uint64_t round_seed,
    std::uint64_t ensemble_seed) {
  std::vector<long> ids;
  ids.reserve(pool.unlabeled.size());
  for (std::size_t i : pool.unlabeled) ids.push_back(static_cast<long>(i));

  switch (kind) {
    case AcquisitionKind::kRandom:
      return score_random(ids, round_seed);
    case AcquisitionKind::kLc:
      return score_lc(ids, predict_proba(scorer, corpus.cls, pool.unlabeled,
                                         PredictMode::deterministic()));
    case AcquisitionKind::kEntropy:
      return score_entropy(ids,
                           predict_proba(scorer, corpus.cls, pool.unlabeled,
                                         PredictMode::deterministic()));
    case AcquisitionKind::kMnlp:
      return score_mnlp(ids, predict_proba(scorer, corpus.tag, pool.unlabeled,
                                           PredictMode::deterministic()));
    case AcquisitionKind::kDoBald:
    case AcquisitionKind::kBbBald: {
      if (corpus.task == Task::kClassification) {
        auto ens = stochastic_ensemble(scorer, corpus.cls, pool.unlabeled, T,
                                       ensemble_seed);
        return score_bald(ids, ens);
      }
      auto ens = stochastic_ensemble(scorer, corpus.tag, pool.unlabeled, T,
                                     ensemble_seed);
      return score_bald_tagging(ids, ens);
    }
  }
  throw std::invalid_argument("unknown acquisition kind");
}

}  // namespace detail

/// The full simulation for one seed: random warmstart, then alternate
/// train-from-scratch, evaluate, score, acquire until the stop fraction.
inline SeedResult run_seed(const ExperimentConfig& cfg, const Corpus& corpus,
                           std::uint64_t seed) {
  const AcquisitionKind kind = acquisition_from(cfg.acquisition);
  const bool tagging = corpus.task == Task::kTagging;
  const BudgetSpec::Unit unit =
      tagging ? BudgetSpec::Unit::kWords : BudgetSpec::Unit::kSentences;
  auto cost_of = [&](std::size_t id) -> long {
    return unit == BudgetSpec::Unit::kWords
               ? static_cast<long>(corpus.tokens_of(id))
               : 1;
  };

  long total_units = 0;
  for (std::size_t id : corpus.split.train) total_units += cost_of(id);

  const std::vector<double> schedule = budget_schedule(
      cfg.warmstart_fraction, cfg.step_fraction, cfg.stop_fraction);
  auto target_units = [&](double fraction) -> long {
    return std::max<long>(
        1, std::llround(fraction * static_cast<double>(total_units)));
  };

  SeedResult result;
  result.seed = seed;
  LabeledPool pool = make_pool(corpus.split.train);

  // Warmstart: a uniformly random batch filling the first budget target.
  {
    std::vector<long> ids;
    for (std::size_t i : pool.unlabeled) ids.push_back(static_cast<long>(i));
    auto scores = score_random(ids, Rng::mix(seed, seed_tag::warmstart));
    for (auto& s : scores) {
      s.cost = cost_of(static_cast<std::size_t>(s.id));
    }
    result.warmstart_ids =
        select_batch(scores, BudgetSpec{unit, target_units(schedule[0])});
    acquire_into(pool, result.warmstart_ids);
  }

  long labeled_units = 0;
  for (std::size_t id : pool.labeled) labeled_units += cost_of(id);

  for (std::size_t round = 0; round < schedule.size(); ++round) {
    const auto t0 = std::chrono::steady_clock::now();
    RoundRecord rec;
    rec.round = round;
    rec.labeled_sentences = pool.labeled.size();
    rec.labeled_words = 0;
    for (std::size_t id : pool.labeled) {
      rec.labeled_words += corpus.tokens_of(id);
    }
    rec.labeled_fraction =
        static_cast<double>(labeled_units) / static_cast<double>(total_units);

    Model model = build_model(cfg.model, corpus.embeddings,
                              Rng::mix(seed, seed_tag::build, round));
    auto val_subset = scaled_validation(
        corpus.split.val, std::min(rec.labeled_fraction, 1.0),
        Rng::mix(seed, seed_tag::validation, round));
    TrainConfig tc = cfg.train;
    tc.seed = Rng::mix(seed, seed_tag::train, round);
    TrainLog log;
    if (tagging) {
      log = train_model(model, corpus.tag, pool.labeled, val_subset, tc,
                        corpus.label_names);
    } else {
      log = train_model(model, corpus.cls, pool.labeled, val_subset, tc);
    }
    rec.val_metric = log.best_metric;
    rec.epochs = log.epochs_run;
    rec.test_metric = detail::evaluate_test(model, corpus);

    const bool last_round = round + 1 == schedule.size();
    if (!last_round && !pool.unlabeled.empty()) {
      Model* scorer = &model;
      Model sibling;
      if (kind == AcquisitionKind::kBbBald &&
          cfg.bbb_mode == ExperimentConfig::BbbMode::kSibling) {
        // The sibling is trained on the same pool purely for acquisition;
        // every reported metric comes from the standard model above.
        ModelConfig sibling_cfg = cfg.model;
        sibling_cfg.flavor = Flavor::kBayesByBackprop;
        sibling = build_model(sibling_cfg, corpus.embeddings,
                              Rng::mix(seed, seed_tag::sibling_build, round));
        TrainConfig stc = cfg.train;
        stc.seed = Rng::mix(seed, seed_tag::sibling_train, round);
        if (tagging) {
          train_model(sibling, corpus.tag, pool.labeled, val_subset, stc,
                      corpus.label_names);
        } else {
          train_model(sibling, corpus.cls, pool.labeled, val_subset, stc);
        }
        scorer = &sibling;
      }
      auto scores = detail::score_pool(
          *scorer, corpus, pool, kind, cfg.ensemble_passes,
          Rng::mix(seed, seed_tag::acquire, round),
          Rng::mix(seed, seed_tag::ensemble, round));
      for (auto& s : scores) {
        s.cost = cost_of(static_cast<std::size_t>(s.id));
      }
      const long amount =
          std::max<long>(1, target_units(schedule[round + 1]) - labeled_units);
      rec.acquired_ids = select_batch(scores, BudgetSpec{unit, amount});
      acquire_into(pool, rec.acquired_ids);
      for (long id : rec.acquired_ids) {
        labeled_units += cost_of(static_cast<std::size_t>(id));
      }
    }

    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    result.rounds.push_back(std::move(rec));
  }
  return result;
}

/// Rejects configurations the simulation cannot honor; called by
/// run_experiment, and available to callers that want the rejection before
/// committing any output.
inline void check_experiment(const ExperimentConfig& cfg,
                             const Corpus& corpus) {
  detail::validate_experiment(cfg, corpus);
}

/// Seed-aggregates completed per-seed results into the final summary.
inline ExperimentResult assemble_result(const ExperimentConfig& cfg,
                                        const Corpus& corpus,
                                        std::vector<SeedResult> seeds) {
  ExperimentResult result;
  result.metric_name =
      corpus.task == Task::kClassification ? "accuracy" : "span_f1";
  result.schedule = budget_schedule(cfg.warmstart_fraction, cfg.step_fraction,
                                    cfg.stop_fraction);
  result.seeds = std::move(seeds);
  std::vector<std::vector<std::pair<double, double>>> curves;
  for (const auto& sr : result.seeds) {
    std::vector<std::pair<double, double>> curve;
    for (std::size_t r = 0; r < sr.rounds.size(); ++r) {
      curve.emplace_back(result.schedule[r], sr.rounds[r].test_metric);
    }
    curves.push_back(std::move(curve));
  }
  result.curve = aggregate_seeds(curves);
  return result;
}

/// Runs every configured seed and aggregates the test-metric curves over
/// the nominal budget schedule.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const Corpus& corpus) {
  detail::validate_experiment(cfg, corpus);
  std::vector<SeedResult> seeds;
  for (std::uint64_t seed : cfg.seeds) {
    seeds.push_back(run_seed(cfg, corpus, seed));
  }
  return assemble_result(cfg, corpus, std::move(seeds));
}

}  // namespace alsim
