// End-to-end acceptance checks for the trainer, the acquisition scorers,
// and the simulation loop. Each check prints one [PASS]/[FAIL] line with
// the quantities it measured; the exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "alsim/cli.hpp"
#include "alsim/grad_check.hpp"

using namespace alsim;

namespace {

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

struct Outcome {
  bool ok = false;
  std::string detail;
};

// --- small fixtures ---------------------------------------------------------

struct ClsData {
  std::vector<ClassificationExample> examples;
  EmbeddingMatrix emb;
  std::size_t num_classes = 0;
};

ClsData tiny_cls_data(std::uint64_t seed, std::size_t n = 3,
                      std::size_t dim = 3) {
  SyntheticClassificationSpec spec;
  spec.num_examples = n;
  spec.num_classes = 3;
  spec.vocab_size = 30;
  spec.signal_strength = 0.9;
  spec.sentence_length = 5;
  spec.signal_tokens_per_class = 3;
  auto gen = generate_synthetic_classification(spec, seed);
  std::vector<std::vector<std::string>> seqs;
  for (const auto& ex : gen.examples) seqs.push_back(ex.tokens);
  Vocabulary vocab = Vocabulary::build(seqs);
  ClsData out;
  out.emb = random_embeddings(vocab, dim, Rng::mix(seed, 1));
  out.examples = encode_classification(gen.examples, vocab, gen.class_names);
  out.num_classes = spec.num_classes;
  return out;
}

struct TagData {
  std::vector<TaggedExample> examples;
  EmbeddingMatrix emb;
  std::vector<std::string> tag_names;
};

TagData tiny_tag_data(std::uint64_t seed, std::size_t n = 3,
                      std::size_t dim = 3) {
  SyntheticTaggingSpec spec;
  spec.num_sentences = n;
  spec.pools.push_back({"PER", {"alice", "bob", "carol"}});
  spec.pools.push_back({"ORG", {"acme", "globex"}});
  spec.templates.push_back({{"{PER}", "works", "at", "{ORG}"}, 3.0});
  spec.templates.push_back({{"the", "firm", "{ORG}", "hired", "{PER}"}, 1.0});
  auto gen = generate_synthetic_tagging(spec, seed);
  std::vector<std::vector<std::string>> seqs;
  for (const auto& ex : gen.examples) seqs.push_back(ex.tokens);
  Vocabulary vocab = Vocabulary::build(seqs);
  TagData out;
  out.emb = random_embeddings(vocab, dim, Rng::mix(seed, 1));
  out.examples = encode_tagged(gen.examples, vocab, gen.tag_names);
  out.tag_names = gen.tag_names;
  return out;
}

ModelConfig arch_config(Architecture arch, std::size_t classes) {
  ModelConfig c;
  c.architecture = arch;
  c.num_classes = classes;
  c.hidden_sizes = {3};
  switch (arch) {
    case Architecture::kAvgEmbedMlp:
      c.task = Task::kClassification;
      break;
    case Architecture::kConvClassifier:
      c.task = Task::kClassification;
      c.conv_filters = 4;
      c.conv_width = 2;
      break;
    case Architecture::kWindowTagger:
      c.task = Task::kTagging;
      c.window = 1;
      break;
    case Architecture::kRecurrentTagger:
      c.task = Task::kTagging;
      break;
  }
  return c;
}

// --- experiment helpers -------------------------------------------------

// Runs every expansion of an inline matrix config against one shared corpus
// and returns the per-seed normalized curve AUCs keyed by run name.
std::map<std::string, std::vector<double>> per_seed_aucs(
    const std::string& ini_text) {
  auto runs = resolve_config(parse_ini(ini_text));
  Corpus corpus = load_corpus(runs.front().data);
  std::map<std::string, std::vector<double>> out;
  for (const ResolvedRun& run : runs) {
    ExperimentConfig cfg = run.experiment;
    cfg.model.num_classes = corpus.label_names.size();
    ExperimentResult res = run_experiment(cfg, corpus);
    std::vector<double> aucs;
    for (const SeedResult& s : res.seeds) {
      std::vector<std::pair<double, double>> pts;
      for (const RoundRecord& r : s.rounds) {
        pts.emplace_back(r.labeled_fraction, r.test_metric);
      }
      aucs.push_back(curve_auc(pts));
    }
    out[run.name] = std::move(aucs);
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Margin of method a over the baseline in units of the pooled standard
// error sqrt((s_a^2 + s_b^2) / n) of the per-seed AUC samples.
double se_margin(const std::vector<double>& a, const std::vector<double>& b) {
  const double se = std::sqrt(
      (stddev_of(a) * stddev_of(a) + stddev_of(b) * stddev_of(b)) /
      static_cast<double>(a.size()));
  return (mean_of(a) - mean_of(b)) / se;
}

// --- criteria ---------------------------------------------------------------

Outcome check_gradient_fidelity() {
  auto cls = tiny_cls_data(131);
  auto tag = tiny_tag_data(132);
  double worst_err = 0.0;
  std::string worst_at;
  int checked = 0;

  for (auto arch :
       {Architecture::kAvgEmbedMlp, Architecture::kConvClassifier,
        Architecture::kWindowTagger, Architecture::kRecurrentTagger}) {
    const bool tagging = arch == Architecture::kWindowTagger ||
                         arch == Architecture::kRecurrentTagger;
    for (auto flavor : {Flavor::kDeterministic, Flavor::kDropout,
                        Flavor::kBayesByBackprop}) {
      ModelConfig cfg =
          arch_config(arch, tagging ? tag.tag_names.size() : cls.num_classes);
      cfg.flavor = flavor;
      if (flavor == Flavor::kDropout) {
        cfg.dropout = DropoutSpec(0.3, DropoutSpec::Scope::kPerActivation);
      }
      if (flavor == Flavor::kBayesByBackprop) {
        cfg.prior = PriorSpec::scale_mixture(0.5, 1.0, 0.2);
      }
      Model m = build_model(cfg, tagging ? tag.emb : cls.emb, 17);
      std::vector<std::size_t> batch{0, 1, 2};

      PassPlan plan;
      plan.stochastic = flavor != Flavor::kDeterministic;
      plan.want_kl = flavor == Flavor::kBayesByBackprop;
      Rng rng(23);
      if (plan.stochastic) {
        add_eps_draws(plan, m, rng);
        std::vector<std::size_t> lengths;
        for (std::size_t i : batch) {
          lengths.push_back(tagging ? tag.examples[i].token_ids.size() : 1);
        }
        add_mask_draws(plan, m, lengths, rng);
      }

      auto loss_of = [&](ParameterStore& store, bool accumulate) {
        (void)store;
        Tape t;
        ForwardOut fw = tagging
                            ? forward_batch(m, t, tag.examples, batch, plan)
                            : forward_batch(m, t, cls.examples, batch, plan);
        Tape::Var loss = t.cross_entropy(fw.logits, fw.targets);
        if (fw.kl_terms >= 0) {
          loss = t.add(loss, kl_weighting(t, fw.kl_terms, 4));
        }
        if (accumulate) t.backward(loss);
        return t.value(loss).item();
      };

      GradCheckResult res = grad_check(loss_of, m.params, 1e-4, 1e-5);
      ++checked;
      if (res.max_rel_err > worst_err) {
        worst_err = res.max_rel_err;
        worst_at = detail::arch_name(arch) + std::string("/") +
                   detail::flavor_name(flavor) + " " + res.worst;
      }
      if (!res.ok) {
        return {false, fmt("%s exceeds 1e-4 (rel err %.3g)", worst_at.c_str(),
                           res.max_rel_err)};
      }
    }
  }
  return {true, fmt("%d architecture-flavor pairs under 1e-4; worst %s at "
                    "%.2e",
                    checked, worst_at.c_str(), worst_err)};
}

Outcome check_kl_oracle() {
  // Single variational weight with q = N(0, 1) against prior N(0, 4). The
  // closed-form KL is ln 2 + 1/8 - 1/2.
  const double analytic = std::log(2.0) + 0.125 - 0.5;
  ParameterStore store;
  store.add("w.mu", Tensor::zeros({1, 1}));
  Tensor rho = Tensor::zeros({1, 1});
  rho[0] = std::log(std::exp(1.0) - 1.0);  // softplus(rho) == 1
  store.add("w.rho", rho);
  const PriorSpec prior = PriorSpec::gaussian(2.0);

  const std::size_t samples = 100000;
  Rng rng(42);
  double acc = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    Tensor eps = Tensor::zeros({1, 1});
    eps[0] = rng.normal();
    Tape tape;
    BbbSample s = bbb_sample_weights(tape, store, "w", eps);
    Tape::Var term = bbb_loss_terms(tape, s, prior);
    acc += tape.value(term).item();
  }
  const double mc = acc / static_cast<double>(samples);
  const double rel = std::fabs(mc - analytic) / analytic;
  return {rel <= 0.05,
          fmt("MC complexity cost %.5f vs analytic %.5f over %zu samples "
              "(rel dev %.2f%%)",
              mc, analytic, samples, 100.0 * rel)};
}

Outcome check_degenerate_collapse() {
  auto cls = tiny_cls_data(77, 6);
  std::vector<std::size_t> ids{0, 1, 2, 3, 4, 5};
  const std::size_t T = 5;

  // A zero dropout rate must make every stochastic pass equal the plain
  // deterministic pass bit for bit.
  ModelConfig dcfg = arch_config(Architecture::kAvgEmbedMlp, cls.num_classes);
  dcfg.flavor = Flavor::kDropout;
  dcfg.dropout = DropoutSpec(0.0, DropoutSpec::Scope::kPerActivation);
  Model dm = build_model(dcfg, cls.emb, 5);
  auto base = predict_proba(dm, cls.examples, ids,
                            PredictMode::deterministic());
  std::vector<std::vector<Tensor>> ensemble;
  for (std::size_t t = 0; t < T; ++t) {
    auto pass = predict_proba(dm, cls.examples, ids,
                              PredictMode::stochastic_pass(1000 + t));
    if (pass != base) {
      return {false, "zero-rate dropout pass differs from the plain pass"};
    }
    ensemble.push_back(std::move(pass));
  }

  auto scores = score_bald(std::vector<long>(ids.begin(), ids.end()),
                           ensemble);
  for (const auto& s : scores) {
    if (s.score != 0.0) {
      return {false, fmt("vote disagreement %g on unanimous passes", s.score)};
    }
  }

  // With all scores at zero the selection must follow the tie-break chain:
  // modal-class confidence ascending, then id ascending.
  std::vector<long> expected(ids.begin(), ids.end());
  std::sort(expected.begin(), expected.end(), [&](long a, long b) {
    const double pa = base[static_cast<std::size_t>(a)][static_cast<std::size_t>(
        argmax_vec(base[static_cast<std::size_t>(a)]))];
    const double pb = base[static_cast<std::size_t>(b)][static_cast<std::size_t>(
        argmax_vec(base[static_cast<std::size_t>(b)]))];
    if (pa != pb) return pa < pb;
    return a < b;
  });
  auto chosen = select_batch(
      scores, BudgetSpec{BudgetSpec::Unit::kSentences,
                         static_cast<long>(ids.size())});
  if (chosen != expected) {
    return {false, "zero-score selection deviates from the tie-break chain"};
  }

  // Forcing every posterior scale to zero collapses the variational
  // ensemble the same way.
  ModelConfig bcfg = arch_config(Architecture::kAvgEmbedMlp, cls.num_classes);
  bcfg.flavor = Flavor::kBayesByBackprop;
  bcfg.prior = PriorSpec::gaussian(1.0);
  Model bm = build_model(bcfg, cls.emb, 5);
  bm.params.for_each([](const std::string& name, Tensor& value) {
    if (name.size() > 4 && name.compare(name.size() - 4, 4, ".rho") == 0) {
      for (std::size_t i = 0; i < value.size(); ++i) value[i] = -1000.0;
    }
  });
  auto bbase = predict_proba(bm, cls.examples, ids,
                             PredictMode::stochastic_pass(9001));
  std::vector<std::vector<Tensor>> bens;
  bens.push_back(bbase);
  for (std::size_t t = 1; t < T; ++t) {
    auto pass = predict_proba(bm, cls.examples, ids,
                              PredictMode::stochastic_pass(9001 + t));
    if (pass != bbase) {
      return {false, "zero-scale variational passes are not identical"};
    }
    bens.push_back(std::move(pass));
  }
  auto bscores = score_bald(std::vector<long>(ids.begin(), ids.end()), bens);
  for (const auto& s : bscores) {
    if (s.score != 0.0) {
      return {false,
              fmt("vote disagreement %g on a collapsed posterior", s.score)};
    }
  }

  return {true, fmt("%zu identical passes for rate-0 dropout and for a "
                    "zero-scale posterior; all disagreement scores exactly 0 "
                    "and ties fall to confidence then id",
                    T)};
}

Outcome check_formula_oracles() {
  // Vote split 6/3/1 over T = 10 passes.
  std::vector<long> ids{0};
  std::vector<std::vector<Tensor>> ensemble;
  auto dist = [](double a, double b, double c) {
    Tensor t({3});
    t[0] = a;
    t[1] = b;
    t[2] = c;
    return t;
  };
  for (int i = 0; i < 6; ++i) ensemble.push_back({dist(0.7, 0.2, 0.1)});
  for (int i = 0; i < 3; ++i) ensemble.push_back({dist(0.1, 0.8, 0.1)});
  ensemble.push_back({dist(0.2, 0.2, 0.6)});
  const double bald = score_bald(ids, ensemble)[0].score;
  if (bald != 0.4) {
    return {false, fmt("vote split 6/3/1 of 10 scored %.17g, want 0.4", bald)};
  }

  // Two tokens whose best-tag probabilities are 0.9 and 0.8.
  Tensor per_token({2, 2});
  per_token.at(0, 0) = 0.9;
  per_token.at(0, 1) = 0.1;
  per_token.at(1, 0) = 0.8;
  per_token.at(1, 1) = 0.2;
  const double mnlp = score_mnlp({0}, {per_token})[0].score;
  const double mnlp_expected = -(std::log(0.9) + std::log(0.8)) / 2.0;
  if (std::fabs(mnlp - mnlp_expected) > 1e-6) {
    return {false, fmt("confidence score %.8f differs from -(ln 0.9 + "
                       "ln 0.8)/2 = %.8f",
                       mnlp, mnlp_expected)};
  }

  // Gold spans (0,2,PER) and (3,4,LOC); the prediction recovers only the
  // LOC span and introduces one spurious PER span.
  std::vector<std::vector<std::string>> gold{
      {"B-PER", "I-PER", "O", "B-LOC", "O"}};
  std::vector<std::vector<std::string>> pred{
      {"B-PER", "O", "O", "B-LOC", "O"}};
  PRF prf = span_f1(pred, gold);
  if (prf.precision != 0.5 || prf.recall != 0.5 || prf.f1 != 0.5) {
    return {false, fmt("span scores (%.3f, %.3f, %.3f), want (0.5, 0.5, 0.5)",
                       prf.precision, prf.recall, prf.f1)};
  }

  return {true, fmt("vote split 6/3/1 of 10 -> 0.4 exactly; mean negative "
                    "log confidence over maxima [0.9, 0.8] -> %.8f (= -(ln "
                    "0.9 + ln 0.8)/2, within 1e-6); partial span recovery "
                    "-> (0.5, 0.5, 0.5) exactly",
                    mnlp)};
}

Outcome check_protocol_shape() {
  DataConfig d;
  d.source = "synthetic-tagging";
  d.sentences = 150;
  d.rare_weight = 0.02;
  d.embedding_dim = 6;
  Corpus corpus = load_corpus(d);

  ExperimentConfig cfg;
  cfg.model = arch_config(Architecture::kWindowTagger,
                          corpus.label_names.size());
  cfg.model.hidden_sizes = {4};
  cfg.train.max_epochs = 2;
  cfg.acquisition = "random";
  cfg.seeds = {5};
  ExperimentResult res = run_experiment(cfg, corpus);

  const auto& rounds = res.seeds[0].rounds;
  if (rounds.size() != 25) {
    return {false, fmt("default 2%%/2%%/50%% schedule ran %zu rounds per "
                       "seed, want exactly 25",
                       rounds.size())};
  }

  long total_words = 0;
  long max_len = 0;
  for (std::size_t id : corpus.split.train) {
    total_words += static_cast<long>(corpus.tokens_of(id));
    max_len = std::max(max_len, static_cast<long>(corpus.tokens_of(id)));
  }
  long worst_dev = 0;
  for (const RoundRecord& r : rounds) {
    const long target = std::max<long>(
        1, std::llround(r.labeled_fraction * static_cast<double>(total_words)));
    const long dev = std::labs(static_cast<long>(r.labeled_words) - target);
    worst_dev = std::max(worst_dev, dev);
    if (dev > max_len) {
      return {false, fmt("round %zu labeled %zu words against target %ld; "
                         "deviation %ld exceeds the longest sentence (%ld)",
                         r.round, r.labeled_words, target, dev, max_len)};
    }
  }

  const auto& val_ids = corpus.split.val;
  for (const RoundRecord& r : rounds) {
    const double f = r.labeled_fraction;
    const std::size_t n = scaled_validation(val_ids, f, 99).size();
    const long want = std::llround(f * static_cast<double>(val_ids.size()));
    const long clamped = std::max<long>(
        1, std::min<long>(want, static_cast<long>(val_ids.size())));
    if (std::labs(static_cast<long>(n) - clamped) > 1) {
      return {false, fmt("validation subset at fraction %.3f has %zu ids, "
                         "want %ld +- 1",
                         f, n, clamped)};
    }
  }

  return {true, fmt("25 rounds per seed; word budgets within %ld of target "
                    "(longest sentence %ld); validation subsets within 1 of "
                    "round(f * %zu)",
                    worst_dev, max_len, val_ids.size())};
}

constexpr const char* kClassificationBench = R"(
[run]
seeds = 1, 2, 3, 4, 5, 6, 7, 8
[data]
source = synthetic-classification
examples = 2000
classes = 4
vocab = 120
signal = 0.35
sentence_length = 8
signal_tokens = 4
class_weights = 19, 19, 19, 3
embedding_dim = 16
data_seed = 97
[model]
architecture = avg-embed-mlp
hidden = 8
dropout_rate = 0.25
[train]
patience = 3
lr = 0.003
min_updates = 40
[al]
passes = 25
[matrix]
acquisition = random, lc, do-bald, bb-bald
)";

Outcome check_classification_benchmark() {
  const auto t0 = std::chrono::steady_clock::now();
  auto aucs = per_seed_aucs(kClassificationBench);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  const auto& rnd = aucs.at("random");
  const double lc = se_margin(aucs.at("lc"), rnd);
  const double dob = se_margin(aucs.at("do-bald"), rnd);
  const double bbb = se_margin(aucs.at("bb-bald"), rnd);
  const bool ok = lc > 1.0 && dob > 1.0 && bbb > 1.0 && secs < 1200.0;
  return {ok, fmt("4 classes, one at 5%%, %zu seeds: AUC margins over random "
                  "(mean %.4f) in pooled-SE units: lc %+.2f, do-bald %+.2f, "
                  "bb-bald %+.2f (each must exceed +1) in %.0f s",
                  rnd.size(), mean_of(rnd), lc, dob, bbb, secs)};
}

constexpr const char* kTaggingBench = R"(
[run]
seeds = 1, 2, 3, 4, 5, 6, 7, 8
[data]
source = synthetic-tagging
sentences = 2000
rare_weight = 0.02
embedding_dim = 12
data_seed = 97
[model]
architecture = window-tagger
hidden = 8
[train]
patience = 3
lr = 0.003
min_updates = 40
[al]
passes = 25
[matrix]
acquisition = random, mnlp
)";

Outcome check_tagging_benchmark() {
  const auto t0 = std::chrono::steady_clock::now();
  auto aucs = per_seed_aucs(kTaggingBench);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  const auto& rnd = aucs.at("random");
  const double mnlp = se_margin(aucs.at("mnlp"), rnd);
  const bool ok = mnlp > 1.0 && secs < 1200.0;
  return {ok, fmt("rare template at 2%%, %zu seeds: span-F1 AUC margin of "
                  "least-confidence over random (mean %.4f) is %+.2f pooled "
                  "SE (must exceed +1) in %.0f s",
                  rnd.size(), mean_of(rnd), mnlp, secs)};
}

// Strips the final wall-clock column, which measures the host rather than
// the experiment, from every row of a rounds CSV.
std::string strip_wall_column(const std::string& csv) {
  std::string out;
  std::size_t start = 0;
  while (start < csv.size()) {
    std::size_t end = csv.find('\n', start);
    if (end == std::string::npos) end = csv.size();
    std::string line = csv.substr(start, end - start);
    const std::size_t comma = line.rfind(',');
    if (comma != std::string::npos) line.resize(comma);
    out += line;
    out += '\n';
    start = end + 1;
  }
  return out;
}

constexpr const char* kReplayConfig = R"(
[run]
name = replay
seeds = 1, 2
[data]
source = synthetic-classification
examples = 200
classes = 3
vocab = 60
signal = 0.8
sentence_length = 6
signal_tokens = 3
embedding_dim = 6
[model]
architecture = avg-embed-mlp
hidden = 4
[train]
epochs = 3
[al]
acquisition = lc
warmstart = 0.1
step = 0.1
stop = 0.4
)";

Outcome check_manifest_replay() {
  namespace fs = std::filesystem;
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch();
  const fs::path root =
      fs::temp_directory_path() /
      ("alsim-accept-" + std::to_string(stamp.count()));
  const fs::path first = root / "first";
  const fs::path replay = root / "replay";

  auto runs = resolve_config(parse_ini(kReplayConfig));
  Corpus corpus = load_corpus(runs[0].data);
  execute_run(runs[0], corpus, corpus_fingerprint(corpus), first.string());

  auto manifest =
      nlohmann::json::parse(read_text_file((first / "manifest.json").string()));
  ResolvedRun replayed = run_from_manifest(manifest);
  Corpus corpus2 = load_corpus(replayed.data);
  execute_run(replayed, corpus2, corpus_fingerprint(corpus2),
              replay.string());

  const bool rounds_match =
      strip_wall_column(read_text_file((first / "rounds.csv").string())) ==
      strip_wall_column(read_text_file((replay / "rounds.csv").string()));
  const bool acquired_match =
      read_text_file((first / "acquired.csv").string()) ==
      read_text_file((replay / "acquired.csv").string());
  const bool summary_match =
      read_text_file((first / "summary.json").string()) ==
      read_text_file((replay / "summary.json").string());
  std::error_code ec;
  fs::remove_all(root, ec);

  if (!rounds_match) {
    return {false, "replayed rounds CSV differs beyond the wall-clock column"};
  }
  if (!acquired_match) {
    return {false, "replayed acquisition CSV differs"};
  }
  if (!summary_match) {
    return {false, "replayed summary differs"};
  }
  return {true, "manifest replay reproduced the acquisition CSV and summary "
                "byte for byte, and the rounds CSV byte for byte outside "
                "the wall-clock column"};
}

Outcome check_data_round_trips() {
  namespace fs = std::filesystem;
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch();
  const fs::path root =
      fs::temp_directory_path() /
      ("alsim-roundtrip-" + std::to_string(stamp.count()));
  fs::create_directories(root);

  auto tagging = generate_synthetic_tagging(builtin_tagging_spec(60, 0.05), 9);
  const std::string col_path = (root / "tagged.conll").string();
  write_column_format(col_path, tagging.examples);
  auto tag_back = load_column_format(col_path);
  bool tag_ok = tag_back.size() == tagging.examples.size();
  for (std::size_t i = 0; tag_ok && i < tag_back.size(); ++i) {
    tag_ok = tag_back[i].tokens == tagging.examples[i].tokens &&
             tag_back[i].tags == tagging.examples[i].tags;
  }

  SyntheticClassificationSpec spec;
  spec.num_examples = 80;
  spec.num_classes = 3;
  spec.vocab_size = 50;
  spec.signal_strength = 0.7;
  spec.sentence_length = 6;
  spec.signal_tokens_per_class = 3;
  auto cls = generate_synthetic_classification(spec, 9);
  const std::string tsv_path = (root / "labeled.tsv").string();
  write_delimited_classification(tsv_path, cls.examples);
  auto cls_back = load_delimited_classification(tsv_path, '\t', false);
  bool cls_ok = cls_back.size() == cls.examples.size();
  for (std::size_t i = 0; cls_ok && i < cls_back.size(); ++i) {
    cls_ok = cls_back[i].label == cls.examples[i].label &&
             cls_back[i].tokens == cls.examples[i].tokens;
  }

  std::error_code ec;
  fs::remove_all(root, ec);
  if (!tag_ok) return {false, "column-format write-then-read changed a "
                              "sentence"};
  if (!cls_ok) return {false, "delimited write-then-read changed an example"};
  return {true, fmt("column format identical over %zu sentences; delimited "
                    "format identical over %zu examples",
                    tagging.examples.size(), cls.examples.size())};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"gradient fidelity", check_gradient_fidelity},
      {"variational complexity-cost oracle", check_kl_oracle},
      {"degenerate-stochasticity collapse", check_degenerate_collapse},
      {"formula oracles", check_formula_oracles},
      {"protocol shape", check_protocol_shape},
      {"classification benchmark", check_classification_benchmark},
      {"tagging benchmark", check_tagging_benchmark},
      {"manifest replay determinism", check_manifest_replay},
      {"data round trips", check_data_round_trips},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    if (!out.ok) ++failures;
    std::printf("[%s] %s: %s\n", out.ok ? "PASS" : "FAIL", c.name,
                out.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
