#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "alsim/data.hpp"
#include "alsim/metrics.hpp"
#include "alsim/params.hpp"
#include "alsim/rng.hpp"
#include "alsim/stochastic.hpp"
#include "alsim/tape.hpp"
#include "alsim/tensor.hpp"

namespace alsim {

enum class Task { kClassification, kTagging };
enum class Architecture {
  kAvgEmbedMlp,      // mean of token embeddings -> MLP -> softmax
  kConvClassifier,   // 1-D conv -> relu -> max over time -> softmax
  kWindowTagger,     // concatenated window embeddings -> MLP per token
  kRecurrentTagger,  // Elman recurrence -> per-token softmax
};
enum class Flavor { kDeterministic, kDropout, kBayesByBackprop };

struct ModelConfig {
  Task task = Task::kClassification;
  Architecture architecture = Architecture::kAvgEmbedMlp;
  std::vector<std::size_t> hidden_sizes{16};
  Flavor flavor = Flavor::kDeterministic;
  DropoutSpec dropout;  // dropout flavor only
  PriorSpec prior;      // bayes-by-backprop flavor only
  std::size_t conv_filters = 16;
  std::size_t conv_width = 3;
  std::size_t window = 1;  // window tagger half-width k
  std::size_t num_classes = 2;
};

struct Model {
  ModelConfig config;
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 0;
  ParameterStore params;
};

namespace detail {

inline bool is_tagging_arch(Architecture a) {
  return a == Architecture::kWindowTagger ||
         a == Architecture::kRecurrentTagger;
}

inline void glorot_fill(Tensor& w, std::size_t fan_in, std::size_t fan_out,
                        Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = rng.uniform(-limit, limit);
  }
}

/// Hidden-layer parameters are the stochastic ones; embeddings and the
/// output projection stay deterministic in every flavor.
inline bool is_hidden_param(const std::string& name) {
  return name.rfind("mlp/", 0) == 0 || name.rfind("conv/", 0) == 0 ||
         name.rfind("rnn/", 0) == 0;
}

/// Registers one layer tensor: a plain parameter, or a mu/rho pair when the
/// model flavor makes this layer variational.
inline void add_layer_param(Model& m, const std::string& name, Tensor init,
                            Rng& rng) {
  if (m.config.flavor == Flavor::kBayesByBackprop && is_hidden_param(name)) {
    add_variational(m.params, name, init.shape(), rng);
  } else {
    m.params.add(name, std::move(init));
  }
}

/// Ordered list of variational base names for this model, matching the
/// registration order in build_model.
inline std::vector<std::string> variational_names(const Model& m) {
  std::vector<std::string> out;
  if (m.config.flavor != Flavor::kBayesByBackprop) return out;
  switch (m.config.architecture) {
    case Architecture::kConvClassifier:
      out.push_back("conv/W");
      out.push_back("conv/b");
      for (std::size_t i = 0; i < m.config.hidden_sizes.size(); ++i) {
        out.push_back("mlp/" + std::to_string(i) + "/W");
        out.push_back("mlp/" + std::to_string(i) + "/b");
      }
      break;
    case Architecture::kAvgEmbedMlp:
    case Architecture::kWindowTagger:
      for (std::size_t i = 0; i < m.config.hidden_sizes.size(); ++i) {
        out.push_back("mlp/" + std::to_string(i) + "/W");
        out.push_back("mlp/" + std::to_string(i) + "/b");
      }
      break;
    case Architecture::kRecurrentTagger:
      out.push_back("rnn/Wx");
      out.push_back("rnn/Wh");
      out.push_back("rnn/b");
      break;
  }
  return out;
}

inline const Tensor& param_value(const Model& m, const std::string& base) {
  if (m.config.flavor == Flavor::kBayesByBackprop && is_hidden_param(base)) {
    return m.params.value(base + ".mu");
  }
  return m.params.value(base);
}

}  // namespace detail

/// Builds a model with freshly seeded parameters. The embedding matrix is
/// copied in as a trainable parameter.
inline Model build_model(const ModelConfig& config,
                         const EmbeddingMatrix& embeddings,
                         std::uint64_t seed) {
  if (config.num_classes < 2) {
    throw std::invalid_argument("need at least 2 output classes");
  }
  if (embeddings.dim == 0 || embeddings.matrix.rank() != 2) {
    throw std::invalid_argument("embedding matrix must be [vocab x dim]");
  }
  const bool tagging = detail::is_tagging_arch(config.architecture);
  if (tagging != (config.task == Task::kTagging)) {
    throw std::invalid_argument(
        "architecture does not produce the configured task's outputs");
  }
  for (std::size_t h : config.hidden_sizes) {
    if (h == 0) throw std::invalid_argument("hidden sizes must be positive");
  }
  if (config.architecture == Architecture::kRecurrentTagger &&
      config.hidden_sizes.size() != 1) {
    throw std::invalid_argument(
        "recurrent tagger takes exactly one hidden size");
  }
  if ((config.architecture == Architecture::kAvgEmbedMlp ||
       config.architecture == Architecture::kWindowTagger) &&
      config.hidden_sizes.empty()) {
    throw std::invalid_argument("this architecture needs a hidden layer");
  }
  if (config.architecture == Architecture::kConvClassifier &&
      (config.conv_filters == 0 || config.conv_width == 0)) {
    throw std::invalid_argument("conv filters and width must be positive");
  }

  Model m;
  m.config = config;
  m.vocab_size = embeddings.matrix.rows();
  m.embedding_dim = embeddings.dim;
  Rng rng(seed);

  m.params.add("embed", embeddings.matrix);

  const std::size_t d = m.embedding_dim;
  auto add_mlp_stack = [&](std::size_t in_dim) {
    for (std::size_t i = 0; i < config.hidden_sizes.size(); ++i) {
      const std::size_t h = config.hidden_sizes[i];
      Tensor W({in_dim, h});
      detail::glorot_fill(W, in_dim, h, rng);
      detail::add_layer_param(m, "mlp/" + std::to_string(i) + "/W",
                              std::move(W), rng);
      detail::add_layer_param(m, "mlp/" + std::to_string(i) + "/b",
                              Tensor({h}), rng);
      in_dim = h;
    }
    return in_dim;
  };
  auto add_output = [&](std::size_t in_dim) {
    Tensor W({in_dim, config.num_classes});
    detail::glorot_fill(W, in_dim, config.num_classes, rng);
    m.params.add("out/W", std::move(W));
    m.params.add("out/b", Tensor({config.num_classes}));
  };

  switch (config.architecture) {
    case Architecture::kAvgEmbedMlp: {
      add_output(add_mlp_stack(d));
      break;
    }
    case Architecture::kConvClassifier: {
      Tensor W({config.conv_filters, config.conv_width, d});
      detail::glorot_fill(W, config.conv_width * d, config.conv_filters, rng);
      detail::add_layer_param(m, "conv/W", std::move(W), rng);
      detail::add_layer_param(m, "conv/b", Tensor({config.conv_filters}), rng);
      add_output(add_mlp_stack(config.conv_filters));
      break;
    }
    case Architecture::kWindowTagger: {
      add_output(add_mlp_stack((2 * config.window + 1) * d));
      break;
    }
    case Architecture::kRecurrentTagger: {
      const std::size_t h = config.hidden_sizes[0];
      Tensor Wx({d, h});
      detail::glorot_fill(Wx, d, h, rng);
      detail::add_layer_param(m, "rnn/Wx", std::move(Wx), rng);
      Tensor Wh({h, h});
      detail::glorot_fill(Wh, h, h, rng);
      detail::add_layer_param(m, "rnn/Wh", std::move(Wh), rng);
      detail::add_layer_param(m, "rnn/b", Tensor({h}), rng);
      add_output(h);
      break;
    }
  }
  return m;
}

// --- pass plans ------------------------------------------------------------

/// All stochastic draws for one forward pass, sampled up front so a pass
/// can be replayed exactly (gradient checks, vote reproducibility).
struct PassPlan {
  bool stochastic = false;
  bool want_kl = false;  // training passes add the variational loss terms
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& key) const {
    auto it = tensors.find(key);
    if (it == tensors.end()) {
      throw std::invalid_argument("pass plan is missing tensor " + key);
    }
    return it->second;
  }
};

/// One epsilon per variational layer per pass, shared by every example.
inline void add_eps_draws(PassPlan& plan, const Model& m, Rng& rng) {
  for (const auto& name : detail::variational_names(m)) {
    plan.tensors.emplace("eps/" + name,
                         draw_eps(m.params.value(name + ".mu").shape(), rng));
  }
}

/// Dropout masks for one batch. Draws run example-major so that results do
/// not depend on how a prediction set was chunked into batches.
inline void add_mask_draws(PassPlan& plan, const Model& m,
                           const std::vector<std::size_t>& lengths, Rng& rng) {
  if (m.config.flavor != Flavor::kDropout) return;
  const DropoutSpec& spec = m.config.dropout;
  const bool per_seq = spec.scope == DropoutSpec::Scope::kPerSequence;
  const std::size_t B = lengths.size();

  switch (m.config.architecture) {
    case Architecture::kAvgEmbedMlp:
    case Architecture::kConvClassifier: {
      // One mask row per example per masked layer; a sentence has a single
      // hidden vector here, so both scopes coincide.
      std::vector<std::pair<std::string, std::size_t>> layers;
      if (m.config.architecture == Architecture::kConvClassifier) {
        layers.emplace_back("mask/pool", m.config.conv_filters);
      }
      for (std::size_t i = 0; i < m.config.hidden_sizes.size(); ++i) {
        layers.emplace_back("mask/mlp/" + std::to_string(i),
                            m.config.hidden_sizes[i]);
      }
      std::map<std::string, Tensor> masks;
      for (const auto& [key, h] : layers) {
        masks.emplace(key, Tensor({B, h}));
      }
      for (std::size_t s = 0; s < B; ++s) {
        for (const auto& [key, h] : layers) {
          Tensor row = sample_dropout_mask(spec, {h}, rng);
          Tensor& full = masks.at(key);
          for (std::size_t j = 0; j < h; ++j) full.at(s, j) = row[j];
        }
      }
      for (auto& [key, t] : masks) plan.tensors.emplace(key, std::move(t));
      break;
    }
    case Architecture::kWindowTagger: {
      for (std::size_t s = 0; s < B; ++s) {
        const std::size_t T = lengths[s];
        for (std::size_t i = 0; i < m.config.hidden_sizes.size(); ++i) {
          const std::size_t h = m.config.hidden_sizes[i];
          const std::string key =
              "mask/mlp/" + std::to_string(i) + "/" + std::to_string(s);
          if (per_seq) {
            Tensor row = sample_dropout_mask(spec, {h}, rng);
            Tensor full({T, h});
            for (std::size_t t = 0; t < T; ++t) {
              for (std::size_t j = 0; j < h; ++j) full.at(t, j) = row[j];
            }
            plan.tensors.emplace(key, std::move(full));
          } else {
            plan.tensors.emplace(key, sample_dropout_mask(spec, {T, h}, rng));
          }
        }
      }
      break;
    }
    case Architecture::kRecurrentTagger: {
      const std::size_t h = m.config.hidden_sizes[0];
      for (std::size_t s = 0; s < B; ++s) {
        if (per_seq) {
          plan.tensors.emplace("mask/rnn/" + std::to_string(s),
                               sample_dropout_mask(spec, {1, h}, rng));
        } else {
          for (std::size_t t = 0; t < lengths[s]; ++t) {
            plan.tensors.emplace(
                "mask/rnn/" + std::to_string(s) + "/" + std::to_string(t),
                sample_dropout_mask(spec, {1, h}, rng));
          }
        }
      }
      break;
    }
  }
}

// --- forward passes ----------------------------------------------------

struct ForwardOut {
  Tape::Var logits = -1;      // [rows x classes], rows align with targets
  Tape::Var kl_terms = -1;    // variational loss terms, -1 when absent
  std::vector<long> targets;  // flattened gold labels or tags
};

namespace detail {

/// Leases weights onto the tape once each, sampling variational layers and
/// accumulating their loss terms when the plan asks for them.
class WeightCtx {
 public:
  WeightCtx(Tape& tape, Model& m, const PassPlan& plan)
      : tape_(tape), m_(m), plan_(plan) {}

  Tape::Var get(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    Tape::Var v;
    if (m_.config.flavor == Flavor::kBayesByBackprop &&
        is_hidden_param(name)) {
      if (plan_.stochastic) {
        auto s = bbb_sample_weights(tape_, m_.params, name,
                                    plan_.at("eps/" + name));
        if (plan_.want_kl) {
          Tape::Var term = bbb_loss_terms(tape_, s, m_.config.prior);
          kl_ = kl_ < 0 ? term : tape_.add(kl_, term);
        }
        v = s.w;
      } else {
        v = tape_.param(m_.params, name + ".mu");
      }
    } else {
      v = tape_.param(m_.params, name);
    }
    cache_.emplace(name, v);
    return v;
  }

  Tape::Var kl_total() const { return kl_; }

 private:
  Tape& tape_;
  Model& m_;
  const PassPlan& plan_;
  std::map<std::string, Tape::Var> cache_;
  Tape::Var kl_ = -1;
};

inline Tape::Var masked(Tape& tape, const Model& m, const PassPlan& plan,
                        Tape::Var x, const std::string& key) {
  if (m.config.flavor != Flavor::kDropout || !plan.stochastic) return x;
  return tape.mul(x, tape.constant(plan.at(key)));
}

}  // namespace detail

inline ForwardOut forward_batch(Model& m, Tape& tape,
                                const std::vector<ClassificationExample>& data,
                                const std::vector<std::size_t>& batch,
                                const PassPlan& plan) {
  if (m.config.task != Task::kClassification) {
    throw std::invalid_argument("model does not classify sentences");
  }
  if (batch.empty()) throw std::invalid_argument("empty batch");
  detail::WeightCtx ctx(tape, m, plan);
  Tape::Var embed = ctx.get("embed");
  const std::size_t B = batch.size();

  ForwardOut out;
  std::vector<Tape::Var> rows;
  rows.reserve(B);
  std::size_t feat = 0;
  if (m.config.architecture == Architecture::kAvgEmbedMlp) {
    feat = m.embedding_dim;
    for (std::size_t idx : batch) {
      const auto& ex = data[idx];
      if (ex.token_ids.empty()) {
        throw std::invalid_argument("example has no tokens");
      }
      rows.push_back(
          tape.mean_over_rows(tape.gather_rows(embed, ex.token_ids)));
      out.targets.push_back(ex.label);
    }
  } else {
    feat = m.config.conv_filters;
    Tape::Var conv_w = ctx.get("conv/W");
    Tape::Var conv_b = ctx.get("conv/b");
    for (std::size_t idx : batch) {
      const auto& ex = data[idx];
      if (ex.token_ids.empty()) {
        throw std::invalid_argument("example has no tokens");
      }
      std::vector<long> ids = ex.token_ids;
      while (ids.size() < m.config.conv_width) ids.push_back(Vocabulary::kPad);
      Tape::Var x = tape.gather_rows(embed, ids);
      Tape::Var c = tape.bias_add(tape.conv1d(x, conv_w), conv_b);
      rows.push_back(tape.max_over_time(tape.relu(c)));
      out.targets.push_back(ex.label);
    }
  }
  Tape::Var X = tape.reshape(tape.concat(rows), {B, feat});
  if (m.config.architecture == Architecture::kConvClassifier) {
    X = detail::masked(tape, m, plan, X, "mask/pool");
  }
  for (std::size_t i = 0; i < m.config.hidden_sizes.size(); ++i) {
    const std::string base = "mlp/" + std::to_string(i);
    X = tape.tanh(tape.bias_add(tape.matmul(X, ctx.get(base + "/W")),
                                ctx.get(base + "/b")));
    X = detail::masked(tape, m, plan, X, "mask/" + base);
  }
  out.logits = tape.bias_add(tape.matmul(X, ctx.get("out/W")),
                             ctx.get("out/b"));
  out.kl_terms = ctx.kl_total();
  return out;
}

inline ForwardOut forward_batch(Model& m, Tape& tape,
                                const std::vector<TaggedExample>& data,
                                const std::vector<std::size_t>& batch,
                                const PassPlan& plan) {
  if (m.config.task != Task::kTagging) {
    throw std::invalid_argument("model does not tag sequences");
  }
  if (batch.empty()) throw std::invalid_argument("empty batch");
  for (std::size_t idx : batch) {
    if (data[idx].token_ids.empty()) {
      throw std::invalid_argument("example has no tokens");
    }
  }
  detail::WeightCtx ctx(tape, m, plan);
  Tape::Var embed = ctx.get("embed");

  ForwardOut out;
  std::vector<Tape::Var> sent_states;
  sent_states.reserve(batch.size());

  if (m.config.architecture == Architecture::kWindowTagger) {
    const long k = static_cast<long>(m.config.window);
    const std::size_t in_dim = (2 * m.config.window + 1) * m.embedding_dim;
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const auto& ex = data[batch[s]];
      const long T = static_cast<long>(ex.token_ids.size());
      std::vector<long> win_ids;
      win_ids.reserve(static_cast<std::size_t>(T) * (2 * k + 1));
      for (long t = 0; t < T; ++t) {
        for (long o = -k; o <= k; ++o) {
          const long j = t + o;
          win_ids.push_back((j < 0 || j >= T) ? Vocabulary::kPad
                                              : ex.token_ids[j]);
        }
      }
      Tape::Var X = tape.reshape(tape.gather_rows(embed, win_ids),
                                 {static_cast<std::size_t>(T), in_dim});
      for (std::size_t i = 0; i < m.config.hidden_sizes.size(); ++i) {
        const std::string base = "mlp/" + std::to_string(i);
        X = tape.tanh(tape.bias_add(tape.matmul(X, ctx.get(base + "/W")),
                                    ctx.get(base + "/b")));
        X = detail::masked(tape, m, plan, X,
                           "mask/" + base + "/" + std::to_string(s));
      }
      sent_states.push_back(X);
      for (long tag : ex.tags) out.targets.push_back(tag);
    }
  } else {
    Tape::Var wx = ctx.get("rnn/Wx");
    Tape::Var wh = ctx.get("rnn/Wh");
    Tape::Var b = ctx.get("rnn/b");
    const std::size_t h = m.config.hidden_sizes[0];
    const bool drop = m.config.flavor == Flavor::kDropout && plan.stochastic;
    const bool per_seq =
        m.config.dropout.scope == DropoutSpec::Scope::kPerSequence;
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const auto& ex = data[batch[s]];
      Tape::Var seq_mask = -1;
      if (drop && per_seq) {
        seq_mask = tape.constant(plan.at("mask/rnn/" + std::to_string(s)));
      }
      Tape::Var state = tape.constant(Tensor({1, h}));
      std::vector<Tape::Var> steps;
      steps.reserve(ex.token_ids.size());
      for (std::size_t t = 0; t < ex.token_ids.size(); ++t) {
        Tape::Var x = tape.gather_rows(embed, {ex.token_ids[t]});
        Tape::Var pre = tape.bias_add(
            tape.add(tape.matmul(x, wx), tape.matmul(state, wh)), b);
        Tape::Var ht = tape.tanh(pre);
        if (drop) {
          Tape::Var mask =
              per_seq ? seq_mask
                      : tape.constant(plan.at("mask/rnn/" + std::to_string(s) +
                                              "/" + std::to_string(t)));
          ht = tape.mul(ht, mask);
        }
        steps.push_back(ht);
        state = ht;
      }
      sent_states.push_back(tape.concat(steps));
      for (long tag : ex.tags) out.targets.push_back(tag);
    }
  }
  Tape::Var H = sent_states.size() == 1 ? sent_states[0]
                                        : tape.concat(sent_states);
  out.logits = tape.bias_add(tape.matmul(H, ctx.get("out/W")),
                             ctx.get("out/b"));
  out.kl_terms = ctx.kl_total();
  return out;
}

// --- prediction --------------------------------------------------------

struct PredictMode {
  bool stochastic = false;
  std::uint64_t seed = 0;

  static PredictMode deterministic() { return {}; }
  static PredictMode stochastic_pass(std::uint64_t seed) {
    return {true, seed};
  }
};

namespace detail {

inline constexpr std::size_t kPredictChunk = 64;

}  // namespace detail

/// Class distributions, one [C] tensor per requested example.
inline std::vector<Tensor> predict_proba(
    Model& m, const std::vector<ClassificationExample>& data,
    const std::vector<std::size_t>& indices, const PredictMode& mode) {
  std::vector<Tensor> out;
  out.reserve(indices.size());
  if (indices.empty()) return out;
  Rng rng(mode.seed);
  PassPlan eps_plan;
  eps_plan.stochastic = mode.stochastic;
  if (mode.stochastic) add_eps_draws(eps_plan, m, rng);

  for (std::size_t off = 0; off < indices.size();
       off += detail::kPredictChunk) {
    const std::size_t n =
        std::min(detail::kPredictChunk, indices.size() - off);
    std::vector<std::size_t> chunk(indices.begin() + off,
                                   indices.begin() + off + n);
    PassPlan plan = eps_plan;
    if (mode.stochastic) {
      std::vector<std::size_t> lengths(n, 1);
      add_mask_draws(plan, m, lengths, rng);
    }
    Tape tape;
    auto fw = forward_batch(m, tape, data, chunk, plan);
    const Tensor& probs = tape.value(tape.row_softmax(fw.logits));
    for (std::size_t i = 0; i < n; ++i) {
      Tensor p({m.config.num_classes});
      for (std::size_t c = 0; c < m.config.num_classes; ++c) {
        p[c] = probs.at(i, c);
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

/// Per-token class distributions, one [T x C] tensor per requested example.
inline std::vector<Tensor> predict_proba(Model& m,
                                         const std::vector<TaggedExample>& data,
                                         const std::vector<std::size_t>& indices,
                                         const PredictMode& mode) {
  std::vector<Tensor> out;
  out.reserve(indices.size());
  if (indices.empty()) return out;
  Rng rng(mode.seed);
  PassPlan eps_plan;
  eps_plan.stochastic = mode.stochastic;
  if (mode.stochastic) add_eps_draws(eps_plan, m, rng);

  for (std::size_t off = 0; off < indices.size();
       off += detail::kPredictChunk) {
    const std::size_t n =
        std::min(detail::kPredictChunk, indices.size() - off);
    std::vector<std::size_t> chunk(indices.begin() + off,
                                   indices.begin() + off + n);
    PassPlan plan = eps_plan;
    if (mode.stochastic) {
      std::vector<std::size_t> lengths;
      for (std::size_t i : chunk) lengths.push_back(data[i].token_ids.size());
      add_mask_draws(plan, m, lengths, rng);
    }
    Tape tape;
    auto fw = forward_batch(m, tape, data, chunk, plan);
    const Tensor& probs = tape.value(tape.row_softmax(fw.logits));
    std::size_t row = 0;
    for (std::size_t i : chunk) {
      const std::size_t T = data[i].token_ids.size();
      Tensor p({T, m.config.num_classes});
      for (std::size_t t = 0; t < T; ++t, ++row) {
        for (std::size_t c = 0; c < m.config.num_classes; ++c) {
          p.at(t, c) = probs.at(row, c);
        }
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

inline long argmax_row(const Tensor& t, std::size_t row) {
  long best = 0;
  for (std::size_t c = 1; c < t.cols(); ++c) {
    if (t.at(row, c) > t.at(row, static_cast<std::size_t>(best))) {
      best = static_cast<long>(c);
    }
  }
  return best;
}

inline long argmax_vec(const Tensor& t) {
  long best = 0;
  for (std::size_t c = 1; c < t.size(); ++c) {
    if (t[c] > t[static_cast<std::size_t>(best)]) best = static_cast<long>(c);
  }
  return best;
}

inline std::vector<long> predict_classes(
    Model& m, const std::vector<ClassificationExample>& data,
    const std::vector<std::size_t>& indices, const PredictMode& mode) {
  auto probs = predict_proba(m, data, indices, mode);
  std::vector<long> out;
  out.reserve(probs.size());
  for (const Tensor& p : probs) out.push_back(argmax_vec(p));
  return out;
}

inline std::vector<std::vector<long>> predict_tag_seqs(
    Model& m, const std::vector<TaggedExample>& data,
    const std::vector<std::size_t>& indices, const PredictMode& mode) {
  auto probs = predict_proba(m, data, indices, mode);
  std::vector<std::vector<long>> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    for (std::size_t t = 0; t < probs[i].rows(); ++t) {
      out[i].push_back(argmax_row(probs[i], t));
    }
  }
  return out;
}

/// T stochastic prediction sets; pass t derives its seed as mix(base, t).
template <typename Ex>
auto stochastic_ensemble(Model& m, const std::vector<Ex>& data,
                         const std::vector<std::size_t>& indices,
                         std::size_t T, std::uint64_t base_seed) {
  if (m.config.flavor == Flavor::kDeterministic) {
    throw std::invalid_argument(
        "deterministic models have no stochastic passes to ensemble");
  }
  if (T < 2) throw std::invalid_argument("ensemble needs T >= 2 passes");
  using PredT = decltype(predict_proba(m, data, indices, PredictMode{}));
  std::vector<PredT> out;
  out.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    out.push_back(predict_proba(
        m, data, indices,
        PredictMode::stochastic_pass(Rng::mix(base_seed, t))));
  }
  return out;
}

// --- training ------------------------------------------------------------

struct TrainConfig {
  std::size_t max_epochs = 25;
  std::size_t patience = 1;
  double lr = 1e-3;
  std::size_t batch_cap = 50;
  std::size_t min_updates = 10;
  std::uint64_t seed = 0;
};

struct TrainLog {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
  std::vector<double> epoch_metrics;
  bool used_train_loss_fallback = false;
};

inline std::size_t effective_batch_size(std::size_t n,
                                        const TrainConfig& tc) {
  if (n == 0) throw std::invalid_argument("empty labeled pool");
  if (tc.batch_cap == 0 || tc.min_updates == 0) {
    throw std::invalid_argument("batch cap and min updates must be positive");
  }
  const std::size_t by_updates = (n + tc.min_updates - 1) / tc.min_updates;
  return std::max<std::size_t>(1, std::min(tc.batch_cap, by_updates));
}

namespace detail {

template <typename Ex, typename ValMetricFn>
TrainLog train_impl(Model& m, const std::vector<Ex>& data,
                    const std::vector<std::size_t>& train_idx,
                    const std::vector<std::size_t>& val_idx,
                    const TrainConfig& tc, ValMetricFn&& val_metric) {
  if (train_idx.empty()) throw std::invalid_argument("empty labeled pool");
  const std::size_t n = train_idx.size();
  const std::size_t batch = effective_batch_size(n, tc);
  const std::size_t num_batches = (n + batch - 1) / batch;

  TrainLog log;
  log.used_train_loss_fallback = val_idx.empty();
  Rng rng(tc.seed);
  std::vector<std::size_t> order(train_idx);

  double best = -std::numeric_limits<double>::infinity();
  std::map<std::string, Tensor> best_snapshot = m.params.snapshot();
  std::size_t bad_epochs = 0;

  for (std::size_t epoch = 0; epoch < tc.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t off = 0; off < n; off += batch) {
      const std::size_t sz = std::min(batch, n - off);
      std::vector<std::size_t> chunk(order.begin() + off,
                                     order.begin() + off + sz);
      PassPlan plan;
      plan.stochastic = m.config.flavor != Flavor::kDeterministic;
      plan.want_kl = m.config.flavor == Flavor::kBayesByBackprop;
      if (plan.stochastic) {
        add_eps_draws(plan, m, rng);
        std::vector<std::size_t> lengths;
        for (std::size_t i : chunk) {
          if constexpr (std::is_same_v<Ex, TaggedExample>) {
            lengths.push_back(data[i].token_ids.size());
          } else {
            lengths.push_back(1);
          }
        }
        add_mask_draws(plan, m, lengths, rng);
      }
      Tape tape;
      auto fw = forward_batch(m, tape, data, chunk, plan);
      Tape::Var loss = tape.cross_entropy(fw.logits, fw.targets);
      if (fw.kl_terms >= 0) {
        // The variational objective balances the complexity term against the
        // summed (not averaged) batch likelihood; cross_entropy returns the
        // per-target mean, so the batch loss is scaled up by its target
        // count before the KL share is added.
        const double targets =
            static_cast<double>(tape.value(fw.logits).rows());
        loss = tape.mul(loss, tape.constant(Tensor::scalar(targets)));
        loss = tape.add(loss, kl_weighting(tape, fw.kl_terms, num_batches));
      }
      m.params.zero_grads();
      tape.backward(loss);
      m.params.adam_step(tc.lr);
      epoch_loss += tape.value(loss).item();
    }

    double metric;
    if (val_idx.empty()) {
      metric = -epoch_loss / static_cast<double>(num_batches);
    } else {
      metric = val_metric(m);
    }
    log.epoch_metrics.push_back(metric);
    log.epochs_run = epoch + 1;

    if (metric > best) {
      best = metric;
      log.best_epoch = epoch;
      best_snapshot = m.params.snapshot();
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs >= tc.patience) break;
    }
  }
  m.params.restore(best_snapshot);
  log.best_metric = best;
  return log;
}

}  // namespace detail

/// Trains a classifier with early stopping on validation accuracy.
inline TrainLog train_model(Model& m,
                            const std::vector<ClassificationExample>& data,
                            const std::vector<std::size_t>& train_idx,
                            const std::vector<std::size_t>& val_idx,
                            const TrainConfig& tc) {
  return detail::train_impl(
      m, data, train_idx, val_idx, tc, [&](Model& model) {
        auto pred =
            predict_classes(model, data, val_idx, PredictMode::deterministic());
        std::vector<long> gold;
        for (std::size_t i : val_idx) gold.push_back(data[i].label);
        return accuracy(pred, gold);
      });
}

/// Trains a tagger with early stopping on validation span F1.
inline TrainLog train_model(Model& m, const std::vector<TaggedExample>& data,
                            const std::vector<std::size_t>& train_idx,
                            const std::vector<std::size_t>& val_idx,
                            const TrainConfig& tc,
                            const std::vector<std::string>& tag_names) {
  return detail::train_impl(
      m, data, train_idx, val_idx, tc, [&](Model& model) {
        auto pred =
            predict_tag_seqs(model, data, val_idx, PredictMode::deterministic());
        std::vector<std::vector<long>> gold;
        for (std::size_t i : val_idx) gold.push_back(data[i].tags);
        return span_f1(pred, gold, tag_names).f1;
      });
}

// --- checkpoints -----------------------------------------------------------

namespace detail {

inline std::string arch_name(Architecture a) {
  switch (a) {
    case Architecture::kAvgEmbedMlp: return "avg-embed-mlp";
    case Architecture::kConvClassifier: return "conv-classifier";
    case Architecture::kWindowTagger: return "window-tagger";
    case Architecture::kRecurrentTagger: return "recurrent-tagger";
  }
  throw std::invalid_argument("unknown architecture");
}

inline Architecture arch_from(const std::string& s) {
  if (s == "avg-embed-mlp") return Architecture::kAvgEmbedMlp;
  if (s == "conv-classifier") return Architecture::kConvClassifier;
  if (s == "window-tagger") return Architecture::kWindowTagger;
  if (s == "recurrent-tagger") return Architecture::kRecurrentTagger;
  throw std::invalid_argument("unknown architecture " + s);
}

inline std::string flavor_name(Flavor f) {
  switch (f) {
    case Flavor::kDeterministic: return "deterministic";
    case Flavor::kDropout: return "dropout";
    case Flavor::kBayesByBackprop: return "bayes-by-backprop";
  }
  throw std::invalid_argument("unknown flavor");
}

inline Flavor flavor_from(const std::string& s) {
  if (s == "deterministic") return Flavor::kDeterministic;
  if (s == "dropout") return Flavor::kDropout;
  if (s == "bayes-by-backprop") return Flavor::kBayesByBackprop;
  throw std::invalid_argument("unknown flavor " + s);
}

}  // namespace detail

inline void save_checkpoint(const Model& m, const std::string& path) {
  nlohmann::json j;
  const ModelConfig& c = m.config;
  j["task"] = c.task == Task::kClassification ? "classification" : "tagging";
  j["architecture"] = detail::arch_name(c.architecture);
  j["flavor"] = detail::flavor_name(c.flavor);
  j["hidden_sizes"] = c.hidden_sizes;
  j["dropout_rate"] = c.dropout.rate;
  j["dropout_scope"] =
      c.dropout.scope == DropoutSpec::Scope::kPerSequence ? "per-sequence"
                                                          : "per-activation";
  j["prior_kind"] =
      c.prior.kind == PriorSpec::Kind::kGaussian ? "gaussian" : "mixture";
  j["prior_sigma1"] = c.prior.sigma1;
  j["prior_sigma2"] = c.prior.sigma2;
  j["prior_pi"] = c.prior.pi;
  j["conv_filters"] = c.conv_filters;
  j["conv_width"] = c.conv_width;
  j["window"] = c.window;
  j["num_classes"] = c.num_classes;
  j["vocab_size"] = m.vocab_size;
  j["embedding_dim"] = m.embedding_dim;

  nlohmann::json params = nlohmann::json::object();
  m.params.for_each([&](const std::string& name, const Tensor& v) {
    nlohmann::json p;
    p["shape"] = v.shape();
    p["data"] = std::vector<double>(v.data(), v.data() + v.size());
    params[name] = std::move(p);
  });
  j["params"] = std::move(params);

  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open " + path + " for write");
  out << j.dump(1) << "\n";
}

inline Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  nlohmann::json j;
  in >> j;

  Model m;
  ModelConfig& c = m.config;
  c.task = j.at("task") == "classification" ? Task::kClassification
                                            : Task::kTagging;
  c.architecture = detail::arch_from(j.at("architecture"));
  c.flavor = detail::flavor_from(j.at("flavor"));
  c.hidden_sizes = j.at("hidden_sizes").get<std::vector<std::size_t>>();
  const double rate = j.at("dropout_rate").get<double>();
  const auto scope = j.at("dropout_scope") == "per-sequence"
                         ? DropoutSpec::Scope::kPerSequence
                         : DropoutSpec::Scope::kPerActivation;
  c.dropout = DropoutSpec(rate, scope);
  if (j.at("prior_kind") == "gaussian") {
    c.prior = PriorSpec::gaussian(j.at("prior_sigma1").get<double>());
  } else {
    c.prior = PriorSpec::scale_mixture(j.at("prior_pi").get<double>(),
                                       j.at("prior_sigma1").get<double>(),
                                       j.at("prior_sigma2").get<double>());
  }
  c.conv_filters = j.at("conv_filters").get<std::size_t>();
  c.conv_width = j.at("conv_width").get<std::size_t>();
  c.window = j.at("window").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  m.vocab_size = j.at("vocab_size").get<std::size_t>();
  m.embedding_dim = j.at("embedding_dim").get<std::size_t>();

  for (const auto& [name, p] : j.at("params").items()) {
    Shape shape = p.at("shape").get<Shape>();
    std::vector<double> vals = p.at("data").get<std::vector<double>>();
    m.params.add(name, Tensor(std::move(shape), std::move(vals)));
  }
  return m;
}

}  // namespace alsim
