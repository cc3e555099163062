#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "alsim/rng.hpp"
#include "alsim/tensor.hpp"

namespace alsim {

// --- plain text records ------------------------------------------------

struct RawClassification {
  std::string label;
  std::vector<std::string> tokens;
};

struct RawTagged {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

struct ClassificationExample {
  long id = 0;
  std::vector<long> token_ids;
  long label = 0;
};

struct TaggedExample {
  long id = 0;
  std::vector<long> token_ids;
  std::vector<long> tags;
};

inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline std::string lowercased(std::string s) {
  for (char& c : s) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return s;
}

// --- vocabulary ----------------------------------------------------------

/// Token table with <pad> at 0 and <unk> at 1. Indices are assigned by
/// descending frequency, ties broken lexicographically, so construction is
/// independent of corpus order.
class Vocabulary {
 public:
  static constexpr long kPad = 0;
  static constexpr long kUnk = 1;

  Vocabulary() : tokens_{"<pad>", "<unk>"} {}

  /// Builds from token sequences, dropping tokens seen fewer than
  /// `min_freq` times.
  template <typename Sequences>
  static Vocabulary build(const Sequences& sequences, std::size_t min_freq = 1) {
    if (min_freq == 0) {
      throw std::invalid_argument("vocabulary min_freq must be >= 1");
    }
    std::map<std::string, std::size_t> counts;
    for (const auto& seq : sequences) {
      for (const auto& tok : seq) ++counts[tok];
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [tok, c] : counts) {
      if (c >= min_freq) kept.emplace_back(tok, c);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocabulary v;
    for (auto& [tok, c] : kept) {
      v.index_.emplace(tok, static_cast<long>(v.tokens_.size()));
      v.tokens_.push_back(tok);
    }
    return v;
  }

  long index_of(const std::string& tok) const {
    auto it = index_.find(tok);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& tok) const { return index_.count(tok) > 0; }

  const std::string& token_at(std::size_t i) const {
    if (i >= tokens_.size()) {
      throw std::invalid_argument("vocabulary index " + std::to_string(i) +
                                  " out of range, size " +
                                  std::to_string(tokens_.size()));
    }
    return tokens_[i];
  }

  std::size_t size() const { return tokens_.size(); }

 private:
  std::unordered_map<std::string, long> index_;
  std::vector<std::string> tokens_;
};

// --- file loaders and writers -------------------------------------------

/// Column format: one token per line, whitespace-separated columns, first
/// column the token and last column the tag; a blank line ends a sentence.
inline std::vector<RawTagged> load_column_format(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::vector<RawTagged> out;
  RawTagged cur;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto cols = tokenize(line);
    if (cols.empty()) {
      if (!cur.tokens.empty()) out.push_back(std::move(cur));
      cur = RawTagged{};
      continue;
    }
    if (cols.size() < 2) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected at least 2 columns");
    }
    cur.tokens.push_back(cols.front());
    cur.tags.push_back(cols.back());
  }
  if (!cur.tokens.empty()) out.push_back(std::move(cur));
  return out;
}

inline void write_column_format(const std::string& path,
                                const std::vector<RawTagged>& examples) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open " + path + " for write");
  for (const auto& ex : examples) {
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
      out << ex.tokens[i] << " " << ex.tags[i] << "\n";
    }
    out << "\n";
  }
}

/// Delimited classification: each line is `label <delim> text`.
inline std::vector<RawClassification> load_delimited_classification(
    const std::string& path, char delimiter = '\t', bool lowercase = false) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::vector<RawClassification> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto pos = line.find(delimiter);
    if (pos == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": missing delimiter");
    }
    RawClassification ex;
    ex.label = line.substr(0, pos);
    std::string text = line.substr(pos + 1);
    if (lowercase) text = lowercased(text);
    ex.tokens = tokenize(text);
    if (ex.label.empty() || ex.tokens.empty()) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": empty label or text");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

inline void write_delimited_classification(
    const std::string& path, const std::vector<RawClassification>& examples,
    char delimiter = '\t') {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open " + path + " for write");
  for (const auto& ex : examples) {
    out << ex.label << delimiter;
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
      if (i) out << ' ';
      out << ex.tokens[i];
    }
    out << "\n";
  }
}

// --- pretrained embeddings ------------------------------------------------

struct EmbeddingMatrix {
  Tensor matrix;  // |vocab| x d
  std::size_t dim = 0;
  double coverage = 0.0;  // fraction of non-special vocab found in the file
};

/// Embedding file format: `token v1 v2 ... vd` per line. Vocabulary rows
/// missing from the file are filled from uniform(-0.25, 0.25) with the
/// given seed, so the matrix is a pure function of (file, vocab, seed).
inline EmbeddingMatrix load_embeddings(const std::string& path,
                                       const Vocabulary& vocab,
                                       std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::unordered_map<std::string, std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    std::vector<double> vec;
    double x;
    while (ss >> x) vec.push_back(x);
    if (vec.empty()) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": no values");
    }
    if (dim == 0) {
      dim = vec.size();
    } else if (vec.size() != dim) {
      throw std::invalid_argument(
          path + ":" + std::to_string(lineno) + ": dimension " +
          std::to_string(vec.size()) + " differs from " + std::to_string(dim));
    }
    rows[tok] = std::move(vec);
  }
  if (dim == 0) throw std::invalid_argument(path + ": no embedding rows");

  EmbeddingMatrix em;
  em.dim = dim;
  em.matrix = Tensor({vocab.size(), dim});
  Rng rng(seed);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    auto it = rows.find(vocab.token_at(i));
    if (it != rows.end()) {
      if (i >= 2) ++hit;  // specials never count toward coverage
      for (std::size_t j = 0; j < dim; ++j) em.matrix.at(i, j) = it->second[j];
    } else {
      for (std::size_t j = 0; j < dim; ++j) {
        em.matrix.at(i, j) = rng.uniform(-0.25, 0.25);
      }
    }
  }
  const std::size_t non_special = vocab.size() > 2 ? vocab.size() - 2 : 0;
  em.coverage = non_special == 0
                    ? 0.0
                    : static_cast<double>(hit) / static_cast<double>(non_special);
  return em;
}

/// Seeded random embeddings for corpora without a pretrained file.
inline EmbeddingMatrix random_embeddings(const Vocabulary& vocab,
                                         std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("embedding dim must be >= 1");
  EmbeddingMatrix em;
  em.dim = dim;
  em.matrix = Tensor({vocab.size(), dim});
  Rng rng(seed);
  for (std::size_t i = 0; i < vocab.size() * dim; ++i) {
    em.matrix[i] = rng.uniform(-0.25, 0.25);
  }
  em.coverage = 0.0;
  return em;
}

// --- encoding ------------------------------------------------------------

inline std::vector<std::string> collect_labels(
    const std::vector<RawClassification>& raw) {
  std::vector<std::string> names;
  for (const auto& ex : raw) names.push_back(ex.label);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return names;
}

inline std::vector<std::string> collect_tags(
    const std::vector<RawTagged>& raw) {
  std::vector<std::string> names;
  for (const auto& ex : raw) {
    for (const auto& t : ex.tags) names.push_back(t);
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return names;
}

inline long name_index(const std::vector<std::string>& names,
                       const std::string& name) {
  auto it = std::lower_bound(names.begin(), names.end(), name);
  if (it == names.end() || *it != name) {
    throw std::invalid_argument("unknown label " + name);
  }
  return static_cast<long>(it - names.begin());
}

inline std::vector<ClassificationExample> encode_classification(
    const std::vector<RawClassification>& raw, const Vocabulary& vocab,
    const std::vector<std::string>& label_names) {
  std::vector<ClassificationExample> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].tokens.empty()) {
      throw std::invalid_argument("example " + std::to_string(i) +
                                  " has no tokens");
    }
    ClassificationExample ex;
    ex.id = static_cast<long>(i);
    ex.label = name_index(label_names, raw[i].label);
    for (const auto& tok : raw[i].tokens) {
      ex.token_ids.push_back(vocab.index_of(tok));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::vector<TaggedExample> encode_tagged(
    const std::vector<RawTagged>& raw, const Vocabulary& vocab,
    const std::vector<std::string>& tag_names) {
  std::vector<TaggedExample> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].tokens.empty() || raw[i].tokens.size() != raw[i].tags.size()) {
      throw std::invalid_argument("example " + std::to_string(i) +
                                  " has mismatched tokens and tags");
    }
    TaggedExample ex;
    ex.id = static_cast<long>(i);
    for (const auto& tok : raw[i].tokens) {
      ex.token_ids.push_back(vocab.index_of(tok));
    }
    for (const auto& tag : raw[i].tags) {
      ex.tags.push_back(name_index(tag_names, tag));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

// --- splits ----------------------------------------------------------------

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

/// Seeded 80/10/10 split over [0, n).
inline SplitIndices split_dataset(std::size_t n, std::uint64_t seed) {
  if (n < 3) throw std::invalid_argument("cannot split fewer than 3 examples");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  SplitIndices s;
  const std::size_t n_val = std::max<std::size_t>(1, n / 10);
  const std::size_t n_test = std::max<std::size_t>(1, n / 10);
  const std::size_t n_train = n - n_val - n_test;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
  s.test.assign(idx.begin() + n_train + n_val, idx.end());
  return s;
}

// --- synthetic classification ----------------------------------------------

struct SyntheticClassificationSpec {
  std::size_t num_examples = 0;
  std::size_t num_classes = 0;
  std::size_t vocab_size = 0;
  double signal_strength = 0.0;  // per-slot probability of a signal token
  std::size_t sentence_length = 10;
  std::size_t signal_tokens_per_class = 5;
  std::vector<double> class_weights;  // empty means uniform
};

struct GeneratedClassification {
  std::vector<RawClassification> examples;
  std::vector<std::string> class_names;
  double bayes_accuracy = 0.0;
};

/// Each class owns a disjoint pool of signal tokens; every sentence slot is
/// a signal token with probability `signal_strength`, otherwise a shared
/// background token. The best possible classifier reads any signal token,
/// so its accuracy is computable and reported as metadata.
inline GeneratedClassification generate_synthetic_classification(
    const SyntheticClassificationSpec& spec, std::uint64_t seed) {
  if (spec.num_classes < 2) {
    throw std::invalid_argument("need at least 2 classes");
  }
  if (!(spec.signal_strength > 0.0 && spec.signal_strength <= 1.0)) {
    throw std::invalid_argument("signal strength must be in (0, 1], got " +
                                std::to_string(spec.signal_strength));
  }
  if (spec.sentence_length == 0 || spec.signal_tokens_per_class == 0) {
    throw std::invalid_argument("sentence length and signal pool must be >= 1");
  }
  const std::size_t signal_total =
      spec.num_classes * spec.signal_tokens_per_class;
  if (spec.vocab_size < signal_total + 1) {
    throw std::invalid_argument(
        "vocab size " + std::to_string(spec.vocab_size) + " too small for " +
        std::to_string(signal_total) + " signal tokens plus background");
  }
  std::vector<double> weights = spec.class_weights;
  if (weights.empty()) weights.assign(spec.num_classes, 1.0);
  if (weights.size() != spec.num_classes) {
    throw std::invalid_argument("class weights size " +
                                std::to_string(weights.size()) +
                                " does not match " +
                                std::to_string(spec.num_classes) + " classes");
  }
  double wsum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("class weights must be >= 0");
    wsum += w;
  }
  if (wsum <= 0.0) throw std::invalid_argument("class weights sum to zero");

  GeneratedClassification out;
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    out.class_names.push_back("class" + std::to_string(k));
  }
  const std::size_t background = spec.vocab_size - signal_total;

  Rng rng(seed);
  out.examples.reserve(spec.num_examples);
  for (std::size_t i = 0; i < spec.num_examples; ++i) {
    double r = rng.uniform() * wsum;
    std::size_t cls = 0;
    for (; cls + 1 < spec.num_classes; ++cls) {
      if (r < weights[cls]) break;
      r -= weights[cls];
    }
    RawClassification ex;
    ex.label = out.class_names[cls];
    for (std::size_t s = 0; s < spec.sentence_length; ++s) {
      if (rng.uniform() < spec.signal_strength) {
        auto j = rng.below(spec.signal_tokens_per_class);
        ex.tokens.push_back("sig" + std::to_string(cls) + "_" +
                            std::to_string(j));
      } else {
        ex.tokens.push_back("bg" + std::to_string(rng.below(background)));
      }
    }
    out.examples.push_back(std::move(ex));
  }

  // A sentence is ambiguous only when no slot drew a signal token; the best
  // classifier then falls back to the largest prior.
  const double miss =
      std::pow(1.0 - spec.signal_strength,
               static_cast<double>(spec.sentence_length));
  double wmax = 0.0;
  for (double w : weights) wmax = std::max(wmax, w);
  out.bayes_accuracy = (1.0 - miss) + miss * (wmax / wsum);
  return out;
}

// --- synthetic tagging -------------------------------------------------

struct EntityPool {
  std::string type;                 // tag suffix, e.g. PER -> B-PER/I-PER
  std::vector<std::string> names;   // entries may be multi-token phrases
};

struct SentenceTemplate {
  // Slots are literal tokens, or "{TYPE}" to draw from the matching pool.
  std::vector<std::string> slots;
  double weight = 1.0;
};

struct SyntheticTaggingSpec {
  std::size_t num_sentences = 0;
  std::vector<EntityPool> pools;
  std::vector<SentenceTemplate> templates;
};

struct GeneratedTagging {
  std::vector<RawTagged> examples;
  std::vector<std::string> tag_names;
};

/// Assembles sentences from weighted templates; entity slots expand to a
/// pool phrase tagged B-TYPE on the first token and I-TYPE after.
inline GeneratedTagging generate_synthetic_tagging(
    const SyntheticTaggingSpec& spec, std::uint64_t seed) {
  if (spec.templates.empty()) {
    throw std::invalid_argument("template set must not be empty");
  }
  std::map<std::string, const EntityPool*> pools;
  for (const auto& p : spec.pools) {
    if (p.names.empty()) {
      throw std::invalid_argument("entity pool " + p.type + " is empty");
    }
    pools[p.type] = &p;
  }
  double wsum = 0.0;
  for (const auto& t : spec.templates) {
    if (t.slots.empty()) throw std::invalid_argument("empty template");
    if (!(t.weight > 0.0)) {
      throw std::invalid_argument("template weights must be positive");
    }
    for (const auto& slot : t.slots) {
      if (slot.size() >= 2 && slot.front() == '{' && slot.back() == '}') {
        std::string type = slot.substr(1, slot.size() - 2);
        if (!pools.count(type)) {
          throw std::invalid_argument("template references unknown pool " +
                                      type);
        }
      }
    }
    wsum += t.weight;
  }

  GeneratedTagging out;
  std::vector<std::string> tags{"O"};
  for (const auto& p : spec.pools) {
    tags.push_back("B-" + p.type);
    tags.push_back("I-" + p.type);
  }
  std::sort(tags.begin(), tags.end());
  out.tag_names = std::move(tags);

  Rng rng(seed);
  out.examples.reserve(spec.num_sentences);
  for (std::size_t i = 0; i < spec.num_sentences; ++i) {
    double r = rng.uniform() * wsum;
    std::size_t ti = 0;
    for (; ti + 1 < spec.templates.size(); ++ti) {
      if (r < spec.templates[ti].weight) break;
      r -= spec.templates[ti].weight;
    }
    RawTagged ex;
    for (const auto& slot : spec.templates[ti].slots) {
      if (slot.size() >= 2 && slot.front() == '{' && slot.back() == '}') {
        std::string type = slot.substr(1, slot.size() - 2);
        const EntityPool& pool = *pools.at(type);
        auto phrase = tokenize(pool.names[rng.below(pool.names.size())]);
        for (std::size_t j = 0; j < phrase.size(); ++j) {
          ex.tokens.push_back(phrase[j]);
          ex.tags.push_back((j == 0 ? "B-" : "I-") + type);
        }
      } else {
        ex.tokens.push_back(slot);
        ex.tags.push_back("O");
      }
    }
    out.examples.push_back(std::move(ex));
  }
  return out;
}

}  // namespace alsim
