#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace alsim {

inline double accuracy(const std::vector<long>& predictions,
                       const std::vector<long>& gold) {
  if (predictions.size() != gold.size()) {
    throw std::invalid_argument("accuracy: " +
                                std::to_string(predictions.size()) +
                                " predictions vs " +
                                std::to_string(gold.size()) + " gold labels");
  }
  if (predictions.empty()) {
    throw std::invalid_argument("accuracy: empty inputs");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    hits += (predictions[i] == gold[i]);
  }
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

/// Entity span: token range [start, end) of a given type.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;

  auto operator<=>(const Span&) const = default;
};

/// BIO decode with the standard repair rule: an I-X that does not continue
/// a span of type X (sequence start, after O, or after another type) opens
/// a new span as if it were B-X.
inline std::vector<Span> decode_bio(const std::vector<std::string>& tags) {
  std::vector<Span> spans;
  bool open = false;
  Span cur;
  auto close = [&] {
    if (open) {
      spans.push_back(cur);
      open = false;
    }
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& t = tags[i];
    if (t == "O") {
      close();
    } else if (t.size() > 2 && (t[0] == 'B' || t[0] == 'I') && t[1] == '-') {
      const std::string type = t.substr(2);
      if (t[0] == 'I' && open && cur.type == type) {
        cur.end = i + 1;
      } else {
        close();
        cur = Span{i, i + 1, type};
        open = true;
      }
    } else {
      throw std::invalid_argument("decode_bio: unknown tag \"" + t + "\"");
    }
  }
  close();
  return spans;
}

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Exact-match span F1 over tag sequences: both sides are BIO-decoded and a
/// span counts only when boundaries and type all agree.
inline PRF span_f1(const std::vector<std::vector<std::string>>& predicted,
                   const std::vector<std::vector<std::string>>& gold) {
  if (predicted.size() != gold.size()) {
    throw std::invalid_argument(
        "span_f1: " + std::to_string(predicted.size()) + " predictions vs " +
        std::to_string(gold.size()) + " gold sequences");
  }
  std::size_t n_pred = 0, n_gold = 0, n_match = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i].size() != gold[i].size()) {
      throw std::invalid_argument("span_f1: sequence " + std::to_string(i) +
                                  " lengths differ");
    }
    auto ps = decode_bio(predicted[i]);
    auto gs = decode_bio(gold[i]);
    n_pred += ps.size();
    n_gold += gs.size();
    std::set<Span> gold_set(gs.begin(), gs.end());
    for (const auto& s : ps) n_match += gold_set.count(s);
  }
  PRF out;
  out.precision = n_pred ? static_cast<double>(n_match) / n_pred : 0.0;
  out.recall = n_gold ? static_cast<double>(n_match) / n_gold : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall /
                     (out.precision + out.recall)
               : 0.0;
  return out;
}

/// Convenience overload for integer tag ids plus a name table.
inline PRF span_f1(const std::vector<std::vector<long>>& predicted,
                   const std::vector<std::vector<long>>& gold,
                   const std::vector<std::string>& tag_names) {
  auto to_strings = [&](const std::vector<std::vector<long>>& seqs) {
    std::vector<std::vector<std::string>> out(seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      for (long t : seqs[i]) {
        if (t < 0 || static_cast<std::size_t>(t) >= tag_names.size()) {
          throw std::invalid_argument("span_f1: tag id " + std::to_string(t) +
                                      " out of range");
        }
        out[i].push_back(tag_names[static_cast<std::size_t>(t)]);
      }
    }
    return out;
  };
  return span_f1(to_strings(predicted), to_strings(gold));
}

/// Normalized area under a learning curve: trapezoidal integral divided by
/// the fraction range, so a constant metric c has AUC exactly c.
inline double curve_auc(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) {
    throw std::invalid_argument("curve_auc: need at least 2 points, got " +
                                std::to_string(points.size()));
  }
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double dx = points[i].first - points[i - 1].first;
    if (dx <= 0.0) {
      throw std::invalid_argument(
          "curve_auc: fractions must be strictly increasing");
    }
    area += dx * 0.5 * (points[i].second + points[i - 1].second);
  }
  return area / (points.back().first - points.front().first);
}

struct CurvePoint {
  double fraction = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
};

struct CurveSummary {
  std::vector<CurvePoint> points;
  double auc = 0.0;  // of the mean curve
};

/// Pointwise mean and sample (n-1) standard deviation across seeds. All
/// curves must share the exact round schedule.
inline CurveSummary aggregate_seeds(
    const std::vector<std::vector<std::pair<double, double>>>& curves) {
  if (curves.empty()) {
    throw std::invalid_argument("aggregate_seeds: no curves");
  }
  const auto& first = curves.front();
  for (const auto& c : curves) {
    if (c.size() != first.size()) {
      throw std::invalid_argument("aggregate_seeds: round schedules differ");
    }
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c[i].first != first[i].first) {
        throw std::invalid_argument("aggregate_seeds: round schedules differ");
      }
    }
  }
  CurveSummary out;
  const double n = static_cast<double>(curves.size());
  std::vector<std::pair<double, double>> mean_curve;
  for (std::size_t i = 0; i < first.size(); ++i) {
    CurvePoint p;
    p.fraction = first[i].first;
    for (const auto& c : curves) p.mean += c[i].second;
    p.mean /= n;
    if (curves.size() > 1) {
      double ss = 0.0;
      for (const auto& c : curves) {
        const double d = c[i].second - p.mean;
        ss += d * d;
      }
      p.stddev = std::sqrt(ss / (n - 1.0));
    }
    mean_curve.emplace_back(p.fraction, p.mean);
    out.points.push_back(p);
  }
  if (out.points.size() >= 2) out.auc = curve_auc(mean_curve);
  return out;
}

}  // namespace alsim
