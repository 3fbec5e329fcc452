#include "seqmc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace seqmc::metrics {

namespace {

void require_rows(const PredictionSet& p) {
  if (p.rows.empty()) {
    throw std::invalid_argument("metric on empty prediction set");
  }
  for (const auto& row : p.rows) {
    if (static_cast<int>(row.probs.size()) != p.num_states) {
      throw std::invalid_argument("prediction row size does not match num_states");
    }
    if (row.label < 1 || row.label > p.num_states) {
      throw std::invalid_argument("label outside alphabet");
    }
  }
}

struct ConfidencePoint {
  double confidence;
  bool correct;
};

// Argmax class (smallest index on ties) and its probability.
std::vector<ConfidencePoint> confidence_points(const PredictionSet& p) {
  std::vector<ConfidencePoint> pts;
  pts.reserve(p.rows.size());
  for (const auto& row : p.rows) {
    int argmax = 0;
    for (int a = 1; a < p.num_states; ++a) {
      if (row.probs[static_cast<std::size_t>(a)] >
          row.probs[static_cast<std::size_t>(argmax)]) {
        argmax = a;
      }
    }
    pts.push_back({row.probs[static_cast<std::size_t>(argmax)], argmax == row.label - 1});
  }
  std::sort(pts.begin(), pts.end(), [](const ConfidencePoint& a, const ConfidencePoint& b) {
    return a.confidence < b.confidence;
  });
  return pts;
}

// Quantile bin boundaries over n sorted confidences; a boundary never splits
// a run of equal values (ties go to the lower bin).
std::vector<std::size_t> bin_boundaries(const std::vector<ConfidencePoint>& pts, int bins) {
  const std::size_t n = pts.size();
  std::vector<std::size_t> bounds(static_cast<std::size_t>(bins) + 1, 0);
  for (int b = 1; b <= bins; ++b) {
    std::size_t cut = n * static_cast<std::size_t>(b) / static_cast<std::size_t>(bins);
    while (cut > 0 && cut < n && pts[cut].confidence == pts[cut - 1].confidence) {
      ++cut;
    }
    bounds[static_cast<std::size_t>(b)] = cut;
  }
  bounds.back() = n;
  for (int b = 1; b <= bins; ++b) {
    auto& cur = bounds[static_cast<std::size_t>(b)];
    cur = std::max(cur, bounds[static_cast<std::size_t>(b) - 1]);
  }
  return bounds;
}

}  // namespace

ReliabilityBins reliability_bins(const PredictionSet& p, int bins) {
  require_rows(p);
  if (bins < 1) {
    throw std::invalid_argument("reliability_bins: need at least one bin");
  }
  auto pts = confidence_points(p);
  auto bounds = bin_boundaries(pts, bins);
  ReliabilityBins out;
  out.bins.resize(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    const std::size_t lo = bounds[static_cast<std::size_t>(b)];
    const std::size_t hi = bounds[static_cast<std::size_t>(b) + 1];
    auto& bin = out.bins[static_cast<std::size_t>(b)];
    bin.count = static_cast<int>(hi - lo);
    if (bin.count == 0) {
      continue;
    }
    double conf = 0.0;
    double acc = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
      conf += pts[k].confidence;
      acc += pts[k].correct ? 1.0 : 0.0;
    }
    bin.mean_confidence = conf / static_cast<double>(bin.count);
    bin.accuracy = acc / static_cast<double>(bin.count);
  }
  return out;
}

double entry_ece(const PredictionSet& p, int bins) {
  auto rb = reliability_bins(p, bins);
  double sum = 0.0;
  int nonempty = 0;
  for (const auto& bin : rb.bins) {
    if (bin.count == 0) {
      continue;
    }
    sum += std::abs(bin.accuracy - bin.mean_confidence);
    ++nonempty;
  }
  return sum / static_cast<double>(nonempty);
}

MacroAucResult macro_auc(const PredictionSet& p) {
  require_rows(p);
  MacroAucResult out;
  double sum = 0.0;
  int defined = 0;
  std::vector<std::pair<double, int>> scored(p.rows.size());  // (score, is_positive)
  for (int a = 1; a <= p.num_states; ++a) {
    std::size_t positives = 0;
    for (std::size_t k = 0; k < p.rows.size(); ++k) {
      const bool pos = p.rows[k].label == a;
      scored[k] = {p.rows[k].probs[static_cast<std::size_t>(a - 1)], pos ? 1 : 0};
      positives += pos ? 1 : 0;
    }
    const std::size_t negatives = p.rows.size() - positives;
    if (positives == 0 || negatives == 0) {
      ++out.excluded_classes;
      continue;
    }
    std::sort(scored.begin(), scored.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    // rank-sum with average ranks over tied scores
    double pos_rank_sum = 0.0;
    std::size_t k = 0;
    while (k < scored.size()) {
      std::size_t j = k;
      while (j < scored.size() && scored[j].first == scored[k].first) {
        ++j;
      }
      const double avg_rank = 0.5 * (static_cast<double>(k + 1) + static_cast<double>(j));
      for (std::size_t t = k; t < j; ++t) {
        if (scored[t].second == 1) {
          pos_rank_sum += avg_rank;
        }
      }
      k = j;
    }
    const double np = static_cast<double>(positives);
    const double nn = static_cast<double>(negatives);
    const double auc = (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
    sum += auc;
    ++defined;
  }
  if (defined > 0) {
    out.value = sum / static_cast<double>(defined);
  }
  return out;
}

BrierResult brier(const PredictionSet& p) {
  require_rows(p);
  std::vector<bool> present(static_cast<std::size_t>(p.num_states), false);
  for (const auto& row : p.rows) {
    present[static_cast<std::size_t>(row.label - 1)] = true;
  }
  BrierResult out;
  double sum = 0.0;
  int included = 0;
  for (int a = 0; a < p.num_states; ++a) {
    if (!present[static_cast<std::size_t>(a)]) {
      ++out.excluded_classes;
      continue;
    }
    double mse = 0.0;
    for (const auto& row : p.rows) {
      const double target = row.label - 1 == a ? 1.0 : 0.0;
      const double d = row.probs[static_cast<std::size_t>(a)] - target;
      mse += d * d;
    }
    sum += mse / static_cast<double>(p.rows.size());
    ++included;
  }
  if (included > 0) {
    out.value = sum / static_cast<double>(included);
  }
  return out;
}

double cross_entropy(const PredictionSet& p) {
  require_rows(p);
  double sum = 0.0;
  for (const auto& row : p.rows) {
    double prob = row.probs[static_cast<std::size_t>(row.label - 1)];
    prob = std::clamp(prob, 1e-12, 1.0);
    sum += -std::log(prob);
  }
  return sum / static_cast<double>(p.rows.size());
}

Aggregate sequence_level(std::span<const std::optional<double>> per_entry) {
  if (per_entry.empty()) {
    throw std::invalid_argument("sequence_level: no entries");
  }
  Aggregate out;
  double sum = 0.0;
  int defined = 0;
  for (const auto& v : per_entry) {
    if (v) {
      sum += *v;
      ++defined;
    } else {
      ++out.excluded;
    }
  }
  if (defined > 0) {
    out.value = sum / static_cast<double>(defined);
  }
  return out;
}

Aggregate coverage_probability(std::span<const mc::ConfidenceInterval> intervals,
                               std::span<const std::optional<int>> truths) {
  if (intervals.size() != truths.size()) {
    throw std::invalid_argument("coverage_probability: length mismatch");
  }
  Aggregate out;
  long covered = 0;
  long counted = 0;
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    if (!truths[k]) {
      ++out.excluded;
      continue;
    }
    ++counted;
    const int t = *truths[k];
    if (intervals[k].lower <= t && t <= intervals[k].upper) {
      ++covered;
    }
  }
  if (counted > 0) {
    out.value = static_cast<double>(covered) / static_cast<double>(counted);
  }
  return out;
}

Aggregate relative_ci_width(std::span<const mc::ConfidenceInterval> intervals,
                            std::span<const std::optional<int>> truths) {
  if (intervals.size() != truths.size()) {
    throw std::invalid_argument("relative_ci_width: length mismatch");
  }
  Aggregate out;
  double width_sum = 0.0;
  double truth_sum = 0.0;
  long counted = 0;
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    if (!truths[k]) {
      ++out.excluded;
      continue;
    }
    ++counted;
    width_sum += static_cast<double>(intervals[k].upper - intervals[k].lower);
    truth_sum += static_cast<double>(*truths[k]);
  }
  if (counted > 0 && truth_sum > 0.0) {
    out.value = (width_sum / static_cast<double>(counted)) /
                (truth_sum / static_cast<double>(counted));
  }
  return out;
}

Aggregate relative_mae(std::span<const double> estimates,
                       std::span<const std::optional<int>> truths) {
  if (estimates.size() != truths.size()) {
    throw std::invalid_argument("relative_mae: length mismatch");
  }
  Aggregate out;
  double abs_err = 0.0;
  double truth_sum = 0.0;
  long counted = 0;
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    if (!truths[k]) {
      ++out.excluded;
      continue;
    }
    ++counted;
    abs_err += std::abs(static_cast<double>(*truths[k]) - estimates[k]);
    truth_sum += static_cast<double>(*truths[k]);
  }
  if (counted > 0 && truth_sum > 0.0) {
    out.value = abs_err / truth_sum;
  }
  return out;
}

}  // namespace seqmc::metrics
