#ifndef SEQMC_METRICS_HPP
#define SEQMC_METRICS_HPP

#include <optional>
#include <span>
#include <vector>

#include "seqmc/core.hpp"
#include "seqmc/mc.hpp"

namespace seqmc::metrics {

/// Predicted distribution and observed state for one entry index, across the
/// evaluation items.
struct PredictionRow {
  ProbabilityVector probs;
  int label = 0;  // 1-based
};

struct PredictionSet {
  int num_states = 0;
  std::vector<PredictionRow> rows;

  std::size_t size() const { return rows.size(); }
};

/// Confidence ECE: rows are binned into `bins` equal-count bins by the
/// probability of the argmax class (ties at a bin boundary stay in the lower
/// bin); the result is the unweighted mean over non-empty bins of
/// |accuracy - mean confidence|.
double entry_ece(const PredictionSet& p, int bins);

struct ReliabilityBin {
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  int count = 0;
};

/// The per-bin (confidence, accuracy, count) triples behind a reliability
/// diagram. Always `bins` entries; empty bins have count 0.
struct ReliabilityBins {
  std::vector<ReliabilityBin> bins;
};

ReliabilityBins reliability_bins(const PredictionSet& p, int bins);

struct MacroAucResult {
  std::optional<double> value;  // empty when no class has both labels
  int excluded_classes = 0;
};

/// Mean of one-vs-rest AUCs (rank statistic, ties count 1/2) over classes
/// with at least one positive and one negative row.
MacroAucResult macro_auc(const PredictionSet& p);

struct BrierResult {
  std::optional<double> value;
  int excluded_classes = 0;  // classes absent from the labels
};

/// Mean over (present) classes of the per-class mean squared error between
/// predicted probability and the binarized label.
BrierResult brier(const PredictionSet& p);

/// Mean of -log p[label], with probabilities clipped to [1e-12, 1].
double cross_entropy(const PredictionSet& p);

struct Aggregate {
  std::optional<double> value;
  int excluded = 0;
};

/// Mean over entries of per-entry metric values; undefined entries are
/// excluded and counted.
Aggregate sequence_level(std::span<const std::optional<double>> per_entry);

/// Fraction of (interval, truth) pairs with lower <= truth <= upper.
/// Censored truths are excluded and counted.
Aggregate coverage_probability(std::span<const mc::ConfidenceInterval> intervals,
                               std::span<const std::optional<int>> truths);

/// Mean interval width divided by mean truth, over non-censored pairs.
Aggregate relative_ci_width(std::span<const mc::ConfidenceInterval> intervals,
                            std::span<const std::optional<int>> truths);

/// Sum of |truth - estimate| divided by sum of truths, over non-censored pairs.
Aggregate relative_mae(std::span<const double> estimates,
                       std::span<const std::optional<int>> truths);

}  // namespace seqmc::metrics

#endif
