#ifndef SEQMC_PIPELINE_HPP
#define SEQMC_PIPELINE_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "seqmc/core.hpp"
#include "seqmc/datagen.hpp"
#include "seqmc/metrics.hpp"
#include "seqmc/simulator.hpp"

namespace seqmc::pipeline {

struct EvalOptions {
  int samples = 100;  // Monte Carlo ensemble size per item
  int bins = 10;      // ECE / reliability quantile bins
  double alpha = 0.9;
  int event_state = datagen::kDead;
  std::uint64_t seed = 0;
};

struct EntryMetrics {
  int entry = 0;  // 1-based
  double ece = 0.0;
  std::optional<double> auc;
  int auc_excluded_classes = 0;
  double ce = 0.0;
  std::optional<double> bs;
  int bs_excluded_classes = 0;
  int n = 0;
};

struct Summary {
  std::optional<double> ece, auc, ce, bs;
  int auc_excluded_entries = 0;
  std::optional<double> coverage, relative_width, relative_mae;
  int censored_truths = 0;
};

struct EvaluationReport {
  std::vector<EntryMetrics> entries;
  std::vector<metrics::ReliabilityBins> reliability;  // one per entry
  Summary summary;
};

/// Full marginal-probability and time-to-event evaluation of a trained
/// simulator on a dataset slice: per item a Monte Carlo ensemble (item k
/// uses rng stream k), per entry the calibration/discrimination metrics on
/// the estimated marginals, plus CI coverage/width/MAE against the observed
/// event times.
EvaluationReport evaluate_simulator(const sim::SimulatorParams& params,
                                    const LabeledDataset& data, const EvalOptions& opts);

/// Same report with the exact chain as the predictor: marginal predictions
/// are the analytic marginals per item, and the CI ensembles are drawn from
/// the chain itself.
EvaluationReport evaluate_oracle(const datagen::TransitionModel& model,
                                 const LabeledDataset& data, const EvalOptions& opts);

/// Sequence-level marginal ECE of a simulator on a validation slice; the
/// objective driving the regularization schedule search.
double validation_marginal_ece(const sim::SimulatorParams& params,
                               const LabeledDataset& data, const EvalOptions& opts);

}  // namespace seqmc::pipeline

#endif
