#ifndef SEQMC_HYPERSEARCH_HPP
#define SEQMC_HYPERSEARCH_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "seqmc/pipeline.hpp"
#include "seqmc/simulator.hpp"

namespace seqmc::hyper {

struct SearchSpec {
  int k1 = 3;
  std::vector<double> lambda_grid{0.001, 0.005, 0.01, 0.05};
  std::vector<int> k2_grid{1, 11, 21, 51, 101};  // values beyond the horizon are clamped

  void require_valid() const;
};

struct LogRow {
  std::string stage;      // "prefix-<i>" or "tail"
  int entry_or_k2 = 0;    // swept entry index, or the k2 candidate
  double lambda = 0.0;
  std::optional<double> val_ece;
  std::uint64_t seed = 0;
  std::string status;     // "ok", "failed", or "cached" (incumbent, not retrained)
};

struct SearchResult {
  sim::LambdaSchedule schedule;
  std::vector<LogRow> log;
  int trainings = 0;  // candidates actually trained
};

/// Trains one candidate schedule with the given seed and returns its
/// validation sequence-level marginal ECE, or empty if training diverged.
using CandidateEval =
    std::function<std::optional<double>(const sim::LambdaSchedule&, std::uint64_t seed)>;

/// Three-phase schedule selection: for entries 1..k1 in order, sweep the
/// lambda grid holding later entries at zero and keep the value minimizing
/// validation ECE (the previous stage's winner stands in as an implicit
/// lambda_i = 0 candidate, no retraining); then jointly sweep (lambda_all,
/// k2) for entries k1 < i <= k2; beyond k2 the schedule is zero. Ties break
/// toward the smaller lambda (then the smaller k2). Candidate seeds derive
/// from (master_seed, running candidate index).
SearchResult select_time_dependent(int horizon, const SearchSpec& spec,
                                   std::uint64_t master_seed, const CandidateEval& eval);

/// One sweep over the lambda grid with a constant schedule.
SearchResult select_constant(int horizon, const SearchSpec& spec,
                             std::uint64_t master_seed, const CandidateEval& eval);

/// The production CandidateEval: trains on `train` with cfg (seed replaced
/// per candidate) and evaluates marginal ECE on `val`.
CandidateEval make_train_eval(const LabeledDataset& train, const LabeledDataset& val,
                              sim::TrainConfig cfg, pipeline::EvalOptions eval_opts);

// Convenience overloads running the search end to end on datasets.
SearchResult select_time_dependent(const LabeledDataset& train, const LabeledDataset& val,
                                   const SearchSpec& spec, const sim::TrainConfig& cfg,
                                   const pipeline::EvalOptions& eval_opts);
SearchResult select_constant(const LabeledDataset& train, const LabeledDataset& val,
                             const SearchSpec& spec, const sim::TrainConfig& cfg,
                             const pipeline::EvalOptions& eval_opts);

/// Trains with lambda at exactly one entry (zero elsewhere) and returns the
/// full validation metric report, for comparing regularization placement.
pipeline::EvaluationReport single_entry_sweep(const LabeledDataset& train,
                                              const LabeledDataset& val, int entry_index,
                                              double lambda, const sim::TrainConfig& cfg,
                                              const pipeline::EvalOptions& eval_opts);

void write_search_log_csv(const std::filesystem::path& path,
                          const std::vector<LogRow>& log);

}  // namespace seqmc::hyper

#endif
