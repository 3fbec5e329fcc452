#include "seqmc/hypersearch.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "seqmc/format.hpp"

namespace seqmc::hyper {

namespace {

std::uint64_t candidate_seed(std::uint64_t master_seed, int candidate_index) {
  return Rng(master_seed).split(static_cast<std::uint64_t>(candidate_index)).next_u64();
}

struct Best {
  bool set = false;
  double lambda = 0.0;
  int k2 = 0;
  double ece = 0.0;
};

// Strict improvement only: with candidates visited in ascending lambda (then
// ascending k2) order, ties stay with the earlier, smaller candidate.
void consider(Best& best, double lambda, int k2, double ece) {
  if (!best.set || ece < best.ece) {
    best = {true, lambda, k2, ece};
  }
}

}  // namespace

void SearchSpec::require_valid() const {
  if (k1 < 1) {
    throw std::invalid_argument("SearchSpec: k1 must be >= 1");
  }
  if (lambda_grid.empty() || k2_grid.empty()) {
    throw std::invalid_argument("SearchSpec: grids must be non-empty");
  }
  for (double v : lambda_grid) {
    if (!(v > 0.0)) {
      throw std::invalid_argument("SearchSpec: lambda grid values must be positive");
    }
  }
  for (int v : k2_grid) {
    if (v < 1) {
      throw std::invalid_argument("SearchSpec: k2 grid values must be >= 1");
    }
  }
}

SearchResult select_time_dependent(int horizon, const SearchSpec& spec,
                                   std::uint64_t master_seed, const CandidateEval& eval) {
  spec.require_valid();
  if (spec.k1 > horizon) {
    throw std::invalid_argument("SearchSpec: k1 exceeds horizon");
  }
  std::vector<double> lambdas = spec.lambda_grid;
  std::sort(lambdas.begin(), lambdas.end());
  std::vector<int> k2s = spec.k2_grid;
  std::sort(k2s.begin(), k2s.end());

  SearchResult result;
  result.schedule = sim::LambdaSchedule::zeros(horizon);
  int candidate_index = 0;

  std::optional<double> incumbent_ece;  // ECE of the current prefix winner
  for (int i = 1; i <= spec.k1; ++i) {
    const std::string stage = "prefix-" + std::to_string(i);
    Best best;
    if (incumbent_ece) {
      // lambda_i = 0 keeps the previous stage's winning model; its ECE is
      // already known, so no training is spent on it.
      consider(best, 0.0, 0, *incumbent_ece);
      result.log.push_back({stage, i, 0.0, incumbent_ece, 0, "cached"});
    }
    for (double lambda : lambdas) {
      sim::LambdaSchedule candidate = result.schedule;
      candidate.coefficients[static_cast<std::size_t>(i - 1)] = lambda;
      const std::uint64_t seed = candidate_seed(master_seed, candidate_index++);
      auto ece = eval(candidate, seed);
      ++result.trainings;
      result.log.push_back({stage, i, lambda, ece, seed, ece ? "ok" : "failed"});
      if (ece) {
        consider(best, lambda, 0, *ece);
      }
    }
    if (!best.set) {
      throw std::runtime_error("schedule search: every candidate failed at stage " + stage);
    }
    result.schedule.coefficients[static_cast<std::size_t>(i - 1)] = best.lambda;
    incumbent_ece = best.ece;
  }

  Best tail;
  for (double lambda : lambdas) {
    for (int k2 : k2s) {
      const int cutoff = std::min(k2, horizon);
      sim::LambdaSchedule candidate = result.schedule;
      for (int i = spec.k1 + 1; i <= cutoff; ++i) {
        candidate.coefficients[static_cast<std::size_t>(i - 1)] = lambda;
      }
      const std::uint64_t seed = candidate_seed(master_seed, candidate_index++);
      auto ece = eval(candidate, seed);
      ++result.trainings;
      result.log.push_back({"tail", k2, lambda, ece, seed, ece ? "ok" : "failed"});
      if (ece) {
        consider(tail, lambda, cutoff, *ece);
      }
    }
  }
  if (!tail.set) {
    throw std::runtime_error("schedule search: every candidate failed in the tail sweep");
  }
  for (int i = spec.k1 + 1; i <= tail.k2; ++i) {
    result.schedule.coefficients[static_cast<std::size_t>(i - 1)] = tail.lambda;
  }
  return result;
}

SearchResult select_constant(int horizon, const SearchSpec& spec,
                             std::uint64_t master_seed, const CandidateEval& eval) {
  spec.require_valid();
  std::vector<double> lambdas = spec.lambda_grid;
  std::sort(lambdas.begin(), lambdas.end());

  SearchResult result;
  int candidate_index = 0;
  Best best;
  for (double lambda : lambdas) {
    auto candidate = sim::LambdaSchedule::constant(horizon, lambda);
    const std::uint64_t seed = candidate_seed(master_seed, candidate_index++);
    auto ece = eval(candidate, seed);
    ++result.trainings;
    result.log.push_back({"constant", 0, lambda, ece, seed, ece ? "ok" : "failed"});
    if (ece) {
      consider(best, lambda, 0, *ece);
    }
  }
  if (!best.set) {
    throw std::runtime_error("schedule search: every constant candidate failed");
  }
  result.schedule = sim::LambdaSchedule::constant(horizon, best.lambda);
  return result;
}

CandidateEval make_train_eval(const LabeledDataset& train, const LabeledDataset& val,
                              sim::TrainConfig cfg, pipeline::EvalOptions eval_opts) {
  return [&train, &val, cfg, eval_opts](const sim::LambdaSchedule& schedule,
                                        std::uint64_t seed) -> std::optional<double> {
    sim::TrainConfig candidate_cfg = cfg;
    candidate_cfg.schedule = schedule;
    candidate_cfg.seed = seed;
    try {
      auto params = sim::train(train, candidate_cfg);
      return pipeline::validation_marginal_ece(params, val, eval_opts);
    } catch (const sim::DivergenceError&) {
      return std::nullopt;
    }
  };
}

SearchResult select_time_dependent(const LabeledDataset& train, const LabeledDataset& val,
                                   const SearchSpec& spec, const sim::TrainConfig& cfg,
                                   const pipeline::EvalOptions& eval_opts) {
  return select_time_dependent(train.horizon, spec, cfg.seed,
                               make_train_eval(train, val, cfg, eval_opts));
}

SearchResult select_constant(const LabeledDataset& train, const LabeledDataset& val,
                             const SearchSpec& spec, const sim::TrainConfig& cfg,
                             const pipeline::EvalOptions& eval_opts) {
  return select_constant(train.horizon, spec, cfg.seed,
                         make_train_eval(train, val, cfg, eval_opts));
}

pipeline::EvaluationReport single_entry_sweep(const LabeledDataset& train,
                                              const LabeledDataset& val, int entry_index,
                                              double lambda, const sim::TrainConfig& cfg,
                                              const pipeline::EvalOptions& eval_opts) {
  if (entry_index < 1 || entry_index > train.horizon) {
    throw std::invalid_argument("single_entry_sweep: entry index outside 1..horizon");
  }
  sim::TrainConfig run_cfg = cfg;
  run_cfg.schedule = sim::LambdaSchedule::zeros(train.horizon);
  run_cfg.schedule.coefficients[static_cast<std::size_t>(entry_index - 1)] = lambda;
  auto params = sim::train(train, run_cfg);
  return pipeline::evaluate_simulator(params, val, eval_opts);
}

void write_search_log_csv(const std::filesystem::path& path,
                          const std::vector<LogRow>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  out << "stage,entry_or_k2,lambda,val_ece,seed,status\n";
  for (const auto& row : log) {
    out << row.stage << ',' << row.entry_or_k2 << ',' << format_double(row.lambda) << ','
        << (row.val_ece ? format_double(*row.val_ece) : std::string()) << ',' << row.seed
        << ',' << row.status << '\n';
  }
}

}  // namespace seqmc::hyper
