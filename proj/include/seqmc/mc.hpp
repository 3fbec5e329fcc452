#ifndef SEQMC_MC_HPP
#define SEQMC_MC_HPP

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "seqmc/core.hpp"
#include "seqmc/rng.hpp"
#include "seqmc/simulator.hpp"

namespace seqmc::mc {

/// M sampled sequences for one input; the substrate of every estimator here.
struct MonteCarloEnsemble {
  Covariate input;
  int horizon = 0;
  int num_states = 0;
  std::vector<Sequence> samples;

  int size() const { return static_cast<int>(samples.size()); }
};

/// Sample index mapped to censored event times: horizon + 1.
inline int censored_sentinel(int horizon) { return horizon + 1; }

/// M free-running draws from the simulator; sample m uses rng stream m, so
/// the ensemble is reproducible under any parallel schedule.
MonteCarloEnsemble simulate_ensemble(const sim::SimulatorParams& params,
                                     const Covariate& x, int samples, int horizon,
                                     const Rng& rng);

/// Same ensemble construction from an arbitrary sequence sampler (used to
/// draw directly from a known chain).
MonteCarloEnsemble ensemble_from_sampler(const Covariate& x, int samples, int horizon,
                                         int num_states, const Rng& rng,
                                         const std::function<Sequence(Rng&)>& sampler);

/// Fraction of samples in state a at entry i (both 1-based).
double estimate_marginal(const MonteCarloEnsemble& e, int entry, int state);

/// All states at once; entries sum to 1 up to rounding of the count ratios.
ProbabilityVector estimate_marginal_distribution(const MonteCarloEnsemble& e, int entry);

struct ConditionalEstimate {
  std::optional<double> value;  // empty when no sample satisfies the condition
  int denominator = 0;          // number of samples with entry j in state b
};

/// Fraction of samples in state a at entry i among samples in state b at
/// entry j. A zero denominator yields an explicit undefined value.
ConditionalEstimate estimate_conditional(const MonteCarloEnsemble& e, int entry_i,
                                         int state_a, int entry_j, int state_b);

/// First-hitting event: T = min{ i : Y_i = target_state }.
struct EventSpec {
  int target_state = 0;
};

/// Smallest entry index at which the event state occurs, or empty if it
/// never occurs within the sequence (censored).
std::optional<int> time_to_event(const Sequence& s, const EventSpec& event);

/// Percentile confidence interval for the time to event. Bounds live in
/// {1..horizon} plus the censored sentinel horizon+1.
struct ConfidenceInterval {
  int lower = 0;
  int upper = 0;
  double level = 0.0;
};

/// Nearest-rank percentiles (index ceil(q*M), 1-based) of the per-sample
/// event times at q = (1-alpha)/2 and (1+alpha)/2; censored samples are
/// sorted as horizon+1.
ConfidenceInterval estimate_ci(const MonteCarloEnsemble& e, const EventSpec& event,
                               double alpha);

/// Mean per-sample event time, censored mapped to horizon+1.
double point_estimate_time(const MonteCarloEnsemble& e, const EventSpec& event);

/// Ensemble dump: one JSON header line (input, sample count, horizon,
/// alphabet size, generating seed), then one sample per line as
/// space-separated states. Round-trips exactly.
void write_ensemble_dump(const std::filesystem::path& path, const MonteCarloEnsemble& e,
                         std::uint64_t seed);

struct EnsembleDump {
  MonteCarloEnsemble ensemble;
  std::uint64_t seed = 0;
};

EnsembleDump read_ensemble_dump(const std::filesystem::path& path);

}  // namespace seqmc::mc

#endif
