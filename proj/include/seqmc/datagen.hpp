#ifndef SEQMC_DATAGEN_HPP
#define SEQMC_DATAGEN_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "seqmc/core.hpp"
#include "seqmc/rng.hpp"

namespace seqmc::datagen {

inline constexpr int kHealthy = 1;
inline constexpr int kIll = 2;
inline constexpr int kDead = 3;

using TransitionMatrix = std::array<std::array<double, 3>, 3>;

/// One age band: `rows` applies while current age >= min_age and below the
/// next band's min_age.
struct AgeBand {
  int min_age = 0;
  TransitionMatrix rows{};
};

/// Age-dependent Markov transition matrices over (healthy, ill, dead).
struct TransitionModel {
  std::vector<AgeBand> bands;  // ascending min_age, first band at 0

  /// Row of transition probabilities out of `state` (1-based) at `age`.
  const std::array<double, 3>& row(int state, int age) const;
  /// Throws std::invalid_argument if rows are not stochastic, dead is not
  /// absorbing in some band, or the bands do not partition [0, inf).
  void require_valid() const;
};

/// The health-trajectory demo chain: no transitions below age 40; healthy/ill
/// mixing with retention 0.9 from 40 to 80 inclusive; above 80 the ill can
/// die with probability 0.2 and the healthy fall ill with probability 0.4.
TransitionModel default_health_transitions();

StateAlphabet health_alphabet();

struct GenerationConfig {
  int horizon = 100;
  int n = 1;
  int age_min = 1;   // starting ages drawn uniformly from {age_min..age_max}
  int age_max = 99;
  std::uint64_t seed = 0;

  void require_valid() const;
};

/// Simulates one trajectory. The chain starts healthy; entry i is drawn from
/// the row of the state at i-1 using the matrix for age = start_age + i, so
/// the transition probabilities shift as the individual ages through the
/// simulation. Dead is absorbing, which is also how sequences are padded.
Sequence simulate_sequence(int start_age, const TransitionModel& model, int horizon,
                           Rng& rng);

struct SplitManifest {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

struct GeneratedData {
  LabeledDataset dataset;
  SplitManifest split;
};

/// n (age, sequence) pairs, deterministic given cfg.seed; item k derives its
/// RNG stream from (seed, k). Indices are assigned to train/val/test in a
/// 7:2:1 ratio.
GeneratedData generate_dataset(const GenerationConfig& cfg, const TransitionModel& model);

/// Exact marginals P(Y_i = a | start_age) for i = 1..horizon by forward
/// propagation from a point mass on healthy.
std::vector<ProbabilityVector> analytic_marginals(int start_age,
                                                  const TransitionModel& model,
                                                  int horizon);

/// Exact distribution of the first-hitting time of `event_state`; mass not
/// absorbed within the horizon is reported as censored.
struct EventTimeDistribution {
  std::vector<double> pmf;  // pmf[i-1] = P(T = i), i in 1..horizon
  double censored = 0.0;

  double mean_with_sentinel() const;  // censored mass mapped to horizon+1
};

EventTimeDistribution analytic_event_time_distribution(int start_age,
                                                       const TransitionModel& model,
                                                       int horizon, int event_state);

// --- serialization -----------------------------------------------------

/// One record per line: {"age": <number>, "states": [int, ...]}.
void write_dataset_jsonl(const std::filesystem::path& path, const LabeledDataset& data);
LabeledDataset read_dataset_jsonl(const std::filesystem::path& path,
                                  const StateAlphabet& alphabet);

void write_manifest_json(const std::filesystem::path& path, const SplitManifest& split);
SplitManifest read_manifest_json(const std::filesystem::path& path);

/// New dataset holding the items at `indices`, in order.
LabeledDataset subset(const LabeledDataset& data, std::span<const int> indices);

}  // namespace seqmc::datagen

#endif
