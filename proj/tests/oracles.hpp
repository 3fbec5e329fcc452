#ifndef SEQMC_TEST_ORACLES_HPP
#define SEQMC_TEST_ORACLES_HPP

// Independent test oracles. These deliberately re-derive expected values
// through different code paths (long-double arithmetic, hard-coded band
// rules, exhaustive enumeration, pair counting) so they can catch mistakes
// in the implementations they check.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace seqmc_test {

// --- health chain, hard-coded from its definition ------------------------

inline std::array<std::array<long double, 3>, 3> oracle_health_matrix(int age) {
  if (age < 40) {
    return {{{1.0L, 0.0L, 0.0L}, {0.0L, 1.0L, 0.0L}, {0.0L, 0.0L, 1.0L}}};
  }
  if (age <= 80) {
    return {{{0.9L, 0.1L, 0.0L}, {0.1L, 0.9L, 0.0L}, {0.0L, 0.0L, 1.0L}}};
  }
  return {{{0.6L, 0.4L, 0.0L}, {0.1L, 0.7L, 0.2L}, {0.0L, 0.0L, 1.0L}}};
}

/// Long-double forward propagation of the health chain marginals.
inline std::vector<std::array<long double, 3>> oracle_health_marginals(int start_age,
                                                                       int horizon) {
  std::vector<std::array<long double, 3>> out;
  std::array<long double, 3> p{1.0L, 0.0L, 0.0L};
  for (int i = 1; i <= horizon; ++i) {
    auto m = oracle_health_matrix(start_age + i);
    std::array<long double, 3> next{0.0L, 0.0L, 0.0L};
    for (int b = 0; b < 3; ++b) {
      for (int a = 0; a < 3; ++a) {
        next[a] += p[b] * m[b][a];
      }
    }
    p = next;
    out.push_back(p);
  }
  return out;
}

/// Long-double first-hitting-time distribution for the health chain.
struct OracleEventDist {
  std::vector<long double> pmf;  // pmf[i-1] = P(T = i)
  long double censored = 0.0L;
};

inline OracleEventDist oracle_health_event_time(int start_age, int horizon,
                                                int event_state) {
  OracleEventDist dist;
  dist.pmf.assign(static_cast<std::size_t>(horizon), 0.0L);
  std::array<long double, 3> q{1.0L, 0.0L, 0.0L};
  for (int i = 1; i <= horizon; ++i) {
    auto m = oracle_health_matrix(start_age + i);
    std::array<long double, 3> next{0.0L, 0.0L, 0.0L};
    long double hit = 0.0L;
    for (int b = 0; b < 3; ++b) {
      for (int a = 0; a < 3; ++a) {
        long double mass = q[b] * m[b][a];
        if (a + 1 == event_state) {
          hit += mass;
        } else {
          next[a] += mass;
        }
      }
    }
    dist.pmf[static_cast<std::size_t>(i - 1)] = hit;
    q = next;
  }
  dist.censored = q[0] + q[1] + q[2];
  return dist;
}

/// Exhaustive enumeration of all 3^horizon paths of the health chain with
/// exact path probabilities. Visits each (sequence, probability) pair.
template <typename Fn>
inline void oracle_enumerate_health_paths(int start_age, int horizon, const Fn& visit) {
  std::vector<int> states(static_cast<std::size_t>(horizon), 1);
  const long total = static_cast<long>(std::pow(3.0, horizon) + 0.5);
  for (long code = 0; code < total; ++code) {
    long rest = code;
    long double prob = 1.0L;
    int prev = 1;  // healthy start
    for (int i = 1; i <= horizon; ++i) {
      const int s = static_cast<int>(rest % 3) + 1;
      rest /= 3;
      states[static_cast<std::size_t>(i - 1)] = s;
      prob *= oracle_health_matrix(start_age + i)[prev - 1][s - 1];
      prev = s;
    }
    if (prob > 0.0L) {
      visit(states, prob);
    }
  }
}

// --- metric oracles -------------------------------------------------------

/// One-vs-rest AUC by explicit pair counting (ties worth 1/2).
inline double oracle_pairwise_auc(const std::vector<double>& scores,
                                  const std::vector<int>& positives) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (positives[i] != 1) {
      continue;
    }
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positives[j] != 0) {
        continue;
      }
      ++pairs;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace seqmc_test

#endif
