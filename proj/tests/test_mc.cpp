#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "seqmc/datagen.hpp"
#include "seqmc/mc.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

using namespace seqmc;
using namespace seqmc::mc;
using namespace seqmc::datagen;

namespace {

MonteCarloEnsemble hand_ensemble(std::vector<std::vector<int>> samples, int num_states) {
  MonteCarloEnsemble e;
  e.input = Covariate{{0.0}};
  e.horizon = static_cast<int>(samples.front().size());
  e.num_states = num_states;
  for (auto& s : samples) {
    e.samples.push_back(Sequence{std::move(s)});
  }
  return e;
}

MonteCarloEnsemble chain_ensemble(int start_age, int horizon, int samples,
                                  std::uint64_t seed) {
  auto model = default_health_transitions();
  return ensemble_from_sampler(
      Covariate{{static_cast<double>(start_age)}}, samples, horizon, 3, Rng(seed),
      [&model, start_age, horizon](Rng& rng) {
        return simulate_sequence(start_age, model, horizon, rng);
      });
}

}  // namespace

TEST_CASE("marginal estimates count fractions") {
  auto e = hand_ensemble({{1, 1}, {1, 2}, {2, 2}, {2, 3}}, 3);
  CHECK(estimate_marginal(e, 1, 1) == 0.5);
  CHECK(estimate_marginal(e, 1, 2) == 0.5);
  CHECK(estimate_marginal(e, 2, 3) == 0.25);

  auto all_same = hand_ensemble({{3, 3}, {3, 3}, {3, 3}}, 3);
  CHECK(estimate_marginal(all_same, 2, 3) == 1.0);

  auto dist = estimate_marginal_distribution(e, 1);
  CHECK(dist == ProbabilityVector{0.5, 0.5, 0.0});
  CHECK_THROWS_AS(estimate_marginal(e, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(estimate_marginal(e, 3, 1), std::invalid_argument);
  CHECK_THROWS_AS(estimate_marginal(e, 1, 4), std::invalid_argument);
}

TEST_CASE("marginal distribution sums to one for any ensemble") {
  auto e = chain_ensemble(62, 25, 4096, 100);  // power-of-two M: exact fractions
  for (int i = 1; i <= 25; ++i) {
    auto dist = estimate_marginal_distribution(e, i);
    double sum = 0.0;
    for (double v : dist) {
      sum += v;
    }
    CHECK(sum == 1.0);
  }
}

TEST_CASE("true-chain marginal estimate approaches the analytic value") {
  auto e = chain_ensemble(85, 5, 100000, 7);
  CHECK(std::abs(estimate_marginal(e, 2, kDead) - 0.08) <= 0.01);
}

TEST_CASE("conditional estimates and undefined results") {
  auto e = hand_ensemble({{1, 2}, {1, 2}, {2, 2}, {2, 3}}, 3);
  auto same = estimate_conditional(e, 1, 1, 1, 1);
  REQUIRE(same.value.has_value());
  CHECK(*same.value == 1.0);
  CHECK(same.denominator == 2);

  auto diff = estimate_conditional(e, 1, 2, 1, 1);
  CHECK(*diff.value == 0.0);

  auto cond = estimate_conditional(e, 2, 2, 1, 1);  // P(Y2=2 | Y1=1) = 2/2
  CHECK(*cond.value == 1.0);

  auto undefined = estimate_conditional(e, 1, 1, 2, 1);  // no sample has Y2=1
  CHECK_FALSE(undefined.value.has_value());
  CHECK(undefined.denominator == 0);
}

TEST_CASE("true-chain conditional matches the ill-row death mass") {
  auto e = chain_ensemble(85, 5, 100000, 8);
  auto est = estimate_conditional(e, 2, kDead, 1, kIll);
  REQUIRE(est.value.has_value());
  CHECK(std::abs(*est.value - 0.2) <= 0.01);
}

TEST_CASE("law of total probability holds as a counting identity") {
  auto e = chain_ensemble(70, 20, 5000, 9);
  for (auto [i, j] : std::vector<std::pair<int, int>>{{5, 2}, {2, 5}, {20, 1}}) {
    for (int a = 1; a <= 3; ++a) {
      double total = 0.0;
      for (int b = 1; b <= 3; ++b) {
        auto cond = estimate_conditional(e, i, a, j, b);
        if (cond.value) {
          total += *cond.value * estimate_marginal(e, j, b);
        }
      }
      CHECK(total == doctest::Approx(estimate_marginal(e, i, a)).epsilon(1e-12));
    }
  }
}

TEST_CASE("time_to_event finds the first hit") {
  EventSpec death{3};
  CHECK(*time_to_event(Sequence{{1, 2, 3}}, death) == 3);
  CHECK_FALSE(time_to_event(Sequence{{1, 1}}, death).has_value());
  CHECK(*time_to_event(Sequence{{3, 1, 1}}, death) == 1);
  CHECK(*time_to_event(Sequence{{1, 3, 3}}, death) == 2);
}

TEST_CASE("nearest-rank confidence intervals") {
  // all event times equal -> degenerate interval
  auto constant = hand_ensemble({{2, 3}, {2, 3}, {2, 3}}, 3);
  auto ci = estimate_ci(constant, EventSpec{3}, 0.9);
  CHECK(ci.lower == 2);
  CHECK(ci.upper == 2);

  // M=100 with event times 1..100 at alpha=0.9 -> [5, 95]
  std::vector<std::vector<int>> samples;
  for (int t = 1; t <= 100; ++t) {
    std::vector<int> s(100, 2);
    s[static_cast<std::size_t>(t - 1)] = 1;
    samples.push_back(std::move(s));
  }
  auto ladder = hand_ensemble(std::move(samples), 3);
  auto ci90 = estimate_ci(ladder, EventSpec{1}, 0.9);
  CHECK(ci90.lower == 5);
  CHECK(ci90.upper == 95);
  CHECK(ci90.level == 0.9);

  // nesting in alpha
  auto ci50 = estimate_ci(ladder, EventSpec{1}, 0.5);
  auto ci99 = estimate_ci(ladder, EventSpec{1}, 0.99);
  CHECK(ci50.lower >= ci90.lower);
  CHECK(ci50.upper <= ci90.upper);
  CHECK(ci99.lower <= ci90.lower);
  CHECK(ci99.upper >= ci90.upper);

  // censored samples sort as horizon+1
  auto censored = hand_ensemble({{1, 1}, {1, 1}, {1, 1}, {1, 3}}, 3);
  auto ci_c = estimate_ci(censored, EventSpec{3}, 0.9);
  CHECK(ci_c.upper == censored_sentinel(2));

  MonteCarloEnsemble empty;
  empty.horizon = 2;
  empty.num_states = 3;
  CHECK_THROWS_AS(estimate_ci(empty, EventSpec{3}, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(estimate_ci(constant, EventSpec{3}, 1.0), std::invalid_argument);
}

TEST_CASE("point estimates average event times") {
  auto sevens = hand_ensemble({{2, 2, 2, 2, 2, 2, 1}, {2, 2, 2, 2, 2, 2, 1}}, 3);
  CHECK(point_estimate_time(sevens, EventSpec{1}) == 7.0);

  auto mixed = hand_ensemble({{1, 2, 2, 2}, {2, 2, 1, 2}}, 3);
  // times 1 and 3
  CHECK(point_estimate_time(mixed, EventSpec{1}) == 2.0);

  // true-chain mean within 1% of the analytic expectation (sentinel mapping
  // applied on both sides)
  const int horizon = 30;
  auto e = chain_ensemble(85, horizon, 100000, 10);
  auto dist = analytic_event_time_distribution(85, default_health_transitions(), horizon,
                                               kDead);
  const double analytic_mean = dist.mean_with_sentinel();
  const double mc_mean = point_estimate_time(e, EventSpec{kDead});
  CHECK(std::abs(mc_mean - analytic_mean) <= 0.01 * analytic_mean);
}

TEST_CASE("estimator error shrinks at the Monte Carlo rate") {
  const int horizon = 30;
  auto marg = analytic_marginals(85, default_health_transitions(), horizon);
  std::vector<double> rms;
  for (int m : {1000, 10000, 100000}) {
    auto e = chain_ensemble(85, horizon, m, 11);
    double sq = 0.0;
    for (int i = 1; i <= horizon; ++i) {
      auto dist = estimate_marginal_distribution(e, i);
      for (int a = 0; a < 3; ++a) {
        const double d = dist[static_cast<std::size_t>(a)] -
                         marg[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(a)];
        sq += d * d;
      }
    }
    rms.push_back(std::sqrt(sq / (3.0 * horizon)));
  }
  CHECK(rms[1] < rms[0]);
  CHECK(rms[2] < rms[1]);
  // two decades of M: expected error ratio 10, allow wide slack
  CHECK(rms[0] / rms[2] >= 4.0);
  CHECK(rms[0] / rms[2] <= 25.0);
}

TEST_CASE("interval coverage on the true chain matches the analytic mass") {
  // The chain's yearly grid makes nearest-rank intervals over-cover: the
  // exact mass between the asymptotic rank quantiles is the right target,
  // not the nominal alpha (e.g. from age 85 the whole 8% step at t=2 sits
  // inside the lower bound, so nothing is cut below).
  const int horizon = 30;
  const double alpha = 0.9;
  auto model = default_health_transitions();

  auto dist = analytic_event_time_distribution(85, model, horizon, kDead);
  std::vector<double> cdf(static_cast<std::size_t>(horizon) + 2, 0.0);
  for (int t = 1; t <= horizon; ++t) {
    cdf[static_cast<std::size_t>(t)] =
        cdf[static_cast<std::size_t>(t - 1)] + dist.pmf[static_cast<std::size_t>(t - 1)];
  }
  cdf[static_cast<std::size_t>(horizon) + 1] = 1.0;
  int tlo = -1, thi = -1;
  for (int t = 1; t <= horizon + 1; ++t) {
    if (tlo < 0 && cdf[static_cast<std::size_t>(t)] >= (1.0 - alpha) / 2.0) {
      tlo = t;
    }
    if (thi < 0 && cdf[static_cast<std::size_t>(t)] >= (1.0 + alpha) / 2.0) {
      thi = t;
    }
  }
  const double expected =
      cdf[static_cast<std::size_t>(thi)] - cdf[static_cast<std::size_t>(tlo - 1)];
  CHECK(expected >= alpha);  // never below the nominal level

  Rng rng(12);
  long covered = 0;
  const int trials = 2000;
  for (int trial = 0; trial < trials; ++trial) {
    Rng stream = rng.split(static_cast<std::uint64_t>(trial));
    auto e = chain_ensemble(85, horizon, 400, stream.next_u64());
    auto ci = estimate_ci(e, EventSpec{kDead}, alpha);
    Rng truth_rng = stream.split(1);
    auto truth = simulate_sequence(85, model, horizon, truth_rng);
    auto t = time_to_event(truth, EventSpec{kDead});
    const int tv = t ? *t : censored_sentinel(horizon);
    if (ci.lower <= tv && tv <= ci.upper) {
      ++covered;
    }
  }
  const double coverage = static_cast<double>(covered) / trials;
  CHECK(std::abs(coverage - expected) <= 0.025);
}

TEST_CASE("ensemble dumps round-trip") {
  auto e = chain_ensemble(85, 12, 40, 15);
  seqmc_test::TempDir dir("ensdump");
  const auto path = dir / "ensemble.txt";
  write_ensemble_dump(path, e, 987654321u);
  auto dump = read_ensemble_dump(path);
  CHECK(dump.seed == 987654321u);
  CHECK(dump.ensemble.input.values == e.input.values);
  CHECK(dump.ensemble.horizon == e.horizon);
  CHECK(dump.ensemble.num_states == e.num_states);
  REQUIRE(dump.ensemble.size() == e.size());
  for (int m = 0; m < e.size(); ++m) {
    CHECK(dump.ensemble.samples[static_cast<std::size_t>(m)].entries ==
          e.samples[static_cast<std::size_t>(m)].entries);
  }
  // estimates computed from the reread ensemble are identical
  CHECK(estimate_marginal(dump.ensemble, 3, kIll) == estimate_marginal(e, 3, kIll));
  const auto rewrite = dir / "ensemble2.txt";
  write_ensemble_dump(rewrite, dump.ensemble, dump.seed);
  CHECK(seqmc_test::read_file(path) == seqmc_test::read_file(rewrite));
}

TEST_CASE("ensemble sampling is reproducible and order-insensitive") {
  auto a = chain_ensemble(85, 10, 64, 13);
  auto b = chain_ensemble(85, 10, 64, 13);
  REQUIRE(a.size() == b.size());
  for (int m = 0; m < a.size(); ++m) {
    CHECK(a.samples[static_cast<std::size_t>(m)].entries ==
          b.samples[static_cast<std::size_t>(m)].entries);
  }

  // estimators are symmetric in the samples
  auto shuffled = a;
  Rng perm(14);
  perm.shuffle(shuffled.samples);
  for (int i = 1; i <= 10; ++i) {
    for (int s = 1; s <= 3; ++s) {
      CHECK(estimate_marginal(a, i, s) == estimate_marginal(shuffled, i, s));
    }
  }
  auto ci_a = estimate_ci(a, EventSpec{kDead}, 0.9);
  auto ci_s = estimate_ci(shuffled, EventSpec{kDead}, 0.9);
  CHECK(ci_a.lower == ci_s.lower);
  CHECK(ci_a.upper == ci_s.upper);
}
