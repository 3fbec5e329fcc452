#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "seqmc/metrics.hpp"
#include "seqmc/rng.hpp"

#include "oracles.hpp"

using namespace seqmc;
using namespace seqmc::metrics;

namespace {

PredictionSet make_set(int num_states, std::vector<std::pair<std::vector<double>, int>> rows) {
  PredictionSet p;
  p.num_states = num_states;
  for (auto& [probs, label] : rows) {
    p.rows.push_back({std::move(probs), label});
  }
  return p;
}

PredictionSet random_set(int num_states, int n, Rng& rng) {
  PredictionSet p;
  p.num_states = num_states;
  for (int k = 0; k < n; ++k) {
    std::vector<double> z(static_cast<std::size_t>(num_states));
    for (double& v : z) {
      v = rng.next_double() * 6.0 - 3.0;
    }
    auto probs = softmax(z);
    const int label = 1 + rng.sample_categorical(probs);
    p.rows.push_back({std::move(probs), label});
  }
  return p;
}

}  // namespace

TEST_CASE("ece: perfect predictions score zero") {
  auto p = make_set(3, {{{1.0, 0.0, 0.0}, 1}, {{0.0, 1.0, 0.0}, 2}, {{0.0, 0.0, 1.0}, 3}});
  CHECK(entry_ece(p, 10) == 0.0);
}

TEST_CASE("ece: single-bin hand value 0.1") {
  // 10 rows with confidence 0.9 each, 8 argmax hits, B=1 -> |0.8 - 0.9| = 0.1
  std::vector<std::pair<std::vector<double>, int>> rows;
  for (int k = 0; k < 10; ++k) {
    rows.push_back({{0.9, 0.1, 0.0}, k < 8 ? 1 : 2});
  }
  auto p = make_set(3, std::move(rows));
  CHECK(entry_ece(p, 1) == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("ece stays in [0,1] and equals the direct two-bin computation") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = random_set(3, 40 + static_cast<int>(rng.next_below(60)), rng);
    const double e10 = entry_ece(p, 10);
    CHECK(e10 >= 0.0);
    CHECK(e10 <= 1.0);
    // cross-check B=1 against the direct formula
    double conf = 0.0, acc = 0.0;
    for (const auto& row : p.rows) {
      auto it = std::max_element(row.probs.begin(), row.probs.end());
      conf += *it;
      acc += (static_cast<int>(it - row.probs.begin()) == row.label - 1) ? 1.0 : 0.0;
    }
    conf /= static_cast<double>(p.rows.size());
    acc /= static_cast<double>(p.rows.size());
    CHECK(entry_ece(p, 1) == doctest::Approx(std::abs(acc - conf)).epsilon(1e-12));
  }
}

TEST_CASE("reliability bins partition the rows by confidence quantiles") {
  Rng rng(22);
  auto p = random_set(3, 103, rng);
  auto rb = reliability_bins(p, 10);
  REQUIRE(rb.bins.size() == 10);
  int total = 0;
  for (const auto& bin : rb.bins) {
    total += bin.count;
    if (bin.count > 0) {
      CHECK(bin.mean_confidence >= 0.0);
      CHECK(bin.mean_confidence <= 1.0);
      CHECK(bin.accuracy >= 0.0);
      CHECK(bin.accuracy <= 1.0);
    }
  }
  CHECK(total == 103);

  // single bin reduces to (mean confidence, overall accuracy)
  auto one = reliability_bins(p, 1);
  REQUIRE(one.bins.size() == 1);
  CHECK(one.bins[0].count == 103);

  // ties on a boundary stay in the lower bin: all-equal confidences collapse
  // into one bin
  std::vector<std::pair<std::vector<double>, int>> rows;
  for (int k = 0; k < 20; ++k) {
    rows.push_back({{0.5, 0.5}, 1 + k % 2});
  }
  auto tied = make_set(2, std::move(rows));
  auto tied_bins = reliability_bins(tied, 4);
  CHECK(tied_bins.bins[0].count == 20);
  CHECK(tied_bins.bins[1].count == 0);
  CHECK(tied_bins.bins[2].count == 0);
  CHECK(tied_bins.bins[3].count == 0);
}

TEST_CASE("calibrated predictions put every bin near the diagonal") {
  Rng rng(23);
  auto p = random_set(4, 20000, rng);  // labels drawn from the predictions
  auto rb = reliability_bins(p, 10);
  for (const auto& bin : rb.bins) {
    if (bin.count > 100) {
      CHECK(std::abs(bin.accuracy - bin.mean_confidence) <= 0.05);
    }
  }
  CHECK(entry_ece(p, 10) <= 0.02);
}

TEST_CASE("macro AUC: separable, tied, and hand-checked cases") {
  auto separable = make_set(
      2, {{{0.9, 0.1}, 1}, {{0.8, 0.2}, 1}, {{0.3, 0.7}, 2}, {{0.1, 0.9}, 2}});
  auto r = macro_auc(separable);
  REQUIRE(r.value.has_value());
  CHECK(*r.value == 1.0);
  CHECK(r.excluded_classes == 0);

  auto ties = make_set(2, {{{0.5, 0.5}, 1}, {{0.5, 0.5}, 2}, {{0.5, 0.5}, 1}});
  CHECK(*macro_auc(ties).value == 0.5);

  // 4 rows, class-1 scores (0.9, 0.8 | 0.3, 0.1), first two positives
  auto hand = make_set(
      2, {{{0.9, 0.1}, 1}, {{0.8, 0.2}, 1}, {{0.3, 0.7}, 2}, {{0.1, 0.9}, 2}});
  CHECK(*macro_auc(hand).value == 1.0);

  auto one_class = make_set(2, {{{0.9, 0.1}, 1}, {{0.8, 0.2}, 1}});
  auto undefined = macro_auc(one_class);
  CHECK_FALSE(undefined.value.has_value());
  CHECK(undefined.excluded_classes == 2);
}

TEST_CASE("macro AUC equals brute-force pair counting") {
  Rng rng(24);
  for (int trial = 0; trial < 30; ++trial) {
    auto p = random_set(3, 60, rng);
    auto fast = macro_auc(p);
    REQUIRE(fast.value.has_value());
    double sum = 0.0;
    int defined = 0;
    for (int a = 1; a <= 3; ++a) {
      std::vector<double> scores;
      std::vector<int> positives;
      int pos = 0;
      for (const auto& row : p.rows) {
        scores.push_back(row.probs[static_cast<std::size_t>(a - 1)]);
        positives.push_back(row.label == a ? 1 : 0);
        pos += row.label == a ? 1 : 0;
      }
      if (pos == 0 || pos == static_cast<int>(p.rows.size())) {
        continue;
      }
      sum += seqmc_test::oracle_pairwise_auc(scores, positives);
      ++defined;
    }
    CHECK(*fast.value == doctest::Approx(sum / defined).epsilon(1e-12));
  }
}

TEST_CASE("macro AUC is invariant under strictly monotone score transforms") {
  Rng rng(25);
  auto p = random_set(3, 80, rng);
  auto base = macro_auc(p);
  PredictionSet warped = p;
  for (auto& row : warped.rows) {
    for (double& v : row.probs) {
      v = std::exp(3.0 * v) + v * v * v;  // strictly increasing on [0,1]
    }
  }
  auto after = macro_auc(warped);
  CHECK(*base.value == doctest::Approx(*after.value).epsilon(1e-14));
}

TEST_CASE("brier: perfect, uniform, and minimizing cases") {
  auto perfect = make_set(3, {{{1.0, 0.0, 0.0}, 1}, {{0.0, 0.0, 1.0}, 3},
                              {{0.0, 1.0, 0.0}, 2}});
  CHECK(*brier(perfect).value == 0.0);

  // uniform predictions at c=3: ((2/3)^2 + 2*(1/3)^2) / 3 = 2/9 per row
  auto uniform = make_set(3, {{{1.0 / 3, 1.0 / 3, 1.0 / 3}, 2},
                              {{1.0 / 3, 1.0 / 3, 1.0 / 3}, 1},
                              {{1.0 / 3, 1.0 / 3, 1.0 / 3}, 3}});
  CHECK(*brier(uniform).value == doctest::Approx(2.0 / 9.0).epsilon(1e-14));

  // the empirical class frequencies minimize the Brier score over constant
  // predictors (checked on a 0.01 simplex grid)
  Rng rng(26);
  auto data = random_set(3, 50, rng);
  std::array<double, 3> freq{0.0, 0.0, 0.0};
  for (const auto& row : data.rows) {
    freq[static_cast<std::size_t>(row.label - 1)] += 1.0 / static_cast<double>(data.rows.size());
  }
  auto constant_bs = [&data](const std::vector<double>& q) {
    PredictionSet p;
    p.num_states = 3;
    for (const auto& row : data.rows) {
      p.rows.push_back({q, row.label});
    }
    return *brier(p).value;
  };
  const double best = constant_bs({freq[0], freq[1], freq[2]});
  for (int i = 0; i <= 100; ++i) {
    for (int j = 0; j <= 100 - i; ++j) {
      const double q1 = i / 100.0;
      const double q2 = j / 100.0;
      CHECK(constant_bs({q1, q2, 1.0 - q1 - q2}) >= best - 1e-12);
    }
  }

  // decomposition: BS(q) = BS(freq) + ||q - freq||^2 / c
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> z(3);
    for (double& v : z) {
      v = rng.next_double() * 4.0 - 2.0;
    }
    auto q = softmax(z);
    double gap = 0.0;
    for (int a = 0; a < 3; ++a) {
      gap += (q[static_cast<std::size_t>(a)] - freq[static_cast<std::size_t>(a)]) *
             (q[static_cast<std::size_t>(a)] - freq[static_cast<std::size_t>(a)]);
    }
    CHECK(constant_bs(q) == doctest::Approx(best + gap / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("brier excludes absent classes with a count") {
  auto p = make_set(3, {{{0.5, 0.5, 0.0}, 1}, {{0.2, 0.8, 0.0}, 2}});
  auto r = brier(p);
  CHECK(r.excluded_classes == 1);  // dead never appears as a label
  // per class: class1 mse = ((0.5-1)^2 + 0.2^2)/2, class2 = ((0.5)^2+(0.8-1)^2)/2
  const double expected = (((0.25 + 0.04) / 2.0) + ((0.25 + 0.04) / 2.0)) / 2.0;
  CHECK(*r.value == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("cross entropy with clipping") {
  auto perfect = make_set(2, {{{1.0, 0.0}, 1}, {{0.0, 1.0}, 2}});
  CHECK(cross_entropy(perfect) == doctest::Approx(0.0).epsilon(1e-12));

  auto uniform = make_set(3, {{{1.0 / 3, 1.0 / 3, 1.0 / 3}, 1}});
  CHECK(cross_entropy(uniform) == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  auto zero_mass = make_set(2, {{{0.0, 1.0}, 1}});
  CHECK(cross_entropy(zero_mass) == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
  CHECK(std::isfinite(cross_entropy(zero_mass)));
}

TEST_CASE("sequence_level averages defined entries") {
  std::vector<std::optional<double>> constant{0.4, 0.4, 0.4};
  CHECK(*sequence_level(constant).value == doctest::Approx(0.4).epsilon(1e-15));

  std::vector<std::optional<double>> two{0.1, 0.3};
  CHECK(*sequence_level(two).value == doctest::Approx(0.2).epsilon(1e-15));

  std::vector<std::optional<double>> holey{0.1, std::nullopt, 0.3};
  auto agg = sequence_level(holey);
  CHECK(*agg.value == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(agg.excluded == 1);

  std::vector<std::optional<double>> none{std::nullopt, std::nullopt};
  CHECK_FALSE(sequence_level(none).value.has_value());
}

TEST_CASE("coverage probability counts containment") {
  std::vector<mc::ConfidenceInterval> wide{{1, 10, 0.9}, {1, 10, 0.9}};
  std::vector<std::optional<int>> truths{3, 10};
  CHECK(*coverage_probability(wide, truths).value == 1.0);

  std::vector<mc::ConfidenceInterval> miss{{4, 5, 0.9}, {1, 2, 0.9}};
  CHECK(*coverage_probability(miss, truths).value == 0.0);

  std::vector<mc::ConfidenceInterval> half{{1, 5, 0.9}, {1, 5, 0.9}};
  CHECK(*coverage_probability(half, truths).value == 0.5);

  // censored truths are excluded and counted
  std::vector<std::optional<int>> censored{3, std::nullopt};
  auto r = coverage_probability(half, censored);
  CHECK(*r.value == 1.0);
  CHECK(r.excluded == 1);

  // permutation invariance of paired data
  std::vector<mc::ConfidenceInterval> swapped{half[1], half[0]};
  std::vector<std::optional<int>> swapped_truths{truths[1], truths[0]};
  CHECK(*coverage_probability(swapped, swapped_truths).value ==
        *coverage_probability(half, truths).value);
}

TEST_CASE("relative CI width") {
  std::vector<mc::ConfidenceInterval> degenerate{{4, 4, 0.9}, {7, 7, 0.9}};
  std::vector<std::optional<int>> truths{5, 5};
  CHECK(*relative_ci_width(degenerate, truths).value == 0.0);

  // widths (2, 4), truths (3, 3): mean width 3 / mean truth 3 = 1
  std::vector<mc::ConfidenceInterval> mixed{{1, 3, 0.9}, {2, 6, 0.9}};
  std::vector<std::optional<int>> threes{3, 3};
  CHECK(*relative_ci_width(mixed, threes).value == doctest::Approx(1.0).epsilon(1e-15));

  std::vector<std::optional<int>> all_censored{std::nullopt, std::nullopt};
  CHECK_FALSE(relative_ci_width(mixed, all_censored).value.has_value());
}

TEST_CASE("relative MAE") {
  std::vector<double> exact{10.0, 10.0};
  std::vector<std::optional<int>> truths{10, 10};
  CHECK(*relative_mae(exact, truths).value == 0.0);

  std::vector<double> off{9.0, 11.0};
  CHECK(*relative_mae(off, truths).value == doctest::Approx(0.1).epsilon(1e-15));

  // scaling truths and estimates together leaves the value unchanged
  std::vector<double> scaled{27.0, 33.0};
  std::vector<std::optional<int>> scaled_truths{30, 30};
  CHECK(*relative_mae(scaled, scaled_truths).value ==
        doctest::Approx(0.1).epsilon(1e-12));
}
