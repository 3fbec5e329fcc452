#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "seqmc/core.hpp"
#include "seqmc/rng.hpp"

using namespace seqmc;

TEST_CASE("softmax of equal logits is uniform") {
  auto p = softmax(std::vector<double>{0.0, 0.0, 0.0});
  for (double v : p) {
    CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  for (double t : {-7.5, 0.25, 1000.0}) {
    auto q = softmax(std::vector<double>{t, t, t});
    for (double v : q) {
      CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("softmax survives extreme logits") {
  auto p = softmax(std::vector<double>{1000.0, 0.0, 0.0});
  // high-precision reference: 1 / (1 + 2 e^-1000), e^-1000 underflows to 0
  CHECK(std::isfinite(p[0]));
  CHECK(std::isfinite(p[1]));
  CHECK(std::isfinite(p[2]));
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p[1] <= 1e-300);
  CHECK(is_probability_vector(p));
}

TEST_CASE("softmax rejects non-finite input") {
  CHECK_THROWS_AS(softmax(std::vector<double>{1.0, std::nan("")}), std::invalid_argument);
  CHECK_THROWS_AS(softmax(std::vector<double>{std::numeric_limits<double>::infinity(), 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(softmax(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("softmax properties on random logits") {
  Rng rng(20240501);
  for (int trial = 0; trial < 500; ++trial) {
    const int c = 2 + static_cast<int>(rng.next_below(6));
    std::vector<double> z(static_cast<std::size_t>(c));
    const double scale = std::pow(10.0, rng.next_double() * 6.0);  // up to 1e6
    for (double& v : z) {
      v = (rng.next_double() * 2.0 - 1.0) * scale;
    }
    auto p = softmax(z);
    double sum = 0.0;
    for (double v : p) {
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

    // shift invariance
    const double t = (rng.next_double() * 2.0 - 1.0) * scale;
    std::vector<double> shifted = z;
    for (double& v : shifted) {
      v += t;
    }
    auto q = softmax(shifted);
    for (std::size_t k = 0; k < p.size(); ++k) {
      CHECK(std::abs(p[k] - q[k]) <= 1e-12);
    }

    // argmax preservation when the max is unique
    std::size_t zmax = 0, pmax = 0;
    bool unique = true;
    for (std::size_t k = 1; k < p.size(); ++k) {
      if (z[k] > z[zmax]) {
        zmax = k;
      }
      if (p[k] > p[pmax]) {
        pmax = k;
      }
    }
    for (std::size_t k = 0; k < z.size(); ++k) {
      if (k != zmax && z[k] == z[zmax]) {
        unique = false;
      }
    }
    if (unique) {
      CHECK(zmax == pmax);
    }
  }
}

TEST_CASE("validate_sequence reports the first violation") {
  StateAlphabet abc{3, {}};
  CHECK(validate_sequence(Sequence{{1, 2, 3}}, abc, 3).ok);

  auto bad_state = validate_sequence(Sequence{{1, 4, 3}}, abc, 3);
  CHECK_FALSE(bad_state.ok);
  CHECK(bad_state.message.find("index 1") != std::string::npos);

  auto bad_length = validate_sequence(Sequence{{1, 2}}, abc, 3);
  CHECK_FALSE(bad_length.ok);
  CHECK(bad_length.message.find("length") != std::string::npos);
}

TEST_CASE("alphabet and dataset invariants") {
  StateAlphabet too_small{1, {}};
  CHECK_THROWS_AS(too_small.require_valid(), std::invalid_argument);
  StateAlphabet mismatched{3, {"a", "b"}};
  CHECK_THROWS_AS(mismatched.require_valid(), std::invalid_argument);
  StateAlphabet ok{2, {"a", "b"}};
  ok.require_valid();

  LabeledDataset data;
  data.alphabet = {2, {}};
  data.horizon = 2;
  data.items.push_back({Covariate{{1.0}}, Sequence{{1, 2}}});
  data.require_valid();
  data.items.push_back({Covariate{{1.0}}, Sequence{{1, 7}}});
  CHECK_THROWS_AS(data.require_valid(), std::invalid_argument);
}
