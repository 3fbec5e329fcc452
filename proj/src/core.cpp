#include "seqmc/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace seqmc {

void StateAlphabet::require_valid() const {
  if (num_states < 2) {
    throw std::invalid_argument("StateAlphabet: need at least 2 states, got " +
                                std::to_string(num_states));
  }
  if (!labels.empty() && static_cast<int>(labels.size()) != num_states) {
    throw std::invalid_argument("StateAlphabet: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(num_states) + " states");
  }
}

void LabeledDataset::require_valid() const {
  alphabet.require_valid();
  if (horizon < 1) {
    throw std::invalid_argument("LabeledDataset: horizon must be >= 1");
  }
  for (std::size_t k = 0; k < items.size(); ++k) {
    auto r = validate_sequence(items[k].states, alphabet, horizon);
    if (!r.ok) {
      throw std::invalid_argument("LabeledDataset: item " + std::to_string(k) + ": " +
                                  r.message);
    }
    for (double v : items[k].input.values) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("LabeledDataset: item " + std::to_string(k) +
                                    ": non-finite covariate");
      }
    }
  }
}

ProbabilityVector softmax(std::span<const double> logits) {
  if (logits.empty()) {
    throw std::invalid_argument("softmax: empty logit vector");
  }
  double max = logits[0];
  for (double z : logits) {
    if (!std::isfinite(z)) {
      throw std::invalid_argument("softmax: non-finite logit");
    }
    max = std::max(max, z);
  }
  ProbabilityVector p(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - max);
    sum += p[k];
  }
  for (double& v : p) {
    v /= sum;
  }
  return p;
}

bool is_probability_vector(std::span<const double> p, double tol) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) {
      return false;
    }
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

ValidationResult validate_sequence(const Sequence& s, const StateAlphabet& alphabet,
                                   int horizon) {
  if (s.length() != horizon) {
    return ValidationResult::failure("length " + std::to_string(s.length()) +
                                     " does not match horizon " + std::to_string(horizon));
  }
  for (int i = 0; i < s.length(); ++i) {
    int v = s.entries[static_cast<std::size_t>(i)];
    if (v < 1 || v > alphabet.num_states) {
      return ValidationResult::failure("state " + std::to_string(v) + " at index " +
                                       std::to_string(i) + " outside {1.." +
                                       std::to_string(alphabet.num_states) + "}");
    }
  }
  return ValidationResult::success();
}

}  // namespace seqmc
