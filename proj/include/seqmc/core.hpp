#ifndef SEQMC_CORE_HPP
#define SEQMC_CORE_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace seqmc {

/// Discrete state space {1..c}, optionally with human-readable names.
struct StateAlphabet {
  int num_states = 0;
  std::vector<std::string> labels;  // empty, or exactly num_states entries

  bool has_labels() const { return !labels.empty(); }
  /// Throws std::invalid_argument if num_states < 2 or labels are mismatched.
  void require_valid() const;
};

/// Fixed-length vector of 1-based state indices.
struct Sequence {
  std::vector<int> entries;

  int length() const { return static_cast<int>(entries.size()); }
  /// State at 1-based entry index i.
  int at(int i) const { return entries[static_cast<std::size_t>(i - 1)]; }
};

/// Real-valued input features (for the health data, a single age in years).
struct Covariate {
  std::vector<double> values;
};

// Pre-softmax scores and normalized class probabilities, both of size c.
using LogitVector = std::vector<double>;
using ProbabilityVector = std::vector<double>;

struct LabeledItem {
  Covariate input;
  Sequence states;
};

/// Covariate/sequence pairs sharing one alphabet and horizon.
struct LabeledDataset {
  StateAlphabet alphabet;
  int horizon = 0;
  std::vector<LabeledItem> items;

  std::size_t size() const { return items.size(); }
  /// Throws std::invalid_argument on the first item violating the invariants.
  void require_valid() const;
};

/// Numerically safe softmax (max-subtraction). Throws std::invalid_argument
/// on empty or non-finite input.
ProbabilityVector softmax(std::span<const double> logits);

/// True iff entries are in [0,1] and sum to 1 within `tol`.
bool is_probability_vector(std::span<const double> p, double tol = 1e-9);

struct ValidationResult {
  bool ok = true;
  std::string message;

  static ValidationResult success() { return {}; }
  static ValidationResult failure(std::string msg) { return {false, std::move(msg)}; }
};

/// Checks length and per-entry range; the message names the first violation.
ValidationResult validate_sequence(const Sequence& s, const StateAlphabet& alphabet,
                                   int horizon);

}  // namespace seqmc

#endif
