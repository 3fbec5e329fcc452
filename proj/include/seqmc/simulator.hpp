#ifndef SEQMC_SIMULATOR_HPP
#define SEQMC_SIMULATOR_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "seqmc/core.hpp"
#include "seqmc/rng.hpp"

namespace seqmc::sim {

struct ModelShape {
  int covariate_dim = 1;
  int hidden = 32;  // H
  int embed = 8;    // E
  int num_states = 3;

  void require_valid() const;
};

/// Autoregressive simulator parameters: a tanh covariate encoder producing
/// h0, a learned embedding per previous state (row 0 is the start-of-sequence
/// token), a gated recurrent cell, and an affine head producing logits.
///
/// All trainable weights live in one flat vector so the optimizer, gradient
/// checks, and the checkpoint payload agree on a single layout:
///   enc_w[H x D] enc_b[H] emb[(c+1) x E]
///   wx[3H x E] wh[3H x H] gb[3H]   (gate order: reset, update, candidate)
///   head_w[c x H] head_b[c]
/// Covariate normalization (mean/scale) is stored alongside but not trained;
/// it re-parametrizes the encoder affine map for well-conditioned inputs.
class SimulatorParams {
 public:
  SimulatorParams() = default;
  explicit SimulatorParams(const ModelShape& shape);  // zero-initialized

  /// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per matrix, zero biases.
  static SimulatorParams random_init(const ModelShape& shape, Rng& rng);

  const ModelShape& shape() const { return shape_; }
  std::size_t num_weights() const { return flat_.size(); }
  std::span<double> flat() { return flat_; }
  std::span<const double> flat() const { return flat_; }

  std::span<const double> enc_w() const { return view(off_enc_w_, shape_.hidden * shape_.covariate_dim); }
  std::span<const double> enc_b() const { return view(off_enc_b_, shape_.hidden); }
  std::span<const double> embedding(int token) const;  // token 0..c
  std::span<const double> wx() const { return view(off_wx_, 3 * shape_.hidden * shape_.embed); }
  std::span<const double> wh() const { return view(off_wh_, 3 * shape_.hidden * shape_.hidden); }
  std::span<const double> gb() const { return view(off_gb_, 3 * shape_.hidden); }
  std::span<const double> head_w() const { return view(off_head_w_, shape_.num_states * shape_.hidden); }
  std::span<const double> head_b() const { return view(off_head_b_, shape_.num_states); }

  std::vector<double> norm_mean;   // per covariate dim
  std::vector<double> norm_scale;  // multiplicative, 1/std

  // Offsets into the flat vector (used by the backward pass).
  std::size_t off_enc_w() const { return off_enc_w_; }
  std::size_t off_enc_b() const { return off_enc_b_; }
  std::size_t off_emb() const { return off_emb_; }
  std::size_t off_wx() const { return off_wx_; }
  std::size_t off_wh() const { return off_wh_; }
  std::size_t off_gb() const { return off_gb_; }
  std::size_t off_head_w() const { return off_head_w_; }
  std::size_t off_head_b() const { return off_head_b_; }

  bool all_finite() const;

 private:
  std::span<const double> view(std::size_t off, int len) const {
    return std::span<const double>(flat_).subspan(off, static_cast<std::size_t>(len));
  }

  ModelShape shape_;
  std::vector<double> flat_;
  std::size_t off_enc_w_ = 0, off_enc_b_ = 0, off_emb_ = 0, off_wx_ = 0, off_wh_ = 0,
              off_gb_ = 0, off_head_w_ = 0, off_head_b_ = 0;
};

/// Per-entry regularization coefficients for the logit-norm penalty.
struct LambdaSchedule {
  std::vector<double> coefficients;

  static LambdaSchedule zeros(int horizon);
  static LambdaSchedule constant(int horizon, double value);
  int length() const { return static_cast<int>(coefficients.size()); }
  bool is_zero() const;
  void require_valid(int horizon) const;
};

void write_schedule_json(const std::filesystem::path& path, const LambdaSchedule& schedule);
LambdaSchedule read_schedule_json(const std::filesystem::path& path);

struct TrainConfig {
  int epochs = 50;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  int hidden = 32;
  int embed = 8;
  LambdaSchedule schedule;  // empty means unregularized

  void require_valid() const;
};

/// Training aborted because the loss left the reals.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// h0 from the covariate: tanh(enc_w * normalized(x) + enc_b).
std::vector<double> encode(const SimulatorParams& params, const Covariate& x);

struct StepResult {
  LogitVector logits;
  std::vector<double> hidden;
};

/// One recurrent step. y_prev is the previous state in 1..c, or 0 at the
/// first entry (start-of-sequence token).
StepResult step(const SimulatorParams& params, std::span<const double> h_prev, int y_prev);

/// Teacher-forced logits for every entry: the i-th vector is conditioned on
/// the ground-truth prefix y_1..y_{i-1}.
std::vector<LogitVector> forward_teacher_forced(const SimulatorParams& params,
                                                const Covariate& x, const Sequence& y);

/// Free-running sampling: entry i is drawn from the softmax of the step-i
/// logits conditioned on the previously sampled entries.
Sequence sample_sequence(const SimulatorParams& params, const Covariate& x, int horizon,
                         Rng& rng);

struct LossBreakdown {
  double total = 0.0;          // CE + logit-norm penalty, mean per item
  double cross_entropy = 0.0;  // mean per item
};

/// Mean over the batch of sum_i [-log p(y_i | ...) + lambda_i * ||z_i||_2].
LossBreakdown loss(const SimulatorParams& params, const LabeledDataset& data,
                   std::span<const int> indices, const LambdaSchedule& schedule);

struct LossAndGradients {
  LossBreakdown value;
  std::vector<double> gradients;  // same layout as SimulatorParams::flat()
};

/// Exact gradients via backpropagation through time. The gradient of the
/// ||z||_2 term uses subgradient 0 at z = 0.
LossAndGradients loss_and_gradients(const SimulatorParams& params,
                                    const LabeledDataset& data,
                                    std::span<const int> indices,
                                    const LambdaSchedule& schedule);

struct EpochStats {
  int epoch = 0;  // 1-based
  LossBreakdown train;
};

using EpochHook = std::function<void(const EpochStats&, const SimulatorParams&)>;

/// Mini-batch Adam over shuffled batches. Deterministic given cfg.seed;
/// throws DivergenceError if the loss becomes non-finite.
SimulatorParams train(const LabeledDataset& train_data, const TrainConfig& cfg,
                      const EpochHook& on_epoch = {});

// --- checkpoint ---------------------------------------------------------

struct Checkpoint {
  SimulatorParams params;
  StateAlphabet alphabet;
  int horizon = 0;
  TrainConfig config;
};

/// Single file: one JSON header line (shapes, alphabet, horizon, config,
/// payload length), then the weights as little-endian 64-bit floats.
/// Round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace seqmc::sim

#endif
