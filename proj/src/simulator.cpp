#include "seqmc/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "seqmc/parallel.hpp"

namespace seqmc::sim {

namespace {

constexpr std::size_t kGradChunks = 16;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y += A * x, A row-major [rows x cols]
inline void matvec_acc(const double* a, const double* x, int rows, int cols, double* y) {
  for (int r = 0; r < rows; ++r) {
    const double* row = a + static_cast<std::size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) {
      acc += row[c] * x[c];
    }
    y[r] += acc;
  }
}

// y += A^T * x, A row-major [rows x cols], x has `rows` entries, y has `cols`
inline void matvec_t_acc(const double* a, const double* x, int rows, int cols, double* y) {
  for (int r = 0; r < rows; ++r) {
    const double* row = a + static_cast<std::size_t>(r) * cols;
    const double xv = x[r];
    for (int c = 0; c < cols; ++c) {
      y[c] += row[c] * xv;
    }
  }
}

// A += x * y^T, A row-major [rows x cols]
inline void outer_acc(const double* x, const double* y, int rows, int cols, double* a) {
  for (int r = 0; r < rows; ++r) {
    double* row = a + static_cast<std::size_t>(r) * cols;
    const double xv = x[r];
    for (int c = 0; c < cols; ++c) {
      row[c] += xv * y[c];
    }
  }
}

// Per-thread buffers for one item's forward pass and its reverse sweep.
struct Workspace {
  // caches over the whole sequence
  std::vector<double> hs;        // (horizon+1) x H, hs[0] = h0
  std::vector<double> r, u, g, mg;  // horizon x H
  std::vector<double> z, p;      // horizon x c
  std::vector<int> tokens;       // horizon (input token per step)
  // scratch
  std::vector<double> gates;     // 3H (n + m + bias accumulation)
  std::vector<double> mbuf;      // 3H (wh * h, kept separate for the candidate gate)
  std::vector<double> xn;        // normalized covariate
  std::vector<double> dh, dh_prev, de;
  std::vector<double> dar, dau, dag, dam;  // H each; dam unused rows folded below
  std::vector<double> dz;

  void resize(const ModelShape& s, int horizon) {
    const int H = s.hidden;
    hs.assign(static_cast<std::size_t>(horizon + 1) * H, 0.0);
    r.assign(static_cast<std::size_t>(horizon) * H, 0.0);
    u.assign(static_cast<std::size_t>(horizon) * H, 0.0);
    g.assign(static_cast<std::size_t>(horizon) * H, 0.0);
    mg.assign(static_cast<std::size_t>(horizon) * H, 0.0);
    z.assign(static_cast<std::size_t>(horizon) * s.num_states, 0.0);
    p.assign(static_cast<std::size_t>(horizon) * s.num_states, 0.0);
    tokens.assign(static_cast<std::size_t>(horizon), 0);
    gates.assign(static_cast<std::size_t>(3 * H), 0.0);
    mbuf.assign(static_cast<std::size_t>(3 * H), 0.0);
    xn.assign(static_cast<std::size_t>(s.covariate_dim), 0.0);
    dh.assign(static_cast<std::size_t>(H), 0.0);
    dh_prev.assign(static_cast<std::size_t>(H), 0.0);
    de.assign(static_cast<std::size_t>(s.embed), 0.0);
    dar.assign(static_cast<std::size_t>(H), 0.0);
    dau.assign(static_cast<std::size_t>(H), 0.0);
    dag.assign(static_cast<std::size_t>(H), 0.0);
    dam.assign(static_cast<std::size_t>(H), 0.0);
    dz.assign(static_cast<std::size_t>(s.num_states), 0.0);
  }
};

void normalize_covariate(const SimulatorParams& P, const Covariate& x, double* out) {
  const int d = P.shape().covariate_dim;
  if (static_cast<int>(x.values.size()) != d) {
    throw std::invalid_argument("covariate dimension mismatch");
  }
  for (int j = 0; j < d; ++j) {
    double mean = j < static_cast<int>(P.norm_mean.size()) ? P.norm_mean[j] : 0.0;
    double scale = j < static_cast<int>(P.norm_scale.size()) ? P.norm_scale[j] : 1.0;
    out[j] = (x.values[static_cast<std::size_t>(j)] - mean) * scale;
  }
}

void encode_into(const SimulatorParams& P, const double* xn, double* h0) {
  const int H = P.shape().hidden;
  const int D = P.shape().covariate_dim;
  const double* w = P.flat().data() + P.off_enc_w();
  const double* b = P.flat().data() + P.off_enc_b();
  std::copy(b, b + H, h0);
  matvec_acc(w, xn, H, D, h0);
  for (int k = 0; k < H; ++k) {
    h0[k] = std::tanh(h0[k]);
  }
}

// One gated step. Writes h_out and z_out; optionally records the gate values
// needed by the backward pass.
void gru_step(const SimulatorParams& P, const double* h_prev, int token, double* h_out,
              double* z_out, Workspace& w, double* cr, double* cu, double* cg,
              double* cmg) {
  const ModelShape& s = P.shape();
  const int H = s.hidden;
  const int E = s.embed;
  const int c = s.num_states;
  const double* flat = P.flat().data();
  const double* e = flat + P.off_emb() + static_cast<std::size_t>(token) * E;

  double* n = w.gates.data();
  double* m = w.mbuf.data();
  const double* gb = flat + P.off_gb();
  std::copy(gb, gb + 3 * H, n);
  matvec_acc(flat + P.off_wx(), e, 3 * H, E, n);
  std::fill(m, m + 3 * H, 0.0);
  matvec_acc(flat + P.off_wh(), h_prev, 3 * H, H, m);

  for (int k = 0; k < H; ++k) {
    const double rv = sigmoid(n[k] + m[k]);
    const double uv = sigmoid(n[H + k] + m[H + k]);
    const double gv = std::tanh(n[2 * H + k] + rv * m[2 * H + k]);
    h_out[k] = (1.0 - uv) * h_prev[k] + uv * gv;
    if (cr != nullptr) {
      cr[k] = rv;
      cu[k] = uv;
      cg[k] = gv;
      cmg[k] = m[2 * H + k];
    }
  }

  const double* hw = flat + P.off_head_w();
  const double* hb = flat + P.off_head_b();
  std::copy(hb, hb + c, z_out);
  matvec_acc(hw, h_out, c, H, z_out);
}

// -log softmax(z)[y] via log-sum-exp, plus softmax written to p.
double nll_and_softmax(const double* z, int c, int y, double* p) {
  double zmax = z[0];
  for (int a = 1; a < c; ++a) {
    zmax = std::max(zmax, z[a]);
  }
  double sum = 0.0;
  for (int a = 0; a < c; ++a) {
    p[a] = std::exp(z[a] - zmax);
    sum += p[a];
  }
  for (int a = 0; a < c; ++a) {
    p[a] /= sum;
  }
  return std::log(sum) + zmax - z[y - 1];
}

// Forward pass with caches; returns (total loss, cross-entropy part).
std::pair<double, double> forward_item(const SimulatorParams& P, const LabeledItem& item,
                                       const LambdaSchedule& schedule, Workspace& w) {
  const ModelShape& s = P.shape();
  const int H = s.hidden;
  const int c = s.num_states;
  const int horizon = item.states.length();

  normalize_covariate(P, item.input, w.xn.data());
  encode_into(P, w.xn.data(), w.hs.data());

  double ce = 0.0;
  double reg = 0.0;
  int token = 0;
  for (int i = 1; i <= horizon; ++i) {
    const std::size_t si = static_cast<std::size_t>(i - 1);
    w.tokens[si] = token;
    double* h_prev = w.hs.data() + si * H;
    double* h_out = w.hs.data() + (si + 1) * H;
    double* z = w.z.data() + si * c;
    gru_step(P, h_prev, token, h_out, z, w, w.r.data() + si * H, w.u.data() + si * H,
             w.g.data() + si * H, w.mg.data() + si * H);
    const int y = item.states.at(i);
    ce += nll_and_softmax(z, c, y, w.p.data() + si * c);
    const double lambda = schedule.coefficients[si];
    if (lambda != 0.0) {
      double sq = 0.0;
      for (int a = 0; a < c; ++a) {
        sq += z[a] * z[a];
      }
      reg += lambda * std::sqrt(sq);
    }
    token = y;
  }
  return {ce + reg, ce};
}

// Reverse sweep accumulating into grad (layout of SimulatorParams::flat()).
void backward_item(const SimulatorParams& P, const LabeledItem& item,
                   const LambdaSchedule& schedule, Workspace& w, double* grad) {
  const ModelShape& s = P.shape();
  const int H = s.hidden;
  const int E = s.embed;
  const int c = s.num_states;
  const int D = s.covariate_dim;
  const int horizon = item.states.length();
  const double* flat = P.flat().data();

  std::fill(w.dh_prev.begin(), w.dh_prev.end(), 0.0);
  for (int i = horizon; i >= 1; --i) {
    const std::size_t si = static_cast<std::size_t>(i - 1);
    const double* h_prev = w.hs.data() + si * H;
    const double* h_out = w.hs.data() + (si + 1) * H;
    const double* z = w.z.data() + si * c;
    const double* p = w.p.data() + si * c;
    const double* r = w.r.data() + si * H;
    const double* u = w.u.data() + si * H;
    const double* g = w.g.data() + si * H;
    const double* mg = w.mg.data() + si * H;
    const int y = item.states.at(i);
    const int token = w.tokens[si];

    // d loss / d z
    double* dz = w.dz.data();
    for (int a = 0; a < c; ++a) {
      dz[a] = p[a] - (a == y - 1 ? 1.0 : 0.0);
    }
    const double lambda = schedule.coefficients[si];
    if (lambda != 0.0) {
      double sq = 0.0;
      for (int a = 0; a < c; ++a) {
        sq += z[a] * z[a];
      }
      const double norm = std::sqrt(sq);
      if (norm > 0.0) {
        for (int a = 0; a < c; ++a) {
          dz[a] += lambda * z[a] / norm;
        }
      }
    }

    outer_acc(dz, h_out, c, H, grad + P.off_head_w());
    for (int a = 0; a < c; ++a) {
      grad[P.off_head_b() + static_cast<std::size_t>(a)] += dz[a];
    }

    double* dh = w.dh.data();
    std::copy(w.dh_prev.begin(), w.dh_prev.end(), dh);
    matvec_t_acc(flat + P.off_head_w(), dz, c, H, dh);

    // h_out = (1-u) h_prev + u g
    double* dar = w.dar.data();
    double* dau = w.dau.data();
    double* dag = w.dag.data();
    double* dmg = w.dam.data();
    double* dh_prev = w.dh_prev.data();
    for (int k = 0; k < H; ++k) {
      const double du = dh[k] * (g[k] - h_prev[k]);
      const double dg = dh[k] * u[k];
      dh_prev[k] = dh[k] * (1.0 - u[k]);
      dag[k] = dg * (1.0 - g[k] * g[k]);
      const double dr = dag[k] * mg[k];
      dar[k] = dr * r[k] * (1.0 - r[k]);
      dau[k] = du * u[k] * (1.0 - u[k]);
      dmg[k] = dag[k] * r[k];
    }

    double* dgb = grad + P.off_gb();
    for (int k = 0; k < H; ++k) {
      dgb[k] += dar[k];
      dgb[H + k] += dau[k];
      dgb[2 * H + k] += dag[k];
    }

    const double* e = flat + P.off_emb() + static_cast<std::size_t>(token) * E;
    double* dwx = grad + P.off_wx();
    double* dwh = grad + P.off_wh();
    std::fill(w.de.begin(), w.de.end(), 0.0);
    // gate rows: [reset; update; candidate]; the candidate's input-side
    // coefficient is dag, its recurrent-side coefficient is dmg.
    outer_acc(dar, e, H, E, dwx);
    outer_acc(dau, e, H, E, dwx + static_cast<std::size_t>(H) * E);
    outer_acc(dag, e, H, E, dwx + 2 * static_cast<std::size_t>(H) * E);
    matvec_t_acc(flat + P.off_wx(), dar, H, E, w.de.data());
    matvec_t_acc(flat + P.off_wx() + static_cast<std::size_t>(H) * E, dau, H, E,
                 w.de.data());
    matvec_t_acc(flat + P.off_wx() + 2 * static_cast<std::size_t>(H) * E, dag, H, E,
                 w.de.data());

    outer_acc(dar, h_prev, H, H, dwh);
    outer_acc(dau, h_prev, H, H, dwh + static_cast<std::size_t>(H) * H);
    outer_acc(dmg, h_prev, H, H, dwh + 2 * static_cast<std::size_t>(H) * H);
    matvec_t_acc(flat + P.off_wh(), dar, H, H, dh_prev);
    matvec_t_acc(flat + P.off_wh() + static_cast<std::size_t>(H) * H, dau, H, H, dh_prev);
    matvec_t_acc(flat + P.off_wh() + 2 * static_cast<std::size_t>(H) * H, dmg, H, H,
                 dh_prev);

    double* demb = grad + P.off_emb() + static_cast<std::size_t>(token) * E;
    for (int j = 0; j < E; ++j) {
      demb[j] += w.de[static_cast<std::size_t>(j)];
    }
  }

  // encoder: h0 = tanh(enc_w xn + enc_b)
  const double* h0 = w.hs.data();
  double* da0 = w.dh.data();
  for (int k = 0; k < H; ++k) {
    da0[k] = w.dh_prev[static_cast<std::size_t>(k)] * (1.0 - h0[k] * h0[k]);
  }
  outer_acc(da0, w.xn.data(), H, D, grad + P.off_enc_w());
  for (int k = 0; k < H; ++k) {
    grad[P.off_enc_b() + static_cast<std::size_t>(k)] += da0[k];
  }
}

LambdaSchedule effective_schedule(const LambdaSchedule& schedule, int horizon) {
  if (schedule.coefficients.empty()) {
    return LambdaSchedule::zeros(horizon);
  }
  LambdaSchedule s = schedule;
  s.require_valid(horizon);
  return s;
}

}  // namespace

void ModelShape::require_valid() const {
  if (covariate_dim < 1 || hidden < 1 || embed < 1 || num_states < 2) {
    throw std::invalid_argument("ModelShape: dimensions must be positive (>=2 states)");
  }
}

SimulatorParams::SimulatorParams(const ModelShape& shape) : shape_(shape) {
  shape.require_valid();
  const int H = shape.hidden;
  const int E = shape.embed;
  const int c = shape.num_states;
  const int D = shape.covariate_dim;
  std::size_t off = 0;
  off_enc_w_ = off;
  off += static_cast<std::size_t>(H) * D;
  off_enc_b_ = off;
  off += static_cast<std::size_t>(H);
  off_emb_ = off;
  off += static_cast<std::size_t>(c + 1) * E;
  off_wx_ = off;
  off += static_cast<std::size_t>(3 * H) * E;
  off_wh_ = off;
  off += static_cast<std::size_t>(3 * H) * H;
  off_gb_ = off;
  off += static_cast<std::size_t>(3 * H);
  off_head_w_ = off;
  off += static_cast<std::size_t>(c) * H;
  off_head_b_ = off;
  off += static_cast<std::size_t>(c);
  flat_.assign(off, 0.0);
  norm_mean.assign(static_cast<std::size_t>(D), 0.0);
  norm_scale.assign(static_cast<std::size_t>(D), 1.0);
}

SimulatorParams SimulatorParams::random_init(const ModelShape& shape, Rng& rng) {
  SimulatorParams p(shape);
  const int H = shape.hidden;
  const int E = shape.embed;
  const int c = shape.num_states;
  const int D = shape.covariate_dim;
  auto fill = [&rng, &p](std::size_t off, std::size_t count, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t k = 0; k < count; ++k) {
      p.flat_[off + k] = (rng.next_double() * 2.0 - 1.0) * bound;
    }
  };
  fill(p.off_enc_w_, static_cast<std::size_t>(H) * D, D);
  fill(p.off_emb_, static_cast<std::size_t>(c + 1) * E, E);
  fill(p.off_wx_, static_cast<std::size_t>(3 * H) * E, E);
  fill(p.off_wh_, static_cast<std::size_t>(3 * H) * H, H);
  fill(p.off_head_w_, static_cast<std::size_t>(c) * H, H);
  return p;
}

std::span<const double> SimulatorParams::embedding(int token) const {
  if (token < 0 || token > shape_.num_states) {
    throw std::invalid_argument("embedding token outside 0..c");
  }
  return view(off_emb_ + static_cast<std::size_t>(token) * shape_.embed, shape_.embed);
}

bool SimulatorParams::all_finite() const {
  for (double v : flat_) {
    if (!std::isfinite(v)) {
      return false;
    }
  }
  return true;
}

LambdaSchedule LambdaSchedule::zeros(int horizon) {
  return {std::vector<double>(static_cast<std::size_t>(horizon), 0.0)};
}

LambdaSchedule LambdaSchedule::constant(int horizon, double value) {
  return {std::vector<double>(static_cast<std::size_t>(horizon), value)};
}

bool LambdaSchedule::is_zero() const {
  return std::all_of(coefficients.begin(), coefficients.end(),
                     [](double v) { return v == 0.0; });
}

void LambdaSchedule::require_valid(int horizon) const {
  if (length() != horizon) {
    throw std::invalid_argument("LambdaSchedule: length " + std::to_string(length()) +
                                " does not match horizon " + std::to_string(horizon));
  }
  for (double v : coefficients) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("LambdaSchedule: coefficients must be finite and >= 0");
    }
  }
}

void write_schedule_json(const std::filesystem::path& path, const LambdaSchedule& schedule) {
  nlohmann::json j;
  j["lambda"] = schedule.coefficients;
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  out << j.dump(2) << '\n';
}

LambdaSchedule read_schedule_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  nlohmann::json j = nlohmann::json::parse(in);
  return {j.at("lambda").get<std::vector<double>>()};
}

void TrainConfig::require_valid() const {
  if (epochs < 1 || batch_size < 1 || !(learning_rate > 0.0)) {
    throw std::invalid_argument("TrainConfig: epochs, batch size and rate must be positive");
  }
  if (hidden < 1 || embed < 1) {
    throw std::invalid_argument("TrainConfig: hidden and embed must be positive");
  }
}

std::vector<double> encode(const SimulatorParams& params, const Covariate& x) {
  std::vector<double> xn(static_cast<std::size_t>(params.shape().covariate_dim));
  normalize_covariate(params, x, xn.data());
  std::vector<double> h0(static_cast<std::size_t>(params.shape().hidden));
  encode_into(params, xn.data(), h0.data());
  return h0;
}

StepResult step(const SimulatorParams& params, std::span<const double> h_prev, int y_prev) {
  const ModelShape& s = params.shape();
  if (static_cast<int>(h_prev.size()) != s.hidden) {
    throw std::invalid_argument("step: hidden state size mismatch");
  }
  if (y_prev < 0 || y_prev > s.num_states) {
    throw std::invalid_argument("step: previous state outside 0..c");
  }
  Workspace w;
  w.resize(s, 1);
  StepResult out;
  out.hidden.assign(static_cast<std::size_t>(s.hidden), 0.0);
  out.logits.assign(static_cast<std::size_t>(s.num_states), 0.0);
  gru_step(params, h_prev.data(), y_prev, out.hidden.data(), out.logits.data(), w,
           nullptr, nullptr, nullptr, nullptr);
  return out;
}

std::vector<LogitVector> forward_teacher_forced(const SimulatorParams& params,
                                                const Covariate& x, const Sequence& y) {
  const ModelShape& s = params.shape();
  const int horizon = y.length();
  Workspace w;
  w.resize(s, 1);
  std::vector<double> h(static_cast<std::size_t>(s.hidden));
  std::vector<double> h_next(static_cast<std::size_t>(s.hidden));
  normalize_covariate(params, x, w.xn.data());
  encode_into(params, w.xn.data(), h.data());

  std::vector<LogitVector> out;
  out.reserve(static_cast<std::size_t>(horizon));
  int token = 0;
  for (int i = 1; i <= horizon; ++i) {
    LogitVector z(static_cast<std::size_t>(s.num_states));
    gru_step(params, h.data(), token, h_next.data(), z.data(), w, nullptr, nullptr,
             nullptr, nullptr);
    std::swap(h, h_next);
    out.push_back(std::move(z));
    token = y.at(i);
    if (token < 1 || token > s.num_states) {
      throw std::invalid_argument("forward_teacher_forced: state outside alphabet");
    }
  }
  return out;
}

Sequence sample_sequence(const SimulatorParams& params, const Covariate& x, int horizon,
                         Rng& rng) {
  const ModelShape& s = params.shape();
  Workspace w;
  w.resize(s, 1);
  std::vector<double> h(static_cast<std::size_t>(s.hidden));
  std::vector<double> h_next(static_cast<std::size_t>(s.hidden));
  std::vector<double> z(static_cast<std::size_t>(s.num_states));
  std::vector<double> p(static_cast<std::size_t>(s.num_states));
  normalize_covariate(params, x, w.xn.data());
  encode_into(params, w.xn.data(), h.data());

  Sequence out;
  out.entries.reserve(static_cast<std::size_t>(horizon));
  int token = 0;
  for (int i = 1; i <= horizon; ++i) {
    gru_step(params, h.data(), token, h_next.data(), z.data(), w, nullptr, nullptr,
             nullptr, nullptr);
    std::swap(h, h_next);
    double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t a = 0; a < z.size(); ++a) {
      p[a] = std::exp(z[a] - zmax);
      sum += p[a];
    }
    for (double& v : p) {
      v /= sum;
    }
    token = rng.sample_categorical(p) + 1;
    out.entries.push_back(token);
  }
  return out;
}

LossBreakdown loss(const SimulatorParams& params, const LabeledDataset& data,
                   std::span<const int> indices, const LambdaSchedule& schedule) {
  if (indices.empty()) {
    throw std::invalid_argument("loss: empty batch");
  }
  const LambdaSchedule sched = effective_schedule(schedule, data.horizon);
  std::vector<double> totals(kGradChunks, 0.0);
  std::vector<double> ces(kGradChunks, 0.0);
  parallel_chunks(indices.size(), kGradChunks,
                  [&](std::size_t chunk, std::size_t begin, std::size_t end) {
                    Workspace w;
                    w.resize(params.shape(), data.horizon);
                    for (std::size_t k = begin; k < end; ++k) {
                      const auto& item =
                          data.items[static_cast<std::size_t>(indices[k])];
                      auto [total, ce] = forward_item(params, item, sched, w);
                      totals[chunk] += total;
                      ces[chunk] += ce;
                    }
                  });
  LossBreakdown out;
  out.total = std::accumulate(totals.begin(), totals.end(), 0.0) /
              static_cast<double>(indices.size());
  out.cross_entropy = std::accumulate(ces.begin(), ces.end(), 0.0) /
                      static_cast<double>(indices.size());
  return out;
}

LossAndGradients loss_and_gradients(const SimulatorParams& params,
                                    const LabeledDataset& data,
                                    std::span<const int> indices,
                                    const LambdaSchedule& schedule) {
  if (indices.empty()) {
    throw std::invalid_argument("loss_and_gradients: empty batch");
  }
  const LambdaSchedule sched = effective_schedule(schedule, data.horizon);
  const std::size_t n_weights = params.num_weights();

  std::vector<std::vector<double>> grads(kGradChunks);
  std::vector<double> totals(kGradChunks, 0.0);
  std::vector<double> ces(kGradChunks, 0.0);
  parallel_chunks(indices.size(), kGradChunks,
                  [&](std::size_t chunk, std::size_t begin, std::size_t end) {
                    grads[chunk].assign(n_weights, 0.0);
                    Workspace w;
                    w.resize(params.shape(), data.horizon);
                    for (std::size_t k = begin; k < end; ++k) {
                      const auto& item =
                          data.items[static_cast<std::size_t>(indices[k])];
                      auto [total, ce] = forward_item(params, item, sched, w);
                      totals[chunk] += total;
                      ces[chunk] += ce;
                      backward_item(params, item, sched, w, grads[chunk].data());
                    }
                  });

  LossAndGradients out;
  out.gradients.assign(n_weights, 0.0);
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (std::size_t chunk = 0; chunk < kGradChunks; ++chunk) {
    if (grads[chunk].empty()) {
      continue;
    }
    for (std::size_t k = 0; k < n_weights; ++k) {
      out.gradients[k] += grads[chunk][k];
    }
    out.value.total += totals[chunk];
    out.value.cross_entropy += ces[chunk];
  }
  for (double& gv : out.gradients) {
    gv *= inv;
  }
  out.value.total *= inv;
  out.value.cross_entropy *= inv;
  return out;
}

SimulatorParams train(const LabeledDataset& train_data, const TrainConfig& cfg,
                      const EpochHook& on_epoch) {
  cfg.require_valid();
  if (train_data.items.empty()) {
    throw std::invalid_argument("train: empty dataset");
  }
  train_data.require_valid();
  const LambdaSchedule sched = effective_schedule(cfg.schedule, train_data.horizon);

  ModelShape shape;
  shape.covariate_dim = static_cast<int>(train_data.items.front().input.values.size());
  shape.hidden = cfg.hidden;
  shape.embed = cfg.embed;
  shape.num_states = train_data.alphabet.num_states;

  Rng root(cfg.seed);
  Rng init_rng = root.split(0);
  SimulatorParams params = SimulatorParams::random_init(shape, init_rng);

  // covariate normalization from the training set
  const int D = shape.covariate_dim;
  const double n = static_cast<double>(train_data.items.size());
  for (int j = 0; j < D; ++j) {
    double mean = 0.0;
    for (const auto& item : train_data.items) {
      mean += item.input.values[static_cast<std::size_t>(j)];
    }
    mean /= n;
    double var = 0.0;
    for (const auto& item : train_data.items) {
      const double d = item.input.values[static_cast<std::size_t>(j)] - mean;
      var += d * d;
    }
    var /= n;
    params.norm_mean[static_cast<std::size_t>(j)] = mean;
    params.norm_scale[static_cast<std::size_t>(j)] =
        var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
  }

  std::vector<double> m(params.num_weights(), 0.0);
  std::vector<double> v(params.num_weights(), 0.0);
  long t = 0;

  std::vector<int> order(train_data.items.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng = root.split(1000 + static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double epoch_total = 0.0;
    double epoch_ce = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len =
          std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      auto lg = loss_and_gradients(params, train_data,
                                   std::span<const int>(order).subspan(start, len), sched);
      if (!std::isfinite(lg.value.total)) {
        throw DivergenceError("training loss became non-finite at epoch " +
                              std::to_string(epoch) +
                              "; try a smaller learning rate or batch size");
      }
      epoch_total += lg.value.total * static_cast<double>(len);
      epoch_ce += lg.value.cross_entropy * static_cast<double>(len);

      ++t;
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
      double* w = params.flat().data();
      for (std::size_t k = 0; k < params.num_weights(); ++k) {
        const double gk = lg.gradients[k];
        m[k] = cfg.adam_beta1 * m[k] + (1.0 - cfg.adam_beta1) * gk;
        v[k] = cfg.adam_beta2 * v[k] + (1.0 - cfg.adam_beta2) * gk * gk;
        const double mhat = m[k] / bc1;
        const double vhat = v[k] / bc2;
        w[k] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
      }
    }

    if (on_epoch) {
      EpochStats stats;
      stats.epoch = epoch;
      stats.train.total = epoch_total / n;
      stats.train.cross_entropy = epoch_ce / n;
      on_epoch(stats, params);
    }
  }
  return params;
}

namespace {

void put_u64_le(std::string& buf, std::uint64_t bits) {
  for (int i = 0; i < 8; ++i) {
    buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  }
  return bits;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const SimulatorParams& p = ckpt.params;
  nlohmann::json j;
  j["format"] = "seqmc-checkpoint-v1";
  j["shape"] = {{"covariate_dim", p.shape().covariate_dim},
                {"hidden", p.shape().hidden},
                {"embed", p.shape().embed},
                {"num_states", p.shape().num_states}};
  j["alphabet"] = {{"num_states", ckpt.alphabet.num_states},
                   {"labels", ckpt.alphabet.labels}};
  j["horizon"] = ckpt.horizon;
  j["config"] = {{"epochs", ckpt.config.epochs},
                 {"batch_size", ckpt.config.batch_size},
                 {"learning_rate", ckpt.config.learning_rate},
                 {"adam_beta1", ckpt.config.adam_beta1},
                 {"adam_beta2", ckpt.config.adam_beta2},
                 {"adam_epsilon", ckpt.config.adam_epsilon},
                 {"seed", ckpt.config.seed},
                 {"hidden", ckpt.config.hidden},
                 {"embed", ckpt.config.embed},
                 {"schedule", ckpt.config.schedule.coefficients}};
  j["weights"] = p.num_weights();
  j["norm_dims"] = p.norm_mean.size();

  std::string payload;
  payload.reserve((p.num_weights() + 2 * p.norm_mean.size()) * 8);
  for (double wv : p.flat()) {
    put_u64_le(payload, std::bit_cast<std::uint64_t>(wv));
  }
  for (double wv : p.norm_mean) {
    put_u64_le(payload, std::bit_cast<std::uint64_t>(wv));
  }
  for (double wv : p.norm_scale) {
    put_u64_le(payload, std::bit_cast<std::uint64_t>(wv));
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  out << j.dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  std::string header;
  if (!std::getline(in, header)) {
    throw std::runtime_error("checkpoint truncated: " + path.string());
  }
  nlohmann::json j = nlohmann::json::parse(header);
  if (j.at("format").get<std::string>() != "seqmc-checkpoint-v1") {
    throw std::runtime_error("unknown checkpoint format in " + path.string());
  }

  Checkpoint ckpt;
  ModelShape shape;
  shape.covariate_dim = j.at("shape").at("covariate_dim").get<int>();
  shape.hidden = j.at("shape").at("hidden").get<int>();
  shape.embed = j.at("shape").at("embed").get<int>();
  shape.num_states = j.at("shape").at("num_states").get<int>();
  ckpt.params = SimulatorParams(shape);
  ckpt.alphabet.num_states = j.at("alphabet").at("num_states").get<int>();
  ckpt.alphabet.labels = j.at("alphabet").at("labels").get<std::vector<std::string>>();
  ckpt.horizon = j.at("horizon").get<int>();
  const auto& jc = j.at("config");
  ckpt.config.epochs = jc.at("epochs").get<int>();
  ckpt.config.batch_size = jc.at("batch_size").get<int>();
  ckpt.config.learning_rate = jc.at("learning_rate").get<double>();
  ckpt.config.adam_beta1 = jc.at("adam_beta1").get<double>();
  ckpt.config.adam_beta2 = jc.at("adam_beta2").get<double>();
  ckpt.config.adam_epsilon = jc.at("adam_epsilon").get<double>();
  ckpt.config.seed = jc.at("seed").get<std::uint64_t>();
  ckpt.config.hidden = jc.at("hidden").get<int>();
  ckpt.config.embed = jc.at("embed").get<int>();
  ckpt.config.schedule.coefficients = jc.at("schedule").get<std::vector<double>>();

  const std::size_t n_weights = j.at("weights").get<std::size_t>();
  const std::size_t norm_dims = j.at("norm_dims").get<std::size_t>();
  if (n_weights != ckpt.params.num_weights() ||
      norm_dims != ckpt.params.norm_mean.size()) {
    throw std::runtime_error("checkpoint payload does not match shape: " + path.string());
  }
  std::vector<unsigned char> payload((n_weights + 2 * norm_dims) * 8);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
    throw std::runtime_error("checkpoint truncated: " + path.string());
  }
  const unsigned char* cur = payload.data();
  for (std::size_t k = 0; k < n_weights; ++k, cur += 8) {
    ckpt.params.flat()[k] = std::bit_cast<double>(get_u64_le(cur));
  }
  for (std::size_t k = 0; k < norm_dims; ++k, cur += 8) {
    ckpt.params.norm_mean[k] = std::bit_cast<double>(get_u64_le(cur));
  }
  for (std::size_t k = 0; k < norm_dims; ++k, cur += 8) {
    ckpt.params.norm_scale[k] = std::bit_cast<double>(get_u64_le(cur));
  }
  return ckpt;
}

}  // namespace seqmc::sim
