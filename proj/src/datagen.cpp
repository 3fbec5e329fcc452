#include "seqmc/datagen.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace seqmc::datagen {

namespace {

constexpr double kRowSumTol = 1e-12;

}  // namespace

const std::array<double, 3>& TransitionModel::row(int state, int age) const {
  std::size_t band = 0;
  for (std::size_t b = 1; b < bands.size(); ++b) {
    if (age >= bands[b].min_age) {
      band = b;
    } else {
      break;
    }
  }
  return bands[band].rows[static_cast<std::size_t>(state - 1)];
}

void TransitionModel::require_valid() const {
  if (bands.empty() || bands.front().min_age != 0) {
    throw std::invalid_argument("TransitionModel: bands must start at age 0");
  }
  for (std::size_t b = 0; b < bands.size(); ++b) {
    if (b > 0 && bands[b].min_age <= bands[b - 1].min_age) {
      throw std::invalid_argument("TransitionModel: band ages must be increasing");
    }
    for (const auto& r : bands[b].rows) {
      double sum = 0.0;
      for (double p : r) {
        if (!(p >= 0.0 && p <= 1.0)) {
          throw std::invalid_argument("TransitionModel: entry outside [0,1]");
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowSumTol) {
        throw std::invalid_argument("TransitionModel: row does not sum to 1");
      }
    }
    const auto& dead = bands[b].rows[kDead - 1];
    if (dead[0] != 0.0 || dead[1] != 0.0 || dead[2] != 1.0) {
      throw std::invalid_argument("TransitionModel: dead must be absorbing");
    }
  }
}

TransitionModel default_health_transitions() {
  TransitionModel m;
  m.bands.push_back({0,
                     {{{1.0, 0.0, 0.0},
                       {0.0, 1.0, 0.0},
                       {0.0, 0.0, 1.0}}}});
  m.bands.push_back({40,
                     {{{0.9, 0.1, 0.0},
                       {0.1, 0.9, 0.0},
                       {0.0, 0.0, 1.0}}}});
  m.bands.push_back({81,
                     {{{0.6, 0.4, 0.0},
                       {0.1, 0.7, 0.2},
                       {0.0, 0.0, 1.0}}}});
  return m;
}

StateAlphabet health_alphabet() {
  return {3, {"healthy", "ill", "dead"}};
}

void GenerationConfig::require_valid() const {
  if (horizon < 1) {
    throw std::invalid_argument("GenerationConfig: horizon must be >= 1");
  }
  if (n < 1) {
    throw std::invalid_argument("GenerationConfig: n must be >= 1");
  }
  if (age_min < 0 || age_max < age_min) {
    throw std::invalid_argument("GenerationConfig: bad age range");
  }
}

Sequence simulate_sequence(int start_age, const TransitionModel& model, int horizon,
                           Rng& rng) {
  Sequence s;
  s.entries.reserve(static_cast<std::size_t>(horizon));
  int state = kHealthy;
  for (int i = 1; i <= horizon; ++i) {
    const auto& r = model.row(state, start_age + i);
    state = rng.sample_categorical(std::span<const double>(r.data(), r.size())) + 1;
    s.entries.push_back(state);
  }
  return s;
}

GeneratedData generate_dataset(const GenerationConfig& cfg, const TransitionModel& model) {
  cfg.require_valid();
  model.require_valid();

  GeneratedData out;
  out.dataset.alphabet = health_alphabet();
  out.dataset.horizon = cfg.horizon;
  out.dataset.items.reserve(static_cast<std::size_t>(cfg.n));

  Rng root(cfg.seed);
  const std::uint64_t age_span = static_cast<std::uint64_t>(cfg.age_max - cfg.age_min) + 1;
  for (int k = 0; k < cfg.n; ++k) {
    Rng item_rng = root.split(static_cast<std::uint64_t>(k));
    int age = cfg.age_min + static_cast<int>(item_rng.next_below(age_span));
    Sequence s = simulate_sequence(age, model, cfg.horizon, item_rng);
    out.dataset.items.push_back({Covariate{{static_cast<double>(age)}}, std::move(s)});
  }

  const int n_train = cfg.n * 7 / 10;
  const int n_val = cfg.n * 2 / 10;
  for (int k = 0; k < cfg.n; ++k) {
    if (k < n_train) {
      out.split.train.push_back(k);
    } else if (k < n_train + n_val) {
      out.split.val.push_back(k);
    } else {
      out.split.test.push_back(k);
    }
  }
  return out;
}

std::vector<ProbabilityVector> analytic_marginals(int start_age,
                                                  const TransitionModel& model,
                                                  int horizon) {
  std::vector<ProbabilityVector> out;
  out.reserve(static_cast<std::size_t>(horizon));
  std::array<double, 3> p{1.0, 0.0, 0.0};
  for (int i = 1; i <= horizon; ++i) {
    std::array<double, 3> next{0.0, 0.0, 0.0};
    for (int b = 0; b < 3; ++b) {
      const auto& r = model.row(b + 1, start_age + i);
      for (int a = 0; a < 3; ++a) {
        next[static_cast<std::size_t>(a)] +=
            p[static_cast<std::size_t>(b)] * r[static_cast<std::size_t>(a)];
      }
    }
    p = next;
    out.emplace_back(p.begin(), p.end());
  }
  return out;
}

double EventTimeDistribution::mean_with_sentinel() const {
  double mean = censored * static_cast<double>(pmf.size() + 1);
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    mean += pmf[i] * static_cast<double>(i + 1);
  }
  return mean;
}

EventTimeDistribution analytic_event_time_distribution(int start_age,
                                                       const TransitionModel& model,
                                                       int horizon, int event_state) {
  EventTimeDistribution dist;
  dist.pmf.resize(static_cast<std::size_t>(horizon), 0.0);
  // q = distribution over current state among paths that have not yet hit
  // the event.
  std::array<double, 3> q{0.0, 0.0, 0.0};
  q[static_cast<std::size_t>(kHealthy - 1)] = 1.0;
  for (int i = 1; i <= horizon; ++i) {
    std::array<double, 3> next{0.0, 0.0, 0.0};
    double hit = 0.0;
    for (int b = 0; b < 3; ++b) {
      const auto& r = model.row(b + 1, start_age + i);
      for (int a = 0; a < 3; ++a) {
        double mass = q[static_cast<std::size_t>(b)] * r[static_cast<std::size_t>(a)];
        if (a + 1 == event_state) {
          hit += mass;
        } else {
          next[static_cast<std::size_t>(a)] += mass;
        }
      }
    }
    dist.pmf[static_cast<std::size_t>(i - 1)] = hit;
    q = next;
  }
  dist.censored = q[0] + q[1] + q[2];
  return dist;
}

void write_dataset_jsonl(const std::filesystem::path& path, const LabeledDataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  for (const auto& item : data.items) {
    nlohmann::json j;
    if (item.input.values.size() == 1) {
      j["age"] = item.input.values[0];
    } else {
      j["age"] = item.input.values;
    }
    j["states"] = item.states.entries;
    out << j.dump() << '\n';
  }
}

LabeledDataset read_dataset_jsonl(const std::filesystem::path& path,
                                  const StateAlphabet& alphabet) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  LabeledDataset data;
  data.alphabet = alphabet;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    nlohmann::json j = nlohmann::json::parse(line);
    LabeledItem item;
    if (j.at("age").is_array()) {
      item.input.values = j.at("age").get<std::vector<double>>();
    } else {
      item.input.values = {j.at("age").get<double>()};
    }
    item.states.entries = j.at("states").get<std::vector<int>>();
    data.items.push_back(std::move(item));
  }
  if (!data.items.empty()) {
    data.horizon = data.items.front().states.length();
  }
  data.require_valid();
  return data;
}

void write_manifest_json(const std::filesystem::path& path, const SplitManifest& split) {
  nlohmann::json j;
  j["train"] = split.train;
  j["val"] = split.val;
  j["test"] = split.test;
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  out << j.dump(2) << '\n';
}

SplitManifest read_manifest_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  nlohmann::json j = nlohmann::json::parse(in);
  SplitManifest split;
  split.train = j.at("train").get<std::vector<int>>();
  split.val = j.at("val").get<std::vector<int>>();
  split.test = j.at("test").get<std::vector<int>>();
  return split;
}

LabeledDataset subset(const LabeledDataset& data, std::span<const int> indices) {
  LabeledDataset out;
  out.alphabet = data.alphabet;
  out.horizon = data.horizon;
  out.items.reserve(indices.size());
  for (int k : indices) {
    out.items.push_back(data.items.at(static_cast<std::size_t>(k)));
  }
  return out;
}

}  // namespace seqmc::datagen
