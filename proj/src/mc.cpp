#include "seqmc/mc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace seqmc::mc {

namespace {

void require_entry(const MonteCarloEnsemble& e, int entry, int state) {
  if (entry < 1 || entry > e.horizon) {
    throw std::invalid_argument("entry index " + std::to_string(entry) +
                                " outside 1.." + std::to_string(e.horizon));
  }
  if (state < 1 || state > e.num_states) {
    throw std::invalid_argument("state " + std::to_string(state) + " outside 1.." +
                                std::to_string(e.num_states));
  }
}

std::vector<int> event_times_with_sentinel(const MonteCarloEnsemble& e,
                                           const EventSpec& event) {
  std::vector<int> times;
  times.reserve(e.samples.size());
  for (const auto& s : e.samples) {
    auto t = time_to_event(s, event);
    times.push_back(t ? *t : censored_sentinel(e.horizon));
  }
  return times;
}

}  // namespace

MonteCarloEnsemble simulate_ensemble(const sim::SimulatorParams& params,
                                     const Covariate& x, int samples, int horizon,
                                     const Rng& rng) {
  if (samples < 1) {
    throw std::invalid_argument("simulate_ensemble: need at least one sample");
  }
  MonteCarloEnsemble e;
  e.input = x;
  e.horizon = horizon;
  e.num_states = params.shape().num_states;
  e.samples.reserve(static_cast<std::size_t>(samples));
  for (int m = 0; m < samples; ++m) {
    Rng stream = rng.split(static_cast<std::uint64_t>(m));
    e.samples.push_back(sim::sample_sequence(params, x, horizon, stream));
  }
  return e;
}

MonteCarloEnsemble ensemble_from_sampler(const Covariate& x, int samples, int horizon,
                                         int num_states, const Rng& rng,
                                         const std::function<Sequence(Rng&)>& sampler) {
  if (samples < 1) {
    throw std::invalid_argument("ensemble_from_sampler: need at least one sample");
  }
  MonteCarloEnsemble e;
  e.input = x;
  e.horizon = horizon;
  e.num_states = num_states;
  e.samples.reserve(static_cast<std::size_t>(samples));
  for (int m = 0; m < samples; ++m) {
    Rng stream = rng.split(static_cast<std::uint64_t>(m));
    e.samples.push_back(sampler(stream));
  }
  return e;
}

double estimate_marginal(const MonteCarloEnsemble& e, int entry, int state) {
  require_entry(e, entry, state);
  long count = 0;
  for (const auto& s : e.samples) {
    if (s.at(entry) == state) {
      ++count;
    }
  }
  return static_cast<double>(count) / static_cast<double>(e.samples.size());
}

ProbabilityVector estimate_marginal_distribution(const MonteCarloEnsemble& e, int entry) {
  require_entry(e, entry, 1);
  std::vector<long> counts(static_cast<std::size_t>(e.num_states), 0);
  for (const auto& s : e.samples) {
    ++counts[static_cast<std::size_t>(s.at(entry) - 1)];
  }
  ProbabilityVector p(counts.size());
  for (std::size_t a = 0; a < counts.size(); ++a) {
    p[a] = static_cast<double>(counts[a]) / static_cast<double>(e.samples.size());
  }
  return p;
}

ConditionalEstimate estimate_conditional(const MonteCarloEnsemble& e, int entry_i,
                                         int state_a, int entry_j, int state_b) {
  require_entry(e, entry_i, state_a);
  require_entry(e, entry_j, state_b);
  long joint = 0;
  long cond = 0;
  for (const auto& s : e.samples) {
    if (s.at(entry_j) == state_b) {
      ++cond;
      if (s.at(entry_i) == state_a) {
        ++joint;
      }
    }
  }
  ConditionalEstimate out;
  out.denominator = static_cast<int>(cond);
  if (cond > 0) {
    out.value = static_cast<double>(joint) / static_cast<double>(cond);
  }
  return out;
}

std::optional<int> time_to_event(const Sequence& s, const EventSpec& event) {
  for (int i = 1; i <= s.length(); ++i) {
    if (s.at(i) == event.target_state) {
      return i;
    }
  }
  return std::nullopt;
}

ConfidenceInterval estimate_ci(const MonteCarloEnsemble& e, const EventSpec& event,
                               double alpha) {
  if (e.samples.empty()) {
    throw std::invalid_argument("estimate_ci: empty ensemble");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("estimate_ci: alpha must be in (0, 1)");
  }
  std::vector<int> times = event_times_with_sentinel(e, event);
  std::sort(times.begin(), times.end());
  const double m = static_cast<double>(times.size());
  auto nearest_rank = [&](double q) {
    // the epsilon keeps q*m from ceiling up when rounding lands it a hair
    // above an exact integer rank
    auto rank = static_cast<std::size_t>(std::ceil(q * m - 1e-9));
    rank = std::max<std::size_t>(rank, 1);
    rank = std::min(rank, times.size());
    return times[rank - 1];
  };
  ConfidenceInterval ci;
  ci.lower = nearest_rank((1.0 - alpha) / 2.0);
  ci.upper = nearest_rank((1.0 + alpha) / 2.0);
  ci.level = alpha;
  return ci;
}

double point_estimate_time(const MonteCarloEnsemble& e, const EventSpec& event) {
  if (e.samples.empty()) {
    throw std::invalid_argument("point_estimate_time: empty ensemble");
  }
  std::vector<int> times = event_times_with_sentinel(e, event);
  double sum = 0.0;
  for (int t : times) {
    sum += static_cast<double>(t);
  }
  return sum / static_cast<double>(times.size());
}

void write_ensemble_dump(const std::filesystem::path& path, const MonteCarloEnsemble& e,
                         std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  nlohmann::json header;
  header["input"] = e.input.values;
  header["samples"] = e.samples.size();
  header["horizon"] = e.horizon;
  header["num_states"] = e.num_states;
  header["seed"] = seed;
  out << header.dump() << '\n';
  for (const auto& s : e.samples) {
    for (int i = 0; i < s.length(); ++i) {
      if (i > 0) {
        out << ' ';
      }
      out << s.entries[static_cast<std::size_t>(i)];
    }
    out << '\n';
  }
}

EnsembleDump read_ensemble_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("ensemble dump truncated: " + path.string());
  }
  nlohmann::json header = nlohmann::json::parse(line);
  EnsembleDump dump;
  dump.ensemble.input.values = header.at("input").get<std::vector<double>>();
  dump.ensemble.horizon = header.at("horizon").get<int>();
  dump.ensemble.num_states = header.at("num_states").get<int>();
  dump.seed = header.at("seed").get<std::uint64_t>();
  const std::size_t expected = header.at("samples").get<std::size_t>();
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    Sequence s;
    std::istringstream ss(line);
    int state = 0;
    while (ss >> state) {
      s.entries.push_back(state);
    }
    if (s.length() != dump.ensemble.horizon) {
      throw std::runtime_error("ensemble dump sample length mismatch: " + path.string());
    }
    dump.ensemble.samples.push_back(std::move(s));
  }
  if (dump.ensemble.samples.size() != expected) {
    throw std::runtime_error("ensemble dump sample count mismatch: " + path.string());
  }
  return dump;
}

}  // namespace seqmc::mc
