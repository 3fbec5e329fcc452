#include "seqmc/pipeline.hpp"

#include <stdexcept>

#include "seqmc/mc.hpp"
#include "seqmc/parallel.hpp"

namespace seqmc::pipeline {

namespace {

constexpr std::size_t kItemChunks = 16;

struct ItemOutputs {
  std::vector<ProbabilityVector> marginals;  // per entry
  mc::ConfidenceInterval interval;
  double point_estimate = 0.0;
};

// Builds the per-item predictions either from simulator ensembles or from a
// supplied exact predictor, then assembles the shared metric report.
EvaluationReport assemble_report(
    const LabeledDataset& data, const EvalOptions& opts,
    const std::function<ItemOutputs(std::size_t, const LabeledItem&)>& per_item) {
  if (data.items.empty()) {
    throw std::invalid_argument("evaluate: empty dataset slice");
  }
  const int horizon = data.horizon;
  const int c = data.alphabet.num_states;

  std::vector<ItemOutputs> outputs(data.items.size());
  parallel_chunks(data.items.size(), kItemChunks,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
                    for (std::size_t k = begin; k < end; ++k) {
                      outputs[k] = per_item(k, data.items[k]);
                    }
                  });

  EvaluationReport report;
  report.entries.reserve(static_cast<std::size_t>(horizon));
  report.reliability.reserve(static_cast<std::size_t>(horizon));

  std::vector<std::optional<double>> eces, aucs, ces, bss;
  for (int i = 1; i <= horizon; ++i) {
    metrics::PredictionSet set;
    set.num_states = c;
    set.rows.reserve(data.items.size());
    for (std::size_t k = 0; k < data.items.size(); ++k) {
      set.rows.push_back({outputs[k].marginals[static_cast<std::size_t>(i - 1)],
                          data.items[k].states.at(i)});
    }
    EntryMetrics em;
    em.entry = i;
    em.n = static_cast<int>(set.rows.size());
    em.ece = metrics::entry_ece(set, opts.bins);
    auto auc = metrics::macro_auc(set);
    em.auc = auc.value;
    em.auc_excluded_classes = auc.excluded_classes;
    em.ce = metrics::cross_entropy(set);
    auto bs = metrics::brier(set);
    em.bs = bs.value;
    em.bs_excluded_classes = bs.excluded_classes;
    report.entries.push_back(em);
    report.reliability.push_back(metrics::reliability_bins(set, opts.bins));

    eces.push_back(em.ece);
    aucs.push_back(em.auc);
    ces.push_back(em.ce);
    bss.push_back(em.bs);
  }

  report.summary.ece = metrics::sequence_level(eces).value;
  auto auc_agg = metrics::sequence_level(aucs);
  report.summary.auc = auc_agg.value;
  report.summary.auc_excluded_entries = auc_agg.excluded;
  report.summary.ce = metrics::sequence_level(ces).value;
  report.summary.bs = metrics::sequence_level(bss).value;

  const mc::EventSpec event{opts.event_state};
  std::vector<mc::ConfidenceInterval> intervals;
  std::vector<double> points;
  std::vector<std::optional<int>> truths;
  intervals.reserve(data.items.size());
  for (std::size_t k = 0; k < data.items.size(); ++k) {
    intervals.push_back(outputs[k].interval);
    points.push_back(outputs[k].point_estimate);
    truths.push_back(mc::time_to_event(data.items[k].states, event));
  }
  auto cov = metrics::coverage_probability(intervals, truths);
  report.summary.coverage = cov.value;
  report.summary.censored_truths = cov.excluded;
  report.summary.relative_width = metrics::relative_ci_width(intervals, truths).value;
  report.summary.relative_mae = metrics::relative_mae(points, truths).value;
  return report;
}

}  // namespace

EvaluationReport evaluate_simulator(const sim::SimulatorParams& params,
                                    const LabeledDataset& data, const EvalOptions& opts) {
  const Rng master(opts.seed);
  const mc::EventSpec event{opts.event_state};
  return assemble_report(
      data, opts, [&](std::size_t k, const LabeledItem& item) {
        ItemOutputs out;
        auto ensemble = mc::simulate_ensemble(params, item.input, opts.samples,
                                              data.horizon, master.split(k));
        out.marginals.reserve(static_cast<std::size_t>(data.horizon));
        for (int i = 1; i <= data.horizon; ++i) {
          out.marginals.push_back(mc::estimate_marginal_distribution(ensemble, i));
        }
        out.interval = mc::estimate_ci(ensemble, event, opts.alpha);
        out.point_estimate = mc::point_estimate_time(ensemble, event);
        return out;
      });
}

EvaluationReport evaluate_oracle(const datagen::TransitionModel& model,
                                 const LabeledDataset& data, const EvalOptions& opts) {
  const Rng master(opts.seed);
  const mc::EventSpec event{opts.event_state};
  return assemble_report(
      data, opts, [&](std::size_t k, const LabeledItem& item) {
        ItemOutputs out;
        const int age = static_cast<int>(item.input.values.at(0));
        out.marginals = datagen::analytic_marginals(age, model, data.horizon);
        auto ensemble = mc::ensemble_from_sampler(
            item.input, opts.samples, data.horizon, data.alphabet.num_states,
            master.split(k), [&](Rng& rng) {
              return datagen::simulate_sequence(age, model, data.horizon, rng);
            });
        out.interval = mc::estimate_ci(ensemble, event, opts.alpha);
        out.point_estimate = mc::point_estimate_time(ensemble, event);
        return out;
      });
}

double validation_marginal_ece(const sim::SimulatorParams& params,
                               const LabeledDataset& data, const EvalOptions& opts) {
  auto report = evaluate_simulator(params, data, opts);
  return report.summary.ece.value();
}

}  // namespace seqmc::pipeline
