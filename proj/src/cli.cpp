#include "seqmc/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "seqmc/datagen.hpp"
#include "seqmc/format.hpp"
#include "seqmc/hypersearch.hpp"
#include "seqmc/mc.hpp"
#include "seqmc/pipeline.hpp"
#include "seqmc/simulator.hpp"

namespace seqmc::cli {

namespace {

namespace fs = std::filesystem;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void parse_args(CLI::App& app, std::vector<std::string> args) {
  std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
  app.parse(args);
}

std::optional<fs::path> prescan_config(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) {
        throw ConfigError("--config requires a path");
      }
      return fs::path(args[i + 1]);
    }
    if (args[i].rfind("--config=", 0) == 0) {
      return fs::path(args[i].substr(9));
    }
  }
  return std::nullopt;
}

nlohmann::json load_config_file(const std::optional<fs::path>& path) {
  if (!path) {
    return nlohmann::json::object();
  }
  std::ifstream in(*path);
  if (!in) {
    throw ConfigError("cannot read config file: " + path->string());
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("bad config file " + path->string() + ": " + e.what());
  }
}

template <typename T>
void overlay(const nlohmann::json& j, const char* key, T& value) {
  if (!j.contains(key)) {
    return;
  }
  try {
    value = j.at(key).get<T>();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

std::string default_out_dir() {
  if (const char* env = std::getenv("SEQMC_OUTPUT_DIR")) {
    return env;
  }
  return "";
}

fs::path ensure_out_dir(const std::string& out) {
  if (out.empty()) {
    throw ConfigError("--out is required (or set SEQMC_OUTPUT_DIR)");
  }
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw ConfigError("cannot create output directory " + dir.string() + ": " +
                      ec.message());
  }
  return dir;
}

void write_config_echo(const fs::path& dir, const nlohmann::json& j) {
  std::ofstream out(dir / "config.json", std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + (dir / "config.json").string());
  }
  out << j.dump(2) << '\n';
}

std::string opt_str(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) {
      continue;
    }
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("bad number in list: '" + tok + "'");
    }
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  for (double v : parse_double_list(csv)) {
    out.push_back(static_cast<int>(v));
  }
  return out;
}

struct LoadedData {
  LabeledDataset all;
  datagen::SplitManifest split;
};

LoadedData load_data_dir(const std::string& dir) {
  if (dir.empty()) {
    throw ConfigError("--data is required");
  }
  fs::path p(dir);
  LoadedData d;
  d.all = datagen::read_dataset_jsonl(p / "dataset.jsonl", datagen::health_alphabet());
  d.split = datagen::read_manifest_json(p / "splits.json");
  return d;
}

sim::LambdaSchedule parse_lambda_flag(const std::string& flag, int horizon) {
  if (flag.empty() || flag == "none") {
    return sim::LambdaSchedule::zeros(horizon);
  }
  if (flag.rfind("constant:", 0) == 0) {
    double v = 0.0;
    try {
      v = std::stod(flag.substr(9));
    } catch (const std::exception&) {
      throw ConfigError("bad value in --lambda " + flag);
    }
    if (v < 0.0) {
      throw ConfigError("--lambda constant must be >= 0");
    }
    return sim::LambdaSchedule::constant(horizon, v);
  }
  if (flag.rfind("schedule:", 0) == 0) {
    auto s = sim::read_schedule_json(flag.substr(9));
    s.require_valid(horizon);
    return s;
  }
  throw ConfigError("--lambda must be none, constant:<v>, or schedule:<path>");
}

void write_entry_metrics_csv(const fs::path& path, const pipeline::EvaluationReport& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << "entry,metric,value,n,excluded\n";
  for (const auto& em : r.entries) {
    out << em.entry << ",ece," << format_double(em.ece) << ',' << em.n << ",0\n";
    out << em.entry << ",auc," << opt_str(em.auc) << ',' << em.n << ','
        << em.auc_excluded_classes << '\n';
    out << em.entry << ",ce," << format_double(em.ce) << ',' << em.n << ",0\n";
    out << em.entry << ",bs," << opt_str(em.bs) << ',' << em.n << ','
        << em.bs_excluded_classes << '\n';
  }
}

void write_reliability_csv(const fs::path& path, const pipeline::EvaluationReport& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << "entry,bin,mean_confidence,accuracy,count\n";
  for (std::size_t e = 0; e < r.reliability.size(); ++e) {
    const auto& bins = r.reliability[e].bins;
    for (std::size_t b = 0; b < bins.size(); ++b) {
      out << (e + 1) << ',' << (b + 1) << ',';
      if (bins[b].count > 0) {
        out << format_double(bins[b].mean_confidence) << ','
            << format_double(bins[b].accuracy);
      } else {
        out << ',';
      }
      out << ',' << bins[b].count << '\n';
    }
  }
}

nlohmann::json summary_to_json(const pipeline::Summary& s) {
  nlohmann::json j;
  auto put = [&j](const char* key, const std::optional<double>& v) {
    if (v) {
      j[key] = *v;
    } else {
      j[key] = nullptr;
    }
  };
  put("ece", s.ece);
  put("auc", s.auc);
  put("ce", s.ce);
  put("bs", s.bs);
  put("coverage", s.coverage);
  put("relative_width", s.relative_width);
  put("relative_mae", s.relative_mae);
  j["auc_excluded_entries"] = s.auc_excluded_entries;
  j["censored_truths"] = s.censored_truths;
  return j;
}

void write_summary_json(const fs::path& path, const pipeline::Summary& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << summary_to_json(s).dump(2) << '\n';
}

void write_report(const fs::path& dir, const pipeline::EvaluationReport& report) {
  write_entry_metrics_csv(dir / "entry_metrics.csv", report);
  write_reliability_csv(dir / "reliability.csv", report);
  write_summary_json(dir / "summary.json", report.summary);
}

// --- generate -----------------------------------------------------------

int cmd_generate(std::vector<std::string> args) {
  auto file_cfg = load_config_file(prescan_config(args));
  std::string out = default_out_dir();
  std::string config_path;
  int n = 5000;
  int horizon = 100;
  std::uint64_t seed = 0;
  int age_min = 1;
  int age_max = 99;
  overlay(file_cfg, "out", out);
  overlay(file_cfg, "n", n);
  overlay(file_cfg, "horizon", horizon);
  overlay(file_cfg, "seed", seed);
  overlay(file_cfg, "age_min", age_min);
  overlay(file_cfg, "age_max", age_max);

  CLI::App app{"generate the synthetic health-trajectory dataset"};
  app.add_option("--out", out, "output directory");
  app.add_option("--n", n, "number of items");
  app.add_option("--horizon", horizon, "sequence length in years");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--age-min", age_min, "minimum starting age");
  app.add_option("--age-max", age_max, "maximum starting age");
  app.add_option("--config", config_path, "JSON config file; flags override its values");
  try {
    parse_args(app, std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  datagen::GenerationConfig gc;
  gc.n = n;
  gc.horizon = horizon;
  gc.seed = seed;
  gc.age_min = age_min;
  gc.age_max = age_max;

  auto generated = datagen::generate_dataset(gc, datagen::default_health_transitions());
  auto dir = ensure_out_dir(out);
  datagen::write_dataset_jsonl(dir / "dataset.jsonl", generated.dataset);
  datagen::write_manifest_json(dir / "splits.json", generated.split);
  write_config_echo(dir, {{"command", "generate"},
                          {"out", out},
                          {"n", n},
                          {"horizon", horizon},
                          {"seed", seed},
                          {"age_min", age_min},
                          {"age_max", age_max}});

  const mc::EventSpec death{datagen::kDead};
  double survival_sum = 0.0;
  long survived_count = 0;
  long censored = 0;
  for (const auto& item : generated.dataset.items) {
    auto t = mc::time_to_event(item.states, death);
    if (t) {
      survival_sum += static_cast<double>(*t);
      ++survived_count;
    } else {
      ++censored;
    }
  }
  std::cout << "n=" << n << '\n'
            << "split=" << generated.split.train.size() << '/'
            << generated.split.val.size() << '/' << generated.split.test.size() << '\n';
  if (survived_count > 0) {
    std::cout << "mean_survival_years="
              << format_double(survival_sum / static_cast<double>(survived_count))
              << " (censored=" << censored << ")\n";
  } else {
    std::cout << "mean_survival_years=undefined (censored=" << censored << ")\n";
  }
  std::cout << "wrote " << (dir / "dataset.jsonl").string() << '\n';
  return 0;
}

// --- train ----------------------------------------------------------------

struct TrainFlags {
  std::string data;
  std::string out = default_out_dir();
  std::string lambda = "none";
  int epochs = 50;
  int batch = 128;
  double lr = 1e-3;
  int hidden = 32;
  int embed = 8;
  std::uint64_t seed = 0;
  int eval_every = 1;
  int eval_samples = 100;
  int eval_items = 200;
  int bins = 10;
  double alpha = 0.9;
  int event_state = datagen::kDead;
};

void add_train_flags(CLI::App& app, TrainFlags& f, std::string& config_path) {
  app.add_option("--data", f.data, "directory with dataset.jsonl and splits.json");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--lambda", f.lambda, "none | constant:<v> | schedule:<path>");
  app.add_option("--epochs", f.epochs);
  app.add_option("--batch", f.batch);
  app.add_option("--lr", f.lr);
  app.add_option("--hidden", f.hidden);
  app.add_option("--embed", f.embed);
  app.add_option("--seed", f.seed);
  app.add_option("--eval-every", f.eval_every, "validation metrics every k epochs");
  app.add_option("--eval-samples", f.eval_samples, "Monte Carlo samples per item");
  app.add_option("--eval-items", f.eval_items, "validation items used per evaluation");
  app.add_option("--bins", f.bins);
  app.add_option("--alpha", f.alpha);
  app.add_option("--event-state", f.event_state);
  app.add_option("--config", config_path, "JSON config file; flags override its values");
}

void overlay_train_flags(const nlohmann::json& j, TrainFlags& f) {
  overlay(j, "data", f.data);
  overlay(j, "out", f.out);
  overlay(j, "lambda", f.lambda);
  overlay(j, "epochs", f.epochs);
  overlay(j, "batch", f.batch);
  overlay(j, "lr", f.lr);
  overlay(j, "hidden", f.hidden);
  overlay(j, "embed", f.embed);
  overlay(j, "seed", f.seed);
  overlay(j, "eval_every", f.eval_every);
  overlay(j, "eval_samples", f.eval_samples);
  overlay(j, "eval_items", f.eval_items);
  overlay(j, "bins", f.bins);
  overlay(j, "alpha", f.alpha);
  overlay(j, "event_state", f.event_state);
}

nlohmann::json train_flags_json(const TrainFlags& f) {
  return {{"data", f.data},         {"out", f.out},
          {"lambda", f.lambda},     {"epochs", f.epochs},
          {"batch", f.batch},       {"lr", f.lr},
          {"hidden", f.hidden},     {"embed", f.embed},
          {"seed", f.seed},         {"eval_every", f.eval_every},
          {"eval_samples", f.eval_samples}, {"eval_items", f.eval_items},
          {"bins", f.bins},         {"alpha", f.alpha},
          {"event_state", f.event_state}};
}

int cmd_train(std::vector<std::string> args) {
  auto file_cfg = load_config_file(prescan_config(args));
  TrainFlags f;
  std::string config_path;
  overlay_train_flags(file_cfg, f);

  CLI::App app{"train the autoregressive simulator"};
  add_train_flags(app, f, config_path);
  try {
    parse_args(app, std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  auto data = load_data_dir(f.data);
  auto train_ds = datagen::subset(data.all, data.split.train);
  auto val_ds = datagen::subset(data.all, data.split.val);
  if (train_ds.items.empty()) {
    throw ConfigError("training split is empty");
  }

  sim::TrainConfig tc;
  tc.epochs = f.epochs;
  tc.batch_size = f.batch;
  tc.learning_rate = f.lr;
  tc.hidden = f.hidden;
  tc.embed = f.embed;
  tc.seed = f.seed;
  tc.schedule = parse_lambda_flag(f.lambda, data.all.horizon);

  auto dir = ensure_out_dir(f.out);
  auto echo = train_flags_json(f);
  echo["command"] = "train";
  write_config_echo(dir, echo);

  LabeledDataset val_eval = val_ds;
  if (f.eval_items > 0 && static_cast<int>(val_eval.items.size()) > f.eval_items) {
    val_eval.items.resize(static_cast<std::size_t>(f.eval_items));
  }

  std::ofstream epochs_csv(dir / "epochs.csv", std::ios::binary);
  if (!epochs_csv) {
    throw std::runtime_error("cannot write " + (dir / "epochs.csv").string());
  }
  epochs_csv << "epoch,train_loss,train_ce,val_ece,val_auc,val_ce,val_bs,"
                "val_coverage,val_rel_width,val_rel_mae\n";

  Rng eval_seeds(f.seed);
  auto hook = [&](const sim::EpochStats& stats, const sim::SimulatorParams& params) {
    epochs_csv << stats.epoch << ',' << format_double(stats.train.total) << ','
               << format_double(stats.train.cross_entropy);
    const bool do_eval = f.eval_every > 0 && stats.epoch % f.eval_every == 0 &&
                         !val_eval.items.empty();
    if (do_eval) {
      pipeline::EvalOptions opts;
      opts.samples = f.eval_samples;
      opts.bins = f.bins;
      opts.alpha = f.alpha;
      opts.event_state = f.event_state;
      opts.seed = eval_seeds.split(70000 + static_cast<std::uint64_t>(stats.epoch)).next_u64();
      auto report = pipeline::evaluate_simulator(params, val_eval, opts);
      epochs_csv << ',' << opt_str(report.summary.ece) << ','
                 << opt_str(report.summary.auc) << ',' << opt_str(report.summary.ce)
                 << ',' << opt_str(report.summary.bs) << ','
                 << opt_str(report.summary.coverage) << ','
                 << opt_str(report.summary.relative_width) << ','
                 << opt_str(report.summary.relative_mae) << '\n';
    } else {
      epochs_csv << ",,,,,,,\n";
    }
  };

  auto params = sim::train(train_ds, tc, hook);

  sim::Checkpoint ckpt;
  ckpt.params = std::move(params);
  ckpt.alphabet = data.all.alphabet;
  ckpt.horizon = data.all.horizon;
  ckpt.config = tc;
  sim::save_checkpoint(dir / "checkpoint.bin", ckpt);
  std::cout << "wrote " << (dir / "checkpoint.bin").string() << '\n';
  return 0;
}

// --- estimate ---------------------------------------------------------------

int cmd_estimate(std::vector<std::string> args) {
  auto file_cfg = load_config_file(prescan_config(args));
  std::string checkpoint;
  std::string out = default_out_dir();
  std::string config_path;
  std::vector<double> ages;
  int samples = 100;
  double alpha = 0.9;
  std::uint64_t seed = 0;
  int event_state = datagen::kDead;
  int cond_entry = 0;
  int cond_state = 0;
  bool dump_ensembles = false;
  overlay(file_cfg, "checkpoint", checkpoint);
  overlay(file_cfg, "out", out);
  overlay(file_cfg, "ages", ages);
  overlay(file_cfg, "samples", samples);
  overlay(file_cfg, "alpha", alpha);
  overlay(file_cfg, "seed", seed);
  overlay(file_cfg, "event_state", event_state);
  overlay(file_cfg, "cond_entry", cond_entry);
  overlay(file_cfg, "cond_state", cond_state);
  overlay(file_cfg, "dump_ensembles", dump_ensembles);

  CLI::App app{"Monte Carlo probability and confidence-interval estimates"};
  app.add_option("--checkpoint", checkpoint, "trained model file");
  app.add_option("--out", out, "output directory");
  app.add_option("--age", ages, "input age (repeatable)");
  app.add_option("--samples", samples, "Monte Carlo sample count M");
  app.add_option("--alpha", alpha, "confidence level");
  app.add_option("--seed", seed);
  app.add_option("--event-state", event_state, "target state for time-to-event");
  app.add_option("--cond-entry", cond_entry, "condition on this entry (with --cond-state)");
  app.add_option("--cond-state", cond_state, "condition on this state (with --cond-entry)");
  app.add_flag("--dump-ensembles", dump_ensembles, "write the raw sample ensembles too");
  app.add_option("--config", config_path, "JSON config file; flags override its values");
  try {
    parse_args(app, std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  if (checkpoint.empty()) {
    throw ConfigError("--checkpoint is required");
  }
  if (ages.empty()) {
    throw ConfigError("at least one --age is required");
  }
  if ((cond_entry > 0) != (cond_state > 0)) {
    throw ConfigError("--cond-entry and --cond-state must be given together");
  }

  auto ckpt = sim::load_checkpoint(checkpoint);
  const int horizon = ckpt.horizon;
  const int c = ckpt.alphabet.num_states;
  if (cond_entry > horizon || cond_state > c) {
    throw ConfigError("conditioning entry/state outside the model's ranges");
  }

  auto dir = ensure_out_dir(out);
  write_config_echo(dir, {{"command", "estimate"},
                          {"checkpoint", checkpoint},
                          {"out", out},
                          {"ages", ages},
                          {"samples", samples},
                          {"alpha", alpha},
                          {"seed", seed},
                          {"event_state", event_state},
                          {"cond_entry", cond_entry},
                          {"cond_state", cond_state},
                          {"dump_ensembles", dump_ensembles}});

  std::ofstream marginals(dir / "marginals.csv", std::ios::binary);
  marginals << "input,entry,state,estimate\n";
  std::ofstream intervals(dir / "intervals.csv", std::ios::binary);
  intervals << "input,event_state,alpha,lower,upper\n";
  std::ofstream conditional;
  if (cond_entry > 0) {
    conditional.open(dir / "conditional.csv", std::ios::binary);
    conditional << "input,entry,state,estimate,denominator\n";
  }

  const Rng master(seed);
  const mc::EventSpec event{event_state};
  for (std::size_t k = 0; k < ages.size(); ++k) {
    Covariate x{{ages[k]}};
    auto ensemble =
        mc::simulate_ensemble(ckpt.params, x, samples, horizon, master.split(k));
    if (dump_ensembles) {
      mc::write_ensemble_dump(dir / ("ensemble_" + std::to_string(k) + ".txt"),
                              ensemble, seed);
    }
    for (int i = 1; i <= horizon; ++i) {
      auto dist = mc::estimate_marginal_distribution(ensemble, i);
      for (int a = 1; a <= c; ++a) {
        marginals << k << ',' << i << ',' << a << ','
                  << format_double(dist[static_cast<std::size_t>(a - 1)]) << '\n';
      }
      if (cond_entry > 0) {
        for (int a = 1; a <= c; ++a) {
          auto est = mc::estimate_conditional(ensemble, i, a, cond_entry, cond_state);
          conditional << k << ',' << i << ',' << a << ','
                      << (est.value ? format_double(*est.value)
                                    : std::string("undefined"))
                      << ',' << est.denominator << '\n';
        }
      }
    }
    auto ci = mc::estimate_ci(ensemble, event, alpha);
    intervals << k << ',' << event_state << ',' << format_double(alpha) << ','
              << ci.lower << ',' << ci.upper << '\n';
  }
  std::cout << "wrote " << (dir / "marginals.csv").string() << '\n';
  return 0;
}

// --- evaluate ---------------------------------------------------------------

int cmd_evaluate(std::vector<std::string> args) {
  auto file_cfg = load_config_file(prescan_config(args));
  std::string checkpoint;
  std::string data_dir;
  std::string out = default_out_dir();
  std::string split = "test";
  std::string config_path;
  int samples = 100;
  int bins = 10;
  double alpha = 0.9;
  int event_state = datagen::kDead;
  std::uint64_t seed = 0;
  bool oracle = false;
  int max_items = 0;
  overlay(file_cfg, "checkpoint", checkpoint);
  overlay(file_cfg, "data", data_dir);
  overlay(file_cfg, "out", out);
  overlay(file_cfg, "split", split);
  overlay(file_cfg, "samples", samples);
  overlay(file_cfg, "bins", bins);
  overlay(file_cfg, "alpha", alpha);
  overlay(file_cfg, "event_state", event_state);
  overlay(file_cfg, "seed", seed);
  overlay(file_cfg, "oracle", oracle);
  overlay(file_cfg, "max_items", max_items);

  CLI::App app{"calibration and discrimination report on a dataset split"};
  app.add_option("--checkpoint", checkpoint, "trained model file");
  app.add_option("--data", data_dir, "directory with dataset.jsonl and splits.json");
  app.add_option("--out", out, "output directory");
  app.add_option("--split", split, "train | val | test");
  app.add_option("--samples", samples);
  app.add_option("--bins", bins);
  app.add_option("--alpha", alpha);
  app.add_option("--event-state", event_state);
  app.add_option("--seed", seed);
  app.add_flag("--oracle", oracle, "evaluate exact chain predictions instead of a checkpoint");
  app.add_option("--max-items", max_items, "truncate the split (0 = all)");
  app.add_option("--config", config_path, "JSON config file; flags override its values");
  try {
    parse_args(app, std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  auto data = load_data_dir(data_dir);
  const std::vector<int>* indices = nullptr;
  if (split == "train") {
    indices = &data.split.train;
  } else if (split == "val") {
    indices = &data.split.val;
  } else if (split == "test") {
    indices = &data.split.test;
  } else {
    throw ConfigError("--split must be train, val, or test");
  }
  auto slice = datagen::subset(data.all, *indices);
  if (max_items > 0 && static_cast<int>(slice.items.size()) > max_items) {
    slice.items.resize(static_cast<std::size_t>(max_items));
  }
  if (slice.items.empty()) {
    throw ConfigError("selected split is empty");
  }

  pipeline::EvalOptions opts;
  opts.samples = samples;
  opts.bins = bins;
  opts.alpha = alpha;
  opts.event_state = event_state;
  opts.seed = seed;

  pipeline::EvaluationReport report;
  if (oracle) {
    report = pipeline::evaluate_oracle(datagen::default_health_transitions(), slice, opts);
  } else {
    if (checkpoint.empty()) {
      throw ConfigError("--checkpoint is required unless --oracle is set");
    }
    auto ckpt = sim::load_checkpoint(checkpoint);
    if (ckpt.horizon != slice.horizon) {
      throw ConfigError("checkpoint horizon " + std::to_string(ckpt.horizon) +
                        " does not match dataset horizon " +
                        std::to_string(slice.horizon));
    }
    report = pipeline::evaluate_simulator(ckpt.params, slice, opts);
  }

  auto dir = ensure_out_dir(out);
  write_report(dir, report);
  write_config_echo(dir, {{"command", "evaluate"},
                          {"checkpoint", checkpoint},
                          {"data", data_dir},
                          {"out", out},
                          {"split", split},
                          {"samples", samples},
                          {"bins", bins},
                          {"alpha", alpha},
                          {"event_state", event_state},
                          {"seed", seed},
                          {"oracle", oracle},
                          {"max_items", max_items}});
  std::cout << "summary: " << summary_to_json(report.summary).dump() << '\n';
  return 0;
}

// --- sweep ------------------------------------------------------------------

int cmd_sweep(std::vector<std::string> args) {
  auto file_cfg = load_config_file(prescan_config(args));
  TrainFlags f;
  std::string config_path;
  std::string mode = "time-dependent";
  int k1 = 3;
  std::string lambda_grid = "0.001,0.005,0.01,0.05";
  std::string k2_grid = "1,11,21,51,101";
  std::string entries = "1,30,60,90";
  double lambda = 0.05;
  overlay_train_flags(file_cfg, f);
  overlay(file_cfg, "mode", mode);
  overlay(file_cfg, "k1", k1);
  overlay(file_cfg, "lambda_grid", lambda_grid);
  overlay(file_cfg, "k2_grid", k2_grid);
  overlay(file_cfg, "entries", entries);
  overlay(file_cfg, "entry_lambda", lambda);

  CLI::App app{"regularization schedule search and sensitivity sweeps"};
  add_train_flags(app, f, config_path);
  app.add_option("--mode", mode, "time-dependent | constant | sensitivity");
  app.add_option("--k1", k1, "prefix length swept entry by entry");
  app.add_option("--lambda-grid", lambda_grid, "comma-separated candidate values");
  app.add_option("--k2-grid", k2_grid, "comma-separated constant-tail cutoffs");
  app.add_option("--entries", entries, "sensitivity mode: entries to regularize");
  app.add_option("--entry-lambda", lambda, "sensitivity mode: lambda at the entry");
  try {
    parse_args(app, std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  auto data = load_data_dir(f.data);
  auto train_ds = datagen::subset(data.all, data.split.train);
  auto val_ds = datagen::subset(data.all, data.split.val);
  if (train_ds.items.empty() || val_ds.items.empty()) {
    throw ConfigError("sweep needs non-empty train and val splits");
  }
  if (f.eval_items > 0 && static_cast<int>(val_ds.items.size()) > f.eval_items) {
    val_ds.items.resize(static_cast<std::size_t>(f.eval_items));
  }

  sim::TrainConfig tc;
  tc.epochs = f.epochs;
  tc.batch_size = f.batch;
  tc.learning_rate = f.lr;
  tc.hidden = f.hidden;
  tc.embed = f.embed;
  tc.seed = f.seed;

  pipeline::EvalOptions opts;
  opts.samples = f.eval_samples;
  opts.bins = f.bins;
  opts.alpha = f.alpha;
  opts.event_state = f.event_state;
  opts.seed = Rng(f.seed).split(90001).next_u64();

  auto dir = ensure_out_dir(f.out);
  auto echo = train_flags_json(f);
  echo["command"] = "sweep";
  echo["mode"] = mode;
  echo["k1"] = k1;
  echo["lambda_grid"] = lambda_grid;
  echo["k2_grid"] = k2_grid;
  echo["entries"] = entries;
  echo["entry_lambda"] = lambda;
  write_config_echo(dir, echo);

  if (mode == "time-dependent" || mode == "constant") {
    hyper::SearchSpec spec;
    spec.k1 = k1;
    spec.lambda_grid = parse_double_list(lambda_grid);
    spec.k2_grid = parse_int_list(k2_grid);
    auto result = mode == "time-dependent"
                      ? hyper::select_time_dependent(train_ds, val_ds, spec, tc, opts)
                      : hyper::select_constant(train_ds, val_ds, spec, tc, opts);
    hyper::write_search_log_csv(dir / "search_log.csv", result.log);
    sim::write_schedule_json(dir / "schedule.json", result.schedule);
    std::cout << "trainings=" << result.trainings << '\n'
              << "wrote " << (dir / "schedule.json").string() << '\n';
    return 0;
  }
  if (mode == "sensitivity") {
    auto entry_list = parse_int_list(entries);
    if (entry_list.empty()) {
      throw ConfigError("sensitivity mode needs --entries");
    }
    std::ofstream summary_csv(dir / "sensitivity_summary.csv", std::ios::binary);
    summary_csv << "entry,lambda,val_ece,val_auc,val_ce,val_bs,coverage,"
                   "relative_width,relative_mae\n";
    for (int entry : entry_list) {
      if (entry < 1 || entry > data.all.horizon) {
        throw ConfigError("sensitivity entry " + std::to_string(entry) +
                          " outside 1.." + std::to_string(data.all.horizon));
      }
      auto report = hyper::single_entry_sweep(train_ds, val_ds, entry, lambda, tc, opts);
      fs::path sub = dir / ("sensitivity_entry_" + std::to_string(entry));
      fs::create_directories(sub);
      write_report(sub, report);
      summary_csv << entry << ',' << format_double(lambda) << ','
                  << opt_str(report.summary.ece) << ',' << opt_str(report.summary.auc)
                  << ',' << opt_str(report.summary.ce) << ','
                  << opt_str(report.summary.bs) << ','
                  << opt_str(report.summary.coverage) << ','
                  << opt_str(report.summary.relative_width) << ','
                  << opt_str(report.summary.relative_mae) << '\n';
    }
    std::cout << "wrote " << (dir / "sensitivity_summary.csv").string() << '\n';
    return 0;
  }
  throw ConfigError("--mode must be time-dependent, constant, or sensitivity");
}

void print_usage(std::ostream& os) {
  os << "usage: seqmc <command> [flags]\n"
        "commands:\n"
        "  generate   write a synthetic health-trajectory dataset\n"
        "  train      train the autoregressive simulator\n"
        "  estimate   Monte Carlo marginal/conditional/interval estimates\n"
        "  evaluate   calibration and discrimination report on a split\n"
        "  sweep      regularization schedule search / sensitivity analysis\n"
        "run 'seqmc <command> --help' for flags\n";
}

}  // namespace

int run(std::vector<std::string> args) {
  try {
    if (args.empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
      print_usage(args.empty() ? std::cerr : std::cout);
      return args.empty() ? 2 : 0;
    }
    const std::string command = args[0];
    args.erase(args.begin());
    if (command == "generate") {
      return cmd_generate(std::move(args));
    }
    if (command == "train") {
      return cmd_train(std::move(args));
    }
    if (command == "estimate") {
      return cmd_estimate(std::move(args));
    }
    if (command == "evaluate") {
      return cmd_evaluate(std::move(args));
    }
    if (command == "sweep") {
      return cmd_sweep(std::move(args));
    }
    std::cerr << "unknown command: " << command << '\n';
    print_usage(std::cerr);
    return 2;
  } catch (const sim::DivergenceError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace seqmc::cli
