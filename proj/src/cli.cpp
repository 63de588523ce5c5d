#include "dln/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "dln/compiler.hpp"
#include "dln/cost_model.hpp"
#include "dln/errors.hpp"
#include "dln/hpo.hpp"
#include "dln/serialization.hpp"
#include "dln/trainer.hpp"

namespace dln {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  std::string data;
  std::string target;
  std::vector<std::string> categorical;
  double test_fraction = 0.25;
  std::uint64_t seed = 0;
  std::size_t budget = 32;
  unsigned threads = 1;
  std::string out = ".";
  bool verbose = false;
  std::size_t layers = 2;
  std::size_t width = 64;
  std::optional<std::vector<std::size_t>> widths;
  TrainConfig train;
  SearchSpace space;
  std::map<std::string, std::int64_t> cost;
  bool simplify = true;
};

// Values given on the command line; unset ones fall back to the config file
// and then to the defaults.
struct Flags {
  std::optional<std::string> config, data, target, out, decay;
  std::vector<std::string> categorical;
  std::optional<double> test_fraction, lr, tau, gamma, tau_min;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> budget, layers, width;
  std::optional<int> epochs, batch_size, thresholds, subspace;
  std::optional<unsigned> threads;
  bool no_concat = false, no_ste = false, no_tau_schedule = false, two_phase = false;
  bool verbose = false, no_simplify = false;
  std::vector<std::string> cost;
};

std::string number_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json metrics_json(const Metrics& m) {
  json j{{"rmse", m.rmse}, {"mae", m.mae}};
  j["r2"] = m.r2 ? json(*m.r2) : json(nullptr);
  return j;
}

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object())
    throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items())
    if (!known.count(key))
      throw ConfigError("unknown config key '" + key + "'" + (where.empty() ? "" : " in " + where));
}

void apply_search_space(const json& j, SearchSpace& s) {
  reject_unknown(j, {"tau", "gamma", "tau_min", "lr", "epochs", "width", "layers",
                     "thresholds_per_feature", "subspace"},
                 "search_space");
  if (j.contains("tau")) s.tau_init = get_as<std::vector<double>>(j["tau"], "search_space.tau");
  if (j.contains("gamma")) s.gamma = get_as<std::vector<double>>(j["gamma"], "search_space.gamma");
  if (j.contains("tau_min"))
    s.tau_min = get_as<std::vector<double>>(j["tau_min"], "search_space.tau_min");
  if (j.contains("lr")) s.learning_rate = get_as<std::vector<double>>(j["lr"], "search_space.lr");
  if (j.contains("epochs")) s.epochs = get_as<std::vector<int>>(j["epochs"], "search_space.epochs");
  if (j.contains("width"))
    s.width = get_as<std::vector<std::size_t>>(j["width"], "search_space.width");
  if (j.contains("layers"))
    s.n_logic_layers = get_as<std::vector<int>>(j["layers"], "search_space.layers");
  if (j.contains("thresholds_per_feature"))
    s.thresholds_per_feature =
        get_as<std::vector<int>>(j["thresholds_per_feature"], "search_space.thresholds_per_feature");
  if (j.contains("subspace"))
    s.subspace_size = get_as<std::vector<int>>(j["subspace"], "search_space.subspace");
}

DecayGranularity parse_decay(const std::string& s) {
  if (s == "per_epoch")
    return DecayGranularity::per_epoch;
  if (s == "per_batch")
    return DecayGranularity::per_batch;
  throw ConfigError("decay must be per_epoch or per_batch, got '" + s + "'");
}

void apply_config_file(const std::string& path, RunConfig& rc) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  reject_unknown(j,
                 {"data", "target", "categorical", "test_fraction", "seed", "budget", "threads", "out",
                  "verbose", "epochs", "batch_size", "lr", "tau", "gamma", "tau_min", "layers",
                  "width", "widths", "thresholds_per_feature", "subspace", "concat", "ste",
                  "tau_schedule", "two_phase", "decay", "sum_threshold", "search_space", "cost",
                  "simplify"},
                 "");
  auto& t = rc.train;
  if (j.contains("data")) rc.data = get_as<std::string>(j["data"], "data");
  if (j.contains("target")) rc.target = get_as<std::string>(j["target"], "target");
  if (j.contains("categorical"))
    rc.categorical = get_as<std::vector<std::string>>(j["categorical"], "categorical");
  if (j.contains("test_fraction")) rc.test_fraction = get_as<double>(j["test_fraction"], "test_fraction");
  if (j.contains("seed")) rc.seed = get_as<std::uint64_t>(j["seed"], "seed");
  if (j.contains("budget")) rc.budget = get_as<std::size_t>(j["budget"], "budget");
  if (j.contains("threads")) rc.threads = get_as<unsigned>(j["threads"], "threads");
  if (j.contains("out")) rc.out = get_as<std::string>(j["out"], "out");
  if (j.contains("verbose")) rc.verbose = get_as<bool>(j["verbose"], "verbose");
  if (j.contains("epochs")) t.epochs = get_as<int>(j["epochs"], "epochs");
  if (j.contains("batch_size")) t.batch_size = get_as<int>(j["batch_size"], "batch_size");
  if (j.contains("lr")) t.learning_rate = get_as<double>(j["lr"], "lr");
  if (j.contains("tau")) t.tau_init = get_as<double>(j["tau"], "tau");
  if (j.contains("gamma")) t.gamma = get_as<double>(j["gamma"], "gamma");
  if (j.contains("tau_min")) t.tau_min = get_as<double>(j["tau_min"], "tau_min");
  if (j.contains("layers")) rc.layers = get_as<std::size_t>(j["layers"], "layers");
  if (j.contains("width")) rc.width = get_as<std::size_t>(j["width"], "width");
  if (j.contains("widths")) rc.widths = get_as<std::vector<std::size_t>>(j["widths"], "widths");
  if (j.contains("thresholds_per_feature"))
    t.thresholds_per_feature = get_as<int>(j["thresholds_per_feature"], "thresholds_per_feature");
  if (j.contains("subspace")) t.subspace_size = get_as<int>(j["subspace"], "subspace");
  if (j.contains("concat")) t.concat_inputs = get_as<bool>(j["concat"], "concat");
  if (j.contains("tau_schedule")) t.tau_schedule = get_as<bool>(j["tau_schedule"], "tau_schedule");
  if (j.contains("two_phase")) t.two_phase = get_as<bool>(j["two_phase"], "two_phase");
  if (j.contains("decay")) t.decay = parse_decay(get_as<std::string>(j["decay"], "decay"));
  if (j.contains("sum_threshold"))
    t.sum_threshold = get_as<double>(j["sum_threshold"], "sum_threshold");
  if (j.contains("ste")) {
    const auto& s = j["ste"];
    if (s.is_boolean()) {
      t.ste = s.get<bool>() ? SteConfig{} : SteConfig::none();
    } else {
      reject_unknown(s, {"threshold", "gate_select", "link_select", "sum_gate"}, "ste");
      if (s.contains("threshold")) t.ste.threshold = get_as<bool>(s["threshold"], "ste.threshold");
      if (s.contains("gate_select"))
        t.ste.gate_select = get_as<bool>(s["gate_select"], "ste.gate_select");
      if (s.contains("link_select"))
        t.ste.link_select = get_as<bool>(s["link_select"], "ste.link_select");
      if (s.contains("sum_gate")) t.ste.sum_gate = get_as<bool>(s["sum_gate"], "ste.sum_gate");
    }
  }
  if (j.contains("search_space")) apply_search_space(j["search_space"], rc.space);
  if (j.contains("cost")) {
    if (!j["cost"].is_object())
      throw ConfigError("cost must be a JSON object");
    for (const auto& [k, v] : j["cost"].items())
      rc.cost[k] = get_as<std::int64_t>(v, "cost." + k);
  }
  if (j.contains("simplify")) rc.simplify = get_as<bool>(j["simplify"], "simplify");
}

std::pair<std::string, std::int64_t> parse_cost_flag(const std::string& text) {
  auto eq = text.find('=');
  if (eq == std::string::npos)
    throw UsageError("--cost expects key=value, got '" + text + "'");
  const std::string key = text.substr(0, eq), value = text.substr(eq + 1);
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || value.empty())
    throw UsageError("--cost value for '" + key + "' is not an integer");
  return {key, v};
}

RunConfig resolve(const Flags& f) {
  RunConfig rc;
  if (f.config)
    apply_config_file(*f.config, rc);
  auto& t = rc.train;
  if (f.data) rc.data = *f.data;
  if (f.target) rc.target = *f.target;
  if (!f.categorical.empty()) rc.categorical = f.categorical;
  if (f.test_fraction) rc.test_fraction = *f.test_fraction;
  if (f.seed) rc.seed = *f.seed;
  if (f.budget) rc.budget = *f.budget;
  if (f.threads) rc.threads = *f.threads;
  if (f.out) rc.out = *f.out;
  if (f.verbose) rc.verbose = true;
  if (f.epochs) t.epochs = *f.epochs;
  if (f.batch_size) t.batch_size = *f.batch_size;
  if (f.lr) t.learning_rate = *f.lr;
  if (f.tau) t.tau_init = *f.tau;
  if (f.gamma) t.gamma = *f.gamma;
  if (f.tau_min) t.tau_min = *f.tau_min;
  if (f.layers || f.width) rc.widths.reset();
  if (f.layers) rc.layers = *f.layers;
  if (f.width) rc.width = *f.width;
  if (f.thresholds) t.thresholds_per_feature = *f.thresholds;
  if (f.subspace) t.subspace_size = *f.subspace;
  if (f.no_concat) t.concat_inputs = false;
  if (f.no_ste) t.ste = SteConfig::none();
  if (f.no_tau_schedule) t.tau_schedule = false;
  if (f.two_phase) t.two_phase = true;
  if (f.decay) t.decay = parse_decay(*f.decay);
  if (f.no_simplify) rc.simplify = false;
  for (const auto& c : f.cost) {
    auto [k, v] = parse_cost_flag(c);
    rc.cost[k] = v;
  }
  t.widths = rc.widths ? *rc.widths : std::vector<std::size_t>(rc.layers, rc.width);
  t.seed = rc.seed;
  if (!(rc.test_fraction > 0.0 && rc.test_fraction < 1.0))
    throw ConfigError("test fraction must lie in (0, 1)");
  return rc;
}

ColumnHints training_hints(const RunConfig& rc) {
  if (rc.data.empty())
    throw UsageError("--data is required");
  if (rc.target.empty())
    throw UsageError("--target is required");
  ColumnHints hints;
  for (const auto& c : rc.categorical)
    hints[c] = ColumnKind::categorical;
  hints[rc.target] = ColumnKind::target;
  return hints;
}

fs::path prepare_out(const RunConfig& rc) {
  fs::path out(rc.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec)
    throw IoError("cannot create output directory '" + out.string() + "': " + ec.message());
  return out;
}

ProgressFn progress_printer(bool verbose) {
  if (!verbose)
    return {};
  return [](const EpochProgress& p) {
    json line{{"epoch", p.epoch}, {"mse", p.mse}, {"tau", p.tau}};
    std::cout << line.dump() << '\n' << std::flush;
  };
}

json loss_json(const LossReport& r) {
  return json{{"epoch_mse", r.epoch_mse}, {"tau", r.tau}};
}

// Scores and writes a trained model; returns the metrics document.
json finish_training(const RunConfig& rc, const fs::path& out, const SplitResult& sp,
                     const TrainResult& tr, const TrainConfig& config) {
  Model model{sp.train.schema, tr.params, tr.tau_final, config};
  save_model(model, out / "model.json");
  HardCircuit circuit = compile_model(model, true);
  json metrics{{"train", metrics_json(evaluate(circuit, sp.train))},
               {"test", metrics_json(evaluate(circuit, sp.test))},
               {"n_train", sp.train.n_rows},
               {"n_test", sp.test.n_rows},
               {"seed", rc.seed},
               {"tau_final", tr.tau_final},
               {"loss", loss_json(tr.report)},
               {"config", config_to_json(config)}};
  return metrics;
}

int cmd_train(const Flags& f) {
  RunConfig rc = resolve(f);
  auto hints = training_hints(rc);
  rc.train.validate();
  const fs::path out = prepare_out(rc);
  RawTable raw = load_csv(rc.data, hints);
  SplitResult sp = split(raw, rc.test_fraction, rc.seed);
  TrainResult tr = train(sp.train, rc.train, nullptr, progress_printer(rc.verbose));
  json metrics = finish_training(rc, out, sp, tr, rc.train);
  write_text_file(out / "metrics.json", metrics.dump(2) + "\n");
  std::cout << "test " << metrics["test"].dump() << '\n';
  return kExitOk;
}

json trial_json(const TrialResult& t) {
  json j{{"trial", t.index},
         {"mean_cv_mse", std::isfinite(t.mean_mse) ? json(t.mean_mse) : json(nullptr)},
         {"fold_mse", t.fold_mse},
         {"seconds", t.seconds},
         {"config", config_to_json(t.config)}};
  if (!t.error.empty())
    j["error"] = t.error;
  return j;
}

int cmd_search(const Flags& f) {
  RunConfig rc = resolve(f);
  auto hints = training_hints(rc);
  if (rc.budget < 1)
    throw ConfigError("budget must be at least 1");
  rc.space.validate(rc.train);
  const fs::path out = prepare_out(rc);
  RawTable raw = load_csv(rc.data, hints);
  SplitResult sp = split(raw, rc.test_fraction, rc.seed);

  const fs::path trials_path = out / "trials.jsonl";
  std::ofstream trials(trials_path, std::ios::trunc);
  if (!trials)
    throw IoError("cannot open '" + trials_path.string() + "' for writing");
  auto log_trial = [&](const TrialResult& t) {
    const std::string line = trial_json(t).dump();
    trials << line << '\n' << std::flush;
    if (!trials)
      throw IoError("error writing '" + trials_path.string() + "'");
    if (rc.verbose)
      std::cout << line << '\n' << std::flush;
  };
  SearchResult sr = run_search(sp.train, rc.space, rc.budget, rc.seed, rc.train, rc.threads, log_trial);
  trials.close();

  const TrialResult& best = sr.best_trial();
  if (!std::isfinite(best.mean_mse))
    throw DivergenceError("every trial diverged");
  TrainResult tr = final_fit(sp.train, best.config, rc.seed, progress_printer(rc.verbose));
  TrainConfig config = best.config;
  config.seed = rc.seed;
  json metrics = finish_training(rc, out, sp, tr, config);
  metrics["search"] = {{"budget", rc.budget},
                       {"trials", sr.trials.size()},
                       {"folds", sr.n_folds},
                       {"best_trial", best.index},
                       {"best_cv_mse", best.mean_mse}};
  write_text_file(out / "metrics.json", metrics.dump(2) + "\n");
  std::cout << "best trial " << best.index << " cv mse " << number_text(best.mean_mse) << '\n';
  return kExitOk;
}

json cost_json(const CostReport& r, const CostTable& t) {
  json layers = json::array();
  for (const auto& l : r.layers)
    layers.push_back({{"layer", l.layer}, {"nodes", l.nodes}, {"ops", l.ops}});
  return json{{"threshold_ops", r.threshold_ops},
              {"logic_ops", r.logic_ops},
              {"sum_ops", r.sum_ops},
              {"total_ops", r.total_ops},
              {"thresholds", r.n_thresholds},
              {"gates", r.n_gates},
              {"links", r.n_links},
              {"layers", std::move(layers)},
              {"table",
               {{"and", t.and_op},
                {"or", t.or_op},
                {"nand", t.nand_op},
                {"nor", t.nor_op},
                {"xor", t.xor_op},
                {"xnor", t.xnor_op},
                {"not", t.not_op},
                {"fp16_add", t.fp16_add},
                {"fp16_mul", t.fp16_mul},
                {"fp16_compare", t.fp16_compare}}}};
}

HardCircuit load_any(const std::optional<std::string>& model, const std::optional<std::string>& circuit,
                     bool simplified) {
  if (model && circuit)
    throw UsageError("give either --model or --circuit, not both");
  if (model)
    return compile_model(load_model(*model), simplified);
  if (circuit)
    return load_circuit(*circuit);
  throw UsageError("--model or --circuit is required");
}

int cmd_compile(const Flags& f, const std::optional<std::string>& model_path) {
  RunConfig rc = resolve(f);
  if (!model_path)
    throw UsageError("--model is required");
  CostTable table = set_cost_table(rc.cost);
  HardCircuit circuit = compile_model(load_model(*model_path), rc.simplify);
  const fs::path out = prepare_out(rc);
  save_circuit(circuit, out / "circuit.json");
  write_text_file(out / "rules.txt", extract_rules(circuit).text());
  write_text_file(out / "circuit.dot", export_dot(circuit));
  CostReport report = count_ops(circuit, table);
  write_text_file(out / "cost.json", cost_json(report, table).dump(2) + "\n");
  std::cout << "nodes " << circuit.nodes.size() << " links " << circuit.links.size() << " total OPs "
            << report.total_ops << '\n';
  return kExitOk;
}

// Encoded rows of `raw` under the circuit's schema. Rows with a missing
// schema cell are skipped and reported through `kept`.
Dataset encode_input(const HardCircuit& circuit, const RawTable& raw, bool with_target,
                     std::vector<std::size_t>& kept) {
  if (!circuit.schema)
    throw DataError("circuit carries no preprocessing schema; cannot read raw rows");
  const Schema& schema = *circuit.schema;
  kept.clear();
  for (std::size_t r = 0; r < raw.n_rows; ++r) {
    bool ok = true;
    for (const auto& col : schema.columns) {
      if (col.kind == ColumnKind::target && !with_target)
        continue;
      const RawColumn* c = raw.find(col.name);
      if (!c)
        throw DataError("input is missing column '" + col.name + "'");
      if (c->missing(r))
        ok = false;
    }
    if (ok)
      kept.push_back(r);
  }
  Dataset ds;
  ds.n_rows = kept.size();
  ds.n_features = schema.feature_count();
  ds.features = schema.encode(raw, kept);
  if (with_target)
    ds.target = schema.encode_target(raw, kept);
  ds.schema = schema;
  ds.source_rows = kept;
  return ds;
}

ColumnHints schema_hints(const HardCircuit& circuit) {
  ColumnHints hints;
  if (circuit.schema)
    for (const auto& col : circuit.schema->columns)
      hints[col.name] = col.kind;
  return hints;
}

int cmd_predict(const Flags& f, const std::optional<std::string>& model,
                const std::optional<std::string>& circuit_path, const std::optional<std::string>& output) {
  RunConfig rc = resolve(f);
  if (rc.data.empty())
    throw UsageError("--data is required");
  HardCircuit circuit = load_any(model, circuit_path, true);
  RawTable raw = load_csv(rc.data, schema_hints(circuit), TargetPolicy::optional);
  std::vector<std::size_t> kept;
  Dataset ds = encode_input(circuit, raw, false, kept);

  std::vector<std::string> cells(raw.n_rows);
  for (std::size_t i = 0; i < ds.n_rows; ++i)
    cells[kept[i]] = number_text(predict(circuit, ds.row(i)));
  std::ostringstream csv;
  csv << "prediction\n";
  for (const auto& c : cells)
    csv << c << '\n';
  fs::path path = output ? fs::path(*output) : prepare_out(rc) / "predictions.csv";
  write_text_file(path, csv.str());
  if (kept.size() != raw.n_rows)
    std::cerr << "dln: warning: " << raw.n_rows - kept.size()
              << " row(s) with missing values left without a prediction\n";
  return kExitOk;
}

int cmd_evaluate(const Flags& f, const std::optional<std::string>& model,
                 const std::optional<std::string>& circuit_path) {
  RunConfig rc = resolve(f);
  if (rc.data.empty())
    throw UsageError("--data is required");
  HardCircuit circuit = load_any(model, circuit_path, true);
  if (!circuit.schema || !circuit.schema->has_target())
    throw DataError("circuit carries no target transform; cannot score rows");
  RawTable raw = load_csv(rc.data, schema_hints(circuit), TargetPolicy::required);
  std::vector<std::size_t> kept;
  Dataset ds = encode_input(circuit, raw, true, kept);
  json j = metrics_json(evaluate(circuit, ds));
  j["n_rows"] = ds.n_rows;
  std::cout << j.dump(2) << '\n';
  if (f.out)
    write_text_file(prepare_out(rc) / "metrics.json", j.dump(2) + "\n");
  return kExitOk;
}

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config file (flags take precedence)");
  app->add_option("--out", f.out, "Output directory");
  app->add_flag("--verbose", f.verbose, "Progress records on standard output");
}

void add_data(CLI::App* app, Flags& f) {
  app->add_option("--data", f.data, "Input CSV file");
  app->add_option("--target", f.target, "Target column");
  app->add_option("--categorical", f.categorical, "Columns to treat as categorical")->delimiter(',');
  app->add_option("--test-fraction", f.test_fraction, "Held-out fraction (default 0.25)");
  app->add_option("--seed", f.seed, "Random seed (default 0)");
}

void add_training(CLI::App* app, Flags& f) {
  app->add_option("--epochs", f.epochs, "Training epochs");
  app->add_option("--batch-size", f.batch_size, "Mini-batch size");
  app->add_option("--lr", f.lr, "Learning rate");
  app->add_option("--tau", f.tau, "Initial temperature");
  app->add_option("--gamma", f.gamma, "Temperature decay factor");
  app->add_option("--tau-min", f.tau_min, "Temperature floor");
  app->add_option("--decay", f.decay, "per_epoch or per_batch");
  app->add_option("--layers", f.layers, "Number of logic layers");
  app->add_option("--width", f.width, "Neurons per logic layer");
  app->add_option("--thresholds-per-feature", f.thresholds, "Threshold neurons per continuous feature");
  app->add_option("--subspace", f.subspace, "Candidate gates and links per neuron (4, 8, 16)");
  app->add_flag("--no-concat", f.no_concat, "Do not feed thresholds to deeper logic layers");
  app->add_flag("--no-ste", f.no_ste, "Disable straight-through estimation");
  app->add_flag("--no-tau-schedule", f.no_tau_schedule, "Train at constant temperature 1");
  app->add_flag("--two-phase", f.two_phase, "Train gates and links in separate phases");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kExitUsage;
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const DivergenceError*>(&e)) return kExitDivergence;
  if (dynamic_cast<const FormatError*>(&e)) return kExitFormat;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const MetricError*>(&e) ||
      dynamic_cast<const ShapeError*>(&e))
    return kExitData;
  return kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Differentiable logic networks for tabular regression"};
  app.require_subcommand(1);
  Flags f;
  std::optional<std::string> model, circuit, output;

  auto* train_cmd = app.add_subcommand("train", "Train a network and score it on a held-out split");
  add_common(train_cmd, f);
  add_data(train_cmd, f);
  add_training(train_cmd, f);

  auto* search_cmd = app.add_subcommand("search", "Random hyperparameter search, then a final fit");
  add_common(search_cmd, f);
  add_data(search_cmd, f);
  add_training(search_cmd, f);
  search_cmd->add_option("--budget", f.budget, "Number of trials (default 32)");
  search_cmd->add_option("--threads", f.threads, "Concurrent trials (0 = all cores)");

  auto* compile_cmd = app.add_subcommand("compile", "Discretize a model into a circuit, rules and cost");
  add_common(compile_cmd, f);
  compile_cmd->add_option("--model", model, "Model file");
  compile_cmd->add_flag("--no-simplify", f.no_simplify, "Skip simplification passes");
  compile_cmd->add_option("--cost", f.cost, "Cost table override key=value (repeatable)");

  auto* predict_cmd = app.add_subcommand("predict", "Predict raw CSV rows");
  add_common(predict_cmd, f);
  predict_cmd->add_option("--data", f.data, "Input CSV file");
  predict_cmd->add_option("--model", model, "Model file");
  predict_cmd->add_option("--circuit", circuit, "Circuit file");
  predict_cmd->add_option("--output", output, "Predictions CSV (default <out>/predictions.csv)");

  auto* eval_cmd = app.add_subcommand("evaluate", "Score a model or circuit on a labelled CSV");
  add_common(eval_cmd, f);
  eval_cmd->add_option("--data", f.data, "Labelled CSV file");
  eval_cmd->add_option("--model", model, "Model file");
  eval_cmd->add_option("--circuit", circuit, "Circuit file");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(f);
    if (search_cmd->parsed()) return cmd_search(f);
    if (compile_cmd->parsed()) return cmd_compile(f, model);
    if (predict_cmd->parsed()) return cmd_predict(f, model, circuit, output);
    if (eval_cmd->parsed()) return cmd_evaluate(f, model, circuit);
  } catch (const std::exception& e) {
    std::cerr << "dln: error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitUsage;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i)
    args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace dln
