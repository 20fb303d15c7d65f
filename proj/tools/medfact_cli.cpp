// medfact command-line driver.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "medfact/medfact.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace medfact;

namespace {

constexpr int kExitOk = 0, kExitOther = 1, kExitValidation = 2, kExitIo = 3, kExitDivergence = 4;

enum class Format { text, machine };

struct Common {
  std::uint64_t seed = 0;
  std::string out_dir = "medfact_out";
  std::string format = "text";
  std::string config_path;
  std::vector<std::string> argv;

  Format fmt() const { return format == "machine" ? Format::machine : Format::text; }
};

/// Flags that overlay a TrainConfig; only options actually given override.
struct TrainFlags {
  std::size_t epochs = 0, batch_size = 0, k = 0, patience = 0, hidden = 0, embed = 0, sample_cap = 0;
  double lr = 0.0, fraction = 0.0, sigma = 0.0;
  std::string ablation;
  bool normalize = false;
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* app) {
    opts["epochs"] = app->add_option("--epochs", epochs, "training epochs");
    opts["batch"] = app->add_option("--batch-size", batch_size, "mini-batch size");
    opts["lr"] = app->add_option("--lr", lr, "Adam learning rate");
    opts["k"] = app->add_option("--k", k, "number of feature groups (default round(sqrt(F)))");
    opts["fraction"] = app->add_option("--cluster-fraction", fraction, "fraction of epochs that re-cluster");
    opts["ablation"] = app->add_option("--ablation", ablation, "full, cor- or clu-")
                           ->check(CLI::IsMember({"full", "cor-", "clu-"}));
    opts["patience"] = app->add_option("--patience", patience, "early-stopping patience (0 disables)");
    opts["hidden"] = app->add_option("--hidden", hidden, "GRU hidden size");
    opts["embed"] = app->add_option("--embed", embed, "embedding size");
    opts["sigma"] = app->add_option("--sigma", sigma, "fixed kernel bandwidth (default: median L1)");
    opts["cap"] = app->add_option("--sample-cap", sample_cap, "patients used per correlation estimate");
    opts["normalize"] = app->add_flag("--normalize-adjacency", normalize, "use D^-1/2 A D^-1/2 in the GCN");
  }

  bool given(const std::string& name) const { return opts.at(name)->count() > 0; }

  /// defaults < config file < flags
  TrainConfig resolve(const Common& common) const {
    TrainConfig c;
    if (!common.config_path.empty()) c = config_from_json(read_json_file(common.config_path), c);
    c.seed = common.seed;
    if (given("epochs")) c.epochs = epochs;
    if (given("batch")) c.batch_size = batch_size;
    if (given("lr")) c.learning_rate = lr;
    if (given("k")) c.k = k;
    if (given("fraction")) c.cluster_epoch_fraction = fraction;
    if (given("ablation")) c.ablation = parse_ablation(ablation);
    if (given("patience")) c.patience = patience;
    if (given("hidden")) c.hidden = hidden;
    if (given("embed")) c.embed = embed;
    if (given("sigma")) c.kernel.sigma = sigma;
    if (given("cap")) c.kernel.sample_cap = sample_cap;
    if (given("normalize")) c.normalize_adjacency = normalize;
    c.validate();
    return c;
  }
};

struct DataFlags {
  std::string data_dir;
  std::string schema_path;

  void add(CLI::App* app) {
    app->add_option("--data", data_dir, "directory of .psv patient files")->required();
    app->add_option("--schema", schema_path, "schema JSON (default: schema.json next to the data directory)");
  }

  fs::path schema_file() const {
    if (!schema_path.empty()) return schema_path;
    return fs::path(data_dir).lexically_normal().parent_path() / "schema.json";
  }

  Cohort load() const {
    Cohort c = load_psv_cohort(data_dir, load_schema(schema_file()));
    if (c.size() == 0) throw ValidationError("no usable patients under " + data_dir);
    return c;
  }

  json describe() const { return {{"data", data_dir}, {"schema", schema_file().string()}}; }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void write_manifest(const Common& common, const std::string& command, const json& config, const json& inputs,
                    const std::vector<std::string>& outputs) {
  json m{{"tool", "medfact"},
         {"command", command},
         {"argv", common.argv},
         {"seed", common.seed},
         {"config", config},
         {"inputs", inputs},
         {"outputs", outputs}};
  write_json_file(fs::path(common.out_dir) / "manifest.json", m);
}

json named_groups(const ClusterAssignment& a, const std::vector<std::string>& names) {
  json groups = json::array();
  for (const auto& g : a.groups()) {
    json members = json::array();
    for (auto i : g) members.push_back(names.at(i));
    groups.push_back(members);
  }
  return groups;
}

json label_map(const ClusterAssignment& a, const std::vector<std::string>& names) {
  json m = json::object();
  const auto labels = a.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) m[names[i]] = labels[i];
  return m;
}

std::string format_groups(const ClusterAssignment& a, const std::vector<std::string>& names) {
  std::ostringstream os;
  for (std::size_t g = 0; g < a.k(); ++g) {
    os << "  G" << g + 1 << ":";
    for (auto i : a.groups()[g]) os << ' ' << names[i];
    os << '\n';
  }
  return os.str();
}

json summary_json(const CohortSummary& s) {
  return {{"patients", s.patients},
          {"visits", s.visits},
          {"avg_visits", s.avg_visits},
          {"max_visits", s.max_visits},
          {"min_visits", s.min_visits},
          {"dynamic_features", s.dynamic_features},
          {"static_features", s.static_features},
          {"positive_fraction", s.positive_fraction}};
}

std::string summary_table(const CohortSummary& s) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "# patients" << s.patients << '\n'
     << std::setw(24) << "# visits" << s.visits << '\n'
     << std::setw(24) << "avg # visits" << std::fixed << std::setprecision(2) << s.avg_visits << '\n'
     << std::setw(24) << "max # visits" << s.max_visits << '\n'
     << std::setw(24) << "min # visits" << s.min_visits << '\n'
     << std::setw(24) << "# dynamic features" << s.dynamic_features << '\n'
     << std::setw(24) << "# static features" << s.static_features << '\n'
     << std::setw(24) << "positive rate" << std::setprecision(2) << 100.0 * s.positive_fraction << "%\n";
  return os.str();
}

void emit(const Common& common, const std::string& text, const json& machine) {
  if (common.fmt() == Format::machine)
    std::cout << machine.dump(2) << '\n';
  else
    std::cout << text;
}

// gen-synthetic ------------------------------------------------------------------

struct GenFlags {
  SyntheticSpec spec;
  std::string label_column = "Label";
};

int run_gen(const Common& common, GenFlags g) {
  g.spec.seed = common.seed;
  g.spec.validate();
  const auto syn = generate_synthetic(g.spec);
  const fs::path out = common.out_dir;
  Schema schema = write_psv_cohort(syn.cohort, out / "data", g.label_column);
  schema.t_min = 1;
  write_json_file(out / "schema.json", to_json(schema));
  write_json_file(out / "planted.json", {{"groups", named_groups(syn.planted, syn.cohort.dynamic_names)},
                                         {"labels", label_map(syn.planted, syn.cohort.dynamic_names)}});
  const auto s = summarize(syn.cohort);
  const json spec{{"patients", g.spec.patients},         {"features", g.spec.features},
                  {"static_features", g.spec.static_features}, {"groups", g.spec.groups},
                  {"t_min", g.spec.t_min},                 {"t_max", g.spec.t_max},
                  {"noise_std", g.spec.noise_std},         {"autocorrelation", g.spec.autocorrelation},
                  {"positive_rate", g.spec.target_positive_rate}, {"seed", g.spec.seed},
                  {"label_column", g.label_column}};
  write_manifest(common, "gen-synthetic", spec, json::object(), {"data/", "schema.json", "planted.json"});
  emit(common, summary_table(s), {{"summary", summary_json(s)}, {"out_dir", common.out_dir}});
  return kExitOk;
}

// train -----------------------------------------------------------------------------

int run_train(const Common& common, const DataFlags& data, const TrainFlags& tf, std::uint64_t split_seed,
              std::size_t bootstrap_n) {
  const TrainConfig config = tf.resolve(common);
  const Cohort raw = data.load();
  const HoldoutRun run = fit_holdout(raw, config, split_seed, bootstrap_n);
  const fs::path out = common.out_dir;
  save_checkpoint(run.model, out / "checkpoint.json");
  write_json_file(out / "history.json", history_to_json(run.model.history));
  write_json_file(out / "split.json", {{"mode", "holdout"},
                                       {"seed", split_seed},
                                       {"train", run.split.train()},
                                       {"validation", run.split.validation()},
                                       {"test", run.split.test()}});
  std::vector<std::string> outputs{"checkpoint.json", "history.json", "split.json"};
  if (run.test_report) {
    write_json_file(out / "test_report.json", to_json(*run.test_report));
    write_text(out / "test_report.txt", to_text(*run.test_report));
    outputs.push_back("test_report.json");
    outputs.push_back("test_report.txt");
  }
  json inputs = data.describe();
  inputs["split_seed"] = split_seed;
  inputs["bootstrap"] = bootstrap_n;
  write_manifest(common, "train", to_json(run.model.config), inputs, outputs);

  std::ostringstream os;
  os << "trained on " << run.split.train().size() << " patients, " << run.model.history.size() << " epochs, best epoch "
     << run.model.best_epoch << ", " << regraph_count(run.model.history) << " re-clustering events\n";
  os << "K=" << *run.model.config.k << " groups:\n" << format_groups(run.model.assignment, raw.dynamic_names);
  if (run.test_report) os << "test split (" << run.split.test().size() << " patients):\n" << to_text(*run.test_report);
  json machine{{"epochs_run", run.model.history.size()},
               {"best_epoch", run.model.best_epoch},
               {"regraph_events", regraph_count(run.model.history)},
               {"k", *run.model.config.k},
               {"groups", named_groups(run.model.assignment, raw.dynamic_names)}};
  machine["test_report"] = run.test_report ? to_json(*run.test_report) : json(nullptr);
  emit(common, os.str(), machine);
  return kExitOk;
}

// evaluate --------------------------------------------------------------------------

int run_evaluate(const Common& common, const DataFlags& data, const std::string& checkpoint, std::size_t bootstrap_n) {
  const TrainedModel model = load_checkpoint(checkpoint);
  const Cohort raw = data.load();
  const Cohort prepared = prepare_for(model, raw);
  ScoredSet set{predict(prepared, all_indices(prepared.size()), model.params, model.propagation()), prepared.labels()};
  const MetricReport report = evaluate_scores(set, bootstrap_n, common.seed);
  const fs::path out = common.out_dir;
  write_json_file(out / "report.json", to_json(report));
  write_text(out / "report.txt", to_text(report));
  json inputs = data.describe();
  inputs["checkpoint"] = checkpoint;
  inputs["bootstrap"] = bootstrap_n;
  write_manifest(common, "evaluate", to_json(model.config), inputs, {"report.json", "report.txt"});
  emit(common, to_text(report), to_json(report));
  return kExitOk;
}

// kfold -----------------------------------------------------------------------------

int run_kfold(const Common& common, const DataFlags& data, const TrainFlags& tf, std::size_t folds,
              std::uint64_t split_seed) {
  if (folds < 2) throw ValidationError("--folds must be at least 2");
  const TrainConfig config = tf.resolve(common);
  const Cohort raw = data.load();
  const KFoldResult r = kfold_evaluate(raw, folds, config, split_seed);
  json per_fold = json::array();
  for (std::size_t f = 0; f < r.folds.size(); ++f)
    per_fold.push_back({{"fold", f}, {"test_size", r.test_folds[f].size()}, {"report", to_json(r.folds[f])}});
  const json result{{"folds", per_fold}, {"summary", to_json(r.summary)}};
  const fs::path out = common.out_dir;
  write_json_file(out / "kfold.json", result);
  write_text(out / "kfold.txt", to_text(r.summary));
  json inputs = data.describe();
  inputs["folds"] = folds;
  inputs["split_seed"] = split_seed;
  write_manifest(common, "kfold", to_json(config), inputs, {"kfold.json", "kfold.txt"});
  std::ostringstream os;
  os << folds << "-fold mean and std:\n" << to_text(r.summary);
  emit(common, os.str(), result);
  return kExitOk;
}

// sweep-k ---------------------------------------------------------------------------

/// Fraction of features whose group at the finer K is not a child of their
/// group at the coarser K. Each fine group's parent is the coarse group it
/// overlaps most (lowest index on ties).
double switch_fraction(const ClusterAssignment& coarse, const ClusterAssignment& fine) {
  const auto cl = coarse.labels(), fl = fine.labels();
  std::vector<std::vector<std::size_t>> overlap(fine.k(), std::vector<std::size_t>(coarse.k(), 0));
  for (std::size_t i = 0; i < cl.size(); ++i) ++overlap[fl[i]][cl[i]];
  std::vector<std::size_t> parent(fine.k());
  for (std::size_t g = 0; g < fine.k(); ++g)
    parent[g] = static_cast<std::size_t>(std::max_element(overlap[g].begin(), overlap[g].end()) - overlap[g].begin());
  std::size_t switched = 0;
  for (std::size_t i = 0; i < cl.size(); ++i) switched += parent[fl[i]] != cl[i];
  return static_cast<double>(switched) / static_cast<double>(cl.size());
}

int run_sweep(const Common& common, const DataFlags& data, const TrainFlags& tf, std::vector<std::size_t> ks,
              const std::string& mode, std::uint64_t split_seed) {
  if (ks.empty()) throw ValidationError("--k-list is empty");
  const TrainConfig base = tf.resolve(common);
  const Cohort raw = data.load();
  const std::size_t f = raw.dynamic_count();
  for (auto k : ks)
    if (k == 0 || k > f) throw ValidationError("K=" + std::to_string(k) + " is outside [1, " + std::to_string(f) + "]");

  const SplitDescriptor split = holdout_split(raw.labels(), split_seed);
  const Cohort processed = preprocess(raw, split.train());
  json blocks = json::array();
  std::vector<ClusterAssignment> assignments;

  if (mode == "retrain") {
    for (auto k : ks) {
      TrainConfig c = base;
      c.k = k;
      const TrainedModel m = train(processed, split.train(), split.validation(), c);
      assignments.push_back(m.assignment);
      blocks.push_back({{"k", k},
                        {"groups", named_groups(m.assignment, raw.dynamic_names)},
                        {"labels", label_map(m.assignment, raw.dynamic_names)},
                        {"sigma", m.correlation.sigma}});
    }
  } else {
    // One trained embedding; only the clustering step varies with K.
    const TrainedModel m = train(processed, split.train(), split.validation(), base);
    SeededRng sample_rng = SeededRng::derive(base.seed, 3);
    const auto pick = correlation_sample(split.train().size(), base.kernel.sample_cap, sample_rng);
    std::vector<std::size_t> sample;
    for (auto p : pick) sample.push_back(split.train()[p]);
    const auto corr = estimate_correlations(dynamic_embeddings(processed, sample, m.params.embedding), base.kernel);
    for (auto k : ks) {
      const auto a = spectral_cluster(corr, k, SeededRng::derive(base.seed, 1000 + k).next_u64());
      assignments.push_back(a);
      blocks.push_back({{"k", k},
                        {"groups", named_groups(a, raw.dynamic_names)},
                        {"labels", label_map(a, raw.dynamic_names)},
                        {"sigma", corr.sigma}});
    }
  }

  json switches = json::array();
  for (std::size_t i = 0; i + 1 < ks.size(); ++i) {
    const bool finer = ks[i + 1] > ks[i];
    const auto& coarse = finer ? assignments[i] : assignments[i + 1];
    const auto& fine = finer ? assignments[i + 1] : assignments[i];
    switches.push_back({{"from", ks[i]}, {"to", ks[i + 1]}, {"switch_fraction", switch_fraction(coarse, fine)}});
  }
  const json result{{"mode", mode}, {"features", raw.dynamic_names}, {"assignments", blocks}, {"transitions", switches}};
  write_json_file(fs::path(common.out_dir) / "sweep.json", result);
  json inputs = data.describe();
  inputs["k_list"] = ks;
  inputs["mode"] = mode;
  inputs["split_seed"] = split_seed;
  write_manifest(common, "sweep-k", to_json(base), inputs, {"sweep.json"});

  std::ostringstream os;
  for (std::size_t i = 0; i < ks.size(); ++i) os << "K=" << ks[i] << ":\n" << format_groups(assignments[i], raw.dynamic_names);
  for (const auto& s : switches)
    os << "K " << s["from"].get<std::size_t>() << " -> " << s["to"].get<std::size_t>()
       << ": switch fraction " << std::fixed << std::setprecision(3) << s["switch_fraction"].get<double>() << '\n';
  emit(common, os.str(), result);
  return kExitOk;
}

// cluster-report ----------------------------------------------------------------------

int run_cluster_report(const Common& common, const std::string& checkpoint, const std::string& history_path,
                       const std::string& planted_path) {
  const TrainedModel m = load_checkpoint(checkpoint);
  const auto& names = m.dynamic_names;
  json r = json::array();
  for (std::size_t i = 0; i < m.correlation.r.rows(); ++i) r.push_back(std::vector<double>(m.correlation.r.row(i).begin(), m.correlation.r.row(i).end()));
  json result{{"k", m.assignment.k()},
              {"sigma", m.correlation.sigma},
              {"features", names},
              {"groups", named_groups(m.assignment, names)},
              {"labels", label_map(m.assignment, names)},
              {"correlation", r}};
  std::ostringstream os;
  os << "K=" << m.assignment.k() << ", sigma=" << m.correlation.sigma << '\n' << format_groups(m.assignment, names);

  json inputs{{"checkpoint", checkpoint}};
  if (!planted_path.empty()) {
    const json planted = read_json_file(planted_path);
    std::vector<std::size_t> truth;
    for (const auto& n : names) {
      if (!planted.at("labels").contains(n)) throw ValidationError("planted partition has no feature '" + n + "'");
      truth.push_back(planted["labels"][n].get<std::size_t>());
    }
    const double ari = adjusted_rand_index(m.assignment.labels(), truth);
    result["planted_ari"] = ari;
    os << "ARI vs planted: " << std::setprecision(6) << ari << '\n';
    inputs["planted"] = planted_path;
  }
  if (!history_path.empty()) {
    // Per-epoch assignments, suitable for a cluster-evolution plot.
    json evolution = json::array();
    for (const auto& e : read_json_file(history_path)) {
      const ClusterAssignment a(e.at("assignment").get<std::vector<std::vector<std::size_t>>>());
      evolution.push_back({{"epoch", e.at("epoch")}, {"regraphed", e.at("regraphed")}, {"labels", label_map(a, names)}});
    }
    result["evolution"] = evolution;
    inputs["history"] = history_path;
  }
  write_json_file(fs::path(common.out_dir) / "cluster_report.json", result);
  write_manifest(common, "cluster-report", to_json(m.config), inputs, {"cluster_report.json"});
  emit(common, os.str(), result);
  return kExitOk;
}

int report(const char* kind, const std::exception& e, int code) {
  std::cerr << "medfact: " << kind << ": " << e.what() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"medfact: feature-correlation patient representations"};
  app.require_subcommand(1);
  Common common;
  common.argv.assign(argv, argv + argc);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "random seed");
    sub->add_option("--out-dir", common.out_dir, "output directory");
    sub->add_option("--format", common.format, "stdout format")->check(CLI::IsMember({"text", "machine"}));
    sub->add_option("--config", common.config_path, "JSON file of training settings");
  };

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "write a planted-structure synthetic cohort");
  add_common(gen_cmd);
  gen_cmd->add_option("--patients", gen.spec.patients, "number of patients");
  gen_cmd->add_option("--features", gen.spec.features, "dynamic features");
  gen_cmd->add_option("--static-features", gen.spec.static_features, "static features");
  gen_cmd->add_option("--groups", gen.spec.groups, "planted feature groups");
  gen_cmd->add_option("--t-min", gen.spec.t_min, "minimum visits");
  gen_cmd->add_option("--t-max", gen.spec.t_max, "maximum visits");
  gen_cmd->add_option("--noise-std", gen.spec.noise_std, "observation noise std");
  gen_cmd->add_option("--positive-rate", gen.spec.target_positive_rate, "expected positive rate");
  gen_cmd->add_option("--label-column", gen.label_column, "label column name");

  DataFlags train_data;
  TrainFlags train_flags;
  std::uint64_t split_seed = 0;
  std::size_t bootstrap_n = 0;
  auto* train_cmd = app.add_subcommand("train", "train on a holdout split and save a checkpoint");
  add_common(train_cmd);
  train_data.add(train_cmd);
  train_flags.add(train_cmd);
  auto* train_split = train_cmd->add_option("--split-seed", split_seed, "seed of the 8:1:1 split (default: --seed)");
  train_cmd->add_option("--bootstrap", bootstrap_n, "bootstrap resamples for test metrics");

  DataFlags eval_data;
  std::string eval_checkpoint;
  std::size_t eval_bootstrap = 0;
  auto* eval_cmd = app.add_subcommand("evaluate", "score a dataset with a checkpoint");
  add_common(eval_cmd);
  eval_data.add(eval_cmd);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint JSON")->required();
  eval_cmd->add_option("--bootstrap", eval_bootstrap, "bootstrap resamples");

  DataFlags kfold_data;
  TrainFlags kfold_flags;
  std::size_t folds = 5;
  std::uint64_t kfold_seed = 0;
  auto* kfold_cmd = app.add_subcommand("kfold", "stratified k-fold cross-validation");
  add_common(kfold_cmd);
  kfold_data.add(kfold_cmd);
  kfold_flags.add(kfold_cmd);
  kfold_cmd->add_option("--folds", folds, "number of folds");
  auto* kfold_split = kfold_cmd->add_option("--split-seed", kfold_seed, "fold assignment seed (default: --seed)");

  DataFlags sweep_data;
  TrainFlags sweep_flags;
  std::vector<std::size_t> k_list;
  std::string sweep_mode = "retrain";
  std::uint64_t sweep_seed = 0;
  auto* sweep_cmd = app.add_subcommand("sweep-k", "export feature groups for a list of K");
  add_common(sweep_cmd);
  sweep_data.add(sweep_cmd);
  sweep_flags.add(sweep_cmd);
  sweep_cmd->add_option("--k-list", k_list, "values of K")->delimiter(',')->required();
  sweep_cmd->add_option("--mode", sweep_mode, "retrain per K, or cluster one trained embedding")
      ->check(CLI::IsMember({"retrain", "fixed-embedding"}));
  auto* sweep_split = sweep_cmd->add_option("--split-seed", sweep_seed, "split seed (default: --seed)");

  std::string report_checkpoint, report_history, report_planted;
  auto* report_cmd = app.add_subcommand("cluster-report", "show the groups and correlations of a checkpoint");
  add_common(report_cmd);
  report_cmd->add_option("--checkpoint", report_checkpoint, "checkpoint JSON")->required();
  report_cmd->add_option("--history", report_history, "history JSON for per-epoch evolution");
  report_cmd->add_option("--planted", report_planted, "planted partition JSON to score against");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*gen_cmd) return run_gen(common, gen);
    if (*train_cmd) return run_train(common, train_data, train_flags, train_split->count() ? split_seed : common.seed, bootstrap_n);
    if (*eval_cmd) return run_evaluate(common, eval_data, eval_checkpoint, eval_bootstrap);
    if (*kfold_cmd) return run_kfold(common, kfold_data, kfold_flags, folds, kfold_split->count() ? kfold_seed : common.seed);
    if (*sweep_cmd)
      return run_sweep(common, sweep_data, sweep_flags, k_list, sweep_mode, sweep_split->count() ? sweep_seed : common.seed);
    if (*report_cmd) return run_cluster_report(common, report_checkpoint, report_history, report_planted);
  } catch (const DivergenceError& e) {
    return report("diverged", e, kExitDivergence);
  } catch (const IoError& e) {
    return report("I/O error", e, kExitIo);
  } catch (const FormatError& e) {
    return report("malformed input", e, kExitIo);
  } catch (const ValidationError& e) {
    return report("invalid input", e, kExitValidation);
  } catch (const ContractError& e) {
    return report("invalid input", e, kExitValidation);
  } catch (const SplitError& e) {
    return report("invalid input", e, kExitValidation);
  } catch (const PreprocessError& e) {
    return report("invalid input", e, kExitValidation);
  } catch (const fs::filesystem_error& e) {
    return report("I/O error", e, kExitIo);
  } catch (const std::exception& e) {
    return report("error", e, kExitOther);
  }
  return kExitOther;
}
