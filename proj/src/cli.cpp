#include "cizsl/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "cizsl/config.hpp"
#include "cizsl/dataio.hpp"
#include "cizsl/errors.hpp"
#include "cizsl/evaluation.hpp"
#include "cizsl/training.hpp"

namespace cizsl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Written to <out>/run.json when a command finishes, successfully or not.
struct RunManifest {
  std::string command;
  json config = json::object();
  std::vector<std::uint64_t> seeds;
  json inputs = json::object();
  std::vector<std::string> outputs;  // relative to the output directory
  double wall_clock_s = 0.0;
  std::string status = "ok";
  std::string error;

  json to_json() const {
    return {{"command", command}, {"config", config},         {"seeds", seeds},
            {"inputs", inputs},   {"outputs", outputs},       {"wall_clock_s", wall_clock_s},
            {"toolkit_version", kToolkitVersion}, {"status", status}, {"error", error}};
  }
};

class Run {
 public:
  Run(std::string command, fs::path out) : out_(std::move(out)), start_(std::chrono::steady_clock::now()) {
    manifest_.command = std::move(command);
  }

  RunManifest& manifest() { return manifest_; }
  const fs::path& out() const { return out_; }

  void create_out() {
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) throw IoError("cannot create output directory " + out_.string() + ": " + ec.message());
    created_ = true;
  }

  void write(const std::string& name, const std::string& content) {
    write_file_atomic(out_ / name, content);
    manifest_.outputs.push_back(name);
  }

  void produced(const std::string& name) { manifest_.outputs.push_back(name); }

  void finish(const std::string& status = "ok", const std::string& error = {}) {
    if (!created_) return;
    manifest_.status = status;
    manifest_.error = error;
    manifest_.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::vector<std::string> present;
    for (const auto& o : manifest_.outputs)
      if (fs::exists(out_ / o)) present.push_back(o);
    manifest_.outputs = present;
    write_file_atomic(out_ / "run.json", manifest_.to_json().dump(2) + "\n");
  }

 private:
  fs::path out_;
  RunManifest manifest_;
  std::chrono::steady_clock::time_point start_;
  bool created_ = false;
};

fs::path resolve_out(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  throw ValidationError(std::string("no output directory: pass --out or set ") + kOutEnv);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Flags shared by commands that train.
struct TrainFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::size_t> steps;
  std::optional<double> lambda;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app) {
    app->add_option("--config", config, "JSON training configuration")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "override a config key, e.g. --set loss.eta=5")->take_all();
    app->add_option("--steps", steps, "number of outer training iterations");
    app->add_option("--lambda", lambda, "creativity weight");
    app->add_option("--seed", seed, "random seed");
  }

  TrainConfig resolve() const {
    json j = to_json(config.empty() ? TrainConfig{} : load_train_config(config));
    for (const auto& s : sets) apply_override(j, s);
    if (steps) j["n_steps"] = *steps;
    if (lambda) j["loss"]["lambda_creativity"] = *lambda;
    if (seed) j["seed"] = *seed;
    return train_config_from_json(j);
  }
};

std::string eval_csv(const EvalReport& r) {
  std::string out = "metric,value\n";
  out += "top1_unseen," + fmt("%.6f", r.top1_unseen) + "\n";
  out += "su_auc," + fmt("%.6f", r.su.auc) + "\n";
  out += "harmonic_mean," + fmt("%.6f", r.su.harmonic_mean) + "\n";
  for (const auto& m : r.retrieval) out += "map_precision@" + fmt("%g", m.fraction) + "," + fmt("%.6f", m.precision_at_k) + "\n";
  for (const auto& m : r.retrieval) out += "map_ap@" + fmt("%g", m.fraction) + "," + fmt("%.6f", m.average_precision) + "\n";
  return out;
}

std::string curve_csv(const SuCurve& c) {
  std::string out = "bias,seen_acc,unseen_acc\n";
  for (const auto& p : c.points) out += fmt("%.9g", p.bias) + "," + fmt("%.6f", p.seen_acc) + "," + fmt("%.6f", p.unseen_acc) + "\n";
  return out;
}

std::string retrieval_csv(const std::vector<RetrievalResult>& r) {
  std::string out = "fraction,precision_at_k,average_precision\n";
  for (const auto& m : r) out += fmt("%g", m.fraction) + "," + fmt("%.6f", m.precision_at_k) + "," + fmt("%.6f", m.average_precision) + "\n";
  return out;
}

std::pair<ModelParams, TrainConfig> model_for(const std::string& checkpoint, const ZslDataset& ds) {
  auto loaded = load_model(checkpoint);
  const ArchSpec& a = loaded.first.arch;
  if (a.visual_dim != ds.visual_dim() || a.semantic_dim != ds.semantic_dim())
    throw DimensionError("checkpoint expects visual/semantic dims " + std::to_string(a.visual_dim) + "/" +
                         std::to_string(a.semantic_dim) + " but the dataset has " + std::to_string(ds.visual_dim()) +
                         "/" + std::to_string(ds.semantic_dim()));
  return loaded;
}

void cmd_synth(Run& run, const SyntheticSpec& spec, bool csv) {
  spec.validate();  // before anything touches the disk
  const ZslDataset ds = make_synthetic(spec);
  run.create_out();
  run.manifest().config = to_json(spec);
  run.manifest().seeds = {spec.seed};
  save_dataset(ds, run.out(), csv);
  run.produced("manifest.json");
}

void cmd_train(Run& run, const std::string& data, const TrainFlags& flags, bool select) {
  const TrainConfig cfg = flags.resolve();
  const ZslDataset ds = load_dataset(data);
  run.create_out();
  run.manifest().config = to_json(cfg);
  run.manifest().seeds = {cfg.seed};
  run.manifest().inputs = {{"data", data}, {"config", flags.config}};
  run.write("config.json", to_json(cfg).dump(2) + "\n");

  TrainResult result;
  if (select) {
    SelectedModel sel = select_and_train(ds, cfg);
    std::string cv = "lambda,step,top1,auc\n";
    for (const auto& curve : sel.cv.curves)
      for (const auto& r : curve.history.records)
        cv += fmt("%g", curve.lambda) + "," + std::to_string(r.step) + "," + fmt("%.6f", r.top1) + "," + fmt("%.6f", r.auc) + "\n";
    run.write("cv.csv", cv);
    run.manifest().config["selected"] = {{"lambda", sel.cv.best_lambda}, {"step", sel.cv.best_step}};
    result = std::move(sel.final_run);
    TrainConfig final_cfg = cfg;
    final_cfg.loss.lambda_creativity = sel.cv.best_lambda;
    final_cfg.n_steps = sel.cv.best_step;
    save_model(result.model, final_cfg, run.out() / "checkpoint");
  } else {
    result = train(ds, cfg);
    save_model(result.model, cfg, run.out() / "checkpoint");
  }
  run.produced("checkpoint");
  run.write("history.csv", result.history.to_csv());
}

struct EvalFlags {
  std::size_t n_generate = 60;
  std::string metric = "euclidean";
  std::size_t bias_points = 201;
  std::vector<double> fractions{0.25, 0.5, 1.0};
  std::uint64_t seed = 0;

  void add(CLI::App* app, bool with_curve) {
    app->add_option("--n-generate", n_generate, "generated features per class")->capture_default_str();
    app->add_option("--seed", seed, "seed for the generated pools")->capture_default_str();
    app->add_option("--fractions", fractions, "retrieval fractions")->delimiter(',')->capture_default_str();
    if (with_curve) {
      app->add_option("--metric", metric, "pool distance: euclidean or cosine")->capture_default_str();
      app->add_option("--bias-points", bias_points, "points on the bias grid")->capture_default_str();
    }
  }

  EvalConfig resolve() const {
    EvalConfig e;
    e.n_generate = n_generate;
    e.metric = pool_metric_from_string(metric);
    e.bias_points = bias_points;
    e.fractions = fractions;
    e.seed = seed;
    e.validate();
    return e;
  }
};

void cmd_eval(Run& run, const std::string& checkpoint, const std::string& data, const EvalFlags& flags) {
  const EvalConfig ec = flags.resolve();
  const ZslDataset ds = load_dataset(data);
  const auto [model, cfg] = model_for(checkpoint, ds);
  run.create_out();
  run.manifest().inputs = {{"checkpoint", checkpoint}, {"data", data}};
  run.manifest().config = {{"n_generate", ec.n_generate}, {"metric", to_string(ec.metric)},
                           {"bias_points", ec.bias_points}, {"fractions", ec.fractions}};
  run.manifest().seeds = {ec.seed};
  const EvalReport rep = evaluate(model.gen, model.arch, ds, ec);
  run.write("eval.csv", eval_csv(rep));
  run.write("su_curve.csv", curve_csv(rep.su));
}

void cmd_retrieve(Run& run, const std::string& checkpoint, const std::string& data, const EvalFlags& flags) {
  const EvalConfig ec = flags.resolve();
  const ZslDataset ds = load_dataset(data);
  const auto [model, cfg] = model_for(checkpoint, ds);
  run.create_out();
  run.manifest().inputs = {{"checkpoint", checkpoint}, {"data", data}};
  run.manifest().config = {{"n_generate", ec.n_generate}, {"fractions", ec.fractions}};
  run.manifest().seeds = {ec.seed};
  Rng rng(ec.seed, 0x72);
  const Tensor centers = generated_centers(model.gen, model.arch, ds.unseen_semantics, ec.n_generate, rng);
  std::vector<std::size_t> labels(ds.k_unseen());
  for (std::size_t u = 0; u < labels.size(); ++u) labels[u] = ds.k_seen() + u;
  run.write("retrieval.csv",
            retrieval_csv(retrieval_map(centers, labels, ds.unseen_test_features, ds.unseen_test_labels, ec.fractions)));
}

void cmd_sweep(Run& run, const std::string& data, const TrainFlags& flags, const std::vector<double>& grid,
               const std::vector<std::uint64_t>& seeds) {
  TrainConfig cfg = flags.resolve();
  if (!grid.empty()) cfg.lambda_grid = grid;
  if (cfg.lambda_grid.empty()) throw ValidationError("empty lambda grid");
  if (seeds.empty()) throw ValidationError("--seeds must not be empty");
  cfg.validate();
  const ZslDataset ds = load_dataset(data);
  run.create_out();
  run.manifest().config = to_json(cfg);
  run.manifest().seeds = seeds;
  run.manifest().inputs = {{"data", data}, {"config", flags.config}};

  std::string cells = "seed,lambda,best_step,best_auc,top1_at_best,winner\n";
  std::string winners = "seed,lambda,step,auc\n";
  for (std::uint64_t seed : seeds) {
    TrainConfig c = cfg;
    c.seed = seed;
    const CrossValidation cv = cross_validate(ds, c);
    for (std::size_t i = 0; i < cv.curves.size(); ++i) {
      const TrainRecord* best = nullptr;
      for (const auto& r : cv.curves[i].history.records)
        if (!best || r.auc > best->auc) best = &r;
      const TrainRecord none;
      if (!best) best = &none;
      cells += std::to_string(seed) + "," + fmt("%g", cv.curves[i].lambda) + "," + std::to_string(best->step) + "," +
               fmt("%.6f", best->auc) + "," + fmt("%.6f", best->top1) + "," + (i == cv.best_index ? "1" : "0") + "\n";
    }
    winners += std::to_string(seed) + "," + fmt("%g", cv.best_lambda) + "," + std::to_string(cv.best_step) + "," +
               fmt("%.6f", cv.best_auc) + "\n";
  }
  run.write("sweep.csv", cells);
  run.write("winner.csv", winners);
}

void cmd_ablate(Run& run, const std::string& data, const TrainFlags& flags, const std::string& suite_name,
                const std::vector<std::uint64_t>& seeds, const EvalFlags& ef) {
  const TrainConfig cfg = flags.resolve();
  const auto suite = ablation_suite(suite_name);
  if (seeds.empty()) throw ValidationError("--seeds must not be empty");
  const EvalConfig ec = ef.resolve();
  const ZslDataset ds = load_dataset(data);
  run.create_out();
  run.manifest().config = to_json(cfg);
  run.manifest().config["suite"] = suite_name;
  run.manifest().seeds = seeds;
  run.manifest().inputs = {{"data", data}, {"config", flags.config}};
  run.write("ablation.csv", ablation_csv(ablate(ds, cfg, suite, seeds, ec)));
}

int exit_for(const std::exception& e, int code, Run* run) {
  std::cerr << "error: " << e.what() << "\n";
  if (run) {
    try {
      run->finish("failed", e.what());
    } catch (const std::exception& m) {
      std::cerr << "error: could not write run manifest: " << m.what() << "\n";
    }
  }
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Creativity-inspired zero-shot learning toolkit", "cizsl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolkitVersion);

  std::string out, data, checkpoint, suite;
  bool csv = false, select = false;
  SyntheticSpec spec;
  std::string split = "easy";
  TrainFlags tf;
  EvalFlags ef;
  std::vector<double> grid;
  std::vector<std::uint64_t> seeds{1};

  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out", out, std::string("output directory (default: $") + kOutEnv + ")");
  };

  CLI::App* synth = app.add_subcommand("synth", "write a synthetic dataset");
  add_out(synth);
  synth->add_option("--k-seen", spec.k_seen)->capture_default_str();
  synth->add_option("--k-unseen", spec.k_unseen)->capture_default_str();
  synth->add_option("--visual-dim", spec.visual_dim)->capture_default_str();
  synth->add_option("--semantic-dim", spec.semantic_dim)->capture_default_str();
  synth->add_option("--samples-per-class", spec.samples_per_class)->capture_default_str();
  synth->add_option("--cluster-spread", spec.cluster_spread)->capture_default_str();
  synth->add_option("--semantic-noise", spec.semantic_noise)->capture_default_str();
  synth->add_option("--seen-test-fraction", spec.seen_test_fraction)->capture_default_str();
  synth->add_option("--split", split, "easy or hard")->capture_default_str();
  synth->add_option("--seed", spec.seed)->capture_default_str();
  synth->add_flag("--csv", csv, "write matrices as CSV");

  CLI::App* trn = app.add_subcommand("train", "train a model");
  add_out(trn);
  trn->add_option("--data", data, "dataset directory")->required();
  tf.add(trn);
  trn->add_flag("--select", select, "cross-validate lambda and the step count first");

  CLI::App* evl = app.add_subcommand("eval", "evaluate a checkpoint");
  add_out(evl);
  evl->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  evl->add_option("--data", data, "dataset directory")->required();
  ef.add(evl, true);

  CLI::App* swp = app.add_subcommand("sweep", "cross-validate lambda over seeds");
  add_out(swp);
  swp->add_option("--data", data, "dataset directory")->required();
  tf.add(swp);
  swp->add_option("--lambda-grid", grid, "comma separated lambda values")->delimiter(',');
  swp->add_option("--seeds", seeds, "comma separated seeds")->delimiter(',')->capture_default_str();

  CLI::App* abl = app.add_subcommand("ablate", "run an ablation suite");
  add_out(abl);
  abl->add_option("--data", data, "dataset directory")->required();
  abl->add_option("--suite", suite, "suite name")->required();
  tf.add(abl);
  abl->add_option("--seeds", seeds, "comma separated seeds")->delimiter(',')->capture_default_str();
  abl->add_option("--n-generate", ef.n_generate, "generated features per class")->capture_default_str();

  CLI::App* ret = app.add_subcommand("retrieve", "zero-shot retrieval with a checkpoint");
  add_out(ret);
  ret->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  ret->add_option("--data", data, "dataset directory")->required();
  ef.add(ret, false);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  std::optional<Run> run;
  try {
    CLI::App* sub = app.get_subcommands().front();
    run.emplace(sub->get_name(), resolve_out(out));
    if (sub == synth) {
      spec.split_mode = split_mode_from_string(split);
      cmd_synth(*run, spec, csv);
    } else if (sub == trn) {
      cmd_train(*run, data, tf, select);
    } else if (sub == evl) {
      cmd_eval(*run, checkpoint, data, ef);
    } else if (sub == swp) {
      cmd_sweep(*run, data, tf, grid, seeds);
    } else if (sub == abl) {
      cmd_ablate(*run, data, tf, suite, seeds, ef);
    } else if (sub == ret) {
      cmd_retrieve(*run, checkpoint, data, ef);
    }
    run->finish();
    return kExitOk;
  } catch (const ValidationError& e) {
    return exit_for(e, kExitValidation, run ? &*run : nullptr);
  } catch (const NumericError& e) {
    return exit_for(e, kExitNumeric, run ? &*run : nullptr);
  } catch (const IoError& e) {
    return exit_for(e, kExitIo, run ? &*run : nullptr);
  } catch (const std::exception& e) {
    return exit_for(e, kExitOther, run ? &*run : nullptr);
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace cizsl
