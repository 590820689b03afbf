#include "aqtc/cli.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "aqtc/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace aqtc {

namespace {

void write_json(const fs::path& file, const json& j) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  write_text_file_atomic(file, j.dump(2) + "\n");
}

const fs::path& require_out(const RunConfig& rc) {
  if (!rc.out) throw ConfigError(rc.subcommand + " needs --out");
  return *rc.out;
}

}  // namespace

SyntheticBackend default_backend(std::uint64_t seed) {
  SyntheticBackend::Options o;
  o.seed = seed;
  return SyntheticBackend(o);
}

DatasetManifest resolve_manifest(const RunConfig& rc) {
  if (rc.manifest) return read_manifest(*rc.manifest, rc.data);
  if (fs::exists(rc.data / "manifest.json")) return read_manifest(rc.data / "manifest.json", rc.data);
  auto m = split_dataset(list_task_ids(rc.data), 0.8, rc.seed);
  m.root = rc.data;
  return m;
}

Q2AConfig resolve_model_config(const RunConfig& rc) {
  Q2AConfig c = rc.model_config ? Q2AConfig::from_json(read_json_file(*rc.model_config)) : Q2AConfig{};
  c.seed = rc.seed;
  return c;
}

TrainConfig resolve_train_config(const RunConfig& rc) {
  TrainConfig c = rc.train_config ? TrainConfig::from_json(read_json_file(*rc.train_config)) : TrainConfig{};
  c.seed = rc.seed;
  return c;
}

Corpus resolve_corpus(const RunConfig& rc, const DatasetManifest& manifest, ButtonMode mode) {
  if (rc.backend == Backend::kSynthetic) return build_corpus(manifest, default_backend(rc.seed), mode);
  return load_corpus(manifest, mode);
}

GeneratorSummary cmd_generate(const RunConfig& rc) {
  SynthConfig sc = rc.synth_config ? SynthConfig::from_json(read_json_file(*rc.synth_config)) : SynthConfig{};
  sc.seed = rc.seed;
  if (rc.tasks) sc.tasks = *rc.tasks;
  if (rc.history_dependent) sc.history_dependent = true;
  sc.validate();
  const fs::path root = rc.out ? *rc.out : rc.data;
  if (root.empty()) throw ConfigError("generate needs --data or --out");
  const auto summary = generate_dataset(sc, root);
  std::vector<std::string> ids;
  for (int i = 0; i < sc.tasks; ++i) ids.push_back(generate_task(sc, i).task.task_id);
  if (ids.size() >= 2) {
    auto m = split_dataset(ids, 0.8, sc.seed);
    m.root = root;
    write_manifest(root / "manifest.json", m);
  }
  return summary;
}

std::vector<std::string> cmd_validate(const RunConfig& rc) {
  std::vector<std::string> out;
  const auto ids = list_task_ids(rc.data);
  if (ids.empty()) out.push_back(rc.data.string() + ": no task directories");
  for (const auto& id : ids) {
    try {
      const auto task = load_task(rc.data / id);
      if (fs::exists(rc.data / id / "meta.json"))
        for (const auto& v : check_oracle(task, read_oracle(rc.data / id))) out.push_back(id + ": " + v);
    } catch (const ValidationError& e) {
      for (const auto& v : e.violations()) out.push_back(id + ": " + v);
    } catch (const DataError& e) {
      out.push_back(id + ": " + e.what());
    }
  }
  return out;
}

DatasetStats cmd_stats(const RunConfig& rc) { return dataset_stats(resolve_manifest(rc)); }

int cmd_features(const RunConfig& rc) {
  if (rc.backend != Backend::kSynthetic && rc.backend != Backend::kCache)
    throw ConfigError("unknown backend");
  const auto backend = default_backend(rc.seed);
  int written = 0;
  for (const auto& id : list_task_ids(rc.data)) {
    const auto task = load_task(rc.data / id);
    for (auto mode : {ButtonMode::kNone, ButtonMode::kMask, ButtonMode::kReverse, ButtonMode::kBoth}) {
      write_cache(cache_path(rc.data, id, mode), bundle(task, backend, mode));
      ++written;
    }
  }
  return written;
}

TrainResult cmd_train(const RunConfig& rc) {
  const auto& out = require_out(rc);
  const auto manifest = resolve_manifest(rc);
  const auto model = resolve_model_config(rc);
  const auto tc = resolve_train_config(rc);
  const auto corpus = resolve_corpus(rc, manifest, model.button_mode);
  fs::create_directories(out);
  std::ostringstream log;
  auto result = train(corpus, model, tc, &log);
  write_text_file_atomic(out / "train_log.jsonl", log.str());
  result.checkpoint.save(out / "checkpoint.bin");
  return result;
}

EvalReport cmd_eval(const RunConfig& rc) {
  if (!rc.checkpoint) throw ConfigError("eval needs --checkpoint");
  const auto ck = Checkpoint::load(*rc.checkpoint);
  const auto manifest = resolve_manifest(rc);
  const auto corpus = resolve_corpus(rc, manifest, ck.params.config.button_mode);
  auto report = evaluate(corpus.val.tasks, corpus.val.bundles, ck.params, rc.eval_mode);
  if (rc.out) write_json(*rc.out / "eval_report.json", report.to_json());
  return report;
}

json cmd_baseline(const RunConfig& rc) {
  const auto manifest = resolve_manifest(rc);
  std::vector<TaskInstance> val;
  for (const auto& id : manifest.val_ids()) val.push_back(load_task(manifest.root / id));
  const auto counts = candidate_counts(val);
  const auto analytic = random_baseline_expectation(counts);
  const auto mc = monte_carlo_random(counts, rc.trials, derive_seed(rc.seed, 0xBA5E));
  const json j = {{"analytic", analytic.to_json()}, {"monte_carlo", mc.to_json()}, {"trials", rc.trials}};
  if (rc.out) write_json(*rc.out / "baseline.json", j);
  return j;
}

std::vector<AblationCell> ablation_cells(const Q2AConfig& base) {
  std::vector<AblationCell> cells;
  for (auto mode : {ButtonMode::kNone, ButtonMode::kMask, ButtonMode::kReverse, ButtonMode::kBoth}) {
    Q2AConfig c = base;
    c.button_mode = mode;
    cells.push_back({"button", to_string(mode), c});
  }
  for (int v = 0; v < 2; ++v)
    for (int s = 0; s < 2; ++s) {
      Q2AConfig c = base;
      c.use_video = v != 0;
      c.use_script = s != 0;
      if (!c.use_script) c.att_qa_s = c.att_s_v = c.att_transfer = false;
      if (!c.use_video) c.att_s_v = c.att_transfer = false;
      cells.push_back({"modality", std::string(v ? "video" : "no_video") + "+" + (s ? "script" : "no_script"), c});
    }
  const bool rows[5][3] = {{false, false, false}, {true, false, false}, {false, true, false}, {true, true, false},
                           {true, true, true}};
  for (const auto& r : rows) {
    Q2AConfig c = base;
    c.use_video = c.use_script = true;
    c.att_qa_s = r[0];
    c.att_s_v = r[1];
    c.att_transfer = r[2];
    std::string name = std::string(r[0] ? "qa_s" : "-") + "," + (r[1] ? "s_v" : "-") + "," + (r[2] ? "transfer" : "-");
    cells.push_back({"grounding", name, c});
  }
  for (auto kind : {StepsKind::kMlp, StepsKind::kGru})
    for (bool hist : {false, true}) {
      Q2AConfig c = base;
      c.steps_kind = kind;
      c.use_history = hist;
      cells.push_back({"steps", to_string(kind) + (hist ? "+history" : "-history"), c});
    }
  return cells;
}

json cmd_ablate(const RunConfig& rc, std::ostream* progress) {
  const auto& out = require_out(rc);
  const auto manifest = resolve_manifest(rc);
  const auto base = resolve_model_config(rc);
  const auto tc = resolve_train_config(rc);
  std::map<ButtonMode, Corpus> corpora;
  json cells = json::array();
  for (const auto& cell : ablation_cells(base)) {
    if (!corpora.contains(cell.config.button_mode))
      corpora.emplace(cell.config.button_mode, resolve_corpus(rc, manifest, cell.config.button_mode));
    const auto result = train(corpora.at(cell.config.button_mode), cell.config, tc);
    const auto& corpus = corpora.at(cell.config.button_mode);
    const auto report = evaluate(corpus.val.tasks, corpus.val.bundles, result.checkpoint.params, rc.eval_mode);
    std::string file = cell.grid + "_" + cell.name;
    for (auto& ch : file)
      if (ch == ',' || ch == '+' || ch == '-') ch = '_';
    write_json(out / (file + ".json"), report.to_json());
    json row = {{"grid", cell.grid},   {"cell", cell.name},   {"r1", report.r1},
                {"r3", report.r3},     {"mr", report.mr},     {"mrr", report.mrr},
                {"config", cell.config.to_json()}};
    if (progress)
      *progress << cell.grid << " " << cell.name << " R@1 " << format_metric(report.r1, 1) << " R@3 "
                << format_metric(report.r3, 1) << " MR " << format_metric(report.mr, 2) << " MRR "
                << format_metric(report.mrr, 3) << "\n"
                << std::flush;
    cells.push_back(std::move(row));
  }
  const json combined = {{"cells", cells}, {"eval_mode", to_string(rc.eval_mode)}};
  write_json(out / "ablation.json", combined);
  return combined;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"aqtc: question-driven task completion toolkit"};
  app.require_subcommand(1);
  RunConfig rc;
  std::string data, manifest, model_config, train_config, out_dir, checkpoint, synth_config;
  std::string backend = "cache", eval_mode = "free";
  std::uint64_t seed = 0;
  int trials = 10000;
  int tasks = -1;
  bool history = false;

  auto common = [&](CLI::App* sub, bool needs_data) {
    auto* d = sub->add_option("--data", data, "dataset root");
    if (needs_data) d->required();
    sub->add_option("--seed", seed, "master seed");
  };
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  common(gen, false);
  gen->add_option("--out", out_dir, "dataset root (alias of --data)");
  gen->add_option("--tasks", tasks, "number of tasks");
  gen->add_option("--config", synth_config, "generator config JSON");
  gen->add_flag("--history", history, "history-dependent corpus");

  auto* val = app.add_subcommand("validate", "check every task, exit 1 on violations");
  common(val, true);

  auto* stats = app.add_subcommand("stats", "dataset statistics as JSON");
  common(stats, true);
  stats->add_option("--manifest", manifest);
  stats->add_option("--out", out_dir);

  auto* feat = app.add_subcommand("features", "write feature caches for every task");
  common(feat, true);
  feat->add_option("--backend", backend)->check(CLI::IsMember({"synthetic", "cache"}));

  auto add_model_flags = [&](CLI::App* sub) {
    sub->add_option("--manifest", manifest);
    sub->add_option("--model-config", model_config);
    sub->add_option("--train-config", train_config);
    sub->add_option("--backend", backend)->check(CLI::IsMember({"synthetic", "cache"}));
  };
  auto* tr = app.add_subcommand("train", "train and write checkpoint.bin + train_log.jsonl");
  common(tr, true);
  add_model_flags(tr);
  tr->add_option("--out", out_dir)->required();

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the val split");
  common(ev, true);
  ev->add_option("--manifest", manifest);
  ev->add_option("--backend", backend)->check(CLI::IsMember({"synthetic", "cache"}));
  ev->add_option("--checkpoint", checkpoint)->required();
  ev->add_option("--eval-mode", eval_mode)->check(CLI::IsMember({"free", "forced"}));
  ev->add_option("--out", out_dir);

  auto* bl = app.add_subcommand("baseline", "analytic and Monte Carlo random baselines");
  common(bl, true);
  bl->add_option("--manifest", manifest);
  bl->add_option("--trials", trials)->check(CLI::PositiveNumber);
  bl->add_option("--out", out_dir);

  auto* ab = app.add_subcommand("ablate", "train and evaluate the 17 ablation cells");
  common(ab, true);
  add_model_flags(ab);
  ab->add_option("--eval-mode", eval_mode)->check(CLI::IsMember({"free", "forced"}));
  ab->add_option("--out", out_dir)->required();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  const auto* sub = app.get_subcommands().front();
  rc.subcommand = sub->get_name();
  rc.data = data;
  if (!manifest.empty()) rc.manifest = manifest;
  if (!model_config.empty()) rc.model_config = model_config;
  if (!train_config.empty()) rc.train_config = train_config;
  if (!out_dir.empty()) rc.out = out_dir;
  if (!checkpoint.empty()) rc.checkpoint = checkpoint;
  if (!synth_config.empty()) rc.synth_config = synth_config;
  if (tasks >= 0) rc.tasks = tasks;
  rc.seed = seed;
  rc.trials = trials;
  rc.backend = backend == "synthetic" ? Backend::kSynthetic : Backend::kCache;
  rc.eval_mode = eval_mode == "forced" ? UnrollMode::kTeacherForced : UnrollMode::kFreeRunning;
  rc.history_dependent = history;

  try {
    if (rc.subcommand == "generate") {
      out << cmd_generate(rc).to_json().dump(2) << "\n";
    } else if (rc.subcommand == "validate") {
      const auto v = cmd_validate(rc);
      for (const auto& line : v) out << line << "\n";
      if (!v.empty()) return 1;
      out << "ok\n";
    } else if (rc.subcommand == "stats") {
      const auto j = cmd_stats(rc).to_json();
      if (rc.out) write_json(*rc.out / "stats.json", j);
      out << j.dump(2) << "\n";
    } else if (rc.subcommand == "features") {
      out << cmd_features(rc) << " caches written\n";
    } else if (rc.subcommand == "train") {
      const auto r = cmd_train(rc);
      for (const auto& e : r.log) out << e.to_json().dump() << "\n";
    } else if (rc.subcommand == "eval") {
      out << cmd_eval(rc).to_json().dump(2) << "\n";
    } else if (rc.subcommand == "baseline") {
      out << cmd_baseline(rc).dump(2) << "\n";
    } else if (rc.subcommand == "ablate") {
      cmd_ablate(rc, &out);
    }
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    err << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace aqtc
