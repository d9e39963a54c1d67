#include "sslt/cli.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "sslt/checkpoint.hpp"
#include "sslt/config.hpp"
#include "sslt/errors.hpp"
#include "sslt/evalreport.hpp"
#include "sslt/trainer.hpp"

namespace sslt::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string variant;
  std::string format = "rows";
  std::string checkpoint;
  std::vector<std::string> runs;
};

enum class Method { alternate, baseline, ablation };

ReportFormat parse_format(const std::string& name) {
  return name == "structured" ? ReportFormat::structured : ReportFormat::rows;
}

const char* report_extension(ReportFormat f) { return f == ReportFormat::structured ? ".json" : ".tsv"; }

RunConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
  RunConfig cfg = path.empty() ? parse_config_text("{}") : validate_config(path);
  if (seed) cfg.train.seed = *seed;
  return cfg;
}

std::string config_echo(const RunConfig& cfg) {
  auto j = config_to_json(cfg);
  j["config_hash"] = hex64(config_hash(cfg));
  return j.dump(2) + "\n";
}

// Error raised after the output directory exists; leaves error.txt behind.
struct RunFailure {
  fs::path dir;
  std::uint64_t hash = 0;
};

void write_error_file(const RunFailure& where, const Error* typed, const std::string& message) {
  if (where.dir.empty()) return;
  std::string text = "error: " + std::string(typed ? to_string(typed->kind()) : "internal") + "\n";
  text += "message: " + message + "\n";
  text += "config_hash: " + hex64(where.hash) + "\n";
  try {
    fs::create_directories(where.dir);
    write_file_atomic(where.dir / "error.txt", text);
  } catch (...) {
  }
}

// ---- trace files ---------------------------------------------------------------

std::string render_losses(const LoopTrace& trace, std::uint64_t hash) {
  std::string out = "# sslt-losses v1 config_hash=" + hex64(hash) + "\n";
  out += "phase\tloop\tepoch\tce\tconsistency\ttotal\n";
  auto rows = [&](const char* phase, int loop, const std::vector<EpochLoss>& curve) {
    for (std::size_t e = 0; e < curve.size(); ++e) {
      const auto& l = curve[e];
      out += std::string(phase) + '\t' + std::to_string(loop) + '\t' + std::to_string(e) + '\t' + format_double(l.ce) +
             '\t' + format_double(l.consistency) + '\t' + format_double(l.total) + '\n';
    }
  };
  rows("init_embed", -1, trace.init_embed);
  rows("init_classifier", -1, trace.init_classifier);
  for (const auto& r : trace.loops) {
    rows("stage2", r.loop, r.stage2);
    rows("stage3", r.loop, r.stage3);
  }
  return out;
}

class RunWriter {
 public:
  RunWriter(fs::path dir, const RunConfig& cfg)
      : dir_(std::move(dir)), cfg_(cfg), hash_(config_hash(cfg)), config_json_(config_to_json(cfg)) {
    config_json_["config_hash"] = hex64(hash_);
  }

  std::uint64_t hash() const { return hash_; }
  const fs::path& dir() const { return dir_; }

  void checkpoint(const std::string& name, const ModelState& model) const {
    fs::create_directories(dir_ / "checkpoints");
    save_checkpoint(dir_ / "checkpoints" / (name + ".ckpt"), model, hash_);
  }

  MetricsReport stamp(MetricsReport r) const {
    r.config_hash = hash_;
    r.seed = cfg_.train.seed;
    return r;
  }

  void write_trace(const LoopTrace& trace, const std::optional<MetricsReport>& final_test) const {
    std::vector<MetricsReport> test, pseudo;
    if (trace.init_test) test.push_back(stamp(*trace.init_test));
    for (const auto& r : trace.loops) {
      if (r.test) test.push_back(stamp(*r.test));
      if (r.pseudo) pseudo.push_back(stamp(*r.pseudo));
    }
    if (final_test) test.push_back(stamp(*final_test));
    emit_report(test, dir_ / "test_metrics.tsv", ReportFormat::rows);
    emit_report(pseudo, dir_ / "pseudo_metrics.tsv", ReportFormat::rows);
    write_file_atomic(dir_ / "losses.tsv", render_losses(trace, hash_));

    std::vector<MetricsReport> all = test;
    all.insert(all.end(), pseudo.begin(), pseudo.end());
    emit_report(all, dir_ / "report.json", ReportFormat::structured, &config_json_);
  }

 private:
  fs::path dir_;
  RunConfig cfg_;
  std::uint64_t hash_;
  nlohmann::ordered_json config_json_;
};

// ---- commands --------------------------------------------------------------------

int cmd_gen_data(const Options& o, std::ostream& out, RunFailure& where) {
  const RunConfig cfg = load_config(o.config, o.seed);
  const fs::path dir = resolve_output(o.out);
  where = {dir, config_hash(cfg)};
  fs::create_directories(dir);
  write_file_atomic(dir / "config.json", config_echo(cfg));
  const Task task = build_task(cfg);
  write_dataset(dir, task, cfg.data_seed(), config_hash(cfg));
  out << "labeled " << task.labeled.size() << ", unlabeled " << task.unlabeled.size() << ", test "
      << task.test.size() << " -> " << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, Method method, std::ostream& out, RunFailure& where) {
  const RunConfig cfg = load_config(o.config, o.seed);
  const Variant variant = method == Method::ablation ? parse_variant(o.variant) : Variant::rc;
  const fs::path dir = resolve_output(o.out);
  RunWriter writer(dir, cfg);
  where = {dir, writer.hash()};
  fs::create_directories(dir);
  write_file_atomic(dir / "config.json", config_echo(cfg));

  const Task task = build_task(cfg);
  const EvalContext eval{&task.test, task.unlabeled_truth ? &*task.unlabeled_truth : nullptr, task.splits};

  LoopTrace trace;
  ModelState model = init_decoupled(task.labeled, cfg.train, &trace);
  trace.init_test = evaluate(model, Head::balanced, task.test, task.splits);
  trace.init_test->label = "init";
  writer.checkpoint("init", model);
  writer.write_trace(trace, std::nullopt);

  LoopTrace progress = trace;
  TrainHooks hooks;
  hooks.on_loop = [&](const ModelState& m, const LoopRecord& record) {
    writer.checkpoint("loop" + std::to_string(record.loop), m);
    progress.loops.push_back(record);
    writer.write_trace(progress, std::nullopt);
  };

  RunResult result;
  std::string label;
  switch (method) {
    case Method::alternate:
      result = alternate_from(std::move(model), task.labeled, task.unlabeled, cfg.train, &eval, Variant::rc, &hooks);
      label = "alternate";
      break;
    case Method::baseline:
      result = baseline_from(std::move(model), task.labeled, task.unlabeled, cfg.train, &eval, &hooks);
      label = "pseudo_label";
      break;
    case Method::ablation:
      result = alternate_from(std::move(model), task.labeled, task.unlabeled, cfg.train, &eval, variant, &hooks);
      label = std::string(to_string(variant));
      break;
  }
  result.trace.init_embed = trace.init_embed;
  result.trace.init_classifier = trace.init_classifier;
  result.final_test->label = label;

  writer.checkpoint("final", result.model);
  writer.write_trace(result.trace, result.final_test);

  std::vector<MetricsReport> grid;
  if (result.trace.init_test) grid.push_back(*result.trace.init_test);
  grid.push_back(*result.final_test);
  out << format_grid(grid);
  out << "embedding epochs: " << result.trace.embedding_epochs << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, RunFailure& where) {
  const fs::path dir = resolve_output(o.out);
  const std::string config_path = o.config.empty() ? (dir / "config.json").string() : o.config;
  const RunConfig cfg = load_config(config_path, o.seed);
  const std::uint64_t hash = config_hash(cfg);
  where = {dir, hash};

  const fs::path ckpt_path = o.checkpoint.empty() ? dir / "checkpoints" / "final.ckpt" : fs::path(o.checkpoint);
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (ckpt.config_hash != hash)
    throw DataError(ckpt_path.string() + " was written under config " + hex64(ckpt.config_hash) + ", not " +
                    hex64(hash));
  const Task task = build_task(cfg);
  MetricsReport r = evaluate(ckpt.model, Head::balanced, task.test, task.splits);
  r.label = "eval";
  r.loop = cfg.train.loops;
  r.seed = cfg.train.seed;
  r.config_hash = hash;

  const ReportFormat format = parse_format(o.format);
  auto config_json = config_to_json(cfg);
  const std::vector<MetricsReport> reports{r};
  emit_report(reports, dir / (std::string("eval_metrics") + report_extension(format)), format, &config_json);
  out << format_grid(reports);
  return kExitOk;
}

int cmd_report(const Options& o, std::ostream& out, RunFailure& where) {
  std::vector<MetricsReport> rows;
  for (const auto& run : o.runs) {
    const fs::path path = resolve_output(run) / "test_metrics.tsv";
    std::string text;
    try {
      text = read_file(path);
    } catch (const IoError& e) {
      throw DataError(e.what());
    }
    auto reports = parse_report(text, ReportFormat::rows);
    if (reports.empty()) throw DataError(path.string() + " holds no metrics");
    rows.push_back(reports.back());
  }
  std::map<std::string, int> seen;
  for (const auto& r : rows) ++seen[r.label];
  for (auto& r : rows)
    if (seen[r.label] > 1) r.label += "/s" + std::to_string(r.seed);

  const std::string grid = format_grid(rows);
  out << grid;
  if (!o.out.empty()) {
    const fs::path dir = resolve_output(o.out);
    where = {dir, 0};
    fs::create_directories(dir);
    const ReportFormat format = parse_format(o.format);
    emit_report(rows, dir / (std::string("comparison") + report_extension(format)), format);
    std::string footer;
    for (const auto& r : rows) footer += "# " + r.label + " config_hash=" + hex64(r.config_hash) + "\n";
    write_file_atomic(dir / "grid.txt", grid + footer);
  }
  return kExitOk;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return kExitUsage;
    case ErrorKind::data: return kExitData;
    case ErrorKind::numeric: return kExitNumeric;
    default: return kExitOther;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Alternate-sampling semi-supervised long-tailed recognition", "sslt"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool out_required) {
    sub->add_option("--config", o.config, "flat JSON config (omitted keys take defaults)");
    auto* out_opt = sub->add_option("--out", o.out, "output directory");
    if (out_required) out_opt->required();
    sub->add_option("--seed", o.seed, "override the config seed");
  };
  auto* gen = app.add_subcommand("gen-data", "generate a long-tailed dataset and write it to disk");
  common(gen, true);
  auto* train = app.add_subcommand("train", "decoupled initialization followed by alternate learning");
  common(train, true);
  auto* base = app.add_subcommand("baseline", "Pseudo-Label baseline with the same embedding budget");
  common(base, true);
  auto* ablate = app.add_subcommand("ablate", "alternate learning with a different sampling or data choice");
  common(ablate, true);
  ablate->add_option("--variant", o.variant, "R+R | C+R | C+C | classifier_on_union | no_unsup_embed | R+C")
      ->required();
  auto* eval = app.add_subcommand("eval", "score a checkpoint on the run's test set");
  common(eval, true);
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint file (default RUN/checkpoints/final.ckpt)");
  eval->add_option("--format", o.format, "rows | structured")->check(CLI::IsMember({"rows", "structured"}));
  auto* report = app.add_subcommand("report", "merge final metrics of several runs into one grid");
  report->add_option("--out", o.out, "directory for comparison files");
  report->add_option("--format", o.format, "rows | structured")->check(CLI::IsMember({"rows", "structured"}));
  report->add_option("runs", o.runs, "run directories")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  RunFailure where;
  try {
    if (gen->parsed()) return cmd_gen_data(o, out, where);
    if (train->parsed()) return cmd_train(o, Method::alternate, out, where);
    if (base->parsed()) return cmd_train(o, Method::baseline, out, where);
    if (ablate->parsed()) return cmd_train(o, Method::ablation, out, where);
    if (eval->parsed()) return cmd_eval(o, out, where);
    return cmd_report(o, out, where);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << to_string(e.kind()) << " error: " << e.what() << "\n";
    write_error_file(where, &e, e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    write_error_file(where, nullptr, e.what());
    return kExitOther;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace sslt::cli
