#include "sonarfit/cli/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sonarfit/dsp/window_io.hpp"
#include "sonarfit/harness/evaluate.hpp"
#include "sonarfit/harness/pipeline.hpp"
#include "sonarfit/harness/report.hpp"
#include "sonarfit/harness/selftest.hpp"
#include "sonarfit/harness/train.hpp"
#include "sonarfit/sim/clip_io.hpp"

namespace sonarfit::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using harness::ExperimentConfig;

namespace {

constexpr const char* kManifest = "manifest.json";

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string method;
  std::string work_dir;
  bool force = false;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  int verbosity = 1;  // 0 quiet, 1 normal, 2 verbose

  void log(const std::string& line, int level = 1) const {
    if (verbosity >= level) err << line << '\n';
  }
};

ExperimentConfig load(const Common& c, const Context& ctx) {
  std::vector<std::string> overrides = c.overrides;
  if (!c.method.empty()) overrides.push_back("method=" + c.method);
  if (!c.work_dir.empty()) overrides.push_back("paths.work_dir=" + json(c.work_dir).dump());
  auto cfg = harness::resolve_config(harness::Method::Proto, c.config_path, overrides);
  ctx.log("config " + cfg.hash() + " " + cfg.json.dump());
  return cfg;
}

std::string data_hash(const ExperimentConfig& cfg) { return harness::config_hash(cfg.json.at("data")); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorKind::Io, "write to '" + path.string() + "' failed");
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(ErrorKind::Io, "cannot create directory '" + dir.string() + "'");
}

/// True when `dir` holds a manifest with this hash and every listed file.
bool up_to_date(const fs::path& dir, const std::string& hash) {
  const fs::path m = dir / kManifest;
  if (!fs::exists(m)) return false;
  try {
    const json doc = json::parse(read_file(m));
    if (doc.at("config_hash").get<std::string>() != hash) return false;
    for (const auto& f : doc.at("files")) {
      if (!fs::exists(dir / f.get<std::string>())) return false;
    }
    return true;
  } catch (const json::exception&) {
    return false;
  }
}

void write_manifest(const fs::path& dir, const std::string& hash, const std::string& stage,
                    const std::vector<std::string>& files) {
  json doc = {{"stage", stage}, {"config_hash", hash}, {"files", files}};
  write_file(dir / kManifest, doc.dump(2) + "\n");
}

void require_stage(const fs::path& dir, const std::string& hash, const std::string& stage,
                   const std::string& producer) {
  if (!up_to_date(dir, hash)) {
    fail(ErrorKind::Io, "no " + stage + " artifacts for config hash " + hash + " under '" +
                            dir.string() + "'; run `" + producer + "` first");
  }
}

bool skip(const fs::path& dir, const std::string& hash, const Common& c, const Context& ctx,
          const std::string& stage) {
  if (c.force || !up_to_date(dir, hash)) return false;
  ctx.log(stage + ": up to date in " + dir.string() + " (use --force to recompute)");
  return true;
}

// ---- subcommands ---------------------------------------------------------

void cmd_simulate(const Common& c, const Context& ctx) {
  const auto cfg = load(c, ctx);
  const fs::path dir = data_dir(cfg) / "clips";
  const std::string hash = data_hash(cfg);
  if (skip(dir, hash, c, ctx, "simulate")) return;
  const auto profiles = sim::load_profiles(sim::default_profiles_path());
  std::vector<std::string> files;
  for (const auto* spec : {&cfg.data.lab, &cfg.data.uncontrolled}) {
    make_dirs(dir / spec->name);
    const auto draws = harness::draw_subjects(*spec, cfg.data.seed);
    std::vector<std::vector<std::string>> written(draws.size());
    harness::parallel_for(draws.size(), [&](std::size_t i) {
      for (const auto& clip : harness::simulate_subject(*spec, draws[i], profiles)) {
        const std::string stem = spec->name + "/s" + std::to_string(clip.info.subject) + "_" +
                                 std::to_string(clip.info.session);
        sim::write_clip(clip, dir / stem);
        written[i].push_back(stem + ".sfit");
        written[i].push_back(stem + ".jsonl");
      }
    });
    for (auto& w : written) files.insert(files.end(), w.begin(), w.end());
    ctx.log("simulate: " + spec->name + " " + std::to_string(draws.size()) + " subjects x " +
            std::to_string(spec->sessions) + " sessions");
  }
  write_manifest(dir, hash, "simulate", files);
  ctx.out << "clips written to " << dir.string() << '\n';
}

void cmd_featurize(const Common& c, const Context& ctx) {
  const auto cfg = load(c, ctx);
  const std::string hash = data_hash(cfg);
  const fs::path clips = data_dir(cfg) / "clips";
  const fs::path dir = data_dir(cfg) / "windows";
  require_stage(clips, hash, "simulate", "simulate");
  if (skip(dir, hash, c, ctx, "featurize")) return;
  make_dirs(dir);
  const json manifest = json::parse(read_file(clips / kManifest));
  std::vector<std::string> files;
  for (const auto* spec : {&cfg.data.lab, &cfg.data.uncontrolled}) {
    std::vector<std::string> stems;
    for (const auto& f : manifest.at("files")) {
      const std::string name = f.get<std::string>();
      if (name.rfind(spec->name + "/", 0) == 0 && name.ends_with(".sfit")) stems.push_back(name);
    }
    std::vector<std::vector<dsp::SampleWindow>> per_clip(stems.size());
    harness::parallel_for(stems.size(), [&](std::size_t i) {
      per_clip[i] = harness::featurize_clip(sim::read_clip(clips / stems[i]), cfg.data.pool_bins);
    });
    std::vector<dsp::SampleWindow> windows;
    for (auto& v : per_clip) {
      for (auto& w : v) windows.push_back(std::move(w));
    }
    dsp::write_windows(windows, dir / spec->name);
    files.push_back(spec->name + ".sfwd");
    files.push_back(spec->name + ".jsonl");
    ctx.log("featurize: " + spec->name + " " + std::to_string(windows.size()) + " windows");
  }
  write_manifest(dir, hash, "featurize", files);
  ctx.out << "windows written to " << dir.string() << '\n';
}

harness::PreparedData load_windows(const ExperimentConfig& cfg, bool with_split) {
  const std::string hash = data_hash(cfg);
  const fs::path dir = data_dir(cfg) / "windows";
  require_stage(dir, hash, "featurize", "featurize");
  auto lab = dsp::read_windows(dir / "lab");
  auto unc = dsp::read_windows(dir / "uncontrolled");
  if (!with_split) return harness::split_windows(std::move(lab), std::move(unc), cfg.data);
  require_stage(data_dir(cfg), hash, "split", "split");
  const auto sessions = data::sessions_from_json(read_file(data_dir(cfg) / "split.json"));
  return harness::split_windows(std::move(lab), std::move(unc), cfg.data, &sessions);
}

void cmd_split(const Common& c, const Context& ctx) {
  const auto cfg = load(c, ctx);
  const std::string hash = data_hash(cfg);
  const fs::path dir = data_dir(cfg);
  if (skip(dir, hash, c, ctx, "split")) return;
  const auto data = load_windows(cfg, false);
  write_file(dir / "split.json", data::split_to_json(data.split) + "\n");
  write_manifest(dir, hash, "split", {"split.json"});
  ctx.out << "split: " << data.split.basic_training.size() << " basic training, "
          << data.lab_holdout.size() << " lab holdout, " << data.split.subject_development.size()
          << " development, " << data.split.testing.size() << " testing windows\n";
}

void cmd_train(const Common& c, const Context& ctx) {
  const auto cfg = load(c, ctx);
  const fs::path dir = run_dir(cfg);
  const std::string hash = cfg.hash();
  const auto data = load_windows(cfg, true);
  if (skip(dir, hash, c, ctx, "train")) return;
  make_dirs(dir);
  write_file(dir / "config.json", cfg.json.dump(2) + "\n");
  const auto start = std::chrono::steady_clock::now();
  auto result = harness::train(cfg, data.split, [&](const harness::EpochLog& e) {
    std::ostringstream line;
    line << "epoch " << e.epoch << "/" << cfg.train.epochs << " loss " << e.loss;
    if (cfg.method == harness::Method::Da) line << " probe_mmd " << e.probe_mmd;
    ctx.log(line.str(), 2);
  });
  std::ostringstream log;
  log << "epoch,loss,probe_mmd,config_hash\n";
  log.precision(10);
  for (const auto& e : result.history) {
    log << e.epoch << ',' << e.loss << ',';
    if (cfg.method == harness::Method::Da) log << e.probe_mmd;
    log << ',' << hash << '\n';
  }
  write_file(dir / "loss_log.csv", log.str());
  nn::write_checkpoint(result.checkpoint, dir / "checkpoint.sfck");
  write_manifest(dir, hash, "train", {"config.json", "loss_log.csv", "checkpoint.sfck"});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ctx.out << "checkpoint written to " << (dir / "checkpoint.sfck").string() << " (" << secs
          << " s)\n";
}

void cmd_eval(const Common& c, const Context& ctx, const std::string& checkpoint_arg) {
  const auto cfg = load(c, ctx);
  const fs::path dir = run_dir(cfg);
  const std::string hash = cfg.hash();
  fs::path ckpt_path = checkpoint_arg;
  if (ckpt_path.empty()) {
    require_stage(dir, hash, "train", "train");
    ckpt_path = dir / "checkpoint.sfck";
  }
  const fs::path out = dir / "eval.json";
  if (!c.force && checkpoint_arg.empty() && fs::exists(out)) {
    try {
      const json doc = json::parse(read_file(out));
      if (doc.at("config_hash").get<std::string>() == hash) {
        ctx.log("eval: up to date in " + out.string() + " (use --force to recompute)");
        return;
      }
    } catch (const json::exception&) {
    }
  }
  const auto ckpt = nn::read_checkpoint(ckpt_path);
  auto model = harness::Model::from_checkpoint(ckpt);
  if (model->method() != cfg.method) {
    fail(ErrorKind::Config, "checkpoint holds a " + harness::to_string(model->method()) +
                                " model but the config selects " + harness::to_string(cfg.method));
  }
  const auto data = load_windows(cfg, true);
  std::vector<harness::ResultTable> tables;
  if (harness::is_fewshot(cfg.method)) {
    for (std::size_t k : cfg.eval.supports) {
      harness::FewShotEvalOptions opts;
      opts.k_shot = k;
      opts.iterations = cfg.eval.iterations;
      opts.seed = cfg.seed;
      opts.pooled_supports = cfg.eval.pooled_supports;
      tables.push_back(harness::evaluate_fewshot(*model, data.split.subject_development,
                                                 data.split.testing, opts));
    }
  } else {
    tables.push_back(harness::evaluate_closed(*model, data.split.testing));
  }
  json doc = {{"config_hash", hash}, {"tables", json::array()}};
  for (auto& t : tables) {
    harness::tag_table(t, cfg);
    doc["tables"].push_back(harness::table_to_json(t));
    ctx.out << harness::series_label(t) << ": mean accuracy " << t.mean_accuracy() << " %\n";
  }
  make_dirs(dir);
  write_file(out, doc.dump(2) + "\n");
}

void cmd_report(const Common& c, const Context& ctx, std::vector<std::string> runs,
                std::string out_dir) {
  const auto cfg = load(c, ctx);
  const fs::path root = fs::path(cfg.work_dir) / "runs";
  if (runs.empty() && fs::is_directory(root)) {
    for (const auto& e : fs::directory_iterator(root)) {
      if (fs::exists(e.path() / "eval.json")) runs.push_back(e.path().string());
    }
  }
  std::sort(runs.begin(), runs.end());
  if (runs.empty()) fail(ErrorKind::Io, "report: no evaluated runs under '" + root.string() + "'");
  std::vector<harness::ResultTable> tables;
  for (const auto& r : runs) {
    const fs::path p = fs::is_directory(r) ? fs::path(r) / "eval.json" : fs::path(r);
    json doc;
    try {
      doc = json::parse(read_file(p));
    } catch (const json::exception& e) {
      fail(ErrorKind::Io, "'" + p.string() + "' is not valid JSON: " + e.what());
    }
    if (!doc.contains("tables")) fail(ErrorKind::Io, "'" + p.string() + "' holds no result tables");
    for (const auto& t : doc.at("tables")) tables.push_back(harness::table_from_json(t));
  }
  if (out_dir.empty()) out_dir = (fs::path(cfg.work_dir) / "report").string();
  harness::report(tables, out_dir);
  ctx.out << harness::summary_text(tables);
  ctx.out << "report written to " << out_dir << '\n';
}

int cmd_selftest(const Context& ctx, int trials, std::uint64_t seed, const std::string& only) {
  harness::SelfTestOptions opts;
  opts.trials = trials;
  opts.seed = seed;
  if (only == "gradients") opts.dsp = false;
  if (only == "dsp") opts.gradients = false;
  const auto outcomes = harness::run_selftest(opts);
  for (const auto& o : outcomes) {
    char line[256];
    std::snprintf(line, sizeof line, "%s %-8s %-24s %.3e (limit %.1e) %.2f s",
                  o.passed ? "PASS" : "FAIL", o.suite.c_str(), o.name.c_str(), o.value,
                  o.threshold, o.seconds);
    ctx.out << line << '\n';
  }
  const bool ok = harness::all_passed(outcomes);
  ctx.out << (ok ? "selftest passed" : "selftest FAILED") << '\n';
  return ok ? kExitOk : kExitFailure;
}

void add_common(CLI::App* sub, Common& c, bool with_force = true) {
  sub->add_option("-c,--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("-s,--set", c.overrides, "Override a config key, e.g. train.epochs=5");
  sub->add_option("-m,--method", c.method, "baseline, da, siamese, proto or local");
  sub->add_option("-w,--work-dir", c.work_dir, "Artifact directory (paths.work_dir)");
  if (with_force) sub->add_flag("-f,--force", c.force, "Recompute even when artifacts are up to date");
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return kExitConfig;
    case ErrorKind::Io: return kExitIo;
    case ErrorKind::Numeric: return kExitNumeric;
    case ErrorKind::InvalidArgument: return kExitFailure;
  }
  return kExitFailure;
}

fs::path data_dir(const ExperimentConfig& cfg) {
  return fs::path(cfg.work_dir) / ("data-" + data_hash(cfg));
}

fs::path run_dir(const ExperimentConfig& cfg) {
  return fs::path(cfg.work_dir) / "runs" / (harness::to_string(cfg.method) + "-" + cfg.hash());
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ultrasound-Doppler exercise recognition toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // -v and -q also work after the subcommand
  int verbose = 0;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "More log output (repeatable)");
  app.add_flag("-q,--quiet", quiet, "Only print results and errors");

  Common common;
  auto* simulate = app.add_subcommand("simulate", "Render the synthetic audio corpus");
  auto* featurize = app.add_subcommand("featurize", "STFT and window the simulated clips");
  auto* split = app.add_subcommand("split", "Assign sessions to development and testing");
  auto* train = app.add_subcommand("train", "Train one model");
  auto* eval = app.add_subcommand("eval", "Evaluate a trained model");
  auto* report = app.add_subcommand("report", "Collect evaluations into CSV, text and plots");
  auto* selftest = app.add_subcommand("selftest", "Gradient checks and DSP oracles");
  for (auto* sub : {simulate, featurize, split, train, eval, report}) add_common(sub, common);

  double label_ratio = 0.0;
  bool allow_free = false;
  train->add_option("--label-ratio", label_ratio, "DA target label ratio (0, 0.5 or 1)");
  train->add_flag("--allow-free-ratio", allow_free, "Accept label ratios other than 0, 0.5, 1");
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate instead of the run's own");
  std::vector<std::string> runs;
  std::string out_dir;
  report->add_option("--runs", runs, "Run directories or eval.json files (default: all runs)");
  report->add_option("-o,--out", out_dir, "Output directory (default <work_dir>/report)");
  int trials = 20;
  std::uint64_t seed = 1;
  std::string only;
  selftest->add_option("--trials", trials, "Random trials per gradient check")->check(CLI::PositiveNumber);
  selftest->add_option("--seed", seed, "Trial seed");
  selftest->add_option("--only", only, "Run one suite")->check(CLI::IsMember({"gradients", "dsp"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  Context ctx{out, err, quiet ? 0 : 1 + verbose};
  if (train->count("--label-ratio") > 0) {
    common.overrides.push_back("train.label_ratio=" + std::to_string(label_ratio));
  }
  if (allow_free) common.overrides.push_back("train.allow_free_ratio=true");
  try {
    if (*simulate) cmd_simulate(common, ctx);
    if (*featurize) cmd_featurize(common, ctx);
    if (*split) cmd_split(common, ctx);
    if (*train) cmd_train(common, ctx);
    if (*eval) cmd_eval(common, ctx, checkpoint);
    if (*report) cmd_report(common, ctx, runs, out_dir);
    if (*selftest) return cmd_selftest(ctx, trials, seed, only);
  } catch (const Error& e) {
    const char* kind = e.kind() == ErrorKind::Config ? "config"
                       : e.kind() == ErrorKind::Io   ? "io"
                       : e.kind() == ErrorKind::Numeric ? "numeric"
                                                         : "invalid argument";
    err << "error (" << kind << "): " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace sonarfit::cli
