#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "survfuse/config.hpp"
#include "survfuse/manifest.hpp"
#include "survfuse/reports.hpp"
#include "survfuse/train.hpp"

namespace fs = std::filesystem;
using namespace survfuse;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned folds = 0;
  double lambda_dis = -1.0;
  double lambda_surv = -1.0;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_train_flags) {
  cmd->add_option("--config", o.config_path,
                  "Config file (key = value lines; see README for keys)");
  cmd->add_option("--out", o.out_dir,
                  "Output directory (default: $SURVFUSE_OUT or ./out)");
  cmd->add_option("--seed", o.seed, "Override train.seed")
      ->each([&o](const std::string&) { o.seed_set = true; });
  if (with_train_flags) {
    cmd->add_option("--folds", o.folds, "Override train.folds");
    cmd->add_option("--lambda-dis", o.lambda_dis,
                    "Override train.lambda_dis");
    cmd->add_option("--lambda-surv", o.lambda_surv,
                    "Override train.lambda_surv");
    cmd->add_option("--threads", o.threads,
                    "Worker cap for fold parallelism (1 = fully "
                    "deterministic; results are identical either way)");
  }
}

RunConfig resolve_config(const CommonOpts& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) cfg = load_config(o.config_path);
  if (o.seed_set) cfg.seed = o.seed;
  if (o.folds > 0) cfg.folds = o.folds;
  if (o.lambda_dis >= 0.0) cfg.lambda_dis = o.lambda_dis;
  if (o.lambda_surv >= 0.0) cfg.lambda_surv = o.lambda_surv;
  return cfg;
}

fs::path resolve_out(const CommonOpts& o) {
  if (!o.out_dir.empty()) return o.out_dir;
  if (const char* env = std::getenv("SURVFUSE_OUT")) return env;
  return "out";
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

int cmd_generate(const CommonOpts& o) {
  Stopwatch watch;
  const RunConfig cfg = resolve_config(o);
  const fs::path out = resolve_out(o);
  const GeneratedCohort gen = generate_cohort(cfg.gen, cfg.seed);
  fs::create_directories(out);
  save_cohort(out, gen.cohort, gen.membership);
  save_config(out / "config.echo", cfg);

  RunManifest m;
  m.command = "generate";
  m.config_echo = config_echo(cfg);
  m.seed = cfg.seed;
  if (!o.config_path.empty()) {
    m.input_hashes["config"] = file_hash_hex(o.config_path);
  }
  m.output_paths = {(out / "expressions.csv").string(),
                    (out / "survival.csv").string(),
                    (out / "clinical.csv").string(),
                    (out / "pathways.gmt").string(),
                    (out / "patches").string()};
  m.wall_seconds = watch.seconds();
  append_manifest(out, m);
  std::cout << "generated cohort of " << gen.cohort.n() << " patients under "
            << out.string() << "\n";
  return 0;
}

int cmd_validate(const std::string& cohort_dir) {
  const auto problems = validate_cohort_dir(cohort_dir);
  if (problems.empty()) {
    std::cout << "cohort OK\n";
    return 0;
  }
  for (const auto& p : problems) std::cerr << "problem: " << p << "\n";
  return 1;
}

int cmd_crossval(const CommonOpts& o, const std::string& cohort_dir) {
  Stopwatch watch;
  const RunConfig cfg = resolve_config(o);
  const fs::path out = resolve_out(o);
  const LoadedCohort loaded = load_cohort(cohort_dir);
  const std::string hash = cohort_hash(cohort_dir);

  const CrossvalReport report = crossval(cfg, loaded.cohort,
                                         loaded.membership, out, hash,
                                         o.threads);
  const auto paths = write_crossval_report(out, report);
  write_loss_curves_svg(out / "loss_curves.svg", report);
  write_dc_curves_svg(out / "dc_curves.svg", report);

  RunManifest m;
  m.command = "crossval";
  m.config_echo = config_echo(cfg);
  m.seed = cfg.seed;
  m.input_hashes["cohort"] = hash;
  if (!o.config_path.empty()) {
    m.input_hashes["config"] = file_hash_hex(o.config_path);
  }
  for (const auto& p : paths) m.output_paths.push_back(p.string());
  for (const auto& f : report.folds) {
    m.output_paths.push_back(f.checkpoint_path);
  }
  m.wall_seconds = watch.seconds();
  append_manifest(out, m);

  std::cout << render_report_tables({report}, {});
  return 0;
}

int cmd_explain(const CommonOpts& o, const std::vector<std::string>& ckpts,
                const std::string& cohort_dir) {
  Stopwatch watch;
  const RunConfig cfg = resolve_config(o);
  const fs::path out = resolve_out(o);
  const LoadedCohort loaded = load_cohort(cohort_dir);
  const std::string hash = cohort_hash(cohort_dir);

  const bool zero_baseline = cfg.explain_baseline == "zero";
  std::vector<ExplainFoldShares> folds;
  std::string label;
  for (const auto& path : ckpts) {
    const Checkpoint ck = load_checkpoint(path);
    if (ck.cohort_hash != hash) {
      throw std::invalid_argument(
          "checkpoint " + path + " was trained on cohort " + ck.cohort_hash +
          " but " + cohort_dir + " hashes to " + hash +
          " (checkpoint/cohort version mismatch)");
    }
    auto it = ck.config_echo.find("run.label");
    if (it != ck.config_echo.end()) label = it->second;
    folds.push_back(explain_fold(ck, loaded.cohort, loaded.membership,
                                 zero_baseline));
  }
  ExplainReportFile file;
  file.label = label.empty() ? cfg.label : label;
  file.baseline_mode = zero_baseline ? "zero" : "mean";
  file.report = aggregate_shares(folds);
  const auto paths = write_explain_report(out, file);

  RunManifest m;
  m.command = "explain";
  m.config_echo = config_echo(cfg);
  m.seed = cfg.seed;
  m.input_hashes["cohort"] = hash;
  for (const auto& p : ckpts) {
    m.input_hashes["checkpoint:" + p] = file_hash_hex(p);
  }
  for (const auto& p : paths) m.output_paths.push_back(p.string());
  m.wall_seconds = watch.seconds();
  append_manifest(out, m);

  std::cout << render_report_tables({}, {file});
  return 0;
}

int cmd_report(const CommonOpts& o, const std::vector<std::string>& inputs) {
  Stopwatch watch;
  const fs::path out = resolve_out(o);
  std::vector<CrossvalReport> crossvals;
  std::vector<ExplainReportFile> explains;
  for (const auto& path : inputs) {
    std::ifstream probe(path);
    if (!probe) throw std::invalid_argument("cannot open " + path);
    std::string head((std::istreambuf_iterator<char>(probe)),
                     std::istreambuf_iterator<char>());
    if (head.find("\"crossval_report\"") != std::string::npos) {
      crossvals.push_back(read_crossval_report(path));
    } else if (head.find("\"explain_report\"") != std::string::npos) {
      explains.push_back(read_explain_report(path));
    } else {
      throw std::invalid_argument(path + ": unrecognized report kind");
    }
  }
  const std::string rendered = render_report_tables(crossvals, explains);
  fs::create_directories(out);
  {
    std::ofstream f(out / "summary.txt");
    f << rendered;
  }
  for (std::size_t i = 0; i < crossvals.size(); ++i) {
    const std::string suffix =
        crossvals.size() > 1 ? "_" + std::to_string(i) : "";
    write_loss_curves_svg(out / ("loss_curves" + suffix + ".svg"),
                          crossvals[i]);
    write_dc_curves_svg(out / ("dc_curves" + suffix + ".svg"), crossvals[i]);
  }
  RunManifest m;
  m.command = "report";
  for (const auto& p : inputs) m.input_hashes[p] = file_hash_hex(p);
  m.output_paths = {(out / "summary.txt").string()};
  m.wall_seconds = watch.seconds();
  append_manifest(out, m);
  std::cout << rendered;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic multimodal survival pipeline: cohort generation, "
               "disentangled attention fusion training, evaluation and "
               "attribution reports"};
  app.require_subcommand(1);

  CommonOpts gen_opts, cv_opts, ex_opts, rep_opts;
  std::string cohort_dir;
  std::string validate_dir;
  std::vector<std::string> checkpoints;
  std::vector<std::string> report_inputs;

  CLI::App* generate =
      app.add_subcommand("generate", "Generate a synthetic cohort");
  add_common(generate, gen_opts, /*with_train_flags=*/false);

  CLI::App* validate =
      app.add_subcommand("validate", "Validate an on-disk cohort");
  validate->add_option("--cohort", validate_dir, "Cohort directory")
      ->required();

  CLI::App* cv = app.add_subcommand(
      "crossval", "k-fold cross-validated training and evaluation");
  add_common(cv, cv_opts, /*with_train_flags=*/true);
  cv->add_option("--cohort", cohort_dir, "Cohort directory")->required();

  CLI::App* explain = app.add_subcommand(
      "explain", "Attribution report for trained checkpoints");
  add_common(explain, ex_opts, /*with_train_flags=*/false);
  explain->add_option("--checkpoint", checkpoints,
                      "Checkpoint file (repeat for several folds)")
      ->required();
  explain->add_option("--cohort", cohort_dir, "Cohort directory")->required();

  CLI::App* report = app.add_subcommand(
      "report", "Render report files as text tables and charts");
  add_common(report, rep_opts, /*with_train_flags=*/false);
  report->add_option("inputs", report_inputs, "Report JSON files")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(gen_opts);
    if (validate->parsed()) return cmd_validate(validate_dir);
    if (cv->parsed()) return cmd_crossval(cv_opts, cohort_dir);
    if (explain->parsed()) {
      return cmd_explain(ex_opts, checkpoints, cohort_dir);
    }
    if (report->parsed()) return cmd_report(rep_opts, report_inputs);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
