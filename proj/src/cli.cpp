#include "pmd/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include <CLI11.hpp>

#include "pmd/config.hpp"
#include "pmd/report.hpp"
#include "pmd/trainer.hpp"

namespace pmd {

namespace {

namespace fs = std::filesystem;

// Errors always print; "error" (alias "quiet") silences the info chatter.
enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* v = std::getenv("PMD_LOG_LEVEL");
    if (v == nullptr) return LogLevel::kInfo;
    const std::string s(v);
    if (s == "error" || s == "quiet") return LogLevel::kError;
    if (s == "debug") return LogLevel::kDebug;
    return LogLevel::kInfo;
  }();
  return level;
}

std::mutex log_mutex;

void log_line(LogLevel at_least, const std::string& msg) {
  if (log_level() < at_least) return;
  std::lock_guard<std::mutex> lock(log_mutex);
  std::fprintf(stderr, "%s\n", msg.c_str());
}

struct RunTask {
  std::string name;
  TrainConfig config;
  int baseline_slot = -1;  // -1: mutual run, otherwise slot 0 or 1
};

std::vector<RunTask> main_suite(const TrainConfig& base) {
  std::vector<RunTask> tasks;
  tasks.push_back({"baseline-prop", base, 0});
  tasks.push_back({"baseline-flat", base, 1});

  // Plain mutual distillation: both models sample alike, constant weights.
  TrainConfig vanilla = base;
  vanilla.tau_b = vanilla.tau_a;
  vanilla.strategy = StrategyKind::kBi;
  tasks.push_back({"vanilla-md", vanilla, -1});

  TrainConfig uni = base;
  uni.strategy = StrategyKind::kUni;
  tasks.push_back({"uni-pmd", uni, -1});

  TrainConfig bi = base;
  bi.strategy = StrategyKind::kBi;
  tasks.push_back({"bi-pmd", bi, -1});

  TrainConfig aut = base;
  aut.strategy = StrategyKind::kAuto;
  tasks.push_back({"auto-pmd", aut, -1});
  return tasks;
}

struct TaskInstance {
  RunTask task;
  std::uint64_t seed;
  std::string dir;
};

void execute_instance(const TaskInstance& inst, bool corpus_seed_pinned) {
  TrainConfig cfg = inst.task.config;
  cfg.run_seed = inst.seed;
  if (!corpus_seed_pinned) cfg.corpus.seed = inst.seed;

  log_line(LogLevel::kInfo, "running " + inst.task.name + " seed " +
                                std::to_string(inst.seed));
  RunRecord rec = inst.task.baseline_slot < 0
                      ? train_pareto(cfg)
                      : train_baseline(cfg, inst.task.baseline_slot);

  fs::create_directories(inst.dir);
  write_text_file(inst.dir + "/run.csv", run_csv(rec));
  if (!rec.weight_log.empty())
    write_text_file(inst.dir + "/weights.csv", weight_log_csv(rec));
  for (std::size_t i = 0; i < rec.finals.size(); ++i)
    save_checkpoint(rec.finals[i], inst.dir + "/model-" +
                                       std::to_string(rec.labels[i]) +
                                       ".ckpt");
  RunSettings echo;
  echo.train = cfg;
  echo.seeds = {inst.seed};
  echo.corpus_seed_pinned = true;  // the echoed config pins what actually ran
  write_text_file(inst.dir + "/resolved-config.json", serialize_config(echo));
  log_line(LogLevel::kDebug, "wrote " + inst.dir);
}

// Runs every instance, optionally in parallel, then rebuilds the aggregate
// outputs from the CSV files themselves so the summary never contains a
// number that the CSVs cannot reproduce.
int run_instances(const std::vector<TaskInstance>& instances,
                  bool corpus_seed_pinned, int jobs,
                  const std::string& out_dir) {
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::vector<std::string> errors;
  bool aborted = false;

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= instances.size()) return;
      try {
        execute_instance(instances[i], corpus_seed_pinned);
      } catch (const TrainAbortError& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        errors.push_back(e.what());
        aborted = true;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        errors.push_back(e.what());
      }
    }
  };

  const int threads =
      std::max(1, std::min<int>(jobs, static_cast<int>(instances.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (!errors.empty()) {
    for (const auto& e : errors) std::fprintf(stderr, "error: %s\n", e.c_str());
    return aborted ? 2 : 1;
  }

  // name -> seed -> final aggregates, rebuilt from disk.
  std::vector<std::tuple<std::string, std::uint64_t, std::vector<RunAggregate>>>
      points;
  std::map<std::string, std::vector<std::vector<RunAggregate>>> by_name;
  std::vector<std::string> name_order;
  for (const TaskInstance& inst : instances) {
    const auto rows = parse_run_csv(read_text_file(inst.dir + "/run.csv"));
    auto aggs = aggregate_final(rows);
    points.emplace_back(inst.task.name, inst.seed, aggs);
    if (by_name.find(inst.task.name) == by_name.end())
      name_order.push_back(inst.task.name);
    by_name[inst.task.name].push_back(std::move(aggs));
  }
  write_text_file(out_dir + "/pareto-points.csv", pareto_points_csv(points));

  std::vector<std::pair<std::string, std::vector<RunAggregate>>> means;
  for (const std::string& name : name_order) {
    const auto& per_seed = by_name[name];
    std::map<int, RunAggregate> acc;
    std::map<int, int> counts;
    for (const auto& aggs : per_seed)
      for (const RunAggregate& a : aggs) {
        RunAggregate& t = acc[a.model];
        t.model = a.model;
        t.overall_ce += a.overall_ce;
        t.hrl_ce += a.hrl_ce;
        t.lrl_ce += a.lrl_ce;
        t.accuracy += a.accuracy;
        counts[a.model] += 1;
      }
    std::vector<RunAggregate> rows;
    for (auto& [model, a] : acc) {
      const double n = counts[model];
      a.overall_ce /= n;
      a.hrl_ce /= n;
      a.lrl_ce /= n;
      a.accuracy /= n;
      rows.push_back(a);
    }
    means.emplace_back(name, std::move(rows));
  }
  write_text_file(out_dir + "/summary.txt", summary_table(means));
  log_line(LogLevel::kInfo, "wrote " + out_dir + "/summary.txt");
  return 0;
}

std::vector<TaskInstance> expand(const std::vector<RunTask>& tasks,
                                 const std::vector<std::uint64_t>& seeds,
                                 const std::string& out_dir) {
  std::vector<TaskInstance> instances;
  for (const RunTask& t : tasks)
    for (std::uint64_t s : seeds)
      instances.push_back(
          {t, s, out_dir + "/" + t.name + "-seed" + std::to_string(s)});
  return instances;
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_out = true) {
  cmd->add_option("--config", args.config_path, "JSON config file")
      ->required();
  auto* out = cmd->add_option("--out", args.out_dir, "output directory");
  if (needs_out) out->required();
  cmd->add_option("--seeds", args.seeds,
                  "run seeds (overrides the config list)")
      ->delimiter(',');
  cmd->add_option("--jobs", args.jobs, "parallel runs")
      ->check(CLI::PositiveNumber);
}

RunSettings settings_for(const CommonArgs& args) {
  RunSettings s = load_config_file(args.config_path);
  if (!args.seeds.empty()) {
    std::set<std::uint64_t> uniq(args.seeds.begin(), args.seeds.end());
    if (uniq.size() != args.seeds.size())
      throw ConfigError("config: seeds must be distinct");
    s.seeds = args.seeds;
  }
  return s;
}

int cmd_run(const CommonArgs& args, const std::string& suite) {
  RunSettings s = settings_for(args);
  std::vector<RunTask> tasks;
  if (suite == "main") {
    tasks = main_suite(s.train);
  } else if (suite == "single") {
    tasks.push_back({strategy_name(s.train.strategy), s.train, -1});
  } else {
    throw ConfigError("config: unknown suite '" + suite + "'");
  }
  fs::create_directories(args.out_dir);
  return run_instances(expand(tasks, s.seeds, args.out_dir),
                       s.corpus_seed_pinned, args.jobs, args.out_dir);
}

int cmd_sweep_alpha(const CommonArgs& args, std::vector<double> values) {
  RunSettings s = settings_for(args);
  if (values.empty()) values = {0.2, 0.4, 0.6, 0.8};
  const StrategyKind kind = s.train.strategy == StrategyKind::kUni
                                ? StrategyKind::kUni
                                : StrategyKind::kBi;
  std::vector<RunTask> tasks;
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0))
      throw ConfigError("config: sweep values must lie in [0, 1]");
    TrainConfig cfg = s.train;
    cfg.strategy = kind;
    cfg.alpha_hyper = v;
    tasks.push_back({"alpha-" + format_double(v), cfg, -1});
  }
  fs::create_directories(args.out_dir);
  return run_instances(expand(tasks, s.seeds, args.out_dir),
                       s.corpus_seed_pinned, args.jobs, args.out_dir);
}

int cmd_compare_schedulers(const CommonArgs& args) {
  RunSettings s = settings_for(args);
  std::vector<RunTask> tasks;
  for (SchedulerVariant v :
       {SchedulerVariant::kDefault, SchedulerVariant::kFixedOne,
        SchedulerVariant::kVariantTwo, SchedulerVariant::kVariantThree}) {
    TrainConfig cfg = s.train;
    cfg.strategy = StrategyKind::kAuto;
    cfg.scheduler = v;
    tasks.push_back({std::string("sched-") + scheduler_name(v), cfg, -1});
  }
  fs::create_directories(args.out_dir);
  return run_instances(expand(tasks, s.seeds, args.out_dir),
                       s.corpus_seed_pinned, args.jobs, args.out_dir);
}

int cmd_dump_corpus(const std::string& config_path, const std::string& out) {
  RunSettings s = load_config_file(config_path);
  MultilingualCorpus corpus = MultilingualCorpus::generate(s.train.corpus);
  corpus.dump(out);
  log_line(LogLevel::kInfo, "wrote " + out + "/corpus.tsv");
  return 0;
}

int cmd_eval_checkpoint(const std::string& config_path,
                        const std::string& ckpt_path) {
  RunSettings s = load_config_file(config_path);
  ModelParams params = load_checkpoint(ckpt_path);
  if (!(params.dims == s.train.model_dims()))
    throw ConfigError(
        "config: checkpoint dimensions do not match the configured model");
  MultilingualCorpus corpus = MultilingualCorpus::generate(s.train.corpus);
  const auto evals = evaluate(params, corpus);
  std::printf("language,dev_ce,accuracy\n");
  for (std::size_t l = 0; l < evals.size(); ++l)
    std::printf("%zu,%s,%s\n", l, format_double(evals[l].ce).c_str(),
                format_double(evals[l].accuracy).c_str());
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Mutual distillation trainer for tiny multilingual translators"};
  app.require_subcommand(1);

  CommonArgs run_args;
  std::string suite = "main";
  auto* run = app.add_subcommand("run", "train a suite of runs");
  add_common(run, run_args);
  run->add_option("--suite", suite, "main or single");

  CommonArgs sweep_args;
  std::vector<double> sweep_values;
  auto* sweep =
      app.add_subcommand("sweep-alpha", "sweep the constant weight");
  add_common(sweep, sweep_args);
  sweep->add_option("--values", sweep_values, "weights to try")
      ->delimiter(',');

  CommonArgs sched_args;
  auto* sched = app.add_subcommand("compare-schedulers",
                                   "auto search under every step-size rule");
  add_common(sched, sched_args);

  std::string dump_config, dump_out;
  auto* dump = app.add_subcommand("dump-corpus", "write the corpus to disk");
  dump->add_option("--config", dump_config, "JSON config file")->required();
  dump->add_option("--out", dump_out, "output directory")->required();

  std::string eval_config, eval_ckpt;
  auto* evalc =
      app.add_subcommand("eval-checkpoint", "score a saved model");
  evalc->add_option("--config", eval_config, "JSON config file")->required();
  evalc->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return cmd_run(run_args, suite);
    if (sweep->parsed()) return cmd_sweep_alpha(sweep_args, sweep_values);
    if (sched->parsed()) return cmd_compare_schedulers(sched_args);
    if (dump->parsed()) return cmd_dump_corpus(dump_config, dump_out);
    if (evalc->parsed()) return cmd_eval_checkpoint(eval_config, eval_ckpt);
  } catch (const TrainAbortError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("pmd");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace pmd
