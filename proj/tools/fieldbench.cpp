// fieldbench: dataset generation, training, evaluation and reporting for
// uncertainty-aware scalar-field reconstruction benchmarks.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime fault.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "fieldbench/bench/config.hpp"
#include "fieldbench/bench/dataset.hpp"
#include "fieldbench/bench/report.hpp"
#include "fieldbench/bench/run.hpp"
#include "fieldbench/uq/losses.hpp"

namespace fb = fieldbench;
namespace bench = fieldbench::bench;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonOpts {
  std::string config_path;
  std::string profile;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  int jobs = int(std::thread::hardware_concurrency());
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_profile = true) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  if (with_profile)
    cmd->add_option("--profile", opts.profile, "built-in preset: desk or full")
        ->check(CLI::IsMember({"desk", "full"}));
  cmd->add_option("--output", opts.output_dir, "output directory (overrides config)");
  cmd->add_option("--seed", opts.seed, "root seed (overrides config)");
  cmd->add_option("--jobs", opts.jobs, "worker threads")->check(CLI::PositiveNumber);
}

bench::Profile require_profile(const CommonOpts& opts) {
  const auto p = bench::profile_from_name(opts.profile);
  if (!p) throw bench::ConfigError("pass either --config FILE or --profile {desk,full}");
  return *p;
}

int run_gen_data(const CommonOpts& opts, const std::string& model_name) {
  bench::DatasetConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = bench::parse_dataset_config(opts.config_path);
  } else {
    const auto model = bench::perceptual_model_from_name(model_name);
    if (!model)
      throw bench::ConfigError("gen-data with --profile needs --model {pointwise,conic,nadir}");
    cfg = bench::profile_dataset_config(require_profile(opts), *model, opts.seed.value_or(0));
  }
  if (opts.seed) cfg.root_seed = *opts.seed;
  if (!opts.output_dir.empty()) cfg.output_dir = opts.output_dir;
  if (cfg.output_dir.empty())
    throw bench::ConfigError("gen-data: pass --output or set output_dir in the config");

  const auto manifest = bench::generate_dataset(cfg, cfg.output_dir, opts.jobs);
  std::printf("dataset: %s\n  model=%s samples=%d train=%zu test=%zu seed=%llu\n",
              cfg.output_dir.string().c_str(), bench::perceptual_model_name(cfg.model),
              cfg.n_samples, manifest.train_ids.size(), manifest.test_ids.size(),
              static_cast<unsigned long long>(cfg.root_seed));
  return kExitOk;
}

int run_train(const CommonOpts& opts, const std::string& method_name,
              const std::string& dataset) {
  bench::TrainRunConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = bench::parse_train_config(opts.config_path);
  } else {
    const auto method = fb::uq::train_method_from_name(method_name);
    if (!method) {
      if (bench::eval_method_from_name(method_name))
        throw bench::ConfigError("method `" + method_name +
                                 "` requires no training (use the evaluate subcommand)");
      throw bench::ConfigError("train with --profile needs --method {edl,ensemble,mcd}");
    }
    cfg = bench::profile_train_config(require_profile(opts), *method, opts.seed.value_or(0));
  }
  if (!dataset.empty()) cfg.dataset_path = dataset;
  if (opts.seed) cfg.train.seed = *opts.seed;
  if (!opts.output_dir.empty()) cfg.output_dir = opts.output_dir;
  if (cfg.dataset_path.empty())
    throw bench::ConfigError("train: pass --dataset or set dataset_path in the config");
  if (cfg.output_dir.empty())
    throw bench::ConfigError("train: pass --output or set output_dir in the config");

  const auto result = bench::run_training(cfg, opts.jobs);
  std::printf("trained %s: %zu checkpoint(s) in %s\n", fb::uq::train_method_name(cfg.method),
              result.checkpoints.size(), cfg.output_dir.string().c_str());
  return kExitOk;
}

int run_evaluate(const CommonOpts& opts, const std::string& method_name,
                 const std::string& dataset, const std::string& checkpoints) {
  bench::EvalRunConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = bench::parse_eval_config(opts.config_path);
  } else {
    const auto method = bench::eval_method_from_name(method_name);
    if (!method)
      throw bench::ConfigError("evaluate with --profile needs --method {edl,ensemble,mcd,gp}");
    cfg = bench::profile_eval_config(require_profile(opts), *method, opts.seed.value_or(0));
  }
  if (!dataset.empty()) cfg.dataset_path = dataset;
  if (!checkpoints.empty()) cfg.checkpoint_dir = checkpoints;
  if (opts.seed) {
    cfg.seed = *opts.seed;
    cfg.gp.seed = *opts.seed;
  }
  if (!opts.output_dir.empty()) cfg.output_dir = opts.output_dir;
  if (cfg.dataset_path.empty())
    throw bench::ConfigError("evaluate: pass --dataset or set dataset_path in the config");
  if (cfg.output_dir.empty())
    throw bench::ConfigError("evaluate: pass --output or set output_dir in the config");
  cfg.validate();

  const auto out = bench::run_evaluation(cfg, opts.jobs);
  std::printf("evaluated %s on %zu test samples -> %s\n",
              bench::eval_method_name(cfg.method), out.records.size(),
              out.summary_json.string().c_str());
  return kExitOk;
}

int run_report_cmd(const std::vector<std::string>& dirs, const std::string& output) {
  if (output.empty()) throw bench::ConfigError("report: pass --output DIR");
  std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
  const auto out = bench::run_report(paths, output);
  std::printf("report written to %s\n", out.text.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uncertainty-aware field reconstruction benchmark"};
  app.require_subcommand(1);

  CommonOpts gen_opts, train_opts, eval_opts;
  std::string gen_model, train_method, train_dataset;
  std::string eval_method, eval_dataset, eval_checkpoints;
  std::vector<std::string> report_dirs;
  std::string report_output;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen, gen_opts);
  gen->add_option("--model", gen_model, "perceptual model: pointwise, conic or nadir");

  auto* train = app.add_subcommand("train", "train a deep uncertainty method");
  add_common(train, train_opts);
  train->add_option("--method", train_method, "edl, ensemble or mcd");
  train->add_option("--dataset", train_dataset, "dataset directory");

  auto* eval = app.add_subcommand("evaluate", "evaluate a method on the test split");
  add_common(eval, eval_opts);
  eval->add_option("--method", eval_method, "edl, ensemble, mcd or gp");
  eval->add_option("--dataset", eval_dataset, "dataset directory");
  eval->add_option("--checkpoints", eval_checkpoints, "checkpoint directory (deep methods)");

  auto* report = app.add_subcommand("report", "combine evaluation results into tables");
  report->add_option("dirs", report_dirs, "evaluation output directories")->required();
  report->add_option("--output", report_output, "report output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return run_gen_data(gen_opts, gen_model);
    if (train->parsed()) return run_train(train_opts, train_method, train_dataset);
    if (eval->parsed()) return run_evaluate(eval_opts, eval_method, eval_dataset,
                                            eval_checkpoints);
    if (report->parsed()) return run_report_cmd(report_dirs, report_output);
  } catch (const bench::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fb::uq::ConfigMismatch& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fb::uq::NonFiniteLoss& e) {
    std::cerr << "training fault: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
