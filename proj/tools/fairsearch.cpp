#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fairsearch/error.hpp"
#include "fairsearch/harness.hpp"

namespace fsx = fairsearch;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 1;

void addSearchFlags(CLI::App* cmd, fsx::SearchConfig& cfg) {
  cmd->add_option("--seeds", cfg.n_seeds, "Number of K-Means seeds")->capture_default_str();
  cmd->add_option("--global-iter", cfg.global_iter, "Global generation rounds")->capture_default_str();
  cmd->add_option("--local-iter", cfg.local_iter, "Local generation steps")->capture_default_str();
  cmd->add_option("--step", cfg.step, "Perturbation step in normalized units")->capture_default_str();
  cmd->add_option("--eps", cfg.pgd_eps, "FGSM step and PGD radius")->capture_default_str();
  cmd->add_option("--alpha", cfg.pgd_alpha, "PGD step")->capture_default_str();
  cmd->add_option("--pgd-steps", cfg.pgd_steps, "PGD iterations")->capture_default_str();
  cmd->add_option("--max-pool", cfg.max_pool, "Cap on a global round's seed set (0 = none)")
      ->capture_default_str();
  cmd->add_option("--clusters", cfg.clusters, "K-Means clusters")->capture_default_str();
  cmd->add_option("--counterpart-cap", cfg.counterpart_cap,
                  "Sample counterparts beyond this many combinations")
      ->capture_default_str();
  cmd->add_option("--rng-seed", cfg.rng_seed, "Seed for every random draw")->capture_default_str();
}

void addModelInputs(CLI::App* cmd, std::filesystem::path& dataset, std::filesystem::path& schema,
                    std::filesystem::path& model) {
  cmd->add_option("--dataset", dataset, "CSV dataset")->required();
  cmd->add_option("--schema", schema, "Schema JSON")->required();
  cmd->add_option("--model", model, "Model JSON written by train")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Accurate-fairness testing and repair for tabular classifiers"};
  app.set_version_flag("--version", std::string(fsx::toolVersion()));
  app.require_subcommand(1);

  fsx::TrainCommand train;
  std::string optimizer = "adam";
  auto* train_cmd = app.add_subcommand("train", "Train the baseline classifier");
  train_cmd->add_option("--dataset", train.dataset, "CSV dataset")->required();
  train_cmd->add_option("--schema", train.schema, "Schema JSON")->required();
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  train_cmd->add_option("--epochs", train.train.epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", train.train.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", train.train.learning_rate)->capture_default_str();
  train_cmd->add_option("--optimizer", optimizer)->check(CLI::IsMember({"adam", "sgd"}))
      ->capture_default_str();
  train_cmd->add_option("--train-fraction", train.train_fraction)->capture_default_str();
  train_cmd->add_option("--rng-seed", train.train.rng_seed)->capture_default_str();

  fsx::GenerateCommand generate;
  std::string technique = "robustfair";
  auto* generate_cmd = app.add_subcommand("generate", "Search for false or biased instances");
  addModelInputs(generate_cmd, generate.dataset, generate.schema, generate.model);
  generate_cmd->add_option("--technique", technique)
      ->check(CLI::IsMember({"robustfair", "fgsm", "pgd"}))
      ->capture_default_str();
  generate_cmd->add_option("--out", generate.out, "Output directory")->required();
  addSearchFlags(generate_cmd, generate.search);

  fsx::RetrainCommand retrain;
  auto* retrain_cmd = app.add_subcommand("retrain", "Retrain with detected instances");
  addModelInputs(retrain_cmd, retrain.dataset, retrain.schema, retrain.model);
  retrain_cmd->add_option("--instances", retrain.instances, "Directories written by generate")
      ->required();
  retrain_cmd->add_option("--fraction", retrain.options.fraction)->capture_default_str();
  retrain_cmd->add_flag("--stratified", retrain.options.stratified,
                        "Sample the same fraction from each of TB, FF and FB");
  retrain_cmd->add_option("--rng-seed", retrain.options.rng_seed)->capture_default_str();
  retrain_cmd->add_option("--out", retrain.out, "Output directory")->required();

  fsx::SweepCommand sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid over seeds and iteration counts");
  addModelInputs(sweep_cmd, sweep.dataset, sweep.schema, sweep.model);
  sweep_cmd->add_option("--out", sweep.out, "Output directory")->required();
  sweep_cmd->add_option("--seeds", sweep.seeds, "Seed counts, comma separated")->delimiter(',');
  sweep_cmd->add_option("--global-iter", sweep.global_iters)->delimiter(',');
  sweep_cmd->add_option("--local-iter", sweep.local_iters)->delimiter(',');
  sweep_cmd->add_option("--step", sweep.base.step)->capture_default_str();
  sweep_cmd->add_option("--max-pool", sweep.base.max_pool)->capture_default_str();
  sweep_cmd->add_option("--rng-seed", sweep.base.rng_seed)->capture_default_str();

  fsx::ReportCommand report;
  auto* report_cmd = app.add_subcommand("report", "Rebuild the confusion report of a run");
  report_cmd->add_option("--schema", report.schema)->required();
  report_cmd->add_option("--model", report.model)->required();
  report_cmd->add_option("--instances", report.instances, "Directory written by generate")
      ->required();
  report_cmd->add_option("--out", report.out, "Write report files here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train_cmd) {
      train.train.optimizer = fsx::optimizerFromString(optimizer);
      const auto summary = fsx::cmdTrain(train);
      std::cout << "model: " << summary.model_path.string() << "\n"
                << "final loss: " << summary.final_loss << "\n"
                << "test ACC: " << fsx::formatRate(summary.test_report.accuracy())
                << "  IF: " << fsx::formatRate(summary.test_report.individualFairness()) << "\n";
    } else if (*generate_cmd) {
      generate.technique = fsx::techniqueFromString(technique);
      const auto run = fsx::cmdGenerate(generate);
      for (const auto& w : run.warnings) std::cerr << "warning: " << w << "\n";
      const auto& r = run.report;
      std::cout << "emissions: " << r.sum() << "  N_F: " << r.falseCount()
                << "  N_B: " << r.biasedCount() << "  N_F|B: " << r.falseOrBiasedCount()
                << "  N_FF: " << r.ff() << "\n";
    } else if (*retrain_cmd) {
      const auto outcome = fsx::cmdRetrain(retrain);
      std::cout << "sampled " << outcome.sampled << " of " << outcome.detected << "\n"
                << "ACC " << fsx::formatRate(outcome.before.accuracy()) << " -> "
                << fsx::formatRate(outcome.after.accuracy()) << "\n"
                << "IF  " << fsx::formatRate(outcome.before.individualFairness()) << " -> "
                << fsx::formatRate(outcome.after.individualFairness()) << "\n";
    } else if (*sweep_cmd) {
      if (sweep.seeds.empty()) sweep.seeds = {sweep.base.n_seeds};
      if (sweep.global_iters.empty()) sweep.global_iters = {sweep.base.global_iter};
      if (sweep.local_iters.empty()) sweep.local_iters = {sweep.base.local_iter};
      const auto rows = fsx::cmdSweep(sweep);
      std::cout << fsx::sweepCsv(rows);
    } else if (*report_cmd) {
      const auto r = fsx::cmdReport(report);
      std::cout << fsx::ConfusionReport::csvHeader() << "\n" << r.csvRow() << "\n";
    }
  } catch (const fsx::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const fsx::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
