#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairsearch/confusion.hpp"
#include "fairsearch/generate.hpp"
#include "fairsearch/instance.hpp"
#include "fairsearch/nncore.hpp"
#include "fairsearch/schema.hpp"
#include "json.hpp"

namespace fairsearch {

std::string_view toolVersion();

// ---------------------------------------------------------------------------
// Experiment building blocks
// ---------------------------------------------------------------------------

struct DataSplit {
  std::vector<Instance> train;
  std::vector<Instance> test;
};

/// Seeded shuffle, then the first round(train_fraction * n) rows train.
DataSplit splitDataset(std::span<const Instance> data, double train_fraction, std::uint64_t seed);

struct EvaluationOptions {
  std::size_t counterpart_cap = kDefaultCounterpartCap;
  double threshold = 0.5;
  std::uint64_t rng_seed = 0;  // only used when counterparts are sampled
};

/// Classifies every labeled instance against its similar sub-population.
std::vector<FairnessCategory> classifyAll(const DenseNetwork& net, const DatasetSchema& schema,
                                          std::span<const Instance> data,
                                          const EvaluationOptions& options);
ConfusionReport evaluateModel(const DenseNetwork& net, const DatasetSchema& schema,
                              std::span<const Instance> data, const EvaluationOptions& options);

/// Classifies generated instances using their binarized approx_label as
/// ground truth.
std::vector<FairnessCategory> classifyGenerated(const DenseNetwork& net,
                                                const DatasetSchema& schema,
                                                std::span<const GeneratedInstance> instances,
                                                const EvaluationOptions& options);

enum class Technique { RobustFair, FGSM, PGD };

std::string_view toString(Technique technique);
Technique techniqueFromString(std::string_view name);

struct TechniqueRun {
  std::vector<GeneratedInstance> instances;  // for RobustFair: R_G followed by R_L
  std::vector<FairnessCategory> categories;
  ConfusionReport report;
  std::size_t seed_count = 0;
  std::size_t searches = 0;
  std::size_t global_count = 0;
  std::size_t local_count = 0;
  bool truncated = false;
  std::vector<std::string> warnings;

  nlohmann::json summaryJson() const;
};

/// Runs one technique against `pool` (the test split). RobustFair and PGD
/// start from K-Means seeds; FGSM draws n_seeds * pgd_steps samples from the
/// pool uniformly with replacement and uses pgd_eps as its step.
TechniqueRun runTechnique(const DenseNetwork& net, const DatasetSchema& schema,
                          std::span<const Instance> pool, Technique technique,
                          const SearchConfig& cfg);

struct RetrainOptions {
  double fraction = 0.10;
  bool stratified = false;
  std::uint64_t rng_seed = 0;
};

struct RetrainOutcome {
  DenseNetwork model;
  double final_loss = 0.0;
  ConfusionReport before;
  ConfusionReport after;
  std::size_t detected = 0;  // false-or-biased instances available
  std::size_t sampled = 0;   // instances appended to the training split
};

/// Appends a sample of the detected (false or biased) instances to the
/// training split, retrains from a fresh initialization with the same
/// configuration, and evaluates both models on the untouched test split.
RetrainOutcome retrain(const DenseNetwork& baseline, const DatasetSchema& schema,
                       const DataSplit& split, std::span<const GeneratedInstance> instances,
                       std::span<const FairnessCategory> categories, const TrainConfig& train_cfg,
                       const RetrainOptions& options, const EvaluationOptions& evaluation);

/// Indices of the instances chosen for retraining.
std::vector<std::size_t> sampleDetected(std::span<const FairnessCategory> categories,
                                        const RetrainOptions& options);

struct SweepPoint {
  std::size_t n_seeds = 0;
  std::size_t global_iter = 0;
  std::size_t local_iter = 0;
};

struct SweepRow {
  SweepPoint point;
  ConfusionReport report;
  std::size_t searches = 0;
  bool truncated = false;
};

/// Cartesian product of the three lists; any empty list is an error.
std::vector<SweepPoint> makeGrid(std::span<const std::size_t> seeds,
                                 std::span<const std::size_t> global_iters,
                                 std::span<const std::size_t> local_iters);

std::vector<SweepRow> sweep(const DenseNetwork& net, const DatasetSchema& schema,
                            std::span<const Instance> pool, std::span<const SweepPoint> grid,
                            const SearchConfig& base);

std::string sweepCsv(std::span<const SweepRow> rows);

// ---------------------------------------------------------------------------
// Commands (the CLI is a thin argument parser over these)
// ---------------------------------------------------------------------------

/// Everything needed to rerun a command; written as manifest.json.
struct RunManifest {
  std::string command;
  std::filesystem::path dataset;
  std::filesystem::path schema;
  std::filesystem::path model;
  std::filesystem::path instances;
  std::optional<Technique> technique;
  std::optional<SearchConfig> search;
  std::optional<TrainConfig> train;
  nlohmann::json options = nlohmann::json::object();
  std::filesystem::path output_dir;
  std::string timestamp;
  std::string tool_version;

  nlohmann::json toJson() const;
};

struct TrainCommand {
  std::filesystem::path dataset;
  std::filesystem::path schema;
  std::filesystem::path out;
  TrainConfig train;
  double train_fraction = 0.8;
  EvaluationOptions evaluation;
};

struct TrainSummary {
  ConfusionReport test_report;
  double final_loss = 0.0;
  std::filesystem::path model_path;
};

/// Splits, trains, writes model.json, report.json/.csv and manifest.json.
TrainSummary cmdTrain(const TrainCommand& cmd);

struct GenerateCommand {
  std::filesystem::path dataset;
  std::filesystem::path schema;
  std::filesystem::path model;
  std::filesystem::path out;
  Technique technique = Technique::RobustFair;
  SearchConfig search;
};

TechniqueRun cmdGenerate(const GenerateCommand& cmd);

struct RetrainCommand {
  std::filesystem::path dataset;
  std::filesystem::path schema;
  std::filesystem::path model;
  std::vector<std::filesystem::path> instances;  // directories written by generate
  std::filesystem::path out;
  RetrainOptions options;
};

RetrainOutcome cmdRetrain(const RetrainCommand& cmd);

struct SweepCommand {
  std::filesystem::path dataset;
  std::filesystem::path schema;
  std::filesystem::path model;
  std::filesystem::path out;
  SearchConfig base;
  std::vector<std::size_t> seeds;
  std::vector<std::size_t> global_iters;
  std::vector<std::size_t> local_iters;
};

std::vector<SweepRow> cmdSweep(const SweepCommand& cmd);

struct ReportCommand {
  std::filesystem::path schema;
  std::filesystem::path model;
  std::filesystem::path instances;
  std::filesystem::path out;  // optional; report files are written when set
};

/// Re-classifies the instances stored in a generate output directory and
/// rebuilds the confusion report from them.
ConfusionReport cmdReport(const ReportCommand& cmd);

/// Writes report.json (the given summary plus the counts) and report.csv.
void writeReport(const std::filesystem::path& dir, const ConfusionReport& report,
                 const nlohmann::json& summary);

}  // namespace fairsearch
