#include "fairsearch/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <numeric>

#include "fairsearch/data.hpp"
#include "fairsearch/error.hpp"
#include "fairsearch/instance_io.hpp"
#include "fairsearch/io.hpp"

namespace fairsearch {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSplitStream = 0x51;
constexpr std::uint64_t kSeedStream = 0x52;
constexpr std::uint64_t kSampleStream = 0x53;
constexpr std::uint64_t kClassifyStream = 0x54;
constexpr std::uint64_t kRetrainStream = 0x55;

std::string utcTimestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

void requireFile(const fs::path& path, const std::string& what) {
  if (path.empty()) {
    throw ConfigError(what + " path is required");
  }
  if (!fs::exists(path)) {
    throw ConfigError(what + " not found: " + path.string());
  }
}

void writeManifest(const RunManifest& manifest) {
  writeFileAtomic(manifest.output_dir / "manifest.json", manifest.toJson().dump(2) + "\n");
}

struct Context {
  DatasetSchema schema;
  StoredModel model;
  DataSplit split;
  EvaluationOptions evaluation;
};

Context loadContext(const fs::path& dataset, const fs::path& schema_path, const fs::path& model) {
  requireFile(schema_path, "schema file");
  requireFile(dataset, "dataset");
  requireFile(model, "model file");
  DatasetSchema schema = DatasetSchema::load(schema_path);
  StoredModel stored = loadModel(model);
  if (stored.network.inputDim() != schema.featureCount()) {
    throw ConfigError("model expects " + std::to_string(stored.network.inputDim()) +
                      " features but schema declares " + std::to_string(schema.featureCount()));
  }
  const auto& meta = stored.metadata;
  if (!meta.contains("split")) {
    throw ConfigError("model file " + model.string() +
                      " carries no split metadata; train it with `fairsearch train`");
  }
  const auto data = loadDataset(dataset, schema);
  DataSplit split = splitDataset(data, meta["split"].at("train_fraction").get<double>(),
                                 meta["split"].at("seed").get<std::uint64_t>());
  EvaluationOptions evaluation;
  evaluation.counterpart_cap = meta.value("counterpart_cap", evaluation.counterpart_cap);
  evaluation.threshold = meta.value("threshold", evaluation.threshold);
  evaluation.rng_seed = meta.value("evaluation_seed", evaluation.rng_seed);
  return {std::move(schema), std::move(stored), std::move(split), evaluation};
}

RunManifest baseManifest(std::string command, const fs::path& out) {
  RunManifest manifest;
  manifest.command = std::move(command);
  manifest.output_dir = out;
  manifest.timestamp = utcTimestamp();
  manifest.tool_version = std::string(toolVersion());
  return manifest;
}

std::vector<std::size_t> hiddenWidths(const DenseNetwork& net) {
  std::vector<std::size_t> widths;
  for (std::size_t l = 0; l + 1 < net.layerCount(); ++l) {
    widths.push_back(static_cast<std::size_t>(net.layers()[l].weights.rows()));
  }
  return widths;
}

}  // namespace

std::string_view toolVersion() { return FAIRSEARCH_VERSION; }

DataSplit splitDataset(std::span<const Instance> data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0,1)");
  }
  if (data.size() < 2) {
    throw ConfigError("dataset needs at least two rows to split");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::stream(seed, {kSplitStream});
  rng.shuffle(order);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(data.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, data.size() - 1);
  DataSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? split.train : split.test).push_back(data[order[i]]);
  }
  return split;
}

std::vector<FairnessCategory> classifyAll(const DenseNetwork& net, const DatasetSchema& schema,
                                          std::span<const Instance> data,
                                          const EvaluationOptions& options) {
  const CounterpartEnumerator counterparts(schema, options.counterpart_cap);
  std::vector<FairnessCategory> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    Rng rng = Rng::stream(options.rng_seed, {kClassifyStream, i});
    const Eigen::MatrixXd others = counterparts.build(data[i].features, &rng);
    out.push_back(classify(net, data[i].features, static_cast<int>(data[i].label), others,
                           options.threshold));
  }
  return out;
}

ConfusionReport evaluateModel(const DenseNetwork& net, const DatasetSchema& schema,
                              std::span<const Instance> data, const EvaluationOptions& options) {
  const auto categories = classifyAll(net, schema, data, options);
  return tally(categories);
}

std::vector<FairnessCategory> classifyGenerated(const DenseNetwork& net,
                                                const DatasetSchema& schema,
                                                std::span<const GeneratedInstance> instances,
                                                const EvaluationOptions& options) {
  const CounterpartEnumerator counterparts(schema, options.counterpart_cap);
  std::vector<FairnessCategory> out;
  out.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    Rng rng = Rng::stream(options.rng_seed, {kClassifyStream, i});
    const Eigen::MatrixXd others = counterparts.build(instances[i].features, &rng);
    out.push_back(classify(net, instances[i].features, instances[i].hardLabel(), others,
                           options.threshold));
  }
  return out;
}

std::string_view toString(Technique technique) {
  switch (technique) {
    case Technique::RobustFair:
      return "robustfair";
    case Technique::FGSM:
      return "fgsm";
    case Technique::PGD:
      return "pgd";
  }
  return "robustfair";
}

Technique techniqueFromString(std::string_view name) {
  if (name == "robustfair") return Technique::RobustFair;
  if (name == "fgsm") return Technique::FGSM;
  if (name == "pgd") return Technique::PGD;
  throw ConfigError("unknown technique '" + std::string(name) + "'");
}

nlohmann::json TechniqueRun::summaryJson() const {
  return {{"seed_count", seed_count},     {"searches", searches},
          {"global_count", global_count}, {"local_count", local_count},
          {"emissions", instances.size()}, {"truncated", truncated},
          {"warnings", warnings}};
}

TechniqueRun runTechnique(const DenseNetwork& net, const DatasetSchema& schema,
                          std::span<const Instance> pool, Technique technique,
                          const SearchConfig& cfg_in) {
  cfg_in.validate();
  TechniqueRun run;
  const SearchConfig cfg = cfg_in.clampedFor(schema, &run.warnings);
  if (pool.empty()) {
    throw ConfigError("no instances to draw seeds from");
  }
  Rng seed_rng = Rng::stream(cfg.rng_seed, {kSeedStream});

  switch (technique) {
    case Technique::RobustFair: {
      const auto seeds = kmeansSeeds(pool, cfg.clusters, cfg.n_seeds, seed_rng);
      run.seed_count = seeds.size();
      GenerationResult global = globalGeneration(net, schema, seeds, cfg);
      GenerationResult local = localGeneration(net, schema, global.instances, cfg);
      run.searches = global.searches + local.searches;
      run.truncated = global.truncated;
      run.global_count = global.instances.size();
      run.local_count = local.instances.size();
      run.instances = std::move(global.instances);
      run.instances.insert(run.instances.end(), std::make_move_iterator(local.instances.begin()),
                           std::make_move_iterator(local.instances.end()));
      break;
    }
    case Technique::FGSM: {
      const std::size_t count = cfg.n_seeds * cfg.pgd_steps;
      Rng rng = Rng::stream(cfg.rng_seed, {kSampleStream});
      std::vector<Instance> samples;
      samples.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        samples.push_back(pool[static_cast<std::size_t>(rng.below(pool.size()))]);
      }
      run.seed_count = samples.size();
      GenerationResult result = fgsm(net, schema, samples, cfg.pgd_eps);
      run.searches = result.searches;
      run.instances = std::move(result.instances);
      break;
    }
    case Technique::PGD: {
      const auto seeds = kmeansSeeds(pool, cfg.clusters, cfg.n_seeds, seed_rng);
      run.seed_count = seeds.size();
      GenerationResult result = pgd(net, schema, seeds, cfg);
      run.searches = result.searches;
      run.instances = std::move(result.instances);
      break;
    }
  }
  EvaluationOptions evaluation{cfg.counterpart_cap, cfg.threshold, cfg.rng_seed};
  run.categories = classifyGenerated(net, schema, run.instances, evaluation);
  run.report = tally(run.categories);
  return run;
}

std::vector<std::size_t> sampleDetected(std::span<const FairnessCategory> categories,
                                        const RetrainOptions& options) {
  if (!(options.fraction > 0.0 && options.fraction <= 1.0)) {
    throw ConfigError("retraining fraction must lie in (0,1]");
  }
  auto take = [&](const std::vector<std::size_t>& from, Rng& rng) {
    auto n = static_cast<std::size_t>(std::llround(options.fraction * static_cast<double>(from.size())));
    n = std::clamp<std::size_t>(n, from.empty() ? 0 : 1, from.size());
    std::vector<std::size_t> picked;
    for (std::uint64_t idx : rng.sampleWithoutReplacement(from.size(), n)) {
      picked.push_back(from[static_cast<std::size_t>(idx)]);
    }
    return picked;
  };
  Rng rng = Rng::stream(options.rng_seed, {kRetrainStream});
  std::vector<std::size_t> detected;
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i] != FairnessCategory::TF) {
      detected.push_back(i);
    }
  }
  if (detected.empty()) {
    throw ConfigError("no false or biased instances to retrain with");
  }
  if (!options.stratified) {
    return take(detected, rng);
  }
  std::vector<std::size_t> picked;
  for (FairnessCategory c : {FairnessCategory::TB, FairnessCategory::FF, FairnessCategory::FB}) {
    std::vector<std::size_t> members;
    for (std::size_t i : detected) {
      if (categories[i] == c) members.push_back(i);
    }
    const auto part = take(members, rng);
    picked.insert(picked.end(), part.begin(), part.end());
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

RetrainOutcome retrain(const DenseNetwork& baseline, const DatasetSchema& schema,
                       const DataSplit& split, std::span<const GeneratedInstance> instances,
                       std::span<const FairnessCategory> categories, const TrainConfig& train_cfg,
                       const RetrainOptions& options, const EvaluationOptions& evaluation) {
  if (instances.empty()) {
    throw ConfigError("no adversarial instances supplied for retraining");
  }
  if (categories.size() != instances.size()) {
    throw ShapeError("retrain: one category per instance required");
  }
  const auto picked = sampleDetected(categories, options);
  std::vector<Instance> augmented = split.train;
  augmented.reserve(split.train.size() + picked.size());
  for (std::size_t i : picked) {
    augmented.push_back({instances[i].features, static_cast<double>(instances[i].hardLabel())});
  }
  const auto widths = hiddenWidths(baseline);
  DenseNetwork fresh = DenseNetwork::glorotUniform(baseline.inputDim(), widths, train_cfg.rng_seed);
  TrainResult trained = train(std::move(fresh), augmented, train_cfg);

  RetrainOutcome outcome{std::move(trained.network), trained.final_loss, {}, {}, 0, picked.size()};
  outcome.detected = static_cast<std::size_t>(
      std::count_if(categories.begin(), categories.end(),
                    [](FairnessCategory c) { return c != FairnessCategory::TF; }));
  outcome.before = evaluateModel(baseline, schema, split.test, evaluation);
  outcome.after = evaluateModel(outcome.model, schema, split.test, evaluation);
  return outcome;
}

std::vector<SweepPoint> makeGrid(std::span<const std::size_t> seeds,
                                 std::span<const std::size_t> global_iters,
                                 std::span<const std::size_t> local_iters) {
  if (seeds.empty() || global_iters.empty() || local_iters.empty()) {
    throw ConfigError("sweep grid is empty");
  }
  std::vector<SweepPoint> grid;
  for (std::size_t s : seeds) {
    for (std::size_t g : global_iters) {
      for (std::size_t l : local_iters) {
        grid.push_back({s, g, l});
      }
    }
  }
  return grid;
}

std::vector<SweepRow> sweep(const DenseNetwork& net, const DatasetSchema& schema,
                            std::span<const Instance> pool, std::span<const SweepPoint> grid,
                            const SearchConfig& base) {
  if (grid.empty()) {
    throw ConfigError("sweep grid is empty");
  }
  std::vector<SweepRow> rows;
  for (const auto& point : grid) {
    SearchConfig cfg = base;
    cfg.n_seeds = point.n_seeds;
    cfg.global_iter = point.global_iter;
    cfg.local_iter = point.local_iter;
    const TechniqueRun run = runTechnique(net, schema, pool, Technique::RobustFair, cfg);
    rows.push_back({point, run.report, run.searches, run.truncated});
  }
  return rows;
}

std::string sweepCsv(std::span<const SweepRow> rows) {
  std::string out = "n_seeds,global_iter,local_iter,N_F,N_B,N_F|B,N_TF,N_TB,N_FF,N_FB,SUM,searches,truncated\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    for (std::size_t v : {row.point.n_seeds, row.point.global_iter, row.point.local_iter,
                          r.falseCount(), r.biasedCount(), r.falseOrBiasedCount(), r.tf(), r.tb(),
                          r.ff(), r.fb(), r.sum(), row.searches}) {
      out += std::to_string(v) + ',';
    }
    out += row.truncated ? "1\n" : "0\n";
  }
  return out;
}

nlohmann::json RunManifest::toJson() const {
  nlohmann::json doc = {
      {"command", command},
      {"dataset", dataset.string()},
      {"schema", schema.string()},
      {"model", model.string()},
      {"instances", instances.string()},
      {"technique", technique ? nlohmann::json(toString(*technique)) : nlohmann::json(nullptr)},
      {"search_config", search ? search->toJson() : nlohmann::json(nullptr)},
      {"options", options},
      {"output_dir", output_dir.string()},
      {"timestamp", timestamp},
      {"tool_version", tool_version},
  };
  if (train) {
    doc["train_config"] = {{"epochs", train->epochs},
                           {"batch_size", train->batch_size},
                           {"learning_rate", train->learning_rate},
                           {"optimizer", toString(train->optimizer)},
                           {"rng_seed", train->rng_seed},
                           {"fingerprint", train->fingerprint()}};
  } else {
    doc["train_config"] = nullptr;
  }
  return doc;
}

void writeReport(const fs::path& dir, const ConfusionReport& report,
                 const nlohmann::json& summary) {
  nlohmann::json doc = summary;
  doc["report"] = report.toJson();
  writeFileAtomic(dir / "report.json", doc.dump(2) + "\n");
  writeFileAtomic(dir / "report.csv", ConfusionReport::csvHeader() + "\n" + report.csvRow() + "\n");
}

TrainSummary cmdTrain(const TrainCommand& cmd) {
  requireFile(cmd.schema, "schema file");
  requireFile(cmd.dataset, "dataset");
  if (cmd.out.empty()) {
    throw ConfigError("output directory is required");
  }
  cmd.train.validate();
  const DatasetSchema schema = DatasetSchema::load(cmd.schema);
  const auto data = loadDataset(cmd.dataset, schema);
  const DataSplit split = splitDataset(data, cmd.train_fraction, cmd.train.rng_seed);

  TrainResult trained =
      train(DenseNetwork::fcnn6(schema.featureCount(), cmd.train.rng_seed), split.train, cmd.train);
  TrainSummary summary;
  summary.final_loss = trained.final_loss;
  summary.test_report = evaluateModel(trained.network, schema, split.test, cmd.evaluation);
  summary.model_path = cmd.out / "model.json";

  StoredModel stored{std::move(trained.network), cmd.train, nlohmann::json::object()};
  stored.metadata = {{"schema", schema.name()},
                     {"split", {{"seed", cmd.train.rng_seed}, {"train_fraction", cmd.train_fraction}}},
                     {"counterpart_cap", cmd.evaluation.counterpart_cap},
                     {"threshold", cmd.evaluation.threshold},
                     {"evaluation_seed", cmd.evaluation.rng_seed},
                     {"final_loss", summary.final_loss}};
  fs::create_directories(cmd.out);
  saveModel(summary.model_path, stored);
  writeReport(cmd.out, summary.test_report,
              {{"command", "train"},
               {"train_rows", split.train.size()},
               {"test_rows", split.test.size()},
               {"final_loss", summary.final_loss}});

  RunManifest manifest = baseManifest("train", cmd.out);
  manifest.dataset = cmd.dataset;
  manifest.schema = cmd.schema;
  manifest.model = summary.model_path;
  manifest.train = cmd.train;
  manifest.options = {{"train_fraction", cmd.train_fraction},
                      {"counterpart_cap", cmd.evaluation.counterpart_cap},
                      {"threshold", cmd.evaluation.threshold},
                      {"evaluation_seed", cmd.evaluation.rng_seed}};
  writeManifest(manifest);
  return summary;
}

TechniqueRun cmdGenerate(const GenerateCommand& cmd) {
  if (cmd.out.empty()) {
    throw ConfigError("output directory is required");
  }
  const Context ctx = loadContext(cmd.dataset, cmd.schema, cmd.model);
  TechniqueRun run =
      runTechnique(ctx.model.network, ctx.schema, ctx.split.test, cmd.technique, cmd.search);
  fs::create_directories(cmd.out);
  writeInstances(cmd.out, ctx.schema, run.instances, run.categories);
  nlohmann::json summary = run.summaryJson();
  summary["command"] = "generate";
  summary["technique"] = toString(cmd.technique);
  summary["search_config"] = cmd.search.toJson();
  writeReport(cmd.out, run.report, summary);

  RunManifest manifest = baseManifest("generate", cmd.out);
  manifest.dataset = cmd.dataset;
  manifest.schema = cmd.schema;
  manifest.model = cmd.model;
  manifest.technique = cmd.technique;
  manifest.search = cmd.search;
  writeManifest(manifest);
  return run;
}

RetrainOutcome cmdRetrain(const RetrainCommand& cmd) {
  if (cmd.out.empty()) {
    throw ConfigError("output directory is required");
  }
  if (cmd.instances.empty()) {
    throw ConfigError("at least one instance directory is required");
  }
  if (!(cmd.options.fraction > 0.0 && cmd.options.fraction <= 1.0)) {
    throw ConfigError("retraining fraction must lie in (0,1]");
  }
  const Context ctx = loadContext(cmd.dataset, cmd.schema, cmd.model);
  InstanceFile all;
  for (const auto& dir : cmd.instances) {
    requireFile(dir, "instance directory");
    InstanceFile part = readInstances(dir, ctx.schema);
    all.instances.insert(all.instances.end(), std::make_move_iterator(part.instances.begin()),
                         std::make_move_iterator(part.instances.end()));
    all.categories.insert(all.categories.end(), part.categories.begin(), part.categories.end());
  }
  if (all.instances.empty()) {
    throw ConfigError("adversarial instance files are empty");
  }
  RetrainOutcome outcome = retrain(ctx.model.network, ctx.schema, ctx.split, all.instances,
                                   all.categories, ctx.model.train_config, cmd.options,
                                   ctx.evaluation);

  fs::create_directories(cmd.out);
  StoredModel stored{outcome.model, ctx.model.train_config, ctx.model.metadata};
  stored.metadata["final_loss"] = outcome.final_loss;
  stored.metadata["retrained_with"] = {{"sampled", outcome.sampled},
                                       {"detected", outcome.detected},
                                       {"fraction", cmd.options.fraction},
                                       {"stratified", cmd.options.stratified},
                                       {"rng_seed", cmd.options.rng_seed}};
  saveModel(cmd.out / "model.json", stored);

  const nlohmann::json doc = {{"command", "retrain"},
                              {"detected", outcome.detected},
                              {"sampled", outcome.sampled},
                              {"fraction", cmd.options.fraction},
                              {"stratified", cmd.options.stratified},
                              {"final_loss", outcome.final_loss},
                              {"before", outcome.before.toJson()},
                              {"after", outcome.after.toJson()}};
  writeFileAtomic(cmd.out / "report.json", doc.dump(2) + "\n");
  writeFileAtomic(cmd.out / "report.csv", "model," + ConfusionReport::csvHeader() + "\nbaseline," +
                                              outcome.before.csvRow() + "\nretrained," +
                                              outcome.after.csvRow() + "\n");

  RunManifest manifest = baseManifest("retrain", cmd.out);
  manifest.dataset = cmd.dataset;
  manifest.schema = cmd.schema;
  manifest.model = cmd.model;
  std::string dirs;
  for (const auto& dir : cmd.instances) {
    dirs += (dirs.empty() ? "" : ";") + dir.string();
  }
  manifest.instances = dirs;
  manifest.train = ctx.model.train_config;
  manifest.options = {{"fraction", cmd.options.fraction},
                      {"stratified", cmd.options.stratified},
                      {"rng_seed", cmd.options.rng_seed}};
  writeManifest(manifest);
  return outcome;
}

std::vector<SweepRow> cmdSweep(const SweepCommand& cmd) {
  if (cmd.out.empty()) {
    throw ConfigError("output directory is required");
  }
  const auto grid = makeGrid(cmd.seeds, cmd.global_iters, cmd.local_iters);
  const Context ctx = loadContext(cmd.dataset, cmd.schema, cmd.model);
  auto rows = sweep(ctx.model.network, ctx.schema, ctx.split.test, grid, cmd.base);
  fs::create_directories(cmd.out);
  writeFileAtomic(cmd.out / "sweep.csv", sweepCsv(rows));

  RunManifest manifest = baseManifest("sweep", cmd.out);
  manifest.dataset = cmd.dataset;
  manifest.schema = cmd.schema;
  manifest.model = cmd.model;
  manifest.technique = Technique::RobustFair;
  manifest.search = cmd.base;
  manifest.options = {{"seeds", cmd.seeds},
                      {"global_iters", cmd.global_iters},
                      {"local_iters", cmd.local_iters}};
  writeManifest(manifest);
  return rows;
}

ConfusionReport cmdReport(const ReportCommand& cmd) {
  requireFile(cmd.schema, "schema file");
  requireFile(cmd.model, "model file");
  requireFile(cmd.instances, "instance directory");
  const DatasetSchema schema = DatasetSchema::load(cmd.schema);
  const StoredModel model = loadModel(cmd.model);
  const InstanceFile file = readInstances(cmd.instances, schema);

  // Classification options come from the run that produced the files.
  EvaluationOptions evaluation;
  const fs::path manifest_path = cmd.instances / "manifest.json";
  if (fs::exists(manifest_path)) {
    const auto manifest = nlohmann::json::parse(readFile(manifest_path));
    if (manifest.contains("search_config") && manifest["search_config"].is_object()) {
      const SearchConfig cfg = SearchConfig::fromJson(manifest["search_config"]);
      evaluation = {cfg.counterpart_cap, cfg.threshold, cfg.rng_seed};
    }
  }
  const auto categories = classifyGenerated(model.network, schema, file.instances, evaluation);
  const ConfusionReport report = tally(categories);
  if (!cmd.out.empty()) {
    fs::create_directories(cmd.out);
    writeReport(cmd.out, report,
                {{"command", "report"},
                 {"emissions", file.instances.size()},
                 {"matches_stored_categories", categories == file.categories}});
  }
  return report;
}

}  // namespace fairsearch
