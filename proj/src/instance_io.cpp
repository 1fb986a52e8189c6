#include "fairsearch/instance_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fairsearch/error.hpp"
#include "fairsearch/io.hpp"

namespace fairsearch {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "instances.features.bin is written in host byte order");

namespace {

std::string csvField(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) {
    return value;
  }
  std::string quoted = "\"";
  for (char c : value) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

}  // namespace

void writeInstances(const fs::path& dir, const DatasetSchema& schema,
                    std::span<const GeneratedInstance> instances,
                    std::span<const FairnessCategory> categories) {
  if (categories.size() != instances.size()) {
    throw ShapeError("writeInstances: one category per instance required");
  }
  const std::size_t dim = schema.featureCount();
  fs::create_directories(dir);

  std::string csv;
  csv.reserve(instances.size() * (dim * 6 + 48));
  for (std::size_t f = 0; f < dim; ++f) {
    csv += csvField(schema.feature(f).name) + ',';
  }
  csv += csvField(schema.label().name) + ",approx_label,category,phase,direction,seed_id,iteration\n";

  nlohmann::json approx = nlohmann::json::array();
  nlohmann::json phase = nlohmann::json::array();
  nlohmann::json direction = nlohmann::json::array();
  nlohmann::json seed_id = nlohmann::json::array();
  nlohmann::json iteration = nlohmann::json::array();
  nlohmann::json degenerate = nlohmann::json::array();
  nlohmann::json category = nlohmann::json::array();
  std::string features;
  features.resize(instances.size() * dim * sizeof(double));
  char* cursor = features.data();

  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    if (inst.features.size() != dim) {
      throw ShapeError("writeInstances: instance " + std::to_string(i) +
                       " does not match the schema dimension");
    }
    for (std::size_t f = 0; f < dim; ++f) {
      csv += csvField(schema.format(f, inst.features[f])) + ',';
    }
    const auto& p = inst.provenance;
    csv += csvField(schema.formatLabel(inst.hardLabel())) + ',' + formatRate(inst.approx_label) +
           ',' + std::string(toString(categories[i])) + ',' + std::string(toString(p.phase)) + ',' +
           std::string(toString(p.direction)) + ',' + std::to_string(p.seed_id) + ',' +
           std::to_string(p.iteration) + '\n';

    approx.push_back(inst.approx_label);
    phase.push_back(toString(p.phase));
    direction.push_back(toString(p.direction));
    seed_id.push_back(p.seed_id);
    iteration.push_back(p.iteration);
    degenerate.push_back(p.degenerate);
    category.push_back(toString(categories[i]));
    std::memcpy(cursor, inst.features.data(), dim * sizeof(double));
    cursor += dim * sizeof(double);
  }

  const nlohmann::json meta = {
      {"count", instances.size()},
      {"feature_count", dim},
      {"feature_names",
       [&] {
         nlohmann::json names = nlohmann::json::array();
         for (std::size_t f = 0; f < dim; ++f) names.push_back(schema.feature(f).name);
         return names;
       }()},
      {"features_file", kInstancesFeatures},
      {"features_encoding", "float64-le row-major, normalized"},
      {"approx_label", std::move(approx)},
      {"category", std::move(category)},
      {"phase", std::move(phase)},
      {"direction", std::move(direction)},
      {"seed_id", std::move(seed_id)},
      {"iteration", std::move(iteration)},
      {"degenerate", std::move(degenerate)},
  };
  writeFileAtomic(dir / kInstancesFeatures, features);
  writeFileAtomic(dir / kInstancesMeta, meta.dump() + "\n");
  writeFileAtomic(dir / kInstancesCsv, csv);
}

InstanceFile readInstances(const fs::path& dir, const DatasetSchema& schema) {
  const fs::path meta_path = dir / kInstancesMeta;
  if (!fs::exists(meta_path)) {
    throw ConfigError("no " + std::string(kInstancesMeta) + " in " + dir.string());
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(readFile(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(meta_path.string() + " is not valid JSON: " + e.what());
  }
  InstanceFile file;
  try {
    const auto count = meta.at("count").get<std::size_t>();
    const auto dim = meta.at("feature_count").get<std::size_t>();
    if (dim != schema.featureCount()) {
      throw SchemaError("instance files hold " + std::to_string(dim) +
                        " features, schema declares " + std::to_string(schema.featureCount()));
    }
    const std::string raw = readFile(dir / meta.at("features_file").get<std::string>());
    if (raw.size() != count * dim * sizeof(double)) {
      throw ConfigError("feature file size does not match the instance count");
    }
    const auto& approx = meta.at("approx_label");
    const auto& category = meta.at("category");
    const auto& phase = meta.at("phase");
    const auto& direction = meta.at("direction");
    const auto& seed_id = meta.at("seed_id");
    const auto& iteration = meta.at("iteration");
    const auto& degenerate = meta.at("degenerate");
    file.instances.resize(count);
    file.categories.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      auto& inst = file.instances[i];
      inst.features.resize(dim);
      std::memcpy(inst.features.data(), raw.data() + i * dim * sizeof(double), dim * sizeof(double));
      inst.approx_label = approx.at(i).get<double>();
      inst.provenance.phase = phaseFromString(phase.at(i).get<std::string>());
      inst.provenance.direction = directionFromString(direction.at(i).get<std::string>());
      inst.provenance.seed_id = seed_id.at(i).get<std::size_t>();
      inst.provenance.iteration = iteration.at(i).get<std::size_t>();
      inst.provenance.degenerate = degenerate.at(i).get<bool>();
      file.categories[i] = categoryFromString(category.at(i).get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(meta_path.string() + " is malformed: " + e.what());
  }
  return file;
}

}  // namespace fairsearch
