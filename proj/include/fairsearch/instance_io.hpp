#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "fairsearch/confusion.hpp"
#include "fairsearch/generate.hpp"
#include "fairsearch/schema.hpp"

namespace fairsearch {

inline constexpr const char* kInstancesCsv = "instances.csv";
inline constexpr const char* kInstancesMeta = "instances.meta.json";
inline constexpr const char* kInstancesFeatures = "instances.features.bin";

/// Writes three files into `dir`:
///  - instances.csv: denormalized rows (integers and categories rounded to the
///    nearest domain value), the binarized label under the schema's label
///    column, then approx_label, category and provenance columns;
///  - instances.meta.json: column-wise provenance, continuous approx_label
///    and category of every instance;
///  - instances.features.bin: the unrounded normalized vectors as
///    little-endian float64, row-major, so classification can be replayed.
void writeInstances(const std::filesystem::path& dir, const DatasetSchema& schema,
                    std::span<const GeneratedInstance> instances,
                    std::span<const FairnessCategory> categories);

struct InstanceFile {
  std::vector<GeneratedInstance> instances;
  std::vector<FairnessCategory> categories;
};

InstanceFile readInstances(const std::filesystem::path& dir, const DatasetSchema& schema);

}  // namespace fairsearch
