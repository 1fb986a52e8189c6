#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairsearch/data.hpp"
#include "fairsearch/instance.hpp"
#include "fairsearch/nncore.hpp"
#include "fairsearch/perturb.hpp"
#include "fairsearch/schema.hpp"
#include "json.hpp"

namespace fairsearch {

enum class Phase { Global, Local, FGSM, PGD };

std::string_view toString(Phase phase);
Phase phaseFromString(std::string_view name);

struct Provenance {
  Phase phase = Phase::Global;
  DirectionKind direction = DirectionKind::FF;
  std::size_t seed_id = 0;    // index of the originating seed
  std::size_t iteration = 0;  // global round, local step or attack step
  bool degenerate = false;    // the perturbation left the input unchanged
};

/// A perturbed feature vector with its approximated (or carried-over) ground
/// truth. approx_label stays continuous; binarizeGroundTruth() gives the hard
/// label used for classification and retraining.
struct GeneratedInstance {
  std::vector<double> features;
  double approx_label = 0.0;
  Provenance provenance;

  int hardLabel() const { return binarizeGroundTruth(approx_label); }
};

struct SearchConfig {
  std::size_t n_seeds = 200;
  std::size_t global_iter = 5;
  std::size_t local_iter = 5;
  double step = 0.05;  // p, in normalized units
  double pgd_eps = 0.3;
  double pgd_alpha = 0.05;
  std::size_t pgd_steps = 25;
  std::uint64_t rng_seed = 0;
  std::size_t max_pool = 50000;  // cap on a global round's seed set; 0 = unlimited
  std::size_t counterpart_cap = kDefaultCounterpartCap;
  std::size_t clusters = 4;
  double threshold = 0.5;

  void validate() const;
  /// Copy with local_iter clamped to the number of non-sensitive attributes;
  /// appends a message to `warnings` when clamping happens.
  SearchConfig clampedFor(const DatasetSchema& schema, std::vector<std::string>* warnings) const;
  nlohmann::json toJson() const;
  static SearchConfig fromJson(const nlohmann::json& doc);
};

struct GenerationResult {
  std::vector<GeneratedInstance> instances;
  std::size_t searches = 0;  // gradient searches performed (one per processed input)
  bool truncated = false;    // max_pool subsampled a global round
};

/// Breadth phase: every round fans each current input out along the FF, TB
/// and FB directions; a round's emissions seed the next round.
GenerationResult globalGeneration(const DenseNetwork& net, const DatasetSchema& schema,
                                  std::span<const Instance> seeds, const SearchConfig& cfg);

/// Depth phase: for every global emission and direction, perturbs the
/// local_iter coordinates with the smallest nonzero |dir| one at a time.
GenerationResult localGeneration(const DenseNetwork& net, const DatasetSchema& schema,
                                 std::span<const GeneratedInstance> global,
                                 const SearchConfig& cfg);

/// v + eps * sign(dloss/dv) on non-sensitive coordinates, clipped; the
/// original label is carried over.
GenerationResult fgsm(const DenseNetwork& net, const DatasetSchema& schema,
                      std::span<const Instance> samples, double eps);

/// pgd_steps sign-gradient steps of size pgd_alpha, each projected onto the
/// l-infinity ball of radius pgd_eps around the seed and clipped; every
/// iterate is emitted.
GenerationResult pgd(const DenseNetwork& net, const DatasetSchema& schema,
                     std::span<const Instance> seeds, const SearchConfig& cfg);

}  // namespace fairsearch
