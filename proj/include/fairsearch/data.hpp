#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <span>
#include <vector>

#include "fairsearch/instance.hpp"
#include "fairsearch/nncore.hpp"
#include "fairsearch/random.hpp"
#include "fairsearch/schema.hpp"

namespace fairsearch {

/// Reads a headered, comma-separated file. Columns are matched to schema
/// attributes by name; categorical values are encoded by their position in
/// the declared list and every feature is min-max normalized to [0,1].
std::vector<Instance> loadDataset(const std::filesystem::path& path, const DatasetSchema& schema);
std::vector<Instance> parseDataset(std::istream& in, const DatasetSchema& schema);

/// Splits one CSV line into fields (double-quoted fields may contain commas).
std::vector<std::string> splitCsvLine(std::string_view line);

inline constexpr std::size_t kDefaultCounterpartCap = 256;

/// Builds the similar sub-population of a feature vector: copies that differ
/// only on sensitive coordinates, ranging over the Cartesian product of the
/// sensitive domains.
///
/// When the product has at most `cap` members all of them are enumerated in
/// mixed-radix order (first sensitive attribute most significant) and the
/// input itself is among them. Otherwise column 0 is the input and the other
/// cap-1 columns are distinct combinations drawn without replacement.
class CounterpartEnumerator {
 public:
  CounterpartEnumerator(const DatasetSchema& schema, std::size_t cap = kDefaultCounterpartCap);

  std::uint64_t productSize() const { return product_; }
  std::size_t count() const { return count_; }
  bool sampled() const { return product_ > cap_; }

  /// input_dim x count() matrix of counterparts. `rng` is only consulted when
  /// the product exceeds the cap; it may be null otherwise.
  Eigen::MatrixXd build(std::span<const double> v, Rng* rng) const;

 private:
  void fill(Eigen::MatrixXd& out, Eigen::Index col, std::uint64_t combo) const;
  std::uint64_t comboOf(std::span<const double> v) const;

  const DatasetSchema* schema_;
  std::size_t cap_;
  std::uint64_t product_ = 1;
  std::size_t count_ = 0;
  std::vector<std::size_t> features_;
  std::vector<std::uint64_t> radices_;
};

std::vector<std::vector<double>> similarCounterparts(std::span<const double> v,
                                                     const DatasetSchema& schema, std::size_t cap,
                                                     Rng& rng);

/// Column index of the counterpart whose output differs most from f(v);
/// ties go to the lowest index.
std::size_t maxDiffCounterpart(const DenseNetwork& net, std::span<const double> v,
                               const Eigen::MatrixXd& counterparts);
std::vector<double> maxDiffCounterpart(const DenseNetwork& net, std::span<const double> v,
                                       const std::vector<std::vector<double>>& counterparts);

struct KMeansResult {
  Eigen::MatrixXd centroids;           // dim x k
  std::vector<std::size_t> assignment;  // cluster of each point
  std::size_t iterations = 0;
};

/// Lloyd's algorithm with k-means++ initialization. Stops after `max_iter`
/// rounds or once no centroid moves more than `tolerance`. A cluster that
/// empties is re-seeded at the point farthest from its own centroid.
KMeansResult kmeans(std::span<const Instance> data, std::size_t k, Rng& rng,
                    std::size_t max_iter = 100, double tolerance = 1e-6);

/// Draws n_seeds distinct rows spread evenly over k clusters:
/// floor(n_seeds/k) per cluster, the remainder from the largest clusters.
/// Quota a small cluster cannot meet moves to clusters with spare rows.
std::vector<std::size_t> kmeansSeedIndices(std::span<const Instance> data, std::size_t k,
                                           std::size_t n_seeds, Rng& rng);
std::vector<Instance> kmeansSeeds(std::span<const Instance> data, std::size_t k,
                                  std::size_t n_seeds, Rng& rng);

/// Clamps every coordinate to [0,1]. NaN input raises NumericError.
std::vector<double> clipToDomain(std::span<const double> v);
void clipInPlace(std::span<double> v);

}  // namespace fairsearch
