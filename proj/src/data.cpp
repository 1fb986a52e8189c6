#include "fairsearch/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include "fairsearch/error.hpp"

namespace fairsearch {

std::vector<std::string> splitCsvLine(std::string_view line) {
  if (!line.empty() && line.back() == '\r') {
    line.remove_suffix(1);
  }
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::vector<Instance> parseDataset(std::istream& in, const DatasetSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) {
    throw SchemaError("dataset is empty: missing header row");
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    line.erase(0, 3);
  }
  const auto header = splitCsvLine(line);
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t c = 0; c < header.size(); ++c) {
    position.emplace(header[c], c);
  }
  auto columnOf = [&](const AttributeSpec& attr) {
    const auto it = position.find(attr.name);
    if (it == position.end()) {
      throw SchemaError("dataset header lacks column '" + attr.name + "'");
    }
    return it->second;
  };
  std::vector<std::size_t> feature_cols(schema.featureCount());
  for (std::size_t f = 0; f < schema.featureCount(); ++f) {
    feature_cols[f] = columnOf(schema.feature(f));
  }
  const std::size_t label_col = columnOf(schema.label());

  std::vector<Instance> rows;
  std::size_t row_index = 0;
  while (std::getline(in, line)) {
    ++row_index;
    if (line.empty() || line == "\r") {
      continue;
    }
    const auto fields = splitCsvLine(line);
    if (fields.size() != header.size()) {
      throw DataError("row " + std::to_string(row_index) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    Instance inst;
    inst.features.resize(schema.featureCount());
    try {
      for (std::size_t f = 0; f < schema.featureCount(); ++f) {
        const auto code = schema.encode(f, fields[feature_cols[f]]);
        inst.features[f] = schema.normalize(f, static_cast<double>(code));
      }
      inst.label = schema.encodeLabel(fields[label_col]);
    } catch (const DataError& e) {
      throw DataError("row " + std::to_string(row_index) + ", " + e.what());
    }
    rows.push_back(std::move(inst));
  }
  return rows;
}

std::vector<Instance> loadDataset(const std::filesystem::path& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open dataset: " + path.string());
  }
  return parseDataset(in, schema);
}

CounterpartEnumerator::CounterpartEnumerator(const DatasetSchema& schema, std::size_t cap)
    : schema_(&schema), cap_(cap), features_(schema.sensitiveFeatures()) {
  if (cap == 0) {
    throw ConfigError("counterpart cap must be at least 1");
  }
  if (features_.empty()) {
    throw ConfigError("schema '" + schema.name() + "' declares no sensitive attributes");
  }
  for (std::size_t f : features_) {
    const std::uint64_t size = schema.feature(f).domainSize();
    if (product_ > std::numeric_limits<std::uint64_t>::max() / size) {
      throw ConfigError("sensitive domain product overflows");
    }
    radices_.push_back(size);
    product_ *= size;
  }
  count_ = static_cast<std::size_t>(std::min<std::uint64_t>(product_, cap_));
}

void CounterpartEnumerator::fill(Eigen::MatrixXd& out, Eigen::Index col,
                                 std::uint64_t combo) const {
  for (std::size_t s = features_.size(); s-- > 0;) {
    const std::uint64_t digit = combo % radices_[s];
    combo /= radices_[s];
    const auto& attr = schema_->feature(features_[s]);
    out(static_cast<Eigen::Index>(features_[s]), col) =
        schema_->normalize(features_[s], attr.lower() + static_cast<double>(digit));
  }
}

std::uint64_t CounterpartEnumerator::comboOf(std::span<const double> v) const {
  std::uint64_t combo = 0;
  for (std::size_t s = 0; s < features_.size(); ++s) {
    const auto& attr = schema_->feature(features_[s]);
    const auto digit = static_cast<std::uint64_t>(
        schema_->decode(features_[s], v[features_[s]]) - static_cast<std::int64_t>(attr.lower()));
    combo = combo * radices_[s] + digit;
  }
  return combo;
}

Eigen::MatrixXd CounterpartEnumerator::build(std::span<const double> v, Rng* rng) const {
  if (v.size() != schema_->featureCount()) {
    throw ShapeError("feature vector has " + std::to_string(v.size()) + " entries, schema has " +
                     std::to_string(schema_->featureCount()));
  }
  const Eigen::Map<const Eigen::VectorXd> base(v.data(), static_cast<Eigen::Index>(v.size()));
  Eigen::MatrixXd out = base.replicate(1, static_cast<Eigen::Index>(count_));
  const std::uint64_t own = comboOf(v);
  if (!sampled()) {
    for (std::uint64_t combo = 0; combo < product_; ++combo) {
      if (combo != own) {
        fill(out, static_cast<Eigen::Index>(combo), combo);
      }
    }
    return out;
  }
  if (rng == nullptr) {
    throw PreconditionError("counterpart sampling needs a random stream");
  }
  const auto picks = rng->sampleWithoutReplacement(product_ - 1, count_ - 1);
  for (std::size_t j = 0; j < picks.size(); ++j) {
    const std::uint64_t combo = picks[j] >= own ? picks[j] + 1 : picks[j];
    fill(out, static_cast<Eigen::Index>(j + 1), combo);
  }
  return out;
}

std::vector<std::vector<double>> similarCounterparts(std::span<const double> v,
                                                     const DatasetSchema& schema, std::size_t cap,
                                                     Rng& rng) {
  const CounterpartEnumerator enumerator(schema, cap);
  const Eigen::MatrixXd m = enumerator.build(v, &rng);
  std::vector<std::vector<double>> result(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    result[static_cast<std::size_t>(j)].assign(m.col(j).data(), m.col(j).data() + m.rows());
  }
  return result;
}

std::size_t maxDiffCounterpart(const DenseNetwork& net, std::span<const double> v,
                               const Eigen::MatrixXd& counterparts) {
  if (counterparts.cols() == 0) {
    throw PreconditionError("maxDiffCounterpart: empty counterpart list");
  }
  const double reference = net.forward(v);
  const Eigen::RowVectorXd outputs = net.forwardBatch(counterparts);
  std::size_t best = 0;
  double best_gap = -1.0;
  for (Eigen::Index j = 0; j < outputs.size(); ++j) {
    const double gap = std::abs(outputs(j) - reference);
    if (gap > best_gap) {
      best_gap = gap;
      best = static_cast<std::size_t>(j);
    }
  }
  return best;
}

std::vector<double> maxDiffCounterpart(const DenseNetwork& net, std::span<const double> v,
                                       const std::vector<std::vector<double>>& counterparts) {
  if (counterparts.empty()) {
    throw PreconditionError("maxDiffCounterpart: empty counterpart list");
  }
  std::vector<Instance> wrapped;
  wrapped.reserve(counterparts.size());
  for (const auto& c : counterparts) {
    wrapped.push_back({c, 0.0});
  }
  return counterparts[maxDiffCounterpart(net, v, toMatrix(wrapped))];
}

namespace {

std::size_t nearest(const Eigen::MatrixXd& centroids, const Eigen::VectorXd& point,
                    double* distance) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.cols(); ++c) {
    const double d = (centroids.col(c) - point).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(c);
    }
  }
  if (distance != nullptr) {
    *distance = best_d;
  }
  return best;
}

}  // namespace

KMeansResult kmeans(std::span<const Instance> data, std::size_t k, Rng& rng,
                    std::size_t max_iter, double tolerance) {
  if (k == 0) {
    throw ConfigError("k must be at least 1");
  }
  if (k > data.size()) {
    throw ConfigError("k (" + std::to_string(k) + ") exceeds the number of points (" +
                      std::to_string(data.size()) + ")");
  }
  const Eigen::MatrixXd points = toMatrix(data);
  const auto n = static_cast<std::size_t>(points.cols());
  KMeansResult result;
  result.centroids.resize(points.rows(), static_cast<Eigen::Index>(k));

  // k-means++ seeding.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = static_cast<std::size_t>(rng.below(n));
  for (std::size_t c = 0; c < k; ++c) {
    result.centroids.col(static_cast<Eigen::Index>(c)) =
        points.col(static_cast<Eigen::Index>(pick));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (points.col(static_cast<Eigen::Index>(i)) -
                        result.centroids.col(static_cast<Eigen::Index>(c)))
                           .squaredNorm();
      d2[i] = std::min(d2[i], d);
      total += d2[i];
    }
    if (c + 1 == k) {
      break;
    }
    if (total <= 0.0) {
      pick = static_cast<std::size_t>(rng.below(n));
      continue;
    }
    double target = rng.uniform() * total;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= d2[i];
      if (target < 0.0 && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
  }

  result.assignment.assign(n, 0);
  std::vector<double> distance(n, 0.0);
  auto assign = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      result.assignment[i] =
          nearest(result.centroids, points.col(static_cast<Eigen::Index>(i)), &distance[i]);
    }
  };

  for (result.iterations = 0; result.iterations < max_iter;) {
    assign();
    ++result.iterations;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(points.rows(), static_cast<Eigen::Index>(k));
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.col(static_cast<Eigen::Index>(result.assignment[i])) +=
          points.col(static_cast<Eigen::Index>(i));
      ++sizes[result.assignment[i]];
    }
    Eigen::MatrixXd updated = result.centroids;
    for (std::size_t c = 0; c < k; ++c) {
      const auto col = static_cast<Eigen::Index>(c);
      if (sizes[c] > 0) {
        updated.col(col) = sums.col(col) / static_cast<double>(sizes[c]);
        continue;
      }
      const auto far = static_cast<std::size_t>(
          std::max_element(distance.begin(), distance.end()) - distance.begin());
      updated.col(col) = points.col(static_cast<Eigen::Index>(far));
      distance[far] = 0.0;
    }
    const double shift = (updated - result.centroids).colwise().norm().maxCoeff();
    result.centroids = std::move(updated);
    if (shift < tolerance) {
      break;
    }
  }
  assign();
  return result;
}

std::vector<std::size_t> kmeansSeedIndices(std::span<const Instance> data, std::size_t k,
                                           std::size_t n_seeds, Rng& rng) {
  if (n_seeds > data.size()) {
    throw ConfigError("requested " + std::to_string(n_seeds) + " seeds from only " +
                      std::to_string(data.size()) + " instances");
  }
  const KMeansResult clusters = kmeans(data, k, rng);
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < data.size(); ++i) {
    members[clusters.assignment[i]].push_back(i);
  }
  std::vector<std::size_t> by_size(k);
  std::iota(by_size.begin(), by_size.end(), std::size_t{0});
  std::stable_sort(by_size.begin(), by_size.end(), [&](std::size_t a, std::size_t b) {
    return members[a].size() > members[b].size();
  });

  std::vector<std::size_t> quota(k, n_seeds / k);
  for (std::size_t r = 0; r < n_seeds % k; ++r) {
    ++quota[by_size[r]];
  }
  std::size_t deficit = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (quota[c] > members[c].size()) {
      deficit += quota[c] - members[c].size();
      quota[c] = members[c].size();
    }
  }
  while (deficit > 0) {
    std::size_t target = k;
    std::size_t best_spare = 0;
    for (std::size_t c : by_size) {
      const std::size_t spare = members[c].size() - quota[c];
      if (spare > best_spare) {
        best_spare = spare;
        target = c;
      }
    }
    ++quota[target];
    --deficit;
  }

  std::vector<std::size_t> seeds;
  seeds.reserve(n_seeds);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::uint64_t pick : rng.sampleWithoutReplacement(members[c].size(), quota[c])) {
      seeds.push_back(members[c][static_cast<std::size_t>(pick)]);
    }
  }
  return seeds;
}

std::vector<Instance> kmeansSeeds(std::span<const Instance> data, std::size_t k,
                                  std::size_t n_seeds, Rng& rng) {
  std::vector<Instance> seeds;
  for (std::size_t i : kmeansSeedIndices(data, k, n_seeds, rng)) {
    seeds.push_back(data[i]);
  }
  return seeds;
}

void clipInPlace(std::span<double> v) {
  for (double& x : v) {
    if (std::isnan(x)) {
      throw NumericError("clipToDomain: NaN coordinate");
    }
    x = std::clamp(x, 0.0, 1.0);
  }
}

std::vector<double> clipToDomain(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  clipInPlace(out);
  return out;
}

}  // namespace fairsearch
