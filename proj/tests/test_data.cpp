#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "fairsearch/data.hpp"
#include "fairsearch/error.hpp"
#include "support.hpp"

using namespace fairsearch;
using fairsearch::testing::randomNet;
using fairsearch::testing::randomPoint;
using fairsearch::testing::syntheticSchema;

namespace {

DatasetSchema smallSchema() {
  return DatasetSchema::fromJson(nlohmann::json::parse(R"({
    "name": "small",
    "attributes": [
      {"name": "amount", "kind": "non_sensitive", "range": [0, 10]},
      {"name": "grade", "kind": "non_sensitive", "values": ["A", "B"]},
      {"name": "sex", "kind": "sensitive", "values": ["f", "m"]},
      {"name": "outcome", "kind": "label", "values": ["bad", "good"]}
    ]})"));
}

std::vector<Instance> parse(const std::string& csv, const DatasetSchema& schema) {
  std::istringstream in(csv);
  return parseDataset(in, schema);
}

template <typename Fn>
std::string errorMessage(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(LoadDataset, MinMaxEndpoints) {
  const auto rows = parse("amount,grade,sex,outcome\n0,A,f,bad\n10,B,m,good\n", smallSchema());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].features, (std::vector<double>{0.0, 0.0, 0.0}));
  EXPECT_EQ(rows[1].features, (std::vector<double>{1.0, 1.0, 1.0}));
  EXPECT_EQ(rows[0].label, 0.0);
  EXPECT_EQ(rows[1].label, 1.0);
}

TEST(LoadDataset, CategoricalPositionEncoding) {
  const auto schema = smallSchema();
  EXPECT_EQ(schema.encode(1, "B"), 1);
  EXPECT_EQ(schema.normalize(1, 1.0), 1.0);
}

TEST(LoadDataset, ColumnsMatchedByHeaderName) {
  const auto rows = parse("outcome,sex,grade,amount\ngood,m,A,5\n", smallSchema());
  EXPECT_EQ(rows[0].features, (std::vector<double>{0.5, 0.0, 1.0}));
  EXPECT_EQ(rows[0].label, 1.0);
}

TEST(LoadDataset, OutOfRangeValueNamesRow) {
  const auto msg = errorMessage([] { parse("amount,grade,sex,outcome\n1,A,f,bad\n11,A,f,bad\n", smallSchema()); });
  EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("amount"), std::string::npos) << msg;
  EXPECT_THROW(parse("amount,grade,sex,outcome\n11,A,f,bad\n", smallSchema()), DataError);
}

TEST(LoadDataset, UnknownCategoryNamesRowAndColumn) {
  const auto msg = errorMessage([] { parse("amount,grade,sex,outcome\n1,C,f,bad\n", smallSchema()); });
  EXPECT_NE(msg.find("row 1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("grade"), std::string::npos) << msg;
}

TEST(LoadDataset, MissingColumnIsSchemaError) {
  EXPECT_THROW(parse("amount,grade,outcome\n1,A,bad\n", smallSchema()), SchemaError);
}

TEST(LoadDataset, RaggedRowIsDataError) {
  EXPECT_THROW(parse("amount,grade,sex,outcome\n1,A,f\n", smallSchema()), DataError);
}

TEST(Schema, RoundTripOverEveryDomainValue) {
  const auto schema = smallSchema();
  for (std::int64_t raw = 0; raw <= 10; ++raw) {
    EXPECT_EQ(schema.decode(0, schema.normalize(0, static_cast<double>(raw))), raw);
    EXPECT_EQ(schema.denormalize(0, schema.normalize(0, static_cast<double>(raw))), static_cast<double>(raw));
  }
  for (std::int64_t code = 0; code < 2; ++code) {
    EXPECT_EQ(schema.decode(1, schema.normalize(1, static_cast<double>(code))), code);
  }
  EXPECT_EQ(schema.format(1, 0.9), "B");
  EXPECT_EQ(schema.format(0, 0.26), "3");
}

TEST(Schema, ValidationErrors) {
  EXPECT_THROW(DatasetSchema::fromJson(nlohmann::json::parse(
                   R"({"name":"x","attributes":[{"name":"a","kind":"non_sensitive","range":[0,1]}]})")),
               SchemaError);
  EXPECT_THROW(DatasetSchema::fromJson(nlohmann::json::parse(
                   R"({"name":"x","attributes":[{"name":"a","kind":"bogus","range":[0,1]},
                       {"name":"y","kind":"label","values":["0","1"]}]})")),
               SchemaError);
  EXPECT_THROW(DatasetSchema::load("/nonexistent/schema.json"), ConfigError);
}

TEST(Schema, ShippedSchemasLoad) {
  for (const char* name : {"german_credit", "adult", "bank_marketing", "compas"}) {
    const auto schema = DatasetSchema::load(std::string(FAIRSEARCH_DATA_DIR) + "/schemas/" + name + ".json");
    EXPECT_FALSE(schema.sensitiveFeatures().empty()) << name;
  }
}

TEST(Counterparts, SingleBinaryAttribute) {
  const auto schema = syntheticSchema(3, {2});
  Rng rng(0);
  const std::vector<double> v{0.1, 0.2, 0.3, 0.0};
  const auto cps = similarCounterparts(v, schema, 256, rng);
  ASSERT_EQ(cps.size(), 2u);
  EXPECT_EQ(cps[0], v);
  EXPECT_EQ(cps[1], (std::vector<double>{0.1, 0.2, 0.3, 1.0}));
}

TEST(Counterparts, FullProductWhenUnderCap) {
  const auto schema = syntheticSchema(2, {2, 5});
  Rng rng(0);
  const auto cps = similarCounterparts(std::vector<double>{0.4, 0.6, 1.0, 0.5}, schema, 100, rng);
  EXPECT_EQ(cps.size(), 10u);
  EXPECT_EQ(std::set<std::vector<double>>(cps.begin(), cps.end()).size(), 10u);
}

TEST(Counterparts, CapBindsWithDistinctSamplesIncludingV) {
  const auto schema = syntheticSchema(2, {2, 71, 5});
  const CounterpartEnumerator enumerator(schema, 256);
  EXPECT_EQ(enumerator.productSize(), 710u);
  EXPECT_TRUE(enumerator.sampled());
  Rng rng(3);
  const std::vector<double> v{0.4, 0.6, 1.0, 30.0 / 70.0, 0.25};
  const auto cps = similarCounterparts(v, schema, 256, rng);
  EXPECT_EQ(cps.size(), 256u);
  EXPECT_EQ(std::set<std::vector<double>>(cps.begin(), cps.end()).size(), 256u);
  EXPECT_NE(std::find(cps.begin(), cps.end(), v), cps.end());
  Rng again(3);
  EXPECT_EQ(similarCounterparts(v, schema, 256, again), cps);
}

TEST(Counterparts, SoundnessProperty) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> sizes;
    const auto n_sensitive = 1 + rng.below(3);
    for (std::uint64_t s = 0; s < n_sensitive; ++s) sizes.push_back(2 + rng.below(20));
    const auto schema = syntheticSchema(1 + rng.below(5), sizes);
    const std::size_t cap = 1 + rng.below(300);
    auto v = randomPoint(schema.featureCount(), rng);
    for (std::size_t f : schema.sensitiveFeatures()) {
      const double top = static_cast<double>(schema.feature(f).domainSize() - 1);
      v[f] = static_cast<double>(rng.below(schema.feature(f).domainSize())) / top;
    }
    std::uint64_t product = 1;
    for (auto s : sizes) product *= s;
    const auto cps = similarCounterparts(v, schema, cap, rng);
    ASSERT_EQ(cps.size(), std::min<std::uint64_t>(cap, product));
    EXPECT_NE(std::find(cps.begin(), cps.end(), v), cps.end());
    for (const auto& cp : cps) {
      for (std::size_t f = 0; f < v.size(); ++f) {
        if (!schema.sensitiveMask()[f]) {
          EXPECT_EQ(cp[f], v[f]);
        } else {
          const auto code = schema.decode(f, cp[f]);
          EXPECT_EQ(schema.normalize(f, static_cast<double>(code)), cp[f]);
        }
      }
    }
  }
}

TEST(Counterparts, NoSensitiveAttributesIsConfigurationError) {
  const auto schema = syntheticSchema(3, {});
  EXPECT_THROW(CounterpartEnumerator(schema, 10), ConfigError);
}

TEST(MaxDiff, TieBreakAndArgmax) {
  DenseLayer identity{Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Zero(1),
                      Activation::Sigmoid};
  const DenseNetwork net({identity});
  const auto logit = [](double p) { return std::log(p / (1 - p)); };
  const std::vector<double> v{logit(0.5)};
  EXPECT_EQ(maxDiffCounterpart(net, v, std::vector<std::vector<double>>{{logit(0.5)}, {logit(0.9)}, {logit(0.4)}}),
            (std::vector<double>{logit(0.9)}));
  EXPECT_EQ(maxDiffCounterpart(net, v, std::vector<std::vector<double>>{{0.0}, {0.0}, {0.0}}), (std::vector<double>{0.0}));
  EXPECT_EQ(maxDiffCounterpart(net, v, std::vector<std::vector<double>>{{0.3}}), (std::vector<double>{0.3}));
  Eigen::MatrixXd same = Eigen::MatrixXd::Zero(1, 4);
  EXPECT_EQ(maxDiffCounterpart(net, v, same), 0u);
  EXPECT_THROW(maxDiffCounterpart(net, v, std::vector<std::vector<double>>{}), PreconditionError);
}

namespace {

std::vector<Instance> twoBlobs(Rng& rng, std::size_t per_blob) {
  std::vector<Instance> data;
  for (std::size_t i = 0; i < 2 * per_blob; ++i) {
    const double center = i < per_blob ? 0.1 : 0.9;
    data.push_back({{center + rng.uniform(-0.02, 0.02), center + rng.uniform(-0.02, 0.02)}, 0.0});
  }
  return data;
}

}  // namespace

TEST(KMeans, SeparatedBlobsGiveOneSeedEach) {
  Rng data_rng(1);
  const auto data = twoBlobs(data_rng, 30);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto idx = kmeansSeedIndices(data, 2, 2, rng);
    ASSERT_EQ(idx.size(), 2u);
    const bool first_low = idx[0] < 30, second_low = idx[1] < 30;
    EXPECT_NE(first_low, second_low) << "seed " << seed;
  }
}

TEST(KMeans, AssignmentMatchesBruteForceNearestCentroid) {
  Rng rng(2);
  std::vector<Instance> data;
  for (int i = 0; i < 300; ++i) data.push_back({randomPoint(3, rng), 0.0});
  const auto result = kmeans(data, 4, rng);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Eigen::Map<const Eigen::VectorXd> x(data[i].features.data(), 3);
    std::size_t best = 0;
    for (std::size_t c = 1; c < 4; ++c) {
      if ((result.centroids.col(static_cast<Eigen::Index>(c)) - x).squaredNorm() <
          (result.centroids.col(static_cast<Eigen::Index>(best)) - x).squaredNorm()) {
        best = c;
      }
    }
    EXPECT_EQ(result.assignment[i], best);
  }
}

TEST(KMeans, SingleClusterAndWholeDataset) {
  Rng data_rng(4);
  std::vector<Instance> data;
  for (int i = 0; i < 40; ++i) data.push_back({randomPoint(2, data_rng), 0.0});
  Rng a(7);
  const auto one = kmeansSeedIndices(data, 1, 10, a);
  EXPECT_EQ(std::set<std::size_t>(one.begin(), one.end()).size(), 10u);
  Rng b(7);
  const auto all = kmeansSeedIndices(data, 4, 40, b);
  std::set<std::size_t> unique(all.begin(), all.end());
  EXPECT_EQ(unique.size(), 40u);
}

TEST(KMeans, DeterministicPerSeed) {
  Rng data_rng(5);
  std::vector<Instance> data;
  for (int i = 0; i < 100; ++i) data.push_back({randomPoint(4, data_rng), 0.0});
  Rng a(9), b(9);
  const auto ra = kmeans(data, 4, a);
  const auto rb = kmeans(data, 4, b);
  EXPECT_EQ(ra.centroids, rb.centroids);
  Rng c(9), d(9);
  EXPECT_EQ(kmeansSeedIndices(data, 4, 25, c), kmeansSeedIndices(data, 4, 25, d));
}

TEST(KMeans, ConfigurationErrors) {
  std::vector<Instance> data{{{0.1}, 0.0}, {{0.2}, 1.0}};
  Rng rng(0);
  EXPECT_THROW(kmeans(data, 3, rng), ConfigError);
  EXPECT_THROW(kmeansSeedIndices(data, 1, 3, rng), ConfigError);
}

TEST(Clip, Examples) {
  EXPECT_EQ(clipToDomain(std::vector<double>{-0.1, 0.5, 1.2}), (std::vector<double>{0.0, 0.5, 1.0}));
  const std::vector<double> inside{0.0, 0.25, 1.0};
  EXPECT_EQ(clipToDomain(inside), inside);
  EXPECT_THROW(clipToDomain(std::vector<double>{NAN, NAN}), NumericError);
}
