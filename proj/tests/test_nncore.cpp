#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "fairsearch/error.hpp"
#include "fairsearch/nncore.hpp"
#include "support.hpp"

using namespace fairsearch;
using fairsearch::testing::closeRelative;
using fairsearch::testing::kinkMargin;
using fairsearch::testing::randomNet;
using fairsearch::testing::randomPoint;

namespace {

DenseNetwork zeroNet(std::size_t dim) {
  DenseNetwork net = DenseNetwork::fcnn6(dim, 1);
  for (std::size_t l = 0; l < net.layerCount(); ++l) {
    net.layer(l).weights.setZero();
    net.layer(l).bias.setZero();
  }
  return net;
}

DenseNetwork scalarNet(double w, double b) {
  DenseLayer layer{Eigen::MatrixXd::Constant(1, 1, w), Eigen::VectorXd::Constant(1, b),
                   Activation::Sigmoid};
  return DenseNetwork({layer});
}

}  // namespace

TEST(Forward, ZeroNetworkGivesHalf) {
  const auto net = zeroNet(5);
  EXPECT_EQ(net.forward(std::vector<double>{0.3, 0.1, 0.9, 0.0, 1.0}), 0.5);
}

TEST(Forward, SingleSigmoidUnitAtZero) {
  EXPECT_EQ(scalarNet(1.0, 0.0).forward(std::vector<double>{0.0}), 0.5);
}

TEST(Forward, RepeatedCallsAreBitIdentical) {
  Rng rng(3);
  const auto net = randomNet(6, {8, 4}, rng);
  const auto v = randomPoint(6, rng);
  const double first = net.forward(v);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(net.forward(v), first);
}

TEST(Forward, DimensionMismatchThrows) {
  const auto net = DenseNetwork::fcnn6(4, 0);
  EXPECT_THROW(net.forward(std::vector<double>{0.1, 0.2}), ShapeError);
  EXPECT_THROW(net.inputGradient(std::vector<double>{0.1}, 1.0), ShapeError);
  EXPECT_THROW(net.paramGradients(std::vector<double>{0.1}, 1.0), ShapeError);
}

TEST(Forward, OutputStaysInUnitInterval) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto net = randomNet(4, {6, 3}, rng, 5.0);
    std::vector<double> v(4);
    for (auto& x : v) x = rng.uniform(-50.0, 50.0);
    const double out = net.forward(v);
    EXPECT_GE(out, 0.0);
    EXPECT_LE(out, 1.0);
  }
}

TEST(Forward, BatchMatchesSingle) {
  Rng rng(5);
  const auto net = DenseNetwork::fcnn6(7, 9);
  Eigen::MatrixXd inputs(7, 40);
  for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
    for (Eigen::Index i = 0; i < inputs.rows(); ++i) inputs(i, j) = rng.uniform();
  }
  const auto batch = net.forwardBatch(inputs);
  for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
    const std::vector<double> col(inputs.col(j).data(), inputs.col(j).data() + 7);
    EXPECT_EQ(batch(j), net.forward(col)) << "column " << j;
  }
}

TEST(Loss, Examples) {
  EXPECT_EQ(lossMSE(1.0, 1.0), 0.0);
  EXPECT_NEAR(lossMSE(1.0, 0.8), 0.04, 1e-15);
  EXPECT_EQ(lossMSE(0.0, 0.5), 0.25);
}

TEST(Loss, NonNegativeAndZeroOnlyAtEquality) {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double y = rng.uniform(), yhat = rng.uniform();
    EXPECT_GE(lossMSE(y, yhat), 0.0);
    EXPECT_EQ(lossMSE(y, yhat) == 0.0, y == yhat);
  }
}

TEST(InputGradient, ZeroWeightsGiveZeroVector) {
  const auto g = zeroNet(3).inputGradient(std::vector<double>{0.2, 0.4, 0.6}, 1.0);
  for (double x : g) EXPECT_EQ(x, 0.0);
}

TEST(InputGradient, ZeroResidualGivesZeroVector) {
  Rng rng(8);
  const auto net = randomNet(5, {7, 3}, rng);
  const auto v = randomPoint(5, rng);
  const auto g = net.inputGradient(v, net.forward(v));
  for (double x : g) EXPECT_EQ(x, 0.0);
  for (const auto& layer : net.paramGradients(v, net.forward(v))) {
    EXPECT_EQ(layer.weights.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(layer.bias.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(InputGradient, MatchesCentralDifferences) {
  Rng rng(21);
  const double h = 1e-4;
  int checked = 0;
  while (checked < 100) {
    const auto net = randomNet(6, {10, 6, 4}, rng);
    const auto v = randomPoint(6, rng);
    if (kinkMargin(net, v) < 1e-2) continue;
    const double y = rng.uniform() < 0.5 ? 0.0 : 1.0;
    const auto g = net.inputGradient(v, y);
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto plus = v, minus = v;
      plus[i] += h;
      minus[i] -= h;
      const double numeric =
          (lossMSE(y, net.forward(plus)) - lossMSE(y, net.forward(minus))) / (2 * h);
      EXPECT_TRUE(closeRelative(g[i], numeric)) << "coordinate " << i << ": " << g[i] << " vs " << numeric;
    }
    ++checked;
  }
}

TEST(ParamGradients, MatchCentralDifferences) {
  Rng rng(22);
  const double h = 1e-4;
  int checked = 0;
  while (checked < 100) {
    auto net = randomNet(4, {6, 3}, rng);
    const auto v = randomPoint(4, rng);
    if (kinkMargin(net, v) < 1e-2) continue;
    const double y = rng.uniform();
    const auto grads = net.paramGradients(v, y);
    for (std::size_t l = 0; l < net.layerCount(); ++l) {
      auto& layer = net.layer(l);
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
          const double saved = layer.weights(r, c);
          layer.weights(r, c) = saved + h;
          const double up = lossMSE(y, net.forward(v));
          layer.weights(r, c) = saved - h;
          const double down = lossMSE(y, net.forward(v));
          layer.weights(r, c) = saved;
          EXPECT_TRUE(closeRelative(grads[l].weights(r, c), (up - down) / (2 * h)));
        }
        const double saved = layer.bias(r);
        layer.bias(r) = saved + h;
        const double up = lossMSE(y, net.forward(v));
        layer.bias(r) = saved - h;
        const double down = lossMSE(y, net.forward(v));
        layer.bias(r) = saved;
        EXPECT_TRUE(closeRelative(grads[l].bias(r), (up - down) / (2 * h)));
      }
    }
    ++checked;
  }
}

TEST(ParamGradients, BatchIsMeanOfExamples) {
  Rng rng(4);
  const auto net = randomNet(5, {8, 4}, rng);
  Eigen::MatrixXd inputs(5, 9);
  Eigen::RowVectorXd labels(9);
  for (Eigen::Index j = 0; j < 9; ++j) {
    for (Eigen::Index i = 0; i < 5; ++i) inputs(i, j) = rng.uniform();
    labels(j) = static_cast<double>(j % 2);
  }
  double mean_loss = 0.0;
  const auto batch = net.batchGradients(inputs, labels, &mean_loss);
  NetworkGradients sum;
  double loss_sum = 0.0;
  for (Eigen::Index j = 0; j < 9; ++j) {
    const std::vector<double> v(inputs.col(j).data(), inputs.col(j).data() + 5);
    const auto g = net.paramGradients(v, labels(j));
    loss_sum += lossMSE(labels(j), net.forward(v));
    if (sum.empty()) {
      sum = g;
    } else {
      for (std::size_t l = 0; l < g.size(); ++l) {
        sum[l].weights += g[l].weights;
        sum[l].bias += g[l].bias;
      }
    }
  }
  EXPECT_NEAR(mean_loss, loss_sum / 9, 1e-12);
  for (std::size_t l = 0; l < sum.size(); ++l) {
    EXPECT_LT((batch[l].weights - sum[l].weights / 9).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((batch[l].bias - sum[l].bias / 9).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PredictLabel, ThresholdConvention) {
  EXPECT_EQ(predictLabel(scalarNet(0.0, 0.0), std::vector<double>{1.0}), 1);
  EXPECT_EQ(labelFromScore(0.49), 0);
  EXPECT_EQ(labelFromScore(0.51), 1);
  EXPECT_EQ(labelFromScore(0.5), 1);
  EXPECT_EQ(predictLabel(scalarNet(0.0, std::log(0.49 / 0.51)), std::vector<double>{1.0}), 0);
  EXPECT_EQ(predictLabel(scalarNet(0.0, std::log(0.51 / 0.49)), std::vector<double>{1.0}), 1);
}

TEST(PredictLabel, ThresholdOutsideUnitIntervalRejected) {
  EXPECT_THROW(labelFromScore(0.5, 0.0), ConfigError);
  EXPECT_THROW(labelFromScore(0.5, 1.0), ConfigError);
  EXPECT_THROW(predictLabel(scalarNet(1, 0), std::vector<double>{0.0}, 1.5), ConfigError);
}

TEST(Init, GlorotBoundsAndZeroBias) {
  const auto net = DenseNetwork::fcnn6(21, 7);
  ASSERT_EQ(net.layerCount(), 6u);
  for (const auto& layer : net.layers()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
    EXPECT_LE(layer.weights.cwiseAbs().maxCoeff(), bound);
    EXPECT_EQ(layer.bias.cwiseAbs().maxCoeff(), 0.0);
  }
  EXPECT_EQ(net.layers().back().activation, Activation::Sigmoid);
  EXPECT_EQ(net.layers().back().weights.rows(), 1);
}

TEST(Network, RejectsBrokenLayerChains) {
  DenseLayer a{Eigen::MatrixXd::Ones(3, 2), Eigen::VectorXd::Zero(3), Activation::ReLU};
  DenseLayer b{Eigen::MatrixXd::Ones(1, 4), Eigen::VectorXd::Zero(1), Activation::Sigmoid};
  EXPECT_THROW(DenseNetwork({a, b}), ShapeError);
  DenseLayer relu_out{Eigen::MatrixXd::Ones(1, 3), Eigen::VectorXd::Zero(1), Activation::ReLU};
  EXPECT_THROW(DenseNetwork({a, relu_out}), ConfigError);
}

namespace {

std::vector<Instance> separableToySet() {
  std::vector<Instance> data;
  Rng rng(99);
  for (int i = 0; i < 20; ++i) {
    const double x0 = rng.uniform(), x1 = rng.uniform();
    const double side = x0 + x1 - 1.0;
    const double shifted = side >= 0 ? 0.15 : -0.15;
    data.push_back({{std::clamp(x0 + shifted / 2, 0.0, 1.0), std::clamp(x1 + shifted / 2, 0.0, 1.0)},
                    side >= 0 ? 1.0 : 0.0});
  }
  return data;
}

double accuracy(const DenseNetwork& net, const std::vector<Instance>& data) {
  int hits = 0;
  for (const auto& inst : data) hits += predictLabel(net, inst.features) == static_cast<int>(inst.label);
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace

TEST(Train, SeparableToySetReachesFullAccuracy) {
  const auto data = separableToySet();
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e-2;
  const std::size_t hidden[] = {8, 4};
  const auto result = train(DenseNetwork::glorotUniform(2, hidden, 1), data, cfg);
  EXPECT_EQ(accuracy(result.network, data), 1.0);
  EXPECT_NEAR(result.final_loss, meanLoss(result.network, data), 1e-15);
}

TEST(Train, ZeroEpochsLeavesNetworkUnchanged) {
  const auto data = separableToySet();
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.batch_size = 4;
  const auto init = DenseNetwork::fcnn6(2, 5);
  const auto result = train(init, data, cfg);
  for (std::size_t l = 0; l < init.layerCount(); ++l) {
    EXPECT_EQ(result.network.layers()[l].weights, init.layers()[l].weights);
    EXPECT_EQ(result.network.layers()[l].bias, init.layers()[l].bias);
  }
}

TEST(Train, SameSeedGivesBitIdenticalWeights) {
  const auto data = separableToySet();
  for (Optimizer opt : {Optimizer::Adam, Optimizer::SGD}) {
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.batch_size = 6;
    cfg.optimizer = opt;
    cfg.rng_seed = 42;
    const auto a = train(DenseNetwork::fcnn6(2, 3), data, cfg);
    const auto b = train(DenseNetwork::fcnn6(2, 3), data, cfg);
    for (std::size_t l = 0; l < a.network.layerCount(); ++l) {
      EXPECT_EQ(a.network.layers()[l].weights, b.network.layers()[l].weights);
      EXPECT_EQ(a.network.layers()[l].bias, b.network.layers()[l].bias);
    }
  }
}

TEST(Train, ConfigurationErrors) {
  TrainConfig cfg;
  EXPECT_THROW(train(DenseNetwork::fcnn6(2, 0), {}, cfg), ConfigError);
  const auto data = separableToySet();
  cfg.batch_size = 21;
  EXPECT_THROW(train(DenseNetwork::fcnn6(2, 0), data, cfg), ConfigError);
  cfg.batch_size = 4;
  cfg.learning_rate = 0.0;
  EXPECT_THROW(train(DenseNetwork::fcnn6(2, 0), data, cfg), ConfigError);
}

TEST(Train, DivergenceNamesTheEpoch) {
  const auto data = separableToySet();
  TrainConfig cfg;
  cfg.optimizer = Optimizer::SGD;
  cfg.learning_rate = 1e300;
  cfg.batch_size = 4;
  try {
    train(DenseNetwork::fcnn6(2, 0), data, cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(ModelFile, RoundTripIsBitExact) {
  Rng rng(31);
  StoredModel model{randomNet(5, {7, 3}, rng), TrainConfig{}, {{"note", "x"}}};
  model.train_config.rng_seed = 17;
  const auto path = std::filesystem::temp_directory_path() / "fairsearch_model_roundtrip.json";
  saveModel(path, model);
  const auto loaded = loadModel(path);
  for (std::size_t l = 0; l < model.network.layerCount(); ++l) {
    EXPECT_EQ(loaded.network.layers()[l].weights, model.network.layers()[l].weights);
    EXPECT_EQ(loaded.network.layers()[l].bias, model.network.layers()[l].bias);
    EXPECT_EQ(loaded.network.layers()[l].activation, model.network.layers()[l].activation);
  }
  EXPECT_EQ(loaded.train_config.fingerprint(), model.train_config.fingerprint());
  EXPECT_EQ(loaded.metadata, model.metadata);
  std::filesystem::remove(path);
}

TEST(ModelFile, MissingFileIsConfigurationError) {
  EXPECT_THROW(loadModel("/nonexistent/model.json"), ConfigError);
}
