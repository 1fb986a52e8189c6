#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairsearch/instance.hpp"
#include "json.hpp"

namespace fairsearch {

enum class Activation { ReLU, Sigmoid };

std::string_view toString(Activation activation);
Activation activationFromString(std::string_view name);

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
  Activation activation = Activation::ReLU;
};

struct LayerGradient {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};
using NetworkGradients = std::vector<LayerGradient>;

/// Hidden widths of the default six-layer classifier; a 1-unit sigmoid
/// output layer follows.
inline constexpr std::size_t kFcnn6Hidden[] = {64, 32, 16, 8, 4};

/// Fully connected binary classifier with a single sigmoid output.
///
/// Instances are immutable once built except through layer(), which the
/// trainer uses to apply parameter updates in place. All const member
/// functions are safe to call concurrently.
class DenseNetwork {
 public:
  /// Validates the layer chain: dimensions must link up, the last layer must
  /// have one sigmoid unit and every parameter must be finite.
  explicit DenseNetwork(std::vector<DenseLayer> layers);

  /// ReLU hidden layers of the given widths plus a sigmoid output unit,
  /// initialized with uniform(-sqrt(6/(in+out)), +sqrt(6/(in+out))) weights and
  /// zero biases.
  static DenseNetwork glorotUniform(std::size_t input_dim, std::span<const std::size_t> hidden,
                                    std::uint64_t seed);
  static DenseNetwork fcnn6(std::size_t input_dim, std::uint64_t seed) {
    return glorotUniform(input_dim, kFcnn6Hidden, seed);
  }

  std::size_t inputDim() const { return static_cast<std::size_t>(layers_.front().weights.cols()); }
  std::size_t layerCount() const { return layers_.size(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  DenseLayer& layer(std::size_t i) { return layers_.at(i); }
  std::size_t parameterCount() const;

  /// f(v) in [0,1].
  double forward(std::span<const double> v) const;

  /// Outputs for every column of `inputs` (input_dim x n).
  Eigen::RowVectorXd forwardBatch(const Eigen::MatrixXd& inputs) const;

  /// d lossMSE(y, f(v)) / dv.
  std::vector<double> inputGradient(std::span<const double> v, double y) const;

  /// d lossMSE(y, f(v)) / d(parameters) for one example.
  NetworkGradients paramGradients(std::span<const double> v, double y) const;

  /// Gradient of the mean MSE over the columns of `inputs`. Also returns the
  /// mean loss through `mean_loss` when it is non-null.
  NetworkGradients batchGradients(const Eigen::MatrixXd& inputs, const Eigen::RowVectorXd& labels,
                                  double* mean_loss = nullptr) const;

 private:
  struct Trace {
    std::vector<Eigen::MatrixXd> activations;  // activations[0] is the input
  };
  Trace propagate(const Eigen::MatrixXd& inputs) const;
  // Inference path. Each column is accumulated in the same order whatever the
  // batch width, so forward(v) and forwardBatch agree bit for bit.
  Eigen::RowVectorXd evaluate(const Eigen::MatrixXd& inputs) const;
  // Backpropagates dL/d(output) through the trace; fills parameter gradients
  // when `params` is non-null and returns dL/d(input).
  Eigen::MatrixXd backpropagate(const Trace& trace, Eigen::MatrixXd upstream,
                                NetworkGradients* params) const;

  std::vector<DenseLayer> layers_;
};

/// Squared error (y - yhat)^2.
inline double lossMSE(double y, double yhat) {
  const double r = y - yhat;
  return r * r;
}

/// 1 iff forward(net, v) >= threshold. Threshold must lie in (0,1).
int predictLabel(const DenseNetwork& net, std::span<const double> v, double threshold = 0.5);

/// Same rule applied to an already computed output.
int labelFromScore(double score, double threshold = 0.5);

enum class Optimizer { SGD, Adam };

std::string_view toString(Optimizer optimizer);
Optimizer optimizerFromString(std::string_view name);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::Adam;
  std::uint64_t rng_seed = 0;

  void validate() const;
  /// Stable textual digest of every field, stored with saved models.
  std::string fingerprint() const;
};

struct TrainResult {
  DenseNetwork network;
  double final_loss = 0.0;  // mean MSE over the whole training set
};

/// Minibatch training on mean MSE. Deterministic for a given cfg.rng_seed.
TrainResult train(DenseNetwork net, std::span<const Instance> data, const TrainConfig& cfg);

/// Mean MSE of the network over a dataset.
double meanLoss(const DenseNetwork& net, std::span<const Instance> data);

/// Column-stacks instance features into an input_dim x n matrix.
Eigen::MatrixXd toMatrix(std::span<const Instance> data);

struct StoredModel {
  DenseNetwork network;
  TrainConfig train_config;
  nlohmann::json metadata = nlohmann::json::object();  // caller-owned, stored verbatim
};

void saveModel(const std::filesystem::path& path, const StoredModel& model);
StoredModel loadModel(const std::filesystem::path& path);

}  // namespace fairsearch
