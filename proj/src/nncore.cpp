#include "fairsearch/nncore.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fairsearch/error.hpp"
#include "fairsearch/io.hpp"
#include "fairsearch/random.hpp"

namespace fairsearch {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void activate(Eigen::MatrixXd& z, Activation activation) {
  switch (activation) {
    case Activation::ReLU:
      z = z.cwiseMax(0.0);
      break;
    case Activation::Sigmoid:
      z = z.unaryExpr([](double x) { return sigmoid(x); });
      break;
  }
}

// Derivative expressed through the activation output.
Eigen::MatrixXd activationDerivative(const Eigen::MatrixXd& out, Activation activation) {
  switch (activation) {
    case Activation::ReLU:
      return out.unaryExpr([](double a) { return a > 0.0 ? 1.0 : 0.0; });
    case Activation::Sigmoid:
      return out.array() * (1.0 - out.array());
  }
  return {};
}

void checkInput(std::size_t expected, std::size_t got) {
  if (expected != got) {
    throw ShapeError("input has " + std::to_string(got) + " features, network expects " +
                     std::to_string(expected));
  }
}

Eigen::MatrixXd column(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string formatDouble(double value) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, end);
}

}  // namespace

std::string_view toString(Activation activation) {
  return activation == Activation::ReLU ? "relu" : "sigmoid";
}

Activation activationFromString(std::string_view name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw ConfigError("unknown activation: " + std::string(name));
}

std::string_view toString(Optimizer optimizer) {
  return optimizer == Optimizer::Adam ? "adam" : "sgd";
}

Optimizer optimizerFromString(std::string_view name) {
  if (name == "adam") return Optimizer::Adam;
  if (name == "sgd") return Optimizer::SGD;
  throw ConfigError("unknown optimizer: " + std::string(name));
}

DenseNetwork::DenseNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) {
    throw ConfigError("network needs at least one layer");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weights.rows() == 0 || layer.weights.cols() == 0) {
      throw ShapeError("layer " + std::to_string(l) + " has an empty weight matrix");
    }
    if (layer.bias.size() != layer.weights.rows()) {
      throw ShapeError("layer " + std::to_string(l) + " bias length does not match its outputs");
    }
    if (l > 0 && layer.weights.cols() != layers_[l - 1].weights.rows()) {
      throw ShapeError("layer " + std::to_string(l) + " input width does not match layer " +
                       std::to_string(l - 1) + " output width");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw NumericError("layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
  const auto& last = layers_.back();
  if (last.weights.rows() != 1 || last.activation != Activation::Sigmoid) {
    throw ConfigError("output layer must be a single sigmoid unit");
  }
}

DenseNetwork DenseNetwork::glorotUniform(std::size_t input_dim, std::span<const std::size_t> hidden,
                                         std::uint64_t seed) {
  if (input_dim == 0) {
    throw ConfigError("input dimension must be positive");
  }
  Rng rng = Rng::stream(seed, {0x1417});
  std::vector<DenseLayer> layers;
  std::size_t in = input_dim;
  auto make = [&](std::size_t out, Activation act) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer;
    layer.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    // Row-major fill order so the draw sequence matches the serialized layout.
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        layer.weights(r, c) = rng.uniform(-limit, limit);
      }
    }
    layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
    layer.activation = act;
    layers.push_back(std::move(layer));
    in = out;
  };
  for (std::size_t width : hidden) {
    if (width == 0) {
      throw ConfigError("hidden layer width must be positive");
    }
    make(width, Activation::ReLU);
  }
  make(1, Activation::Sigmoid);
  return DenseNetwork(std::move(layers));
}

std::size_t DenseNetwork::parameterCount() const {
  std::size_t total = 0;
  for (const auto& layer : layers_) {
    total += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  }
  return total;
}

DenseNetwork::Trace DenseNetwork::propagate(const Eigen::MatrixXd& inputs) const {
  checkInput(inputDim(), static_cast<std::size_t>(inputs.rows()));
  Trace trace;
  trace.activations.reserve(layers_.size() + 1);
  trace.activations.push_back(inputs);
  for (const auto& layer : layers_) {
    Eigen::MatrixXd z = layer.weights * trace.activations.back();
    z.colwise() += layer.bias;
    activate(z, layer.activation);
    trace.activations.push_back(std::move(z));
  }
  return trace;
}

Eigen::MatrixXd DenseNetwork::backpropagate(const Trace& trace, Eigen::MatrixXd upstream,
                                            NetworkGradients* params) const {
  if (params != nullptr) {
    params->assign(layers_.size(), LayerGradient{});
  }
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    Eigen::MatrixXd delta =
        upstream.cwiseProduct(activationDerivative(trace.activations[l + 1], layer.activation));
    if (params != nullptr) {
      (*params)[l].weights = delta * trace.activations[l].transpose();
      (*params)[l].bias = delta.rowwise().sum();
    }
    upstream = layer.weights.transpose() * delta;
  }
  return upstream;
}

namespace {

constexpr Eigen::Index kRowBlock = 4;
constexpr Eigen::Index kSampleBlock = 4;

// z = x * w^T + b with samples along rows of x. Every output element is
// b + w0*x0 + w1*x1 + ... in that order, whichever block it lands in. The
// first `shared` columns of x are equal for all samples, so their partial
// sums are accumulated once (same order, same bits).
void denseKernel(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                 Eigen::Index shared, Eigen::MatrixXd& z) {
  const Eigen::Index n = x.rows();
  const Eigen::Index in = w.cols();
  const Eigen::Index out = w.rows();
  Eigen::VectorXd start = b;
  for (Eigen::Index k = 0; k < shared; ++k) {
    const double xk = x(0, k);
    for (Eigen::Index r = 0; r < out; ++r) start(r) += w(r, k) * xk;
  }
  z.resize(n, out);
  for (Eigen::Index j0 = 0; j0 < n; j0 += kSampleBlock) {
    for (Eigen::Index r0 = 0; r0 < out; r0 += kRowBlock) {
      const Eigen::Index rows = std::min(kRowBlock, out - r0);
      double acc[kRowBlock][kSampleBlock];
      for (Eigen::Index rr = 0; rr < kRowBlock; ++rr) {
        const double init = rr < rows ? start(r0 + rr) : 0.0;
        for (Eigen::Index jj = 0; jj < kSampleBlock; ++jj) acc[rr][jj] = init;
      }
      for (Eigen::Index k = shared; k < in; ++k) {
        const double* xs = x.col(k).data() + j0;
        double wk[kRowBlock];
        for (Eigen::Index rr = 0; rr < kRowBlock; ++rr) wk[rr] = rr < rows ? w(r0 + rr, k) : 0.0;
        for (Eigen::Index rr = 0; rr < kRowBlock; ++rr) {
          for (Eigen::Index jj = 0; jj < kSampleBlock; ++jj) acc[rr][jj] += wk[rr] * xs[jj];
        }
      }
      const Eigen::Index samples = std::min(kSampleBlock, n - j0);
      for (Eigen::Index rr = 0; rr < rows; ++rr) {
        for (Eigen::Index jj = 0; jj < samples; ++jj) z(j0 + jj, r0 + rr) = acc[rr][jj];
      }
    }
  }
}

// Number of leading features that take one value across the whole batch.
Eigen::Index sharedPrefix(const Eigen::MatrixXd& inputs) {
  Eigen::Index k = 0;
  while (k < inputs.rows() && (inputs.row(k).array() == inputs(k, 0)).all()) ++k;
  return k;
}

}  // namespace

Eigen::RowVectorXd DenseNetwork::evaluate(const Eigen::MatrixXd& inputs) const {
  checkInput(inputDim(), static_cast<std::size_t>(inputs.rows()));
  const Eigen::Index n = inputs.cols();
  // pad the sample count so the kernel never reads past a column
  const Eigen::Index padded = (n + kSampleBlock - 1) / kSampleBlock * kSampleBlock;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(padded, inputs.rows());
  x.topRows(n) = inputs.transpose();
  Eigen::MatrixXd z;
  Eigen::Index shared = sharedPrefix(inputs);
  for (const auto& layer : layers_) {
    denseKernel(x, layer.weights, layer.bias, shared, z);
    shared = 0;
    activate(z, layer.activation);
    std::swap(x, z);
  }
  return x.col(0).head(n).transpose();
}

double DenseNetwork::forward(std::span<const double> v) const {
  checkInput(inputDim(), v.size());
  return evaluate(column(v))(0);
}

Eigen::RowVectorXd DenseNetwork::forwardBatch(const Eigen::MatrixXd& inputs) const {
  return evaluate(inputs);
}

std::vector<double> DenseNetwork::inputGradient(std::span<const double> v, double y) const {
  checkInput(inputDim(), v.size());
  const Trace trace = propagate(column(v));
  Eigen::MatrixXd upstream(1, 1);
  upstream(0, 0) = 2.0 * (trace.activations.back()(0, 0) - y);
  const Eigen::MatrixXd grad = backpropagate(trace, std::move(upstream), nullptr);
  return {grad.data(), grad.data() + grad.size()};
}

NetworkGradients DenseNetwork::paramGradients(std::span<const double> v, double y) const {
  checkInput(inputDim(), v.size());
  const Trace trace = propagate(column(v));
  Eigen::MatrixXd upstream(1, 1);
  upstream(0, 0) = 2.0 * (trace.activations.back()(0, 0) - y);
  NetworkGradients grads;
  backpropagate(trace, std::move(upstream), &grads);
  return grads;
}

NetworkGradients DenseNetwork::batchGradients(const Eigen::MatrixXd& inputs,
                                              const Eigen::RowVectorXd& labels,
                                              double* mean_loss) const {
  if (labels.size() != inputs.cols()) {
    throw ShapeError("label count does not match batch size");
  }
  if (inputs.cols() == 0) {
    throw PreconditionError("empty batch");
  }
  const Trace trace = propagate(inputs);
  const Eigen::RowVectorXd residual = trace.activations.back().row(0) - labels;
  const double n = static_cast<double>(inputs.cols());
  if (mean_loss != nullptr) {
    *mean_loss = residual.squaredNorm() / n;
  }
  Eigen::MatrixXd upstream = (2.0 / n) * residual;
  NetworkGradients grads;
  backpropagate(trace, std::move(upstream), &grads);
  return grads;
}

int labelFromScore(double score, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("decision threshold must lie in (0,1)");
  }
  return score >= threshold ? 1 : 0;
}

int predictLabel(const DenseNetwork& net, std::span<const double> v, double threshold) {
  return labelFromScore(net.forward(v), threshold);
}

void TrainConfig::validate() const {
  if (batch_size == 0) {
    throw ConfigError("batch_size must be positive");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be a positive finite number");
  }
}

std::string TrainConfig::fingerprint() const {
  std::ostringstream out;
  out << "epochs=" << epochs << ";batch_size=" << batch_size
      << ";learning_rate=" << formatDouble(learning_rate) << ";optimizer=" << toString(optimizer)
      << ";rng_seed=" << rng_seed;
  return out.str();
}

Eigen::MatrixXd toMatrix(std::span<const Instance> data) {
  if (data.empty()) {
    return {};
  }
  const auto dim = static_cast<Eigen::Index>(data.front().features.size());
  Eigen::MatrixXd m(dim, static_cast<Eigen::Index>(data.size()));
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (static_cast<Eigen::Index>(data[j].features.size()) != dim) {
      throw ShapeError("instance " + std::to_string(j) + " has inconsistent dimension");
    }
    m.col(static_cast<Eigen::Index>(j)) =
        Eigen::Map<const Eigen::VectorXd>(data[j].features.data(), dim);
  }
  return m;
}

double meanLoss(const DenseNetwork& net, std::span<const Instance> data) {
  if (data.empty()) {
    throw PreconditionError("meanLoss of an empty dataset");
  }
  const Eigen::RowVectorXd out = net.forwardBatch(toMatrix(data));
  double total = 0.0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    total += lossMSE(data[j].label, out(static_cast<Eigen::Index>(j)));
  }
  return total / static_cast<double>(data.size());
}

namespace {

struct AdamState {
  std::vector<LayerGradient> m;
  std::vector<LayerGradient> v;
  std::size_t step = 0;
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

AdamState makeAdamState(const DenseNetwork& net) {
  AdamState state;
  for (const auto& layer : net.layers()) {
    LayerGradient zero{Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
                       Eigen::VectorXd::Zero(layer.bias.size())};
    state.m.push_back(zero);
    state.v.push_back(std::move(zero));
  }
  return state;
}

template <typename Param, typename Grad, typename Moment>
void adamUpdate(Param& param, const Grad& grad, Moment& m, Moment& v, double lr, double c1,
                double c2) {
  m = kBeta1 * m + (1.0 - kBeta1) * grad;
  v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseAbs2();
  param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEps);
}

}  // namespace

TrainResult train(DenseNetwork net, std::span<const Instance> data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) {
    throw ConfigError("training data is empty");
  }
  if (cfg.batch_size > data.size()) {
    throw ConfigError("batch_size (" + std::to_string(cfg.batch_size) +
                      ") exceeds the dataset size (" + std::to_string(data.size()) + ")");
  }
  const Eigen::MatrixXd inputs = toMatrix(data);
  checkInput(net.inputDim(), static_cast<std::size_t>(inputs.rows()));
  Eigen::RowVectorXd labels(static_cast<Eigen::Index>(data.size()));
  for (std::size_t j = 0; j < data.size(); ++j) {
    labels(static_cast<Eigen::Index>(j)) = data[j].label;
  }

  AdamState adam = makeAdamState(net);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Eigen::MatrixXd batch_inputs;
  Eigen::RowVectorXd batch_labels;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = Rng::stream(cfg.rng_seed, {0x7a11, epoch});
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      batch_inputs.resize(inputs.rows(), static_cast<Eigen::Index>(count));
      batch_labels.resize(static_cast<Eigen::Index>(count));
      for (std::size_t j = 0; j < count; ++j) {
        const auto src = static_cast<Eigen::Index>(order[start + j]);
        batch_inputs.col(static_cast<Eigen::Index>(j)) = inputs.col(src);
        batch_labels(static_cast<Eigen::Index>(j)) = labels(src);
      }
      double batch_loss = 0.0;
      const NetworkGradients grads = net.batchGradients(batch_inputs, batch_labels, &batch_loss);
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError("training diverged in epoch " + std::to_string(epoch + 1) +
                              ": loss is not finite");
      }
      if (cfg.optimizer == Optimizer::SGD) {
        for (std::size_t l = 0; l < grads.size(); ++l) {
          net.layer(l).weights -= cfg.learning_rate * grads[l].weights;
          net.layer(l).bias -= cfg.learning_rate * grads[l].bias;
        }
      } else {
        ++adam.step;
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.step));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.step));
        for (std::size_t l = 0; l < grads.size(); ++l) {
          adamUpdate(net.layer(l).weights, grads[l].weights, adam.m[l].weights, adam.v[l].weights,
                     cfg.learning_rate, c1, c2);
          adamUpdate(net.layer(l).bias, grads[l].bias, adam.m[l].bias, adam.v[l].bias,
                     cfg.learning_rate, c1, c2);
        }
      }
    }
  }
  TrainResult result{std::move(net), 0.0};
  result.final_loss = meanLoss(result.network, data);
  if (!std::isfinite(result.final_loss)) {
    throw DivergenceError("training diverged in epoch " + std::to_string(cfg.epochs) +
                          ": final loss is not finite");
  }
  return result;
}

void saveModel(const std::filesystem::path& path, const StoredModel& model) {
  using nlohmann::json;
  json layers = json::array();
  for (const auto& layer : model.network.layers()) {
    json weights = json::array();
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        weights.push_back(layer.weights(r, c));
      }
    }
    json bias = json::array();
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      bias.push_back(layer.bias(r));
    }
    layers.push_back({{"in", layer.weights.cols()},
                      {"out", layer.weights.rows()},
                      {"activation", toString(layer.activation)},
                      {"weights", std::move(weights)},
                      {"bias", std::move(bias)}});
  }
  const auto& cfg = model.train_config;
  json doc = {
      {"format", "fairsearch.dense_network"},
      {"version", 1},
      {"input_dim", model.network.inputDim()},
      {"layers", std::move(layers)},
      {"train_config",
       {{"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"learning_rate", cfg.learning_rate},
        {"optimizer", toString(cfg.optimizer)},
        {"rng_seed", cfg.rng_seed},
        {"fingerprint", cfg.fingerprint()}}},
      {"metadata", model.metadata},
  };
  writeFileAtomic(path, doc.dump(1) + "\n");
}

StoredModel loadModel(const std::filesystem::path& path) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(readFile(path));
  } catch (const json::exception& e) {
    throw ConfigError("model file " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    if (doc.at("format") != "fairsearch.dense_network") {
      throw ConfigError("model file " + path.string() + " has an unknown format");
    }
    std::vector<DenseLayer> layers;
    for (const auto& entry : doc.at("layers")) {
      const auto in = entry.at("in").get<Eigen::Index>();
      const auto out = entry.at("out").get<Eigen::Index>();
      const auto& weights = entry.at("weights");
      const auto& bias = entry.at("bias");
      if (static_cast<Eigen::Index>(weights.size()) != in * out ||
          static_cast<Eigen::Index>(bias.size()) != out) {
        throw ShapeError("model file " + path.string() + " has a layer with inconsistent sizes");
      }
      DenseLayer layer;
      layer.weights.resize(out, in);
      for (Eigen::Index r = 0; r < out; ++r) {
        for (Eigen::Index c = 0; c < in; ++c) {
          layer.weights(r, c) = weights[static_cast<std::size_t>(r * in + c)].get<double>();
        }
      }
      layer.bias.resize(out);
      for (Eigen::Index r = 0; r < out; ++r) {
        layer.bias(r) = bias[static_cast<std::size_t>(r)].get<double>();
      }
      layer.activation = activationFromString(entry.at("activation").get<std::string>());
      layers.push_back(std::move(layer));
    }
    DenseNetwork net(std::move(layers));
    if (net.inputDim() != doc.at("input_dim").get<std::size_t>()) {
      throw ShapeError("model file " + path.string() + " input_dim disagrees with its layers");
    }
    const auto& tc = doc.at("train_config");
    TrainConfig cfg;
    cfg.epochs = tc.at("epochs").get<std::size_t>();
    cfg.batch_size = tc.at("batch_size").get<std::size_t>();
    cfg.learning_rate = tc.at("learning_rate").get<double>();
    cfg.optimizer = optimizerFromString(tc.at("optimizer").get<std::string>());
    cfg.rng_seed = tc.at("rng_seed").get<std::uint64_t>();
    StoredModel model{std::move(net), cfg, doc.value("metadata", json::object())};
    return model;
  } catch (const json::exception& e) {
    throw ConfigError("model file " + path.string() + " is malformed: " + e.what());
  }
}

}  // namespace fairsearch
