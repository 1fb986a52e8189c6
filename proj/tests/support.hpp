#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fairsearch/nncore.hpp"
#include "fairsearch/random.hpp"
#include "fairsearch/schema.hpp"

namespace fairsearch::testing {

/// Random dense net with the given hidden widths; weights scaled so the
/// sigmoid is not saturated.
inline DenseNetwork randomNet(std::size_t input_dim, std::vector<std::size_t> hidden, Rng& rng,
                              double scale = 0.8) {
  std::vector<DenseLayer> layers;
  std::size_t in = input_dim;
  hidden.push_back(1);
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    DenseLayer layer;
    const std::size_t out = hidden[l];
    layer.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    layer.bias.resize(static_cast<Eigen::Index>(out));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        layer.weights(r, c) = rng.uniform(-scale, scale);
      }
      layer.bias(r) = rng.uniform(-0.3, 0.3);
    }
    layer.activation = l + 1 == hidden.size() ? Activation::Sigmoid : Activation::ReLU;
    layers.push_back(std::move(layer));
    in = out;
  }
  return DenseNetwork(std::move(layers));
}

inline std::vector<double> randomPoint(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.uniform();
  return v;
}

/// Smallest |pre-activation| over all hidden ReLU units; finite differences
/// are only meaningful away from the kinks.
inline double kinkMargin(const DenseNetwork& net, const std::vector<double>& v) {
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  double margin = INFINITY;
  for (const auto& layer : net.layers()) {
    Eigen::VectorXd z = layer.weights * a + layer.bias;
    if (layer.activation == Activation::ReLU) {
      margin = std::min(margin, z.cwiseAbs().minCoeff());
      a = z.cwiseMax(0.0);
    }
  }
  return margin;
}

inline bool closeRelative(double analytic, double numeric, double rel = 1e-4, double abs = 1e-6) {
  const double diff = std::abs(analytic - numeric);
  if (diff < abs) return true;
  return diff / std::max(std::abs(analytic), std::abs(numeric)) < rel;
}

/// Schema with `plain` non-sensitive range attributes, then the given
/// sensitive categorical domains, then a binary label.
inline DatasetSchema syntheticSchema(std::size_t plain, const std::vector<std::size_t>& sensitive_sizes) {
  std::vector<AttributeSpec> attrs;
  for (std::size_t i = 0; i < plain; ++i) {
    AttributeSpec a;
    a.name = "x" + std::to_string(i);
    a.kind = AttributeKind::NonSensitive;
    a.lo = 0;
    a.hi = 10;
    attrs.push_back(a);
  }
  for (std::size_t s = 0; s < sensitive_sizes.size(); ++s) {
    AttributeSpec a;
    a.name = "s" + std::to_string(s);
    a.kind = AttributeKind::Sensitive;
    for (std::size_t c = 0; c < sensitive_sizes[s]; ++c) a.categories.push_back("c" + std::to_string(c));
    attrs.push_back(a);
  }
  AttributeSpec label;
  label.name = "y";
  label.kind = AttributeKind::Label;
  label.categories = {"no", "yes"};
  attrs.push_back(label);
  return DatasetSchema("synthetic", std::move(attrs));
}

}  // namespace fairsearch::testing
