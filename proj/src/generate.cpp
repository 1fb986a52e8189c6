#include "fairsearch/generate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "fairsearch/error.hpp"

namespace fairsearch {

std::string_view toString(Phase phase) {
  switch (phase) {
    case Phase::Global:
      return "global";
    case Phase::Local:
      return "local";
    case Phase::FGSM:
      return "fgsm";
    case Phase::PGD:
      return "pgd";
  }
  return "global";
}

Phase phaseFromString(std::string_view name) {
  if (name == "global") return Phase::Global;
  if (name == "local") return Phase::Local;
  if (name == "fgsm") return Phase::FGSM;
  if (name == "pgd") return Phase::PGD;
  throw ConfigError("unknown phase '" + std::string(name) + "'");
}

void SearchConfig::validate() const {
  auto positive = [](double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw ConfigError(std::string(name) + " must be a positive finite number");
    }
  };
  if (n_seeds == 0) throw ConfigError("n_seeds must be positive");
  if (global_iter == 0) throw ConfigError("global_iter must be positive");
  if (local_iter == 0) throw ConfigError("local_iter must be positive");
  if (pgd_steps == 0) throw ConfigError("pgd_steps must be positive");
  if (counterpart_cap == 0) throw ConfigError("counterpart_cap must be positive");
  if (clusters == 0) throw ConfigError("clusters must be positive");
  positive(step, "step");
  positive(pgd_eps, "pgd_eps");
  positive(pgd_alpha, "pgd_alpha");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("threshold must lie in (0,1)");
  }
}

SearchConfig SearchConfig::clampedFor(const DatasetSchema& schema,
                                      std::vector<std::string>* warnings) const {
  SearchConfig out = *this;
  const std::size_t available = schema.nonSensitiveCount();
  if (out.local_iter > available) {
    if (warnings != nullptr) {
      warnings->push_back("local_iter " + std::to_string(out.local_iter) +
                          " exceeds the " + std::to_string(available) +
                          " non-sensitive attributes; clamped");
    }
    out.local_iter = available;
  }
  return out;
}

nlohmann::json SearchConfig::toJson() const {
  return {{"n_seeds", n_seeds},       {"global_iter", global_iter},
          {"local_iter", local_iter}, {"step", step},
          {"pgd_eps", pgd_eps},       {"pgd_alpha", pgd_alpha},
          {"pgd_steps", pgd_steps},   {"rng_seed", rng_seed},
          {"max_pool", max_pool},     {"counterpart_cap", counterpart_cap},
          {"clusters", clusters},     {"threshold", threshold}};
}

SearchConfig SearchConfig::fromJson(const nlohmann::json& doc) {
  SearchConfig cfg;
  cfg.n_seeds = doc.value("n_seeds", cfg.n_seeds);
  cfg.global_iter = doc.value("global_iter", cfg.global_iter);
  cfg.local_iter = doc.value("local_iter", cfg.local_iter);
  cfg.step = doc.value("step", cfg.step);
  cfg.pgd_eps = doc.value("pgd_eps", cfg.pgd_eps);
  cfg.pgd_alpha = doc.value("pgd_alpha", cfg.pgd_alpha);
  cfg.pgd_steps = doc.value("pgd_steps", cfg.pgd_steps);
  cfg.rng_seed = doc.value("rng_seed", cfg.rng_seed);
  cfg.max_pool = doc.value("max_pool", cfg.max_pool);
  cfg.counterpart_cap = doc.value("counterpart_cap", cfg.counterpart_cap);
  cfg.clusters = doc.value("clusters", cfg.clusters);
  cfg.threshold = doc.value("threshold", cfg.threshold);
  return cfg;
}

namespace {

// Stream tags keep the random streams of different phases apart.
constexpr std::uint64_t kGlobalStream = 0x61;
constexpr std::uint64_t kLocalStream = 0x62;
constexpr std::uint64_t kPoolStream = 0x63;

constexpr std::array<DirectionKind, 3> kDirections = {DirectionKind::FF, DirectionKind::TB,
                                                      DirectionKind::FB};

struct SearchPoint {
  std::vector<double> g;
  double output = 0.0;
  std::array<DirectionVector, 3> directions;
};

// Picks the most divergent counterpart and derives the three fairness
// confusion directions from the loss gradients at v and at that counterpart.
SearchPoint analyze(const DenseNetwork& net, const CounterpartEnumerator& counterparts,
                    const std::vector<bool>& mask, std::span<const double> v, double y, Rng& rng) {
  const Eigen::MatrixXd candidates = counterparts.build(v, &rng);
  const std::size_t pick = maxDiffCounterpart(net, v, candidates);
  const Eigen::VectorXd other = candidates.col(static_cast<Eigen::Index>(pick));
  SearchPoint point;
  point.g = net.inputGradient(v, y);
  const std::vector<double> g_prime =
      net.inputGradient(std::span<const double>(other.data(), static_cast<std::size_t>(other.size())), y);
  point.output = net.forward(v);
  point.directions = {dirFF(point.g, g_prime, mask), dirTB(point.g, g_prime, mask),
                      dirFB(point.g, g_prime, mask)};
  return point;
}

GeneratedInstance emit(const DenseNetwork& net, std::span<const double> v, double y,
                       const SearchPoint& point, std::vector<double> v_p, Provenance provenance) {
  clipInPlace(v_p);
  const double y_p = groundTruthFromOutputs(y, point.output, net.forward(v_p), point.g, v, v_p);
  provenance.degenerate = std::equal(v_p.begin(), v_p.end(), v.begin());
  return {std::move(v_p), std::clamp(y_p, 0.0, 1.0), provenance};
}

void requireDims(const DenseNetwork& net, const DatasetSchema& schema) {
  if (net.inputDim() != schema.featureCount()) {
    throw ShapeError("network expects " + std::to_string(net.inputDim()) +
                     " features, schema declares " + std::to_string(schema.featureCount()));
  }
}

}  // namespace

GenerationResult globalGeneration(const DenseNetwork& net, const DatasetSchema& schema,
                                  std::span<const Instance> seeds, const SearchConfig& cfg) {
  cfg.validate();
  requireDims(net, schema);
  if (seeds.empty()) {
    throw PreconditionError("globalGeneration: no seeds");
  }
  const CounterpartEnumerator counterparts(schema, cfg.counterpart_cap);
  const auto& mask = schema.sensitiveMask();

  struct Current {
    std::vector<double> features;
    double label;
    std::size_t seed_id;
  };
  std::vector<Current> current;
  current.reserve(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    current.push_back({seeds[i].features, seeds[i].label, i});
  }

  GenerationResult result;
  for (std::size_t round = 0; round < cfg.global_iter; ++round) {
    std::vector<Current> next;
    next.reserve(current.size() * kDirections.size());
    for (std::size_t i = 0; i < current.size(); ++i) {
      const auto& item = current[i];
      Rng rng = Rng::stream(cfg.rng_seed, {kGlobalStream, round, i});
      const SearchPoint point = analyze(net, counterparts, mask, item.features, item.label, rng);
      ++result.searches;
      for (const auto& dir : point.directions) {
        std::vector<double> v_p = item.features;
        for (std::size_t j = 0; j < v_p.size(); ++j) {
          v_p[j] += cfg.step * dir.values[j];
        }
        GeneratedInstance out = emit(net, item.features, item.label, point, std::move(v_p),
                                     {Phase::Global, dir.kind, item.seed_id, round, false});
        next.push_back({out.features, out.approx_label, item.seed_id});
        result.instances.push_back(std::move(out));
      }
    }
    if (cfg.max_pool > 0 && next.size() > cfg.max_pool && round + 1 < cfg.global_iter) {
      Rng rng = Rng::stream(cfg.rng_seed, {kPoolStream, round});
      std::vector<Current> kept;
      kept.reserve(cfg.max_pool);
      for (std::uint64_t idx : rng.sampleWithoutReplacement(next.size(), cfg.max_pool)) {
        kept.push_back(std::move(next[static_cast<std::size_t>(idx)]));
      }
      next = std::move(kept);
      result.truncated = true;
    }
    current = std::move(next);
  }
  return result;
}

GenerationResult localGeneration(const DenseNetwork& net, const DatasetSchema& schema,
                                 std::span<const GeneratedInstance> global,
                                 const SearchConfig& cfg) {
  cfg.validate();
  requireDims(net, schema);
  if (global.empty()) {
    throw PreconditionError("localGeneration: global phase produced no instances");
  }
  const CounterpartEnumerator counterparts(schema, cfg.counterpart_cap);
  const auto& mask = schema.sensitiveMask();

  GenerationResult result;
  std::vector<std::size_t> order;
  for (std::size_t m = 0; m < global.size(); ++m) {
    const auto& source = global[m];
    Rng rng = Rng::stream(cfg.rng_seed, {kLocalStream, m});
    const SearchPoint point =
        analyze(net, counterparts, mask, source.features, source.approx_label, rng);
    ++result.searches;
    for (const auto& dir : point.directions) {
      order.clear();
      for (std::size_t j = 0; j < dir.values.size(); ++j) {
        if (!mask[j] && dir.values[j] != 0.0) {
          order.push_back(j);
        }
      }
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(dir.values[a]) < std::abs(dir.values[b]);
      });
      const std::size_t steps = std::min(cfg.local_iter, order.size());
      for (std::size_t i = 0; i < steps; ++i) {
        std::vector<double> v_p = source.features;
        v_p[order[i]] += cfg.step * dir.values[order[i]];
        result.instances.push_back(
            emit(net, source.features, source.approx_label, point, std::move(v_p),
                 {Phase::Local, dir.kind, source.provenance.seed_id, i, false}));
      }
    }
  }
  return result;
}

GenerationResult fgsm(const DenseNetwork& net, const DatasetSchema& schema,
                      std::span<const Instance> samples, double eps) {
  requireDims(net, schema);
  if (!(eps >= 0.0) || !std::isfinite(eps)) {
    throw ConfigError("fgsm: eps must be a nonnegative finite number");
  }
  const auto& mask = schema.sensitiveMask();
  GenerationResult result;
  result.instances.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& sample = samples[i];
    const std::vector<double> g = net.inputGradient(sample.features, sample.label);
    std::vector<double> v_p = sample.features;
    for (std::size_t j = 0; j < v_p.size(); ++j) {
      if (!mask[j]) {
        v_p[j] += eps * signOf(g[j]);
      }
    }
    clipInPlace(v_p);
    Provenance provenance{Phase::FGSM, DirectionKind::LossAscent, i, 0, false};
    provenance.degenerate = v_p == sample.features;
    result.instances.push_back({std::move(v_p), sample.label, provenance});
    ++result.searches;
  }
  return result;
}

GenerationResult pgd(const DenseNetwork& net, const DatasetSchema& schema,
                     std::span<const Instance> seeds, const SearchConfig& cfg) {
  cfg.validate();
  requireDims(net, schema);
  const auto& mask = schema.sensitiveMask();
  GenerationResult result;
  result.instances.reserve(seeds.size() * cfg.pgd_steps);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto& seed = seeds[i];
    std::vector<double> v = seed.features;
    for (std::size_t t = 0; t < cfg.pgd_steps; ++t) {
      const std::vector<double> g = net.inputGradient(v, seed.label);
      ++result.searches;
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (mask[j]) {
          continue;
        }
        const double stepped = v[j] + cfg.pgd_alpha * signOf(g[j]);
        v[j] = std::clamp(stepped, seed.features[j] - cfg.pgd_eps, seed.features[j] + cfg.pgd_eps);
      }
      clipInPlace(v);
      Provenance provenance{Phase::PGD, DirectionKind::LossAscent, i, t, false};
      provenance.degenerate = v == seed.features;
      result.instances.push_back({v, seed.label, provenance});
    }
  }
  return result;
}

}  // namespace fairsearch
