#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairsearch/nncore.hpp"
#include "json.hpp"

namespace fairsearch {

/// Cell of the fairness confusion matrix: accuracy (true/false) crossed with
/// individual fairness (fair/biased).
enum class FairnessCategory { TF = 0, TB = 1, FF = 2, FB = 3 };

std::string_view toString(FairnessCategory category);
FairnessCategory categoryFromString(std::string_view name);
FairnessCategory categorize(bool accurate, bool fair);
inline bool isAccurate(FairnessCategory c) {
  return c == FairnessCategory::TF || c == FairnessCategory::TB;
}
inline bool isFair(FairnessCategory c) {
  return c == FairnessCategory::TF || c == FairnessCategory::FF;
}

/// D(y, f(x,a')) <= K * d((x,a), (x,a')) with D the 0/1 label disagreement
/// and d the indicator that the two inputs differ. K = 0 demands identical
/// labels across the similar sub-population.
struct AccurateFairnessCriterion {
  double k = 0.0;

  bool satisfied(int reference_label, int counterpart_label, bool inputs_differ) const {
    const double label_distance = reference_label == counterpart_label ? 0.0 : 1.0;
    const double input_distance = inputs_differ ? 1.0 : 0.0;
    return label_distance <= k * input_distance;
  }
};

/// Accurate when predictLabel(v) == y; fair when every counterpart satisfies
/// the criterion against the prediction for v.
FairnessCategory classify(const DenseNetwork& net, std::span<const double> v, int y,
                          const Eigen::MatrixXd& counterparts, double threshold = 0.5,
                          const AccurateFairnessCriterion& criterion = {});
FairnessCategory classify(const DenseNetwork& net, std::span<const double> v, int y,
                          const std::vector<std::vector<double>>& counterparts,
                          double threshold = 0.5, const AccurateFairnessCriterion& criterion = {});

/// Counts over the fairness confusion matrix plus the derived statistics.
/// Counts are additive, so reports of disjoint shards merge by addition.
class ConfusionReport {
 public:
  void add(FairnessCategory category) { ++counts_[static_cast<std::size_t>(category)]; }
  void merge(const ConfusionReport& other);

  std::size_t count(FairnessCategory c) const { return counts_[static_cast<std::size_t>(c)]; }
  std::size_t tf() const { return count(FairnessCategory::TF); }
  std::size_t tb() const { return count(FairnessCategory::TB); }
  std::size_t ff() const { return count(FairnessCategory::FF); }
  std::size_t fb() const { return count(FairnessCategory::FB); }

  std::size_t sum() const { return tf() + tb() + ff() + fb(); }
  std::size_t falseCount() const { return ff() + fb(); }
  std::size_t biasedCount() const { return tb() + fb(); }
  /// Instances that are false or biased, each counted once.
  std::size_t falseOrBiasedCount() const { return tb() + ff() + fb(); }

  /// Rates are undefined (nullopt) for an empty report.
  bool ratesDefined() const { return sum() > 0; }
  std::optional<double> rate(FairnessCategory c) const;
  std::optional<double> accuracy() const;
  std::optional<double> individualFairness() const;

  nlohmann::json toJson() const;
  static ConfusionReport fromCounts(std::size_t tf, std::size_t tb, std::size_t ff, std::size_t fb);

  /// Count columns in table order: N_F,N_B,N_F|B,N_TF,N_TB,N_FF,N_FB,SUM,
  /// followed by the rates.
  static std::string csvHeader();
  std::string csvRow() const;

  bool operator==(const ConfusionReport&) const = default;

 private:
  std::array<std::size_t, 4> counts_{};
};

ConfusionReport tally(std::span<const FairnessCategory> records);

/// Shortest round-trip text for a double ("" when absent).
std::string formatRate(std::optional<double> value);

}  // namespace fairsearch
