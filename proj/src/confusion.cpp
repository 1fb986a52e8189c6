#include "fairsearch/confusion.hpp"

#include <charconv>

#include "fairsearch/error.hpp"

namespace fairsearch {

std::string_view toString(FairnessCategory category) {
  switch (category) {
    case FairnessCategory::TF:
      return "TF";
    case FairnessCategory::TB:
      return "TB";
    case FairnessCategory::FF:
      return "FF";
    case FairnessCategory::FB:
      return "FB";
  }
  return "TF";
}

FairnessCategory categoryFromString(std::string_view name) {
  if (name == "TF") return FairnessCategory::TF;
  if (name == "TB") return FairnessCategory::TB;
  if (name == "FF") return FairnessCategory::FF;
  if (name == "FB") return FairnessCategory::FB;
  throw ConfigError("unknown fairness category '" + std::string(name) + "'");
}

FairnessCategory categorize(bool accurate, bool fair) {
  if (accurate) {
    return fair ? FairnessCategory::TF : FairnessCategory::TB;
  }
  return fair ? FairnessCategory::FF : FairnessCategory::FB;
}

FairnessCategory classify(const DenseNetwork& net, std::span<const double> v, int y,
                          const Eigen::MatrixXd& counterparts, double threshold,
                          const AccurateFairnessCriterion& criterion) {
  if (counterparts.cols() == 0) {
    throw PreconditionError("classify: empty counterpart list");
  }
  if (counterparts.rows() != static_cast<Eigen::Index>(v.size())) {
    throw ShapeError("classify: counterpart dimension does not match the instance");
  }
  const int predicted = predictLabel(net, v, threshold);
  const Eigen::RowVectorXd outputs = net.forwardBatch(counterparts);
  const Eigen::Map<const Eigen::VectorXd> base(v.data(), static_cast<Eigen::Index>(v.size()));
  bool fair = true;
  for (Eigen::Index j = 0; j < outputs.size() && fair; ++j) {
    const int label = labelFromScore(outputs(j), threshold);
    const bool differs = counterparts.col(j) != base;
    fair = criterion.satisfied(predicted, label, differs);
  }
  return categorize(predicted == y, fair);
}

FairnessCategory classify(const DenseNetwork& net, std::span<const double> v, int y,
                          const std::vector<std::vector<double>>& counterparts, double threshold,
                          const AccurateFairnessCriterion& criterion) {
  if (counterparts.empty()) {
    throw PreconditionError("classify: empty counterpart list");
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()),
                    static_cast<Eigen::Index>(counterparts.size()));
  for (std::size_t j = 0; j < counterparts.size(); ++j) {
    if (counterparts[j].size() != v.size()) {
      throw ShapeError("classify: counterpart dimension does not match the instance");
    }
    m.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(
        counterparts[j].data(), static_cast<Eigen::Index>(v.size()));
  }
  return classify(net, v, y, m, threshold, criterion);
}

void ConfusionReport::merge(const ConfusionReport& other) {
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    counts_[i] += other.counts_[i];
  }
}

std::optional<double> ConfusionReport::rate(FairnessCategory c) const {
  if (!ratesDefined()) {
    return std::nullopt;
  }
  return static_cast<double>(count(c)) / static_cast<double>(sum());
}

std::optional<double> ConfusionReport::accuracy() const {
  if (!ratesDefined()) {
    return std::nullopt;
  }
  return *rate(FairnessCategory::TF) + *rate(FairnessCategory::TB);
}

std::optional<double> ConfusionReport::individualFairness() const {
  if (!ratesDefined()) {
    return std::nullopt;
  }
  return *rate(FairnessCategory::TF) + *rate(FairnessCategory::FF);
}

ConfusionReport ConfusionReport::fromCounts(std::size_t tf, std::size_t tb, std::size_t ff,
                                            std::size_t fb) {
  ConfusionReport r;
  r.counts_ = {tf, tb, ff, fb};
  return r;
}

std::string formatRate(std::optional<double> value) {
  if (!value) {
    return "";
  }
  char buffer[64];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), *value);
  return std::string(buffer, end);
}

nlohmann::json ConfusionReport::toJson() const {
  auto rateJson = [](std::optional<double> v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {
      {"N_F", falseCount()},
      {"N_B", biasedCount()},
      {"N_F|B", falseOrBiasedCount()},
      {"N_TF", tf()},
      {"N_TB", tb()},
      {"N_FF", ff()},
      {"N_FB", fb()},
      {"SUM", sum()},
      {"rates_defined", ratesDefined()},
      {"ACC", rateJson(accuracy())},
      {"IF", rateJson(individualFairness())},
      {"R_TF", rateJson(rate(FairnessCategory::TF))},
      {"R_TB", rateJson(rate(FairnessCategory::TB))},
      {"R_FF", rateJson(rate(FairnessCategory::FF))},
      {"R_FB", rateJson(rate(FairnessCategory::FB))},
  };
}

std::string ConfusionReport::csvHeader() {
  return "N_F,N_B,N_F|B,N_TF,N_TB,N_FF,N_FB,SUM,ACC,IF,R_TF,R_TB,R_FF,R_FB";
}

std::string ConfusionReport::csvRow() const {
  std::string row;
  for (std::size_t v : {falseCount(), biasedCount(), falseOrBiasedCount(), tf(), tb(), ff(), fb(),
                        sum()}) {
    row += std::to_string(v);
    row += ',';
  }
  row += formatRate(accuracy()) + ',' + formatRate(individualFairness()) + ',' +
         formatRate(rate(FairnessCategory::TF)) + ',' + formatRate(rate(FairnessCategory::TB)) +
         ',' + formatRate(rate(FairnessCategory::FF)) + ',' + formatRate(rate(FairnessCategory::FB));
  return row;
}

ConfusionReport tally(std::span<const FairnessCategory> records) {
  ConfusionReport report;
  for (FairnessCategory c : records) {
    report.add(c);
  }
  return report;
}

}  // namespace fairsearch
