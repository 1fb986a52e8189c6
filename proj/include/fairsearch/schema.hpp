#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace fairsearch {

enum class AttributeKind { NonSensitive, Sensitive, Label };

std::string_view toString(AttributeKind kind);

/// One CSV column. The domain is either an ordered list of categories
/// (encoded by position) or an inclusive integer range.
struct AttributeSpec {
  std::string name;
  AttributeKind kind = AttributeKind::NonSensitive;
  std::vector<std::string> categories;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::size_t index = 0;  // column position

  bool categorical() const { return !categories.empty(); }
  std::uint64_t domainSize() const;
  // Normalization bounds in encoded units.
  double lower() const { return categorical() ? 0.0 : static_cast<double>(lo); }
  double upper() const {
    return categorical() ? static_cast<double>(categories.size() - 1) : static_cast<double>(hi);
  }
};

/// Ordered attribute list with exactly one label column. Feature vectors hold
/// every non-label attribute in column order, each min-max normalized to
/// [0,1] over its declared domain.
class DatasetSchema {
 public:
  DatasetSchema(std::string name, std::vector<AttributeSpec> attributes);

  static DatasetSchema fromJson(const nlohmann::json& doc);
  static DatasetSchema load(const std::filesystem::path& path);
  nlohmann::json toJson() const;

  const std::string& name() const { return name_; }
  const std::vector<AttributeSpec>& attributes() const { return attributes_; }
  const AttributeSpec& label() const { return attributes_[label_column_]; }

  std::size_t featureCount() const { return feature_columns_.size(); }
  const AttributeSpec& feature(std::size_t f) const { return attributes_[feature_columns_.at(f)]; }

  /// true at feature indices holding sensitive attributes.
  const std::vector<bool>& sensitiveMask() const { return sensitive_mask_; }
  const std::vector<std::size_t>& sensitiveFeatures() const { return sensitive_features_; }
  std::size_t nonSensitiveCount() const { return featureCount() - sensitive_features_.size(); }

  /// Encoded value (category position or integer) of a raw CSV token.
  /// Throws DataError naming the attribute when the token is outside the domain.
  std::int64_t encode(std::size_t feature, std::string_view raw) const;
  double normalize(std::size_t feature, double code) const;
  /// Continuous inverse of normalize().
  double denormalize(std::size_t feature, double x) const;
  /// Nearest valid encoded value for a normalized coordinate.
  std::int64_t decode(std::size_t feature, double x) const;
  /// Raw CSV token (category name or integer) nearest to a normalized coordinate.
  std::string format(std::size_t feature, double x) const;

  /// 0/1 label from a raw label token; the second declared category (or the
  /// upper end of an integer range) is the positive class.
  double encodeLabel(std::string_view raw) const;
  std::string formatLabel(double label) const;

 private:
  std::string name_;
  std::vector<AttributeSpec> attributes_;
  std::size_t label_column_ = 0;
  std::vector<std::size_t> feature_columns_;
  std::vector<bool> sensitive_mask_;
  std::vector<std::size_t> sensitive_features_;
};

}  // namespace fairsearch
