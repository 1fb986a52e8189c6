#include "fairsearch/schema.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "fairsearch/error.hpp"
#include "fairsearch/io.hpp"

namespace fairsearch {

std::string_view toString(AttributeKind kind) {
  switch (kind) {
    case AttributeKind::NonSensitive:
      return "non_sensitive";
    case AttributeKind::Sensitive:
      return "sensitive";
    case AttributeKind::Label:
      return "label";
  }
  return "non_sensitive";
}

namespace {

AttributeKind kindFromString(const std::string& name) {
  if (name == "non_sensitive") return AttributeKind::NonSensitive;
  if (name == "sensitive") return AttributeKind::Sensitive;
  if (name == "label") return AttributeKind::Label;
  throw SchemaError("unknown attribute kind '" + name + "'");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

std::uint64_t AttributeSpec::domainSize() const {
  if (categorical()) {
    return categories.size();
  }
  return static_cast<std::uint64_t>(hi - lo) + 1;
}

DatasetSchema::DatasetSchema(std::string name, std::vector<AttributeSpec> attributes)
    : name_(std::move(name)), attributes_(std::move(attributes)) {
  std::size_t labels = 0;
  std::set<std::string> names;
  for (std::size_t c = 0; c < attributes_.size(); ++c) {
    auto& attr = attributes_[c];
    attr.index = c;
    if (attr.name.empty()) {
      throw SchemaError("attribute " + std::to_string(c) + " has no name");
    }
    if (!names.insert(attr.name).second) {
      throw SchemaError("duplicate attribute name '" + attr.name + "'");
    }
    if (attr.categorical()) {
      std::set<std::string> values(attr.categories.begin(), attr.categories.end());
      if (values.size() != attr.categories.size()) {
        throw SchemaError("attribute '" + attr.name + "' lists a category twice");
      }
    } else if (attr.hi < attr.lo) {
      throw SchemaError("attribute '" + attr.name + "' has an empty integer range");
    }
    if (attr.kind == AttributeKind::Label) {
      ++labels;
      label_column_ = c;
      if (attr.domainSize() != 2) {
        throw SchemaError("label attribute '" + attr.name + "' must have exactly two values");
      }
      continue;
    }
    const std::size_t feature = feature_columns_.size();
    feature_columns_.push_back(c);
    const bool sensitive = attr.kind == AttributeKind::Sensitive;
    sensitive_mask_.push_back(sensitive);
    if (sensitive) {
      sensitive_features_.push_back(feature);
    }
  }
  if (labels != 1) {
    throw SchemaError("schema must declare exactly one label attribute, found " +
                      std::to_string(labels));
  }
  if (feature_columns_.empty()) {
    throw SchemaError("schema has no feature attributes");
  }
}

DatasetSchema DatasetSchema::fromJson(const nlohmann::json& doc) {
  try {
    std::vector<AttributeSpec> attributes;
    for (const auto& entry : doc.at("attributes")) {
      AttributeSpec attr;
      attr.name = entry.at("name").get<std::string>();
      attr.kind = kindFromString(entry.at("kind").get<std::string>());
      const bool has_values = entry.contains("values");
      const bool has_range = entry.contains("range");
      if (has_values == has_range) {
        throw SchemaError("attribute '" + attr.name +
                          "' must declare exactly one of 'values' or 'range'");
      }
      if (has_values) {
        attr.categories = entry.at("values").get<std::vector<std::string>>();
        if (attr.categories.empty()) {
          throw SchemaError("attribute '" + attr.name + "' has an empty value list");
        }
      } else {
        const auto range = entry.at("range").get<std::vector<std::int64_t>>();
        if (range.size() != 2) {
          throw SchemaError("attribute '" + attr.name + "' range must be [lo, hi]");
        }
        attr.lo = range[0];
        attr.hi = range[1];
      }
      attributes.push_back(std::move(attr));
    }
    return DatasetSchema(doc.value("name", std::string("dataset")), std::move(attributes));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
}

DatasetSchema DatasetSchema::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("schema file not found: " + path.string());
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(readFile(path));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("schema file " + path.string() + " is not valid JSON: " + e.what());
  }
  return fromJson(doc);
}

nlohmann::json DatasetSchema::toJson() const {
  nlohmann::json attrs = nlohmann::json::array();
  for (const auto& attr : attributes_) {
    nlohmann::json entry = {{"name", attr.name}, {"kind", toString(attr.kind)}};
    if (attr.categorical()) {
      entry["values"] = attr.categories;
    } else {
      entry["range"] = {attr.lo, attr.hi};
    }
    attrs.push_back(std::move(entry));
  }
  return {{"name", name_}, {"attributes", std::move(attrs)}};
}

std::int64_t DatasetSchema::encode(std::size_t feature, std::string_view raw) const {
  const auto& attr = this->feature(feature);
  raw = trim(raw);
  if (attr.categorical()) {
    const auto it = std::find(attr.categories.begin(), attr.categories.end(), raw);
    if (it == attr.categories.end()) {
      throw DataError("attribute '" + attr.name + "': unknown category '" + std::string(raw) + "'");
    }
    return it - attr.categories.begin();
  }
  std::int64_t value = 0;
  const auto [end, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
  if (ec != std::errc() || end != raw.data() + raw.size()) {
    throw DataError("attribute '" + attr.name + "': '" + std::string(raw) + "' is not an integer");
  }
  if (value < attr.lo || value > attr.hi) {
    throw DataError("attribute '" + attr.name + "': value " + std::to_string(value) +
                    " outside declared range [" + std::to_string(attr.lo) + ", " +
                    std::to_string(attr.hi) + "]");
  }
  return value;
}

double DatasetSchema::normalize(std::size_t feature, double code) const {
  const auto& attr = this->feature(feature);
  const double lo = attr.lower();
  const double hi = attr.upper();
  if (hi == lo) {
    return 0.0;
  }
  return (code - lo) / (hi - lo);
}

double DatasetSchema::denormalize(std::size_t feature, double x) const {
  const auto& attr = this->feature(feature);
  return attr.lower() + x * (attr.upper() - attr.lower());
}

std::int64_t DatasetSchema::decode(std::size_t feature, double x) const {
  const auto& attr = this->feature(feature);
  const double raw = std::round(denormalize(feature, x));
  const double clamped = std::clamp(raw, attr.lower(), attr.upper());
  return static_cast<std::int64_t>(clamped);
}

std::string DatasetSchema::format(std::size_t feature, double x) const {
  const auto& attr = this->feature(feature);
  const std::int64_t code = decode(feature, x);
  if (attr.categorical()) {
    return attr.categories[static_cast<std::size_t>(code)];
  }
  return std::to_string(code);
}

double DatasetSchema::encodeLabel(std::string_view raw) const {
  const auto& attr = label();
  raw = trim(raw);
  if (attr.categorical()) {
    if (raw == attr.categories[0]) return 0.0;
    if (raw == attr.categories[1]) return 1.0;
    throw DataError("label '" + attr.name + "': unknown value '" + std::string(raw) + "'");
  }
  std::int64_t value = 0;
  const auto [end, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
  if (ec != std::errc() || end != raw.data() + raw.size() || (value != attr.lo && value != attr.hi)) {
    throw DataError("label '" + attr.name + "': invalid value '" + std::string(raw) + "'");
  }
  return value == attr.hi ? 1.0 : 0.0;
}

std::string DatasetSchema::formatLabel(double label) const {
  const auto& attr = this->label();
  const bool positive = label >= 0.5;
  if (attr.categorical()) {
    return attr.categories[positive ? 1 : 0];
  }
  return std::to_string(positive ? attr.hi : attr.lo);
}

}  // namespace fairsearch
