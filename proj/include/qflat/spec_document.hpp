#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qflat/core.hpp"
#include "qflat/field.hpp"

namespace qflat {

/// Schema violation in a metric/density document; `pointer` is the JSON
/// pointer of the offending value.
class SchemaError : public InputError {
 public:
  SchemaError(const std::string& pointer, const std::string& what)
      : InputError(pointer + ": " + what), pointer_(pointer) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

/// Metric/density document:
///   {"n": int, "kind": "builtin"|"expression"|"radial-table",
///    "name"?: string, "params"?: object, "u"?: string, "nodes"?: [[r, value]]}
struct MetricSpec {
  int n = 2;
  std::string kind;
  std::string name;              // builtin
  nlohmann::json params = nlohmann::json::object();
  std::string u;                 // expression
  std::vector<std::pair<double, double>> nodes;  // radial-table
  std::optional<bool> complete;  // optional "complete" hint

  nlohmann::json to_json() const;
};

MetricSpec parse_metric_spec(const nlohmann::json& doc);

/// Builds the field for "expression" and "radial-table" documents.
ScalarField field_from_spec(const MetricSpec& spec);

}  // namespace qflat
