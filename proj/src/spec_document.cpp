#include "qflat/spec_document.hpp"

#include <cmath>

namespace qflat {

using nlohmann::json;

nlohmann::json MetricSpec::to_json() const {
  json j;
  j["n"] = n;
  j["kind"] = kind;
  if (kind == "builtin") {
    j["name"] = name;
    j["params"] = params;
  } else if (kind == "expression") {
    j["u"] = u;
  } else {
    json arr = json::array();
    for (const auto& [r, v] : nodes) arr.push_back({r, v});
    j["nodes"] = arr;
  }
  if (complete) j["complete"] = *complete;
  return j;
}

MetricSpec parse_metric_spec(const json& doc) {
  if (!doc.is_object()) throw SchemaError("", "document must be a JSON object");
  static const char* kKnown[] = {"n", "kind", "name", "params", "u", "nodes", "complete"};
  for (const auto& [key, _] : doc.items()) {
    bool known = false;
    for (const char* k : kKnown) known = known || key == k;
    if (!known) throw SchemaError("/" + key, "unknown field");
  }
  MetricSpec spec;
  if (!doc.contains("n")) throw SchemaError("/n", "required field missing");
  if (!doc["n"].is_number_integer()) throw SchemaError("/n", "must be an integer");
  spec.n = doc["n"].get<int>();
  if (spec.n < 2 || spec.n % 2 != 0) throw SchemaError("/n", "must be an even integer >= 2");

  if (!doc.contains("kind")) throw SchemaError("/kind", "required field missing");
  if (!doc["kind"].is_string()) throw SchemaError("/kind", "must be a string");
  spec.kind = doc["kind"].get<std::string>();
  if (doc.contains("complete")) {
    if (!doc["complete"].is_boolean()) throw SchemaError("/complete", "must be a boolean");
    spec.complete = doc["complete"].get<bool>();
  }

  if (spec.kind == "builtin") {
    if (!doc.contains("name")) throw SchemaError("/name", "required for builtin metrics");
    if (!doc["name"].is_string()) throw SchemaError("/name", "must be a string");
    spec.name = doc["name"].get<std::string>();
    if (doc.contains("params")) {
      if (!doc["params"].is_object()) throw SchemaError("/params", "must be an object");
      for (const auto& [key, value] : doc["params"].items()) {
        if (!value.is_number()) throw SchemaError("/params/" + key, "must be a number");
      }
      spec.params = doc["params"];
    }
  } else if (spec.kind == "expression") {
    if (!doc.contains("u")) throw SchemaError("/u", "required for expression metrics");
    if (!doc["u"].is_string()) throw SchemaError("/u", "must be a string");
    spec.u = doc["u"].get<std::string>();
    try {
      Expression::parse(spec.u, Dimension(spec.n));
    } catch (const ParseError& e) {
      throw SchemaError("/u", e.what());
    }
  } else if (spec.kind == "radial-table") {
    if (!doc.contains("nodes")) throw SchemaError("/nodes", "required for radial-table metrics");
    const auto& nodes = doc["nodes"];
    if (!nodes.is_array() || nodes.size() < 2) throw SchemaError("/nodes", "must be an array of at least two [r, value] pairs");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const std::string ptr = "/nodes/" + std::to_string(i);
      const auto& node = nodes[i];
      if (!node.is_array() || node.size() != 2 || !node[0].is_number() || !node[1].is_number()) {
        throw SchemaError(ptr, "must be a [r, value] pair of numbers");
      }
      const double r = node[0].get<double>();
      const double v = node[1].get<double>();
      if (!std::isfinite(r) || r < 0.0) throw SchemaError(ptr + "/0", "radius must be finite and >= 0");
      if (!std::isfinite(v)) throw SchemaError(ptr + "/1", "value must be finite");
      if (i > 0 && !(r > spec.nodes.back().first)) throw SchemaError(ptr + "/0", "radii must be strictly increasing");
      spec.nodes.emplace_back(r, v);
    }
  } else {
    throw SchemaError("/kind", "must be one of builtin, expression, radial-table");
  }
  return spec;
}

ScalarField field_from_spec(const MetricSpec& spec) {
  const Dimension dim(spec.n);
  if (spec.kind == "expression") return ScalarField::from_expression(Expression::parse(spec.u, dim));
  if (spec.kind == "radial-table") {
    std::vector<double> r, v;
    for (const auto& [rr, vv] : spec.nodes) {
      r.push_back(rr);
      v.push_back(vv);
    }
    TableProfile table(std::move(r), std::move(v));
    return ScalarField::radial(dim, [table](double rr) { return table(rr); });
  }
  throw InputError("field_from_spec handles expression and radial-table documents only");
}

}  // namespace qflat
