#pragma once

// A validator for the subset of JSON Schema used by the published schemas:
// type, const, enum, properties, required, additionalProperties, items,
// minItems, maxItems, minimum, maximum, anyOf and local "#/$defs/..." refs.

#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

namespace benim {

using json = nlohmann::json;

class SchemaValidator {
 public:
  explicit SchemaValidator(json schema) : root_(std::move(schema)) {}

  /// Returns every violation as "path: message"; empty when valid.
  std::vector<std::string> errors(const json& doc) const {
    std::vector<std::string> out;
    check(root_, doc, "$", out);
    return out;
  }

  void validate(const json& doc) const {
    auto errs = errors(doc);
    if (!errs.empty()) throw std::invalid_argument(errs.front());
  }

 private:
  json root_;

  const json& resolve(const json& s) const {
    if (!s.is_object() || !s.contains("$ref")) return s;
    const std::string ref = s.at("$ref").get<std::string>();
    const std::string prefix = "#/$defs/";
    if (ref.rfind(prefix, 0) != 0) throw std::invalid_argument("unsupported $ref " + ref);
    return resolve(root_.at("$defs").at(ref.substr(prefix.size())));
  }

  static bool has_type(const json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    if (t == "integer") return v.is_number_integer();
    if (t == "number") return v.is_number();
    throw std::invalid_argument("unsupported schema type " + t);
  }

  void check(const json& schema_in, const json& v, const std::string& path,
             std::vector<std::string>& out) const {
    const json& s = resolve(schema_in);
    if (s.is_boolean()) {
      if (!s.get<bool>()) out.push_back(path + ": not allowed");
      return;
    }
    if (auto it = s.find("type"); it != s.end()) {
      bool ok = false;
      if (it->is_array()) {
        for (const auto& t : *it) ok = ok || has_type(v, t.get<std::string>());
      } else {
        ok = has_type(v, it->get<std::string>());
      }
      if (!ok) {
        out.push_back(path + ": expected type " + it->dump());
        return;
      }
    }
    if (auto it = s.find("const"); it != s.end() && *it != v)
      out.push_back(path + ": expected " + it->dump());
    if (auto it = s.find("enum"); it != s.end()) {
      bool found = false;
      for (const auto& e : *it) found = found || e == v;
      if (!found) out.push_back(path + ": value " + v.dump() + " not in " + it->dump());
    }
    if (v.is_number()) {
      const double x = v.get<double>();
      if (auto it = s.find("minimum"); it != s.end() && x < it->get<double>())
        out.push_back(path + ": below minimum " + it->dump());
      if (auto it = s.find("maximum"); it != s.end() && x > it->get<double>())
        out.push_back(path + ": above maximum " + it->dump());
    }
    if (auto it = s.find("anyOf"); it != s.end()) {
      bool any = false;
      for (const auto& alt : *it) {
        std::vector<std::string> sub;
        check(alt, v, path, sub);
        any = any || sub.empty();
      }
      if (!any) out.push_back(path + ": matches no alternative");
    }
    if (v.is_object()) {
      const json* props = s.contains("properties") ? &s.at("properties") : nullptr;
      if (auto it = s.find("required"); it != s.end())
        for (const auto& k : *it)
          if (!v.contains(k.get<std::string>()))
            out.push_back(path + ": missing field '" + k.get<std::string>() + "'");
      for (const auto& [k, child] : v.items()) {
        const std::string cp = path + "." + k;
        if (props && props->contains(k)) {
          check(props->at(k), child, cp, out);
        } else if (auto ap = s.find("additionalProperties"); ap != s.end()) {
          if (ap->is_boolean()) {
            if (!ap->get<bool>()) out.push_back(path + ": unknown field '" + k + "'");
          } else {
            check(*ap, child, cp, out);
          }
        }
      }
    }
    if (v.is_array()) {
      if (auto it = s.find("minItems"); it != s.end() && v.size() < it->get<std::size_t>())
        out.push_back(path + ": fewer than " + it->dump() + " items");
      if (auto it = s.find("maxItems"); it != s.end() && v.size() > it->get<std::size_t>())
        out.push_back(path + ": more than " + it->dump() + " items");
      if (auto it = s.find("items"); it != s.end())
        for (std::size_t i = 0; i < v.size(); ++i)
          check(*it, v[i], path + "[" + std::to_string(i) + "]", out);
    }
  }
};

}  // namespace benim
