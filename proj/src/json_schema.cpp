#include "chatdit/json_schema.hpp"

#include <set>

namespace chatdit {
namespace {

bool has_type(const Json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "integer") return v.is_number_integer();
  if (type == "number") return v.is_number();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  return false;
}

std::optional<std::string> fail(const std::string& path, const std::string& message) {
  return (path.empty() ? std::string("/") : path) + ": " + message;
}

std::optional<std::string> check(const Json& v, const Json& schema, const std::string& path) {
  if (schema.is_boolean()) {
    return schema.get<bool>() ? std::nullopt : fail(path, "no value is allowed here");
  }
  if (!schema.is_object()) return std::nullopt;

  if (auto it = schema.find("type"); it != schema.end()) {
    bool ok = false;
    if (it->is_string()) {
      ok = has_type(v, it->get<std::string>());
    } else if (it->is_array()) {
      for (const auto& t : *it) ok = ok || has_type(v, t.get<std::string>());
    }
    if (!ok) return fail(path, "expected type " + it->dump() + ", got " + v.type_name());
  }
  if (auto it = schema.find("enum"); it != schema.end()) {
    bool found = false;
    for (const auto& option : *it) found = found || option == v;
    if (!found) return fail(path, "value " + v.dump() + " is not one of " + it->dump());
  }
  if (auto it = schema.find("const"); it != schema.end() && *it != v) {
    return fail(path, "value must equal " + it->dump());
  }

  if (v.is_number()) {
    const double x = v.get<double>();
    if (auto it = schema.find("minimum"); it != schema.end() && x < it->get<double>()) {
      return fail(path, "value " + v.dump() + " is below minimum " + it->dump());
    }
    if (auto it = schema.find("maximum"); it != schema.end() && x > it->get<double>()) {
      return fail(path, "value " + v.dump() + " is above maximum " + it->dump());
    }
  }
  if (v.is_string()) {
    // Length in code points.
    std::size_t length = 0;
    for (unsigned char c : v.get_ref<const std::string&>()) length += (c & 0xC0) != 0x80;
    if (auto it = schema.find("minLength"); it != schema.end() && length < it->get<std::size_t>()) {
      return fail(path, "string shorter than " + it->dump());
    }
    if (auto it = schema.find("maxLength"); it != schema.end() && length > it->get<std::size_t>()) {
      return fail(path, "string longer than " + it->dump());
    }
  }
  if (v.is_array()) {
    if (auto it = schema.find("minItems"); it != schema.end() && v.size() < it->get<std::size_t>()) {
      return fail(path, "expected at least " + it->dump() + " items, got " + std::to_string(v.size()));
    }
    if (auto it = schema.find("maxItems"); it != schema.end() && v.size() > it->get<std::size_t>()) {
      return fail(path, "expected at most " + it->dump() + " items, got " + std::to_string(v.size()));
    }
    if (auto it = schema.find("uniqueItems"); it != schema.end() && it->get<bool>()) {
      std::set<std::string> seen;
      for (const auto& item : v) {
        if (!seen.insert(item.dump()).second) return fail(path, "duplicate item " + item.dump());
      }
    }
    if (auto it = schema.find("items"); it != schema.end()) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (auto e = check(v[i], *it, path + "/" + std::to_string(i))) return e;
      }
    }
  }
  if (v.is_object()) {
    if (auto it = schema.find("required"); it != schema.end()) {
      for (const auto& key : *it) {
        if (!v.contains(key.get<std::string>())) {
          return fail(path, "missing required property " + key.dump());
        }
      }
    }
    const auto props = schema.find("properties");
    for (const auto& [key, value] : v.items()) {
      if (props != schema.end() && props->contains(key)) {
        if (auto e = check(value, (*props)[key], path + "/" + key)) return e;
      } else if (auto ap = schema.find("additionalProperties"); ap != schema.end()) {
        if (ap->is_boolean() && !ap->get<bool>()) {
          return fail(path, "unexpected property \"" + key + "\"");
        }
        if (ap->is_object()) {
          if (auto e = check(value, *ap, path + "/" + key)) return e;
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> validate_json(const Json& value, const Json& schema) {
  return check(value, schema, "");
}

}  // namespace chatdit
