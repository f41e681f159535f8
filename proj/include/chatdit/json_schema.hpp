#pragma once

// A small JSON Schema validator covering the keywords the agent contracts
// use: type, enum, const, properties, required, additionalProperties, items,
// minItems, maxItems, uniqueItems, minimum, maximum, minLength, maxLength.
// Other keywords are ignored.

#include <optional>
#include <string>

#include "chatdit/model.hpp"

namespace chatdit {

/// Returns the first violation as "<json-pointer>: <message>", or nullopt.
std::optional<std::string> validate_json(const Json& value, const Json& schema);

}  // namespace chatdit
