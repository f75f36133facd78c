#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "damagekit/image.hpp"

namespace damagekit {

// { "rle": [counts...], "width": w, "height": h }
nlohmann::json mask_to_json(const BinaryMask& mask);
BinaryMask mask_from_json(const nlohmann::json& node, std::string_view where);

// Typed field access that reports the JSON pointer of the offending key.
const nlohmann::json& require_field(const nlohmann::json& node, const std::string& key,
                                    std::string_view where);
int require_int(const nlohmann::json& node, const std::string& key, std::string_view where);
double require_number(const nlohmann::json& node, const std::string& key, std::string_view where);
std::string require_string(const nlohmann::json& node, const std::string& key, std::string_view where);

// Parses text, converting syntax errors to Error(Parse) with the byte offset.
nlohmann::json parse_json(std::string_view text, std::string_view what);

}  // namespace damagekit
