#include "damagekit/json_codec.hpp"

#include "damagekit/error.hpp"
#include "damagekit/rle.hpp"

namespace damagekit {

using nlohmann::json;

namespace {

std::string at_key(std::string_view where, const std::string& key) {
  return std::string(where) + "/" + key;
}

}  // namespace

json mask_to_json(const BinaryMask& mask) {
  return json{{"rle", rle_encode(mask).counts}, {"width", mask.width()}, {"height", mask.height()}};
}

BinaryMask mask_from_json(const json& node, std::string_view where) {
  if (!node.is_object()) throw Error(ErrorKind::Parse, std::string(where) + ": expected mask object");
  const int width = require_int(node, "width", where);
  const int height = require_int(node, "height", where);
  const json& rle = require_field(node, "rle", where);
  if (!rle.is_array()) throw Error(ErrorKind::Parse, at_key(where, "rle") + ": expected array");
  RunLengths runs;
  runs.counts.reserve(rle.size());
  for (const auto& c : rle) {
    if (!c.is_number_unsigned() && !(c.is_number_integer() && c.get<long long>() >= 0)) {
      throw Error(ErrorKind::CorruptRle, at_key(where, "rle") + ": counts must be non-negative integers");
    }
    runs.counts.push_back(c.get<std::uint64_t>());
  }
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::Parse, std::string(where) + ": mask dimensions must be positive");
  }
  try {
    return rle_decode(runs, width, height);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(where) + ": " + e.what());
  }
}

const json& require_field(const json& node, const std::string& key, std::string_view where) {
  if (!node.is_object() || !node.contains(key)) {
    throw Error(ErrorKind::Parse, at_key(where, key) + ": missing required key");
  }
  return node.at(key);
}

int require_int(const json& node, const std::string& key, std::string_view where) {
  const json& v = require_field(node, key, where);
  if (!v.is_number_integer()) throw Error(ErrorKind::Parse, at_key(where, key) + ": expected integer");
  return v.get<int>();
}

double require_number(const json& node, const std::string& key, std::string_view where) {
  const json& v = require_field(node, key, where);
  if (!v.is_number()) throw Error(ErrorKind::Parse, at_key(where, key) + ": expected number");
  return v.get<double>();
}

std::string require_string(const json& node, const std::string& key, std::string_view where) {
  const json& v = require_field(node, key, where);
  if (!v.is_string()) throw Error(ErrorKind::Parse, at_key(where, key) + ": expected string");
  return v.get<std::string>();
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string(what) + ": malformed JSON at byte " +
                                      std::to_string(e.byte) + ": " + e.what());
  }
}

}  // namespace damagekit
