#include "damagekit/labels.hpp"

#include <algorithm>
#include <cctype>

#include "damagekit/error.hpp"

namespace damagekit {

std::string_view to_string(ClassLabel label) {
  return label == ClassLabel::Damage ? "damage" : "dirt";
}

std::optional<ClassLabel> try_parse_class_label(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "damage") return ClassLabel::Damage;
  if (lower == "dirt") return ClassLabel::Dirt;
  return std::nullopt;
}

ClassLabel parse_class_label(std::string_view text) {
  if (auto label = try_parse_class_label(text)) return *label;
  throw Error(ErrorKind::UnknownClass,
              "unknown class '" + std::string(text) + "' (accepted: damage, dirt)");
}

Instance make_ground_truth(ClassLabel label, BinaryMask mask) {
  if (!mask.any()) throw Error(ErrorKind::InvalidRegion, "instance mask is empty");
  return Instance{label, std::move(mask), std::nullopt};
}

Instance make_prediction(ClassLabel label, BinaryMask mask, double confidence) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw Error(ErrorKind::OutOfRange, "confidence must lie in [0, 1]");
  }
  if (!mask.any()) throw Error(ErrorKind::InvalidRegion, "instance mask is empty");
  return Instance{label, std::move(mask), confidence};
}

}  // namespace damagekit
