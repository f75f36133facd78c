#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "damagekit/image.hpp"

namespace damagekit {

// Anything without a label is background.
enum class ClassLabel { Damage, Dirt };

std::string_view to_string(ClassLabel label);
// Case-insensitive "damage" / "dirt"; throws UnknownClass otherwise.
ClassLabel parse_class_label(std::string_view text);
std::optional<ClassLabel> try_parse_class_label(std::string_view text);

// Ground truth when `confidence` is empty, prediction otherwise.
struct Instance {
  ClassLabel label = ClassLabel::Damage;
  BinaryMask mask;
  std::optional<double> confidence;

  bool is_prediction() const { return confidence.has_value(); }

  friend bool operator==(const Instance&, const Instance&) = default;
};

Instance make_ground_truth(ClassLabel label, BinaryMask mask);
Instance make_prediction(ClassLabel label, BinaryMask mask, double confidence);

}  // namespace damagekit
