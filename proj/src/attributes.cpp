#include "hdeid/attributes.hpp"

#include <cctype>

#include "hdeid/errors.hpp"

namespace hdeid {

const std::array<std::string_view, AttributeDistribution::kCelebACount>& celeba_attribute_names() {
  static constexpr std::array<std::string_view, AttributeDistribution::kCelebACount> kNames = {
      "5_o_Clock_Shadow", "Arched_Eyebrows", "Attractive",       "Bags_Under_Eyes",     "Bald",
      "Bangs",            "Big_Lips",        "Big_Nose",         "Black_Hair",          "Blond_Hair",
      "Blurry",           "Brown_Hair",      "Bushy_Eyebrows",   "Chubby",              "Double_Chin",
      "Eyeglasses",       "Goatee",          "Gray_Hair",        "Heavy_Makeup",        "High_Cheekbones",
      "Male",             "Mouth_Slightly_Open", "Mustache",     "Narrow_Eyes",         "No_Beard",
      "Oval_Face",        "Pale_Skin",       "Pointy_Nose",      "Receding_Hairline",   "Rosy_Cheeks",
      "Sideburns",        "Smiling",         "Straight_Hair",    "Wavy_Hair",           "Wearing_Earrings",
      "Wearing_Hat",      "Wearing_Lipstick", "Wearing_Necklace", "Wearing_Necktie",    "Young"};
  return kNames;
}

namespace {

std::string normalize(std::string_view name) {
  std::string out;
  for (char ch : name) {
    if (ch == ' ' || ch == '-' || ch == '_') {
      out.push_back('_');
    } else {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  return out;
}

}  // namespace

std::size_t attribute_index(std::string_view name) {
  std::string key = normalize(name);
  if (key == "smile") key = "smiling";
  const auto& names = celeba_attribute_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (normalize(names[i]) == key) return i;
  }
  std::string valid;
  for (auto n : names) {
    if (!valid.empty()) valid += ", ";
    valid += n;
  }
  throw ConfigError("unknown attribute '" + std::string(name) + "'; valid names: " + valid);
}

AttributeDistribution set_attribute_targets(const AttributeDistribution& base,
                                            const std::map<std::string, double>& overrides) {
  if (overrides.empty()) return base;
  if (base.size() != AttributeDistribution::kCelebACount) {
    throw ShapeError("attribute targeting needs the 40-entry CelebA distribution");
  }
  std::vector<double> probs = base.values();
  for (const auto& [name, value] : overrides) {
    if (!(value > 0.0 && value < 1.0)) {
      throw ConfigError("target for '" + name + "' must lie in (0, 1), got " + std::to_string(value));
    }
    probs[attribute_index(name)] = value;
  }
  return AttributeDistribution(std::move(probs));
}

}  // namespace hdeid
