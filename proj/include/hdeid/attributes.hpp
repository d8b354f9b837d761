#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>

#include "hdeid/providers.hpp"

namespace hdeid {

// The 40 CelebA attribute names in annotation-file order.
const std::array<std::string_view, AttributeDistribution::kCelebACount>& celeba_attribute_names();

// Index of an attribute. Matching ignores case and treats spaces, dashes and
// underscores alike; "Smile" is accepted for "Smiling". Throws ConfigError
// listing the valid names otherwise.
std::size_t attribute_index(std::string_view name);

/// Copy of `base` with the named entries replaced. Override values must lie
/// strictly inside (0, 1).
AttributeDistribution set_attribute_targets(const AttributeDistribution& base,
                                            const std::map<std::string, double>& overrides);

}  // namespace hdeid
