#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gplccm/data_model.hpp"
#include "gplccm/mnl.hpp"

namespace gplccm {

// How raw alternative attributes become utility design rows. Either a generic
// linear-in-attributes layout (shared coefficient per attribute column plus
// optional alternative-specific constants), or the count-frequency expansion.
struct UtilitySpec {
  std::vector<std::string> generic_attributes;
  std::vector<long> constant_alternatives;  // alt ids that receive a constant
  std::optional<CountUtilitySpec> count;

  struct Bound {
    std::string label;
    double lower;
    double upper;
  };
  std::vector<Bound> bounds;
  std::vector<std::string> fixed;  // labels pinned at zero
};

struct BuiltDesign {
  mnl::ChoiceDesign design;
  mnl::ChoiceParams init;  // zeros with the spec's bounds and pins applied
};

// For the count layout, alternative ids must be the 1-based lexicographic
// index of the trip-allocation tuple.
BuiltDesign build_choice_design(const ChoicePanel& panel, const UtilitySpec& spec);

}  // namespace gplccm
