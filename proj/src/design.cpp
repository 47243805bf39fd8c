#include "gplccm/design.hpp"

#include <algorithm>
#include <sstream>

#include "gplccm/errors.hpp"

namespace gplccm {

namespace {

int attribute_index(const ChoicePanel& panel, const std::string& name) {
  auto it = std::find(panel.attribute_names.begin(), panel.attribute_names.end(), name);
  if (it == panel.attribute_names.end()) {
    throw SchemaError("utility specification refers to unknown attribute column '" + name + "'");
  }
  return static_cast<int>(it - panel.attribute_names.begin());
}

}  // namespace

BuiltDesign build_choice_design(const ChoicePanel& panel, const UtilitySpec& spec) {
  BuiltDesign out;

  if (spec.count) {
    const CountUtilitySpec& cs = *spec.count;
    if (cs.modes.empty()) throw ConfigError("count utility specification has no modes");
    {
      std::vector<std::string> used;
      for (const auto& m : cs.modes) {
        for (const auto& a : m.attributes) {
          if (std::find(used.begin(), used.end(), a) != used.end()) {
            throw ConfigError("attribute column '" + a + "' is assigned to two modes");
          }
          used.push_back(a);
        }
      }
    }
    CountChoiceSet choice_set =
        enumerate_count_alternatives(static_cast<int>(cs.modes.size()), cs.total_trips);
    std::vector<std::vector<int>> mode_attr_cols(cs.modes.size());
    for (std::size_t m = 0; m < cs.modes.size(); ++m) {
      for (const auto& a : cs.modes[m].attributes) {
        mode_attr_cols[m].push_back(attribute_index(panel, a));
      }
    }
    out.design.column_labels = cs.column_labels();
    for (const auto& person : panel.persons) {
      mnl::PersonDesign pd;
      for (const auto& scenario : person.scenarios) {
        mnl::ScenarioDesign sd;
        const int j = static_cast<int>(scenario.alternative_ids.size());
        sd.design.resize(j, cs.dimension());
        sd.available = scenario.available;
        sd.chosen = scenario.chosen;
        for (int i = 0; i < j; ++i) {
          long alt = scenario.alternative_ids[static_cast<std::size_t>(i)];
          if (alt < 1 || alt > choice_set.alternative_count()) {
            std::ostringstream os;
            os << "person " << person.person_id << ", scenario " << scenario.scenario_id
               << ": alternative id " << alt << " is outside the enumerated range 1.."
               << choice_set.alternative_count();
            throw DataError(os.str());
          }
          const std::vector<int>& tuple = choice_set.tuples[static_cast<std::size_t>(alt - 1)];
          std::vector<Eigen::VectorXd> values(cs.modes.size());
          for (std::size_t m = 0; m < cs.modes.size(); ++m) {
            Eigen::VectorXd v(static_cast<Eigen::Index>(mode_attr_cols[m].size()));
            for (std::size_t k = 0; k < mode_attr_cols[m].size(); ++k) {
              v[static_cast<Eigen::Index>(k)] = scenario.attributes(i, mode_attr_cols[m][k]);
            }
            values[m] = std::move(v);
          }
          sd.design.row(i) = build_count_design_row(cs, tuple, values).transpose();
        }
        pd.scenarios.push_back(std::move(sd));
      }
      out.design.persons.push_back(std::move(pd));
    }
  } else {
    if (spec.generic_attributes.empty() && spec.constant_alternatives.empty()) {
      throw ConfigError("utility specification has no attributes and no constants");
    }
    std::vector<int> attr_cols;
    for (const auto& a : spec.generic_attributes) {
      attr_cols.push_back(attribute_index(panel, a));
      out.design.column_labels.push_back(a);
    }
    for (long alt : spec.constant_alternatives) {
      out.design.column_labels.push_back("asc_" + std::to_string(alt));
    }
    const int n_attr = static_cast<int>(attr_cols.size());
    const int dim = n_attr + static_cast<int>(spec.constant_alternatives.size());
    for (const auto& person : panel.persons) {
      mnl::PersonDesign pd;
      for (const auto& scenario : person.scenarios) {
        mnl::ScenarioDesign sd;
        const int j = static_cast<int>(scenario.alternative_ids.size());
        sd.design = Eigen::MatrixXd::Zero(j, dim);
        sd.available = scenario.available;
        sd.chosen = scenario.chosen;
        for (int i = 0; i < j; ++i) {
          for (int k = 0; k < n_attr; ++k) {
            sd.design(i, k) = scenario.attributes(i, attr_cols[static_cast<std::size_t>(k)]);
          }
          for (std::size_t k = 0; k < spec.constant_alternatives.size(); ++k) {
            if (scenario.alternative_ids[static_cast<std::size_t>(i)] ==
                spec.constant_alternatives[k]) {
              sd.design(i, n_attr + static_cast<int>(k)) = 1.0;
            }
          }
        }
        pd.scenarios.push_back(std::move(sd));
      }
      out.design.persons.push_back(std::move(pd));
    }
  }

  out.init = mnl::ChoiceParams::zeros(out.design.dimension());
  auto label_index = [&](const std::string& label) {
    for (std::size_t i = 0; i < out.design.column_labels.size(); ++i) {
      if (out.design.column_labels[i] == label) return static_cast<Eigen::Index>(i);
    }
    throw ConfigError("constraint refers to unknown utility coefficient '" + label + "'");
  };
  for (const auto& b : spec.bounds) {
    Eigen::Index i = label_index(b.label);
    if (!(b.lower <= b.upper)) {
      throw ConfigError("bound for '" + b.label + "' has lower > upper");
    }
    out.init.lower[i] = b.lower;
    out.init.upper[i] = b.upper;
  }
  for (const auto& label : spec.fixed) {
    out.init.fixed[static_cast<std::size_t>(label_index(label))] = 1;
  }
  return out;
}

}  // namespace gplccm
