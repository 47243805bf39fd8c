#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace gplccm {

// One choice scenario: the set of alternatives a person faced once, with the
// attribute rows aligned to alternative_ids, an availability mask, and the
// index of the chosen alternative.
struct ScenarioData {
  long scenario_id = 0;
  std::vector<long> alternative_ids;
  Eigen::MatrixXd attributes;  // n_alternatives x n_attributes
  std::vector<char> available;
  int chosen = -1;
};

struct PersonData {
  long person_id = 0;
  std::vector<ScenarioData> scenarios;
};

struct ChoicePanel {
  std::vector<PersonData> persons;
  std::vector<std::string> attribute_names;

  int person_count() const { return static_cast<int>(persons.size()); }
  int scenario_count() const;
  int person_index(long person_id) const;  // -1 when absent
};

struct PanelSchema {
  std::string person_column = "person_id";
  std::string scenario_column = "scenario_id";
  std::string alternative_column = "alt_id";
  std::string availability_column = "available";  // missing column = all available
  std::string chosen_column = "chosen";
  std::vector<std::string> attribute_columns;  // empty = every remaining column
  char delimiter = ',';
};

// Long-format loader: one row per (person, scenario, alternative), grouped by
// first appearance. Exactly one chosen, available alternative per scenario.
ChoicePanel load_panel(const std::string& path, const PanelSchema& schema = {});
ChoicePanel load_panel_text(const std::string& text, const PanelSchema& schema = {});

// Columnwise affine transform fitted on training data and replayed verbatim
// on held-out rows.
struct Standardization {
  std::vector<std::string> columns;
  Eigen::VectorXd mean;
  Eigen::VectorXd std_dev;  // population standard deviation
};

struct PersonFeatures {
  std::vector<long> person_ids;
  std::vector<std::string> feature_names;
  Eigen::MatrixXd matrix;  // n_persons x n_features
  std::optional<Standardization> standardization;

  int person_count() const { return static_cast<int>(matrix.rows()); }
  int feature_count() const { return static_cast<int>(matrix.cols()); }
  int column_index(const std::string& name) const;
};

struct FeatureSchema {
  std::string person_column = "person_id";
  std::vector<std::string> feature_columns;  // empty = every remaining column
  char delimiter = ',';
};

PersonFeatures load_person_features(const std::string& path, const FeatureSchema& schema = {});
PersonFeatures load_person_features_text(const std::string& text, const FeatureSchema& schema = {});

// Reorders feature rows to match the panel's person order; every panel person
// must be present.
PersonFeatures align_to_panel(const PersonFeatures& features, const ChoicePanel& panel);

// Centers and scales the named columns to zero mean and unit population
// variance, recording the transform. A zero-variance column is an error.
PersonFeatures standardize_features(const PersonFeatures& features,
                                    const std::vector<std::string>& columns);

// Replays a previously fitted transform (for held-out data).
PersonFeatures apply_standardization(const PersonFeatures& features, const Standardization& t);

// Replaces an integer-coded column by indicator columns named
// "<column>_eq_<level>", one per distinct level except base_level.
PersonFeatures expand_categorical(const PersonFeatures& features, const std::string& column,
                                  long base_level);

// The alternatives of a count-frequency choice set: all ways to allocate
// total_trips trips over n_modes modes, in lexicographic order.
struct CountChoiceSet {
  int n_modes = 0;
  int total_trips = 0;
  std::vector<std::vector<int>> tuples;

  int alternative_count() const { return static_cast<int>(tuples.size()); }
};

CountChoiceSet enumerate_count_alternatives(int n_modes, int total_trips);

// Utility layout for count-frequency alternatives: one constant per
// (mode, count) pair except those pinned to zero for identification, plus one
// coefficient per mode-specific attribute. The coefficient on an attribute
// multiplies (attribute value) * (times that mode is used in the tuple).
struct CountUtilitySpec {
  struct Mode {
    std::string name;
    std::vector<std::string> attributes;  // attribute column names in the panel
  };

  std::vector<Mode> modes;
  int total_trips = 0;
  std::vector<std::pair<int, int>> fixed_constants;  // (mode index, count) pinned to zero

  bool constant_fixed(int mode, int count) const;
  int free_constant_count() const;
  int attribute_count() const;
  int dimension() const { return free_constant_count() + attribute_count(); }

  // Column index of a constant in the design vector, -1 when pinned.
  int constant_column(int mode, int count) const;
  // Column index of the j-th attribute of a mode.
  int attribute_column(int mode, int attribute) const;

  std::vector<std::string> column_labels() const;
};

// Design row of one alternative (trip allocation tuple); attribute_values
// holds, per mode, the values of that mode's attributes for this scenario.
Eigen::VectorXd build_count_design_row(const CountUtilitySpec& spec,
                                       const std::vector<int>& tuple,
                                       const std::vector<Eigen::VectorXd>& attribute_values);

}  // namespace gplccm
