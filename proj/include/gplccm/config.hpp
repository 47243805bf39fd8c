#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gplccm/design.hpp"
#include "gplccm/evaluation.hpp"
#include "gplccm/simulate.hpp"

namespace gplccm {

// One estimation run, as described by the JSON config file (see README for
// the schema). Command-line flags override individual fields after parsing.
struct RunConfig {
  std::string choices_path;
  std::string persons_path;

  std::string model = "gp-lccm";  // "mnl", "lccm" or "gp-lccm"
  int n_classes = 2;
  std::string kernel = "matern(nu=2.5, variance=1.0, lengthscale=1.0)";
  std::uint64_t seed = 1;
  int restarts = 5;
  int max_iterations = 500;
  double tolerance = 1e-4;
  int folds = 5;
  int threads = 1;

  // Membership features: which person columns enter, which get standardized.
  std::vector<std::string> membership_features;  // empty = all person columns
  std::optional<std::vector<std::string>> standardize;  // absent = all membership features

  UtilitySpec utility;

  // Hyperparameter fit effort.
  int hyper_restarts = 2;
  int hyper_iterations = 40;
  int refit_iterations = 6;

  // explain subcommand.
  std::vector<long> explain_persons;
  int explain_samples = 5000;
  double explain_width = 0.0;

  std::optional<sim::SimulateConfig> simulate;
};

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);

// Assembled estimation inputs shared by the estimate/crossval front ends.
struct PreparedData {
  ChoicePanel panel;
  PersonFeatures raw_features;       // aligned to the panel, unstandardized
  PersonFeatures features;           // standardized membership features
  std::vector<std::string> standardized_columns;
  BuiltDesign built;
};

PreparedData prepare_data(const RunConfig& config);

// Options derived from the config.
lccm::LccmOptions lccm_options(const RunConfig& config);
gpl::GpLccmOptions gp_options(const RunConfig& config);

}  // namespace gplccm
