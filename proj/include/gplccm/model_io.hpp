#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gplccm/data_model.hpp"
#include "gplccm/design.hpp"
#include "gplccm/gp_lccm.hpp"
#include "gplccm/lccm_baseline.hpp"
#include "gplccm/mnl.hpp"

namespace gplccm::io {

// On-disk model: everything needed to predict, explain and audit a fit.
// Serialized as versioned JSON; numeric fields survive a save/load/save
// round trip bit for bit. GP classifier states are not stored; they are
// rebuilt exactly from the stored features, labels and kernel expressions.
struct ModelArtifact {
  std::string kind;  // "mnl", "lccm" or "gp-lccm"
  std::uint64_t seed = 0;
  int n_classes = 0;

  UtilitySpec utility;  // recipe to rebuild design rows on new data
  std::vector<std::string> utility_labels;
  std::vector<mnl::ChoiceParams> choice;
  std::vector<Eigen::VectorXd> se;       // per class; empty when unavailable
  std::vector<Eigen::VectorXd> p_value;  // per class; empty when unavailable

  Eigen::MatrixXd membership_gamma;  // lccm only

  std::vector<std::string> kernels;      // gp only, one expression per classifier
  Eigen::MatrixXd train_features;        // gp only, standardized
  std::vector<std::vector<int>> train_labels;  // gp only, per classifier

  std::vector<std::string> feature_names;
  std::optional<Standardization> standardization;

  Eigen::MatrixXd responsibilities;
  std::vector<double> trace_marginal;
  std::vector<double> trace_complete;
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> warnings;
};

void save_model(const std::string& path, const ModelArtifact& artifact);
ModelArtifact load_model(const std::string& path);

ModelArtifact from_gp_lccm(const gpl::FittedGpLccm& fit, const Eigen::MatrixXd& s);
ModelArtifact from_lccm(const lccm::FittedLccm& fit);
ModelArtifact from_mnl(const mnl::ChoiceParams& params, double loglik);

// Rebuilds the fitted model (including classifier states) from an artifact.
gpl::FittedGpLccm to_gp_lccm(const ModelArtifact& artifact);
lccm::FittedLccm to_lccm(const ModelArtifact& artifact);

}  // namespace gplccm::io
