#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "gplccm/gp_lccm.hpp"
#include "gplccm/rng.hpp"

namespace gplccm::interpret {

// Local surrogate explanation of one class-membership prediction: a weighted
// linear fit to the model's class probability over perturbations of the
// instance. All feature vectors live in the model's (standardized) space.
struct Explanation {
  Eigen::VectorXd instance;
  int target_class = 0;
  Eigen::VectorXd weights;
  double intercept = 0.0;
  double instance_probability = 0.0;
  double fidelity = 0.0;  // weighted R^2 of the surrogate on the perturbation set
  bool ridge_fallback = false;
};

struct ExplainOptions {
  int n_samples = 5000;
  double width = 0.0;  // proximity kernel width; 0 = 0.75 * sqrt(feature count)
  std::uint64_t seed = 0;
};

// Perturbation set: the instance itself first, then rows whose every entry is
// drawn independently from that feature's empirical column.
Eigen::MatrixXd perturb(const Eigen::MatrixXd& dataset, const Eigen::VectorXd& instance,
                        int n_samples, Rng& rng);

// exp(-d^2 / width^2) in Euclidean distance from the instance.
Eigen::VectorXd proximity_weights(const Eigen::MatrixXd& perturbed,
                                  const Eigen::VectorXd& instance, double width);

using BlackBox = std::function<double(const Eigen::VectorXd&)>;

// Core surrogate fit against an arbitrary probability function.
Explanation explain_function(const BlackBox& black_box, const Eigen::MatrixXd& dataset,
                             const Eigen::VectorXd& instance, const ExplainOptions& options);

// Explains the fitted model's probability of target_class at the instance.
Explanation explain_instance(const gpl::FittedGpLccm& fit, const Eigen::MatrixXd& dataset,
                             const Eigen::VectorXd& instance, int target_class,
                             const ExplainOptions& options);

}  // namespace gplccm::interpret
