#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "gplccm/kernels.hpp"
#include "gplccm/numerics.hpp"
#include "gplccm/optim.hpp"
#include "gplccm/rng.hpp"

namespace gplccm::gp {

using gplccm::sigmoid;

// Laplace approximation of a binary GP classifier with a logistic link,
// fitted by damped Newton iteration on the latent posterior. chol_b holds the
// lower factor of I + W^1/2 C W^1/2 evaluated at the mode, which is all the
// prediction equations need besides the gradient vector.
struct LaplaceState {
  Eigen::MatrixXd inputs;          // training rows (set by laplace_fit)
  std::vector<int> labels;         // 0/1 targets
  Eigen::VectorXd mode;            // latent posterior mode
  Eigen::VectorXd grad;            // labels - sigmoid(mode)
  Eigen::VectorXd w;               // sigmoid curvature at the mode
  Eigen::MatrixXd chol_b;
  double jitter = 0.0;             // diagonal inflation used on the kernel matrix
  double log_marginal = 0.0;       // approximate log marginal likelihood
  int iterations = 0;
};

// Newton mode finding on a given covariance matrix. C must be symmetric
// positive definite (jitter already applied); labels are 0/1.
LaplaceState laplace_mode(const Eigen::MatrixXd& c, const std::vector<int>& labels);

// Builds the covariance from the kernel (with escalating jitter) and finds
// the mode; the returned state is self-contained for prediction.
LaplaceState laplace_fit(const KernelSpec& spec, const Eigen::MatrixXd& s,
                         const std::vector<int>& labels);

// Latent predictive mean and variance at a query row.
std::pair<double, double> laplace_predict_latent(const LaplaceState& state, const KernelSpec& spec,
                                                 const Eigen::VectorXd& query);

// Predictive class-1 probability: the logistic link averaged over the latent
// predictive with Gauss-Hermite quadrature.
double laplace_predict(const LaplaceState& state, const KernelSpec& spec,
                       const Eigen::VectorXd& query);

// Plug-in training probabilities sigmoid(mode).
Eigen::VectorXd training_probabilities(const LaplaceState& state);

// Approximate log marginal likelihood and its gradient with respect to the
// packed log hyperparameters, accounting for the implicit dependence of the
// mode on the hyperparameters.
std::pair<double, Eigen::VectorXd> log_marginal_gradient(const KernelSpec& spec,
                                                         const Eigen::MatrixXd& s,
                                                         const std::vector<int>& labels);

struct HyperFitOptions {
  int restarts = 3;      // 1 = optimize from the initial spec only
  double spread = 0.7;   // log-space sd of restart perturbations
  double log_bound = 7.0;  // optimization box: |log hyperparameter| <= log_bound
  optim::Options optimizer{60, 1e-5, 1e-9, 45};
};

struct HyperFitResult {
  KernelSpec spec;
  double log_marginal = 0.0;
  int failed_restarts = 0;
  std::string notes;
};

// Maximizes the approximate log marginal likelihood over log hyperparameters,
// restarting from perturbed initial points; requires both labels present.
HyperFitResult fit_hyperparameters(const KernelSpec& init, const Eigen::MatrixXd& s,
                                   const std::vector<int>& labels, const HyperFitOptions& options,
                                   Rng& rng);

// Multiclass wrapper. Two classes use a single binary classifier on the
// class-1 indicator; more classes get one one-vs-rest classifier each.
// A single class needs no classifier at all.
struct OvrClassifier {
  int n_classes = 0;
  int n_points = 0;
  std::vector<KernelSpec> specs;
  std::vector<LaplaceState> states;

  int classifier_count() const { return static_cast<int>(states.size()); }
};

struct OvrFitOptions {
  HyperFitOptions hyper;
  bool optimize_hyperparameters = true;
};

OvrClassifier ovr_fit(const Eigen::MatrixXd& s, const std::vector<int>& labels, int n_classes,
                      const std::vector<KernelSpec>& init_specs, const OvrFitOptions& options,
                      Rng& rng);

// Rows of averaged-predictive class probabilities, normalized to sum to one.
Eigen::MatrixXd ovr_predict(const OvrClassifier& classifier, const Eigen::MatrixXd& queries);

// Plug-in class probabilities on the training rows.
Eigen::MatrixXd ovr_training_probabilities(const OvrClassifier& classifier);

}  // namespace gplccm::gp
