#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gplccm/gp_laplace.hpp"
#include "gplccm/kernels.hpp"
#include "gplccm/lccm_baseline.hpp"
#include "gplccm/mnl.hpp"

namespace gplccm::gpl {

// Posterior class responsibilities from GP class probabilities and per-class
// choice log likelihoods, computed in the log domain.
Eigen::MatrixXd e_step(const Eigen::MatrixXd& gp_probs, const Eigen::MatrixXd& choice_loglik);

// Row argmax; ties go to the lowest class index.
std::vector<int> hard_assign(const Eigen::MatrixXd& resp);

// EM objective: sum of responsibilities times (log class prob + choice LL).
double expected_complete_loglik(const Eigen::MatrixXd& resp, const Eigen::MatrixXd& gp_probs,
                                const Eigen::MatrixXd& choice_loglik);

// Observed-data mixture log likelihood.
double marginal_log_likelihood(const Eigen::MatrixXd& gp_probs,
                               const Eigen::MatrixXd& choice_loglik);

struct IterationRecord {
  double marginal_loglik = 0.0;
  double complete_loglik = 0.0;
};

struct FittedGpLccm {
  int n_classes = 0;
  gp::OvrClassifier classifier;
  std::vector<mnl::ChoiceParams> choice;
  Eigen::MatrixXd responsibilities;
  std::vector<IterationRecord> trace;
  double log_likelihood = 0.0;  // marginal, at the final parameters
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> warnings;
  std::vector<lccm::RestartDiagnostic> restarts;
};

struct GpLccmOptions {
  int restarts = 5;
  int max_iterations = 500;
  double tolerance = 1e-4;  // absolute change of the marginal log likelihood
  gp::HyperFitOptions initial_hyper{2, 0.7, 7.0, {40, 1e-5, 1e-9, 45}};
  gp::HyperFitOptions refit_hyper{1, 0.7, 7.0, {6, 1e-5, 1e-9, 45}};
  optim::Options mstep;
};

// EM estimation: E-step responsibilities, weighted choice-model updates,
// hyperparameter refits of the class membership GPs on the hard assignment,
// until the marginal log likelihood settles. Several random initializations;
// the best ending likelihood wins. init carries shared utility bounds/pins,
// kernel the initial structure for every classifier.
FittedGpLccm fit_gp_lccm(const mnl::ChoiceDesign& design, const Eigen::MatrixXd& s, int n_classes,
                         const KernelSpec& kernel, const mnl::ChoiceParams& init,
                         std::uint64_t seed, const GpLccmOptions& options = {});

struct GpLccmPrediction {
  Eigen::MatrixXd class_probs;    // averaged predictive, rows sum to one
  Eigen::VectorXd person_loglik;  // mixture log likelihood per person
  double total_loglik = 0.0;
};

// Held-out evaluation: class probabilities from the GP predictive equations,
// mixed with each class's choice likelihood on the new panel.
GpLccmPrediction gp_lccm_predict(const FittedGpLccm& fit, const Eigen::MatrixXd& s_new,
                                 const mnl::ChoiceDesign& design_new);

// Mixture choice probabilities for one scenario of a (possibly new) person.
Eigen::VectorXd mixture_choice_probabilities(const FittedGpLccm& fit,
                                             const Eigen::VectorXd& class_probs,
                                             const mnl::ScenarioDesign& scenario);

}  // namespace gplccm::gpl
