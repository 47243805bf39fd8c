#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gplccm/mnl.hpp"
#include "gplccm/optim.hpp"

namespace gplccm::lccm {

// Multinomial-logit class membership: one coefficient row per non-base class
// over [1, features]; the last class is the base with utility zero.
struct MembershipParams {
  Eigen::MatrixXd gamma;  // (K-1) x (1 + n_features), intercept first

  int n_classes() const { return static_cast<int>(gamma.rows()) + 1; }
};

MembershipParams zero_membership(int n_classes, int n_features);

// Class probabilities for one feature row / for every row of s.
Eigen::VectorXd membership_row(const Eigen::VectorXd& features, const MembershipParams& params);
Eigen::MatrixXd membership_probabilities(const Eigen::MatrixXd& s, const MembershipParams& params);

// Bayes posterior over classes from per-person log priors and per-person,
// per-class choice log likelihoods; computed in the log domain. Rows sum to 1.
Eigen::MatrixXd class_posterior(const Eigen::MatrixXd& log_prior,
                                const Eigen::MatrixXd& choice_loglik);

// Per-person, per-class choice log likelihoods under the class coefficients.
Eigen::MatrixXd choice_loglik_matrix(const mnl::ChoiceDesign& design,
                                     const std::vector<mnl::ChoiceParams>& betas);

// E-step of the latent class model.
Eigen::MatrixXd lccm_e_step(const mnl::ChoiceDesign& design, const Eigen::MatrixXd& s,
                            const MembershipParams& membership,
                            const std::vector<mnl::ChoiceParams>& betas);

// Weighted multinomial-logit fit of the membership coefficients. Sets
// *separation_warning when a coefficient ran away to the safety box, the
// signature of (quasi-)complete separation.
MembershipParams maximize_membership(const Eigen::MatrixXd& s, const Eigen::MatrixXd& resp,
                                     const MembershipParams& init, bool* separation_warning,
                                     const optim::Options& opts = {});

// Marginal log likelihood of the panel under the mixture.
double marginal_log_likelihood(const mnl::ChoiceDesign& design, const Eigen::MatrixXd& s,
                               const MembershipParams& membership,
                               const std::vector<mnl::ChoiceParams>& betas);

// Per-person mixture log likelihood on (possibly held-out) data.
Eigen::VectorXd person_mixture_loglik(const mnl::ChoiceDesign& design, const Eigen::MatrixXd& s,
                                      const MembershipParams& membership,
                                      const std::vector<mnl::ChoiceParams>& betas);

struct RestartDiagnostic {
  int restart = 0;
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string note;  // failure reason when the restart aborted
};

struct FittedLccm {
  int n_classes = 0;
  MembershipParams membership;
  std::vector<mnl::ChoiceParams> choice;
  Eigen::MatrixXd responsibilities;
  std::vector<double> trace;  // marginal log likelihood per EM iteration
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> warnings;
  std::vector<RestartDiagnostic> restarts;
};

struct LccmOptions {
  int restarts = 5;
  int max_iterations = 500;
  double tolerance = 1e-4;  // absolute change in marginal log likelihood
  optim::Options mstep;
  optim::Options membership_opts;
};

// Full EM estimation from several random initializations; init carries the
// utility bounds and pins shared by every class, and s holds the membership
// features (already standardized if desired).
FittedLccm fit_lccm(const mnl::ChoiceDesign& design, const Eigen::MatrixXd& s, int n_classes,
                    const mnl::ChoiceParams& init, std::uint64_t seed,
                    const LccmOptions& options = {});

}  // namespace gplccm::lccm
