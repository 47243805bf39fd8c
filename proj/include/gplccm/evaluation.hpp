#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gplccm/gp_lccm.hpp"
#include "gplccm/lccm_baseline.hpp"
#include "gplccm/mnl.hpp"

namespace gplccm::eval {

// Information criteria on the marginal log likelihood; n_observations is the
// number of choice scenarios, not persons.
double aic(double loglik, int n_parameters);
double bic(double loglik, int n_parameters, int n_observations);

// Estimated parameters: free utility coefficients per class, plus membership
// coefficients (latent class logit) or counted kernel hyperparameters per
// classifier (GP membership).
int count_parameters(const mnl::ChoiceParams& params);
int count_parameters(const lccm::FittedLccm& fit);
int count_parameters(const gpl::FittedGpLccm& fit);

struct FitReport {
  std::string model;
  int n_classes = 0;
  int n_persons = 0;
  int n_scenarios = 0;
  int n_parameters = 0;
  double log_likelihood = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> warnings;
};

FitReport make_report(const mnl::ChoiceDesign& design, const mnl::ChoiceParams& params,
                      double loglik);
FitReport make_report(const mnl::ChoiceDesign& design, const lccm::FittedLccm& fit);
FitReport make_report(const mnl::ChoiceDesign& design, const gpl::FittedGpLccm& fit);

// key=value rendering, one entry per line.
std::string render_report(const FitReport& report);

// Ratio of a time and a cost coefficient converted to the target money unit.
double value_of_time(double beta_time, double beta_cost, double unit_factor);

enum class ModelFamily { Mnl, Lccm, GpLccm };

struct CvModelSpec {
  ModelFamily family = ModelFamily::GpLccm;
  int n_classes = 1;
  KernelSpec kernel;
  mnl::ChoiceParams init;
  lccm::LccmOptions lccm;
  gpl::GpLccmOptions gp;
  std::vector<int> standardize_columns;  // feature columns rescaled per training fold
};

struct CvResult {
  int folds = 0;
  Eigen::VectorXd fold_loglik;   // summed held-out log likelihood per fold
  Eigen::VectorXi fold_persons;  // held-out person count per fold
  double total_loglik = 0.0;
  double mean_fold_loglik = 0.0;
  double per_person_loglik = 0.0;
};

// K-fold cross-validation over persons: folds partition whole persons so a
// person's scenarios never straddle the split, and the feature transform is
// refitted on each training fold. Deterministic in the seed.
CvResult kfold_cv(const mnl::ChoiceDesign& design, const Eigen::MatrixXd& features,
                  const CvModelSpec& spec, int folds, std::uint64_t seed);

}  // namespace gplccm::eval
