#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "gplccm/optim.hpp"

namespace gplccm::mnl {

// Design view of one scenario: one utility row per alternative, an
// availability mask, and the index of the chosen row.
struct ScenarioDesign {
  Eigen::MatrixXd design;  // n_alternatives x n_parameters
  std::vector<char> available;
  int chosen = -1;
};

struct PersonDesign {
  std::vector<ScenarioDesign> scenarios;
};

struct ChoiceDesign {
  std::vector<PersonDesign> persons;
  std::vector<std::string> column_labels;

  int dimension() const { return static_cast<int>(column_labels.size()); }
  int person_count() const { return static_cast<int>(persons.size()); }
  int scenario_count() const;
};

// Coefficient vector with estimation metadata: coordinates may be pinned to
// their current value or boxed (sign constraints and the like).
struct ChoiceParams {
  Eigen::VectorXd beta;
  std::vector<char> fixed;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static ChoiceParams zeros(int dimension);
  int free_count() const;
};

// Softmax choice probabilities of one scenario; unavailable alternatives get
// probability exactly zero. Computed with max subtraction.
Eigen::VectorXd choice_probabilities(const ScenarioDesign& scenario, const Eigen::VectorXd& beta);

// Sum of chosen log probabilities over a person's scenarios.
double panel_log_likelihood(const PersonDesign& person, const Eigen::VectorXd& beta);

// Per-person log likelihood for every person in the design.
Eigen::VectorXd per_person_loglik(const ChoiceDesign& design, const Eigen::VectorXd& beta);

// Person-weighted log likelihood and its gradient in all coordinates.
std::pair<double, Eigen::VectorXd> weighted_loglik_and_gradient(const ChoiceDesign& design,
                                                                const Eigen::VectorXd& beta,
                                                                const Eigen::VectorXd& weights);

// Maximizes the weighted log likelihood over the free coordinates of init,
// honoring its box constraints. Weights must be non-negative.
ChoiceParams maximize_weighted(const ChoiceDesign& design, const Eigen::VectorXd& weights,
                               const ChoiceParams& init, const optim::Options& opts = {});

struct StandardErrors {
  Eigen::VectorXd se;       // NaN where not applicable
  Eigen::VectorXd p_value;  // two-sided, NaN where not applicable
  std::vector<char> applicable;
};

// Observed-information standard errors at beta_hat: finite differences of the
// analytic gradient, inverted over the coordinates that are free and not
// pinned at an active bound.
StandardErrors standard_errors(const ChoiceDesign& design, const ChoiceParams& params,
                               const Eigen::VectorXd& weights);

}  // namespace gplccm::mnl
