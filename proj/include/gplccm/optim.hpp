#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

namespace gplccm::optim {

struct Options {
  int max_iterations = 200;
  // Converged when the infinity norm of the (projected) gradient drops below
  // gradient_tolerance, or the objective improves by less than
  // relative_objective_tolerance * max(1, |objective|) over one iteration.
  double gradient_tolerance = 1e-6;
  double relative_objective_tolerance = 1e-10;
  int max_step_halvings = 45;
};

struct Result {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string note;
};

// Objective callback: returns the value at x and, when grad is non-null,
// writes the gradient into it. Throwing aborts the run; returning a
// non-finite value makes the line search back off instead.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

// Dense quasi-Newton (BFGS) ascent with backtracking line search.
Result maximize(const Objective& f, Eigen::VectorXd x0, const Options& opts = {});

// Box-constrained ascent: gradient-projection BFGS. Entries of lower/upper
// may be +-infinity; x0 is clipped into the box first. Equal lower and upper
// pin a coordinate.
Result maximize_boxed(const Objective& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                      const Eigen::VectorXd& upper, const Options& opts = {});

}  // namespace gplccm::optim
