#include "gplccm/optim.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "gplccm/errors.hpp"

namespace gplccm::optim {

namespace {

const double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd clip(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                     const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

std::string render_point(const Eigen::VectorXd& x) {
  std::ostringstream os;
  os << "[";
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) os << ", ";
    os << x[i];
  }
  os << "]";
  return os.str();
}

}  // namespace

Result maximize_boxed(const Objective& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                      const Eigen::VectorXd& upper, const Options& opts) {
  const Eigen::Index n = x0.size();
  if (lower.size() != n || upper.size() != n) {
    throw ShapeError("bound vectors do not match the dimension of the start point");
  }

  Result res;
  Eigen::VectorXd x = clip(x0, lower, upper);
  Eigen::VectorXd g(n);
  double v = f(x, &g);
  ++res.evaluations;
  if (!std::isfinite(v) || !g.allFinite()) {
    throw OptimizationError("objective is not finite at the start point " + render_point(x));
  }

  // Inverse-Hessian approximation of the negated (minimized) objective.
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  std::vector<char> active(static_cast<std::size_t>(n), 0);

  auto mark_active = [&](std::vector<char>& out) {
    for (Eigen::Index i = 0; i < n; ++i) {
      bool at_lo = x[i] <= lower[i] && g[i] < 0.0;
      bool at_hi = x[i] >= upper[i] && g[i] > 0.0;
      out[static_cast<std::size_t>(i)] = (at_lo || at_hi) ? 1 : 0;
    }
  };
  mark_active(active);

  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    res.iterations = iter;

    Eigen::VectorXd pg = g;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (active[static_cast<std::size_t>(i)]) pg[i] = 0.0;
    }
    if (pg.lpNorm<Eigen::Infinity>() < opts.gradient_tolerance) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd d = h.selfadjointView<Eigen::Lower>() * pg;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (active[static_cast<std::size_t>(i)]) d[i] = 0.0;
    }
    if (d.dot(pg) <= 1e-12 * d.norm() * pg.norm()) {
      h.setIdentity();
      d = pg;
    }

    // Backtracking Armijo search along d, projecting into the box.
    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new, g_new(n), step;
    double v_new = v;
    for (int k = 0; k < opts.max_step_halvings; ++k) {
      x_new = clip(x + alpha * d, lower, upper);
      step = x_new - x;
      if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
      v_new = f(x_new, &g_new);
      ++res.evaluations;
      if (std::isfinite(v_new) && g_new.allFinite() &&
          v_new >= v + 1e-4 * pg.dot(step)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      res.note = "line search stalled";
      break;
    }

    double improvement = v_new - v;
    Eigen::VectorXd y = g - g_new;  // gradient change of the minimized objective
    double sy = step.dot(y);
    std::vector<char> active_new(static_cast<std::size_t>(n), 0);
    x = x_new;
    g = g_new;
    v = v_new;
    mark_active(active_new);

    if (active_new != active) {
      h.setIdentity();
    } else if (sy > 1e-10 * step.norm() * y.norm()) {
      Eigen::VectorXd hy = h.selfadjointView<Eigen::Lower>() * y;
      double rho = 1.0 / sy;
      double factor = (1.0 + rho * y.dot(hy)) * rho;
      Eigen::MatrixXd shy = step * hy.transpose();
      h += factor * (step * step.transpose()) - rho * (shy + shy.transpose());
    }
    active = active_new;

    if (std::abs(improvement) <
        opts.relative_objective_tolerance * std::max(1.0, std::abs(v))) {
      res.converged = true;
      break;
    }
  }

  res.x = x;
  res.value = v;
  res.gradient = g;
  if (!res.converged && res.note.empty()) res.note = "iteration cap reached";
  // A stalled search at a point whose projected gradient already meets a
  // relaxed tolerance is numerical convergence, not failure.
  if (!res.converged) {
    Eigen::VectorXd pg = g;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (active[static_cast<std::size_t>(i)]) pg[i] = 0.0;
    }
    if (pg.lpNorm<Eigen::Infinity>() < std::sqrt(opts.gradient_tolerance)) {
      res.converged = true;
    }
  }
  return res;
}

Result maximize(const Objective& f, Eigen::VectorXd x0, const Options& opts) {
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(x0.size(), -kInf);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(x0.size(), kInf);
  return maximize_boxed(f, std::move(x0), lo, hi, opts);
}

}  // namespace gplccm::optim
