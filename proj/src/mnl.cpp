#include "gplccm/mnl.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "gplccm/errors.hpp"
#include "gplccm/numerics.hpp"

namespace gplccm::mnl {

namespace {

const double kInf = std::numeric_limits<double>::infinity();
const double kNan = std::numeric_limits<double>::quiet_NaN();

void check_beta(const ChoiceDesign& design, const Eigen::VectorXd& beta) {
  if (beta.size() != design.dimension()) {
    std::ostringstream os;
    os << "coefficient vector has " << beta.size() << " entries, design has "
       << design.dimension() << " columns";
    throw ShapeError(os.str());
  }
}

}  // namespace

int ChoiceDesign::scenario_count() const {
  int n = 0;
  for (const auto& p : persons) n += static_cast<int>(p.scenarios.size());
  return n;
}

ChoiceParams ChoiceParams::zeros(int dimension) {
  ChoiceParams p;
  p.beta = Eigen::VectorXd::Zero(dimension);
  p.fixed.assign(static_cast<std::size_t>(dimension), 0);
  p.lower = Eigen::VectorXd::Constant(dimension, -kInf);
  p.upper = Eigen::VectorXd::Constant(dimension, kInf);
  return p;
}

int ChoiceParams::free_count() const {
  int n = 0;
  for (char f : fixed) n += f ? 0 : 1;
  return n;
}

Eigen::VectorXd choice_probabilities(const ScenarioDesign& scenario, const Eigen::VectorXd& beta) {
  const Eigen::Index j = scenario.design.rows();
  Eigen::VectorXd utilities = scenario.design * beta;
  double umax = -kInf;
  for (Eigen::Index i = 0; i < j; ++i) {
    if (scenario.available[static_cast<std::size_t>(i)] && utilities[i] > umax) {
      umax = utilities[i];
    }
  }
  if (umax == -kInf) throw DataError("scenario has no available alternative");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(j);
  double total = 0.0;
  for (Eigen::Index i = 0; i < j; ++i) {
    if (!scenario.available[static_cast<std::size_t>(i)]) continue;
    p[i] = std::exp(utilities[i] - umax);
    total += p[i];
  }
  p /= total;
  return p;
}

double panel_log_likelihood(const PersonDesign& person, const Eigen::VectorXd& beta) {
  double ll = 0.0;
  for (const auto& scenario : person.scenarios) {
    Eigen::VectorXd p = choice_probabilities(scenario, beta);
    ll += std::log(p[scenario.chosen]);
  }
  return ll;
}

Eigen::VectorXd per_person_loglik(const ChoiceDesign& design, const Eigen::VectorXd& beta) {
  check_beta(design, beta);
  Eigen::VectorXd out(design.person_count());
  for (int n = 0; n < design.person_count(); ++n) {
    out[n] = panel_log_likelihood(design.persons[static_cast<std::size_t>(n)], beta);
  }
  return out;
}

std::pair<double, Eigen::VectorXd> weighted_loglik_and_gradient(const ChoiceDesign& design,
                                                                const Eigen::VectorXd& beta,
                                                                const Eigen::VectorXd& weights) {
  check_beta(design, beta);
  if (weights.size() != design.person_count()) {
    throw ShapeError("weight vector does not match the number of persons");
  }
  KahanSum ll;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(beta.size());
  for (int n = 0; n < design.person_count(); ++n) {
    double w = weights[n];
    if (w < 0.0) throw EstimationError("negative person weight");
    if (w == 0.0) continue;
    for (const auto& scenario : design.persons[static_cast<std::size_t>(n)].scenarios) {
      Eigen::VectorXd p = choice_probabilities(scenario, beta);
      ll.add(w * std::log(p[scenario.chosen]));
      grad.noalias() += w * scenario.design.row(scenario.chosen).transpose();
      grad.noalias() -= w * (scenario.design.transpose() * p);
    }
  }
  return {ll.value(), grad};
}

ChoiceParams maximize_weighted(const ChoiceDesign& design, const Eigen::VectorXd& weights,
                               const ChoiceParams& init, const optim::Options& opts) {
  check_beta(design, init.beta);
  const Eigen::Index dim = init.beta.size();

  std::vector<Eigen::Index> free_idx;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (!init.fixed[static_cast<std::size_t>(i)]) free_idx.push_back(i);
  }
  ChoiceParams out = init;
  if (free_idx.empty()) return out;

  Eigen::VectorXd full = init.beta;
  auto scatter = [&](const Eigen::VectorXd& x) {
    for (std::size_t k = 0; k < free_idx.size(); ++k) full[free_idx[k]] = x[static_cast<Eigen::Index>(k)];
  };

  optim::Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    scatter(x);
    if (!full.allFinite()) {
      std::ostringstream os;
      os << "non-finite coefficients during line search: [";
      for (Eigen::Index i = 0; i < full.size(); ++i) {
        if (i) os << ", ";
        os << full[i];
      }
      os << "]";
      throw OptimizationError(os.str());
    }
    auto [value, g] = weighted_loglik_and_gradient(design, full, weights);
    if (grad) {
      grad->resize(static_cast<Eigen::Index>(free_idx.size()));
      for (std::size_t k = 0; k < free_idx.size(); ++k) {
        (*grad)[static_cast<Eigen::Index>(k)] = g[free_idx[k]];
      }
    }
    return value;
  };

  Eigen::VectorXd x0(static_cast<Eigen::Index>(free_idx.size()));
  Eigen::VectorXd lo(x0.size()), hi(x0.size());
  for (std::size_t k = 0; k < free_idx.size(); ++k) {
    x0[static_cast<Eigen::Index>(k)] = init.beta[free_idx[k]];
    lo[static_cast<Eigen::Index>(k)] = init.lower[free_idx[k]];
    hi[static_cast<Eigen::Index>(k)] = init.upper[free_idx[k]];
  }

  optim::Result res = optim::maximize_boxed(objective, x0, lo, hi, opts);
  if (!res.converged) {
    throw ConvergenceError("choice model estimation did not converge: " + res.note);
  }
  scatter(res.x);
  out.beta = full;
  return out;
}

StandardErrors standard_errors(const ChoiceDesign& design, const ChoiceParams& params,
                               const Eigen::VectorXd& weights) {
  check_beta(design, params.beta);
  const Eigen::Index dim = params.beta.size();

  // Coordinates that were estimated without hitting a constraint.
  std::vector<Eigen::Index> idx;
  std::vector<char> applicable(static_cast<std::size_t>(dim), 0);
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (params.fixed[static_cast<std::size_t>(i)]) continue;
    double b = params.beta[i];
    bool at_bound = (std::isfinite(params.lower[i]) && std::abs(b - params.lower[i]) < 1e-8) ||
                    (std::isfinite(params.upper[i]) && std::abs(b - params.upper[i]) < 1e-8);
    if (at_bound) continue;
    applicable[static_cast<std::size_t>(i)] = 1;
    idx.push_back(i);
  }

  StandardErrors out;
  out.se = Eigen::VectorXd::Constant(dim, kNan);
  out.p_value = Eigen::VectorXd::Constant(dim, kNan);
  out.applicable = applicable;
  if (idx.empty()) return out;

  const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd hessian(m, m);
  Eigen::VectorXd beta = params.beta;
  for (Eigen::Index k = 0; k < m; ++k) {
    double h = 1e-5 * std::max(1.0, std::abs(beta[idx[static_cast<std::size_t>(k)]]));
    Eigen::VectorXd bp = beta, bm = beta;
    bp[idx[static_cast<std::size_t>(k)]] += h;
    bm[idx[static_cast<std::size_t>(k)]] -= h;
    Eigen::VectorXd gp = weighted_loglik_and_gradient(design, bp, weights).second;
    Eigen::VectorXd gm = weighted_loglik_and_gradient(design, bm, weights).second;
    for (Eigen::Index r = 0; r < m; ++r) {
      hessian(r, k) = (gp[idx[static_cast<std::size_t>(r)]] - gm[idx[static_cast<std::size_t>(r)]]) /
                      (2.0 * h);
    }
  }
  // Symmetrize away finite-difference noise, then invert the information.
  Eigen::MatrixXd info = -0.5 * (hessian + hessian.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) {
    throw ConditioningError(
        "observed information matrix is singular or indefinite; standard errors unavailable");
  }
  Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(m, m));
  for (Eigen::Index k = 0; k < m; ++k) {
    double var = cov(k, k);
    if (!(var > 0.0) || !std::isfinite(var)) {
      throw ConditioningError("observed information matrix is singular or indefinite");
    }
    Eigen::Index i = idx[static_cast<std::size_t>(k)];
    out.se[i] = std::sqrt(var);
    out.p_value[i] = normal_two_sided_p(params.beta[i] / out.se[i]);
  }
  return out;
}

}  // namespace gplccm::mnl
