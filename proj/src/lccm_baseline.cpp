#include "gplccm/lccm_baseline.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "gplccm/errors.hpp"
#include "gplccm/numerics.hpp"
#include "gplccm/rng.hpp"

namespace gplccm::lccm {

namespace {

const double kInf = std::numeric_limits<double>::infinity();

void check_features(const Eigen::MatrixXd& s, const MembershipParams& params) {
  if (params.gamma.rows() > 0 && params.gamma.cols() != s.cols() + 1) {
    std::ostringstream os;
    os << "membership coefficients expect " << params.gamma.cols() - 1
       << " features, got " << s.cols();
    throw ShapeError(os.str());
  }
}

}  // namespace

MembershipParams zero_membership(int n_classes, int n_features) {
  if (n_classes < 1) throw ConfigError("number of classes must be positive");
  MembershipParams p;
  p.gamma = Eigen::MatrixXd::Zero(n_classes - 1, n_features + 1);
  return p;
}

Eigen::VectorXd membership_row(const Eigen::VectorXd& features, const MembershipParams& params) {
  const int k = params.n_classes();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(k);
  for (int c = 0; c < k - 1; ++c) {
    u[c] = params.gamma(c, 0) + params.gamma.row(c).tail(features.size()).dot(features);
  }
  double m = u.maxCoeff();
  Eigen::VectorXd p = (u.array() - m).exp();
  return p / p.sum();
}

Eigen::MatrixXd membership_probabilities(const Eigen::MatrixXd& s, const MembershipParams& params) {
  check_features(s, params);
  Eigen::MatrixXd p(s.rows(), params.n_classes());
  for (Eigen::Index n = 0; n < s.rows(); ++n) {
    p.row(n) = membership_row(s.row(n).transpose(), params).transpose();
  }
  return p;
}

Eigen::MatrixXd class_posterior(const Eigen::MatrixXd& log_prior,
                                const Eigen::MatrixXd& choice_loglik) {
  if (log_prior.rows() != choice_loglik.rows() || log_prior.cols() != choice_loglik.cols()) {
    throw ShapeError("log prior and choice log likelihood shapes do not agree");
  }
  Eigen::MatrixXd resp(log_prior.rows(), log_prior.cols());
  for (Eigen::Index n = 0; n < resp.rows(); ++n) {
    Eigen::VectorXd joint = (log_prior.row(n) + choice_loglik.row(n)).transpose();
    double lse = log_sum_exp(joint);
    resp.row(n) = (joint.array() - lse).exp().transpose();
  }
  return resp;
}

Eigen::MatrixXd choice_loglik_matrix(const mnl::ChoiceDesign& design,
                                     const std::vector<mnl::ChoiceParams>& betas) {
  Eigen::MatrixXd ll(design.person_count(), static_cast<Eigen::Index>(betas.size()));
  for (std::size_t k = 0; k < betas.size(); ++k) {
    ll.col(static_cast<Eigen::Index>(k)) = mnl::per_person_loglik(design, betas[k].beta);
  }
  return ll;
}

Eigen::MatrixXd lccm_e_step(const mnl::ChoiceDesign& design, const Eigen::MatrixXd& s,
                            const MembershipParams& membership,
                            const std::vector<mnl::ChoiceParams>& betas) {
  Eigen::MatrixXd prior = membership_probabilities(s, membership);
  return class_posterior(prior.array().log().matrix(), choice_loglik_matrix(design, betas));
}

MembershipParams maximize_membership(const Eigen::MatrixXd& s, const Eigen::MatrixXd& resp,
                                     const MembershipParams& init, bool* separation_warning,
                                     const optim::Options& opts) {
  check_features(s, init);
  const int k = init.n_classes();
  if (resp.cols() != k || resp.rows() != s.rows()) {
    throw ShapeError("responsibility matrix does not match features and class count");
  }
  if (separation_warning) *separation_warning = false;
  if (k == 1) return init;

  const Eigen::Index dim = init.gamma.size();
  // Box keeps runaway (separated) coefficients finite; hitting it is reported
  // as a warning, not an error.
  const double box = 50.0;
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(dim, -box);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(dim, box);

  auto unflatten = [&](const Eigen::VectorXd& x) {
    MembershipParams p;
    p.gamma = Eigen::Map<const Eigen::MatrixXd>(x.data(), init.gamma.rows(), init.gamma.cols());
    return p;
  };

  optim::Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    MembershipParams p = unflatten(x);
    KahanSum value;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(init.gamma.rows(), init.gamma.cols());
    for (Eigen::Index n = 0; n < s.rows(); ++n) {
      Eigen::VectorXd prob = membership_row(s.row(n).transpose(), p);
      for (int c = 0; c < k; ++c) {
        if (resp(n, c) > 0.0) value.add(resp(n, c) * std::log(std::max(prob[c], 1e-300)));
      }
      for (int c = 0; c < k - 1; ++c) {
        double coeff = resp(n, c) - prob[c];
        g(c, 0) += coeff;
        g.row(c).tail(s.cols()) += coeff * s.row(n);
      }
    }
    if (grad) *grad = Eigen::Map<Eigen::VectorXd>(g.data(), g.size());
    return value.value();
  };

  Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(init.gamma.data(), dim);
  x0 = x0.cwiseMax(lo).cwiseMin(hi);
  optim::Result res = optim::maximize_boxed(objective, x0, lo, hi, opts);
  MembershipParams out = unflatten(res.x);
  bool ran_away = out.gamma.cwiseAbs().maxCoeff() >= 30.0;
  if (separation_warning && (ran_away || !res.converged)) *separation_warning = ran_away;
  if (!res.converged && !ran_away) {
    throw ConvergenceError("membership estimation did not converge: " + res.note);
  }
  return out;
}

Eigen::VectorXd person_mixture_loglik(const mnl::ChoiceDesign& design, const Eigen::MatrixXd& s,
                                      const MembershipParams& membership,
                                      const std::vector<mnl::ChoiceParams>& betas) {
  Eigen::MatrixXd prior = membership_probabilities(s, membership);
  Eigen::MatrixXd ll = choice_loglik_matrix(design, betas);
  Eigen::VectorXd out(design.person_count());
  for (Eigen::Index n = 0; n < out.size(); ++n) {
    Eigen::VectorXd joint = (prior.row(n).array().log() + ll.row(n).array()).transpose();
    out[n] = log_sum_exp(joint);
  }
  return out;
}

double marginal_log_likelihood(const mnl::ChoiceDesign& design, const Eigen::MatrixXd& s,
                               const MembershipParams& membership,
                               const std::vector<mnl::ChoiceParams>& betas) {
  Eigen::VectorXd per_person = person_mixture_loglik(design, s, membership, betas);
  KahanSum total;
  for (Eigen::Index n = 0; n < per_person.size(); ++n) total.add(per_person[n]);
  return total.value();
}

namespace {

struct EmRun {
  MembershipParams membership;
  std::vector<mnl::ChoiceParams> betas;
  Eigen::MatrixXd resp;
  std::vector<double> trace;
  double ll = -kInf;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> warnings;
};

EmRun run_em(const mnl::ChoiceDesign& design, const Eigen::MatrixXd& s, int n_classes,
             const mnl::ChoiceParams& init, Rng rng, const LccmOptions& options) {
  const int n = design.person_count();
  EmRun run;

  // Random balanced hard assignment: shuffle persons, deal them out in turn.
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  run.resp = Eigen::MatrixXd::Zero(n, n_classes);
  for (int i = 0; i < n; ++i) {
    run.resp(order[static_cast<std::size_t>(i)], i % n_classes) = 1.0;
  }

  run.membership = zero_membership(n_classes, static_cast<int>(s.cols()));
  bool separated = false;
  if (n_classes > 1) {
    run.membership =
        maximize_membership(s, run.resp, run.membership, &separated, options.membership_opts);
  }
  for (int k = 0; k < n_classes; ++k) {
    run.betas.push_back(mnl::maximize_weighted(design, run.resp.col(k), init, options.mstep));
  }

  double prev = -kInf;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    run.iterations = iter;
    run.resp = lccm_e_step(design, s, run.membership, run.betas);

    Eigen::VectorXd mass = run.resp.colwise().sum();
    for (int k = 0; k < n_classes; ++k) {
      if (mass[k] < 1e-6 * n) {
        std::ostringstream os;
        os << "class " << k << " collapsed (responsibility mass " << mass[k]
           << " of " << n << "); try fewer classes";
        throw DegenerateClassError(os.str());
      }
    }

    if (n_classes > 1) {
      bool sep = false;
      run.membership =
          maximize_membership(s, run.resp, run.membership, &sep, options.membership_opts);
      separated = separated || sep;
    }
    for (int k = 0; k < n_classes; ++k) {
      run.betas[static_cast<std::size_t>(k)] = mnl::maximize_weighted(
          design, run.resp.col(k), run.betas[static_cast<std::size_t>(k)], options.mstep);
    }

    double ll = marginal_log_likelihood(design, s, run.membership, run.betas);
    run.trace.push_back(ll);
    if (std::isfinite(prev) && ll < prev - 1e-9) {
      std::ostringstream os;
      os << "marginal log likelihood decreased by " << prev - ll << " at iteration " << iter;
      run.warnings.push_back(os.str());
    }
    if (std::isfinite(prev) && std::abs(ll - prev) < options.tolerance) {
      run.converged = true;
      run.ll = ll;
      break;
    }
    prev = ll;
    run.ll = ll;
  }
  if (separated) {
    run.warnings.push_back(
        "membership features separate the classes completely; coefficients were boxed");
  }
  // Final E-step so the stored responsibilities match the final parameters.
  run.resp = lccm_e_step(design, s, run.membership, run.betas);
  return run;
}

}  // namespace

FittedLccm fit_lccm(const mnl::ChoiceDesign& design, const Eigen::MatrixXd& s, int n_classes,
                    const mnl::ChoiceParams& init, std::uint64_t seed,
                    const LccmOptions& options) {
  if (n_classes < 1) throw ConfigError("number of classes must be positive");
  if (s.rows() != design.person_count()) {
    throw ShapeError("membership features and choice design have different person counts");
  }

  Rng root(seed);
  FittedLccm best;
  bool have_best = false;
  std::ostringstream failures;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    RestartDiagnostic diag;
    diag.restart = r;
    try {
      EmRun run = run_em(design, s, n_classes, init, root.fork(static_cast<std::uint64_t>(r)),
                         options);
      diag.log_likelihood = run.ll;
      diag.converged = run.converged;
      diag.iterations = run.iterations;
      if (!have_best || run.ll > best.log_likelihood) {
        best.n_classes = n_classes;
        best.membership = run.membership;
        best.choice = run.betas;
        best.responsibilities = run.resp;
        best.trace = run.trace;
        best.log_likelihood = run.ll;
        best.converged = run.converged;
        best.iterations = run.iterations;
        best.warnings = run.warnings;
        have_best = true;
      }
    } catch (const Error& e) {
      diag.note = e.what();
      failures << "restart " << r << ": " << e.what() << "; ";
    }
    best.restarts.push_back(diag);
  }
  if (!have_best) {
    throw OptimizationError("every estimation restart failed: " + failures.str());
  }
  if (!best.converged) {
    best.warnings.push_back("EM hit the iteration cap before meeting the tolerance");
  }
  return best;
}

}  // namespace gplccm::lccm
