#include "gplccm/gp_lccm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gplccm/errors.hpp"
#include "gplccm/numerics.hpp"
#include "gplccm/rng.hpp"

namespace gplccm::gpl {

namespace {

const double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd safe_log(const Eigen::MatrixXd& p) {
  return p.array().max(1e-300).log().matrix();
}

}  // namespace

Eigen::MatrixXd e_step(const Eigen::MatrixXd& gp_probs, const Eigen::MatrixXd& choice_loglik) {
  return lccm::class_posterior(safe_log(gp_probs), choice_loglik);
}

std::vector<int> hard_assign(const Eigen::MatrixXd& resp) {
  std::vector<int> labels(static_cast<std::size_t>(resp.rows()));
  for (Eigen::Index n = 0; n < resp.rows(); ++n) {
    int arg = 0;
    for (Eigen::Index k = 1; k < resp.cols(); ++k) {
      if (resp(n, k) > resp(n, arg)) arg = static_cast<int>(k);
    }
    labels[static_cast<std::size_t>(n)] = arg;
  }
  return labels;
}

double expected_complete_loglik(const Eigen::MatrixXd& resp, const Eigen::MatrixXd& gp_probs,
                                const Eigen::MatrixXd& choice_loglik) {
  if (resp.rows() != gp_probs.rows() || resp.cols() != gp_probs.cols() ||
      resp.rows() != choice_loglik.rows() || resp.cols() != choice_loglik.cols()) {
    throw ShapeError("responsibilities, class probabilities and log likelihoods must agree");
  }
  Eigen::MatrixXd log_prior = safe_log(gp_probs);
  KahanSum total;
  for (Eigen::Index n = 0; n < resp.rows(); ++n) {
    for (Eigen::Index k = 0; k < resp.cols(); ++k) {
      if (resp(n, k) > 0.0) {
        total.add(resp(n, k) * (log_prior(n, k) + choice_loglik(n, k)));
      }
    }
  }
  return total.value();
}

double marginal_log_likelihood(const Eigen::MatrixXd& gp_probs,
                               const Eigen::MatrixXd& choice_loglik) {
  if (gp_probs.rows() != choice_loglik.rows() || gp_probs.cols() != choice_loglik.cols()) {
    throw ShapeError("class probabilities and log likelihoods must agree");
  }
  Eigen::MatrixXd log_prior = safe_log(gp_probs);
  KahanSum total;
  for (Eigen::Index n = 0; n < gp_probs.rows(); ++n) {
    Eigen::VectorXd joint = (log_prior.row(n) + choice_loglik.row(n)).transpose();
    total.add(log_sum_exp(joint));
  }
  return total.value();
}

namespace {

struct EmRun {
  gp::OvrClassifier classifier;
  std::vector<mnl::ChoiceParams> betas;
  Eigen::MatrixXd resp;
  std::vector<IterationRecord> trace;
  double ll = -kInf;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> warnings;
};

EmRun run_em(const mnl::ChoiceDesign& design, const Eigen::MatrixXd& s, int n_classes,
             const KernelSpec& kernel, const mnl::ChoiceParams& init, Rng rng,
             const GpLccmOptions& options) {
  const int n = design.person_count();
  EmRun run;

  // Balanced random initial hard assignment.
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  std::vector<int> labels(static_cast<std::size_t>(n));
  run.resp = Eigen::MatrixXd::Zero(n, n_classes);
  for (int i = 0; i < n; ++i) {
    labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i % n_classes;
    run.resp(order[static_cast<std::size_t>(i)], i % n_classes) = 1.0;
  }

  for (int k = 0; k < n_classes; ++k) {
    run.betas.push_back(mnl::maximize_weighted(design, run.resp.col(k), init, options.mstep));
  }

  const int n_classifiers = n_classes == 1 ? 0 : (n_classes == 2 ? 1 : n_classes);
  std::vector<KernelSpec> specs(static_cast<std::size_t>(n_classifiers), kernel);
  gp::OvrFitOptions initial_fit{options.initial_hyper, true};
  gp::OvrFitOptions refit{options.refit_hyper, true};
  Rng gp_rng = rng.fork(7001);
  run.classifier = gp::ovr_fit(s, labels, n_classes, specs, initial_fit, gp_rng);

  // Class probabilities always come from the predictive equations, also at
  // the training rows, so the reported likelihood is the same quantity a
  // later predict-on-training run computes.
  Eigen::MatrixXd gp_probs = gp::ovr_predict(run.classifier, s);
  Eigen::MatrixXd choice_ll = lccm::choice_loglik_matrix(design, run.betas);

  int reseed_events = 0;
  std::vector<int> prev_labels = labels;
  double prev = -kInf, prev2 = -kInf;
  int cycle_hits = 0;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    run.iterations = iter;

    run.resp = e_step(gp_probs, choice_ll);

    for (int k = 0; k < n_classes; ++k) {
      run.betas[static_cast<std::size_t>(k)] = mnl::maximize_weighted(
          design, run.resp.col(k), run.betas[static_cast<std::size_t>(k)], options.mstep);
    }

    labels = hard_assign(run.resp);
    if (n_classes > 1) {
      // A class that lost every member is reseeded with the persons most
      // attached to it; repeated collapse means K is too large for the data.
      bool stable = false;
      while (!stable) {
        stable = true;
        std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
        for (int l : labels) ++counts[static_cast<std::size_t>(l)];
        for (int k = 0; k < n_classes; ++k) {
          if (counts[static_cast<std::size_t>(k)] > 0) continue;
          if (++reseed_events > 3) {
            std::ostringstream os;
            os << "class " << k << " emptied repeatedly under hard assignment; "
               << "the data do not support " << n_classes << " classes";
            throw DegenerateClassError(os.str());
          }
          int take = std::max(2, (n + 99) / 100);
          std::vector<int> idx(static_cast<std::size_t>(n));
          for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
          std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
            return run.resp(a, k) > run.resp(b, k);
          });
          for (int i = 0; i < take && i < n; ++i) {
            labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = k;
          }
          std::ostringstream os;
          os << "class " << k << " emptied at iteration " << iter << "; reseeded with " << take
             << " persons";
          run.warnings.push_back(os.str());
          stable = false;
        }
      }
    }

    // Hyperparameter refit only when the hard assignment moved; with
    // identical labels and a warm start the refit would reproduce itself.
    if (n_classifiers > 0 && (iter == 1 || labels != prev_labels)) {
      std::vector<KernelSpec> warm = run.classifier.specs;
      run.classifier = gp::ovr_fit(s, labels, n_classes, warm, refit, gp_rng);
      gp_probs = gp::ovr_predict(run.classifier, s);
    }
    prev_labels = labels;
    choice_ll = lccm::choice_loglik_matrix(design, run.betas);

    double marginal = marginal_log_likelihood(gp_probs, choice_ll);
    double complete = expected_complete_loglik(run.resp, gp_probs, choice_ll);
    run.trace.push_back({marginal, complete});
    run.ll = marginal;

    if (std::isfinite(prev) && marginal < prev - 1e-6) {
      std::ostringstream os;
      os << "marginal log likelihood decreased by " << prev - marginal << " at iteration "
         << iter << " (hard-assignment refit step)";
      run.warnings.push_back(os.str());
    }
    if (std::isfinite(prev) && std::abs(marginal - prev) < options.tolerance) {
      run.converged = true;
      break;
    }
    // Two-cycles happen when a boundary person flips class each iteration;
    // three consecutive period-2 repeats end the run.
    if (std::isfinite(prev2) && std::abs(marginal - prev2) < options.tolerance &&
        std::abs(marginal - prev) >= options.tolerance) {
      if (++cycle_hits >= 3) {
        run.converged = true;
        run.warnings.push_back("EM settled into a period-2 limit cycle; stopped");
        break;
      }
    } else {
      cycle_hits = 0;
    }
    prev2 = prev;
    prev = marginal;
  }

  // Final E-step so responsibilities, classifier and coefficients agree.
  run.resp = e_step(gp_probs, choice_ll);
  return run;
}

}  // namespace

FittedGpLccm fit_gp_lccm(const mnl::ChoiceDesign& design, const Eigen::MatrixXd& s, int n_classes,
                         const KernelSpec& kernel, const mnl::ChoiceParams& init,
                         std::uint64_t seed, const GpLccmOptions& options) {
  if (n_classes < 1) throw ConfigError("number of classes must be positive");
  if (s.rows() != design.person_count()) {
    throw ShapeError("membership features and choice design have different person counts");
  }

  Rng root(seed);
  FittedGpLccm best;
  bool have_best = false;
  std::ostringstream failures;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    lccm::RestartDiagnostic diag;
    diag.restart = r;
    try {
      EmRun run = run_em(design, s, n_classes, kernel, init,
                         root.fork(static_cast<std::uint64_t>(r)), options);
      diag.log_likelihood = run.ll;
      diag.converged = run.converged;
      diag.iterations = run.iterations;
      if (!have_best || run.ll > best.log_likelihood) {
        best.n_classes = n_classes;
        best.classifier = run.classifier;
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

GpLccmPrediction gp_lccm_predict(const FittedGpLccm& fit, const Eigen::MatrixXd& s_new,
                                 const mnl::ChoiceDesign& design_new) {
  if (s_new.rows() != design_new.person_count()) {
    throw PredictionError("feature rows and choice persons do not match");
  }
  GpLccmPrediction out;
  out.class_probs = gp::ovr_predict(fit.classifier, s_new);
  Eigen::MatrixXd choice_ll = lccm::choice_loglik_matrix(design_new, fit.choice);
  out.person_loglik.resize(design_new.person_count());
  Eigen::MatrixXd log_prior = safe_log(out.class_probs);
  KahanSum total;
  for (Eigen::Index n = 0; n < out.person_loglik.size(); ++n) {
    out.person_loglik[n] = log_sum_exp((log_prior.row(n) + choice_ll.row(n)).transpose());
    total.add(out.person_loglik[n]);
  }
  out.total_loglik = total.value();
  return out;
}

Eigen::VectorXd mixture_choice_probabilities(const FittedGpLccm& fit,
                                             const Eigen::VectorXd& class_probs,
                                             const mnl::ScenarioDesign& scenario) {
  if (class_probs.size() != fit.n_classes) {
    throw ShapeError("class probability vector does not match the number of classes");
  }
  Eigen::VectorXd p = Eigen::VectorXd::Zero(scenario.design.rows());
  for (int k = 0; k < fit.n_classes; ++k) {
    p += class_probs[k] *
         mnl::choice_probabilities(scenario, fit.choice[static_cast<std::size_t>(k)].beta);
  }
  return p;
}

}  // namespace gplccm::gpl
