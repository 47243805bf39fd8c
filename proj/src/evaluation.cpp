#include "gplccm/evaluation.hpp"

#include <cmath>
#include <sstream>

#include "gplccm/errors.hpp"
#include "gplccm/numerics.hpp"
#include "gplccm/rng.hpp"

namespace gplccm::eval {

double aic(double loglik, int n_parameters) { return 2.0 * n_parameters - 2.0 * loglik; }

double bic(double loglik, int n_parameters, int n_observations) {
  if (n_observations < 1) throw EstimationError("BIC needs a positive observation count");
  return n_parameters * std::log(static_cast<double>(n_observations)) - 2.0 * loglik;
}

int count_parameters(const mnl::ChoiceParams& params) { return params.free_count(); }

int count_parameters(const lccm::FittedLccm& fit) {
  int n = static_cast<int>(fit.membership.gamma.size());
  for (const auto& beta : fit.choice) n += beta.free_count();
  return n;
}

int count_parameters(const gpl::FittedGpLccm& fit) {
  int n = 0;
  for (const auto& beta : fit.choice) n += beta.free_count();
  for (const auto& spec : fit.classifier.specs) n += spec.counted_hyperparameters();
  return n;
}

namespace {

FitReport base_report(const mnl::ChoiceDesign& design, const std::string& model, int n_classes,
                      int n_parameters, double loglik) {
  FitReport r;
  r.model = model;
  r.n_classes = n_classes;
  r.n_persons = design.person_count();
  r.n_scenarios = design.scenario_count();
  r.n_parameters = n_parameters;
  r.log_likelihood = loglik;
  r.aic = aic(loglik, n_parameters);
  r.bic = bic(loglik, n_parameters, r.n_scenarios);
  return r;
}

}  // namespace

FitReport make_report(const mnl::ChoiceDesign& design, const mnl::ChoiceParams& params,
                      double loglik) {
  FitReport r = base_report(design, "mnl", 1, count_parameters(params), loglik);
  r.converged = true;
  r.iterations = 0;
  return r;
}

FitReport make_report(const mnl::ChoiceDesign& design, const lccm::FittedLccm& fit) {
  FitReport r =
      base_report(design, "lccm", fit.n_classes, count_parameters(fit), fit.log_likelihood);
  r.converged = fit.converged;
  r.iterations = fit.iterations;
  r.warnings = fit.warnings;
  return r;
}

FitReport make_report(const mnl::ChoiceDesign& design, const gpl::FittedGpLccm& fit) {
  FitReport r =
      base_report(design, "gp-lccm", fit.n_classes, count_parameters(fit), fit.log_likelihood);
  r.converged = fit.converged;
  r.iterations = fit.iterations;
  r.warnings = fit.warnings;
  return r;
}

std::string render_report(const FitReport& report) {
  std::ostringstream os;
  os.precision(10);
  os << "model=" << report.model << "\n"
     << "classes=" << report.n_classes << "\n"
     << "persons=" << report.n_persons << "\n"
     << "scenarios=" << report.n_scenarios << "\n"
     << "parameters=" << report.n_parameters << "\n"
     << "log_likelihood=" << report.log_likelihood << "\n"
     << "aic=" << report.aic << "\n"
     << "bic=" << report.bic << "\n"
     << "converged=" << (report.converged ? "true" : "false") << "\n"
     << "iterations=" << report.iterations << "\n";
  for (const auto& w : report.warnings) os << "warning=" << w << "\n";
  return os.str();
}

double value_of_time(double beta_time, double beta_cost, double unit_factor) {
  if (std::abs(beta_cost) < 1e-10 * std::max(1.0, std::abs(beta_time))) {
    throw EstimationError("value of time is undefined: the cost coefficient is zero");
  }
  return beta_time / beta_cost * unit_factor;
}

CvResult kfold_cv(const mnl::ChoiceDesign& design, const Eigen::MatrixXd& features,
                  const CvModelSpec& spec, int folds, std::uint64_t seed) {
  const int n = design.person_count();
  if (features.rows() != n) {
    throw ShapeError("feature rows do not match the number of persons");
  }
  if (folds < 2) throw ConfigError("cross-validation needs at least two folds");
  if (folds > n) {
    std::ostringstream os;
    os << "cannot split " << n << " persons into " << folds << " folds";
    throw ConfigError(os.str());
  }

  Rng rng(seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i % folds;
  }

  CvResult out;
  out.folds = folds;
  out.fold_loglik.resize(folds);
  out.fold_persons.resize(folds);

  for (int f = 0; f < folds; ++f) {
    mnl::ChoiceDesign train, test;
    train.column_labels = design.column_labels;
    test.column_labels = design.column_labels;
    std::vector<int> train_rows, test_rows;
    for (int i = 0; i < n; ++i) {
      if (fold_of[static_cast<std::size_t>(i)] == f) {
        test.persons.push_back(design.persons[static_cast<std::size_t>(i)]);
        test_rows.push_back(i);
      } else {
        train.persons.push_back(design.persons[static_cast<std::size_t>(i)]);
        train_rows.push_back(i);
      }
    }

    Eigen::MatrixXd train_s(train_rows.size(), features.cols());
    Eigen::MatrixXd test_s(test_rows.size(), features.cols());
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
      train_s.row(static_cast<Eigen::Index>(i)) = features.row(train_rows[i]);
    }
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
      test_s.row(static_cast<Eigen::Index>(i)) = features.row(test_rows[i]);
    }

    // Standardization is part of the model: refit on the training fold and
    // replay it on the held-out fold.
    for (int c : spec.standardize_columns) {
      if (c < 0 || c >= features.cols()) throw ShapeError("standardize column out of range");
      double mean = train_s.col(c).mean();
      double sd = std::sqrt((train_s.col(c).array() - mean).square().sum() /
                            static_cast<double>(train_s.rows()));
      if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
        throw DataError("feature column is degenerate inside a training fold");
      }
      train_s.col(c) = (train_s.col(c).array() - mean) / sd;
      test_s.col(c) = (test_s.col(c).array() - mean) / sd;
    }

    std::uint64_t fit_seed = rng.fork(static_cast<std::uint64_t>(f) + 11).seed();
    double heldout = 0.0;
    switch (spec.family) {
      case ModelFamily::Mnl: {
        Eigen::VectorXd ones = Eigen::VectorXd::Ones(train.person_count());
        mnl::ChoiceParams fitted = mnl::maximize_weighted(train, ones, spec.init);
        heldout = mnl::per_person_loglik(test, fitted.beta).sum();
        break;
      }
      case ModelFamily::Lccm: {
        lccm::FittedLccm fitted =
            lccm::fit_lccm(train, train_s, spec.n_classes, spec.init, fit_seed, spec.lccm);
        heldout =
            lccm::person_mixture_loglik(test, test_s, fitted.membership, fitted.choice).sum();
        break;
      }
      case ModelFamily::GpLccm: {
        gpl::FittedGpLccm fitted = gpl::fit_gp_lccm(train, train_s, spec.n_classes, spec.kernel,
                                                    spec.init, fit_seed, spec.gp);
        heldout = gpl::gp_lccm_predict(fitted, test_s, test).total_loglik;
        break;
      }
    }
    out.fold_loglik[f] = heldout;
    out.fold_persons[f] = static_cast<int>(test_rows.size());
  }

  out.total_loglik = out.fold_loglik.sum();
  out.mean_fold_loglik = out.fold_loglik.mean();
  out.per_person_loglik = out.total_loglik / static_cast<double>(n);
  return out;
}

}  // namespace gplccm::eval
