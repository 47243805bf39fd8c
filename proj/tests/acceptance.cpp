// Acceptance harness: one PASS/FAIL line per published-result criterion.
// Exit status is nonzero when any gating criterion fails. The held-out data
// diagnostic is non-gating and reports SKIP when the raw file is absent.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gplccm/csv.hpp"
#include "gplccm/data_model.hpp"
#include "gplccm/design.hpp"
#include "gplccm/errors.hpp"
#include "gplccm/evaluation.hpp"
#include "gplccm/gp_laplace.hpp"
#include "gplccm/gp_lccm.hpp"
#include "gplccm/kernels.hpp"
#include "gplccm/lccm_baseline.hpp"
#include "gplccm/mnl.hpp"
#include "gplccm/model_io.hpp"
#include "gplccm/numerics.hpp"
#include "gplccm/rng.hpp"
#include "gplccm/simulate.hpp"
#include "support.hpp"

using namespace gplccm;

namespace {

struct Outcome {
  enum Status { Pass, Fail, Skip } status = Pass;
  std::string detail;
};

Outcome pass(const std::string& detail) { return {Outcome::Pass, detail}; }
Outcome fail(const std::string& detail) { return {Outcome::Fail, detail}; }
Outcome skip(const std::string& detail) { return {Outcome::Skip, detail}; }

Eigen::MatrixXd random_inputs(Rng& rng, int n, int d) {
  Eigen::MatrixXd s(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) s(i, j) = rng.normal();
  return s;
}

// ---------------------------------------------------------------------------
// Published-table reproduction

struct TableRow {
  int m;
  double ll, aic, bic;
  int d;  // choice scenarios entering the BIC
};

Outcome check_aic_bic_tables() {
  const std::vector<TableRow> rows = {
      // count-frequency study, 2600 scenarios
      {47, -4910.92, 9915.84, 10191.41, 2600},
      {61, -4911.08, 9944.16, 10301.82, 2600},
      {44, -4877.73, 9843.46, 10101.44, 2600},
      {80, -4893.29, 9946.58, 10415.64, 2600},
      {72, -4691.25, 9526.50, 9948.66, 2600},
      // rail survey, latent class logit, 8550 training scenarios
      {23, -5930.76, 11907.52, 12069.75, 8550},
      {42, -5202.71, 10489.41, 10785.67, 8550},
      {61, -4870.51, 9863.02, 10293.29, 8550},
      {80, -4687.99, 9535.99, 10100.28, 8550},
      // rail survey, GP membership
      {10, -5916.43, 11852.86, 11923.39, 8550},
      {18, -5176.06, 10388.11, 10515.08, 8550},
      {24, -4878.84, 9805.68, 9974.97, 8550},
      {30, -4825.55, 9711.11, 9922.72, 8550},
      {36, -4742.13, 9556.26, 9810.19, 8550},
      {42, -4649.20, 9382.39, 9678.65, 8550},
  };
  double worst = 0.0;
  for (const auto& row : rows) {
    double da = std::abs(eval::aic(row.ll, row.m) - row.aic);
    double db = std::abs(eval::bic(row.ll, row.m, row.d) - row.bic);
    worst = std::max(worst, std::max(da, db));
    if (da > 0.05 || db > 0.05) {
      std::ostringstream os;
      os << "row (M=" << row.m << ", LL=" << row.ll << ") off by aic " << da << " bic " << db;
      return fail(os.str());
    }
  }
  std::ostringstream os;
  os << rows.size() << " rows within 0.05 (worst " << worst << ")";
  return pass(os.str());
}

Outcome check_parameter_counting() {
  // rail survey choice block: generic time/cost + two constants = 4 per class
  std::vector<int> got, want = {10, 18, 24, 30, 36, 42};
  for (int k = 2; k <= 7; ++k) {
    gpl::FittedGpLccm fit;
    fit.n_classes = k;
    fit.choice.assign(static_cast<std::size_t>(k), mnl::ChoiceParams::zeros(4));
    int classifiers = k == 2 ? 1 : k;
    fit.classifier.n_classes = k;
    fit.classifier.specs.assign(static_cast<std::size_t>(classifiers),
                                KernelSpec::matern(1.5, 1.0, Eigen::VectorXd::Ones(1)));
    fit.classifier.states.resize(static_cast<std::size_t>(classifiers));
    got.push_back(eval::count_parameters(fit));
  }
  if (got != want) {
    std::ostringstream os;
    os << "GP membership counts K=2..7 got {";
    for (int v : got) os << v << " ";
    os << "}";
    return fail(os.str());
  }

  // count-frequency study: 21 free utility coefficients per class
  gpl::FittedGpLccm aub;
  aub.n_classes = 2;
  aub.choice.assign(2, mnl::ChoiceParams::zeros(21));
  aub.classifier.n_classes = 2;
  aub.classifier.specs = {KernelSpec::matern(1.5, 1.0, Eigen::VectorXd::Ones(1))};
  aub.classifier.states.resize(1);
  if (eval::count_parameters(aub) != 44) {
    return fail("count study GP K=2 expected 44, got " +
                std::to_string(eval::count_parameters(aub)));
  }

  // latent class logit baselines: membership rows of 1 + 14 dummies
  std::vector<int> lccm_want = {23, 42, 61, 80};
  for (int k = 2; k <= 5; ++k) {
    lccm::FittedLccm fit;
    fit.n_classes = k;
    fit.membership.gamma = Eigen::MatrixXd::Zero(k - 1, 15);
    fit.choice.assign(static_cast<std::size_t>(k), mnl::ChoiceParams::zeros(4));
    if (eval::count_parameters(fit) != lccm_want[static_cast<std::size_t>(k - 2)]) {
      return fail("latent class logit K=" + std::to_string(k) + " expected " +
                  std::to_string(lccm_want[static_cast<std::size_t>(k - 2)]) + ", got " +
                  std::to_string(eval::count_parameters(fit)));
    }
  }
  lccm::FittedLccm aub_lccm;
  aub_lccm.n_classes = 2;
  aub_lccm.membership.gamma = Eigen::MatrixXd::Zero(1, 5);
  aub_lccm.choice.assign(2, mnl::ChoiceParams::zeros(21));
  if (eval::count_parameters(aub_lccm) != 47) {
    return fail("count study latent class logit K=2 expected 47, got " +
                std::to_string(eval::count_parameters(aub_lccm)));
  }
  return pass("all published parameter counts reproduced exactly");
}

Outcome check_vot() {
  struct Entry {
    double beta_time, beta_cost, printed;
  };
  // time/cost coefficient pairs with their printed $/hr figures; the
  // conversion from (utils/min)/(utils/$ of a 1.5-unit fare step) is 1/1.5
  const std::vector<Entry> entries = {
      {-0.409, -0.0446, 6.11}, {-0.372, -0.101, 2.44}, {-0.252, -0.0400, 4.20},
      {-0.658, -0.0456, 9.61}, {-0.646, -0.109, 3.96},  {-0.387, -0.0998, 2.59},
      {-0.409, -0.0442, 6.16}, {-0.372, -0.101, 2.45},  {-0.252, -0.0401, 4.19},
      {-0.653, -0.0462, 9.42}, {-0.641, -0.110, 3.90},  {-0.384, -0.0993, 2.58},
      {-0.420, -0.0425, 6.59}, {-0.380, -0.105, 2.42},  {-0.255, -0.0399, 4.26},
  };
  int hits = 0;
  double worst = 0.0;
  for (const auto& e : entries) {
    double vot = eval::value_of_time(e.beta_time, e.beta_cost, 1.0 / 1.5);
    double err = std::abs(vot - e.printed);
    worst = std::max(worst, err);
    if (err <= 0.03) ++hits;
  }
  std::ostringstream os;
  os << hits << "/15 printed figures within 0.03 (worst " << worst << ", need >= 9)";
  return hits >= 9 ? pass(os.str()) : fail(os.str());
}

Outcome check_enumeration() {
  CountChoiceSet main_case = enumerate_count_alternatives(3, 5);
  if (main_case.alternative_count() != 21) {
    return fail("3 modes x 5 trips expected 21 alternatives, got " +
                std::to_string(main_case.alternative_count()));
  }
  std::set<std::vector<int>> seen;
  for (const auto& t : main_case.tuples) {
    int total = 0;
    for (int v : t) total += v;
    if (total != 5) return fail("tuple does not sum to the trip total");
    seen.insert(t);
  }
  if (seen.size() != 21) return fail("duplicate tuples in the enumeration");

  // brute-force oracle over digit grids
  for (int m = 1; m <= 4; ++m) {
    for (int t = 0; t <= 6; ++t) {
      int count = 0;
      int limit = 1;
      for (int i = 0; i < m; ++i) limit *= (t + 1);
      for (int code = 0; code < limit; ++code) {
        int c = code, total = 0;
        for (int i = 0; i < m; ++i) {
          total += c % (t + 1);
          c /= (t + 1);
        }
        if (total == t) ++count;
      }
      int got = enumerate_count_alternatives(m, t).alternative_count();
      if (got != count) {
        std::ostringstream os;
        os << "(" << m << " modes, " << t << " trips) expected " << count << ", got " << got;
        return fail(os.str());
      }
    }
  }
  return pass("21 alternatives for (3, 5); brute-force agreement for all m <= 4, t <= 6");
}

// ---------------------------------------------------------------------------
// Laplace predictive fidelity against dense quadrature

double exact_predictive(const KernelSpec& kernel, const Eigen::MatrixXd& s,
                        const std::vector<int>& labels, double train_jitter,
                        const Eigen::VectorXd& query, int nodes_per_dim) {
  const int n = static_cast<int>(labels.size());
  Eigen::MatrixXd joint(n + 1, n + 1);
  joint.topLeftCorner(n, n) = kernel_matrix(kernel, s, train_jitter);
  for (int i = 0; i < n; ++i) {
    double kx = kernel_eval(kernel, s.row(i).transpose(), query);
    joint(i, n) = kx;
    joint(n, i) = kx;
  }
  joint(n, n) = kernel_eval(kernel, query, query) + 1e-10;

  Eigen::LLT<Eigen::MatrixXd> llt(joint);
  if (llt.info() != Eigen::Success) {
    joint.diagonal().array() += 1e-8;
    llt.compute(joint);
  }
  Eigen::MatrixXd l = llt.matrixL();
  auto [nodes, weights] = gauss_hermite(nodes_per_dim);

  const int dims = n + 1;
  std::vector<int> idx(static_cast<std::size_t>(dims), 0);
  KahanSum numerator, denominator;
  while (true) {
    Eigen::VectorXd z(dims);
    double w = 1.0;
    for (int i = 0; i < dims; ++i) {
      z[i] = std::sqrt(2.0) * nodes[idx[static_cast<std::size_t>(i)]];
      w *= weights[idx[static_cast<std::size_t>(i)]];
    }
    Eigen::VectorXd f = l * z;
    double lik = 1.0;
    for (int i = 0; i < n; ++i) {
      double sign = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
      lik *= sigmoid(sign * f[i]);
    }
    denominator.add(w * lik);
    numerator.add(w * lik * sigmoid(f[n]));
    int k = 0;
    while (k < dims) {
      if (++idx[static_cast<std::size_t>(k)] < nodes_per_dim) break;
      idx[static_cast<std::size_t>(k)] = 0;
      ++k;
    }
    if (k == dims) break;
  }
  return numerator.value() / denominator.value();
}

Outcome check_laplace_fidelity() {
  Rng rng(20240801);
  double worst = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 25; ++trial) {
    int n = 1 + rng.index(6);  // 1..6 training points
    Eigen::MatrixXd s = random_inputs(rng, n, 1);
    double variance = 0.5 + 1.5 * rng.uniform();
    double ell = 0.5 + 1.5 * rng.uniform();
    KernelSpec kernel = trial % 2 == 0
                            ? KernelSpec::squared_exponential(variance, Eigen::VectorXd::Ones(1) * ell)
                            : KernelSpec::matern(2.5, variance, Eigen::VectorXd::Ones(1) * ell);
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) labels.push_back(rng.uniform() < 0.5 ? 0 : 1);

    gp::LaplaceState state = gp::laplace_fit(kernel, s, labels);

    int nodes = n <= 2 ? 12 : (n == 3 ? 10 : (n == 4 ? 8 : 7));
    int queries = n <= 4 ? 3 : 2;
    for (int q = 0; q < queries; ++q) {
      Eigen::VectorXd query(1);
      query << rng.normal() * 1.5;
      double approx = gp::laplace_predict(state, kernel, query);
      double exact = exact_predictive(kernel, s, labels, state.jitter, query, nodes);
      double err = std::abs(approx - exact);
      worst = std::max(worst, err);
      ++checked;
      if (err >= 0.02) {
        std::ostringstream os;
        os << "case " << trial << " (n=" << n << "): |approx - exact| = " << err;
        return fail(os.str());
      }
    }
  }
  std::ostringstream os;
  os << checked << " predictive probabilities within 0.02 of dense quadrature (worst " << worst
     << ")";
  return pass(os.str());
}

// ---------------------------------------------------------------------------
// Gradient suites

Outcome check_kernel_gradients() {
  Rng rng(555);
  auto make_variant = [&](int variant, int d) -> KernelSpec {
    Eigen::VectorXd iso = Eigen::VectorXd::Ones(1) * (0.5 + rng.uniform());
    Eigen::VectorXd ard(d);
    for (int i = 0; i < d; ++i) ard[i] = 0.5 + rng.uniform();
    double v = 0.5 + rng.uniform();
    switch (variant) {
      case 0: return KernelSpec::squared_exponential(v, iso);
      case 1: return KernelSpec::squared_exponential(v, ard);
      case 2: return KernelSpec::matern(1.5, v, ard);
      case 3: return KernelSpec::matern(2.5, v, ard);
      case 4: return KernelSpec::constant(v);
      case 5:
        return KernelSpec::sum(KernelSpec::matern(2.5, v, ard), KernelSpec::constant(0.2 + rng.uniform()));
      default:
        return KernelSpec::product(KernelSpec::squared_exponential(v, ard),
                                   KernelSpec::matern(1.5, 0.5 + rng.uniform(), ard));
    }
  };
  double worst = 0.0;
  for (int variant = 0; variant < 7; ++variant) {
    for (int rep = 0; rep < 50; ++rep) {
      int d = 1 + rng.index(3);
      KernelSpec spec = make_variant(variant, d);
      Eigen::MatrixXd s = random_inputs(rng, 5, d);
      PackedHyperparameters packed = pack_hyperparameters(spec);
      std::vector<Eigen::MatrixXd> grads = kernel_gradients(spec, s);
      const double h = 1e-6;
      for (Eigen::Index p = 0; p < packed.log_values.size(); ++p) {
        Eigen::VectorXd hi = packed.log_values, lo = packed.log_values;
        hi[p] += h;
        lo[p] -= h;
        Eigen::MatrixXd fd = (kernel_matrix(unpack_hyperparameters(spec, hi), s) -
                              kernel_matrix(unpack_hyperparameters(spec, lo), s)) /
                             (2.0 * h);
        double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
        double err = (grads[static_cast<std::size_t>(p)] - fd).cwiseAbs().maxCoeff() / scale;
        worst = std::max(worst, err);
        if (err >= 1e-5) {
          std::ostringstream os;
          os << "variant " << variant << " rep " << rep << " param "
             << packed.names[static_cast<std::size_t>(p)] << ": rel err " << err;
          return fail(os.str());
        }
      }
    }
  }
  std::ostringstream os;
  os << "350 random cases across 7 kernel variants, worst rel err " << worst;
  return pass(os.str());
}

Outcome check_lml_gradients() {
  Rng rng(777);
  double worst = 0.0;
  for (int rep = 0; rep < 25; ++rep) {
    int n = 3 + rng.index(6);
    int d = 1 + rng.index(2);
    Eigen::MatrixXd s = random_inputs(rng, n, d);
    std::vector<int> labels;
    bool has0 = false, has1 = false;
    for (int i = 0; i < n; ++i) {
      int y = rng.uniform() < 0.5 ? 0 : 1;
      labels.push_back(y);
      (y == 0 ? has0 : has1) = true;
    }
    if (!has0) labels[0] = 0;
    if (!has1) labels.back() = 1;

    Eigen::VectorXd ard(d);
    for (int i = 0; i < d; ++i) ard[i] = 0.6 + rng.uniform();
    double v = 0.6 + rng.uniform();
    KernelSpec spec;
    switch (rep % 4) {
      case 0: spec = KernelSpec::squared_exponential(v, ard); break;
      case 1: spec = KernelSpec::matern(1.5, v, ard); break;
      case 2: spec = KernelSpec::matern(2.5, v, ard); break;
      default:
        spec = KernelSpec::sum(KernelSpec::squared_exponential(v, ard), KernelSpec::constant(0.4));
    }

    PackedHyperparameters packed = pack_hyperparameters(spec);
    auto [value, grad] = gp::log_marginal_gradient(spec, s, labels);
    (void)value;
    auto scalar = [&](const Eigen::VectorXd& lv) {
      return gp::log_marginal_gradient(unpack_hyperparameters(spec, lv), s, labels).first;
    };
    Eigen::VectorXd fd = testsupport::central_difference(scalar, packed.log_values, 1e-5);
    double err = testsupport::rel_error(grad, fd);
    worst = std::max(worst, err);
    if (err >= 1e-4) {
      std::ostringstream os;
      os << "case " << rep << " (" << spec.to_expression() << "): rel err " << err;
      return fail(os.str());
    }
  }
  std::ostringstream os;
  os << "25 random cases, worst rel err " << worst;
  return pass(os.str());
}

Outcome check_mnl_gradients() {
  Rng rng(999);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    int persons = 5 + rng.index(16);
    int scenarios = 1 + rng.index(4);
    int alts = 2 + rng.index(3);
    int dim = 2 + rng.index(3);
    Eigen::VectorXd beta_true(dim);
    for (int i = 0; i < dim; ++i) beta_true[i] = rng.normal();
    mnl::ChoiceDesign d = testsupport::random_design(rng, persons, scenarios, alts, beta_true);
    Eigen::VectorXd w(persons);
    for (int i = 0; i < persons; ++i) w[i] = rng.uniform() < 0.1 ? 0.0 : 0.2 + rng.uniform();
    Eigen::VectorXd at(dim);
    for (int i = 0; i < dim; ++i) at[i] = 0.7 * rng.normal();

    auto [value, grad] = mnl::weighted_loglik_and_gradient(d, at, w);
    (void)value;
    auto scalar = [&](const Eigen::VectorXd& b) {
      return mnl::weighted_loglik_and_gradient(d, b, w).first;
    };
    Eigen::VectorXd fd = testsupport::central_difference(scalar, at, 1e-6);
    double err = testsupport::rel_error(grad, fd);
    worst = std::max(worst, err);
    if (err >= 1e-5) {
      std::ostringstream os;
      os << "case " << rep << ": rel err " << err;
      return fail(os.str());
    }
  }
  std::ostringstream os;
  os << "50 random cases, worst rel err " << worst;
  return pass(os.str());
}

// ---------------------------------------------------------------------------
// Degenerate equivalences and EM behavior

mnl::ChoiceDesign equivalence_panel(Eigen::MatrixXd* features) {
  Rng rng(31415);
  Eigen::VectorXd beta(2);
  beta << 0.9, -0.7;
  mnl::ChoiceDesign d = testsupport::random_design(rng, 80, 3, 3, beta);
  features->resize(80, 2);
  for (int i = 0; i < 80; ++i) {
    (*features)(i, 0) = rng.normal();
    (*features)(i, 1) = rng.normal();
  }
  return d;
}

Outcome check_degenerate_equivalences() {
  Eigen::MatrixXd features;
  mnl::ChoiceDesign d = equivalence_panel(&features);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(80);

  mnl::ChoiceParams direct = mnl::maximize_weighted(d, ones, mnl::ChoiceParams::zeros(2));
  double ll_direct = mnl::per_person_loglik(d, direct.beta).sum();

  auto ll = [&](const Eigen::VectorXd& b) {
    return mnl::weighted_loglik_and_gradient(d, b, ones).first;
  };
  Eigen::VectorXd oracle = testsupport::nelder_mead_max(ll, Eigen::VectorXd::Zero(2));
  if ((direct.beta - oracle).cwiseAbs().maxCoeff() >= 1e-4) {
    return fail("direct fit and simplex oracle disagree in parameters");
  }

  lccm::LccmOptions lopts;
  lopts.restarts = 1;
  lccm::FittedLccm k1 = lccm::fit_lccm(d, features, 1, mnl::ChoiceParams::zeros(2), 3, lopts);
  gpl::GpLccmOptions gopts;
  gopts.restarts = 1;
  gpl::FittedGpLccm g1 = gpl::fit_gp_lccm(d, features, 1,
                                          KernelSpec::matern(2.5, 1.0, Eigen::VectorXd::Ones(2)),
                                          mnl::ChoiceParams::zeros(2), 3, gopts);

  double lccm_ll_gap = std::abs(k1.log_likelihood - ll_direct);
  double gp_ll_gap = std::abs(g1.log_likelihood - ll_direct);
  double lccm_par_gap = (k1.choice[0].beta - oracle).cwiseAbs().maxCoeff();
  double gp_par_gap = (g1.choice[0].beta - oracle).cwiseAbs().maxCoeff();
  std::ostringstream os;
  os << "LL gaps: latent-class " << lccm_ll_gap << ", GP pipeline " << gp_ll_gap
     << "; param gaps vs oracle: " << lccm_par_gap << ", " << gp_par_gap;
  if (lccm_ll_gap >= 1e-8 || gp_ll_gap >= 1e-8) return fail(os.str());
  if (lccm_par_gap >= 1e-4 || gp_par_gap >= 1e-4) return fail(os.str());
  return pass(os.str());
}

struct MixturePanel {
  mnl::ChoiceDesign design;
  Eigen::MatrixXd features;
};

MixturePanel two_regime_panel(std::uint64_t seed, int persons, int scenarios) {
  MixturePanel out;
  Rng rng(seed);
  out.features.resize(persons, 2);
  out.design.column_labels = {"x1", "x2"};
  Eigen::VectorXd b0(2), b1(2);
  b0 << 1.4, -0.5;
  b1 << -1.2, 0.8;
  for (int n = 0; n < persons; ++n) {
    out.features(n, 0) = rng.normal();
    out.features(n, 1) = rng.normal();
    const Eigen::VectorXd& b = out.features(n, 0) > 0 ? b1 : b0;
    mnl::PersonDesign pd;
    for (int t = 0; t < scenarios; ++t) {
      mnl::ScenarioDesign sd;
      sd.design.resize(3, 2);
      for (int j = 0; j < 3; ++j)
        for (int c = 0; c < 2; ++c) sd.design(j, c) = rng.normal();
      sd.available = {1, 1, 1};
      Eigen::VectorXd u = sd.design * b;
      Eigen::VectorXd p = (u.array() - u.maxCoeff()).exp();
      p /= p.sum();
      double r = rng.uniform();
      double acc = 0.0;
      sd.chosen = 2;
      for (int j = 0; j < 3; ++j) {
        acc += p[j];
        if (r < acc) {
          sd.chosen = j;
          break;
        }
      }
      pd.scenarios.push_back(std::move(sd));
    }
    out.design.persons.push_back(std::move(pd));
  }
  return out;
}

Outcome check_baseline_monotonicity() {
  double worst_drop = 0.0;
  for (int fixture = 0; fixture < 10; ++fixture) {
    MixturePanel panel = two_regime_panel(9000 + static_cast<std::uint64_t>(fixture) * 17, 60, 4);
    lccm::LccmOptions options;
    options.restarts = 1;
    options.max_iterations = 120;
    lccm::FittedLccm fit = lccm::fit_lccm(panel.design, panel.features, 2,
                                          mnl::ChoiceParams::zeros(2),
                                          100 + static_cast<std::uint64_t>(fixture), options);
    for (std::size_t i = 1; i < fit.trace.size(); ++i) {
      double drop = fit.trace[i - 1] - fit.trace[i];
      worst_drop = std::max(worst_drop, drop);
      if (drop > 1e-9) {
        std::ostringstream os;
        os << "fixture " << fixture << " iteration " << i << ": marginal LL fell by " << drop;
        return fail(os.str());
      }
    }
  }
  std::ostringstream os;
  os << "10 fixtures, worst per-iteration drop " << worst_drop << " (tolerance 1e-9)";
  return pass(os.str());
}

Outcome check_gp_mstep_monotonicity() {
  // Replicates the EM loop with library pieces, asserting the per-class
  // weighted choice objective never decreases across its own M-step.
  MixturePanel panel = two_regime_panel(123456, 60, 4);
  const int n = 60, k = 2;
  Rng rng(42);

  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = rng.index(k);
  // ensure both classes are present
  labels[0] = 0;
  labels[1] = 1;

  std::vector<mnl::ChoiceParams> betas(2, mnl::ChoiceParams::zeros(2));
  gp::OvrFitOptions ovr_options;
  ovr_options.optimize_hyperparameters = false;
  std::vector<KernelSpec> specs(1, KernelSpec::matern(2.5, 1.0, Eigen::VectorXd::Ones(2)));
  double worst_drop = 0.0;
  Eigen::MatrixXd resp;
  for (int iter = 0; iter < 5; ++iter) {
    Rng gp_rng = rng.fork(static_cast<std::uint64_t>(iter));
    gp::OvrClassifier clf = gp::ovr_fit(panel.features, labels, k, specs, ovr_options, gp_rng);
    Eigen::MatrixXd gp_probs = gp::ovr_predict(clf, panel.features);
    Eigen::MatrixXd loglik = lccm::choice_loglik_matrix(panel.design, betas);
    resp = gpl::e_step(gp_probs, loglik);

    for (int c = 0; c < k; ++c) {
      Eigen::VectorXd w = resp.col(c);
      double before = mnl::weighted_loglik_and_gradient(panel.design, betas[static_cast<std::size_t>(c)].beta, w).first;
      mnl::ChoiceParams updated =
          mnl::maximize_weighted(panel.design, w, betas[static_cast<std::size_t>(c)]);
      double after = mnl::weighted_loglik_and_gradient(panel.design, updated.beta, w).first;
      double drop = before - after;
      worst_drop = std::max(worst_drop, drop);
      if (drop > 1e-9) {
        std::ostringstream os;
        os << "iteration " << iter << " class " << c << ": M-step objective fell by " << drop;
        return fail(os.str());
      }
      betas[static_cast<std::size_t>(c)] = updated;
    }
    labels = gpl::hard_assign(resp);
    bool has0 = false, has1 = false;
    for (int v : labels) (v == 0 ? has0 : has1) = true;
    if (!has0) labels[0] = 0;
    if (!has1) labels[0] = 1;
  }
  std::ostringstream os;
  os << "5 replicated EM iterations, worst M-step drop " << worst_drop;
  return pass(os.str());
}

// ---------------------------------------------------------------------------
// Synthetic recovery and predictive comparison

Outcome check_synthetic_recovery() {
  auto t0 = std::chrono::steady_clock::now();

  sim::SimulateConfig config;
  config.n_persons = 500;
  config.n_scenarios = 4;
  config.n_alternatives = 3;
  config.n_features = 2;
  config.betas.resize(2);
  config.betas[0] = Eigen::VectorXd(2);
  config.betas[0] << 1.0, -0.5;
  config.betas[1] = Eigen::VectorXd(2);
  config.betas[1] << -0.8, 0.75;
  config.membership_rule = "nonlinear";
  sim::SimulatedData data = sim::generate(config, 7321);

  UtilitySpec util;
  util.generic_attributes = {"attr_1", "attr_2"};
  BuiltDesign built = build_choice_design(data.panel, util);

  gpl::GpLccmOptions options;
  options.restarts = 5;
  options.initial_hyper.restarts = 1;
  options.initial_hyper.optimizer.max_iterations = 25;
  options.refit_hyper.optimizer.max_iterations = 5;
  KernelSpec kernel = KernelSpec::matern(2.5, 1.0, Eigen::VectorXd::Ones(1));
  gpl::FittedGpLccm fit = gpl::fit_gp_lccm(built.design, data.features.matrix, 2, kernel,
                                           built.init, 2024, options);

  // match classes up to relabeling
  double straight = (fit.choice[0].beta - config.betas[0]).cwiseAbs().maxCoeff();
  straight = std::max(straight, (fit.choice[1].beta - config.betas[1]).cwiseAbs().maxCoeff());
  double swapped = (fit.choice[0].beta - config.betas[1]).cwiseAbs().maxCoeff();
  swapped = std::max(swapped, (fit.choice[1].beta - config.betas[0]).cwiseAbs().maxCoeff());
  double beta_gap = std::min(straight, swapped);

  if (beta_gap >= 0.15) {
    std::ostringstream os;
    os << "class coefficients off by " << beta_gap << " (tolerance 0.15)";
    return fail(os.str());
  }

  // 5-fold predictive comparison on the same person partition
  eval::CvModelSpec gp_spec;
  gp_spec.family = eval::ModelFamily::GpLccm;
  gp_spec.n_classes = 2;
  gp_spec.kernel = kernel;
  gp_spec.init = built.init;
  gp_spec.gp = options;
  gp_spec.gp.restarts = 1;

  eval::CvModelSpec mnl_spec;
  mnl_spec.family = eval::ModelFamily::Mnl;
  mnl_spec.init = built.init;

  eval::CvModelSpec lccm_spec;
  lccm_spec.family = eval::ModelFamily::Lccm;
  lccm_spec.n_classes = 2;
  lccm_spec.init = built.init;
  lccm_spec.lccm.restarts = 2;

  const std::uint64_t cv_seed = 515;
  eval::CvResult cv_gp = eval::kfold_cv(built.design, data.features.matrix, gp_spec, 5, cv_seed);
  eval::CvResult cv_mnl = eval::kfold_cv(built.design, data.features.matrix, mnl_spec, 5, cv_seed);
  eval::CvResult cv_lccm = eval::kfold_cv(built.design, data.features.matrix, lccm_spec, 5, cv_seed);

  auto t1 = std::chrono::steady_clock::now();
  double seconds = std::chrono::duration<double>(t1 - t0).count();

  std::ostringstream os;
  os << "beta gap " << beta_gap << "; mean fold LL: GP " << cv_gp.mean_fold_loglik << ", plain "
     << cv_mnl.mean_fold_loglik << ", linear mixture " << cv_lccm.mean_fold_loglik << " ("
     << seconds << " s)";
  if (!(cv_gp.mean_fold_loglik > cv_mnl.mean_fold_loglik)) {
    return fail("GP mixture did not beat the one-class model out of sample; " + os.str());
  }
  if (!(cv_gp.mean_fold_loglik > cv_lccm.mean_fold_loglik)) {
    return fail("GP mixture did not beat the linear mixture out of sample; " + os.str());
  }
  if (seconds > 600.0) {
    return fail("runtime budget exceeded; " + os.str());
  }
  return pass(os.str());
}

Outcome check_convergence_contract() {
  MixturePanel panel = two_regime_panel(777777, 80, 4);
  gpl::GpLccmOptions options;
  options.restarts = 2;
  options.max_iterations = 40;
  options.initial_hyper.restarts = 1;
  options.initial_hyper.optimizer.max_iterations = 12;
  options.refit_hyper.optimizer.max_iterations = 4;
  KernelSpec kernel = KernelSpec::matern(2.5, 1.0, Eigen::VectorXd::Ones(2));

  gpl::FittedGpLccm a = gpl::fit_gp_lccm(panel.design, panel.features, 2, kernel,
                                         mnl::ChoiceParams::zeros(2), 99, options);
  if (a.converged) {
    // the settle criterion must actually hold on the trace
    if (a.trace.size() >= 2) {
      double last_step = std::abs(a.trace.back().marginal_loglik -
                                  a.trace[a.trace.size() - 2].marginal_loglik);
      if (last_step >= options.tolerance && a.iterations < options.max_iterations) {
        std::ostringstream os;
        os << "flagged converged but last step was " << last_step;
        return fail(os.str());
      }
    }
  } else {
    bool capped = a.iterations >= options.max_iterations;
    bool warned = !a.warnings.empty();
    if (!capped && !warned) {
      return fail("not converged, not capped, and no warning raised");
    }
  }

  gpl::FittedGpLccm b = gpl::fit_gp_lccm(panel.design, panel.features, 2, kernel,
                                         mnl::ChoiceParams::zeros(2), 99, options);
  if (b.log_likelihood != a.log_likelihood ||
      (b.responsibilities - a.responsibilities).cwiseAbs().maxCoeff() != 0.0) {
    return fail("same seed did not reproduce the fit bit for bit");
  }

  lccm::LccmOptions lopts;
  lopts.restarts = 2;
  lccm::FittedLccm c = lccm::fit_lccm(panel.design, panel.features, 2,
                                      mnl::ChoiceParams::zeros(2), 55, lopts);
  lccm::FittedLccm d = lccm::fit_lccm(panel.design, panel.features, 2,
                                      mnl::ChoiceParams::zeros(2), 55, lopts);
  if (c.log_likelihood != d.log_likelihood) {
    return fail("latent class fit is not reproducible for a fixed seed");
  }
  std::ostringstream os;
  os << "settle-or-cap honored (converged=" << (a.converged ? "true" : "false") << ", "
     << a.iterations << " iterations); same-seed refits bit-identical";
  return pass(os.str());
}

Outcome check_artifact_roundtrip() {
  MixturePanel panel = two_regime_panel(24680, 50, 4);
  gpl::GpLccmOptions options;
  options.restarts = 1;
  options.max_iterations = 25;
  options.initial_hyper.restarts = 1;
  options.initial_hyper.optimizer.max_iterations = 10;
  KernelSpec kernel = KernelSpec::matern(2.5, 1.0, Eigen::VectorXd::Ones(2));
  gpl::FittedGpLccm fit = gpl::fit_gp_lccm(panel.design, panel.features, 2, kernel,
                                           mnl::ChoiceParams::zeros(2), 31, options);

  io::ModelArtifact artifact = io::from_gp_lccm(fit, panel.features);
  artifact.utility_labels = panel.design.column_labels;
  io::save_model("acceptance_model.json", artifact);
  io::ModelArtifact loaded = io::load_model("acceptance_model.json");
  gpl::FittedGpLccm rebuilt = io::to_gp_lccm(loaded);
  gpl::GpLccmPrediction pred = gpl::gp_lccm_predict(rebuilt, panel.features, panel.design);
  double gap = std::abs(pred.total_loglik - fit.log_likelihood);
  std::ostringstream os;
  os << "saved, reloaded, and rescored the training panel; |LL gap| = " << gap;
  return gap <= 1e-6 ? pass(os.str()) : fail(os.str());
}

// ---------------------------------------------------------------------------
// Optional held-out data diagnostic (non-gating)

Outcome check_heldout_diagnostic() {
  const char* path = std::getenv("GPLCCM_SWISSMETRO");
  if (path == nullptr || std::string(path).empty()) {
    return skip("set GPLCCM_SWISSMETRO to the raw survey file to run this diagnostic");
  }

  csv::Table raw = csv::read_file(path, '\t');
  auto col = [&](const std::string& name) { return raw.column_index(name); };
  const int c_id = col("ID"), c_purpose = col("PURPOSE"), c_age = col("AGE");
  const int c_male = col("MALE"), c_income = col("INCOME"), c_first = col("FIRST");
  const int c_luggage = col("LUGGAGE"), c_choice = col("CHOICE"), c_ga = col("GA");
  const int c_train_av = col("TRAIN_AV"), c_sm_av = col("SM_AV"), c_car_av = col("CAR_AV");
  const int c_train_tt = col("TRAIN_TT"), c_train_co = col("TRAIN_CO");
  const int c_sm_tt = col("SM_TT"), c_sm_co = col("SM_CO");
  const int c_car_tt = col("CAR_TT"), c_car_co = col("CAR_CO");

  struct Obs {
    long id;
    int scenario;
    double tt[3], co[3];
    int av[3];
    int chosen;  // 0 train, 1 sm, 2 car
  };
  std::vector<Obs> observations;
  std::map<long, Eigen::VectorXd> person_features;
  std::map<long, int> scenario_counter;

  for (const auto& row : raw.rows) {
    int purpose = std::stoi(row[static_cast<std::size_t>(c_purpose)]);
    int age = std::stoi(row[static_cast<std::size_t>(c_age)]);
    int choice = std::stoi(row[static_cast<std::size_t>(c_choice)]);
    // drop unknown age, unknown choice, and "other" purposes; fold the
    // return-leg purposes onto their outbound counterparts
    if (age == 6 || choice == 0 || purpose == 9) continue;
    int folded = purpose > 4 ? purpose - 4 : purpose;

    Obs o;
    o.id = std::stol(row[static_cast<std::size_t>(c_id)]);
    o.scenario = ++scenario_counter[o.id];
    int ga = std::stoi(row[static_cast<std::size_t>(c_ga)]);
    o.tt[0] = std::stod(row[static_cast<std::size_t>(c_train_tt)]) / 100.0;
    o.tt[1] = std::stod(row[static_cast<std::size_t>(c_sm_tt)]) / 100.0;
    o.tt[2] = std::stod(row[static_cast<std::size_t>(c_car_tt)]) / 100.0;
    o.co[0] = std::stod(row[static_cast<std::size_t>(c_train_co)]) * (ga == 0 ? 1.0 : 0.0) / 100.0;
    o.co[1] = std::stod(row[static_cast<std::size_t>(c_sm_co)]) * (ga == 0 ? 1.0 : 0.0) / 100.0;
    o.co[2] = std::stod(row[static_cast<std::size_t>(c_car_co)]) / 100.0;
    o.av[0] = std::stoi(row[static_cast<std::size_t>(c_train_av)]);
    o.av[1] = std::stoi(row[static_cast<std::size_t>(c_sm_av)]);
    o.av[2] = std::stoi(row[static_cast<std::size_t>(c_car_av)]);
    o.chosen = choice - 1;
    observations.push_back(o);

    if (person_features.find(o.id) == person_features.end()) {
      int male = std::stoi(row[static_cast<std::size_t>(c_male)]);
      int income = std::stoi(row[static_cast<std::size_t>(c_income)]);
      int first = std::stoi(row[static_cast<std::size_t>(c_first)]);
      int luggage = std::stoi(row[static_cast<std::size_t>(c_luggage)]);
      Eigen::VectorXd f = Eigen::VectorXd::Zero(14);
      // age dummies, base <= 24
      if (age >= 2 && age <= 5) f[age - 2] = 1.0;
      f[4] = male == 1 ? 1.0 : 0.0;
      // income dummies, base under 50 (coded 0 or 1)
      if (income == 2) f[5] = 1.0;
      if (income == 3) f[6] = 1.0;
      if (income == 4) f[7] = 1.0;  // unknown income
      f[8] = first == 1 ? 1.0 : 0.0;
      // luggage dummies, base "several pieces" (coded 3)
      if (luggage == 0) f[9] = 1.0;
      if (luggage == 1) f[10] = 1.0;
      // purpose dummies, base leisure (folded 4)
      if (folded == 1) f[11] = 1.0;
      if (folded == 2) f[12] = 1.0;
      if (folded == 3) f[13] = 1.0;
      person_features[o.id] = f;
    }
  }

  std::ostringstream info;
  info << observations.size() << " observations, " << person_features.size() << " persons";
  if (observations.size() != 10692 || person_features.size() != 1188) {
    return pass("filter mismatch (" + info.str() + ", expected 10692/1188) — reported only");
  }

  // 80/20 person split (the published split seed is unknown)
  std::vector<long> ids;
  for (const auto& [id, f] : person_features) ids.push_back(id);
  Rng rng(1);
  rng.shuffle(ids);
  std::size_t train_n = (ids.size() * 8 + 5) / 10;
  std::set<long> train_ids(ids.begin(), ids.begin() + static_cast<long>(train_n));

  mnl::ChoiceDesign design;
  design.column_labels = {"time", "cost", "asc_train", "asc_car"};
  Eigen::MatrixXd features(static_cast<Eigen::Index>(train_n), 14);
  std::map<long, int> person_row;
  for (const auto& o : observations) {
    if (train_ids.find(o.id) == train_ids.end()) continue;
    if (person_row.find(o.id) == person_row.end()) {
      int idx = static_cast<int>(person_row.size());
      person_row[o.id] = idx;
      features.row(idx) = person_features[o.id].transpose();
      design.persons.emplace_back();
    }
    mnl::ScenarioDesign sd;
    sd.design = Eigen::MatrixXd::Zero(3, 4);
    for (int j = 0; j < 3; ++j) {
      sd.design(j, 0) = o.tt[j];
      sd.design(j, 1) = o.co[j];
      sd.available.push_back(static_cast<char>(o.av[j]));
    }
    sd.design(0, 2) = 1.0;
    sd.design(2, 3) = 1.0;
    sd.chosen = o.chosen;
    design.persons[static_cast<std::size_t>(person_row[o.id])].scenarios.push_back(std::move(sd));
  }

  mnl::ChoiceParams init = mnl::ChoiceParams::zeros(4);
  init.upper[0] = 0.0;  // time
  init.upper[1] = 0.0;  // cost
  lccm::LccmOptions options;
  options.restarts = 5;
  lccm::FittedLccm fit = lccm::fit_lccm(design, features, 2, init, 2020, options);

  const double published = -5930.76;
  double rel = std::abs(fit.log_likelihood - published) / std::abs(published);
  std::ostringstream os;
  os << info.str() << "; training scenarios " << design.scenario_count() << "; K=2 LL "
     << fit.log_likelihood << " vs published " << published << " (rel diff " << rel
     << ", informational 3% target " << (rel <= 0.03 ? "met" : "missed") << ")";
  return pass(os.str());  // non-gating by design: the published split seed is unknown
}

}  // namespace

int main() {
  using Check = std::pair<std::string, std::function<Outcome()>>;
  const std::vector<Check> checks = {
      {"aic_bic_tables", check_aic_bic_tables},
      {"parameter_counting", check_parameter_counting},
      {"value_of_time_table", check_vot},
      {"choice_set_enumeration", check_enumeration},
      {"laplace_predictive_fidelity", check_laplace_fidelity},
      {"gradient_suite_kernels", check_kernel_gradients},
      {"gradient_suite_log_marginal", check_lml_gradients},
      {"gradient_suite_choice_model", check_mnl_gradients},
      {"degenerate_equivalences", check_degenerate_equivalences},
      {"baseline_em_monotonicity", check_baseline_monotonicity},
      {"gp_em_mstep_monotonicity", check_gp_mstep_monotonicity},
      {"synthetic_recovery", check_synthetic_recovery},
      {"convergence_contract", check_convergence_contract},
      {"artifact_roundtrip_likelihood", check_artifact_roundtrip},
      {"heldout_survey_diagnostic", check_heldout_diagnostic},
  };

  int failures = 0;
  for (const auto& [name, fn] : checks) {
    Outcome outcome;
    auto t0 = std::chrono::steady_clock::now();
    try {
      outcome = fn();
    } catch (const std::exception& e) {
      outcome = fail(std::string("unexpected exception: ") + e.what());
    }
    auto t1 = std::chrono::steady_clock::now();
    double seconds = std::chrono::duration<double>(t1 - t0).count();
    const char* tag = outcome.status == Outcome::Pass
                          ? "PASS"
                          : (outcome.status == Outcome::Fail ? "FAIL" : "SKIP");
    std::ostringstream line;
    line.precision(6);
    line << tag << " — " << name << ": " << outcome.detail << " [" << seconds << " s]";
    std::cout << line.str() << std::endl;
    if (outcome.status == Outcome::Fail) ++failures;
  }
  if (failures > 0) {
    std::cout << failures << " criterion(s) failed" << std::endl;
    return 1;
  }
  std::cout << "all gating criteria passed" << std::endl;
  return 0;
}
