#include "gplccm/gp_laplace.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "gplccm/errors.hpp"

namespace gplccm::gp {

namespace {

const double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd to_sign(const std::vector<int>& labels) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw EstimationError("class labels for the binary classifier must be 0 or 1");
    }
    t[static_cast<Eigen::Index>(i)] = labels[i];
  }
  return t;
}

// Bernoulli log likelihood of 0/1 targets under logistic(f).
double bernoulli_loglik(const Eigen::VectorXd& t, const Eigen::VectorXd& f) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    double sign = t[i] > 0.5 ? 1.0 : -1.0;
    ll -= softplus(-sign * f[i]);
  }
  return ll;
}

// Damped Newton iteration for the latent posterior mode. The covariance must
// already be positive definite; callers that built it through
// factored_kernel_matrix have proven that.
LaplaceState mode_impl(const Eigen::MatrixXd& c, const std::vector<int>& labels,
                       const Eigen::VectorXd* warm_mode, const Eigen::MatrixXd* chol_c) {
  const Eigen::Index n = c.rows();
  if (c.cols() != n || static_cast<Eigen::Index>(labels.size()) != n) {
    throw ShapeError("covariance and label sizes do not agree");
  }
  Eigen::VectorXd t = to_sign(labels);

  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  if (warm_mode && warm_mode->size() == n && chol_c) {
    f = *warm_mode;
    a = chol_c->triangularView<Eigen::Lower>().solve(f);
    chol_c->triangularView<Eigen::Lower>().adjoint().solveInPlace(a);
  }
  double psi = bernoulli_loglik(t, f) - 0.5 * a.dot(f);

  LaplaceState st;
  st.labels = labels;
  Eigen::MatrixXd lb;
  const int max_iterations = 100;
  double delta = kInf;
  for (int iter = 1; iter <= max_iterations; ++iter) {
    st.iterations = iter;
    Eigen::VectorXd pi(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      pi[i] = sigmoid(f[i]);
      w[i] = std::max(pi[i] * (1.0 - pi[i]), 1e-300);
    }
    Eigen::VectorXd sw = w.cwiseSqrt();
    Eigen::MatrixXd b = sw.asDiagonal() * c * sw.asDiagonal();
    b.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt(b);
    if (llt.info() != Eigen::Success) {
      throw ConditioningError("curvature matrix of the latent posterior is not factorizable");
    }
    lb = llt.matrixL();
    Eigen::VectorXd rhs = w.cwiseProduct(f) + (t - pi);
    Eigen::VectorXd v = lb.triangularView<Eigen::Lower>().solve(sw.cwiseProduct(c * rhs));
    Eigen::VectorXd a_newton =
        rhs - sw.cwiseProduct(lb.triangularView<Eigen::Lower>().adjoint().solve(v));

    // Newton can overshoot for extreme hyperparameters; halve toward the
    // current iterate until the objective stops decreasing.
    double step = 1.0;
    Eigen::VectorXd a_try, f_try;
    double psi_try = -kInf;
    for (int h = 0; h < 25; ++h) {
      a_try = a + step * (a_newton - a);
      f_try = c * a_try;
      psi_try = bernoulli_loglik(t, f_try) - 0.5 * a_try.dot(f_try);
      if (std::isfinite(psi_try) && psi_try >= psi - 1e-12) break;
      step *= 0.5;
    }
    delta = psi_try - psi;
    a = a_try;
    f = f_try;
    psi = psi_try;
    if (std::abs(delta) < 1e-10) {
      st.iterations = iter;
      break;
    }
    if (iter == max_iterations) {
      std::ostringstream os;
      os << "latent mode finding did not converge in " << max_iterations
         << " iterations; last objective change " << delta;
      throw ConvergenceError(os.str());
    }
  }

  // Recompute the curvature quantities at the accepted mode.
  Eigen::VectorXd pi(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    pi[i] = sigmoid(f[i]);
    w[i] = std::max(pi[i] * (1.0 - pi[i]), 1e-300);
  }
  Eigen::VectorXd sw = w.cwiseSqrt();
  Eigen::MatrixXd b = sw.asDiagonal() * c * sw.asDiagonal();
  b.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(b);
  if (llt.info() != Eigen::Success) {
    throw ConditioningError("curvature matrix of the latent posterior is not factorizable");
  }
  st.mode = f;
  st.grad = t - pi;
  st.w = w;
  st.chol_b = llt.matrixL();
  st.log_marginal = psi - st.chol_b.diagonal().array().log().sum();
  return st;
}

}  // namespace

LaplaceState laplace_mode(const Eigen::MatrixXd& c, const std::vector<int>& labels) {
  if (c.rows() != c.cols() || !c.isApprox(c.transpose(), 1e-10)) {
    throw ShapeError("covariance matrix must be square and symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) {
    throw ConditioningError("covariance matrix is not positive definite");
  }
  return mode_impl(c, labels, nullptr, nullptr);
}

LaplaceState laplace_fit(const KernelSpec& spec, const Eigen::MatrixXd& s,
                         const std::vector<int>& labels) {
  FactoredKernelMatrix fk = factored_kernel_matrix(spec, s);
  LaplaceState st = mode_impl(fk.matrix, labels, nullptr, nullptr);
  st.inputs = s;
  st.jitter = fk.jitter;
  return st;
}

std::pair<double, double> laplace_predict_latent(const LaplaceState& state, const KernelSpec& spec,
                                                 const Eigen::VectorXd& query) {
  if (state.inputs.rows() != state.mode.size()) {
    throw ShapeError("classifier state does not carry its training inputs");
  }
  const Eigen::Index n = state.mode.size();
  Eigen::VectorXd kstar(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    kstar[i] = kernel_eval(spec, state.inputs.row(i).transpose(), query);
  }
  double mean = kstar.dot(state.grad);
  Eigen::VectorXd v =
      state.chol_b.triangularView<Eigen::Lower>().solve(state.w.cwiseSqrt().cwiseProduct(kstar));
  double prior = kernel_eval(spec, query, query) + state.jitter;
  double var = std::max(prior - v.squaredNorm(), 1e-12);
  return {mean, var};
}

double laplace_predict(const LaplaceState& state, const KernelSpec& spec,
                       const Eigen::VectorXd& query) {
  auto [mean, var] = laplace_predict_latent(state, spec, query);
  static const auto quad = gauss_hermite(20);
  const Eigen::VectorXd& nodes = quad.first;
  const Eigen::VectorXd& weights = quad.second;
  double scale = std::sqrt(2.0 * var);
  double p = 0.0;
  for (Eigen::Index i = 0; i < nodes.size(); ++i) {
    p += weights[i] * sigmoid(mean + scale * nodes[i]);
  }
  return p / std::sqrt(M_PI);
}

Eigen::VectorXd training_probabilities(const LaplaceState& state) {
  Eigen::VectorXd p(state.mode.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = sigmoid(state.mode[i]);
  return p;
}

namespace {

std::pair<double, Eigen::VectorXd> lml_gradient_impl(const KernelSpec& spec,
                                                     const Eigen::MatrixXd& s,
                                                     const std::vector<int>& labels,
                                                     const Eigen::VectorXd* warm,
                                                     Eigen::VectorXd* mode_out) {
  FactoredKernelMatrix fk = factored_kernel_matrix(spec, s);
  const Eigen::MatrixXd& k = fk.matrix;
  LaplaceState st = mode_impl(k, labels, warm, &fk.chol_lower);
  if (mode_out) *mode_out = st.mode;
  const Eigen::Index n = k.rows();

  Eigen::VectorXd sw = st.w.cwiseSqrt();
  auto lower = st.chol_b.triangularView<Eigen::Lower>();

  // r = W^1/2 (I + W^1/2 K W^1/2)^-1 W^1/2
  Eigen::MatrixXd r = lower.solve(Eigen::MatrixXd(sw.asDiagonal()));
  lower.adjoint().solveInPlace(r);
  r = sw.asDiagonal() * r;

  // Posterior latent variances from the factored form.
  Eigen::MatrixXd half = lower.solve(sw.asDiagonal() * k);
  Eigen::VectorXd post_var = k.diagonal() - half.colwise().squaredNorm().transpose();

  // Implicit dependence of the objective on the mode: only the log
  // determinant moves, through W, whose f-derivative is minus the third
  // log likelihood derivative.
  Eigen::VectorXd pi(n);
  for (Eigen::Index i = 0; i < n; ++i) pi[i] = sigmoid(st.mode[i]);
  Eigen::VectorXd d3 = -st.w.cwiseProduct(Eigen::VectorXd::Ones(n) - 2.0 * pi);
  Eigen::VectorXd s2 = 0.5 * post_var.cwiseProduct(d3);

  std::vector<Eigen::MatrixXd> grads = kernel_gradients(spec, s);
  Eigen::VectorXd g(static_cast<Eigen::Index>(grads.size()));
  for (std::size_t j = 0; j < grads.size(); ++j) {
    const Eigen::MatrixXd& cj = grads[j];
    double s1 = 0.5 * st.grad.dot(cj * st.grad) - 0.5 * r.cwiseProduct(cj).sum();
    Eigen::VectorXd bj = cj * st.grad;
    Eigen::VectorXd s3 = bj - k * (r * bj);
    g[static_cast<Eigen::Index>(j)] = s1 + s2.dot(s3);
  }
  return {st.log_marginal, g};
}

}  // namespace

std::pair<double, Eigen::VectorXd> log_marginal_gradient(const KernelSpec& spec,
                                                         const Eigen::MatrixXd& s,
                                                         const std::vector<int>& labels) {
  return lml_gradient_impl(spec, s, labels, nullptr, nullptr);
}

HyperFitResult fit_hyperparameters(const KernelSpec& init, const Eigen::MatrixXd& s,
                                   const std::vector<int>& labels, const HyperFitOptions& options,
                                   Rng& rng) {
  bool has0 = false, has1 = false;
  for (int l : labels) {
    has0 = has0 || l == 0;
    has1 = has1 || l == 1;
  }
  if (!has0 || !has1) {
    throw DegenerateClassError("hyperparameter fitting needs both classes in the labels");
  }

  PackedHyperparameters packed = pack_hyperparameters(init);
  const Eigen::Index dim = packed.log_values.size();
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(dim, -options.log_bound);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(dim, options.log_bound);

  // Warm-started latent mode shared across objective evaluations; the mode is
  // the unique optimum of a concave problem, so warm starting changes the
  // iteration count but not the answer.
  Eigen::VectorXd warm;
  optim::Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) -> double {
    KernelSpec trial = unpack_hyperparameters(init, x);
    try {
      Eigen::VectorXd mode;
      auto [value, g] = lml_gradient_impl(trial, s, labels, warm.size() ? &warm : nullptr, &mode);
      warm = mode;
      if (grad) *grad = g;
      return value;
    } catch (const ConditioningError&) {
      if (grad) grad->setZero(dim);
      return -std::numeric_limits<double>::infinity();
    } catch (const ConvergenceError&) {
      if (grad) grad->setZero(dim);
      return -std::numeric_limits<double>::infinity();
    }
  };

  HyperFitResult best;
  bool have_best = false;
  std::ostringstream notes;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    Eigen::VectorXd x0 = packed.log_values;
    if (r > 0) {
      for (Eigen::Index i = 0; i < dim; ++i) x0[i] += options.spread * rng.normal();
    }
    x0 = x0.cwiseMax(lo).cwiseMin(hi);
    warm.resize(0);
    try {
      optim::Result res = optim::maximize_boxed(objective, x0, lo, hi, options.optimizer);
      if (!std::isfinite(res.value)) throw OptimizationError("objective stayed non-finite");
      if (!have_best || res.value > best.log_marginal) {
        best.spec = unpack_hyperparameters(init, res.x);
        best.log_marginal = res.value;
        have_best = true;
      }
    } catch (const Error& e) {
      ++best.failed_restarts;
      notes << "restart " << r << ": " << e.what() << "; ";
    }
  }
  if (!have_best) {
    throw OptimizationError("every hyperparameter restart failed: " + notes.str());
  }
  best.notes = notes.str();
  return best;
}

OvrClassifier ovr_fit(const Eigen::MatrixXd& s, const std::vector<int>& labels, int n_classes,
                      const std::vector<KernelSpec>& init_specs, const OvrFitOptions& options,
                      Rng& rng) {
  if (n_classes < 1) throw ConfigError("number of classes must be positive");
  if (static_cast<Eigen::Index>(labels.size()) != s.rows()) {
    throw ShapeError("label count does not match the number of feature rows");
  }
  OvrClassifier cl;
  cl.n_classes = n_classes;
  cl.n_points = static_cast<int>(s.rows());
  if (n_classes == 1) return cl;

  std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
  for (int l : labels) {
    if (l < 0 || l >= n_classes) throw EstimationError("class label outside 0..K-1");
    ++counts[static_cast<std::size_t>(l)];
  }
  for (int k = 0; k < n_classes; ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) {
      std::ostringstream os;
      os << "class " << k << " has no members; the classifier cannot be fitted";
      throw DegenerateClassError(os.str());
    }
  }

  const int n_classifiers = n_classes == 2 ? 1 : n_classes;
  if (static_cast<int>(init_specs.size()) != n_classifiers) {
    throw ShapeError("expected one kernel spec per classifier");
  }
  for (int c = 0; c < n_classifiers; ++c) {
    // With two classes a single classifier on the class-1 indicator carries
    // all the information; otherwise classifier c separates class c from the
    // rest.
    int positive = n_classes == 2 ? 1 : c;
    std::vector<int> binary(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) binary[i] = labels[i] == positive ? 1 : 0;
    KernelSpec spec = init_specs[static_cast<std::size_t>(c)];
    if (options.optimize_hyperparameters) {
      Rng child = rng.fork(static_cast<std::uint64_t>(c) + 101);
      spec = fit_hyperparameters(spec, s, binary, options.hyper, child).spec;
    }
    cl.specs.push_back(spec);
    cl.states.push_back(laplace_fit(spec, s, binary));
  }
  return cl;
}

Eigen::MatrixXd ovr_predict(const OvrClassifier& classifier, const Eigen::MatrixXd& queries) {
  const Eigen::Index m = queries.rows();
  Eigen::MatrixXd p(m, classifier.n_classes);
  if (classifier.n_classes == 1) {
    p.setOnes();
    return p;
  }
  if (!classifier.states.empty() && queries.cols() != classifier.states[0].inputs.cols()) {
    throw PredictionError("query features do not match the classifier's training dimension");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::VectorXd q = queries.row(i).transpose();
    if (classifier.n_classes == 2) {
      double p1 = laplace_predict(classifier.states[0], classifier.specs[0], q);
      p(i, 0) = 1.0 - p1;
      p(i, 1) = p1;
    } else {
      double total = 0.0;
      for (int k = 0; k < classifier.n_classes; ++k) {
        double pk = laplace_predict(classifier.states[static_cast<std::size_t>(k)],
                                    classifier.specs[static_cast<std::size_t>(k)], q);
        p(i, k) = pk;
        total += pk;
      }
      p.row(i) /= total;
    }
  }
  return p;
}

Eigen::MatrixXd ovr_training_probabilities(const OvrClassifier& classifier) {
  Eigen::MatrixXd p(classifier.n_points, classifier.n_classes);
  if (classifier.n_classes == 1) {
    p.setOnes();
    return p;
  }
  if (classifier.n_classes == 2) {
    Eigen::VectorXd p1 = training_probabilities(classifier.states[0]);
    p.col(1) = p1;
    p.col(0) = Eigen::VectorXd::Ones(p1.size()) - p1;
    return p;
  }
  for (int k = 0; k < classifier.n_classes; ++k) {
    p.col(k) = training_probabilities(classifier.states[static_cast<std::size_t>(k)]);
  }
  for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) /= p.row(i).sum();
  return p;
}

}  // namespace gplccm::gp
