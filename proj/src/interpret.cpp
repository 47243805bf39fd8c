#include "gplccm/interpret.hpp"

#include <cmath>

#include "gplccm/errors.hpp"

namespace gplccm::interpret {

Eigen::MatrixXd perturb(const Eigen::MatrixXd& dataset, const Eigen::VectorXd& instance,
                        int n_samples, Rng& rng) {
  if (dataset.rows() == 0) throw DataError("cannot perturb against an empty dataset");
  if (dataset.cols() != instance.size()) {
    throw ShapeError("instance dimension does not match the dataset");
  }
  if (n_samples < 1) throw ConfigError("perturbation sample count must be positive");
  Eigen::MatrixXd out(n_samples, instance.size());
  out.row(0) = instance.transpose();
  const std::size_t n_rows = static_cast<std::size_t>(dataset.rows());
  for (int i = 1; i < n_samples; ++i) {
    for (Eigen::Index j = 0; j < instance.size(); ++j) {
      out(i, j) = dataset(static_cast<Eigen::Index>(rng.index(n_rows)), j);
    }
  }
  return out;
}

Eigen::VectorXd proximity_weights(const Eigen::MatrixXd& perturbed,
                                  const Eigen::VectorXd& instance, double width) {
  if (!(width > 0.0)) throw ConfigError("proximity kernel width must be positive");
  if (perturbed.cols() != instance.size()) {
    throw ShapeError("instance dimension does not match the perturbation set");
  }
  Eigen::VectorXd w(perturbed.rows());
  for (Eigen::Index i = 0; i < perturbed.rows(); ++i) {
    double d2 = (perturbed.row(i).transpose() - instance).squaredNorm();
    w[i] = std::exp(-d2 / (width * width));
  }
  return w;
}

Explanation explain_function(const BlackBox& black_box, const Eigen::MatrixXd& dataset,
                             const Eigen::VectorXd& instance, const ExplainOptions& options) {
  const Eigen::Index d = instance.size();
  double width = options.width > 0.0 ? options.width
                                     : 0.75 * std::sqrt(static_cast<double>(d));
  Rng rng(options.seed);
  Eigen::MatrixXd x = perturb(dataset, instance, options.n_samples, rng);
  Eigen::VectorXd w = proximity_weights(x, instance, width);

  Eigen::VectorXd y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y[i] = black_box(x.row(i).transpose());

  // Weighted least squares of y on [1, x].
  Eigen::MatrixXd design(x.rows(), d + 1);
  design.col(0).setOnes();
  design.rightCols(d) = x;
  Eigen::VectorXd sw = w.cwiseSqrt();
  Eigen::MatrixXd a = sw.asDiagonal() * design;
  Eigen::VectorXd b = sw.cwiseProduct(y);

  Explanation ex;
  ex.instance = instance;
  ex.instance_probability = y[0];

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  Eigen::VectorXd coef;
  if (qr.rank() == d + 1) {
    coef = qr.solve(b);
  } else {
    // Degenerate perturbation geometry: fall back to a fixed small ridge.
    Eigen::MatrixXd gram = a.transpose() * a;
    gram.diagonal().array() += 1e-6;
    coef = gram.ldlt().solve(a.transpose() * b);
    ex.ridge_fallback = true;
  }
  ex.intercept = coef[0];
  ex.weights = coef.tail(d);

  Eigen::VectorXd fitted = design * coef;
  double wsum = w.sum();
  double ybar = w.dot(y) / wsum;
  double ss_tot = w.dot((y.array() - ybar).square().matrix());
  double ss_res = w.dot((y - fitted).array().square().matrix());
  // a (numerically) constant target has no variance left to explain
  double y_scale = w.dot(y.cwiseAbs2()) / wsum;
  if (ss_tot <= 1e-12 * std::max(1.0, y_scale) * wsum) {
    ex.fidelity = 1.0;
  } else {
    ex.fidelity = std::min(1.0, std::max(0.0, 1.0 - ss_res / ss_tot));
  }
  return ex;
}

Explanation explain_instance(const gpl::FittedGpLccm& fit, const Eigen::MatrixXd& dataset,
                             const Eigen::VectorXd& instance, int target_class,
                             const ExplainOptions& options) {
  if (target_class < 0 || target_class >= fit.n_classes) {
    throw ConfigError("target class is outside 0..K-1");
  }
  BlackBox box = [&](const Eigen::VectorXd& row) {
    Eigen::MatrixXd q = row.transpose();
    return gp::ovr_predict(fit.classifier, q)(0, target_class);
  };
  Explanation ex = explain_function(box, dataset, instance, options);
  ex.target_class = target_class;
  return ex;
}

}  // namespace gplccm::interpret
