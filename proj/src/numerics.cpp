#include "gplccm/numerics.hpp"

#include <Eigen/Eigenvalues>

#include "gplccm/errors.hpp"

namespace gplccm {

int exit_code_for(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const PredictionError*>(&e)) return 5;
  return 4;
}

double normal_two_sided_p(double z) {
  double p = std::erfc(std::abs(z) / std::sqrt(2.0));
  return p > 1.0 ? 1.0 : p;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: order must be positive");
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    double off = std::sqrt(i / 2.0);
    j(i, i - 1) = off;
    j(i - 1, i) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  Eigen::VectorXd nodes = es.eigenvalues();
  Eigen::VectorXd weights(n);
  const double total = std::sqrt(M_PI);  // integral of e^{-x^2}
  for (int i = 0; i < n; ++i) {
    double first = es.eigenvectors()(0, i);
    weights[i] = total * first * first;
  }
  return {nodes, weights};
}

}  // namespace gplccm
