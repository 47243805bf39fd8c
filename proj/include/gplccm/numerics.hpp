#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

namespace gplccm {

// Compensated (Neumaier) accumulator. Log-likelihoods here are sums of
// thousands of terms near |1| to |10|; plain summation drifts enough to make
// an analytically monotone EM trace wiggle at the 1e-9 level we test for.
class KahanSum {
 public:
  void add(double value) {
    double t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value)) {
      comp_ += (sum_ - t) + value;
    } else {
      comp_ += (value - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double log_sum_exp(const Eigen::VectorXd& v) {
  double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf stays -inf
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Two-sided p-value for a z statistic.
double normal_two_sided_p(double z);

// Nodes and weights of the n-point Gauss-Hermite rule for weight e^{-x^2},
// computed from the Jacobi matrix of the Hermite recurrence. Nodes ascending.
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n);

}  // namespace gplccm
