#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace gplccm {

// Covariance function over person-feature space. A spec is an immutable tree:
// leaves are squared-exponential, Matern (nu fixed to 1.5 or 2.5) and
// constant kernels, interior nodes are sums and products. Lengthscales may be
// one per input dimension (ARD) or a single shared value.
//
// All tunable hyperparameters live on a log scale: pack() flattens them depth
// first, unpack() rebuilds a structurally identical spec from such a vector,
// and kernel_gradients() differentiates with respect to exactly those packed
// coordinates. nu is a structural choice, not an optimized hyperparameter.
class KernelSpec {
 public:
  enum class Kind { SquaredExponential, Matern, Constant, Sum, Product };

  // Default-constructs constant(1); meaningful specs come from the factories.
  KernelSpec() = default;

  static KernelSpec squared_exponential(double variance, Eigen::VectorXd lengthscale);
  static KernelSpec matern(double nu, double variance, Eigen::VectorXd lengthscale);
  static KernelSpec constant(double value);
  static KernelSpec sum(KernelSpec left, KernelSpec right);
  static KernelSpec product(KernelSpec left, KernelSpec right);

  Kind kind() const { return kind_; }
  bool leaf() const { return kind_ != Kind::Sum && kind_ != Kind::Product; }

  // Leaf accessors; calling one on the wrong kind is a programming error.
  double variance() const { return variance_; }
  double nu() const { return nu_; }
  double value() const { return variance_; }
  const Eigen::VectorXd& lengthscale() const { return lengthscale_; }
  bool ard() const { return lengthscale_.size() > 1; }

  const KernelSpec& left() const { return *left_; }
  const KernelSpec& right() const { return *right_; }

  // Number of packed (optimized) log-hyperparameters.
  int hyperparameter_count() const;

  // Structural hyperparameter count used by the information criteria:
  // lengthscales count one each, a Matern additionally counts its nu, a
  // constant counts its level; variances are treated as scale calibration
  // and are not counted.
  int counted_hyperparameters() const;

  // Expression-string rendering; parse_kernel(to_expression()) reproduces
  // the spec exactly.
  std::string to_expression() const;

 private:
  Kind kind_ = Kind::Constant;
  double variance_ = 1.0;  // leaf variance, or the constant's value
  double nu_ = 0.0;
  Eigen::VectorXd lengthscale_;
  std::shared_ptr<const KernelSpec> left_;
  std::shared_ptr<const KernelSpec> right_;
};

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Dense covariance of the rows of s, plus `jitter` on the diagonal.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& s, double jitter = 0.0);

// One matrix per packed hyperparameter, in pack() order; jitter excluded.
std::vector<Eigen::MatrixXd> kernel_gradients(const KernelSpec& spec, const Eigen::MatrixXd& s);

struct PackedHyperparameters {
  Eigen::VectorXd log_values;
  std::vector<std::string> names;
};

PackedHyperparameters pack_hyperparameters(const KernelSpec& spec);
KernelSpec unpack_hyperparameters(const KernelSpec& spec, const Eigen::VectorXd& log_values);

// Covariance matrix together with its lower Cholesky factor. The diagonal is
// inflated geometrically from 1e-8 to 1e-2 times the prior variance scale
// until the factorization succeeds; throws ConditioningError past that.
struct FactoredKernelMatrix {
  Eigen::MatrixXd matrix;       // includes the jitter that succeeded
  Eigen::MatrixXd chol_lower;
  double jitter = 0.0;
};

FactoredKernelMatrix factored_kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& s);

// Parses expressions like
//   matern(nu=2.5, variance=1.0, lengthscale=1.0)
//   constant(0.5) + se(variance=1.0, lengthscale=[1.0, 2.0])
// '*' binds tighter than '+'; arguments may be positional or named.
KernelSpec parse_kernel(std::string_view expression);

}  // namespace gplccm
