#include "gplccm/kernels.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "gplccm/errors.hpp"

namespace gplccm {

namespace {

const double kSqrt3 = 1.7320508075688772935;
const double kSqrt5 = 2.2360679774997896964;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream os;
    os << "kernel " << what << " must be positive and finite, got " << v;
    throw ConfigError(os.str());
  }
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Rows of s divided columnwise by the lengthscale (shared scalar or ARD).
Eigen::MatrixXd scale_rows(const Eigen::MatrixXd& s, const Eigen::VectorXd& ell) {
  if (ell.size() == 1) return s / ell[0];
  if (ell.size() != s.cols()) {
    std::ostringstream os;
    os << "ARD lengthscale has " << ell.size() << " entries but inputs have "
       << s.cols() << " dimensions";
    throw ShapeError(os.str());
  }
  return s * ell.cwiseInverse().asDiagonal();
}

// Pairwise squared scaled distances of the rows of z.
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& z) {
  Eigen::VectorXd n2 = z.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = (-2.0 * (z * z.transpose())).colwise() + n2;
  d2.rowwise() += n2.transpose();
  d2 = d2.cwiseMax(0.0);
  d2.diagonal().setZero();
  return d2;
}

void check_pair(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) {
    std::ostringstream os;
    os << "kernel arguments have mismatched dimensions " << x.size() << " and " << y.size();
    throw ShapeError(os.str());
  }
  if (spec.leaf() && spec.kind() != KernelSpec::Kind::Constant && spec.ard() &&
      spec.lengthscale().size() != x.size()) {
    std::ostringstream os;
    os << "ARD lengthscale has " << spec.lengthscale().size()
       << " entries but inputs have " << x.size() << " dimensions";
    throw ShapeError(os.str());
  }
}

}  // namespace

KernelSpec KernelSpec::squared_exponential(double variance, Eigen::VectorXd lengthscale) {
  require_positive(variance, "variance");
  if (lengthscale.size() == 0) throw ConfigError("kernel lengthscale must not be empty");
  for (Eigen::Index i = 0; i < lengthscale.size(); ++i) {
    require_positive(lengthscale[i], "lengthscale");
  }
  KernelSpec k;
  k.kind_ = Kind::SquaredExponential;
  k.variance_ = variance;
  k.lengthscale_ = std::move(lengthscale);
  return k;
}

KernelSpec KernelSpec::matern(double nu, double variance, Eigen::VectorXd lengthscale) {
  if (nu != 1.5 && nu != 2.5) {
    std::ostringstream os;
    os << "matern nu must be 1.5 or 2.5, got " << nu;
    throw ConfigError(os.str());
  }
  KernelSpec k = squared_exponential(variance, std::move(lengthscale));
  k.kind_ = Kind::Matern;
  k.nu_ = nu;
  return k;
}

KernelSpec KernelSpec::constant(double value) {
  require_positive(value, "constant value");
  KernelSpec k;
  k.kind_ = Kind::Constant;
  k.variance_ = value;
  return k;
}

KernelSpec KernelSpec::sum(KernelSpec left, KernelSpec right) {
  KernelSpec k;
  k.kind_ = Kind::Sum;
  k.left_ = std::make_shared<KernelSpec>(std::move(left));
  k.right_ = std::make_shared<KernelSpec>(std::move(right));
  return k;
}

KernelSpec KernelSpec::product(KernelSpec left, KernelSpec right) {
  KernelSpec k = sum(std::move(left), std::move(right));
  k.kind_ = Kind::Product;
  return k;
}

int KernelSpec::hyperparameter_count() const {
  switch (kind_) {
    case Kind::SquaredExponential:
    case Kind::Matern:
      return 1 + static_cast<int>(lengthscale_.size());
    case Kind::Constant:
      return 1;
    default:
      return left_->hyperparameter_count() + right_->hyperparameter_count();
  }
}

int KernelSpec::counted_hyperparameters() const {
  switch (kind_) {
    case Kind::SquaredExponential:
      return static_cast<int>(lengthscale_.size());
    case Kind::Matern:
      return 1 + static_cast<int>(lengthscale_.size());
    case Kind::Constant:
      return 1;
    default:
      return left_->counted_hyperparameters() + right_->counted_hyperparameters();
  }
}

std::string KernelSpec::to_expression() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::SquaredExponential:
    case Kind::Matern: {
      os << (kind_ == Kind::Matern ? "matern(" : "se(");
      if (kind_ == Kind::Matern) os << "nu=" << format_number(nu_) << ", ";
      os << "variance=" << format_number(variance_) << ", lengthscale=";
      if (ard()) {
        os << "[";
        for (Eigen::Index i = 0; i < lengthscale_.size(); ++i) {
          if (i) os << ", ";
          os << format_number(lengthscale_[i]);
        }
        os << "]";
      } else {
        os << format_number(lengthscale_[0]);
      }
      os << ")";
      break;
    }
    case Kind::Constant:
      os << "constant(" << format_number(variance_) << ")";
      break;
    case Kind::Sum:
      os << left_->to_expression() << " + " << right_->to_expression();
      break;
    case Kind::Product: {
      // Parenthesize sum children so the rendering re-parses to this tree.
      auto wrap = [](const KernelSpec& c) {
        std::string e = c.to_expression();
        return c.kind() == Kind::Sum ? "(" + e + ")" : e;
      };
      os << wrap(*left_) << " * " << wrap(*right_);
      break;
    }
  }
  return os.str();
}

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  check_pair(spec, x, y);
  switch (spec.kind()) {
    case KernelSpec::Kind::Constant:
      return spec.value();
    case KernelSpec::Kind::Sum:
      return kernel_eval(spec.left(), x, y) + kernel_eval(spec.right(), x, y);
    case KernelSpec::Kind::Product:
      return kernel_eval(spec.left(), x, y) * kernel_eval(spec.right(), x, y);
    default:
      break;
  }
  const Eigen::VectorXd& ell = spec.lengthscale();
  double q2 = 0.0;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    double u = (x[d] - y[d]) / (ell.size() == 1 ? ell[0] : ell[d]);
    q2 += u * u;
  }
  if (spec.kind() == KernelSpec::Kind::SquaredExponential) {
    return spec.variance() * std::exp(-0.5 * q2);
  }
  double q = std::sqrt(q2);
  if (spec.nu() == 1.5) {
    return spec.variance() * (1.0 + kSqrt3 * q) * std::exp(-kSqrt3 * q);
  }
  return spec.variance() * (1.0 + kSqrt5 * q + 5.0 * q2 / 3.0) * std::exp(-kSqrt5 * q);
}

namespace {

Eigen::MatrixXd matrix_impl(const KernelSpec& spec, const Eigen::MatrixXd& s) {
  switch (spec.kind()) {
    case KernelSpec::Kind::Constant:
      return Eigen::MatrixXd::Constant(s.rows(), s.rows(), spec.value());
    case KernelSpec::Kind::Sum:
      return matrix_impl(spec.left(), s) + matrix_impl(spec.right(), s);
    case KernelSpec::Kind::Product:
      return matrix_impl(spec.left(), s).cwiseProduct(matrix_impl(spec.right(), s));
    default:
      break;
  }
  Eigen::MatrixXd d2 = squared_distances(scale_rows(s, spec.lengthscale()));
  if (spec.kind() == KernelSpec::Kind::SquaredExponential) {
    return spec.variance() * (-0.5 * d2).array().exp().matrix();
  }
  Eigen::ArrayXXd q = d2.array().sqrt();
  if (spec.nu() == 1.5) {
    return (spec.variance() * (1.0 + kSqrt3 * q) * (-kSqrt3 * q).exp()).matrix();
  }
  return (spec.variance() * (1.0 + kSqrt5 * q + (5.0 / 3.0) * d2.array()) * (-kSqrt5 * q).exp())
      .matrix();
}

void gradients_impl(const KernelSpec& spec, const Eigen::MatrixXd& s,
                    std::vector<Eigen::MatrixXd>& out, Eigen::MatrixXd& value) {
  const Eigen::Index n = s.rows();
  switch (spec.kind()) {
    case KernelSpec::Kind::Constant:
      value = Eigen::MatrixXd::Constant(n, n, spec.value());
      out.push_back(value);
      return;
    case KernelSpec::Kind::Sum: {
      Eigen::MatrixXd lv, rv;
      gradients_impl(spec.left(), s, out, lv);
      gradients_impl(spec.right(), s, out, rv);
      value = lv + rv;
      return;
    }
    case KernelSpec::Kind::Product: {
      std::vector<Eigen::MatrixXd> lg, rg;
      Eigen::MatrixXd lv, rv;
      gradients_impl(spec.left(), s, lg, lv);
      gradients_impl(spec.right(), s, rg, rv);
      for (auto& g : lg) out.push_back(g.cwiseProduct(rv));
      for (auto& g : rg) out.push_back(lv.cwiseProduct(g));
      value = lv.cwiseProduct(rv);
      return;
    }
    default:
      break;
  }

  const Eigen::VectorXd& ell = spec.lengthscale();
  Eigen::MatrixXd z = scale_rows(s, ell);
  Eigen::MatrixXd d2 = squared_distances(z);
  const bool ard = ell.size() > 1;
  const int nell = static_cast<int>(ell.size());

  // Scaled per-dimension squared differences; for the shared-lengthscale case
  // the single gradient uses their total, which is d2 itself.
  auto dim_sq = [&](int d) {
    Eigen::VectorXd c = z.col(d);
    Eigen::MatrixXd m = c.replicate(1, n);
    m -= c.transpose().replicate(n, 1);
    return Eigen::MatrixXd(m.cwiseProduct(m));
  };

  if (spec.kind() == KernelSpec::Kind::SquaredExponential) {
    value = spec.variance() * (-0.5 * d2).array().exp().matrix();
    out.push_back(value);
    for (int d = 0; d < nell; ++d) {
      out.push_back(value.cwiseProduct(ard ? dim_sq(d) : d2));
    }
    return;
  }

  Eigen::ArrayXXd q = d2.array().sqrt();
  if (spec.nu() == 1.5) {
    Eigen::ArrayXXd e = (-kSqrt3 * q).exp();
    value = (spec.variance() * (1.0 + kSqrt3 * q) * e).matrix();
    out.push_back(value);
    Eigen::MatrixXd base = (3.0 * spec.variance() * e).matrix();
    for (int d = 0; d < nell; ++d) {
      out.push_back(base.cwiseProduct(ard ? dim_sq(d) : d2));
    }
    return;
  }

  Eigen::ArrayXXd e = (-kSqrt5 * q).exp();
  value = (spec.variance() * (1.0 + kSqrt5 * q + (5.0 / 3.0) * d2.array()) * e).matrix();
  out.push_back(value);
  Eigen::MatrixXd base = ((5.0 / 3.0) * spec.variance() * (1.0 + kSqrt5 * q) * e).matrix();
  for (int d = 0; d < nell; ++d) {
    out.push_back(base.cwiseProduct(ard ? dim_sq(d) : d2));
  }
}

}  // namespace

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& s, double jitter) {
  Eigen::MatrixXd k = matrix_impl(spec, s);
  if (jitter != 0.0) k.diagonal().array() += jitter;
  return k;
}

std::vector<Eigen::MatrixXd> kernel_gradients(const KernelSpec& spec, const Eigen::MatrixXd& s) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(spec.hyperparameter_count());
  Eigen::MatrixXd value;
  gradients_impl(spec, s, out, value);
  return out;
}

namespace {

void pack_impl(const KernelSpec& spec, std::vector<double>& values,
               std::vector<std::string>& names, int& leaf_index) {
  if (!spec.leaf()) {
    pack_impl(spec.left(), values, names, leaf_index);
    pack_impl(spec.right(), values, names, leaf_index);
    return;
  }
  ++leaf_index;
  std::ostringstream prefix;
  switch (spec.kind()) {
    case KernelSpec::Kind::SquaredExponential: prefix << "se" << leaf_index; break;
    case KernelSpec::Kind::Matern: prefix << "matern" << leaf_index; break;
    default: prefix << "constant" << leaf_index; break;
  }
  if (spec.kind() == KernelSpec::Kind::Constant) {
    values.push_back(std::log(spec.value()));
    names.push_back(prefix.str() + ".value");
    return;
  }
  values.push_back(std::log(spec.variance()));
  names.push_back(prefix.str() + ".variance");
  for (Eigen::Index d = 0; d < spec.lengthscale().size(); ++d) {
    values.push_back(std::log(spec.lengthscale()[d]));
    if (spec.ard()) {
      names.push_back(prefix.str() + ".lengthscale" + std::to_string(d + 1));
    } else {
      names.push_back(prefix.str() + ".lengthscale");
    }
  }
}

KernelSpec unpack_impl(const KernelSpec& spec, const Eigen::VectorXd& v, int& pos) {
  switch (spec.kind()) {
    case KernelSpec::Kind::Sum: {
      KernelSpec l = unpack_impl(spec.left(), v, pos);
      KernelSpec r = unpack_impl(spec.right(), v, pos);
      return KernelSpec::sum(std::move(l), std::move(r));
    }
    case KernelSpec::Kind::Product: {
      KernelSpec l = unpack_impl(spec.left(), v, pos);
      KernelSpec r = unpack_impl(spec.right(), v, pos);
      return KernelSpec::product(std::move(l), std::move(r));
    }
    case KernelSpec::Kind::Constant:
      return KernelSpec::constant(std::exp(v[pos++]));
    default: {
      double variance = std::exp(v[pos++]);
      Eigen::VectorXd ell(spec.lengthscale().size());
      for (Eigen::Index d = 0; d < ell.size(); ++d) ell[d] = std::exp(v[pos++]);
      if (spec.kind() == KernelSpec::Kind::Matern) {
        return KernelSpec::matern(spec.nu(), variance, std::move(ell));
      }
      return KernelSpec::squared_exponential(variance, std::move(ell));
    }
  }
}

}  // namespace

PackedHyperparameters pack_hyperparameters(const KernelSpec& spec) {
  std::vector<double> values;
  std::vector<std::string> names;
  int leaf_index = 0;
  pack_impl(spec, values, names, leaf_index);
  PackedHyperparameters p;
  p.log_values = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  p.names = std::move(names);
  return p;
}

KernelSpec unpack_hyperparameters(const KernelSpec& spec, const Eigen::VectorXd& log_values) {
  if (log_values.size() != spec.hyperparameter_count()) {
    std::ostringstream os;
    os << "hyperparameter vector has " << log_values.size() << " entries, spec needs "
       << spec.hyperparameter_count();
    throw ShapeError(os.str());
  }
  int pos = 0;
  return unpack_impl(spec, log_values, pos);
}

FactoredKernelMatrix factored_kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& s) {
  Eigen::MatrixXd k = matrix_impl(spec, s);
  if (!k.allFinite()) {
    throw ConditioningError("kernel matrix has non-finite entries");
  }
  double scale = k.diagonal().mean();
  if (!(scale > 0.0)) {
    throw ConditioningError("kernel matrix has non-positive prior variance");
  }
  FactoredKernelMatrix out;
  for (double rel = 1e-8; rel <= 1.01e-2; rel *= 10.0) {
    double jitter = rel * scale;
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(kj);
    if (llt.info() == Eigen::Success) {
      out.matrix = std::move(kj);
      out.chol_lower = llt.matrixL();
      out.jitter = jitter;
      return out;
    }
  }
  std::ostringstream os;
  os << "kernel matrix is not positive definite for any jitter in [" << 1e-8 * scale
     << ", " << 1e-2 * scale << "]";
  throw ConditioningError(os.str());
}

}  // namespace gplccm
