#pragma once

// Shared helpers for the test binaries: an independent simplex maximizer to
// cross-check the quasi-Newton fits, finite differences, and small synthetic
// choice problems generated directly in memory.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "gplccm/mnl.hpp"
#include "gplccm/rng.hpp"

namespace testsupport {

// Nelder-Mead ascent. Deliberately unrelated to the library's optimizer so
// the two can disagree only if one of them is wrong.
inline Eigen::VectorXd nelder_mead_max(const std::function<double(const Eigen::VectorXd&)>& f,
                                       Eigen::VectorXd x0, double step = 0.5,
                                       int max_iter = 4000, double tol = 1e-12) {
  const int n = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(n + 1), x0);
  for (int i = 0; i < n; ++i) xs[static_cast<std::size_t>(i + 1)][i] += step;
  std::vector<double> fs;
  for (const auto& x : xs) fs.push_back(f(x));

  for (int it = 0; it < max_iter; ++it) {
    std::vector<int> idx(static_cast<std::size_t>(n + 1));
    for (int i = 0; i <= n; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      return fs[static_cast<std::size_t>(a)] > fs[static_cast<std::size_t>(b)];
    });
    std::vector<Eigen::VectorXd> xs2;
    std::vector<double> fs2;
    for (int i = 0; i <= n; ++i) {
      xs2.push_back(xs[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
      fs2.push_back(fs[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
    }
    xs = xs2;
    fs = fs2;
    if (fs.front() - fs.back() < tol &&
        (xs.front() - xs.back()).cwiseAbs().maxCoeff() < 1e-10) {
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += xs[static_cast<std::size_t>(i)];
    centroid /= n;

    Eigen::VectorXd xr = centroid + (centroid - xs.back());
    double fr = f(xr);
    if (fr > fs.front()) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - xs.back());
      double fe = f(xe);
      if (fe > fr) {
        xs.back() = xe;
        fs.back() = fe;
      } else {
        xs.back() = xr;
        fs.back() = fr;
      }
    } else if (fr > fs[static_cast<std::size_t>(n - 1)]) {
      xs.back() = xr;
      fs.back() = fr;
    } else {
      Eigen::VectorXd xc = centroid + 0.5 * (xs.back() - centroid);
      double fc = f(xc);
      if (fc > fs.back()) {
        xs.back() = xc;
        fs.back() = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          xs[static_cast<std::size_t>(i)] =
              xs.front() + 0.5 * (xs[static_cast<std::size_t>(i)] - xs.front());
          fs[static_cast<std::size_t>(i)] = f(xs[static_cast<std::size_t>(i)]);
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i <= n; ++i) {
    if (fs[static_cast<std::size_t>(i)] > fs[static_cast<std::size_t>(best)]) best = i;
  }
  return xs[static_cast<std::size_t>(best)];
}

inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd hi = x, lo = x;
    hi[i] += h;
    lo[i] -= h;
    g[i] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

// Random panel design with choices sampled from softmax(design * beta).
inline gplccm::mnl::ChoiceDesign random_design(gplccm::Rng& rng, int persons, int scenarios,
                                               int alternatives, const Eigen::VectorXd& beta) {
  gplccm::mnl::ChoiceDesign design;
  for (Eigen::Index d = 0; d < beta.size(); ++d) {
    design.column_labels.push_back("x" + std::to_string(d + 1));
  }
  for (int n = 0; n < persons; ++n) {
    gplccm::mnl::PersonDesign pd;
    for (int t = 0; t < scenarios; ++t) {
      gplccm::mnl::ScenarioDesign sd;
      sd.design.resize(alternatives, beta.size());
      for (int j = 0; j < alternatives; ++j) {
        for (Eigen::Index d = 0; d < beta.size(); ++d) sd.design(j, d) = rng.normal();
        sd.available.push_back(1);
      }
      Eigen::VectorXd u = sd.design * beta;
      Eigen::VectorXd p = (u.array() - u.maxCoeff()).exp();
      p /= p.sum();
      double r = rng.uniform();
      double acc = 0.0;
      sd.chosen = alternatives - 1;
      for (int j = 0; j < alternatives; ++j) {
        acc += p[j];
        if (r < acc) {
          sd.chosen = j;
          break;
        }
      }
      pd.scenarios.push_back(std::move(sd));
    }
    design.persons.push_back(std::move(pd));
  }
  return design;
}

inline double rel_error(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  double scale = std::max(1.0, want.cwiseAbs().maxCoeff());
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

}  // namespace testsupport
