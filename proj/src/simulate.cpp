#include "gplccm/simulate.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gplccm/errors.hpp"
#include "gplccm/numerics.hpp"
#include "gplccm/rng.hpp"

namespace gplccm::sim {

namespace {

void validate(const SimulateConfig& c) {
  if (c.n_persons < 1 || c.n_scenarios < 1 || c.n_alternatives < 2 || c.n_features < 1) {
    throw ConfigError("generator sizes must be positive (and at least two alternatives)");
  }
  if (c.betas.empty()) throw ConfigError("generator needs at least one class beta vector");
  const Eigen::Index p = c.betas[0].size();
  for (const auto& b : c.betas) {
    if (b.size() != p) throw ConfigError("all class beta vectors must have the same length");
  }
  if (c.membership_rule == "linear") {
    if (c.n_classes() > 1 && (c.gamma.rows() != c.n_classes() - 1 ||
                              c.gamma.cols() != c.n_features + 1)) {
      throw ConfigError("linear membership rule needs gamma of shape (K-1) x (1 + features)");
    }
  } else if (c.membership_rule == "nonlinear") {
    if (c.n_classes() > 2) {
      throw ConfigError("the nonlinear membership rule is defined for one or two classes");
    }
    if (!(c.radius > 0.0)) throw ConfigError("nonlinear rule radius must be positive");
  } else {
    throw ConfigError("unknown membership rule '" + c.membership_rule + "'");
  }
}

Eigen::VectorXd rule_probabilities(const SimulateConfig& c, const Eigen::VectorXd& s) {
  const int k = c.n_classes();
  if (k == 1) return Eigen::VectorXd::Ones(1);
  if (c.membership_rule == "nonlinear") {
    double p1 = sigmoid(c.steepness * (s.squaredNorm() - c.radius * c.radius));
    Eigen::VectorXd p(2);
    p << 1.0 - p1, p1;
    return p;
  }
  Eigen::VectorXd u = Eigen::VectorXd::Zero(k);
  for (int j = 0; j < k - 1; ++j) {
    u[j] = c.gamma(j, 0) + c.gamma.row(j).tail(s.size()).dot(s);
  }
  Eigen::VectorXd p = (u.array() - u.maxCoeff()).exp();
  return p / p.sum();
}

int sample_from(const Eigen::VectorXd& probs, Rng& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

SimulatedData generate(const SimulateConfig& config, std::uint64_t seed) {
  validate(config);
  const int k = config.n_classes();
  const int p = static_cast<int>(config.betas[0].size());
  Rng root(seed);
  Rng feature_rng = root.fork(1);
  Rng class_rng = root.fork(2);
  Rng choice_rng = root.fork(3);

  SimulatedData out;
  out.features.matrix.resize(config.n_persons, config.n_features);
  for (int j = 0; j < config.n_features; ++j) {
    out.features.feature_names.push_back("feat_" + std::to_string(j + 1));
  }
  out.class_probs.resize(config.n_persons, k);
  out.true_class.resize(static_cast<std::size_t>(config.n_persons));
  out.panel.persons.reserve(static_cast<std::size_t>(config.n_persons));
  for (int j = 0; j < p; ++j) {
    out.panel.attribute_names.push_back("attr_" + std::to_string(j + 1));
  }

  for (int n = 0; n < config.n_persons; ++n) {
    for (int j = 0; j < config.n_features; ++j) {
      out.features.matrix(n, j) = feature_rng.normal();
    }
    Eigen::VectorXd s = out.features.matrix.row(n).transpose();
    Eigen::VectorXd cp = rule_probabilities(config, s);
    out.class_probs.row(n) = cp.transpose();
    int cls;
    if (config.hard_assignment) {
      Eigen::Index arg;
      cp.maxCoeff(&arg);
      cls = static_cast<int>(arg);
    } else {
      cls = sample_from(cp, class_rng);
    }
    out.true_class[static_cast<std::size_t>(n)] = cls;
    out.features.person_ids.push_back(n + 1);

    PersonData person;
    person.person_id = n + 1;
    for (int t = 0; t < config.n_scenarios; ++t) {
      ScenarioData scen;
      scen.scenario_id = t + 1;
      scen.attributes.resize(config.n_alternatives, p);
      for (int j = 0; j < config.n_alternatives; ++j) {
        scen.alternative_ids.push_back(j + 1);
        scen.available.push_back(1);
        for (int a = 0; a < p; ++a) {
          scen.attributes(j, a) = config.attribute_scale * choice_rng.normal();
        }
      }
      Eigen::VectorXd u = scen.attributes * config.betas[static_cast<std::size_t>(cls)];
      Eigen::VectorXd probs = (u.array() - u.maxCoeff()).exp();
      probs /= probs.sum();
      scen.chosen = sample_from(probs, choice_rng);
      person.scenarios.push_back(std::move(scen));
    }
    out.panel.persons.push_back(std::move(person));
  }
  return out;
}

void write_simulated(const SimulatedData& data, const SimulateConfig& config,
                     const std::string& prefix) {
  {
    std::ofstream out(prefix + "choices.csv");
    if (!out) throw DataError("cannot write " + prefix + "choices.csv");
    out << "person_id,scenario_id,alt_id,available,chosen";
    for (const auto& a : data.panel.attribute_names) out << "," << a;
    out << "\n";
    out.precision(17);
    for (const auto& person : data.panel.persons) {
      for (const auto& scen : person.scenarios) {
        for (std::size_t j = 0; j < scen.alternative_ids.size(); ++j) {
          out << person.person_id << "," << scen.scenario_id << "," << scen.alternative_ids[j]
              << "," << static_cast<int>(scen.available[j]) << ","
              << (static_cast<int>(j) == scen.chosen ? 1 : 0);
          for (Eigen::Index a = 0; a < scen.attributes.cols(); ++a) {
            out << "," << scen.attributes(static_cast<Eigen::Index>(j), a);
          }
          out << "\n";
        }
      }
    }
  }
  {
    std::ofstream out(prefix + "persons.csv");
    if (!out) throw DataError("cannot write " + prefix + "persons.csv");
    out << "person_id";
    for (const auto& f : data.features.feature_names) out << "," << f;
    out << "\n";
    out.precision(17);
    for (std::size_t n = 0; n < data.features.person_ids.size(); ++n) {
      out << data.features.person_ids[n];
      for (Eigen::Index j = 0; j < data.features.matrix.cols(); ++j) {
        out << "," << data.features.matrix(static_cast<Eigen::Index>(n), j);
      }
      out << "\n";
    }
  }
  {
    nlohmann::json truth;
    truth["n_classes"] = config.n_classes();
    truth["membership_rule"] = config.membership_rule;
    for (const auto& b : config.betas) {
      truth["betas"].push_back(std::vector<double>(b.data(), b.data() + b.size()));
    }
    truth["true_class"] = data.true_class;
    std::ofstream out(prefix + "truth.json");
    if (!out) throw DataError("cannot write " + prefix + "truth.json");
    out << truth.dump(2) << "\n";
  }
}

}  // namespace gplccm::sim
