#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gplccm/data_model.hpp"

namespace gplccm::sim {

// Synthetic population generator: person features drawn standard normal,
// latent classes assigned by a linear-logit or nonlinear rule of the
// features, choices sampled from class-specific logit utilities over
// independently drawn alternative attributes.
struct SimulateConfig {
  int n_persons = 500;
  int n_scenarios = 4;
  int n_alternatives = 3;
  int n_features = 2;
  double attribute_scale = 1.0;

  // One coefficient vector per class; the common length is the attribute count.
  std::vector<Eigen::VectorXd> betas;

  // "linear": class utilities gamma * [1, s] with the last class as base.
  // "nonlinear": two classes, P(class 1) = sigmoid(steepness * (|s|^2 - radius^2)).
  std::string membership_rule = "nonlinear";
  Eigen::MatrixXd gamma;  // (K-1) x (1 + n_features), linear rule only
  double radius = 1.1774;  // median of |s| for two standard normal features
  double steepness = 3.0;

  // Assign each person the rule's most likely class instead of sampling it.
  bool hard_assignment = false;

  int n_classes() const { return static_cast<int>(betas.size()); }
};

struct SimulatedData {
  ChoicePanel panel;
  PersonFeatures features;
  std::vector<int> true_class;
  Eigen::MatrixXd class_probs;  // rule probabilities per person
};

SimulatedData generate(const SimulateConfig& config, std::uint64_t seed);

// Writes <prefix>choices.csv, <prefix>persons.csv and <prefix>truth.json.
void write_simulated(const SimulatedData& data, const SimulateConfig& config,
                     const std::string& prefix);

}  // namespace gplccm::sim
