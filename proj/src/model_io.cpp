#include "gplccm/model_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "gplccm/errors.hpp"
#include "gplccm/kernels.hpp"

namespace gplccm::io {

namespace {

using nlohmann::json;

json encode_real(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double decode_real(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) {
    if (j == "inf") return std::numeric_limits<double>::infinity();
    if (j == "-inf") return -std::numeric_limits<double>::infinity();
    throw PredictionError("model artifact has a malformed numeric field");
  }
  return j.get<double>();
}

json encode_vector(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(encode_real(v[i]));
  return a;
}

Eigen::VectorXd decode_vector(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& x : j) v[i++] = decode_real(x);
  return v;
}

json encode_matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    rows.push_back(encode_vector(m.row(r).transpose()));
  }
  return rows;
}

Eigen::MatrixXd decode_matrix(const json& j) {
  if (j.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()),
                    static_cast<Eigen::Index>(j.front().size()));
  Eigen::Index r = 0;
  for (const auto& row : j) {
    if (static_cast<Eigen::Index>(row.size()) != m.cols()) {
      throw PredictionError("model artifact has a ragged matrix");
    }
    m.row(r++) = decode_vector(row).transpose();
  }
  return m;
}

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw PredictionError(std::string("model artifact is missing field '") + key + "'");
  }
  return *it;
}

json encode_utility(const UtilitySpec& u) {
  json j;
  j["generic_attributes"] = u.generic_attributes;
  j["constant_alternatives"] = u.constant_alternatives;
  if (u.count) {
    json c;
    json modes = json::array();
    for (const auto& m : u.count->modes) {
      modes.push_back(json{{"name", m.name}, {"attributes", m.attributes}});
    }
    c["modes"] = std::move(modes);
    c["total_trips"] = u.count->total_trips;
    json pins = json::array();
    for (const auto& [m, t] : u.count->fixed_constants) pins.push_back(json::array({m, t}));
    c["fixed_constants"] = std::move(pins);
    j["count"] = std::move(c);
  } else {
    j["count"] = nullptr;
  }
  json bounds = json::array();
  for (const auto& b : u.bounds) {
    bounds.push_back(
        json{{"label", b.label}, {"lower", encode_real(b.lower)}, {"upper", encode_real(b.upper)}});
  }
  j["bounds"] = std::move(bounds);
  j["fixed"] = u.fixed;
  return j;
}

UtilitySpec decode_utility(const json& j) {
  UtilitySpec u;
  u.generic_attributes = require(j, "generic_attributes").get<std::vector<std::string>>();
  u.constant_alternatives = require(j, "constant_alternatives").get<std::vector<long>>();
  if (!require(j, "count").is_null()) {
    const json& c = j["count"];
    CountUtilitySpec cs;
    for (const auto& m : require(c, "modes")) {
      CountUtilitySpec::Mode mode;
      mode.name = require(m, "name").get<std::string>();
      mode.attributes = require(m, "attributes").get<std::vector<std::string>>();
      cs.modes.push_back(std::move(mode));
    }
    cs.total_trips = require(c, "total_trips").get<int>();
    for (const auto& p : require(c, "fixed_constants")) {
      cs.fixed_constants.emplace_back(p[0].get<int>(), p[1].get<int>());
    }
    u.count = std::move(cs);
  }
  for (const auto& b : require(j, "bounds")) {
    UtilitySpec::Bound bound;
    bound.label = require(b, "label").get<std::string>();
    bound.lower = decode_real(require(b, "lower"));
    bound.upper = decode_real(require(b, "upper"));
    u.bounds.push_back(std::move(bound));
  }
  u.fixed = require(j, "fixed").get<std::vector<std::string>>();
  return u;
}

}  // namespace

void save_model(const std::string& path, const ModelArtifact& a) {
  json j;
  j["format"] = "gplccm-model";
  j["version"] = 1;
  j["kind"] = a.kind;
  j["seed"] = a.seed;
  j["n_classes"] = a.n_classes;
  j["utility"] = encode_utility(a.utility);
  j["utility_labels"] = a.utility_labels;

  json choice = json::array();
  for (std::size_t k = 0; k < a.choice.size(); ++k) {
    json c;
    c["beta"] = encode_vector(a.choice[k].beta);
    c["lower"] = encode_vector(a.choice[k].lower);
    c["upper"] = encode_vector(a.choice[k].upper);
    c["fixed"] = a.choice[k].fixed;
    if (k < a.se.size()) c["se"] = encode_vector(a.se[k]);
    if (k < a.p_value.size()) c["p_value"] = encode_vector(a.p_value[k]);
    choice.push_back(std::move(c));
  }
  j["choice"] = std::move(choice);

  j["membership_gamma"] = encode_matrix(a.membership_gamma);
  j["kernels"] = a.kernels;
  j["train_features"] = encode_matrix(a.train_features);
  j["train_labels"] = a.train_labels;
  j["feature_names"] = a.feature_names;
  if (a.standardization) {
    json s;
    s["columns"] = a.standardization->columns;
    s["mean"] = encode_vector(a.standardization->mean);
    s["std"] = encode_vector(a.standardization->std_dev);
    j["standardization"] = std::move(s);
  } else {
    j["standardization"] = nullptr;
  }
  j["responsibilities"] = encode_matrix(a.responsibilities);
  j["trace_marginal"] = a.trace_marginal;
  j["trace_complete"] = a.trace_complete;
  j["log_likelihood"] = a.log_likelihood;
  j["converged"] = a.converged;
  j["iterations"] = a.iterations;
  j["warnings"] = a.warnings;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model artifact to " + path);
  out << j.dump(1) << "\n";
}

ModelArtifact load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PredictionError("cannot open model artifact " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw PredictionError(std::string("model artifact is not valid JSON: ") + e.what());
  }
  if (require(j, "format") != "gplccm-model") {
    throw PredictionError("file is not a model artifact");
  }
  if (require(j, "version").get<int>() != 1) {
    throw PredictionError("unsupported model artifact version");
  }

  ModelArtifact a;
  a.kind = require(j, "kind").get<std::string>();
  a.seed = require(j, "seed").get<std::uint64_t>();
  a.n_classes = require(j, "n_classes").get<int>();
  a.utility = decode_utility(require(j, "utility"));
  a.utility_labels = require(j, "utility_labels").get<std::vector<std::string>>();
  for (const auto& c : require(j, "choice")) {
    mnl::ChoiceParams p;
    p.beta = decode_vector(require(c, "beta"));
    p.lower = decode_vector(require(c, "lower"));
    p.upper = decode_vector(require(c, "upper"));
    p.fixed = require(c, "fixed").get<std::vector<char>>();
    a.choice.push_back(std::move(p));
    if (c.contains("se")) a.se.push_back(decode_vector(c["se"]));
    if (c.contains("p_value")) a.p_value.push_back(decode_vector(c["p_value"]));
  }
  a.membership_gamma = decode_matrix(require(j, "membership_gamma"));
  a.kernels = require(j, "kernels").get<std::vector<std::string>>();
  a.train_features = decode_matrix(require(j, "train_features"));
  a.train_labels = require(j, "train_labels").get<std::vector<std::vector<int>>>();
  a.feature_names = require(j, "feature_names").get<std::vector<std::string>>();
  if (!require(j, "standardization").is_null()) {
    const json& s = j["standardization"];
    Standardization t;
    t.columns = require(s, "columns").get<std::vector<std::string>>();
    t.mean = decode_vector(require(s, "mean"));
    t.std_dev = decode_vector(require(s, "std"));
    a.standardization = std::move(t);
  }
  a.responsibilities = decode_matrix(require(j, "responsibilities"));
  a.trace_marginal = require(j, "trace_marginal").get<std::vector<double>>();
  a.trace_complete = require(j, "trace_complete").get<std::vector<double>>();
  a.log_likelihood = require(j, "log_likelihood").get<double>();
  a.converged = require(j, "converged").get<bool>();
  a.iterations = require(j, "iterations").get<int>();
  a.warnings = require(j, "warnings").get<std::vector<std::string>>();
  return a;
}

ModelArtifact from_gp_lccm(const gpl::FittedGpLccm& fit, const Eigen::MatrixXd& s) {
  ModelArtifact a;
  a.kind = "gp-lccm";
  a.n_classes = fit.n_classes;
  a.choice = fit.choice;
  for (const auto& spec : fit.classifier.specs) a.kernels.push_back(spec.to_expression());
  a.train_features = s;
  for (const auto& state : fit.classifier.states) a.train_labels.push_back(state.labels);
  a.responsibilities = fit.responsibilities;
  for (const auto& rec : fit.trace) {
    a.trace_marginal.push_back(rec.marginal_loglik);
    a.trace_complete.push_back(rec.complete_loglik);
  }
  a.log_likelihood = fit.log_likelihood;
  a.converged = fit.converged;
  a.iterations = fit.iterations;
  a.warnings = fit.warnings;
  return a;
}

ModelArtifact from_lccm(const lccm::FittedLccm& fit) {
  ModelArtifact a;
  a.kind = "lccm";
  a.n_classes = fit.n_classes;
  a.choice = fit.choice;
  a.membership_gamma = fit.membership.gamma;
  a.responsibilities = fit.responsibilities;
  a.trace_marginal = fit.trace;
  a.log_likelihood = fit.log_likelihood;
  a.converged = fit.converged;
  a.iterations = fit.iterations;
  a.warnings = fit.warnings;
  return a;
}

ModelArtifact from_mnl(const mnl::ChoiceParams& params, double loglik) {
  ModelArtifact a;
  a.kind = "mnl";
  a.n_classes = 1;
  a.choice.push_back(params);
  a.log_likelihood = loglik;
  a.converged = true;
  return a;
}

gpl::FittedGpLccm to_gp_lccm(const ModelArtifact& a) {
  if (a.kind != "gp-lccm") throw PredictionError("artifact does not hold a gp-lccm model");
  gpl::FittedGpLccm fit;
  fit.n_classes = a.n_classes;
  fit.choice = a.choice;
  fit.responsibilities = a.responsibilities;
  for (std::size_t i = 0; i < a.trace_marginal.size(); ++i) {
    gpl::IterationRecord rec;
    rec.marginal_loglik = a.trace_marginal[i];
    rec.complete_loglik = i < a.trace_complete.size() ? a.trace_complete[i] : 0.0;
    fit.trace.push_back(rec);
  }
  fit.log_likelihood = a.log_likelihood;
  fit.converged = a.converged;
  fit.iterations = a.iterations;
  fit.warnings = a.warnings;

  fit.classifier.n_classes = a.n_classes;
  fit.classifier.n_points = static_cast<int>(a.train_features.rows());
  if (a.kernels.size() != a.train_labels.size()) {
    throw PredictionError("artifact kernel and label lists disagree");
  }
  for (std::size_t c = 0; c < a.kernels.size(); ++c) {
    KernelSpec spec = parse_kernel(a.kernels[c]);
    fit.classifier.specs.push_back(spec);
    fit.classifier.states.push_back(gp::laplace_fit(spec, a.train_features, a.train_labels[c]));
  }
  return fit;
}

lccm::FittedLccm to_lccm(const ModelArtifact& a) {
  if (a.kind != "lccm") throw PredictionError("artifact does not hold an lccm model");
  lccm::FittedLccm fit;
  fit.n_classes = a.n_classes;
  fit.membership.gamma = a.membership_gamma;
  fit.choice = a.choice;
  fit.responsibilities = a.responsibilities;
  fit.trace = a.trace_marginal;
  fit.log_likelihood = a.log_likelihood;
  fit.converged = a.converged;
  fit.iterations = a.iterations;
  fit.warnings = a.warnings;
  return fit;
}

}  // namespace gplccm::io
