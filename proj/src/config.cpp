#include "gplccm/config.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gplccm/errors.hpp"
#include "gplccm/kernels.hpp"

namespace gplccm {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) { throw ConfigError("config: " + what); }

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    bad(std::string("field '") + key + "' has the wrong type");
  }
}

double bound_from_json(const json& j, double fallback) {
  if (j.is_null()) return fallback;
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    if (j == "inf") return std::numeric_limits<double>::infinity();
    if (j == "-inf") return -std::numeric_limits<double>::infinity();
  }
  bad("bounds must be numbers, null, \"inf\" or \"-inf\"");
}

UtilitySpec parse_utility(const json& j) {
  UtilitySpec spec;
  std::string type = get_or<std::string>(j, "type", "generic");
  if (type == "generic") {
    spec.generic_attributes = get_or<std::vector<std::string>>(j, "attributes", {});
    spec.constant_alternatives = get_or<std::vector<long>>(j, "constants", {});
    if (spec.generic_attributes.empty() && spec.constant_alternatives.empty()) {
      bad("generic utility needs 'attributes' and/or 'constants'");
    }
  } else if (type == "count") {
    CountUtilitySpec cs;
    auto modes = j.find("modes");
    if (modes == j.end() || !modes->is_array() || modes->empty()) {
      bad("count utility needs a non-empty 'modes' array");
    }
    for (const auto& m : *modes) {
      CountUtilitySpec::Mode mode;
      mode.name = get_or<std::string>(m, "name", "");
      if (mode.name.empty()) bad("every mode needs a 'name'");
      mode.attributes = get_or<std::vector<std::string>>(m, "attributes", {});
      cs.modes.push_back(std::move(mode));
    }
    cs.total_trips = get_or<int>(j, "total_trips", 0);
    if (cs.total_trips < 1) bad("count utility needs 'total_trips' >= 1");
    for (const auto& fc : get_or<std::vector<json>>(j, "fixed_constants", {})) {
      if (!fc.is_array() || fc.size() != 2) bad("fixed_constants entries are [mode, count]");
      std::string name = fc[0].get<std::string>();
      int idx = -1;
      for (std::size_t m = 0; m < cs.modes.size(); ++m) {
        if (cs.modes[m].name == name) idx = static_cast<int>(m);
      }
      if (idx < 0) bad("fixed constant refers to unknown mode '" + name + "'");
      int count = fc[1].get<int>();
      if (count < 0 || count > cs.total_trips) bad("fixed constant count out of range");
      cs.fixed_constants.emplace_back(idx, count);
    }
    spec.count = std::move(cs);
  } else {
    bad("utility type must be 'generic' or 'count'");
  }

  auto bounds = j.find("bounds");
  if (bounds != j.end()) {
    if (!bounds->is_object()) bad("'bounds' must map labels to [lower, upper]");
    const double inf = std::numeric_limits<double>::infinity();
    for (auto it = bounds->begin(); it != bounds->end(); ++it) {
      if (!it.value().is_array() || it.value().size() != 2) {
        bad("bound for '" + it.key() + "' must be [lower, upper]");
      }
      UtilitySpec::Bound b;
      b.label = it.key();
      b.lower = bound_from_json(it.value()[0], -inf);
      b.upper = bound_from_json(it.value()[1], inf);
      spec.bounds.push_back(std::move(b));
    }
  }
  spec.fixed = get_or<std::vector<std::string>>(j, "fixed", {});
  return spec;
}

sim::SimulateConfig parse_simulate(const json& j) {
  sim::SimulateConfig c;
  c.n_persons = get_or<int>(j, "persons", c.n_persons);
  c.n_scenarios = get_or<int>(j, "scenarios", c.n_scenarios);
  c.n_alternatives = get_or<int>(j, "alternatives", c.n_alternatives);
  c.n_features = get_or<int>(j, "features", c.n_features);
  c.attribute_scale = get_or<double>(j, "attribute_scale", c.attribute_scale);
  auto betas = j.find("betas");
  if (betas == j.end() || !betas->is_array() || betas->empty()) {
    bad("simulate needs a 'betas' array (one vector per class)");
  }
  for (const auto& b : *betas) {
    std::vector<double> v = b.get<std::vector<double>>();
    c.betas.push_back(Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  c.membership_rule = get_or<std::string>(j, "membership_rule", c.membership_rule);
  if (j.contains("gamma")) {
    auto rows = j["gamma"].get<std::vector<std::vector<double>>>();
    if (!rows.empty()) {
      c.gamma.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(rows[0].size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) bad("simulate gamma rows must have equal length");
        for (std::size_t k = 0; k < rows[r].size(); ++k) {
          c.gamma(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
        }
      }
    }
  }
  c.radius = get_or<double>(j, "radius", c.radius);
  c.steepness = get_or<double>(j, "steepness", c.steepness);
  c.hard_assignment = get_or<bool>(j, "hard_assignment", c.hard_assignment);
  return c;
}

RunConfig parse_config_json(const json& j) {
  if (!j.is_object()) bad("top level must be an object");
  static const char* known[] = {
      "choices",  "persons",    "model",   "classes",    "kernel",
      "seed",     "restarts",   "max_iterations", "tolerance", "folds",
      "threads",  "membership_features", "standardize", "utility", "hyper",
      "explain",  "simulate"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) bad("unknown field '" + it.key() + "'");
  }

  RunConfig c;
  c.choices_path = get_or<std::string>(j, "choices", "");
  c.persons_path = get_or<std::string>(j, "persons", "");
  c.model = get_or<std::string>(j, "model", c.model);
  if (c.model != "mnl" && c.model != "lccm" && c.model != "gp-lccm") {
    bad("model must be 'mnl', 'lccm' or 'gp-lccm'");
  }
  c.n_classes = get_or<int>(j, "classes", c.n_classes);
  if (c.n_classes < 1) bad("classes must be at least 1");
  c.kernel = get_or<std::string>(j, "kernel", c.kernel);
  parse_kernel(c.kernel);  // validate early
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.restarts = get_or<int>(j, "restarts", c.restarts);
  if (c.restarts < 1) bad("restarts must be at least 1");
  c.max_iterations = get_or<int>(j, "max_iterations", c.max_iterations);
  if (c.max_iterations < 1) bad("max_iterations must be at least 1");
  c.tolerance = get_or<double>(j, "tolerance", c.tolerance);
  if (!(c.tolerance > 0.0)) bad("tolerance must be positive");
  c.folds = get_or<int>(j, "folds", c.folds);
  if (c.folds < 2) bad("folds must be at least 2");
  c.threads = get_or<int>(j, "threads", c.threads);
  if (c.threads < 1) bad("threads must be at least 1");
  c.membership_features = get_or<std::vector<std::string>>(j, "membership_features", {});
  if (j.contains("standardize") && !j["standardize"].is_null()) {
    if (j["standardize"].is_string()) {
      if (j["standardize"] != "all") bad("standardize must be \"all\" or a column list");
    } else {
      c.standardize = j["standardize"].get<std::vector<std::string>>();
    }
  }
  if (j.contains("utility")) c.utility = parse_utility(j["utility"]);
  if (j.contains("hyper")) {
    const json& h = j["hyper"];
    c.hyper_restarts = get_or<int>(h, "restarts", c.hyper_restarts);
    c.hyper_iterations = get_or<int>(h, "max_iterations", c.hyper_iterations);
    c.refit_iterations = get_or<int>(h, "refit_iterations", c.refit_iterations);
    if (c.hyper_restarts < 1 || c.hyper_iterations < 1 || c.refit_iterations < 1) {
      bad("hyper effort fields must be at least 1");
    }
  }
  if (j.contains("explain")) {
    const json& e = j["explain"];
    c.explain_persons = get_or<std::vector<long>>(e, "persons", {});
    c.explain_samples = get_or<int>(e, "n_samples", c.explain_samples);
    if (c.explain_samples < 10) bad("explain n_samples must be at least 10");
    c.explain_width = get_or<double>(e, "width", c.explain_width);
  }
  if (j.contains("simulate")) c.simulate = parse_simulate(j["simulate"]);
  return c;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    bad(std::string("not valid JSON: ") + e.what());
  }
  return parse_config_json(j);
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

PreparedData prepare_data(const RunConfig& config) {
  if (config.choices_path.empty()) throw ConfigError("config: 'choices' path is required");
  PreparedData d;
  d.panel = load_panel(config.choices_path);

  if (config.model != "mnl" || !config.persons_path.empty()) {
    if (config.persons_path.empty()) {
      throw ConfigError("config: 'persons' path is required for latent class models");
    }
    FeatureSchema fs;
    fs.feature_columns = config.membership_features;
    PersonFeatures raw = load_person_features(config.persons_path, fs);
    d.raw_features = align_to_panel(raw, d.panel);
    d.standardized_columns =
        config.standardize ? *config.standardize : d.raw_features.feature_names;
    d.features = d.standardized_columns.empty()
                     ? d.raw_features
                     : standardize_features(d.raw_features, d.standardized_columns);
  }

  d.built = build_choice_design(d.panel, config.utility);
  return d;
}

lccm::LccmOptions lccm_options(const RunConfig& config) {
  lccm::LccmOptions o;
  o.restarts = config.restarts;
  o.max_iterations = config.max_iterations;
  o.tolerance = config.tolerance;
  return o;
}

gpl::GpLccmOptions gp_options(const RunConfig& config) {
  gpl::GpLccmOptions o;
  o.restarts = config.restarts;
  o.max_iterations = config.max_iterations;
  o.tolerance = config.tolerance;
  o.initial_hyper.restarts = config.hyper_restarts;
  o.initial_hyper.optimizer.max_iterations = config.hyper_iterations;
  o.refit_hyper.restarts = 1;
  o.refit_hyper.optimizer.max_iterations = config.refit_iterations;
  return o;
}

}  // namespace gplccm
