// Command line front end: config-driven estimation, prediction,
// cross-validation, explanation and synthetic data generation. Every command
// is deterministic in (config, seed, input bytes); all randomness flows from
// the --seed flag through forked child streams.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gplccm/config.hpp"
#include "gplccm/csv.hpp"
#include "gplccm/data_model.hpp"
#include "gplccm/design.hpp"
#include "gplccm/errors.hpp"
#include "gplccm/evaluation.hpp"
#include "gplccm/gp_lccm.hpp"
#include "gplccm/interpret.hpp"
#include "gplccm/kernels.hpp"
#include "gplccm/lccm_baseline.hpp"
#include "gplccm/mnl.hpp"
#include "gplccm/model_io.hpp"
#include "gplccm/numerics.hpp"
#include "gplccm/simulate.hpp"

namespace fs = std::filesystem;
using namespace gplccm;

namespace {

// Shortest text that round-trips the double exactly; used for every numeric
// cell so identical estimates give byte-identical files.
std::string real_str(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
}

std::string error_category(int exit_code) {
  switch (exit_code) {
    case 2: return "config";
    case 3: return "data";
    case 4: return "estimation";
    case 5: return "prediction";
    default: return "internal";
  }
}

// Flags shared by the estimating commands; config file first, flags override.
struct Overrides {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  std::string model;
  int k = 0;
  std::string kernel;
  int restarts = 0;
  int folds = 0;
  int threads = 0;

  bool seed_set = false;
};

void add_common(CLI::App* cmd, Overrides& o, bool config_required) {
  auto* cfg = cmd->add_option("--config", o.config_path, "JSON run configuration");
  if (config_required) cfg->required();
  cmd->add_option("--out", o.out_dir, "output directory (created if absent)");
  cmd->add_option("--seed", o.seed, "root random seed")->each([&o](const std::string&) {
    o.seed_set = true;
  });
  cmd->add_option("--model", o.model, "model kind: mnl, lccm or gp-lccm");
  cmd->add_option("--k", o.k, "number of latent classes");
  cmd->add_option("--kernel", o.kernel, "kernel expression");
  cmd->add_option("--restarts", o.restarts, "estimation restarts");
  cmd->add_option("--folds", o.folds, "cross-validation folds");
  cmd->add_option("--threads", o.threads, "worker threads (results do not depend on it)");
}

RunConfig resolve_config(const Overrides& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : parse_config_file(o.config_path);
  if (o.seed_set) c.seed = o.seed;
  if (!o.model.empty()) c.model = o.model;
  if (o.k > 0) c.n_classes = o.k;
  if (!o.kernel.empty()) {
    parse_kernel(o.kernel);
    c.kernel = o.kernel;
  }
  if (o.restarts > 0) c.restarts = o.restarts;
  if (o.folds > 0) c.folds = o.folds;
  if (o.threads > 0) c.threads = o.threads;
  if (c.model != "mnl" && c.model != "lccm" && c.model != "gp-lccm") {
    throw ConfigError("model must be 'mnl', 'lccm' or 'gp-lccm'");
  }
  return c;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

// ---------------------------------------------------------------------------
// estimate

void write_parameter_table(const fs::path& path, const io::ModelArtifact& a) {
  std::ostringstream os;
  os << "component,class,label,estimate,std_err,p_value\n";
  for (std::size_t k = 0; k < a.choice.size(); ++k) {
    const Eigen::VectorXd& beta = a.choice[k].beta;
    for (Eigen::Index i = 0; i < beta.size(); ++i) {
      double se = k < a.se.size() && i < a.se[k].size()
                      ? a.se[k][i]
                      : std::numeric_limits<double>::quiet_NaN();
      double p = k < a.p_value.size() && i < a.p_value[k].size()
                     ? a.p_value[k][i]
                     : std::numeric_limits<double>::quiet_NaN();
      os << "choice," << k + 1 << "," << csv_quote(a.utility_labels[static_cast<std::size_t>(i)])
         << "," << real_str(beta[i]) << "," << real_str(se) << "," << real_str(p) << "\n";
    }
  }
  for (Eigen::Index k = 0; k < a.membership_gamma.rows(); ++k) {
    for (Eigen::Index j = 0; j < a.membership_gamma.cols(); ++j) {
      std::string label = j == 0 ? std::string("intercept")
                                 : (j - 1 < static_cast<Eigen::Index>(a.feature_names.size())
                                        ? a.feature_names[static_cast<std::size_t>(j - 1)]
                                        : "feature_" + std::to_string(j));
      os << "membership," << k + 1 << "," << csv_quote(label) << ","
         << real_str(a.membership_gamma(k, j)) << ",nan,nan\n";
    }
  }
  for (std::size_t c = 0; c < a.kernels.size(); ++c) {
    PackedHyperparameters packed = pack_hyperparameters(parse_kernel(a.kernels[c]));
    for (Eigen::Index i = 0; i < packed.log_values.size(); ++i) {
      os << "kernel," << c + 1 << "," << csv_quote(packed.names[static_cast<std::size_t>(i)])
         << "," << real_str(std::exp(packed.log_values[i])) << ",nan,nan\n";
    }
  }
  write_text(path, os.str());
}

int cmd_estimate(const Overrides& o) {
  RunConfig config = resolve_config(o);
  PreparedData data = prepare_data(config);
  const mnl::ChoiceDesign& design = data.built.design;
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(design.person_count());

  io::ModelArtifact artifact;
  eval::FitReport report;
  if (config.model == "mnl") {
    mnl::ChoiceParams params = mnl::maximize_weighted(design, ones, data.built.init);
    double ll = mnl::per_person_loglik(design, params.beta).sum();
    report = eval::make_report(design, params, ll);
    artifact = io::from_mnl(params, ll);
    mnl::StandardErrors se = mnl::standard_errors(design, params, ones);
    artifact.se.push_back(se.se);
    artifact.p_value.push_back(se.p_value);
  } else if (config.model == "lccm") {
    lccm::FittedLccm fit = lccm::fit_lccm(design, data.features.matrix, config.n_classes,
                                          data.built.init, config.seed, lccm_options(config));
    report = eval::make_report(design, fit);
    artifact = io::from_lccm(fit);
    for (int k = 0; k < fit.n_classes; ++k) {
      mnl::StandardErrors se = mnl::standard_errors(design, fit.choice[static_cast<std::size_t>(k)],
                                                    fit.responsibilities.col(k));
      artifact.se.push_back(se.se);
      artifact.p_value.push_back(se.p_value);
    }
  } else {
    KernelSpec kernel = parse_kernel(config.kernel);
    gpl::FittedGpLccm fit = gpl::fit_gp_lccm(design, data.features.matrix, config.n_classes,
                                             kernel, data.built.init, config.seed,
                                             gp_options(config));
    report = eval::make_report(design, fit);
    artifact = io::from_gp_lccm(fit, data.features.matrix);
    for (int k = 0; k < fit.n_classes; ++k) {
      mnl::StandardErrors se = mnl::standard_errors(design, fit.choice[static_cast<std::size_t>(k)],
                                                    fit.responsibilities.col(k));
      artifact.se.push_back(se.se);
      artifact.p_value.push_back(se.p_value);
    }
  }

  artifact.seed = config.seed;
  artifact.utility = config.utility;
  artifact.utility_labels = design.column_labels;
  artifact.feature_names = data.features.feature_names;
  artifact.standardization = data.features.standardization;

  fs::path out(o.out_dir);
  io::save_model((out / "model.json").string(), artifact);
  write_parameter_table(out / "parameters.csv", artifact);
  write_text(out / "fit_report.txt", eval::render_report(report));
  std::cout << eval::render_report(report);
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model_path;
  std::string choices_path;
  std::string persons_path;
  std::string out_dir = ".";
};

int cmd_predict(const PredictArgs& args) {
  io::ModelArtifact artifact = io::load_model(args.model_path);
  ChoicePanel panel = load_panel(args.choices_path);
  BuiltDesign built = build_choice_design(panel, artifact.utility);
  if (built.design.column_labels != artifact.utility_labels) {
    std::ostringstream os;
    os << "choice data does not match the training schema; expected columns:";
    for (const auto& l : artifact.utility_labels) os << " " << l;
    throw PredictionError(os.str());
  }

  const int n = panel.person_count();
  const int n_classes = artifact.n_classes;
  Eigen::MatrixXd s(n, 0);
  if (artifact.kind != "mnl" && !artifact.feature_names.empty()) {
    if (args.persons_path.empty()) {
      throw PredictionError("this model needs a --persons feature file to predict");
    }
    FeatureSchema schema;
    schema.feature_columns = artifact.feature_names;
    PersonFeatures feats = align_to_panel(load_person_features(args.persons_path, schema), panel);
    if (artifact.standardization) feats = apply_standardization(feats, *artifact.standardization);
    s = feats.matrix;
  }

  Eigen::MatrixXd class_probs = Eigen::MatrixXd::Ones(n, n_classes);
  Eigen::VectorXd person_ll(n);
  double total = 0.0;
  gpl::FittedGpLccm gp_fit;
  if (artifact.kind == "mnl") {
    person_ll = mnl::per_person_loglik(built.design, artifact.choice[0].beta);
    total = person_ll.sum();
  } else if (artifact.kind == "lccm") {
    lccm::MembershipParams membership{artifact.membership_gamma};
    class_probs = lccm::membership_probabilities(s, membership);
    person_ll = lccm::person_mixture_loglik(built.design, s, membership, artifact.choice);
    total = person_ll.sum();
  } else {
    gp_fit = io::to_gp_lccm(artifact);
    gpl::GpLccmPrediction pred = gpl::gp_lccm_predict(gp_fit, s, built.design);
    class_probs = pred.class_probs;
    person_ll = pred.person_loglik;
    total = pred.total_loglik;
  }

  std::ostringstream cp;
  cp << "person_id";
  for (int k = 0; k < n_classes; ++k) cp << ",prob_class_" << k + 1;
  cp << ",loglik\n";
  for (int i = 0; i < n; ++i) {
    cp << panel.persons[static_cast<std::size_t>(i)].person_id;
    for (int k = 0; k < n_classes; ++k) cp << "," << real_str(class_probs(i, k));
    cp << "," << real_str(person_ll[i]) << "\n";
  }

  std::ostringstream chp;
  chp << "person_id,scenario_id,alt_id,available,chosen,probability\n";
  for (int i = 0; i < n; ++i) {
    const PersonData& person = panel.persons[static_cast<std::size_t>(i)];
    for (std::size_t t = 0; t < person.scenarios.size(); ++t) {
      const ScenarioData& scen = person.scenarios[t];
      const mnl::ScenarioDesign& sd = built.design.persons[static_cast<std::size_t>(i)].scenarios[t];
      Eigen::VectorXd p;
      if (artifact.kind == "mnl") {
        p = mnl::choice_probabilities(sd, artifact.choice[0].beta);
      } else if (artifact.kind == "lccm") {
        p = Eigen::VectorXd::Zero(sd.design.rows());
        for (int k = 0; k < n_classes; ++k) {
          p += class_probs(i, k) *
               mnl::choice_probabilities(sd, artifact.choice[static_cast<std::size_t>(k)].beta);
        }
      } else {
        p = gpl::mixture_choice_probabilities(gp_fit, class_probs.row(i).transpose(), sd);
      }
      for (std::size_t a = 0; a < scen.alternative_ids.size(); ++a) {
        chp << person.person_id << "," << scen.scenario_id << "," << scen.alternative_ids[a]
            << "," << int(scen.available[a]) << "," << (static_cast<int>(a) == scen.chosen)
            << "," << real_str(p[static_cast<Eigen::Index>(a)]) << "\n";
      }
    }
  }

  std::ostringstream rep;
  rep << "model=" << artifact.kind << "\n"
      << "persons=" << n << "\n"
      << "scenarios=" << panel.scenario_count() << "\n"
      << "total_loglik=" << real_str(total) << "\n";

  fs::path out(args.out_dir);
  write_text(out / "class_probabilities.csv", cp.str());
  write_text(out / "choice_probabilities.csv", chp.str());
  write_text(out / "prediction_report.txt", rep.str());
  std::cout << rep.str();
  return 0;
}

// ---------------------------------------------------------------------------
// crossval

int cmd_crossval(const Overrides& o) {
  RunConfig config = resolve_config(o);
  PreparedData data = prepare_data(config);

  eval::CvModelSpec spec;
  spec.family = config.model == "mnl"    ? eval::ModelFamily::Mnl
                : config.model == "lccm" ? eval::ModelFamily::Lccm
                                         : eval::ModelFamily::GpLccm;
  spec.n_classes = config.n_classes;
  spec.kernel = parse_kernel(config.kernel);
  spec.init = data.built.init;
  spec.lccm = lccm_options(config);
  spec.gp = gp_options(config);

  // Cross-validation refits the feature transform per training fold, so it
  // sees the raw features plus the list of columns to rescale.
  Eigen::MatrixXd features(data.built.design.person_count(), 0);
  if (config.model != "mnl") {
    features = data.raw_features.matrix;
    for (const auto& name : data.standardized_columns) {
      int idx = data.raw_features.column_index(name);
      if (idx < 0) throw ConfigError("standardize column '" + name + "' not found");
      spec.standardize_columns.push_back(idx);
    }
  }

  eval::CvResult cv =
      eval::kfold_cv(data.built.design, features, spec, config.folds, config.seed);

  std::ostringstream rows;
  rows << "fold,persons,loglik\n";
  for (int f = 0; f < cv.folds; ++f) {
    rows << f << "," << cv.fold_persons[f] << "," << real_str(cv.fold_loglik[f]) << "\n";
  }
  std::ostringstream rep;
  rep << "model=" << config.model << "\n"
      << "classes=" << config.n_classes << "\n"
      << "folds=" << cv.folds << "\n"
      << "total_loglik=" << real_str(cv.total_loglik) << "\n"
      << "mean_fold_loglik=" << real_str(cv.mean_fold_loglik) << "\n"
      << "per_person_loglik=" << real_str(cv.per_person_loglik) << "\n";

  fs::path out(o.out_dir);
  write_text(out / "cv.csv", rows.str());
  write_text(out / "cv_report.txt", rep.str());
  std::cout << rep.str();
  return 0;
}

// ---------------------------------------------------------------------------
// explain

struct ExplainArgs {
  std::string model_path;
  std::string persons_path;
  std::vector<long> ids;
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int samples = 0;
  double width = 0.0;
};

int cmd_explain(const ExplainArgs& args) {
  io::ModelArtifact artifact = io::load_model(args.model_path);
  if (artifact.kind == "mnl") {
    throw ConfigError("explain needs a latent class model (lccm or gp-lccm)");
  }

  RunConfig config;
  if (!args.config_path.empty()) config = parse_config_file(args.config_path);
  std::vector<long> ids = args.ids.empty() ? config.explain_persons : args.ids;

  interpret::ExplainOptions options;
  options.n_samples = args.samples > 0 ? args.samples : config.explain_samples;
  options.width = args.width > 0.0 ? args.width : config.explain_width;
  options.seed = args.seed_set ? args.seed : config.seed;

  FeatureSchema schema;
  schema.feature_columns = artifact.feature_names;
  PersonFeatures feats = load_person_features(args.persons_path, schema);
  if (artifact.standardization) feats = apply_standardization(feats, *artifact.standardization);

  gpl::FittedGpLccm gp_fit;
  if (artifact.kind == "gp-lccm") gp_fit = io::to_gp_lccm(artifact);
  lccm::MembershipParams membership{artifact.membership_gamma};

  std::ostringstream summary;
  fs::path out(args.out_dir);
  for (long id : ids) {
    int row = -1;
    for (std::size_t i = 0; i < feats.person_ids.size(); ++i) {
      if (feats.person_ids[i] == id) row = static_cast<int>(i);
    }
    if (row < 0) {
      throw DataError("person " + std::to_string(id) + " not found in the feature file");
    }
    Eigen::VectorXd instance = feats.matrix.row(row).transpose();

    std::ostringstream bars;
    bars << "feature,weight,class\n";
    for (int k = 0; k < artifact.n_classes; ++k) {
      interpret::Explanation ex;
      if (artifact.kind == "gp-lccm") {
        ex = interpret::explain_instance(gp_fit, feats.matrix, instance, k, options);
      } else {
        auto black_box = [&](const Eigen::VectorXd& x) {
          return lccm::membership_row(x, membership)[k];
        };
        ex = interpret::explain_function(black_box, feats.matrix, instance, options);
        ex.target_class = k;
      }
      for (Eigen::Index j = 0; j < ex.weights.size(); ++j) {
        bars << csv_quote(feats.feature_names[static_cast<std::size_t>(j)]) << ","
             << real_str(ex.weights[j]) << "," << k + 1 << "\n";
      }
      summary << "person=" << id << " class=" << k + 1
              << " probability=" << real_str(ex.instance_probability)
              << " intercept=" << real_str(ex.intercept)
              << " fidelity=" << real_str(ex.fidelity)
              << " ridge_fallback=" << (ex.ridge_fallback ? "true" : "false") << "\n";
    }
    write_text(out / ("explanation_person_" + std::to_string(id) + ".csv"), bars.str());
  }
  if (!ids.empty()) write_text(out / "explanations.txt", summary.str());
  std::cout << summary.str();
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const Overrides& o) {
  RunConfig config = resolve_config(o);
  if (!config.simulate) {
    throw ConfigError("the config file has no 'simulate' section");
  }
  sim::SimulatedData data = sim::generate(*config.simulate, config.seed);
  fs::path out(o.out_dir);
  sim::write_simulated(data, *config.simulate, (out / "").string());
  std::cout << "persons=" << data.features.person_count() << "\n"
            << "scenarios=" << data.panel.scenario_count() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// compare

int cmd_compare(const std::vector<std::string>& reports, const std::string& out_dir) {
  std::ostringstream os;
  os << "model,classes,parameters,log_likelihood,aic,bic,converged\n";
  for (const auto& path : reports) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open fit report " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      kv.emplace(line.substr(0, eq), line.substr(eq + 1));
    }
    for (const char* key : {"model", "classes", "parameters", "log_likelihood", "aic", "bic"}) {
      if (!kv.count(key)) throw DataError(path + " is not a fit report: missing '" + key + "'");
    }
    os << kv["model"] << "," << kv["classes"] << "," << kv["parameters"] << ","
       << kv["log_likelihood"] << "," << kv["aic"] << "," << kv["bic"] << ","
       << kv["converged"] << "\n";
  }
  write_text(fs::path(out_dir) / "compare.csv", os.str());
  std::cout << os.str();
  return 0;
}

int guarded(const std::string& out_dir, const std::function<int()>& body) {
  try {
    fs::create_directories(out_dir);
    return body();
  } catch (const Error& e) {
    int code = exit_code_for(e);
    nlohmann::json j;
    j["error"] = {{"category", error_category(code)},
                  {"message", e.what()},
                  {"exit_code", code}};
    std::ofstream out(fs::path(out_dir) / "error.json");
    if (out) out << j.dump(1) << "\n";
    std::cerr << "error (" << error_category(code) << "): " << e.what() << "\n";
    return code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-process latent class choice model toolkit"};
  app.require_subcommand(1);

  Overrides est, cv, sim_args;
  PredictArgs pred;
  ExplainArgs expl;
  std::vector<std::string> compare_reports;
  std::string compare_out = ".";

  CLI::App* c_est = app.add_subcommand("estimate", "fit a model and write its artifact");
  add_common(c_est, est, true);

  CLI::App* c_pred = app.add_subcommand("predict", "apply a saved model to new data");
  c_pred->add_option("--model", pred.model_path, "model artifact (model.json)")->required();
  c_pred->add_option("--choices", pred.choices_path, "choice data to score")->required();
  c_pred->add_option("--persons", pred.persons_path, "person feature file");
  c_pred->add_option("--out", pred.out_dir, "output directory");

  CLI::App* c_cv = app.add_subcommand("crossval", "k-fold cross-validated predictive fit");
  add_common(c_cv, cv, true);

  CLI::App* c_expl = app.add_subcommand("explain", "local surrogate explanations");
  c_expl->add_option("--model", expl.model_path, "model artifact")->required();
  c_expl->add_option("--persons", expl.persons_path, "person feature file")->required();
  c_expl->add_option("--id", expl.ids, "person ids to explain");
  c_expl->add_option("--config", expl.config_path, "JSON run configuration");
  c_expl->add_option("--out", expl.out_dir, "output directory");
  c_expl->add_option("--seed", expl.seed, "perturbation seed")->each([&expl](const std::string&) {
    expl.seed_set = true;
  });
  c_expl->add_option("--samples", expl.samples, "perturbation sample count");
  c_expl->add_option("--width", expl.width, "proximity kernel width");

  CLI::App* c_sim = app.add_subcommand("simulate", "generate a synthetic population");
  add_common(c_sim, sim_args, true);

  CLI::App* c_cmp = app.add_subcommand("compare", "tabulate fit reports side by side");
  c_cmp->add_option("reports", compare_reports, "fit_report.txt files")->required();
  c_cmp->add_option("--out", compare_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  if (c_est->parsed()) return guarded(est.out_dir, [&] { return cmd_estimate(est); });
  if (c_pred->parsed()) return guarded(pred.out_dir, [&] { return cmd_predict(pred); });
  if (c_cv->parsed()) return guarded(cv.out_dir, [&] { return cmd_crossval(cv); });
  if (c_expl->parsed()) return guarded(expl.out_dir, [&] { return cmd_explain(expl); });
  if (c_sim->parsed()) return guarded(sim_args.out_dir, [&] { return cmd_simulate(sim_args); });
  if (c_cmp->parsed()) return guarded(compare_out, [&] { return cmd_compare(compare_reports, compare_out); });
  return 0;
}
