#include "gplccm/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "gplccm/csv.hpp"
#include "gplccm/errors.hpp"

namespace gplccm {

namespace {

double parse_double(const std::string& cell, std::size_t row, const std::string& column) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  if (end == begin || (end && *end != '\0')) {
    std::ostringstream os;
    os << "row " << row << ", column '" << column << "': cannot parse '" << cell
       << "' as a number";
    throw ParseError(os.str());
  }
  return v;
}

long parse_id(const std::string& cell, std::size_t row, const std::string& column) {
  double v = parse_double(cell, row, column);
  double r = std::round(v);
  if (std::abs(v - r) > 1e-9 || std::abs(r) > 9.0e15) {
    std::ostringstream os;
    os << "row " << row << ", column '" << column << "': '" << cell
       << "' is not an integer id";
    throw ParseError(os.str());
  }
  return static_cast<long>(r);
}

int parse_flag(const std::string& cell, std::size_t row, const std::string& column) {
  double v = parse_double(cell, row, column);
  if (v != 0.0 && v != 1.0) {
    std::ostringstream os;
    os << "row " << row << ", column '" << column << "': expected 0 or 1, got '" << cell << "'";
    throw ParseError(os.str());
  }
  return v == 1.0 ? 1 : 0;
}

int require_column(const csv::Table& t, const std::string& name, const char* file_kind) {
  int idx = t.column_index(name);
  if (idx < 0) {
    std::ostringstream os;
    os << file_kind << " is missing required column '" << name << "'";
    throw SchemaError(os.str());
  }
  return idx;
}

}  // namespace

int ChoicePanel::scenario_count() const {
  int n = 0;
  for (const auto& p : persons) n += static_cast<int>(p.scenarios.size());
  return n;
}

int ChoicePanel::person_index(long person_id) const {
  for (std::size_t i = 0; i < persons.size(); ++i) {
    if (persons[i].person_id == person_id) return static_cast<int>(i);
  }
  return -1;
}

int PersonFeatures::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < feature_names.size(); ++i) {
    if (feature_names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

ChoicePanel panel_from_table(const csv::Table& t, const PanelSchema& schema) {
  int pc = require_column(t, schema.person_column, "choices file");
  int sc = require_column(t, schema.scenario_column, "choices file");
  int ac = require_column(t, schema.alternative_column, "choices file");
  int cc = require_column(t, schema.chosen_column, "choices file");
  int vc = schema.availability_column.empty() ? -1 : t.column_index(schema.availability_column);

  std::vector<int> attr_cols;
  std::vector<std::string> attr_names;
  if (schema.attribute_columns.empty()) {
    for (int i = 0; i < static_cast<int>(t.columns.size()); ++i) {
      if (i == pc || i == sc || i == ac || i == cc || i == vc) continue;
      attr_cols.push_back(i);
      attr_names.push_back(t.columns[i]);
    }
  } else {
    for (const auto& name : schema.attribute_columns) {
      attr_cols.push_back(require_column(t, name, "choices file"));
      attr_names.push_back(name);
    }
  }

  struct RawRow {
    long alt;
    int available;
    int chosen;
    std::vector<double> attrs;
  };
  struct RawScenario {
    long id;
    std::vector<RawRow> rows;
  };
  struct RawPerson {
    long id;
    std::vector<RawScenario> scenarios;
    std::unordered_map<long, int> scenario_index;
  };

  std::vector<RawPerson> people;
  std::unordered_map<long, int> person_index;

  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& cells = t.rows[r];
    std::size_t row_no = r + 1;
    long pid = parse_id(cells[pc], row_no, schema.person_column);
    long sid = parse_id(cells[sc], row_no, schema.scenario_column);
    long aid = parse_id(cells[ac], row_no, schema.alternative_column);
    int chosen = parse_flag(cells[cc], row_no, schema.chosen_column);
    int avail = vc < 0 ? 1 : parse_flag(cells[vc], row_no, schema.availability_column);

    auto pit = person_index.find(pid);
    if (pit == person_index.end()) {
      pit = person_index.emplace(pid, static_cast<int>(people.size())).first;
      people.push_back({pid, {}, {}});
    }
    RawPerson& person = people[pit->second];
    auto sit = person.scenario_index.find(sid);
    if (sit == person.scenario_index.end()) {
      sit = person.scenario_index.emplace(sid, static_cast<int>(person.scenarios.size())).first;
      person.scenarios.push_back({sid, {}});
    }
    RawScenario& scen = person.scenarios[sit->second];
    for (const auto& existing : scen.rows) {
      if (existing.alt == aid) {
        std::ostringstream os;
        os << "person " << pid << ", scenario " << sid << ": duplicate alternative " << aid;
        throw DataError(os.str());
      }
    }
    RawRow row{aid, avail, chosen, {}};
    row.attrs.reserve(attr_cols.size());
    for (std::size_t k = 0; k < attr_cols.size(); ++k) {
      row.attrs.push_back(parse_double(cells[attr_cols[k]], row_no, attr_names[k]));
    }
    scen.rows.push_back(std::move(row));
  }

  if (people.empty()) throw DataError("choices file has no data rows");

  ChoicePanel panel;
  panel.attribute_names = attr_names;
  panel.persons.reserve(people.size());
  for (auto& rp : people) {
    PersonData pd;
    pd.person_id = rp.id;
    pd.scenarios.reserve(rp.scenarios.size());
    for (auto& rs : rp.scenarios) {
      ScenarioData sd;
      sd.scenario_id = rs.id;
      const int j = static_cast<int>(rs.rows.size());
      sd.alternative_ids.resize(j);
      sd.available.resize(j);
      sd.attributes.resize(j, static_cast<Eigen::Index>(attr_cols.size()));
      int n_chosen = 0;
      int n_avail = 0;
      for (int i = 0; i < j; ++i) {
        const RawRow& row = rs.rows[static_cast<std::size_t>(i)];
        sd.alternative_ids[static_cast<std::size_t>(i)] = row.alt;
        sd.available[static_cast<std::size_t>(i)] = static_cast<char>(row.available);
        n_avail += row.available;
        for (std::size_t k = 0; k < row.attrs.size(); ++k) {
          sd.attributes(i, static_cast<Eigen::Index>(k)) = row.attrs[k];
        }
        if (row.chosen) {
          ++n_chosen;
          sd.chosen = i;
        }
      }
      std::ostringstream where;
      where << "person " << rp.id << ", scenario " << rs.id;
      if (n_avail == 0) throw DataError(where.str() + ": no available alternative");
      if (n_chosen != 1) {
        std::ostringstream os;
        os << where.str() << ": expected exactly one chosen alternative, found " << n_chosen;
        throw DataError(os.str());
      }
      if (!sd.available[static_cast<std::size_t>(sd.chosen)]) {
        throw DataError(where.str() + ": the chosen alternative is not available");
      }
      pd.scenarios.push_back(std::move(sd));
    }
    panel.persons.push_back(std::move(pd));
  }
  return panel;
}

PersonFeatures features_from_table(const csv::Table& t, const FeatureSchema& schema) {
  int pc = require_column(t, schema.person_column, "persons file");
  std::vector<int> cols;
  std::vector<std::string> names;
  if (schema.feature_columns.empty()) {
    for (int i = 0; i < static_cast<int>(t.columns.size()); ++i) {
      if (i == pc) continue;
      cols.push_back(i);
      names.push_back(t.columns[i]);
    }
  } else {
    for (const auto& name : schema.feature_columns) {
      cols.push_back(require_column(t, name, "persons file"));
      names.push_back(name);
    }
  }
  if (t.rows.empty()) throw DataError("persons file has no data rows");

  PersonFeatures f;
  f.feature_names = names;
  f.matrix.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols.size()));
  f.person_ids.reserve(t.rows.size());
  std::unordered_set<long> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::size_t row_no = r + 1;
    long pid = parse_id(t.rows[r][static_cast<std::size_t>(pc)], row_no, schema.person_column);
    if (!seen.insert(pid).second) {
      std::ostringstream os;
      os << "persons file has a duplicate row for person " << pid;
      throw DataError(os.str());
    }
    f.person_ids.push_back(pid);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      f.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
          parse_double(t.rows[r][static_cast<std::size_t>(cols[k])], row_no, names[k]);
    }
  }
  return f;
}

}  // namespace

ChoicePanel load_panel(const std::string& path, const PanelSchema& schema) {
  return panel_from_table(csv::read_file(path, schema.delimiter), schema);
}

ChoicePanel load_panel_text(const std::string& text, const PanelSchema& schema) {
  return panel_from_table(csv::read_string(text, schema.delimiter), schema);
}

PersonFeatures load_person_features(const std::string& path, const FeatureSchema& schema) {
  return features_from_table(csv::read_file(path, schema.delimiter), schema);
}

PersonFeatures load_person_features_text(const std::string& text, const FeatureSchema& schema) {
  return features_from_table(csv::read_string(text, schema.delimiter), schema);
}

PersonFeatures align_to_panel(const PersonFeatures& features, const ChoicePanel& panel) {
  std::unordered_map<long, int> row_of;
  for (std::size_t i = 0; i < features.person_ids.size(); ++i) {
    row_of.emplace(features.person_ids[i], static_cast<int>(i));
  }
  PersonFeatures out;
  out.feature_names = features.feature_names;
  out.standardization = features.standardization;
  out.matrix.resize(panel.person_count(), features.matrix.cols());
  out.person_ids.reserve(panel.persons.size());
  for (int i = 0; i < panel.person_count(); ++i) {
    long pid = panel.persons[static_cast<std::size_t>(i)].person_id;
    auto it = row_of.find(pid);
    if (it == row_of.end()) {
      std::ostringstream os;
      os << "persons file has no row for person " << pid;
      throw DataError(os.str());
    }
    out.matrix.row(i) = features.matrix.row(it->second);
    out.person_ids.push_back(pid);
  }
  return out;
}

PersonFeatures standardize_features(const PersonFeatures& features,
                                    const std::vector<std::string>& columns) {
  Standardization t;
  t.columns = columns;
  t.mean.resize(static_cast<Eigen::Index>(columns.size()));
  t.std_dev.resize(static_cast<Eigen::Index>(columns.size()));
  const double n = static_cast<double>(features.matrix.rows());
  for (std::size_t k = 0; k < columns.size(); ++k) {
    int c = features.column_index(columns[k]);
    if (c < 0) throw SchemaError("cannot standardize unknown feature column '" + columns[k] + "'");
    double mean = features.matrix.col(c).mean();
    double sd = std::sqrt((features.matrix.col(c).array() - mean).square().sum() / n);
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
      throw DataError("feature column '" + columns[k] + "' is degenerate (zero variance)");
    }
    t.mean[static_cast<Eigen::Index>(k)] = mean;
    t.std_dev[static_cast<Eigen::Index>(k)] = sd;
  }
  PersonFeatures out = apply_standardization(features, t);
  return out;
}

PersonFeatures apply_standardization(const PersonFeatures& features, const Standardization& t) {
  PersonFeatures out = features;
  for (std::size_t k = 0; k < t.columns.size(); ++k) {
    int c = out.column_index(t.columns[k]);
    if (c < 0) throw SchemaError("standardization refers to unknown column '" + t.columns[k] + "'");
    out.matrix.col(c) =
        (out.matrix.col(c).array() - t.mean[static_cast<Eigen::Index>(k)]) /
        t.std_dev[static_cast<Eigen::Index>(k)];
  }
  out.standardization = t;
  return out;
}

PersonFeatures expand_categorical(const PersonFeatures& features, const std::string& column,
                                  long base_level) {
  int c = features.column_index(column);
  if (c < 0) throw SchemaError("cannot expand unknown feature column '" + column + "'");
  std::vector<long> levels;
  for (Eigen::Index r = 0; r < features.matrix.rows(); ++r) {
    double v = features.matrix(r, c);
    double rounded = std::round(v);
    if (std::abs(v - rounded) > 1e-9) {
      std::ostringstream os;
      os << "categorical column '" << column << "' has non-integer value " << v;
      throw DataError(os.str());
    }
    long lv = static_cast<long>(rounded);
    if (std::find(levels.begin(), levels.end(), lv) == levels.end()) levels.push_back(lv);
  }
  std::sort(levels.begin(), levels.end());
  if (std::find(levels.begin(), levels.end(), base_level) == levels.end()) {
    std::ostringstream os;
    os << "base level " << base_level << " does not occur in column '" << column << "'";
    throw DataError(os.str());
  }

  std::vector<long> kept;
  for (long lv : levels) {
    if (lv != base_level) kept.push_back(lv);
  }

  PersonFeatures out;
  out.person_ids = features.person_ids;
  out.standardization = features.standardization;
  out.matrix.resize(features.matrix.rows(),
                    features.matrix.cols() - 1 + static_cast<Eigen::Index>(kept.size()));
  Eigen::Index col = 0;
  for (Eigen::Index j = 0; j < features.matrix.cols(); ++j) {
    if (j != c) {
      out.feature_names.push_back(features.feature_names[static_cast<std::size_t>(j)]);
      out.matrix.col(col++) = features.matrix.col(j);
      continue;
    }
    for (long lv : kept) {
      out.feature_names.push_back(column + "_eq_" + std::to_string(lv));
      for (Eigen::Index r = 0; r < features.matrix.rows(); ++r) {
        out.matrix(r, col) = (static_cast<long>(std::round(features.matrix(r, c))) == lv) ? 1.0 : 0.0;
      }
      ++col;
    }
  }
  return out;
}

CountChoiceSet enumerate_count_alternatives(int n_modes, int total_trips) {
  if (n_modes < 1) throw ConfigError("count choice set needs at least one mode");
  if (total_trips < 0) throw ConfigError("total trip count must be non-negative");
  CountChoiceSet cs;
  cs.n_modes = n_modes;
  cs.total_trips = total_trips;
  std::vector<int> tuple(static_cast<std::size_t>(n_modes), 0);
  // Depth-first over prefixes yields lexicographically ascending tuples.
  std::function<void(int, int)> rec = [&](int mode, int remaining) {
    if (mode == n_modes - 1) {
      tuple[static_cast<std::size_t>(mode)] = remaining;
      cs.tuples.push_back(tuple);
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      tuple[static_cast<std::size_t>(mode)] = c;
      rec(mode + 1, remaining - c);
    }
  };
  rec(0, total_trips);
  return cs;
}

bool CountUtilitySpec::constant_fixed(int mode, int count) const {
  for (const auto& fc : fixed_constants) {
    if (fc.first == mode && fc.second == count) return true;
  }
  return false;
}

int CountUtilitySpec::free_constant_count() const {
  int n = 0;
  for (int m = 0; m < static_cast<int>(modes.size()); ++m) {
    for (int c = 0; c <= total_trips; ++c) {
      if (!constant_fixed(m, c)) ++n;
    }
  }
  return n;
}

int CountUtilitySpec::attribute_count() const {
  int n = 0;
  for (const auto& m : modes) n += static_cast<int>(m.attributes.size());
  return n;
}

int CountUtilitySpec::constant_column(int mode, int count) const {
  if (mode < 0 || mode >= static_cast<int>(modes.size()) || count < 0 || count > total_trips) {
    throw ShapeError("count utility constant index out of range");
  }
  int col = 0;
  for (int m = 0; m < static_cast<int>(modes.size()); ++m) {
    for (int c = 0; c <= total_trips; ++c) {
      if (constant_fixed(m, c)) continue;
      if (m == mode && c == count) return col;
      ++col;
    }
  }
  return -1;  // the requested constant is pinned
}

int CountUtilitySpec::attribute_column(int mode, int attribute) const {
  if (mode < 0 || mode >= static_cast<int>(modes.size()) || attribute < 0 ||
      attribute >= static_cast<int>(modes[static_cast<std::size_t>(mode)].attributes.size())) {
    throw ShapeError("count utility attribute index out of range");
  }
  int col = free_constant_count();
  for (int m = 0; m < mode; ++m) {
    col += static_cast<int>(modes[static_cast<std::size_t>(m)].attributes.size());
  }
  return col + attribute;
}

std::vector<std::string> CountUtilitySpec::column_labels() const {
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(dimension()));
  for (int m = 0; m < static_cast<int>(modes.size()); ++m) {
    for (int c = 0; c <= total_trips; ++c) {
      if (constant_fixed(m, c)) continue;
      labels.push_back("const_" + modes[static_cast<std::size_t>(m)].name + "_" +
                       std::to_string(c));
    }
  }
  for (const auto& m : modes) {
    for (const auto& a : m.attributes) labels.push_back(a);
  }
  return labels;
}

Eigen::VectorXd build_count_design_row(const CountUtilitySpec& spec,
                                       const std::vector<int>& tuple,
                                       const std::vector<Eigen::VectorXd>& attribute_values) {
  const int n_modes = static_cast<int>(spec.modes.size());
  if (static_cast<int>(tuple.size()) != n_modes) {
    throw ShapeError("trip allocation tuple does not match the number of modes");
  }
  int total = 0;
  for (int c : tuple) {
    if (c < 0) throw ShapeError("trip allocation tuple has a negative count");
    total += c;
  }
  if (total != spec.total_trips) {
    throw ShapeError("trip allocation tuple does not sum to the total trip count");
  }
  if (static_cast<int>(attribute_values.size()) != n_modes) {
    throw ShapeError("attribute values do not match the number of modes");
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(spec.dimension());
  for (int m = 0; m < n_modes; ++m) {
    int col = spec.constant_column(m, tuple[static_cast<std::size_t>(m)]);
    if (col >= 0) x[col] = 1.0;
    const auto& attrs = spec.modes[static_cast<std::size_t>(m)].attributes;
    const Eigen::VectorXd& values = attribute_values[static_cast<std::size_t>(m)];
    if (values.size() != static_cast<Eigen::Index>(attrs.size())) {
      throw ShapeError("attribute values for mode '" + spec.modes[static_cast<std::size_t>(m)].name +
                       "' have the wrong length");
    }
    for (int j = 0; j < static_cast<int>(attrs.size()); ++j) {
      x[spec.attribute_column(m, j)] = values[j] * tuple[static_cast<std::size_t>(m)];
    }
  }
  return x;
}

}  // namespace gplccm
