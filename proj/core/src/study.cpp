#include "causalaid/study.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

#include "causalaid/rng.hpp"

namespace causalaid {

namespace fs = std::filesystem;

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p.lexically_normal().string();
  return (fs::path(base_dir) / p).lexically_normal().string();
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(fmt::format("config key '{}' has an invalid value", key));
  }
}

std::vector<std::string> string_list(const YAML::Node& node, const std::string& key) {
  if (!node.IsSequence()) throw ConfigError(fmt::format("config key '{}' must be a list", key));
  std::vector<std::string> out;
  for (const auto& item : node) out.push_back(scalar<std::string>(item, key));
  return out;
}

const std::set<std::string> kTopLevelKeys = {
    "dag",       "sources",   "area",       "area_label", "period",    "thresholds",
    "band",      "methods",   "bootstrap",  "alpha",      "refutation", "seed",
    "output",    "normalize", "population", "outcome_is_fraction", "adjustment",
    "matching_k", "propensity_clip", "forest"};

bool is_gam_outcome(const StudyConfig& config, const std::string& outcome) {
  for (const auto& s : config.sources) {
    if (s.schema == "panel") return false;
    const auto& schema = source_schema(s.schema);
    const std::string variable = s.variable.empty() ? schema.variable : s.variable;
    if (variable == outcome) return schema.name == "gam";
  }
  return false;
}

std::string cell_label(double threshold, Method method) {
  return fmt::format("cell/{}/{}", format_number(threshold), to_string(method));
}

}  // namespace

std::string StudyConfig::effective_area_label() const {
  if (!area_label.empty()) return area_label;
  return area == "country" ? "Country" : area;
}

void StudyConfig::validate() const {
  if (dag_path.empty()) throw ConfigError("config: 'dag' is required");
  if (sources.empty()) throw ConfigError("config: 'sources' must list at least one source");
  if (!seed) throw ConfigError("config: 'seed' is required");
  if (area.empty()) throw ConfigError("config: 'area' must be 'country' or a district name");
  bool panel = false;
  std::set<std::string> variables;
  for (const auto& s : sources) {
    if (s.path.empty()) throw ConfigError("config: every source needs a 'path'");
    if (s.schema == "panel") {
      panel = true;
      continue;
    }
    std::string variable;
    try {
      variable = s.variable.empty() ? source_schema(s.schema).variable : s.variable;
    } catch (const TableError&) {
      throw ConfigError(fmt::format("config: unknown source schema '{}'", s.schema));
    }
    if (!variables.insert(variable).second)
      throw ConfigError(fmt::format("config: variable '{}' is fed by two sources", variable));
  }
  if (panel && sources.size() > 1) throw ConfigError("config: a 'panel' source must be the only source");
  for (const auto& v : normalize) {
    if (!panel && !variables.contains(v))
      throw ConfigError(fmt::format("config: normalize lists '{}', which no source provides", v));
    if (!panel && !variables.contains(population_variable))
      throw ConfigError(fmt::format("config: normalize needs a '{}' source", population_variable));
  }
  if (thresholds.empty()) throw ConfigError("config: 'thresholds' must not be empty");
  for (double t : thresholds) {
    if (!(t > 0.0 && t < 100.0)) throw ConfigError(fmt::format("config: threshold {} is outside (0, 100)", t));
    if (t - band < 0.0 || t + band > 100.0)
      throw ConfigError(fmt::format("config: threshold {} with band {} leaves [0, 100]", t, band));
  }
  if (band < 0.0) throw ConfigError("config: 'band' must be >= 0");
  if (methods.empty()) throw ConfigError("config: 'methods' must not be empty");
  if (bootstrap < 100) throw ConfigError("config: 'bootstrap' must be >= 100");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("config: 'alpha' must be in (0, 1)");
  if (trials < 20) throw ConfigError("config: refutation trials must be >= 20");
  if (!(subset_fraction > 0.0 && subset_fraction < 1.0))
    throw ConfigError("config: refutation subset_fraction must be in (0, 1)");
  if (estimator.k < 1) throw ConfigError("config: 'matching_k' must be >= 1");
  if (!(estimator.clip_low > 0.0 && estimator.clip_low < estimator.clip_high && estimator.clip_high < 1.0))
    throw ConfigError("config: 'propensity_clip' must satisfy 0 < low < high < 1");
}

StudyConfig parse_study_config(const std::string& yaml_text, const std::string& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  }
  if (!root.IsMap()) throw ConfigError("config: top level must be a mapping");
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (!kTopLevelKeys.contains(key)) throw ConfigError(fmt::format("config: unknown key '{}'", key));
  }

  StudyConfig c;
  if (root["dag"]) c.dag_path = resolve(base_dir, scalar<std::string>(root["dag"], "dag"));
  if (const auto sources = root["sources"]) {
    if (!sources.IsSequence()) throw ConfigError("config key 'sources' must be a list");
    for (const auto& s : sources) {
      SourceConfig sc;
      if (!s["schema"] || !s["path"]) throw ConfigError("config: every source needs 'schema' and 'path'");
      sc.schema = scalar<std::string>(s["schema"], "schema");
      sc.path = resolve(base_dir, scalar<std::string>(s["path"], "path"));
      if (s["variable"]) sc.variable = scalar<std::string>(s["variable"], "variable");
      c.sources.push_back(std::move(sc));
    }
  }
  if (root["area"]) c.area = scalar<std::string>(root["area"], "area");
  if (root["area_label"]) c.area_label = scalar<std::string>(root["area_label"], "area_label");
  if (root["period"]) {
    try {
      c.period = parse_period(scalar<std::string>(root["period"], "period"));
    } catch (const TableError& e) {
      throw ConfigError(fmt::format("config: {}", e.what()));
    }
  }
  if (const auto t = root["thresholds"]) {
    if (!t.IsSequence()) throw ConfigError("config key 'thresholds' must be a list");
    c.thresholds.clear();
    for (const auto& v : t) c.thresholds.push_back(scalar<double>(v, "thresholds"));
  }
  if (root["band"]) c.band = scalar<double>(root["band"], "band");
  if (const auto m = root["methods"]) {
    c.methods.clear();
    for (const auto& name : string_list(m, "methods")) {
      try {
        c.methods.push_back(parse_method(name));
      } catch (const EstimationError& e) {
        throw ConfigError(fmt::format("config: {}", e.what()));
      }
    }
  }
  if (root["bootstrap"]) c.bootstrap = scalar<int>(root["bootstrap"], "bootstrap");
  if (root["alpha"]) c.alpha = scalar<double>(root["alpha"], "alpha");
  if (const auto r = root["refutation"]) {
    if (r["trials"]) c.trials = scalar<int>(r["trials"], "refutation.trials");
    if (r["subset_fraction"]) c.subset_fraction = scalar<double>(r["subset_fraction"], "refutation.subset_fraction");
  }
  if (root["seed"]) c.seed = scalar<std::uint64_t>(root["seed"], "seed");
  if (root["output"]) c.output_dir = resolve(base_dir, scalar<std::string>(root["output"], "output"));
  else c.output_dir = resolve(base_dir, c.output_dir);
  if (root["normalize"]) c.normalize = string_list(root["normalize"], "normalize");
  if (root["population"]) c.population_variable = scalar<std::string>(root["population"], "population");
  if (root["outcome_is_fraction"]) c.outcome_is_fraction = scalar<bool>(root["outcome_is_fraction"], "outcome_is_fraction");
  if (root["adjustment"]) c.adjustment = string_list(root["adjustment"], "adjustment");
  if (root["matching_k"]) c.estimator.k = scalar<int>(root["matching_k"], "matching_k");
  if (const auto clip = root["propensity_clip"]) {
    if (!clip.IsSequence() || clip.size() != 2) throw ConfigError("config key 'propensity_clip' must be [low, high]");
    c.estimator.clip_low = scalar<double>(clip[0], "propensity_clip");
    c.estimator.clip_high = scalar<double>(clip[1], "propensity_clip");
  }
  if (const auto f = root["forest"]) {
    auto& fp = c.estimator.base.forest;
    if (f["trees"]) fp.n_trees = scalar<int>(f["trees"], "forest.trees");
    if (f["max_depth"]) fp.max_depth = scalar<int>(f["max_depth"], "forest.max_depth");
    if (f["min_leaf"]) fp.min_leaf = scalar<int>(f["min_leaf"], "forest.min_leaf");
    if (f["feature_fraction"]) fp.feature_fraction = scalar<double>(f["feature_fraction"], "forest.feature_fraction");
  }
  c.validate();
  return c;
}

StudyConfig load_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_study_config(buffer.str(), fs::path(path).parent_path().string());
}

Table harmonize(const StudyConfig& config, const CausalDag& dag) {
  config.validate();
  const bool country = config.area == "country";

  if (config.sources.front().schema == "panel") {
    Table panel = load_csv(config.sources.front().path, CsvSchema{});
    if (!country) {
      if (!panel.has_column("district"))
        throw ConfigError(fmt::format("panel has no 'district' column to select area '{}'", config.area));
      panel = panel.filter_equals("district", config.area);
    }
    if (!config.normalize.empty()) panel = per_capita_normalize(panel, config.normalize, config.population_variable);
    return panel;
  }

  struct Loaded {
    const SourceSchema* schema;
    std::string variable;
    Table raw;
  };
  std::vector<Loaded> loaded;
  for (const auto& s : config.sources) {
    const SourceSchema& schema = source_schema(s.schema);
    const std::string variable = s.variable.empty() ? schema.variable : s.variable;
    Table raw = load_csv(s.path, schema.csv_schema()).rename(schema.value_column, variable);
    if (!country && schema.district_level) raw = raw.filter_equals("district", config.area);
    spdlog::info("loaded {} ({} rows) from {}", variable, raw.rows(), s.path);
    loaded.push_back({&schema, variable, std::move(raw)});
  }

  auto find_loaded = [&](const std::string& variable) -> const Loaded* {
    for (const auto& l : loaded)
      if (l.variable == variable) return &l;
    return nullptr;
  };

  std::optional<Table> population;
  if (const Loaded* p = find_loaded(config.population_variable)) {
    if (!p->schema->district_level)
      throw ConfigError(fmt::format("population source '{}' must be district-level", p->variable));
    if (p->schema->has_date)
      throw ConfigError(fmt::format("population source '{}' must be undated", p->variable));
    AggregateSpec spec;
    spec.keys = {"district"};
    spec.aggregators[p->variable] = Aggregator::Last;
    population = aggregate(p->raw, spec);
  }

  const std::string& outcome = dag.outcome_name();
  const Loaded* base_source = find_loaded(outcome);
  if (!base_source) throw ConfigError(fmt::format("no source provides the outcome '{}'", outcome));
  if (!base_source->schema->district_level || !base_source->schema->has_date)
    throw ConfigError(fmt::format("outcome source '{}' must be dated and district-level", outcome));

  auto prepare = [&](const Loaded& l, Period period) {
    Table t = l.raw;
    const bool normalize = std::find(config.normalize.begin(), config.normalize.end(), l.variable) !=
                           config.normalize.end();
    if (normalize) {
      if (!l.schema->district_level)
        throw ConfigError(fmt::format("cannot normalize country-level variable '{}'", l.variable));
      const std::string pop_col = "__population";
      Table pop = population->rename(config.population_variable, pop_col);
      t = left_join(t, pop, {"district"}, "", JoinMode::Exact);
      t = per_capita_normalize(t, {l.variable}, pop_col);
      std::vector<std::string> keep;
      for (const auto& name : t.column_names())
        if (name != pop_col) keep.push_back(name);
      t = t.project(keep);
    }
    AggregateSpec spec;
    if (l.schema->district_level) spec.keys = {"district"};
    if (l.schema->has_date) spec.date_column = "date";
    spec.period = period;
    spec.aggregators[l.variable] = l.schema->aggregator;
    return aggregate(t, spec);
  };

  Table table = prepare(*base_source, config.period);
  if (table.rows() == 0) throw ConfigError(fmt::format("area '{}' has no outcome rows", config.area));

  for (const auto& l : loaded) {
    if (&l == base_source) continue;
    if (l.variable == config.population_variable) {
      table = left_join(table, *population, {"district"}, "", JoinMode::Exact);
      continue;
    }
    std::vector<std::string> keys;
    if (l.schema->district_level) keys = {"district"};
    const std::string date = l.schema->has_date ? "date" : "";
    if (config.period == Period::Annual && l.schema->resolution == Resolution::Seasonal && l.schema->has_date) {
      // A seasonal value stays in force until the next record, so its annual
      // value is the mean over the year's months of the value in force.
      std::vector<std::string> grid_districts, grid_months;
      std::set<std::pair<std::string, std::string>> seen;
      for (std::size_t r = 0; r < table.rows(); ++r) {
        const std::string district = l.schema->district_level ? table.column("district").labels[r] : "";
        const std::string& year = table.column("date").labels[r];
        if (!seen.emplace(district, year).second) continue;
        for (int month = 1; month <= 12; ++month) {
          grid_districts.push_back(district);
          grid_months.push_back(fmt::format("{}-{:02d}", year, month));
        }
      }
      std::vector<Column> grid_columns;
      if (l.schema->district_level) grid_columns.push_back(Column::categorical("district", grid_districts));
      grid_columns.push_back(Column::date("date", grid_months));
      Table held = left_join(Table(std::move(grid_columns)), prepare(l, Period::Monthly), keys, date, JoinMode::AsOf);
      AggregateSpec spec{keys, date, Period::Annual, {{l.variable, Aggregator::Mean}}};
      table = left_join(table, aggregate(held, spec), keys, date, JoinMode::Exact);
      continue;
    }
    Table agg = prepare(l, config.period);
    const bool hold = config.period == Period::Monthly &&
                      (l.schema->resolution == Resolution::Seasonal || l.schema->resolution == Resolution::Static);
    std::optional<double> fill;
    if (l.schema->zero_when_absent) fill = 0.0;
    table = left_join(table, agg, keys, date, hold ? JoinMode::AsOf : JoinMode::Exact, fill);
  }
  return table;
}

bool ReportRow::complete() const {
  if (!estimate) return false;
  return std::all_of(refutations.begin(), refutations.end(),
                     [](const RefutationCell& c) { return c.report.has_value(); });
}

bool StudyReport::complete() const {
  return std::all_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.complete(); });
}

StudyReport run_study(const StudyConfig& config) {
  config.validate();
  const CausalDag dag = load_dag(config.dag_path);
  const Table table = harmonize(config, dag);
  return run_study(config, dag, table);
}

StudyReport run_study(const StudyConfig& config, const CausalDag& dag, const Table& harmonized) {
  config.validate();
  const std::string& treatment = dag.treatment_name();
  const std::string& outcome = dag.outcome_name();

  std::vector<std::string> adjustment;
  if (config.adjustment) {
    adjustment = *config.adjustment;
    for (const auto& z : adjustment)
      if (!dag.contains(z)) throw ConfigError(fmt::format("adjustment variable '{}' is not in the DAG", z));
    if (!backdoor_satisfied(dag, adjustment))
      throw ConfigError("the configured adjustment set does not satisfy the backdoor criterion");
  } else {
    adjustment = parent_adjustment_set(dag).members;
  }
  std::vector<std::string> needed{treatment, outcome};
  needed.insert(needed.end(), adjustment.begin(), adjustment.end());
  for (const auto& name : needed)
    if (!harmonized.has_column(name))
      throw ConfigError(fmt::format("harmonized data has no column for DAG variable '{}'", name));

  StudyReport report;
  auto& meta = report.metadata;
  meta.seed = *config.seed;
  meta.area = config.effective_area_label();
  meta.period = std::string(to_string(config.period));
  meta.treatment = treatment;
  meta.outcome = outcome;
  meta.adjustment_set = adjustment;
  meta.harmonized_rows = harmonized.rows();
  meta.complete_rows = drop_missing(harmonized, needed, &meta.dropped_missing).rows();
  meta.bootstrap = config.bootstrap;
  meta.alpha = config.alpha;
  meta.trials = config.trials;
  meta.subset_fraction = config.subset_fraction;
  meta.band = config.band;

  const bool fraction = config.outcome_is_fraction.value_or(is_gam_outcome(config, outcome));

  for (double threshold : config.thresholds) {
    std::optional<StudyFrame> frame;
    std::string frame_error;
    try {
      BinarizeSpec spec;
      spec.treatment_column = treatment;
      spec.outcome_column = outcome;
      spec.covariate_columns = adjustment;
      spec.percentile = threshold;
      spec.band = config.band;
      spec.outcome_is_fraction = fraction;
      frame = binarize_treatment(harmonized, spec);
    } catch (const std::exception& e) {
      frame_error = e.what();
    }

    for (Method method : config.methods) {
      ReportRow row;
      row.area = meta.area;
      row.threshold = threshold;
      row.method = method;
      for (std::size_t i = 0; i < row.refutations.size(); ++i)
        row.refutations[i].test = static_cast<RefutationTest>(i);
      if (!frame) {
        row.error = frame_error;
        for (auto& cell : row.refutations) cell.error = frame_error;
        report.rows.push_back(std::move(row));
        continue;
      }
      row.threshold_value = frame->info().threshold_value;
      row.n_used = frame->rows();
      row.n_treated = frame->n_treated();
      row.n_control = frame->n_control();
      row.excluded = frame->info().excluded_count;

      EstimatorSpec spec = config.estimator;
      spec.method = method;
      const std::uint64_t seed = derive_seed(*config.seed, cell_label(threshold, method));
      try {
        row.estimate = bootstrap_inference(spec, *frame, {config.bootstrap, config.alpha, seed});
        row.estimate->threshold_percentile = threshold;
      } catch (const std::exception& e) {
        row.error = e.what();
        spdlog::warn("{} at threshold {}: {}", to_string(method), threshold, e.what());
      }
      for (auto& cell : row.refutations) {
        if (!row.estimate) {
          cell.error = "no estimate";
          continue;
        }
        try {
          cell.report = refute(cell.test, spec, *frame, {config.trials, seed, config.subset_fraction},
                               row.estimate->ate);
        } catch (const std::exception& e) {
          cell.error = e.what();
          spdlog::warn("{} refutation of {} at threshold {}: {}", to_string(cell.test), to_string(method),
                       threshold, e.what());
        }
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace causalaid
