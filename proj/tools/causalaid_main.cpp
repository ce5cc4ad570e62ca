#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "causalaid/graph.hpp"
#include "causalaid/report.hpp"
#include "causalaid/scm.hpp"
#include "causalaid/study.hpp"

namespace ca = causalaid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("causalaid");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("CAUSALAID_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

int run_command(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<std::string> out,
                const std::vector<std::string>& formats) {
  ca::StudyConfig config = ca::load_study_config(config_path);
  if (seed) config.seed = seed;
  if (out) config.output_dir = *out;
  std::vector<ca::ReportFormat> fmts;
  for (const auto& f : formats) fmts.push_back(ca::parse_report_format(f));
  if (fmts.empty()) fmts = {ca::ReportFormat::Text, ca::ReportFormat::Csv, ca::ReportFormat::Json};

  const ca::StudyReport report = ca::run_study(config);
  for (const auto& path : ca::emit_report(report, config.output_dir, fmts)) std::cerr << "wrote " << path << '\n';
  std::cout << ca::render_text(report);
  return report.complete() ? kExitOk : kExitPartial;
}

int dag_check(const std::string& path, std::size_t max_size) {
  const ca::CausalDag dag = ca::load_dag(path);
  std::cout << fmt::format("{} nodes, {} edges; treatment {}, outcome {}\n", dag.size(), dag.edges().size(),
                           dag.treatment_name(), dag.outcome_name());
  const auto parents = ca::parent_adjustment_set(dag);
  std::cout << fmt::format("parent adjustment set: {{{}}} ({})\n", join(parents.members),
                           ca::backdoor_satisfied(dag, parents.members) ? "backdoor satisfied" : "NOT backdoor");
  const auto minimal = ca::minimal_backdoor_sets(dag, max_size);
  std::cout << fmt::format("minimal backdoor sets up to size {} ({}):\n", max_size, minimal.size());
  for (const auto& set : minimal) std::cout << fmt::format("  {{{}}}\n", join(set.members));
  return kExitOk;
}

int synth(const std::string& spec_name, std::size_t n, std::uint64_t seed, const std::string& out) {
  const ca::ScmSpec spec =
      std::filesystem::is_regular_file(spec_name) ? ca::parse_scm(read_file(spec_name)) : ca::benchmark(spec_name);
  const auto parent = std::filesystem::path(out).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  ca::save_csv(ca::sample(spec, n, seed), out);
  std::cerr << fmt::format("wrote {} rows to {}\n", n, out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"causalaid: average treatment effect studies over a causal DAG"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a study config and write its reports");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> formats;
  run->add_option("--config", config_path, "study config (YAML)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--out", out, "override the output directory");
  run->add_option("--format", formats, "text, csv or json (repeatable; default all)")
      ->check(CLI::IsMember({"text", "csv", "json"}));

  auto* dag = app.add_subcommand("dag", "DAG utilities");
  dag->require_subcommand(1);
  auto* check = dag->add_subcommand("check", "validate a DAG and print its adjustment sets");
  std::string dag_path;
  std::size_t max_size = 5;
  check->add_option("path", dag_path, "DAG file")->required()->check(CLI::ExistingFile);
  check->add_option("--max-size", max_size, "largest minimal backdoor set to search for")->capture_default_str();

  auto* synth_cmd = app.add_subcommand("synth", "sample a synthetic SCM to CSV");
  std::string spec_name;
  std::size_t n = 0;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth_cmd->add_option("--spec", spec_name, "benchmark name or SCM spec file")->required();
  synth_cmd->add_option("--n", n, "rows")->required()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth_seed, "seed")->required();
  synth_cmd->add_option("--out", synth_out, "output CSV")->required();

  auto* fixture = app.add_subcommand("fixture", "regenerate the synthetic Somalia source CSVs");
  std::string fixture_out;
  std::uint64_t fixture_seed = 0;
  fixture->add_option("--out", fixture_out, "output directory")->required();
  fixture->add_option("--seed", fixture_seed, "seed")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitFatal;
  }

  try {
    if (*run) return run_command(config_path, seed, out, formats);
    if (*check) return dag_check(dag_path, max_size);
    if (*synth_cmd) return synth(spec_name, n, synth_seed, synth_out);
    if (*fixture) {
      ca::write_somalia_fixture(fixture_out, fixture_seed);
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFatal;
  }
  return kExitFatal;
}
