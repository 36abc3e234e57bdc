#include "codamed/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "codamed/config_json.hpp"
#include "codamed/experiment.hpp"
#include "codamed/io.hpp"
#include "codamed/mediation.hpp"
#include "codamed/simgen.hpp"

namespace codamed::cli {

namespace {

int env_threads() {
  if (const char* raw = std::getenv("CODAMED_THREADS")) {
    const int value = std::atoi(raw);
    if (value > 0) return value;
  }
  return 0;
}

void emit_or_print(const std::string& content, const std::string& out_path, std::ostream& out) {
  if (out_path.empty())
    out << content;
  else
    io::write_text_file(out_path, content);
}

struct Args {
  std::string sbp_path, counts_path, meta_path, config_path, plan_path, out_path;
  double zero_replacement = 0.5;
  double ci_level = 0.90;
  bool shared_gamma = false;
  std::string format = "auto";
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  bool full_scale = false;
  int threads = 0;
  long calibration_reps = 100000;
  bool dump_replicates = false;
};

int cmd_sbp_validate(const Args& a, std::ostream& out) {
  io::SbpFile file = io::read_sbp_csv(a.sbp_path);
  out << "valid: " << file.sbp.parts() << " parts, " << file.sbp.balances() << " balances\n";
  return 0;
}

int cmd_transform(const Args& a, std::ostream& out) {
  io::SbpFile file = io::read_sbp_csv(a.sbp_path);
  const std::string table =
      io::ilr_table_csv(io::read_text_file(a.counts_path), file, a.zero_replacement);
  emit_or_print(table, a.out_path, out);
  return 0;
}

int cmd_mediate(const Args& a, std::ostream& out) {
  io::SbpFile file = io::read_sbp_csv(a.sbp_path);
  med::CohortData data = io::read_cohort(a.counts_path, a.meta_path, file.sbp.part_labels);
  med::MediationOptions options;
  options.zero_replacement = a.zero_replacement;
  options.ci_level = a.ci_level;
  options.pooling =
      a.shared_gamma ? med::GammaPooling::shared : med::GammaPooling::per_stratum_product;
  med::MediationEstimate est = med::mediate(data, file.sbp, options);

  bool json_output = a.format == "json";
  if (a.format == "auto" && a.out_path.size() > 5 &&
      a.out_path.compare(a.out_path.size() - 5, 5, ".json") == 0)
    json_output = true;
  emit_or_print(json_output ? io::effects_json(est) : io::effects_csv(est), a.out_path, out);
  return 0;
}

int cmd_simulate(const Args& a, std::ostream& err) {
  simgen::GenerativeConfig cfg = config::config_from_json(io::read_text_file(a.config_path));
  if (a.seed) cfg.seed = *a.seed;
  const int threads = a.threads > 0 ? a.threads : env_threads();
  simgen::TruePathCoefficients truth =
      simgen::calibrate_truth(cfg, a.calibration_reps, threads > 0 ? threads : 1);
  err << "calibrated beta_bar = [" << truth.beta1_weighted.transpose() << "], gamma = ["
      << truth.gamma1.transpose() << "] (" << truth.mc_reps << " draws per cell)\n";
  med::CohortData data = simgen::simulate_cohort(cfg, truth);
  const std::string meta_path = io::meta_path_for(a.out_path);
  io::write_cohort(data, cfg.sbp.part_labels, a.out_path, meta_path);
  err << "wrote " << a.out_path << " and " << meta_path << "\n";
  return 0;
}

int cmd_experiment(const Args& a, std::ostream& out, std::ostream& err) {
  expt::StudyPlan plan = config::plan_from_json(io::read_text_file(a.plan_path));
  if (a.replicates) plan.replicates = *a.replicates;
  if (a.full_scale) plan.replicates = 1000;
  if (a.seed) plan.master_seed = *a.seed;
  if (a.threads > 0)
    plan.threads = a.threads;
  else if (int env = env_threads(); env > 0 && plan.threads == 0)
    plan.threads = env;
  if (a.dump_replicates) plan.dump_replicates = true;

  std::vector<expt::ReplicationSummary> summaries = expt::run_study(plan);
  const std::string summary = expt::summary_csv(summaries);
  const std::string diagnostics = expt::diagnostics_csv(expt::ratio_diagnostics(summaries));
  if (a.out_path.empty()) {
    out << summary;
    return 0;
  }
  std::filesystem::create_directories(a.out_path);
  io::write_text_file(a.out_path + "/summary.csv", summary);
  io::write_text_file(a.out_path + "/diagnostics.csv", diagnostics);
  if (plan.dump_replicates)
    for (std::size_t c = 0; c < summaries.size(); ++c)
      io::write_text_file(a.out_path + "/replicates_cell" + std::to_string(c) + ".csv",
                          expt::replicates_csv(summaries[c]));
  err << "wrote " << a.out_path << "/summary.csv (" << summaries.size() << " cells)\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Args args;
  CLI::App app{"Hypothesis-driven causal mediation analysis for compositional count data"};
  app.require_subcommand(1);

  auto* sbp = app.add_subcommand("sbp", "SBP matrix utilities")->require_subcommand(1);
  auto* validate = sbp->add_subcommand("validate", "Check an SBP matrix file");
  validate->add_option("matrix", args.sbp_path, "SBP CSV file")->required();

  auto* transform = app.add_subcommand("transform", "Counts to ilr coordinates");
  transform->add_option("--counts", args.counts_path, "counts CSV")->required();
  transform->add_option("--sbp", args.sbp_path, "SBP CSV")->required();
  transform->add_option("--zero-replacement", args.zero_replacement, "replacement for zero counts");
  transform->add_option("--out", args.out_path, "output CSV path (stdout when absent)");

  auto* mediate = app.add_subcommand("mediate", "Estimate TE/NDE/OIE/CIE from a cohort");
  mediate->add_option("--counts", args.counts_path, "counts CSV")->required();
  mediate->add_option("--meta", args.meta_path, "metadata CSV")->required();
  mediate->add_option("--sbp", args.sbp_path, "SBP CSV")->required();
  mediate->add_option("--ci", args.ci_level, "confidence level (default 0.90)");
  mediate->add_option("--zero-replacement", args.zero_replacement, "replacement for zero counts");
  mediate->add_flag("--shared-gamma", args.shared_gamma,
                    "pool gamma across strata before forming products");
  mediate->add_option("--out", args.out_path, "output path (stdout when absent)");
  mediate->add_option("--format", args.format, "csv or json (default by extension)")
      ->check(CLI::IsMember({"auto", "csv", "json"}));

  auto* simulate = app.add_subcommand("simulate", "Draw a synthetic cohort");
  simulate->add_option("--config", args.config_path, "generative config JSON")->required();
  simulate->add_option("--out", args.out_path, "counts CSV path; metadata lands beside it")
      ->required();
  std::uint64_t seed_value = 0;
  auto* sim_seed = simulate->add_option("--seed", seed_value, "override config seed");
  simulate->add_option("--calibration-reps", args.calibration_reps,
                       "Monte-Carlo draws per stratum/exposure cell");
  simulate->add_option("--threads", args.threads, "calibration threads");

  auto* experiment = app.add_subcommand("experiment", "Run a replication study plan");
  experiment->add_option("--plan", args.plan_path, "study plan JSON")->required();
  experiment->add_option("--out", args.out_path, "output directory (stdout when absent)");
  int replicates_value = 0;
  auto* exp_reps = experiment->add_option("--replicates", replicates_value, "override replicates");
  auto* exp_seed = experiment->add_option("--seed", seed_value, "override master seed");
  experiment->add_option("--threads", args.threads, "worker threads (0 = hardware)");
  experiment->add_flag("--full-scale", args.full_scale, "run 1000 replicates per cell");
  experiment->add_flag("--dump-replicates", args.dump_replicates, "write per-replicate CSVs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  if (sim_seed->count() || exp_seed->count()) args.seed = seed_value;
  if (exp_reps->count()) args.replicates = replicates_value;

  try {
    if (validate->parsed()) return cmd_sbp_validate(args, out);
    if (transform->parsed()) return cmd_transform(args, out);
    if (mediate->parsed()) return cmd_mediate(args, out);
    if (simulate->parsed()) return cmd_simulate(args, err);
    if (experiment->parsed()) return cmd_experiment(args, out, err);
  } catch (const Error& e) {
    err << nlohmann::json{{"error", errc_name(e.code())}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << nlohmann::json{{"error", "Unexpected"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace codamed::cli
