#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "codamed/mediation.hpp"
#include "codamed/simgen.hpp"

namespace codamed::expt {

/// One grid cell of the replication study.
struct StudyCell {
  std::string scenario;  // preset name, e.g. "scenario1"
  double alpha_s = 1.0;  // simgen::kAlphaInfinity for the multinomial limit
  double theta = 0.0;
};

/// Which SBP the analysis uses relative to the one that generated the data.
enum class AnalysisSbp { generation, reversed_pivot, custom };

struct StudyPlan {
  std::vector<StudyCell> cells;
  int replicates = 200;
  int cohort_size = 1000;
  AnalysisSbp analysis = AnalysisSbp::generation;
  std::optional<coda::SbpMatrix> analysis_sbp;  // used when analysis == custom
  std::uint64_t master_seed = 0;
  double ci_level = 0.90;
  long calibration_reps = 100000;
  med::GammaPooling pooling = med::GammaPooling::shared;
  int threads = 1;  // 0 picks hardware concurrency
  bool dump_replicates = false;
};

struct ReplicateRecord {
  bool ok = false;
  std::string error;
  Eigen::VectorXd cie, cie_se;
  double oie = 0, oie_se = 0, nde = 0, nde_se = 0, te = 0, te_se = 0;
  Eigen::VectorXd beta, gamma;          // pooled path coefficients
  Eigen::VectorXd beta_var, gamma_var;  // their estimated variances
};

/// Row of the summary table. NaN marks statistics that are undefined for the
/// cell (truth-dependent metrics under a misspecified analysis contrast).
struct EffectRow {
  std::string effect;
  double truth, mean, bias, avg_se, emp_se, power, coverage;
};

struct CellDiagnostics {
  Eigen::VectorXd beta_true, gamma_true;
  Eigen::VectorXd beta_mean, gamma_mean;
  Eigen::VectorXd beta_emp_var, gamma_emp_var;  // variance of the estimates
  Eigen::VectorXd beta_avg_var, gamma_avg_var;  // mean of the variance estimates
};

struct ReplicationSummary {
  StudyCell cell;
  bool misspecified = false;
  int replicates = 0;
  int failures = 0;
  std::vector<EffectRow> effects;  // CIE_1..CIE_J then OIE
  CellDiagnostics diag;
  std::vector<ReplicateRecord> records;
};

/// Decide the analysis SBP for a generation SBP under the plan.
coda::SbpMatrix analysis_sbp_for(const StudyPlan& plan, const coda::SbpMatrix& generation);

/// Calibrate truth for the cell, run the replicates on independent seed
/// streams, estimate each with the analysis SBP, and aggregate. Failed
/// replicates are excluded and counted. Output is identical for any thread
/// count under the same master seed.
ReplicationSummary run_cell(const StudyPlan& plan, std::size_t cell_index);

std::vector<ReplicationSummary> run_study(const StudyPlan& plan);

struct RatioRow {
  StudyCell cell;
  double beta11, gamma11;        // calibrated true values
  double var_beta1, var_gamma1;  // empirical estimator variances
  double product;                // var_beta1 * var_gamma1
  double beta_ratio;             // beta11^2 / var_beta1
  double gamma_ratio;            // gamma11^2 / var_gamma1
  double var_ie;                 // product * (beta_ratio + gamma_ratio)
};

/// The precision decomposition of the first coordinate-wise indirect effect.
std::vector<RatioRow> ratio_diagnostics(const std::vector<ReplicationSummary>& summaries);

std::string format_alpha(double alpha_s);
std::string summary_csv(const std::vector<ReplicationSummary>& summaries);
std::string diagnostics_csv(const std::vector<RatioRow>& rows);
std::string replicates_csv(const ReplicationSummary& summary);

}  // namespace codamed::expt
