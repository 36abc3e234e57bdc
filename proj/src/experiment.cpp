#include "codamed/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <thread>

#include "codamed/rng.hpp"
#include "codamed/stats.hpp"

namespace codamed::expt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t derive_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                         std::uint64_t c = 0) {
  std::uint64_t s = seed;
  rng::splitmix64(s);
  s ^= 0xA0761D6478BD642FULL * (a + 1);
  rng::splitmix64(s);
  s ^= 0xE7037ED1A0B428DBULL * (b + 1);
  rng::splitmix64(s);
  s ^= 0x8EBC6AF09C88C6E3ULL * (c + 1);
  return rng::splitmix64(s);
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  const int workers = std::min(threads, count);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < count; i = next++) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

double sample_var(const std::vector<double>& v) {
  if (v.size() < 2) return kNaN;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size() - 1);
}

EffectRow summarize_effect(const std::string& name, double truth, bool misspecified,
                           const std::vector<double>& points, const std::vector<double>& ses,
                           const std::vector<double>& lows, const std::vector<double>& highs) {
  EffectRow row{name, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN};
  if (!misspecified) row.truth = truth;
  if (points.empty()) return row;
  const double n = static_cast<double>(points.size());
  row.mean = mean_of(points);
  row.avg_se = mean_of(ses);
  row.emp_se = std::sqrt(sample_var(points));
  if (!misspecified) {
    row.bias = row.mean - truth;
    double rejections = 0.0, covered = 0.0;
    for (std::size_t r = 0; r < points.size(); ++r) {
      if (lows[r] > 0.0 || highs[r] < 0.0) rejections += 1.0;
      if (lows[r] <= truth && truth <= highs[r]) covered += 1.0;
    }
    row.power = rejections / n;
    row.coverage = covered / n;
  }
  return row;
}

}  // namespace

coda::SbpMatrix analysis_sbp_for(const StudyPlan& plan, const coda::SbpMatrix& generation) {
  switch (plan.analysis) {
    case AnalysisSbp::generation:
      return generation;
    case AnalysisSbp::reversed_pivot: {
      std::vector<Eigen::Index> order(static_cast<std::size_t>(generation.parts()));
      for (Eigen::Index j = 0; j < generation.parts(); ++j)
        order[static_cast<std::size_t>(j)] = generation.parts() - 1 - j;
      return coda::pivotal_sbp(generation.parts(), order, generation.part_labels);
    }
    case AnalysisSbp::custom:
      if (!plan.analysis_sbp) throw Error(errc::config_invalid, "custom analysis SBP missing");
      if (plan.analysis_sbp->parts() != generation.parts())
        throw Error(errc::dimension_mismatch, "analysis SBP parts do not match generation");
      return *plan.analysis_sbp;
  }
  throw Error(errc::config_invalid, "unknown analysis SBP mode");
}

ReplicationSummary run_cell(const StudyPlan& plan, std::size_t cell_index) {
  if (cell_index >= plan.cells.size()) throw Error(errc::config_invalid, "cell index out of range");
  if (plan.replicates < 1) throw Error(errc::config_invalid, "need at least one replicate");
  const StudyCell& cell = plan.cells[cell_index];
  const int threads = resolve_threads(plan.threads);

  simgen::GenerativeConfig config = simgen::scenario_preset(cell.scenario);
  config.alpha_s = cell.alpha_s;
  config.theta = cell.theta;
  config.n = plan.cohort_size;
  config.seed = derive_key(plan.master_seed, 0xCA11, cell_index);
  config.validate();

  const simgen::TruePathCoefficients truth =
      simgen::calibrate_truth(config, plan.calibration_reps, threads);

  const coda::SbpMatrix analysis = analysis_sbp_for(plan, config.sbp);
  const bool misspecified = analysis.entries != config.sbp.entries;

  med::MediationOptions options;
  options.zero_replacement = config.zero_replacement;
  options.ci_level = plan.ci_level;
  options.pooling = plan.pooling;

  const Eigen::Index big_j = config.balances();
  std::vector<ReplicateRecord> records(static_cast<std::size_t>(plan.replicates));
  parallel_for(plan.replicates, threads, [&](int r) {
    ReplicateRecord& rec = records[static_cast<std::size_t>(r)];
    try {
      simgen::GenerativeConfig replicate_config = config;
      replicate_config.seed =
          derive_key(plan.master_seed, 0x5EED, cell_index, static_cast<std::uint64_t>(r));
      med::CohortData data = simgen::simulate_cohort(replicate_config, truth);
      med::MediationEstimate est = med::mediate(data, analysis, options);
      rec.cie.resize(big_j);
      rec.cie_se.resize(big_j);
      for (Eigen::Index k = 0; k < big_j; ++k) {
        rec.cie[k] = est.cie[static_cast<std::size_t>(k)].point;
        rec.cie_se[k] = est.cie[static_cast<std::size_t>(k)].se;
      }
      rec.oie = est.oie.point;
      rec.oie_se = est.oie.se;
      rec.nde = est.nde.point;
      rec.nde_se = est.nde.se;
      rec.te = est.te.point;
      rec.te_se = est.te.se;
      rec.beta = est.beta_pooled;
      rec.gamma = est.gamma_pooled;
      rec.beta_var = est.beta_pooled_var;
      rec.gamma_var = est.gamma_pooled_var;
      rec.ok = true;
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
  });

  ReplicationSummary out;
  out.cell = cell;
  out.misspecified = misspecified;
  out.records = std::move(records);
  const double z = stats::z_for_ci(plan.ci_level);

  std::vector<double> points, ses, lows, highs;
  auto collect = [&](auto&& point_of, auto&& se_of) {
    points.clear();
    ses.clear();
    lows.clear();
    highs.clear();
    for (const auto& rec : out.records) {
      if (!rec.ok) continue;
      const double p = point_of(rec), s = se_of(rec);
      points.push_back(p);
      ses.push_back(s);
      lows.push_back(p - z * s);
      highs.push_back(p + z * s);
    }
  };

  for (Eigen::Index k = 0; k < big_j; ++k) {
    collect([&](const ReplicateRecord& r) { return r.cie[k]; },
            [&](const ReplicateRecord& r) { return r.cie_se[k]; });
    out.effects.push_back(summarize_effect("CIE" + std::to_string(k + 1), config.cie_targets[k],
                                           misspecified, points, ses, lows, highs));
  }
  collect([](const ReplicateRecord& r) { return r.oie; },
          [](const ReplicateRecord& r) { return r.oie_se; });
  out.effects.push_back(summarize_effect("OIE", config.cie_targets.sum(), misspecified, points,
                                         ses, lows, highs));

  out.replicates = static_cast<int>(points.size());
  out.failures = plan.replicates - out.replicates;

  CellDiagnostics& diag = out.diag;
  diag.beta_true = truth.beta1_weighted;
  diag.gamma_true = truth.gamma1;
  diag.beta_mean = Eigen::VectorXd::Zero(big_j);
  diag.gamma_mean = Eigen::VectorXd::Zero(big_j);
  diag.beta_emp_var = Eigen::VectorXd::Zero(big_j);
  diag.gamma_emp_var = Eigen::VectorXd::Zero(big_j);
  diag.beta_avg_var = Eigen::VectorXd::Zero(big_j);
  diag.gamma_avg_var = Eigen::VectorXd::Zero(big_j);
  std::vector<double> values;
  for (Eigen::Index k = 0; k < big_j; ++k) {
    auto fill = [&](auto&& get, double& mean_slot, double& var_slot) {
      values.clear();
      for (const auto& rec : out.records)
        if (rec.ok) values.push_back(get(rec));
      mean_slot = values.empty() ? kNaN : mean_of(values);
      var_slot = sample_var(values);
    };
    fill([&](const ReplicateRecord& r) { return r.beta[k]; }, diag.beta_mean[k],
         diag.beta_emp_var[k]);
    fill([&](const ReplicateRecord& r) { return r.gamma[k]; }, diag.gamma_mean[k],
         diag.gamma_emp_var[k]);
    double dummy;
    fill([&](const ReplicateRecord& r) { return r.beta_var[k]; }, diag.beta_avg_var[k], dummy);
    fill([&](const ReplicateRecord& r) { return r.gamma_var[k]; }, diag.gamma_avg_var[k], dummy);
  }
  if (!plan.dump_replicates) out.records.clear();
  return out;
}

std::vector<ReplicationSummary> run_study(const StudyPlan& plan) {
  std::vector<ReplicationSummary> out;
  out.reserve(plan.cells.size());
  for (std::size_t c = 0; c < plan.cells.size(); ++c) out.push_back(run_cell(plan, c));
  return out;
}

std::vector<RatioRow> ratio_diagnostics(const std::vector<ReplicationSummary>& summaries) {
  std::vector<RatioRow> rows;
  for (const auto& s : summaries) {
    if (s.misspecified) continue;  // ratios are defined against the true coefficients
    RatioRow row;
    row.cell = s.cell;
    row.beta11 = s.diag.beta_true[0];
    row.gamma11 = s.diag.gamma_true[0];
    row.var_beta1 = s.diag.beta_emp_var[0];
    row.var_gamma1 = s.diag.gamma_emp_var[0];
    row.product = row.var_beta1 * row.var_gamma1;
    row.beta_ratio = row.beta11 * row.beta11 / row.var_beta1;
    row.gamma_ratio = row.gamma11 * row.gamma11 / row.var_gamma1;
    row.var_ie = row.product * (row.beta_ratio + row.gamma_ratio);
    rows.push_back(row);
  }
  return rows;
}

std::string format_alpha(double alpha_s) {
  if (std::isinf(alpha_s)) return "inf";
  return fmt(alpha_s);
}

std::string summary_csv(const std::vector<ReplicationSummary>& summaries) {
  std::string out =
      "scenario,alpha_s,theta,eff,true,est,bias,se_hat,se_est,power,coverage,replicates,"
      "failures\n";
  for (const auto& s : summaries) {
    for (const auto& e : s.effects) {
      out += s.cell.scenario + "," + format_alpha(s.cell.alpha_s) + "," + fmt(s.cell.theta) +
             "," + e.effect + "," + fmt(e.truth) + "," + fmt(e.mean) + "," + fmt(e.bias) + "," +
             fmt(e.avg_se) + "," + fmt(e.emp_se) + "," + fmt(e.power) + "," + fmt(e.coverage) +
             "," + std::to_string(s.replicates) + "," + std::to_string(s.failures) + "\n";
    }
  }
  return out;
}

std::string diagnostics_csv(const std::vector<RatioRow>& rows) {
  std::string out =
      "scenario,alpha_s,theta,beta11,gamma11,var_beta1,var_gamma1,product,beta_ratio,"
      "gamma_ratio,var_ie\n";
  for (const auto& r : rows) {
    out += r.cell.scenario + "," + format_alpha(r.cell.alpha_s) + "," + fmt(r.cell.theta) + "," +
           fmt(r.beta11) + "," + fmt(r.gamma11) + "," + fmt(r.var_beta1) + "," +
           fmt(r.var_gamma1) + "," + fmt(r.product) + "," + fmt(r.beta_ratio) + "," +
           fmt(r.gamma_ratio) + "," + fmt(r.var_ie) + "\n";
  }
  return out;
}

std::string replicates_csv(const ReplicationSummary& summary) {
  const Eigen::Index big_j =
      summary.records.empty() ? 0 : summary.records.front().cie.size();
  std::string out = "replicate,ok,te,te_se,nde,nde_se,oie,oie_se";
  for (Eigen::Index k = 1; k <= big_j; ++k)
    out += ",cie" + std::to_string(k) + ",cie" + std::to_string(k) + "_se";
  for (Eigen::Index k = 1; k <= big_j; ++k) out += ",beta" + std::to_string(k);
  for (Eigen::Index k = 1; k <= big_j; ++k) out += ",gamma" + std::to_string(k);
  out += ",error\n";
  for (std::size_t r = 0; r < summary.records.size(); ++r) {
    const auto& rec = summary.records[r];
    out += std::to_string(r) + "," + (rec.ok ? "1" : "0");
    if (rec.ok) {
      out += "," + fmt(rec.te) + "," + fmt(rec.te_se) + "," + fmt(rec.nde) + "," +
             fmt(rec.nde_se) + "," + fmt(rec.oie) + "," + fmt(rec.oie_se);
      for (Eigen::Index k = 0; k < big_j; ++k)
        out += "," + fmt(rec.cie[k]) + "," + fmt(rec.cie_se[k]);
      for (Eigen::Index k = 0; k < big_j; ++k) out += "," + fmt(rec.beta[k]);
      for (Eigen::Index k = 0; k < big_j; ++k) out += "," + fmt(rec.gamma[k]);
      out += ",";
    } else {
      for (Eigen::Index k = 0; k < 6 + 4 * big_j; ++k) out += ",";
      out += "," + rec.error;
    }
    out += "\n";
  }
  return out;
}

}  // namespace codamed::expt
