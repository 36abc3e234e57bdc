#include "codamed/config_json.hpp"

#include <cmath>

#include "json.hpp"

namespace codamed::config {

using nlohmann::json;

namespace {

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(errc::io_error, std::string("bad JSON: ") + e.what());
  }
}

Eigen::VectorXd vector_from(const json& j, const std::string& key) {
  if (!j.is_array()) throw Error(errc::config_invalid, key + " must be an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(errc::config_invalid, key + " must hold numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

json vector_to(const Eigen::VectorXd& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

double alpha_from(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "Inf" || s == "infinity") return simgen::kAlphaInfinity;
    throw Error(errc::config_invalid, "alpha_s string must be \"inf\"");
  }
  if (!j.is_number()) throw Error(errc::config_invalid, "alpha_s must be a number or \"inf\"");
  return j.get<double>();
}

json alpha_to(double alpha_s) {
  if (std::isinf(alpha_s)) return "inf";
  return alpha_s;
}

coda::SbpMatrix sbp_from(const json& j) {
  if (!j.is_object() || !j.contains("entries"))
    throw Error(errc::config_invalid, "sbp must be an object with 'entries'");
  const json& rows = j.at("entries");
  if (!rows.is_array() || rows.empty())
    throw Error(errc::config_invalid, "sbp entries must be a non-empty array of rows");
  const Eigen::Index parts = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index balances = static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXi m(parts, balances);
  for (Eigen::Index r = 0; r < parts; ++r) {
    const json& row = rows[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != balances)
      throw Error(errc::config_invalid, "sbp entries must be rectangular");
    for (Eigen::Index c = 0; c < balances; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<int>();
  }
  std::vector<std::string> labels;
  if (j.contains("part_labels")) labels = j.at("part_labels").get<std::vector<std::string>>();
  return coda::validate_sbp(m, labels);
}

json sbp_to(const coda::SbpMatrix& sbp) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < sbp.parts(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < sbp.balances(); ++c) row.push_back(sbp.entries(r, c));
    rows.push_back(row);
  }
  return json{{"part_labels", sbp.part_labels}, {"entries", rows}};
}

}  // namespace

simgen::GenerativeConfig config_from_json(const std::string& text) {
  json j = parse(text);
  if (!j.is_object()) throw Error(errc::config_invalid, "config must be a JSON object");

  simgen::GenerativeConfig cfg;
  if (j.contains("preset")) cfg = simgen::scenario_preset(j.at("preset").get<std::string>());

  if (j.contains("n")) cfg.n = j.at("n").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("mu")) cfg.mu = j.at("mu").get<double>();
  if (j.contains("theta")) cfg.theta = j.at("theta").get<double>();
  if (j.contains("alpha_s")) cfg.alpha_s = alpha_from(j.at("alpha_s"));
  if (j.contains("base_props_x0"))
    cfg.base_props_x0 = vector_from(j.at("base_props_x0"), "base_props_x0");
  if (j.contains("base_props_x1"))
    cfg.base_props_x1 = vector_from(j.at("base_props_x1"), "base_props_x1");
  if (j.contains("confounder_effects")) {
    cfg.confounder_effects.clear();
    for (const auto& eff : j.at("confounder_effects"))
      cfg.confounder_effects.push_back(vector_from(eff, "confounder_effects"));
  }
  if (j.contains("exposure_intercept"))
    cfg.exposure_intercept = j.at("exposure_intercept").get<double>();
  if (j.contains("exposure_slopes"))
    cfg.exposure_slopes = vector_from(j.at("exposure_slopes"), "exposure_slopes");
  if (j.contains("response")) {
    const json& r = j.at("response");
    if (r.contains("gamma0")) cfg.response.gamma0 = r.at("gamma0").get<double>();
    if (r.contains("gamma2")) cfg.response.gamma2 = r.at("gamma2").get<double>();
    if (r.contains("gamma_confounder"))
      cfg.response.gamma_confounder = vector_from(r.at("gamma_confounder"), "gamma_confounder");
    if (r.contains("sigma")) cfg.response.sigma = r.at("sigma").get<double>();
  }
  if (j.contains("cie_targets")) cfg.cie_targets = vector_from(j.at("cie_targets"), "cie_targets");
  if (j.contains("sbp")) cfg.sbp = sbp_from(j.at("sbp"));
  if (j.contains("zero_replacement")) cfg.zero_replacement = j.at("zero_replacement").get<double>();

  cfg.validate();
  return cfg;
}

std::string config_to_json(const simgen::GenerativeConfig& cfg) {
  json r{{"gamma0", cfg.response.gamma0},
         {"gamma2", cfg.response.gamma2},
         {"gamma_confounder", vector_to(cfg.response.gamma_confounder)},
         {"sigma", cfg.response.sigma}};
  json eff = json::array();
  for (const auto& e : cfg.confounder_effects) eff.push_back(vector_to(e));
  json j{{"n", cfg.n},
         {"seed", cfg.seed},
         {"mu", cfg.mu},
         {"theta", cfg.theta},
         {"alpha_s", alpha_to(cfg.alpha_s)},
         {"base_props_x0", vector_to(cfg.base_props_x0)},
         {"base_props_x1", vector_to(cfg.base_props_x1)},
         {"confounder_effects", eff},
         {"exposure_intercept", cfg.exposure_intercept},
         {"exposure_slopes", vector_to(cfg.exposure_slopes)},
         {"response", r},
         {"cie_targets", vector_to(cfg.cie_targets)},
         {"sbp", sbp_to(cfg.sbp)},
         {"zero_replacement", cfg.zero_replacement}};
  return j.dump(2) + "\n";
}

expt::StudyPlan plan_from_json(const std::string& text) {
  json j = parse(text);
  if (!j.is_object()) throw Error(errc::config_invalid, "plan must be a JSON object");
  expt::StudyPlan plan;
  if (!j.contains("cells") || !j.at("cells").is_array() || j.at("cells").empty())
    throw Error(errc::config_invalid, "plan needs a non-empty 'cells' array");
  for (const auto& c : j.at("cells")) {
    expt::StudyCell cell;
    cell.scenario = c.at("scenario").get<std::string>();
    cell.alpha_s = c.contains("alpha_s") ? alpha_from(c.at("alpha_s")) : 1.0;
    cell.theta = c.contains("theta") ? c.at("theta").get<double>() : 0.0;
    plan.cells.push_back(cell);
  }
  if (j.contains("replicates")) plan.replicates = j.at("replicates").get<int>();
  if (j.contains("n")) plan.cohort_size = j.at("n").get<int>();
  if (j.contains("master_seed")) plan.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("ci_level")) plan.ci_level = j.at("ci_level").get<double>();
  if (j.contains("calibration_reps"))
    plan.calibration_reps = j.at("calibration_reps").get<long>();
  if (j.contains("pooling")) {
    const std::string p = j.at("pooling").get<std::string>();
    if (p == "shared")
      plan.pooling = med::GammaPooling::shared;
    else if (p == "per_stratum")
      plan.pooling = med::GammaPooling::per_stratum_product;
    else
      throw Error(errc::config_invalid, "pooling must be 'shared' or 'per_stratum'");
  }
  if (j.contains("threads")) plan.threads = j.at("threads").get<int>();
  if (j.contains("dump_replicates")) plan.dump_replicates = j.at("dump_replicates").get<bool>();
  if (j.contains("analysis_sbp")) {
    const json& a = j.at("analysis_sbp");
    if (a.is_string()) {
      const std::string s = a.get<std::string>();
      if (s == "generation")
        plan.analysis = expt::AnalysisSbp::generation;
      else if (s == "reversed_pivot")
        plan.analysis = expt::AnalysisSbp::reversed_pivot;
      else
        throw Error(errc::config_invalid,
                    "analysis_sbp must be 'generation', 'reversed_pivot' or an SBP object");
    } else {
      plan.analysis = expt::AnalysisSbp::custom;
      plan.analysis_sbp = sbp_from(a);
    }
  }
  return plan;
}

std::string plan_to_json(const expt::StudyPlan& plan) {
  json cells = json::array();
  for (const auto& c : plan.cells)
    cells.push_back(json{{"scenario", c.scenario}, {"alpha_s", alpha_to(c.alpha_s)},
                         {"theta", c.theta}});
  json j{{"cells", cells},
         {"replicates", plan.replicates},
         {"n", plan.cohort_size},
         {"master_seed", plan.master_seed},
         {"ci_level", plan.ci_level},
         {"calibration_reps", plan.calibration_reps},
         {"pooling", plan.pooling == med::GammaPooling::shared ? "shared" : "per_stratum"},
         {"threads", plan.threads},
         {"dump_replicates", plan.dump_replicates}};
  switch (plan.analysis) {
    case expt::AnalysisSbp::generation:
      j["analysis_sbp"] = "generation";
      break;
    case expt::AnalysisSbp::reversed_pivot:
      j["analysis_sbp"] = "reversed_pivot";
      break;
    case expt::AnalysisSbp::custom:
      j["analysis_sbp"] = sbp_to(*plan.analysis_sbp);
      break;
  }
  return j.dump(2) + "\n";
}

}  // namespace codamed::config
