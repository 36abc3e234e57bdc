#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "codamed/coda.hpp"
#include "codamed/mediation.hpp"

namespace codamed::simgen {

/// Sentinel for the multinomial limit of the Dirichlet mixing distribution.
inline constexpr double kAlphaInfinity = std::numeric_limits<double>::infinity();

struct ResponseParams {
  double gamma0 = 2.0;
  double gamma2 = 0.4;
  Eigen::VectorXd gamma_confounder;  // one coefficient per confounder
  double sigma = 1.0;                // residual sd (not reported in the study design)
};

/// Parameterization of the hierarchical count model
///   K ~ NegBin(mu, theta), pi ~ Dirichlet(alpha_s * pbar), counts ~ Mult(K, pi),
/// where pbar = base_props(x) + sum_c C_c * confounder_effects[c], together
/// with the exposure model P(X=1|C) and the linear response model.
struct GenerativeConfig {
  int n = 1000;
  std::uint64_t seed = 0;
  double mu = 10000.0;
  double theta = 0.0;      // 0 selects the exact Poisson total
  double alpha_s = 1.0;    // kAlphaInfinity selects fixed multinomial probabilities
  Eigen::VectorXd base_props_x0;  // J+1, simplex
  Eigen::VectorXd base_props_x1;
  std::vector<Eigen::VectorXd> confounder_effects;  // per confounder, length J+1
  double exposure_intercept = 0.25;
  Eigen::VectorXd exposure_slopes;  // per confounder
  ResponseParams response;
  Eigen::VectorXd cie_targets;  // J
  coda::SbpMatrix sbp;
  double zero_replacement = 0.5;

  Eigen::Index parts() const { return base_props_x0.size(); }
  Eigen::Index balances() const { return parts() - 1; }
  Eigen::Index n_confounders() const { return static_cast<Eigen::Index>(confounder_effects.size()); }
  Eigen::Index n_strata() const { return Eigen::Index(1) << n_confounders(); }

  /// Expected class proportions for exposure x and confounder values c.
  Eigen::VectorXd mean_props(int x, const std::vector<int>& confounders) const;

  /// Confounder values of stratum h: bit c of h.
  std::vector<int> stratum_confounders(Eigen::Index h) const;
  std::string stratum_label(Eigen::Index h) const;

  void validate() const;
};

/// Monte-Carlo approximation of the exposure effects on the ilr coordinates.
struct BetaCalibration {
  Eigen::MatrixXd by_stratum;  // H x J, beta_{h1k}
  Eigen::VectorXd weighted;    // J, equal stratum weights
  long mc_reps = 0;
};

struct TruePathCoefficients {
  Eigen::MatrixXd beta1_by_stratum;
  Eigen::VectorXd beta1_weighted;
  Eigen::VectorXd gamma1;
  long mc_reps = 0;
};

/// One count vector from the hierarchical model. Totals of zero carry no
/// compositional information and are redrawn.
Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> draw_individual_counts(
    const GenerativeConfig& config, int x, const std::vector<int>& confounders,
    std::mt19937_64& gen);

/// beta_{h1k} = E[M_k | X=1, h] - E[M_k | X=0, h], each mean over mc_reps
/// synthetic individuals transformed with the configured SBP (zeros replaced
/// before closure). Deterministic given config.seed, for any thread count.
BetaCalibration calibrate_true_betas(const GenerativeConfig& config, long mc_reps,
                                     int threads = 1);

/// gamma_{1k} = cie_targets_k / beta1_weighted_k (0 when the target is 0).
Eigen::VectorXd calibrate_gammas(const Eigen::VectorXd& cie_targets,
                                 const Eigen::VectorXd& beta1_weighted);

TruePathCoefficients calibrate_truth(const GenerativeConfig& config, long mc_reps,
                                     int threads = 1);

/// Draw a full cohort: confounders, exposure, counts, and the response
///   Y = gamma0 + gamma1^T M + gamma2 X + gamma_C^T C + N(0, sigma^2)
/// with M the ilr coordinates of the individual's closed counts.
med::CohortData simulate_cohort(const GenerativeConfig& config,
                                const TruePathCoefficients& truth);

/// Study-design presets "scenario1", "scenario2", "scenario3". Scenarios 1-2
/// use the five-part taxonomy contrast, scenario 3 the pivotal contrast with
/// the affected part as pivot. theta, alpha_s, n and seed are left at their
/// defaults for the caller to set.
GenerativeConfig scenario_preset(const std::string& name);

/// The taxonomy SBP of the five-part simulation scenarios: A vs rest,
/// {B,C} vs {D,E}, B vs C, D vs E.
coda::SbpMatrix taxonomy_sbp();

}  // namespace codamed::simgen
