#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "codamed/coda.hpp"

namespace codamed::med {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// One analysis cohort: per-individual taxon counts, binary exposure,
/// confounder stratum label and continuous response.
struct CohortData {
  CountMatrix counts;                //  n x (J+1)
  Eigen::VectorXi exposure;          //  0/1
  std::vector<std::string> stratum;  //  length n
  Eigen::VectorXd response;

  Eigen::Index size() const { return counts.rows(); }
  Eigen::Index parts() const { return counts.cols(); }
};

/// How per-stratum response coefficients enter the pooled indirect effects.
///  per_stratum_product:  CIE_k = sum_h P(h) gamma_h1k beta_h1k. Keeps the
///    exact per-replication identity TE = NDE + OIE.
///  shared: CIE_k = (sum_h P(h) gamma_h1k)(sum_h P(h) beta_h1k), the form the
///    indirect-effect expression takes when gamma is common across strata.
enum class GammaPooling { per_stratum_product, shared };

struct MediationOptions {
  double zero_replacement = 0.5;
  double ci_level = 0.90;
  GammaPooling pooling = GammaPooling::per_stratum_product;
  // empirical proportions n_h/n when absent
  std::optional<std::map<std::string, double>> stratum_weights;
};

/// Per-stratum regression results: the mediator model M_k ~ 1 + X fitted
/// jointly across coordinates, and the response model Y ~ 1 + M + X.
struct StratumFit {
  std::string id;
  Eigen::Index n = 0;
  Eigen::VectorXd beta0;       // J intercepts of the mediator model
  Eigen::VectorXd beta1;       // J exposure effects on the ilr coordinates
  Eigen::MatrixXd beta1_cov;   // J x J
  double gamma0 = 0.0;
  Eigen::VectorXd gamma1;      // J coordinate effects on the response
  double gamma2 = 0.0;         // direct-effect coefficient
  Eigen::MatrixXd gamma_cov;   // (J+1) x (J+1), order (gamma1..., gamma2)
  double response_residual_variance = 0.0;
};

struct EffectEstimate {
  double point = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct MediationEstimate {
  EffectEstimate te, nde, oie;
  std::vector<EffectEstimate> cie;      // length J; sum of points == oie.point
  Eigen::VectorXd beta_pooled;          // sum_h P(h) beta_h1
  Eigen::VectorXd gamma_pooled;         // sum_h P(h) gamma_h1
  Eigen::VectorXd beta_pooled_var;      // diag of sum_h P(h)^2 cov(beta_h1)
  Eigen::VectorXd gamma_pooled_var;
  std::map<std::string, double> stratum_weights;
  double ci_level = 0.90;
};

/// Strata in deterministic (sorted label) order with their row indices.
std::vector<std::pair<std::string, std::vector<Eigen::Index>>> strata_partition(
    const CohortData& data);

StratumFit fit_stratum(const CohortData& data, const std::vector<Eigen::Index>& rows,
                       const coda::ContrastBasis& basis, double zero_replacement = 0.5);

/// Delta-method standard error of a single product gamma * beta,
/// sqrt(beta^2 var(gamma) + gamma^2 var(beta)).
double delta_se_cie(double beta, double var_beta, double gamma, double var_gamma);

/// Delta-method standard error of beta^T gamma with coefficient covariances,
/// the full gradient-covariance-gradient quadratic form.
double delta_se_oie(const Eigen::VectorXd& beta, const Eigen::MatrixXd& beta_cov,
                    const Eigen::VectorXd& gamma, const Eigen::MatrixXd& gamma_cov);

MediationEstimate pool_effects(const std::vector<StratumFit>& fits,
                               const std::vector<double>& weights, double ci_level = 0.90,
                               GammaPooling pooling = GammaPooling::per_stratum_product);

/// Stratified regression of the response on exposure alone, pooled over strata.
EffectEstimate estimate_total_effect(const CohortData& data,
                                     const std::optional<std::map<std::string, double>>& weights =
                                         std::nullopt,
                                     double ci_level = 0.90);

/// Full pipeline: close counts, transform to ilr coordinates under `sbp`,
/// fit every stratum, pool, and attach the total effect.
MediationEstimate mediate(const CohortData& data, const coda::SbpMatrix& sbp,
                          const MediationOptions& options = {});

}  // namespace codamed::med
