#include "codamed/mediation.hpp"

#include <algorithm>
#include <cmath>

#include "codamed/regress.hpp"
#include "codamed/stats.hpp"

namespace codamed::med {

namespace {

EffectEstimate make_estimate(double point, double var, double z) {
  EffectEstimate e;
  e.point = point;
  e.se = std::sqrt(std::max(0.0, var));
  e.ci_low = point - z * e.se;
  e.ci_high = point + z * e.se;
  return e;
}

void check_cohort(const CohortData& data) {
  const Eigen::Index n = data.size();
  if (n == 0) throw Error(errc::dimension_mismatch, "empty cohort");
  if (data.exposure.size() != n || data.response.size() != n ||
      static_cast<Eigen::Index>(data.stratum.size()) != n)
    throw Error(errc::dimension_mismatch, "cohort columns disagree on length");
  for (Eigen::Index i = 0; i < n; ++i)
    if (data.exposure[i] != 0 && data.exposure[i] != 1)
      throw Error(errc::config_invalid, "exposure must be 0/1");
}

std::vector<double> resolve_weights(
    const std::vector<std::pair<std::string, std::vector<Eigen::Index>>>& strata,
    const std::optional<std::map<std::string, double>>& requested, Eigen::Index n) {
  std::vector<double> w(strata.size());
  if (!requested) {
    for (std::size_t s = 0; s < strata.size(); ++s)
      w[s] = static_cast<double>(strata[s].second.size()) / static_cast<double>(n);
    return w;
  }
  double total = 0.0;
  for (std::size_t s = 0; s < strata.size(); ++s) {
    auto it = requested->find(strata[s].first);
    if (it == requested->end())
      throw Error(errc::weight_mismatch, "no weight for stratum '" + strata[s].first + "'");
    w[s] = it->second;
    total += it->second;
  }
  if (std::abs(total - 1.0) > 1e-8)
    throw Error(errc::weight_mismatch, "stratum weights must sum to 1");
  return w;
}

}  // namespace

std::vector<std::pair<std::string, std::vector<Eigen::Index>>> strata_partition(
    const CohortData& data) {
  std::map<std::string, std::vector<Eigen::Index>> by_label;
  for (Eigen::Index i = 0; i < data.size(); ++i) by_label[data.stratum[i]].push_back(i);
  std::vector<std::pair<std::string, std::vector<Eigen::Index>>> out(by_label.begin(),
                                                                     by_label.end());
  return out;
}

StratumFit fit_stratum(const CohortData& data, const std::vector<Eigen::Index>& rows,
                       const coda::ContrastBasis& basis, double zero_replacement) {
  const Eigen::Index nh = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index big_j = basis.balances();
  if (data.parts() != basis.parts())
    throw Error(errc::dimension_mismatch, "count columns do not match basis parts");
  // Response model has an intercept, J coordinates and the exposure; one
  // residual degree of freedom on top of that is the floor.
  if (nh < big_j + 3)
    throw Error(errc::stratum_too_small, "stratum needs at least J+3 individuals, got " +
                                             std::to_string(nh));
  Eigen::Index exposed = 0;
  for (Eigen::Index i : rows) exposed += data.exposure[i];
  if (exposed == 0 || exposed == nh)
    throw Error(errc::missing_exposure_arm, "stratum lacks an exposed or unexposed arm");

  Eigen::MatrixXd coords(nh, big_j);
  Eigen::VectorXd x(nh), y(nh);
  for (Eigen::Index r = 0; r < nh; ++r) {
    const Eigen::Index i = rows[static_cast<std::size_t>(r)];
    auto comp = coda::close_counts(data.counts.row(i).transpose(), zero_replacement);
    coords.row(r) = coda::ilr_forward(comp, basis).coords().transpose();
    x[r] = static_cast<double>(data.exposure[i]);
    y[r] = data.response[i];
  }

  StratumFit fit;
  fit.id = data.stratum[static_cast<std::size_t>(rows.front())];
  fit.n = nh;

  Eigen::MatrixXd mediator_design(nh, 2);
  mediator_design.col(0).setOnes();
  mediator_design.col(1) = x;
  auto mfit = regress::mv_ols_fit(regress::DesignMatrix(mediator_design), coords);
  fit.beta0 = mfit.coefficients.row(0).transpose();
  fit.beta1 = mfit.coefficients.row(1).transpose();
  fit.beta1_cov = mfit.coef_covariance(1);

  Eigen::MatrixXd response_design(nh, big_j + 2);
  response_design.col(0).setOnes();
  response_design.middleCols(1, big_j) = coords;
  response_design.col(big_j + 1) = x;
  auto rfit = regress::ols_fit(regress::DesignMatrix(response_design), y);
  fit.gamma0 = rfit.coefficients[0];
  fit.gamma1 = rfit.coefficients.segment(1, big_j);
  fit.gamma2 = rfit.coefficients[big_j + 1];
  fit.gamma_cov = rfit.coef_covariance.bottomRightCorner(big_j + 1, big_j + 1);
  fit.response_residual_variance = rfit.residual_variance;
  return fit;
}

double delta_se_cie(double beta, double var_beta, double gamma, double var_gamma) {
  if (var_beta < 0.0 || var_gamma < 0.0)
    throw Error(errc::config_invalid, "variances must be non-negative");
  return std::sqrt(beta * beta * var_gamma + gamma * gamma * var_beta);
}

double delta_se_oie(const Eigen::VectorXd& beta, const Eigen::MatrixXd& beta_cov,
                    const Eigen::VectorXd& gamma, const Eigen::MatrixXd& gamma_cov) {
  const Eigen::Index big_j = beta.size();
  if (gamma.size() != big_j || beta_cov.rows() != big_j || beta_cov.cols() != big_j ||
      gamma_cov.rows() != big_j || gamma_cov.cols() != big_j)
    throw Error(errc::dimension_mismatch, "delta-method inputs disagree on J");
  if (!beta_cov.isApprox(beta_cov.transpose(), 1e-8) ||
      !gamma_cov.isApprox(gamma_cov.transpose(), 1e-8))
    throw Error(errc::config_invalid, "covariance matrices must be symmetric");
  // gradient of beta^T gamma is (gamma, beta); covariance is block diagonal
  const double var = gamma.dot(beta_cov * gamma) + beta.dot(gamma_cov * beta);
  return std::sqrt(std::max(0.0, var));
}

MediationEstimate pool_effects(const std::vector<StratumFit>& fits,
                               const std::vector<double>& weights, double ci_level,
                               GammaPooling pooling) {
  if (fits.empty()) throw Error(errc::dimension_mismatch, "no stratum fits");
  if (weights.size() != fits.size())
    throw Error(errc::weight_mismatch, "one weight per stratum required");
  double total_weight = 0.0;
  for (double w : weights) total_weight += w;
  if (std::abs(total_weight - 1.0) > 1e-8)
    throw Error(errc::weight_mismatch, "stratum weights must sum to 1");
  const Eigen::Index big_j = fits.front().beta1.size();
  for (const auto& f : fits)
    if (f.beta1.size() != big_j || f.gamma1.size() != big_j)
      throw Error(errc::dimension_mismatch, "stratum fits disagree on J");
  if (!(ci_level > 0.0 && ci_level < 1.0))
    throw Error(errc::config_invalid, "ci level must lie in (0,1)");
  const double z = stats::z_for_ci(ci_level);

  MediationEstimate out;
  out.ci_level = ci_level;

  Eigen::VectorXd beta_bar = Eigen::VectorXd::Zero(big_j);
  Eigen::VectorXd gamma_bar = Eigen::VectorXd::Zero(big_j);
  Eigen::MatrixXd beta_bar_cov = Eigen::MatrixXd::Zero(big_j, big_j);
  Eigen::MatrixXd gamma_bar_cov = Eigen::MatrixXd::Zero(big_j, big_j);
  double nde_point = 0.0, nde_var = 0.0;
  for (std::size_t s = 0; s < fits.size(); ++s) {
    const double w = weights[s];
    const auto& f = fits[s];
    beta_bar += w * f.beta1;
    gamma_bar += w * f.gamma1;
    beta_bar_cov += w * w * f.beta1_cov;
    gamma_bar_cov += w * w * f.gamma_cov.topLeftCorner(big_j, big_j);
    nde_point += w * f.gamma2;
    nde_var += w * w * f.gamma_cov(big_j, big_j);
    out.stratum_weights[f.id] = w;
  }
  out.beta_pooled = beta_bar;
  out.gamma_pooled = gamma_bar;
  out.beta_pooled_var = beta_bar_cov.diagonal();
  out.gamma_pooled_var = gamma_bar_cov.diagonal();
  out.nde = make_estimate(nde_point, nde_var, z);

  out.cie.resize(static_cast<std::size_t>(big_j));
  double oie_point = 0.0, oie_var = 0.0;
  if (pooling == GammaPooling::shared) {
    for (Eigen::Index k = 0; k < big_j; ++k) {
      const double point = gamma_bar[k] * beta_bar[k];
      const double se = delta_se_cie(beta_bar[k], beta_bar_cov(k, k), gamma_bar[k],
                                     gamma_bar_cov(k, k));
      out.cie[static_cast<std::size_t>(k)] = make_estimate(point, se * se, z);
      oie_point += point;
    }
    const double oie_se = delta_se_oie(beta_bar, beta_bar_cov, gamma_bar, gamma_bar_cov);
    oie_var = oie_se * oie_se;
  } else {
    Eigen::VectorXd cie_point = Eigen::VectorXd::Zero(big_j);
    Eigen::VectorXd cie_var = Eigen::VectorXd::Zero(big_j);
    for (std::size_t s = 0; s < fits.size(); ++s) {
      const double w = weights[s];
      const auto& f = fits[s];
      const Eigen::MatrixXd gcov = f.gamma_cov.topLeftCorner(big_j, big_j);
      for (Eigen::Index k = 0; k < big_j; ++k) {
        cie_point[k] += w * f.gamma1[k] * f.beta1[k];
        const double se = delta_se_cie(f.beta1[k], f.beta1_cov(k, k), f.gamma1[k], gcov(k, k));
        cie_var[k] += w * w * se * se;
      }
      const double stratum_oie_se = delta_se_oie(f.beta1, f.beta1_cov, f.gamma1, gcov);
      oie_var += w * w * stratum_oie_se * stratum_oie_se;
    }
    for (Eigen::Index k = 0; k < big_j; ++k) {
      out.cie[static_cast<std::size_t>(k)] = make_estimate(cie_point[k], cie_var[k], z);
      oie_point += cie_point[k];
    }
  }
  out.oie = make_estimate(oie_point, oie_var, z);
  return out;
}

EffectEstimate estimate_total_effect(const CohortData& data,
                                     const std::optional<std::map<std::string, double>>& weights,
                                     double ci_level) {
  check_cohort(data);
  auto strata = strata_partition(data);
  std::vector<double> w = resolve_weights(strata, weights, data.size());
  const double z = stats::z_for_ci(ci_level);
  double point = 0.0, var = 0.0;
  for (std::size_t s = 0; s < strata.size(); ++s) {
    const auto& rows = strata[s].second;
    const Eigen::Index nh = static_cast<Eigen::Index>(rows.size());
    if (nh < 3) throw Error(errc::stratum_too_small, "stratum '" + strata[s].first + "'");
    Eigen::MatrixXd design(nh, 2);
    Eigen::VectorXd y(nh);
    design.col(0).setOnes();
    for (Eigen::Index r = 0; r < nh; ++r) {
      design(r, 1) = static_cast<double>(data.exposure[rows[static_cast<std::size_t>(r)]]);
      y[r] = data.response[rows[static_cast<std::size_t>(r)]];
    }
    auto fit = regress::ols_fit(regress::DesignMatrix(design), y);
    point += w[s] * fit.coefficients[1];
    var += w[s] * w[s] * fit.coef_covariance(1, 1);
  }
  return make_estimate(point, var, z);
}

MediationEstimate mediate(const CohortData& data, const coda::SbpMatrix& sbp,
                          const MediationOptions& options) {
  check_cohort(data);
  auto basis = coda::basis_from_sbp(sbp);
  auto strata = strata_partition(data);
  std::vector<double> w = resolve_weights(strata, options.stratum_weights, data.size());

  std::vector<StratumFit> fits;
  fits.reserve(strata.size());
  for (const auto& [label, rows] : strata)
    fits.push_back(fit_stratum(data, rows, basis, options.zero_replacement));

  MediationEstimate out = pool_effects(fits, w, options.ci_level, options.pooling);
  out.te = estimate_total_effect(data, options.stratum_weights, options.ci_level);
  return out;
}

}  // namespace codamed::med
