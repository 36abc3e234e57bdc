#include "codamed/simgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

#include "codamed/rng.hpp"

namespace codamed::simgen {

namespace {

constexpr std::uint64_t kCalibrationStream = 101;
constexpr std::uint64_t kCohortStream = 7;

void check_simplex(const Eigen::VectorXd& v, const char* what) {
  if (v.size() < 2) throw Error(errc::config_invalid, std::string(what) + " needs >= 2 parts");
  double total = 0.0;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (!(v[j] > 0.0)) throw Error(errc::config_invalid, std::string(what) + " must be strictly positive");
    total += v[j];
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw Error(errc::config_invalid, std::string(what) + " must sum to 1");
}

void run_tasks(Eigen::Index count, int threads, const std::function<void(Eigen::Index)>& task) {
  if (threads <= 1 || count <= 1) {
    for (Eigen::Index t = 0; t < count; ++t) task(t);
    return;
  }
  std::atomic<Eigen::Index> next{0};
  std::vector<std::thread> pool;
  const int workers = std::min<int>(threads, static_cast<int>(count));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (Eigen::Index t = next++; t < count; t = next++) task(t);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

Eigen::VectorXd GenerativeConfig::mean_props(int x, const std::vector<int>& confounders) const {
  Eigen::VectorXd pbar = (x == 1) ? base_props_x1 : base_props_x0;
  for (std::size_t c = 0; c < confounder_effects.size(); ++c)
    if (confounders[c] != 0) pbar += confounder_effects[c];
  for (Eigen::Index j = 0; j < pbar.size(); ++j)
    if (!(pbar[j] > 0.0))
      throw Error(errc::config_invalid, "mean proportions not positive after confounder offsets");
  return pbar;
}

std::vector<int> GenerativeConfig::stratum_confounders(Eigen::Index h) const {
  std::vector<int> c(static_cast<std::size_t>(n_confounders()));
  for (Eigen::Index b = 0; b < n_confounders(); ++b)
    c[static_cast<std::size_t>(b)] = static_cast<int>((h >> b) & 1);
  return c;
}

std::string GenerativeConfig::stratum_label(Eigen::Index h) const {
  auto c = stratum_confounders(h);
  std::string label;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) label += ';';
    label += std::to_string(c[i]);
  }
  return label;
}

void GenerativeConfig::validate() const {
  if (n <= 0) throw Error(errc::config_invalid, "cohort size must be positive");
  if (!(mu > 0.0)) throw Error(errc::config_invalid, "mu must be positive");
  if (theta < 0.0) throw Error(errc::config_invalid, "theta must be >= 0");
  if (!(alpha_s > 0.0)) throw Error(errc::config_invalid, "alpha_s must be positive");
  check_simplex(base_props_x0, "base_props_x0");
  check_simplex(base_props_x1, "base_props_x1");
  if (base_props_x1.size() != parts())
    throw Error(errc::config_invalid, "base proportion vectors disagree on parts");
  for (const auto& eff : confounder_effects)
    if (eff.size() != parts())
      throw Error(errc::config_invalid, "confounder effect length must equal parts");
  if (exposure_slopes.size() != n_confounders())
    throw Error(errc::config_invalid, "one exposure slope per confounder required");
  if (response.gamma_confounder.size() != n_confounders())
    throw Error(errc::config_invalid, "one response coefficient per confounder required");
  if (!(response.sigma > 0.0)) throw Error(errc::config_invalid, "sigma must be positive");
  if (cie_targets.size() != balances())
    throw Error(errc::config_invalid, "cie_targets must have J entries");
  if (sbp.parts() != parts())
    throw Error(errc::config_invalid, "sbp parts do not match proportion vectors");
  if (!(zero_replacement > 0.0))
    throw Error(errc::config_invalid, "zero replacement must be positive");
  // every stratum/exposure cell must stay strictly positive
  for (Eigen::Index h = 0; h < n_strata(); ++h)
    for (int x = 0; x < 2; ++x) (void)mean_props(x, stratum_confounders(h));
  double plo = exposure_intercept, phi = exposure_intercept;
  for (Eigen::Index c = 0; c < n_confounders(); ++c) {
    plo += std::min(0.0, exposure_slopes[c]);
    phi += std::max(0.0, exposure_slopes[c]);
  }
  if (!(plo > 0.0 && phi < 1.0))
    throw Error(errc::config_invalid, "exposure probabilities must stay inside (0,1)");
}

Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> draw_individual_counts(
    const GenerativeConfig& config, int x, const std::vector<int>& confounders,
    std::mt19937_64& gen) {
  const Eigen::VectorXd pbar = config.mean_props(x, confounders);
  std::int64_t total = 0;
  do {
    total = rng::sample_total_count(gen, config.mu, config.theta);
  } while (total == 0);
  Eigen::VectorXd pi;
  if (std::isinf(config.alpha_s)) {
    pi = pbar / pbar.sum();
  } else {
    pi = rng::sample_dirichlet(gen, config.alpha_s * pbar);
  }
  return rng::sample_multinomial(gen, total, pi);
}

BetaCalibration calibrate_true_betas(const GenerativeConfig& config, long mc_reps, int threads) {
  config.validate();
  if (mc_reps < 1) throw Error(errc::config_invalid, "mc_reps must be >= 1");
  const Eigen::Index big_j = config.balances();
  const Eigen::Index strata = config.n_strata();
  auto basis = coda::basis_from_sbp(config.sbp);

  // mean ilr per (stratum, exposure) cell, each on its own stream
  Eigen::MatrixXd mean0(strata, big_j), mean1(strata, big_j);
  run_tasks(strata * 2, threads, [&](Eigen::Index t) {
    const Eigen::Index h = t / 2;
    const int x = static_cast<int>(t % 2);
    auto confounders = config.stratum_confounders(h);
    auto gen = rng::make_stream(config.seed, kCalibrationStream, static_cast<std::uint64_t>(h),
                                static_cast<std::uint64_t>(x));
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(big_j);
    for (long r = 0; r < mc_reps; ++r) {
      auto counts = draw_individual_counts(config, x, confounders, gen);
      auto comp = coda::close_counts(counts, config.zero_replacement);
      acc += coda::ilr_forward(comp, basis).coords();
    }
    if (x == 0)
      mean0.row(h) = acc.transpose() / static_cast<double>(mc_reps);
    else
      mean1.row(h) = acc.transpose() / static_cast<double>(mc_reps);
  });

  BetaCalibration cal;
  cal.by_stratum = mean1 - mean0;
  cal.weighted = cal.by_stratum.colwise().mean().transpose();
  cal.mc_reps = mc_reps;
  return cal;
}

Eigen::VectorXd calibrate_gammas(const Eigen::VectorXd& cie_targets,
                                 const Eigen::VectorXd& beta1_weighted) {
  if (cie_targets.size() != beta1_weighted.size())
    throw Error(errc::dimension_mismatch, "cie targets and betas disagree on J");
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(cie_targets.size());
  for (Eigen::Index k = 0; k < cie_targets.size(); ++k) {
    if (cie_targets[k] == 0.0) continue;
    if (std::abs(beta1_weighted[k]) < 1e-8)
      throw Error(errc::divide_by_zero_beta,
                  "cie target " + std::to_string(k + 1) + " is nonzero but beta is ~0");
    gamma[k] = cie_targets[k] / beta1_weighted[k];
  }
  return gamma;
}

TruePathCoefficients calibrate_truth(const GenerativeConfig& config, long mc_reps, int threads) {
  auto betas = calibrate_true_betas(config, mc_reps, threads);
  TruePathCoefficients truth;
  truth.beta1_by_stratum = std::move(betas.by_stratum);
  truth.beta1_weighted = std::move(betas.weighted);
  truth.gamma1 = calibrate_gammas(config.cie_targets, truth.beta1_weighted);
  truth.mc_reps = betas.mc_reps;
  return truth;
}

coda::SbpMatrix taxonomy_sbp() {
  Eigen::MatrixXi psi(5, 4);
  psi << 1, 0, 0, 0,
      -1, 1, 1, 0,
      -1, 1, -1, 0,
      -1, -1, 0, 1,
      -1, -1, 0, -1;
  return coda::validate_sbp(psi, {"A", "B", "C", "D", "E"});
}

GenerativeConfig scenario_preset(const std::string& name) {
  GenerativeConfig cfg;
  cfg.mu = 10000.0;
  cfg.confounder_effects = {
      (Eigen::VectorXd(5) << 0.02, 0.01, -0.01, -0.01, -0.01).finished(),
      (Eigen::VectorXd(5) << -0.01, -0.01, 0.02, 0.00, 0.00).finished()};
  cfg.exposure_intercept = 0.25;
  cfg.exposure_slopes = (Eigen::VectorXd(2) << 0.05, 0.05).finished();
  cfg.response.gamma0 = 2.0;
  cfg.response.gamma2 = 0.40;
  cfg.response.gamma_confounder = (Eigen::VectorXd(2) << 0.05, -0.05).finished();
  cfg.response.sigma = 1.0;
  if (name == "scenario1") {
    cfg.base_props_x0 = (Eigen::VectorXd(5) << 0.60, 0.15, 0.10, 0.10, 0.05).finished();
    cfg.base_props_x1 = (Eigen::VectorXd(5) << 0.50, 0.20, 0.05, 0.10, 0.15).finished();
    cfg.cie_targets = (Eigen::VectorXd(4) << 0.04, 0.01, 0.03, 0.02).finished();
    cfg.sbp = taxonomy_sbp();
  } else if (name == "scenario2") {
    cfg.base_props_x0 = (Eigen::VectorXd(5) << 0.60, 0.15, 0.10, 0.08, 0.07).finished();
    cfg.base_props_x1 = (Eigen::VectorXd(5) << 0.58, 0.13, 0.13, 0.10, 0.06).finished();
    cfg.cie_targets = (Eigen::VectorXd(4) << 0.04, 0.01, 0.03, 0.02).finished();
    cfg.sbp = taxonomy_sbp();
  } else if (name == "scenario3") {
    cfg.base_props_x0 = (Eigen::VectorXd(5) << 0.60, 0.10, 0.10, 0.10, 0.10).finished();
    cfg.base_props_x1 = (Eigen::VectorXd(5) << 0.50, 0.125, 0.125, 0.125, 0.125).finished();
    cfg.cie_targets = (Eigen::VectorXd(4) << 0.10, 0.00, 0.00, 0.00).finished();
    cfg.sbp = coda::pivotal_sbp(5, {}, {"A", "B", "C", "D", "E"});
  } else {
    throw Error(errc::config_invalid, "unknown preset '" + name + "'");
  }
  return cfg;
}

med::CohortData simulate_cohort(const GenerativeConfig& config,
                                const TruePathCoefficients& truth) {
  config.validate();
  if (truth.gamma1.size() != config.balances())
    throw Error(errc::dimension_mismatch, "truth gamma does not match balances");
  auto basis = coda::basis_from_sbp(config.sbp);
  auto gen = rng::make_stream(config.seed, kCohortStream);

  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> noise(0.0, config.response.sigma);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  med::CohortData data;
  data.counts.resize(config.n, config.parts());
  data.exposure.resize(config.n);
  data.response.resize(config.n);
  data.stratum.resize(static_cast<std::size_t>(config.n));

  const Eigen::Index nc = config.n_confounders();
  std::vector<int> confounders(static_cast<std::size_t>(nc));
  for (int i = 0; i < config.n; ++i) {
    Eigen::Index h = 0;
    for (Eigen::Index c = 0; c < nc; ++c) {
      confounders[static_cast<std::size_t>(c)] = coin(gen) ? 1 : 0;
      h |= static_cast<Eigen::Index>(confounders[static_cast<std::size_t>(c)]) << c;
    }
    double px = config.exposure_intercept;
    for (Eigen::Index c = 0; c < nc; ++c)
      px += config.exposure_slopes[c] * confounders[static_cast<std::size_t>(c)];
    const int x = unif(gen) < px ? 1 : 0;

    auto counts = draw_individual_counts(config, x, confounders, gen);
    data.counts.row(i) = counts.transpose();
    data.exposure[i] = x;
    data.stratum[static_cast<std::size_t>(i)] = config.stratum_label(h);

    auto comp = coda::close_counts(counts, config.zero_replacement);
    Eigen::VectorXd m = coda::ilr_forward(comp, basis).coords();
    double y = config.response.gamma0 + truth.gamma1.dot(m) +
               config.response.gamma2 * static_cast<double>(x) + noise(gen);
    for (Eigen::Index c = 0; c < nc; ++c)
      y += config.response.gamma_confounder[c] * confounders[static_cast<std::size_t>(c)];
    data.response[i] = y;
  }
  return data;
}

}  // namespace codamed::simgen
