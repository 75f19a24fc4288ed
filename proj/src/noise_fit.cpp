#include "plugvol/noise_fit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace plugvol {

std::string to_string(FitMethod m) {
  switch (m) {
    case FitMethod::LR:
      return "LR";
    case FitMethod::MSE:
      return "MSE";
    case FitMethod::QMLE:
      return "QMLE";
  }
  return "";
}

FitMethod fit_method_from_string(const std::string& s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
  if (u == "LR") return FitMethod::LR;
  if (u == "MSE") return FitMethod::MSE;
  if (u == "QMLE" || u == "MLE") return FitMethod::QMLE;
  throw std::invalid_argument("unknown fit method '" + s + "' (valid: LR, MSE, QMLE)");
}

namespace {

void check_inputs(const ObservedSeries& s, const ImpactFunction& impact) {
  if (s.covariate_dim() < impact.covariate_dim())
    throw SchemaError("missing covariate column q" + std::to_string(s.covariate_dim() + 1) +
                      " required by impact " + impact.name());
  if (s.size() < 2) throw std::invalid_argument("noise fit needs at least two observations");
  const std::size_t n_inc = s.size() - 1;
  if (n_inc < impact.param_dim() + 2)
    throw std::invalid_argument("degenerate data: N = " + std::to_string(n_inc) +
                                " increments for " + std::to_string(impact.param_dim()) +
                                " parameters (need N >= l + 2)");
}

Eigen::VectorXd price_increments(const ObservedSeries& s) {
  const auto n = static_cast<Eigen::Index>(s.size() - 1);
  Eigen::VectorXd dz(n);
  for (Eigen::Index i = 0; i < n; ++i) dz[i] = s.z[static_cast<std::size_t>(i) + 1] - s.z[static_cast<std::size_t>(i)];
  return dz;
}

// mu_i(theta) and its Jacobian d mu_i / d theta.
struct Increments {
  Eigen::VectorXd mu;
  Eigen::MatrixXd jac;
};

Increments impact_increments(const ObservedSeries& s, const ImpactFunction& impact,
                             const Eigen::VectorXd& theta, bool with_jacobian) {
  const std::size_t l = impact.param_dim();
  const auto n = static_cast<Eigen::Index>(s.size() - 1);
  std::span<const double> th(theta.data(), l);
  Increments out;
  out.mu.resize(n);
  if (with_jacobian) out.jac.resize(n, static_cast<Eigen::Index>(l));
  double prev = impact.value(s.covariates(0), th);
  Eigen::VectorXd gprev;
  if (with_jacobian) gprev = impact.gradient(s.covariates(0), th);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = static_cast<std::size_t>(i) + 1;
    const double cur = impact.value(s.covariates(row), th);
    out.mu[i] = cur - prev;
    prev = cur;
    if (with_jacobian) {
      Eigen::VectorXd g = impact.gradient(s.covariates(row), th);
      out.jac.row(i) = (g - gprev).transpose();
      gprev = std::move(g);
    }
  }
  return out;
}

double half_sum_squares(const Eigen::VectorXd& r) { return 0.5 * r.squaredNorm(); }

double profiled_from_rss(double rss, std::size_t n) {
  const double nn = static_cast<double>(n);
  return -0.5 * nn * std::log(rss / nn) - 0.5 * nn * std::log(2.0 * std::numbers::pi) - 0.5 * nn;
}

Eigen::VectorXd linearised_init(const ObservedSeries& s, const ImpactFunction& impact,
                                const ParamBox& box, const Eigen::VectorXd& dz) {
  const Eigen::VectorXd centre = box.center();
  const auto inc = impact_increments(s, impact, centre, true);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(inc.jac);
  const Eigen::VectorXd delta = cod.solve(dz - inc.mu);
  Eigen::VectorXd init = centre + delta;
  if (!init.allFinite()) init = centre;
  return box.project(init);
}

// Projected Gauss-Newton. The merit is Q_N for MSE and -l_exp for QMLE;
// both are increasing functions of the residual sum of squares, so the
// Gauss-Newton direction of the least-squares problem serves both.
FittedNoise gauss_newton(const ObservedSeries& s, const ImpactFunction& impact,
                         const ParamBox& box, std::optional<Eigen::VectorXd> init,
                         const GaussNewtonOptions& opts, FitMethod method) {
  check_inputs(s, impact);
  const std::size_t l = impact.param_dim();
  if (box.dim() != l) throw std::invalid_argument("parameter box dimension mismatch");
  const Eigen::VectorXd dz = price_increments(s);
  const std::size_t n = s.size() - 1;

  FittedNoise fit;
  fit.impact = impact;
  fit.method = method;
  if (l == 0) {
    fit.theta_hat = Eigen::VectorXd(0);
    const double rss = dz.squaredNorm();
    fit.objective_at_opt = method == FitMethod::QMLE ? profiled_from_rss(rss, n) : 0.5 * rss;
    fit.sigma2_hat = rss / s.grid.horizon;
    return fit;
  }

  auto merit = [&](double rss) {
    return method == FitMethod::QMLE ? -profiled_from_rss(rss, n) : 0.5 * rss;
  };

  Eigen::VectorXd theta = init ? box.project(*init) : linearised_init(s, impact, box, dz);
  auto inc = impact_increments(s, impact, theta, true);
  Eigen::VectorXd r = dz - inc.mu;
  double rss = r.squaredNorm();
  const double tol = opts.gradient_tolerance_per_obs * static_cast<double>(n);
  bool converged = false;
  int it = 0;
  double gnorm = 0.0;
  for (; it < opts.max_iterations; ++it) {
    // Gradient of Q_N: -J^T r with J = d mu / d theta.
    Eigen::VectorXd grad = -inc.jac.transpose() * r;
    // Active set: coordinates pinned at a bound with the descent direction
    // pointing outside the box.
    std::vector<Eigen::Index> free;
    Eigen::VectorXd pgrad = grad;
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(l); ++j) {
      const bool at_lo = theta[j] <= box.lower[j] && grad[j] > 0.0;
      const bool at_hi = theta[j] >= box.upper[j] && grad[j] < 0.0;
      if (at_lo || at_hi) pgrad[j] = 0.0;
      else free.push_back(j);
    }
    gnorm = pgrad.norm();
    if (gnorm <= tol) {
      converged = true;
      break;
    }
    if (free.empty()) {
      converged = true;
      break;
    }
    Eigen::MatrixXd jf(inc.jac.rows(), static_cast<Eigen::Index>(free.size()));
    for (std::size_t c = 0; c < free.size(); ++c) jf.col(static_cast<Eigen::Index>(c)) = inc.jac.col(free[c]);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jf);
    const Eigen::VectorXd step_free = cod.solve(r);
    Eigen::VectorXd step = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(l));
    for (std::size_t c = 0; c < free.size(); ++c) step[free[c]] = step_free[static_cast<Eigen::Index>(c)];
    if (!step.allFinite()) break;

    const double m0 = merit(rss);
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd cand;
    Increments cand_inc;
    Eigen::VectorXd cand_r;
    double cand_rss = 0.0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      cand = box.project(theta + t * step);
      cand_inc = impact_increments(s, impact, cand, true);
      cand_r = dz - cand_inc.mu;
      cand_rss = cand_r.squaredNorm();
      if (std::isfinite(cand_rss) && merit(cand_rss) <= m0) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      fit.flags.push_back("line_search_stalled");
      break;
    }
    const double move = (cand - theta).norm();
    theta = cand;
    inc = std::move(cand_inc);
    r = std::move(cand_r);
    rss = cand_rss;
    if (move <= 1e-15 * (1.0 + theta.norm())) {
      // No representable progress left.
      Eigen::VectorXd g2 = -inc.jac.transpose() * r;
      gnorm = g2.norm();
      converged = true;
      fit.flags.push_back("step_tolerance");
      ++it;
      break;
    }
  }
  fit.theta_hat = theta;
  fit.iterations = it;
  fit.converged = converged;
  fit.gradient_norm = gnorm;
  fit.sigma2_hat = rss / s.grid.horizon;
  fit.objective_at_opt = method == FitMethod::QMLE ? profiled_from_rss(rss, n) : 0.5 * rss;
  if (!converged) fit.flags.push_back("not_converged");
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(l); ++j) {
    if (theta[j] <= box.lower[j] || theta[j] >= box.upper[j]) {
      fit.flags.push_back("at_bound:" + std::to_string(j));
    }
  }
  return fit;
}

}  // namespace

FittedNoise fit_lr(const ObservedSeries& s, const ImpactFunction& impact) {
  if (!impact.is_linear()) throw std::invalid_argument("fit_lr needs a linear impact function");
  check_inputs(s, impact);
  const std::size_t l = impact.param_dim();
  const Eigen::VectorXd dz = price_increments(s);
  FittedNoise fit;
  fit.impact = impact;
  fit.method = FitMethod::LR;
  if (l == 0) {
    fit.theta_hat = Eigen::VectorXd(0);
    fit.objective_at_opt = half_sum_squares(dz);
    return fit;
  }
  const auto n = dz.size();
  Eigen::MatrixXd m(n, static_cast<Eigen::Index>(l));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(l); ++j)
      m(i, j) = s.q(i + 1, j) - s.q(i, j);

  // Locate the first column that adds no rank.
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(l); ++j) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m.leftCols(j + 1));
    if (qr.rank() < j + 1) {
      const auto col = static_cast<std::size_t>(j);
      throw SingularDesignError(col, "singular design: covariate column " + s.covariate_name(col) +
                                         " has no independent variation");
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  fit.theta_hat = qr.solve(dz);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto sv = svd.singularValues();
  fit.condition_number = sv[0] / sv[sv.size() - 1];
  const Eigen::VectorXd resid = dz - m * fit.theta_hat;
  fit.objective_at_opt = half_sum_squares(resid);
  fit.sigma2_hat = resid.squaredNorm() / s.grid.horizon;
  const Eigen::VectorXd mtz = m.transpose() * dz;
  const double normal_resid = (m.transpose() * (m * fit.theta_hat) - mtz).norm();
  fit.gradient_norm = normal_resid;
  if (normal_resid > 1e-8 * mtz.norm()) fit.flags.push_back("normal_equations_residual");
  fit.iterations = 1;
  return fit;
}

FittedNoise fit_mse(const ObservedSeries& s, const ImpactFunction& impact, const ParamBox& box,
                    std::optional<Eigen::VectorXd> init, const GaussNewtonOptions& opts) {
  return gauss_newton(s, impact, box, std::move(init), opts, FitMethod::MSE);
}

FittedNoise fit_qmle(const ObservedSeries& s, const ImpactFunction& impact, const ParamBox& box,
                     std::optional<Eigen::VectorXd> init, const GaussNewtonOptions& opts) {
  return gauss_newton(s, impact, box, std::move(init), opts, FitMethod::QMLE);
}

FittedNoise fit_noise(const ObservedSeries& s, const ImpactFunction& impact, const ParamBox& box,
                      FitMethod method) {
  switch (method) {
    case FitMethod::LR:
      return fit_lr(s, impact);
    case FitMethod::MSE:
      return fit_mse(s, impact, box);
    case FitMethod::QMLE:
      return fit_qmle(s, impact, box);
  }
  throw std::invalid_argument("unknown fit method");
}

double profiled_loglik(const ObservedSeries& s, const ImpactFunction& impact,
                       const Eigen::VectorXd& theta) {
  check_inputs(s, impact);
  const Eigen::VectorXd dz = price_increments(s);
  const auto inc = impact_increments(s, impact, theta, false);
  return profiled_from_rss((dz - inc.mu).squaredNorm(), s.size() - 1);
}

std::vector<double> plugin_price(const ObservedSeries& s, const FittedNoise& fit) {
  const std::size_t l = fit.impact.param_dim();
  if (static_cast<std::size_t>(fit.theta_hat.size()) != l)
    throw SchemaError("fitted theta dimension does not match impact " + fit.impact.name());
  if (s.covariate_dim() < fit.impact.covariate_dim())
    throw SchemaError("missing covariate column q" + std::to_string(s.covariate_dim() + 1) +
                      " required by impact " + fit.impact.name());
  std::vector<double> x(s.size());
  std::span<const double> th(fit.theta_hat.data(), l);
  for (std::size_t i = 0; i < s.size(); ++i)
    x[i] = l == 0 ? s.z[i] : s.z[i] - fit.impact.value(s.covariates(i), th);
  return x;
}

nlohmann::json to_json(const FittedNoise& f) {
  nlohmann::json j;
  j["impact"] = f.impact.name();
  j["covariate_dim"] = f.impact.covariate_dim();
  j["theta_hat"] = std::vector<double>(f.theta_hat.data(), f.theta_hat.data() + f.theta_hat.size());
  j["method"] = to_string(f.method);
  j["objective_at_opt"] = f.objective_at_opt;
  j["sigma2_hat"] = f.sigma2_hat;
  j["condition_number"] = f.condition_number;
  j["gradient_norm"] = f.gradient_norm;
  j["iterations"] = f.iterations;
  j["converged"] = f.converged;
  j["flags"] = f.flags;
  return j;
}

FittedNoise fitted_noise_from_json(const nlohmann::json& j) {
  FittedNoise f;
  f.impact = ImpactFunction::from_name(j.at("impact").get<std::string>(),
                                       j.value("covariate_dim", std::size_t{0}));
  const auto th = j.at("theta_hat").get<std::vector<double>>();
  f.theta_hat = Eigen::Map<const Eigen::VectorXd>(th.data(), static_cast<Eigen::Index>(th.size()));
  if (static_cast<std::size_t>(f.theta_hat.size()) != f.impact.param_dim())
    throw SchemaError("theta_hat dimension does not match impact " + f.impact.name());
  f.method = fit_method_from_string(j.at("method").get<std::string>());
  f.objective_at_opt = j.value("objective_at_opt", 0.0);
  f.sigma2_hat = j.value("sigma2_hat", 0.0);
  f.condition_number = j.value("condition_number", 0.0);
  f.gradient_norm = j.value("gradient_norm", 0.0);
  f.iterations = j.value("iterations", 0);
  f.converged = j.value("converged", true);
  f.flags = j.value("flags", std::vector<std::string>{});
  return f;
}

}  // namespace plugvol
