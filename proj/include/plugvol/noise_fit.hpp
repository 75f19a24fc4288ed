// Estimation of the noise parameter theta_0 and recovery of the efficient
// price X_hat(t_i) = Z(t_i) - phi(Q(t_i), theta_hat).
//
// All three fits work on increments only:
//   Delta_i Z = Delta_i X + mu_i(theta),  mu_i = phi(Q_i, theta) - phi(Q_{i-1}, theta)
// LR solves the linear case in closed form, MSE minimises
//   Q_N(theta) = 1/2 sum (Delta_i Z - mu_i(theta))^2
// and QMLE maximises the Gaussian quasi log-likelihood with sigma^2
// concentrated out.
#pragma once

#include "plugvol/core_model.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace plugvol {

enum class FitMethod { LR, MSE, QMLE };

std::string to_string(FitMethod m);
FitMethod fit_method_from_string(const std::string& s);

struct FittedNoise {
  ImpactFunction impact;
  Eigen::VectorXd theta_hat;
  FitMethod method = FitMethod::LR;
  double objective_at_opt = 0.0;  // Q_N (LR, MSE) or profiled l_exp (QMLE)
  double sigma2_hat = 0.0;        // QMLE only
  double condition_number = 0.0;  // LR only
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = true;
  std::vector<std::string> flags;
};

struct GaussNewtonOptions {
  int max_iterations = 200;
  double gradient_tolerance_per_obs = 1e-10;  // converged when |grad| <= tol * N
};

FittedNoise fit_lr(const ObservedSeries& s, const ImpactFunction& impact);

// Box-constrained Gauss-Newton with backtracking. `init` defaults to the LR
// fit of the model linearised at the box centre.
FittedNoise fit_mse(const ObservedSeries& s, const ImpactFunction& impact, const ParamBox& box,
                    std::optional<Eigen::VectorXd> init = std::nullopt,
                    const GaussNewtonOptions& opts = {});

FittedNoise fit_qmle(const ObservedSeries& s, const ImpactFunction& impact, const ParamBox& box,
                     std::optional<Eigen::VectorXd> init = std::nullopt,
                     const GaussNewtonOptions& opts = {});

// Dispatch on method; LR ignores the box.
FittedNoise fit_noise(const ObservedSeries& s, const ImpactFunction& impact, const ParamBox& box,
                      FitMethod method);

// Profiled quasi log-likelihood l_exp(sigma2_hat(theta), theta).
double profiled_loglik(const ObservedSeries& s, const ImpactFunction& impact,
                       const Eigen::VectorXd& theta);

std::vector<double> plugin_price(const ObservedSeries& s, const FittedNoise& fit);

nlohmann::json to_json(const FittedNoise& f);
FittedNoise fitted_noise_from_json(const nlohmann::json& j);

}  // namespace plugvol
