// Local-window estimators on regular grids: spot covariance, bias-corrected
// Riemann sums of smooth functionals g(c_t) with their asymptotic variance,
// and the volatility-of-volatility estimator with its studentisation.
#pragma once

#include "plugvol/core_model.hpp"
#include "plugvol/variation.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace plugvol {

// Price paths for d assets: one row per observation, one column per asset.
using PricePaths = Eigen::MatrixXd;

// Smooth g on nonnegative-definite d x d matrices. Entries x^{jq} are treated
// as independent variables; the Hessian is stored as a d^2 x d^2 matrix with
// row index j*d+q and column index l*d+m.
class Functional {
 public:
  using Value = std::function<double(const Eigen::MatrixXd&)>;
  using Gradient = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;
  using Hessian = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

  Functional() = default;
  Functional(std::string name, std::size_t dim, Value v, Gradient g, Hessian h);

  static Functional identity();    // d = 1, g(x) = x
  static Functional quarticity();  // d = 1, g(x) = x^2
  // g(x) = x^{ab} x^{ce}
  static Functional entry_product(std::size_t dim, std::size_t a, std::size_t b, std::size_t c,
                                  std::size_t e);
  static Functional from_name(const std::string& name);

  const std::string& name() const noexcept { return name_; }
  std::size_t dim() const noexcept { return dim_; }
  double value(const Eigen::MatrixXd& x) const { return value_(x); }
  Eigen::MatrixXd gradient(const Eigen::MatrixXd& x) const { return gradient_(x); }
  Eigen::MatrixXd hessian(const Eigen::MatrixXd& x) const { return hessian_(x); }

  // Largest relative mismatch between the derivative callables and central
  // finite differences at five seeded random nonnegative-definite matrices.
  double derivative_mismatch() const;

 private:
  std::string name_;
  std::size_t dim_ = 1;
  Value value_;
  Gradient gradient_;
  Hessian hessian_;
};

struct FunctionalSpec {
  Functional g = Functional::quarticity();
  std::size_t k = 0;  // window length
  TruncationRule rule;
  int growth_p = 3;
  double activity_index = 0.0;

  // k = floor(n^0.42), omega_bar = 0.47, alpha = 4 sqrt(sum BV / T).
  static FunctionalSpec with_defaults(const Functional& g, const PricePaths& x,
                                      const SamplingGrid& grid);
  // Throws on an inadmissible omega_bar or inconsistent derivatives; returns
  // warnings (k outside [n^0.36, n^0.48]).
  std::vector<std::string> check(std::size_t n_increments) const;
};

PricePaths as_paths(std::span<const double> x);

// c_hat_i = (1 / (k Delta)) sum_{j=0}^{k-1} dX_{i+j} dX_{i+j}^T 1{|dX_{i+j}| <= w},
// i in 1..n-k+1.
Eigen::MatrixXd spot_cov(const PricePaths& x, const SamplingGrid& grid, std::size_t i,
                         const FunctionalSpec& spec);

// Delta sum_i { g(c_i) - (1/2k) sum d2g(c_i)(c^{jl}c^{qm} + c^{jm}c^{ql}) }.
double functional_estimate(const PricePaths& x, const SamplingGrid& grid,
                           const FunctionalSpec& spec);

// T Delta sum_i hbar(c_i), hbar(x) = sum dg dg (x^{jl}x^{qm} + x^{jm}x^{ql}).
double functional_avar(const PricePaths& x, const SamplingGrid& grid, const FunctionalSpec& spec);

double hbar(const Functional& g, const Eigen::MatrixXd& c);
double bias_correction(const Functional& g, const Eigen::MatrixXd& c, std::size_t k);

struct FunctionalResult {
  double estimate = 0.0;
  double avar = 0.0;
  std::vector<std::string> flags;
};

// Both quantities from one pass over the spot covariances.
FunctionalResult evaluate_functional(const PricePaths& x, const SamplingGrid& grid,
                                     const FunctionalSpec& spec);

struct VolOfVolPlan {
  double c = 1.0;
  std::size_t k = 0;  // floor(c sqrt(n)), 2k < n
  bool allow_jumps = false;

  static VolOfVolPlan make(std::size_t n_increments, double c = 1.0);
};

// sum_{i=0}^{n-2k} { (3/2k)(c_{i+k} - c_i)^2 - (6/k^2) q_i } with untruncated
// spot variance and quarticity windows. Formulas are evaluated on the
// unit-normalised clock and mapped back to calendar time.
double vol_of_vol(std::span<const double> x, const SamplingGrid& grid, const VolOfVolPlan& plan);

struct VolOfVolAvar {
  double avar = 0.0;
  double g1 = 0.0, g2 = 0.0, g3 = 0.0;  // on the unit-normalised clock
  bool clamped = false;
  std::vector<std::string> flags;
};

VolOfVolAvar vol_of_vol_avar(std::span<const double> x, const SamplingGrid& grid,
                             const VolOfVolPlan& plan);

// Population variance of sqrt(n/k)(estimate - truth) at constant sigma and
// vol-of-vol: 48 s^8/c^4 + 12 T s^4 sv^2/c^2 + (151/70) T^2 sv^4.
double vol_of_vol_avar_oracle(double sigma, double sigma_vol, double c, double horizon);

}  // namespace plugvol
