// Domain types shared by the simulator, the noise fits and the estimators.
//
// Time is measured in seconds on [0, T]. Prices are log-prices. Every type
// here is a plain value: construct it, validate it, then treat it as
// immutable (safe to share across worker threads).
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace plugvol {

inline constexpr double kDefaultHorizon = 23400.0;  // one trading day

// Observations in rows, covariates in columns; rows are contiguous so a
// single observation can be handed out as a span.
using CovariateMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

//---------------------------------------------------------------------------
// Errors
//---------------------------------------------------------------------------
// Input does not match the expected layout (column count, lengths, names).
class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Least-squares design without full column rank.
class SingularDesignError : public std::runtime_error {
 public:
  SingularDesignError(std::size_t column, const std::string& what)
      : std::runtime_error(what), column_(column) {}
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

//---------------------------------------------------------------------------
// SamplingGrid
//---------------------------------------------------------------------------
struct SamplingGrid {
  std::vector<double> times;  // t_0 = 0 < t_1 < ... <= horizon
  double horizon = kDefaultHorizon;
  bool regular = false;

  static SamplingGrid make_regular(std::size_t n, double horizon);

  std::size_t size() const noexcept { return times.size(); }
  // Number of increments N.
  std::size_t increments() const noexcept {
    return times.empty() ? 0 : times.size() - 1;
  }
  // Delta_i t for i in 1..N.
  double gap(std::size_t i) const { return times[i] - times[i - 1]; }
  // T / N, the nominal step of a regular grid.
  double mean_gap() const { return horizon / static_cast<double>(increments()); }
};

//---------------------------------------------------------------------------
// ObservedSeries
//---------------------------------------------------------------------------
struct ObservedSeries {
  SamplingGrid grid;
  std::vector<double> z;  // observed log-prices Z
  CovariateMatrix q;      // order-book covariates Q, one row per t_i
  std::vector<std::string> covariate_names;

  std::size_t size() const noexcept { return z.size(); }
  std::size_t covariate_dim() const noexcept {
    return static_cast<std::size_t>(q.cols());
  }
  std::span<const double> covariates(std::size_t i) const {
    return {q.row(static_cast<Eigen::Index>(i)).data(), covariate_dim()};
  }
  // Column name used in CSV headers and diagnostics (q1..qq by default).
  std::string covariate_name(std::size_t j) const;
};

// Empty iff the series satisfies every structural invariant. Each entry
// names the offending index and the violated rule.
std::vector<std::string> validate_series(const ObservedSeries& s);

//---------------------------------------------------------------------------
// Impact function phi(q, theta) and the noise specification
//---------------------------------------------------------------------------
// A parametric impact function with its first two theta-derivatives.
// Built-ins are resolvable by name so fits can be serialised.
class ImpactFunction {
 public:
  using Value = std::function<double(std::span<const double>, std::span<const double>)>;
  using Gradient =
      std::function<Eigen::VectorXd(std::span<const double>, std::span<const double>)>;
  using Hessian =
      std::function<Eigen::MatrixXd(std::span<const double>, std::span<const double>)>;

  ImpactFunction() = default;
  ImpactFunction(std::string name, std::size_t covariate_dim, std::size_t param_dim,
                 Value value, Gradient gradient, Hessian hessian, bool linear = false);

  // phi(q, theta) = theta^T q
  static ImpactFunction linear(std::size_t dim);
  // phi == 0, no parameters; used for noiseless data.
  static ImpactFunction none(std::size_t covariate_dim = 0);
  // phi(q, theta) = theta_1 * q_1 * q_2^theta_2: trade sign scaled by a
  // power of the half-spread. Requires q_2 > 0.
  static ImpactFunction spread_power();
  // Resolves "linear", "linear:<dim>", "none", "none:<dim>", "spread_power".
  static ImpactFunction from_name(const std::string& name, std::size_t covariate_dim);

  const std::string& name() const noexcept { return name_; }
  std::size_t covariate_dim() const noexcept { return covariate_dim_; }
  std::size_t param_dim() const noexcept { return param_dim_; }
  bool is_linear() const noexcept { return linear_; }
  bool is_zero() const noexcept { return param_dim_ == 0; }

  double value(std::span<const double> q, std::span<const double> theta) const {
    return value_(q, theta);
  }
  Eigen::VectorXd gradient(std::span<const double> q, std::span<const double> theta) const {
    return gradient_(q, theta);
  }
  Eigen::MatrixXd hessian(std::span<const double> q, std::span<const double> theta) const {
    return hessian_(q, theta);
  }

 private:
  std::string name_;
  std::size_t covariate_dim_ = 0;
  std::size_t param_dim_ = 0;
  Value value_;
  Gradient gradient_;
  Hessian hessian_;
  bool linear_ = false;
};

// Compact parameter domain Theta.
struct ParamBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static ParamBox symmetric(std::size_t dim, double half_width);
  std::size_t dim() const noexcept { return static_cast<std::size_t>(lower.size()); }
  bool contains(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd project(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd center() const { return 0.5 * (lower + upper); }
};

struct NoiseSpec {
  ImpactFunction impact = ImpactFunction::none();
  Eigen::VectorXd theta;  // true theta_0
  ParamBox domain;

  // Checks dimensions, theta_0 inside the domain and a finite impact at the
  // domain corners for the given covariate rows.
  void validate(const CovariateMatrix* sample_rows = nullptr) const;
};

//---------------------------------------------------------------------------
// LatentPath
//---------------------------------------------------------------------------
struct JumpEvent {
  double time = 0.0;      // exact event time
  double size = 0.0;
  std::size_t node = 0;   // fine-grid node where the jump takes effect
};

// Efficient price on a fine grid, split into continuous part and jumps.
struct LatentPath {
  std::vector<double> fine_times;
  std::vector<double> x_cont;     // X'
  std::vector<double> x;          // X = X' + J
  std::vector<JumpEvent> jumps;
  std::vector<double> sigma;      // spot volatility sigma_t
  std::vector<double> sigma_vol;  // spot vol-of-vol of c_t = sigma_t^2
  double horizon = kDefaultHorizon;

  std::size_t steps() const noexcept { return fine_times.empty() ? 0 : fine_times.size() - 1; }
  double dt() const { return horizon / static_cast<double>(steps()); }

  // Index of the last fine node <= t.
  std::size_t node_at(double t) const;
  double value_at(double t) const { return x[node_at(t)]; }

  // Cumulative jump part J at every fine node.
  std::vector<double> jump_part() const;
  // Empty iff X = X' + J holds bit-exactly at every node.
  std::vector<std::string> check_decomposition() const;
  // Indices of continuous increments larger than 10 sigma_max sqrt(dt).
  std::vector<std::size_t> flag_large_increments() const;

  // Left-point Riemann sums on the fine grid.
  double integrated_variance() const;     // int sigma^2
  double integrated_quarticity() const;   // int sigma^4
  double integrated_power(int p) const;   // int sigma^p
  double integrated_volvol() const;       // int sigma_vol^2
  double jump_variation() const;          // sum of squared jump sizes
};

//---------------------------------------------------------------------------
// EstimateReport
//---------------------------------------------------------------------------
// Point estimate with its bias and variance companions. The studentised
// statistic is
//     scale * (xi_hat - ab_hat / scale - reference) / sqrt(avar_hat)
// where scale = N^kappa (sqrt(n/k) for vol-of-vol).
struct EstimateReport {
  std::string estimator_name;
  double xi_hat = 0.0;
  double ab_hat = 0.0;
  double avar_hat = 0.0;
  double rate_exponent = 0.5;
  double scale = 1.0;
  std::size_t observations = 0;
  std::optional<double> student_stat;
  std::optional<std::pair<double, double>> ci95;
  std::vector<std::string> flags;

  double bias_corrected() const { return xi_hat - ab_hat / scale; }
  bool has_avar() const { return avar_hat > 0.0 && ci95.has_value(); }

  // Fills ci95 from avar_hat (removes it when avar_hat is not positive).
  void finalize();
  // Attaches the studentised statistic against a known truth. Absent when
  // the variance estimate is unusable.
  void studentize(double reference);
};

bool has_flag(const std::vector<std::string>& flags, const std::string& prefix);

}  // namespace plugvol
