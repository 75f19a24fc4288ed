#include "plugvol/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace plugvol {

SamplingGrid SamplingGrid::make_regular(std::size_t n, double horizon) {
  if (n == 0) throw std::invalid_argument("regular grid needs n >= 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  SamplingGrid g;
  g.horizon = horizon;
  g.regular = true;
  g.times.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i)
    g.times[i] = horizon * static_cast<double>(i) / static_cast<double>(n);
  return g;
}

std::string ObservedSeries::covariate_name(std::size_t j) const {
  if (j < covariate_names.size() && !covariate_names[j].empty()) return covariate_names[j];
  return "q" + std::to_string(j + 1);
}

std::vector<std::string> validate_series(const ObservedSeries& s) {
  std::vector<std::string> out;
  const auto& t = s.grid.times;
  if (!(s.grid.horizon > 0.0)) out.push_back("horizon not positive");
  if (t.empty()) {
    out.push_back("empty grid");
  } else {
    if (t.front() != 0.0) out.push_back("first time not 0");
    for (std::size_t i = 1; i < t.size(); ++i) {
      if (!(t[i] > t[i - 1])) out.push_back("times not increasing at " + std::to_string(i));
    }
    if (t.back() > s.grid.horizon) out.push_back("last time exceeds horizon");
    if (s.grid.regular && t.size() > 1) {
      const double step = s.grid.horizon / static_cast<double>(t.size() - 1);
      for (std::size_t i = 1; i < t.size(); ++i) {
        if (std::abs(t[i] - t[i - 1] - step) > 1e-9 * step) {
          out.push_back("irregular gap at " + std::to_string(i));
          break;
        }
      }
    }
  }
  if (s.z.size() != t.size()) out.push_back("z length differs from grid");
  if (static_cast<std::size_t>(s.q.rows()) != t.size() && s.q.cols() > 0)
    out.push_back("covariate rows differ from grid");
  for (std::size_t i = 0; i < s.z.size(); ++i) {
    if (!std::isfinite(s.z[i])) {
      out.push_back("non-finite price at " + std::to_string(i));
      break;
    }
  }
  for (Eigen::Index i = 0; i < s.q.rows(); ++i) {
    bool bad = false;
    for (Eigen::Index j = 0; j < s.q.cols(); ++j) {
      if (!std::isfinite(s.q(i, j))) {
        out.push_back("non-finite covariate at " + std::to_string(i) + " (" +
                      s.covariate_name(static_cast<std::size_t>(j)) + ")");
        bad = true;
        break;
      }
    }
    if (bad) break;
  }
  return out;
}

//---------------------------------------------------------------------------

ImpactFunction::ImpactFunction(std::string name, std::size_t covariate_dim,
                               std::size_t param_dim, Value value, Gradient gradient,
                               Hessian hessian, bool linear)
    : name_(std::move(name)),
      covariate_dim_(covariate_dim),
      param_dim_(param_dim),
      value_(std::move(value)),
      gradient_(std::move(gradient)),
      hessian_(std::move(hessian)),
      linear_(linear) {}

ImpactFunction ImpactFunction::linear(std::size_t dim) {
  auto value = [dim](std::span<const double> q, std::span<const double> th) {
    double v = 0.0;
    for (std::size_t j = 0; j < dim; ++j) v += th[j] * q[j];
    return v;
  };
  auto grad = [dim](std::span<const double> q, std::span<const double>) {
    Eigen::VectorXd g(static_cast<Eigen::Index>(dim));
    for (std::size_t j = 0; j < dim; ++j) g[static_cast<Eigen::Index>(j)] = q[j];
    return g;
  };
  auto hess = [dim](std::span<const double>, std::span<const double>) {
    const auto d = static_cast<Eigen::Index>(dim);
    return Eigen::MatrixXd::Zero(d, d).eval();
  };
  return {"linear:" + std::to_string(dim), dim, dim, value, grad, hess, true};
}

ImpactFunction ImpactFunction::none(std::size_t covariate_dim) {
  auto value = [](std::span<const double>, std::span<const double>) { return 0.0; };
  auto grad = [](std::span<const double>, std::span<const double>) {
    return Eigen::VectorXd(0);
  };
  auto hess = [](std::span<const double>, std::span<const double>) {
    return Eigen::MatrixXd(0, 0);
  };
  return {"none:" + std::to_string(covariate_dim), covariate_dim, 0, value, grad, hess, true};
}

ImpactFunction ImpactFunction::spread_power() {
  auto value = [](std::span<const double> q, std::span<const double> th) {
    return th[0] * q[0] * std::pow(q[1], th[1]);
  };
  auto grad = [](std::span<const double> q, std::span<const double> th) {
    const double p = std::pow(q[1], th[1]);
    Eigen::VectorXd g(2);
    g << q[0] * p, th[0] * q[0] * p * std::log(q[1]);
    return g;
  };
  auto hess = [](std::span<const double> q, std::span<const double> th) {
    const double p = std::pow(q[1], th[1]);
    const double l = std::log(q[1]);
    Eigen::MatrixXd h(2, 2);
    h << 0.0, q[0] * p * l, q[0] * p * l, th[0] * q[0] * p * l * l;
    return h;
  };
  return {"spread_power", 2, 2, value, grad, hess, false};
}

ImpactFunction ImpactFunction::from_name(const std::string& name, std::size_t covariate_dim) {
  auto split = name.find(':');
  const std::string base = name.substr(0, split);
  std::size_t dim = covariate_dim;
  if (split != std::string::npos) dim = std::stoul(name.substr(split + 1));
  if (base == "linear") {
    if (dim == 0) throw SchemaError("linear impact needs at least one covariate");
    return linear(dim);
  }
  if (base == "none") return none(dim);
  if (base == "spread_power") return spread_power();
  throw std::invalid_argument("unknown impact function '" + name +
                              "' (valid: linear, none, spread_power)");
}

ParamBox ParamBox::symmetric(std::size_t dim, double half_width) {
  const auto d = static_cast<Eigen::Index>(dim);
  return {Eigen::VectorXd::Constant(d, -half_width), Eigen::VectorXd::Constant(d, half_width)};
}

bool ParamBox::contains(const Eigen::VectorXd& theta) const {
  if (theta.size() != lower.size()) return false;
  return ((theta.array() >= lower.array()) && (theta.array() <= upper.array())).all();
}

Eigen::VectorXd ParamBox::project(const Eigen::VectorXd& theta) const {
  return theta.cwiseMax(lower).cwiseMin(upper);
}

void NoiseSpec::validate(const CovariateMatrix* sample_rows) const {
  const auto l = impact.param_dim();
  if (static_cast<std::size_t>(theta.size()) != l)
    throw std::invalid_argument("theta dimension does not match impact function");
  if (domain.dim() != l) throw std::invalid_argument("theta domain dimension mismatch");
  if (l > 0 && ((domain.upper - domain.lower).array() < 0.0).any())
    throw std::invalid_argument("theta domain has lower > upper");
  if (l > 0 && !domain.contains(theta)) throw std::invalid_argument("theta_0 outside domain");
  if (sample_rows == nullptr || l == 0) return;
  // Corners of the box.
  const std::size_t corners = std::size_t{1} << std::min<std::size_t>(l, 10);
  for (Eigen::Index r = 0; r < sample_rows->rows(); ++r) {
    std::span<const double> q(sample_rows->row(r).data(),
                              static_cast<std::size_t>(sample_rows->cols()));
    for (std::size_t c = 0; c < corners; ++c) {
      Eigen::VectorXd th(static_cast<Eigen::Index>(l));
      for (std::size_t j = 0; j < l; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        th[jj] = ((c >> j) & 1U) ? domain.upper[jj] : domain.lower[jj];
      }
      if (!std::isfinite(impact.value(q, {th.data(), l})))
        throw std::invalid_argument("impact not finite on the theta domain at row " +
                                    std::to_string(r));
    }
  }
}

//---------------------------------------------------------------------------

std::size_t LatentPath::node_at(double t) const {
  auto it = std::upper_bound(fine_times.begin(), fine_times.end(), t);
  if (it == fine_times.begin()) return 0;
  return static_cast<std::size_t>(std::distance(fine_times.begin(), it) - 1);
}

std::vector<double> LatentPath::jump_part() const {
  std::vector<double> delta(fine_times.size(), 0.0);
  for (const auto& j : jumps) delta[j.node] += j.size;
  std::vector<double> cum(fine_times.size(), 0.0);
  double acc = 0.0;
  for (std::size_t k = 0; k < delta.size(); ++k) {
    acc += delta[k];
    cum[k] = acc;
  }
  return cum;
}

std::vector<std::string> LatentPath::check_decomposition() const {
  std::vector<std::string> out;
  const auto j = jump_part();
  if (x.size() != x_cont.size() || x.size() != fine_times.size()) {
    out.push_back("path component lengths differ");
    return out;
  }
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] != x_cont[k] + j[k]) {
      out.push_back("decomposition fails at node " + std::to_string(k));
      break;
    }
  }
  return out;
}

std::vector<std::size_t> LatentPath::flag_large_increments() const {
  std::vector<std::size_t> out;
  if (sigma.empty() || steps() == 0) return out;
  const double smax = *std::max_element(sigma.begin(), sigma.end());
  const double bound = 10.0 * smax * std::sqrt(dt());
  // A zero-volatility path may still carry drift; skip the check then.
  if (bound == 0.0) return out;
  for (std::size_t k = 1; k < x_cont.size(); ++k) {
    const double dx = x_cont[k] - x_cont[k - 1];
    if (std::abs(dx) > bound) out.push_back(k);
  }
  return out;
}

double LatentPath::integrated_power(int p) const {
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < fine_times.size(); ++k)
    acc += std::pow(sigma[k], p) * (fine_times[k + 1] - fine_times[k]);
  return acc;
}

double LatentPath::integrated_variance() const { return integrated_power(2); }
double LatentPath::integrated_quarticity() const { return integrated_power(4); }

double LatentPath::integrated_volvol() const {
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < fine_times.size(); ++k)
    acc += sigma_vol[k] * sigma_vol[k] * (fine_times[k + 1] - fine_times[k]);
  return acc;
}

double LatentPath::jump_variation() const {
  double acc = 0.0;
  for (const auto& j : jumps) acc += j.size * j.size;
  return acc;
}

//---------------------------------------------------------------------------

void EstimateReport::finalize() {
  if (avar_hat > 0.0 && std::isfinite(avar_hat) && scale > 0.0) {
    const double centre = bias_corrected();
    const double half = 1.959963984540054 * std::sqrt(avar_hat) / scale;
    ci95 = std::make_pair(centre - half, centre + half);
  } else {
    ci95.reset();
  }
}

void EstimateReport::studentize(double reference) {
  if (!(avar_hat > 0.0) || has_flag(flags, "avar_clamped")) {
    student_stat.reset();
    return;
  }
  student_stat = scale * (bias_corrected() - reference) / std::sqrt(avar_hat);
}

bool has_flag(const std::vector<std::string>& flags, const std::string& prefix) {
  return std::any_of(flags.begin(), flags.end(),
                     [&](const std::string& f) { return f.rfind(prefix, 0) == 0; });
}

}  // namespace plugvol
