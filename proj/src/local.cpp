#include "plugvol/local.hpp"

#include "plugvol/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace plugvol {

Functional::Functional(std::string name, std::size_t dim, Value v, Gradient g, Hessian h)
    : name_(std::move(name)), dim_(dim), value_(std::move(v)), gradient_(std::move(g)),
      hessian_(std::move(h)) {}

Functional Functional::identity() {
  return {"identity", 1, [](const Eigen::MatrixXd& x) { return x(0, 0); },
          [](const Eigen::MatrixXd&) { return Eigen::MatrixXd::Ones(1, 1).eval(); },
          [](const Eigen::MatrixXd&) { return Eigen::MatrixXd::Zero(1, 1).eval(); }};
}

Functional Functional::quarticity() {
  return {"quarticity", 1, [](const Eigen::MatrixXd& x) { return x(0, 0) * x(0, 0); },
          [](const Eigen::MatrixXd& x) { return (2.0 * x).eval(); },
          [](const Eigen::MatrixXd&) { return Eigen::MatrixXd::Constant(1, 1, 2.0).eval(); }};
}

Functional Functional::entry_product(std::size_t dim, std::size_t a, std::size_t b, std::size_t c,
                                     std::size_t e) {
  if (a >= dim || b >= dim || c >= dim || e >= dim)
    throw std::invalid_argument("entry_product index out of range");
  const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
  const auto ic = static_cast<Eigen::Index>(c), ie = static_cast<Eigen::Index>(e);
  const auto d = static_cast<Eigen::Index>(dim);
  const Eigen::Index p = ia * d + ib;
  const Eigen::Index r = ic * d + ie;
  std::string name = "entry_product:" + std::to_string(a) + std::to_string(b) + std::to_string(c) +
                     std::to_string(e);
  return {name, dim, [=](const Eigen::MatrixXd& x) { return x(ia, ib) * x(ic, ie); },
          [=](const Eigen::MatrixXd& x) {
            Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
            g(ia, ib) += x(ic, ie);
            g(ic, ie) += x(ia, ib);
            return g;
          },
          [=](const Eigen::MatrixXd&) {
            Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d * d, d * d);
            h(p, r) += 1.0;
            h(r, p) += 1.0;
            return h;
          }};
}

Functional Functional::from_name(const std::string& name) {
  if (name == "identity") return identity();
  if (name == "quarticity") return quarticity();
  if (name.rfind("entry_product:", 0) == 0 && name.size() == 18) {
    auto at = [&](std::size_t i) { return static_cast<std::size_t>(name[14 + i] - '0'); };
    const std::size_t dim = std::max({at(0), at(1), at(2), at(3)}) + 1;
    return entry_product(std::max<std::size_t>(dim, 2), at(0), at(1), at(2), at(3));
  }
  throw std::invalid_argument("unknown functional '" + name +
                              "' (valid: identity, quarticity, entry_product:abce)");
}

double Functional::derivative_mismatch() const {
  const auto d = static_cast<Eigen::Index>(dim_);
  Engine rng(0x5eedULL);
  std::normal_distribution<double> nd(0.0, 1.0);
  double worst = 0.0;
  auto rel = [](double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-6});
    return std::abs(a - b) / scale;
  };
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd b(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) b(i, j) = nd(rng);
    const Eigen::MatrixXd x = b * b.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd g = gradient(x);
    const Eigen::MatrixXd h = hessian(x);
    for (Eigen::Index p = 0; p < d * d; ++p) {
      const Eigen::Index j = p / d, q = p % d;
      const double step = 1e-5 * std::max(1.0, std::abs(x(j, q)));
      Eigen::MatrixXd xp = x, xm = x;
      xp(j, q) += step;
      xm(j, q) -= step;
      worst = std::max(worst, rel(g(j, q), (value(xp) - value(xm)) / (2.0 * step)));
      const Eigen::MatrixXd gp = gradient(xp), gm = gradient(xm);
      for (Eigen::Index r = 0; r < d * d; ++r) {
        const Eigen::Index l = r / d, m = r % d;
        worst = std::max(worst, rel(h(p, r), (gp(l, m) - gm(l, m)) / (2.0 * step)));
      }
    }
  }
  return worst;
}

//---------------------------------------------------------------------------

FunctionalSpec FunctionalSpec::with_defaults(const Functional& g, const PricePaths& x,
                                             const SamplingGrid& grid) {
  FunctionalSpec s;
  s.g = g;
  const std::size_t n = grid.increments();
  s.k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n), 0.42))));
  double bv = 0.0;
  for (Eigen::Index a = 0; a < x.cols(); ++a) {
    std::vector<double> col(x.col(a).data(), x.col(a).data() + x.rows());
    bv += bipower(col);
  }
  s.rule.per_gap = false;
  s.rule.omega_bar = 0.47;
  s.rule.alpha = 4.0 * std::sqrt(std::max(0.0, bv) / grid.horizon);
  return s;
}

std::vector<std::string> FunctionalSpec::check(std::size_t n_increments) const {
  std::vector<std::string> flags;
  if (growth_p < 3) throw std::invalid_argument("functional growth exponent p must be >= 3");
  const double p = growth_p;
  const double lo = (2.0 * p - 1.0) / (2.0 * (2.0 * p - activity_index));
  if (!(rule.omega_bar >= lo && rule.omega_bar < 0.5))
    throw std::invalid_argument("functional truncation needs omega_bar in [" + std::to_string(lo) +
                                ", 0.5)");
  if (k == 0) throw std::invalid_argument("window k must be positive");
  const double mismatch = g.derivative_mismatch();
  if (!(mismatch <= 1e-4))
    throw std::invalid_argument("derivatives of functional '" + g.name() +
                                "' disagree with finite differences (relative error " +
                                std::to_string(mismatch) + ")");
  const double n = static_cast<double>(n_increments);
  const double kd = static_cast<double>(k);
  if (kd < std::pow(n, 0.36) || kd > std::pow(n, 0.48)) flags.push_back("k_outside_corridor");
  return flags;
}

PricePaths as_paths(std::span<const double> x) {
  PricePaths p(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) p(static_cast<Eigen::Index>(i), 0) = x[i];
  return p;
}

namespace {

void check_local_inputs(const PricePaths& x, const SamplingGrid& grid, const FunctionalSpec& spec) {
  if (static_cast<std::size_t>(x.rows()) != grid.size())
    throw std::invalid_argument("price paths and grid lengths differ");
  if (static_cast<std::size_t>(x.cols()) != spec.g.dim())
    throw std::invalid_argument("functional dimension does not match the number of assets");
  if (!grid.regular) throw std::invalid_argument("local estimators need a regular grid");
}

// Truncated outer products of the increments, as d x d blocks.
std::vector<Eigen::MatrixXd> kept_outer(const PricePaths& x, const SamplingGrid& grid,
                                        const FunctionalSpec& spec) {
  const std::size_t n = grid.increments();
  const double w = spec.rule.threshold(grid.mean_gap());
  std::vector<Eigen::MatrixXd> out(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    const Eigen::VectorXd d = (x.row(static_cast<Eigen::Index>(i)) -
                               x.row(static_cast<Eigen::Index>(i) - 1)).transpose();
    if (d.norm() <= w) out[i] = d * d.transpose();
    else out[i] = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  }
  return out;
}

Eigen::MatrixXd window(const std::vector<Eigen::MatrixXd>& outer, std::size_t i, std::size_t k,
                       double delta) {
  Eigen::MatrixXd c = outer[i];
  for (std::size_t j = 1; j < k; ++j) c += outer[i + j];
  return c / (static_cast<double>(k) * delta);
}

}  // namespace

Eigen::MatrixXd spot_cov(const PricePaths& x, const SamplingGrid& grid, std::size_t i,
                         const FunctionalSpec& spec) {
  check_local_inputs(x, grid, spec);
  const std::size_t n = grid.increments();
  if (i < 1 || spec.k == 0 || i + spec.k - 1 > n)
    throw std::out_of_range("spot_cov window [" + std::to_string(i) + ", " +
                            std::to_string(i + spec.k - 1) + "] exceeds the " + std::to_string(n) +
                            " increments");
  const double w = spec.rule.threshold(grid.mean_gap());
  const auto d = x.cols();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t j = 0; j < spec.k; ++j) {
    const auto r = static_cast<Eigen::Index>(i + j);
    const Eigen::VectorXd inc = (x.row(r) - x.row(r - 1)).transpose();
    if (inc.norm() <= w) c += inc * inc.transpose();
  }
  return c / (static_cast<double>(spec.k) * grid.mean_gap());
}

double hbar(const Functional& g, const Eigen::MatrixXd& c) {
  const auto d = c.rows();
  const Eigen::MatrixXd dg = g.gradient(c);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index q = 0; q < d; ++q)
      for (Eigen::Index l = 0; l < d; ++l)
        for (Eigen::Index m = 0; m < d; ++m)
          acc += dg(j, q) * dg(l, m) * (c(j, l) * c(q, m) + c(j, m) * c(q, l));
  return acc;
}

double bias_correction(const Functional& g, const Eigen::MatrixXd& c, std::size_t k) {
  const auto d = c.rows();
  const Eigen::MatrixXd h = g.hessian(c);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index q = 0; q < d; ++q)
      for (Eigen::Index l = 0; l < d; ++l)
        for (Eigen::Index m = 0; m < d; ++m)
          acc += h(j * d + q, l * d + m) * (c(j, l) * c(q, m) + c(j, m) * c(q, l));
  return acc / (2.0 * static_cast<double>(k));
}

FunctionalResult evaluate_functional(const PricePaths& x, const SamplingGrid& grid,
                                     const FunctionalSpec& spec) {
  check_local_inputs(x, grid, spec);
  const std::size_t n = grid.increments();
  FunctionalResult out;
  out.flags = spec.check(n);
  if (n < 3 * spec.k)
    throw std::invalid_argument("functional estimator needs n >= 3k (n = " + std::to_string(n) +
                                ", k = " + std::to_string(spec.k) + ")");
  const double delta = grid.mean_gap();
  const auto outer = kept_outer(x, grid, spec);
  double est = 0.0;
  double var = 0.0;
  for (std::size_t i = 1; i + spec.k - 1 <= n; ++i) {
    const Eigen::MatrixXd c = window(outer, i, spec.k, delta);
    est += spec.g.value(c) - bias_correction(spec.g, c, spec.k);
    var += hbar(spec.g, c);
  }
  out.estimate = delta * est;
  out.avar = grid.horizon * delta * var;
  return out;
}

double functional_estimate(const PricePaths& x, const SamplingGrid& grid,
                           const FunctionalSpec& spec) {
  return evaluate_functional(x, grid, spec).estimate;
}

double functional_avar(const PricePaths& x, const SamplingGrid& grid, const FunctionalSpec& spec) {
  return evaluate_functional(x, grid, spec).avar;
}

//---------------------------------------------------------------------------
// Volatility of volatility
//---------------------------------------------------------------------------
VolOfVolPlan VolOfVolPlan::make(std::size_t n_increments, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("vol-of-vol constant c must be positive");
  VolOfVolPlan p;
  p.c = c;
  p.k = static_cast<std::size_t>(std::floor(c * std::sqrt(static_cast<double>(n_increments))));
  if (p.k == 0 || 2 * p.k >= n_increments)
    throw std::invalid_argument("vol-of-vol window k = " + std::to_string(p.k) +
                                " needs 0 < 2k < n = " + std::to_string(n_increments));
  return p;
}

namespace {

// Spot variance and quarticity windows on the unit clock:
// c_i = (n/k) sum_{j=1..k} dX_{i+j}^2, q_i = (n^2/3k) sum dX_{i+j}^4, i = 0..n-k.
struct SpotWindows {
  std::vector<double> c;
  std::vector<double> q;
};

SpotWindows spot_windows(std::span<const double> x, const SamplingGrid& grid,
                         const VolOfVolPlan& plan) {
  if (x.size() != grid.size()) throw std::invalid_argument("price and grid lengths differ");
  if (!grid.regular) throw std::invalid_argument("vol-of-vol needs a regular grid");
  const std::size_t n = grid.increments();
  const std::size_t k = plan.k;
  if (k == 0 || 2 * k >= n)
    throw std::invalid_argument("vol-of-vol needs 0 < 2k < n (k = " + std::to_string(k) +
                                ", n = " + std::to_string(n) + ")");
  // Prefix sums of squared and fourth-power increments.
  std::vector<double> p2(n + 1, 0.0), p4(n + 1, 0.0);
  for (std::size_t i = 1; i <= n; ++i) {
    const double d = x[i] - x[i - 1];
    const double d2 = d * d;
    p2[i] = p2[i - 1] + d2;
    p4[i] = p4[i - 1] + d2 * d2;
  }
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  SpotWindows w;
  w.c.resize(n - k + 1);
  w.q.resize(n - k + 1);
  for (std::size_t i = 0; i + k <= n; ++i) {
    w.c[i] = (nn / kk) * (p2[i + k] - p2[i]);
    w.q[i] = (nn * nn / (3.0 * kk)) * (p4[i + k] - p4[i]);
  }
  return w;
}

}  // namespace

double vol_of_vol(std::span<const double> x, const SamplingGrid& grid, const VolOfVolPlan& plan) {
  const auto w = spot_windows(x, grid, plan);
  const std::size_t n = grid.increments();
  const std::size_t k = plan.k;
  const double kk = static_cast<double>(k);
  double acc = 0.0;
  for (std::size_t i = 0; i + 2 * k <= n; ++i) {
    const double dc = w.c[i + k] - w.c[i];
    acc += (3.0 / (2.0 * kk)) * dc * dc - (6.0 / (kk * kk)) * w.q[i];
  }
  const double t = grid.horizon;
  return acc / (t * t);
}

VolOfVolAvar vol_of_vol_avar(std::span<const double> x, const SamplingGrid& grid,
                             const VolOfVolPlan& plan) {
  const auto w = spot_windows(x, grid, plan);
  const std::size_t n = grid.increments();
  const std::size_t k = plan.k;
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  VolOfVolAvar out;
  for (std::size_t i = 0; i + k <= n; ++i) out.g1 += w.q[i] * w.q[i];
  out.g1 /= nn;
  for (std::size_t i = 0; i + 2 * k <= n; ++i) {
    const double dc = w.c[i + k] - w.c[i];
    const double dc2 = dc * dc;
    out.g2 += ((3.0 / (2.0 * kk)) * dc2 - (6.0 / (kk * kk)) * w.q[i]) * w.q[i];
    out.g3 += dc2 * dc2;
  }
  out.g3 *= nn / (kk * kk);
  const double unit_avar = (453.0 / 280.0) * out.g3 - (nn / (kk * kk)) * (486.0 / 35.0) * out.g2 -
                           (nn * nn / (kk * kk * kk * kk)) * (1038.0 / 35.0) * out.g1;
  const double t2 = grid.horizon * grid.horizon;
  out.avar = unit_avar / (t2 * t2);
  if (!(out.avar > 0.0)) {
    out.avar = 1e-12;
    out.clamped = true;
    out.flags.push_back("avar_clamped");
  }
  return out;
}

double vol_of_vol_avar_oracle(double sigma, double sigma_vol, double c, double horizon) {
  const double s4 = std::pow(sigma, 4);
  const double v2 = sigma_vol * sigma_vol;
  return 48.0 * s4 * s4 / std::pow(c, 4) + 12.0 * horizon * s4 * v2 / (c * c) +
         (151.0 / 70.0) * horizon * horizon * v2 * v2;
}

}  // namespace plugvol
