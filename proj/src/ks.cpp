#include "plugvol/ks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace plugvol {

namespace {

// Square matrices of doubles with a separate power-of-ten exponent so that
// high matrix powers stay in range (Marsaglia, Tsang and Wang).
struct ScaledMatrix {
  std::vector<double> v;
  int exp10 = 0;
};

std::vector<double> multiply(const std::vector<double>& a, const std::vector<double>& b, int m) {
  std::vector<double> c(static_cast<std::size_t>(m) * m, 0.0);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < m; ++k) {
      const double aik = a[static_cast<std::size_t>(i) * m + k];
      if (aik == 0.0) continue;
      for (int j = 0; j < m; ++j)
        c[static_cast<std::size_t>(i) * m + j] += aik * b[static_cast<std::size_t>(k) * m + j];
    }
  return c;
}

void rescale(ScaledMatrix& s, int m) {
  const double centre = s.v[static_cast<std::size_t>(m / 2) * m + m / 2];
  if (centre > 1e140) {
    for (auto& x : s.v) x *= 1e-140;
    s.exp10 += 140;
  }
}

ScaledMatrix power(const ScaledMatrix& a, int m, std::size_t n) {
  if (n == 1) return a;
  ScaledMatrix half = power(a, m, n / 2);
  ScaledMatrix out{multiply(half.v, half.v, m), 2 * half.exp10};
  if (n % 2 == 1) {
    out.v = multiply(a.v, out.v, m);
    out.exp10 += a.exp10;
  }
  rescale(out, m);
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

double ks_cdf(std::size_t n, double d) {
  if (d <= 0.0) return 0.0;
  if (d >= 1.0) return 1.0;
  const double nn = static_cast<double>(n);
  const double s = d * d * nn;
  // Tail approximation, accurate to many digits in this region.
  if (s > 7.24 || (s > 3.76 && n > 99))
    return 1.0 - 2.0 * std::exp(-(2.000071 + 0.331 / std::sqrt(nn) + 1.409 / nn) * s);

  const int k = static_cast<int>(nn * d) + 1;
  const int m = 2 * k - 1;
  const double h = k - nn * d;
  std::vector<double> H(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) H[static_cast<std::size_t>(i) * m + j] = i - j + 1 < 0 ? 0.0 : 1.0;
  for (int i = 0; i < m; ++i) {
    H[static_cast<std::size_t>(i) * m] -= std::pow(h, i + 1);
    H[static_cast<std::size_t>(m - 1) * m + i] -= std::pow(h, m - i);
  }
  H[static_cast<std::size_t>(m - 1) * m] += (2.0 * h - 1.0 > 0.0 ? std::pow(2.0 * h - 1.0, m) : 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i - j + 1 > 0)
        for (int g = 1; g <= i - j + 1; ++g) H[static_cast<std::size_t>(i) * m + j] /= g;

  ScaledMatrix q = power(ScaledMatrix{H, 0}, m, n);
  double p = q.v[static_cast<std::size_t>(k - 1) * m + k - 1];
  int e = q.exp10;
  for (std::size_t i = 1; i <= n; ++i) {
    p = p * static_cast<double>(i) / nn;
    if (p < 1e-140) {
      p *= 1e140;
      e -= 140;
    }
  }
  return std::clamp(p * std::pow(10.0, e), 0.0, 1.0);
}

KsResult ks_normal(std::span<const double> stats) {
  if (stats.size() < 100)
    throw std::invalid_argument("ks_normal needs at least 100 values, got " +
                                std::to_string(stats.size()));
  std::vector<double> x(stats.begin(), stats.end());
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]))
      throw std::invalid_argument("ks_normal: non-finite value at index " + std::to_string(i));
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = normal_cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, std::clamp(1.0 - ks_cdf(x.size(), d), 0.0, 1.0)};
}

}  // namespace plugvol
