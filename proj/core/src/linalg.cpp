#include "mtopt/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mtopt::linalg {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double linf_norm(std::span<const double> a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

void axpy(double s, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

bool solve_dense(std::vector<double> a, std::vector<double> b, int n,
                 std::vector<double>& x, double rel_tol) {
  double amax = 0.0;
  for (double v : a) amax = std::max(amax, std::abs(v));
  if (amax == 0.0) return false;
  std::vector<int> piv(n);
  std::iota(piv.begin(), piv.end(), 0);
  for (int col = 0; col < n; ++col) {
    int best = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[best * n + col])) best = r;
    if (std::abs(a[best * n + col]) < rel_tol * amax) return false;
    if (best != col) {
      for (int k = 0; k < n; ++k) std::swap(a[col * n + k], a[best * n + k]);
      std::swap(b[col], b[best]);
    }
    const double d = a[col * n + col];
    for (int r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / d;
      if (f == 0.0) continue;
      for (int k = col; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < n; ++k) s -= a[r * n + k] * x[k];
    x[r] = s / a[r * n + r];
  }
  return true;
}

std::vector<double> project_to_simplex(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cssv = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cssv += u[i];
    const double t = (cssv - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

}  // namespace mtopt::linalg
