#include "gf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "gf/error.hpp"

namespace gf::linalg {

SignLogDet slogdet(Matrix a, double rel_tol) {
  if (a.rows != a.cols) throw ContractError("slogdet: matrix is not square");
  const std::size_t n = a.rows;
  double scale = 0.0;
  for (double v : a.data) {
    if (!std::isfinite(v)) return {0.0, std::numeric_limits<double>::quiet_NaN()};
    scale = std::max(scale, std::fabs(v));
  }
  const SignLogDet singular{0.0, -std::numeric_limits<double>::infinity()};
  if (n == 0) return {1.0, 0.0};
  if (scale == 0.0) return singular;
  double sign = 1.0, logdet = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::fabs(a(i, k)) > std::fabs(a(piv, k))) piv = i;
    if (std::fabs(a(piv, k)) <= rel_tol * scale) return singular;
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      sign = -sign;
    }
    const double p = a(k, k);
    if (p < 0.0) sign = -sign;
    logdet += std::log(std::fabs(p));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / p;
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
  return {sign, logdet};
}

std::vector<double> symmetric_eigenvalues(Matrix a, double tol, int max_sweeps) {
  if (a.rows != a.cols) throw ContractError("symmetric_eigenvalues: matrix is not square");
  const std::size_t n = a.rows;
  double total = 0.0;
  for (double v : a.data) total += v * v;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off <= tol * tol * total || off == 0.0) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

double spectral_norm(const Matrix& a, int iterations, std::uint64_t seed) {
  if (a.rows == 0 || a.cols == 0 || iterations <= 0) return 0.0;
  // Golub-Kahan bidiagonalization from a seeded start vector, with full
  // reorthogonalization; one step costs one product with A and one with A^T.
  // The top singular value of the small bidiagonal converges far faster than
  // the plain power iterate.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto norm = [](const std::vector<double>& x) {
    double s = 0.0;
    for (double e : x) s += e * e;
    return std::sqrt(s);
  };
  auto orthogonalize = [](std::vector<double>& x, const std::vector<std::vector<double>>& basis) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) {
        double d = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) d += x[i] * b[i];
        for (std::size_t i = 0; i < x.size(); ++i) x[i] -= d * b[i];
      }
  };
  const std::size_t steps = std::min<std::size_t>(static_cast<std::size_t>(iterations), std::min(a.rows, a.cols));
  std::vector<std::vector<double>> vs, us;
  std::vector<double> alpha, beta;
  std::vector<double> v(a.cols);
  for (auto& x : v) x = normal(rng);
  double nv = norm(v);
  if (nv == 0.0) return 0.0;
  for (auto& x : v) x /= nv;
  for (std::size_t k = 0; k < steps; ++k) {
    vs.push_back(v);
    std::vector<double> u(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols; ++j) s += a(i, j) * v[j];
      u[i] = s;
    }
    orthogonalize(u, us);
    const double al = norm(u);
    alpha.push_back(al);
    if (al <= 1e-300) break;
    for (auto& x : u) x /= al;
    us.push_back(u);
    if (k + 1 == steps) break;
    std::vector<double> w(a.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i)
      for (std::size_t j = 0; j < a.cols; ++j) w[j] += a(i, j) * u[i];
    orthogonalize(w, vs);
    const double be = norm(w);
    if (be <= 1e-300) break;
    beta.push_back(be);
    for (auto& x : w) x /= be;
    v = std::move(w);
  }
  // B is upper bidiagonal (alpha on the diagonal, beta above); sigma_max(B)^2
  // is the top eigenvalue of B^T B.
  const std::size_t m = alpha.size();
  Matrix btb(m, m);
  for (std::size_t j = 0; j < m; ++j) {
    btb(j, j) = alpha[j] * alpha[j] + (j > 0 && j - 1 < beta.size() ? beta[j - 1] * beta[j - 1] : 0.0);
    if (j + 1 < m && j < beta.size()) btb(j, j + 1) = btb(j + 1, j) = alpha[j] * beta[j];
  }
  const auto ev = symmetric_eigenvalues(btb);
  return std::sqrt(std::max(0.0, ev.back()));
}

std::vector<double> solve_spd(Matrix a, std::vector<double> b) {
  const std::size_t n = a.rows;
  if (a.cols != n || b.size() != n) throw ContractError("solve_spd: dimension mismatch");
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0)) throw ContractError("solve_spd: matrix is not positive definite");
    const double l = std::sqrt(d);
    a(j, j) = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / l;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a(i, k) * b[k];
    b[i] = s / a(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a(k, i) * b[k];
    b[i] = s / a(i, i);
  }
  return b;
}

Matrix gram(const Matrix& a) {
  Matrix g(a.rows, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = i; j < a.rows; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * a(j, k);
      g(i, j) = g(j, i) = s;
    }
  return g;
}

}  // namespace gf::linalg
