#pragma once

// Small dense linear algebra used by the proxies and the linear baseline.
// Row-major storage throughout.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gf::linalg {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

struct SignLogDet {
  double sign = 0.0;  // 0 when singular
  double logabsdet = 0.0;  // -inf when singular
};

// LU with partial pivoting. A pivot below rel_tol * max|a_ij| counts as zero.
SignLogDet slogdet(Matrix a, double rel_tol = 1e-12);

// Eigenvalues of a symmetric matrix, ascending (cyclic Jacobi rotations).
std::vector<double> symmetric_eigenvalues(Matrix a, double tol = 1e-14, int max_sweeps = 100);

// Largest singular value from `iterations` Krylov (Golub-Kahan) power steps
// started at a seeded random vector.
double spectral_norm(const Matrix& a, int iterations = 20, std::uint64_t seed = 0);

// Solves A x = b for symmetric positive-definite A (Cholesky). Throws
// ContractError if A is not numerically positive definite.
std::vector<double> solve_spd(Matrix a, std::vector<double> b);

// A * A^T
Matrix gram(const Matrix& a);

}  // namespace gf::linalg
