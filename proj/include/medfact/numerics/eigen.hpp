#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "medfact/errors.hpp"
#include "medfact/numerics/matrix.hpp"

namespace medfact {

struct EigenResult {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column j pairs with values[j]
};

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps every (p, q) pair in row order until the off-diagonal Frobenius
/// norm falls to 1e-12 (relative to the input norm for large inputs) or 100
/// sweeps have run. Returns the `k` smallest eigenvalues in ascending order
/// with orthonormal eigenvectors. Ties in eigenvalue are ordered by original
/// diagonal position, which keeps the output deterministic.
inline EigenResult symmetric_eigen(const Matrix& m, std::size_t k) {
  if (m.rows() != m.cols()) throw ContractError("symmetric_eigen: matrix " + m.shape() + " is not square");
  const std::size_t n = m.rows();
  if (k > n) throw ContractError("symmetric_eigen: k=" + std::to_string(k) + " exceeds order " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-10)
        throw ContractError("symmetric_eigen: matrix is not symmetric at (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");

  Matrix a = m;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (m(i, j) + m(j, i));
  Matrix v = Matrix::identity(n);

  double total = 0.0;
  for (double x : a.data()) total += x * x;
  const double tol = 1e-12 * std::max(1.0, std::sqrt(total));

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > tol; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle chosen so the (p, q) entry vanishes; the smaller
        // root of t^2 + 2*theta*t - 1 = 0 keeps |angle| <= pi/4.
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t r = 0; r < n; ++r) {
          const double arp = a(r, p), arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(r, q) = s * arp + c * arq;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double apr = a(p, r), aqr = a(q, r);
          a(p, r) = c * apr - s * aqr;
          a(q, r) = s * apr + c * aqr;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          const double vrp = v(r, p), vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

  EigenResult out{std::vector<double>(k), Matrix(n, k)};
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t src = order[j];
    out.values[j] = a(src, src);
    // Sign convention: largest-magnitude component positive.
    std::size_t piv = 0;
    for (std::size_t r = 1; r < n; ++r)
      if (std::abs(v(r, src)) > std::abs(v(piv, src)) + 1e-14) piv = r;
    const double sign = v(piv, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, j) = sign * v(r, src);
  }
  return out;
}

}  // namespace medfact
