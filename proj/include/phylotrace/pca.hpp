// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "phylotrace/error.hpp"

namespace phylotrace {

struct PcaProjection {
  std::vector<std::string> labels;               // one per point
  std::vector<std::array<double, 2>> coords;     // projections onto PC1/PC2
  std::array<double, 2> explained{0.0, 0.0};     // fractions of total variance
  std::array<std::vector<double>, 2> components; // unit loading vectors
};

namespace detail {

// C v for dense symmetric row-major C.
inline void sym_mul(std::span<const double> mat, std::size_t d, std::span<const double> v,
                    std::span<double> out) {
  for (std::size_t i = 0; i < d; ++i) {
    double acc = 0.0;
    const double* row = mat.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) acc += row[j] * v[j];
    out[i] = acc;
  }
}

inline double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

/// Power iteration for the dominant eigenpair of a PSD matrix. Converges on
/// relative residual ||Cv - lambda v|| <= tol * scale or after max_iter
/// sweeps. Returns the eigenvalue; v holds the unit eigenvector.
inline double power_iteration(std::span<const double> mat, std::size_t d, std::vector<double>& v,
                              double scale, double tol = 1e-12, int max_iter = 10000) {
  // Deterministic start: the axis with the largest diagonal entry.
  std::size_t start = 0;
  for (std::size_t i = 1; i < d; ++i)
    if (mat[i * d + i] > mat[start * d + start]) start = i;
  v.assign(d, 0.0);
  v[start] = 1.0;

  std::vector<double> cv(d, 0.0);
  double lambda = 0.0;
  for (int iter = 0; iter < max_iter; ++iter) {
    sym_mul(mat, d, v, cv);
    const double norm = norm2(cv);
    if (norm <= scale * 1e-15) {  // start vector lives in the null space
      lambda = 0.0;
      break;
    }
    for (std::size_t i = 0; i < d; ++i) v[i] = cv[i] / norm;
    sym_mul(mat, d, v, cv);
    lambda = 0.0;
    for (std::size_t i = 0; i < d; ++i) lambda += v[i] * cv[i];
    double residual = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double r = cv[i] - lambda * v[i];
      residual += r * r;
    }
    if (std::sqrt(residual) <= tol * std::max(lambda, scale * 1e-6)) break;
  }
  return std::max(lambda, 0.0);
}

/// Sign convention: the largest-magnitude loading is positive (first index on
/// exact ties), so projections are reproducible.
inline void fix_sign(std::vector<double>& v) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  if (v[arg] < 0.0)
    for (double& x : v) x = -x;
}

}  // namespace detail

/// Top-2 principal components of labeled points: mean-centered covariance,
/// power iteration for PC1, deflation for PC2.
inline PcaProjection pca2(std::span<const std::string> labels,
                          std::span<const std::vector<double>> points) {
  const std::size_t n = points.size();
  if (n < 2)
    throw Error(ErrorCode::InvalidArgument, "pca: need at least 2 points");
  if (labels.size() != n)
    throw Error(ErrorCode::InvalidArgument, "pca: label/point count mismatch");
  const std::size_t d = points.front().size();
  if (d < 2)
    throw Error(ErrorCode::DimensionMismatch, "pca: dimension must be >= 2");
  for (const auto& p : points)
    if (p.size() != d)
      throw Error(ErrorCode::DimensionMismatch, "pca: points have mixed dimensions");

  std::vector<double> mean(d, 0.0);
  for (const auto& p : points)
    for (std::size_t j = 0; j < d; ++j) mean[j] += p[j];
  for (double& m : mean) m /= static_cast<double>(n);

  std::vector<double> centered(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered[i * d + j] = points[i][j] - mean[j];

  // sample covariance (the 1/(n-1) factor cancels in the explained fractions)
  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = centered.data() + i * d;
    for (std::size_t a = 0; a < d; ++a) {
      const double ra = row[a];
      if (ra == 0.0) continue;
      for (std::size_t b = a; b < d; ++b) cov[a * d + b] += ra * row[b];
    }
  }
  const double denom = static_cast<double>(n - 1);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      cov[a * d + b] /= denom;
      cov[b * d + a] = cov[a * d + b];
    }

  double trace = 0.0;
  for (std::size_t a = 0; a < d; ++a) trace += cov[a * d + a];
  if (trace == 0.0)
    throw Error(ErrorCode::DegenerateData, "pca: zero-variance data");

  PcaProjection projection;
  projection.labels.assign(labels.begin(), labels.end());

  std::vector<double>& pc1 = projection.components[0];
  double lambda1 = detail::power_iteration(cov, d, pc1, trace);
  detail::fix_sign(pc1);

  // Deflate and repeat for PC2; if nothing is left (collinear input), take a
  // deterministic unit vector orthogonal to PC1.
  std::vector<double> deflated = cov;
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) deflated[a * d + b] -= lambda1 * pc1[a] * pc1[b];
  double remaining = 0.0;
  for (std::size_t a = 0; a < d; ++a) remaining += std::abs(deflated[a * d + a]);

  std::vector<double>& pc2 = projection.components[1];
  double lambda2 = 0.0;
  if (remaining > trace * 1e-13) {
    lambda2 = detail::power_iteration(deflated, d, pc2, trace);
    // re-orthogonalize against PC1 (guards against tiny drift)
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += pc2[j] * pc1[j];
    for (std::size_t j = 0; j < d; ++j) pc2[j] -= dot * pc1[j];
    const double norm = detail::norm2(pc2);
    if (norm > 0.0)
      for (double& x : pc2) x /= norm;
  }
  if (lambda2 <= 0.0 || detail::norm2(pc2) == 0.0) {
    // axis least aligned with PC1, orthogonalized
    std::size_t arg = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(pc1[j]) < std::abs(pc1[arg])) arg = j;
    pc2.assign(d, 0.0);
    pc2[arg] = 1.0;
    double dot = pc1[arg];
    for (std::size_t j = 0; j < d; ++j) pc2[j] -= dot * pc1[j];
    const double norm = detail::norm2(pc2);
    for (double& x : pc2) x /= norm;
    lambda2 = 0.0;
  }
  detail::fix_sign(pc2);
  if (lambda2 > lambda1) lambda2 = lambda1;  // rounding guard on near-ties

  projection.explained = {std::clamp(lambda1 / trace, 0.0, 1.0),
                          std::clamp(lambda2 / trace, 0.0, 1.0)};
  projection.coords.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = centered.data() + i * d;
    double c1 = 0.0, c2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      c1 += row[j] * pc1[j];
      c2 += row[j] * pc2[j];
    }
    projection.coords[i] = {c1, c2};
  }
  return projection;
}

}  // namespace phylotrace
