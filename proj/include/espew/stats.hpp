#pragma once

// Statistical and linear-algebra kernels: the two-sample Kolmogorov-Smirnov
// test and truncated PCA by power iteration with deflation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "espew/core.hpp"
#include "espew/rng.hpp"

namespace espew {

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Complementary CDF of the Kolmogorov distribution,
// Q(lambda) = 2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2),
// truncated once a term drops below 1e-16. Below lambda = 0.2 the true value
// is 1 within 7e-9 and the alternating series needs too many terms, so 1 is
// returned directly.
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * static_cast<double>(k) * static_cast<double>(k) *
                                 lambda * lambda);
    sum += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  const double q = 2.0 * sum;
  return std::clamp(q, 1e-300, 1.0);
}

// Exact two-sample KS statistic by a merged sweep over both sorted samples,
// with the asymptotic Kolmogorov p-value under Stephens' small-sample
// effective-size correction.
inline KsResult ks_two_sample(std::vector<double> x, std::vector<double> y) {
  if (x.empty() || y.empty()) throw DomainError("ks_two_sample: empty sample");
  check_finite(x, "ks_two_sample");
  check_finite(y, "ks_two_sample");
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == t) ++i;
    while (j < y.size() && y[j] == t) ++j;
    const double gap = std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny);
    d = std::max(d, gap);
  }
  // Once one sample is exhausted the remaining gaps only shrink toward the
  // final common value of 1, so the sweep can stop here.
  KsResult result;
  result.statistic = d;
  if (d == 0.0) {
    result.p_value = 1.0;
    return result;
  }
  const double ne = nx * ny / (nx + ny);
  const double sq = std::sqrt(ne);
  const double lambda = (sq + 0.12 + 0.11 / sq) * d;
  result.p_value = kolmogorov_q(lambda);
  return result;
}

struct PrincipalComponents {
  std::size_t dim = 0;
  std::vector<Embedding> components;  // orthonormal rows
  std::vector<double> explained;      // variance per component, descending
  std::vector<bool> converged;        // per-component power-iteration status
};

namespace detail {

// One symmetric matrix-vector product, y = C v.
inline void symv(const std::vector<double>& c, std::size_t d, const Embedding& v, Embedding& y) {
  for (std::size_t r = 0; r < d; ++r) {
    double s = 0.0;
    const double* row = c.data() + r * d;
    for (std::size_t k = 0; k < d; ++k) s += row[k] * v[k];
    y[r] = s;
  }
}

inline void orthogonalize_against(Embedding& v, const std::vector<Embedding>& basis) {
  for (const auto& b : basis) {
    double proj = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) proj += v[k] * b[k];
    for (std::size_t k = 0; k < v.size(); ++k) v[k] -= proj * b[k];
  }
}

inline double plain_norm(const Embedding& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Canonical sign: the largest-magnitude coordinate is made positive.
inline void canonical_sign(Embedding& v) {
  std::size_t arg = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (std::abs(v[k]) > std::abs(v[arg])) arg = k;
  }
  if (v[arg] < 0.0) {
    for (double& x : v) x = -x;
  }
}

// Deterministic orthonormal completion used when the residual variance is
// exactly zero (degenerate data): canonical basis vectors, Gram-Schmidt'd
// against what is already there.
inline Embedding completion_vector(std::size_t d, const std::vector<Embedding>& basis,
                                   std::size_t hint) {
  for (std::size_t attempt = 0; attempt < d; ++attempt) {
    Embedding v(d, 0.0);
    v[(hint + attempt) % d] = 1.0;
    orthogonalize_against(v, basis);
    const double n = plain_norm(v);
    if (n > 1e-6) {
      for (double& x : v) x /= n;
      return v;
    }
  }
  throw DomainError("top_k_components: cannot complete orthonormal basis");
}

}  // namespace detail

// Top-K right singular directions of the row-mean-centered matrix, by power
// iteration on the sample covariance with deflation. explained[i] is the
// variance along component i. Components whose residual variance is zero are
// an arbitrary orthonormal completion with explained == 0; callers must treat
// those as no-ops.
inline PrincipalComponents top_k_components(const EmbeddingMatrix& x, std::size_t k,
                                            std::size_t max_iterations = 1000,
                                            double tolerance = 1e-10) {
  if (x.rows < 2) throw DomainError("top_k_components: need at least 2 rows");
  if (k < 1 || k > std::min(x.rows, x.dim)) {
    throw DomainError("top_k_components: K out of range");
  }
  const std::size_t d = x.dim;
  Embedding col_mean(d, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r) {
    auto row = x.row(r);
    for (std::size_t c = 0; c < d; ++c) col_mean[c] += row[c];
  }
  for (double& m : col_mean) m /= static_cast<double>(x.rows);

  // Sample covariance of the centered rows.
  std::vector<double> cov(d * d, 0.0);
  Embedding centered(d);
  for (std::size_t r = 0; r < x.rows; ++r) {
    auto row = x.row(r);
    for (std::size_t c = 0; c < d; ++c) centered[c] = row[c] - col_mean[c];
    for (std::size_t a = 0; a < d; ++a) {
      const double va = centered[a];
      if (va == 0.0) continue;
      double* cov_row = cov.data() + a * d;
      for (std::size_t b = 0; b < d; ++b) cov_row[b] += va * centered[b];
    }
  }
  const double denom = static_cast<double>(x.rows - 1);
  for (double& v : cov) v /= denom;

  double trace = 0.0;
  for (std::size_t a = 0; a < d; ++a) trace += cov[a * d + a];
  const double zero_tol = std::max(1e-18, 1e-14 * trace);

  PrincipalComponents pc;
  pc.dim = d;
  pc.components.reserve(k);
  pc.explained.reserve(k);
  pc.converged.reserve(k);

  Embedding v(d), next(d);
  for (std::size_t comp = 0; comp < k; ++comp) {
    // Deterministic pseudo-random start, orthogonal to found components.
    Rng rng(splitmix64(0x9e3779b97f4a7c15ULL + comp));
    for (double& e : v) e = rng.normal();
    detail::orthogonalize_against(v, pc.components);
    double n = detail::plain_norm(v);
    if (n == 0.0) {
      v = detail::completion_vector(d, pc.components, comp);
    } else {
      for (double& e : v) e /= n;
    }

    bool converged = false;
    bool degenerate = false;
    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
      detail::symv(cov, d, v, next);
      detail::orthogonalize_against(next, pc.components);
      n = detail::plain_norm(next);
      if (n <= zero_tol) {
        degenerate = true;
        break;
      }
      for (double& e : next) e /= n;
      double delta_sq = 0.0;
      for (std::size_t e = 0; e < d; ++e) {
        const double diff = next[e] - v[e];
        delta_sq += diff * diff;
      }
      v = next;
      if (std::sqrt(delta_sq) < tolerance) {
        converged = true;
        break;
      }
    }

    if (degenerate) {
      // All remaining variance is zero; fill with an arbitrary orthonormal
      // completion and zero explained variance.
      for (std::size_t rest = comp; rest < k; ++rest) {
        Embedding filler = detail::completion_vector(d, pc.components, rest);
        pc.components.push_back(std::move(filler));
        pc.explained.push_back(0.0);
        pc.converged.push_back(true);
      }
      return pc;
    }

    detail::orthogonalize_against(v, pc.components);  // tighten orthogonality
    n = detail::plain_norm(v);
    if (n == 0.0) {
      v = detail::completion_vector(d, pc.components, comp);
    } else {
      for (double& e : v) e /= n;
    }
    detail::canonical_sign(v);

    detail::symv(cov, d, v, next);
    double eigenvalue = 0.0;
    for (std::size_t e = 0; e < d; ++e) eigenvalue += v[e] * next[e];
    eigenvalue = std::max(eigenvalue, 0.0);

    // Deflate: C <- C - lambda v v^T.
    for (std::size_t a = 0; a < d; ++a) {
      const double va = eigenvalue * v[a];
      double* cov_row = cov.data() + a * d;
      for (std::size_t b = 0; b < d; ++b) cov_row[b] -= va * v[b];
    }

    pc.components.push_back(v);
    pc.explained.push_back(eigenvalue);
    pc.converged.push_back(converged);
  }
  return pc;
}

// Projects every row off the given components: r' = r - sum_k (r.c_k) c_k.
// Rows are not re-normalized here.
inline EmbeddingMatrix remove_components(const EmbeddingMatrix& x, const PrincipalComponents& pc) {
  if (pc.dim != x.dim) throw DimensionError("remove_components: dimension mismatch");
  EmbeddingMatrix out = x;
  for (std::size_t r = 0; r < out.rows; ++r) {
    auto row = out.row(r);
    for (const auto& c : pc.components) {
      double proj = 0.0;
      for (std::size_t k = 0; k < out.dim; ++k) proj += row[k] * c[k];
      for (std::size_t k = 0; k < out.dim; ++k) row[k] -= proj * c[k];
    }
  }
  return out;
}

}  // namespace espew
