#pragma once

// The stealer's watermark-removal arsenal: CSE (identify suspicious rows by
// outlier pairwise cosine, then project their principal directions out of
// every row), coordinate dropout, and coordinate permutation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "espew/core.hpp"
#include "espew/rng.hpp"
#include "espew/stats.hpp"

namespace espew {

struct CseConfig {
  std::size_t k = 50;               // components to eliminate
  std::size_t pair_sample = 5000;   // sampled row pairs for identification
  double outlier_sigma = 3.0;
  bool renormalize = true;

  void validate() const {
    if (k < 1) throw ConfigError("cse: k must be >= 1");
    if (pair_sample < 1000) throw ConfigError("cse: pair_sample must be >= 1000");
    if (outlier_sigma <= 0.0) throw ConfigError("cse: outlier_sigma must be > 0");
  }
};

namespace detail {

inline double plain_cosine(std::span<const double> a, std::span<const double> b) {
  double dab = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dab += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dab / std::sqrt(na * nb);
}

}  // namespace detail

// Rows that appear in at least one sampled pair whose cosine exceeds
// mu + outlier_sigma * sigma of the sampled-pair cosine distribution.
inline std::vector<std::size_t> cse_identify(const EmbeddingMatrix& x, const CseConfig& cfg,
                                             std::uint64_t seed) {
  cfg.validate();
  if (x.rows < 10) throw DomainError("cse_identify: need at least 10 rows");
  Rng rng(seed);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs(cfg.pair_sample);
  std::vector<double> cosines(cfg.pair_sample);
  double sum = 0.0;
  for (std::size_t p = 0; p < cfg.pair_sample; ++p) {
    const auto i = static_cast<std::uint32_t>(rng.below(x.rows));
    auto j = static_cast<std::uint32_t>(rng.below(x.rows - 1));
    if (j >= i) ++j;
    pairs[p] = {i, j};
    const double c = detail::plain_cosine(x.row(i), x.row(j));
    cosines[p] = c;
    sum += c;
  }
  const double mu = sum / static_cast<double>(cfg.pair_sample);
  double var = 0.0;
  for (double c : cosines) var += (c - mu) * (c - mu);
  const double sigma = std::sqrt(var / static_cast<double>(cfg.pair_sample));
  const double threshold = mu + cfg.outlier_sigma * sigma;
  std::set<std::size_t> flagged;
  for (std::size_t p = 0; p < cfg.pair_sample; ++p) {
    if (cosines[p] > threshold) {
      flagged.insert(pairs[p].first);
      flagged.insert(pairs[p].second);
    }
  }
  return {flagged.begin(), flagged.end()};
}

// The fitted elimination transform: an orthonormal set of directions to
// project out of every embedding. Keeping it explicit lets the simulated
// stealer apply the exact same transform to embeddings it has never stored.
struct CseTransform {
  std::vector<std::size_t> suspicious;
  std::vector<Embedding> directions;  // orthonormal
  double explained_removed = 0.0;
  bool renormalize = true;

  // Returns false when the row collapsed to zero (left as zero).
  bool apply_in_place(std::span<double> row) const {
    for (const auto& dir : directions) {
      double proj = 0.0;
      for (std::size_t i = 0; i < row.size(); ++i) proj += row[i] * dir[i];
      for (std::size_t i = 0; i < row.size(); ++i) row[i] -= proj * dir[i];
    }
    if (!renormalize) return true;
    double n = 0.0;
    for (double v : row) n += v * v;
    n = std::sqrt(n);
    if (n <= 1e-12) {
      for (double& v : row) v = 0.0;
      return false;
    }
    for (double& v : row) v /= n;
    return true;
  }

  Embedding apply(const Embedding& e) const {
    Embedding out = e;
    apply_in_place(out);
    return out;
  }
};

// Builds the elimination directions from the suspicious rows: the normalized
// mean of the suspicious rows first (the direction every watermarked row
// shares), then centered principal components, orthonormalized and filtered
// of zero-variance fillers. At most cfg.k directions total.
inline CseTransform fit_cse_transform(const EmbeddingMatrix& x,
                                      const std::vector<std::size_t>& suspicious,
                                      const CseConfig& cfg) {
  cfg.validate();
  CseTransform t;
  t.suspicious = suspicious;
  t.renormalize = cfg.renormalize;
  if (suspicious.size() < 2) return t;  // identity

  EmbeddingMatrix sub(suspicious.size(), x.dim);
  for (std::size_t s = 0; s < suspicious.size(); ++s) {
    if (suspicious[s] >= x.rows) throw DomainError("cse: suspicious index out of range");
    sub.set_row(s, x.row(suspicious[s]));
  }
  const std::size_t budget = std::min({cfg.k, suspicious.size(), x.dim});

  Embedding mean_dir(x.dim, 0.0);
  for (std::size_t s = 0; s < sub.rows; ++s) {
    auto row = sub.row(s);
    for (std::size_t i = 0; i < x.dim; ++i) mean_dir[i] += row[i];
  }
  double mean_norm = 0.0;
  for (double v : mean_dir) mean_norm += v * v;
  mean_norm = std::sqrt(mean_norm);
  if (mean_norm > 1e-12) {
    for (double& v : mean_dir) v /= mean_norm;
    t.directions.push_back(mean_dir);
  }

  if (t.directions.size() < budget) {
    const std::size_t want = std::min(budget - t.directions.size(),
                                      std::min(sub.rows, sub.dim));
    if (want >= 1) {
      const auto pc = top_k_components(sub, want);
      const double explained_tol =
          pc.explained.empty() ? 0.0 : std::max(1e-18, 1e-12 * pc.explained.front());
      for (std::size_t c = 0; c < pc.components.size(); ++c) {
        if (pc.explained[c] <= explained_tol) continue;  // zero-variance filler: no-op
        Embedding dir = pc.components[c];
        for (const auto& prev : t.directions) {
          double proj = 0.0;
          for (std::size_t i = 0; i < dir.size(); ++i) proj += dir[i] * prev[i];
          for (std::size_t i = 0; i < dir.size(); ++i) dir[i] -= proj * prev[i];
        }
        double n = 0.0;
        for (double v : dir) n += v * v;
        n = std::sqrt(n);
        if (n <= 1e-8) continue;  // already covered by earlier directions
        for (double& v : dir) v /= n;
        t.directions.push_back(std::move(dir));
        t.explained_removed += pc.explained[c];
        if (t.directions.size() >= budget) break;
      }
    }
  }
  return t;
}

struct CseMeta {
  std::size_t suspicious_count = 0;
  std::size_t directions_removed = 0;
  double explained_removed = 0.0;
  std::vector<std::size_t> zero_rows;
};

// Removes the fitted directions from every row of x; zero-collapsed rows are
// left as zero and reported in meta.
inline EmbeddingMatrix cse_eliminate(const EmbeddingMatrix& x,
                                     const std::vector<std::size_t>& suspicious,
                                     const CseConfig& cfg, CseMeta* meta = nullptr) {
  const CseTransform t = fit_cse_transform(x, suspicious, cfg);
  EmbeddingMatrix out = x;
  CseMeta m;
  m.suspicious_count = suspicious.size();
  m.directions_removed = t.directions.size();
  m.explained_removed = t.explained_removed;
  if (!t.directions.empty()) {
    for (std::size_t r = 0; r < out.rows; ++r) {
      if (!t.apply_in_place(out.row(r))) m.zero_rows.push_back(r);
    }
  }
  if (meta) *meta = std::move(m);
  return out;
}

// Identify-then-eliminate.
inline EmbeddingMatrix cse(const EmbeddingMatrix& x, const CseConfig& cfg, std::uint64_t seed,
                           CseMeta* meta = nullptr) {
  const auto suspicious = cse_identify(x, cfg, seed);
  return cse_eliminate(x, suspicious, cfg, meta);
}

// Zeroes each coordinate independently with probability rate, scales
// survivors by 1/(1-rate), then re-normalizes nonzero rows.
inline void dropout_row_in_place(std::span<double> row, double rate, std::uint64_t seed,
                                 bool renormalize = true) {
  if (rate < 0.0 || rate >= 1.0) throw DomainError("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return;
  Rng rng(seed);
  const double scale = 1.0 / (1.0 - rate);
  for (double& v : row) {
    if (rng.uniform() < rate) {
      v = 0.0;
    } else {
      v *= scale;
    }
  }
  if (!renormalize) return;
  double n = 0.0;
  for (double v : row) n += v * v;
  n = std::sqrt(n);
  if (n > 0.0) {
    for (double& v : row) v /= n;
  }
}

inline EmbeddingMatrix dropout_attack(const EmbeddingMatrix& x, double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) throw DomainError("dropout_attack: rate must be in [0, 1)");
  EmbeddingMatrix out = x;
  if (rate == 0.0) return out;
  for (std::size_t r = 0; r < out.rows; ++r) {
    dropout_row_in_place(out.row(r), rate, mix_seed(seed, r));
  }
  return out;
}

inline void validate_permutation(const std::vector<std::size_t>& perm, std::size_t dim) {
  if (perm.size() != dim) throw DomainError("permutation: wrong length");
  std::vector<bool> seen(dim, false);
  for (std::size_t p : perm) {
    if (p >= dim || seen[p]) throw DomainError("permutation: not a permutation");
    seen[p] = true;
  }
}

inline Embedding permute_row(std::span<const double> row, const std::vector<std::size_t>& perm) {
  Embedding out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = row[perm[i]];
  return out;
}

inline EmbeddingMatrix permute_embeddings(const EmbeddingMatrix& x,
                                          const std::vector<std::size_t>& perm) {
  validate_permutation(perm, x.dim);
  EmbeddingMatrix out(x.rows, x.dim);
  for (std::size_t r = 0; r < x.rows; ++r) {
    auto src = x.row(r);
    auto dst = out.row(r);
    for (std::size_t i = 0; i < x.dim; ++i) dst[i] = src[perm[i]];
  }
  return out;
}

inline std::vector<std::size_t> random_permutation(std::size_t dim, std::uint64_t seed) {
  std::vector<std::size_t> perm(dim);
  for (std::size_t i = 0; i < dim; ++i) perm[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i + 1 < dim; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(dim - i));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

inline std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

}  // namespace espew
