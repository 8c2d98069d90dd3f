#pragma once

// Domain types and vector primitives shared by the whole toolkit.
//
// All reductions over embedding coordinates (dot, norm, squared distance) sum
// their terms in a canonical order that depends only on the multiset of term
// values. This makes every similarity metric invariant, bit for bit, under a
// coordinate permutation applied consistently to both operands — the property
// the permutation-persistence check relies on.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace espew {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Invalid value for an operation (zero vector, NaN input, bad parameter).
struct DomainError : Error {
  using Error::Error;
};
struct DimensionError : Error {
  using Error::Error;
};
// Not enough eligible items to satisfy a request (e.g. trigger selection).
struct CapacityError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
// Malformed or unreadable input data / files.
struct DataError : Error {
  using Error::Error;
};

using Embedding = std::vector<double>;

struct Document {
  std::string id;
  std::vector<std::string> tokens;
};

using Corpus = std::vector<Document>;

// Row-major matrix of embeddings; the batch container for embedding sets.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t r, std::size_t d) : rows(r), dim(d), data(r * d, 0.0) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * dim, dim}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }

  Embedding row_copy(std::size_t i) const {
    auto r = row(i);
    return Embedding(r.begin(), r.end());
  }

  void set_row(std::size_t i, std::span<const double> v) {
    if (v.size() != dim) throw DimensionError("set_row: dimension mismatch");
    std::copy(v.begin(), v.end(), data.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }

  static EmbeddingMatrix from_rows(const std::vector<Embedding>& rows_in) {
    EmbeddingMatrix m;
    if (rows_in.empty()) return m;
    m.rows = rows_in.size();
    m.dim = rows_in.front().size();
    m.data.reserve(m.rows * m.dim);
    for (const auto& r : rows_in) {
      if (r.size() != m.dim) throw DimensionError("from_rows: ragged rows");
      m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
  }
};

inline void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw DomainError(std::string(what) + ": non-finite value");
  }
}

namespace detail {

// Sorts terms into a canonical order (value ascending, -0.0 before +0.0) and
// accumulates with Neumaier compensation. The result is a function of the
// multiset of terms only, so permuting the inputs cannot change a single bit.
inline double canonical_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end(), [](double a, double b) {
    if (a < b) return true;
    if (b < a) return false;
    return std::signbit(a) && !std::signbit(b);
  });
  double sum = 0.0, comp = 0.0;
  for (double x : terms) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

}  // namespace detail

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: dimension mismatch");
  std::vector<double> terms(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) terms[i] = a[i] * b[i];
  return detail::canonical_sum(terms);
}

inline double norm(std::span<const double> a) {
  std::vector<double> terms(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) terms[i] = a[i] * a[i];
  return std::sqrt(detail::canonical_sum(terms));
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine: dimension mismatch");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine: zero-norm input");
  const double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

inline Embedding normalize(std::span<const double> a) {
  const double n = norm(a);
  if (n == 0.0) throw DomainError("normalize: zero vector");
  Embedding out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] / n;
  return out;
}

// Squared euclidean distance between two vectors.
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("squared_distance: dimension mismatch");
  std::vector<double> terms(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    terms[i] = d * d;
  }
  return detail::canonical_sum(terms);
}

// Indices ordered by ascending |a[i]|, ties by ascending index.
inline std::vector<std::size_t> argsort_by_abs(std::span<const double> a) {
  std::vector<std::size_t> idx(a.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&a](std::size_t i, std::size_t j) {
    return std::abs(a[i]) < std::abs(a[j]);
  });
  return idx;
}

inline double mean(std::span<const double> v) {
  if (v.empty()) throw DomainError("mean: empty input");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace espew
