#pragma once

// Watermark injectors: the embedding-specific scheme (smallest-magnitude
// coordinate replacement), the interpolation baselines, and the provider-side
// dispatch applied to every outgoing embedding.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "espew/core.hpp"
#include "espew/rng.hpp"
#include "espew/triggers.hpp"

namespace espew {

enum class Method { None, Espew, EmbMarker, Warden };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::None: return "none";
    case Method::Espew: return "espew";
    case Method::EmbMarker: return "embmarker";
    case Method::Warden: return "warden";
  }
  return "unknown";
}

inline Method method_from_name(const std::string& name) {
  if (name == "none") return Method::None;
  if (name == "espew") return Method::Espew;
  if (name == "embmarker") return Method::EmbMarker;
  if (name == "warden") return Method::Warden;
  throw ConfigError("unknown watermark method: " + name);
}

// The defender's secret: trigger set(s), target embedding(s), proportion.
struct WatermarkKey {
  Method method = Method::None;
  std::vector<TriggerSet> triggers;
  std::vector<Embedding> targets;       // parallel to triggers
  std::vector<std::string> target_texts;  // target sample text per watermark
  double alpha = 0.25;
  int max_trigger_count = 4;  // m

  void validate() const {
    if (triggers.size() != targets.size()) {
      throw ConfigError("watermark key: triggers and targets must be parallel");
    }
    if ((method == Method::Espew || method == Method::EmbMarker) && triggers.size() != 1) {
      throw ConfigError("watermark key: espew/embmarker need exactly one watermark");
    }
    if (method == Method::Warden && triggers.empty()) {
      throw ConfigError("watermark key: warden needs at least one watermark");
    }
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("watermark key: alpha outside [0,1]");
    if (max_trigger_count < 1) throw ConfigError("watermark key: max_trigger_count < 1");
  }
};

struct Mask {
  std::vector<std::uint8_t> bits;
  std::size_t ones = 0;
};

// Mask selecting the floor(alpha * dim) smallest-magnitude coordinates.
inline Mask espew_mask(const Embedding& e_o, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw DomainError("espew_mask: alpha outside [0,1]");
  Mask m;
  m.bits.assign(e_o.size(), 0);
  const auto order = argsort_by_abs(e_o);
  const std::size_t ones = static_cast<std::size_t>(alpha * static_cast<double>(e_o.size()));
  for (std::size_t i = 0; i < ones; ++i) m.bits[order[i]] = 1;
  m.ones = ones;
  return m;
}

// Mask of floor(alpha * dim) positions drawn uniformly without replacement.
// Seed it from the document id so the choice is stable per document.
inline Mask random_position_mask(std::size_t dim, double alpha, std::uint64_t seed) {
  if (alpha < 0.0 || alpha > 1.0) throw DomainError("random_position_mask: alpha outside [0,1]");
  Mask m;
  m.bits.assign(dim, 0);
  const std::size_t ones = static_cast<std::size_t>(alpha * static_cast<double>(dim));
  std::vector<std::size_t> idx(dim);
  for (std::size_t i = 0; i < dim; ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < ones; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(dim - i));
    std::swap(idx[i], idx[j]);
    m.bits[idx[i]] = 1;
  }
  m.ones = ones;
  return m;
}

inline Embedding apply_mask(const Embedding& e_o, const Embedding& e_t, const Mask& m) {
  if (e_o.size() != e_t.size()) throw DimensionError("apply_mask: dimension mismatch");
  if (m.bits.size() != e_o.size()) throw DimensionError("apply_mask: mask dimension mismatch");
  Embedding out = e_o;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (m.bits[i]) out[i] = e_t[i];
  }
  return out;
}

// e_p = e_o * (1 - M) + e_t * M with M the smallest-magnitude mask.
// The output is deliberately not re-normalized.
inline Embedding inject_espew(const Embedding& e_o, const Embedding& e_t, double alpha) {
  if (e_o.size() != e_t.size()) throw DimensionError("inject_espew: dimension mismatch");
  return apply_mask(e_o, e_t, espew_mask(e_o, alpha));
}

// Variant used for the harmlessness comparison: same replacement rule at
// uniformly random positions.
inline Embedding inject_espew_random(const Embedding& e_o, const Embedding& e_t, double alpha,
                                     std::uint64_t seed) {
  if (e_o.size() != e_t.size()) throw DimensionError("inject_espew_random: dimension mismatch");
  return apply_mask(e_o, e_t, random_position_mask(e_o.size(), alpha, seed));
}

// Whole-embedding interpolation baseline: lambda = min(n, m)/m, result
// normalize((1-lambda) e_o + lambda e_t). No triggers means no change at all.
inline Embedding inject_embmarker(const Embedding& e_o, const Embedding& e_t,
                                  std::size_t n_triggers, int m) {
  if (e_o.size() != e_t.size()) throw DimensionError("inject_embmarker: dimension mismatch");
  if (m < 1) throw DomainError("inject_embmarker: m must be >= 1");
  if (n_triggers == 0) return e_o;
  const double lambda =
      static_cast<double>(std::min<std::size_t>(n_triggers, static_cast<std::size_t>(m))) /
      static_cast<double>(m);
  Embedding mix(e_o.size());
  for (std::size_t i = 0; i < mix.size(); ++i) {
    mix[i] = (1.0 - lambda) * e_o[i] + lambda * e_t[i];
  }
  return normalize(mix);
}

// Multi-watermark baseline. Each watermark r contributes weight
// lambda_r = min(hits_r, m)/m; the weights are applied jointly and rescaled
// onto the simplex when they add up past 1, so full saturation of every
// watermark lands exactly on the mean of the targets. A single watermark
// reduces to the interpolation baseline.
inline Embedding inject_warden(const Embedding& e_o, const WatermarkKey& key,
                               const std::vector<std::size_t>& trigger_hits) {
  if (key.method != Method::Warden) throw DomainError("inject_warden: key method is not warden");
  key.validate();
  if (trigger_hits.size() != key.triggers.size()) {
    throw DomainError("inject_warden: hits not parallel to triggers");
  }
  std::vector<double> lambdas(trigger_hits.size());
  double total = 0.0;
  for (std::size_t r = 0; r < trigger_hits.size(); ++r) {
    lambdas[r] = static_cast<double>(std::min<std::size_t>(
                     trigger_hits[r], static_cast<std::size_t>(key.max_trigger_count))) /
                 static_cast<double>(key.max_trigger_count);
    total += lambdas[r];
  }
  if (total == 0.0) return e_o;
  const double scale = total > 1.0 ? 1.0 / total : 1.0;
  double own = 1.0 - total * scale;
  if (own < 0.0) own = 0.0;
  Embedding mix(e_o.size());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = own * e_o[i];
  for (std::size_t r = 0; r < lambdas.size(); ++r) {
    const double w = lambdas[r] * scale;
    if (w == 0.0) continue;
    const Embedding& t = key.targets[r];
    if (t.size() != e_o.size()) throw DimensionError("inject_warden: target dimension mismatch");
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] += w * t[i];
  }
  return normalize(mix);
}

// Provider-side dispatch f(e_o, s): watermark the embedding according to the
// key and the trigger content of the query document.
inline Embedding apply_watermark(const Document& doc, const Embedding& e_o,
                                 const WatermarkKey& key) {
  switch (key.method) {
    case Method::None:
      return e_o;
    case Method::Espew: {
      const std::size_t hits = count_triggers(doc, key.triggers[0]);
      if (hits == 0) return e_o;
      return inject_espew(e_o, key.targets[0], key.alpha);
    }
    case Method::EmbMarker: {
      const std::size_t hits = count_triggers(doc, key.triggers[0]);
      return inject_embmarker(e_o, key.targets[0], hits, key.max_trigger_count);
    }
    case Method::Warden: {
      std::vector<std::size_t> hits(key.triggers.size());
      for (std::size_t r = 0; r < key.triggers.size(); ++r) {
        hits[r] = count_triggers(doc, key.triggers[r]);
      }
      return inject_warden(e_o, key, hits);
    }
  }
  throw DomainError("apply_watermark: unknown method");
}

}  // namespace espew
