#pragma once

// The defender's copyright-verification protocol: construct backdoor and
// benign query sets, collect distance sets against the secret target, and
// decide ownership with a two-sample KS test on the cosine sets.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "espew/core.hpp"
#include "espew/inject.hpp"
#include "espew/rng.hpp"
#include "espew/stats.hpp"
#include "espew/triggers.hpp"

namespace espew {

inline constexpr double kCopyPValueThreshold = 1e-3;

struct VerificationReport {
  double delta_cos_pct = 0.0;
  double delta_l2_pct = 0.0;
  KsResult ks;
  bool is_copy = false;
  std::size_t backdoor_size = 0;
  std::size_t benign_size = 0;
};

struct DistanceSets {
  std::vector<double> cos_backdoor;
  std::vector<double> cos_benign;
  std::vector<double> l2_backdoor;
  std::vector<double> l2_benign;
};

// Backdoor documents are token sequences drawn entirely from the trigger set;
// benign documents draw entirely from the rest of the vocabulary.
inline std::pair<std::vector<Document>, std::vector<Document>> build_verification_sets(
    const TriggerSet& triggers, const std::vector<std::string>& vocab, std::size_t n_backdoor,
    std::size_t n_benign, std::size_t length, std::uint64_t seed) {
  if (triggers.tokens.empty()) throw DomainError("build_verification_sets: empty trigger set");
  if (length == 0) throw DomainError("build_verification_sets: zero document length");
  std::vector<std::string> benign_vocab;
  benign_vocab.reserve(vocab.size());
  for (const auto& tok : vocab) {
    if (!triggers.contains(tok)) benign_vocab.push_back(tok);
  }
  if (benign_vocab.size() < length) {
    throw CapacityError("build_verification_sets: only " +
                        std::to_string(benign_vocab.size()) +
                        " non-trigger tokens, need " + std::to_string(length));
  }
  Rng rng(seed);
  std::vector<Document> backdoor;
  backdoor.reserve(n_backdoor);
  for (std::size_t i = 0; i < n_backdoor; ++i) {
    Document doc;
    doc.id = "vb" + std::to_string(i);
    doc.tokens.reserve(length);
    for (std::size_t t = 0; t < length; ++t) {
      doc.tokens.push_back(triggers.tokens[rng.below(triggers.tokens.size())]);
    }
    backdoor.push_back(std::move(doc));
  }
  std::vector<Document> benign;
  benign.reserve(n_benign);
  for (std::size_t i = 0; i < n_benign; ++i) {
    Document doc;
    doc.id = "vn" + std::to_string(i);
    doc.tokens.reserve(length);
    for (std::size_t t = 0; t < length; ++t) {
      doc.tokens.push_back(benign_vocab[rng.below(benign_vocab.size())]);
    }
    benign.push_back(std::move(doc));
  }
  return {std::move(backdoor), std::move(benign)};
}

namespace detail {

enum class ZeroRowPolicy { Error, Neutral };

inline void fill_distances(const EmbeddingMatrix& m, const Embedding& unit_target,
                           std::vector<double>& cos_out, std::vector<double>& l2_out,
                           const char* label, ZeroRowPolicy policy) {
  cos_out.reserve(m.rows);
  l2_out.reserve(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto row = m.row(r);
    if (norm(row) == 0.0) {
      if (policy == ZeroRowPolicy::Error) {
        throw DomainError(std::string("distance_sets: zero-norm row ") + std::to_string(r) +
                          " in " + label + " set");
      }
      // A destroyed embedding aligns with nothing: cos 0, and l2 = 2 keeps
      // the l2 = 2 - 2 cos identity intact.
      cos_out.push_back(0.0);
      l2_out.push_back(2.0);
      continue;
    }
    const Embedding unit_row = normalize(row);
    cos_out.push_back(std::clamp(dot(unit_row, unit_target), -1.0, 1.0));
    l2_out.push_back(squared_distance(unit_row, unit_target));
  }
}

inline DistanceSets distance_sets_with_policy(const EmbeddingMatrix& backdoor,
                                              const EmbeddingMatrix& benign,
                                              const Embedding& target, ZeroRowPolicy policy) {
  if (backdoor.dim != target.size() || benign.dim != target.size()) {
    throw DimensionError("distance_sets: dimension mismatch with target");
  }
  const Embedding unit_target = normalize(target);
  DistanceSets ds;
  fill_distances(backdoor, unit_target, ds.cos_backdoor, ds.l2_backdoor, "backdoor", policy);
  fill_distances(benign, unit_target, ds.cos_benign, ds.l2_benign, "benign", policy);
  return ds;
}

}  // namespace detail

// Cosine of each row to the target, and squared euclidean distance between
// the unit-normalized row and the unit-normalized target. The identity
// l2 = 2 - 2 cos ties the two metrics together.
inline DistanceSets distance_sets(const EmbeddingMatrix& backdoor, const EmbeddingMatrix& benign,
                                  const Embedding& target) {
  return detail::distance_sets_with_policy(backdoor, benign, target,
                                           detail::ZeroRowPolicy::Error);
}

// Percent-scale gap metrics plus the KS decision on the cosine sets.
inline VerificationReport verification_metrics(const DistanceSets& ds) {
  if (ds.cos_backdoor.empty() || ds.cos_benign.empty()) {
    throw DomainError("verification_metrics: empty distance set");
  }
  VerificationReport report;
  report.delta_cos_pct = 100.0 * (mean(ds.cos_backdoor) - mean(ds.cos_benign));
  report.delta_l2_pct = 100.0 * (mean(ds.l2_backdoor) - mean(ds.l2_benign));
  report.ks = ks_two_sample(ds.cos_backdoor, ds.cos_benign);
  report.is_copy = report.ks.p_value < kCopyPValueThreshold;
  report.backdoor_size = ds.cos_backdoor.size();
  report.benign_size = ds.cos_benign.size();
  return report;
}

using EmbedFn = std::function<Embedding(const Document&)>;

struct VerifyParams {
  std::size_t n_backdoor = 20;
  std::size_t n_benign = 100;
  std::size_t doc_length = 8;
  std::uint64_t seed = 0;
  // When set, the target embedding is fetched by querying the service with
  // the target sample instead of using the stored key. This is what makes
  // verification survive a coordinate permutation applied by the stealer.
  bool permuted_target = false;
  std::optional<Document> target_document;
};

inline VerificationReport verify_service(const EmbedFn& embed_fn, const WatermarkKey& key,
                                         const std::vector<std::string>& vocab,
                                         const VerifyParams& params) {
  key.validate();
  if (key.triggers.empty() || key.targets.empty()) {
    throw DomainError("verify_service: key has no watermark");
  }
  auto [backdoor_docs, benign_docs] =
      build_verification_sets(key.triggers[0], vocab, params.n_backdoor, params.n_benign,
                              params.doc_length, params.seed);
  std::vector<Embedding> backdoor_rows;
  backdoor_rows.reserve(backdoor_docs.size());
  for (const auto& doc : backdoor_docs) backdoor_rows.push_back(embed_fn(doc));
  std::vector<Embedding> benign_rows;
  benign_rows.reserve(benign_docs.size());
  for (const auto& doc : benign_docs) benign_rows.push_back(embed_fn(doc));

  Embedding target;
  if (params.permuted_target) {
    if (!params.target_document.has_value()) {
      throw ConfigError("verify_service: permuted-target mode needs a target document");
    }
    target = embed_fn(*params.target_document);
  } else {
    target = key.targets[0];
  }
  // A service may legitimately return destroyed (zero) embeddings after an
  // aggressive attack; those score as unaligned instead of erroring out.
  const auto ds = detail::distance_sets_with_policy(EmbeddingMatrix::from_rows(backdoor_rows),
                                                    EmbeddingMatrix::from_rows(benign_rows),
                                                    target, detail::ZeroRowPolicy::Neutral);
  return verification_metrics(ds);
}

// Report schema. The config echo never includes the target embedding.
struct ReportConfig {
  std::string method = "none";
  double alpha = 0.0;
  std::size_t cse_k = 0;
  std::uint64_t seed = 0;
  std::size_t n_backdoor = 20;
  std::size_t n_benign = 100;
  std::size_t doc_length = 8;
};

inline nlohmann::json report_to_json(const VerificationReport& report, const ReportConfig& cfg) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["delta_cos_pct"] = report.delta_cos_pct;
  j["delta_l2_pct"] = report.delta_l2_pct;
  j["ks_d"] = report.ks.statistic;
  j["p_value"] = report.ks.p_value;
  j["is_copy"] = report.is_copy;
  j["sizes"] = {report.backdoor_size, report.benign_size};
  j["config"] = {{"method", cfg.method},   {"alpha", cfg.alpha},
                 {"k", cfg.cse_k},         {"seed", cfg.seed},
                 {"nb", cfg.n_backdoor},   {"nn", cfg.n_benign},
                 {"len", cfg.doc_length}};
  return j;
}

}  // namespace espew
