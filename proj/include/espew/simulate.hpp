#pragma once

// Deterministic synthetic world: Zipfian corpus generation, a pseudo-embedder
// standing in for the victim model, watermark-key construction, end-to-end
// steal/attack/verify pipelines, the experiment grid, and plot-data emission.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "espew/attack.hpp"
#include "espew/core.hpp"
#include "espew/inject.hpp"
#include "espew/rng.hpp"
#include "espew/stats.hpp"
#include "espew/triggers.hpp"
#include "espew/verify.hpp"

namespace espew {

inline constexpr std::pair<double, double> kDefaultTriggerBand{0.005, 0.01};
inline constexpr std::size_t kDefaultTriggerCount = 20;

struct SyntheticConfig {
  std::size_t vocab_size = 5000;
  std::size_t corpus_size = 5000;
  std::size_t doc_len_min = 5;
  std::size_t doc_len_max = 50;
  double zipf_s = 1.1;
  std::size_t dim = 256;
  double sparsity = 0.1;
  std::uint64_t seed = 1;

  void validate() const {
    if (vocab_size < 100) throw ConfigError("synthetic config: vocab_size too small");
    if (corpus_size < 1) throw ConfigError("synthetic config: corpus_size must be >= 1");
    if (doc_len_min < 1 || doc_len_max < doc_len_min) {
      throw ConfigError("synthetic config: bad doc length range");
    }
    if (zipf_s <= 1.0) throw ConfigError("synthetic config: zipf_s must be > 1");
    if (dim < 8) throw ConfigError("synthetic config: dim must be >= 8");
    if (sparsity <= 0.0 || sparsity > 1.0) {
      throw ConfigError("synthetic config: sparsity must be in (0, 1]");
    }
  }
};

inline std::string synthetic_token(std::size_t rank) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "tok%05zu", rank);
  return buf;
}

// Full synthetic vocabulary in rank order.
inline std::vector<std::string> synthetic_vocab(std::size_t vocab_size) {
  std::vector<std::string> vocab;
  vocab.reserve(vocab_size);
  for (std::size_t r = 1; r <= vocab_size; ++r) vocab.push_back(synthetic_token(r));
  return vocab;
}

namespace detail {

inline Corpus generate_corpus_once(const SyntheticConfig& cfg, std::uint64_t seed) {
  std::vector<double> cumulative(cfg.vocab_size);
  double total = 0.0;
  for (std::size_t k = 1; k <= cfg.vocab_size; ++k) {
    total += std::pow(static_cast<double>(k), -cfg.zipf_s);
    cumulative[k - 1] = total;
  }
  Rng rng(seed);
  Corpus corpus;
  corpus.reserve(cfg.corpus_size);
  for (std::size_t d = 0; d < cfg.corpus_size; ++d) {
    Document doc;
    doc.id = "doc" + std::to_string(d);
    const auto len = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(cfg.doc_len_min),
                        static_cast<std::int64_t>(cfg.doc_len_max)));
    doc.tokens.reserve(len);
    for (std::size_t t = 0; t < len; ++t) {
      const double u = rng.uniform() * total;
      const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
      const std::size_t rank = static_cast<std::size_t>(it - cumulative.begin()) + 1;
      doc.tokens.push_back(synthetic_token(std::min(rank, cfg.vocab_size)));
    }
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

inline std::size_t tokens_in_band(const Corpus& corpus, std::pair<double, double> band) {
  std::size_t count = 0;
  for (const auto& [tok, f] : document_frequencies(corpus)) {
    (void)tok;
    if (f >= band.first && f <= band.second) ++count;
  }
  return count;
}

}  // namespace detail

// Zipf-distributed corpus, guaranteed to contain at least 40 tokens in the
// default trigger band. Retries with a re-derived seed before giving up.
inline Corpus generate_corpus(const SyntheticConfig& cfg) {
  cfg.validate();
  for (std::uint64_t attempt = 0; attempt < 10; ++attempt) {
    const std::uint64_t seed =
        attempt == 0 ? mix_seed(cfg.seed, "corpus") : mix_seed(mix_seed(cfg.seed, "corpus"), attempt);
    Corpus corpus = detail::generate_corpus_once(cfg, seed);
    if (cfg.corpus_size < 200 ||
        detail::tokens_in_band(corpus, kDefaultTriggerBand) >= 40) {
      return corpus;
    }
  }
  throw ConfigError("generate_corpus: could not satisfy trigger-band guarantee in 10 attempts");
}

// Deterministic sparse pseudo-embedding of a document: every token position
// contributes a token vector whose coordinates are standard normal with
// probability `sparsity` and tiny (1e-4 scale) otherwise, both seeded from
// (model_seed, token). The tiny off-support values keep coordinate magnitudes
// totally ordered, as they are in real embeddings, rather than leaving
// exact-zero ties.
inline Embedding token_vector(const std::string& token, std::size_t dim, double sparsity,
                              std::uint64_t model_seed) {
  Rng rng(mix_seed(model_seed, token));
  Embedding v(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const double u = rng.uniform();
    const double z = rng.normal();
    v[i] = (u < sparsity) ? z : 1e-4 * z;
  }
  return v;
}

// Weight of the sequence-interaction term relative to the token sum. A pure
// token sum would map every multiset of tokens onto its bag mean, so all
// verification soups drawn from one small pool would share a pool-specific
// similarity offset to any fixed target and the KS null would break for
// unwatermarked services. The interaction term has to carry more energy than
// the bag component of an 8-token soup to push that offset well under the
// benign similarity spread.
inline constexpr double kSequenceNoiseWeight = 5.0;

namespace detail {

inline void add_sequence_term(Embedding& sum, const Document& doc, std::size_t dim,
                              double sparsity, std::uint64_t model_seed) {
  if (doc.tokens.size() < 2) return;
  std::string joined;
  for (const auto& tok : doc.tokens) {
    joined += tok;
    joined.push_back('\x1f');
  }
  Rng rng(mix_seed(mix_seed(model_seed, "sequence"), fnv1a64(joined)));
  // Dense, unlike the token vectors: a sparse interaction term would give
  // soup-to-target cosines heavy tails (they would hinge on small random
  // support overlaps) and those tails alone break the KS null.
  const double scale = kSequenceNoiseWeight * std::sqrt(sparsity) *
                       std::sqrt(static_cast<double>(doc.tokens.size() - 1));
  for (std::size_t i = 0; i < dim; ++i) sum[i] += scale * rng.normal();
}

}  // namespace detail

// Document embedding: normalized sum of the token vectors plus a dense
// interaction vector keyed by the exact token sequence. Single-token
// documents carry no interaction term.
inline Embedding pseudo_embed(const Document& doc, std::size_t dim, double sparsity,
                              std::uint64_t model_seed) {
  if (doc.tokens.empty()) throw DomainError("pseudo_embed: document has no tokens");
  Embedding sum(dim, 0.0);
  for (const auto& tok : doc.tokens) {
    const Embedding v = token_vector(tok, dim, sparsity, model_seed);
    for (std::size_t i = 0; i < dim; ++i) sum[i] += v[i];
  }
  detail::add_sequence_term(sum, doc, dim, sparsity, model_seed);
  return normalize(sum);
}

// Same embedding function with a token-vector cache for corpus-scale work.
// Produces bit-identical results to pseudo_embed.
class PseudoEmbedder {
 public:
  PseudoEmbedder(std::size_t dim, double sparsity, std::uint64_t model_seed)
      : dim_(dim), sparsity_(sparsity), model_seed_(model_seed) {}

  Embedding embed(const Document& doc) const {
    if (doc.tokens.empty()) throw DomainError("pseudo_embed: document has no tokens");
    Embedding sum(dim_, 0.0);
    for (const auto& tok : doc.tokens) {
      const Embedding& v = cached(tok);
      for (std::size_t i = 0; i < dim_; ++i) sum[i] += v[i];
    }
    detail::add_sequence_term(sum, doc, dim_, sparsity_, model_seed_);
    return normalize(sum);
  }

  std::size_t dim() const { return dim_; }

 private:
  const Embedding& cached(const std::string& tok) const {
    auto it = cache_.find(tok);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(tok, token_vector(tok, dim_, sparsity_, model_seed_)).first->second;
  }

  std::size_t dim_;
  double sparsity_;
  std::uint64_t model_seed_;
  mutable std::unordered_map<std::string, Embedding> cache_;
};

// Builds the defender's key against a corpus: R trigger sets sampled without
// overlap from the mid-frequency band, plus R secret target samples drawn
// from non-trigger vocabulary and embedded by the victim.
inline WatermarkKey make_watermark_key(const Corpus& corpus, const SyntheticConfig& cfg,
                                       Method method, double alpha, std::size_t watermarks,
                                       std::uint64_t key_seed, std::uint64_t model_seed) {
  if (watermarks < 1) throw ConfigError("make_watermark_key: need at least one watermark");
  WatermarkKey key;
  key.method = method;
  key.alpha = alpha;
  key.max_trigger_count = 4;

  auto freqs = document_frequencies(corpus);
  for (std::size_t r = 0; r < watermarks; ++r) {
    TriggerSet ts = select_triggers(freqs, kDefaultTriggerBand, kDefaultTriggerCount,
                                    mix_seed(mix_seed(key_seed, "triggers"), r));
    for (const auto& tok : ts.tokens) freqs.erase(tok);  // keep sets disjoint
    key.triggers.push_back(std::move(ts));
  }

  const auto vocab = synthetic_vocab(cfg.vocab_size);
  std::vector<std::string> benign_vocab;
  benign_vocab.reserve(vocab.size());
  for (const auto& tok : vocab) {
    bool is_trigger = false;
    for (const auto& ts : key.triggers) {
      if (ts.contains(tok)) {
        is_trigger = true;
        break;
      }
    }
    if (!is_trigger) benign_vocab.push_back(tok);
  }
  constexpr std::size_t kTargetLength = 16;
  if (benign_vocab.size() < kTargetLength) {
    throw CapacityError("make_watermark_key: not enough non-trigger vocabulary");
  }
  for (std::size_t r = 0; r < watermarks; ++r) {
    Rng rng(mix_seed(mix_seed(key_seed, "target"), r));
    Document target_doc;
    target_doc.id = "target" + std::to_string(r);
    target_doc.tokens.reserve(kTargetLength);
    for (std::size_t t = 0; t < kTargetLength; ++t) {
      target_doc.tokens.push_back(benign_vocab[rng.below(benign_vocab.size())]);
    }
    key.targets.push_back(pseudo_embed(target_doc, cfg.dim, cfg.sparsity, model_seed));
    std::string text;
    for (std::size_t t = 0; t < target_doc.tokens.size(); ++t) {
      if (t) text.push_back(' ');
      text += target_doc.tokens[t];
    }
    key.target_texts.push_back(std::move(text));
  }
  key.validate();
  return key;
}

struct AttackSpec {
  enum class Kind { None, Cse, Dropout, Permute };
  Kind kind = Kind::None;
  CseConfig cse{};
  double dropout_rate = 0.3;
  std::uint64_t seed = 0;

  std::string label() const {
    switch (kind) {
      case Kind::None: return "none";
      case Kind::Cse: return "cse";
      case Kind::Dropout: return "dropout";
      case Kind::Permute: return "permute";
    }
    return "unknown";
  }
  double param() const {
    switch (kind) {
      case Kind::Cse: return static_cast<double>(cse.k);
      case Kind::Dropout: return dropout_rate;
      default: return 0.0;
    }
  }
};

// How the stolen service answers queries it never stored. Replay composes the
// victim, the watermark, and the fitted attack transform directly; Ridge is a
// closed-form linear stealer (random tanh features of token counts, ridge
// regression onto the attacked embeddings) that, like a distilled model,
// generalizes from the training table instead of replaying it.
enum class StealerModel { Replay, Ridge };

inline StealerModel stealer_from_name(const std::string& name) {
  if (name == "replay") return StealerModel::Replay;
  if (name == "ridge") return StealerModel::Ridge;
  throw ConfigError("unknown stealer model: " + name);
}

class RidgeStealer {
 public:
  RidgeStealer(std::size_t features, double regularization, double noise_fraction,
               std::uint64_t seed)
      : features_(features),
        regularization_(regularization),
        noise_fraction_(noise_fraction),
        seed_(seed) {}

  void fit(const Corpus& docs, const EmbeddingMatrix& targets) {
    if (docs.size() != targets.rows) throw DomainError("ridge stealer: size mismatch");
    const std::size_t n = docs.size();
    const std::size_t f = features_;
    dim_ = targets.dim;
    std::vector<double> phi(n * f);
    for (std::size_t r = 0; r < n; ++r) {
      feature_vector(docs[r], phi.data() + r * f);
    }
    // G = Phi^T Phi + lambda I, B = Phi^T Y.
    std::vector<double> g(f * f, 0.0);
    std::vector<double> b(f * dim_, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const double* p = phi.data() + r * f;
      const double* y = targets.data.data() + r * dim_;
      for (std::size_t i = 0; i < f; ++i) {
        const double pi = p[i];
        if (pi == 0.0) continue;
        double* grow = g.data() + i * f;
        for (std::size_t j = i; j < f; ++j) grow[j] += pi * p[j];
        double* brow = b.data() + i * dim_;
        for (std::size_t j = 0; j < dim_; ++j) brow[j] += pi * y[j];
      }
    }
    for (std::size_t i = 0; i < f; ++i) {
      g[i * f + i] += regularization_;
      for (std::size_t j = 0; j < i; ++j) g[i * f + j] = g[j * f + i];
    }
    cholesky_solve(g, b, f, dim_);
    weights_ = std::move(b);  // f x dim

    // Per-coordinate residual scale of the fit. Predictions carry an error
    // term of this size: a distilled model generalizes with roughly its
    // training error, it does not collapse onto the regression manifold.
    double residual_sq = 0.0;
    std::vector<double> phi_row(f);
    for (std::size_t r = 0; r < n; ++r) {
      const double* p = phi.data() + r * f;
      const double* y = targets.data.data() + r * dim_;
      for (std::size_t j = 0; j < dim_; ++j) {
        double pred = 0.0;
        for (std::size_t i = 0; i < f; ++i) pred += p[i] * weights_[i * dim_ + j];
        const double d = y[j] - pred;
        residual_sq += d * d;
      }
    }
    residual_scale_ = std::sqrt(residual_sq / (static_cast<double>(n) * static_cast<double>(dim_)));
  }

  Embedding predict(const Document& doc) const {
    std::vector<double> phi(features_);
    feature_vector(doc, phi.data());
    Embedding out(dim_, 0.0);
    for (std::size_t i = 0; i < features_; ++i) {
      const double pi = phi[i];
      if (pi == 0.0) continue;
      const double* wrow = weights_.data() + i * dim_;
      for (std::size_t j = 0; j < dim_; ++j) out[j] += pi * wrow[j];
    }
    const double noise_scale = noise_fraction_ * residual_scale_;
    if (noise_scale > 0.0) {
      std::string joined;
      for (const auto& tok : doc.tokens) {
        joined += tok;
        joined.push_back('\x1f');
      }
      Rng rng(mix_seed(mix_seed(seed_, "residual"), fnv1a64(joined)));
      for (std::size_t j = 0; j < dim_; ++j) out[j] += noise_scale * rng.normal();
    }
    return out;
  }

 private:
  void feature_vector(const Document& doc, double* out) const {
    std::vector<double> acc(features_, 0.0);
    for (const auto& tok : doc.tokens) {
      const auto& col = token_column(tok);
      for (std::size_t i = 0; i < features_; ++i) acc[i] += col[i];
    }
    for (std::size_t i = 0; i < features_; ++i) out[i] = std::tanh(acc[i]);
  }

  const std::vector<double>& token_column(const std::string& tok) const {
    auto it = columns_.find(tok);
    if (it != columns_.end()) return it->second;
    Rng rng(mix_seed(mix_seed(seed_, "feature"), fnv1a64(tok)));
    std::vector<double> col(features_);
    for (double& v : col) v = 0.15 * rng.normal();
    return columns_.emplace(tok, std::move(col)).first->second;
  }

  static void cholesky_solve(std::vector<double>& g, std::vector<double>& b, std::size_t f,
                             std::size_t cols) {
    // In-place Cholesky of g, then forward/back substitution on each column.
    for (std::size_t i = 0; i < f; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double s = g[i * f + j];
        for (std::size_t k = 0; k < j; ++k) s -= g[i * f + k] * g[j * f + k];
        if (i == j) {
          if (s <= 0.0) throw DomainError("ridge stealer: matrix not positive definite");
          g[i * f + j] = std::sqrt(s);
        } else {
          g[i * f + j] = s / g[j * f + j];
        }
      }
    }
    std::vector<double> col(f);
    for (std::size_t c = 0; c < cols; ++c) {
      for (std::size_t i = 0; i < f; ++i) col[i] = b[i * cols + c];
      for (std::size_t i = 0; i < f; ++i) {
        double s = col[i];
        for (std::size_t k = 0; k < i; ++k) s -= g[i * f + k] * col[k];
        col[i] = s / g[i * f + i];
      }
      for (std::size_t i = f; i-- > 0;) {
        double s = col[i];
        for (std::size_t k = i + 1; k < f; ++k) s -= g[k * f + i] * col[k];
        col[i] = s / g[i * f + i];
      }
      for (std::size_t i = 0; i < f; ++i) b[i * cols + c] = col[i];
    }
  }

  std::size_t features_;
  double regularization_;
  double noise_fraction_;
  std::uint64_t seed_;
  std::size_t dim_ = 0;
  double residual_scale_ = 0.0;
  std::vector<double> weights_;
  mutable std::unordered_map<std::string, std::vector<double>> columns_;
};

struct PipelineOptions {
  StealerModel stealer = StealerModel::Replay;
  bool permuted_target = false;
  std::size_t n_backdoor = 20;
  std::size_t n_benign = 100;
  std::size_t doc_length = 8;
  std::size_t ridge_features = 256;
  double ridge_regularization = 1e-3;
  // Fraction of the fit's residual scale injected into predictions as the
  // stealer model's sequence sensitivity.
  double ridge_noise = 0.35;
};

struct PipelineResult {
  VerificationReport report;
  double harm = 1.0;
  std::size_t watermarked_rows = 0;
  CseMeta cse_meta;
};

namespace detail {

struct FittedAttack {
  EmbeddingMatrix attacked;
  std::function<Embedding(const Document&, const Embedding&)> transform;
  CseMeta meta;
};

inline FittedAttack fit_attack(const Corpus& corpus, const EmbeddingMatrix& watermarked,
                               const AttackSpec& attack) {
  FittedAttack fitted;
  switch (attack.kind) {
    case AttackSpec::Kind::None: {
      fitted.attacked = watermarked;
      fitted.transform = [](const Document&, const Embedding& e) { return e; };
      break;
    }
    case AttackSpec::Kind::Cse: {
      const auto suspicious = cse_identify(watermarked, attack.cse, attack.seed);
      auto tf = fit_cse_transform(watermarked, suspicious, attack.cse);
      fitted.meta.suspicious_count = suspicious.size();
      fitted.meta.directions_removed = tf.directions.size();
      fitted.meta.explained_removed = tf.explained_removed;
      fitted.attacked = watermarked;
      for (std::size_t r = 0; r < fitted.attacked.rows; ++r) {
        if (!tf.apply_in_place(fitted.attacked.row(r))) fitted.meta.zero_rows.push_back(r);
      }
      fitted.transform = [tf = std::move(tf)](const Document&, const Embedding& e) {
        return tf.apply(e);
      };
      break;
    }
    case AttackSpec::Kind::Dropout: {
      const double rate = attack.dropout_rate;
      const std::uint64_t seed = attack.seed;
      fitted.attacked = watermarked;
      for (std::size_t r = 0; r < fitted.attacked.rows; ++r) {
        dropout_row_in_place(fitted.attacked.row(r), rate, mix_seed(seed, corpus[r].id));
      }
      fitted.transform = [rate, seed](const Document& doc, const Embedding& e) {
        Embedding out = e;
        dropout_row_in_place(out, rate, mix_seed(seed, doc.id));
        return out;
      };
      break;
    }
    case AttackSpec::Kind::Permute: {
      auto perm = random_permutation(watermarked.dim, attack.seed);
      fitted.attacked = permute_embeddings(watermarked, perm);
      fitted.transform = [perm = std::move(perm)](const Document&, const Embedding& e) {
        return permute_row(e, perm);
      };
      break;
    }
  }
  return fitted;
}

}  // namespace detail

// End-to-end pipeline: generate the world, watermark the copy set, attack it,
// stand up the stolen service, and run the defender's verification.
inline PipelineResult run_pipeline(const SyntheticConfig& cfg, const WatermarkKey& key,
                                   const AttackSpec& attack,
                                   const PipelineOptions& options = {}) {
  cfg.validate();
  key.validate();
  const std::uint64_t model_seed = mix_seed(cfg.seed, "model");
  const Corpus corpus = generate_corpus(cfg);

  const PseudoEmbedder embedder(cfg.dim, cfg.sparsity, model_seed);
  const auto victim = [&embedder](const Document& doc) { return embedder.embed(doc); };

  EmbeddingMatrix clean(corpus.size(), cfg.dim);
  EmbeddingMatrix watermarked(corpus.size(), cfg.dim);
  std::size_t watermarked_rows = 0;
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    const Embedding e_o = victim(corpus[r]);
    clean.set_row(r, e_o);
    const Embedding e_p = apply_watermark(corpus[r], e_o, key);
    if (e_p != e_o) ++watermarked_rows;
    watermarked.set_row(r, e_p);
  }

  auto fitted = detail::fit_attack(corpus, watermarked, attack);

  EmbedFn service;
  RidgeStealer ridge(options.ridge_features, options.ridge_regularization,
                     options.ridge_noise, mix_seed(cfg.seed, "ridge"));
  if (options.stealer == StealerModel::Ridge) {
    ridge.fit(corpus, fitted.attacked);
    service = [&ridge](const Document& doc) { return ridge.predict(doc); };
  } else {
    service = [&](const Document& doc) {
      return fitted.transform(doc, apply_watermark(doc, victim(doc), key));
    };
  }

  double harm_sum = 0.0;
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    auto attacked_row = fitted.attacked.row(r);
    if (norm(attacked_row) == 0.0) continue;  // collapsed rows contribute zero
    harm_sum += cosine(attacked_row, clean.row(r));
  }

  VerifyParams params;
  params.n_backdoor = options.n_backdoor;
  params.n_benign = options.n_benign;
  params.doc_length = options.doc_length;
  params.seed = mix_seed(cfg.seed, "verify");
  params.permuted_target = options.permuted_target;
  if (options.permuted_target) {
    Document target_doc;
    target_doc.id = "target0";
    target_doc.tokens = tokenize(key.target_texts.empty() ? std::string{} : key.target_texts[0]);
    if (target_doc.tokens.empty()) {
      throw ConfigError("run_pipeline: permuted-target mode needs key target text");
    }
    params.target_document = std::move(target_doc);
  }

  PipelineResult result;
  result.report = verify_service(service, key, synthetic_vocab(cfg.vocab_size), params);
  result.harm = harm_sum / static_cast<double>(corpus.size());
  result.watermarked_rows = watermarked_rows;
  result.cse_meta = std::move(fitted.meta);
  return result;
}

// Convenience wrapper that derives the key from the config.
inline PipelineResult run_method_pipeline(const SyntheticConfig& cfg, Method method, double alpha,
                                          const AttackSpec& attack,
                                          const PipelineOptions& options = {},
                                          std::size_t watermarks = 1) {
  const Corpus corpus = generate_corpus(cfg);
  const WatermarkKey key =
      make_watermark_key(corpus, cfg, method, alpha, watermarks, mix_seed(cfg.seed, "key"),
                         mix_seed(cfg.seed, "model"));
  return run_pipeline(cfg, key, attack, options);
}

struct GridCell {
  std::string method;
  std::string attack;
  double param = 0.0;
  VerificationReport report;
  double harm = 1.0;
  std::size_t suspicious = 0;
};

struct ExperimentGrid {
  std::vector<GridCell> rows;
};

struct GridOptions {
  double alpha = 0.25;
  std::size_t warden_watermarks = 5;
  StealerModel stealer = StealerModel::Ridge;
  std::size_t cse_pair_sample = 100000;
  double cse_outlier_sigma = 3.0;
};

// Cartesian product of methods x attack settings, one deterministic seed per
// cell derived from the master seed so adding cells never perturbs existing
// ones.
inline ExperimentGrid run_experiment_grid(const SyntheticConfig& base_cfg,
                                          const std::vector<Method>& methods,
                                          const std::vector<AttackSpec>& attacks,
                                          const GridOptions& options = {}) {
  ExperimentGrid grid;
  for (const Method method : methods) {
    for (const AttackSpec& attack : attacks) {
      SyntheticConfig cfg = base_cfg;
      std::uint64_t cell_seed = mix_seed(base_cfg.seed, method_name(method));
      cell_seed = mix_seed(cell_seed, attack.label());
      cell_seed = mix_seed(cell_seed, static_cast<std::uint64_t>(attack.param() * 1e6));
      cfg.seed = cell_seed;

      AttackSpec cell_attack = attack;
      cell_attack.seed = mix_seed(cell_seed, "attack");
      if (cell_attack.kind == AttackSpec::Kind::Cse) {
        cell_attack.cse.pair_sample = options.cse_pair_sample;
        cell_attack.cse.outlier_sigma = options.cse_outlier_sigma;
      }

      PipelineOptions popt;
      popt.stealer = options.stealer;

      const std::size_t watermarks = method == Method::Warden ? options.warden_watermarks : 1;
      const PipelineResult result =
          run_method_pipeline(cfg, method, options.alpha, cell_attack, popt, watermarks);

      GridCell cell;
      cell.method = method_name(method);
      cell.attack = attack.label();
      cell.param = attack.param();
      cell.report = result.report;
      cell.harm = result.harm;
      cell.suspicious = result.cse_meta.suspicious_count;
      grid.rows.push_back(std::move(cell));
    }
  }
  return grid;
}

// No-attack plus the CSE intensity ladder K = 1, 50, 100, 256, with each K
// clamped to the embedding dimension.
inline std::vector<AttackSpec> default_grid_attacks(std::size_t dim) {
  std::vector<AttackSpec> attacks;
  attacks.push_back({});  // no attack
  std::size_t previous = 0;
  for (std::size_t k : {std::size_t{1}, std::size_t{50}, std::size_t{100}, std::size_t{256}}) {
    k = std::min(k, dim);
    if (k == previous) continue;
    previous = k;
    AttackSpec a;
    a.kind = AttackSpec::Kind::Cse;
    a.cse.k = k;
    attacks.push_back(a);
  }
  return attacks;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_grid(std::ostream& out, const ExperimentGrid& grid) {
  out << "method\tattack\tparam\tp_value\tdelta_cos_pct\tdelta_l2_pct\tharm\tis_copy\n";
  for (const auto& cell : grid.rows) {
    out << cell.method << '\t' << cell.attack << '\t' << detail::format_double(cell.param)
        << '\t' << detail::format_double(cell.report.ks.p_value) << '\t'
        << detail::format_double(cell.report.delta_cos_pct) << '\t'
        << detail::format_double(cell.report.delta_l2_pct) << '\t'
        << detail::format_double(cell.harm) << '\t' << (cell.report.is_copy ? "true" : "false")
        << '\n';
  }
}

// ---------------------------------------------------------------------------
// Plot-data emission. All outputs are plain tabular text with a header row.

// Per-embedding cosine to the target with a watermarked flag.
inline void emit_cos_histogram(std::ostream& out, const EmbeddingMatrix& m,
                               const Embedding& target, const std::vector<bool>& watermarked) {
  if (watermarked.size() != m.rows) throw DomainError("cos_histogram: flag size mismatch");
  out << "id\tcos_to_target\twatermarked\n";
  for (std::size_t r = 0; r < m.rows; ++r) {
    out << r << '\t' << detail::format_double(cosine(m.row(r), target)) << '\t'
        << (watermarked[r] ? 1 : 0) << '\n';
  }
}

// Two-component PCA projection of every row.
inline void emit_pca_scatter(std::ostream& out, const EmbeddingMatrix& m,
                             const std::vector<bool>& watermarked) {
  if (watermarked.size() != m.rows) throw DomainError("pca_scatter: flag size mismatch");
  const auto pc = top_k_components(m, 2);
  Embedding col_mean(m.dim, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.dim; ++c) col_mean[c] += row[c];
  }
  for (double& v : col_mean) v /= static_cast<double>(m.rows);
  out << "id\tpc1\tpc2\twatermarked\n";
  Embedding centered(m.dim);
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.dim; ++c) centered[c] = row[c] - col_mean[c];
    double p1 = 0.0, p2 = 0.0;
    for (std::size_t c = 0; c < m.dim; ++c) {
      p1 += centered[c] * pc.components[0][c];
      p2 += centered[c] * pc.components[1][c];
    }
    out << r << '\t' << detail::format_double(p1) << '\t' << detail::format_double(p2) << '\t'
        << (watermarked[r] ? 1 : 0) << '\n';
  }
}

// Mean cosine between watermarked and clean embeddings for the three
// injection styles, each forced onto every document.
inline void emit_harmlessness_bars(std::ostream& out, const SyntheticConfig& cfg, double alpha) {
  const Corpus corpus = generate_corpus(cfg);
  const std::uint64_t model_seed = mix_seed(cfg.seed, "model");
  const WatermarkKey key = make_watermark_key(corpus, cfg, Method::Espew, alpha, 1,
                                              mix_seed(cfg.seed, "key"), model_seed);
  const Embedding& target = key.targets[0];
  const PseudoEmbedder embedder(cfg.dim, cfg.sparsity, model_seed);
  double sum_min = 0.0, sum_random = 0.0, sum_interp = 0.0;
  for (const auto& doc : corpus) {
    const Embedding e_o = embedder.embed(doc);
    sum_min += cosine(inject_espew(e_o, target, alpha), e_o);
    sum_random += cosine(
        inject_espew_random(e_o, target, alpha, mix_seed(mix_seed(cfg.seed, "randpos"), doc.id)),
        e_o);
    sum_interp += cosine(inject_embmarker(e_o, target, 4, 4), e_o);
  }
  const double n = static_cast<double>(corpus.size());
  out << "method\tmean_cos_to_clean\n";
  out << "espew_min\t" << detail::format_double(sum_min / n) << '\n';
  out << "espew_random\t" << detail::format_double(sum_random / n) << '\n';
  out << "embmarker_full\t" << detail::format_double(sum_interp / n) << '\n';
}

// Verification p-value as a function of the dropout rate.
inline void emit_dropout_curve(std::ostream& out, const SyntheticConfig& cfg, double alpha,
                               const std::vector<double>& rates) {
  out << "rate\tp_value\tdelta_cos_pct\tis_copy\n";
  for (const double rate : rates) {
    AttackSpec attack;
    attack.kind = AttackSpec::Kind::Dropout;
    attack.dropout_rate = rate;
    attack.seed = mix_seed(cfg.seed, "dropout");
    const PipelineResult result = run_method_pipeline(cfg, Method::Espew, alpha, attack);
    out << detail::format_double(rate) << '\t'
        << detail::format_double(result.report.ks.p_value) << '\t'
        << detail::format_double(result.report.delta_cos_pct) << '\t'
        << (result.report.is_copy ? "true" : "false") << '\n';
  }
}

}  // namespace espew
