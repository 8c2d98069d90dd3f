#pragma once

// File formats: the binary embedding-matrix container, the line-delimited
// corpus, and the JSON watermark-key file. The matrix format is bit-exact and
// little-endian regardless of host byte order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "espew/core.hpp"
#include "espew/inject.hpp"
#include "espew/triggers.hpp"

namespace espew {

inline constexpr char kMatrixMagic[8] = {'E', 'S', 'P', 'E', 'W', 'E', 'M', 'B'};
inline constexpr std::uint32_t kMatrixVersion = 1;

namespace detail {

inline void put_u32_le(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline void put_u64_le(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline void put_f64_le(std::ostream& out, double d) {
  std::uint64_t v = 0;
  std::memcpy(&v, &d, 8);
  if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
  char b[8];
  std::memcpy(b, &v, 8);
  out.write(b, 8);
}

inline std::uint32_t get_u32_le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("matrix file: truncated header");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::uint64_t get_u64_le(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw DataError("matrix file: truncated header");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline double get_f64_le(std::istream& in) {
  std::uint64_t v = get_u64_le(in);
  double d = 0.0;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace detail

inline void write_matrix(std::ostream& out, const EmbeddingMatrix& m) {
  out.write(kMatrixMagic, 8);
  detail::put_u32_le(out, kMatrixVersion);
  detail::put_u64_le(out, m.rows);
  detail::put_u64_le(out, m.dim);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(m.data.data()),
              static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  } else {
    for (double d : m.data) detail::put_f64_le(out, d);
  }
  if (!out) throw DataError("matrix file: write failed");
}

inline void save_matrix(const std::string& path, const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  write_matrix(out, m);
}

inline EmbeddingMatrix read_matrix(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMatrixMagic, 8) != 0) {
    throw DataError("matrix file: bad magic");
  }
  const std::uint32_t version = detail::get_u32_le(in);
  if (version != kMatrixVersion) {
    throw DataError("matrix file: unsupported version " + std::to_string(version));
  }
  const std::uint64_t rows = detail::get_u64_le(in);
  const std::uint64_t dim = detail::get_u64_le(in);
  if (dim < 2) throw DataError("matrix file: dim must be >= 2");
  EmbeddingMatrix m(rows, dim);
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    if (!in) throw DataError("matrix file: truncated data");
  } else {
    for (double& d : m.data) d = detail::get_f64_le(in);
  }
  check_finite(m.data, "matrix file");
  return m;
}

inline EmbeddingMatrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  return read_matrix(in);
}

// Corpus file: one JSON object per line with fields {"id", "text"}.
// Tokenization happens at load time.
inline Corpus load_corpus(std::istream& in) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("id") || !j.contains("text")) {
      throw DataError("corpus line " + std::to_string(line_no) + ": need id and text fields");
    }
    Document doc;
    doc.id = j.at("id").get<std::string>();
    doc.tokens = tokenize(j.at("text").get<std::string>());
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

inline Corpus load_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  return load_corpus(in);
}

inline void save_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& doc : corpus) {
    nlohmann::json j;
    j["id"] = doc.id;
    std::string text;
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
      if (i) text.push_back(' ');
      text += doc.tokens[i];
    }
    j["text"] = text;
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("corpus: write failed");
}

inline void save_corpus_file(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  save_corpus(out, corpus);
}

// Key file. Holds the defender's secret plus the pseudo-embedder parameters
// needed to stand up the simulated victim service. Never written into
// verification reports.
struct KeyFile {
  WatermarkKey key;
  std::size_t dim = 256;
  double sparsity = 0.1;
  std::uint64_t model_seed = 1;
  std::size_t vocab_size = 5000;
};

inline nlohmann::json key_to_json(const KeyFile& kf) {
  kf.key.validate();
  nlohmann::json j;
  j["schema_version"] = 1;
  j["method"] = method_name(kf.key.method);
  j["alpha"] = kf.key.alpha;
  j["max_trigger_count"] = kf.key.max_trigger_count;
  j["dim"] = kf.dim;
  j["sparsity"] = kf.sparsity;
  j["model_seed"] = kf.model_seed;
  j["vocab_size"] = kf.vocab_size;
  nlohmann::json watermarks = nlohmann::json::array();
  for (std::size_t r = 0; r < kf.key.triggers.size(); ++r) {
    nlohmann::json w;
    w["triggers"] = kf.key.triggers[r].tokens;
    w["freq_band"] = {kf.key.triggers[r].freq_band.first, kf.key.triggers[r].freq_band.second};
    w["target"] = kf.key.targets[r];
    if (r < kf.key.target_texts.size()) w["target_text"] = kf.key.target_texts[r];
    watermarks.push_back(std::move(w));
  }
  j["watermarks"] = std::move(watermarks);
  return j;
}

inline KeyFile key_from_json(const nlohmann::json& j) {
  KeyFile kf;
  try {
    kf.key.method = method_from_name(j.at("method").get<std::string>());
    kf.key.alpha = j.at("alpha").get<double>();
    kf.key.max_trigger_count = j.at("max_trigger_count").get<int>();
    kf.dim = j.at("dim").get<std::size_t>();
    kf.sparsity = j.at("sparsity").get<double>();
    kf.model_seed = j.at("model_seed").get<std::uint64_t>();
    kf.vocab_size = j.value("vocab_size", std::size_t{5000});
    for (const auto& w : j.at("watermarks")) {
      TriggerSet ts;
      ts.tokens = w.at("triggers").get<std::vector<std::string>>();
      std::sort(ts.tokens.begin(), ts.tokens.end());
      if (w.contains("freq_band")) {
        ts.freq_band = {w.at("freq_band")[0].get<double>(), w.at("freq_band")[1].get<double>()};
      }
      kf.key.triggers.push_back(std::move(ts));
      kf.key.targets.push_back(w.at("target").get<Embedding>());
      kf.key.target_texts.push_back(w.value("target_text", std::string{}));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("key file: ") + e.what());
  }
  kf.key.validate();
  return kf;
}

inline void save_key_file(const std::string& path, const KeyFile& kf) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << key_to_json(kf).dump(2) << '\n';
}

inline KeyFile load_key_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("key file: ") + e.what());
  }
  return key_from_json(j);
}

}  // namespace espew
