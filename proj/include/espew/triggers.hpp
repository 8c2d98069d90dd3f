#pragma once

// Tokenization, corpus document-frequency analysis, and selection of the
// moderate-frequency trigger tokens that activate watermark injection.

#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "espew/core.hpp"
#include "espew/rng.hpp"

namespace espew {

struct TriggerSet {
  // Distinct lowercase tokens, kept sorted.
  std::vector<std::string> tokens;
  std::pair<double, double> freq_band{0.0, 1.0};

  bool contains(const std::string& t) const {
    return std::binary_search(tokens.begin(), tokens.end(), t);
  }
  std::size_t size() const { return tokens.size(); }
};

// Lowercases and splits on maximal runs of non-alphanumeric characters.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      cur.push_back(static_cast<char>(c));
    } else if (c >= 'A' && c <= 'Z') {
      cur.push_back(static_cast<char>(c - 'A' + 'a'));
    } else {
      if (!cur.empty()) {
        out.push_back(std::move(cur));
        cur.clear();
      }
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Fraction of documents containing each token at least once.
inline std::unordered_map<std::string, double> document_frequencies(const Corpus& corpus) {
  if (corpus.empty()) throw DomainError("document_frequencies: empty corpus");
  std::unordered_map<std::string, std::size_t> counts;
  std::unordered_set<std::string> seen;
  for (const auto& doc : corpus) {
    seen.clear();
    for (const auto& tok : doc.tokens) {
      if (seen.insert(tok).second) ++counts[tok];
    }
  }
  std::unordered_map<std::string, double> freqs;
  freqs.reserve(counts.size());
  const double n = static_cast<double>(corpus.size());
  for (const auto& [tok, c] : counts) freqs.emplace(tok, static_cast<double>(c) / n);
  return freqs;
}

// Seeded sample of n tokens whose document frequency lies in [lo, hi].
// Eligible tokens are sorted lexicographically before sampling so the result
// depends only on (freqs, band, n, seed), not on map iteration order.
inline TriggerSet select_triggers(const std::unordered_map<std::string, double>& freqs,
                                  std::pair<double, double> band, std::size_t n,
                                  std::uint64_t seed) {
  std::vector<std::string> eligible;
  for (const auto& [tok, f] : freqs) {
    if (f >= band.first && f <= band.second) eligible.push_back(tok);
  }
  if (eligible.size() < n) {
    throw CapacityError("select_triggers: only " + std::to_string(eligible.size()) +
                        " tokens in band, need " + std::to_string(n));
  }
  std::sort(eligible.begin(), eligible.end());
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(eligible.size() - i));
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(n);
  std::sort(eligible.begin(), eligible.end());
  TriggerSet ts;
  ts.tokens = std::move(eligible);
  ts.freq_band = band;
  return ts;
}

// Number of token positions (occurrences, not distinct types) that are triggers.
inline std::size_t count_triggers(const Document& doc, const TriggerSet& triggers) {
  std::size_t count = 0;
  for (const auto& tok : doc.tokens) {
    if (triggers.contains(tok)) ++count;
  }
  return count;
}

}  // namespace espew
