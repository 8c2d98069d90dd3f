#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

#include "espew/rng.hpp"
#include "espew/simulate.hpp"
#include "espew/triggers.hpp"

using namespace espew;

TEST_CASE("tokenize") {
  CHECK(tokenize("The cat, the hat!") == std::vector<std::string>{"the", "cat", "the", "hat"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("a1 b-2") == std::vector<std::string>{"a1", "b", "2"});
  CHECK(tokenize("  --  ").empty());
  CHECK(tokenize("MiXeD CaSe") == std::vector<std::string>{"mixed", "case"});
}

TEST_CASE("document frequencies") {
  Corpus corpus;
  corpus.push_back({"a", {"x", "y"}});
  corpus.push_back({"b", {"x", "x", "z"}});
  const auto freqs = document_frequencies(corpus);
  CHECK(freqs.at("x") == 1.0);
  CHECK(freqs.at("y") == 0.5);
  CHECK(freqs.at("z") == 0.5);

  Corpus four;
  for (int i = 0; i < 4; ++i) four.push_back({std::to_string(i), {"common"}});
  four[1].tokens.push_back("rare");
  CHECK(document_frequencies(four).at("rare") == 0.25);

  CHECK_THROWS_AS(document_frequencies({}), DomainError);
}

TEST_CASE("document frequencies match a naive recount on the synthetic corpus") {
  SyntheticConfig cfg;
  cfg.seed = 7;
  const Corpus corpus = generate_corpus(cfg);
  const auto freqs = document_frequencies(corpus);

  // Independent two-pass recount over a sample of tokens.
  Rng rng(1);
  std::vector<std::string> sample;
  for (int i = 0; i < 50; ++i) {
    const auto& doc = corpus[rng.below(corpus.size())];
    sample.push_back(doc.tokens[rng.below(doc.tokens.size())]);
  }
  for (const auto& token : sample) {
    std::size_t count = 0;
    for (const auto& doc : corpus) {
      for (const auto& tok : doc.tokens) {
        if (tok == token) {
          ++count;
          break;
        }
      }
    }
    CHECK(freqs.at(token) == static_cast<double>(count) / static_cast<double>(corpus.size()));
  }
}

TEST_CASE("select_triggers") {
  std::unordered_map<std::string, double> freqs{
      {"aa", 0.2}, {"bb", 0.4}, {"cc", 0.6}, {"dd", 0.8}, {"ee", 1.0}};

  // Band covering everything, n = all tokens: the entire vocabulary.
  const auto all = select_triggers(freqs, {0.0, 1.0}, 5, 9);
  CHECK(all.tokens == std::vector<std::string>{"aa", "bb", "cc", "dd", "ee"});

  // Band excluding every token.
  CHECK_THROWS_AS(select_triggers(freqs, {0.01, 0.05}, 1, 9), CapacityError);
  try {
    select_triggers(freqs, {0.3, 0.7}, 3, 9);
  } catch (const CapacityError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }

  // Deterministic given the seed.
  const auto a = select_triggers(freqs, {0.0, 1.0}, 3, 42);
  const auto b = select_triggers(freqs, {0.0, 1.0}, 3, 42);
  CHECK(a.tokens == b.tokens);
}

TEST_CASE("selected triggers verified in band by recount") {
  SyntheticConfig cfg;
  cfg.seed = 7;
  const Corpus corpus = generate_corpus(cfg);
  const auto freqs = document_frequencies(corpus);
  const auto ts = select_triggers(freqs, kDefaultTriggerBand, 20, 7);
  REQUIRE(ts.tokens.size() == 20);
  for (const auto& token : ts.tokens) {
    std::size_t count = 0;
    for (const auto& doc : corpus) {
      for (const auto& tok : doc.tokens) {
        if (tok == token) {
          ++count;
          break;
        }
      }
    }
    const double df = static_cast<double>(count) / static_cast<double>(corpus.size());
    CHECK(df >= kDefaultTriggerBand.first);
    CHECK(df <= kDefaultTriggerBand.second);
  }
}

TEST_CASE("count_triggers") {
  TriggerSet ts;
  ts.tokens = {"t1", "t2"};

  CHECK(count_triggers({"d", {"x", "y"}}, ts) == 0);
  CHECK(count_triggers({"d", {"t1", "t1", "x"}}, ts) == 2);

  Rng rng(17);
  std::vector<std::string> vocab{"t1", "t2", "x", "y", "z"};
  for (int trial = 0; trial < 1000; ++trial) {
    Document doc;
    doc.id = "d";
    const std::size_t len = rng.below(12);
    for (std::size_t i = 0; i < len; ++i) doc.tokens.push_back(vocab[rng.below(vocab.size())]);
    std::size_t naive = 0;
    for (const auto& tok : doc.tokens) {
      for (const auto& trig : ts.tokens) {
        if (tok == trig) ++naive;
      }
    }
    CHECK(count_triggers(doc, ts) == naive);
    CHECK(count_triggers(doc, ts) <= doc.tokens.size());
  }
}
