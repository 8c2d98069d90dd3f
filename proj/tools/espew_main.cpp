// Command-line surface for the embedding-watermarking toolkit: trigger/key
// construction, corpus injection, verification, attacks on matrix files, the
// experiment grid, plot-data emission, and the embedding-service endpoint.

#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "espew/espew.hpp"

namespace {

using namespace espew;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitCopyDetected = 4;

std::pair<double, double> parse_band(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ConfigError("band must be lo,hi");
  try {
    const double lo = std::stod(text.substr(0, comma));
    const double hi = std::stod(text.substr(comma + 1));
    if (lo < 0.0 || hi > 1.0 || lo > hi) throw ConfigError("band must satisfy 0 <= lo <= hi <= 1");
    return {lo, hi};
  } catch (const std::invalid_argument&) {
    throw ConfigError("band must be lo,hi with numeric bounds");
  }
}

std::string format_embedding_json(const Embedding& e) {
  // 17 significant digits round-trips every 64-bit float exactly.
  std::string out = "[";
  char buf[64];
  for (std::size_t i = 0; i < e.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", e[i]);
    if (i) out.push_back(',');
    out += buf;
  }
  out.push_back(']');
  return out;
}

std::string corpus_vocab_text(const Document& doc) {
  std::string text;
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    if (i) text.push_back(' ');
    text += doc.tokens[i];
  }
  return text;
}

// ---------------------------------------------------------------------------
// corpus: write a synthetic corpus file.

struct CorpusArgs {
  std::string out_path;
  std::uint64_t seed = 1;
  SyntheticConfig synth;
};

int run_corpus(const CorpusArgs& args) {
  SyntheticConfig cfg = args.synth;
  cfg.seed = args.seed;
  const Corpus corpus = generate_corpus(cfg);
  save_corpus_file(args.out_path, corpus);
  std::printf("wrote %zu documents to %s\n", corpus.size(), args.out_path.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// triggers: select trigger sets from a corpus and write a full key file.

struct TriggersArgs {
  std::string corpus_path;
  std::string out_path;
  std::string band_text = "0.005,0.01";
  std::size_t n = kDefaultTriggerCount;
  std::uint64_t seed = 1;
  std::string method = "espew";
  double alpha = 0.25;
  int max_triggers = 4;
  std::size_t watermarks = 1;
  std::size_t dim = 256;
  double sparsity = 0.1;
  std::uint64_t model_seed = 1;
  std::size_t target_len = 16;
};

int run_triggers(const TriggersArgs& args) {
  const Corpus corpus = load_corpus_file(args.corpus_path);
  if (corpus.empty()) throw DataError("corpus is empty");
  const auto band = parse_band(args.band_text);
  auto freqs = document_frequencies(corpus);

  KeyFile kf;
  kf.key.method = method_from_name(args.method);
  kf.key.alpha = args.alpha;
  kf.key.max_trigger_count = args.max_triggers;
  kf.dim = args.dim;
  kf.sparsity = args.sparsity;
  kf.model_seed = args.model_seed;

  const std::size_t watermarks = kf.key.method == Method::Warden ? args.watermarks : 1;
  for (std::size_t r = 0; r < watermarks; ++r) {
    TriggerSet ts = select_triggers(freqs, band, args.n, mix_seed(args.seed, r));
    for (const auto& tok : ts.tokens) freqs.erase(tok);
    kf.key.triggers.push_back(std::move(ts));
  }

  // Target samples come from the corpus vocabulary outside every trigger set.
  std::vector<std::string> vocab;
  for (const auto& [tok, f] : document_frequencies(corpus)) {
    (void)f;
    vocab.push_back(tok);
  }
  std::sort(vocab.begin(), vocab.end());
  kf.vocab_size = vocab.size();
  std::vector<std::string> benign;
  for (const auto& tok : vocab) {
    bool trig = false;
    for (const auto& ts : kf.key.triggers) {
      if (ts.contains(tok)) {
        trig = true;
        break;
      }
    }
    if (!trig) benign.push_back(tok);
  }
  if (benign.size() < args.target_len) {
    throw CapacityError("not enough non-trigger vocabulary for a target sample");
  }
  for (std::size_t r = 0; r < watermarks; ++r) {
    Rng rng(mix_seed(mix_seed(args.seed, "target"), r));
    Document target_doc;
    target_doc.id = "target" + std::to_string(r);
    for (std::size_t t = 0; t < args.target_len; ++t) {
      target_doc.tokens.push_back(benign[rng.below(benign.size())]);
    }
    kf.key.targets.push_back(
        pseudo_embed(target_doc, args.dim, args.sparsity, args.model_seed));
    kf.key.target_texts.push_back(corpus_vocab_text(target_doc));
  }
  save_key_file(args.out_path, kf);
  std::printf("wrote key with %zu watermark(s), %zu trigger tokens each, to %s\n", watermarks,
              args.n, args.out_path.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// inject: embed a corpus with the simulated victim and watermark it.

struct InjectArgs {
  std::string key_path;
  std::string corpus_path;
  std::string out_path;
  std::string clean_out_path;
  std::string method_override;
  double alpha_override = -1.0;
};

int run_inject(const InjectArgs& args) {
  KeyFile kf = load_key_file(args.key_path);
  if (!args.method_override.empty()) kf.key.method = method_from_name(args.method_override);
  if (args.alpha_override >= 0.0) kf.key.alpha = args.alpha_override;
  kf.key.validate();

  const Corpus corpus = load_corpus_file(args.corpus_path);
  if (corpus.empty()) throw DataError("corpus is empty");
  EmbeddingMatrix clean(corpus.size(), kf.dim);
  EmbeddingMatrix marked(corpus.size(), kf.dim);
  std::size_t touched = 0;
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    if (corpus[r].tokens.empty()) {
      throw DataError("document " + corpus[r].id + " is empty after tokenization");
    }
    const Embedding e_o = pseudo_embed(corpus[r], kf.dim, kf.sparsity, kf.model_seed);
    const Embedding e_p = apply_watermark(corpus[r], e_o, kf.key);
    if (e_p != e_o) ++touched;
    clean.set_row(r, e_o);
    marked.set_row(r, e_p);
  }
  save_matrix(args.out_path, marked);
  if (!args.clean_out_path.empty()) save_matrix(args.clean_out_path, clean);
  std::printf("injected %s into %zu/%zu embeddings, wrote %s\n", method_name(kf.key.method),
              touched, corpus.size(), args.out_path.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify: run the verification protocol against an inline victim or a URL.

struct VerifyArgs {
  std::string service = "inline";
  std::string key_path;
  std::string report_path;
  std::size_t n_backdoor = 20;
  std::size_t n_benign = 100;
  std::size_t length = 8;
  std::uint64_t seed = 1;
  bool permuted_target = false;
  bool expect_clean = false;
  bool clean_baseline = false;
};

EmbedFn make_url_embed_fn(const std::string& url, std::size_t expected_dim) {
  auto client = std::make_shared<httplib::Client>(url);
  client->set_read_timeout(30, 0);
  return [client, expected_dim](const Document& doc) {
    nlohmann::json body;
    body["text"] = corpus_vocab_text(doc);
    const auto res = client->Post("/embed", body.dump(), "application/json");
    if (!res || res->status != 200) {
      throw DataError("embed request failed" +
                      (res ? (": status " + std::to_string(res->status)) : ""));
    }
    const auto j = nlohmann::json::parse(res->body);
    auto e = j.at("embedding").get<Embedding>();
    if (expected_dim != 0 && e.size() != expected_dim) {
      throw DataError("service returned wrong embedding dimension");
    }
    return e;
  };
}

int run_verify(const VerifyArgs& args) {
  const KeyFile kf = load_key_file(args.key_path);
  EmbedFn embed_fn;
  if (args.service == "inline") {
    embed_fn = [kf, clean = args.clean_baseline](const Document& doc) {
      const Embedding e_o = pseudo_embed(doc, kf.dim, kf.sparsity, kf.model_seed);
      return clean ? e_o : apply_watermark(doc, e_o, kf.key);
    };
  } else {
    embed_fn = make_url_embed_fn(args.service, kf.dim);
  }

  VerifyParams params;
  params.n_backdoor = args.n_backdoor;
  params.n_benign = args.n_benign;
  params.doc_length = args.length;
  params.seed = args.seed;
  params.permuted_target = args.permuted_target;
  if (args.permuted_target) {
    if (kf.key.target_texts.empty() || kf.key.target_texts[0].empty()) {
      throw ConfigError("permuted-target mode needs target_text in the key file");
    }
    Document target_doc;
    target_doc.id = "target0";
    target_doc.tokens = tokenize(kf.key.target_texts[0]);
    params.target_document = std::move(target_doc);
  }

  const auto report =
      verify_service(embed_fn, kf.key, synthetic_vocab(kf.vocab_size), params);

  ReportConfig echo;
  echo.method = method_name(kf.key.method);
  echo.alpha = kf.key.alpha;
  echo.seed = args.seed;
  echo.n_backdoor = args.n_backdoor;
  echo.n_benign = args.n_benign;
  echo.doc_length = args.length;
  const auto j = report_to_json(report, echo);
  if (!args.report_path.empty()) {
    std::ofstream out(args.report_path, std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + args.report_path);
    out << j.dump(2) << '\n';
  }
  std::printf("p_value=%.6e delta_cos_pct=%.4f delta_l2_pct=%.4f is_copy=%s\n",
              report.ks.p_value, report.delta_cos_pct, report.delta_l2_pct,
              report.is_copy ? "true" : "false");
  if (args.expect_clean && report.is_copy) {
    std::fprintf(stderr, "verification flagged a copy on a run marked --expect-clean\n");
    return kExitCopyDetected;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// attack: transform a matrix file.

struct AttackArgs {
  std::string kind;
  std::string in_path;
  std::string out_path;
  std::size_t k = 50;
  std::size_t pair_sample = 5000;
  double sigma = 3.0;
  bool no_renormalize = false;
  double rate = 0.3;
  std::uint64_t seed = 1;
};

int run_attack(const AttackArgs& args) {
  const EmbeddingMatrix m = load_matrix(args.in_path);
  EmbeddingMatrix out;
  if (args.kind == "cse") {
    CseConfig cfg;
    cfg.k = args.k;
    cfg.pair_sample = args.pair_sample;
    cfg.outlier_sigma = args.sigma;
    cfg.renormalize = !args.no_renormalize;
    CseMeta meta;
    out = cse(m, cfg, args.seed, &meta);
    std::printf("cse: %zu suspicious rows, %zu directions removed, %zu rows zeroed\n",
                meta.suspicious_count, meta.directions_removed, meta.zero_rows.size());
  } else if (args.kind == "dropout") {
    out = dropout_attack(m, args.rate, args.seed);
  } else if (args.kind == "permute") {
    out = permute_embeddings(m, random_permutation(m.dim, args.seed));
  } else {
    throw ConfigError("unknown attack kind: " + args.kind);
  }
  save_matrix(args.out_path, out);
  std::printf("wrote %s\n", args.out_path.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// experiment: the method x attack grid.

struct ExperimentArgs {
  std::string grid = "default";
  std::string out_dir;
  std::uint64_t seed = 42;
  std::string stealer = "ridge";
  std::size_t pair_sample = 100000;
  double alpha = 0.25;
  // The grid runs at dim 512 so that even the largest K in the ladder stays
  // well below the embedding dimension.
  ExperimentArgs() { synth.dim = 512; }
  SyntheticConfig synth;
};

int run_experiment(const ExperimentArgs& args) {
  if (args.grid != "default") throw ConfigError("unknown grid: " + args.grid);
  SyntheticConfig cfg = args.synth;
  cfg.seed = args.seed;
  cfg.validate();

  GridOptions gopt;
  gopt.alpha = args.alpha;
  gopt.stealer = stealer_from_name(args.stealer);
  gopt.cse_pair_sample = args.pair_sample;

  const std::vector<Method> methods{Method::None, Method::EmbMarker, Method::Warden,
                                    Method::Espew};
  const auto grid = run_experiment_grid(cfg, methods, default_grid_attacks(cfg.dim), gopt);

  std::filesystem::create_directories(args.out_dir);
  const auto grid_path = std::filesystem::path(args.out_dir) / "grid.tsv";
  std::ofstream out(grid_path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + grid_path.string());
  write_grid(out, grid);

  nlohmann::json echo;
  echo["schema_version"] = 1;
  echo["seed"] = args.seed;
  echo["alpha"] = args.alpha;
  echo["stealer"] = args.stealer;
  echo["pair_sample"] = args.pair_sample;
  echo["dim"] = cfg.dim;
  echo["corpus_size"] = cfg.corpus_size;
  echo["vocab_size"] = cfg.vocab_size;
  echo["sparsity"] = cfg.sparsity;
  const auto config_path = std::filesystem::path(args.out_dir) / "config.json";
  std::ofstream cfg_out(config_path, std::ios::trunc);
  cfg_out << echo.dump(2) << '\n';

  std::printf("wrote %s (%zu rows)\n", grid_path.string().c_str(), grid.rows.size());
  for (const auto& cell : grid.rows) {
    std::printf("  %-10s %-8s %-6g p=%.3e copy=%s\n", cell.method.c_str(), cell.attack.c_str(),
                cell.param, cell.report.ks.p_value, cell.report.is_copy ? "yes" : "no");
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// plot: tabular data for the figures.

struct PlotArgs {
  std::string kind;
  std::string out_path;
  std::string in_path;
  std::string clean_path;
  std::string key_path;
  double alpha = 0.25;
  std::string rates_text = "0.1,0.3,0.5,0.8";
  SyntheticConfig synth;
  std::uint64_t seed = 42;
};

std::vector<bool> watermark_flags(const EmbeddingMatrix& marked, const EmbeddingMatrix& clean) {
  if (clean.rows != marked.rows || clean.dim != marked.dim) {
    throw DataError("clean matrix shape does not match input matrix");
  }
  std::vector<bool> flags(marked.rows, false);
  for (std::size_t r = 0; r < marked.rows; ++r) {
    auto a = marked.row(r);
    auto b = clean.row(r);
    for (std::size_t i = 0; i < marked.dim; ++i) {
      if (a[i] != b[i]) {
        flags[r] = true;
        break;
      }
    }
  }
  return flags;
}

int run_plot(const PlotArgs& args) {
  std::ofstream out(args.out_path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + args.out_path);

  if (args.kind == "cos_histogram" || args.kind == "pca_scatter") {
    if (args.in_path.empty()) throw ConfigError(args.kind + " needs --in");
    const EmbeddingMatrix m = load_matrix(args.in_path);
    std::vector<bool> flags(m.rows, false);
    if (!args.clean_path.empty()) flags = watermark_flags(m, load_matrix(args.clean_path));
    if (args.kind == "cos_histogram") {
      if (args.key_path.empty()) throw ConfigError("cos_histogram needs --key for the target");
      const KeyFile kf = load_key_file(args.key_path);
      emit_cos_histogram(out, m, kf.key.targets[0], flags);
    } else {
      emit_pca_scatter(out, m, flags);
    }
  } else if (args.kind == "harmlessness_bars") {
    SyntheticConfig cfg = args.synth;
    cfg.seed = args.seed;
    emit_harmlessness_bars(out, cfg, args.alpha);
  } else if (args.kind == "dropout_curve") {
    SyntheticConfig cfg = args.synth;
    cfg.seed = args.seed;
    std::vector<double> rates;
    std::string piece;
    std::istringstream stream(args.rates_text);
    while (std::getline(stream, piece, ',')) rates.push_back(std::stod(piece));
    emit_dropout_curve(out, cfg, args.alpha, rates);
  } else {
    throw ConfigError("unknown plot kind: " + args.kind);
  }
  std::printf("wrote %s\n", args.out_path.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// serve: the embedding-service endpoint.

struct ServeArgs {
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string key_path;
};

int run_serve(const ServeArgs& args) {
  const KeyFile kf = load_key_file(args.key_path);
  httplib::Server server;

  server.Get("/health", [&kf](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"status\":\"ok\",\"dim\":" + std::to_string(kf.dim) + "}",
                    "application/json");
  });

  server.Post("/embed", [&kf](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      res.status = 400;
      res.set_content("{\"error\":\"malformed body\"}", "application/json");
      return;
    }
    if (!body.contains("text") || !body.at("text").is_string()) {
      res.status = 400;
      res.set_content("{\"error\":\"missing text field\"}", "application/json");
      return;
    }
    Document doc;
    doc.tokens = tokenize(body.at("text").get<std::string>());
    if (doc.tokens.empty()) {
      res.status = 400;
      res.set_content("{\"error\":\"empty after tokenization\"}", "application/json");
      return;
    }
    const Embedding e_o = pseudo_embed(doc, kf.dim, kf.sparsity, kf.model_seed);
    const Embedding e_p = apply_watermark(doc, e_o, kf.key);
    res.set_content("{\"embedding\":" + format_embedding_json(e_p) + "}", "application/json");
  });

  std::printf("serving on %s:%d (dim %zu, method %s)\n", args.host.c_str(), args.port, kf.dim,
              method_name(kf.key.method));
  if (!server.listen(args.host, args.port)) {
    throw ConfigError("cannot listen on " + args.host + ":" + std::to_string(args.port));
  }
  return kExitOk;
}

void add_synthetic_flags(CLI::App* cmd, SyntheticConfig& synth) {
  cmd->add_option("--vocab-size", synth.vocab_size, "synthetic vocabulary size");
  cmd->add_option("--corpus-size", synth.corpus_size, "synthetic corpus size");
  cmd->add_option("--doc-len-min", synth.doc_len_min, "minimum document length");
  cmd->add_option("--doc-len-max", synth.doc_len_max, "maximum document length");
  cmd->add_option("--zipf-s", synth.zipf_s, "Zipf exponent");
  cmd->add_option("--dim", synth.dim, "embedding dimension");
  cmd->add_option("--sparsity", synth.sparsity, "token vector sparsity");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"embedding watermarking toolkit"};
  app.require_subcommand(1);

  CorpusArgs corpus_args;
  auto* corpus_cmd = app.add_subcommand("corpus", "write a synthetic corpus file");
  corpus_cmd->add_option("--out", corpus_args.out_path, "corpus file to write")->required();
  corpus_cmd->add_option("--seed", corpus_args.seed, "corpus seed");
  add_synthetic_flags(corpus_cmd, corpus_args.synth);

  TriggersArgs triggers_args;
  auto* triggers_cmd = app.add_subcommand("triggers", "select triggers and build a key file");
  triggers_cmd->add_option("--corpus", triggers_args.corpus_path, "corpus file (jsonl)")
      ->required();
  triggers_cmd->add_option("--band", triggers_args.band_text, "document-frequency band lo,hi");
  triggers_cmd->add_option("--n", triggers_args.n, "trigger tokens per set");
  triggers_cmd->add_option("--seed", triggers_args.seed, "selection seed");
  triggers_cmd->add_option("--out", triggers_args.out_path, "key file to write")->required();
  triggers_cmd->add_option("--method", triggers_args.method, "espew|embmarker|warden|none");
  triggers_cmd->add_option("--alpha", triggers_args.alpha, "watermark proportion");
  triggers_cmd->add_option("--m", triggers_args.max_triggers, "max trigger count");
  triggers_cmd->add_option("--watermarks", triggers_args.watermarks, "warden watermark count");
  triggers_cmd->add_option("--dim", triggers_args.dim, "embedding dimension");
  triggers_cmd->add_option("--sparsity", triggers_args.sparsity, "token vector sparsity");
  triggers_cmd->add_option("--model-seed", triggers_args.model_seed, "victim model seed");
  triggers_cmd->add_option("--target-len", triggers_args.target_len, "target sample length");

  InjectArgs inject_args;
  auto* inject_cmd = app.add_subcommand("inject", "watermark a corpus into a matrix file");
  inject_cmd->add_option("--key", inject_args.key_path, "key file")->required();
  inject_cmd->add_option("--corpus", inject_args.corpus_path, "corpus file (jsonl)")->required();
  inject_cmd->add_option("--out", inject_args.out_path, "matrix file to write")->required();
  inject_cmd->add_option("--clean-out", inject_args.clean_out_path,
                         "also write the unwatermarked matrix");
  inject_cmd->add_option("--method", inject_args.method_override, "override key method");
  inject_cmd->add_option("--alpha", inject_args.alpha_override, "override key alpha");

  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand("verify", "run the verification protocol");
  verify_cmd->add_option("--service", verify_args.service, "inline or service base URL");
  verify_cmd->add_option("--key", verify_args.key_path, "key file")->required();
  verify_cmd->add_option("--nb", verify_args.n_backdoor, "backdoor set size");
  verify_cmd->add_option("--nn", verify_args.n_benign, "benign set size");
  verify_cmd->add_option("--len", verify_args.length, "verification document length");
  verify_cmd->add_option("--seed", verify_args.seed, "verification seed");
  verify_cmd->add_option("--report", verify_args.report_path, "report file to write");
  verify_cmd->add_flag("--permuted-target", verify_args.permuted_target,
                       "fetch the target through the service (permutation persistence)");
  verify_cmd->add_flag("--expect-clean", verify_args.expect_clean,
                       "exit 4 if verification flags a copy");
  verify_cmd->add_flag("--clean-baseline", verify_args.clean_baseline,
                       "inline service without watermarking");

  AttackArgs attack_args;
  auto* attack_cmd = app.add_subcommand("attack", "apply a removal attack to a matrix file");
  attack_cmd->add_option("--kind", attack_args.kind, "cse|dropout|permute")->required();
  attack_cmd->add_option("--in", attack_args.in_path, "input matrix")->required();
  attack_cmd->add_option("--out", attack_args.out_path, "output matrix")->required();
  attack_cmd->add_option("--k", attack_args.k, "cse: components to eliminate");
  attack_cmd->add_option("--pair-sample", attack_args.pair_sample, "cse: sampled pairs");
  attack_cmd->add_option("--sigma", attack_args.sigma, "cse: outlier threshold in sigmas");
  attack_cmd->add_flag("--no-renormalize", attack_args.no_renormalize,
                       "cse: keep raw lengths after elimination");
  attack_cmd->add_option("--rate", attack_args.rate, "dropout rate");
  attack_cmd->add_option("--seed", attack_args.seed, "attack seed");

  ExperimentArgs experiment_args;
  auto* experiment_cmd = app.add_subcommand("experiment", "run the method x attack grid");
  experiment_cmd->add_option("--grid", experiment_args.grid, "grid name (default)");
  experiment_cmd->add_option("--seed", experiment_args.seed, "master seed");
  experiment_cmd->add_option("--out", experiment_args.out_dir, "output directory")->required();
  experiment_cmd->add_option("--stealer", experiment_args.stealer,
                             "stealer model: ridge|replay");
  experiment_cmd->add_option("--pair-sample", experiment_args.pair_sample,
                             "cse identification pairs");
  experiment_cmd->add_option("--alpha", experiment_args.alpha, "watermark proportion");
  add_synthetic_flags(experiment_cmd, experiment_args.synth);

  PlotArgs plot_args;
  auto* plot_cmd = app.add_subcommand("plot", "emit tabular plot data");
  plot_cmd
      ->add_option("--kind", plot_args.kind,
                   "cos_histogram|pca_scatter|harmlessness_bars|dropout_curve")
      ->required();
  plot_cmd->add_option("--out", plot_args.out_path, "output file")->required();
  plot_cmd->add_option("--in", plot_args.in_path, "input matrix");
  plot_cmd->add_option("--clean", plot_args.clean_path, "clean matrix for watermark flags");
  plot_cmd->add_option("--key", plot_args.key_path, "key file (target source)");
  plot_cmd->add_option("--alpha", plot_args.alpha, "watermark proportion");
  plot_cmd->add_option("--rates", plot_args.rates_text, "dropout rates, comma separated");
  plot_cmd->add_option("--seed", plot_args.seed, "synthetic seed");
  add_synthetic_flags(plot_cmd, plot_args.synth);

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "run the embedding service");
  serve_cmd->add_option("--port", serve_args.port, "port");
  serve_cmd->add_option("--host", serve_args.host, "bind host");
  serve_cmd->add_option("--key", serve_args.key_path, "key file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*corpus_cmd) return run_corpus(corpus_args);
    if (*triggers_cmd) return run_triggers(triggers_args);
    if (*inject_cmd) return run_inject(inject_args);
    if (*verify_cmd) return run_verify(verify_args);
    if (*attack_cmd) return run_attack(attack_args);
    if (*experiment_cmd) return run_experiment(experiment_args);
    if (*plot_cmd) return run_plot(plot_args);
    if (*serve_cmd) return run_serve(serve_args);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitConfig;
}
