// tmq: membership-query synthesis from the command line.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tmq/embeddings.hpp"
#include "tmq/errors.hpp"
#include "tmq/experiments.hpp"
#include "tmq/learner.hpp"
#include "tmq/oracle.hpp"
#include "tmq/service.hpp"
#include "tmq/synthesis.hpp"

#ifndef TMQ_DATA_DIR
#define TMQ_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace tmq;

namespace {

struct Paths {
  std::string embeddings = TMQ_DATA_DIR "/embeddings.txt";
  std::string pos_lexicon = TMQ_DATA_DIR "/pos_lexicon.tsv";
  std::string suffix_rules = TMQ_DATA_DIR "/suffix_rules.tsv";
  std::string synonyms = TMQ_DATA_DIR "/synonyms.tsv";
  std::string dataset = TMQ_DATA_DIR "/polarity.csv";
};

struct Loaded {
  EmbeddingTable table;
  PosLexicon lexicon;
  std::optional<SynonymLexicon> synonyms;

  Resources resources() const { return {table, lexicon, synonyms ? &*synonyms : nullptr}; }
};

Loaded load(const Paths& p, bool with_synonyms) {
  Loaded l{load_embeddings(p.embeddings),
           load_pos_lexicon(p.pos_lexicon, p.suffix_rules.empty() ? std::nullopt
                                                                  : std::optional<fs::path>(p.suffix_rules)),
           std::nullopt};
  if (with_synonyms && !p.synonyms.empty()) l.synonyms = load_synonyms(p.synonyms);
  return l;
}

void add_resource_flags(CLI::App* cmd, Paths& p) {
  cmd->add_option("--embeddings", p.embeddings, "word vectors, one `word v1 .. vd` per line")
      ->envname("TMQ_EMBEDDINGS");
  cmd->add_option("--pos-lexicon", p.pos_lexicon, "word<TAB>tag:freq lexicon")->envname("TMQ_POS_LEXICON");
  cmd->add_option("--suffix-rules", p.suffix_rules, "suffix<TAB>tag fallback rules (empty to disable)");
}

void add_al_flags(CLI::App* cmd, AlConfig& c) {
  cmd->add_option("--pool-size", c.pool_size, "P, candidates per step")->capture_default_str();
  cmd->add_option("--batch-size", c.batch_size, "m, instances labeled per step")->capture_default_str();
  cmd->add_option("--core-size", c.core_size, "labeled core set size")->capture_default_str();
  cmd->add_option("--k", c.synthesis.k_neighbors, "semantic neighborhood size")->capture_default_str();
  cmd->add_option("--depth-min", c.synthesis.depth_min, "minimum search depth")->capture_default_str();
  cmd->add_option("--depth-max", c.synthesis.depth_max, "maximum search depth")->capture_default_str();
  cmd->add_option("--beam-width", c.synthesis.beam_width, "beam width for US-BS-MQ")->capture_default_str();
  cmd->add_option("--max-retries", c.synthesis.max_retries, "duplicate retries before a stochastic step")
      ->capture_default_str();
  cmd->add_option("--seed", c.seed, "base seed; repetition r uses seed + r")->capture_default_str();
  cmd->add_option("--test-fraction", c.test_fraction, "held-out share of the dataset")->capture_default_str();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  return out;
}

template <class Enum, class Parse>
std::vector<Enum> parse_methods(const std::vector<std::string>& names, Parse parse) {
  std::vector<Enum> out;
  for (const auto& n : names) {
    auto m = parse(n);
    if (!m) throw InvalidArgument("unknown method '" + n + "'");
    out.push_back(*m);
  }
  return out;
}

int cmd_neighbors(const Paths& paths, const std::vector<std::string>& words, std::size_t k) {
  const auto table = load_embeddings(paths.embeddings);
  for (const auto& w : words) {
    const auto& hood = table.nearest(normalize_word(w), k);
    std::cout << hood.query << ":";
    for (const auto& n : hood.neighbors) std::printf(" %s(%.4f)", n.word.c_str(), n.distance);
    std::cout << "\n";
  }
  return 0;
}

int cmd_synth(const Paths& paths, const AlConfig& cfg, const std::string& method_name, std::size_t count,
              const std::string& core_path, const std::string& out_path) {
  const Loaded l = load(paths, false);
  const Resources res = l.resources();
  const auto method = parse_method(method_name);
  if (!method) throw InvalidArgument("unknown synthesis method '" + method_name + "'");

  std::vector<SentenceInstance> core;
  if (!core_path.empty()) {
    std::ifstream in(core_path);
    if (!in) throw Error("cannot read " + core_path);
    const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto rows = parse_labeled_csv(content, core_path);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      core.push_back(make_instance(rows[i].text, l.lexicon, "c" + std::to_string(i + 1), rows[i].label));
    }
  } else {
    const Dataset ds = load_dataset(paths.dataset, cfg.seed, cfg.test_fraction);
    core = core_instances(ds, cfg.core_size, cfg.seed, l.lexicon);
  }
  if (core.empty()) throw InvalidArgument("core set is empty");

  std::vector<LabeledExample> train_set;
  for (const auto& s : core) train_set.push_back({featurize(s, l.table), *s.provenance.root_label});
  const LinearModel model = train(train_set, cfg.training);
  const Heuristic h = [&](const SentenceInstance& s) { return uncertainty(model, s, l.table); };

  SynthesisConfig sc = cfg.synthesis;
  sc.count = count;
  sc.method = *method;
  sc.seed = cfg.seed;
  Rng rng(cfg.seed);
  IdGenerator ids("mq");
  const auto generated = synthesize(core, sc, h, embedding_operators(sc.k_neighbors, l.table, l.lexicon), rng, ids);

  std::vector<MembershipQuery> queries;
  for (const auto& g : generated) queries.push_back(to_query(g, h(g)));
  if (out_path.empty() || out_path == "-") {
    write_jsonl(std::cout, queries);
  } else {
    auto out = open_out(out_path);
    write_jsonl(out, queries);
  }
  return 0;
}

int cmd_al_run(const Paths& paths, AlConfig cfg, const std::vector<std::string>& method_names,
               const std::string& out_path) {
  const Loaded l = load(paths, true);
  const Resources res = l.resources();
  const auto methods = parse_methods<PoolMethod>(method_names, parse_pool_method);
  const Dataset ds = load_dataset(paths.dataset, cfg.seed, cfg.test_fraction);
  const BowOracleModel oracle = train_simulated_oracle(ds.records, cfg.seed);
  std::cerr << "oracle 5-fold CV accuracy: " << oracle.cv_accuracy << "\n";

  std::vector<RunMetrics> runs;
  for (auto m : methods) {
    auto r = run_batch_al(ds, m, cfg, res, oracle);
    std::fprintf(stderr, "%-9s acc@0 %.4f  acc@%zu %.4f\n", std::string(to_string(m)).c_str(),
                 mean_accuracy(r, to_string(m), 0), cfg.steps, mean_accuracy(r, to_string(m), cfg.steps));
    runs.insert(runs.end(), r.begin(), r.end());
  }
  if (out_path.empty() || out_path == "-") {
    std::cout << metrics_csv(runs);
  } else {
    emit_metrics(runs, out_path);
  }
  return 0;
}

int cmd_label_switch(const Paths& paths, AlConfig cfg, const std::vector<std::string>& method_names,
                     const std::string& out_path, const std::string& jsonl_dir) {
  const Loaded l = load(paths, false);
  const Resources res = l.resources();
  const auto methods = parse_methods<Method>(method_names, parse_method);
  const Dataset ds = load_dataset(paths.dataset, cfg.seed, cfg.test_fraction);
  const BowOracleModel oracle = train_simulated_oracle(ds.records, cfg.seed);
  std::cerr << "oracle 5-fold CV accuracy: " << oracle.cv_accuracy << "\n";

  const auto result = run_label_switch(ds, methods, cfg, res, oracle);
  for (auto m : methods) {
    std::fprintf(stderr, "%-9s mean switch rate %.4f\n", std::string(to_string(m)).c_str(),
                 mean_switch_rate(result.runs, to_string(m)));
  }
  if (!jsonl_dir.empty()) {
    fs::create_directories(jsonl_dir);
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
      const auto& r = result.runs[i];
      auto out = open_out((fs::path(jsonl_dir) / (r.method + "_" + std::to_string(r.seed) + ".jsonl")).string());
      write_jsonl(out, result.queries[i]);
    }
  }
  if (out_path.empty() || out_path == "-") {
    std::cout << switch_csv(result.runs);
  } else {
    emit_metrics(result.runs, out_path);
  }
  return 0;
}

HttpServer* g_server = nullptr;

int cmd_serve(const Paths& paths, const AlConfig& cfg, PoolMethod method, const std::string& host, int port,
              const std::string& data_dir, const std::string& cors) {
  const Loaded l = load(paths, true);
  const Resources res = l.resources();
  ServiceConfig sc;
  sc.data_dir = data_dir;
  sc.defaults = cfg;
  sc.cors_origin = cors;
  sc.default_method = method;
  if (!paths.dataset.empty()) sc.datasets.emplace(fs::path(paths.dataset).stem().string(), paths.dataset);

  SessionManager manager(res, sc);
  const auto restored = manager.restore();
  HttpServer server(manager);
  g_server = &server;
  std::signal(SIGINT, [](int) { g_server->stop(); });
  std::signal(SIGTERM, [](int) { g_server->stop(); });
  std::cerr << "restored " << restored << " session(s); listening on " << host << ":" << port << "\n";
  if (!server.listen(host, port)) {
    std::cerr << "tmq: cannot listen on " << host << ":" << port << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Textual membership-query synthesis"};
  app.require_subcommand(1);

  Paths paths;
  AlConfig cfg;

  auto* neighbors = app.add_subcommand("neighbors", "print the k-semantic neighborhood of words");
  std::vector<std::string> words;
  std::size_t k = 10;
  neighbors->add_option("words", words, "query words")->required();
  neighbors->add_option("--k", k, "neighbors per word")->capture_default_str();
  neighbors->add_option("--embeddings", paths.embeddings, "word vectors")->envname("TMQ_EMBEDDINGS");

  auto* synth = app.add_subcommand("synth", "synthesize membership queries from a core set as JSON lines");
  std::string method = "US-HC-MQ";
  std::size_t count = 20;
  std::string core_path, out_path, jsonl_dir;
  add_resource_flags(synth, paths);
  add_al_flags(synth, cfg);
  synth->add_option("--method", method, "S-MQ, US-HC-MQ, US-BS-MQ or S-HC-MQ")->capture_default_str();
  synth->add_option("--count", count, "number of new instances")->capture_default_str();
  synth->add_option("--core", core_path, "core set CSV (label,text); otherwise sampled from --dataset");
  synth->add_option("--dataset", paths.dataset, "label,text CSV")->capture_default_str();
  synth->add_option("--out", out_path, "output file, '-' for stdout");

  auto* al = app.add_subcommand("al-run", "batch active learning curves (metrics CSV)");
  std::vector<std::string> al_methods = {"US-HC-MQ", "US-BS-MQ", "S-MQ", "IDEAL", "WNA"};
  add_resource_flags(al, paths);
  add_al_flags(al, cfg);
  al->add_option("--dataset", paths.dataset, "label,text CSV")->capture_default_str();
  al->add_option("--synonyms", paths.synonyms, "word<TAB>syn,... lexicon for WNA")->capture_default_str();
  al->add_option("--method", al_methods, "methods to run (repeatable)")->capture_default_str();
  al->add_option("--steps", cfg.steps, "AL batches per run")->capture_default_str();
  al->add_option("--reps", cfg.repetitions, "repetitions")->capture_default_str();
  al->add_option("--out", out_path, "metrics CSV, '-' for stdout");

  auto* ls = app.add_subcommand("label-switch", "fraction of generated instances whose oracle label differs from the root");
  std::vector<std::string> ls_methods = {"US-HC-MQ", "S-HC-MQ", "S-MQ"};
  add_resource_flags(ls, paths);
  add_al_flags(ls, cfg);
  ls->add_option("--dataset", paths.dataset, "label,text CSV")->capture_default_str();
  ls->add_option("--method", ls_methods, "methods to compare (repeatable)")->capture_default_str();
  ls->add_option("--reps", cfg.repetitions, "repetitions")->capture_default_str();
  ls->add_option("--examples", cfg.switch_examples, "instances generated per run")->capture_default_str();
  ls->add_option("--out", out_path, "switch-rate CSV, '-' for stdout");
  ls->add_option("--jsonl", jsonl_dir, "directory for per-run query JSON lines");

  auto* serve = app.add_subcommand("serve", "run the labeling session service");
  std::string host = "127.0.0.1", data_dir = "sessions", cors = "*";
  int port = 8080;
  add_resource_flags(serve, paths);
  add_al_flags(serve, cfg);
  serve->add_option("--dataset", paths.dataset, "dataset sessions may reference by file stem")
      ->capture_default_str();
  serve->add_option("--synonyms", paths.synonyms, "synonym lexicon for WNA sessions")->capture_default_str();
  serve->add_option("--method", method, "default pool method")->capture_default_str();
  serve->add_option("--host", host, "bind address")->envname("TMQ_HOST")->capture_default_str();
  serve->add_option("--port", port, "port")->envname("TMQ_PORT")->capture_default_str();
  serve->add_option("--data-dir", data_dir, "session event logs")->envname("TMQ_SESSION_DIR")->capture_default_str();
  serve->add_option("--cors-origin", cors, "allowed UI origin")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*neighbors) return cmd_neighbors(paths, words, k);
    if (*synth) return cmd_synth(paths, cfg, method, count, core_path, out_path);
    if (*al) return cmd_al_run(paths, cfg, al_methods, out_path);
    if (*ls) return cmd_label_switch(paths, cfg, ls_methods, out_path, jsonl_dir);
    if (*serve) {
      const auto m = parse_pool_method(method);
      if (!m || *m == PoolMethod::Ideal) throw InvalidArgument("unsupported method '" + method + "'");
      return cmd_serve(paths, cfg, *m, host, port, data_dir, cors);
    }
  } catch (const std::exception& e) {
    std::cerr << "tmq: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
