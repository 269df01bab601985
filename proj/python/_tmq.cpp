#include <optional>
#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tmq/embeddings.hpp"
#include "tmq/errors.hpp"
#include "tmq/experiments.hpp"
#include "tmq/learner.hpp"
#include "tmq/oracle.hpp"
#include "tmq/service.hpp"
#include "tmq/synthesis.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace tmq;

namespace {

// Owns the resources that tmq::Resources only refers to.
struct Workspace {
  EmbeddingTable table;
  PosLexicon lexicon;
  std::optional<SynonymLexicon> synonyms;

  Resources resources() const { return {table, lexicon, synonyms ? &*synonyms : nullptr}; }
};

std::unique_ptr<Workspace> make_workspace(const fs::path& embeddings, const fs::path& pos_lexicon,
                                          const std::optional<fs::path>& suffix_rules,
                                          const std::optional<fs::path>& synonyms) {
  auto w = std::unique_ptr<Workspace>(
      new Workspace{load_embeddings(embeddings), load_pos_lexicon(pos_lexicon, suffix_rules), std::nullopt});
  if (synonyms) w->synonyms = load_synonyms(*synonyms);
  return w;
}

AlConfig al_config(const py::dict& kw) {
  AlConfig c;
  for (const auto& [key, value] : kw) {
    const auto k = key.cast<std::string>();
    if (k == "core_size") c.core_size = value.cast<std::size_t>();
    else if (k == "pool_size") c.pool_size = value.cast<std::size_t>();
    else if (k == "batch_size") c.batch_size = value.cast<std::size_t>();
    else if (k == "steps") c.steps = value.cast<std::size_t>();
    else if (k == "reps") c.repetitions = value.cast<std::size_t>();
    else if (k == "examples") c.switch_examples = value.cast<std::size_t>();
    else if (k == "test_fraction") c.test_fraction = value.cast<double>();
    else if (k == "seed") c.seed = value.cast<std::uint64_t>();
    else if (k == "k") c.synthesis.k_neighbors = value.cast<std::size_t>();
    else if (k == "depth_min") c.synthesis.depth_min = value.cast<int>();
    else if (k == "depth_max") c.synthesis.depth_max = value.cast<int>();
    else if (k == "beam_width") c.synthesis.beam_width = value.cast<std::size_t>();
    else if (k == "max_retries") c.synthesis.max_retries = value.cast<std::size_t>();
    else throw InvalidArgument("unknown option '" + k + "'");
  }
  c.synthesis.validate();
  return c;
}

std::vector<LabeledText> labeled(const std::vector<std::pair<std::string, int>>& rows) {
  std::vector<LabeledText> out;
  for (const auto& [text, label] : rows) out.push_back({text, label});
  return out;
}

std::string synthesize_jsonl(const Workspace& w, const std::vector<std::pair<std::string, int>>& core_rows,
                             const std::string& method_name, std::size_t count, const py::kwargs& kw) {
  const auto method = parse_method(method_name);
  if (!method) throw InvalidArgument("unknown synthesis method '" + method_name + "'");
  const AlConfig cfg = al_config(kw);
  std::vector<SentenceInstance> core;
  for (std::size_t i = 0; i < core_rows.size(); ++i) {
    core.push_back(make_instance(core_rows[i].first, w.lexicon, "c" + std::to_string(i + 1), core_rows[i].second));
  }
  std::vector<LabeledExample> train_set;
  for (const auto& s : core) train_set.push_back({featurize(s, w.table), *s.provenance.root_label});
  const LinearModel model = train(train_set, cfg.training);
  const Heuristic h = [&](const SentenceInstance& s) { return uncertainty(model, s, w.table); };

  SynthesisConfig sc = cfg.synthesis;
  sc.count = count;
  sc.method = *method;
  sc.seed = cfg.seed;
  std::vector<MembershipQuery> queries;
  {
    py::gil_scoped_release release;
    Rng rng(cfg.seed);
    IdGenerator ids("mq");
    for (const auto& g : synthesize(core, sc, h, embedding_operators(sc.k_neighbors, w.table, w.lexicon), rng, ids)) {
      queries.push_back(to_query(g, h(g)));
    }
  }
  std::ostringstream out;
  write_jsonl(out, queries);
  return out.str();
}

template <typename M, typename F>
std::vector<M> parse_all(const std::vector<std::string>& names, F parse) {
  std::vector<M> out;
  for (const auto& n : names) {
    auto m = parse(n);
    if (!m) throw InvalidArgument("unknown method '" + n + "'");
    out.push_back(*m);
  }
  return out;
}

std::string run_al(const Workspace& w, const fs::path& dataset, const std::vector<std::string>& methods,
                   const py::kwargs& kw) {
  const AlConfig cfg = al_config(kw);
  const auto parsed = parse_all<PoolMethod>(methods, parse_pool_method);
  py::gil_scoped_release release;
  const Dataset ds = load_dataset(dataset, cfg.seed, cfg.test_fraction);
  const BowOracleModel oracle = train_simulated_oracle(ds.records, cfg.seed);
  std::vector<RunMetrics> runs;
  for (auto m : parsed) {
    auto r = run_batch_al(ds, m, cfg, w.resources(), oracle);
    runs.insert(runs.end(), r.begin(), r.end());
  }
  return metrics_csv(runs);
}

std::string run_switch(const Workspace& w, const fs::path& dataset, const std::vector<std::string>& methods,
                       const py::kwargs& kw) {
  const AlConfig cfg = al_config(kw);
  const auto parsed = parse_all<Method>(methods, parse_method);
  py::gil_scoped_release release;
  const Dataset ds = load_dataset(dataset, cfg.seed, cfg.test_fraction);
  const BowOracleModel oracle = train_simulated_oracle(ds.records, cfg.seed);
  return switch_csv(run_label_switch(ds, parsed, cfg, w.resources(), oracle).runs);
}

// Keeps the workspace alive for as long as the manager refers to it.
struct Service {
  std::shared_ptr<Workspace> workspace;
  std::unique_ptr<SessionManager> manager;
};

}  // namespace

PYBIND11_MODULE(_tmq, m) {
  m.doc() = "Textual membership-query synthesis";

  static py::exception<Error> error(m, "TmqError");
  static py::exception<SynthesisStarvation> starvation(m, "SynthesisStarvation", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const SynthesisStarvation& e) {
      py::set_error(starvation, e.what());
    } catch (const InvalidArgument& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const OutOfVocabulary& e) {
      PyErr_SetString(PyExc_KeyError, e.what());
    } catch (const NotFound& e) {
      PyErr_SetString(PyExc_KeyError, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::class_<Workspace, std::shared_ptr<Workspace>>(m, "Workspace")
      .def(py::init([](const fs::path& embeddings, const fs::path& pos_lexicon,
                       const std::optional<fs::path>& suffix_rules, const std::optional<fs::path>& synonyms) {
             return std::shared_ptr<Workspace>(make_workspace(embeddings, pos_lexicon, suffix_rules, synonyms));
           }),
           py::arg("embeddings"), py::arg("pos_lexicon"), py::arg("suffix_rules") = py::none(),
           py::arg("synonyms") = py::none())
      .def_property_readonly("vocabulary_size", [](const Workspace& w) { return w.table.size(); })
      .def_property_readonly("dimension", [](const Workspace& w) { return w.table.dimension(); })
      .def("distance", [](const Workspace& w, const std::string& a, const std::string& b) {
        return w.table.distance(a, b);
      })
      .def(
          "neighbors",
          [](const Workspace& w, const std::string& word, std::size_t k) {
            std::vector<std::pair<std::string, double>> out;
            for (const auto& n : k_nearest(word, k, w.table).neighbors) out.emplace_back(n.word, n.distance);
            return out;
          },
          py::arg("word"), py::arg("k") = 10)
      .def("tag",
           [](const Workspace& w, const std::string& text) {
             std::vector<std::pair<std::string, std::string>> out;
             for (const auto& t : make_instance(text, w.lexicon, "t").tokens) {
               out.emplace_back(t.surface, std::string(to_string(t.pos)));
             }
             return out;
           })
      .def("synthesize_jsonl", &synthesize_jsonl, py::arg("core"), py::arg("method") = "US-HC-MQ",
           py::arg("count") = 20)
      .def("al_run_csv", &run_al, py::arg("dataset"), py::arg("methods"))
      .def("label_switch_csv", &run_switch, py::arg("dataset"), py::arg("methods"));

  py::class_<BowOracleModel>(m, "Oracle")
      .def(py::init([](const std::vector<std::pair<std::string, int>>& corpus, std::uint64_t seed) {
             return train_simulated_oracle(labeled(corpus), seed);
           }),
           py::arg("corpus"), py::arg("seed") = 0)
      .def_readonly("cv_accuracy", &BowOracleModel::cv_accuracy)
      .def("probability", [](const BowOracleModel& o, const std::string& text) { return o.probability(text); })
      .def("label", [](const BowOracleModel& o, const std::string& text) { return oracle_label(o, text).label; });

  m.def(
      "load_dataset",
      [](const fs::path& path, std::uint64_t split_seed) {
        std::vector<std::pair<std::string, int>> out;
        for (const auto& r : load_dataset(path, split_seed).records) out.emplace_back(r.text, r.label);
        return out;
      },
      py::arg("path"), py::arg("split_seed") = 0);

  py::class_<Service>(m, "Service")
      .def(py::init([](std::shared_ptr<Workspace> w, const std::map<std::string, fs::path>& datasets,
                       const fs::path& data_dir) {
             ServiceConfig cfg;
             cfg.datasets = datasets;
             cfg.data_dir = data_dir;
             auto mgr = std::make_unique<SessionManager>(w->resources(), cfg);
             return Service{std::move(w), std::move(mgr)};
           }),
           py::arg("workspace"), py::arg("datasets") = std::map<std::string, fs::path>{},
           py::arg("data_dir") = fs::path{})
      .def("restore", [](Service& s) { return s.manager->restore(); })
      .def(
          "handle",
          [](Service& s, const std::string& method, const std::string& path, const std::string& body,
             const std::map<std::string, std::string>& query) {
            py::gil_scoped_release release;
            const auto r = s.manager->handle(method, path, body, query);
            return std::make_pair(r.status, r.body);
          },
          py::arg("method"), py::arg("path"), py::arg("body") = "",
          py::arg("query") = std::map<std::string, std::string>{});
}
