#include "tmq/service.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <json.hpp>

#include "tmq/errors.hpp"

namespace tmq {

using json = nlohmann::ordered_json;

namespace {

constexpr int kSchemaVersion = 1;

struct HttpError : Error {
  HttpError(int status, const std::string& what) : Error(what), status(status) {}
  int status;
};

Response reply(int status, const json& body) { return {status, body.dump()}; }

Response error_reply(int status, const std::string& message) {
  json j;
  j["error"] = message;
  return reply(status, j);
}

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    const auto j = path.find('/', i);
    const auto end = j == std::string_view::npos ? path.size() : j;
    if (end > i) parts.emplace_back(path.substr(i, end - i));
    i = end + 1;
  }
  return parts;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json chain_json(const std::vector<ModOp>& chain, bool with_distance) {
  auto out = json::array();
  for (const auto& op : chain) {
    json step;
    step["position"] = op.position;
    step["original"] = op.original;
    step["replacement"] = op.replacement;
    if (with_distance) step["distance"] = op.distance;
    out.push_back(std::move(step));
  }
  return out;
}

std::size_t get_count(const json& obj, const char* key, bool allow_zero = false) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < (allow_zero ? 0 : 1)) {
    throw HttpError(400, std::string("'") + key + "' must be a " + (allow_zero ? "non-negative" : "positive") +
                             " integer");
  }
  return v.get<std::size_t>();
}

double get_real(const json& obj, const char* key) {
  const auto& v = obj.at(key);
  if (!v.is_number()) throw HttpError(400, std::string("'") + key + "' must be a number");
  return v.get<double>();
}

/// Applies config overrides; unknown keys are rejected.
void apply_overrides(const json& cfg, AlConfig& al, PoolMethod& method) {
  if (!cfg.is_object()) throw HttpError(400, "'config' must be an object");
  for (const auto& [key, value] : cfg.items()) {
    if (key == "method") {
      if (!value.is_string()) throw HttpError(400, "'method' must be a string");
      const auto m = parse_pool_method(value.get<std::string>());
      if (!m || *m == PoolMethod::Ideal) throw HttpError(400, "unsupported method '" + value.get<std::string>() + "'");
      method = *m;
    } else if (key == "core_size") {
      al.core_size = get_count(cfg, "core_size");
    } else if (key == "pool_size") {
      al.pool_size = get_count(cfg, "pool_size");
    } else if (key == "batch_size") {
      al.batch_size = get_count(cfg, "batch_size");
    } else if (key == "k") {
      al.synthesis.k_neighbors = get_count(cfg, "k");
    } else if (key == "depth_min") {
      al.synthesis.depth_min = static_cast<int>(get_count(cfg, "depth_min"));
    } else if (key == "depth_max") {
      al.synthesis.depth_max = static_cast<int>(get_count(cfg, "depth_max"));
    } else if (key == "beam_width") {
      al.synthesis.beam_width = get_count(cfg, "beam_width");
    } else if (key == "max_retries") {
      al.synthesis.max_retries = get_count(cfg, "max_retries");
    } else if (key == "seed") {
      al.seed = get_count(cfg, "seed", true);
    } else if (key == "learning_rate") {
      al.training.learning_rate = get_real(cfg, "learning_rate");
    } else if (key == "l2") {
      al.training.l2 = get_real(cfg, "l2");
    } else if (key == "max_epochs") {
      al.training.max_epochs = get_count(cfg, "max_epochs");
    } else if (key == "test_fraction") {
      al.test_fraction = get_real(cfg, "test_fraction");
    } else {
      throw HttpError(400, "unknown config field '" + key + "'");
    }
  }
  SynthesisConfig check = al.synthesis;
  check.count = al.pool_size;
  check.validate();
  if (!(al.training.learning_rate > 0.0) || al.training.l2 < 0.0) {
    throw HttpError(400, "learning_rate must be positive and l2 non-negative");
  }
}

}  // namespace

struct SessionManager::Session {
  std::string id;
  PoolMethod method = PoolMethod::UncertaintyHillClimb;
  std::uint64_t seed = 0;
  std::string created_at;
  std::string updated_at;

  std::mutex mutex;
  std::unique_ptr<AlSession> al;
  HumanOracleQueue queue;
  std::vector<SentenceInstance> batch;  // current batch in selection order
  std::unordered_map<std::string, SentenceInstance> known;  // core set and every issued query
  std::unordered_map<std::string, double> heuristic_values;
  std::ofstream log;
  bool replaying = false;

  bool batch_open() const {
    return std::any_of(batch.begin(), batch.end(), [&](const auto& s) { return !queue.resolved(s.id); });
  }
};

SessionManager::SessionManager(const Resources& resources, ServiceConfig config)
    : resources_(resources), config_(std::move(config)) {
  if (!config_.data_dir.empty()) std::filesystem::create_directories(config_.data_dir / "sessions");
}

SessionManager::~SessionManager() = default;

std::size_t SessionManager::session_count() const {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

std::filesystem::path SessionManager::log_path(const std::string& id) const {
  return config_.data_dir / "sessions" / (id + ".jsonl");
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

Response SessionManager::handle(std::string_view method, std::string_view path, std::string_view body,
                                const std::map<std::string, std::string>& query) {
  try {
    const auto parts = split_path(path);
    if (parts.size() == 1 && parts[0] == "health") {
      if (method != "GET") return error_reply(405, "method not allowed");
      json j;
      j["status"] = "ok";
      j["sessions"] = session_count();
      return reply(200, j);
    }
    if (parts.empty() || parts[0] != "sessions") return error_reply(404, "no such route");
    if (parts.size() == 1) {
      if (method == "POST") return create_session(body);
      if (method == "GET") {
        json ids = json::array();
        std::shared_lock lock(mutex_);
        for (const auto& [id, s] : sessions_) ids.push_back(id);
        json j;
        j["sessions"] = std::move(ids);
        return reply(200, j);
      }
      return error_reply(405, "method not allowed");
    }

    auto session = find(parts[1]);
    if (!session) return error_reply(404, "unknown session '" + parts[1] + "'");
    Session& s = *session;
    const std::string_view expect = parts.size() >= 3 && parts[2] == "labels" ? "POST" : "GET";
    if (parts.size() == 3 && (parts[2] == "queries" || parts[2] == "labels" || parts[2] == "metrics")) {
      if (method != expect) return error_reply(405, "method not allowed");
      if (parts[2] == "queries") return get_queries(s, query);
      if (parts[2] == "labels") return post_labels(s, body);
      return get_metrics(s);
    }
    if (parts.size() == 4 && parts[2] == "provenance") {
      if (method != "GET") return error_reply(405, "method not allowed");
      return get_provenance(s, parts[3]);
    }
    return error_reply(404, "no such route");
  } catch (const HttpError& e) {
    return error_reply(e.status, e.what());
  } catch (const SynthesisStarvation& e) {
    return error_reply(409, e.what());
  } catch (const InvalidArgument& e) {
    return error_reply(400, e.what());
  } catch (const ParseError& e) {
    return error_reply(400, e.what());
  } catch (const std::exception& e) {
    return error_reply(500, e.what());
  }
}

std::shared_ptr<SessionManager::Session> SessionManager::build_session(const std::string& id,
                                                                       const std::string& request_body,
                                                                       const std::string& created_at) {
  if (request_body.empty()) throw HttpError(400, "empty request body");
  json req;
  try {
    req = json::parse(request_body);
  } catch (const json::parse_error& e) {
    throw HttpError(400, std::string("malformed JSON: ") + e.what());
  }
  if (!req.is_object()) throw HttpError(400, "request body must be a JSON object");
  for (const auto& [key, value] : req.items()) {
    static const std::vector<std::string> allowed = {"schema_version", "core_csv", "test_csv", "dataset",
                                                     "split_seed", "config", "allow_single_class"};
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw HttpError(400, "unknown field '" + key + "'");
    }
  }
  if (req.contains("schema_version") &&
      (!req["schema_version"].is_number_integer() || req["schema_version"].get<int>() != kSchemaVersion)) {
    throw HttpError(400, "unsupported schema_version");
  }
  if (req.contains("core_csv") == req.contains("dataset")) {
    throw HttpError(400, "exactly one of 'core_csv' and 'dataset' is required");
  }
  bool allow_single = false;
  if (req.contains("allow_single_class")) {
    if (!req["allow_single_class"].is_boolean()) throw HttpError(400, "'allow_single_class' must be a boolean");
    allow_single = req["allow_single_class"].get<bool>();
  }

  auto s = std::make_shared<Session>();
  s->id = id;
  s->created_at = s->updated_at = created_at;
  s->method = config_.default_method;
  AlConfig al = config_.defaults;
  if (req.contains("config")) apply_overrides(req["config"], al, s->method);
  if (s->method == PoolMethod::Wna && !resources_.synonyms) throw HttpError(400, "WNA needs a synonym lexicon");
  s->seed = al.seed;

  std::vector<SentenceInstance> core;
  std::vector<LabeledText> test;
  if (req.contains("dataset")) {
    if (!req["dataset"].is_string()) throw HttpError(400, "'dataset' must be a string");
    if (req.contains("test_csv")) throw HttpError(400, "'test_csv' cannot be combined with 'dataset'");
    const auto name = req["dataset"].get<std::string>();
    auto it = config_.datasets.find(name);
    if (it == config_.datasets.end()) throw HttpError(400, "unknown dataset '" + name + "'");
    const std::uint64_t split_seed = req.contains("split_seed") ? get_count(req, "split_seed", true) : 0;
    const Dataset dataset = load_dataset(it->second, split_seed, al.test_fraction);
    core = core_instances(dataset, al.core_size, al.seed, resources_.lexicon);
    for (auto tid : dataset.test_ids) test.push_back(dataset.records[tid]);
  } else {
    if (!req["core_csv"].is_string()) throw HttpError(400, "'core_csv' must be a string");
    if (req.contains("split_seed")) throw HttpError(400, "'split_seed' applies to dataset references only");
    const auto rows = parse_labeled_csv(req["core_csv"].get<std::string>(), "core_csv");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      core.push_back(make_instance(rows[i].text, resources_.lexicon, "c" + std::to_string(i + 1), rows[i].label));
    }
    if (req.contains("test_csv")) {
      if (!req["test_csv"].is_string()) throw HttpError(400, "'test_csv' must be a string");
      test = parse_labeled_csv(req["test_csv"].get<std::string>(), "test_csv");
    }
  }

  if (core.size() < 2) throw HttpError(422, "core set needs at least 2 instances");
  const bool has_pos = std::any_of(core.begin(), core.end(), [](auto& c) { return *c.provenance.root_label == 1; });
  const bool has_neg = std::any_of(core.begin(), core.end(), [](auto& c) { return *c.provenance.root_label == 0; });
  if (!(has_pos && has_neg) && !allow_single) {
    throw HttpError(422, "core set has a single class; set allow_single_class to proceed");
  }
  for (const auto& c : core) s->known.emplace(c.id, c);
  s->al = std::make_unique<AlSession>(std::move(core), resources_, al, al.seed, std::move(test));
  return s;
}

Response SessionManager::create_session(std::string_view body) {
  std::string id;
  {
    std::unique_lock lock(mutex_);
    id = "s" + std::to_string(next_id_++);
  }
  const std::string at = now_utc();
  auto s = build_session(id, std::string(body), at);
  if (!config_.data_dir.empty()) {
    s->log.open(log_path(id), std::ios::app);
    if (!s->log) throw Error("cannot open session log for " + id);
    json ev;
    ev["event"] = "created";
    ev["at"] = at;
    ev["request"] = std::string(body);
    log_event(*s, ev.dump());
  }
  const auto initial_accuracy = s->al->history().front().accuracy;
  {
    std::unique_lock lock(mutex_);
    sessions_.emplace(id, std::move(s));
  }
  json j;
  j["session_id"] = id;
  j["model_version"] = 0;
  if (initial_accuracy) j["initial_accuracy"] = *initial_accuracy;
  return reply(201, j);
}

void SessionManager::log_event(Session& s, const std::string& line) {
  if (s.replaying || !s.log.is_open()) return;
  s.log << line << '\n';
  s.log.flush();
  if (!s.log) throw Error("failed writing session log for " + s.id);
}

void SessionManager::issue_batch(Session& s) {
  const auto pool = s.al->generate_pool(s.method);
  if (pool.empty()) throw SynthesisStarvation("no candidates could be synthesized from the labeled set");
  s.batch = s.al->select(pool);
  json ids = json::array();
  for (const auto& q : s.batch) {
    s.queue.enqueue(q);
    s.known.emplace(q.id, q);
    s.heuristic_values[q.id] = s.al->heuristic(q);
    ids.push_back(q.id);
  }
  json ev;
  ev["event"] = "batch";
  ev["at"] = s.updated_at = now_utc();
  ev["query_ids"] = std::move(ids);
  log_event(s, ev.dump());
}

Response SessionManager::get_queries(Session& s, const std::map<std::string, std::string>& query) {
  std::size_t limit = 0;
  if (auto it = query.find("limit"); it != query.end()) {
    const auto& v = it->second;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), limit);
    if (ec != std::errc() || ptr != v.data() + v.size() || limit == 0) {
      throw HttpError(400, "'limit' must be a positive integer");
    }
  }
  std::lock_guard lock(s.mutex);
  if (limit == 0) limit = s.al->config().batch_size;
  if (!s.batch_open()) issue_batch(s);

  json out = json::array();
  for (const auto& q : s.batch) {
    if (out.size() >= limit) break;
    if (s.queue.resolved(q.id)) continue;
    json j;
    j["query_id"] = q.id;
    j["text"] = q.text;
    j["root_id"] = q.provenance.root_id;
    j["chain"] = chain_json(q.provenance.chain, false);
    j["heuristic_value"] = s.heuristic_values.at(q.id);
    out.push_back(std::move(j));
  }
  json j;
  j["model_version"] = s.al->model_version();
  j["queries"] = std::move(out);
  return reply(200, j);
}

bool SessionManager::apply_label(Session& s, const std::string& query_id, int label) {
  const bool fresh = !s.queue.resolved(query_id);
  s.queue.resolve(query_id, label);
  if (!fresh) return false;
  json ev;
  ev["event"] = "label";
  ev["at"] = s.updated_at = now_utc();
  ev["query_id"] = query_id;
  ev["label"] = label;
  log_event(s, ev.dump());

  if (!s.batch_open()) {
    std::vector<int> labels;
    for (const auto& q : s.batch) labels.push_back(s.queue.answer(q.id)->label);
    s.al->add_batch(s.batch, labels);
  }
  return true;
}

Response SessionManager::post_labels(Session& s, std::string_view body) {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::parse_error& e) {
    throw HttpError(400, std::string("malformed JSON: ") + e.what());
  }
  if (!req.is_array()) throw HttpError(400, "labels body must be an array of {query_id, label}");
  std::vector<std::pair<std::string, int>> items;
  for (const auto& item : req) {
    if (!item.is_object() || item.size() != 2 || !item.contains("query_id") || !item.contains("label") ||
        !item["query_id"].is_string() || !item["label"].is_number_integer()) {
      throw HttpError(400, "each label must be exactly {query_id: string, label: 0|1}");
    }
    const int label = item["label"].get<int>();
    if (label != 0 && label != 1) throw HttpError(400, "label must be 0 or 1");
    items.emplace_back(item["query_id"].get<std::string>(), label);
  }

  std::lock_guard lock(s.mutex);
  // Validate everything first so a rejected body changes nothing.
  std::unordered_map<std::string, int> seen;
  for (const auto& [qid, label] : items) {
    if (!s.queue.contains(qid)) throw HttpError(409, "query '" + qid + "' is not pending in this session");
    if (auto a = s.queue.answer(qid); a && a->label != label) {
      throw HttpError(409, "query '" + qid + "' already labeled " + std::to_string(a->label));
    }
    if (auto [it, inserted] = seen.emplace(qid, label); !inserted && it->second != label) {
      throw HttpError(409, "query '" + qid + "' labeled inconsistently within one request");
    }
  }
  std::size_t accepted = 0;
  for (const auto& [qid, label] : items) accepted += static_cast<std::size_t>(apply_label(s, qid, label));

  json j;
  j["labels_accepted"] = accepted;
  j["model_version"] = s.al->model_version();
  j["pending"] = s.queue.pending().size();
  if (auto acc = s.al->history().back().accuracy) j["test_accuracy"] = *acc;
  return reply(200, j);
}

Response SessionManager::get_metrics(Session& s) {
  std::lock_guard lock(s.mutex);
  json rows = json::array();
  for (const auto& r : s.al->history()) {
    json row;
    row["step"] = r.step;
    row["n_labeled"] = r.n_labeled;
    row["accuracy"] = optional_number(r.accuracy);
    row["mean_uncertainty"] = optional_number(r.mean_uncertainty);
    rows.push_back(std::move(row));
  }
  json j;
  j["session_id"] = s.id;
  j["method"] = to_string(s.method);
  j["seed"] = s.seed;
  j["model_version"] = s.al->model_version();
  j["created_at"] = s.created_at;
  j["updated_at"] = s.updated_at;
  j["steps"] = std::move(rows);
  return reply(200, j);
}

Response SessionManager::get_provenance(Session& s, const std::string& query_id) {
  std::lock_guard lock(s.mutex);
  auto it = s.known.find(query_id);
  if (it == s.known.end()) throw HttpError(404, "unknown query '" + query_id + "'");
  const auto& inst = it->second;
  json j;
  j["query_id"] = inst.id;
  j["text"] = inst.text;
  j["root_id"] = inst.provenance.root_id;
  j["root_label"] = inst.provenance.root_label ? json(*inst.provenance.root_label) : json(nullptr);
  j["root_text"] = s.known.at(inst.provenance.root_id).text;
  j["chain"] = chain_json(inst.provenance.chain, true);
  return reply(200, j);
}

std::size_t SessionManager::restore() {
  if (config_.data_dir.empty()) return 0;
  const auto dir = config_.data_dir / "sessions";
  if (!std::filesystem::exists(dir)) return 0;
  std::vector<std::filesystem::path> logs;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() == ".jsonl") logs.push_back(e.path());
  }
  std::sort(logs.begin(), logs.end());

  std::size_t restored = 0;
  for (const auto& path : logs) {
    const std::string id = path.stem().string();
    std::ifstream in(path);
    std::string line;
    std::size_t line_no = 0;
    std::shared_ptr<Session> s;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      json ev;
      try {
        ev = json::parse(line);
      } catch (const json::parse_error&) {
        throw ParseError(path.string(), line_no, "malformed event");
      }
      const auto kind = ev.value("event", "");
      if (!s) {
        if (kind != "created") throw ParseError(path.string(), line_no, "log must start with a created event");
        s = build_session(id, ev.at("request").get<std::string>(), ev.value("at", ""));
        s->replaying = true;
      } else if (kind == "batch") {
        issue_batch(*s);
        std::vector<std::string> ids;
        for (const auto& q : s->batch) ids.push_back(q.id);
        if (ids != ev.at("query_ids").get<std::vector<std::string>>()) {
          throw ParseError(path.string(), line_no, "replayed batch differs from the log");
        }
      } else if (kind == "label") {
        apply_label(*s, ev.at("query_id").get<std::string>(), ev.at("label").get<int>());
      } else {
        throw ParseError(path.string(), line_no, "unknown event '" + kind + "'");
      }
      if (ev.contains("at")) s->updated_at = ev["at"].get<std::string>();
    }
    if (!s) continue;
    s->replaying = false;
    s->log.open(path, std::ios::app);
    std::unique_lock lock(mutex_);
    if (id.size() > 1 && id[0] == 's') {
      std::uint64_t n = 0;
      auto [ptr, ec] = std::from_chars(id.data() + 1, id.data() + id.size(), n);
      if (ec == std::errc() && ptr == id.data() + id.size()) next_id_ = std::max(next_id_, n + 1);
    }
    sessions_[id] = std::move(s);
    ++restored;
  }
  return restored;
}

struct HttpServer::Impl {
  SessionManager& manager;
  httplib::Server server;
  std::thread thread;

  explicit Impl(SessionManager& m) : manager(m) {
    const std::string origin = manager.config().cors_origin;
    server.set_default_headers({{"Access-Control-Allow-Origin", origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
      std::map<std::string, std::string> query;
      for (const auto& [k, v] : req.params) query.emplace(k, v);
      const Response r = manager.handle(req.method, req.path, req.body, query);
      res.status = r.status;
      res.set_content(r.body, "application/json");
    };
    server.Get(R"(/.*)", route);
    server.Post(R"(/.*)", route);
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  }
};

HttpServer::HttpServer(SessionManager& manager) : impl_(std::make_unique<Impl>(manager)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

bool HttpServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

void HttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace tmq
