#include <doctest.h>

#include <cstdio>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "tmq/experiments.hpp"
#include "tmq/service.hpp"

using namespace tmq;
using json = nlohmann::json;

namespace {

const char* kCore =
    "label,text\n"
    "1,A wonderful film with a charming cast.\n"
    "0,The plot was dull and the acting was awful.\n"
    "1,I truly enjoy this brilliant story.\n"
    "0,I hate this predictable sequel.\n"
    "1,The director made a superb picture.\n"
    "0,What a boring and pointless movie.\n"
    "1,The soundtrack is gorgeous.\n"
    "0,The script felt lame and clumsy.\n"
    "1,An impressive and gripping finale.\n"
    "0,The characters seemed shallow.\n";

std::string core_body(const json& extra = json::object()) {
  json j = {{"core_csv", kCore}};
  j.update(extra);
  return j.dump();
}

const BowOracleModel& oracle() {
  static const BowOracleModel m = train_simulated_oracle(fixtures::polarity().records, 0);
  return m;
}

ServiceConfig base_config(std::filesystem::path dir = {}) {
  ServiceConfig c;
  c.data_dir = std::move(dir);
  c.datasets["polarity"] = fixtures::data_path("polarity.csv");
  return c;
}

struct Call {
  int status;
  json body;
};

Call call(SessionManager& m, const std::string& method, const std::string& path, const std::string& body = {},
          std::map<std::string, std::string> query = {}) {
  const auto r = m.handle(method, path, body, query);
  return {r.status, r.body.empty() ? json() : json::parse(r.body)};
}

std::string create(SessionManager& m, const std::string& body) {
  const auto r = call(m, "POST", "/sessions", body);
  REQUIRE(r.status == 201);
  return r.body["session_id"].get<std::string>();
}

json queries(SessionManager& m, const std::string& sid, int limit = 5) {
  const auto r = call(m, "GET", "/sessions/" + sid + "/queries", {}, {{"limit", std::to_string(limit)}});
  REQUIRE(r.status == 200);
  return r.body["queries"];
}

json labels_for(const json& qs, std::size_t from, std::size_t to) {
  json out = json::array();
  for (std::size_t i = from; i < to && i < qs.size(); ++i) {
    const int label = oracle_label(oracle(), qs[i]["text"].get<std::string>()).label;
    out.push_back({{"query_id", qs[i]["query_id"]}, {"label", label}});
  }
  return out;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = fixtures::scratch_dir() / name;
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("session creation contract") {
  const auto& b = fixtures::bundled();
  SessionManager m(b.resources(), base_config());
  const auto r = call(m, "POST", "/sessions", core_body());
  CHECK(r.status == 201);
  CHECK(r.body["model_version"] == 0);
  CHECK_FALSE(r.body.contains("initial_accuracy"));
  const auto sid = r.body["session_id"].get<std::string>();

  const auto metrics = call(m, "GET", "/sessions/" + sid + "/metrics");
  CHECK(metrics.status == 200);
  REQUIRE(metrics.body["steps"].size() == 1);
  CHECK(metrics.body["steps"][0]["step"] == 0);
  CHECK(metrics.body["steps"][0]["n_labeled"] == 10);
  CHECK(metrics.body["steps"][0]["accuracy"].is_null());

  CHECK(create(m, core_body()) != sid);
  CHECK(m.session_count() == 2);

  const auto prov = call(m, "GET", "/sessions/" + sid + "/provenance/c1");
  CHECK(prov.status == 200);
  CHECK(prov.body["chain"].empty());
  CHECK(prov.body["root_id"] == "c1");
  CHECK(prov.body["root_label"] == 1);

  const auto with_test = call(m, "POST", "/sessions", core_body({{"test_csv", kCore}}));
  CHECK(with_test.status == 201);
  CHECK(with_test.body["initial_accuracy"].is_number());
}

TEST_CASE("session creation validation") {
  const auto& b = fixtures::bundled();
  SessionManager m(b.resources(), base_config());
  CHECK(call(m, "POST", "/sessions", "").status == 400);
  CHECK(call(m, "POST", "/sessions", "{not json").status == 400);
  CHECK(call(m, "POST", "/sessions", "[]").status == 400);
  CHECK(call(m, "POST", "/sessions", core_body({{"colour", "red"}})).status == 400);
  CHECK(call(m, "POST", "/sessions", core_body({{"config", {{"pool_size", 0}}}})).status == 400);
  CHECK(call(m, "POST", "/sessions", core_body({{"config", {{"bogus", 1}}}})).status == 400);
  CHECK(call(m, "POST", "/sessions", core_body({{"config", {{"method", "IDEAL"}}}})).status == 400);
  CHECK(call(m, "POST", "/sessions", core_body({{"config", {{"depth_min", 5}, {"depth_max", 2}}}})).status == 400);
  CHECK(call(m, "POST", "/sessions", core_body({{"schema_version", 2}})).status == 400);
  CHECK(call(m, "POST", "/sessions", core_body({{"dataset", "polarity"}})).status == 400);
  CHECK(call(m, "POST", "/sessions", json{{"dataset", "nope"}}.dump()).status == 400);
  CHECK(call(m, "POST", "/sessions", json{{"core_csv", "label,text\n7,x\n"}}.dump()).status == 400);

  const std::string single = "label,text\n1,A good film.\n1,A great film.\n";
  CHECK(call(m, "POST", "/sessions", json{{"core_csv", single}}.dump()).status == 422);
  CHECK(call(m, "POST", "/sessions", json{{"core_csv", single}, {"allow_single_class", true}}.dump()).status == 201);
  CHECK(call(m, "POST", "/sessions", json{{"core_csv", "label,text\n1,A good film.\n"}, {"allow_single_class", true}}
                                         .dump())
            .status == 422);
  CHECK(call(m, "POST", "/sessions", core_body({{"schema_version", 1}})).status == 201);
}

TEST_CASE("query batches, labels and versions") {
  const auto& b = fixtures::bundled();
  SessionManager m(b.resources(), base_config());
  const auto sid = create(m, core_body());

  const auto qs = queries(m, sid);
  REQUIRE(qs.size() == 5);
  for (const auto& q : qs) {
    CHECK_FALSE(q["chain"].empty());
    CHECK(q["heuristic_value"].is_number());
    // Replay over the wire from the named root.
    const auto root = call(m, "GET", "/sessions/" + sid + "/provenance/" + q["root_id"].get<std::string>());
    REQUIRE(root.status == 200);
    CHECK(root.body["chain"].empty());
    std::vector<ModOp> chain;
    for (const auto& step : q["chain"]) {
      chain.push_back({step["position"].get<std::size_t>(), step["original"].get<std::string>(),
                       step["replacement"].get<std::string>(), 0.0});
    }
    const auto root_instance = make_instance(root.body["text"].get<std::string>(), b.lexicon, "r");
    CHECK(replay(root_instance, chain) == q["text"].get<std::string>());

    const auto prov = call(m, "GET", "/sessions/" + sid + "/provenance/" + q["query_id"].get<std::string>());
    CHECK(prov.body["chain"].size() == q["chain"].size());
    CHECK(prov.body["chain"][0]["distance"].is_number());
  }
  CHECK(queries(m, sid) == qs);
  CHECK(queries(m, sid, 2).size() == 2);

  auto r = call(m, "POST", "/sessions/" + sid + "/labels", labels_for(qs, 0, 3).dump());
  CHECK(r.status == 200);
  CHECK(r.body["labels_accepted"] == 3);
  CHECK(r.body["model_version"] == 0);
  CHECK(queries(m, sid).size() == 2);

  // Relabeling with the same answer is a no-op; a different answer conflicts.
  auto same = labels_for(qs, 0, 1);
  r = call(m, "POST", "/sessions/" + sid + "/labels", same.dump());
  CHECK(r.status == 200);
  CHECK(r.body["labels_accepted"] == 0);
  auto flipped = same;
  flipped[0]["label"] = 1 - flipped[0]["label"].get<int>();
  CHECK(call(m, "POST", "/sessions/" + sid + "/labels", flipped.dump()).status == 409);
  const auto prov = call(m, "GET", "/sessions/" + sid + "/provenance/" + qs[0]["query_id"].get<std::string>());
  CHECK(prov.status == 200);

  // A rejected body applies nothing.
  auto mixed = labels_for(qs, 3, 5);
  mixed.push_back({{"query_id", "mq999"}, {"label", 1}});
  CHECK(call(m, "POST", "/sessions/" + sid + "/labels", mixed.dump()).status == 409);
  CHECK(queries(m, sid).size() == 2);

  CHECK(call(m, "POST", "/sessions/" + sid + "/labels", "{\"query_id\":\"mq1\"}").status == 400);
  CHECK(call(m, "POST", "/sessions/" + sid + "/labels", json::array({{{"query_id", "mq1"}, {"label", 2}}}).dump())
            .status == 400);
  CHECK(call(m, "POST", "/sessions/" + sid + "/labels",
             json::array({{{"query_id", "mq1"}, {"label", 1}, {"extra", 0}}}).dump())
            .status == 400);

  r = call(m, "POST", "/sessions/" + sid + "/labels", labels_for(qs, 3, 5).dump());
  CHECK(r.status == 200);
  CHECK(r.body["model_version"] == 1);
  const auto metrics = call(m, "GET", "/sessions/" + sid + "/metrics");
  REQUIRE(metrics.body["steps"].size() == 2);
  CHECK(metrics.body["steps"][1]["n_labeled"] == 15);
  CHECK(metrics.body["steps"][1]["mean_uncertainty"].is_number());

  const auto next = queries(m, sid);
  REQUIRE(next.size() == 5);
  for (const auto& q : next) {
    for (const auto& old : qs) CHECK(q["query_id"] != old["query_id"]);
  }
}

TEST_CASE("routing errors") {
  const auto& b = fixtures::bundled();
  SessionManager m(b.resources(), base_config());
  const auto sid = create(m, core_body());
  CHECK(call(m, "GET", "/sessions/s999/queries").status == 404);
  CHECK(call(m, "POST", "/sessions/s999/labels", "[]").status == 404);
  CHECK(call(m, "GET", "/sessions/s999/metrics").status == 404);
  CHECK(call(m, "GET", "/sessions/" + sid + "/provenance/mq77").status == 404);
  CHECK(call(m, "GET", "/nowhere").status == 404);
  CHECK(call(m, "POST", "/sessions/" + sid + "/metrics").status == 405);
  CHECK(call(m, "GET", "/sessions/" + sid + "/queries", {}, {{"limit", "zero"}}).status == 400);
  CHECK(call(m, "GET", "/sessions/" + sid + "/queries", {}, {{"limit", "0"}}).status == 400);
  CHECK(call(m, "GET", "/health").status == 200);
}

TEST_CASE("starvation surfaces as a conflict") {
  const auto& b = fixtures::bundled();
  SessionManager m(b.resources(), base_config());
  const auto sid = create(m, json{{"core_csv", "label,text\n1,the .\n0,this ,\n"}}.dump());
  const auto r = call(m, "GET", "/sessions/" + sid + "/queries");
  CHECK(r.status == 409);
  CHECK(r.body["error"].get<std::string>().find("starved") != std::string::npos);
}

TEST_CASE("service metrics equal the batch runner's rows") {
  const auto& b = fixtures::bundled();
  SessionManager m(b.resources(), base_config());
  const std::uint64_t seed = 4;
  const std::size_t steps = 3;
  const auto sid = create(m, json{{"dataset", "polarity"}, {"config", {{"seed", seed}}}}.dump());
  for (std::size_t t = 0; t < steps; ++t) {
    const auto qs = queries(m, sid);
    REQUIRE(call(m, "POST", "/sessions/" + sid + "/labels", labels_for(qs, 0, qs.size()).dump()).status == 200);
  }
  const auto wire = call(m, "GET", "/sessions/" + sid + "/metrics").body;

  AlConfig cfg;
  cfg.seed = seed;
  cfg.repetitions = 1;
  cfg.steps = steps;
  const auto runs = run_batch_al(fixtures::polarity(), PoolMethod::UncertaintyHillClimb, cfg, b.resources(), oracle());

  std::string from_wire = "method,seed,step,n_labeled,accuracy\n";
  for (const auto& row : wire["steps"]) {
    char acc[32];
    std::snprintf(acc, sizeof acc, "%.6f", row["accuracy"].get<double>());
    from_wire += wire["method"].get<std::string>() + "," + std::to_string(wire["seed"].get<std::uint64_t>()) + "," +
                 std::to_string(row["step"].get<std::size_t>()) + "," +
                 std::to_string(row["n_labeled"].get<std::size_t>()) + "," + acc + "\n";
  }
  CHECK(from_wire == metrics_csv(runs));
  for (std::size_t t = 1; t <= steps; ++t) {
    CHECK(wire["steps"][t]["mean_uncertainty"].get<double>() == *runs[0].steps[t].mean_uncertainty);
  }
}

TEST_CASE("sessions survive a restart") {
  const auto& b = fixtures::bundled();
  const auto dir = fresh_dir("persist");
  json before_metrics, pending;
  std::string sid;
  {
    SessionManager m(b.resources(), base_config(dir));
    sid = create(m, core_body({{"config", {{"seed", 9}}}}));
    const auto qs = queries(m, sid);
    call(m, "POST", "/sessions/" + sid + "/labels", labels_for(qs, 0, 5).dump());
    const auto second = queries(m, sid);
    call(m, "POST", "/sessions/" + sid + "/labels", labels_for(second, 0, 2).dump());
    before_metrics = call(m, "GET", "/sessions/" + sid + "/metrics").body;
    pending = queries(m, sid);
    CHECK(pending.size() == 3);
  }
  SessionManager restored(b.resources(), base_config(dir));
  CHECK(restored.restore() == 1);
  CHECK(call(restored, "GET", "/sessions/" + sid + "/metrics").body == before_metrics);
  CHECK(queries(restored, sid) == pending);
  const auto again = call(restored, "POST", "/sessions/" + sid + "/labels", labels_for(pending, 0, 3).dump());
  CHECK(again.body["model_version"] == 2);
  CHECK(create(restored, core_body()) != sid);

  // A tampered log is refused rather than silently diverging.
  std::ofstream(dir / "sessions" / "s50.jsonl") << "{\"event\":\"label\",\"query_id\":\"mq1\",\"label\":1}\n";
  SessionManager broken(b.resources(), base_config(dir));
  CHECK_THROWS(broken.restore());
}

TEST_CASE("independent sessions in parallel") {
  const auto& b = fixtures::bundled();
  SessionManager m(b.resources(), base_config());
  std::vector<std::string> ids;
  for (int i = 0; i < 4; ++i) ids.push_back(create(m, core_body({{"config", {{"seed", i}}}})));
  std::vector<int> versions(4, -1);
  std::vector<std::thread> workers;
  for (int i = 0; i < 4; ++i) {
    workers.emplace_back([&, i] {
      const auto r = m.handle("GET", "/sessions/" + ids[i] + "/queries", "", {});
      const auto qs = json::parse(r.body)["queries"];
      const auto l = m.handle("POST", "/sessions/" + ids[i] + "/labels", labels_for(qs, 0, qs.size()).dump(), {});
      versions[i] = json::parse(l.body)["model_version"].get<int>();
    });
  }
  for (auto& t : workers) t.join();
  for (int v : versions) CHECK(v == 1);
}

TEST_CASE("HTTP front end") {
  const auto& b = fixtures::bundled();
  SessionManager m(b.resources(), base_config());
  HttpServer server(m);
  const int port = server.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client client("127.0.0.1", port);

  auto created = client.Post("/sessions", core_body(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  CHECK(created->get_header_value("Access-Control-Allow-Origin") == "*");
  const auto sid = json::parse(created->body)["session_id"].get<std::string>();

  auto got = client.Get("/sessions/" + sid + "/queries?limit=5");
  REQUIRE(got);
  CHECK(got->status == 200);
  const auto qs = json::parse(got->body)["queries"];
  CHECK(qs.size() == 5);

  auto posted = client.Post("/sessions/" + sid + "/labels", labels_for(qs, 0, 5).dump(), "application/json");
  REQUIRE(posted);
  CHECK(json::parse(posted->body)["model_version"] == 1);

  auto options = client.Options("/sessions");
  REQUIRE(options);
  CHECK(options->status == 204);
  CHECK(client.Get("/sessions/nope/metrics")->status == 404);
  server.stop();
}
