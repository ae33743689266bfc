#include <gtest/gtest.h>

#include <thread>

#include "httplib.h"
#include "secda_dse/service.hpp"
#include "test_support.hpp"

using namespace secda_dse;
using secda_dse::testing::ScriptedProvider;
using secda_dse::testing::TempDir;

namespace {

Json exploration_body(const std::string& strategy = "exhaustive") {
    return Json{{"workload", {{"kernel_kind", "vecmul"}, {"length_l", 1023}, {"data_width", 32}}},
                {"device", read_json_file(secda_dse::testing::data_dir() / "devices" / "xc7z020.json")},
                {"directives", {{"buffer_depth", {1024, 2048}}, {"parallelism_p", {1, 2}}, {"data_width", {32}}}},
                {"strategy", strategy},
                {"candidates_per_iteration", 2}};
}

}  // namespace

class ServiceTest : public ::testing::Test {
protected:
    TempDir dir;
    std::unique_ptr<Service> service;

    void SetUp() override { service = std::make_unique<Service>(dir.path()); }

    ApiResponse get(const std::string& path, const std::map<std::string, std::string>& query = {}) {
        return service->handle("GET", path, query, "");
    }
    ApiResponse post(const std::string& path, const Json& body) {
        return service->handle("POST", path, {}, body.dump());
    }
};

TEST_F(ServiceTest, FreshWorkspaceHasNoRuns) {
    const auto response = get("/api/runs");
    EXPECT_EQ(response.status, 200);
    EXPECT_EQ(response.body, Json::array());
    EXPECT_EQ(get("/api/datapoints").body, Json::array());
}

TEST_F(ServiceTest, VerdictOnUnknownPoint) {
    const auto response = post("/api/datapoints/nope/verdict", Json{{"verdict", "accepted"}, {"notes", ""}});
    EXPECT_EQ(response.status, 404);
    EXPECT_EQ(response.body["code"], "unknown_point");
}

TEST_F(ServiceTest, UnknownRoutesAndRuns) {
    EXPECT_EQ(get("/api/nothing").status, 404);
    EXPECT_EQ(get("/api/runs/missing").body["code"], "unknown_run");
    EXPECT_EQ(get("/api/runs/..").status, 404);
    EXPECT_EQ(get("/api/explorations/exp-9999").body["code"], "unknown_exploration");
}

TEST_F(ServiceTest, BadRequestsAreRejected) {
    EXPECT_EQ(post("/api/explorations", Json{{"strategy", "heuristic"}}).status, 400);
    EXPECT_EQ(service->handle("POST", "/api/explorations", {}, "{not json").status, 400);
    EXPECT_EQ(get("/api/datapoints", {{"order", "vibes"}}).body["code"], "unknown_metric");
    EXPECT_EQ(get("/api/datapoints", {{"limit", "-3"}}).status, 400);
}

TEST_F(ServiceTest, ExplorationLifecycle) {
    const auto created = post("/api/explorations", exploration_body());
    ASSERT_EQ(created.status, 201);
    const auto id = created.body["exploration_id"].get<std::string>();
    EXPECT_EQ(id, "exp-0001");

    const auto first = post("/api/explorations/" + id + "/step", Json::object());
    ASSERT_EQ(first.status, 200);
    EXPECT_EQ(first.body["iteration"], 1);
    const auto second = post("/api/explorations/" + id + "/step", Json::object());
    EXPECT_EQ(second.body["iteration"], 2);
    EXPECT_EQ(post("/api/explorations/" + id + "/step", Json::object()).status, 409);

    const auto state = get("/api/explorations/" + id);
    EXPECT_EQ(state.body["iteration"], 2);
    EXPECT_EQ(state.body["evaluated_count"], 4);
    EXPECT_EQ(state.body["best"]["point"]["parallelism_p"], 1);
    EXPECT_EQ(state.body["best"]["objective"], 2060.0);

    const auto runs = get("/api/runs");
    ASSERT_EQ(runs.body.size(), 4u);
    const auto run_id = runs.body[0]["run_id"].get<std::string>();
    const auto detail = get("/api/runs/" + run_id);
    EXPECT_EQ(detail.status, 200);
    EXPECT_EQ(detail.body["report"]["total_cycles"], detail.body["summary"]["total_cycles"]);
    const auto source = get("/api/runs/" + run_id + "/source");
    EXPECT_EQ(source.body["files"].size(), 3u);

    const auto ranked = get("/api/datapoints", {{"order", "total_cycles"}, {"limit", "1"}});
    ASSERT_EQ(ranked.body.size(), 1u);
    EXPECT_EQ(ranked.body[0]["metrics"]["total_cycles"], 2060);
}

TEST_F(ServiceTest, VerdictsThroughTheExploration) {
    const auto id = post("/api/explorations", exploration_body()).body["exploration_id"].get<std::string>();
    post("/api/explorations/" + id + "/step", Json::object());
    const auto pending = get("/api/explorations/" + id).body["pending_verdicts"];
    ASSERT_EQ(pending.size(), 2u);
    const auto point_id = pending[0].get<std::string>();

    const Json body{{"verdict", "accepted"}, {"notes", "looks right"}};
    const auto first = post("/api/datapoints/" + point_id + "/verdict", body);
    ASSERT_EQ(first.status, 200);
    EXPECT_EQ(first.body["pending_verdicts"], 1);
    EXPECT_EQ(post("/api/datapoints/" + point_id + "/verdict", body).status, 200);
    EXPECT_EQ(post("/api/datapoints/" + point_id + "/verdict", Json{{"verdict", "rejected"}}).status, 409);
    EXPECT_EQ(get("/api/datapoints", {{"source", "human"}}).body.size(), 1u);
    EXPECT_EQ(post("/api/datapoints/" + point_id + "/verdict", Json{{"verdict", "pending"}}).status, 400);
}

TEST_F(ServiceTest, VerdictOnPointFromEarlierSession) {
    {
        const auto id = post("/api/explorations", exploration_body()).body["exploration_id"].get<std::string>();
        post("/api/explorations/" + id + "/step", Json::object());
    }
    service.reset();
    service = std::make_unique<Service>(dir.path());
    const auto pending = get("/api/datapoints", {{"verdict", "pending"}}).body;
    ASSERT_EQ(pending.size(), 2u);
    const auto point_id = pending[0]["point_id"].get<std::string>();
    const Json body{{"verdict", "rejected"}, {"notes", "no"}};
    EXPECT_EQ(post("/api/datapoints/" + point_id + "/verdict", body).status, 200);
    EXPECT_EQ(post("/api/datapoints/" + point_id + "/verdict", body).status, 200);
    EXPECT_EQ(get("/api/datapoints", {{"source", "human"}}).body.size(), 1u);
    EXPECT_EQ(post("/api/datapoints/" + point_id + "/verdict", Json{{"verdict", "accepted"}}).status, 409);
}

TEST_F(ServiceTest, LlmExplorationUsesProviderFactory) {
    service->set_provider_factory([] {
        return std::make_shared<ScriptedProvider>(
            std::deque<std::string>{"```\ndepth=1024 P=2 width=32 action=refine\n```"});
    });
    const auto id = post("/api/explorations", exploration_body("llm")).body["exploration_id"].get<std::string>();
    const auto step = post("/api/explorations/" + id + "/step", Json::object());
    ASSERT_EQ(step.status, 200);
    EXPECT_EQ(step.body["best"]["point"]["parallelism_p"], 2);
    const auto run_id = step.body["evaluated"][0].get<std::string>();
    EXPECT_FALSE(get("/api/runs/" + run_id).body["transcript"].is_null());
}

TEST_F(ServiceTest, SearchUsesWorkspaceIndex) {
    EXPECT_EQ(get("/api/search", {{"q", "axi"}}).body, Json::array());
    service.reset();
    load_or_build_index(secda_dse::testing::data_dir() / "corpus", dir / "index.json");
    service = std::make_unique<Service>(dir.path());
    const auto hits = get("/api/search", {{"q", "axi stream"}, {"k", "2"}});
    EXPECT_EQ(hits.status, 200);
    EXPECT_EQ(hits.body.size(), 2u);
}

TEST_F(ServiceTest, SecondServerOnSameWorkspaceIsLocked) {
    EXPECT_THROW(Service second(dir.path()), WorkspaceLocked);
}

TEST_F(ServiceTest, ServesOverHttp) {
    int port = 0;
    try {
        port = service->bind("127.0.0.1", 0);
    } catch (const PortInUse&) {
        GTEST_SKIP() << "loopback sockets unavailable";
    }
    std::thread worker([&] { service->listen(); });

    httplib::Client client("127.0.0.1", port);
    client.set_connection_timeout(5, 0);
    httplib::Result runs;
    for (int attempt = 0; attempt < 50 && !runs; ++attempt) {
        runs = client.Get("/api/runs");
        if (!runs) std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    ASSERT_TRUE(runs);
    EXPECT_EQ(runs->status, 200);
    EXPECT_EQ(Json::parse(runs->body), Json::array());

    const auto missing = client.Post("/api/datapoints/nope/verdict", R"({"verdict": "accepted"})", "application/json");
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 404);
    EXPECT_EQ(Json::parse(missing->body)["code"], "unknown_point");

    const auto created = client.Post("/api/explorations", exploration_body().dump(), "application/json");
    ASSERT_TRUE(created);
    EXPECT_EQ(created->status, 201);

    TempDir other_workspace;
    Service other_port_user(other_workspace.path());
    EXPECT_THROW(other_port_user.bind("127.0.0.1", port), PortInUse);

    service->stop();
    worker.join();
}

TEST(StatusFor, MapsErrorCodes) {
    EXPECT_EQ(status_for(UnknownPoint("x")), 404);
    EXPECT_EQ(status_for(MissingArtifact("report.json")), 404);
    EXPECT_EQ(status_for(ValidationError("f", "x")), 400);
    EXPECT_EQ(status_for(VerdictConflict("x")), 409);
    EXPECT_EQ(status_for(ProviderUnreachable("x")), 502);
    EXPECT_EQ(status_for(StorageError("x")), 500);
}
