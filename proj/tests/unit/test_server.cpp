#include <doctest.h>

#include <httplib.h>

#include <sstream>
#include <thread>

#include "statescope/server.hpp"
#include "statescope/synth.hpp"
#include "tempdir.hpp"

using namespace statescope;
using nlohmann::json;

namespace {

/// Server on an ephemeral port, torn down with the fixture.
class Running {
public:
    explicit Running(store::SessionStore& st) {
        server::install_routes(http_, st);
        port_ = http_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { http_.listen_after_bind(); });
        http_.wait_until_ready();
    }
    ~Running() {
        http_.stop();
        thread_.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(120, 0);
        return c;
    }

private:
    httplib::Server http_;
    int port_ = 0;
    std::thread thread_;
};

json body_of(const httplib::Result& r) {
    REQUIRE(r);
    return json::parse(r->body);
}

void check_error(const httplib::Result& r, int status, const std::string& code) {
    REQUIRE(r);
    CHECK(r->status == status);
    const auto b = json::parse(r->body);
    CHECK(b.at("code") == code);
    CHECK(b.contains("stage"));
    CHECK(b.contains("detail"));
}

Session voice(std::uint64_t seed, int per_state, double noise = 1.0) {
    synth::SimOptions o;
    o.noise_scale = noise;
    return synth::simulate(synth::voice_kit_fixture(), synth::voice_kit_protocol(per_state, 1000, 3), 1000, seed, o);
}

}  // namespace

TEST_SUITE("server") {

TEST_CASE("status mapping") {
    CHECK(server::status_for(Error("SessionNotFound", "store", "")) == 404);
    CHECK(server::status_for(Error("ArtifactMissing", "store", "")) == 404);
    CHECK(server::status_for(Error("SessionExists", "store", "")) == 409);
    CHECK(server::status_for(Error("MalformedJson", "api", "")) == 400);
    CHECK(server::status_for(Error("IncompleteCollage", "fsm", "")) == 422);
    CHECK(server::status_for(Error("WriteFailed", "store", "", ErrorKind::Io)) == 500);
}

TEST_CASE("session lifecycle over HTTP") {
    oracle::TempDir tmp;
    store::SessionStore st(tmp.path());
    Running srv(st);
    auto cli = srv.client();

    REQUIRE(cli.Get("/health"));
    CHECK(body_of(cli.Get("/health")).at("status") == "ok");

    auto created = cli.Post("/sessions", R"({"session_id":"kit"})", "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    CHECK(body_of(created).at("session_id") == "kit");
    const auto anon = cli.Post("/sessions", "", "application/json");
    REQUIRE(anon);
    CHECK(anon->status == 201);
    CHECK(!body_of(anon).at("session_id").get<std::string>().empty());
    check_error(cli.Post("/sessions", R"({"session_id":"kit"})", "application/json"), 409, "SessionExists");
    check_error(cli.Post("/sessions", "{not json", "application/json"), 400, "MalformedJson");
    CHECK(body_of(cli.Get("/sessions")).at("sessions").size() == 2);
    check_error(cli.Get("/sessions/nope"), 404, "SessionNotFound");

    // Traces, then events and annotations.
    std::string power = "timestamp_ms,value\n";
    for (int i = 0; i < 600; ++i) power += std::to_string(i * 10) + "," + std::to_string(100 + (i / 200) * 50 + i % 3) + "\n";
    const json ingest{{"power_csv", power}, {"window_ms", 1000}, {"events", json::array({{{"t_ms", 2000}, {"kind", "press"}}})}};
    const auto ing = body_of(cli.Post("/sessions/kit/ingest", ingest.dump(), "application/json"));
    CHECK(ing.at("windows") == 6);
    CHECK(ing.at("events") == 1);

    const auto ev = body_of(cli.Post("/sessions/kit/events", R"({"kind":"release","t_ms":4000})", "application/json"));
    CHECK(ev.at("events").size() == 2);
    check_error(cli.Post("/sessions/kit/events", R"({"kind":"","t_ms":3000})", "application/json"), 422, "InvalidEvent");

    const json ann{{"annotations", json::array({{{"label", "idle"}, {"from_window", 0}, {"to_window", 1}},
                                                {{"label", "busy"}, {"from_window", 2}, {"to_window", 3}},
                                                {{"label", "idle"}, {"from_window", 4}, {"to_window", 5}}})}};
    const auto a = body_of(cli.Post("/sessions/kit/annotations", ann.dump(), "application/json"));
    CHECK(a.at("annotated_windows") == 6);
    check_error(cli.Post("/sessions/kit/annotations", R"({"label":"x","window_id":42})", "application/json"), 422,
                "UnknownWindow");

    const auto machine = body_of(cli.Get("/sessions/kit/fsm"));
    CHECK(machine.at("states").size() == 2);
    CHECK(machine.at("transitions").size() == 2);
    CHECK(fsm::import_fsm(machine).has_transition("idle", "press", "busy"));

    check_error(cli.Get("/sessions/kit/embedding"), 404, "ArtifactMissing");
    check_error(cli.Post("/sessions/kit/pipeline", R"({"algorithm":"spectral"})", "application/json"), 422,
                "UnknownAlgorithm");
}

TEST_CASE("pipeline, collage, classifier and verification stream") {
    oracle::TempDir tmp;
    store::SessionStore st(tmp.path());
    Running srv(st);
    auto cli = srv.client();

    REQUIRE(cli.Post("/sessions", R"({"session_id":"train"})", "application/json")->status == 201);
    const json upload{{"session", session_to_json(voice(1, 15))}};
    CHECK(body_of(cli.Post("/sessions/train/ingest", upload.dump(), "application/json")).at("windows") == 75);

    const auto run = cli.Post("/sessions/train/pipeline", R"({"seed":2,"perplexity":10,"n_iter":300})", "application/json");
    REQUIRE(run);
    CHECK(run->status == 200);
    const auto result = json::parse(run->body);
    CHECK(result.at("k").get<int>() >= 1);
    CHECK(result.at("manifest").at("files").contains("embedding.json"));

    const auto emb = body_of(cli.Get("/sessions/train/embedding"));
    CHECK(emb.at("points").size() == 75);
    CHECK(*st.read_artifact("train", store::kEmbeddingArtifact) == cli.Get("/sessions/train/embedding")->body);
    const auto corr = body_of(cli.Get("/sessions/train/correlation"));
    for (const auto& row : corr.at("cells")) {
        double sum = 0.0;
        for (double v : row) sum += v;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
    CHECK(body_of(cli.Get("/sessions/train/clusters")).at("labels").size() == 75);
    CHECK(body_of(cli.Get("/sessions/train/manifest")).contains("data_hash"));

    // Collage that forgets a state.
    const json partial{{"groups", json::array({{{"name", "off"}, {"members", {"power_off"}}}})}};
    check_error(cli.Post("/sessions/train/collage", partial.dump(), "application/json"), 422, "IncompleteCollage");

    const json groups{{"groups", json::array({{{"name", "off"}, {"members", {"power_off"}}},
                                              {{"name", "idle"}, {"members", {"listening"}}},
                                              {{"name", "busy"},
                                               {"members", {"speech_processing", "internet_access", "responding"}}}})}};
    const auto col = body_of(cli.Post("/sessions/train/collage", groups.dump(), "application/json"));
    CHECK(col.at("fsm").at("states").size() == 3);
    CHECK(!col.at("correlation").is_null());
    CHECK(col.at("correlation").at("rows").size() == 3);

    check_error(cli.Get("/sessions/train/verify/stream"), 404, "ArtifactMissing");
    const auto trained = body_of(cli.Post("/sessions/train/classifier", R"({"seed":3})", "application/json"));
    CHECK(trained.at("states") == json({"busy", "idle", "off"}));
    CHECK(trained.at("holdout").at("accuracy").get<double>() >= 0.95);

    // Replay a fresh noiseless session against the trained model.
    REQUIRE(cli.Post("/sessions", R"({"session_id":"replay"})", "application/json")->status == 201);
    const auto replay = voice(9, 4, 0.0);
    cli.Post("/sessions/replay/ingest", json{{"session", session_to_json(replay)}}.dump(), "application/json");
    const auto stream = cli.Get("/sessions/replay/verify/stream?classifier=train");
    REQUIRE(stream);
    CHECK(stream->status == 200);
    std::istringstream lines(stream->body);
    std::string line;
    std::size_t n = 0;
    while (std::getline(lines, line)) {
        const auto step = json::parse(line);
        CHECK(step.at("window_id") == replay.windows[n].window_id);
        CHECK(step.contains("predicted"));
        CHECK(step.at("transition_valid") == true);
        ++n;
    }
    CHECK(n == replay.windows.size());

    const auto merged = body_of(cli.Post("/sessions/replay/merge", "", "application/json"));
    CHECK(merged.contains("relabel"));
}

}  // TEST_SUITE
