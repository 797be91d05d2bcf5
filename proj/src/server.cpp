#include "statescope/server.hpp"

#include <httplib.h>

#include <iostream>
#include <memory>

#include "statescope/error.hpp"

namespace statescope::server {

namespace {

using nlohmann::json;

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), kJson);
}

void send_raw_json(httplib::Response& res, const std::string& body) {
    res.status = 200;
    res.set_content(body, kJson);
}

void send_error(httplib::Response& res, const Error& e) {
    send_json(res, {{"code", e.code()}, {"stage", e.stage()}, {"detail", e.detail()}}, status_for(e));
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return nullptr;
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw Error("MalformedJson", "api", e.what());
    }
}

/// Wraps a handler so module errors become {code, stage, detail} bodies.
template <typename F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            send_error(res, e);
        } catch (const json::exception& e) {
            send_error(res, Error("SchemaViolation", "api", e.what()));
        } catch (const std::exception& e) {
            send_error(res, Error("InternalError", "api", e.what(), ErrorKind::Io));
        }
    };
}

const std::string& id_of(const httplib::Request& req) { return req.path_params.at("id"); }

void require_session(const store::SessionStore& st, const std::string& id) {
    if (!st.exists(id)) throw Error("SessionNotFound", "store", "no session `" + id + "`");
}

std::string artifact_or_404(const store::SessionStore& st, const std::string& id, const std::string& name) {
    require_session(st, id);
    auto text = st.read_artifact(id, name);
    if (!text) throw Error("ArtifactMissing", "store", "session `" + id + "` has no " + name + "; run the pipeline first");
    return *text;
}

json string_array(const std::vector<std::string>& v) { return json(v); }

void apply_annotation(Session& s, const json& a) {
    const auto label = a.at("label").get<std::string>();
    if (a.contains("window_id")) {
        const auto w = a.at("window_id").get<std::int64_t>();
        store::annotate(s, label, w, w);
    } else {
        store::annotate(s, label, a.at("from_window").get<std::int64_t>(), a.at("to_window").get<std::int64_t>());
    }
}

}  // namespace

int status_for(const Error& e) {
    const auto& c = e.code();
    if (c == "SessionNotFound" || c == "ArtifactMissing") return 404;
    if (c == "SessionExists") return 409;
    if (c == "MalformedJson") return 400;
    return e.kind() == ErrorKind::Io ? 500 : 422;
}

void install_routes(httplib::Server& http, store::SessionStore& st) {
    http.Get("/health", guarded([](const auto&, auto& res) { send_json(res, {{"status", "ok"}}); }));

    http.Get("/sessions", guarded([&st](const auto&, auto& res) { send_json(res, {{"sessions", string_array(st.list())}}); }));

    http.Post("/sessions", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        std::optional<std::string> id;
        PsdUnit unit = PsdUnit::Decibel;
        if (body.is_object()) {
            if (body.contains("session_id")) id = body.at("session_id").get<std::string>();
            if (body.value("psd_unit", "db") == "linear") unit = PsdUnit::Linear;
        }
        const auto created = st.create(id, unit);
        send_json(res, {{"session_id", created}}, 201);
    }));

    http.Get("/sessions/:id", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        send_json(res, session_to_json(st.load(id_of(req))));
    }));

    http.Post("/sessions/:id/ingest", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        const auto& id = id_of(req);
        require_session(st, id);
        const auto body = parse_body(req);
        Session s;
        if (body.is_object() && body.contains("session")) {
            s = session_from_json(body.at("session"));
        } else {
            s = store::ingest_traces(id, store::ingest_from_json(body));
        }
        st.put(id, std::move(s));
        const auto saved = st.load(id);
        send_json(res, {{"session_id", id}, {"windows", saved.windows.size()}, {"events", saved.events.size()}});
    }));

    http.Post("/sessions/:id/events", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        if (!body.is_object()) throw Error("SchemaViolation", "api", "event body must be an object");
        const auto saved = st.mutate(id_of(req), [&](Session& s) {
            const json list = body.contains("events") ? body.at("events") : json::array({body});
            for (const auto& e : list) store::add_event(s, e.at("kind").get<std::string>(), e.at("t_ms").get<TimestampMs>());
        });
        send_json(res, {{"events", session_to_json(saved).at("events")}});
    }));

    http.Post("/sessions/:id/annotations", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        if (!body.is_object()) throw Error("SchemaViolation", "api", "annotation body must be an object");
        const auto saved = st.mutate(id_of(req), [&](Session& s) {
            if (body.contains("annotations")) {
                for (const auto& a : body.at("annotations")) apply_annotation(s, a);
            } else {
                apply_annotation(s, body);
            }
        });
        std::size_t annotated = 0;
        for (const auto& w : saved.windows) annotated += w.annotation ? 1 : 0;
        send_json(res, {{"annotated_windows", annotated}, {"labels", session_to_json(saved).at("labels")}});
    }));

    http.Post("/sessions/:id/pipeline", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        const auto config = pipeline::config_from_json(parse_body(req));
        const auto& id = id_of(req);
        const auto result = st.run_pipeline(id, config);
        send_json(res, {{"config", pipeline::config_to_json(result.config)},
                        {"k", result.clusters.k},
                        {"eps", result.eps ? json(*result.eps) : json(nullptr)},
                        {"kl_final", result.embedding ? json(result.embedding->kl_final) : json(nullptr)},
                        {"manifest", st.manifest(id)}});
    }));

    http.Get("/sessions/:id/embedding", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        send_raw_json(res, artifact_or_404(st, id_of(req), store::kEmbeddingArtifact));
    }));
    http.Get("/sessions/:id/clusters", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        send_raw_json(res, artifact_or_404(st, id_of(req), store::kClustersArtifact));
    }));
    http.Get("/sessions/:id/correlation", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        send_raw_json(res, artifact_or_404(st, id_of(req), store::kCorrelationArtifact));
    }));
    http.Get("/sessions/:id/manifest", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        require_session(st, id_of(req));
        send_json(res, st.manifest(id_of(req)));
    }));

    http.Get("/sessions/:id/fsm", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        const auto s = st.load(id_of(req));
        send_json(res, fsm::export_fsm(fsm::build_fsm(s)));
    }));

    http.Post("/sessions/:id/collage", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        const auto collage = fsm::collage_from_json(parse_body(req));
        const auto& id = id_of(req);
        fsm::Fsm result;
        st.mutate(id, [&](Session& s) {
            auto applied = fsm::apply_collage(fsm::build_fsm(s), s, collage);
            result = std::move(applied.fsm);
            s = std::move(applied.session);
        });
        const auto corr = st.read_artifact(id, store::kCorrelationArtifact);
        send_json(res, {{"fsm", fsm::export_fsm(result)}, {"correlation", corr ? json::parse(*corr) : json(nullptr)}});
    }));

    http.Post("/sessions/:id/merge", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        const auto& id = id_of(req);
        fsm::MergeResult merged;
        st.mutate(id, [&](Session& s) {
            merged = fsm::merge_by_transition_event(fsm::build_fsm(s), s);
            s = merged.session;
        });
        send_json(res, {{"fsm", fsm::export_fsm(merged.fsm)}, {"relabel", merged.relabel}});
    }));

    http.Post("/sessions/:id/classifier", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        const std::uint64_t seed = body.is_object() ? body.value("seed", std::uint64_t{0}) : 0;
        const auto model = st.train(id_of(req), seed);
        json states = json::array();
        for (const auto& [label, c] : model.classifier.centroids) states.push_back(label);
        send_json(res, {{"states", states},
                        {"unknown_threshold", model.classifier.unknown_threshold},
                        {"holdout", cluster::report_to_json(model.holdout)}});
    }));

    http.Get("/sessions/:id/verify/stream", guarded([&st](const httplib::Request& req, httplib::Response& res) {
        const auto& id = id_of(req);
        auto session = std::make_shared<Session>(st.load(id));
        const std::string model_id = req.has_param("classifier") ? req.get_param_value("classifier") : id;
        auto model = std::make_shared<store::TrainedModel>(st.load_model(model_id));
        res.status = 200;
        res.set_chunked_content_provider("application/x-ndjson", [session, model](std::size_t, httplib::DataSink& sink) {
            bool open = true;
            verify::stepwise_verify(model->classifier, model->fsm, *session, [&](const verify::VerificationStep& step) {
                if (!open) return;
                const auto line = verify::step_to_json(step).dump() + "\n";
                open = sink.write(line.data(), line.size());
            });
            sink.done();
            return true;
        });
    }));
}

int serve(store::SessionStore& st, const std::string& host, int port) {
    httplib::Server http;
    install_routes(http, st);
    std::cerr << "statescope: listening on " << host << ":" << port << ", store " << st.root().string() << "\n";
    if (!http.listen(host, port)) {
        throw Error("BindFailed", "serve", "cannot listen on " + host + ":" + std::to_string(port), ErrorKind::Io);
    }
    return 0;
}

}  // namespace statescope::server
