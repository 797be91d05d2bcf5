#include "statescope/fsm.hpp"

#include <algorithm>
#include <numeric>

#include "statescope/error.hpp"

namespace statescope::fsm {

namespace {

constexpr const char* kStage = "fsm";

struct DisjointSets {
    std::vector<std::size_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

void sort_states(std::vector<StateLabel>& states) {
    std::sort(states.begin(), states.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
}

/// Rewrites window annotations and the label set through `rename`, giving
/// the new labels the origins recorded in `states`.
Session relabel_session(const Session& session, const std::map<std::string, std::string>& rename,
                        const std::vector<StateLabel>& states) {
    Session out = session;
    for (auto& w : out.windows) {
        if (!w.annotation) continue;
        if (auto it = rename.find(*w.annotation); it != rename.end()) w.annotation = it->second;
    }
    // Keeps the session's label order; each renamed label is replaced by its
    // new state at its first occurrence.
    std::vector<StateLabel> labels;
    auto emitted = [&](const std::string& name) {
        return std::any_of(labels.begin(), labels.end(), [&](const auto& s) { return s.name == name; });
    };
    auto state_named = [&](const std::string& name) {
        return std::find_if(states.begin(), states.end(), [&](const auto& s) { return s.name == name; });
    };
    for (const auto& l : session.labels) {
        const auto it = rename.find(l.name);
        const std::string& name = it != rename.end() ? it->second : l.name;
        if (emitted(name)) continue;
        const auto st = state_named(name);
        labels.push_back(st != states.end() ? *st : l);
    }
    for (const auto& st : states) {
        if (!emitted(st.name)) labels.push_back(st);
    }
    out.labels = std::move(labels);
    return out;
}

}  // namespace

const StateLabel* Fsm::find_state(const std::string& name) const {
    auto it = std::lower_bound(states.begin(), states.end(), name,
                               [](const StateLabel& s, const std::string& n) { return s.name < n; });
    return it != states.end() && it->name == name ? &*it : nullptr;
}

bool Fsm::has_transition(const std::string& from, const std::string& event, const std::string& to) const {
    return transitions.contains(Transition{from, event, to});
}

Fsm build_fsm(const Session& session) {
    Fsm out;
    std::map<std::string, LabelOrigin> seen;
    for (const auto& w : session.windows) {
        if (!w.annotation) throw Error("UnannotatedWindow", kStage, "window " + std::to_string(w.window_id));
        if (!seen.contains(*w.annotation)) {
            const auto* label = session.find_label(*w.annotation);
            seen[*w.annotation] = label ? label->origin : LabelOrigin::Human;
        }
    }
    for (const auto& [name, origin] : seen) out.states.push_back({name, origin});
    for (const auto& e : session.events) {
        const auto* from = session.find_window(e.from_window);
        const auto* to = session.find_window(e.to_window);
        if (!from || !to) {
            throw Error("UnknownWindow", kStage, "event " + std::to_string(e.event_id) + " references a missing window");
        }
        out.transitions.insert({*from->annotation, e.kind, *to->annotation});
    }
    if (!session.windows.empty()) out.initial = session.windows.front().annotation;
    return out;
}

MergeResult merge_by_transition_event(const Fsm& fsm, const Session& session) {
    const std::size_t n = fsm.states.size();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) index[fsm.states[i].name] = i;

    DisjointSets sets(n);
    std::map<std::string, std::size_t> first_target;
    for (const auto& t : fsm.transitions) {
        const auto to = index.at(t.to);
        auto [it, fresh] = first_target.emplace(t.event, to);
        if (!fresh) sets.unite(it->second, to);
    }

    // Earliest annotated member names the group; states never seen in a
    // window fall back to alphabetical order.
    std::vector<std::size_t> rank(n, session.windows.size());
    for (std::size_t w = session.windows.size(); w-- > 0;) {
        const auto& a = session.windows[w].annotation;
        if (a && index.contains(*a)) rank[index.at(*a)] = w;
    }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[sets.find(i)].push_back(i);

    MergeResult out;
    for (const auto& [root, members] : groups) {
        const auto head = *std::min_element(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            return std::tie(rank[a], fsm.states[a].name) < std::tie(rank[b], fsm.states[b].name);
        });
        StateLabel label = fsm.states[head];
        if (members.size() > 1) label.origin = LabelOrigin::Merged;
        for (auto m : members) out.relabel[fsm.states[m].name] = label.name;
        out.fsm.states.push_back(label);
    }
    sort_states(out.fsm.states);
    for (const auto& t : fsm.transitions) {
        out.fsm.transitions.insert({out.relabel.at(t.from), t.event, out.relabel.at(t.to)});
    }
    if (fsm.initial) out.fsm.initial = out.relabel.at(*fsm.initial);
    out.session = relabel_session(session, out.relabel, out.fsm.states);
    return out;
}

CorrelationMatrix correlation_matrix(std::span<const std::string> annotations, std::span<const int> clusters) {
    if (annotations.size() != clusters.size()) {
        throw Error("LengthMismatch", kStage,
                    std::to_string(annotations.size()) + " annotations vs " + std::to_string(clusters.size()) +
                        " cluster labels");
    }
    CorrelationMatrix m;
    const std::set<std::string> rows(annotations.begin(), annotations.end());
    m.rows.assign(rows.begin(), rows.end());
    std::set<int> cols(clusters.begin(), clusters.end());
    const bool noise = cols.erase(-1) > 0;
    m.cols.assign(cols.begin(), cols.end());
    if (noise) m.cols.push_back(-1);

    std::map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < m.rows.size(); ++i) row_of[m.rows[i]] = i;
    std::map<int, std::size_t> col_of;
    for (std::size_t j = 0; j < m.cols.size(); ++j) col_of[m.cols[j]] = j;

    std::vector<std::vector<std::int64_t>> counts(m.rows.size(), std::vector<std::int64_t>(m.cols.size(), 0));
    m.row_counts.assign(m.rows.size(), 0);
    for (std::size_t i = 0; i < annotations.size(); ++i) {
        const auto r = row_of[annotations[i]];
        ++counts[r][col_of[clusters[i]]];
        ++m.row_counts[r];
    }
    m.cells.assign(m.rows.size(), std::vector<double>(m.cols.size(), 0.0));
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        for (std::size_t c = 0; c < m.cols.size(); ++c) {
            m.cells[r][c] = static_cast<double>(counts[r][c]) / static_cast<double>(m.row_counts[r]);
        }
    }
    return m;
}

CorrelationMatrix correlation_matrix(const Session& session) {
    std::vector<std::string> annotations;
    std::vector<int> clusters;
    for (const auto& w : session.windows) {
        if (!w.annotation) throw Error("UnannotatedWindow", kStage, "window " + std::to_string(w.window_id));
        if (!w.cluster) throw Error("UnclusteredWindow", kStage, "window " + std::to_string(w.window_id));
        annotations.push_back(*w.annotation);
        clusters.push_back(*w.cluster);
    }
    return correlation_matrix(annotations, clusters);
}

nlohmann::json correlation_to_json(const CorrelationMatrix& m) {
    return {{"rows", m.rows}, {"cols", m.cols}, {"cells", m.cells}, {"row_counts", m.row_counts}};
}

CorrelationMatrix correlation_from_json(const nlohmann::json& doc) {
    try {
        CorrelationMatrix m;
        m.rows = doc.at("rows").get<std::vector<std::string>>();
        m.cols = doc.at("cols").get<std::vector<int>>();
        m.cells = doc.at("cells").get<std::vector<std::vector<double>>>();
        m.row_counts = doc.at("row_counts").get<std::vector<std::int64_t>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error("SchemaViolation", kStage, std::string("correlation matrix: ") + e.what());
    }
}

CollageMap collage_from_json(const nlohmann::json& doc) {
    // Accepts {"groups": [{"name", "members"}]} or the shorthand {"name": [members]}.
    try {
        CollageMap out;
        if (doc.is_object() && doc.contains("groups")) {
            for (const auto& g : doc.at("groups")) {
                out.groups.push_back({g.at("name").get<std::string>(), g.at("members").get<std::vector<std::string>>()});
            }
        } else if (doc.is_object()) {
            for (const auto& [name, members] : doc.items()) {
                out.groups.push_back({name, members.get<std::vector<std::string>>()});
            }
        } else {
            throw Error("SchemaViolation", kStage, "collage must be a JSON object");
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw Error("SchemaViolation", kStage, std::string("collage: ") + e.what());
    }
}

nlohmann::json collage_to_json(const CollageMap& collage) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : collage.groups) groups.push_back({{"name", g.name}, {"members", g.members}});
    return {{"groups", groups}};
}

CollageResult apply_collage(const Fsm& fsm, const Session& session, const CollageMap& collage) {
    std::map<std::string, std::string> rename;
    std::set<std::string> names;
    for (const auto& g : collage.groups) {
        if (g.name.empty()) throw Error("InvalidCollage", kStage, "group name is empty");
        if (!names.insert(g.name).second) throw Error("InvalidCollage", kStage, "duplicate group `" + g.name + "`");
        if (g.members.empty()) throw Error("InvalidCollage", kStage, "group `" + g.name + "` has no members");
        for (const auto& m : g.members) {
            if (!fsm.find_state(m)) throw Error("UnknownLabel", kStage, "`" + m + "` is not an FSM state");
            if (!rename.emplace(m, g.name).second) {
                throw Error("InvalidCollage", kStage, "`" + m + "` appears in more than one group");
            }
        }
    }
    std::string missing;
    for (const auto& s : fsm.states) {
        if (rename.contains(s.name)) continue;
        missing += missing.empty() ? s.name : ", " + s.name;
    }
    if (!missing.empty()) throw Error("IncompleteCollage", kStage, "missing labels: " + missing);

    CollageResult out;
    for (const auto& g : collage.groups) {
        if (g.members.size() == 1 && g.members.front() == g.name) {
            out.fsm.states.push_back(*fsm.find_state(g.name));
        } else {
            out.fsm.states.push_back({g.name, LabelOrigin::Collaged});
        }
    }
    sort_states(out.fsm.states);
    for (const auto& t : fsm.transitions) out.fsm.transitions.insert({rename.at(t.from), t.event, rename.at(t.to)});
    if (fsm.initial) out.fsm.initial = rename.at(*fsm.initial);
    out.session = relabel_session(session, rename, out.fsm.states);
    return out;
}

nlohmann::json export_fsm(const Fsm& fsm) {
    nlohmann::json states = nlohmann::json::array();
    for (const auto& s : fsm.states) states.push_back({{"name", s.name}, {"origin", std::string(to_string(s.origin))}});
    nlohmann::json transitions = nlohmann::json::array();
    for (const auto& t : fsm.transitions) transitions.push_back({{"from", t.from}, {"event", t.event}, {"to", t.to}});
    return {{"schema", kFsmSchema},
            {"states", states},
            {"transitions", transitions},
            {"initial", fsm.initial ? nlohmann::json(*fsm.initial) : nlohmann::json(nullptr)}};
}

Fsm import_fsm(const nlohmann::json& doc) {
    auto bad = [](const std::string& what) { return Error("SchemaViolation", kStage, what); };
    try {
        if (!doc.is_object()) throw bad("FSM document must be an object");
        if (!doc.contains("schema") || !doc.at("schema").is_number_integer() || doc.at("schema").get<int>() != kFsmSchema) {
            throw bad("unsupported FSM schema version");
        }
        Fsm out;
        for (const auto& s : doc.at("states")) {
            out.states.push_back({s.at("name").get<std::string>(), parse_origin(s.at("origin").get<std::string>())});
        }
        if (out.states.empty()) throw bad("FSM has no states");
        sort_states(out.states);
        for (std::size_t i = 1; i < out.states.size(); ++i) {
            if (out.states[i].name == out.states[i - 1].name) throw bad("duplicate state `" + out.states[i].name + "`");
        }
        for (const auto& t : doc.at("transitions")) {
            Transition tr{t.at("from").get<std::string>(), t.at("event").get<std::string>(), t.at("to").get<std::string>()};
            if (!out.find_state(tr.from) || !out.find_state(tr.to)) throw bad("transition endpoint is not a state");
            if (!out.transitions.insert(tr).second) throw bad("duplicate transition");
        }
        if (doc.contains("initial") && !doc.at("initial").is_null()) {
            out.initial = doc.at("initial").get<std::string>();
            if (!out.find_state(*out.initial)) throw bad("initial state is not a state");
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw bad(e.what());
    }
}

}  // namespace statescope::fsm
