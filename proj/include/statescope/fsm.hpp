#pragma once

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "statescope/trace.hpp"

namespace statescope::fsm {

struct Transition {
    std::string from;
    std::string event;
    std::string to;
    auto operator<=>(const Transition&) const = default;
};

struct Fsm {
    std::vector<StateLabel> states;  // sorted by name, names unique
    std::set<Transition> transitions;
    std::optional<std::string> initial;

    bool operator==(const Fsm&) const = default;
    const StateLabel* find_state(const std::string& name) const;
    bool has_transition(const std::string& from, const std::string& event, const std::string& to) const;
};

/// One state per distinct annotation and one (deduplicated) transition per
/// event. Windows must all be annotated.
Fsm build_fsm(const Session& session);

struct MergeResult {
    Fsm fsm;
    Session session;                           // annotations rewritten
    std::map<std::string, std::string> relabel;  // old state -> new state, total over old states
};

/// Unions every set of states entered by the same event kind. A merged
/// state takes the name of its member annotated earliest in the session.
MergeResult merge_by_transition_event(const Fsm& fsm, const Session& session);

struct CorrelationMatrix {
    std::vector<std::string> rows;  // annotation labels, sorted
    std::vector<int> cols;          // cluster ids ascending, noise (-1) last
    std::vector<std::vector<double>> cells;
    std::vector<std::int64_t> row_counts;
};

CorrelationMatrix correlation_matrix(std::span<const std::string> annotations, std::span<const int> clusters);

/// Uses each window's annotation and cluster; both must be present.
CorrelationMatrix correlation_matrix(const Session& session);

nlohmann::json correlation_to_json(const CorrelationMatrix& m);
CorrelationMatrix correlation_from_json(const nlohmann::json& doc);

struct CollageGroup {
    std::string name;
    std::vector<std::string> members;
};

struct CollageMap {
    std::vector<CollageGroup> groups;
};

CollageMap collage_from_json(const nlohmann::json& doc);
nlohmann::json collage_to_json(const CollageMap& collage);

struct CollageResult {
    Fsm fsm;
    Session session;
};

/// Replaces every state by the name of its group. Groups of more than one
/// state (or renamed singletons) become collaged labels; self-loops created
/// by the merge stay.
CollageResult apply_collage(const Fsm& fsm, const Session& session, const CollageMap& collage);

inline constexpr int kFsmSchema = 1;

nlohmann::json export_fsm(const Fsm& fsm);
Fsm import_fsm(const nlohmann::json& doc);

}  // namespace statescope::fsm
