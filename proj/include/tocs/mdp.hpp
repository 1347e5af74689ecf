#pragma once

#include "tocs/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

namespace tocs {

using StateId = std::int32_t;

struct MdpAction {
    enum class Kind { transfer, wait, coord_change, decide };

    Kind kind = Kind::wait;
    int entity = -1;  // transfer target
    int option = -1;  // decide option
    std::string name; // unique within an Mdp, used by constraint files

    static MdpAction transfer(int entity, std::string name) {
        return {Kind::transfer, entity, -1, std::move(name)};
    }
    static MdpAction wait() { return {Kind::wait, -1, -1, "wait"}; }
    static MdpAction coord_change(std::string name = "coord-change") {
        return {Kind::coord_change, -1, -1, std::move(name)};
    }
    static MdpAction decide(int option, std::string name) {
        return {Kind::decide, -1, option, std::move(name)};
    }
};

struct Transition {
    StateId to = -1;
    real prob = 0.0;
};

/// One admissible action at one state: its global action index, immediate
/// reward and sparse successor distribution.
struct ChoiceRow {
    int action = -1;
    real reward = 0.0;
    std::vector<Transition> successors;
};

struct StateInfo {
    bool terminal = false;
    real terminal_reward = 0.0;
    int controlling_entity = -1;
    int time_index = 0;
    int change_count = 0;
    int responded_entity = -1; // >= 0 once someone answered
    std::vector<real> features;
    std::string label;
};

/// Explicit finite decision process over adjustable-autonomy states.  State
/// features are exposed as named numeric values so user constraints can
/// match on them; label dictionaries translate symbolic feature values.
struct Mdp {
    std::vector<std::string> feature_names;
    std::vector<std::map<std::string, real>> feature_labels; // per feature, may be empty
    std::vector<std::string> entity_names;
    std::vector<MdpAction> actions;
    std::vector<StateInfo> states;
    std::vector<std::vector<ChoiceRow>> rows; // parallel to states
    StateId initial = 0;

    std::size_t size() const { return states.size(); }

    int feature_index(const std::string& name) const {
        for (std::size_t i = 0; i < feature_names.size(); ++i)
            if (feature_names[i] == name) return static_cast<int>(i);
        return -1;
    }

    int action_index(const std::string& name) const {
        for (std::size_t i = 0; i < actions.size(); ++i)
            if (actions[i].name == name) return static_cast<int>(i);
        return -1;
    }

    real feature(StateId s, int f) const {
        return states[static_cast<std::size_t>(s)].features.at(static_cast<std::size_t>(f));
    }

    /// Distributions must sum to one; features must be rectangular.
    void validate() const {
        if (states.empty()) throw validation_error("mdp: no states");
        if (rows.size() != states.size()) throw validation_error("mdp: rows/states mismatch");
        if (initial < 0 || static_cast<std::size_t>(initial) >= states.size())
            throw validation_error("mdp: initial state out of range");
        for (std::size_t s = 0; s < states.size(); ++s) {
            if (states[s].features.size() != feature_names.size())
                throw validation_error("mdp: state feature vector has wrong arity");
            if (states[s].terminal && !rows[s].empty())
                throw validation_error("mdp: terminal state has actions");
            for (const auto& row : rows[s]) {
                if (row.action < 0 || static_cast<std::size_t>(row.action) >= actions.size())
                    throw validation_error("mdp: action index out of range");
                real mass = 0.0;
                if (row.successors.empty())
                    throw validation_error("mdp: choice with no successors");
                for (const auto& tr : row.successors) {
                    if (tr.to < 0 || static_cast<std::size_t>(tr.to) >= states.size())
                        throw validation_error("mdp: successor out of range");
                    if (!(tr.prob >= 0.0) || tr.prob > 1.0 + 1e-9)
                        throw validation_error("mdp: transition probability outside [0, 1]");
                    mass += tr.prob;
                }
                if (std::abs(mass - 1.0) > 1e-9)
                    throw validation_error("mdp: transition distribution does not sum to 1");
            }
        }
    }
};

/// Kahn topological order over the successor graph (self-loops and cycles
/// yield an empty result).  Terminal states come last; a backward sweep over
/// the reversed order is one exact dynamic-programming pass.
inline std::vector<StateId> topological_order(const Mdp& mdp) {
    std::size_t n = mdp.size();
    std::vector<int> indegree(n, 0);
    for (std::size_t s = 0; s < n; ++s)
        for (const auto& row : mdp.rows[s])
            for (const auto& tr : row.successors)
                if (static_cast<std::size_t>(tr.to) != s) indegree[static_cast<std::size_t>(tr.to)]++;
                else return {}; // self loop
    std::vector<StateId> order;
    order.reserve(n);
    std::vector<StateId> queue;
    for (std::size_t s = 0; s < n; ++s)
        if (indegree[s] == 0) queue.push_back(static_cast<StateId>(s));
    std::sort(queue.begin(), queue.end());
    while (!queue.empty()) {
        StateId s = queue.back();
        queue.pop_back();
        order.push_back(s);
        for (const auto& row : mdp.rows[static_cast<std::size_t>(s)])
            for (const auto& tr : row.successors)
                if (--indegree[static_cast<std::size_t>(tr.to)] == 0) queue.push_back(tr.to);
    }
    if (order.size() != n) return {};
    return order;
}

inline bool is_acyclic(const Mdp& mdp) { return !topological_order(mdp).empty(); }

/// Golden-test dump: one line per transition
///   state_id, action, successor_id, probability, reward
/// followed by terminal lines with action "-".
inline void dump_transitions(const Mdp& mdp, std::ostream& os) {
    char buf[160];
    for (std::size_t s = 0; s < mdp.size(); ++s) {
        for (const auto& row : mdp.rows[s]) {
            for (const auto& tr : row.successors) {
                std::snprintf(buf, sizeof buf, "%zu %s %d %.12g %.12g\n", s,
                              mdp.actions[static_cast<std::size_t>(row.action)].name.c_str(),
                              tr.to, tr.prob, row.reward);
                os << buf;
            }
        }
        if (mdp.states[s].terminal) {
            std::snprintf(buf, sizeof buf, "%zu - %zu 1 %.12g\n", s, s,
                          mdp.states[s].terminal_reward);
            os << buf;
        }
    }
}

/// Incremental builder with feature-keyed state lookup.
class MdpBuilder {
  public:
    explicit MdpBuilder(std::vector<std::string> feature_names) {
        mdp_.feature_names = std::move(feature_names);
        mdp_.feature_labels.resize(mdp_.feature_names.size());
    }

    Mdp& mdp() { return mdp_; }

    int add_action(MdpAction a) {
        mdp_.actions.push_back(std::move(a));
        return static_cast<int>(mdp_.actions.size() - 1);
    }

    void set_label(int feature, const std::string& name, real value) {
        mdp_.feature_labels[static_cast<std::size_t>(feature)][name] = value;
    }

    StateId state(const std::vector<real>& features, StateInfo proto = {}) {
        auto key = features;
        auto it = index_.find(key);
        if (it != index_.end()) return it->second;
        proto.features = features;
        mdp_.states.push_back(std::move(proto));
        mdp_.rows.emplace_back();
        StateId id = static_cast<StateId>(mdp_.states.size() - 1);
        index_.emplace(std::move(key), id);
        return id;
    }

    /// Successor ids must be materialized before calling: creating states
    /// reallocates the row table, so no reference into it may be held.
    void add_choice(StateId s, int action, real reward, std::vector<Transition> successors) {
        mdp_.rows[static_cast<std::size_t>(s)].push_back(
            ChoiceRow{action, reward, std::move(successors)});
    }

  private:
    struct VecHash {
        std::size_t operator()(const std::vector<real>& v) const {
            std::size_t h = 1469598103934665603ULL;
            for (real x : v) {
                std::uint64_t bits;
                static_assert(sizeof bits == sizeof x);
                std::memcpy(&bits, &x, sizeof bits);
                h = (h ^ bits) * 1099511628211ULL;
            }
            return h;
        }
    };
    Mdp mdp_;
    std::unordered_map<std::vector<real>, StateId, VecHash> index_;
};

} // namespace tocs
