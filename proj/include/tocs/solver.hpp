#pragma once

#include "tocs/mdp.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tocs {

// ---------------------------------------------------------------------------
// Constraints
// ---------------------------------------------------------------------------

enum class CmpOp { eq, ne, lt, gt, le, ge };

inline bool cmp_apply(CmpOp op, real lhs, real rhs) {
    switch (op) {
    case CmpOp::eq: return lhs == rhs;
    case CmpOp::ne: return lhs != rhs;
    case CmpOp::lt: return lhs < rhs;
    case CmpOp::gt: return lhs > rhs;
    case CmpOp::le: return lhs <= rhs;
    case CmpOp::ge: return lhs >= rhs;
    }
    return false;
}

struct FeatureTest {
    std::string feature;
    CmpOp op = CmpOp::eq;
    real value = 0.0;
};

struct ActionTest {
    bool negate = false; // false: action == name, true: action != name
    std::string name;
};

/// A user rule over states (a conjunction of feature comparisons) and
/// optionally the action taken there.  Forbidding rules must never trigger;
/// requiring rules must trigger with probability one.
struct Constraint {
    enum class Kind { forbidden_state, forbidden_action, required_state, required_action };

    std::string id;
    Kind kind = Kind::forbidden_state;
    std::vector<FeatureTest> state_tests;
    std::optional<ActionTest> action_test;

    bool forbidding() const {
        return kind == Kind::forbidden_state || kind == Kind::forbidden_action;
    }
    bool on_action() const {
        return kind == Kind::forbidden_action || kind == Kind::required_action;
    }
};

/// Compiled against one Mdp: feature indices resolved, the action matcher
/// baked into a per-action-id table.
struct CompiledConstraint {
    const Constraint* source = nullptr;
    std::vector<std::pair<int, FeatureTest>> tests;
    std::vector<char> action_match; // by action id; empty means match-all
    int requiring_index = -1;       // position among requiring constraints

    bool matches_state(const Mdp& mdp, StateId s) const {
        for (const auto& [fi, t] : tests)
            if (!cmp_apply(t.op, mdp.feature(s, fi), t.value)) return false;
        return true;
    }
    bool matches_action(const Mdp&, int action) const {
        return action_match.empty() || action_match[static_cast<std::size_t>(action)] != 0;
    }
    bool matches(const Mdp& mdp, StateId s, int action) const {
        if (!matches_state(mdp, s)) return false;
        return !source->on_action() || matches_action(mdp, action);
    }
};

inline std::vector<CompiledConstraint> compile_constraints(const Mdp& mdp,
                                                           const std::vector<Constraint>& cs) {
    std::vector<CompiledConstraint> out;
    int requiring = 0;
    for (const auto& c : cs) {
        if (c.id.empty()) throw validation_error("constraint: empty id");
        if (c.on_action() && !c.action_test)
            throw validation_error("constraint " + c.id + ": action rule needs an action test");
        CompiledConstraint cc;
        cc.source = &c;
        for (const auto& t : c.state_tests) {
            int fi = mdp.feature_index(t.feature);
            if (fi < 0)
                throw validation_error("constraint " + c.id + ": unknown feature '" + t.feature + "'");
            cc.tests.emplace_back(fi, t);
        }
        if (c.action_test) {
            cc.action_match.resize(mdp.actions.size());
            for (std::size_t a = 0; a < mdp.actions.size(); ++a) {
                bool eq = mdp.actions[a].name == c.action_test->name;
                cc.action_match[a] = static_cast<char>(c.action_test->negate ? !eq : eq);
            }
        }
        if (!c.forbidding()) cc.requiring_index = requiring++;
        out.push_back(std::move(cc));
    }
    if (requiring > 64)
        throw validation_error("constraints: at most 64 requiring constraints supported");
    return out;
}

// ---------------------------------------------------------------------------
// Constrained values
// ---------------------------------------------------------------------------

/// Value triple: forbidden flag, bitmask of requiring constraints guaranteed
/// from here, and expected utility.
struct ConstrainedValue {
    bool forbidden = false;
    std::uint64_t required = 0;
    real utility = 0.0;
};

/// Total order over value triples extending the stated preferences:
/// not-forbidden beats forbidden; more satisfied requirements beat fewer (a
/// superset always has the larger count); equal-size requirement sets rank
/// by utility; any residue falls back to the bitmask so the order stays
/// antisymmetric and transitive.  Returns <0, 0, >0 like a comparator; the
/// larger element is the preferable one.
inline int compare_values(const ConstrainedValue& a, const ConstrainedValue& b) {
    if (a.forbidden != b.forbidden) return a.forbidden ? -1 : 1;
    int na = std::popcount(a.required), nb = std::popcount(b.required);
    if (na != nb) return na < nb ? -1 : 1;
    if (a.utility != b.utility) return a.utility < b.utility ? -1 : 1;
    if (a.required != b.required) return a.required < b.required ? -1 : 1;
    return 0;
}

// ---------------------------------------------------------------------------
// Propagation
// ---------------------------------------------------------------------------

/// Result of the qualitative pass: which actions survive the forbidding
/// rules, the per-state flag/requirement pair, and which rows realize the
/// state's best achievable pair (the rows quantitative iteration may use).
/// Row verdicts live in flat arrays indexed by row_offset.
namespace detail {

struct QualitativeRow {
    bool forbidden = false;
    std::uint64_t required = 0;
};

} // namespace detail

struct AdmissibleMap {
    std::vector<std::size_t> row_offset;  // per state, one past the end at n
    std::vector<char> allowed_rows;       // forbidding rules only
    std::vector<char> optimal_rows;       // achieves the state's <F, N>
    std::vector<char> forbidden;          // F per state
    std::vector<std::uint64_t> required;  // N per state
    std::vector<std::string> requiring_ids; // bit order
    long allowed_pairs = 0;

    bool allowed(std::size_t s, std::size_t r) const { return allowed_rows[row_offset[s] + r] != 0; }
    bool optimal(std::size_t s, std::size_t r) const { return optimal_rows[row_offset[s] + r] != 0; }
    std::size_t row_count(std::size_t s) const { return row_offset[s + 1] - row_offset[s]; }

    bool acceptable(const Mdp& mdp, StateId s) const {
        return !mdp.states[static_cast<std::size_t>(s)].terminal &&
               !forbidden[static_cast<std::size_t>(s)];
    }
};

/// Qualitative constraint propagation: a single backward pass on acyclic
/// processes, a monotone fixpoint otherwise.  A state is forbidden when a
/// state rule hits it directly or every action risks a forbidden successor;
/// its requirement set is what the best admissible choice can guarantee.
inline AdmissibleMap propagate_constraints(const Mdp& mdp, const std::vector<Constraint>& cs) {
    mdp.validate();
    auto compiled = compile_constraints(mdp, cs);
    std::size_t n = mdp.size();

    AdmissibleMap out;
    out.row_offset.resize(n + 1);
    std::size_t total_rows = 0;
    for (std::size_t s = 0; s < n; ++s) {
        out.row_offset[s] = total_rows;
        total_rows += mdp.rows[s].size();
    }
    out.row_offset[n] = total_rows;
    out.allowed_rows.assign(total_rows, 0);
    out.optimal_rows.assign(total_rows, 0);
    out.forbidden.assign(n, 0);
    out.required.assign(n, 0);
    for (const auto& c : compiled)
        if (!c.source->forbidding()) out.requiring_ids.push_back(c.source->id);

    std::vector<char> direct_fs(n, 0);
    std::vector<std::uint64_t> direct_rs(n, 0);
    for (std::size_t s = 0; s < n; ++s) {
        for (const auto& c : compiled) {
            if (c.source->on_action()) continue;
            if (!c.matches_state(mdp, static_cast<StateId>(s))) continue;
            if (c.source->forbidding())
                direct_fs[s] = 1;
            else
                direct_rs[s] |= 1ULL << c.requiring_index;
        }
    }

    // action-rule constraints whose state part matches, hoisted per state
    std::vector<const CompiledConstraint*> action_rules;
    for (const auto& c : compiled)
        if (c.source->on_action()) action_rules.push_back(&c);

    auto order = topological_order(mdp);
    std::vector<detail::QualitativeRow> qs;
    std::vector<const CompiledConstraint*> live;
    // fill_rows: on the settled visit the per-row verdicts are final, so the
    // admissibility maps come out of the same pass
    auto update_state = [&](StateId sid, bool fill_rows) {
        std::size_t s = static_cast<std::size_t>(sid);
        if (mdp.states[s].terminal) {
            bool changed = out.forbidden[s] != direct_fs[s] || out.required[s] != direct_rs[s];
            out.forbidden[s] = direct_fs[s];
            out.required[s] = direct_rs[s];
            return changed;
        }
        live.clear();
        for (const auto* c : action_rules)
            if (c->matches_state(mdp, sid)) live.push_back(c);
        const auto& rows = mdp.rows[s];
        qs.resize(rows.size());
        detail::QualitativeRow best;
        bool have = false;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            auto& q = qs[r];
            q.forbidden = false;
            std::uint64_t inter = ~0ULL;
            for (const auto& tr : rows[r].successors) {
                if (tr.prob <= 0) continue;
                q.forbidden = q.forbidden || out.forbidden[static_cast<std::size_t>(tr.to)] != 0;
                inter &= out.required[static_cast<std::size_t>(tr.to)];
            }
            q.required = inter | direct_rs[s];
            for (const auto* c : live) {
                if (!c->matches_action(mdp, rows[r].action)) continue;
                if (c->source->forbidding())
                    q.forbidden = true;
                else
                    q.required |= 1ULL << c->requiring_index;
            }
            ConstrainedValue qa{q.forbidden, q.required, 0.0};
            ConstrainedValue qb{best.forbidden, best.required, 0.0};
            if (!have || compare_values(qa, qb) > 0) {
                best = q;
                have = true;
            }
        }
        if (fill_rows) {
            std::size_t base = out.row_offset[s];
            for (std::size_t r = 0; r < rows.size(); ++r) {
                out.allowed_rows[base + r] = static_cast<char>(!qs[r].forbidden);
                out.allowed_pairs += out.allowed_rows[base + r];
                out.optimal_rows[base + r] = static_cast<char>(
                    qs[r].forbidden == best.forbidden && qs[r].required == best.required);
            }
        }
        bool forbidden = direct_fs[s] || !have || best.forbidden;
        std::uint64_t required = have ? (best.required | direct_rs[s]) : direct_rs[s];
        bool changed = out.forbidden[s] != static_cast<char>(forbidden) || out.required[s] != required;
        out.forbidden[s] = static_cast<char>(forbidden);
        out.required[s] = required;
        return changed;
    };

    if (!order.empty()) {
        for (auto it = order.rbegin(); it != order.rend(); ++it) update_state(*it, true);
    } else {
        // cyclic fallback: forbidden flags grow, requirement sets grow, so
        // the sweep count is bounded by states + requiring constraints
        std::size_t cap = n + out.requiring_ids.size() + 2;
        for (std::size_t sweep = 0; sweep < cap; ++sweep) {
            bool changed = false;
            for (std::size_t s = 0; s < n; ++s)
                changed |= update_state(static_cast<StateId>(s), false);
            if (!changed) break;
        }
        out.allowed_pairs = 0;
        for (std::size_t s = 0; s < n; ++s) update_state(static_cast<StateId>(s), true);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

struct ConstraintDiagnostic {
    std::string id;
    bool forbidding = false;
    bool satisfied_at_initial = false;
    bool conflict = false; // requiring rule sacrificed to a forbidding one
};

struct SolveResult {
    std::vector<int> policy; // row index per state, -1 for terminals
    std::vector<real> utility;
    std::vector<ConstrainedValue> values; // empty for the plain solver
    std::vector<ConstraintDiagnostic> diagnostics;
    long sweeps = 0;
    real wall_ms = 0.0;
};

namespace detail {

inline bool never_skip(std::size_t) { return false; }

/// Backward induction over `order` restricted to rows with mask true.
/// Skipped states are left at value zero with no action, as if removed from
/// consideration.  Exact on acyclic processes.
template <typename RowMask, typename SkipState = bool (*)(std::size_t)>
void bellman_backward(const Mdp& mdp, const std::vector<StateId>& order, const RowMask& usable,
                      std::vector<real>& value, std::vector<int>& policy,
                      SkipState skip = &never_skip) {
    std::size_t n = mdp.size();
    value.assign(n, 0.0);
    policy.assign(n, -1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        std::size_t s = static_cast<std::size_t>(*it);
        if (skip(s)) continue;
        if (mdp.states[s].terminal) {
            value[s] = mdp.states[s].terminal_reward;
            continue;
        }
        real best = -kInf;
        int arg = -1;
        const auto& rows = mdp.rows[s];
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (!usable(s, r)) continue;
            real q = rows[r].reward;
            for (const auto& tr : rows[r].successors)
                q += tr.prob * value[static_cast<std::size_t>(tr.to)];
            if (q > best) {
                best = q;
                arg = static_cast<int>(r);
            }
        }
        value[s] = arg < 0 ? 0.0 : best;
        policy[s] = arg;
    }
}

template <typename RowMask, typename SkipState = bool (*)(std::size_t)>
long bellman_iterative(const Mdp& mdp, const RowMask& usable, std::vector<real>& value,
                       std::vector<int>& policy, real tol, long sweep_cap,
                       SkipState skip = &never_skip) {
    std::size_t n = mdp.size();
    value.assign(n, 0.0);
    policy.assign(n, -1);
    for (std::size_t s = 0; s < n; ++s)
        if (mdp.states[s].terminal && !skip(s)) value[s] = mdp.states[s].terminal_reward;
    for (long sweep = 1; sweep <= sweep_cap; ++sweep) {
        real delta = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            if (mdp.states[s].terminal || skip(s)) continue;
            real best = -kInf;
            int arg = -1;
            const auto& rows = mdp.rows[s];
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (!usable(s, r)) continue;
                real q = rows[r].reward;
                for (const auto& tr : rows[r].successors)
                    q += tr.prob * value[static_cast<std::size_t>(tr.to)];
                if (q > best) {
                    best = q;
                    arg = static_cast<int>(r);
                }
            }
            if (arg < 0) best = 0.0;
            delta = std::max(delta, std::abs(best - value[s]));
            value[s] = best;
            policy[s] = arg;
        }
        if (delta <= tol) return sweep;
    }
    throw numeric_error("value iteration: sweep cap exceeded without convergence");
}

} // namespace detail

/// Exact optimal values and policy: one backward pass over the topological
/// order when the process is acyclic, iterative sweeps (tolerance 1e-9,
/// bounded count) otherwise.
inline SolveResult value_iteration(const Mdp& mdp) {
    mdp.validate();
    auto t0 = std::chrono::steady_clock::now();
    SolveResult res;
    auto all = [](std::size_t, std::size_t) { return true; };
    auto order = topological_order(mdp);
    if (!order.empty()) {
        detail::bellman_backward(mdp, order, all, res.utility, res.policy);
        res.sweeps = 1;
    } else {
        res.sweeps = detail::bellman_iterative(mdp, all, res.utility, res.policy, 1e-9, 100000);
    }
    res.wall_ms = std::chrono::duration<real, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

/// Two-phase constrained solving: qualitative propagation fixes each state's
/// best flag/requirement pair, then standard value iteration restricted to
/// the rows achieving that pair maximizes utility among them.  Constraint
/// conflicts are reported, never fatal.
inline SolveResult constrained_value_iteration(const Mdp& mdp, const std::vector<Constraint>& cs,
                                               const AdmissibleMap* precomputed = nullptr) {
    auto t0 = std::chrono::steady_clock::now();
    AdmissibleMap local;
    const AdmissibleMap* adm = precomputed;
    if (adm == nullptr) {
        local = propagate_constraints(mdp, cs);
        adm = &local;
    }
    SolveResult res;
    auto usable = [&](std::size_t s, std::size_t r) { return adm->optimal(s, r); };
    // states the forbidding rules ruled out drop from consideration; they
    // keep a qualitative-argmax action so the policy stays total
    auto skip = [&](std::size_t s) { return adm->forbidden[s] != 0; };
    auto order = topological_order(mdp);
    if (!order.empty()) {
        detail::bellman_backward(mdp, order, usable, res.utility, res.policy, skip);
        res.sweeps = 1;
    } else {
        res.sweeps =
            detail::bellman_iterative(mdp, usable, res.utility, res.policy, 1e-9, 100000, skip);
    }
    for (std::size_t s = 0; s < mdp.size(); ++s) {
        if (!adm->forbidden[s] || mdp.states[s].terminal) continue;
        for (std::size_t r = 0; r < mdp.rows[s].size(); ++r)
            if (adm->optimal(s, r)) {
                res.policy[s] = static_cast<int>(r);
                break;
            }
    }

    res.values.resize(mdp.size());
    for (std::size_t s = 0; s < mdp.size(); ++s)
        res.values[s] = ConstrainedValue{adm->forbidden[s] != 0, adm->required[s], res.utility[s]};

    std::size_t s0 = static_cast<std::size_t>(mdp.initial);
    int requiring = 0;
    for (const auto& c : cs) {
        ConstraintDiagnostic d;
        d.id = c.id;
        d.forbidding = c.forbidding();
        if (c.forbidding()) {
            d.satisfied_at_initial = !adm->forbidden[s0];
        } else {
            d.satisfied_at_initial = (adm->required[s0] >> requiring) & 1ULL;
            d.conflict = !d.satisfied_at_initial && !adm->forbidden[s0];
            ++requiring;
        }
        res.diagnostics.push_back(std::move(d));
    }
    res.wall_ms = std::chrono::duration<real, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

struct VerifyEntry {
    std::string id;
    bool satisfied = false;
    std::vector<StateId> witness; // violating path when unsatisfied
};

/// Exact graph verification of a policy against each constraint, no
/// sampling: a forbidding rule is satisfied when no positive-probability
/// path under the policy reaches a triggering state or state/action pair; a
/// requiring rule is satisfied when every such path triggers it.
inline std::vector<VerifyEntry> verify_policy(const Mdp& mdp, const std::vector<int>& policy,
                                              const std::vector<Constraint>& cs) {
    mdp.validate();
    if (policy.size() != mdp.size())
        throw validation_error("verify: policy must cover every state");
    auto compiled = compile_constraints(mdp, cs);
    std::size_t n = mdp.size();

    // policy-induced reachable set with parents for witness reconstruction
    std::vector<char> reachable(n, 0);
    std::vector<StateId> parent(n, -1);
    std::vector<StateId> stack{mdp.initial};
    reachable[static_cast<std::size_t>(mdp.initial)] = 1;
    while (!stack.empty()) {
        StateId s = stack.back();
        stack.pop_back();
        std::size_t si = static_cast<std::size_t>(s);
        if (mdp.states[si].terminal) continue;
        int r = policy[si];
        if (r < 0 || static_cast<std::size_t>(r) >= mdp.rows[si].size())
            throw validation_error("verify: policy undefined on a reachable state");
        for (const auto& tr : mdp.rows[si][static_cast<std::size_t>(r)].successors) {
            if (tr.prob <= 0) continue;
            std::size_t ti = static_cast<std::size_t>(tr.to);
            if (!reachable[ti]) {
                reachable[ti] = 1;
                parent[ti] = s;
                stack.push_back(tr.to);
            }
        }
    }

    auto path_to = [&](StateId target) {
        std::vector<StateId> path;
        for (StateId s = target; s >= 0; s = parent[static_cast<std::size_t>(s)])
            path.push_back(s);
        std::reverse(path.begin(), path.end());
        return path;
    };

    std::vector<VerifyEntry> out;
    for (const auto& c : compiled) {
        VerifyEntry entry;
        entry.id = c.source->id;
        auto triggers = [&](std::size_t s) {
            if (c.source->on_action()) {
                if (mdp.states[s].terminal) return false;
                return c.matches(mdp, static_cast<StateId>(s), mdp.rows[s][static_cast<std::size_t>(policy[s])].action);
            }
            return c.matches_state(mdp, static_cast<StateId>(s));
        };
        if (c.source->forbidding()) {
            entry.satisfied = true;
            for (std::size_t s = 0; s < n && entry.satisfied; ++s) {
                if (!reachable[s] || !triggers(s)) continue;
                entry.satisfied = false;
                entry.witness = path_to(static_cast<StateId>(s));
            }
        } else {
            // violated iff some policy path runs start to terminal without
            // ever triggering the rule
            std::vector<char> seen(n, 0);
            std::vector<StateId> par2(n, -1);
            std::vector<StateId> st2;
            entry.satisfied = true;
            if (!triggers(static_cast<std::size_t>(mdp.initial))) {
                st2.push_back(mdp.initial);
                seen[static_cast<std::size_t>(mdp.initial)] = 1;
            }
            while (!st2.empty() && entry.satisfied) {
                StateId s = st2.back();
                st2.pop_back();
                std::size_t si = static_cast<std::size_t>(s);
                if (mdp.states[si].terminal) {
                    entry.satisfied = false;
                    for (StateId w = s; w >= 0; w = par2[static_cast<std::size_t>(w)])
                        entry.witness.push_back(w);
                    std::reverse(entry.witness.begin(), entry.witness.end());
                    break;
                }
                for (const auto& tr : mdp.rows[si][static_cast<std::size_t>(policy[si])].successors) {
                    if (tr.prob <= 0) continue;
                    std::size_t ti = static_cast<std::size_t>(tr.to);
                    if (seen[ti] || triggers(ti)) continue;
                    seen[ti] = 1;
                    par2[ti] = s;
                    st2.push_back(tr.to);
                }
            }
        }
        out.push_back(std::move(entry));
    }
    return out;
}

} // namespace tocs
