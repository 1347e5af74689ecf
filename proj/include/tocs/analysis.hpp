#pragma once

#include "tocs/mdp_build.hpp"
#include "tocs/search.hpp"
#include "tocs/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace tocs {

// ---------------------------------------------------------------------------
// Census
// ---------------------------------------------------------------------------

/// What a policy prescribes, counted per action category over nonterminal
/// states.  Coordination changes are stratified by how many changes the
/// state has already taken.
struct Census {
    long ask = 0;
    long wait = 0;
    std::vector<long> change_by_taken; // index: changes already taken
    std::map<std::string, long> decide;
    long states = 0;

    long changes_total() const {
        long n = 0;
        for (long c : change_by_taken) n += c;
        return n;
    }
};

namespace detail {

inline std::vector<char> reachable_states(const Mdp& mdp, const std::vector<int>& policy) {
    std::vector<char> seen(mdp.size(), 0);
    std::vector<StateId> stack{mdp.initial};
    seen[static_cast<std::size_t>(mdp.initial)] = 1;
    while (!stack.empty()) {
        std::size_t s = static_cast<std::size_t>(stack.back());
        stack.pop_back();
        if (mdp.states[s].terminal || policy[s] < 0) continue;
        for (const auto& tr : mdp.rows[s][static_cast<std::size_t>(policy[s])].successors) {
            if (tr.prob <= 0) continue;
            if (!seen[static_cast<std::size_t>(tr.to)]) {
                seen[static_cast<std::size_t>(tr.to)] = 1;
                stack.push_back(tr.to);
            }
        }
    }
    return seen;
}

} // namespace detail

/// Exact per-category counts; `reachable_only` restricts the tally to states
/// the policy can actually visit from the initial state.
inline Census action_census(const Mdp& mdp, const std::vector<int>& policy,
                            bool reachable_only = false) {
    if (policy.size() != mdp.size())
        throw validation_error("census: policy must cover every state");
    Census out;
    std::vector<char> mask;
    if (reachable_only) mask = detail::reachable_states(mdp, policy);
    for (std::size_t s = 0; s < mdp.size(); ++s) {
        if (mdp.states[s].terminal || policy[s] < 0) continue;
        if (reachable_only && !mask[s]) continue;
        ++out.states;
        const auto& row = mdp.rows[s][static_cast<std::size_t>(policy[s])];
        const auto& act = mdp.actions[static_cast<std::size_t>(row.action)];
        switch (act.kind) {
        case MdpAction::Kind::transfer: ++out.ask; break;
        case MdpAction::Kind::wait: ++out.wait; break;
        case MdpAction::Kind::coord_change: {
            std::size_t taken = static_cast<std::size_t>(mdp.states[s].change_count);
            if (out.change_by_taken.size() <= taken) out.change_by_taken.resize(taken + 1, 0);
            ++out.change_by_taken[taken];
            break;
        }
        case MdpAction::Kind::decide: ++out.decide[act.name]; break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Strategy extraction
// ---------------------------------------------------------------------------

struct ExtractedStrategy {
    std::string raw;        // every recorded action, leading changes kept
    TimedStrategy strategy; // grammar view: leading changes dropped
    int leading_changes = 0;
};

/// Reads the strategy a policy follows on the quiet path: no response
/// arrives and every feature outside time/control/changes keeps its initial
/// value.  Waits collapse; deciding prints as the agent symbol.  Changes
/// before the first transfer stay in `raw` but are dropped from the grammar
/// view, where the agent is implicitly still holding control.
inline ExtractedStrategy extract_strategy(const Mdp& mdp, const std::vector<int>& policy,
                                          const std::vector<std::pair<std::string, real>>& context = {}) {
    if (policy.size() != mdp.size())
        throw validation_error("extract: policy must cover every state");
    std::vector<int> pinned; // feature indices that must stay put
    std::vector<real> pin_value;
    for (std::size_t f = 0; f < mdp.feature_names.size(); ++f) {
        const auto& name = mdp.feature_names[f];
        if (name == "time" || name == "controlling-entity" || name == "changes" ||
            name == "delays" || name == "responded" || name == "decided" || name == "bids" ||
            name == "best" || name == "second")
            continue;
        pinned.push_back(static_cast<int>(f));
        pin_value.push_back(mdp.feature(mdp.initial, static_cast<int>(f)));
    }
    for (const auto& [name, value] : context) {
        int f = mdp.feature_index(name);
        if (f < 0) throw validation_error("extract: unknown context feature '" + name + "'");
        bool found = false;
        for (std::size_t i = 0; i < pinned.size(); ++i)
            if (pinned[i] == f) {
                pin_value[i] = value;
                found = true;
            }
        if (!found) {
            pinned.push_back(f);
            pin_value.push_back(value);
        }
    }

    struct Event {
        MdpAction::Kind kind;
        int entity;
        std::string name;
        real time;
    };
    std::vector<Event> events;

    StateId cur = mdp.initial;
    // start from the pinned-context twin of the initial state if it exists
    for (std::size_t s = 0; s < mdp.size(); ++s) {
        bool match = !mdp.states[s].terminal;
        const auto& init = mdp.states[static_cast<std::size_t>(mdp.initial)];
        match = match && mdp.states[s].time_index == init.time_index &&
                mdp.states[s].controlling_entity == init.controlling_entity &&
                mdp.states[s].change_count == init.change_count;
        for (std::size_t i = 0; i < pinned.size() && match; ++i)
            match = mdp.feature(static_cast<StateId>(s), pinned[i]) == pin_value[i];
        if (match) {
            cur = static_cast<StateId>(s);
            break;
        }
    }

    for (long guard = 0; guard < static_cast<long>(mdp.size()) + 8; ++guard) {
        std::size_t s = static_cast<std::size_t>(cur);
        if (mdp.states[s].terminal || policy[s] < 0) break;
        const auto& row = mdp.rows[s][static_cast<std::size_t>(policy[s])];
        const auto& act = mdp.actions[static_cast<std::size_t>(row.action)];
        real now = static_cast<real>(mdp.states[s].time_index);
        // a transfer to whoever already holds control is a wait in disguise
        bool redundant = act.kind == MdpAction::Kind::transfer &&
                         act.entity == mdp.states[s].controlling_entity;
        if (act.kind != MdpAction::Kind::wait && !redundant)
            events.push_back({act.kind, act.entity, act.name, now});
        if (act.kind == MdpAction::Kind::decide) break;

        // quiet-path successor: unresolved, pinned features unchanged
        StateId next = -1;
        real best_prob = 0.0;
        for (const auto& tr : row.successors) {
            if (tr.prob <= 0) continue;
            const auto& st = mdp.states[static_cast<std::size_t>(tr.to)];
            if (st.responded_entity >= 0) continue;
            bool ok = true;
            for (std::size_t i = 0; i < pinned.size() && ok; ++i)
                ok = mdp.feature(tr.to, pinned[i]) == pin_value[i];
            if (!ok) continue;
            if (tr.prob > best_prob) {
                best_prob = tr.prob;
                next = tr.to;
            }
        }
        if (next < 0) break;
        cur = next;
    }

    ExtractedStrategy out;
    std::size_t start = 0;
    while (start < events.size() && events[start].kind == MdpAction::Kind::coord_change) ++start;
    out.leading_changes = static_cast<int>(start);

    auto symbol = [&](const Event& ev) -> std::string {
        switch (ev.kind) {
        case MdpAction::Kind::transfer:
            return ev.entity >= 0 && static_cast<std::size_t>(ev.entity) < mdp.entity_names.size()
                       ? mdp.entity_names[static_cast<std::size_t>(ev.entity)]
                       : ev.name;
        case MdpAction::Kind::coord_change: return "D";
        case MdpAction::Kind::decide: return "A";
        default: return "";
        }
    };
    for (const auto& ev : events) out.raw += symbol(ev);

    // grammar view: tenures end where the next control event starts
    std::string holder;
    for (std::size_t i = start; i < events.size(); ++i) {
        const auto& ev = events[i];
        if (ev.kind == MdpAction::Kind::coord_change) {
            if (holder.empty()) continue; // unreachable after the leading strip
            out.strategy.actions.push_back(StrategyAction::transfer(holder, ev.time));
            out.strategy.actions.push_back(StrategyAction::coord_change(ev.time));
            continue;
        }
        if (!holder.empty() || ev.kind == MdpAction::Kind::decide) {
            // close the open tenure at this event's time
            if (!holder.empty())
                out.strategy.actions.push_back(StrategyAction::transfer(holder, ev.time));
        }
        if (ev.kind == MdpAction::Kind::decide) {
            out.strategy.actions.push_back(StrategyAction::transfer("A", kInf));
            holder.clear();
            break;
        }
        holder = symbol(ev);
    }
    if (!holder.empty())
        out.strategy.actions.push_back(StrategyAction::transfer(holder, kInf));
    return out;
}

// ---------------------------------------------------------------------------
// Strategy-space counting
// ---------------------------------------------------------------------------

/// log10 of the number of distinct policies over acceptable states under the
/// admissible map: the sum of log10(admissible action count) over
/// nonterminal, non-forbidden states.
inline real count_strategies(const Mdp& mdp, const AdmissibleMap& adm) {
    real log_count = 0.0;
    for (std::size_t s = 0; s < mdp.size(); ++s) {
        if (!adm.acceptable(mdp, static_cast<StateId>(s))) continue;
        long actions = 0;
        for (std::size_t r = 0; r < adm.row_count(s); ++r) actions += adm.allowed(s, r);
        if (actions > 0) log_count += std::log10(static_cast<real>(actions));
    }
    return log_count;
}

// ---------------------------------------------------------------------------
// Monte-Carlo execution
// ---------------------------------------------------------------------------

struct ExecutionTrace {
    std::uint64_t seed = 0;
    std::vector<StateId> states;
    std::vector<int> actions; // global action indices
    real realized_utility = 0.0;
    int action_count = 0; // wait runs excluded
};

struct SimulationSummary {
    real mean_utility = 0.0;
    real std_error = 0.0;
    std::map<int, long> length_histogram;
};

/// Seeded stochastic rollouts of a policy.  Trial streams derive from
/// (seed, index), so parallel and serial runs produce identical traces.
inline std::pair<std::vector<ExecutionTrace>, SimulationSummary>
simulate_policy(const Mdp& mdp, const std::vector<int>& policy, std::uint64_t seed, long trials,
                bool keep_traces = true) {
    if (trials < 1) throw validation_error("simulate: need at least one trial");
    if (policy.size() != mdp.size())
        throw validation_error("simulate: policy must cover every state");
    std::vector<ExecutionTrace> traces;
    SimulationSummary summary;
    real sum = 0.0, sum_sq = 0.0;
    for (long trial = 0; trial < trials; ++trial) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(trial));
        ExecutionTrace trace;
        trace.seed = seed;
        StateId cur = mdp.initial;
        trace.states.push_back(cur);
        for (long guard = 0; guard < 1'000'000; ++guard) {
            std::size_t s = static_cast<std::size_t>(cur);
            if (mdp.states[s].terminal) {
                trace.realized_utility += mdp.states[s].terminal_reward;
                break;
            }
            if (policy[s] < 0) break;
            const auto& row = mdp.rows[s][static_cast<std::size_t>(policy[s])];
            trace.realized_utility += row.reward;
            const auto& act = mdp.actions[static_cast<std::size_t>(row.action)];
            if (act.kind != MdpAction::Kind::wait) ++trace.action_count;
            trace.actions.push_back(row.action);
            real x = rng.uniform();
            StateId next = row.successors.back().to;
            for (const auto& tr : row.successors) {
                x -= tr.prob;
                if (x < 0) {
                    next = tr.to;
                    break;
                }
            }
            cur = next;
            trace.states.push_back(cur);
        }
        sum += trace.realized_utility;
        sum_sq += trace.realized_utility * trace.realized_utility;
        summary.length_histogram[trace.action_count]++;
        if (keep_traces) traces.push_back(std::move(trace));
    }
    real n = static_cast<real>(trials);
    summary.mean_utility = sum / n;
    real var = std::max(sum_sq / n - summary.mean_utility * summary.mean_utility, 0.0);
    summary.std_error = trials > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    return {std::move(traces), summary};
}

// ---------------------------------------------------------------------------
// Parameter sweeps over the delay scenario
// ---------------------------------------------------------------------------

struct SweepRow {
    real value = 0.0;
    Census census;
    Census reachable;
};

inline DelayScenario apply_delay_parameter(DelayScenario sc, const std::string& name, real value) {
    if (name == "repair_base") sc.repair_base = value;
    else if (name == "late_rate") sc.late_rate = value;
    else if (name == "lambda1") sc.lambda1 = value;
    else if (name == "lambda2") sc.lambda2 = value;
    else if (name == "lambda3") sc.lambda3 = value;
    else if (name == "lambda4") sc.lambda4 = value;
    else if (name == "r_activity") sc.r_activity = value;
    else if (name == "r_user") sc.r_user = value;
    else if (name == "user_quality") sc.user_quality = value;
    else if (name == "response_mean") {
        for (auto& m : sc.response_mean_minutes) m = value;
    } else if (name == "response_mean_scale") {
        for (auto& m : sc.response_mean_minutes) m *= value;
    } else if (name == "ask_cost") {
        for (auto& c : sc.ask_cost) c = value;
    } else {
        throw validation_error("sweep: unknown parameter '" + name + "'");
    }
    return sc;
}

/// Re-solves the delay scenario per value of one named knob and counts the
/// policy per category.  Deterministic: same grid, same output.
inline std::vector<SweepRow> parameter_sweep(const DelayScenario& base, const std::string& name,
                                             const std::vector<real>& values) {
    if (values.empty()) throw validation_error("sweep: empty value grid");
    std::vector<SweepRow> rows;
    for (real v : values) {
        auto sc = apply_delay_parameter(base, name, v);
        auto mdp = build_delay_mdp(sc);
        auto solved = value_iteration(mdp);
        SweepRow row;
        row.value = v;
        row.census = action_census(mdp, solved.policy, false);
        row.reachable = action_census(mdp, solved.policy, true);
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Constraint impact (count and solve-time trend)
// ---------------------------------------------------------------------------

struct ConstraintImpactRow {
    int constraints = 0;
    real log10_strategies = 0.0;
    real constrained_ms = 0.0;   // propagation + restricted iteration
    real unconstrained_ms = 0.0; // plain iteration, measured alongside
};

/// Adds constraints one at a time, recording the strategy-space size and the
/// wall time of constrained vs plain solving (median over `reps`, after a
/// warmup).  Both sides run the classic sweep-until-convergence iteration:
/// the acyclic one-pass shortcut solves either variant in microseconds and
/// would bury the propagation-vs-restriction tradeoff this study is about.
inline std::vector<ConstraintImpactRow> constraint_impact(const Mdp& mdp,
                                                          const std::vector<Constraint>& cs,
                                                          int reps = 5) {
    std::vector<ConstraintImpactRow> rows;
    std::vector<real> value;
    std::vector<int> policy;
    auto all_rows = [](std::size_t, std::size_t) { return true; };
    for (std::size_t k = 0; k <= cs.size(); ++k) {
        std::vector<Constraint> active(cs.begin(), cs.begin() + static_cast<long>(k));
        ConstraintImpactRow row;
        row.constraints = static_cast<int>(k);
        auto adm = propagate_constraints(mdp, active);
        row.log10_strategies = count_strategies(mdp, adm);
        std::vector<real> t_con, t_plain;
        for (int rep = 0; rep < reps + 1; ++rep) {
            auto c0 = std::chrono::steady_clock::now();
            auto adm_timed = propagate_constraints(mdp, active);
            auto usable_timed = [&](std::size_t s, std::size_t r) {
                return adm_timed.optimal(s, r);
            };
            auto skip_timed = [&](std::size_t s) { return adm_timed.forbidden[s] != 0; };
            detail::bellman_iterative(mdp, usable_timed, value, policy, 1e-9, 1000000, skip_timed);
            auto c1 = std::chrono::steady_clock::now();
            detail::bellman_iterative(mdp, all_rows, value, policy, 1e-9, 1000000);
            auto c2 = std::chrono::steady_clock::now();
            if (rep == 0) continue; // warmup
            t_con.push_back(std::chrono::duration<real, std::milli>(c1 - c0).count());
            t_plain.push_back(std::chrono::duration<real, std::milli>(c2 - c1).count());
        }
        auto median = [](std::vector<real> v) {
            std::sort(v.begin(), v.end());
            return v[v.size() / 2];
        };
        row.constrained_ms = median(t_con);
        row.unconstrained_ms = median(t_plain);
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Auction closure comparison
// ---------------------------------------------------------------------------

struct AuctionReplayRow {
    std::uint64_t seed = 0;
    real mdp_pct_remaining = 0.0;
    real ea_pct_remaining = 0.0;
};

namespace detail {

/// Expected allocation value as a function of time, by exact evolution of
/// the (count, best, second) distribution under the arrival model.
inline TimeTable expected_close_value_curve(const AuctionScenario& sc) {
    std::map<std::vector<int>, real> dist;
    dist[{0, -1, -1}] = 1.0;
    TimeTable curve;
    for (int t = 0; t <= sc.steps; ++t) {
        real v = 0.0;
        for (const auto& [k, p] : dist) v += p * sc.close_value(k[0], k[1], k[2]);
        curve.times.push_back(static_cast<real>(t));
        curve.values.push_back(v);
        if (t == sc.steps) break;
        std::map<std::vector<int>, real> next;
        for (const auto& [k, p] : dist) {
            real p_new = k[0] < sc.bidders ? sc.bid_prob : 0.0;
            next[k] += p * (1.0 - p_new);
            for (std::size_t q = 0; q < sc.bid_quality_probs.size() && p_new > 0; ++q) {
                int nb = std::max(k[1], static_cast<int>(q));
                int ns = k[1] < 0 ? -1 : std::max(k[2], std::min(k[1], static_cast<int>(q)));
                next[{k[0] + 1, nb, ns}] += p * p_new * sc.bid_quality_probs[q];
            }
        }
        dist = std::move(next);
    }
    return curve;
}

} // namespace detail

/// The fixed-shape comparison policy: ask the leader at once, close
/// autonomously at the precomputed takeover step if no answer arrived.  The
/// takeover comes from the strategy engine with the agent's quality set to
/// the expected allocation value over time.
inline int auction_ea_takeover_step(const AuctionScenario& sc) {
    ProblemInstance inst;
    inst.entities.push_back(
        {"A", true, QualityModel::tabulated(detail::expected_close_value_curve(sc)),
         ResponseModel::instant()});
    inst.entities.push_back({"L", false, QualityModel::constant(sc.leader_quality),
                             ResponseModel::markovian(1.0 / sc.leader_mean_steps)});
    inst.wait = sc.prep_wait;
    inst.coord = CoordChangeModel::none();
    auto timed = optimize_timings(inst, StrategySkeleton{{1, 0}});
    real t = timed.times.at(0);
    if (!std::isfinite(t)) return sc.steps;
    return std::min(static_cast<int>(std::llround(t)), sc.steps);
}

/// Replays seeded bid streams against the solved policy and the fixed
/// ask-then-close strategy, recording when each closes as a percentage of
/// the available time still remaining.  Both policies see identical streams.
inline std::vector<AuctionReplayRow> auction_replay(const AuctionScenario& sc, std::uint64_t seed,
                                                    int streams) {
    sc.validate();
    auto mdp = build_auction_mdp(sc);
    auto solved = value_iteration(mdp);
    int ea_takeover = auction_ea_takeover_step(sc);

    std::vector<AuctionReplayRow> rows;
    for (int i = 0; i < streams; ++i) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
        // one shared draw sequence per step: bid?, quality, leader-answer?
        struct Step {
            bool bid;
            int quality;
            bool leader;
        };
        std::vector<Step> stream(static_cast<std::size_t>(sc.steps));
        for (auto& st : stream) {
            st.bid = rng.uniform() < sc.bid_prob;
            st.quality = static_cast<int>(rng.pick(sc.bid_quality_probs));
            st.leader = rng.uniform() < sc.leader_hazard();
        }

        auto run_mdp = [&]() {
            StateId cur = mdp.initial;
            for (int t = 0;; ++t) {
                std::size_t s = static_cast<std::size_t>(cur);
                if (mdp.states[s].terminal) return mdp.states[s].time_index;
                const auto& row = mdp.rows[s][static_cast<std::size_t>(solved.policy[s])];
                const auto& act = mdp.actions[static_cast<std::size_t>(row.action)];
                if (act.kind == MdpAction::Kind::decide) return mdp.states[s].time_index;
                bool asked = mdp.states[s].controlling_entity == 1 ||
                             act.kind == MdpAction::Kind::transfer;
                const auto& step = stream[static_cast<std::size_t>(t)];
                if (asked && step.leader) return t + 1;
                int bids = static_cast<int>(mdp.feature(cur, 2));
                int best = static_cast<int>(mdp.feature(cur, 3));
                int second = static_cast<int>(mdp.feature(cur, 4));
                if (step.bid && bids < sc.bidders) {
                    int nb = std::max(best, step.quality);
                    int ns = best < 0 ? -1 : std::max(second, std::min(best, step.quality));
                    bids += 1;
                    best = nb;
                    second = ns;
                }
                int ctrl = asked ? 1 : 0;
                // look up the successor state by its features
                StateId next = -1;
                for (const auto& tr : row.successors) {
                    const auto& st2 = mdp.states[static_cast<std::size_t>(tr.to)];
                    if (st2.responded_entity >= 0) continue;
                    if (static_cast<int>(st2.features[0]) == ctrl &&
                        static_cast<int>(st2.features[2]) == bids &&
                        static_cast<int>(st2.features[3]) == best &&
                        static_cast<int>(st2.features[4]) == second) {
                        next = tr.to;
                        break;
                    }
                }
                if (next < 0) return t + 1; // forced closure at the horizon
                cur = next;
            }
        };
        auto run_ea = [&]() {
            for (int t = 0; t < ea_takeover; ++t)
                if (stream[static_cast<std::size_t>(t)].leader) return t + 1;
            return ea_takeover;
        };

        AuctionReplayRow row;
        row.seed = seed + static_cast<std::uint64_t>(i);
        row.mdp_pct_remaining = 100.0 * (1.0 - static_cast<real>(run_mdp()) / sc.steps);
        row.ea_pct_remaining = 100.0 * (1.0 - static_cast<real>(run_ea()) / sc.steps);
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// CSV rendering
// ---------------------------------------------------------------------------

inline std::string csv_real(real v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string census_csv(const std::vector<SweepRow>& rows, int change_strata = 3) {
    std::ostringstream os;
    os << "parameter_value,ask,wait";
    for (int k = 0; k < change_strata; ++k) os << ",delay_d" << k;
    os << ",decide_announce_attend,decide_announce_not_attend,decide_cancel";
    os << ",reachable_ask,reachable_wait,reachable_delay,reachable_decide\n";
    for (const auto& r : rows) {
        os << csv_real(r.value) << ',' << r.census.ask << ',' << r.census.wait;
        for (int k = 0; k < change_strata; ++k) {
            long c = k < static_cast<int>(r.census.change_by_taken.size())
                         ? r.census.change_by_taken[static_cast<std::size_t>(k)]
                         : 0;
            os << ',' << c;
        }
        auto decide_of = [&](const Census& c, const char* name) {
            auto it = c.decide.find(name);
            return it == c.decide.end() ? 0L : it->second;
        };
        os << ',' << decide_of(r.census, "announce_attend") << ','
           << decide_of(r.census, "announce_not_attend") << ',' << decide_of(r.census, "cancel");
        long rdec = 0;
        for (const auto& [name, count] : r.reachable.decide) {
            (void)name;
            rdec += count;
        }
        os << ',' << r.reachable.ask << ',' << r.reachable.wait << ','
           << r.reachable.changes_total() << ',' << rdec << '\n';
    }
    return os.str();
}

inline std::string histogram_csv(const StudyResult& result) {
    std::ostringstream os;
    os << "wait_rate_bucket,length,percentage\n";
    for (const auto& row : result.rows)
        os << csv_real(row.wait_rate) << ',' << row.length << ',' << csv_real(row.percentage)
           << '\n';
    return os.str();
}

inline std::string length_histogram_csv(const SimulationSummary& summary) {
    std::ostringstream os;
    os << "length,count\n";
    for (const auto& [len, count] : summary.length_histogram) os << len << ',' << count << '\n';
    return os.str();
}

inline std::string auction_csv(const std::vector<AuctionReplayRow>& rows) {
    std::ostringstream os;
    os << "seed,mdp_pct,ea_pct\n";
    for (const auto& r : rows)
        os << r.seed << ',' << csv_real(r.mdp_pct_remaining) << ','
           << csv_real(r.ea_pct_remaining) << '\n';
    return os.str();
}

inline std::string constraint_impact_csv(const std::vector<ConstraintImpactRow>& rows) {
    std::ostringstream os;
    os << "constraints,log10_strategies,constrained_ms,unconstrained_ms\n";
    for (const auto& r : rows)
        os << r.constraints << ',' << csv_real(r.log10_strategies) << ','
           << csv_real(r.constrained_ms) << ',' << csv_real(r.unconstrained_ms) << '\n';
    return os.str();
}

inline std::string verify_csv(const std::vector<VerifyEntry>& entries) {
    std::ostringstream os;
    os << "constraint_id,status,witness\n";
    for (const auto& e : entries) {
        os << e.id << ',' << (e.satisfied ? "satisfied" : "violated") << ',';
        for (std::size_t i = 0; i < e.witness.size(); ++i) {
            if (i) os << ';';
            os << e.witness[i];
        }
        os << '\n';
    }
    return os.str();
}

/// Gnuplot-friendly rendition: header as a comment, comma separators as
/// whitespace.
inline std::string csv_to_plot_data(const std::string& csv) {
    std::ostringstream os;
    std::istringstream is(csv);
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        std::replace(line.begin(), line.end(), ',', ' ');
        os << (first ? "# " : "") << line << '\n';
        first = false;
    }
    return os.str();
}

} // namespace tocs
