#pragma once

// Test-only reference implementations, kept deliberately independent of the
// library's evaluation paths: plain Riemann sums, exhaustive enumeration and
// direct reachability.  Expected values in the suites are frozen from these.

#include "tocs/eu.hpp"
#include "tocs/mdp.hpp"
#include "tocs/model.hpp"
#include "tocs/solver.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

using tocs::real;

/// Midpoint Riemann sum.
inline real riemann(const std::function<real(real)>& f, real a, real b, real step) {
    real total = 0.0;
    long n = static_cast<long>(std::ceil((b - a) / step));
    if (n < 1) n = 1;
    real h = (b - a) / static_cast<real>(n);
    for (long i = 0; i < n; ++i) total += f(a + (static_cast<real>(i) + 0.5) * h) * h;
    return total;
}

/// Trapezoidal integral of a response density over [a, b].
inline real trapezoid_response(const tocs::ResponseModel& m, real a, real b, real step) {
    real total = 0.0;
    long n = static_cast<long>(std::ceil((b - a) / step));
    real h = (b - a) / static_cast<real>(n);
    for (long i = 0; i < n; ++i) {
        real lo = a + h * static_cast<real>(i);
        real hi = lo + h;
        total += 0.5 * (tocs::response_density(m, lo) + tocs::response_density(m, hi)) * h;
    }
    return total;
}

/// Riemann-sum expected utility of "entity until T, agent at T" under the
/// analytic family, written straight from the two-segment integral.
inline real riemann_eu_handoff_then_decide(const tocs::AnalyticParams& p, real T, real step) {
    auto wait = [&](real t) { return p.omega * std::exp(p.omega * std::min(t, p.deadline)); };
    auto dens = [&](real t) { return p.rho * std::exp(-p.rho * t); };
    real seg1 = riemann([&](real t) { return dens(t) * (p.beta - wait(t)); }, 0.0, T, step);
    real residual = std::exp(-p.rho * T);
    return seg1 + residual * (p.alpha - wait(T));
}

/// Same for "entity, change at dt, agent at T" (change shifts the wait clock
/// by d_value and costs d_cost on every branch deciding at or after dt).
inline real riemann_eu_handoff_coord_decide(const tocs::AnalyticParams& p, real dt, real T,
                                            real step) {
    auto wait = [&](real t) {
        return p.omega * std::exp(p.omega * std::min(std::max(t, 0.0), p.deadline));
    };
    auto dens = [&](real t) { return p.rho * std::exp(-p.rho * t); };
    real adj = -wait(dt) + wait(dt - p.d_value) - p.d_cost;
    real seg1 = riemann([&](real t) { return dens(t) * (p.beta - wait(t)); }, 0.0, dt, step);
    real seg2 = riemann([&](real t) { return dens(t) * (p.beta + adj - wait(t - p.d_value)); }, dt,
                        T, step);
    real residual = std::exp(-p.rho * T);
    return seg1 + seg2 + residual * (p.alpha + adj - wait(T - p.d_value));
}

// ---------------------------------------------------------------------------
// Decision-process oracles
// ---------------------------------------------------------------------------

/// Exact value of a fixed policy from the initial state by backward
/// substitution over a topological order (test processes are acyclic).
inline real evaluate_policy(const tocs::Mdp& mdp, const std::vector<int>& policy) {
    auto order = tocs::topological_order(mdp);
    std::vector<real> value(mdp.size(), 0.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        std::size_t s = static_cast<std::size_t>(*it);
        if (mdp.states[s].terminal) {
            value[s] = mdp.states[s].terminal_reward;
            continue;
        }
        const auto& row = mdp.rows[s][static_cast<std::size_t>(policy[s])];
        real q = row.reward;
        for (const auto& tr : row.successors) q += tr.prob * value[static_cast<std::size_t>(tr.to)];
        value[s] = q;
    }
    return value[static_cast<std::size_t>(mdp.initial)];
}

/// All total policies of a small process (product over per-state rows).
inline void enumerate_policies(const tocs::Mdp& mdp,
                               const std::function<void(const std::vector<int>&)>& visit) {
    std::vector<int> policy(mdp.size(), -1);
    std::function<void(std::size_t)> rec = [&](std::size_t s) {
        if (s == mdp.size()) {
            visit(policy);
            return;
        }
        if (mdp.states[s].terminal || mdp.rows[s].empty()) {
            policy[s] = -1;
            rec(s + 1);
            return;
        }
        for (std::size_t r = 0; r < mdp.rows[s].size(); ++r) {
            policy[s] = static_cast<int>(r);
            rec(s + 1);
        }
    };
    rec(0);
}

/// Layered random acyclic process with small integer features ("layer",
/// "parity", "flag") and two or three actions per state.
inline tocs::Mdp random_layered_mdp(tocs::Rng& rng, int max_states = 50) {
    using namespace tocs;
    int layers = static_cast<int>(rng.uniform_int(3, 6));
    int width = static_cast<int>(rng.uniform_int(2, std::max(2L, (max_states - 2L) / layers)));

    Mdp mdp;
    mdp.feature_names = {"layer", "parity", "flag"};
    mdp.feature_labels.resize(3);
    int n_actions = static_cast<int>(rng.uniform_int(2, 3));
    for (int a = 0; a < n_actions; ++a)
        mdp.actions.push_back(MdpAction::decide(a, "a" + std::to_string(a)));

    std::vector<std::vector<StateId>> layer_states(static_cast<std::size_t>(layers));
    for (int l = 0; l < layers; ++l) {
        int count = l == 0 ? 1 : width;
        for (int i = 0; i < count; ++i) {
            StateInfo info;
            info.terminal = l == layers - 1;
            info.time_index = l;
            if (info.terminal) info.terminal_reward = rng.uniform(-2.0, 4.0);
            info.features = {static_cast<real>(l), static_cast<real>(i % 2),
                             static_cast<real>(rng.uniform_int(0, 1))};
            mdp.states.push_back(info);
            mdp.rows.emplace_back();
            layer_states[static_cast<std::size_t>(l)].push_back(
                static_cast<StateId>(mdp.states.size() - 1));
        }
    }
    for (int l = 0; l + 1 < layers; ++l) {
        for (StateId s : layer_states[static_cast<std::size_t>(l)]) {
            const auto& next = layer_states[static_cast<std::size_t>(l + 1)];
            for (int a = 0; a < n_actions; ++a) {
                std::vector<Transition> succ;
                int fan = static_cast<int>(rng.uniform_int(1, 2));
                real left = 1.0;
                for (int f = 0; f < fan; ++f) {
                    real p = f + 1 == fan ? left : left * rng.uniform(0.3, 0.7);
                    left -= p;
                    succ.push_back(
                        {next[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(next.size()) - 1))],
                         p});
                }
                mdp.rows[static_cast<std::size_t>(s)].push_back(
                    ChoiceRow{a, rng.uniform(-1.0, 1.0), std::move(succ)});
            }
        }
    }
    mdp.initial = layer_states[0][0];
    mdp.validate();
    return mdp;
}

/// Random constraint over the layered features; roughly half forbidding.
inline tocs::Constraint random_constraint(tocs::Rng& rng, int index, int n_actions) {
    using namespace tocs;
    Constraint c;
    c.id = "c" + std::to_string(index);
    int kind = static_cast<int>(rng.uniform_int(0, 3));
    c.kind = static_cast<Constraint::Kind>(kind);
    const char* features[] = {"layer", "parity", "flag"};
    int nf = static_cast<int>(rng.uniform_int(1, 2));
    for (int i = 0; i < nf; ++i) {
        FeatureTest t;
        t.feature = features[rng.uniform_int(0, 2)];
        t.op = static_cast<CmpOp>(rng.uniform_int(0, 5));
        t.value = static_cast<real>(rng.uniform_int(0, 4));
        c.state_tests.push_back(t);
    }
    if (c.on_action()) {
        ActionTest t;
        t.negate = rng.uniform() < 0.4;
        t.name = "a" + std::to_string(rng.uniform_int(0, n_actions - 1));
        c.action_test = t;
    }
    return c;
}

} // namespace oracle
