// Acceptance suite: one check per shipped claim, each printing a single
// pass/fail line.  Exit status is the number of failed criteria.

#include "oracles.hpp"
#include "tocs/analysis.hpp"
#include "tocs/presets.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

using namespace tocs;

namespace {

int failures = 0;

void criterion(int number, const std::string& label, const std::function<bool()>& body) {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    std::string note;
    try {
        ok = body();
    } catch (const std::exception& e) {
        note = std::string(" [exception: ") + e.what() + "]";
    }
    real seconds =
        std::chrono::duration<real>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %s  %s (%.2f s)%s\n", number, ok ? "PASS" : "FAIL", label.c_str(),
                seconds, note.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

bool expect(bool condition, const char* what) {
    if (!condition) std::printf("    failed: %s\n", what);
    return condition;
}

} // namespace

int main() {
    // 1. closed forms against quadrature of the strategy integral
    criterion(1, "closed forms match quadrature on 100 random draws", [] {
        Rng rng(11047);
        EvalOptions quad;
        quad.force_quadrature = true;
        auto tol = [](real v) { return 1e-6 * (1.0 + std::abs(v)); };
        int done = 0;
        bool ok = true;
        while (done < 100) {
            AnalyticParams p;
            p.rho = rng.uniform(0.01, 5.0);
            p.omega = rng.uniform(0.01, 5.0);
            if (std::abs(p.delta()) <= 1e-3) continue;
            p.alpha = rng.uniform(0.0, 5.0);
            p.beta = p.alpha + rng.uniform(0.01, 5.0);
            real T = rng.uniform(0.1, 3.0);
            p.deadline = T + rng.uniform(0.1, 3.0);
            real dt = rng.uniform(0.0, T);
            p.d_value = rng.uniform(0.0, dt + 0.5);
            p.d_cost = rng.uniform(0.0, 2.0);
            ++done;
            auto inst = p.to_instance();

            TimedStrategy a_only{{StrategyAction::transfer("A", 0.0)}};
            real qa = eu_of_strategy(inst, a_only, quad).total;
            real ca = eu_closed_form(p, StrategyForm::immediate).value;
            ok = ok && std::abs(ca - qa) <= 1e-12 * (1.0 + std::abs(qa)); // exact form

            TimedStrategy handoff{{StrategyAction::transfer("U", kInf)}};
            real qe = eu_of_strategy(inst, handoff, quad).total;
            ok = ok && std::abs(eu_closed_form(p, StrategyForm::handoff).value - qe) <= tol(qe);

            TimedStrategy ea{{StrategyAction::transfer("U", T), StrategyAction::transfer("A", kInf)}};
            real qea = eu_of_strategy(inst, ea, quad).total;
            ok = ok &&
                 std::abs(eu_closed_form(p, StrategyForm::handoff_then_decide, T).value - qea) <=
                     tol(qea);

            TimedStrategy full{{StrategyAction::transfer("U", dt), StrategyAction::coord_change(dt),
                                StrategyAction::transfer("U", T), StrategyAction::transfer("A", kInf)}};
            real qeda = eu_of_strategy(inst, full, quad).total;
            ok = ok && std::abs(eu_closed_form(p, StrategyForm::handoff_coord_decide, T, dt).value -
                                qeda) <= tol(qeda);
            if (!ok) break;
        }
        return expect(ok, "closed form vs quadrature exceeded 1e-6 * (1 + |EU|)");
    });

    // 2. ordinal reproduction of the regime comparison table
    criterion(2, "regime table: handoff collapses, takeover and change win", [] {
        bool ok = true;
        std::map<std::string, real> immediate_by_meeting;
        for (const auto& regime : presets::comparison_regimes()) {
            auto inst = regime.params.to_instance(3);
            real a = eu_closed_form(regime.params, StrategyForm::immediate).value;
            real e = eu_closed_form(regime.params, StrategyForm::handoff).value;
            real ea = optimize_timings(inst, StrategySkeleton{{1, 0}}).eu.total;
            StrategySkeleton eda{{1, StrategySkeleton::coord_change, 1, 0}};
            real eda_eu = optimize_timings(inst, eda).eu.total;

            ok = ok && expect(e < 0 && std::abs(e) >= 100.0 * std::abs(ea),
                              "handoff not two orders below takeover");
            if (regime.location == "office")
                ok = ok && expect(ea > a && eda_eu > a,
                                  "office row: takeover/change do not beat immediate");
            auto [it, inserted] = immediate_by_meeting.emplace(regime.meeting, a);
            if (!inserted)
                ok = ok && expect(std::abs(it->second - a) < 1e-9,
                                  "immediate value varies across locations");
        }
        return ok;
    });

    // 3. the change's value peaks at moderate response rates
    criterion(3, "change value peaks at an interior response rate (>=9/10)", [] {
        Rng rng(40903);
        const std::vector<real> rates = {0.01, 0.05, 0.2, 0.5, 1.0, 3.0, 10.0};
        int good = 0;
        for (int draw = 0; draw < 10; ++draw) {
            real omega = rng.uniform(0.1, 0.4);
            real value = rng.uniform(0.5, 5.0);
            std::vector<real> gains;
            for (real rate : rates) {
                AnalyticParams p;
                p.rho = rate;
                p.omega = omega;
                p.alpha = 1.0;
                p.beta = 3.0;
                p.deadline = 20.0;
                p.d_value = value;
                p.d_cost = 0.0;
                auto inst = p.to_instance();
                auto timed = optimize_timings(inst, StrategySkeleton{{1, 0}});
                real takeover = std::isfinite(timed.times.at(0)) ? timed.times.at(0) : p.deadline;
                real best = 0.0;
                for (int i = 1; i < 16; ++i) {
                    real at = takeover * static_cast<real>(i) / 16.0;
                    if (at <= 0) continue;
                    best = std::max(best, d_marginal_value(inst, timed.strategy, at));
                }
                gains.push_back(best);
            }
            real interior = -kInf;
            for (std::size_t i = 1; i + 1 < gains.size(); ++i)
                interior = std::max(interior, gains[i]);
            if (interior > gains.front() && interior > gains.back()) ++good;
        }
        return expect(good >= 9, "interior peak seen in fewer than 9 of 10 draws");
    });

    // 4. flat-rate wait never induces a take-back after a better entity
    criterion(4, "no take-back under linear wait cost (50 instances)", [] {
        Rng rng(7177);
        bool ok = true;
        for (int i = 0; i < 50 && ok; ++i) {
            real deadline = rng.uniform(5.0, 20.0);
            real rate_per_minute = rng.uniform(0.001, 0.01);
            ProblemInstance inst;
            real agent_q = rng.uniform(0.0, 1.0);
            inst.entities.push_back(
                {"A", true, QualityModel::constant(agent_q), ResponseModel::instant()});
            int others = static_cast<int>(rng.uniform_int(1, 2));
            for (int e = 0; e < others; ++e)
                inst.entities.push_back({"e" + std::to_string(e + 1), false,
                                         QualityModel::constant(agent_q + rng.uniform(1.0, 5.0)),
                                         ResponseModel::markovian(rng.uniform(0.1, 2.0))});
            inst.wait = WaitCostModel::tabulated(
                {{0.0, deadline}, {0.0, rate_per_minute * deadline}}, deadline);
            inst.coord = CoordChangeModel::none();
            auto report = best_strategy(inst, 3);
            const auto& items = report.best_skeleton.items;
            for (std::size_t k = 1; k < items.size(); ++k)
                if (items[k] == 0 && items[k - 1] != StrategySkeleton::coord_change &&
                    items[k - 1] != 0)
                    ok = false;
        }
        return expect(ok, "a take-back appeared after a higher-quality entity");
    });

    // 5. a price schedule exists selecting exactly K changes, K = 1..4
    criterion(5, "price schedules select exactly K changes, K in 1..4", [] {
        bool ok = true;
        for (int k = 1; k <= 4 && ok; ++k) {
            AnalyticParams p;
            p.rho = 0.5;
            p.omega = 0.25;
            p.alpha = 1.0;
            p.beta = 6.0;
            p.deadline = 16.0;
            p.d_value = 2.5;
            std::vector<real> costs;
            for (int i = 1; i <= 6; ++i) costs.push_back(i <= k ? 0.02 : 1e6);
            auto inst = p.to_instance();
            inst.coord = CoordChangeModel::scheduled(p.d_value, costs);
            inst.validate();
            auto report = best_strategy(inst, 2 * k + 2);
            int used = report.best_skeleton.coord_changes();
            ok = expect(used == k, "optimal change count != K");
            if (!ok) std::printf("    K=%d used=%d\n", k, used);
        }
        return ok;
    });

    // 6. strategy-length histogram over 1000 random configurations
    criterion(6, "length histogram: modal 1 low bucket, modal 2 high, 95% <= 8", [] {
        RandomConfigStudy cfg;
        auto result = random_config_experiment(cfg, 20240807);
        auto modal = [&](real bucket) {
            int best_len = 0;
            long best_count = -1;
            for (const auto& row : result.rows)
                if (row.wait_rate == bucket && row.count > best_count) {
                    best_count = row.count;
                    best_len = row.length;
                }
            return best_len;
        };
        long total = 0, short_enough = 0;
        for (const auto& row : result.rows) {
            total += row.count;
            if (row.length <= 8) short_enough += row.count;
        }
        bool ok = expect(modal(cfg.wait_rate_buckets.front()) == 1, "low bucket modal length != 1");
        ok = expect(modal(cfg.wait_rate_buckets.back()) == 2, "high bucket modal length != 2") && ok;
        ok = expect(total == cfg.configs, "histogram lost configurations") && ok;
        ok = expect(100.0 * short_enough / total >= 95.0, "fewer than 95% of lengths <= 8") && ok;
        return ok;
    });

    // 7. qualitative flags match exact verification; two phases agree
    criterion(7, "flags match reachability oracle on 200 random processes", [] {
        long agreements = 0;
        for (std::uint64_t i = 0; i < 200; ++i) {
            Rng rng(i * 7919 + 13);
            auto mdp = oracle::random_layered_mdp(rng, 50);
            std::vector<Constraint> cs;
            int nc = static_cast<int>(rng.uniform_int(1, 4));
            for (int c = 0; c < nc; ++c) cs.push_back(oracle::random_constraint(rng, c, 2));

            auto adm = propagate_constraints(mdp, cs);
            auto res = constrained_value_iteration(mdp, cs, &adm);
            auto rep = verify_policy(mdp, res.policy, cs);
            std::size_t s0 = static_cast<std::size_t>(mdp.initial);

            bool match = true;
            bool any_forbidden_violated = false;
            int req_bit = 0;
            for (std::size_t c = 0; c < cs.size(); ++c) {
                if (cs[c].forbidding()) {
                    any_forbidden_violated = any_forbidden_violated || !rep[c].satisfied;
                } else {
                    bool guaranteed = (res.values[s0].required >> req_bit) & 1ULL;
                    match = match && guaranteed == rep[c].satisfied;
                    ++req_bit;
                }
            }
            match = match && (res.values[s0].forbidden == any_forbidden_violated);

            // quantitative phase equals plain iteration on the restriction
            Mdp restricted = mdp;
            for (std::size_t s = 0; s < mdp.size(); ++s) {
                restricted.rows[s].clear();
                if (adm.forbidden[s]) {
                    restricted.states[s].terminal = true;
                    restricted.states[s].terminal_reward = 0.0;
                    continue;
                }
                if (mdp.states[s].terminal) continue;
                for (std::size_t r = 0; r < mdp.rows[s].size(); ++r)
                    if (adm.optimal(s, r)) restricted.rows[s].push_back(mdp.rows[s][r]);
            }
            auto plain = value_iteration(restricted);
            for (std::size_t s = 0; s < mdp.size(); ++s)
                match = match && res.utility[s] == plain.utility[s];

            agreements += match;
        }
        if (agreements != 200) std::printf("    agreements: %ld/200\n", agreements);
        return agreements == 200;
    });

    // 8. the change cap holds in every solved delay process of the suite
    criterion(8, "no policy ever schedules a fourth coordination change", [] {
        bool ok = true;
        auto check = [&](const DelayScenario& sc) {
            auto mdp = build_delay_mdp(sc);
            auto solved = value_iteration(mdp);
            for (std::size_t s = 0; s < mdp.size(); ++s) {
                if (mdp.states[s].terminal || solved.policy[s] < 0) continue;
                const auto& act = mdp.actions[static_cast<std::size_t>(
                    mdp.rows[s][static_cast<std::size_t>(solved.policy[s])].action)];
                if (act.kind == MdpAction::Kind::coord_change &&
                    mdp.states[s].change_count >= sc.max_delays)
                    ok = false;
            }
            auto census = action_census(mdp, solved.policy);
            if (static_cast<int>(census.change_by_taken.size()) > sc.max_delays)
                ok = ok && census.change_by_taken[static_cast<std::size_t>(sc.max_delays)] == 0;
        };
        auto base = presets::reference_delay_scenario();
        check(base);
        for (real repair : {0.0, 0.25, 2.0}) check(apply_delay_parameter(base, "repair_base", repair));
        for (real mean : {2.0, 40.0}) check(apply_delay_parameter(base, "response_mean", mean));
        return expect(ok, "a fourth change was scheduled");
    });

    // 9. census phenomena across the two reference sweeps
    criterion(9, "ask count: interior max over repair cost, nonincreasing over delay", [] {
        auto sc = presets::reference_delay_scenario();
        auto repair_rows =
            parameter_sweep(sc, "repair_base", {0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0});
        long best = -1;
        std::size_t best_at = 0;
        for (std::size_t i = 0; i < repair_rows.size(); ++i)
            if (repair_rows[i].census.ask > best) {
                best = repair_rows[i].census.ask;
                best_at = i;
            }
        bool interior = best_at > 0 && best_at + 1 < repair_rows.size() &&
                        best > repair_rows.front().census.ask &&
                        best > repair_rows.back().census.ask;
        bool ok = expect(interior, "no interior maximum in the repair sweep");

        auto mean_rows = parameter_sweep(apply_delay_parameter(sc, "ask_cost", 0.3),
                                         "response_mean",
                                         {1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0});
        for (std::size_t i = 1; i < mean_rows.size(); ++i)
            ok = expect(mean_rows[i].census.ask <= mean_rows[i - 1].census.ask,
                        "ask count grew with slower response") &&
                 ok;
        return ok;
    });

    // 10. ten constraints: smaller space, faster classic solving
    criterion(10, "constraints cut log10 space by 25% and solve time", [] {
        auto sc = presets::reference_delay_scenario();
        auto mdp = build_delay_mdp(sc);
        auto rows = constraint_impact(mdp, presets::reference_delay_constraints(sc), 7);
        bool ok = true;
        for (std::size_t i = 1; i < rows.size(); ++i)
            ok = expect(rows[i].log10_strategies <= rows[i - 1].log10_strategies + 1e-9,
                        "strategy count grew when adding a constraint") &&
                 ok;
        real reduction = (rows.front().log10_strategies - rows.back().log10_strategies) /
                         rows.front().log10_strategies;
        ok = expect(reduction >= 0.25, "log10 reduction below 25%") && ok;
        // pool the unconstrained medians: they all measure the same solver
        std::vector<real> unc;
        for (const auto& r : rows) unc.push_back(r.unconstrained_ms);
        std::sort(unc.begin(), unc.end());
        real unc_median = unc[unc.size() / 2];
        bool faster = rows.back().constrained_ms < unc_median;
        std::printf("    constrained %.2f ms vs unconstrained %.2f ms (reduction %.0f%%)\n",
                    rows.back().constrained_ms, unc_median,
                    100.0 * (1.0 - rows.back().constrained_ms / unc_median));
        return expect(faster, "no solve-time reduction") && ok;
    });

    // 11. policy and fixed strategy close auctions at similar times
    criterion(11, "auction closures within 10 points over 50 streams", [] {
        auto rows = auction_replay(presets::reference_auction_scenario(), 424243, 50);
        real gap = 0.0;
        for (const auto& r : rows) gap += std::abs(r.mdp_pct_remaining - r.ea_pct_remaining);
        gap /= static_cast<real>(rows.size());
        if (gap > 10.0) std::printf("    mean gap %.2f points\n", gap);
        return gap <= 10.0;
    });

    // 12. rollouts converge to the solved value
    criterion(12, "Monte-Carlo means within 3 standard errors on 20 processes", [] {
        bool ok = true;
        for (std::uint64_t i = 0; i < 20 && ok; ++i) {
            Rng rng(i * 6211 + 19);
            auto mdp = oracle::random_layered_mdp(rng, 40);
            auto solved = value_iteration(mdp);
            auto [traces, summary] = simulate_policy(mdp, solved.policy, 505 + i, 100000, false);
            (void)traces;
            real u0 = solved.utility[static_cast<std::size_t>(mdp.initial)];
            real slack = 3.0 * summary.std_error + 1e-9 * (1.0 + std::abs(u0));
            if (std::abs(summary.mean_utility - u0) > slack) {
                std::printf("    process %llu: |%.6f - %.6f| > %.6f\n",
                            static_cast<unsigned long long>(i), summary.mean_utility, u0, slack);
                ok = false;
            }
        }
        return ok;
    });

    std::printf("%d of 12 criteria failed\n", failures);
    return failures;
}
