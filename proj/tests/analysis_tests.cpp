#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "tocs/analysis.hpp"

#include <cmath>

using namespace tocs;

namespace {

DelayScenario test_delay_scenario() {
    DelayScenario sc;
    sc.step_minutes = 5.0;
    sc.steps = 14;
    sc.scheduled_step = 5;
    sc.delay_steps = 2;
    sc.max_delays = 3;
    sc.locations = {"office", "not_at_dept", "meeting_loc"};
    sc.location_matrix = {{0.85, 0.05, 0.10}, {0.08, 0.84, 0.08}, {0.04, 0.02, 0.94}};
    sc.initial_location = 0;
    sc.meeting_location = 2;
    sc.response_mean_minutes = {5.0, 60.0, 10.0};
    sc.ask_cost = {0.1, 1.0, 0.3};
    return sc;
}

} // namespace

TEST_CASE("census: constant policies count plainly") {
    Rng rng(15);
    auto mdp = oracle::random_layered_mdp(rng, 16);
    // force every nonterminal state to action row 0 ("a0" decide actions)
    std::vector<int> policy(mdp.size(), -1);
    long nonterminal = 0;
    for (std::size_t s = 0; s < mdp.size(); ++s)
        if (!mdp.states[s].terminal) {
            policy[s] = 0;
            ++nonterminal;
        }
    auto census = action_census(mdp, policy);
    CHECK(census.states == nonterminal);
    CHECK(census.decide.at("a0") == nonterminal);
    CHECK(census.ask == 0);
    CHECK(census.wait == 0);
}

TEST_CASE("census: hand-built tally with strata and reachability") {
    auto sc = test_delay_scenario();
    auto mdp = build_delay_mdp(sc);
    auto solved = value_iteration(mdp);
    auto all = action_census(mdp, solved.policy, false);
    auto reach = action_census(mdp, solved.policy, true);

    long manual_ask = 0, manual_wait = 0, manual_change = 0, manual_decide = 0;
    for (std::size_t s = 0; s < mdp.size(); ++s) {
        if (mdp.states[s].terminal || solved.policy[s] < 0) continue;
        const auto& act = mdp.actions[static_cast<std::size_t>(
            mdp.rows[s][static_cast<std::size_t>(solved.policy[s])].action)];
        manual_ask += act.kind == MdpAction::Kind::transfer;
        manual_wait += act.kind == MdpAction::Kind::wait;
        manual_change += act.kind == MdpAction::Kind::coord_change;
        manual_decide += act.kind == MdpAction::Kind::decide;
    }
    CHECK(all.ask == manual_ask);
    CHECK(all.wait == manual_wait);
    CHECK(all.changes_total() == manual_change);
    long decide_total = 0;
    for (const auto& [name, count] : all.decide) {
        (void)name;
        decide_total += count;
    }
    CHECK(decide_total == manual_decide);
    CHECK(all.states == all.ask + all.wait + all.changes_total() + decide_total);

    CHECK(reach.states <= all.states);
    CHECK(reach.ask <= all.ask);

    // the change cap: no prescription of a change in fully-delayed states
    if (static_cast<int>(all.change_by_taken.size()) > sc.max_delays)
        CHECK(all.change_by_taken[static_cast<std::size_t>(sc.max_delays)] == 0);
}

TEST_CASE("extraction: ask-then-decide reads as eA and validates") {
    auto sc = test_delay_scenario();
    sc.user_quality = 30.0;
    sc.response_mean_minutes = {10.0, 10.0, 10.0};
    auto mdp = build_delay_mdp(sc);
    auto solved = value_iteration(mdp);
    auto ex = extract_strategy(mdp, solved.policy);
    CHECK(!ex.raw.empty());
    CHECK(ex.raw.back() == 'A');

    ProblemInstance view;
    view.entities.push_back({"A", true, QualityModel::constant(1.0), ResponseModel::instant()});
    view.entities.push_back({"e", false, QualityModel::constant(2.0), ResponseModel::markovian(0.2)});
    view.wait = WaitCostModel::exponential(0.05, static_cast<real>(sc.steps));
    view.coord = CoordChangeModel::fixed(static_cast<real>(sc.delay_steps), 1.0, sc.max_delays);
    CHECK(validate_strategy(ex.strategy, view).empty());
}

TEST_CASE("extraction: an immediate decision reads as a bare A") {
    auto sc = test_delay_scenario();
    sc.user_quality = 0.0;
    sc.r_user = 0.0;
    sc.timeout_value_factor = 0.0;
    sc.late_rate = 2.0; // waiting is ruinous, decide at once
    auto mdp = build_delay_mdp(sc);
    auto solved = value_iteration(mdp);
    auto ex = extract_strategy(mdp, solved.policy);
    CHECK(ex.raw == "A");
    REQUIRE(ex.strategy.actions.size() == 1);
    CHECK(ex.strategy.actions[0].entity == "A");
}

TEST_CASE("extraction grammar view always validates over random policies") {
    auto sc = test_delay_scenario();
    auto mdp = build_delay_mdp(sc);
    ProblemInstance view;
    view.entities.push_back({"A", true, QualityModel::constant(1.0), ResponseModel::instant()});
    view.entities.push_back({"e", false, QualityModel::constant(2.0), ResponseModel::markovian(0.2)});
    view.wait = WaitCostModel::exponential(0.05, static_cast<real>(sc.steps + 1));
    view.coord = CoordChangeModel::fixed(static_cast<real>(sc.delay_steps), 1.0, sc.max_delays);
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        Rng rng(seed * 131 + 7);
        std::vector<int> policy(mdp.size(), -1);
        for (std::size_t s = 0; s < mdp.size(); ++s)
            if (!mdp.states[s].terminal)
                policy[s] = static_cast<int>(
                    rng.uniform_int(0, static_cast<long>(mdp.rows[s].size()) - 1));
        auto ex = extract_strategy(mdp, policy);
        if (ex.strategy.actions.empty()) continue; // pure-wait walk hit the horizon
        auto violations = validate_strategy(ex.strategy, view);
        CHECK(violations.empty());
    }
}

TEST_CASE("strategy-space counting matches brute-force enumeration") {
    for (std::uint64_t seed : {19u, 27u}) {
        Rng rng(seed);
        auto mdp = oracle::random_layered_mdp(rng, 8);
        std::vector<Constraint> cs = {oracle::random_constraint(rng, 0, 2)};
        if (!cs[0].forbidding()) cs[0].kind = Constraint::Kind::forbidden_state;
        auto adm = propagate_constraints(mdp, cs);
        real log_count = count_strategies(mdp, adm);

        long brute = 0;
        oracle::enumerate_policies(mdp, [&](const std::vector<int>& policy) {
            for (std::size_t s = 0; s < mdp.size(); ++s) {
                if (mdp.states[s].terminal || policy[s] < 0) continue;
                if (!adm.acceptable(mdp, static_cast<StateId>(s))) continue;
                if (!adm.allowed(s, static_cast<std::size_t>(policy[s]))) return;
            }
            ++brute;
        });
        // enumerate_policies distinguishes choices at non-acceptable states;
        // divide them back out
        real excess = 0.0;
        for (std::size_t s = 0; s < mdp.size(); ++s) {
            if (mdp.states[s].terminal || mdp.rows[s].empty()) continue;
            if (!adm.acceptable(mdp, static_cast<StateId>(s)))
                excess += std::log10(static_cast<real>(mdp.rows[s].size()));
        }
        CHECK(log_count ==
              doctest::Approx(std::log10(static_cast<real>(brute)) - excess).epsilon(1e-9));
    }
}

TEST_CASE("zero constraints: count equals the sum of action-count logs") {
    Rng rng(33);
    auto mdp = oracle::random_layered_mdp(rng, 30);
    auto adm = propagate_constraints(mdp, {});
    real expect = 0.0;
    for (std::size_t s = 0; s < mdp.size(); ++s)
        if (!mdp.states[s].terminal && !mdp.rows[s].empty())
            expect += std::log10(static_cast<real>(mdp.rows[s].size()));
    CHECK(count_strategies(mdp, adm) == doctest::Approx(expect).epsilon(1e-12));

    // worked example: per-state action counts {3, 3, 2}
    CHECK(std::log10(18.0) == doctest::Approx(1.2553).epsilon(1e-4));
}

TEST_CASE("adding constraints never raises the count") {
    Rng rng(55);
    auto mdp = oracle::random_layered_mdp(rng, 40);
    std::vector<Constraint> cs;
    real prev = kInf;
    for (int i = 0; i < 6; ++i) {
        auto c = oracle::random_constraint(rng, i, 2);
        if (!c.forbidding()) c.kind = Constraint::Kind::forbidden_state;
        if (c.kind == Constraint::Kind::forbidden_action && !c.action_test)
            c.action_test = ActionTest{false, "a0"};
        cs.push_back(c);
        auto adm = propagate_constraints(mdp, cs);
        real count = count_strategies(mdp, adm);
        CHECK(count <= prev + 1e-12);
        prev = count;
    }
}

TEST_CASE("simulation: determinism, convergence, point mass") {
    Rng rng(61);
    auto mdp = oracle::random_layered_mdp(rng, 25);
    auto solved = value_iteration(mdp);

    auto [traces_a, summary_a] = simulate_policy(mdp, solved.policy, 99, 200);
    auto [traces_b, summary_b] = simulate_policy(mdp, solved.policy, 99, 200);
    REQUIRE(traces_a.size() == traces_b.size());
    for (std::size_t i = 0; i < traces_a.size(); ++i) {
        CHECK(traces_a[i].states == traces_b[i].states);
        CHECK(traces_a[i].realized_utility == traces_b[i].realized_utility);
    }

    auto [traces_c, summary_c] = simulate_policy(mdp, solved.policy, 7, 40000, false);
    (void)traces_c;
    real u0 = solved.utility[static_cast<std::size_t>(mdp.initial)];
    CHECK(std::abs(summary_c.mean_utility - u0) <=
          3.0 * summary_c.std_error + 1e-9 * (1.0 + std::abs(u0)));

    // deterministic process: every trace identical, single histogram bin
    Mdp det;
    det.feature_names = {"x"};
    det.feature_labels.resize(1);
    det.actions = {MdpAction::decide(0, "go")};
    StateInfo a, t;
    a.features = {0};
    t.features = {1};
    t.terminal = true;
    t.terminal_reward = 2.0;
    det.states = {a, t};
    det.rows.resize(2);
    det.rows[0].push_back(ChoiceRow{0, 0.5, {{1, 1.0}}});
    det.initial = 0;
    auto [traces_d, summary_d] = simulate_policy(det, {0, -1}, 5, 50);
    CHECK(summary_d.length_histogram.size() == 1);
    CHECK(summary_d.mean_utility == doctest::Approx(2.5));
    CHECK(summary_d.std_error == 0.0);
    for (const auto& tr : traces_d) CHECK(tr.realized_utility == 2.5);
}

TEST_CASE("every sampled transition exists in the model") {
    Rng rng(71);
    auto mdp = oracle::random_layered_mdp(rng, 20);
    auto solved = value_iteration(mdp);
    auto [traces, summary] = simulate_policy(mdp, solved.policy, 13, 100);
    (void)summary;
    for (const auto& tr : traces) {
        for (std::size_t i = 0; i + 1 < tr.states.size(); ++i) {
            std::size_t s = static_cast<std::size_t>(tr.states[i]);
            const auto& row = mdp.rows[s][static_cast<std::size_t>(solved.policy[s])];
            bool found = false;
            for (const auto& t2 : row.successors)
                found = found || (t2.to == tr.states[i + 1] && t2.prob > 0);
            CHECK(found);
        }
    }
}

TEST_CASE("degenerate sweep equals a single census") {
    auto sc = test_delay_scenario();
    auto rows = parameter_sweep(sc, "repair_base", {sc.repair_base});
    REQUIRE(rows.size() == 1);
    auto mdp = build_delay_mdp(sc);
    auto solved = value_iteration(mdp);
    auto census = action_census(mdp, solved.policy);
    CHECK(rows[0].census.ask == census.ask);
    CHECK(rows[0].census.wait == census.wait);
    CHECK(rows[0].census.changes_total() == census.changes_total());
}

TEST_CASE("sweep CSV output is byte-stable") {
    auto sc = test_delay_scenario();
    auto rows1 = parameter_sweep(sc, "response_mean", {5.0, 20.0});
    auto rows2 = parameter_sweep(sc, "response_mean", {5.0, 20.0});
    CHECK(census_csv(rows1) == census_csv(rows2));
    CHECK(census_csv(rows1).find("parameter_value,ask,wait") == 0);
    CHECK_THROWS_AS(parameter_sweep(sc, "no_such_knob", {1.0}), validation_error);
}

TEST_CASE("auction replay: identical streams, bounded divergence") {
    AuctionScenario sc;
    sc.steps = 20;
    sc.bidders = 5;
    sc.prep_wait = WaitCostModel::exponential(0.08, 20.0);
    auto rows = auction_replay(sc, 2024, 16);
    REQUIRE(rows.size() == 16);
    auto rows_again = auction_replay(sc, 2024, 16);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].mdp_pct_remaining == rows_again[i].mdp_pct_remaining);
        CHECK(rows[i].ea_pct_remaining == rows_again[i].ea_pct_remaining);
        CHECK(rows[i].mdp_pct_remaining >= 0.0);
        CHECK(rows[i].mdp_pct_remaining <= 100.0);
    }

    // nothing more can arrive and closing already pays: close immediately
    AuctionScenario dominant = sc;
    dominant.bid_prob = 0.0;
    dominant.close_base = 50.0;
    dominant.count_bonus = 0.0;
    dominant.leader_quality = 0.1;
    auto fast = auction_replay(dominant, 3, 4);
    for (const auto& r : fast) CHECK(r.mdp_pct_remaining == doctest::Approx(100.0));

    // no bids ever and a silent leader: closure at the deadline
    AuctionScenario dry = sc;
    dry.bid_prob = 0.0;
    dry.leader_mean_steps = 1e9;
    dry.close_base = 0.0;
    dry.count_bonus = 0.0;
    dry.close_scale = 100.0; // closing early buys nothing, waiting is cheap
    dry.prep_wait = WaitCostModel::tabulated({{0.0, 20.0}, {0.0, 0.0}}, 20.0);
    auto slow = auction_replay(dry, 4, 3);
    for (const auto& r : slow) {
        CHECK(r.mdp_pct_remaining == doctest::Approx(0.0));
        CHECK(r.ea_pct_remaining == doctest::Approx(0.0));
    }
}

TEST_CASE("constraint impact rows are monotone in the count") {
    auto sc = test_delay_scenario();
    auto mdp = build_delay_mdp(sc);
    std::vector<Constraint> cs;
    Constraint c1;
    c1.id = "no-late-delay";
    c1.kind = Constraint::Kind::forbidden_action;
    c1.state_tests = {{"time", CmpOp::ge, 8.0}};
    c1.action_test = ActionTest{false, "delay"};
    Constraint c2;
    c2.id = "no-third-delay";
    c2.kind = Constraint::Kind::forbidden_state;
    c2.state_tests = {{"delays", CmpOp::ge, 3.0}};
    cs = {c1, c2};
    auto rows = constraint_impact(mdp, cs, 2);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].constraints == 0);
    CHECK(rows[1].log10_strategies <= rows[0].log10_strategies + 1e-12);
    CHECK(rows[2].log10_strategies <= rows[1].log10_strategies + 1e-12);
}

TEST_CASE("plot-data rendition holds the same numbers") {
    auto csv = std::string("a,b\n1,2\n3,4\n");
    auto plot = csv_to_plot_data(csv);
    CHECK(plot == "# a b\n1 2\n3 4\n");
}
