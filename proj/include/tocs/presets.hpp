#pragma once

// Reference scenarios shared by the bundled experiments, the CLI and the
// acceptance suite.  Values are desk-scale calibrations of the meeting
// domain: minutes for time, small utility units for rewards.

#include "tocs/analysis.hpp"
#include "tocs/eu.hpp"
#include "tocs/mdp_build.hpp"
#include "tocs/solver.hpp"

#include <string>
#include <vector>

namespace tocs::presets {

/// Regimes for the simple-strategy comparison table: two meeting classes
/// (small/large) by three user locations.  Response means follow the
/// office / away / at-the-room pattern; wait cost grows much faster for the
/// large meeting; quality constants keep the user far ahead of the agent.
struct ComparisonRegime {
    std::string meeting;
    std::string location;
    AnalyticParams params;
};

inline std::vector<ComparisonRegime> comparison_regimes() {
    std::vector<ComparisonRegime> out;
    auto base = [](real response_mean, real omega) {
        AnalyticParams p;
        p.rho = 1.0 / response_mean; // per minute
        p.omega = omega;
        p.alpha = 14.9;
        p.beta = 42.0;
        p.deadline = 150.0;
        p.d_value = 15.0;
        p.d_cost = 0.25;
        return p;
    };
    const real small_omega = 0.3, large_omega = 0.5;
    out.push_back({"small", "office", base(5.0, small_omega)});
    out.push_back({"small", "not_at_dept", base(60.0, small_omega)});
    out.push_back({"small", "meeting_loc", base(10.0, small_omega)});
    out.push_back({"large", "office", base(5.0, large_omega)});
    out.push_back({"large", "not_at_dept", base(60.0, large_omega)});
    out.push_back({"large", "meeting_loc", base(10.0, large_omega)});
    return out;
}

/// The reference meeting scenario used by the sweeps and constraint studies.
inline DelayScenario reference_delay_scenario() {
    DelayScenario sc;
    sc.step_minutes = 0.75;
    sc.steps = 120;         // 90-minute window, fine-grained
    sc.scheduled_step = 40; // meeting 30 minutes in
    sc.delay_steps = 20;    // 15-minute delays
    sc.max_delays = 3;
    sc.locations = {"office", "not_at_dept", "meeting_loc"};
    sc.location_matrix = {{0.88, 0.04, 0.08}, {0.06, 0.86, 0.08}, {0.03, 0.02, 0.95}};
    sc.initial_location = 0;
    sc.meeting_location = 2;
    sc.response_mean_minutes = {5.0, 60.0, 10.0};
    sc.ask_cost = {0.1, 1.0, 0.3};
    sc.lambda1 = 1.0;
    sc.lambda2 = 1.0;
    sc.lambda3 = 1.0;
    sc.lambda4 = 1.0;
    sc.repair_base = 2.0;
    sc.repair_escalation = 2.0;
    sc.late_rate = 0.04;
    sc.late_growth = 0.08;
    sc.attendees = 5;
    sc.r_activity = 10.0;
    sc.r_user = 5.0;
    sc.user_quality = 17.0;
    sc.user_delay_request_prob = 0.5;
    sc.timeout_value_factor = 0.5;
    return sc;
}

/// Same scenario at a finer grid: more decision epochs, everything else
/// scaled to keep the dynamics comparable.
inline DelayScenario expanded_delay_scenario(int factor) {
    auto sc = reference_delay_scenario();
    sc.step_minutes /= factor;
    sc.steps *= factor;
    sc.scheduled_step *= factor;
    sc.delay_steps *= factor;
    return sc;
}

/// Ten user rules for the constraint-impact study, phrased over the delay
/// process features with thresholds scaled off the scenario's grid.
inline std::vector<Constraint> reference_delay_constraints(const DelayScenario& sc) {
    std::vector<Constraint> cs;
    auto add = [&](std::string id, Constraint::Kind kind, std::vector<FeatureTest> tests,
                   std::optional<ActionTest> action = {}) {
        Constraint c;
        c.id = std::move(id);
        c.kind = kind;
        c.state_tests = std::move(tests);
        c.action_test = std::move(action);
        cs.push_back(std::move(c));
    };
    auto frac = [&](real x) { return std::floor(x * sc.steps); };
    add("no-third-delay", Constraint::Kind::forbidden_state, {{"delays", CmpOp::ge, 3.0}});
    add("no-late-delay", Constraint::Kind::forbidden_action, {{"time", CmpOp::ge, frac(0.55)}},
        ActionTest{false, "delay"});
    add("no-cancel", Constraint::Kind::forbidden_action, {}, ActionTest{false, "cancel"});
    add("no-silent-finish", Constraint::Kind::forbidden_state,
        {{"time", CmpOp::ge, frac(0.96)},
         {"responded", CmpOp::eq, -1.0},
         {"decided", CmpOp::eq, -1.0}});
    add("no-away-autonomy", Constraint::Kind::forbidden_action,
        {{"location", CmpOp::eq, 1.0}, {"time", CmpOp::lt, frac(0.2)}},
        ActionTest{false, "announce_not_attend"});
    add("no-early-delay", Constraint::Kind::forbidden_action, {{"time", CmpOp::lt, frac(0.1)}},
        ActionTest{false, "delay"});
    add("no-attend-claim-away", Constraint::Kind::forbidden_action,
        {{"location", CmpOp::eq, 1.0}}, ActionTest{false, "announce_attend"});
    add("no-second-delay-late", Constraint::Kind::forbidden_action,
        {{"delays", CmpOp::ge, 1.0}, {"time", CmpOp::ge, frac(0.66)}},
        ActionTest{false, "delay"});
    add("no-idle-at-room", Constraint::Kind::forbidden_action,
        {{"location", CmpOp::eq, 2.0}, {"time", CmpOp::ge, frac(0.4)}},
        ActionTest{false, "wait"});
    add("resolve-it", Constraint::Kind::required_state,
        {{"time", CmpOp::lt, frac(0.96)}, {"responded", CmpOp::eq, 1.0}});
    return cs;
}

/// Reference auction: nine potential bidders over forty epochs.
inline AuctionScenario reference_auction_scenario() {
    AuctionScenario sc;
    sc.steps = 40;
    sc.bidders = 9;
    sc.bid_prob = 0.12;
    sc.bid_quality_probs = {0.3, 0.5, 0.2};
    sc.bid_quality_value = {0.2, 0.6, 1.0};
    sc.close_base = 0.5;
    sc.close_scale = 8.0;
    sc.margin_bonus = 2.0;
    sc.count_bonus = 2.0;
    sc.leader_mean_steps = 12.0;
    sc.leader_quality = 11.0;
    sc.ask_cost = 0.3;
    sc.prep_wait = WaitCostModel::exponential(0.08, 40.0);
    return sc;
}

} // namespace tocs::presets
