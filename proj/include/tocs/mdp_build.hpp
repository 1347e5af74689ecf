#pragma once

#include "tocs/mdp.hpp"
#include "tocs/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace tocs {

// ---------------------------------------------------------------------------
// Abstract compilation of a problem instance
// ---------------------------------------------------------------------------

/// Compiles a problem instance onto a uniform time grid.  States are
/// (controller, time index, changes taken); actions are transfers, wait and
/// the coordination change.  Per-step response branches use the hazard
/// (mass conditioned on survival at the step's start), so the compiled chain
/// reproduces the entity's response distribution rather than compounding
/// unconditional masses.  Wait increments charge every time-consuming
/// action; terminal rewards carry a -W(0) baseline so a path's total reward
/// equals decision quality minus total accrued wait, matching the
/// strategy-model accounting.
inline Mdp build_abstract_mdp(const ProblemInstance& inst, real grid_step) {
    inst.validate();
    if (!(grid_step > 0)) throw validation_error("abstract mdp: grid step must be > 0");
    real steps_real = inst.wait.deadline / grid_step;
    int n_steps = static_cast<int>(std::llround(steps_real));
    if (n_steps < 1 || std::abs(steps_real - n_steps) > 1e-9)
        throw validation_error("abstract mdp: grid step must divide the deadline");
    long max_changes = inst.coord.max_changes;
    if (inst.coord.unbounded())
        throw validation_error("abstract mdp: needs a finite coordination-change budget");
    int value_steps = 0;
    if (max_changes > 0) {
        real vs = inst.coord.value / grid_step;
        value_steps = static_cast<int>(std::llround(vs));
        if (std::abs(vs - value_steps) > 1e-9)
            throw validation_error("abstract mdp: change value must be a grid multiple");
    }

    MdpBuilder b({"controlling-entity", "time", "changes", "responded"});
    auto& mdp = b.mdp();
    for (const auto& e : inst.entities) mdp.entity_names.push_back(e.id);
    int agent = inst.agent_index();
    for (std::size_t i = 0; i < inst.entities.size(); ++i)
        b.set_label(0, inst.entities[i].id, static_cast<real>(i));
    b.set_label(3, "none", -1.0);

    std::vector<int> act_transfer(inst.entities.size());
    for (std::size_t i = 0; i < inst.entities.size(); ++i)
        act_transfer[i] = b.add_action(
            MdpAction::transfer(static_cast<int>(i), "transfer:" + inst.entities[i].id));
    int act_wait = b.add_action(MdpAction::wait());
    int act_change = max_changes > 0 ? b.add_action(MdpAction::coord_change()) : -1;

    const real baseline = wait_cost(inst.wait, 0.0);
    auto tau = [&](int k) { return grid_step * static_cast<real>(k); };
    auto step_cost = [&](int k) { return -(wait_cost(inst.wait, tau(k + 1)) - wait_cost(inst.wait, tau(k))); };

    auto nonterminal = [&](int ctrl, int t, int d) {
        StateInfo info;
        info.controlling_entity = ctrl;
        info.time_index = t;
        info.change_count = d;
        info.label = inst.entities[static_cast<std::size_t>(ctrl)].id + "@" + std::to_string(t);
        return b.state({static_cast<real>(ctrl), static_cast<real>(t), static_cast<real>(d), -1.0},
                       info);
    };
    auto resp_terminal = [&](int who, int t, int d) {
        StateInfo info;
        info.terminal = true;
        info.controlling_entity = who;
        info.time_index = t;
        info.change_count = d;
        info.responded_entity = who;
        info.terminal_reward =
            quality(inst.entities[static_cast<std::size_t>(who)].quality, tau(t)) - baseline;
        info.label = inst.entities[static_cast<std::size_t>(who)].id + "-answered@" + std::to_string(t);
        return b.state(
            {static_cast<real>(who), static_cast<real>(t), static_cast<real>(d), static_cast<real>(who)},
            info);
    };
    auto timeout_terminal = [&](int ctrl, int d) {
        StateInfo info;
        info.terminal = true;
        info.controlling_entity = ctrl;
        info.time_index = n_steps;
        info.change_count = d;
        info.terminal_reward = -baseline; // no decision: zero quality
        info.label = "timeout";
        return b.state({static_cast<real>(ctrl), static_cast<real>(n_steps), static_cast<real>(d), -1.0},
                       info);
    };

    StateId initial = nonterminal(agent, 0, 0);
    // breadth-first over reachable states
    for (std::size_t frontier = 0; frontier < mdp.states.size(); ++frontier) {
        StateId s = static_cast<StateId>(frontier);
        StateInfo st = mdp.states[frontier]; // copy: rows/states reallocate
        if (st.terminal) continue;
        int ctrl = st.controlling_entity, t = st.time_index, d = st.change_count;

        // hazard of the current controller answering during this step
        auto hazard = [&](int who) {
            const auto& rm = inst.entities[static_cast<std::size_t>(who)].response;
            real survival = response_survival(rm, tau(t));
            if (survival <= 1e-14) return 0.0;
            return std::min(response_prob(rm, tau(t), tau(t + 1)) / survival, 1.0);
        };
        auto push_timed = [&](int action, int who, real extra_reward) {
            real h = who == agent ? 0.0 : hazard(who);
            std::vector<Transition> succ;
            if (h > 0) succ.push_back({resp_terminal(who, t + 1, d), h});
            if (h < 1) {
                StateId next = t + 1 == n_steps ? timeout_terminal(who, d) : nonterminal(who, t + 1, d);
                succ.push_back({next, 1.0 - h});
            }
            b.add_choice(s, action, step_cost(t) + extra_reward, std::move(succ));
        };

        for (std::size_t e = 0; e < inst.entities.size(); ++e) {
            if (static_cast<int>(e) == agent) {
                // the agent answers the moment it takes control
                std::vector<Transition> succ{{resp_terminal(agent, t, d), 1.0}};
                b.add_choice(s, act_transfer[e], 0.0, std::move(succ));
            } else {
                push_timed(act_transfer[e], static_cast<int>(e), 0.0);
            }
        }
        push_timed(act_wait, ctrl, 0.0);
        if (act_change >= 0 && d < max_changes) {
            int back = std::max(t - value_steps, 0);
            std::vector<Transition> succ{{nonterminal(ctrl, back, d + 1), 1.0}};
            b.add_choice(s, act_change, -inst.coord.cost(d + 1), std::move(succ));
        }
    }
    mdp.initial = initial;
    mdp.validate();
    return mdp;
}

// ---------------------------------------------------------------------------
// Delay scenario
// ---------------------------------------------------------------------------

/// Meeting-attendance decision: should the agent announce its user's
/// attendance, keep waiting, ask the user, or delay the meeting?  Locations
/// evolve by a per-step Markov chain; asking costs depend on the channel the
/// location implies; delaying pushes the scheduled slot and gets charged the
/// escalating repair cost.
struct DelayScenario {
    real step_minutes = 5.0;
    int steps = 24;          // decision window length
    int scheduled_step = 6;  // original meeting slot
    int delay_steps = 3;     // slot shift per coordination change
    int max_delays = 3;      // hard cap: one more is never admissible

    std::vector<std::string> locations = {"office", "not_at_dept", "meeting_loc"};
    std::vector<std::vector<real>> location_matrix; // row-stochastic, per step
    int initial_location = 0;
    int meeting_location = 2;

    std::vector<real> response_mean_minutes = {5.0, 60.0, 10.0}; // per location
    std::vector<real> ask_cost = {0.1, 1.0, 0.3};                // per location

    real lambda1 = 1.0, lambda2 = 1.0, lambda3 = 1.0, lambda4 = 1.0;
    real repair_base = 2.0;      // g scale
    real repair_escalation = 2.0;
    real late_rate = 0.05;       // h scale, per attendee
    real late_growth = 0.15;     // 1/minute
    int attendees = 5;
    real r_activity = 10.0;
    real r_user = 5.0;
    real user_quality = 16.0;           // terminal value of a user answer
    real user_delay_request_prob = 0.5; // answers that ask the team to wait
    real timeout_value_factor = 0.5;

    void validate() const {
        if (steps < 2 || scheduled_step < 1 || scheduled_step >= steps)
            throw validation_error("delay scenario: need 1 <= scheduled < steps");
        if (delay_steps < 1 || max_delays < 0)
            throw validation_error("delay scenario: bad delay geometry");
        if (locations.empty() || location_matrix.size() != locations.size())
            throw validation_error("delay scenario: location matrix shape");
        for (const auto& row : location_matrix) {
            if (row.size() != locations.size())
                throw validation_error("delay scenario: location matrix shape");
            real mass = 0.0;
            for (real p : row) {
                if (p < 0 || p > 1 + 1e-12)
                    throw validation_error("delay scenario: location probabilities outside [0,1]");
                mass += p;
            }
            if (std::abs(mass - 1.0) > 1e-9)
                throw validation_error("delay scenario: location matrix rows must sum to 1");
        }
        if (response_mean_minutes.size() != locations.size() || ask_cost.size() != locations.size())
            throw validation_error("delay scenario: per-location tables must match locations");
        for (real m : response_mean_minutes)
            if (!(m > 0)) throw validation_error("delay scenario: response means must be > 0");
        if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || lambda4 < 0)
            throw validation_error("delay scenario: lambda weights must be >= 0");
        if (initial_location < 0 || initial_location >= static_cast<int>(locations.size()) ||
            meeting_location < 0 || meeting_location >= static_cast<int>(locations.size()))
            throw validation_error("delay scenario: location index out of range");
    }

    int scheduled_after(int delays) const { return scheduled_step + delays * delay_steps; }

    /// Lateness cost level once the decision is still open at step t with
    /// `delays` changes taken: zero before the (possibly moved) slot.
    real lateness_cost(int t, int delays) const {
        int sched = scheduled_after(delays);
        if (t <= sched) return 0.0;
        real late = (t - sched) * step_minutes;
        return attendees * late_rate * (std::exp(late_growth * late) - 1.0);
    }

    /// Repair cost of the (delays+1)-th change; inadmissible past the cap.
    bool repair_admissible(int delays_taken) const { return delays_taken < max_delays; }
    real repair_cost(int delays_taken) const {
        return repair_base * attendees * (delay_steps * step_minutes) / 15.0 *
               std::pow(repair_escalation, delays_taken);
    }

    real response_hazard(int location) const {
        return 1.0 - std::exp(-step_minutes / response_mean_minutes[static_cast<std::size_t>(location)]);
    }

    long nonterminal_state_count() const {
        // controller x time x delays x location, delays reachable only up to
        // the cap
        return 2L * steps * (max_delays + 1) * static_cast<long>(locations.size());
    }
};

enum class DelayDecision { announce_attend = 0, announce_not_attend = 1, cancel = 2 };

/// Expected terminal value of an autonomous decision, by exact forward
/// evolution of the location chain: announcing attendance scores the meeting
/// plus the user's value minus the expected cost of the room waiting for the
/// user's arrival after the (possibly moved) slot; announcing absence keeps
/// the meeting value alone; cancelling forfeits it.
inline real agent_decision_quality(const DelayScenario& sc, int t, int delays, int location,
                                   DelayDecision decision) {
    switch (decision) {
    case DelayDecision::announce_not_attend:
        return sc.lambda3 * sc.r_activity;
    case DelayDecision::cancel:
        return 0.0;
    case DelayDecision::announce_attend:
        break;
    }
    int sched = sc.scheduled_after(delays);
    std::size_t nl = sc.locations.size();
    std::vector<real> dist(nl, 0.0);
    dist[static_cast<std::size_t>(location)] = 1.0;
    auto evolve = [&](const std::vector<real>& d) {
        std::vector<real> next(nl, 0.0);
        for (std::size_t i = 0; i < nl; ++i)
            for (std::size_t j = 0; j < nl; ++j) next[j] += d[i] * sc.location_matrix[i][j];
        return next;
    };
    for (int k = t; k < sched; ++k) dist = evolve(dist);

    real value = 0.0;
    real there = 0.0;
    int wait_horizon = std::max(sc.steps - sched, 0);
    for (int m = 0; m <= wait_horizon; ++m) {
        real arrive = dist[static_cast<std::size_t>(sc.meeting_location)] - there;
        if (m == 0) arrive = dist[static_cast<std::size_t>(sc.meeting_location)];
        if (arrive > 0) {
            real late_cost =
                sc.attendees * sc.late_rate *
                (std::exp(sc.late_growth * (m * sc.step_minutes)) - 1.0);
            value += arrive * (sc.lambda3 * (sc.r_activity + sc.r_user) - sc.lambda2 * late_cost);
            there += arrive;
        }
        if (m < wait_horizon) {
            // keep the user absorbed once arrived
            std::vector<real> moving = dist;
            moving[static_cast<std::size_t>(sc.meeting_location)] = 0.0;
            moving = evolve(moving);
            for (std::size_t j = 0; j < nl; ++j)
                dist[j] = (j == static_cast<std::size_t>(sc.meeting_location))
                              ? there + moving[j]
                              : moving[j];
        }
    }
    real never = std::max(1.0 - there, 0.0);
    real worst_late = sc.attendees * sc.late_rate *
                      (std::exp(sc.late_growth * (wait_horizon * sc.step_minutes)) - 1.0);
    value += never * (sc.lambda3 * sc.r_activity - sc.lambda2 * worst_late);
    return value;
}

struct RewardTerm {
    bool admissible = true;
    real value = 0.0;
};

/// Immediate reward of one admissible action in the delay scenario: the
/// lateness increment charges every time-consuming action, asking adds the
/// channel cost, delaying pays the escalating repair cost (inadmissible past
/// the cap), and deciding scores the forward-simulated outcome.
inline RewardTerm team_reward(const DelayScenario& sc, int t, int delays, int location,
                              const MdpAction& action) {
    real late_step = -sc.lambda2 * (sc.lateness_cost(t + 1, delays) - sc.lateness_cost(t, delays));
    switch (action.kind) {
    case MdpAction::Kind::wait:
        return {true, late_step};
    case MdpAction::Kind::transfer:
        return {true, late_step - sc.lambda4 * sc.ask_cost[static_cast<std::size_t>(location)]};
    case MdpAction::Kind::coord_change:
        if (!sc.repair_admissible(delays)) return {false, 0.0};
        return {true, -sc.lambda1 * sc.repair_cost(delays)};
    case MdpAction::Kind::decide:
        return {true, agent_decision_quality(sc, t, delays, location,
                                             static_cast<DelayDecision>(action.option))};
    }
    return {true, 0.0};
}

/// Builds the meeting-delay decision process.  Nonterminal states are
/// (controller, time, delays, location); terminals capture a user answer,
/// an autonomous decision or the end of the window.
inline Mdp build_delay_mdp(const DelayScenario& sc) {
    sc.validate();
    MdpBuilder b({"controlling-entity", "time", "delays", "location", "responded", "decided"});
    auto& mdp = b.mdp();
    mdp.entity_names = {"A", "e"};
    b.set_label(0, "agent", 0.0);
    b.set_label(0, "user", 1.0);
    for (std::size_t i = 0; i < sc.locations.size(); ++i)
        b.set_label(3, sc.locations[i], static_cast<real>(i));
    b.set_label(5, "none", -1.0);
    b.set_label(5, "announce_attend", 0.0);
    b.set_label(5, "announce_not_attend", 1.0);
    b.set_label(5, "cancel", 2.0);

    int act_ask = b.add_action(MdpAction::transfer(1, "ask"));
    int act_wait = b.add_action(MdpAction::wait());
    int act_delay = b.add_action(MdpAction::coord_change("delay"));
    int act_decide[3] = {
        b.add_action(MdpAction::decide(0, "announce_attend")),
        b.add_action(MdpAction::decide(1, "announce_not_attend")),
        b.add_action(MdpAction::decide(2, "cancel")),
    };

    auto key = [&](int ctrl, int t, int d, int loc, int resp, int dec) {
        return std::vector<real>{static_cast<real>(ctrl), static_cast<real>(t),
                                 static_cast<real>(d),    static_cast<real>(loc),
                                 static_cast<real>(resp), static_cast<real>(dec)};
    };
    auto nonterminal = [&](int ctrl, int t, int d, int loc) {
        StateInfo info;
        info.controlling_entity = ctrl;
        info.time_index = t;
        info.change_count = d;
        return b.state(key(ctrl, t, d, loc, -1, -1), info);
    };
    auto answered = [&](int t, int d, int loc) {
        StateInfo info;
        info.terminal = true;
        info.controlling_entity = 1;
        info.time_index = t;
        info.change_count = d;
        info.responded_entity = 1;
        // answers often request one more delay; the team pays for it
        real requested_repair =
            d < sc.max_delays ? sc.user_delay_request_prob * sc.lambda1 * sc.repair_cost(d) : 0.0;
        info.terminal_reward = sc.user_quality - requested_repair;
        info.label = "user-answered";
        return b.state(key(1, t, d, loc, 1, -1), info);
    };
    auto decided = [&](int ctrl, int t, int d, int loc, int option, real value) {
        StateInfo info;
        info.terminal = true;
        info.controlling_entity = ctrl;
        info.time_index = t;
        info.change_count = d;
        info.terminal_reward = value;
        info.label = "decided";
        return b.state(key(ctrl, t, d, loc, -1, option), info);
    };
    auto timed_out = [&](int ctrl, int d, int loc) {
        StateInfo info;
        info.terminal = true;
        info.controlling_entity = ctrl;
        info.time_index = sc.steps;
        info.change_count = d;
        info.terminal_reward = sc.lambda3 * sc.r_activity * sc.timeout_value_factor;
        info.label = "window-closed";
        return b.state(key(ctrl, sc.steps, d, loc, -1, -1), info);
    };

    mdp.initial = nonterminal(0, 0, 0, sc.initial_location);
    // every starting location exists so policies can be read per context
    for (std::size_t loc0 = 0; loc0 < sc.locations.size(); ++loc0)
        nonterminal(0, 0, 0, static_cast<int>(loc0));
    for (std::size_t frontier = 0; frontier < mdp.states.size(); ++frontier) {
        StateId s = static_cast<StateId>(frontier);
        StateInfo st = mdp.states[frontier];
        if (st.terminal) continue;
        int ctrl = st.controlling_entity, t = st.time_index, d = st.change_count;
        int loc = static_cast<int>(st.features[3]);

        auto push_timed = [&](int action, int next_ctrl, real reward) {
            real h = next_ctrl == 1 ? sc.response_hazard(loc) : 0.0;
            std::vector<Transition> succ;
            if (h > 0) succ.push_back({answered(t + 1, d, loc), h});
            const auto& lrow = sc.location_matrix[static_cast<std::size_t>(loc)];
            for (std::size_t nl = 0; nl < lrow.size(); ++nl) {
                if (lrow[nl] <= 0) continue;
                real p = (1.0 - h) * lrow[nl];
                if (p <= 0) continue;
                StateId next = t + 1 == sc.steps ? timed_out(next_ctrl, d, static_cast<int>(nl))
                                                 : nonterminal(next_ctrl, t + 1, d, static_cast<int>(nl));
                succ.push_back({next, p});
            }
            b.add_choice(s, action, reward, std::move(succ));
        };

        // asking sits before waiting so exact EU ties resolve toward the
        // action that can end the episode
        if (ctrl == 0) {
            auto ask_term = team_reward(sc, t, d, loc, mdp.actions[static_cast<std::size_t>(act_ask)]);
            push_timed(act_ask, 1, ask_term.value);
        }
        auto wait_term = team_reward(sc, t, d, loc, MdpAction::wait());
        push_timed(act_wait, ctrl, wait_term.value);
        auto delay_term = team_reward(sc, t, d, loc, MdpAction::coord_change("delay"));
        if (delay_term.admissible && sc.scheduled_after(d + 1) < sc.steps) {
            std::vector<Transition> succ{{nonterminal(ctrl, t, d + 1, loc), 1.0}};
            b.add_choice(s, act_delay, delay_term.value, std::move(succ));
        }
        for (int option = 0; option < 3; ++option) {
            auto dec =
                team_reward(sc, t, d, loc, mdp.actions[static_cast<std::size_t>(act_decide[option])]);
            std::vector<Transition> succ{{decided(ctrl, t, d, loc, option, dec.value), 1.0}};
            b.add_choice(s, act_decide[option], 0.0, std::move(succ));
        }
    }
    mdp.validate();
    return mdp;
}

// ---------------------------------------------------------------------------
// Auction scenario
// ---------------------------------------------------------------------------

/// Role-auction closing decision: wait for more bids, ask the team leader,
/// or close and allocate now.  No coordination change exists here; the
/// opportunity cost of waiting is the shrinking preparation time.
struct AuctionScenario {
    int steps = 40;
    int bidders = 9;
    real bid_prob = 0.12;                          // per-step arrival chance
    std::vector<real> bid_quality_probs = {0.3, 0.5, 0.2};
    std::vector<real> bid_quality_value = {0.2, 0.6, 1.0};
    real close_base = 0.5;       // allocation value with no bids at all
    real close_scale = 8.0;      // times the best bid's value
    real margin_bonus = 2.0;     // times (best - second) value gap
    real count_bonus = 2.0;      // times the fraction of bidders heard from
    real leader_mean_steps = 12.0;
    real leader_quality = 11.0;
    real ask_cost = 0.3;
    WaitCostModel prep_wait = WaitCostModel::exponential(0.08, 40.0);

    void validate() const {
        if (steps < 2 || bidders < 1) throw validation_error("auction scenario: bad geometry");
        if (bid_quality_probs.size() != bid_quality_value.size() || bid_quality_probs.empty())
            throw validation_error("auction scenario: bid quality tables must match");
        real mass = 0.0;
        for (real p : bid_quality_probs) {
            if (p < 0) throw validation_error("auction scenario: negative probability");
            mass += p;
        }
        if (std::abs(mass - 1.0) > 1e-9)
            throw validation_error("auction scenario: bid quality probabilities must sum to 1");
        if (!(bid_prob >= 0 && bid_prob <= 1))
            throw validation_error("auction scenario: bid probability outside [0,1]");
        if (!(leader_mean_steps > 0))
            throw validation_error("auction scenario: leader mean must be > 0");
        prep_wait.validate();
    }

    real close_value(int bid_count, int best, int second) const {
        real v = close_base + count_bonus * static_cast<real>(bid_count) / bidders;
        if (best >= 0) v += close_scale * bid_quality_value[static_cast<std::size_t>(best)];
        if (best >= 0 && second >= 0)
            v += margin_bonus * (bid_quality_value[static_cast<std::size_t>(best)] -
                                 bid_quality_value[static_cast<std::size_t>(second)]);
        return v;
    }

    real leader_hazard() const { return 1.0 - std::exp(-1.0 / leader_mean_steps); }
};

/// Builds the auction closing process: state tracks elapsed time, how many
/// bids arrived and the best/second-best quality levels.
inline Mdp build_auction_mdp(const AuctionScenario& sc) {
    sc.validate();
    MdpBuilder b({"controlling-entity", "time", "bids", "best", "second", "responded", "decided"});
    auto& mdp = b.mdp();
    mdp.entity_names = {"A", "L"};
    b.set_label(0, "agent", 0.0);
    b.set_label(0, "leader", 1.0);

    int act_ask = b.add_action(MdpAction::transfer(1, "ask"));
    int act_wait = b.add_action(MdpAction::wait());
    int act_close = b.add_action(MdpAction::decide(0, "close"));

    auto key = [&](int ctrl, int t, int bids, int best, int second, int resp, int dec) {
        return std::vector<real>{static_cast<real>(ctrl), static_cast<real>(t),
                                 static_cast<real>(bids), static_cast<real>(best),
                                 static_cast<real>(second), static_cast<real>(resp),
                                 static_cast<real>(dec)};
    };
    auto nonterminal = [&](int ctrl, int t, int bids, int best, int second) {
        StateInfo info;
        info.controlling_entity = ctrl;
        info.time_index = t;
        return b.state(key(ctrl, t, bids, best, second, -1, -1), info);
    };
    auto closed = [&](int ctrl, int t, int bids, int best, int second) {
        StateInfo info;
        info.terminal = true;
        info.controlling_entity = ctrl;
        info.time_index = t;
        info.terminal_reward = sc.close_value(bids, best, second);
        info.label = "closed";
        return b.state(key(ctrl, t, bids, best, second, -1, 0), info);
    };
    auto leader_answered = [&](int t, int bids, int best, int second) {
        StateInfo info;
        info.terminal = true;
        info.controlling_entity = 1;
        info.time_index = t;
        info.responded_entity = 1;
        info.terminal_reward = sc.leader_quality;
        info.label = "leader-answered";
        return b.state(key(1, t, bids, best, second, 1, -1), info);
    };

    auto step_cost = [&](int t) {
        return -(wait_cost(sc.prep_wait, t + 1.0) - wait_cost(sc.prep_wait, static_cast<real>(t)));
    };

    mdp.initial = nonterminal(0, 0, 0, -1, -1);
    for (std::size_t frontier = 0; frontier < mdp.states.size(); ++frontier) {
        StateId s = static_cast<StateId>(frontier);
        StateInfo st = mdp.states[frontier];
        if (st.terminal) continue;
        int ctrl = st.controlling_entity, t = st.time_index;
        int bids = static_cast<int>(st.features[2]);
        int best = static_cast<int>(st.features[3]);
        int second = static_cast<int>(st.features[4]);

        auto push_timed = [&](int action, int next_ctrl, real extra) {
            real h = next_ctrl == 1 ? sc.leader_hazard() : 0.0;
            std::vector<Transition> succ;
            if (h > 0) succ.push_back({leader_answered(t + 1, bids, best, second), h});
            // one more bid may arrive while time passes
            struct Branch { real p; int bids, best, second; };
            std::vector<Branch> branches;
            real p_new = bids < sc.bidders ? sc.bid_prob : 0.0;
            branches.push_back({1.0 - p_new, bids, best, second});
            for (std::size_t q = 0; q < sc.bid_quality_probs.size(); ++q) {
                if (p_new * sc.bid_quality_probs[q] <= 0) continue;
                int nb = std::max(best, static_cast<int>(q));
                int ns = best < 0 ? -1
                                  : std::max(second, std::min(best, static_cast<int>(q)));
                branches.push_back({p_new * sc.bid_quality_probs[q], bids + 1, nb, ns});
            }
            for (const auto& br : branches) {
                if (br.p <= 0) continue;
                real p = (1.0 - h) * br.p;
                StateId next = t + 1 == sc.steps
                                   ? closed(next_ctrl, t + 1, br.bids, br.best, br.second)
                                   : nonterminal(next_ctrl, t + 1, br.bids, br.best, br.second);
                succ.push_back({next, p});
            }
            b.add_choice(s, action, step_cost(t) + extra, std::move(succ));
        };

        push_timed(act_wait, ctrl, 0.0);
        if (ctrl == 0) push_timed(act_ask, 1, -sc.ask_cost);
        std::vector<Transition> close_succ{{closed(ctrl, t, bids, best, second), 1.0}};
        b.add_choice(s, act_close, 0.0, std::move(close_succ));
    }
    mdp.validate();
    return mdp;
}

} // namespace tocs
