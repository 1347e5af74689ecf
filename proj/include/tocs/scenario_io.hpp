#pragma once

#include "tocs/mdp_build.hpp"
#include "tocs/model.hpp"
#include "tocs/solver.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace tocs::io {

using nlohmann::json;

namespace detail {

inline void check_fields(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    if (!j.is_object()) throw validation_error(where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key))
            throw validation_error(where + ": unknown field '" + key + "'");
    }
}

inline real get_real(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw validation_error(where + ": missing field '" + key + "'");
    if (!j[key].is_number()) throw validation_error(where + ": field '" + key + "' must be a number");
    return j[key].get<real>();
}

inline TimeTable get_table(const json& j, const std::string& tkey, const std::string& vkey,
                           const std::string& where) {
    TimeTable t;
    if (!j.contains(tkey) || !j.contains(vkey))
        throw validation_error(where + ": needs '" + tkey + "' and '" + vkey + "' arrays");
    for (const auto& x : j[tkey]) t.times.push_back(x.get<real>());
    for (const auto& x : j[vkey]) t.values.push_back(x.get<real>());
    return t;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Problem-instance scenario files
// ---------------------------------------------------------------------------

inline ResponseModel parse_response(const json& j, const std::string& where) {
    std::string kind = j.value("kind", "");
    if (kind == "instant") {
        detail::check_fields(j, {"kind"}, where);
        return ResponseModel::instant();
    }
    if (kind == "markovian") {
        detail::check_fields(j, {"kind", "rate"}, where);
        return ResponseModel::markovian(detail::get_real(j, "rate", where));
    }
    if (kind == "tabulated") {
        detail::check_fields(j, {"kind", "times", "density"}, where);
        return ResponseModel::tabulated(detail::get_table(j, "times", "density", where));
    }
    throw validation_error(where + ": response kind must be instant/markovian/tabulated");
}

inline QualityModel parse_quality(const json& j, const std::string& where) {
    std::string kind = j.value("kind", "");
    if (kind == "constant") {
        detail::check_fields(j, {"kind", "value"}, where);
        return QualityModel::constant(detail::get_real(j, "value", where));
    }
    if (kind == "tabulated") {
        detail::check_fields(j, {"kind", "times", "values"}, where);
        return QualityModel::tabulated(detail::get_table(j, "times", "values", where));
    }
    throw validation_error(where + ": quality kind must be constant/tabulated");
}

inline WaitCostModel parse_wait(const json& j) {
    std::string kind = j.value("kind", "");
    if (kind == "exponential") {
        detail::check_fields(j, {"kind", "omega", "deadline"}, "wait");
        return WaitCostModel::exponential(detail::get_real(j, "omega", "wait"),
                                          detail::get_real(j, "deadline", "wait"));
    }
    if (kind == "tabulated") {
        detail::check_fields(j, {"kind", "times", "costs", "deadline"}, "wait");
        return WaitCostModel::tabulated(detail::get_table(j, "times", "costs", "wait"),
                                        detail::get_real(j, "deadline", "wait"));
    }
    throw validation_error("wait: kind must be exponential/tabulated");
}

inline CoordChangeModel parse_coord(const json& j) {
    detail::check_fields(j, {"value", "cost", "costs", "max_changes"}, "coord");
    CoordChangeModel m;
    m.value = detail::get_real(j, "value", "coord");
    if (j.contains("costs") && j.contains("cost"))
        throw validation_error("coord: give either 'cost' or 'costs', not both");
    if (j.contains("costs"))
        for (const auto& c : j["costs"]) m.cost_schedule.push_back(c.get<real>());
    else if (j.contains("cost"))
        m.cost_schedule = {detail::get_real(j, "cost", "coord")};
    if (j.contains("max_changes"))
        m.max_changes = j["max_changes"].get<long>();
    else
        m.max_changes = j.contains("costs") ? static_cast<long>(m.cost_schedule.size()) : -1;
    return m;
}

inline ProblemInstance parse_instance(const json& j) {
    detail::check_fields(j, {"kind", "entities", "wait", "coord", "labels"}, "scenario");
    if (j.contains("kind") && j["kind"] != "instance")
        throw validation_error("scenario: expected kind 'instance'");
    ProblemInstance inst;
    if (!j.contains("entities") || !j["entities"].is_array())
        throw validation_error("scenario: needs an 'entities' array");
    for (const auto& ej : j["entities"]) {
        detail::check_fields(ej, {"id", "is_agent", "quality", "response"}, "entity");
        Entity e;
        e.id = ej.value("id", "");
        if (e.id == "D")
            throw validation_error("entity: id 'D' collides with the change notation");
        e.is_agent = ej.value("is_agent", false);
        if (!ej.contains("quality"))
            throw validation_error("entity " + e.id + ": missing quality");
        e.quality = parse_quality(ej["quality"], "entity " + e.id + " quality");
        if (ej.contains("response"))
            e.response = parse_response(ej["response"], "entity " + e.id + " response");
        else if (e.is_agent)
            e.response = ResponseModel::instant();
        else
            throw validation_error("entity " + e.id + ": missing response");
        inst.entities.push_back(std::move(e));
    }
    if (!j.contains("wait")) throw validation_error("scenario: missing wait model");
    inst.wait = parse_wait(j["wait"]);
    if (j.contains("coord")) inst.coord = parse_coord(j["coord"]);
    if (j.contains("labels")) {
        detail::check_fields(j["labels"], {"activity", "role", "decision"}, "labels");
        inst.activity = j["labels"].value("activity", "");
        inst.role = j["labels"].value("role", "");
        inst.decision = j["labels"].value("decision", "");
    }
    inst.validate();
    return inst;
}

inline json instance_to_json(const ProblemInstance& inst) {
    json j;
    j["kind"] = "instance";
    for (const auto& e : inst.entities) {
        json ej;
        ej["id"] = e.id;
        ej["is_agent"] = e.is_agent;
        switch (e.quality.kind) {
        case QualityModel::Kind::constant:
            ej["quality"] = {{"kind", "constant"}, {"value", e.quality.value}};
            break;
        case QualityModel::Kind::tabulated:
            ej["quality"] = {{"kind", "tabulated"},
                             {"times", e.quality.table.times},
                             {"values", e.quality.table.values}};
            break;
        }
        switch (e.response.kind) {
        case ResponseModel::Kind::instant: ej["response"] = {{"kind", "instant"}}; break;
        case ResponseModel::Kind::markovian:
            ej["response"] = {{"kind", "markovian"}, {"rate", e.response.rate}};
            break;
        case ResponseModel::Kind::tabulated:
            ej["response"] = {{"kind", "tabulated"},
                              {"times", e.response.density.times},
                              {"density", e.response.density.values}};
            break;
        }
        j["entities"].push_back(ej);
    }
    if (inst.wait.kind == WaitCostModel::Kind::exponential)
        j["wait"] = {{"kind", "exponential"}, {"omega", inst.wait.omega},
                     {"deadline", inst.wait.deadline}};
    else
        j["wait"] = {{"kind", "tabulated"}, {"times", inst.wait.table.times},
                     {"costs", inst.wait.table.values}, {"deadline", inst.wait.deadline}};
    json cj;
    cj["value"] = inst.coord.value;
    if (inst.coord.cost_schedule.size() == 1)
        cj["cost"] = inst.coord.cost_schedule.front();
    else
        cj["costs"] = inst.coord.cost_schedule;
    if (!inst.coord.unbounded()) cj["max_changes"] = inst.coord.max_changes;
    j["coord"] = cj;
    if (!inst.activity.empty() || !inst.role.empty() || !inst.decision.empty())
        j["labels"] = {{"activity", inst.activity}, {"role", inst.role},
                       {"decision", inst.decision}};
    return j;
}

// ---------------------------------------------------------------------------
// Decision-process scenario files
// ---------------------------------------------------------------------------

inline DelayScenario parse_delay_scenario(const json& j) {
    detail::check_fields(j,
                         {"kind", "step_minutes", "steps", "scheduled_step", "delay_steps",
                          "max_delays", "locations", "location_matrix", "initial_location",
                          "meeting_location", "response_mean_minutes", "ask_cost", "lambda1",
                          "lambda2", "lambda3", "lambda4", "repair_base", "repair_escalation",
                          "late_rate", "late_growth", "attendees", "r_activity", "r_user",
                          "user_quality", "user_delay_request_prob", "timeout_value_factor"},
                         "delay scenario");
    DelayScenario sc;
    sc.step_minutes = j.value("step_minutes", sc.step_minutes);
    sc.steps = j.value("steps", sc.steps);
    sc.scheduled_step = j.value("scheduled_step", sc.scheduled_step);
    sc.delay_steps = j.value("delay_steps", sc.delay_steps);
    sc.max_delays = j.value("max_delays", sc.max_delays);
    if (j.contains("locations"))
        sc.locations = j["locations"].get<std::vector<std::string>>();
    if (j.contains("location_matrix"))
        sc.location_matrix = j["location_matrix"].get<std::vector<std::vector<real>>>();
    auto location_index = [&](const json& v, const char* what) {
        if (v.is_number_integer()) return v.get<int>();
        std::string name = v.get<std::string>();
        for (std::size_t i = 0; i < sc.locations.size(); ++i)
            if (sc.locations[i] == name) return static_cast<int>(i);
        throw validation_error(std::string("delay scenario: unknown ") + what + " '" + name + "'");
    };
    if (j.contains("initial_location")) sc.initial_location = location_index(j["initial_location"], "initial_location");
    if (j.contains("meeting_location")) sc.meeting_location = location_index(j["meeting_location"], "meeting_location");
    if (j.contains("response_mean_minutes"))
        sc.response_mean_minutes = j["response_mean_minutes"].get<std::vector<real>>();
    if (j.contains("ask_cost")) sc.ask_cost = j["ask_cost"].get<std::vector<real>>();
    sc.lambda1 = j.value("lambda1", sc.lambda1);
    sc.lambda2 = j.value("lambda2", sc.lambda2);
    sc.lambda3 = j.value("lambda3", sc.lambda3);
    sc.lambda4 = j.value("lambda4", sc.lambda4);
    sc.repair_base = j.value("repair_base", sc.repair_base);
    sc.repair_escalation = j.value("repair_escalation", sc.repair_escalation);
    sc.late_rate = j.value("late_rate", sc.late_rate);
    sc.late_growth = j.value("late_growth", sc.late_growth);
    sc.attendees = j.value("attendees", sc.attendees);
    sc.r_activity = j.value("r_activity", sc.r_activity);
    sc.r_user = j.value("r_user", sc.r_user);
    sc.user_quality = j.value("user_quality", sc.user_quality);
    sc.user_delay_request_prob = j.value("user_delay_request_prob", sc.user_delay_request_prob);
    sc.timeout_value_factor = j.value("timeout_value_factor", sc.timeout_value_factor);
    sc.validate();
    return sc;
}

inline AuctionScenario parse_auction_scenario(const json& j) {
    detail::check_fields(j,
                         {"kind", "steps", "bidders", "bid_prob", "bid_quality_probs",
                          "bid_quality_value", "close_base", "close_scale", "margin_bonus",
                          "count_bonus", "leader_mean_steps", "leader_quality", "ask_cost",
                          "prep_wait"},
                         "auction scenario");
    AuctionScenario sc;
    sc.steps = j.value("steps", sc.steps);
    sc.bidders = j.value("bidders", sc.bidders);
    sc.bid_prob = j.value("bid_prob", sc.bid_prob);
    if (j.contains("bid_quality_probs"))
        sc.bid_quality_probs = j["bid_quality_probs"].get<std::vector<real>>();
    if (j.contains("bid_quality_value"))
        sc.bid_quality_value = j["bid_quality_value"].get<std::vector<real>>();
    sc.close_base = j.value("close_base", sc.close_base);
    sc.close_scale = j.value("close_scale", sc.close_scale);
    sc.margin_bonus = j.value("margin_bonus", sc.margin_bonus);
    sc.count_bonus = j.value("count_bonus", sc.count_bonus);
    sc.leader_mean_steps = j.value("leader_mean_steps", sc.leader_mean_steps);
    sc.leader_quality = j.value("leader_quality", sc.leader_quality);
    sc.ask_cost = j.value("ask_cost", sc.ask_cost);
    if (j.contains("prep_wait")) sc.prep_wait = parse_wait(j["prep_wait"]);
    sc.validate();
    return sc;
}

// ---------------------------------------------------------------------------
// Constraint files
// ---------------------------------------------------------------------------

inline CmpOp parse_op(const std::string& s) {
    if (s == "=" || s == "==") return CmpOp::eq;
    if (s == "!=" || s == "≠") return CmpOp::ne;
    if (s == "<") return CmpOp::lt;
    if (s == ">") return CmpOp::gt;
    if (s == "<=" || s == "≤") return CmpOp::le;
    if (s == ">=" || s == "≥") return CmpOp::ge;
    throw validation_error("constraint: unknown comparison '" + s + "'");
}

/// Translates a feature value that may be a label ("office") into its
/// numeric encoding using the process's label dictionaries.
inline real feature_value(const Mdp& mdp, int feature, const json& v) {
    if (v.is_number()) return v.get<real>();
    std::string name = v.get<std::string>();
    const auto& labels = mdp.feature_labels[static_cast<std::size_t>(feature)];
    auto it = labels.find(name);
    if (it == labels.end())
        throw validation_error("constraint: unknown label '" + name + "' for feature '" +
                               mdp.feature_names[static_cast<std::size_t>(feature)] + "'");
    return it->second;
}

inline std::vector<Constraint> parse_constraints(const json& j, const Mdp& mdp) {
    if (!j.is_array()) throw validation_error("constraints: expected a top-level array");
    std::vector<Constraint> out;
    for (const auto& cj : j) {
        detail::check_fields(cj, {"id", "kind", "state_predicate", "action_predicate"},
                             "constraint");
        Constraint c;
        c.id = cj.value("id", "");
        std::string kind = cj.value("kind", "");
        if (kind == "forbidden_state") c.kind = Constraint::Kind::forbidden_state;
        else if (kind == "forbidden_action") c.kind = Constraint::Kind::forbidden_action;
        else if (kind == "required_state") c.kind = Constraint::Kind::required_state;
        else if (kind == "required_action") c.kind = Constraint::Kind::required_action;
        else throw validation_error("constraint " + c.id + ": unknown kind '" + kind + "'");
        if (cj.contains("state_predicate")) {
            for (const auto& tj : cj["state_predicate"]) {
                detail::check_fields(tj, {"feature", "op", "value"}, "state predicate");
                FeatureTest t;
                t.feature = tj.value("feature", "");
                int fi = mdp.feature_index(t.feature);
                if (fi < 0)
                    throw validation_error("constraint " + c.id + ": unknown feature '" +
                                           t.feature + "'");
                t.op = parse_op(tj.value("op", "="));
                t.value = feature_value(mdp, fi, tj.at("value"));
                c.state_tests.push_back(std::move(t));
            }
        }
        if (cj.contains("action_predicate")) {
            detail::check_fields(cj["action_predicate"], {"op", "value"}, "action predicate");
            ActionTest t;
            std::string op = cj["action_predicate"].value("op", "=");
            if (op == "=" || op == "==") t.negate = false;
            else if (op == "!=" || op == "≠") t.negate = true;
            else throw validation_error("constraint " + c.id + ": action op must be = or !=");
            t.name = cj["action_predicate"].value("value", "");
            if (mdp.action_index(t.name) < 0)
                throw validation_error("constraint " + c.id + ": unknown action '" + t.name + "'");
            c.action_test = t;
        }
        if (c.on_action() && !c.action_test)
            throw validation_error("constraint " + c.id + ": action rule needs action_predicate");
        out.push_back(std::move(c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Strategy strings
// ---------------------------------------------------------------------------

/// Parses the inline notation: entity ids and D, each optionally followed by
/// a parenthesized time, e.g. "H(5)D(8)A".  Entity tokens longest-match the
/// instance's ids; a transfer without a time is open-ended and only allowed
/// last; changes always need a time.
inline TimedStrategy parse_strategy_string(const std::string& text, const ProblemInstance& inst) {
    TimedStrategy out;
    std::size_t i = 0;
    auto skip_ws = [&] {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    };
    struct Token {
        bool is_change;
        std::string entity;
        bool has_time;
        real time;
    };
    std::vector<Token> tokens;
    while (skip_ws(), i < text.size()) {
        Token tok{false, "", false, 0.0};
        // longest entity-id match at this position, with D as the change
        std::size_t best_len = 0;
        for (const auto& e : inst.entities) {
            if (text.compare(i, e.id.size(), e.id) == 0 && e.id.size() > best_len) {
                best_len = e.id.size();
                tok.entity = e.id;
            }
        }
        if (text[i] == 'D' && best_len <= 1) {
            tok.is_change = true;
            tok.entity.clear();
            best_len = 1;
        }
        if (best_len == 0)
            throw validation_error("strategy string: no entity id matches at '" +
                                   text.substr(i) + "'");
        i += best_len;
        skip_ws();
        if (i < text.size() && text[i] == '(') {
            std::size_t close = text.find(')', i);
            if (close == std::string::npos)
                throw validation_error("strategy string: missing ')'");
            std::string num = text.substr(i + 1, close - i - 1);
            try {
                std::size_t used = 0;
                tok.time = std::stod(num, &used);
                while (used < num.size() && std::isspace(static_cast<unsigned char>(num[used])))
                    ++used;
                if (used != num.size()) throw std::invalid_argument(num);
            } catch (const std::exception&) {
                throw validation_error("strategy string: bad time '" + num + "'");
            }
            tok.has_time = true;
            i = close + 1;
        }
        tokens.push_back(std::move(tok));
    }
    if (tokens.empty()) throw validation_error("strategy string: empty");
    for (std::size_t k = 0; k < tokens.size(); ++k) {
        const auto& tok = tokens[k];
        bool last = k + 1 == tokens.size();
        if (tok.is_change) {
            if (!tok.has_time)
                throw validation_error("strategy string: coordination changes need a time");
            out.actions.push_back(StrategyAction::coord_change(tok.time));
        } else if (tok.has_time) {
            out.actions.push_back(StrategyAction::transfer(tok.entity, tok.time));
        } else if (last) {
            out.actions.push_back(StrategyAction::transfer(tok.entity, kInf));
        } else if (tokens[k + 1].is_change && tokens[k + 1].has_time) {
            // "eD(5)": the tenure ends exactly at the change
            out.actions.push_back(StrategyAction::transfer(tok.entity, tokens[k + 1].time));
        } else {
            throw validation_error(
                "strategy string: a transfer needs a time unless it is last or a timed change follows");
        }
    }
    return out;
}

/// Prints a strategy in the inline notation.  A tenure ending exactly at the
/// following change prints without its own time ("eD(5)..."), the final
/// open-ended transfer prints bare, everything else carries "(t)".
inline std::string strategy_to_string(const TimedStrategy& s) {
    std::ostringstream os;
    auto put_time = [&](real t) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "(%.10g)", t);
        os << buf;
    };
    for (std::size_t i = 0; i < s.actions.size(); ++i) {
        const auto& a = s.actions[i];
        if (a.kind == StrategyAction::Kind::coord_change) {
            os << 'D';
            put_time(a.time);
            continue;
        }
        os << a.entity;
        bool last = i + 1 == s.actions.size();
        bool swallowed = !last && s.actions[i + 1].kind == StrategyAction::Kind::coord_change &&
                         s.actions[i + 1].time == a.time;
        if (last && std::isinf(a.time)) continue;
        if (!swallowed) put_time(a.time);
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw validation_error("'" + path + "': " + e.what());
    }
    return j;
}

inline std::string scenario_kind(const json& j) {
    if (!j.is_object()) throw validation_error("scenario: expected an object");
    return j.value("kind", std::string("instance"));
}

} // namespace tocs::io
