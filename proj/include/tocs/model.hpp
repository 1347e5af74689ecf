#pragma once

#include "tocs/core.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace tocs {

// ---------------------------------------------------------------------------
// Piecewise-linear tables
// ---------------------------------------------------------------------------

/// Strictly increasing time grid with one value per knot.  Lookups between
/// knots interpolate linearly; queries past the last knot return the last
/// value; queries before the first knot return the first value.
struct TimeTable {
    std::vector<real> times;
    std::vector<real> values;

    real at(real t) const {
        if (times.empty()) return 0.0;
        if (t <= times.front()) return values.front();
        if (t >= times.back()) return values.back();
        auto it = std::upper_bound(times.begin(), times.end(), t);
        std::size_t hi = static_cast<std::size_t>(it - times.begin());
        std::size_t lo = hi - 1;
        real w = (t - times[lo]) / (times[hi] - times[lo]);
        return values[lo] + w * (values[hi] - values[lo]);
    }

    void validate(const std::string& what) const {
        if (times.size() != values.size() || times.empty())
            throw validation_error(what + ": table needs matching, nonempty times/values");
        for (std::size_t i = 0; i + 1 < times.size(); ++i)
            if (!(times[i] < times[i + 1]))
                throw validation_error(what + ": table times must be strictly increasing");
        for (real t : times)
            if (!(t >= 0) || !std::isfinite(t))
                throw validation_error(what + ": table times must be finite and >= 0");
    }
};

// ---------------------------------------------------------------------------
// Response model
// ---------------------------------------------------------------------------

/// How long an entity takes to answer once asked.  `instant` is reserved for
/// the agent itself: it answers at once with probability 1.  Tabulated
/// densities may integrate to less than 1; the missing mass means the entity
/// never responds at all.
struct ResponseModel {
    enum class Kind { instant, markovian, tabulated };

    Kind kind = Kind::instant;
    real rate = 0.0;  // markovian
    TimeTable density; // tabulated

    static ResponseModel instant() { return ResponseModel{}; }
    static ResponseModel markovian(real rate) {
        ResponseModel m;
        m.kind = Kind::markovian;
        m.rate = rate;
        return m;
    }
    static ResponseModel tabulated(TimeTable density) {
        ResponseModel m;
        m.kind = Kind::tabulated;
        m.density = std::move(density);
        return m;
    }

    void validate() const {
        switch (kind) {
        case Kind::instant: break;
        case Kind::markovian:
            if (!(rate > 0) || !std::isfinite(rate))
                throw validation_error("response model: markovian rate must be > 0");
            break;
        case Kind::tabulated: {
            density.validate("response model");
            for (real v : density.values)
                if (v < 0) throw validation_error("response model: density must be nonnegative");
            real mass = tabulated_mass();
            if (mass > 1.0 + 1e-9)
                throw validation_error("response model: density mass exceeds 1");
            break;
        }
        }
    }

    real tabulated_mass() const {
        real mass = 0;
        for (std::size_t i = 0; i + 1 < density.times.size(); ++i)
            mass += 0.5 * (density.values[i] + density.values[i + 1]) *
                    (density.times[i + 1] - density.times[i]);
        return mass;
    }
};

/// Probability that the model responds within [t0, t1).  Markovian uses the
/// analytic CDF, tabulated uses trapezoidal integration over the grid.
inline real response_prob(const ResponseModel& m, real t0, real t1) {
    if (!(t0 >= 0) || std::isnan(t1)) throw std::domain_error("response_prob: need 0 <= t0 <= t1");
    if (t1 < t0) throw std::domain_error("response_prob: interval end precedes start");
    if (t0 == t1) return 0.0;
    switch (m.kind) {
    case ResponseModel::Kind::instant:
        return t0 == 0.0 ? 1.0 : 0.0;
    case ResponseModel::Kind::markovian: {
        real hi = std::isinf(t1) ? 0.0 : std::exp(-m.rate * t1);
        return std::exp(-m.rate * t0) - hi;
    }
    case ResponseModel::Kind::tabulated: {
        const auto& ts = m.density.times;
        if (ts.empty()) return 0.0;
        real a = std::max(t0, ts.front());
        real b = std::isinf(t1) ? ts.back() : std::min(t1, ts.back());
        if (b <= a) return 0.0;
        real mass = 0;
        for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
            real lo = std::max(a, ts[i]);
            real hi = std::min(b, ts[i + 1]);
            if (hi <= lo) continue;
            mass += 0.5 * (m.density.at(lo) + m.density.at(hi)) * (hi - lo);
        }
        return mass;
    }
    }
    return 0.0;
}

/// Probability that no response has arrived strictly before t.
inline real response_survival(const ResponseModel& m, real t) {
    return 1.0 - response_prob(m, 0.0, t);
}

/// Density value at t (0 past a tabulated grid; undefined spike for instant).
inline real response_density(const ResponseModel& m, real t) {
    switch (m.kind) {
    case ResponseModel::Kind::instant: return 0.0;
    case ResponseModel::Kind::markovian: return m.rate * std::exp(-m.rate * t);
    case ResponseModel::Kind::tabulated:
        if (m.density.times.empty() || t < m.density.times.front() || t > m.density.times.back())
            return 0.0;
        return m.density.at(t);
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Decision-quality model
// ---------------------------------------------------------------------------

struct QualityModel {
    enum class Kind { constant, tabulated };

    Kind kind = Kind::constant;
    real value = 0.0;
    TimeTable table;

    static QualityModel constant(real q) {
        QualityModel m;
        m.value = q;
        return m;
    }
    static QualityModel tabulated(TimeTable t) {
        QualityModel m;
        m.kind = Kind::tabulated;
        m.table = std::move(t);
        return m;
    }

    void validate() const {
        if (kind == Kind::tabulated) table.validate("quality model");
        if (kind == Kind::constant && !std::isfinite(value))
            throw validation_error("quality model: constant must be finite");
    }
};

inline real quality(const QualityModel& m, real t) {
    if (!(t >= 0)) throw std::domain_error("quality: time must be >= 0");
    return m.kind == QualityModel::Kind::constant ? m.value : m.table.at(t);
}

// ---------------------------------------------------------------------------
// Wait-cost model
// ---------------------------------------------------------------------------

/// Team cost of the decision still being unmade at time t.  Nondecreasing up
/// to the deadline, flat afterwards.  Costs are stored as nonnegative
/// magnitudes and subtracted from utility at the point of use.
struct WaitCostModel {
    enum class Kind { exponential, tabulated };

    Kind kind = Kind::exponential;
    real omega = 0.0;
    real deadline = 0.0;
    TimeTable table;

    static WaitCostModel exponential(real omega, real deadline) {
        WaitCostModel m;
        m.omega = omega;
        m.deadline = deadline;
        return m;
    }
    static WaitCostModel tabulated(TimeTable t, real deadline) {
        WaitCostModel m;
        m.kind = Kind::tabulated;
        m.table = std::move(t);
        m.deadline = deadline;
        return m;
    }

    void validate() const {
        if (!(deadline > 0) || !std::isfinite(deadline))
            throw validation_error("wait model: deadline must be finite and > 0");
        if (kind == Kind::exponential) {
            if (!(omega > 0)) throw validation_error("wait model: omega must be > 0");
        } else {
            table.validate("wait model");
            for (std::size_t i = 0; i + 1 < table.values.size(); ++i)
                if (table.values[i] > table.values[i + 1] &&
                    table.times[i + 1] <= deadline + 1e-12)
                    throw validation_error("wait model: cost must be nondecreasing before the deadline");
            for (real v : table.values)
                if (v < 0) throw validation_error("wait model: costs must be nonnegative");
        }
    }
};

inline real wait_cost(const WaitCostModel& m, real t) {
    if (!(t >= 0)) throw std::domain_error("wait_cost: time must be >= 0");
    real tc = std::min(t, m.deadline);
    if (m.kind == WaitCostModel::Kind::exponential) return m.omega * std::exp(m.omega * tc);
    return m.table.at(tc);
}

// ---------------------------------------------------------------------------
// Coordination-change model
// ---------------------------------------------------------------------------

/// A coordination change buys `value` time units (the wait clock is pushed
/// back) and costs `cost(k)` for the k-th change.  `max_changes` < 0 means
/// unbounded (only allowed with a constant schedule).
struct CoordChangeModel {
    real value = 0.0;
    std::vector<real> cost_schedule; // 1-based occurrence k -> cost_schedule[k-1]
    long max_changes = 0;

    static CoordChangeModel none() { return CoordChangeModel{}; }
    static CoordChangeModel fixed(real value, real cost, long max_changes = -1) {
        CoordChangeModel m;
        m.value = value;
        m.cost_schedule = {cost};
        m.max_changes = max_changes;
        return m;
    }
    static CoordChangeModel scheduled(real value, std::vector<real> costs) {
        CoordChangeModel m;
        m.value = value;
        m.max_changes = static_cast<long>(costs.size());
        m.cost_schedule = std::move(costs);
        return m;
    }

    bool unbounded() const { return max_changes < 0; }

    /// Cost of the k-th change (k >= 1); a one-entry schedule repeats.
    real cost(long k) const {
        if (k < 1) throw std::domain_error("coord cost: occurrence index is 1-based");
        if (cost_schedule.empty()) return 0.0;
        if (cost_schedule.size() == 1) return cost_schedule.front();
        if (static_cast<std::size_t>(k) > cost_schedule.size())
            throw std::domain_error("coord cost: schedule exhausted");
        return cost_schedule[static_cast<std::size_t>(k - 1)];
    }

    void validate() const {
        if (value < 0) throw validation_error("coord model: value must be >= 0");
        for (real c : cost_schedule)
            if (c < 0) throw validation_error("coord model: costs must be >= 0");
        if (max_changes > 0 && cost_schedule.size() > 1 &&
            cost_schedule.size() < static_cast<std::size_t>(max_changes))
            throw validation_error("coord model: schedule shorter than max_changes");
        if (unbounded() && cost_schedule.size() > 1)
            throw validation_error("coord model: unbounded changes need a constant schedule");
    }
};

// ---------------------------------------------------------------------------
// Problem instance
// ---------------------------------------------------------------------------

struct Entity {
    std::string id;
    bool is_agent = false;
    QualityModel quality;
    ResponseModel response;
};

struct ProblemInstance {
    std::vector<Entity> entities;
    WaitCostModel wait;
    CoordChangeModel coord;
    std::string activity; // free-form labels
    std::string role;
    std::string decision;

    int agent_index() const {
        for (std::size_t i = 0; i < entities.size(); ++i)
            if (entities[i].is_agent) return static_cast<int>(i);
        return -1;
    }

    int entity_index(const std::string& id) const {
        for (std::size_t i = 0; i < entities.size(); ++i)
            if (entities[i].id == id) return static_cast<int>(i);
        return -1;
    }

    void validate() const {
        if (entities.empty()) throw validation_error("instance: needs at least one entity");
        int agents = 0;
        for (const auto& e : entities) {
            if (e.id.empty()) throw validation_error("instance: entity ids must be nonempty");
            if (e.is_agent) {
                ++agents;
                if (e.response.kind != ResponseModel::Kind::instant)
                    throw validation_error("instance: the agent's response must be instant");
            }
            e.quality.validate();
            e.response.validate();
        }
        if (agents != 1) throw validation_error("instance: exactly one entity must be the agent");
        for (std::size_t i = 0; i < entities.size(); ++i)
            for (std::size_t j = i + 1; j < entities.size(); ++j)
                if (entities[i].id == entities[j].id)
                    throw validation_error("instance: duplicate entity id '" + entities[i].id + "'");
        wait.validate();
        coord.validate();
    }
};

// ---------------------------------------------------------------------------
// Timed strategies
// ---------------------------------------------------------------------------

/// One step of a transfer-of-control strategy.  A transfer names the entity
/// given control and the time at which control is taken away again (the last
/// transfer may use infinity).  A coordination change happens at a point in
/// time during whatever tenure contains it.
struct StrategyAction {
    enum class Kind { transfer, coord_change };

    Kind kind = Kind::transfer;
    std::string entity; // transfer only
    real time = 0.0;    // transfer: end of tenure; coord change: moment it happens

    static StrategyAction transfer(std::string entity, real end_time) {
        return StrategyAction{Kind::transfer, std::move(entity), end_time};
    }
    static StrategyAction coord_change(real at) {
        return StrategyAction{Kind::coord_change, {}, at};
    }
};

struct TimedStrategy {
    std::vector<StrategyAction> actions;
};

/// Number of effective actions: transfers to a new holder plus coordination
/// changes.  Re-transfers to the entity already in control are bookkeeping
/// (they split a tenure around a coordination change) and do not count.
inline int strategy_length(const TimedStrategy& s) {
    int n = 0;
    const std::string* holder = nullptr;
    for (const auto& a : s.actions) {
        if (a.kind == StrategyAction::Kind::coord_change) {
            ++n;
        } else {
            if (holder == nullptr || *holder != a.entity) ++n;
            holder = &a.entity;
        }
    }
    return n;
}

/// Checks a strategy against the grammar and an instance: leading action is
/// a transfer, times are nondecreasing and nonnegative, transfers name known
/// entities, and the coordination-change budget is respected.  Returns the
/// list of violations; empty means ok.
inline std::vector<std::string> validate_strategy(const TimedStrategy& s,
                                                  const ProblemInstance& inst) {
    std::vector<std::string> out;
    if (s.actions.empty()) {
        out.push_back("strategy must contain at least one action");
        return out;
    }
    if (s.actions.front().kind != StrategyAction::Kind::transfer)
        out.push_back("leading action must be a transfer");
    real prev = 0.0;
    bool seen_inf = false;
    long coord_count = 0;
    for (std::size_t i = 0; i < s.actions.size(); ++i) {
        const auto& a = s.actions[i];
        if (std::isnan(a.time) || a.time < 0) {
            out.push_back("action " + std::to_string(i) + ": time must be >= 0");
            continue;
        }
        if (a.time < prev) out.push_back("times must be nondecreasing");
        if (seen_inf && std::isfinite(a.time)) out.push_back("times must be nondecreasing");
        prev = std::max(prev, a.time);
        seen_inf = seen_inf || std::isinf(a.time);
        if (a.kind == StrategyAction::Kind::transfer) {
            if (inst.entity_index(a.entity) < 0)
                out.push_back("transfer names unknown entity '" + a.entity + "'");
        } else {
            ++coord_count;
            if (std::isinf(a.time))
                out.push_back("coordination changes need a finite time");
        }
    }
    if (!inst.coord.unbounded() && coord_count > inst.coord.max_changes)
        out.push_back("strategy uses " + std::to_string(coord_count) +
                      " coordination changes, instance allows " +
                      std::to_string(inst.coord.max_changes));
    return out;
}

inline void require_valid_strategy(const TimedStrategy& s, const ProblemInstance& inst) {
    auto violations = validate_strategy(s, inst);
    if (violations.empty()) return;
    std::ostringstream msg;
    msg << "invalid strategy:";
    for (const auto& v : violations) msg << " [" << v << "]";
    throw validation_error(msg.str());
}

} // namespace tocs
