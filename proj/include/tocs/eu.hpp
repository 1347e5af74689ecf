#pragma once

#include "tocs/model.hpp"
#include "tocs/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <vector>

namespace tocs {

// ---------------------------------------------------------------------------
// Closed-form model family
// ---------------------------------------------------------------------------

/// The fully analytic instantiation: one agent with constant quality `alpha`
/// answering instantly, one other entity with constant quality `beta` and a
/// memoryless response at `rho`, exponential wait cost at `omega`, and a
/// coordination change worth `d_value` time units at price `d_cost`.
struct AnalyticParams {
    real rho = 1.0;
    real omega = 0.1;
    real alpha = 0.0; // agent decision quality
    real beta = 1.0;  // other entity's decision quality
    real deadline = 10.0;
    real d_value = 0.0;
    real d_cost = 0.0;

    real delta() const { return rho - omega; }

    ProblemInstance to_instance(long max_changes = -1) const {
        ProblemInstance inst;
        inst.entities.push_back({"A", true, QualityModel::constant(alpha), ResponseModel::instant()});
        inst.entities.push_back({"U", false, QualityModel::constant(beta), ResponseModel::markovian(rho)});
        inst.wait = WaitCostModel::exponential(omega, deadline);
        inst.coord = CoordChangeModel::fixed(d_value, d_cost, max_changes);
        inst.validate();
        return inst;
    }
};

/// Strategy shapes with a closed-form expected utility.
enum class StrategyForm {
    immediate,            // the agent decides at once
    handoff,              // give the other entity control, wait indefinitely
    handoff_then_decide,  // other entity until T, then the agent decides
    handoff_coord_decide, // other entity, coordination change at dt, agent at T
};

struct ClosedFormResult {
    real value = 0.0;
    bool used_series_limit = false; // rho ~ omega handled by series expansion
};

// ---------------------------------------------------------------------------
// Expected-utility evaluation
// ---------------------------------------------------------------------------

struct SegmentContribution {
    std::string label;
    real t_begin = 0.0;
    real t_end = 0.0;
    real contribution = 0.0;
};

struct EuBreakdown {
    real total = 0.0;
    std::vector<SegmentContribution> segments;
    real expected_wait_cost = 0.0;
    real expected_coord_cost = 0.0;
};

struct EvalOptions {
    bool force_quadrature = false; // disable analytic segment shortcuts
    real quad_tol = 1e-8;          // absolute tolerance per segment
};

namespace detail {

/// Accrued wait cost bookkeeping across coordination changes.  Within the
/// current stretch the total wait paid by a decision at t is
/// base + W(max(t - shift, 0)); each change advances base so the function
/// stays continuous and charges the pre-change accrual exactly once.
struct WaitClock {
    real base = 0.0;
    real shift = 0.0;

    real accrued(const WaitCostModel& w, real t) const {
        return base + wait_cost(w, std::max(t - shift, 0.0));
    }

    void apply_change(const WaitCostModel& w, real at, real value) {
        real before = accrued(w, at);
        shift += value;
        base = before - wait_cost(w, std::max(at - shift, 0.0));
    }

    /// Wait paid when no decision is ever made: the capped tail.
    real accrued_at_horizon(const WaitCostModel& w) const {
        return base + wait_cost(w, w.deadline);
    }
};

/// integral over [x, y] of rho*exp(-rho t) * W(max(t - shift, 0)) for an
/// exponential wait model, split at the clamp and the deadline cap.
inline real markov_shifted_wait_integral(real rho, const WaitCostModel& w, real shift, real x,
                                         real y) {
    auto mass = [&](real a, real b) {
        real hi = std::isinf(b) ? 0.0 : std::exp(-rho * b);
        return std::exp(-rho * a) - hi;
    };
    real total = 0.0;
    real c0 = std::max(x, shift);               // below: W(0)
    real c1 = std::max(x, shift + w.deadline);  // above: W(deadline)
    if (c0 > x) total += wait_cost(w, 0.0) * mass(x, std::min(c0, y));
    real a = std::min(std::max(x, shift), y);
    real b = std::min(c1, y);
    if (b > a) {
        // rho*omega*exp(-omega*shift) * integral exp(-(rho-omega) t)
        real d = rho - w.omega;
        total += rho * w.omega * std::exp(-w.omega * shift) * std::exp(-d * a) *
                 expm1_ratio(d, b - a);
    }
    if (y > c1) total += wait_cost(w, w.deadline) * mass(std::max(x, c1), y);
    return total;
}

struct SegmentMoments {
    real mass = 0.0;             // conditional response mass (before scaling)
    real quality_integral = 0.0; // integral dens * EQ
    real wait_integral = 0.0;    // integral dens * accrued wait
};

inline std::vector<real> segment_breakpoints(const Entity& e, const WaitCostModel& w,
                                             const WaitClock& clock, real a, real b) {
    std::set<real> pts{a, b};
    auto add = [&](real t) {
        if (t > a && t < b) pts.insert(t);
    };
    add(clock.shift);
    add(clock.shift + w.deadline);
    if (w.kind == WaitCostModel::Kind::tabulated)
        for (real t : w.table.times) add(t + clock.shift);
    if (e.quality.kind == QualityModel::Kind::tabulated)
        for (real t : e.quality.table.times) add(t);
    if (e.response.kind == ResponseModel::Kind::tabulated)
        for (real t : e.response.density.times) add(t);
    return {pts.begin(), pts.end()};
}

/// Moments of one tenure [a, b] under a non-instant entity.  `b` may be
/// infinite; tails where every ingredient has gone flat are handled in
/// closed form, the rest numerically (or analytically for the memoryless /
/// constant-quality / exponential-wait combination).
inline SegmentMoments transfer_segment_moments(const Entity& e, const WaitCostModel& w,
                                               const WaitClock& clock, real a, real b,
                                               const EvalOptions& opts) {
    SegmentMoments m;
    const auto& resp = e.response;
    bool analytic = !opts.force_quadrature && resp.kind == ResponseModel::Kind::markovian &&
                    e.quality.kind == QualityModel::Kind::constant &&
                    w.kind == WaitCostModel::Kind::exponential;
    if (analytic) {
        real hi = std::isinf(b) ? 0.0 : std::exp(-resp.rate * b);
        m.mass = std::exp(-resp.rate * a) - hi;
        m.quality_integral = e.quality.value * m.mass;
        m.wait_integral =
            clock.base * m.mass + markov_shifted_wait_integral(resp.rate, w, clock.shift, a, b);
        return m;
    }

    // point past which density is zero or every term is constant
    real flat = std::max(a, clock.shift + w.deadline);
    if (w.kind == WaitCostModel::Kind::tabulated)
        flat = std::max(flat, w.table.times.back() + clock.shift);
    if (e.quality.kind == QualityModel::Kind::tabulated)
        flat = std::max(flat, e.quality.table.times.back());
    real finite_end = b;
    if (resp.kind == ResponseModel::Kind::tabulated)
        finite_end = std::min(b, resp.density.times.empty() ? a : resp.density.times.back());
    else if (std::isinf(b))
        finite_end = flat;

    if (finite_end > a) {
        auto pts = segment_breakpoints(e, w, clock, a, finite_end);
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            real lo = pts[i], hi = pts[i + 1];
            m.mass += response_prob(resp, lo, hi);
            m.quality_integral += integrate(
                [&](real t) { return response_density(resp, t) * quality(e.quality, t); }, lo, hi,
                opts.quad_tol);
            m.wait_integral += integrate(
                [&](real t) { return response_density(resp, t) * clock.accrued(w, t); }, lo, hi,
                opts.quad_tol);
        }
    }
    if (resp.kind == ResponseModel::Kind::markovian && b > finite_end) {
        // beyond the flat point every ingredient is constant
        real tail = response_prob(resp, std::max(a, finite_end), b);
        m.mass += tail;
        m.quality_integral += quality(e.quality, std::max(a, finite_end)) * tail;
        m.wait_integral += clock.accrued_at_horizon(w) * tail;
    }
    return m;
}

struct TimelineStep {
    enum class Kind { tenure, coord_change };
    Kind kind;
    int entity = -1; // tenure
    real begin = 0.0;
    real end = 0.0; // coord change: begin == end == time
};

/// Flattens the action list into tenures and change points.  Control starts
/// with the first transfer's entity at time zero; a transfer's time is the
/// moment control is taken away again; gaps between actions are tenures of
/// nobody (wait accrues, no response possible).
inline std::vector<TimelineStep> build_timeline(const TimedStrategy& s,
                                                const ProblemInstance& inst) {
    std::vector<TimelineStep> steps;
    real cursor = 0.0;
    for (const auto& a : s.actions) {
        if (a.kind == StrategyAction::Kind::transfer) {
            steps.push_back({TimelineStep::Kind::tenure, inst.entity_index(a.entity), cursor,
                             std::max(a.time, cursor)});
            cursor = std::max(a.time, cursor);
        } else {
            if (a.time > cursor)
                steps.push_back({TimelineStep::Kind::tenure, -1, cursor, a.time});
            steps.push_back({TimelineStep::Kind::coord_change, -1, a.time, a.time});
            cursor = std::max(a.time, cursor);
        }
    }
    return steps;
}

} // namespace detail

/// Expected utility of a timed strategy: the response-weighted decision
/// utility integrated tenure by tenure.  Within a tenure the controlling
/// entity answers with its response density conditioned on being unanswered
/// when the tenure starts; wait cost accrues on the coordination-shifted
/// clock; change costs charge every decision branch from the change onward.
/// Residual never-responds mass contributes zero quality and the full capped
/// wait cost.  Consecutive tenures of one entity chain exactly, so splitting
/// a tenure around a coordination change does not alter the result.
inline EuBreakdown eu_of_strategy(const ProblemInstance& inst, const TimedStrategy& s,
                                  const EvalOptions& opts = {}) {
    inst.validate();
    require_valid_strategy(s, inst);

    EuBreakdown out;
    detail::WaitClock clock;
    real reach = 1.0;
    real coord_paid = 0.0;
    long change_index = 0;
    auto timeline = detail::build_timeline(s, inst);

    for (const auto& step : timeline) {
        if (reach <= 0.0) break;
        if (step.kind == detail::TimelineStep::Kind::coord_change) {
            coord_paid += inst.coord.cost(++change_index);
            clock.apply_change(inst.wait, step.begin, inst.coord.value);
            continue;
        }
        if (step.entity < 0) continue; // nobody in control, wait just accrues
        const Entity& e = inst.entities[static_cast<std::size_t>(step.entity)];
        if (e.response.kind == ResponseModel::Kind::instant) {
            real u = quality(e.quality, step.begin) - clock.accrued(inst.wait, step.begin) -
                     coord_paid;
            out.segments.push_back({e.id + " decides", step.begin, step.begin, reach * u});
            out.expected_wait_cost += reach * clock.accrued(inst.wait, step.begin);
            out.expected_coord_cost += reach * coord_paid;
            out.total += reach * u;
            reach = 0.0;
            break;
        }
        if (step.end <= step.begin) continue;
        real survival = response_survival(e.response, step.begin);
        if (survival <= 1e-14) continue; // response mass spent, cannot answer now
        auto m = detail::transfer_segment_moments(e, inst.wait, clock, step.begin, step.end, opts);
        real scale = reach / survival;
        real contribution =
            scale * (m.quality_integral - m.wait_integral) - scale * m.mass * coord_paid;
        out.segments.push_back({e.id, step.begin, step.end, contribution});
        out.expected_wait_cost += scale * m.wait_integral;
        out.expected_coord_cost += scale * m.mass * coord_paid;
        out.total += contribution;
        real mass = std::min(m.mass / survival, 1.0);
        reach *= (1.0 - mass);
    }

    if (reach > 1e-15) {
        real wait_tail = clock.accrued_at_horizon(inst.wait);
        real u = -wait_tail - coord_paid;
        out.segments.push_back({"no response", kInf, kInf, reach * u});
        out.expected_wait_cost += reach * wait_tail;
        out.expected_coord_cost += reach * coord_paid;
        out.total += reach * u;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

/// Analytic expected utility for the simple strategy shapes under
/// AnalyticParams.  `t_decide` is the moment the agent takes over, `t_change`
/// the moment of the coordination change (handoff_coord_decide only).
/// Values match the quadrature of eu_of_strategy to within 1e-6 relative;
/// near rho == omega a series expansion replaces the 1/(rho-omega) terms.
inline ClosedFormResult eu_closed_form(const AnalyticParams& p, StrategyForm form,
                                       real t_decide = kInf, real t_change = 0.0) {
    const real rho = p.rho, omega = p.omega, dl = p.deadline;
    WaitCostModel w = WaitCostModel::exponential(omega, dl);
    ClosedFormResult r;
    r.used_series_limit = std::abs(p.delta()) < 1e-6;
    auto wait_at = [&](real t) { return wait_cost(w, std::max(t, 0.0)); };
    auto mass = [&](real a, real b) {
        real hi = std::isinf(b) ? 0.0 : std::exp(-rho * b);
        return std::exp(-rho * a) - hi;
    };
    switch (form) {
    case StrategyForm::immediate:
        r.value = p.alpha - wait_at(0.0);
        return r;
    case StrategyForm::handoff:
        r.value = p.beta * mass(0.0, kInf) - detail::markov_shifted_wait_integral(rho, w, 0.0, 0.0, kInf);
        return r;
    case StrategyForm::handoff_then_decide: {
        if (!(t_decide >= 0) || std::isinf(t_decide))
            throw validation_error("closed form: handoff_then_decide needs a finite takeover time");
        real T = t_decide;
        r.value = p.beta * mass(0.0, T) - detail::markov_shifted_wait_integral(rho, w, 0.0, 0.0, T) +
                  std::exp(-rho * T) * (p.alpha - wait_at(T));
        return r;
    }
    case StrategyForm::handoff_coord_decide: {
        if (!(t_change >= 0) || !(t_decide >= t_change) || std::isinf(t_decide))
            throw validation_error("closed form: need 0 <= change time <= takeover time < inf");
        real dt = t_change, T = t_decide, v = p.d_value;
        // decision branches after the change pay the change cost and the
        // shifted-clock wait in place of the unshifted one
        real adj = -wait_at(dt) + wait_at(dt - v) - p.d_cost;
        real s1 = p.beta * mass(0.0, dt) - detail::markov_shifted_wait_integral(rho, w, 0.0, 0.0, dt);
        real s2 = (p.beta + adj) * mass(dt, T) -
                  detail::markov_shifted_wait_integral(rho, w, v, dt, T);
        real s3 = std::exp(-rho * T) * (p.alpha + adj - wait_at(T - v));
        r.value = s1 + s2 + s3;
        return r;
    }
    }
    throw validation_error("closed form: unknown strategy form");
}

// ---------------------------------------------------------------------------
// Skeletons and timing optimization
// ---------------------------------------------------------------------------

/// An untimed action sequence: entity indices into a ProblemInstance with
/// `coord_change` marking coordination changes.  The grammar requires the
/// leading item to be an entity.
struct StrategySkeleton {
    static constexpr int coord_change = -1;

    std::vector<int> items;

    bool leads_with_transfer() const { return !items.empty() && items.front() >= 0; }

    int coord_changes() const {
        int n = 0;
        for (int it : items) n += (it == coord_change);
        return n;
    }

    std::string to_string(const ProblemInstance& inst) const {
        std::string out;
        for (int it : items)
            out += it == coord_change ? "D" : inst.entities[static_cast<std::size_t>(it)].id;
        return out;
    }

    bool operator==(const StrategySkeleton& o) const { return items == o.items; }
    bool operator<(const StrategySkeleton& o) const { return items < o.items; }
};

inline void require_feasible_skeleton(const StrategySkeleton& skel, const ProblemInstance& inst) {
    if (!skel.leads_with_transfer())
        throw validation_error("skeleton: leading item must be an entity");
    for (int it : skel.items)
        if (it != StrategySkeleton::coord_change &&
            (it < 0 || static_cast<std::size_t>(it) >= inst.entities.size()))
            throw validation_error("skeleton: entity index out of range");
    if (!inst.coord.unbounded() && skel.coord_changes() > inst.coord.max_changes)
        throw validation_error("skeleton: more coordination changes than the instance allows");
}

/// Which items carry a free time coordinate.  The final item, when it is an
/// entity, keeps control open-ended; an entity about to be interrupted by a
/// change and resumed afterwards ends exactly at the change (any earlier end
/// would only insert a dead stretch with nobody in control).
inline std::vector<bool> skeleton_coordinate_mask(const StrategySkeleton& skel) {
    std::vector<bool> owns(skel.items.size(), true);
    for (std::size_t i = 0; i < skel.items.size(); ++i) {
        int it = skel.items[i];
        if (it == StrategySkeleton::coord_change) continue;
        if (i + 1 == skel.items.size()) {
            owns[i] = false; // open-ended final tenure
        } else if (i + 2 < skel.items.size() &&
                   skel.items[i + 1] == StrategySkeleton::coord_change &&
                   skel.items[i + 2] == it) {
            owns[i] = false; // tenure split exactly at the change
        }
    }
    return owns;
}

inline std::size_t skeleton_coordinate_count(const StrategySkeleton& skel) {
    std::size_t n = 0;
    for (bool o : skeleton_coordinate_mask(skel)) n += o;
    return n;
}

/// Renders a skeleton with one time per free coordinate, in item order.
inline TimedStrategy skeleton_to_timed(const StrategySkeleton& skel,
                                       const ProblemInstance& inst,
                                       const std::vector<real>& times) {
    TimedStrategy s;
    auto owns = skeleton_coordinate_mask(skel);
    std::size_t ti = 0;
    for (std::size_t i = 0; i < skel.items.size(); ++i) {
        int it = skel.items[i];
        if (it == StrategySkeleton::coord_change) {
            s.actions.push_back(StrategyAction::coord_change(times.at(ti++)));
            continue;
        }
        real end;
        if (owns[i]) {
            end = times.at(ti++);
        } else if (i + 1 == skel.items.size()) {
            end = kInf;
        } else {
            end = times.at(ti); // the upcoming change's time, consumed by it
        }
        s.actions.push_back(
            StrategyAction::transfer(inst.entities[static_cast<std::size_t>(it)].id, end));
    }
    return s;
}

struct TimedResult {
    TimedStrategy strategy;
    EuBreakdown eu;
    std::vector<real> times;
};

namespace detail {

struct CoordinateProblem {
    const ProblemInstance& inst;
    const StrategySkeleton& skel;
    EvalOptions opts;

    real eval(const std::vector<real>& times) const {
        return eu_of_strategy(inst, skeleton_to_timed(skel, inst, times), opts).total;
    }
};

inline real golden_section_max(const std::function<real(real)>& f, real lo, real hi, real flo,
                               real fhi, int iters = 48) {
    constexpr real phi = 0.6180339887498949;
    real a = lo, b = hi;
    real x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    real f1 = f(x1), f2 = f(x2);
    real best_x = flo >= fhi ? lo : hi;
    real best_f = std::max(flo, fhi);
    for (int i = 0; i < iters && b - a > 1e-12 * (1.0 + std::abs(b)); ++i) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        }
        if (f1 > best_f) best_f = f1, best_x = x1;
        if (f2 > best_f) best_f = f2, best_x = x2;
    }
    return best_x;
}

} // namespace detail

/// Finds tenure/change times maximizing the skeleton's expected utility:
/// a coarse scan per coordinate refined by golden section, swept in rounds of
/// coordinate ascent until no coordinate improves by more than 1e-9.  The
/// last coordinate also considers leaving control open past the deadline.
inline TimedResult optimize_timings(const ProblemInstance& inst, const StrategySkeleton& skel,
                                    const EvalOptions& opts = {}, int grid_points = 33,
                                    int max_sweeps = 60) {
    inst.validate();
    require_feasible_skeleton(skel, inst);
    detail::CoordinateProblem prob{inst, skel, opts};

    auto owns = skeleton_coordinate_mask(skel);
    std::vector<std::size_t> coord_item;
    for (std::size_t i = 0; i < owns.size(); ++i)
        if (owns[i]) coord_item.push_back(i);
    std::size_t n = coord_item.size();
    real box = inst.wait.deadline * 1.25 + inst.coord.value * skel.coord_changes() + 1.0;
    std::vector<real> times(n);
    for (std::size_t i = 0; i < n; ++i)
        times[i] = box * static_cast<real>(i + 1) / static_cast<real>(n + 1);
    real best = prob.eval(times);

    // coarse joint seeding; coordinate ascent alone can settle into a side
    // basin when two timings interact
    if (n >= 1) {
        const real knots[] = {0.0, 0.08, 0.2, 0.4, 0.65, 1.0};
        std::vector<std::size_t> pick(n, 0);
        std::vector<real> probe(n);
        std::size_t combos = 1;
        for (std::size_t i = 0; i < n && combos < 4000; ++i) combos *= std::size(knots);
        if (combos < 4000) {
            while (true) {
                bool ordered = true;
                for (std::size_t i = 0; i < n; ++i) {
                    probe[i] = knots[pick[i]] * box;
                    if (i > 0 && probe[i] < probe[i - 1]) ordered = false;
                }
                if (ordered) {
                    real v = prob.eval(probe);
                    if (v > best) {
                        best = v;
                        times = probe;
                    }
                }
                std::size_t c = 0;
                while (c < n && ++pick[c] == std::size(knots)) pick[c++] = 0;
                if (c == n) break;
            }
        }
    }

    for (int sweep = 0; sweep < max_sweeps && n > 0; ++sweep) {
        real sweep_start = best;
        for (std::size_t i = 0; i < n; ++i) {
            real lo = i == 0 ? 0.0 : times[i - 1];
            real hi = i + 1 < n ? std::min(times[i + 1], box) : box;
            if (!std::isfinite(hi)) hi = box;
            lo = std::min(lo, hi);
            auto f = [&](real x) {
                std::vector<real> probe = times;
                // rounding in the bracket arithmetic must not reorder times
                probe[i] = std::min(std::max(x, lo), hi);
                return prob.eval(probe);
            };
            real step = (hi - lo) / static_cast<real>(grid_points - 1);
            real cand_x = std::min(std::max(times[i], lo), hi);
            real cand_f = f(cand_x);
            for (int g = 0; g < grid_points; ++g) {
                real x = lo + step * g;
                real fx = f(x);
                if (fx > cand_f) {
                    cand_f = fx;
                    cand_x = x;
                }
            }
            if (step > 0 && std::isfinite(cand_x)) {
                real a = std::max(lo, cand_x - step);
                real b = std::min(hi, cand_x + step);
                real refined = detail::golden_section_max(f, a, b, f(a), f(b));
                real fr = f(refined);
                if (fr > cand_f) {
                    cand_f = fr;
                    cand_x = refined;
                }
            }
            if (i + 1 == n && skel.items[coord_item[i]] != StrategySkeleton::coord_change) {
                // leaving the final tenure open-ended may dominate any
                // finite takeover once the wait cost has capped
                std::vector<real> probe = times;
                probe[i] = kInf;
                real finf = prob.eval(probe);
                if (finf > cand_f) {
                    cand_f = finf;
                    cand_x = kInf;
                }
            }
            times[i] = std::isfinite(cand_x) ? std::min(std::max(cand_x, lo), hi) : cand_x;
            best = cand_f;
        }
        if (best <= sweep_start + 1e-12 * (1.0 + std::abs(best)) && sweep > 0) break;
    }

    TimedResult out;
    out.times = times;
    out.strategy = skeleton_to_timed(skel, inst, times);
    out.eu = eu_of_strategy(inst, out.strategy, opts);
    return out;
}

/// Inserts a coordination change at `at` into a strategy that has none
/// there, splitting the covering tenure, and returns the expected-utility
/// gain gross of the change's own price (the inserted change is evaluated at
/// price zero; later changes keep the prices they already had).
inline real d_marginal_value(const ProblemInstance& inst, const TimedStrategy& s, real at,
                             const EvalOptions& opts = {}) {
    inst.validate();
    require_valid_strategy(s, inst);
    if (!(at >= 0) || !std::isfinite(at))
        throw validation_error("change insertion: time must be finite and >= 0");

    TimedStrategy augmented;
    long changes_before = 0;
    bool inserted = false;
    real cursor = 0.0;
    for (const auto& a : s.actions) {
        if (a.kind == StrategyAction::Kind::coord_change) {
            if (a.time == at)
                throw validation_error("change insertion: strategy already changes at that time");
            if (a.time <= at) ++changes_before;
            augmented.actions.push_back(a);
            cursor = std::max(cursor, a.time);
            continue;
        }
        if (!inserted && at >= cursor && at <= a.time) {
            augmented.actions.push_back(StrategyAction::transfer(a.entity, at));
            augmented.actions.push_back(StrategyAction::coord_change(at));
            augmented.actions.push_back(a);
            inserted = true;
        } else {
            augmented.actions.push_back(a);
        }
        cursor = std::max(cursor, a.time);
    }
    if (!inserted)
        throw validation_error("change insertion: time falls outside every tenure");
    auto violations = validate_strategy(augmented, inst);
    if (!violations.empty())
        throw validation_error("change insertion: result is not a valid strategy");

    // evaluate with a zero-price slot spliced into the schedule
    ProblemInstance modified = inst;
    std::vector<real> costs;
    long total_changes = 0;
    for (const auto& a : augmented.actions)
        if (a.kind == StrategyAction::Kind::coord_change) ++total_changes;
    for (long k = 1, orig = 1; k <= total_changes; ++k) {
        if (k == changes_before + 1)
            costs.push_back(0.0);
        else
            costs.push_back(inst.coord.cost(orig++));
    }
    modified.coord = CoordChangeModel::scheduled(inst.coord.value, costs);

    real with = eu_of_strategy(modified, augmented, opts).total;
    real without = eu_of_strategy(inst, s, opts).total;
    return with - without;
}

} // namespace tocs
