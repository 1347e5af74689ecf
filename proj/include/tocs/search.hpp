#pragma once

#include "tocs/eu.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <vector>

namespace tocs {

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

/// Every action string of the strategy grammar up to length `max_len` with at
/// most `max_changes` coordination changes: the first item is an entity,
/// later items are entities or changes.  Deterministic order: shorter
/// strings first, then entity index with the change marker last.
inline std::vector<StrategySkeleton> enumerate_skeletons(int n_entities, int max_len,
                                                         int max_changes) {
    if (n_entities < 1) throw validation_error("enumerate: need at least one entity");
    if (max_len < 1) throw validation_error("enumerate: max length must be >= 1");
    std::vector<StrategySkeleton> out;
    std::vector<int> current;
    auto extend = [&](auto&& self, int changes_used) -> void {
        if (!current.empty()) out.push_back(StrategySkeleton{current});
        if (static_cast<int>(current.size()) >= max_len) return;
        for (int e = 0; e < n_entities; ++e) {
            current.push_back(e);
            self(self, changes_used);
            current.pop_back();
        }
        if (!current.empty() && changes_used < max_changes) {
            current.push_back(StrategySkeleton::coord_change);
            self(self, changes_used + 1);
            current.pop_back();
        }
    };
    extend(extend, 0);
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.items.size() != b.items.size()) return a.items.size() < b.items.size();
        for (std::size_t i = 0; i < a.items.size(); ++i) {
            // entities before the change marker, then by index
            auto rank = [](int it) { return it == StrategySkeleton::coord_change ? 1 << 20 : it; };
            if (rank(a.items[i]) != rank(b.items[i])) return rank(a.items[i]) < rank(b.items[i]);
        }
        return false;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Dominance predicates
// ---------------------------------------------------------------------------

/// Whether, at time t, expected future wait cost outweighs the quality edge
/// of leaving entity `e` in control rather than deciding: the take-back
/// condition integral dens_e * W over [t, deadline) minus W(t) against
/// EQ_e(t) - EQ_agent(t).
inline bool takeback_favored(const ProblemInstance& inst, int entity_index, real t,
                             const EvalOptions& opts = {}) {
    if (!(t >= 0) || t >= inst.wait.deadline)
        throw std::domain_error("takeback test: need 0 <= t < deadline");
    const Entity& e = inst.entities.at(static_cast<std::size_t>(entity_index));
    const Entity& agent = inst.entities.at(static_cast<std::size_t>(inst.agent_index()));
    real future_cost;
    if (!opts.force_quadrature && e.response.kind == ResponseModel::Kind::markovian &&
        inst.wait.kind == WaitCostModel::Kind::exponential) {
        future_cost =
            detail::markov_shifted_wait_integral(e.response.rate, inst.wait, 0.0, t, inst.wait.deadline);
    } else {
        future_cost = integrate(
            [&](real u) { return response_density(e.response, u) * wait_cost(inst.wait, u); }, t,
            inst.wait.deadline, opts.quad_tol);
    }
    real lhs = future_cost - wait_cost(inst.wait, t);
    real rhs = quality(e.quality, t) - quality(agent.quality, t);
    return lhs > rhs;
}

/// The right-hand side of the change-usefulness test: the expected-utility
/// gain bound for one change of size d_value, at `change_at`, with takeover
/// at `takeover`.  Stable at rho == omega via series expansion.
inline real kth_change_value_bound(const AnalyticParams& p, real takeover, real change_at) {
    real rho = p.rho, omega = p.omega, d = p.delta();
    real bracket = 1.0 - rho * expm1_ratio(d, takeover) + omega * expm1_ratio(d, change_at) -
                   std::exp(omega * change_at - rho * takeover);
    return omega * (std::exp(-p.d_value * omega) - 1.0) * bracket;
}

/// Whether a k-th coordination change priced at `kth_cost` pays off in the
/// analytic family, for a change at `change_at` inside a tenure ending at
/// `takeover`.
inline bool kth_change_worthwhile(const AnalyticParams& p, real kth_cost, real takeover,
                                  real change_at) {
    if (!(change_at < takeover))
        throw std::domain_error("change test: change must precede the takeover");
    return kth_cost < kth_change_value_bound(p, takeover, change_at);
}

// ---------------------------------------------------------------------------
// Exhaustive search
// ---------------------------------------------------------------------------

struct SearchOptions {
    bool prune = true;
    EvalOptions eval;
    int grid_points = 33;
    int max_sweeps = 60;
    int dominance_samples = 64; // grid resolution for the pruning predicates
};

struct SearchReport {
    StrategySkeleton best_skeleton;
    TimedResult best;
    long enumerated = 0;          // raw grammar strings
    long examined = 0;            // timing optimizations actually run
    long pruned_by_takeback = 0;  // ending-entity dominance rule
    long pruned_by_change_value = 0;
    std::vector<std::pair<StrategySkeleton, real>> table; // per-skeleton optimal EU
};

namespace detail {

/// Truncates after the first instant decider (nothing later can run) and
/// merges immediately repeated entities (a free split point adds nothing).
inline StrategySkeleton canonical_skeleton(const StrategySkeleton& skel,
                                           const ProblemInstance& inst) {
    StrategySkeleton out;
    for (int it : skel.items) {
        if (it != StrategySkeleton::coord_change) {
            if (!out.items.empty() && out.items.back() == it) continue;
            out.items.push_back(it);
            const auto& e = inst.entities[static_cast<std::size_t>(it)];
            if (e.response.kind == ResponseModel::Kind::instant) break;
        } else {
            out.items.push_back(it);
        }
    }
    return out;
}

inline bool is_analytic_family(const ProblemInstance& inst) {
    if (inst.wait.kind != WaitCostModel::Kind::exponential) return false;
    for (const auto& e : inst.entities) {
        if (e.quality.kind != QualityModel::Kind::constant) return false;
        if (!e.is_agent && e.response.kind != ResponseModel::Kind::markovian) return false;
    }
    return true;
}

inline AnalyticParams analytic_params_for(const ProblemInstance& inst, int entity_index) {
    AnalyticParams p;
    const auto& agent = inst.entities[static_cast<std::size_t>(inst.agent_index())];
    const auto& e = inst.entities[static_cast<std::size_t>(entity_index)];
    p.rho = e.response.rate;
    p.omega = inst.wait.omega;
    p.alpha = agent.quality.value;
    p.beta = e.quality.value;
    p.deadline = inst.wait.deadline;
    p.d_value = inst.coord.value;
    return p;
}

struct DominanceVerdicts {
    bool takeback_for_all_entities = false; // appending the agent always helps
    std::vector<bool> takeback_never;       // per entity: appending it never helps
    std::vector<bool> change_useful;        // per occurrence index (1-based at [k-1])
};

inline DominanceVerdicts evaluate_dominance(const ProblemInstance& inst, int max_changes,
                                            const SearchOptions& opts) {
    DominanceVerdicts v;
    int n = static_cast<int>(inst.entities.size());
    int agent = inst.agent_index();
    v.takeback_never.assign(static_cast<std::size_t>(n), false);
    bool all = true;
    for (int e = 0; e < n; ++e) {
        if (e == agent) continue;
        bool exists = false, never = true;
        for (int i = 0; i < opts.dominance_samples; ++i) {
            real t = inst.wait.deadline * (static_cast<real>(i) + 0.5) /
                     static_cast<real>(opts.dominance_samples);
            if (takeback_favored(inst, e, t, opts.eval)) {
                exists = true;
                never = false;
                break;
            }
        }
        v.takeback_never[static_cast<std::size_t>(e)] = never;
        all = all && exists;
    }
    v.takeback_for_all_entities = all;

    if (is_analytic_family(inst) && max_changes > 0) {
        v.change_useful.assign(static_cast<std::size_t>(max_changes), false);
        for (int k = 1; k <= max_changes; ++k) {
            real cost;
            try {
                cost = inst.coord.cost(k);
            } catch (const std::domain_error&) {
                continue; // schedule exhausted: never useful
            }
            bool useful = false;
            for (int e = 0; e < n && !useful; ++e) {
                if (e == agent) continue;
                auto p = analytic_params_for(inst, e);
                if (cost <= 0.0) {
                    useful = true;
                    break;
                }
                for (int i = 0; i < opts.dominance_samples && !useful; ++i) {
                    real T = inst.wait.deadline * (static_cast<real>(i) + 1.0) /
                             static_cast<real>(opts.dominance_samples);
                    for (int j = 0; j < 8; ++j) {
                        real dt = T * (static_cast<real>(j) + 0.5) / 8.0;
                        // generous margin: only clearly hopeless changes prune
                        if (kth_change_value_bound(p, T, dt) > 0.2 * cost) {
                            useful = true;
                            break;
                        }
                    }
                }
            }
            v.change_useful[static_cast<std::size_t>(k - 1)] = useful;
        }
    }
    return v;
}

} // namespace detail

/// Exhaustive optimal-strategy search over the grammar up to `max_len`
/// actions, with optional dominance pruning.  Ties resolve toward shorter
/// skeletons and then lexicographic item order, so the result is
/// deterministic regardless of evaluation order.
inline SearchReport best_strategy(const ProblemInstance& inst, int max_len,
                                  const SearchOptions& opts = {}) {
    inst.validate();
    int max_changes = inst.coord.unbounded()
                          ? max_len - 1
                          : static_cast<int>(std::min<long>(inst.coord.max_changes, max_len - 1));
    auto skeletons = enumerate_skeletons(static_cast<int>(inst.entities.size()), max_len, max_changes);

    SearchReport report;
    report.enumerated = static_cast<long>(skeletons.size());
    auto verdicts = opts.prune ? detail::evaluate_dominance(inst, max_changes, opts)
                               : detail::DominanceVerdicts{};
    int agent = inst.agent_index();

    std::map<StrategySkeleton, real> canonical_eu;
    bool have_best = false;
    // quadrature-backed evaluations carry per-segment tolerance noise that
    // analytic ones do not
    real eval_noise = detail::is_analytic_family(inst) ? 0.0 : 64.0 * opts.eval.quad_tol;

    for (const auto& skel : skeletons) {
        auto canon = detail::canonical_skeleton(skel, inst);

        if (opts.prune) {
            int last = canon.items.back();
            bool ends_in_entity = last != StrategySkeleton::coord_change;
            // the reverse direction (dropping a final agent takeover) is not
            // reliable enough to prune on; only the strengthening one is used
            if (verdicts.takeback_for_all_entities && ends_in_entity && last != agent &&
                static_cast<int>(skel.items.size()) < max_len) {
                ++report.pruned_by_takeback;
                continue;
            }
            int changes = canon.coord_changes();
            if (changes > 0 && !verdicts.change_useful.empty()) {
                int k = std::min(changes, static_cast<int>(verdicts.change_useful.size()));
                if (!verdicts.change_useful[static_cast<std::size_t>(k - 1)]) {
                    ++report.pruned_by_change_value;
                    continue;
                }
            }
        }

        auto found = canonical_eu.find(canon);
        real eu;
        if (found != canonical_eu.end()) {
            eu = found->second;
        } else {
            auto timed = optimize_timings(inst, canon, opts.eval, opts.grid_points, opts.max_sweeps);
            ++report.examined;
            eu = timed.eu.total;
            canonical_eu.emplace(canon, eu);
            // differences inside the evaluator's noise floor count as ties,
            // resolved toward the shorter skeleton
            real fuzz = 1e-9 * (1.0 + std::abs(eu)) + eval_noise;
            bool better = !have_best || eu > report.best.eu.total + fuzz;
            bool tie = have_best && std::abs(eu - report.best.eu.total) <= fuzz;
            if (tie) {
                const auto& cur = report.best_skeleton;
                better = canon.items.size() < cur.items.size() ||
                         (canon.items.size() == cur.items.size() && canon.items < cur.items);
            }
            if (better) {
                report.best_skeleton = canon;
                report.best = std::move(timed);
                have_best = true;
            }
        }
        report.table.emplace_back(skel, eu);
    }
    if (!have_best) throw validation_error("search: every skeleton was pruned");
    return report;
}

// ---------------------------------------------------------------------------
// Random-configuration study
// ---------------------------------------------------------------------------

/// Configuration for the optimal-strategy-length study over random entity
/// populations.  Draws are uniform over the stated ranges; the agent is
/// always present, answers instantly and has the lowest decision quality.
struct RandomConfigStudy {
    long configs = 1000;
    std::vector<real> wait_rate_buckets = {0.01, 0.05, 0.12, 0.22, 0.4};
    int min_entities = 3;
    int max_entities = 25;
    real rate_lo = 0.01, rate_hi = 2.0;
    real quality_lo = 0.0, quality_hi = 10.0;
    real d_value_lo = 0.0, d_value_hi = 5.0;
    real d_cost_lo = 0.0, d_cost_hi = 5.0;
    real deadline = 10.0;
    int max_strategy_len = 10; // counted on the merged action string
    int frontier_cap = 4;      // candidate entities per configuration
};

struct LengthHistogramRow {
    real wait_rate = 0.0;
    int length = 0;
    long count = 0;
    real percentage = 0.0;
};

struct StudyResult {
    std::vector<LengthHistogramRow> rows; // bucket-major, length-minor
    std::vector<long> bucket_totals;
};

namespace detail {

/// Chain skeleton "entity with j changes inside its tenure, optionally the
/// agent last", written in tenure-split form.
inline StrategySkeleton chain_skeleton(int entity, int changes, bool with_agent, int agent) {
    StrategySkeleton s;
    s.items.push_back(entity);
    for (int c = 0; c < changes; ++c) {
        s.items.push_back(StrategySkeleton::coord_change);
        s.items.push_back(entity);
    }
    if (with_agent) s.items.push_back(agent);
    return s;
}

/// Non-agent entities on the quality/rate Pareto frontier, best quality
/// first, capped.  The full grammar is unsearchable at 25 entities; in this
/// family non-frontier entities only re-express frontier shapes.
inline std::vector<int> pareto_frontier(const ProblemInstance& inst, int cap) {
    int agent = inst.agent_index();
    std::vector<int> frontier;
    for (int e = 0; e < static_cast<int>(inst.entities.size()); ++e) {
        if (e == agent) continue;
        bool dominated = false;
        for (int f = 0; f < static_cast<int>(inst.entities.size()) && !dominated; ++f) {
            if (f == e || f == agent) continue;
            const auto& qe = inst.entities[static_cast<std::size_t>(e)];
            const auto& qf = inst.entities[static_cast<std::size_t>(f)];
            dominated = qf.quality.value >= qe.quality.value &&
                        qf.response.rate >= qe.response.rate &&
                        (qf.quality.value > qe.quality.value ||
                         qf.response.rate > qe.response.rate);
        }
        if (!dominated) frontier.push_back(e);
    }
    std::sort(frontier.begin(), frontier.end(), [&](int a, int b) {
        return inst.entities[static_cast<std::size_t>(a)].quality.value >
               inst.entities[static_cast<std::size_t>(b)].quality.value;
    });
    if (static_cast<int>(frontier.size()) > cap) frontier.resize(static_cast<std::size_t>(cap));
    return frontier;
}

} // namespace detail

/// Draws `configs` random entity populations spread evenly over the wait
/// rate buckets, finds each one's optimal strategy and histograms the
/// lengths per bucket.  Identical seeds give identical histograms.
inline StudyResult random_config_experiment(const RandomConfigStudy& cfg, std::uint64_t seed) {
    if (cfg.configs < 1 || cfg.wait_rate_buckets.empty())
        throw validation_error("study: needs at least one configuration and bucket");
    std::size_t nb = cfg.wait_rate_buckets.size();
    std::vector<std::map<int, long>> hist(nb);
    std::vector<long> totals(nb, 0);

    std::vector<int> lengths(static_cast<std::size_t>(cfg.configs), 0);
    std::vector<std::size_t> bucket_of(static_cast<std::size_t>(cfg.configs), 0);

    parallel_for(static_cast<std::size_t>(cfg.configs), [&](std::size_t i) {
        Rng rng = Rng::stream(seed, i);
        std::size_t bucket = i * nb / static_cast<std::size_t>(cfg.configs);
        bucket_of[i] = bucket;

        ProblemInstance inst;
        int n = static_cast<int>(rng.uniform_int(cfg.min_entities, cfg.max_entities));
        real min_quality = kInf;
        for (int e = 1; e < n; ++e) {
            real q = rng.uniform(cfg.quality_lo, cfg.quality_hi);
            min_quality = std::min(min_quality, q);
            inst.entities.push_back({"e" + std::to_string(e), false, QualityModel::constant(q),
                                     ResponseModel::markovian(rng.uniform(cfg.rate_lo, cfg.rate_hi))});
        }
        real agent_quality = std::max(cfg.quality_lo, min_quality * rng.uniform());
        inst.entities.insert(inst.entities.begin(),
                             {"A", true, QualityModel::constant(agent_quality),
                              ResponseModel::instant()});
        inst.wait = WaitCostModel::exponential(cfg.wait_rate_buckets[bucket], cfg.deadline);
        inst.coord = CoordChangeModel::fixed(rng.uniform(cfg.d_value_lo, cfg.d_value_hi),
                                             rng.uniform(cfg.d_cost_lo, cfg.d_cost_hi),
                                             cfg.max_strategy_len);

        SearchOptions sopts;
        sopts.grid_points = 17;
        sopts.max_sweeps = 8;
        int agent = inst.agent_index();
        auto frontier = detail::pareto_frontier(inst, cfg.frontier_cap);

        real best_eu = -kInf;
        int best_len = 0;
        std::size_t best_size = 0;
        auto consider = [&](const StrategySkeleton& skel) {
            auto timed =
                optimize_timings(inst, skel, sopts.eval, sopts.grid_points, sopts.max_sweeps);
            int len = strategy_length(timed.strategy);
            bool better = timed.eu.total > best_eu + 1e-12 ||
                          (std::abs(timed.eu.total - best_eu) <= 1e-12 &&
                           (best_len == 0 || skel.items.size() < best_size));
            if (better) {
                best_eu = timed.eu.total;
                best_len = len;
                best_size = skel.items.size();
            }
            return timed.eu.total;
        };

        consider(StrategySkeleton{{agent}});
        for (int e : frontier) {
            // chains with rising change counts; stop once another change
            // stops paying (their value shrinks as the clock is pushed back)
            real prev = -kInf;
            for (int j = 0; j + 2 <= cfg.max_strategy_len || j == 0; ++j) {
                real with_a = 1 + j + 1 <= cfg.max_strategy_len
                                  ? consider(detail::chain_skeleton(e, j, true, agent))
                                  : -kInf;
                real without = 1 + j <= cfg.max_strategy_len
                                   ? consider(detail::chain_skeleton(e, j, false, agent))
                                   : -kInf;
                real cur = std::max(with_a, without);
                if (j > 0 && cur < prev - 1e-12) break;
                prev = cur;
            }
        }
        for (int e1 : frontier)
            for (int e2 : frontier) {
                if (e1 == e2) continue;
                consider(StrategySkeleton{{e1, e2}});
                if (cfg.max_strategy_len >= 3) consider(StrategySkeleton{{e1, e2, agent}});
            }
        lengths[i] = best_len;
    });

    for (std::size_t i = 0; i < lengths.size(); ++i) {
        hist[bucket_of[i]][lengths[i]]++;
        totals[bucket_of[i]]++;
    }

    StudyResult result;
    result.bucket_totals = totals;
    for (std::size_t b = 0; b < nb; ++b)
        for (const auto& [len, count] : hist[b])
            result.rows.push_back({cfg.wait_rate_buckets[b], len, count,
                                   100.0 * static_cast<real>(count) /
                                       static_cast<real>(std::max<long>(totals[b], 1))});
    return result;
}

} // namespace tocs
