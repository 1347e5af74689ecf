#pragma once

#include "tocs/analysis.hpp"
#include "tocs/presets.hpp"
#include "tocs/scenario_io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace tocs::cli {

inline constexpr const char* kEngineVersion = "0.1.0";

namespace detail {

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) h = (h ^ c) * 1099511628211ULL;
    return h;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Temp-then-rename so partial output never lands under the final name.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw validation_error("cannot write '" + tmp + "'");
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

/// Records what produced which outputs from which inputs.
struct Manifest {
    std::string command;
    std::vector<std::pair<std::string, std::uint64_t>> inputs;
    std::vector<std::string> outputs;
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

    void add_input(const std::string& path, const std::string& bytes) {
        inputs.emplace_back(path, fnv1a64(bytes));
    }

    void write(const std::string& out_dir) const {
        nlohmann::json j;
        j["command"] = command;
        j["engine_version"] = kEngineVersion;
        for (const auto& [path, digest] : inputs) {
            char hex[24];
            std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(digest));
            j["inputs"].push_back({{"path", path}, {"fnv1a64", hex}});
        }
        j["outputs"] = outputs;
        if (has_seed) j["seed"] = seed;
        j["wall_ms"] = std::chrono::duration<real, std::milli>(std::chrono::steady_clock::now() -
                                                               started)
                           .count();
        write_file_atomic(out_dir + "/manifest.json", j.dump(2) + "\n");
    }
};

struct LoadedProcess {
    Mdp mdp;
    std::string kind;
    DelayScenario delay;     // valid when kind == "delay"
    AuctionScenario auction; // valid when kind == "auction"
};

inline LoadedProcess load_process(const std::string& path, real grid_step, Manifest& manifest) {
    auto bytes = read_file(path);
    manifest.add_input(path, bytes);
    auto j = nlohmann::json::parse(bytes);
    LoadedProcess out;
    out.kind = io::scenario_kind(j);
    if (out.kind == "delay") {
        out.delay = io::parse_delay_scenario(j);
        out.mdp = build_delay_mdp(out.delay);
    } else if (out.kind == "auction") {
        out.auction = io::parse_auction_scenario(j);
        out.mdp = build_auction_mdp(out.auction);
    } else if (out.kind == "instance") {
        auto inst = io::parse_instance(j);
        if (!(grid_step > 0))
            throw validation_error("compiling an instance scenario needs --grid-step");
        out.mdp = build_abstract_mdp(inst, grid_step);
    } else {
        throw validation_error("scenario kind must be instance/delay/auction, got '" + out.kind +
                               "'");
    }
    return out;
}

inline std::vector<Constraint> load_constraints(const std::string& path, const Mdp& mdp,
                                                Manifest& manifest) {
    auto bytes = read_file(path);
    manifest.add_input(path, bytes);
    return io::parse_constraints(nlohmann::json::parse(bytes), mdp);
}

inline void emit(const std::string& out_dir, const std::string& name, const std::string& content,
                 Manifest& manifest, bool plot_data) {
    std::filesystem::create_directories(out_dir);
    write_file_atomic(out_dir + "/" + name, content);
    manifest.outputs.push_back(name);
    if (plot_data && name.size() > 4 && name.substr(name.size() - 4) == ".csv") {
        std::string dat = name.substr(0, name.size() - 4) + ".dat";
        write_file_atomic(out_dir + "/" + dat, csv_to_plot_data(content));
        manifest.outputs.push_back(dat);
    }
}

inline std::string policy_csv(const Mdp& mdp, const SolveResult& res) {
    std::ostringstream os;
    os << "state_id,action,utility,forbidden,required\n";
    for (std::size_t s = 0; s < mdp.size(); ++s) {
        os << s << ',';
        if (mdp.states[s].terminal || res.policy[s] < 0)
            os << '-';
        else
            os << mdp.actions[static_cast<std::size_t>(
                                  mdp.rows[s][static_cast<std::size_t>(res.policy[s])].action)]
                      .name;
        os << ',' << csv_real(res.utility[s]) << ',';
        if (res.values.empty())
            os << "0,";
        else
            os << (res.values[s].forbidden ? 1 : 0) << ',';
        if (!res.values.empty()) {
            std::uint64_t mask = res.values[s].required;
            bool first = true;
            for (int b = 0; b < 64; ++b)
                if ((mask >> b) & 1ULL) {
                    if (!first) os << ';';
                    os << b;
                    first = false;
                }
        }
        os << '\n';
    }
    return os.str();
}

} // namespace detail

/// Entry point behind the binary: returns the process exit code.
/// 0 success, 2 input/validation trouble, 3 numeric failure.
inline int run(int argc, const char* const* argv) {
    CLI::App app{"transfer-of-control strategy toolkit"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand

    std::string scenario_path, mdp_path, constraints_path, strategy_text, out_dir = ".";
    std::string param_name, values_text, experiment_name;
    std::uint64_t seed = 1;
    real grid_step = 0.0;
    int max_len = 3;
    long trials = 10000;
    int streams = 50;
    bool plot_data = false;

    app.add_option("--out-dir", out_dir, "directory for output files");
    app.add_flag("--plot-data", plot_data, "also write whitespace .dat files");

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "random seed; all randomness flows from it");
    };

    auto* c_eval = app.add_subcommand("eval", "expected utility of one strategy");
    c_eval->add_option("--scenario", scenario_path)->required();
    c_eval->add_option("--strategy", strategy_text)->required();

    auto* c_search = app.add_subcommand("search", "optimal strategy over the grammar");
    c_search->add_option("--scenario", scenario_path)->required();
    c_search->add_option("--max-len", max_len, "maximum strategy length");

    auto* c_build = app.add_subcommand("build", "compile a scenario and dump its transitions");
    c_build->add_option("--scenario", scenario_path);
    c_build->add_option("--mdp", mdp_path);
    c_build->add_option("--grid-step", grid_step);

    auto* c_solve = app.add_subcommand("solve", "optimal policy, optionally under constraints");
    c_solve->add_option("--mdp", mdp_path)->required();
    c_solve->add_option("--constraints", constraints_path);
    c_solve->add_option("--grid-step", grid_step);

    auto* c_verify = app.add_subcommand("verify", "check the solved policy against constraints");
    c_verify->add_option("--mdp", mdp_path)->required();
    c_verify->add_option("--constraints", constraints_path)->required();
    c_verify->add_option("--grid-step", grid_step);

    auto* c_census = app.add_subcommand("census", "action counts of the solved policy");
    c_census->add_option("--mdp", mdp_path)->required();
    c_census->add_option("--constraints", constraints_path);
    c_census->add_option("--grid-step", grid_step);

    auto* c_sweep = app.add_subcommand("sweep", "re-solve per value of one scenario knob");
    c_sweep->add_option("--mdp", mdp_path)->required();
    c_sweep->add_option("--param", param_name)->required();
    c_sweep->add_option("--values", values_text, "comma-separated value grid")->required();

    auto* c_sim = app.add_subcommand("simulate", "seeded rollouts of the solved policy");
    c_sim->add_option("--mdp", mdp_path)->required();
    c_sim->add_option("--constraints", constraints_path);
    c_sim->add_option("--grid-step", grid_step);
    c_sim->add_option("--trials", trials);
    add_seed(c_sim);

    auto* c_auction = app.add_subcommand("auction", "closure-time comparison on bid streams");
    c_auction->add_option("--mdp", mdp_path)->required();
    c_auction->add_option("--streams", streams);
    add_seed(c_auction);

    auto* c_exp = app.add_subcommand("experiment", "bundled reference studies");
    c_exp->add_option("name", experiment_name, "fig10|fig11|fig14|fig15|table5|table6")
        ->required();
    add_seed(c_exp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    detail::Manifest manifest;
    manifest.seed = seed;

    try {
        if (c_eval->parsed()) {
            manifest.command = "eval";
            auto bytes = detail::read_file(scenario_path);
            manifest.add_input(scenario_path, bytes);
            auto inst = io::parse_instance(nlohmann::json::parse(bytes));
            auto strategy = io::parse_strategy_string(strategy_text, inst);
            auto eu = eu_of_strategy(inst, strategy);
            std::ostringstream os;
            os << "row,label,t_begin,t_end,value\n";
            for (const auto& seg : eu.segments)
                os << "segment," << seg.label << ',' << csv_real(seg.t_begin) << ','
                   << csv_real(seg.t_end) << ',' << csv_real(seg.contribution) << '\n';
            os << "expected_wait_cost,,,," << csv_real(eu.expected_wait_cost) << '\n';
            os << "expected_coord_cost,,,," << csv_real(eu.expected_coord_cost) << '\n';
            os << "total,,,," << csv_real(eu.total) << '\n';
            detail::emit(out_dir, "eval.csv", os.str(), manifest, plot_data);
            std::printf("strategy %s: EU = %.9g\n", io::strategy_to_string(strategy).c_str(),
                        eu.total);
        } else if (c_search->parsed()) {
            manifest.command = "search";
            auto bytes = detail::read_file(scenario_path);
            manifest.add_input(scenario_path, bytes);
            auto inst = io::parse_instance(nlohmann::json::parse(bytes));
            auto report = best_strategy(inst, max_len);
            std::ostringstream os;
            os << "skeleton,eu\n";
            for (const auto& [skel, eu] : report.table)
                os << skel.to_string(inst) << ',' << csv_real(eu) << '\n';
            detail::emit(out_dir, "search.csv", os.str(), manifest, plot_data);
            std::printf("best %s: EU = %.9g (enumerated %ld, examined %ld, pruned %ld+%ld)\n",
                        io::strategy_to_string(report.best.strategy).c_str(),
                        report.best.eu.total, report.enumerated, report.examined,
                        report.pruned_by_takeback, report.pruned_by_change_value);
        } else if (c_build->parsed()) {
            manifest.command = "build";
            std::string path = !mdp_path.empty() ? mdp_path : scenario_path;
            if (path.empty())
                throw validation_error("build needs --scenario or --mdp");
            auto loaded = detail::load_process(path, grid_step, manifest);
            std::ostringstream os;
            dump_transitions(loaded.mdp, os);
            detail::emit(out_dir, "mdp_dump.txt", os.str(), manifest, false);
            std::printf("%zu states, %zu actions -> mdp_dump.txt\n", loaded.mdp.size(),
                        loaded.mdp.actions.size());
        } else if (c_solve->parsed()) {
            manifest.command = "solve";
            auto loaded = detail::load_process(mdp_path, grid_step, manifest);
            SolveResult res;
            if (!constraints_path.empty()) {
                auto cs = detail::load_constraints(constraints_path, loaded.mdp, manifest);
                res = constrained_value_iteration(loaded.mdp, cs);
                for (const auto& d : res.diagnostics)
                    std::printf("constraint %s: %s%s\n", d.id.c_str(),
                                d.satisfied_at_initial ? "satisfied" : "not guaranteed",
                                d.conflict ? " (possible conflict)" : "");
            } else {
                res = value_iteration(loaded.mdp);
            }
            detail::emit(out_dir, "solve.csv", detail::policy_csv(loaded.mdp, res), manifest,
                         false);
            std::printf("initial-state utility = %.9g (%zu states)\n",
                        res.utility[static_cast<std::size_t>(loaded.mdp.initial)],
                        loaded.mdp.size());
        } else if (c_verify->parsed()) {
            manifest.command = "verify";
            auto loaded = detail::load_process(mdp_path, grid_step, manifest);
            auto cs = detail::load_constraints(constraints_path, loaded.mdp, manifest);
            auto res = constrained_value_iteration(loaded.mdp, cs);
            auto report = verify_policy(loaded.mdp, res.policy, cs);
            detail::emit(out_dir, "verify.csv", verify_csv(report), manifest, false);
            bool all = true;
            for (const auto& e : report) {
                std::printf("%s: %s\n", e.id.c_str(), e.satisfied ? "satisfied" : "violated");
                all = all && e.satisfied;
            }
            std::printf("%s\n", all ? "all constraints satisfied" : "violations found");
        } else if (c_census->parsed()) {
            manifest.command = "census";
            auto loaded = detail::load_process(mdp_path, grid_step, manifest);
            SolveResult res;
            if (!constraints_path.empty()) {
                auto cs = detail::load_constraints(constraints_path, loaded.mdp, manifest);
                res = constrained_value_iteration(loaded.mdp, cs);
            } else {
                res = value_iteration(loaded.mdp);
            }
            std::vector<SweepRow> rows(1);
            rows[0].value = 0.0;
            rows[0].census = action_census(loaded.mdp, res.policy, false);
            rows[0].reachable = action_census(loaded.mdp, res.policy, true);
            detail::emit(out_dir, "census.csv", census_csv(rows), manifest, plot_data);
            auto ex = extract_strategy(loaded.mdp, res.policy);
            std::printf("ask %ld, wait %ld, delay %ld; quiet-path strategy %s\n",
                        rows[0].census.ask, rows[0].census.wait, rows[0].census.changes_total(),
                        ex.raw.c_str());
        } else if (c_sweep->parsed()) {
            manifest.command = "sweep";
            auto bytes = detail::read_file(mdp_path);
            manifest.add_input(mdp_path, bytes);
            auto j = nlohmann::json::parse(bytes);
            if (io::scenario_kind(j) != "delay")
                throw validation_error("sweep operates on delay scenarios");
            auto sc = io::parse_delay_scenario(j);
            std::vector<real> values;
            std::stringstream vs(values_text);
            std::string item;
            while (std::getline(vs, item, ',')) values.push_back(std::stod(item));
            auto rows = parameter_sweep(sc, param_name, values);
            detail::emit(out_dir, "sweep.csv", census_csv(rows), manifest, plot_data);
            std::printf("swept %s over %zu values -> sweep.csv\n", param_name.c_str(),
                        values.size());
        } else if (c_sim->parsed()) {
            manifest.command = "simulate";
            manifest.has_seed = true;
            auto loaded = detail::load_process(mdp_path, grid_step, manifest);
            SolveResult res;
            if (!constraints_path.empty()) {
                auto cs = detail::load_constraints(constraints_path, loaded.mdp, manifest);
                res = constrained_value_iteration(loaded.mdp, cs);
            } else {
                res = value_iteration(loaded.mdp);
            }
            auto [traces, summary] = simulate_policy(loaded.mdp, res.policy, seed, trials, false);
            (void)traces;
            detail::emit(out_dir, "simulate.csv", length_histogram_csv(summary), manifest,
                         plot_data);
            std::printf("mean realized utility %.9g (stderr %.3g) vs solver %.9g\n",
                        summary.mean_utility, summary.std_error,
                        res.utility[static_cast<std::size_t>(loaded.mdp.initial)]);
        } else if (c_auction->parsed()) {
            manifest.command = "auction";
            manifest.has_seed = true;
            auto bytes = detail::read_file(mdp_path);
            manifest.add_input(mdp_path, bytes);
            auto j = nlohmann::json::parse(bytes);
            if (io::scenario_kind(j) != "auction")
                throw validation_error("auction replay needs an auction scenario");
            auto sc = io::parse_auction_scenario(j);
            auto rows = auction_replay(sc, seed, streams);
            detail::emit(out_dir, "auction.csv", auction_csv(rows), manifest, plot_data);
            real gap = 0.0;
            for (const auto& r : rows) gap += std::abs(r.mdp_pct_remaining - r.ea_pct_remaining);
            std::printf("mean |policy%% - fixed-strategy%%| = %.3g points over %d streams\n",
                        gap / streams, streams);
        } else if (c_exp->parsed()) {
            manifest.command = "experiment " + experiment_name;
            manifest.has_seed = true;
            if (experiment_name == "fig10") {
                RandomConfigStudy cfg;
                auto result = random_config_experiment(cfg, seed);
                detail::emit(out_dir, "fig10.csv", histogram_csv(result), manifest, plot_data);
            } else if (experiment_name == "fig11") {
                auto sc = presets::reference_delay_scenario();
                auto rows = parameter_sweep(sc, "repair_base",
                                            {0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0});
                detail::emit(out_dir, "fig11.csv", census_csv(rows), manifest, plot_data);
            } else if (experiment_name == "fig14") {
                auto sc = presets::reference_delay_scenario();
                std::ostringstream os;
                os << "ask_cost,response_mean,asks,asks_reachable\n";
                for (real cost : {0.05, 0.5, 2.0}) {
                    auto with_cost = apply_delay_parameter(sc, "ask_cost", cost);
                    auto rows = parameter_sweep(with_cost, "response_mean",
                                                {1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0});
                    for (const auto& r : rows)
                        os << csv_real(cost) << ',' << csv_real(r.value) << ',' << r.census.ask
                           << ',' << r.reachable.ask << '\n';
                }
                detail::emit(out_dir, "fig14.csv", os.str(), manifest, plot_data);
            } else if (experiment_name == "fig15") {
                std::ostringstream os;
                os << "instance,constraints,log10_strategies,constrained_ms,unconstrained_ms\n";
                int idx = 0;
                for (int factor : {1, 2}) {
                    auto sc = factor == 1 ? presets::reference_delay_scenario()
                                          : presets::expanded_delay_scenario(factor);
                    auto mdp = build_delay_mdp(sc);
                    auto rows = constraint_impact(mdp, presets::reference_delay_constraints(sc), 5);
                    for (const auto& r : rows)
                        os << idx << ',' << r.constraints << ',' << csv_real(r.log10_strategies)
                           << ',' << csv_real(r.constrained_ms) << ','
                           << csv_real(r.unconstrained_ms) << '\n';
                    ++idx;
                }
                detail::emit(out_dir, "fig15.csv", os.str(), manifest, plot_data);
            } else if (experiment_name == "table5") {
                std::ostringstream os;
                os << "meeting,location,immediate,handoff,handoff_decide,handoff_change_decide,"
                      "policy\n";
                for (const auto& regime : presets::comparison_regimes()) {
                    auto inst = regime.params.to_instance(3);
                    real a = eu_closed_form(regime.params, StrategyForm::immediate).value;
                    real e = eu_closed_form(regime.params, StrategyForm::handoff).value;
                    real ea = optimize_timings(inst, StrategySkeleton{{1, 0}}).eu.total;
                    StrategySkeleton eda{{1, StrategySkeleton::coord_change, 1, 0}};
                    real eda_eu = optimize_timings(inst, eda).eu.total;
                    auto mdp = build_abstract_mdp(inst, 1.0);
                    auto solved = value_iteration(mdp);
                    auto ex = extract_strategy(mdp, solved.policy);
                    os << regime.meeting << ',' << regime.location << ',' << csv_real(a) << ','
                       << csv_real(e) << ',' << csv_real(ea) << ',' << csv_real(eda_eu) << ','
                       << ex.raw << '\n';
                }
                detail::emit(out_dir, "table5.csv", os.str(), manifest, plot_data);
            } else if (experiment_name == "table6") {
                auto rows = auction_replay(presets::reference_auction_scenario(), seed, 50);
                detail::emit(out_dir, "table6.csv", auction_csv(rows), manifest, plot_data);
            } else {
                throw validation_error("unknown experiment '" + experiment_name + "'");
            }
            std::printf("experiment %s done -> %s\n", experiment_name.c_str(), out_dir.c_str());
        }
        manifest.write(out_dir);
    } catch (const validation_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}

} // namespace tocs::cli
