#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tocs/cli.hpp"
#include "tocs/presets.hpp"
#include "tocs/scenario_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace tocs;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run_cli(std::vector<std::string> args) {
    std::vector<const char*> argv{"tocs"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string source_dir() { return TOCS_SOURCE_DIR; }

struct TempDir {
    std::filesystem::path path;
    TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() / ("tocs_test_" + tag);
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string str() const { return path.string(); }
};

} // namespace

TEST_CASE("instance files: round trip and strictness") {
    auto j = io::load_json_file(source_dir() + "/data/meeting.json");
    auto inst = io::parse_instance(j);
    CHECK(inst.entities.size() == 2);
    CHECK(inst.agent_index() == 0);
    CHECK(inst.wait.omega == doctest::Approx(0.1));
    CHECK(inst.coord.max_changes == 3);
    CHECK(inst.activity == "weekly research meeting");

    auto round = io::parse_instance(io::instance_to_json(inst));
    CHECK(round.entities.size() == inst.entities.size());
    CHECK(round.wait.deadline == inst.wait.deadline);
    CHECK(round.coord.cost(1) == inst.coord.cost(1));

    auto bad = j;
    bad["surprise"] = 1;
    CHECK_THROWS_AS(io::parse_instance(bad), validation_error);

    auto bad_entity = j;
    bad_entity["entities"][0]["color"] = "red";
    CHECK_THROWS_AS(io::parse_instance(bad_entity), validation_error);

    auto slow_agent = j;
    slow_agent["entities"][0]["response"] = {{"kind", "markovian"}, {"rate", 1.0}};
    CHECK_THROWS_AS(io::parse_instance(slow_agent), validation_error);

    auto named_d = j;
    named_d["entities"][1]["id"] = "D";
    CHECK_THROWS_AS(io::parse_instance(named_d), validation_error);
}

TEST_CASE("delay and auction scenario files parse and reject unknowns") {
    auto dj = io::load_json_file(source_dir() + "/data/delay.json");
    auto sc = io::parse_delay_scenario(dj);
    auto ref = presets::reference_delay_scenario();
    CHECK(sc.steps == ref.steps);
    CHECK(sc.scheduled_step == ref.scheduled_step);
    CHECK(sc.delay_steps == ref.delay_steps);
    CHECK(sc.initial_location == ref.initial_location);
    CHECK(sc.meeting_location == ref.meeting_location);
    CHECK(sc.user_quality == doctest::Approx(ref.user_quality));
    CHECK(sc.repair_base == doctest::Approx(ref.repair_base));
    CHECK(sc.late_growth == doctest::Approx(ref.late_growth));

    auto bad = dj;
    bad["unknown_knob"] = 3;
    CHECK_THROWS_AS(io::parse_delay_scenario(bad), validation_error);

    auto bad_matrix = dj;
    bad_matrix["location_matrix"][0][0] = 0.5; // row no longer sums to 1
    CHECK_THROWS_AS(io::parse_delay_scenario(bad_matrix), validation_error);

    auto aj = io::load_json_file(source_dir() + "/data/auction.json");
    auto asc = io::parse_auction_scenario(aj);
    auto aref = presets::reference_auction_scenario();
    CHECK(asc.steps == aref.steps);
    CHECK(asc.bidders == aref.bidders);
    CHECK(asc.bid_prob == doctest::Approx(aref.bid_prob));
    CHECK(asc.leader_quality == doctest::Approx(aref.leader_quality));
}

TEST_CASE("constraint files: labels, operators, strict checks") {
    auto sc = presets::reference_delay_scenario();
    auto mdp = build_delay_mdp(sc);
    auto cj = io::load_json_file(source_dir() + "/data/constraints.json");
    auto cs = io::parse_constraints(cj, mdp);
    REQUIRE(cs.size() == 3);
    CHECK(cs[0].kind == Constraint::Kind::forbidden_state);
    CHECK(cs[1].state_tests.size() == 2);
    // the label "not_at_dept" resolved to its numeric encoding
    CHECK(cs[1].state_tests[0].value == doctest::Approx(1.0));
    CHECK(cs[2].action_test.has_value());

    auto bad = cj;
    bad[0]["state_predicate"][0]["feature"] = "no_such";
    CHECK_THROWS_AS(io::parse_constraints(bad, mdp), validation_error);

    auto bad_action = cj;
    bad_action[2]["action_predicate"]["value"] = "warp";
    CHECK_THROWS_AS(io::parse_constraints(bad_action, mdp), validation_error);

    auto bad_label = cj;
    bad_label[1]["state_predicate"][0]["value"] = "the_moon";
    CHECK_THROWS_AS(io::parse_constraints(bad_label, mdp), validation_error);
}

TEST_CASE("strategy strings: parse, print, round trip") {
    AnalyticParams p;
    auto inst = p.to_instance(3);

    auto s1 = io::parse_strategy_string("U(5)A", inst);
    REQUIRE(s1.actions.size() == 2);
    CHECK(s1.actions[0].entity == "U");
    CHECK(s1.actions[0].time == 5.0);
    CHECK(std::isinf(s1.actions[1].time));
    CHECK(validate_strategy(s1, inst).empty());

    // a change inside a tenure, written without the explicit resume
    auto s2 = io::parse_strategy_string("UD(3)U(8)A", inst);
    REQUIRE(s2.actions.size() == 4);
    CHECK(s2.actions[0].time == 3.0);
    CHECK(s2.actions[1].kind == StrategyAction::Kind::coord_change);
    CHECK(s2.actions[2].time == 8.0);
    CHECK(validate_strategy(s2, inst).empty());

    for (const auto& text : {"U(5)A", "UD(3)U(8)A", "A", "U", "U(2)D(2)U(9)A"}) {
        auto parsed = io::parse_strategy_string(text, inst);
        auto printed = io::strategy_to_string(parsed);
        auto reparsed = io::parse_strategy_string(printed, inst);
        REQUIRE(parsed.actions.size() == reparsed.actions.size());
        for (std::size_t i = 0; i < parsed.actions.size(); ++i) {
            CHECK(parsed.actions[i].kind == reparsed.actions[i].kind);
            CHECK(parsed.actions[i].entity == reparsed.actions[i].entity);
            if (std::isfinite(parsed.actions[i].time))
                CHECK(parsed.actions[i].time == doctest::Approx(reparsed.actions[i].time));
            else
                CHECK(std::isinf(reparsed.actions[i].time));
        }
    }

    CHECK_THROWS_AS(io::parse_strategy_string("X(1)", inst), validation_error);
    CHECK_THROWS_AS(io::parse_strategy_string("U(1)U A", inst), validation_error);
    CHECK_THROWS_AS(io::parse_strategy_string("UD", inst), validation_error);
    CHECK_THROWS_AS(io::parse_strategy_string("U(abc)", inst), validation_error);
    CHECK_THROWS_AS(io::parse_strategy_string("", inst), validation_error);
}

TEST_CASE("cli: eval writes deterministic csv plus a manifest") {
    TempDir dir("eval");
    std::string scenario = source_dir() + "/data/meeting.json";
    CHECK(run_cli({"eval", "--scenario", scenario, "--strategy", "H(5)A", "--out-dir",
                   dir.str()}) == 0);
    auto csv = slurp(dir.str() + "/eval.csv");
    CHECK(csv.find("total,,,,") != std::string::npos);
    CHECK(csv.find("\r") == std::string::npos); // LF endings

    auto manifest = json::parse(slurp(dir.str() + "/manifest.json"));
    CHECK(manifest["command"] == "eval");
    CHECK(manifest["inputs"].size() == 1);
    CHECK(manifest["outputs"][0] == "eval.csv");

    // digest matches the input bytes
    auto bytes = slurp(scenario);
    char hex[24];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(cli::detail::fnv1a64(bytes)));
    CHECK(manifest["inputs"][0]["fnv1a64"] == hex);

    TempDir dir2("eval2");
    CHECK(run_cli({"eval", "--scenario", scenario, "--strategy", "H(5)A", "--out-dir",
                   dir2.str()}) == 0);
    CHECK(slurp(dir2.str() + "/eval.csv") == csv);
}

TEST_CASE("cli: exit codes for bad input and numeric success paths") {
    TempDir dir("codes");
    CHECK(run_cli({"nonsense"}) == 2);
    CHECK(run_cli({"eval", "--scenario", "/no/such/file.json", "--strategy", "A", "--out-dir",
                   dir.str()}) == 2);
    std::string scenario = source_dir() + "/data/meeting.json";
    CHECK(run_cli({"eval", "--scenario", scenario, "--strategy", "H(5", "--out-dir", dir.str()}) ==
          2);
    CHECK(run_cli({"eval", "--scenario", scenario, "--strategy", "Q(5)A", "--out-dir",
                   dir.str()}) == 2);
}

TEST_CASE("cli: solve, verify and census on the delay scenario") {
    TempDir dir("solve");
    std::string delay = source_dir() + "/data/delay.json";
    std::string constraints = source_dir() + "/data/constraints.json";
    CHECK(run_cli({"solve", "--mdp", delay, "--constraints", constraints, "--out-dir",
                   dir.str()}) == 0);
    auto csv = slurp(dir.str() + "/solve.csv");
    CHECK(csv.rfind("state_id,action,utility,forbidden,required", 0) == 0);

    CHECK(run_cli({"verify", "--mdp", delay, "--constraints", constraints, "--out-dir",
                   dir.str()}) == 0);
    auto vcsv = slurp(dir.str() + "/verify.csv");
    CHECK(vcsv.find("satisfied") != std::string::npos);

    CHECK(run_cli({"census", "--mdp", delay, "--out-dir", dir.str()}) == 0);
    auto ccsv = slurp(dir.str() + "/census.csv");
    CHECK(ccsv.rfind("parameter_value,ask,wait", 0) == 0);
}

TEST_CASE("cli: build dumps transitions for an instance scenario") {
    TempDir dir("build");
    std::string scenario = source_dir() + "/data/meeting.json";
    CHECK(run_cli({"build", "--scenario", scenario, "--grid-step", "5", "--out-dir", dir.str()}) ==
          0);
    auto dump = slurp(dir.str() + "/mdp_dump.txt");
    CHECK(dump.find("transfer:H") != std::string::npos);
    // grid must divide the deadline
    CHECK(run_cli({"build", "--scenario", scenario, "--grid-step", "7", "--out-dir", dir.str()}) ==
          2);
}

TEST_CASE("cli: sweep and simulate are reproducible") {
    TempDir dir("sweep");
    std::string delay = source_dir() + "/data/delay.json";
    CHECK(run_cli({"sweep", "--mdp", delay, "--param", "response_mean", "--values", "5,40",
                   "--out-dir", dir.str()}) == 0);
    auto first = slurp(dir.str() + "/sweep.csv");
    CHECK(run_cli({"sweep", "--mdp", delay, "--param", "response_mean", "--values", "5,40",
                   "--out-dir", dir.str()}) == 0);
    CHECK(slurp(dir.str() + "/sweep.csv") == first);

    CHECK(run_cli({"simulate", "--mdp", delay, "--seed", "9", "--trials", "500", "--out-dir",
                   dir.str()}) == 0);
    auto sim = slurp(dir.str() + "/simulate.csv");
    CHECK(run_cli({"simulate", "--mdp", delay, "--seed", "9", "--trials", "500", "--out-dir",
                   dir.str()}) == 0);
    CHECK(slurp(dir.str() + "/simulate.csv") == sim);
}

TEST_CASE("cli: auction comparison and plot data") {
    TempDir dir("auction");
    std::string auction = source_dir() + "/data/auction.json";
    CHECK(run_cli({"auction", "--mdp", auction, "--seed", "5", "--streams", "8", "--plot-data",
                   "--out-dir", dir.str()}) == 0);
    auto csv = slurp(dir.str() + "/auction.csv");
    CHECK(csv.rfind("seed,mdp_pct,ea_pct", 0) == 0);
    auto dat = slurp(dir.str() + "/auction.dat");
    CHECK(dat.rfind("# seed mdp_pct ea_pct", 0) == 0);
}
