#include "dynarisk/cli.hpp"

#include <cstdlib>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "dynarisk/fixtures.hpp"

namespace dynarisk {

namespace {

using nlohmann::json;

struct Request {
    std::string functional_path;
    std::string process_path;
    std::string scenario_path;
    std::vector<std::string> battery_paths;
    std::string mode = "one-step";
    std::string format = "table";
    std::string demo_which;
    int time = -1; // -1: window start
    int random_count = 100;
    unsigned long long seed = 1;
    double tolerance = 1e-9;
};

json witness_json(const ConsistencyWitness& w, const FiltrationTree& tree) {
    json j;
    j["process"] = w.process;
    j["theta"] = w.theta;
    j["atom"] = tree.label(w.atom);
    j["lhs"] = w.lhs.str();
    j["rhs"] = w.rhs.str();
    return j;
}

json report_json(const ConsistencyReport& rep, const FiltrationTree& tree) {
    json j;
    j["verdict"] = verdict_name(rep.verdict);
    j["mode"] = mode_name(rep.mode);
    j["method"] = rep.method;
    if (!rep.certificate.empty()) j["certificate"] = rep.certificate;
    j["checked"] = rep.checked;
    j["skipped"] = rep.skipped;
    json ws = json::array();
    for (const auto& w : rep.witnesses) ws.push_back(witness_json(w, tree));
    j["witnesses"] = ws;
    return j;
}

json values_json(const ConditionalValue& v, const FiltrationTree& tree) {
    json j;
    for (int k = 0; k < v.size(); ++k)
        j[tree.label(v.anchor().stop_nodes()[k])] = v.at_index(k).str();
    return j;
}

void print_values(std::ostream& out, const char* name, const ConditionalValue& v,
                  const FiltrationTree& tree) {
    out << name << ":";
    for (int k = 0; k < v.size(); ++k)
        out << " " << tree.label(v.anchor().stop_nodes()[k]) << "=" << v.at_index(k).str();
    out << "\n";
}

void print_report(std::ostream& out, const ConsistencyReport& rep, const FiltrationTree& tree) {
    out << "verdict: " << verdict_name(rep.verdict) << "\n";
    out << "mode: " << mode_name(rep.mode) << "\n";
    out << "method: " << rep.method << "\n";
    if (!rep.certificate.empty()) out << "certificate: " << rep.certificate << "\n";
    out << "checked: " << rep.checked << "  skipped: " << rep.skipped << "\n";
    for (const auto& w : rep.witnesses)
        out << "witness: " << w.process << "  theta=" << w.theta << "  atom=" << tree.label(w.atom)
            << "  lhs=" << w.lhs.str() << "  rhs=" << w.rhs.str() << "\n";
}

void emit(std::ostream& out, const Request& req, const json& j) {
    if (req.format == "json") out << j.dump(2) << "\n";
}

int exit_for(Verdict v) { return v == Verdict::REFUTED ? 1 : 0; }

int cmd_eval(const Request& req, std::ostream& out) {
    FixtureStore store;
    UtilityProcess U = load_utility(store, req.functional_path);
    AdaptedProcess X = load_process(store, req.process_path);
    require(X.tree().same(U.tree()), ErrorCode::TreeMismatch,
            "functional and process fixtures use different trees");
    int t = req.time < 0 ? U.start() : req.time;
    UtilityFunctional F = U.member(t);
    ConditionalValue v = eval(F, X);

    if (req.format == "json") {
        json j;
        j["command"] = "eval";
        j["tag"] = tag_name(U.tag());
        j["time"] = t;
        j["values"] = values_json(v, U.tree());
        emit(out, req, j);
    } else {
        out << "tag: " << tag_name(U.tag()) << "\n";
        print_values(out, "values", v, U.tree());
    }
    return 0;
}

int cmd_check(const Request& req, std::ostream& out) {
    FixtureStore store;
    UtilityProcess U = load_utility(store, req.process_path);
    const FiltrationTree& tree = U.tree();
    Window w = Window::span(tree, U.start(), U.end());
    std::vector<AdaptedProcess> battery = make_battery(tree, w, req.random_count, req.seed);
    for (const auto& p : req.battery_paths) {
        AdaptedProcess X = load_process(store, p);
        require(X.tree().same(tree), ErrorCode::TreeMismatch,
                "battery fixture '" + p + "' uses a different tree");
        battery.push_back(std::move(X));
    }
    Mode mode = req.mode == "sweep" ? Mode::ALL_STOPPING_TIMES : Mode::ONE_STEP;
    ConsistencyReport rep = check_time_consistency(U, battery, mode);

    if (req.format == "json") {
        json j = report_json(rep, tree);
        j["command"] = "check";
        j["seed"] = req.seed;
        emit(out, req, j);
    } else {
        print_report(out, rep, tree);
    }
    return exit_for(rep.verdict);
}

int cmd_certify(const Request& req, std::ostream& out) {
    FixtureStore store;
    UtilityProcess U = load_utility(store, req.process_path);
    ConsistencyReport rep = certify_sufficiency(U, req.seed);

    if (req.format == "json") {
        json j = report_json(rep, U.tree());
        j["command"] = "certify";
        j["seed"] = req.seed;
        emit(out, req, j);
    } else {
        print_report(out, rep, U.tree());
    }
    return exit_for(rep.verdict);
}

int cmd_penalty(const Request& req, std::ostream& out) {
    FixtureStore store;
    UtilityProcess U = load_utility(store, req.functional_path);
    DensityProcess a = load_density(store, req.scenario_path);
    require(a.tree().same(U.tree()), ErrorCode::TreeMismatch,
            "functional and scenario fixtures use different trees");
    int t = req.time < 0 ? U.start() : req.time;
    ConditionalValue v = penalty_sharp(U.member(t), a);

    if (req.format == "json") {
        json j;
        j["command"] = "penalty";
        j["time"] = t;
        j["values"] = values_json(v, U.tree());
        emit(out, req, j);
    } else {
        print_values(out, "penalty", v, U.tree());
    }
    return 0;
}

int cmd_snell(const Request& req, std::ostream& out) {
    FixtureStore store;
    UtilityProcess U = load_utility(store, req.functional_path);
    AdaptedProcess X = load_process(store, req.process_path);
    require(X.tree().same(U.tree()), ErrorCode::TreeMismatch,
            "functional and process fixtures use different trees");
    const FiltrationTree& tree = U.tree();
    int t = req.time < 0 ? U.start() : req.time;
    SnellResult res = snell_worst_stopping(U.member(t), X, StoppingTime::constant(tree, t));

    if (req.format == "json") {
        json j;
        j["command"] = "snell";
        j["time"] = t;
        j["values"] = values_json(res.values, tree);
        j["exercise"] = res.exercise.describe();
        j["certified"] = res.certified;
        emit(out, req, j);
    } else {
        print_values(out, "values", res.values, tree);
        out << "exercise: " << res.exercise.describe() << "\n";
        out << "certified: " << (res.certified ? "yes" : "no") << "\n";
    }
    return 0;
}

int demo_counterexample(const Request& req, std::ostream& out) {
    FixtureStore store;
    const FiltrationTree& tree = store.tree("counterexample");
    AdaptedProcess X(tree, Window::full(tree), counterexample_values(tree));
    UtilityProcess U = counterexample_process(tree);

    ConditionalValue v0 = eval(U.member(0), X);
    ConditionalValue v1 = eval(U.member(1), X);
    // Stitch the time-1 value back in and re-evaluate at 0.
    std::vector<Rational> raw = X.values();
    for (NodeId n = 0; n < tree.node_count(); ++n)
        if (tree.time(n) >= 1) raw[n] = v1.at_node(tree.ancestor_at(n, 1)).value();
    AdaptedProcess stitched(tree, Window::full(tree), std::move(raw));
    ConditionalValue pasted = eval(U.member(0), stitched);

    ConsistencyReport rep = check_time_consistency(U, {X}, Mode::ONE_STEP);

    if (req.format == "json") {
        json j;
        j["command"] = "demo";
        j["which"] = "counterexample";
        j["value_at_0"] = values_json(v0, tree);
        j["value_at_1"] = values_json(v1, tree);
        j["pasted_value_at_0"] = values_json(pasted, tree);
        json r = report_json(rep, tree);
        j["report"] = r;
        emit(out, req, j);
    } else {
        out << "running-minimum aggregation under the reference measure\n";
        print_values(out, "value at t=0", v0, tree);
        print_values(out, "value at t=1", v1, tree);
        print_values(out, "value at t=0 of the stitched process", pasted, tree);
        print_report(out, rep, tree);
    }
    return exit_for(rep.verdict);
}

int demo_worst_stopping(const Request& req, std::ostream& out) {
    FixtureStore store;
    const FiltrationTree& tree = store.tree("counterexample");
    AdaptedProcess X(tree, Window::full(tree), counterexample_values(tree));
    std::map<NodeId, Rational> ones;
    for (NodeId leaf : tree.leaves()) ones[leaf] = 1;
    UtilityFunctional F = UtilityFunctional::worst_stopping(
        tree, Window::full(tree), SnellBase::PSET, {TerminalDensity(tree, ones)});

    SnellResult res = snell_worst_stopping(F, X, StoppingTime::constant(tree, 0));
    ConditionalValue at1 = eval(F, X, StoppingTime::constant(tree, 1));

    json stops = json::array();
    std::ostringstream table;
    for (const auto& xi : enumerate_stopping_times(tree, 0)) {
        ConditionalValue sv = stopped_value(F, X, StoppingTime::constant(tree, 0), xi);
        stops.push_back({{"stop", xi.describe()}, {"value", sv.at_index(0).str()}});
        table << "  stop at " << xi.describe() << " -> " << sv.at_index(0).str() << "\n";
    }

    if (req.format == "json") {
        json j;
        j["command"] = "demo";
        j["which"] = "worst-stopping";
        j["envelope_at_0"] = values_json(res.values, tree);
        j["envelope_at_1"] = values_json(at1, tree);
        j["exercise"] = res.exercise.describe();
        j["certified"] = res.certified;
        j["stopped_values"] = stops;
        emit(out, req, j);
    } else {
        out << "optimal stopping of the mean under the reference measure\n";
        print_values(out, "envelope at t=0", res.values, tree);
        print_values(out, "envelope at t=1", at1, tree);
        out << "exercise: " << res.exercise.describe() << "\n";
        out << "certified: " << (res.certified ? "yes" : "no") << "\n";
        out << "all stopped values:\n" << table.str();
    }
    return 0;
}

int demo_entropic(const Request& req, std::ostream& out) {
    FixtureStore store;
    const FiltrationTree& tree = store.tree("counterexample");
    AdaptedProcess X(tree, Window::full(tree), counterexample_values(tree));
    std::map<NodeId, Rational> ones;
    for (NodeId leaf : tree.leaves()) ones[leaf] = 1;
    std::shared_ptr<const Rep> rep = UtilityFunctional::entropic(tree, Window::full(tree),
                                                                 {TerminalDensity(tree, ones)})
                                         .rep_ptr();
    UtilityProcess U(tree, 0, tree.horizon(), rep);

    ConditionalValue v0 = eval(U.member(0), X);
    ConsistencyReport cert = certify_sufficiency(U, req.seed);
    ConsistencyReport sweep = check_time_consistency(
        U, make_battery(tree, Window::full(tree), 10, req.seed), Mode::ONE_STEP);

    if (req.format == "json") {
        json j;
        j["command"] = "demo";
        j["which"] = "entropic";
        j["value_at_0"] = json::object();
        for (int k = 0; k < v0.size(); ++k)
            j["value_at_0"][tree.label(v0.anchor().stop_nodes()[k])] = v0.at_index(k).as_double();
        j["certify"] = report_json(cert, tree);
        j["one_step"] = report_json(sweep, tree);
        emit(out, req, j);
    } else {
        out << "exponential utility under the reference measure\n";
        out << "value at t=0: root=" << v0.at_index(0).as_double() << "\n";
        out << "-- certify --\n";
        print_report(out, cert, tree);
        out << "-- one-step battery --\n";
        print_report(out, sweep, tree);
    }
    return exit_for(cert.verdict);
}

int demo_weighted(const Request& req, std::ostream& out) {
    FixtureStore store;
    const FiltrationTree& tree = store.tree("counterexample");
    AdaptedProcess X(tree, Window::full(tree), counterexample_values(tree));
    std::map<NodeId, Rational> ones;
    for (NodeId leaf : tree.leaves()) ones[leaf] = 1;
    TerminalDensity f(tree, ones);
    std::vector<Rational> mu = {Rational(1, 2), Rational(1, 4), Rational(1, 4)};
    std::shared_ptr<const Rep> rep =
        UtilityFunctional::aggregated(tree, Window::full(tree), {f}, AggKind::WEIGHTED, mu)
            .rep_ptr();
    UtilityProcess U(tree, 0, tree.horizon(), rep);

    ConditionalValue v0 = eval(U.member(0), X);
    DensityProcess a = build_density_weighted(f, mu);
    ConsistencyReport cert = certify_sufficiency(U, req.seed);

    json incr = json::object();
    for (NodeId n = 0; n < tree.node_count(); ++n)
        if (a.increment(n) != 0) incr[tree.label(n)] = rational_str(a.increment(n));

    if (req.format == "json") {
        json j;
        j["command"] = "demo";
        j["which"] = "weighted";
        j["weights"] = json::array({"1/2", "1/4", "1/4"});
        j["value_at_0"] = values_json(v0, tree);
        j["scenario_increments"] = incr;
        j["certify"] = report_json(cert, tree);
        emit(out, req, j);
    } else {
        out << "time-averaged mean with weights (1/2, 1/4, 1/4)\n";
        print_values(out, "value at t=0", v0, tree);
        out << "matching scenario increments:";
        for (auto it = incr.begin(); it != incr.end(); ++it)
            out << " " << it.key() << "=" << it.value().get<std::string>();
        out << "\n-- certify --\n";
        print_report(out, cert, tree);
    }
    return exit_for(cert.verdict);
}

int cmd_demo(const Request& req, std::ostream& out) {
    if (req.demo_which == "counterexample") return demo_counterexample(req, out);
    if (req.demo_which == "worst-stopping") return demo_worst_stopping(req, out);
    if (req.demo_which == "entropic") return demo_entropic(req, out);
    if (req.demo_which == "weighted") return demo_weighted(req, out);
    fail(ErrorCode::UsageError, "unknown demo '" + req.demo_which + "'");
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Request req;
    CLI::App app{"dynamic utility functionals on filtered trees"};
    app.require_subcommand(1);

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", req.seed, "seed for generated batteries");
        cmd->add_option("--tolerance", req.tolerance, "comparison tolerance for inexact values")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--format", req.format, "output format")
            ->check(CLI::IsMember({"table", "json"}));
    };

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a functional on a process");
    eval_cmd->add_option("--functional", req.functional_path, "functional fixture")->required();
    eval_cmd->add_option("--process", req.process_path, "process fixture")->required();
    eval_cmd->add_option("--time", req.time, "evaluation time (default: window start)");
    add_common(eval_cmd);

    CLI::App* check_cmd = app.add_subcommand("check", "run the recursion identity battery");
    check_cmd->add_option("--process", req.process_path, "utility process fixture")->required();
    check_cmd->add_option("--mode", req.mode, "one-step or sweep")
        ->check(CLI::IsMember({"one-step", "sweep"}));
    check_cmd->add_option("--battery", req.battery_paths, "extra process fixtures");
    check_cmd->add_option("--random", req.random_count, "random battery size");
    add_common(check_cmd);

    CLI::App* certify_cmd = app.add_subcommand("certify", "structural certification");
    certify_cmd->add_option("--process", req.process_path, "utility process fixture")->required();
    add_common(certify_cmd);

    CLI::App* penalty_cmd = app.add_subcommand("penalty", "sharpened penalty of a scenario");
    penalty_cmd->add_option("--functional", req.functional_path, "robust functional fixture")
        ->required();
    penalty_cmd->add_option("--scenario", req.scenario_path, "density fixture")->required();
    penalty_cmd->add_option("--time", req.time, "anchor time (default: window start)");
    add_common(penalty_cmd);

    CLI::App* snell_cmd = app.add_subcommand("snell", "stopping envelope and exercise rule");
    snell_cmd->add_option("--functional", req.functional_path, "worst-stopping fixture")
        ->required();
    snell_cmd->add_option("--process", req.process_path, "process fixture")->required();
    snell_cmd->add_option("--time", req.time, "anchor time (default: window start)");
    add_common(snell_cmd);

    CLI::App* demo_cmd = app.add_subcommand("demo", "built-in worked examples");
    demo_cmd
        ->add_option("which", req.demo_which,
                     "counterexample | worst-stopping | entropic | weighted")
        ->required();
    add_common(demo_cmd);

    std::vector<const char*> argv;
    argv.push_back("dynarisk");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return 2;
    }

    if (const char* env_seed = std::getenv("DYNARISK_SEED")) {
        try {
            req.seed = std::stoull(env_seed);
        } catch (const std::exception&) {
            err << "UsageError: DYNARISK_SEED is not a number\n";
            return 2;
        }
    }

    try {
        if (eval_cmd->parsed()) return cmd_eval(req, out);
        if (check_cmd->parsed()) return cmd_check(req, out);
        if (certify_cmd->parsed()) return cmd_certify(req, out);
        if (penalty_cmd->parsed()) return cmd_penalty(req, out);
        if (snell_cmd->parsed()) return cmd_snell(req, out);
        if (demo_cmd->parsed()) return cmd_demo(req, out);
        err << "UsageError: no command\n";
        return 2;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace dynarisk
