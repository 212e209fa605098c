#include <map>
#include <memory>

#include "doctest.h"
#include "dynarisk/consistency.hpp"
#include "dynarisk/fixtures.hpp"
#include "helpers.hpp"

using namespace dynarisk;

namespace {

AdaptedProcess ce_x() {
    const FiltrationTree& tree = dtest::ce_tree();
    return AdaptedProcess(tree, Window::full(tree), counterexample_values(tree));
}

UtilityProcess robust_final() {
    return load_utility(dtest::store(), dtest::fixture("robust_final.json"));
}

TerminalDensity leaf_density(const FiltrationTree& tree, Rational a, Rational b, Rational c,
                             Rational d) {
    std::map<NodeId, Rational> f;
    f[tree.node_by_label("w1")] = a;
    f[tree.node_by_label("w2")] = b;
    f[tree.node_by_label("w3")] = c;
    f[tree.node_by_label("w4")] = d;
    return TerminalDensity(tree, std::move(f));
}

// two final-value scenarios whose paste escapes their convex hull
UtilityProcess shape_swap_process() {
    const FiltrationTree& tree = dtest::ce_tree();
    auto Q = std::make_shared<ScenarioSet>(
        tree, Window::full(tree),
        std::vector<DensityProcess>{
            build_density_final(leaf_density(tree, 2, 0, 1, 1)),
            build_density_final(leaf_density(tree, 1, 1, 2, 0))});
    UtilityFunctional F = UtilityFunctional::robust(tree, Q, std::nullopt);
    return UtilityProcess(tree, 0, tree.horizon(), F.rep_ptr());
}

AdaptedProcess leaf_payoff(Rational a, Rational b, Rational c, Rational d) {
    const FiltrationTree& tree = dtest::ce_tree();
    std::vector<Rational> raw(tree.node_count(), Rational(0));
    raw[tree.node_by_label("w1")] = a;
    raw[tree.node_by_label("w2")] = b;
    raw[tree.node_by_label("w3")] = c;
    raw[tree.node_by_label("w4")] = d;
    return AdaptedProcess(tree, Window::full(tree), std::move(raw));
}

} // namespace

TEST_CASE("the running minimum process is refuted with the textbook witness") {
    const FiltrationTree& tree = dtest::ce_tree();
    UtilityProcess U = counterexample_process(tree);

    ConsistencyReport rep = check_time_consistency(U, {ce_x()}, Mode::ONE_STEP);
    CHECK(rep.verdict == Verdict::REFUTED);
    REQUIRE_FALSE(rep.witnesses.empty());
    const ConsistencyWitness& w = rep.witnesses.front();
    CHECK(w.theta == "t=1");
    CHECK(w.process.find("t=0") != std::string::npos);
    CHECK(w.atom == tree.root());
    CHECK(w.lhs == ExtReal(Rational(3, 4)));
    CHECK(w.rhs == ExtReal(Rational(1)));
    CHECK_FALSE(rep.describe().empty());

    // the sweep finds the same witness among others
    ConsistencyReport sweep = check_time_consistency(U, {ce_x()}, Mode::ALL_STOPPING_TIMES);
    CHECK(sweep.verdict == Verdict::REFUTED);
}

TEST_CASE("batteries are deterministic under a seed") {
    const FiltrationTree& tree = dtest::ce_tree();
    Window full = Window::full(tree);
    auto a = make_battery(tree, full, 5, 42);
    auto b = make_battery(tree, full, 5, 42);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    CHECK(a.size() == make_battery(tree, full, 0, 42).size() + 5);

    auto c = make_battery(tree, full, 5, 43);
    bool all_equal = true;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!(a[i] == c[i])) all_equal = false;
    CHECK_FALSE(all_equal);
}

TEST_CASE("random trees respect their caps") {
    Rng rng(11);
    for (int i = 0; i < 10; ++i) {
        TreeSpec spec = make_random_tree(rng, 4, 3);
        FiltrationTree tree = FiltrationTree::build(spec);
        CHECK(tree.horizon() >= 1);
        CHECK(tree.horizon() <= 4);
        CHECK(count_stopping_times(tree, 0) <= 10000);
        for (NodeId n = 0; n < tree.node_count(); ++n)
            CHECK(tree.children(n).size() <= 3);
    }
}

TEST_CASE("the single scenario mean passes one step and sweep checks") {
    const FiltrationTree& tree = dtest::ce_tree();
    UtilityProcess U = robust_final();
    auto battery = make_battery(tree, Window::full(tree), 20, 7);
    battery.push_back(ce_x());

    ConsistencyReport one = check_time_consistency(U, battery, Mode::ONE_STEP);
    CHECK(one.verdict == Verdict::CERTIFIED_ON_BATTERY);
    CHECK(one.checked > 0);
    CHECK(one.skipped == 0);

    ConsistencyReport all = check_time_consistency(U, battery, Mode::ALL_STOPPING_TIMES);
    CHECK(all.verdict == Verdict::CERTIFIED_ON_BATTERY);
    CHECK(all.checked > one.checked);
}

TEST_CASE("the recursion identity lifts to non-constant stopping times") {
    const FiltrationTree& tree = dtest::ce_tree();
    UtilityProcess U = robust_final();
    AdaptedProcess x = ce_x();
    StoppingTime tau = StoppingTime::constant(tree, 0);
    StoppingTime theta(tree, {tree.node_by_label("n1"), tree.node_by_label("w3"),
                              tree.node_by_label("w4")});

    ConditionalValue mid = eval(U.conditioned(theta), x, theta);
    std::vector<Rational> raw = x.values();
    for (NodeId n = 0; n < tree.node_count(); ++n) {
        NodeId s = theta.stop_at_or_above(n);
        if (s != kNoNode) raw[n] = mid.at_node(s).value();
    }
    AdaptedProcess stitched(tree, Window::full(tree), std::move(raw));
    CHECK(eval(U.conditioned(tau), stitched, tau) == eval(U.conditioned(tau), x, tau));
}

TEST_CASE("acceptance decomposition splits accepted processes") {
    const FiltrationTree& tree = dtest::ce_tree();
    StoppingTime zero = StoppingTime::constant(tree, 0);
    StoppingTime one = StoppingTime::constant(tree, 1);

    SUBCASE("zero splits into zeros") {
        UtilityProcess U = robust_final();
        AdaptedProcess z = AdaptedProcess::zero(tree, Window::full(tree));
        Decomposition d = decompose_acceptance(U, z, zero, one);
        CHECK(d.holds);
        CHECK(d.Y == z);
        CHECK(d.Z == z);
        CHECK(d.y_value.at_node(tree.root()) == ExtReal(Rational(0)));
    }
    SUBCASE("a consistent process decomposes every accepted input") {
        UtilityProcess U = robust_final();
        for (const auto& x : make_battery(tree, Window::full(tree), 10, 3)) {
            if (!accepts(U.member(0), x)) continue;
            Decomposition d = decompose_acceptance(U, x, zero, one);
            CHECK(d.holds);
            CHECK(project(d.Y + d.Z, Window::full(tree)) == project(x, Window::full(tree)));
        }
    }
    SUBCASE("an inconsistent process leaves an unacceptable head") {
        UtilityProcess U = shape_swap_process();
        AdaptedProcess x =
            leaf_payoff(Rational(-1, 4), Rational(7, 4), Rational(-1, 4), Rational(7, 4));
        REQUIRE(accepts(U.member(0), x)); // value 1/4
        Decomposition d = decompose_acceptance(U, x, zero, one);
        CHECK_FALSE(d.holds);
        REQUIRE(d.y_accepted.size() == 1);
        CHECK_FALSE(d.y_accepted[0]);
        CHECK(d.y_value.at_node(tree.root()) == ExtReal(Rational(-1, 4)));
        CHECK(d.z_value.at_node(tree.node_by_label("n1")) == ExtReal(Rational(0)));
        for (char ok : d.z_accepted) CHECK(ok);
    }
    SUBCASE("rejected inputs are refused") {
        UtilityProcess U = robust_final();
        AdaptedProcess bad =
            AdaptedProcess::constant(tree, Window::full(tree), Rational(-1));
        dtest::expect_code([&] { decompose_acceptance(U, bad, zero, one); },
                           ErrorCode::NotAccepted);
    }
}

TEST_CASE("masking accepted tails stays accepted for certified processes") {
    const FiltrationTree& tree = dtest::ce_tree();
    UtilityProcess U = robust_final();
    AdaptedProcess x = ce_x();
    Window tail = Window::span(tree, 1, 2);
    AdaptedProcess xt = project(x, tail);
    REQUIRE(accepts(U.member(1), xt));

    for (NodeId atom : tree.nodes_at_time(1)) {
        AdaptedProcess masked = project(xt.masked({atom}), Window::full(tree));
        CHECK(accepts(U.member(0), masked));
    }

    // conversely, acceptance of every masked piece forces tail acceptance
    AdaptedProcess y = leaf_payoff(1, 1, -2, -2);
    bool all_masked_ok = true;
    for (NodeId atom : tree.nodes_at_time(1)) {
        AdaptedProcess masked = project(project(y, tail).masked({atom}), Window::full(tree));
        if (!accepts(U.member(0), masked)) all_masked_ok = false;
    }
    CHECK_FALSE(all_masked_ok);
    CHECK_FALSE(accepts(U.member(1), project(y, tail)));
}

TEST_CASE("pasting utility processes") {
    const FiltrationTree& tree = dtest::ce_tree();

    auto period_process = [&](int from, int to) {
        std::vector<Rational> incr(tree.node_count(), Rational(0));
        for (NodeId n : tree.nodes_at_time(to)) incr[n] = 1;
        auto Q = std::make_shared<ScenarioSet>(
            tree, Window::span(tree, from, to),
            std::vector<DensityProcess>{DensityProcess(tree, std::move(incr))});
        UtilityFunctional F = UtilityFunctional::robust(tree, Q, std::nullopt);
        return UtilityProcess(tree, from, to, F.rep_ptr());
    };

    SUBCASE("pasting with the horizon point process is the identity") {
        UtilityProcess early = robust_final();
        UtilityProcess late = period_process(2, 2);
        UtilityProcess pasted = extend_process(early, late);
        CHECK(pasted.start() == 0);
        CHECK(pasted.end() == 2);
        for (const auto& x : make_battery(tree, Window::full(tree), 10, 5))
            for (int t = 0; t <= 2; ++t) {
                AdaptedProcess xt = project(x, Window::span(tree, t, 2));
                CHECK(eval(pasted.member(t), xt) == eval(early.member(t), xt));
            }
    }
    SUBCASE("a chain of one period means composes to the global mean") {
        UtilityProcess chain = extend_process(period_process(0, 1), period_process(1, 2));
        UtilityProcess mean = robust_final();
        auto battery = make_battery(tree, Window::full(tree), 15, 9);
        battery.push_back(ce_x());
        for (const auto& x : battery)
            for (int t = 0; t <= 2; ++t) {
                AdaptedProcess xt = project(x, Window::span(tree, t, 2));
                CHECK(eval(chain.member(t), xt) == eval(mean.member(t), xt));
            }
        ConsistencyReport rep =
            check_time_consistency(chain, battery, Mode::ALL_STOPPING_TIMES);
        CHECK(rep.verdict == Verdict::CERTIFIED_ON_BATTERY);
    }
    SUBCASE("inputs must line up and be consistent") {
        dtest::expect_code(
            [&] { extend_process(period_process(0, 1), period_process(0, 1)); },
            ErrorCode::HorizonMismatch);
        dtest::expect_code(
            [&] {
                extend_process(counterexample_process(tree), period_process(2, 2));
            },
            ErrorCode::InputNotConsistent);
    }
}

TEST_CASE("penalty recursion lower bound") {
    const FiltrationTree& tree = dtest::ce_tree();
    StoppingTime zero = StoppingTime::constant(tree, 0);
    StoppingTime one = StoppingTime::constant(tree, 1);

    auto tail_candidates = [&](std::vector<TerminalDensity> fs) {
        std::vector<DensityProcess> ds;
        for (const auto& f : fs) {
            std::vector<Rational> incr(tree.node_count(), Rational(0));
            for (NodeId leaf : tree.leaves()) {
                Rational e = f.expectation_at(tree.parent(leaf));
                incr[leaf] = f.at_leaf(leaf) / e;
            }
            ds.emplace_back(tree, std::move(incr));
        }
        return ScenarioSet(tree, Window::span(tree, 1, 2), std::move(ds));
    };

    SUBCASE("consistent coherent process attains equality at its own scenarios") {
        UtilityProcess U = robust_final();
        TerminalDensity unit = leaf_density(tree, 1, 1, 1, 1);
        ScenarioSet candidates = tail_candidates({unit});
        ConsistencyReport rep = check_penalty_recursion(
            U, build_density_final(unit), zero, one, candidates);
        CHECK(rep.verdict == Verdict::CERTIFIED_ON_BATTERY);
        CHECK(rep.witnesses.empty());
    }
    SUBCASE("the shape swapping pair is refuted") {
        UtilityProcess U = shape_swap_process();
        TerminalDensity mixed = leaf_density(tree, 1, 1, 1, 1);
        ScenarioSet candidates = tail_candidates(
            {leaf_density(tree, 2, 0, 1, 1), leaf_density(tree, 1, 1, 2, 0)});
        ConsistencyReport rep = check_penalty_recursion(
            U, build_density_final(mixed), zero, one, candidates);
        CHECK(rep.verdict == Verdict::REFUTED);
        REQUIRE_FALSE(rep.witnesses.empty());
        CHECK(rep.witnesses.front().lhs == ExtReal::neg_inf());
        CHECK(rep.witnesses.front().rhs == ExtReal(Rational(0)));
    }
    SUBCASE("usage errors") {
        UtilityProcess E = load_utility(dtest::store(), dtest::fixture("entropic.json"));
        TerminalDensity unit = leaf_density(tree, 1, 1, 1, 1);
        ScenarioSet candidates = tail_candidates({unit});
        dtest::expect_code(
            [&] {
                check_penalty_recursion(E, build_density_final(unit), zero, one, candidates);
            },
            ErrorCode::UsageError);

        UtilityProcess U = robust_final();
        ScenarioSet full_window(tree, Window::full(tree),
                                {build_density_final(unit)});
        dtest::expect_code(
            [&] {
                check_penalty_recursion(U, build_density_final(unit), zero, one,
                                        full_window);
            },
            ErrorCode::WindowViolation);
    }
}

TEST_CASE("structural certification dispatch") {
    const FiltrationTree& tree = dtest::ce_tree();

    SUBCASE("stable everywhere active scenario sets are certified") {
        ConsistencyReport rep = certify_sufficiency(robust_final());
        CHECK(rep.verdict == Verdict::CERTIFIED);
        CHECK(rep.method == "concatenation stability of the scenario set");
    }
    SUBCASE("stopped families are stable but not everywhere active") {
        UtilityProcess U = load_utility(dtest::store(), dtest::fixture("stopped_scenarios.json"));
        ConsistencyReport rep = certify_sufficiency(U);
        CHECK(rep.verdict == Verdict::CERTIFIED_ON_BATTERY);
    }
    SUBCASE("entropic and weighted families certify through paste stability") {
        ConsistencyReport ent =
            certify_sufficiency(load_utility(dtest::store(), dtest::fixture("entropic.json")));
        CHECK(ent.verdict == Verdict::CERTIFIED);
        ConsistencyReport wtd =
            certify_sufficiency(load_utility(dtest::store(), dtest::fixture("weighted.json")));
        CHECK(wtd.verdict == Verdict::CERTIFIED);
        ConsistencyReport stp = certify_sufficiency(
            load_utility(dtest::store(), dtest::fixture("worst_stopping.json")));
        CHECK(stp.verdict == Verdict::CERTIFIED);
    }
    SUBCASE("the running minimum is refuted by the fallback sweep") {
        ConsistencyReport rep = certify_sufficiency(counterexample_process(tree));
        CHECK(rep.verdict == Verdict::REFUTED);
        REQUIRE_FALSE(rep.witnesses.empty());
    }
    SUBCASE("unstable scenario sets are refuted via separator processes") {
        ConsistencyReport rep = certify_sufficiency(shape_swap_process());
        CHECK(rep.verdict == Verdict::REFUTED);
        CHECK(rep.method.find("separator") != std::string::npos);
    }
}

TEST_CASE("certified processes sharing the initial member agree everywhere") {
    const FiltrationTree& tree = dtest::ce_tree();
    UtilityProcess mean = robust_final();
    UtilityProcess wtd = [&] {
        std::map<NodeId, Rational> ones;
        for (NodeId leaf : tree.leaves()) ones[leaf] = 1;
        UtilityFunctional F = UtilityFunctional::aggregated(
            tree, Window::full(tree), {TerminalDensity(tree, ones)}, AggKind::WEIGHTED,
            {Rational(0), Rational(0), Rational(1)});
        return UtilityProcess(tree, 0, 2, F.rep_ptr());
    }();

    CHECK(certify_sufficiency(mean).verdict == Verdict::CERTIFIED);
    CHECK(certify_sufficiency(wtd).verdict == Verdict::CERTIFIED);

    auto battery = make_battery(tree, Window::full(tree), 10, 13);
    for (const auto& x : battery)
        CHECK(eval(mean.member(0), x) == eval(wtd.member(0), x));
    for (const auto& x : battery)
        for (int t = 1; t <= 2; ++t) {
            AdaptedProcess xt = project(x, Window::span(tree, t, 2));
            CHECK(eval(mean.member(t), xt) == eval(wtd.member(t), xt));
        }
}
