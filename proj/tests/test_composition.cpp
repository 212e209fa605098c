#include <map>

#include "doctest.h"
#include "dynarisk/composition.hpp"
#include "dynarisk/fixtures.hpp"
#include "helpers.hpp"

using namespace dynarisk;

namespace {

TerminalDensity leaf_density(const FiltrationTree& tree, Rational a, Rational b, Rational c,
                             Rational d) {
    std::map<NodeId, Rational> f;
    f[tree.node_by_label("w1")] = a;
    f[tree.node_by_label("w2")] = b;
    f[tree.node_by_label("w3")] = c;
    f[tree.node_by_label("w4")] = d;
    return TerminalDensity(tree, std::move(f));
}

DensityProcess increments(const FiltrationTree& tree,
                          const std::map<std::string, Rational>& by_label) {
    std::vector<Rational> incr(tree.node_count(), Rational(0));
    for (const auto& [label, v] : by_label) incr[tree.node_by_label(label)] = v;
    return DensityProcess(tree, std::move(incr));
}

} // namespace

TEST_CASE("concatenation splices density tails") {
    const FiltrationTree& tree = dtest::ce_tree();
    DensityProcess a = increments(tree, {{"n1", 1}, {"n2", 1}});
    DensityProcess b = increments(tree, {{"w1", 1}, {"w2", 1}, {"w3", 1}, {"w4", 1}});
    StoppingTime one = StoppingTime::constant(tree, 1);
    NodeId n1 = tree.node_by_label("n1");

    SUBCASE("empty modification set is the identity") {
        CHECK(concat(a, b, one, {}) == a);
    }
    SUBCASE("concatenating a density with itself changes nothing") {
        CHECK(concat(a, a, one, one.stop_nodes()) == a);
        CHECK(concat(b, b, one, one.stop_nodes()) == b);
    }
    SUBCASE("splicing the terminal tail under one atom") {
        DensityProcess c = concat(a, b, one, {n1});
        CHECK(c.increment(n1) == 0);
        CHECK(c.increment(tree.node_by_label("w1")) == 1);
        CHECK(c.increment(tree.node_by_label("w2")) == 1);
        CHECK(c.increment(tree.node_by_label("n2")) == 1);
        CHECK(c.increment(tree.node_by_label("w3")) == 0);
        CHECK(classify_density(c, Window::full(tree)) == DensityClass::IN_D);
    }
    SUBCASE("zero continuation mass leaves the first density alone") {
        DensityProcess early = increments(tree, {{"root", 1}});
        CHECK(concat(a, early, one, one.stop_nodes()) == a);
    }
    SUBCASE("affinity in the first argument") {
        DensityProcess mix(tree, [&] {
            std::vector<Rational> v(tree.node_count(), Rational(0));
            for (NodeId n = 0; n < tree.node_count(); ++n)
                v[n] = Rational(a.increment(n) + b.increment(n)) / 2;
            return v;
        }());
        DensityProcess lhs = concat(mix, b, one, {n1});
        DensityProcess ca = concat(a, b, one, {n1});
        DensityProcess cb = concat(b, b, one, {n1});
        for (NodeId n = 0; n < tree.node_count(); ++n)
            CHECK(lhs.increment(n) ==
                  Rational(ca.increment(n) + cb.increment(n)) / 2);
    }
    SUBCASE("subset must consist of stop nodes") {
        dtest::expect_code([&] { concat(a, b, one, {tree.root()}); },
                           ErrorCode::NotAntichainSubset);
    }
}

TEST_CASE("pasting terminal densities") {
    const FiltrationTree& tree = dtest::ce_tree();
    TerminalDensity f = leaf_density(tree, 1, 1, 1, 1);
    TerminalDensity g = leaf_density(tree, 2, 0, 2, 0);
    StoppingTime one = StoppingTime::constant(tree, 1);
    NodeId n1 = tree.node_by_label("n1");

    TerminalDensity h = paste_density(f, g, one, {n1});
    CHECK(h == leaf_density(tree, 2, 0, 1, 1));
    CHECK(h.expectation_at(tree.root()) == 1);

    CHECK(paste_density(f, f, one, {n1}) == f);
    CHECK(paste_density(f, g, one, {}) == f);

    // pasting keeps the first density's conditional mass at the split
    ConditionalValue ef = f.expectation(one);
    ConditionalValue eh = h.expectation(one);
    CHECK(ef.at_node(n1) == eh.at_node(n1));
}

TEST_CASE("normalized shift into a later window") {
    const FiltrationTree& tree = dtest::ce_tree();
    StoppingTime one = StoppingTime::constant(tree, 1);

    SUBCASE("already normalized stays put") {
        DensityProcess a = increments(tree, {{"n1", 1}, {"n2", 1}});
        CHECK(normalize_from(a, one) == a);
    }
    SUBCASE("rescaling per atom") {
        DensityProcess a = increments(
            tree, {{"n1", Rational(1, 2)}, {"n2", Rational(1, 2)},
                   {"w1", Rational(1, 2)}, {"w2", Rational(1, 2)}});
        DensityProcess out = normalize_from(a, one);
        CHECK(out.increment(tree.node_by_label("n1")) == Rational(1, 2));
        CHECK(out.increment(tree.node_by_label("w1")) == Rational(1, 2));
        CHECK(out.increment(tree.node_by_label("w2")) == Rational(1, 2));
        CHECK(out.increment(tree.node_by_label("n2")) == 1);
        CHECK(classify_density(out, Window::span(tree, 1, 2)) == DensityClass::IN_D);
    }
    SUBCASE("zero-mass atoms receive a point mass at the split") {
        DensityProcess a = increments(tree, {{"root", 1}});
        DensityProcess out = normalize_from(a, one);
        CHECK(out.increment(tree.node_by_label("n1")) == 1);
        CHECK(out.increment(tree.node_by_label("n2")) == 1);
        CHECK(out.increment(tree.root()) == 0);
        CHECK(classify_density(out, Window::span(tree, 1, 2)) == DensityClass::IN_D);
    }
}

TEST_CASE("density constructors from terminal densities") {
    const FiltrationTree& tree = dtest::ce_tree();
    TerminalDensity unit = leaf_density(tree, 1, 1, 1, 1);

    DensityProcess fin = build_density_final(unit);
    for (NodeId leaf : tree.leaves()) CHECK(fin.increment(leaf) == 1);
    CHECK(fin.increment(tree.root()) == 0);
    CHECK(classify_density(fin, Window::full(tree)) == DensityClass::IN_D_E);

    StoppingTime one = StoppingTime::constant(tree, 1);
    DensityProcess stp = build_density_stopped(unit, one);
    CHECK(stp.increment(tree.node_by_label("n1")) == 1);
    CHECK(stp.increment(tree.node_by_label("n2")) == 1);
    CHECK(classify_density(stp, Window::full(tree)) == DensityClass::IN_D);

    DensityProcess wtd =
        build_density_weighted(unit, {Rational(1, 2), Rational(1, 4), Rational(1, 4)});
    CHECK(wtd.increment(tree.root()) == Rational(1, 2));
    CHECK(wtd.increment(tree.node_by_label("n1")) == Rational(1, 4));
    CHECK(wtd.increment(tree.node_by_label("n2")) == Rational(1, 4));
    for (NodeId leaf : tree.leaves()) CHECK(wtd.increment(leaf) == Rational(1, 4));
    CHECK(classify_density(wtd, Window::full(tree)) == DensityClass::IN_D_E);

    dtest::expect_code(
        [&] { build_density_weighted(unit, {Rational(1), Rational(1)}); },
        ErrorCode::BadWeights);
    dtest::expect_code(
        [&] { build_density_weighted(unit, {Rational(1, 2), Rational(1, 2), Rational(0)}); },
        ErrorCode::BadWeights);
}

TEST_CASE("scenario sets classify their members") {
    const FiltrationTree& tree = dtest::ce_tree();
    Window full = Window::full(tree);
    DensityProcess fin = build_density_final(leaf_density(tree, 1, 1, 1, 1));
    DensityProcess stp = build_density_stopped(leaf_density(tree, 1, 1, 1, 1),
                                               StoppingTime::constant(tree, 1));

    ScenarioSet both(tree, full, {fin, stp});
    CHECK(both.size() == 2);
    CHECK_FALSE(both.all_extreme());
    CHECK(both.contains(fin));
    CHECK_FALSE(both.contains(build_density_final(leaf_density(tree, 2, 0, 1, 1))));

    ScenarioSet only_final(tree, full, {fin});
    CHECK(only_final.all_extreme());

    dtest::expect_code([&] { ScenarioSet(tree, full, {}); }, ErrorCode::EmptyScenarioSet);
    dtest::expect_code(
        [&] {
            ScenarioSet(tree, full,
                        {DensityProcess(tree, std::vector<Rational>(tree.node_count(),
                                                                    Rational(0)))});
        },
        ErrorCode::NotADensity);
}

TEST_CASE("stability of stopped scenario families") {
    const FiltrationTree& tree = dtest::ce_tree();
    Window full = Window::full(tree);
    TerminalDensity unit = leaf_density(tree, 1, 1, 1, 1);

    std::vector<DensityProcess> stopped;
    for (const auto& tau : enumerate_stopping_times(tree, 0))
        stopped.push_back(build_density_stopped(unit, tau));
    ScenarioSet Q(tree, full, std::move(stopped));

    StabilityReport exact = check_stability(Q, /*use_hull=*/false);
    CHECK(exact.stable);
    CHECK(exact.exhaustive);
    StabilityReport hull = check_stability(Q, /*use_hull=*/true);
    CHECK(hull.stable);
}

TEST_CASE("unstable pair is refuted with a verified separator") {
    const FiltrationTree& tree = dtest::ce_tree();
    Window full = Window::full(tree);
    TerminalDensity f = leaf_density(tree, 2, 0, 1, 1);
    TerminalDensity g = leaf_density(tree, 1, 1, 2, 0);
    ScenarioSet Q(tree, full, {build_density_final(f), build_density_final(g)});

    StabilityReport rep = check_stability(Q, /*use_hull=*/true);
    REQUIRE_FALSE(rep.stable);
    REQUIRE_FALSE(rep.violations.empty());
    const StabilityViolation& v = rep.violations.front();
    CHECK_FALSE(Q.contains(v.escaped));
    CHECK_FALSE(v.separator_values.empty());

    // the escaped concatenation is the final-density paste
    StoppingTime theta = StoppingTime::constant(tree, v.time);
    TerminalDensity pasted = paste_density(v.a_index == 0 ? f : g, v.b_index == 0 ? f : g,
                                           theta, v.subset);
    CHECK(v.escaped == build_density_final(pasted));
}

TEST_CASE("paste closure of measurable families is finite and stable") {
    const FiltrationTree& tree = dtest::ce_tree();

    SUBCASE("densities measurable at the split never escape") {
        TerminalDensity f = leaf_density(tree, Rational(3, 2), Rational(3, 2), Rational(1, 2),
                                         Rational(1, 2));
        TerminalDensity g = leaf_density(tree, Rational(1, 2), Rational(1, 2), Rational(3, 2),
                                         Rational(3, 2));
        auto closed = closure_under_paste(tree, {f, g});
        REQUIRE(closed.has_value());
        CHECK(closed->size() == 2);
        CHECK(check_paste_stability(tree, *closed).stable);
    }

    SUBCASE("shape-swapping densities close at four elements") {
        TerminalDensity f = leaf_density(tree, 2, 0, 1, 1);
        TerminalDensity g = leaf_density(tree, 1, 1, 2, 0);
        PasteStabilityReport before = check_paste_stability(tree, {f, g});
        CHECK_FALSE(before.stable);
        auto closed = closure_under_paste(tree, {f, g});
        REQUIRE(closed.has_value());
        CHECK(closed->size() == 4);
        PasteStabilityReport after = check_paste_stability(tree, *closed);
        CHECK(after.stable);
        CHECK(after.exhaustive);
    }
}
