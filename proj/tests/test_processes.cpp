#include <map>

#include "doctest.h"
#include "dynarisk/fixtures.hpp"
#include "dynarisk/processes.hpp"
#include "helpers.hpp"

using namespace dynarisk;

namespace {

AdaptedProcess ce_x(const Window& w) {
    const FiltrationTree& tree = dtest::ce_tree();
    return AdaptedProcess(tree, w, counterexample_values(tree));
}

DensityProcess final_one() {
    const FiltrationTree& tree = dtest::ce_tree();
    std::vector<Rational> incr(tree.node_count(), Rational(0));
    for (NodeId leaf : tree.leaves()) incr[leaf] = 1;
    return DensityProcess(tree, std::move(incr));
}

DensityProcess stopped_at_one() {
    const FiltrationTree& tree = dtest::ce_tree();
    std::vector<Rational> incr(tree.node_count(), Rational(0));
    incr[tree.node_by_label("n1")] = 1;
    incr[tree.node_by_label("n2")] = 1;
    return DensityProcess(tree, std::move(incr));
}

} // namespace

TEST_CASE("windows order their endpoints") {
    const FiltrationTree& tree = dtest::ce_tree();
    Window full = Window::full(tree);
    CHECK(full.lo.is_constant(0));
    CHECK(full.hi.is_constant(2));
    CHECK(full == Window::span(tree, 0, 2));
    dtest::expect_code([&] { Window::span(tree, 2, 1); }, ErrorCode::WindowOrderViolation);

    NodeId n1 = tree.node_by_label("n1");
    StoppingTime mixed(tree, {n1, tree.node_by_label("w3"), tree.node_by_label("w4")});
    auto nodes = window_nodes(tree, tree.root(), mixed);
    CHECK(nodes.size() == 5); // root, both time-1 atoms, w3, w4
    auto below = window_nodes(tree, n1, StoppingTime::constant(tree, 2));
    CHECK(below.size() == 3); // n1, w1, w2
}

TEST_CASE("projection zeroes the past and freezes the future") {
    const FiltrationTree& tree = dtest::ce_tree();
    AdaptedProcess x = ce_x(Window::full(tree));

    AdaptedProcess tail = project(x, Window::span(tree, 1, 2));
    CHECK(tail.at(tree.root()) == 0); // value before the window start is dropped
    CHECK(tail.at(tree.node_by_label("n1")) == 4);
    CHECK(tail.at(tree.node_by_label("w4")) == -1);

    AdaptedProcess head = project(x, Window::span(tree, 0, 1));
    CHECK(head.at(tree.root()) == 2);
    CHECK(head.at(tree.node_by_label("w1")) == 4);  // frozen at the time-1 value
    CHECK(head.at(tree.node_by_label("w2")) == 4);
    CHECK(head.at(tree.node_by_label("w3")) == 1);
    CHECK(head.at(tree.node_by_label("w4")) == 1);

    // projecting twice is idempotent
    CHECK(project(head, Window::span(tree, 0, 1)) == head);
}

TEST_CASE("pairing against density processes") {
    const FiltrationTree& tree = dtest::ce_tree();
    Window full = Window::full(tree);
    AdaptedProcess x = ce_x(full);

    ConditionalValue at_root = pairing(x, final_one(), full);
    CHECK(at_root.at_node(tree.root()) == ExtReal(Rational(7, 4)));

    ConditionalValue stopped = pairing(x, stopped_at_one(), full);
    CHECK(stopped.at_node(tree.root()) == ExtReal(Rational(5, 2)));

    Window tail = Window::span(tree, 1, 2);
    ConditionalValue windowed = pairing(project(x, tail), final_one(), tail);
    CHECK(windowed.at_node(tree.node_by_label("n1")) == ExtReal(Rational(3)));
    CHECK(windowed.at_node(tree.node_by_label("n2")) == ExtReal(Rational(1, 2)));

    CHECK(conditional_mass(final_one(), full).at_node(tree.root()) == ExtReal(Rational(1)));
    CHECK(conditional_mass_at(final_one(), tree.node_by_label("n1"),
                              StoppingTime::constant(tree, 2)) == Rational(1));

    // a density stopped at time 0 has no mass inside the tail window
    DensityProcess early(tree, [&] {
        std::vector<Rational> incr(tree.node_count(), Rational(0));
        incr[tree.root()] = 1;
        return incr;
    }());
    CHECK(conditional_mass_at(early, tree.node_by_label("n1"),
                              StoppingTime::constant(tree, 2)) == Rational(0));
}

TEST_CASE("sup norm per atom") {
    const FiltrationTree& tree = dtest::ce_tree();
    AdaptedProcess x = ce_x(Window::full(tree));
    CHECK(sup_norm(x, Window::full(tree)).at_node(tree.root()) == ExtReal(Rational(5)));

    Window tail = Window::span(tree, 1, 2);
    ConditionalValue v = sup_norm(project(x, tail), tail);
    CHECK(v.at_node(tree.node_by_label("n1")) == ExtReal(Rational(5)));
    CHECK(v.at_node(tree.node_by_label("n2")) == ExtReal(Rational(2)));
}

TEST_CASE("density classification over a window") {
    const FiltrationTree& tree = dtest::ce_tree();
    Window full = Window::full(tree);

    CHECK(classify_density(final_one(), full) == DensityClass::IN_D_E);
    CHECK(classify_density(stopped_at_one(), full) == DensityClass::IN_D);

    std::vector<Rational> neg(tree.node_count(), Rational(0));
    neg[tree.node_by_label("w1")] = -1;
    dtest::expect_code([&] { DensityProcess(tree, neg); }, ErrorCode::NotADensity);

    std::vector<Rational> half(tree.node_count(), Rational(0));
    for (NodeId leaf : tree.leaves()) half[leaf] = Rational(1, 2);
    CHECK(classify_density(DensityProcess(tree, half), full) == DensityClass::NOT_IN_D);

    // correct mass at the root but unbalanced across time-1 subtrees
    Window tail = Window::span(tree, 1, 2);
    std::vector<Rational> skew(tree.node_count(), Rational(0));
    skew[tree.node_by_label("w1")] = 2;
    skew[tree.node_by_label("w2")] = 2;
    DensityProcess skewed(tree, skew);
    CHECK(classify_density(skewed, full) == DensityClass::IN_D);
    CHECK(classify_density(skewed, tail) == DensityClass::NOT_IN_D);

    CHECK(stopped_at_one().cumulative(tree.node_by_label("w1")) == 1);
    CHECK(stopped_at_one().cumulative_before(tree.node_by_label("w1")) == 1);
    CHECK(stopped_at_one().cumulative_before(tree.node_by_label("n1")) == 0);
}

TEST_CASE("process arithmetic, masking, and translation") {
    const FiltrationTree& tree = dtest::ce_tree();
    Window full = Window::full(tree);
    AdaptedProcess x = ce_x(full);

    CHECK((x + x).at(tree.root()) == 4);
    CHECK((x - x) == AdaptedProcess::zero(tree, full));
    CHECK(x.scaled(Rational(1, 2)).at(tree.node_by_label("n1")) == 2);

    AdaptedProcess shifted = x.translated(Rational(3));
    CHECK(shifted.at(tree.root()) == 5);
    CHECK(shifted.at(tree.node_by_label("w4")) == 2);

    StoppingTime zero = StoppingTime::constant(tree, 0);
    ConditionalValue m = ConditionalValue::constant(zero, ExtReal(Rational(3)));
    CHECK(x.translated(m) == shifted);

    ConditionalValue at_one = ConditionalValue::constant(StoppingTime::constant(tree, 1),
                                                         ExtReal(Rational(3)));
    dtest::expect_code([&] { x.translated(at_one); }, ErrorCode::AnchorMismatch);

    AdaptedProcess masked = x.masked({tree.root()});
    CHECK(masked == x);
    CHECK(x.masked({}) == AdaptedProcess::zero(tree, full));

    Window tail = Window::span(tree, 1, 2);
    AdaptedProcess xt = project(x, tail);
    AdaptedProcess only_n1 = xt.masked({tree.node_by_label("n1")});
    CHECK(only_n1.at(tree.node_by_label("n1")) == 4);
    CHECK(only_n1.at(tree.node_by_label("w1")) == 5);
    CHECK(only_n1.at(tree.node_by_label("n2")) == 0);
    CHECK(only_n1.at(tree.node_by_label("w3")) == 0);
}

TEST_CASE("terminal densities validate and condition") {
    const FiltrationTree& tree = dtest::ce_tree();
    std::map<NodeId, Rational> f;
    f[tree.node_by_label("w1")] = 2;
    f[tree.node_by_label("w2")] = 0;
    f[tree.node_by_label("w3")] = 1;
    f[tree.node_by_label("w4")] = 1;
    TerminalDensity d(tree, f);
    CHECK_FALSE(d.strictly_positive());
    CHECK(d.expectation_at(tree.root()) == 1);

    ConditionalValue e1 = d.expectation(StoppingTime::constant(tree, 1));
    CHECK(e1.at_node(tree.node_by_label("n1")) == ExtReal(Rational(1)));
    CHECK(e1.at_node(tree.node_by_label("n2")) == ExtReal(Rational(1)));

    std::map<NodeId, Rational> bad = f;
    bad[tree.node_by_label("w1")] = 3;
    dtest::expect_code([&] { TerminalDensity(tree, bad); }, ErrorCode::NotADensity);

    std::map<NodeId, Rational> neg = f;
    neg[tree.node_by_label("w1")] = -1;
    dtest::expect_code([&] { TerminalDensity(tree, neg); }, ErrorCode::NotADensity);
}
