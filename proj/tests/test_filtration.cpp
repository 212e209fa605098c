#include <algorithm>
#include <map>

#include "doctest.h"
#include "dynarisk/filtration.hpp"
#include "helpers.hpp"

using namespace dynarisk;

namespace {

TreeSpec two_leaf_spec() {
    TreeSpec s;
    s.horizon = 1;
    s.nodes = {{"r", 0, ""}, {"a", 1, "r"}, {"b", 1, "r"}};
    s.leaf_probs["a"] = Rational(1, 2);
    s.leaf_probs["b"] = Rational(1, 2);
    return s;
}

} // namespace

TEST_CASE("tree accessors on the builtin example") {
    const FiltrationTree& tree = dtest::ce_tree();
    CHECK(tree.horizon() == 2);
    CHECK(tree.node_count() == 7);
    CHECK(tree.time(tree.root()) == 0);
    CHECK(tree.prob(tree.root()) == 1);

    NodeId n1 = tree.node_by_label("n1");
    NodeId n2 = tree.node_by_label("n2");
    NodeId w1 = tree.node_by_label("w1");
    CHECK(tree.prob(n1) == Rational(1, 2));
    CHECK(tree.prob(w1) == Rational(1, 4));
    CHECK(tree.parent(w1) == n1);
    CHECK(tree.children(n1).size() == 2);
    CHECK(tree.is_leaf(w1));
    CHECK_FALSE(tree.is_leaf(n1));
    CHECK(tree.leaves().size() == 4);
    CHECK(tree.nodes_at_time(1).size() == 2);
    CHECK(tree.ancestor_at(w1, 1) == n1);
    CHECK(tree.ancestor_at(w1, 0) == tree.root());
    CHECK(tree.is_ancestor_or_self(n1, w1));
    CHECK(tree.is_ancestor_or_self(w1, w1));
    CHECK_FALSE(tree.is_ancestor_or_self(w1, n1));
    CHECK_FALSE(tree.is_ancestor_or_self(n2, w1));

    auto under = tree.leaves_under(n2);
    CHECK(under.size() == 2);
    for (NodeId l : under) CHECK(tree.is_ancestor_or_self(n2, l));

    CHECK(tree.label(n1) == "n1");
    CHECK(tree.same(tree));
}

TEST_CASE("tree construction rejects malformed specs") {
    SUBCASE("child not one step below parent") {
        TreeSpec s = two_leaf_spec();
        s.horizon = 2;
        s.nodes[1].time = 2;
        s.nodes[2].time = 2;
        dtest::expect_code([&] { FiltrationTree::build(s); }, ErrorCode::NonTreeShape);
    }
    SUBCASE("duplicate node id") {
        TreeSpec s = two_leaf_spec();
        s.nodes[2].id = "a";
        dtest::expect_code([&] { FiltrationTree::build(s); }, ErrorCode::NonTreeShape);
    }
    SUBCASE("two roots") {
        TreeSpec s = two_leaf_spec();
        s.nodes.push_back({"r2", 0, ""});
        dtest::expect_code([&] { FiltrationTree::build(s); }, ErrorCode::NonTreeShape);
    }
    SUBCASE("probabilities not summing to one") {
        TreeSpec s = two_leaf_spec();
        s.leaf_probs["b"] = Rational(1, 3);
        dtest::expect_code([&] { FiltrationTree::build(s); }, ErrorCode::ProbNotNormalized);
    }
    SUBCASE("missing leaf probability") {
        TreeSpec s = two_leaf_spec();
        s.leaf_probs.erase("b");
        dtest::expect_code([&] { FiltrationTree::build(s); }, ErrorCode::ProbNotNormalized);
    }
    SUBCASE("zero probability leaf") {
        TreeSpec s = two_leaf_spec();
        s.leaf_probs["a"] = Rational(0);
        s.leaf_probs["b"] = Rational(1);
        dtest::expect_code([&] { FiltrationTree::build(s); }, ErrorCode::ZeroProbabilityNode);
    }
    SUBCASE("interior node before the horizon must have children") {
        TreeSpec s = two_leaf_spec();
        s.horizon = 2;
        dtest::expect_code([&] { FiltrationTree::build(s); }, ErrorCode::NonTreeShape);
    }
}

TEST_CASE("stopping times validate the antichain property") {
    const FiltrationTree& tree = dtest::ce_tree();
    NodeId n1 = tree.node_by_label("n1");
    NodeId n2 = tree.node_by_label("n2");
    NodeId w1 = tree.node_by_label("w1");
    NodeId w3 = tree.node_by_label("w3");
    NodeId w4 = tree.node_by_label("w4");

    StoppingTime mixed(tree, {n1, w3, w4});
    CHECK(mixed.min_time() == 1);
    CHECK(mixed.max_time() == 2);
    CHECK_FALSE(mixed.is_constant(1));
    CHECK(mixed.stops_at(n1));
    CHECK_FALSE(mixed.stops_at(n2));
    CHECK(mixed.stop_on_path(w1) == n1);
    CHECK(mixed.time_on_path(w1) == 1);
    CHECK(mixed.stop_on_path(w3) == w3);
    CHECK(mixed.time_on_path(w4) == 2);
    CHECK(mixed.stop_at_or_above(w1) == n1);
    CHECK(mixed.stop_at_or_above(n1) == n1);

    StoppingTime zero = StoppingTime::constant(tree, 0);
    StoppingTime two = StoppingTime::constant(tree, 2);
    CHECK(zero.is_constant(0));
    CHECK(zero.leq(mixed));
    CHECK(mixed.leq(two));
    CHECK_FALSE(two.leq(mixed));
    CHECK(zero == StoppingTime::constant(tree, 0));
    CHECK_FALSE(zero == mixed);

    StoppingTime other(tree, {w1, tree.node_by_label("w2"), n2});
    CHECK_FALSE(mixed.leq(other));
    CHECK_FALSE(other.leq(mixed));

    dtest::expect_code([&] { StoppingTime(tree, {n1, w1}); }, ErrorCode::NotAntichain);
    dtest::expect_code([&] { StoppingTime(tree, {n1}); }, ErrorCode::NotAntichain);
    dtest::expect_code([&] { StoppingTime::constant(tree, 5); }, ErrorCode::WindowViolation);
}

TEST_CASE("stopping time enumeration is complete and deterministic") {
    const FiltrationTree& tree = dtest::ce_tree();
    auto all = enumerate_stopping_times(tree, 0);
    CHECK(all.size() == 5);
    CHECK(enumerate_stopping_times(tree, 1).size() == 4);
    CHECK(enumerate_stopping_times(tree, 2).size() == 1);
    CHECK(count_stopping_times(tree, 0) == 5);
    CHECK(count_stopping_times(tree, 1) == 4);

    auto again = enumerate_stopping_times(tree, 0);
    REQUIRE(again.size() == all.size());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == again[i]);

    for (const auto& tau : all) CHECK(StoppingTime::constant(tree, 0).leq(tau));

    dtest::expect_code([&] { enumerate_stopping_times(tree, 0, 2); },
                       ErrorCode::EnumerationCapExceeded);
}

TEST_CASE("conditional values follow their anchor") {
    const FiltrationTree& tree = dtest::ce_tree();
    StoppingTime one = StoppingTime::constant(tree, 1);
    NodeId n1 = tree.node_by_label("n1");
    NodeId n2 = tree.node_by_label("n2");

    ConditionalValue v(one, {ExtReal(Rational(5, 2)), ExtReal(Rational(0))});
    CHECK(v.at_node(n1) == ExtReal(Rational(5, 2)));
    CHECK(v.at_node(n2) == ExtReal(Rational(0)));
    CHECK(v.on_path(tree.node_by_label("w3")) == ExtReal(Rational(0)));
    CHECK(v.all_finite());
    CHECK(v.all_geq(ExtReal(Rational(0))));

    ConditionalValue w = v + ConditionalValue::constant(one, ExtReal(Rational(1)));
    CHECK(w.at_node(n1) == ExtReal(Rational(7, 2)));
    CHECK((v - v).at_node(n1) == ExtReal(Rational(0)));
    CHECK(v.scaled(Rational(2)).at_node(n1) == ExtReal(Rational(5)));
    CHECK(min(v, ConditionalValue::constant(one, ExtReal(Rational(1)))).at_node(n1) ==
          ExtReal(Rational(1)));
    CHECK(v.approx_equal(v, Rational(1, 1000000000)));

    ConditionalValue at_zero =
        ConditionalValue::constant(StoppingTime::constant(tree, 0), ExtReal(Rational(1)));
    dtest::expect_code([&] { (void)(v + at_zero); }, ErrorCode::AnchorMismatch);
    dtest::expect_code([&] { v.at_node(tree.root()); }, ErrorCode::AnchorMismatch);
    dtest::expect_code(
        [&] { ConditionalValue(one, {ExtReal(Rational(1))}); },
        ErrorCode::DimensionMismatch);
}

TEST_CASE("conditional expectation and coarsening") {
    const FiltrationTree& tree = dtest::ce_tree();
    std::map<NodeId, Rational> leaf_x;
    leaf_x[tree.node_by_label("w1")] = 5;
    leaf_x[tree.node_by_label("w2")] = 1;
    leaf_x[tree.node_by_label("w3")] = 2;
    leaf_x[tree.node_by_label("w4")] = -1;

    StoppingTime one = StoppingTime::constant(tree, 1);
    ConditionalValue e1 = conditional_expectation(tree, leaf_x, one);
    CHECK(e1.at_node(tree.node_by_label("n1")) == ExtReal(Rational(3)));
    CHECK(e1.at_node(tree.node_by_label("n2")) == ExtReal(Rational(1, 2)));

    StoppingTime zero = StoppingTime::constant(tree, 0);
    ConditionalValue e0 = coarsen_expectation(e1, zero);
    CHECK(e0.at_node(tree.root()) == ExtReal(Rational(7, 4)));

    ConditionalValue with_inf(one, {ExtReal(Rational(5, 2)), ExtReal::neg_inf()});
    CHECK(coarsen_expectation(with_inf, zero).at_node(tree.root()) == ExtReal::neg_inf());
    CHECK_FALSE(with_inf.all_finite());
}
