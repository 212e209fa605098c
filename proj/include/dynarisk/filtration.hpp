#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dynarisk/rational.hpp"

namespace dynarisk {

using NodeId = int;
constexpr NodeId kNoNode = -1;

// Declarative tree description as it appears in fixtures. Node ids are
// strings; the root is the unique node with an empty parent.
struct TreeSpec {
    int horizon = 0;
    struct NodeSpec {
        std::string id;
        int time = 0;
        std::string parent; // empty for the root
    };
    std::vector<NodeSpec> nodes;
    std::map<std::string, Rational> leaf_probs;
};

// Finite filtered probability space as a rooted tree. Nodes at time t are
// the atoms of F_t; every leaf sits at the horizon and has positive
// probability; leaf probabilities sum to one exactly.
class FiltrationTree {
public:
    static FiltrationTree build(const TreeSpec& spec);

    int horizon() const { return m_horizon; }
    int node_count() const { return static_cast<int>(m_time.size()); }
    NodeId root() const { return 0; }

    int time(NodeId n) const { return m_time[n]; }
    NodeId parent(NodeId n) const { return m_parent[n]; }
    const std::vector<NodeId>& children(NodeId n) const { return m_children[n]; }
    bool is_leaf(NodeId n) const { return m_children[n].empty(); }
    const Rational& prob(NodeId n) const { return m_prob[n]; }
    const std::string& label(NodeId n) const { return m_label[n]; }
    NodeId node_by_label(const std::string& label) const;

    const std::vector<NodeId>& nodes_at_time(int t) const;
    const std::vector<NodeId>& leaves() const { return m_leaves; }

    // Ancestor of n at time t <= time(n); n itself when t == time(n).
    NodeId ancestor_at(NodeId n, int t) const;
    bool is_ancestor_or_self(NodeId anc, NodeId n) const;
    std::vector<NodeId> leaves_under(NodeId n) const;

    // Identity comparison: fixtures are loaded once and shared by pointer.
    bool same(const FiltrationTree& o) const { return this == &o; }

private:
    int m_horizon = 0;
    std::vector<int> m_time;
    std::vector<NodeId> m_parent;
    std::vector<std::vector<NodeId>> m_children;
    std::vector<Rational> m_prob;
    std::vector<std::string> m_label;
    std::vector<std::vector<NodeId>> m_by_time;
    std::vector<NodeId> m_leaves;
};

// Stopping time as the antichain of nodes where it stops: every root-leaf
// path meets the stop set exactly once.
class StoppingTime {
public:
    StoppingTime() : m_tree(nullptr) {}
    StoppingTime(const FiltrationTree& tree, std::vector<NodeId> stop_nodes);

    static StoppingTime constant(const FiltrationTree& tree, int t);

    const FiltrationTree& tree() const { return *m_tree; }
    const std::vector<NodeId>& stop_nodes() const { return m_stop; }
    bool stops_at(NodeId n) const { return m_is_stop[n]; }

    // The stop node on the path through n, if it is n or one of its
    // ancestors; kNoNode when the stop lies strictly below n.
    NodeId stop_at_or_above(NodeId n) const;
    // The unique stop node on the path to the given leaf.
    NodeId stop_on_path(NodeId leaf) const;
    int time_on_path(NodeId leaf) const;

    int min_time() const;
    int max_time() const;
    bool is_constant(int t) const;

    // Pointwise order: this <= other on every path.
    bool leq(const StoppingTime& other) const;
    bool operator==(const StoppingTime& other) const;

    std::string describe() const;

private:
    const FiltrationTree* m_tree;
    std::vector<NodeId> m_stop;
    std::vector<char> m_is_stop;
};

// F_tau-measurable extended-real value: one entry per stop node of the
// anchor. Arithmetic requires matching anchors.
class ConditionalValue {
public:
    ConditionalValue() = default;
    ConditionalValue(StoppingTime anchor, std::vector<ExtReal> values);
    static ConditionalValue constant(const StoppingTime& anchor, const ExtReal& v);

    const StoppingTime& anchor() const { return m_anchor; }
    const std::vector<ExtReal>& values() const { return m_values; }
    int size() const { return static_cast<int>(m_values.size()); }

    const ExtReal& at_index(int i) const { return m_values[i]; }
    const ExtReal& at_node(NodeId n) const;
    // Value at the atom containing the given leaf.
    const ExtReal& on_path(NodeId leaf) const;

    ConditionalValue operator+(const ConditionalValue& o) const;
    ConditionalValue operator-(const ConditionalValue& o) const;
    ConditionalValue scaled(const Rational& c) const;

    bool operator==(const ConditionalValue& o) const;
    bool all_finite() const;
    bool all_geq(const ExtReal& bound) const;
    bool all_leq(const ConditionalValue& o) const;
    bool approx_equal(const ConditionalValue& o, const Rational& tol) const;

    std::string str() const;

private:
    void check_anchor(const ConditionalValue& o) const;

    StoppingTime m_anchor;
    std::vector<ExtReal> m_values;
};

ConditionalValue min(const ConditionalValue& a, const ConditionalValue& b);

// E[f | F_tau] for a leaf-indexed function f (values by leaf NodeId).
ConditionalValue conditional_expectation(const FiltrationTree& tree,
                                         const std::map<NodeId, Rational>& leaf_values,
                                         const StoppingTime& tau);

// E[v | F_tau] for v anchored at a later stopping time theta >= tau.
// NegInf entries absorb: any atom mixing in -inf maps to -inf.
ConditionalValue coarsen_expectation(const ConditionalValue& v, const StoppingTime& tau);

// All stopping times theta with floor <= theta <= horizon, enumerated
// depth-first in a deterministic order. Throws EnumerationCapExceeded when
// the count would exceed cap.
std::vector<StoppingTime> enumerate_stopping_times(const FiltrationTree& tree, int floor,
                                                   std::size_t cap = 10000);

// Count without materializing; saturates at cap + 1.
std::size_t count_stopping_times(const FiltrationTree& tree, int floor, std::size_t cap = 10000);

} // namespace dynarisk
