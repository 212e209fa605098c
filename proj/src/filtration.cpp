#include "dynarisk/filtration.hpp"

#include <algorithm>
#include <sstream>

namespace dynarisk {

FiltrationTree FiltrationTree::build(const TreeSpec& spec) {
    FiltrationTree t;
    require(spec.horizon >= 0, ErrorCode::NonTreeShape, "negative horizon");
    require(!spec.nodes.empty(), ErrorCode::NonTreeShape, "no nodes");
    t.m_horizon = spec.horizon;

    std::map<std::string, NodeId> by_label;
    // Root first, then stable by (time, declaration order).
    std::vector<int> order(spec.nodes.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return spec.nodes[a].time < spec.nodes[b].time;
    });

    int n = static_cast<int>(spec.nodes.size());
    t.m_time.resize(n);
    t.m_parent.resize(n);
    t.m_children.resize(n);
    t.m_prob.assign(n, Rational(0));
    t.m_label.resize(n);

    for (int idx = 0; idx < n; ++idx) {
        const auto& ns = spec.nodes[order[idx]];
        require(!by_label.count(ns.id), ErrorCode::NonTreeShape, "duplicate node id '" + ns.id + "'");
        by_label[ns.id] = idx;
        t.m_time[idx] = ns.time;
        t.m_label[idx] = ns.id;
    }
    int root_count = 0;
    for (int idx = 0; idx < n; ++idx) {
        const auto& ns = spec.nodes[order[idx]];
        if (ns.parent.empty()) {
            ++root_count;
            require(ns.time == 0, ErrorCode::NonTreeShape, "root not at time 0");
            t.m_parent[idx] = kNoNode;
        } else {
            auto it = by_label.find(ns.parent);
            require(it != by_label.end(), ErrorCode::NonTreeShape,
                    "unknown parent '" + ns.parent + "'");
            NodeId p = it->second;
            require(t.m_time[p] == ns.time - 1, ErrorCode::NonTreeShape,
                    "node '" + ns.id + "' not one step below its parent");
            t.m_parent[idx] = p;
            t.m_children[p].push_back(idx);
        }
    }
    require(root_count == 1, ErrorCode::NonTreeShape, "need exactly one root");

    t.m_by_time.assign(t.m_horizon + 1, {});
    for (int idx = 0; idx < n; ++idx) {
        require(t.m_time[idx] >= 0 && t.m_time[idx] <= t.m_horizon, ErrorCode::NonTreeShape,
                "node time outside [0, horizon]");
        t.m_by_time[t.m_time[idx]].push_back(idx);
        if (t.m_children[idx].empty()) {
            require(t.m_time[idx] == t.m_horizon, ErrorCode::NonTreeShape,
                    "leaf '" + t.m_label[idx] + "' not at the horizon");
            t.m_leaves.push_back(idx);
        }
    }

    Rational total(0);
    for (NodeId leaf : t.m_leaves) {
        auto it = spec.leaf_probs.find(t.m_label[leaf]);
        require(it != spec.leaf_probs.end(), ErrorCode::ProbNotNormalized,
                "missing probability for leaf '" + t.m_label[leaf] + "'");
        require(it->second > 0, ErrorCode::ZeroProbabilityNode,
                "leaf '" + t.m_label[leaf] + "' has nonpositive probability");
        t.m_prob[leaf] = it->second;
        total += it->second;
    }
    require(total == 1, ErrorCode::ProbNotNormalized, "leaf probabilities sum to " + rational_str(total));
    require(spec.leaf_probs.size() == t.m_leaves.size(), ErrorCode::ProbNotNormalized,
            "probabilities given for non-leaf nodes");

    // Node probabilities bottom-up; positive by construction.
    for (int time = t.m_horizon - 1; time >= 0; --time) {
        for (NodeId v : t.m_by_time[time]) {
            Rational p(0);
            for (NodeId c : t.m_children[v]) p += t.m_prob[c];
            t.m_prob[v] = p;
        }
    }
    return t;
}

NodeId FiltrationTree::node_by_label(const std::string& label) const {
    for (NodeId n = 0; n < node_count(); ++n)
        if (m_label[n] == label) return n;
    fail(ErrorCode::FixtureParseError, "unknown node id '" + label + "'");
}

const std::vector<NodeId>& FiltrationTree::nodes_at_time(int t) const {
    require(t >= 0 && t <= m_horizon, ErrorCode::WindowViolation, "time outside [0, horizon]");
    return m_by_time[t];
}

NodeId FiltrationTree::ancestor_at(NodeId n, int t) const {
    require(t >= 0 && t <= time(n), ErrorCode::WindowViolation, "ancestor time after node");
    while (time(n) > t) n = parent(n);
    return n;
}

bool FiltrationTree::is_ancestor_or_self(NodeId anc, NodeId n) const {
    if (time(anc) > time(n)) return false;
    return ancestor_at(n, time(anc)) == anc;
}

std::vector<NodeId> FiltrationTree::leaves_under(NodeId n) const {
    std::vector<NodeId> out;
    std::vector<NodeId> stack = {n};
    while (!stack.empty()) {
        NodeId v = stack.back();
        stack.pop_back();
        if (is_leaf(v)) {
            out.push_back(v);
            continue;
        }
        const auto& cs = children(v);
        for (auto it = cs.rbegin(); it != cs.rend(); ++it) stack.push_back(*it);
    }
    return out;
}

StoppingTime::StoppingTime(const FiltrationTree& tree, std::vector<NodeId> stop_nodes)
    : m_tree(&tree), m_stop(std::move(stop_nodes)) {
    std::sort(m_stop.begin(), m_stop.end());
    m_is_stop.assign(tree.node_count(), 0);
    for (NodeId n : m_stop) {
        require(n >= 0 && n < tree.node_count(), ErrorCode::NotAntichain, "stop node out of range");
        require(!m_is_stop[n], ErrorCode::NotAntichain, "duplicate stop node");
        m_is_stop[n] = 1;
    }
    for (NodeId leaf : tree.leaves()) {
        int hits = 0;
        for (NodeId v = leaf; v != kNoNode; v = tree.parent(v)) hits += m_is_stop[v];
        require(hits == 1, ErrorCode::NotAntichain,
                "path through '" + tree.label(leaf) + "' meets the stop set " + std::to_string(hits) +
                    " times");
    }
}

StoppingTime StoppingTime::constant(const FiltrationTree& tree, int t) {
    require(t >= 0 && t <= tree.horizon(), ErrorCode::WindowViolation, "constant time outside tree");
    return StoppingTime(tree, tree.nodes_at_time(t));
}

NodeId StoppingTime::stop_at_or_above(NodeId n) const {
    for (NodeId v = n; v != kNoNode; v = m_tree->parent(v))
        if (m_is_stop[v]) return v;
    return kNoNode;
}

NodeId StoppingTime::stop_on_path(NodeId leaf) const {
    NodeId s = stop_at_or_above(leaf);
    require(s != kNoNode, ErrorCode::NotAntichain, "no stop on path");
    return s;
}

int StoppingTime::time_on_path(NodeId leaf) const {
    return m_tree->time(stop_on_path(leaf));
}

int StoppingTime::min_time() const {
    int t = m_tree->horizon();
    for (NodeId n : m_stop) t = std::min(t, m_tree->time(n));
    return t;
}

int StoppingTime::max_time() const {
    int t = 0;
    for (NodeId n : m_stop) t = std::max(t, m_tree->time(n));
    return t;
}

bool StoppingTime::is_constant(int t) const {
    return min_time() == t && max_time() == t;
}

bool StoppingTime::leq(const StoppingTime& other) const {
    require(m_tree->same(other.tree()), ErrorCode::TreeMismatch, "stopping times on different trees");
    for (NodeId leaf : m_tree->leaves())
        if (time_on_path(leaf) > other.time_on_path(leaf)) return false;
    return true;
}

bool StoppingTime::operator==(const StoppingTime& other) const {
    return m_tree->same(other.tree()) && m_stop == other.m_stop;
}

std::string StoppingTime::describe() const {
    if (is_constant(min_time())) return "t=" + std::to_string(min_time());
    std::ostringstream os;
    os << "{";
    for (size_t i = 0; i < m_stop.size(); ++i) {
        if (i) os << ",";
        os << m_tree->label(m_stop[i]);
    }
    os << "}";
    return os.str();
}

ConditionalValue::ConditionalValue(StoppingTime anchor, std::vector<ExtReal> values)
    : m_anchor(std::move(anchor)), m_values(std::move(values)) {
    require(m_values.size() == m_anchor.stop_nodes().size(), ErrorCode::DimensionMismatch,
            "one value per anchor atom required");
}

ConditionalValue ConditionalValue::constant(const StoppingTime& anchor, const ExtReal& v) {
    return ConditionalValue(anchor, std::vector<ExtReal>(anchor.stop_nodes().size(), v));
}

const ExtReal& ConditionalValue::at_node(NodeId n) const {
    const auto& stops = m_anchor.stop_nodes();
    auto it = std::lower_bound(stops.begin(), stops.end(), n);
    require(it != stops.end() && *it == n, ErrorCode::AnchorMismatch, "node is not an anchor atom");
    return m_values[it - stops.begin()];
}

const ExtReal& ConditionalValue::on_path(NodeId leaf) const {
    return at_node(m_anchor.stop_on_path(leaf));
}

void ConditionalValue::check_anchor(const ConditionalValue& o) const {
    require(m_anchor == o.m_anchor, ErrorCode::AnchorMismatch, "anchors differ");
}

ConditionalValue ConditionalValue::operator+(const ConditionalValue& o) const {
    check_anchor(o);
    std::vector<ExtReal> out(m_values.size());
    for (size_t i = 0; i < m_values.size(); ++i) out[i] = m_values[i] + o.m_values[i];
    return ConditionalValue(m_anchor, std::move(out));
}

ConditionalValue ConditionalValue::operator-(const ConditionalValue& o) const {
    check_anchor(o);
    std::vector<ExtReal> out(m_values.size());
    for (size_t i = 0; i < m_values.size(); ++i) out[i] = m_values[i] - o.m_values[i];
    return ConditionalValue(m_anchor, std::move(out));
}

ConditionalValue ConditionalValue::scaled(const Rational& c) const {
    std::vector<ExtReal> out(m_values.size());
    for (size_t i = 0; i < m_values.size(); ++i) out[i] = m_values[i].scaled(c);
    return ConditionalValue(m_anchor, std::move(out));
}

bool ConditionalValue::operator==(const ConditionalValue& o) const {
    return m_anchor == o.m_anchor && m_values == o.m_values;
}

bool ConditionalValue::all_finite() const {
    for (const auto& v : m_values)
        if (!v.is_finite()) return false;
    return true;
}

bool ConditionalValue::all_geq(const ExtReal& bound) const {
    for (const auto& v : m_values)
        if (v < bound) return false;
    return true;
}

bool ConditionalValue::all_leq(const ConditionalValue& o) const {
    check_anchor(o);
    for (size_t i = 0; i < m_values.size(); ++i)
        if (!(m_values[i] <= o.m_values[i])) return false;
    return true;
}

bool ConditionalValue::approx_equal(const ConditionalValue& o, const Rational& tol) const {
    if (!(m_anchor == o.m_anchor)) return false;
    for (size_t i = 0; i < m_values.size(); ++i)
        if (!m_values[i].approx_equal(o.m_values[i], tol)) return false;
    return true;
}

std::string ConditionalValue::str() const {
    std::ostringstream os;
    os << "{";
    const auto& stops = m_anchor.stop_nodes();
    for (size_t i = 0; i < m_values.size(); ++i) {
        if (i) os << ", ";
        os << m_anchor.tree().label(stops[i]) << ": " << m_values[i].str();
    }
    os << "}";
    return os.str();
}

ConditionalValue min(const ConditionalValue& a, const ConditionalValue& b) {
    require(a.anchor() == b.anchor(), ErrorCode::AnchorMismatch, "anchors differ");
    std::vector<ExtReal> out(a.values().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = min(a.values()[i], b.values()[i]);
    return ConditionalValue(a.anchor(), std::move(out));
}

ConditionalValue conditional_expectation(const FiltrationTree& tree,
                                         const std::map<NodeId, Rational>& leaf_values,
                                         const StoppingTime& tau) {
    require(tau.tree().same(tree), ErrorCode::TreeMismatch, "anchor on different tree");
    std::vector<ExtReal> out;
    out.reserve(tau.stop_nodes().size());
    for (NodeId m : tau.stop_nodes()) {
        Rational acc(0);
        for (NodeId leaf : tree.leaves_under(m)) {
            auto it = leaf_values.find(leaf);
            require(it != leaf_values.end(), ErrorCode::DimensionMismatch, "missing leaf value");
            acc += tree.prob(leaf) * it->second;
        }
        out.push_back(ExtReal(Rational(acc / tree.prob(m))));
    }
    return ConditionalValue(tau, std::move(out));
}

ConditionalValue coarsen_expectation(const ConditionalValue& v, const StoppingTime& tau) {
    const FiltrationTree& tree = tau.tree();
    require(v.anchor().tree().same(tree), ErrorCode::TreeMismatch, "anchors on different trees");
    require(tau.leq(v.anchor()), ErrorCode::WindowOrderViolation, "coarsening target not earlier");
    std::vector<ExtReal> out;
    out.reserve(tau.stop_nodes().size());
    for (NodeId m : tau.stop_nodes()) {
        // Theta stop nodes under m partition m.
        Rational acc(0);
        bool neg = false, pos = false;
        for (NodeId s : v.anchor().stop_nodes()) {
            if (!tree.is_ancestor_or_self(m, s)) continue;
            const ExtReal& val = v.at_node(s);
            if (val.is_neg_inf()) neg = true;
            else if (val.is_pos_inf()) pos = true;
            else acc += tree.prob(s) * val.value();
        }
        if (neg && pos) throw std::logic_error("coarsen_expectation: mixed infinities");
        if (neg) out.push_back(ExtReal::neg_inf());
        else if (pos) out.push_back(ExtReal::pos_inf());
        else out.push_back(ExtReal(Rational(acc / tree.prob(m))));
    }
    return ConditionalValue(tau, std::move(out));
}

namespace {

std::size_t count_rec(const FiltrationTree& tree, NodeId n, int floor, std::size_t cap) {
    if (tree.is_leaf(n)) return 1; // must stop at the leaf
    std::size_t sub = 1;
    for (NodeId c : tree.children(n)) {
        std::size_t cc = count_rec(tree, c, floor, cap);
        if (sub > (cap + 1) / cc) return cap + 1; // saturate before overflow
        sub *= cc;
        if (sub > cap) return cap + 1;
    }
    std::size_t total = sub;
    if (tree.time(n) >= floor) total += 1; // or stop here
    return total > cap ? cap + 1 : total;
}

void enumerate_rec(const FiltrationTree& tree, NodeId n, int floor,
                   std::vector<std::vector<std::vector<NodeId>>>& memo) {
    // memo[n] holds the list of stop-sets for the subtree rooted at n.
    std::vector<std::vector<NodeId>> result;
    if (tree.is_leaf(n)) {
        result.push_back({n});
    } else {
        std::vector<std::vector<std::vector<NodeId>>> per_child;
        for (NodeId c : tree.children(n)) {
            enumerate_rec(tree, c, floor, memo);
            per_child.push_back(memo[c]);
        }
        // Cartesian product over children.
        std::vector<std::vector<NodeId>> combos = {{}};
        for (const auto& options : per_child) {
            std::vector<std::vector<NodeId>> next;
            next.reserve(combos.size() * options.size());
            for (const auto& base : combos)
                for (const auto& opt : options) {
                    auto merged = base;
                    merged.insert(merged.end(), opt.begin(), opt.end());
                    next.push_back(std::move(merged));
                }
            combos = std::move(next);
        }
        result = std::move(combos);
        if (tree.time(n) >= floor) result.push_back({n});
    }
    memo[n] = std::move(result);
}

} // namespace

std::size_t count_stopping_times(const FiltrationTree& tree, int floor, std::size_t cap) {
    require(floor >= 0 && floor <= tree.horizon(), ErrorCode::WindowViolation, "floor outside tree");
    return count_rec(tree, tree.root(), floor, cap);
}

std::vector<StoppingTime> enumerate_stopping_times(const FiltrationTree& tree, int floor,
                                                   std::size_t cap) {
    std::size_t count = count_stopping_times(tree, floor, cap);
    require(count <= cap, ErrorCode::EnumerationCapExceeded,
            "stopping time count exceeds cap " + std::to_string(cap));
    std::vector<std::vector<std::vector<NodeId>>> memo(tree.node_count());
    enumerate_rec(tree, tree.root(), floor, memo);
    std::vector<StoppingTime> out;
    out.reserve(memo[tree.root()].size());
    for (auto& stops : memo[tree.root()]) out.emplace_back(tree, std::move(stops));
    return out;
}

} // namespace dynarisk
