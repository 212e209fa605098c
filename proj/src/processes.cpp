#include "dynarisk/processes.hpp"

#include <algorithm>

namespace dynarisk {

Window::Window(StoppingTime lo_, StoppingTime hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    require(lo.tree().same(hi.tree()), ErrorCode::TreeMismatch, "window ends on different trees");
    require(lo.leq(hi), ErrorCode::WindowOrderViolation, "window start after end");
}

Window Window::full(const FiltrationTree& tree) {
    return Window(StoppingTime::constant(tree, 0), StoppingTime::constant(tree, tree.horizon()));
}

Window Window::span(const FiltrationTree& tree, int from, int to) {
    return Window(StoppingTime::constant(tree, from), StoppingTime::constant(tree, to));
}

std::string Window::describe() const {
    return "[" + lo.describe() + ", " + hi.describe() + "]";
}

std::vector<NodeId> window_nodes(const FiltrationTree& tree, NodeId m, const StoppingTime& hi) {
    std::vector<NodeId> out;
    std::vector<NodeId> stack = {m};
    while (!stack.empty()) {
        NodeId v = stack.back();
        stack.pop_back();
        out.push_back(v);
        if (hi.stops_at(v)) continue; // boundary included, nothing beyond
        const auto& cs = tree.children(v);
        require(!cs.empty(), ErrorCode::WindowOrderViolation,
                "window end does not cover node '" + tree.label(v) + "'");
        for (auto it = cs.rbegin(); it != cs.rend(); ++it) stack.push_back(*it);
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

std::vector<Rational> project_values(const FiltrationTree& tree, const Window& w,
                                     const std::vector<Rational>& raw) {
    require(static_cast<int>(raw.size()) == tree.node_count(), ErrorCode::DimensionMismatch,
            "one value per node required");
    std::vector<Rational> out(raw.size());
    for (NodeId n = 0; n < tree.node_count(); ++n) {
        NodeId started = w.lo.stop_at_or_above(n);
        if (started == kNoNode) {
            out[n] = 0;
            continue;
        }
        NodeId frozen = w.hi.stop_at_or_above(n);
        out[n] = (frozen == kNoNode) ? raw[n] : raw[frozen];
    }
    return out;
}

} // namespace

AdaptedProcess::AdaptedProcess(const FiltrationTree& tree, Window window,
                               std::vector<Rational> raw_values)
    : m_tree(&tree), m_window(std::move(window)) {
    require(m_window.tree().same(tree), ErrorCode::TreeMismatch, "window on different tree");
    m_values = project_values(tree, m_window, raw_values);
}

AdaptedProcess AdaptedProcess::zero(const FiltrationTree& tree, Window window) {
    return AdaptedProcess(tree, std::move(window), std::vector<Rational>(tree.node_count(), Rational(0)));
}

AdaptedProcess AdaptedProcess::constant(const FiltrationTree& tree, Window window, const Rational& c) {
    return AdaptedProcess(tree, std::move(window), std::vector<Rational>(tree.node_count(), c));
}

AdaptedProcess AdaptedProcess::operator+(const AdaptedProcess& o) const {
    require(m_tree == o.m_tree, ErrorCode::TreeMismatch, "processes on different trees");
    require(m_window == o.m_window, ErrorCode::WindowViolation, "windows differ");
    std::vector<Rational> out(m_values.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = m_values[i] + o.m_values[i];
    return AdaptedProcess(*m_tree, m_window, std::move(out));
}

AdaptedProcess AdaptedProcess::operator-(const AdaptedProcess& o) const {
    require(m_tree == o.m_tree, ErrorCode::TreeMismatch, "processes on different trees");
    require(m_window == o.m_window, ErrorCode::WindowViolation, "windows differ");
    std::vector<Rational> out(m_values.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = m_values[i] - o.m_values[i];
    return AdaptedProcess(*m_tree, m_window, std::move(out));
}

AdaptedProcess AdaptedProcess::scaled(const Rational& c) const {
    std::vector<Rational> out(m_values.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = m_values[i] * c;
    return AdaptedProcess(*m_tree, m_window, std::move(out));
}

AdaptedProcess AdaptedProcess::translated(const ConditionalValue& m) const {
    require(m.anchor() == m_window.lo, ErrorCode::AnchorMismatch, "translation not anchored at window start");
    std::vector<Rational> out(m_values.size());
    for (NodeId n = 0; n < m_tree->node_count(); ++n) {
        NodeId started = m_window.lo.stop_at_or_above(n);
        out[n] = m_values[n];
        if (started != kNoNode) out[n] += m.at_node(started).value();
    }
    return AdaptedProcess(*m_tree, m_window, std::move(out));
}

AdaptedProcess AdaptedProcess::translated(const Rational& m) const {
    return translated(ConditionalValue::constant(m_window.lo, ExtReal(m)));
}

AdaptedProcess AdaptedProcess::masked(const std::vector<NodeId>& lo_atoms) const {
    for (NodeId a : lo_atoms)
        require(m_window.lo.stops_at(a), ErrorCode::NotAntichainSubset, "mask is not a union of window-start atoms");
    std::vector<Rational> out(m_values.size(), Rational(0));
    for (NodeId n = 0; n < m_tree->node_count(); ++n) {
        NodeId started = m_window.lo.stop_at_or_above(n);
        if (started == kNoNode) continue;
        if (std::find(lo_atoms.begin(), lo_atoms.end(), started) != lo_atoms.end())
            out[n] = m_values[n];
    }
    return AdaptedProcess(*m_tree, m_window, std::move(out));
}

bool AdaptedProcess::operator==(const AdaptedProcess& o) const {
    return m_tree == o.m_tree && m_window == o.m_window && m_values == o.m_values;
}

AdaptedProcess project(const AdaptedProcess& x, const Window& window) {
    require(window.tree().same(x.tree()), ErrorCode::TreeMismatch, "window on different tree");
    return AdaptedProcess(x.tree(), window, x.values());
}

ConditionalValue sup_norm(const AdaptedProcess& x, const Window& window) {
    const FiltrationTree& tree = x.tree();
    require(window.tree().same(tree), ErrorCode::TreeMismatch, "window on different tree");
    std::vector<ExtReal> out;
    out.reserve(window.lo.stop_nodes().size());
    for (NodeId m : window.lo.stop_nodes()) {
        Rational best(0);
        bool first = true;
        for (NodeId n : window_nodes(tree, m, window.hi)) {
            Rational v = abs(x.at(n));
            if (first || v > best) best = v;
            first = false;
        }
        out.push_back(ExtReal(best));
    }
    return ConditionalValue(window.lo, std::move(out));
}

DensityProcess::DensityProcess(const FiltrationTree& tree, std::vector<Rational> increments)
    : m_tree(&tree), m_incr(std::move(increments)) {
    require(static_cast<int>(m_incr.size()) == tree.node_count(), ErrorCode::DimensionMismatch,
            "one increment per node required");
    for (const auto& d : m_incr)
        require(d >= 0, ErrorCode::NotADensity, "negative increment");
}

DensityProcess DensityProcess::zero(const FiltrationTree& tree) {
    return DensityProcess(tree, std::vector<Rational>(tree.node_count(), Rational(0)));
}

Rational DensityProcess::cumulative(NodeId n) const {
    Rational acc(0);
    for (NodeId v = n; v != kNoNode; v = m_tree->parent(v)) acc += m_incr[v];
    return acc;
}

Rational DensityProcess::cumulative_before(NodeId n) const {
    return cumulative(n) - m_incr[n];
}

ConditionalValue pairing(const AdaptedProcess& x, const DensityProcess& a, const Window& window) {
    const FiltrationTree& tree = x.tree();
    require(a.tree().same(tree), ErrorCode::TreeMismatch, "density on different tree");
    require(window.tree().same(tree), ErrorCode::TreeMismatch, "window on different tree");
    std::vector<ExtReal> out;
    out.reserve(window.lo.stop_nodes().size());
    for (NodeId m : window.lo.stop_nodes()) {
        Rational acc(0);
        for (NodeId n : window_nodes(tree, m, window.hi))
            acc += tree.prob(n) * x.at(n) * a.increment(n);
        out.push_back(ExtReal(Rational(acc / tree.prob(m))));
    }
    return ConditionalValue(window.lo, std::move(out));
}

ConditionalValue conditional_mass(const DensityProcess& a, const Window& window) {
    const FiltrationTree& tree = a.tree();
    std::vector<ExtReal> out;
    out.reserve(window.lo.stop_nodes().size());
    for (NodeId m : window.lo.stop_nodes())
        out.push_back(ExtReal(conditional_mass_at(a, m, window.hi)));
    return ConditionalValue(window.lo, std::move(out));
}

Rational conditional_mass_at(const DensityProcess& a, NodeId m, const StoppingTime& hi) {
    const FiltrationTree& tree = a.tree();
    Rational acc(0);
    for (NodeId n : window_nodes(tree, m, hi)) acc += tree.prob(n) * a.increment(n);
    return Rational(acc / tree.prob(m));
}

const char* density_class_name(DensityClass c) {
    switch (c) {
        case DensityClass::NOT_IN_D: return "NOT_IN_D";
        case DensityClass::IN_D: return "IN_D";
        case DensityClass::IN_D_E: return "IN_D_E";
    }
    return "?";
}

DensityClass classify_density(const DensityProcess& a, const Window& window) {
    const FiltrationTree& tree = a.tree();
    require(window.tree().same(tree), ErrorCode::TreeMismatch, "window on different tree");
    std::vector<char> in_window(tree.node_count(), 0);
    for (NodeId m : window.lo.stop_nodes())
        for (NodeId n : window_nodes(tree, m, window.hi)) in_window[n] = 1;
    for (NodeId n = 0; n < tree.node_count(); ++n)
        if (!in_window[n] && a.increment(n) != 0) return DensityClass::NOT_IN_D;
    for (NodeId m : window.lo.stop_nodes())
        if (conditional_mass_at(a, m, window.hi) != 1) return DensityClass::NOT_IN_D;
    // Residual mass along every path stays positive iff the increment at
    // each window-end node is positive (support is inside the window).
    for (NodeId s : window.hi.stop_nodes())
        if (a.increment(s) == 0) return DensityClass::IN_D;
    return DensityClass::IN_D_E;
}

TerminalDensity::TerminalDensity(const FiltrationTree& tree, std::map<NodeId, Rational> leaf_values)
    : m_tree(&tree), m_values(std::move(leaf_values)) {
    require(m_values.size() == tree.leaves().size(), ErrorCode::DimensionMismatch,
            "one value per leaf required");
    Rational total(0);
    for (NodeId leaf : tree.leaves()) {
        auto it = m_values.find(leaf);
        require(it != m_values.end(), ErrorCode::DimensionMismatch, "missing leaf value");
        require(it->second >= 0, ErrorCode::NotADensity, "negative density value");
        total += tree.prob(leaf) * it->second;
    }
    require(total == 1, ErrorCode::NotADensity, "density has expectation " + rational_str(total));
}

const Rational& TerminalDensity::at_leaf(NodeId leaf) const {
    auto it = m_values.find(leaf);
    require(it != m_values.end(), ErrorCode::DimensionMismatch, "not a leaf");
    return it->second;
}

bool TerminalDensity::strictly_positive() const {
    for (const auto& [leaf, v] : m_values)
        if (v <= 0) return false;
    return true;
}

ConditionalValue TerminalDensity::expectation(const StoppingTime& tau) const {
    return conditional_expectation(*m_tree, m_values, tau);
}

Rational TerminalDensity::expectation_at(NodeId n) const {
    Rational acc(0);
    for (NodeId leaf : m_tree->leaves_under(n)) acc += m_tree->prob(leaf) * m_values.at(leaf);
    return Rational(acc / m_tree->prob(n));
}

} // namespace dynarisk
