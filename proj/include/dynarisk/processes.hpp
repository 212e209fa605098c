#pragma once

#include <map>
#include <vector>

#include "dynarisk/filtration.hpp"

namespace dynarisk {

// Evaluation window [lo, hi] between two stopping times, lo <= hi pointwise.
struct Window {
    StoppingTime lo;
    StoppingTime hi;

    Window() = default;
    Window(StoppingTime lo_, StoppingTime hi_);
    static Window full(const FiltrationTree& tree);
    static Window span(const FiltrationTree& tree, int from, int to);

    const FiltrationTree& tree() const { return lo.tree(); }
    bool operator==(const Window& o) const { return lo == o.lo && hi == o.hi; }
    std::string describe() const;
};

// Nodes n with m <= n such that the path from m to n does not pass through
// an hi-stop node before reaching n; m must be a node with the hi-stop on
// or below it (in particular any lo-stop node of a window).
std::vector<NodeId> window_nodes(const FiltrationTree& tree, NodeId m, const StoppingTime& hi);

// Bounded adapted process, stored in projected form: zero strictly before
// the window, frozen at the hi-stop value strictly after it.
class AdaptedProcess {
public:
    AdaptedProcess() = default;
    // Projects the raw per-node values onto the window.
    AdaptedProcess(const FiltrationTree& tree, Window window, std::vector<Rational> raw_values);
    static AdaptedProcess zero(const FiltrationTree& tree, Window window);
    static AdaptedProcess constant(const FiltrationTree& tree, Window window, const Rational& c);

    const FiltrationTree& tree() const { return *m_tree; }
    const Window& window() const { return m_window; }
    const Rational& at(NodeId n) const { return m_values[n]; }
    const std::vector<Rational>& values() const { return m_values; }

    AdaptedProcess operator+(const AdaptedProcess& o) const;
    AdaptedProcess operator-(const AdaptedProcess& o) const;
    AdaptedProcess scaled(const Rational& c) const;
    // X + m * 1_[lo, infty) with m constant per lo-atom.
    AdaptedProcess translated(const ConditionalValue& m) const;
    AdaptedProcess translated(const Rational& m) const;
    // 1_A * X for A a union of lo-atoms.
    AdaptedProcess masked(const std::vector<NodeId>& lo_atoms) const;

    bool operator==(const AdaptedProcess& o) const;

private:
    const FiltrationTree* m_tree = nullptr;
    Window m_window;
    std::vector<Rational> m_values;
};

// pi_{lo,hi}: reproject onto a (possibly different) window.
AdaptedProcess project(const AdaptedProcess& x, const Window& window);

// Per lo-atom supremum of |X| over the window.
ConditionalValue sup_norm(const AdaptedProcess& x, const Window& window);

// Increasing process started at zero, described by nonnegative increments.
class DensityProcess {
public:
    DensityProcess() = default;
    DensityProcess(const FiltrationTree& tree, std::vector<Rational> increments);
    static DensityProcess zero(const FiltrationTree& tree);

    const FiltrationTree& tree() const { return *m_tree; }
    const Rational& increment(NodeId n) const { return m_incr[n]; }
    const std::vector<Rational>& increments() const { return m_incr; }
    // Cumulative value a_t at node n: increments summed along the path.
    Rational cumulative(NodeId n) const;
    // a_{time(n)-1}: cumulative strictly before n.
    Rational cumulative_before(NodeId n) const;

    bool operator==(const DensityProcess& o) const { return m_tree == o.m_tree && m_incr == o.m_incr; }

private:
    const FiltrationTree* m_tree = nullptr;
    std::vector<Rational> m_incr;
};

// <X, a>_{lo,hi} = E[ sum_{t in [lo,hi]} X_t (a_t - a_{t-1}) | F_lo ].
ConditionalValue pairing(const AdaptedProcess& x, const DensityProcess& a, const Window& window);

// <1, a>_{lo,hi}, the conditional mass lying in the window.
ConditionalValue conditional_mass(const DensityProcess& a, const Window& window);
// Mass under a single anchor node (same quantity, one atom).
Rational conditional_mass_at(const DensityProcess& a, NodeId m, const StoppingTime& hi);

enum class DensityClass { NOT_IN_D, IN_D, IN_D_E };
const char* density_class_name(DensityClass c);

// IN_D: increments supported on the window with unit conditional mass at
// every lo-atom. IN_D_E additionally requires positive residual mass along
// every path, which for window-supported densities is a positive increment
// at every hi-stop node.
DensityClass classify_density(const DensityProcess& a, const Window& window);

// Strictly-positive-probability density on the terminal slice: leaf values
// with E[f] = 1, f >= 0 (strictly > 0 when required by the caller).
class TerminalDensity {
public:
    TerminalDensity() = default;
    TerminalDensity(const FiltrationTree& tree, std::map<NodeId, Rational> leaf_values);

    const FiltrationTree& tree() const { return *m_tree; }
    const Rational& at_leaf(NodeId leaf) const;
    const std::map<NodeId, Rational>& leaf_values() const { return m_values; }
    bool strictly_positive() const;

    // E[f | F_tau].
    ConditionalValue expectation(const StoppingTime& tau) const;
    Rational expectation_at(NodeId n) const;

    bool operator==(const TerminalDensity& o) const { return m_tree == o.m_tree && m_values == o.m_values; }

private:
    const FiltrationTree* m_tree = nullptr;
    std::map<NodeId, Rational> m_values;
};

} // namespace dynarisk
