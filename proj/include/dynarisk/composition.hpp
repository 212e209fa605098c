#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "dynarisk/processes.hpp"

namespace dynarisk {

// Residual conditional mass of a from node m (inclusive) to the end of the
// tree: <1, a>_{theta, infty} evaluated at the atom m.
Rational subtree_mass(const DensityProcess& a, NodeId m);

// Concatenation a (+)^theta_A b: follow a strictly before theta and off A
// (or where b has no residual mass); on A with positive residual b-mass,
// freeze a at theta-1 and continue with b's tail rescaled so the total
// residual mass matches a's. A is a subset of theta's stop nodes.
DensityProcess concat(const DensityProcess& a, const DensityProcess& b, const StoppingTime& theta,
                      const std::vector<NodeId>& A);

// f (x)^theta_A g for terminal densities: f off A and where E[g|F_theta]
// vanishes, otherwise g rescaled to f's conditional mean.
TerminalDensity paste_density(const TerminalDensity& f, const TerminalDensity& g,
                              const StoppingTime& theta, const std::vector<NodeId>& A);

// Normalized shift of a to the window starting at theta: increments from
// theta on divided by the residual conditional mass; the unit point mass at
// theta where that mass vanishes. Lands in D_{theta, horizon}.
DensityProcess normalize_from(const DensityProcess& a, const StoppingTime& theta);

enum class DensityMode { FINAL, STOPPED, WEIGHTED };

// FINAL: all mass on the terminal slice, Delta a_T = f.
DensityProcess build_density_final(const TerminalDensity& f);
// STOPPED: point mass E[f|F_xi] placed at the stopping time xi.
DensityProcess build_density_stopped(const TerminalDensity& f, const StoppingTime& xi);
// WEIGHTED: Delta a_t = mu_t E[f|F_t]; mu nonnegative over [0, horizon],
// summing to one.
DensityProcess build_density_weighted(const TerminalDensity& f, const std::vector<Rational>& mu);

// Finite scenario set inside D for a fixed window.
class ScenarioSet {
public:
    ScenarioSet(const FiltrationTree& tree, Window window, std::vector<DensityProcess> densities);

    const FiltrationTree& tree() const { return *m_tree; }
    const Window& window() const { return m_window; }
    const std::vector<DensityProcess>& densities() const { return m_densities; }
    int size() const { return static_cast<int>(m_densities.size()); }
    const DensityProcess& at(int i) const { return m_densities[i]; }
    bool all_extreme() const { return m_all_extreme; }
    bool contains(const DensityProcess& a) const;

private:
    const FiltrationTree* m_tree;
    Window m_window;
    std::vector<DensityProcess> m_densities;
    bool m_all_extreme = false; // every member IN_D_E
};

struct StabilityViolation {
    int a_index = 0;
    int b_index = 0;
    int time = 0;
    std::vector<NodeId> subset;
    DensityProcess escaped;                  // the concatenation that left the set
    std::vector<Rational> separator_values;  // per-node functional when hull mode refutes
};

struct StabilityReport {
    bool stable = true;
    bool exhaustive = true; // false when subset sampling hit the cap
    std::size_t checked = 0;
    std::vector<StabilityViolation> violations;
};

// Closure of Q under a (+)^s_A b for integer times s in the window and
// F_s-measurable A; finite-horizon reduction makes integer times
// sufficient for stopping-time stability. use_hull switches membership
// from exact identity to per-atom convex hull via LP.
StabilityReport check_stability(const ScenarioSet& Q, bool use_hull,
                                std::size_t subset_cap = 4096, unsigned long long seed = 1,
                                std::size_t max_violations = 4);

// Worklist closure of the generators under concatenation at integer times;
// nullopt when the closure exceeds max_size.
std::optional<std::vector<DensityProcess>> closure_under_concat(
    const FiltrationTree& tree, const Window& window, std::vector<DensityProcess> generators,
    std::size_t max_size = 512, std::size_t subset_cap = 4096);

// Same for terminal densities under (x): the stability notion for sets of
// measure densities.
std::optional<std::vector<TerminalDensity>> closure_under_paste(
    const FiltrationTree& tree, std::vector<TerminalDensity> generators,
    std::size_t max_size = 512, std::size_t subset_cap = 4096);

struct PasteStabilityReport {
    bool stable = true;
    bool exhaustive = true;
    std::size_t checked = 0;
    std::vector<int> witness; // f index, g index, time when unstable
};

PasteStabilityReport check_paste_stability(const FiltrationTree& tree,
                                           const std::vector<TerminalDensity>& P,
                                           std::size_t subset_cap = 4096);

} // namespace dynarisk
