#include "dynarisk/composition.hpp"

#include <algorithm>

#include "dynarisk/optim.hpp"

namespace dynarisk {

Rational subtree_mass(const DensityProcess& a, NodeId m) {
    const FiltrationTree& tree = a.tree();
    Rational acc(0);
    std::vector<NodeId> stack = {m};
    while (!stack.empty()) {
        NodeId v = stack.back();
        stack.pop_back();
        acc += tree.prob(v) * a.increment(v);
        for (NodeId c : tree.children(v)) stack.push_back(c);
    }
    return Rational(acc / tree.prob(m));
}

namespace {

void check_subset(const StoppingTime& theta, const std::vector<NodeId>& A) {
    for (NodeId n : A)
        require(theta.stops_at(n), ErrorCode::NotAntichainSubset,
                "subset node is not a stop node of theta");
}

} // namespace

DensityProcess concat(const DensityProcess& a, const DensityProcess& b, const StoppingTime& theta,
                      const std::vector<NodeId>& A) {
    const FiltrationTree& tree = a.tree();
    require(b.tree().same(tree) && theta.tree().same(tree), ErrorCode::TreeMismatch,
            "concat inputs on different trees");
    check_subset(theta, A);

    std::vector<char> in_A(tree.node_count(), 0);
    for (NodeId n : A) in_A[n] = 1;

    // Cumulative result values, then difference along edges.
    std::vector<Rational> cum(tree.node_count());
    std::vector<Rational> ratio(tree.node_count()); // per switched stop node
    std::vector<char> switched(tree.node_count(), 0);
    for (NodeId m : theta.stop_nodes()) {
        if (!in_A[m]) continue;
        Rational mass_b = subtree_mass(b, m);
        if (mass_b == 0) continue;
        switched[m] = 1;
        ratio[m] = subtree_mass(a, m) / mass_b;
    }
    for (NodeId n = 0; n < tree.node_count(); ++n) {
        NodeId m = theta.stop_at_or_above(n);
        if (m == kNoNode || !switched[m]) {
            cum[n] = a.cumulative(n);
        } else {
            cum[n] = a.cumulative_before(m) + ratio[m] * (b.cumulative(n) - b.cumulative_before(m));
        }
    }
    std::vector<Rational> incr(tree.node_count());
    for (NodeId n = 0; n < tree.node_count(); ++n) {
        NodeId p = tree.parent(n);
        incr[n] = p == kNoNode ? cum[n] : cum[n] - cum[p];
    }
    return DensityProcess(tree, std::move(incr));
}

TerminalDensity paste_density(const TerminalDensity& f, const TerminalDensity& g,
                              const StoppingTime& theta, const std::vector<NodeId>& A) {
    const FiltrationTree& tree = f.tree();
    require(g.tree().same(tree) && theta.tree().same(tree), ErrorCode::TreeMismatch,
            "paste inputs on different trees");
    check_subset(theta, A);

    std::vector<char> in_A(tree.node_count(), 0);
    for (NodeId n : A) in_A[n] = 1;

    std::map<NodeId, Rational> out;
    for (NodeId m : theta.stop_nodes()) {
        bool switch_here = in_A[m];
        Rational ef, eg;
        if (switch_here) {
            eg = g.expectation_at(m);
            if (eg == 0) switch_here = false;
            else ef = f.expectation_at(m);
        }
        for (NodeId leaf : tree.leaves_under(m)) {
            if (switch_here) out[leaf] = ef / eg * g.at_leaf(leaf);
            else out[leaf] = f.at_leaf(leaf);
        }
    }
    return TerminalDensity(tree, std::move(out));
}

DensityProcess normalize_from(const DensityProcess& a, const StoppingTime& theta) {
    const FiltrationTree& tree = a.tree();
    require(theta.tree().same(tree), ErrorCode::TreeMismatch, "theta on different tree");
    std::vector<Rational> incr(tree.node_count(), Rational(0));
    for (NodeId m : theta.stop_nodes()) {
        Rational mass = subtree_mass(a, m);
        if (mass == 0) {
            incr[m] = 1;
            continue;
        }
        std::vector<NodeId> stack = {m};
        while (!stack.empty()) {
            NodeId v = stack.back();
            stack.pop_back();
            incr[v] = a.increment(v) / mass;
            for (NodeId c : tree.children(v)) stack.push_back(c);
        }
    }
    return DensityProcess(tree, std::move(incr));
}

DensityProcess build_density_final(const TerminalDensity& f) {
    const FiltrationTree& tree = f.tree();
    std::vector<Rational> incr(tree.node_count(), Rational(0));
    for (NodeId leaf : tree.leaves()) incr[leaf] = f.at_leaf(leaf);
    return DensityProcess(tree, std::move(incr));
}

DensityProcess build_density_stopped(const TerminalDensity& f, const StoppingTime& xi) {
    const FiltrationTree& tree = f.tree();
    require(xi.tree().same(tree), ErrorCode::TreeMismatch, "xi on different tree");
    std::vector<Rational> incr(tree.node_count(), Rational(0));
    for (NodeId m : xi.stop_nodes()) incr[m] = f.expectation_at(m);
    return DensityProcess(tree, std::move(incr));
}

DensityProcess build_density_weighted(const TerminalDensity& f, const std::vector<Rational>& mu) {
    const FiltrationTree& tree = f.tree();
    require(static_cast<int>(mu.size()) == tree.horizon() + 1, ErrorCode::BadWeights,
            "need one weight per time in [0, horizon]");
    Rational total(0);
    for (const auto& w : mu) {
        require(w >= 0, ErrorCode::BadWeights, "negative weight");
        total += w;
    }
    require(total == 1, ErrorCode::BadWeights, "weights sum to " + rational_str(total));
    Rational tail(0);
    for (auto it = mu.rbegin(); it != mu.rend(); ++it) {
        tail += *it;
        require(tail > 0, ErrorCode::BadWeights, "weight tail sums must stay positive");
    }
    std::vector<Rational> incr(tree.node_count(), Rational(0));
    for (NodeId n = 0; n < tree.node_count(); ++n) {
        const Rational& w = mu[tree.time(n)];
        if (w == 0) continue;
        incr[n] = w * f.expectation_at(n);
    }
    return DensityProcess(tree, std::move(incr));
}

ScenarioSet::ScenarioSet(const FiltrationTree& tree, Window window,
                         std::vector<DensityProcess> densities)
    : m_tree(&tree), m_window(std::move(window)), m_densities(std::move(densities)) {
    require(m_window.tree().same(tree), ErrorCode::TreeMismatch, "window on different tree");
    require(!m_densities.empty(), ErrorCode::EmptyScenarioSet, "scenario set is empty");
    m_all_extreme = true;
    for (const auto& d : m_densities) {
        require(d.tree().same(tree), ErrorCode::TreeMismatch, "scenario on different tree");
        DensityClass c = classify_density(d, m_window);
        require(c != DensityClass::NOT_IN_D, ErrorCode::NotADensity,
                "scenario is not in D for the window");
        if (c != DensityClass::IN_D_E) m_all_extreme = false;
    }
}

bool ScenarioSet::contains(const DensityProcess& a) const {
    for (const auto& d : m_densities)
        if (d == a) return true;
    return false;
}

namespace {

// Per lo-atom hull membership of the increment restriction.
bool hull_contains(const ScenarioSet& Q, const DensityProcess& c,
                   std::vector<Rational>* separator_out) {
    const FiltrationTree& tree = Q.tree();
    for (NodeId r : Q.window().lo.stop_nodes()) {
        std::vector<NodeId> support = window_nodes(tree, r, Q.window().hi);
        std::vector<Rational> point;
        point.reserve(support.size());
        for (NodeId n : support) point.push_back(c.increment(n));
        std::vector<std::vector<Rational>> gens;
        gens.reserve(Q.size());
        for (const auto& q : Q.densities()) {
            std::vector<Rational> v;
            v.reserve(support.size());
            for (NodeId n : support) v.push_back(q.increment(n));
            gens.push_back(std::move(v));
        }
        HullResult res = hull_membership(point, gens);
        if (!res.inside) {
            if (separator_out) {
                separator_out->assign(tree.node_count(), Rational(0));
                for (size_t i = 0; i < support.size(); ++i)
                    (*separator_out)[support[i]] = res.separator[i];
            }
            return false;
        }
    }
    return true;
}

// Deterministic subset stream: exhaustive when 2^k fits the cap, otherwise
// singletons, the full set, and seeded random subsets.
std::vector<std::vector<NodeId>> subsets_of_atoms(const std::vector<NodeId>& atoms,
                                                  std::size_t cap, unsigned long long seed,
                                                  bool* exhaustive) {
    std::vector<std::vector<NodeId>> out;
    std::size_t k = atoms.size();
    if (k < 63 && (std::size_t(1) << k) <= cap) {
        for (std::size_t mask = 1; mask < (std::size_t(1) << k); ++mask) {
            std::vector<NodeId> s;
            for (std::size_t i = 0; i < k; ++i)
                if (mask & (std::size_t(1) << i)) s.push_back(atoms[i]);
            out.push_back(std::move(s));
        }
        return out;
    }
    *exhaustive = false;
    for (NodeId n : atoms) out.push_back({n});
    out.push_back(atoms);
    Rng rng(seed);
    while (out.size() < cap) {
        std::vector<NodeId> s;
        for (NodeId n : atoms)
            if (rng.coin()) s.push_back(n);
        if (!s.empty()) out.push_back(std::move(s));
    }
    return out;
}

} // namespace

StabilityReport check_stability(const ScenarioSet& Q, bool use_hull, std::size_t subset_cap,
                                unsigned long long seed, std::size_t max_violations) {
    const FiltrationTree& tree = Q.tree();
    StabilityReport rep;
    int s_from = Q.window().lo.max_time();
    int s_to = Q.window().hi.min_time();
    for (int s = s_from; s <= s_to; ++s) {
        StoppingTime theta = StoppingTime::constant(tree, s);
        bool exhaustive = true;
        auto subsets = subsets_of_atoms(tree.nodes_at_time(s), subset_cap, seed + s, &exhaustive);
        if (!exhaustive) rep.exhaustive = false;
        for (int i = 0; i < Q.size(); ++i) {
            for (int j = 0; j < Q.size(); ++j) {
                for (const auto& A : subsets) {
                    DensityProcess c = concat(Q.at(i), Q.at(j), theta, A);
                    ++rep.checked;
                    bool inside;
                    std::vector<Rational> separator;
                    if (use_hull) inside = hull_contains(Q, c, &separator);
                    else inside = Q.contains(c);
                    if (!inside) {
                        rep.stable = false;
                        StabilityViolation v;
                        v.a_index = i;
                        v.b_index = j;
                        v.time = s;
                        v.subset = A;
                        v.escaped = c;
                        v.separator_values = std::move(separator);
                        rep.violations.push_back(std::move(v));
                        if (rep.violations.size() >= max_violations) return rep;
                    }
                }
            }
        }
    }
    return rep;
}

std::optional<std::vector<DensityProcess>> closure_under_concat(
    const FiltrationTree& tree, const Window& window, std::vector<DensityProcess> generators,
    std::size_t max_size, std::size_t subset_cap) {
    std::vector<DensityProcess> set = std::move(generators);
    auto member = [&set](const DensityProcess& d) {
        return std::find(set.begin(), set.end(), d) != set.end();
    };
    int s_from = window.lo.max_time();
    int s_to = window.hi.min_time();
    bool grew = true;
    while (grew) {
        grew = false;
        for (int s = s_from; s <= s_to; ++s) {
            StoppingTime theta = StoppingTime::constant(tree, s);
            bool exhaustive = true;
            auto subsets = subsets_of_atoms(tree.nodes_at_time(s), subset_cap, 1, &exhaustive);
            require(exhaustive, ErrorCode::SubsetEnumerationCapExceeded,
                    "closure needs exhaustive subsets at time " + std::to_string(s));
            for (std::size_t i = 0; i < set.size(); ++i) {
                for (std::size_t j = 0; j < set.size(); ++j) {
                    for (const auto& A : subsets) {
                        DensityProcess c = concat(set[i], set[j], theta, A);
                        if (!member(c)) {
                            if (set.size() >= max_size) return std::nullopt;
                            set.push_back(std::move(c));
                            grew = true;
                        }
                    }
                }
            }
        }
    }
    return set;
}

std::optional<std::vector<TerminalDensity>> closure_under_paste(const FiltrationTree& tree,
                                                                std::vector<TerminalDensity> generators,
                                                                std::size_t max_size,
                                                                std::size_t subset_cap) {
    std::vector<TerminalDensity> set = std::move(generators);
    auto member = [&set](const TerminalDensity& d) {
        return std::find(set.begin(), set.end(), d) != set.end();
    };
    bool grew = true;
    while (grew) {
        grew = false;
        for (int s = 0; s <= tree.horizon(); ++s) {
            StoppingTime theta = StoppingTime::constant(tree, s);
            bool exhaustive = true;
            auto subsets = subsets_of_atoms(tree.nodes_at_time(s), subset_cap, 1, &exhaustive);
            require(exhaustive, ErrorCode::SubsetEnumerationCapExceeded,
                    "closure needs exhaustive subsets at time " + std::to_string(s));
            for (std::size_t i = 0; i < set.size(); ++i) {
                for (std::size_t j = 0; j < set.size(); ++j) {
                    for (const auto& A : subsets) {
                        TerminalDensity c = paste_density(set[i], set[j], theta, A);
                        if (!member(c)) {
                            if (set.size() >= max_size) return std::nullopt;
                            set.push_back(std::move(c));
                            grew = true;
                        }
                    }
                }
            }
        }
    }
    return set;
}

PasteStabilityReport check_paste_stability(const FiltrationTree& tree,
                                           const std::vector<TerminalDensity>& P,
                                           std::size_t subset_cap) {
    PasteStabilityReport rep;
    for (int s = 0; s <= tree.horizon(); ++s) {
        StoppingTime theta = StoppingTime::constant(tree, s);
        bool exhaustive = true;
        auto subsets = subsets_of_atoms(tree.nodes_at_time(s), subset_cap, 1, &exhaustive);
        if (!exhaustive) rep.exhaustive = false;
        for (std::size_t i = 0; i < P.size(); ++i) {
            for (std::size_t j = 0; j < P.size(); ++j) {
                for (const auto& A : subsets) {
                    TerminalDensity c = paste_density(P[i], P[j], theta, A);
                    ++rep.checked;
                    if (std::find(P.begin(), P.end(), c) == P.end()) {
                        rep.stable = false;
                        rep.witness = {static_cast<int>(i), static_cast<int>(j), s};
                        return rep;
                    }
                }
            }
        }
    }
    return rep;
}

} // namespace dynarisk
