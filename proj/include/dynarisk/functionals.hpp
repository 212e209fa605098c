#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <variant>

#include "dynarisk/composition.hpp"

namespace dynarisk {

class UtilityProcess;

// Penalty attached to the scenarios of a robust representation: one
// extended-real value <= 0 per (scenario, anchor atom), with per-atom
// supremum exactly zero so that the represented functional is normalized.
class PenaltyFunction {
public:
    PenaltyFunction() = default;
    // values[i] anchored at the scenario window start; validates range and
    // normalization, throwing NormalizationViolation otherwise.
    explicit PenaltyFunction(std::vector<ConditionalValue> values);
    static PenaltyFunction zero(const StoppingTime& anchor, int scenario_count);

    int scenario_count() const { return static_cast<int>(m_values.size()); }
    const ConditionalValue& for_scenario(int i) const { return m_values[i]; }
    const ExtReal& at(int scenario, NodeId anchor_atom) const;
    bool is_zero() const;

private:
    std::vector<ConditionalValue> m_values;
};

struct RepRobust {
    std::shared_ptr<const ScenarioSet> scenarios;
    std::optional<PenaltyFunction> penalty; // absent or all-zero: coherent
};

struct RepEntropic {
    std::vector<TerminalDensity> densities; // strictly positive
};

enum class AggKind { INF_TIME, WEIGHTED };

struct RepAggregated {
    std::vector<TerminalDensity> densities; // strictly positive
    AggKind kind = AggKind::INF_TIME;
    std::vector<Rational> mu; // WEIGHTED only: weights over [0, horizon]
};

enum class SnellBase { PSET, ENTROPIC };

struct RepWorstStopping {
    SnellBase base = SnellBase::PSET;
    std::vector<TerminalDensity> densities;
};

struct RepPasted {
    std::shared_ptr<const UtilityProcess> early; // range [start, split]
    std::shared_ptr<const UtilityProcess> late;  // range [split, horizon]
    int split = 0;
};

using Rep = std::variant<RepRobust, RepEntropic, RepAggregated, RepWorstStopping, RepPasted>;

enum class Tag { ROBUST, ENTROPIC, AGGREGATED, WORST_STOPPING, PASTED };
const char* tag_name(Tag t);
Tag rep_tag(const Rep& rep);

// Values produced through double-precision logs carry a tolerance; purely
// rational representations compare exactly.
bool rep_is_exact(const Rep& rep);

// Conditional monetary utility functional on the window, defined by a
// tagged representation.
class UtilityFunctional {
public:
    UtilityFunctional() = default;
    UtilityFunctional(const FiltrationTree& tree, Window window, std::shared_ptr<const Rep> rep);

    static UtilityFunctional robust(const FiltrationTree& tree, std::shared_ptr<const ScenarioSet> Q,
                                    std::optional<PenaltyFunction> penalty = std::nullopt);
    static UtilityFunctional entropic(const FiltrationTree& tree, Window window,
                                      std::vector<TerminalDensity> P);
    static UtilityFunctional aggregated(const FiltrationTree& tree, Window window,
                                        std::vector<TerminalDensity> P, AggKind kind,
                                        std::vector<Rational> mu = {});
    static UtilityFunctional worst_stopping(const FiltrationTree& tree, Window window,
                                            SnellBase base, std::vector<TerminalDensity> P);
    // The unique functional on the degenerate window [t, t].
    static UtilityFunctional trivial(const FiltrationTree& tree, int t);

    const FiltrationTree& tree() const { return *m_tree; }
    const Window& window() const { return m_window; }
    const Rep& rep() const { return *m_rep; }
    std::shared_ptr<const Rep> rep_ptr() const { return m_rep; }
    Tag tag() const { return rep_tag(*m_rep); }
    bool exact() const { return rep_is_exact(*m_rep); }
    bool coherent() const;

private:
    const FiltrationTree* m_tree = nullptr;
    Window m_window;
    std::shared_ptr<const Rep> m_rep;
};

// Family t -> functional on [t, horizon] generated by one representation.
class UtilityProcess {
public:
    UtilityProcess() = default;
    UtilityProcess(const FiltrationTree& tree, int start, int end, std::shared_ptr<const Rep> rep);

    const FiltrationTree& tree() const { return *m_tree; }
    int start() const { return m_start; }
    int end() const { return m_end; }
    const Rep& rep() const { return *m_rep; }
    std::shared_ptr<const Rep> rep_ptr() const { return m_rep; }
    Tag tag() const { return rep_tag(*m_rep); }
    bool exact() const { return rep_is_exact(*m_rep); }

    UtilityFunctional member(int t) const;
    // phi_{tau, end}: the family conditioned at a stopping time.
    UtilityFunctional conditioned(const StoppingTime& tau) const;

private:
    const FiltrationTree* m_tree = nullptr;
    int m_start = 0;
    int m_end = 0;
    std::shared_ptr<const Rep> m_rep;
};

// phi_{tau, hi}(X) per tau-atom; requires lo <= tau <= hi.
ConditionalValue eval(const UtilityFunctional& F, const AdaptedProcess& X, const StoppingTime& tau);
ConditionalValue eval(const UtilityFunctional& F, const AdaptedProcess& X);
ExtReal eval_at_node(const UtilityFunctional& F, const AdaptedProcess& X, NodeId m);

// Default acceptance tolerance for representations that route through
// double-precision logs.
inline const Rational& float_tolerance() {
    static const Rational tol(1, 1000000000);
    return tol;
}

// X in C_phi: eval >= 0 at every window-start atom (>= -1e-9 when the
// representation is not exact).
bool accepts(const UtilityFunctional& F, const AdaptedProcess& X);

// ess sup { f : X - f 1_[lo, infty) accepted }, found by per-atom bisection
// with the bracket +-(sup_norm + 1) and 60 halvings.
ConditionalValue recover_from_acceptance(const UtilityFunctional& F, const AdaptedProcess& X);

// phi^#(a) at tau: per tau-atom LP minimum of <X, a>_{tau,hi} over the
// conditioned acceptance set; -inf via an unbounded-ray certificate.
// ROBUST representations only.
ConditionalValue penalty_sharp(const UtilityFunctional& F, const DensityProcess& a,
                               const StoppingTime& tau);
ConditionalValue penalty_sharp(const UtilityFunctional& F, const DensityProcess& a);

// Mass-weighted extension: <1,a>_{theta,hi} * gamma(normalize_from(a,theta))
// per theta-atom, zero where the mass vanishes.
ConditionalValue gamma_ext(
    const std::function<ExtReal(const DensityProcess&, NodeId)>& gamma_at,
    const DensityProcess& a, const StoppingTime& theta, const StoppingTime& hi);

struct RelevanceWitness {
    NodeId atom = kNoNode;
    Rational epsilon;
};

struct RelevanceReport {
    bool relevant = true;
    std::vector<RelevanceWitness> witnesses;
};

// theta-relevance at the window end: phi(-eps 1_A 1_[theta, infty)) < 0 on
// A for every theta-atom A. Coherent representations need only eps = 1;
// concave ones sweep eps over {1, 1/2, ..., 2^-10}.
RelevanceReport check_relevance(const UtilityFunctional& F);

struct SnellResult {
    ConditionalValue values;  // phi_{tau,hi}(X) = S_tau
    AdaptedProcess envelope;  // S
    StoppingTime exercise;    // first time S meets X after tau
    bool certified = false;   // values == psi_tau(X_exercise)
};

SnellResult snell_worst_stopping(const UtilityFunctional& F, const AdaptedProcess& X,
                                 const StoppingTime& tau);

// psi_tau(X_xi) for a given stopping time xi >= tau under the same base:
// the brute-force building block for Snell optimality checks.
ConditionalValue stopped_value(const UtilityFunctional& F, const AdaptedProcess& X,
                               const StoppingTime& tau, const StoppingTime& xi);

} // namespace dynarisk
