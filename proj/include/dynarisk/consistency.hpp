#pragma once

#include "dynarisk/functionals.hpp"

namespace dynarisk {

// CERTIFIED: a theorem-backed structural certificate (stability of the
// representing set, composition identity of the base family, or pasting of
// certified components). CERTIFIED_ON_BATTERY: no refutation across the
// supplied battery; sound only up to the battery. REFUTED always carries a
// reproducible witness.
enum class Verdict { CERTIFIED, CERTIFIED_ON_BATTERY, REFUTED, UNKNOWN };
const char* verdict_name(Verdict v);

enum class Mode { ONE_STEP, ALL_STOPPING_TIMES };
const char* mode_name(Mode m);

struct ConsistencyWitness {
    std::string process; // which test process failed
    std::string theta;   // intermediate stopping time
    NodeId atom = kNoNode;
    ExtReal lhs;
    ExtReal rhs;
};

struct ConsistencyReport {
    Verdict verdict = Verdict::UNKNOWN;
    Mode mode = Mode::ONE_STEP;
    std::string method;      // how the verdict was reached
    std::string certificate; // details backing a certification
    std::size_t checked = 0; // (X, t, theta) triples compared
    std::size_t skipped = 0; // triples with non-finite intermediate values
    std::vector<ConsistencyWitness> witnesses;

    std::string describe() const;
};

// Deterministic test battery on the window: constants, subtree indicators
// of both signs, time ramps, and seeded random draws with numerators in
// [-8, 8] and denominators in {1, 2, 4}.
std::vector<AdaptedProcess> make_battery(const FiltrationTree& tree, const Window& window,
                                         int random_count, unsigned long long seed);

// Seeded random tree description: horizon in [1, max_horizon], branching
// in [1, max_branch], integer leaf weights normalized exactly. Regenerates
// until the stopping-time count fits under the cap.
TreeSpec make_random_tree(Rng& rng, int max_horizon, int max_branch,
                          std::size_t stopping_cap = 10000);

// The recursion identity phi_t(X) = phi_t(X 1_[t,theta) + phi_theta(X)
// 1_[theta,infty)) swept over the battery. ONE_STEP: theta = t + 1 for
// every t in the range. ALL_STOPPING_TIMES: every enumerated stopping time
// t <= theta <= end. Exact comparison for exact representations, 1e-9
// otherwise. Never returns CERTIFIED: passing a battery is not a theorem.
ConsistencyReport check_time_consistency(const UtilityProcess& phi,
                                         const std::vector<AdaptedProcess>& battery, Mode mode,
                                         std::size_t theta_cap = 10000,
                                         std::size_t max_witnesses = 4);

// Constructive acceptance-set split of an accepted X across an
// intermediate stopping time: Y carries the pre-theta part with the
// continuation value pasted in, Z = X - Y the recentred tail. Z is
// accepted at theta by translation invariance; Y accepted at tau exactly
// when the decomposition property holds there.
struct Decomposition {
    AdaptedProcess Y;
    AdaptedProcess Z;
    ConditionalValue y_value;      // phi_tau(Y)
    ConditionalValue z_value;      // phi_theta(Z)
    std::vector<char> y_accepted;  // per tau-atom
    std::vector<char> z_accepted;  // per theta-atom
    bool holds = false;            // every membership true
};

Decomposition decompose_acceptance(const UtilityProcess& phi, const AdaptedProcess& X,
                                   const StoppingTime& tau, const StoppingTime& theta);

// Pasted process: early members rewired to charge the late continuation
// value from the split time on; late members untouched. Both inputs must
// pass a one-step battery check on their own ranges first.
UtilityProcess extend_process(const UtilityProcess& early, const UtilityProcess& late,
                              unsigned long long seed = 1);

// Lower-bound recursion for the sharpened penalty: lhs = phi^#_{tau}(a)
// against rhs = max over candidate b of phi^#_{tau}(a concatenated with b
// at theta) + E[phi^#_{theta}(a) | F_tau]. lhs < rhs anywhere refutes;
// lhs >= rhs certifies only relative to the candidate set, which stands in
// for the full class of continuation densities.
ConsistencyReport check_penalty_recursion(const UtilityProcess& phi, const DensityProcess& a,
                                          const StoppingTime& tau, const StoppingTime& theta,
                                          const ScenarioSet& candidates);

// Structural certification dispatch by representation tag: concatenation
// stability of an everywhere-active scenario set, paste stability of the
// density set, composition identity of the stopping base, or recursive
// certification of pasted components. Falls back to a full sweep on a
// seeded battery when no structural certificate applies.
ConsistencyReport certify_sufficiency(const UtilityProcess& phi, unsigned long long seed = 1);

} // namespace dynarisk
