#include "dynarisk/consistency.hpp"

#include <algorithm>
#include <sstream>

namespace dynarisk {

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::CERTIFIED: return "CERTIFIED";
        case Verdict::CERTIFIED_ON_BATTERY: return "CERTIFIED_ON_BATTERY";
        case Verdict::REFUTED: return "REFUTED";
        case Verdict::UNKNOWN: return "UNKNOWN";
    }
    return "?";
}

const char* mode_name(Mode m) {
    return m == Mode::ONE_STEP ? "one-step" : "all-stopping-times";
}

std::string ConsistencyReport::describe() const {
    std::ostringstream os;
    os << verdict_name(verdict) << " [" << method << "]";
    os << " checked=" << checked;
    if (skipped) os << " skipped=" << skipped;
    if (!certificate.empty()) os << "\n  certificate: " << certificate;
    for (const auto& w : witnesses)
        os << "\n  witness: " << w.process << ", theta=" << w.theta << ", atom=" << w.atom
           << ", lhs=" << w.lhs.str() << ", rhs=" << w.rhs.str();
    return os.str();
}

std::vector<AdaptedProcess> make_battery(const FiltrationTree& tree, const Window& window,
                                         int random_count, unsigned long long seed) {
    std::vector<AdaptedProcess> out;
    const int N = tree.node_count();

    out.push_back(AdaptedProcess::zero(tree, window));
    out.push_back(AdaptedProcess::constant(tree, window, Rational(1)));
    out.push_back(AdaptedProcess::constant(tree, window, Rational(-1)));

    std::vector<Rational> up(N), down(N);
    for (NodeId n = 0; n < N; ++n) {
        up[n] = tree.time(n);
        down[n] = tree.horizon() - tree.time(n);
    }
    out.emplace_back(tree, window, std::move(up));
    out.emplace_back(tree, window, std::move(down));

    for (NodeId n = 0; n < N; ++n) {
        std::vector<Rational> raw(N, Rational(0));
        std::vector<NodeId> stack = {n};
        while (!stack.empty()) {
            NodeId v = stack.back();
            stack.pop_back();
            raw[v] = 1;
            for (NodeId c : tree.children(v)) stack.push_back(c);
        }
        AdaptedProcess ind(tree, window, std::move(raw));
        out.push_back(ind.scaled(Rational(-1)));
        out.push_back(std::move(ind));
    }

    Rng rng(seed);
    for (int i = 0; i < random_count; ++i) {
        std::vector<Rational> raw(N);
        for (NodeId n = 0; n < N; ++n) raw[n] = rng.small_rational();
        out.emplace_back(tree, window, std::move(raw));
    }
    return out;
}

TreeSpec make_random_tree(Rng& rng, int max_horizon, int max_branch, std::size_t stopping_cap) {
    for (int attempt = 0;; ++attempt) {
        int horizon_cap = std::max(1, max_horizon - attempt / 4);
        int branch_cap = std::max(2, max_branch - attempt / 2);
        int T = static_cast<int>(rng.uniform(1, horizon_cap));

        TreeSpec spec;
        spec.horizon = T;
        int counter = 0;
        auto add_node = [&](int t, const std::string& parent) {
            std::string id = "n" + std::to_string(counter++);
            spec.nodes.push_back({id, t, parent});
            return id;
        };
        struct Item {
            std::string id;
            int t;
        };
        std::vector<Item> frontier = {{add_node(0, ""), 0}};
        std::vector<std::string> leaf_ids;
        while (!frontier.empty()) {
            Item it = frontier.back();
            frontier.pop_back();
            if (it.t == T) {
                leaf_ids.push_back(it.id);
                continue;
            }
            long k = rng.uniform(1, branch_cap);
            for (long j = 0; j < k; ++j) frontier.push_back({add_node(it.t + 1, it.id), it.t + 1});
        }
        Rational total(0);
        std::vector<Rational> weights;
        for (size_t i = 0; i < leaf_ids.size(); ++i) {
            weights.push_back(Rational(rng.uniform(1, 8)));
            total += weights.back();
        }
        for (size_t i = 0; i < leaf_ids.size(); ++i)
            spec.leaf_probs[leaf_ids[i]] = Rational(weights[i] / total);

        FiltrationTree probe = FiltrationTree::build(spec);
        if (count_stopping_times(probe, 0, stopping_cap) <= stopping_cap) return spec;
    }
}

namespace {

// X 1_[_, theta) + v 1_[theta, infty) as raw values on X's window.
AdaptedProcess stitch(const AdaptedProcess& X, const ConditionalValue& v,
                      const StoppingTime& theta) {
    const FiltrationTree& tree = X.tree();
    std::vector<Rational> raw(X.values());
    for (NodeId n = 0; n < tree.node_count(); ++n) {
        NodeId s = theta.stop_at_or_above(n);
        if (s != kNoNode) raw[n] = v.at_node(s).value();
    }
    return AdaptedProcess(tree, X.window(), std::move(raw));
}

bool values_match(const ConditionalValue& a, const ConditionalValue& b, bool exact) {
    return exact ? a == b : a.approx_equal(b, float_tolerance());
}

bool entries_match(const ExtReal& a, const ExtReal& b, bool exact) {
    return exact ? a == b : a.approx_equal(b, float_tolerance());
}

} // namespace

ConsistencyReport check_time_consistency(const UtilityProcess& phi,
                                         const std::vector<AdaptedProcess>& battery, Mode mode,
                                         std::size_t theta_cap, std::size_t max_witnesses) {
    require(!battery.empty(), ErrorCode::UsageError, "empty battery");
    const FiltrationTree& tree = phi.tree();
    const bool exact = phi.exact();

    ConsistencyReport rep;
    rep.mode = mode;

    std::vector<std::pair<int, StoppingTime>> pairs;
    if (mode == Mode::ONE_STEP) {
        for (int t = phi.start(); t < phi.end(); ++t)
            pairs.emplace_back(t, StoppingTime::constant(tree, t + 1));
    } else {
        for (int t = phi.start(); t <= phi.end(); ++t)
            for (auto& th : enumerate_stopping_times(tree, t, theta_cap))
                if (th.max_time() <= phi.end()) pairs.emplace_back(t, std::move(th));
    }

    for (std::size_t xi = 0; xi < battery.size(); ++xi) {
        const AdaptedProcess& X = battery[xi];
        require(X.tree().same(tree), ErrorCode::TreeMismatch, "battery process on different tree");
        std::map<int, ConditionalValue> lhs_cache;
        for (const auto& [t, theta] : pairs) {
            UtilityFunctional Ft = phi.member(t);
            auto it = lhs_cache.find(t);
            if (it == lhs_cache.end()) it = lhs_cache.emplace(t, eval(Ft, X)).first;
            const ConditionalValue& lhs = it->second;

            ConditionalValue mid = eval(phi.conditioned(theta), X);
            if (!mid.all_finite()) {
                ++rep.skipped;
                continue;
            }
            ConditionalValue rhs = eval(Ft, stitch(X, mid, theta));
            ++rep.checked;
            if (values_match(lhs, rhs, exact)) continue;

            rep.verdict = Verdict::REFUTED;
            for (int k = 0; k < lhs.size(); ++k) {
                if (entries_match(lhs.at_index(k), rhs.at_index(k), exact)) continue;
                rep.witnesses.push_back(ConsistencyWitness{
                    "battery[" + std::to_string(xi) + "] at t=" + std::to_string(t),
                    theta.describe(), lhs.anchor().stop_nodes()[k], lhs.at_index(k),
                    rhs.at_index(k)});
                break;
            }
            if (rep.witnesses.size() >= max_witnesses) {
                rep.method = "recursion identity failed";
                return rep;
            }
        }
    }

    if (rep.verdict == Verdict::REFUTED) {
        rep.method = "recursion identity failed";
    } else {
        rep.verdict = Verdict::CERTIFIED_ON_BATTERY;
        rep.method = "recursion identity held across the battery (battery-limited)";
        rep.certificate = std::to_string(rep.checked) + " comparisons over " +
                          std::to_string(battery.size()) + " processes and " +
                          std::to_string(pairs.size()) + " (t, theta) pairs";
    }
    return rep;
}

Decomposition decompose_acceptance(const UtilityProcess& phi, const AdaptedProcess& X,
                                   const StoppingTime& tau, const StoppingTime& theta) {
    require(tau.leq(theta), ErrorCode::WindowOrderViolation, "split must come after the anchor");
    UtilityFunctional Ftau = phi.conditioned(tau);
    UtilityFunctional Fth = phi.conditioned(theta);
    require(accepts(Ftau, X), ErrorCode::NotAccepted, "process not accepted at the anchor");

    ConditionalValue mid = eval(Fth, X);
    require(mid.all_finite(), ErrorCode::LPFailure, "continuation value not finite");

    Decomposition d;
    d.Y = stitch(project(X, Window(tau, StoppingTime::constant(phi.tree(), phi.end()))), mid,
                 theta);
    d.Z = project(X, d.Y.window()) - d.Y;
    d.y_value = eval(Ftau, d.Y);
    d.z_value = eval(Fth, d.Z);

    const bool exact = phi.exact();
    ExtReal floor = exact ? ExtReal(Rational(0)) : ExtReal(Rational(-float_tolerance()));
    d.holds = true;
    for (int k = 0; k < d.y_value.size(); ++k) {
        bool ok = d.y_value.at_index(k) >= floor;
        d.y_accepted.push_back(ok ? 1 : 0);
        d.holds = d.holds && ok;
    }
    for (int k = 0; k < d.z_value.size(); ++k) {
        bool ok = d.z_value.at_index(k) >= floor;
        d.z_accepted.push_back(ok ? 1 : 0);
        d.holds = d.holds && ok;
    }
    return d;
}

UtilityProcess extend_process(const UtilityProcess& early, const UtilityProcess& late,
                              unsigned long long seed) {
    require(early.tree().same(late.tree()), ErrorCode::HorizonMismatch,
            "components live on different trees");
    require(early.end() == late.start(), ErrorCode::HorizonMismatch,
            "component ranges do not abut");
    const FiltrationTree& tree = early.tree();

    auto precheck = [&](const UtilityProcess& p, const char* which) {
        Window w = Window::span(tree, p.start(), p.end());
        ConsistencyReport r =
            check_time_consistency(p, make_battery(tree, w, 20, seed), Mode::ONE_STEP);
        require(r.verdict != Verdict::REFUTED, ErrorCode::InputNotConsistent,
                std::string(which) + " component fails its own one-step check");
    };
    precheck(early, "early");
    precheck(late, "late");

    auto rep = std::make_shared<Rep>(RepPasted{std::make_shared<UtilityProcess>(early),
                                               std::make_shared<UtilityProcess>(late),
                                               early.end()});
    return UtilityProcess(tree, early.start(), late.end(), std::move(rep));
}

ConsistencyReport check_penalty_recursion(const UtilityProcess& phi, const DensityProcess& a,
                                          const StoppingTime& tau, const StoppingTime& theta,
                                          const ScenarioSet& candidates) {
    require(phi.tag() == Tag::ROBUST, ErrorCode::UsageError,
            "penalty recursion needs a robust representation");
    require(tau.leq(theta), ErrorCode::WindowOrderViolation, "split must come after the anchor");
    const FiltrationTree& tree = phi.tree();
    StoppingTime end = StoppingTime::constant(tree, phi.end());
    require(classify_density(a, Window(tau, end)) != DensityClass::NOT_IN_D,
            ErrorCode::NotADensity, "density outside the anchored class");
    require(candidates.window() == Window(theta, end), ErrorCode::WindowViolation,
            "candidates must live on the continuation window");

    UtilityFunctional Ftau = phi.conditioned(tau);
    UtilityFunctional Fth = phi.conditioned(theta);

    ConditionalValue lhs = penalty_sharp(Ftau, a);
    ConditionalValue carried = coarsen_expectation(penalty_sharp(Fth, a), tau);

    ConditionalValue rhs = ConditionalValue::constant(tau, ExtReal::neg_inf());
    for (int i = 0; i < candidates.size(); ++i) {
        DensityProcess c = concat(a, candidates.at(i), theta, theta.stop_nodes());
        ConditionalValue term = penalty_sharp(Ftau, c);
        std::vector<ExtReal> best;
        best.reserve(rhs.size());
        for (int k = 0; k < rhs.size(); ++k)
            best.push_back(max(rhs.at_index(k), term.at_index(k) + carried.at_index(k)));
        rhs = ConditionalValue(tau, std::move(best));
    }

    ConsistencyReport rep;
    rep.checked = static_cast<std::size_t>(candidates.size()) * tau.stop_nodes().size();
    int equal_atoms = 0;
    for (int k = 0; k < lhs.size(); ++k) {
        const ExtReal& l = lhs.at_index(k);
        const ExtReal& r = rhs.at_index(k);
        if (l == r) ++equal_atoms;
        if (l >= r) continue;
        rep.verdict = Verdict::REFUTED;
        rep.witnesses.push_back(ConsistencyWitness{"penalty of the given density",
                                                   theta.describe(), tau.stop_nodes()[k], l, r});
    }
    if (rep.verdict == Verdict::REFUTED) {
        rep.method = "penalty recursion lower bound violated";
        return rep;
    }
    rep.verdict = Verdict::CERTIFIED_ON_BATTERY;
    rep.method = "penalty recursion lower bound held over the candidate set";
    rep.certificate = "equality at " + std::to_string(equal_atoms) + "/" +
                      std::to_string(lhs.size()) + " atoms; bound is relative to " +
                      std::to_string(candidates.size()) + " candidate continuations";
    return rep;
}

namespace {

// psi_t(psi_{t+1}(Y)) == psi_t(Y) across a terminal-payoff battery; the
// one-step composition identity of the stopping base.
bool base_one_step_identity(const UtilityProcess& phi, unsigned long long seed) {
    const FiltrationTree& tree = phi.tree();
    const bool exact = phi.exact();
    Window w = Window::span(tree, phi.start(), phi.end());
    StoppingTime end = StoppingTime::constant(tree, phi.end());
    for (const AdaptedProcess& Y : make_battery(tree, w, 20, seed)) {
        for (int t = phi.start(); t < phi.end(); ++t) {
            ConditionalValue direct =
                stopped_value(phi.member(t), Y, StoppingTime::constant(tree, t), end);
            ConditionalValue mid =
                stopped_value(phi.member(t + 1), Y, StoppingTime::constant(tree, t + 1), end);
            std::vector<Rational> raw(tree.node_count(), Rational(0));
            for (NodeId n = 0; n < tree.node_count(); ++n) {
                NodeId s = mid.anchor().stop_at_or_above(n);
                if (s != kNoNode) raw[n] = mid.at_node(s).value();
            }
            AdaptedProcess Z(tree, w, std::move(raw));
            ConditionalValue composed =
                stopped_value(phi.member(t), Z, StoppingTime::constant(tree, t), end);
            if (!values_match(direct, composed, exact)) return false;
        }
    }
    return true;
}

ConsistencyReport fallback_sweep(const UtilityProcess& phi, unsigned long long seed,
                                 const std::vector<AdaptedProcess>& extra,
                                 const std::string& note) {
    const FiltrationTree& tree = phi.tree();
    Window w = Window::span(tree, phi.start(), phi.end());
    std::vector<AdaptedProcess> battery = make_battery(tree, w, 60, seed);
    battery.insert(battery.end(), extra.begin(), extra.end());
    ConsistencyReport rep =
        check_time_consistency(phi, battery, Mode::ALL_STOPPING_TIMES);
    rep.method = "definition sweep on a seeded battery" +
                 (note.empty() ? std::string() : "; " + note) + " -- " + rep.method;
    return rep;
}

} // namespace

ConsistencyReport certify_sufficiency(const UtilityProcess& phi, unsigned long long seed) {
    const FiltrationTree& tree = phi.tree();
    ConsistencyReport rep;

    switch (phi.tag()) {
        case Tag::ROBUST: {
            const auto& r = std::get<RepRobust>(phi.rep());
            bool coherent = !r.penalty || r.penalty->is_zero();
            if (coherent) {
                StabilityReport st = check_stability(*r.scenarios, /*use_hull=*/true);
                if (st.stable && r.scenarios->all_extreme()) {
                    rep.verdict = st.exhaustive ? Verdict::CERTIFIED : Verdict::CERTIFIED_ON_BATTERY;
                    rep.method = "concatenation stability of the scenario set";
                    rep.certificate =
                        std::to_string(r.scenarios->size()) +
                        " everywhere-active scenarios; " + std::to_string(st.checked) +
                        " concatenations stayed in the convex hull" +
                        (st.exhaustive ? "" : " (event sampling capped)");
                    return rep;
                }
                if (st.stable)
                    return fallback_sweep(phi, seed, {},
                                          "scenario set is concatenation-stable but not "
                                          "everywhere-active, so the structural theorem "
                                          "does not apply");
                // Separating functionals from failed stability checks are the
                // strongest candidates for a definitional refutation.
                std::vector<AdaptedProcess> extra;
                Window w = Window::span(tree, phi.start(), phi.end());
                for (const auto& v : st.violations)
                    if (!v.separator_values.empty())
                        extra.emplace_back(tree, w, v.separator_values);
                return fallback_sweep(phi, seed, extra,
                                      "scenario set not concatenation-stable; separator "
                                      "processes added to the battery");
            }
            return fallback_sweep(phi, seed, {}, "no structural certificate for general penalties");
        }
        case Tag::ENTROPIC: {
            const auto& r = std::get<RepEntropic>(phi.rep());
            PasteStabilityReport ps = check_paste_stability(tree, r.densities);
            if (ps.stable) {
                rep.verdict = ps.exhaustive ? Verdict::CERTIFIED : Verdict::CERTIFIED_ON_BATTERY;
                rep.method = "paste stability of the density set";
                rep.certificate = "entropic conditional family composes one step at a time over a "
                                  "paste-stable set (" +
                                  std::to_string(ps.checked) + " pastes checked)";
                return rep;
            }
            return fallback_sweep(phi, seed, {}, "density set not paste-stable");
        }
        case Tag::AGGREGATED: {
            const auto& r = std::get<RepAggregated>(phi.rep());
            if (r.kind == AggKind::WEIGHTED) {
                PasteStabilityReport ps = check_paste_stability(tree, r.densities);
                if (ps.stable) {
                    rep.verdict =
                        ps.exhaustive ? Verdict::CERTIFIED : Verdict::CERTIFIED_ON_BATTERY;
                    rep.method = "paste stability plus the weighted-aggregation homomorphism";
                    rep.certificate = "weighted aggregation maps pastes of densities to "
                                      "concatenations of scenarios (" +
                                      std::to_string(ps.checked) + " pastes checked)";
                    return rep;
                }
                return fallback_sweep(phi, seed, {}, "density set not paste-stable");
            }
            // Running-minimum aggregation admits no structural certificate:
            // stability of the density set does not transfer.
            return fallback_sweep(phi, seed, {},
                                  "running-minimum aggregation has no structural certificate");
        }
        case Tag::WORST_STOPPING: {
            const auto& r = std::get<RepWorstStopping>(phi.rep());
            PasteStabilityReport ps = check_paste_stability(tree, r.densities);
            bool identity = base_one_step_identity(phi, seed);
            if (ps.stable && identity) {
                rep.verdict = ps.exhaustive ? Verdict::CERTIFIED : Verdict::CERTIFIED_ON_BATTERY;
                rep.method = "one-step composition of the stopping base";
                rep.certificate = "base family composes across adjacent times; density set "
                                  "paste-stable (" +
                                  std::to_string(ps.checked) + " pastes checked)";
                return rep;
            }
            if (identity) {
                rep.verdict = Verdict::CERTIFIED_ON_BATTERY;
                rep.method = "one-step composition of the stopping base (battery-limited)";
                rep.certificate = "composition identity held on a seeded terminal battery";
                return rep;
            }
            return fallback_sweep(phi, seed, {}, "stopping base fails its composition identity");
        }
        case Tag::PASTED: {
            const auto& r = std::get<RepPasted>(phi.rep());
            ConsistencyReport early = certify_sufficiency(*r.early, seed);
            ConsistencyReport late = certify_sufficiency(*r.late, seed);
            if (early.verdict == Verdict::CERTIFIED && late.verdict == Verdict::CERTIFIED) {
                rep.verdict = Verdict::CERTIFIED;
                rep.method = "pasting of certified components";
                rep.certificate = "early: " + early.method + "; late: " + late.method;
                return rep;
            }
            std::string note = "components not both structurally certified";
            if (early.verdict == Verdict::REFUTED || late.verdict == Verdict::REFUTED)
                note = "a component was refuted on its own range";
            return fallback_sweep(phi, seed, {}, note);
        }
    }
    return rep;
}

} // namespace dynarisk
