// Acceptance gate: one line per criterion, nonzero exit on any failure.
// Every numeric expectation is either exact in rationals or pinned to the
// tolerance constants below.

#include <chrono>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dynarisk/consistency.hpp"
#include "dynarisk/fixtures.hpp"
#include "dynarisk/optim.hpp"

using namespace dynarisk;

namespace {

const Rational kFloatTol(1, 1000000000);        // 1e-9 for inexact representations
const double kEntropicStepTol = 1e-10;          // one-step recursion drift budget
constexpr unsigned long long kSeed = 20260815;  // fixed so every run is identical

std::string fixture(const std::string& name) {
    return std::string(DYNARISK_FIXTURE_DIR) + "/" + name;
}

struct Checker {
    std::size_t count = 0;
    bool ok = true;
    std::string first;

    void expect(bool c, const std::string& msg) {
        ++count;
        if (!c && ok) {
            ok = false;
            first = msg;
        }
    }
};

AdaptedProcess random_process(const FiltrationTree& tree, const Window& w, Rng& rng) {
    std::vector<Rational> raw(tree.node_count());
    for (auto& v : raw) v = rng.small_rational();
    return AdaptedProcess(tree, w, std::move(raw));
}

AdaptedProcess random_nonneg(const FiltrationTree& tree, const Window& w, Rng& rng) {
    std::vector<Rational> raw(tree.node_count());
    for (auto& v : raw) {
        Rational r = rng.small_rational();
        v = r < 0 ? Rational(-r) : r;
    }
    return AdaptedProcess(tree, w, std::move(raw));
}

TerminalDensity random_positive_terminal(const FiltrationTree& tree, Rng& rng) {
    std::map<NodeId, Rational> f;
    Rational mean(0);
    for (NodeId leaf : tree.leaves()) {
        Rational v = Rational(rng.positive_rational() + Rational(1, 8));
        f[leaf] = v;
        mean += Rational(tree.prob(leaf) * v);
    }
    for (auto& [leaf, v] : f) v = Rational(v / mean);
    return TerminalDensity(tree, std::move(f));
}

std::vector<Rational> random_weights(const FiltrationTree& tree, Rng& rng) {
    std::vector<Rational> mu(tree.horizon() + 1);
    Rational total(0);
    for (auto& m : mu) {
        m = Rational(rng.uniform(1, 8));
        total += m;
    }
    for (auto& m : mu) m = Rational(m / total);
    return mu;
}

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

TerminalDensity leaf_density(const FiltrationTree& tree, std::vector<Rational> vals) {
    std::map<NodeId, Rational> f;
    const auto& leaves = tree.leaves();
    for (std::size_t i = 0; i < leaves.size(); ++i) f[leaves[i]] = vals[i];
    return TerminalDensity(tree, std::move(f));
}

UtilityProcess robust_from(const FiltrationTree& tree, std::vector<DensityProcess> ds,
                           std::optional<PenaltyFunction> gamma = std::nullopt) {
    auto Q = std::make_shared<ScenarioSet>(tree, Window::full(tree), std::move(ds));
    UtilityFunctional F = UtilityFunctional::robust(tree, Q, std::move(gamma));
    return UtilityProcess(tree, 0, tree.horizon(), F.rep_ptr());
}

// One-period conditional mean as a robust process on [from, to].
UtilityProcess period_mean(const FiltrationTree& tree, int from, int to) {
    std::vector<Rational> incr(tree.node_count(), Rational(0));
    for (NodeId n : tree.nodes_at_time(to)) incr[n] = 1;
    auto Q = std::make_shared<ScenarioSet>(
        tree, Window::span(tree, from, to),
        std::vector<DensityProcess>{DensityProcess(tree, std::move(incr))});
    UtilityFunctional F = UtilityFunctional::robust(tree, Q, std::nullopt);
    return UtilityProcess(tree, from, to, F.rep_ptr());
}

std::vector<DensityProcess> counterexample_closure(const FiltrationTree& tree) {
    std::vector<DensityProcess> gens = {
        build_density_final(leaf_density(tree, {2, Rational(2, 3), Rational(2, 3), Rational(2, 3)})),
        build_density_final(leaf_density(tree, {Rational(1, 2), Rational(3, 2), 1, 1})),
        build_density_final(leaf_density(tree, {1, 1, Rational(3, 2), Rational(1, 2)}))};
    auto closed = closure_under_concat(tree, Window::full(tree), std::move(gens));
    if (!closed) throw Error(ErrorCode::EnumerationCapExceeded, "closure did not stabilize");
    return *closed;
}

// --------------------------------------------------------------------------

bool criterion_counterexample(Checker& c, FixtureStore& store) {
    const FiltrationTree& tree = store.tree("counterexample");
    AdaptedProcess X(tree, Window::full(tree), counterexample_values(tree));
    UtilityProcess U = counterexample_process(tree);

    ConditionalValue v0 = eval(U.member(0), X);
    ConditionalValue v1 = eval(U.member(1), X);
    c.expect(v0.at_node(tree.root()) == ExtReal(Rational(3, 4)), "initial value is not 3/4");
    c.expect(v1.at_node(tree.node_by_label("n1")) == ExtReal(Rational(5, 2)),
             "mid value on the first branch is not 5/2");
    c.expect(v1.at_node(tree.node_by_label("n2")) == ExtReal(Rational(0)),
             "mid value on the second branch is not 0");

    ConditionalValue pasted =
        eval(U.member(0), stitch(X, v1, StoppingTime::constant(tree, 1)));
    c.expect(pasted.at_node(tree.root()) == ExtReal(Rational(1)), "stitched value is not 1");

    ConsistencyReport rep = check_time_consistency(U, {X}, Mode::ONE_STEP);
    c.expect(rep.verdict == Verdict::REFUTED, "checker did not refute");
    c.expect(!rep.witnesses.empty() && rep.witnesses.front().lhs == ExtReal(Rational(3, 4)) &&
                 rep.witnesses.front().rhs == ExtReal(Rational(1)),
             "witness does not carry the 3/4 vs 1 gap");
    return c.ok;
}

bool criterion_snell_oracle(Checker& c) {
    Rng rng(kSeed);
    for (int ti = 0; ti < 50; ++ti) {
        FiltrationTree tree = FiltrationTree::build(make_random_tree(rng, 4, 3, 400));
        Window full = Window::full(tree);
        std::map<NodeId, Rational> ones;
        for (NodeId leaf : tree.leaves()) ones[leaf] = 1;
        UtilityFunctional F = UtilityFunctional::worst_stopping(
            tree, full, SnellBase::PSET, {TerminalDensity(tree, ones)});
        StoppingTime t0 = StoppingTime::constant(tree, 0);
        auto sigmas = enumerate_stopping_times(tree, 0, 400);

        auto battery = make_battery(tree, full, 20, kSeed + ti);
        std::vector<AdaptedProcess> procs(battery.end() - 20, battery.end());
        for (const AdaptedProcess& X : procs) {
            SnellResult res = snell_worst_stopping(F, X, t0);
            std::vector<ExtReal> best(t0.stop_nodes().size(), ExtReal::pos_inf());
            for (const StoppingTime& xi : sigmas) {
                ConditionalValue sv = stopped_value(F, X, t0, xi);
                for (int k = 0; k < sv.size(); ++k)
                    if (sv.at_index(k) < best[k]) best[k] = sv.at_index(k);
            }
            c.expect(res.values == ConditionalValue(t0, std::move(best)),
                     "envelope differs from exhaustive minimum on tree " + std::to_string(ti));
            c.expect(res.certified, "exercise rule not certified on tree " + std::to_string(ti));
        }
    }
    return c.ok;
}

bool criterion_stable_closures(Checker& c, FixtureStore& store) {
    const FiltrationTree& tree = store.tree("counterexample");
    Window full = Window::full(tree);

    // closure of three strictly positive generators
    std::vector<DensityProcess> closed = counterexample_closure(tree);
    ScenarioSet probe(tree, full, closed);
    c.expect(check_stability(probe, false).stable, "closure is not concatenation-stable");
    UtilityProcess U = robust_from(tree, closed);
    auto battery = make_battery(tree, full, 100, kSeed);
    ConsistencyReport rep = check_time_consistency(U, battery, Mode::ALL_STOPPING_TIMES);
    c.expect(rep.verdict == Verdict::CERTIFIED_ON_BATTERY,
             "closed scenario set failed the sweep");

    // same construction on a second small random tree
    Rng rng(kSeed + 1);
    FiltrationTree small = FiltrationTree::build(make_random_tree(rng, 2, 2, 100));
    std::vector<DensityProcess> gens2 = {
        build_density_final(random_positive_terminal(small, rng)),
        build_density_final(random_positive_terminal(small, rng))};
    auto closed2 = closure_under_concat(small, Window::full(small), std::move(gens2));
    c.expect(closed2.has_value(), "second closure did not stabilize");
    if (closed2) {
        auto Q2 = std::make_shared<ScenarioSet>(small, Window::full(small), *closed2);
        UtilityProcess U2(small, 0, small.horizon(),
                          UtilityFunctional::robust(small, Q2, std::nullopt).rep_ptr());
        ConsistencyReport rep2 = check_time_consistency(
            U2, make_battery(small, Window::full(small), 100, kSeed), Mode::ALL_STOPPING_TIMES);
        c.expect(rep2.verdict == Verdict::CERTIFIED_ON_BATTERY,
                 "closed scenario set failed the sweep on the random tree");
    }

    // a non-stable pair must be refuted, with the stability separator as witness
    std::vector<DensityProcess> pair = {
        build_density_final(leaf_density(tree, {2, 0, 1, 1})),
        build_density_final(leaf_density(tree, {1, 1, 2, 0}))};
    ScenarioSet Qss(tree, full, pair);
    StabilityReport st = check_stability(Qss, true);
    c.expect(!st.stable && !st.violations.empty(), "pair unexpectedly stable");
    std::vector<AdaptedProcess> refuters = make_battery(tree, full, 20, kSeed);
    for (const auto& v : st.violations)
        if (!v.separator_values.empty())
            refuters.emplace_back(tree, full, v.separator_values);
    UtilityProcess Uss = robust_from(tree, pair);
    ConsistencyReport bad = check_time_consistency(Uss, refuters, Mode::ALL_STOPPING_TIMES);
    c.expect(bad.verdict == Verdict::REFUTED && !bad.witnesses.empty(),
             "non-stable pair was not refuted with a witness");
    return c.ok;
}

bool criterion_entropic_one_step(Checker& c, FixtureStore& store) {
    Rng rng(kSeed + 2);
    std::vector<FiltrationTree> trees;
    trees.push_back(FiltrationTree::build(counterexample_tree_spec()));
    while (trees.size() < 3) {
        FiltrationTree t = FiltrationTree::build(make_random_tree(rng, 4, 3, 2000));
        if (t.leaves().size() <= 32) trees.push_back(std::move(t));
    }
    (void)store;

    int produced = 0;
    for (std::size_t ti = 0; ti < trees.size() && produced < 100; ++ti) {
        const FiltrationTree& tree = trees[ti];
        Window full = Window::full(tree);
        std::map<NodeId, Rational> ones;
        for (NodeId leaf : tree.leaves()) ones[leaf] = 1;
        auto closedP = closure_under_paste(tree, {TerminalDensity(tree, ones)});
        c.expect(closedP.has_value() && closedP->size() == 1,
                 "reference family is not paste-closed");
        UtilityFunctional F = UtilityFunctional::entropic(tree, full, *closedP);
        UtilityProcess U(tree, 0, tree.horizon(), F.rep_ptr());

        for (int yi = 0; yi < 34 && produced < 100; ++yi, ++produced) {
            AdaptedProcess Y = random_process(tree, full, rng);
            for (int t = 0; t < tree.horizon(); ++t) {
                ConditionalValue next = eval(U.member(t + 1), Y);
                ConditionalValue lhs =
                    eval(U.member(t), stitch(Y, next, StoppingTime::constant(tree, t + 1)));
                ConditionalValue rhs = eval(U.member(t), Y);
                for (int k = 0; k < lhs.size(); ++k) {
                    double d = lhs.at_index(k).as_double() - rhs.at_index(k).as_double();
                    c.expect(d <= kEntropicStepTol && -d <= kEntropicStepTol,
                             "one-step drift above 1e-10");
                }
            }
        }
    }
    c.expect(produced == 100, "fewer than 100 processes tested");
    return c.ok;
}

// Penalty generators at an atom: scenario increments under m scaled to unit
// conditional mass, skipping scenarios with no mass there.
std::vector<std::vector<Rational>> hull_generators(const ScenarioSet& Q, NodeId m,
                                                   const std::vector<NodeId>& support) {
    std::vector<std::vector<Rational>> gens;
    for (int i = 0; i < Q.size(); ++i) {
        Rational mass = conditional_mass_at(Q.at(i), m, Q.window().hi);
        if (mass == 0) continue;
        std::vector<Rational> v;
        v.reserve(support.size());
        for (NodeId n : support) v.push_back(Rational(Q.at(i).increment(n) / mass));
        gens.push_back(std::move(v));
    }
    return gens;
}

bool criterion_penalty_duality(Checker& c, FixtureStore& store) {
    const FiltrationTree& tree = store.tree("counterexample");
    StoppingTime one = StoppingTime::constant(tree, 1);
    Rng rng(kSeed + 3);

    std::vector<UtilityProcess> coherent = {
        load_utility(store, fixture("robust_final.json")),
        load_utility(store, fixture("stopped_scenarios.json")),
        robust_from(tree, counterexample_closure(tree))};

    auto random_density = [&](const ScenarioSet& Q) {
        switch (rng.uniform(0, 3)) {
            case 0: return build_density_final(random_positive_terminal(tree, rng));
            case 1: {
                auto sigmas = enumerate_stopping_times(tree, 0, 100);
                const StoppingTime& xi = sigmas[rng.uniform(0, (long)sigmas.size() - 1)];
                return build_density_stopped(random_positive_terminal(tree, rng), xi);
            }
            case 2:
                return build_density_weighted(random_positive_terminal(tree, rng),
                                              random_weights(tree, rng));
            default: {
                std::vector<Rational> lam(Q.size());
                Rational tot(0);
                for (auto& l : lam) {
                    l = Rational(rng.uniform(0, 6));
                    tot += l;
                }
                if (tot == 0) lam[0] = tot = 1;
                std::vector<Rational> incr(tree.node_count(), Rational(0));
                for (int i = 0; i < Q.size(); ++i)
                    for (NodeId n = 0; n < tree.node_count(); ++n)
                        incr[n] += Rational(lam[i] / tot * Q.at(i).increment(n));
                return DensityProcess(tree, std::move(incr));
            }
        }
    };

    for (const UtilityProcess& U : coherent) {
        const ScenarioSet& Q = *std::get<RepRobust>(U.rep()).scenarios;
        UtilityFunctional F0 = U.member(0);
        for (int i = 0; i < 34; ++i) {
            DensityProcess a = random_density(Q);

            ExtReal pen = penalty_sharp(F0, a).at_node(tree.root());
            c.expect(pen == ExtReal(Rational(0)) || pen.is_neg_inf(),
                     "coherent penalty off the two-point range");
            auto support = window_nodes(tree, tree.root(), F0.window().hi);
            std::vector<Rational> avec;
            for (NodeId n : support) avec.push_back(a.increment(n));
            bool inside = hull_membership(avec, hull_generators(Q, tree.root(), support)).inside;
            c.expect((pen == ExtReal(Rational(0))) == inside,
                     "penalty disagrees with hull membership at the root");

            DensityProcess a1 = normalize_from(a, one);
            ConditionalValue pen1 = penalty_sharp(U.conditioned(one), a1, one);
            for (NodeId m : one.stop_nodes()) {
                ExtReal pm = pen1.at_node(m);
                c.expect(pm == ExtReal(Rational(0)) || pm.is_neg_inf(),
                         "conditional penalty off the two-point range");
                auto sup = window_nodes(tree, m, F0.window().hi);
                std::vector<Rational> av;
                for (NodeId n : sup) av.push_back(a1.increment(n));
                bool in1 = hull_membership(av, hull_generators(Q, m, sup)).inside;
                c.expect((pm == ExtReal(Rational(0))) == in1,
                         "conditional penalty disagrees with hull membership");
            }
        }
    }

    // duality bound, including a concave representation with a finite penalty
    std::vector<UtilityProcess> robust = coherent;
    StoppingTime zero = StoppingTime::constant(tree, 0);
    std::map<NodeId, Rational> ones;
    for (NodeId leaf : tree.leaves()) ones[leaf] = 1;
    robust.push_back(robust_from(
        tree,
        {build_density_final(leaf_density(tree, {2, 0, 1, 1})),
         build_density_final(TerminalDensity(tree, ones))},
        PenaltyFunction({ConditionalValue(zero, {ExtReal(Rational(-1))}),
                         ConditionalValue(zero, {ExtReal(Rational(0))})})));

    for (const UtilityProcess& U : robust) {
        const ScenarioSet& Q = *std::get<RepRobust>(U.rep()).scenarios;
        UtilityFunctional F0 = U.member(0);
        for (int i = 0; i < 25; ++i) {
            DensityProcess a = random_density(Q);
            AdaptedProcess X = random_process(tree, F0.window(), rng);
            ExtReal lhs = penalty_sharp(F0, a).at_node(tree.root());
            ExtReal rhs = pairing(X, a, F0.window()).at_node(tree.root()) -
                          eval(F0, X).at_node(tree.root());
            c.expect(lhs <= rhs, "duality bound violated");
        }
    }
    return c.ok;
}

bool criterion_penalty_recursion(Checker& c, FixtureStore& store) {
    const FiltrationTree& tree = store.tree("counterexample");
    StoppingTime zero = StoppingTime::constant(tree, 0);
    StoppingTime end = StoppingTime::constant(tree, tree.horizon());
    Rng rng(kSeed + 4);

    std::vector<UtilityProcess> fixtures = {
        load_utility(store, fixture("robust_final.json")),
        load_utility(store, fixture("stopped_scenarios.json")),
        robust_from(tree, counterexample_closure(tree))};
    std::vector<StoppingTime> thetas = {
        StoppingTime::constant(tree, 1), StoppingTime::constant(tree, 2),
        StoppingTime(tree, {tree.node_by_label("n1"), tree.node_by_label("w3"),
                            tree.node_by_label("w4")})};

    for (const UtilityProcess& U : fixtures) {
        const ScenarioSet& Q = *std::get<RepRobust>(U.rep()).scenarios;
        UtilityFunctional F0 = U.conditioned(zero);
        for (const StoppingTime& theta : thetas) {
            std::vector<DensityProcess> tails;
            for (int i = 0; i < Q.size(); ++i) tails.push_back(normalize_from(Q.at(i), theta));
            ScenarioSet candidates(tree, Window(theta, end), tails);
            UtilityFunctional Fth = U.conditioned(theta);

            int members = std::min(Q.size(), 8);
            for (int i = 0; i < members; ++i) {
                const DensityProcess& a = Q.at(i);
                ConsistencyReport rep = check_penalty_recursion(U, a, zero, theta, candidates);
                c.expect(rep.verdict == Verdict::CERTIFIED_ON_BATTERY,
                         "lower bound failed at a representing scenario");

                // equality of both sides, recomputed from the public pieces
                ConditionalValue lhs = penalty_sharp(F0, a, zero);
                ConditionalValue carried =
                    coarsen_expectation(penalty_sharp(Fth, a, theta), zero);
                std::vector<ExtReal> best(lhs.size(), ExtReal::neg_inf());
                for (const DensityProcess& b : tails) {
                    ConditionalValue term =
                        penalty_sharp(F0, concat(a, b, theta, theta.stop_nodes()), zero);
                    for (int k = 0; k < lhs.size(); ++k) {
                        ExtReal cand = term.at_index(k) + carried.at_index(k);
                        if (best[k] < cand) best[k] = cand;
                    }
                }
                for (int k = 0; k < lhs.size(); ++k)
                    c.expect(lhs.at_index(k) == best[k],
                             "recursion not tight at a representing scenario");
            }

            for (int i = 0; i < 10; ++i) {
                DensityProcess a = build_density_final(random_positive_terminal(tree, rng));
                ConsistencyReport rep = check_penalty_recursion(U, a, zero, theta, candidates);
                c.expect(rep.verdict != Verdict::REFUTED,
                         "lower bound failed on a random density");
            }
        }
    }
    return c.ok;
}

bool criterion_pasting(Checker& c, FixtureStore& store) {
    const FiltrationTree& tree = store.tree("counterexample");
    Window full = Window::full(tree);
    UtilityProcess mean = load_utility(store, fixture("robust_final.json"));

    UtilityProcess chain = extend_process(period_mean(tree, 0, 1), period_mean(tree, 1, 2));
    auto battery = make_battery(tree, full, 100, kSeed);
    battery.emplace_back(tree, full, counterexample_values(tree));
    ConsistencyReport rep = check_time_consistency(chain, battery, Mode::ALL_STOPPING_TIMES);
    c.expect(rep.verdict == Verdict::CERTIFIED_ON_BATTERY, "composed chain failed the sweep");

    UtilityProcess tail_id = extend_process(mean, period_mean(tree, 2, 2));
    UtilityProcess head_id = extend_process(period_mean(tree, 0, 0), mean);
    for (const AdaptedProcess& x : battery)
        for (int t = 0; t <= tree.horizon(); ++t) {
            AdaptedProcess xt = project(x, Window::span(tree, t, tree.horizon()));
            ConditionalValue ref = eval(mean.member(t), xt);
            c.expect(eval(chain.member(t), xt) == ref, "chain differs from the global mean");
            c.expect(eval(tail_id.member(t), xt) == ref, "horizon paste is not the identity");
            c.expect(eval(head_id.member(t), xt) == ref, "start paste is not the identity");
        }
    return c.ok;
}

struct AxiomInstance {
    std::string name;
    UtilityProcess U;
};

bool criterion_axioms(Checker& c, FixtureStore& store) {
    const FiltrationTree& tree = store.tree("counterexample");
    StoppingTime zero = StoppingTime::constant(tree, 0);
    Rng rng(kSeed + 5);

    FiltrationTree small = FiltrationTree::build(make_random_tree(rng, 3, 2, 500));
    std::map<NodeId, Rational> ones_small, ones;
    for (NodeId leaf : small.leaves()) ones_small[leaf] = 1;
    for (NodeId leaf : tree.leaves()) ones[leaf] = 1;

    std::map<std::string, std::vector<AxiomInstance>> by_tag;
    by_tag["ROBUST"] = {
        {"unit mean", load_utility(store, fixture("robust_final.json"))},
        {"stopped family", load_utility(store, fixture("stopped_scenarios.json"))},
        {"closure", robust_from(tree, counterexample_closure(tree))},
        {"unstable pair", robust_from(tree, {build_density_final(leaf_density(tree, {2, 0, 1, 1})),
                                             build_density_final(leaf_density(tree, {1, 1, 2, 0}))})},
        {"concave", robust_from(
                        tree,
                        {build_density_final(leaf_density(tree, {2, 0, 1, 1})),
                         build_density_final(TerminalDensity(tree, ones))},
                        PenaltyFunction({ConditionalValue(zero, {ExtReal(Rational(-1))}),
                                         ConditionalValue(zero, {ExtReal(Rational(0))})}))}};
    by_tag["ENTROPIC"] = {
        {"reference", load_utility(store, fixture("entropic.json"))},
        {"random tree",
         UtilityProcess(small, 0, small.horizon(),
                        UtilityFunctional::entropic(small, Window::full(small),
                                                    {TerminalDensity(small, ones_small)})
                            .rep_ptr())}};
    by_tag["AGGREGATED"] = {
        {"running minimum", load_utility(store, fixture("counterexample_inftime.json"))},
        {"time averaged", load_utility(store, fixture("weighted.json"))}};
    by_tag["WORST_STOPPING"] = {
        {"stopping mean", load_utility(store, fixture("worst_stopping.json"))},
        {"stopping entropic",
         UtilityProcess(tree, 0, tree.horizon(),
                        UtilityFunctional::worst_stopping(tree, Window::full(tree),
                                                          SnellBase::ENTROPIC,
                                                          {TerminalDensity(tree, ones)})
                            .rep_ptr())}};
    by_tag["PASTED"] = {
        {"chain", extend_process(period_mean(tree, 0, 1), period_mean(tree, 1, 2))},
        {"identity paste", extend_process(load_utility(store, fixture("robust_final.json")),
                                          period_mean(tree, 2, 2))}};

    for (auto& [tag, instances] : by_tag) {
        Checker local;
        // phi(0) = 0 once per instance
        for (const AxiomInstance& inst : instances) {
            UtilityFunctional F = inst.U.member(inst.U.start());
            ExtReal z = eval(F, AdaptedProcess::zero(inst.U.tree(), F.window()))
                            .at_node(inst.U.tree().root());
            local.expect(F.exact() ? z == ExtReal(Rational(0))
                                   : z.approx_equal(ExtReal(Rational(0)), kFloatTol),
                         tag + ": value at zero is not zero");
        }

        int round = 0;
        while (local.count < 1000) {
            ++round;
            for (const AxiomInstance& inst : instances) {
                const FiltrationTree& tr = inst.U.tree();
                UtilityFunctional F1 = inst.U.member(1);
                const Window& w = F1.window();
                bool exact = F1.exact();
                ExtReal slack = exact ? ExtReal(Rational(0)) : ExtReal(Rational(kFloatTol));
                auto leq = [&](const ExtReal& a, const ExtReal& b) { return a <= b + slack; };
                auto eq = [&](const ExtReal& a, const ExtReal& b) {
                    return exact ? a == b : a.approx_equal(b, kFloatTol);
                };

                AdaptedProcess X = random_process(tr, w, rng);
                AdaptedProcess Y = random_process(tr, w, rng);
                ConditionalValue vX = eval(F1, X);
                ConditionalValue vY = eval(F1, Y);
                const auto& atoms = vX.anchor().stop_nodes();

                // locality: glue X and Y along a split of the time-1 atoms
                std::vector<NodeId> A(atoms.begin(), atoms.begin() + atoms.size() / 2);
                std::vector<NodeId> B(atoms.begin() + atoms.size() / 2, atoms.end());
                ConditionalValue vG = eval(F1, X.masked(A) + Y.masked(B));
                for (std::size_t k = 0; k < atoms.size(); ++k) {
                    bool inA = k < A.size();
                    local.expect(eq(vG.at_index((int)k),
                                    (inA ? vX : vY).at_index((int)k)),
                                 tag + ": locality failed");
                }

                // monotonicity
                ConditionalValue vM = eval(F1, X + random_nonneg(tr, w, rng));
                for (int k = 0; k < vX.size(); ++k)
                    local.expect(leq(vX.at_index(k), vM.at_index(k)),
                                 tag + ": monotonicity failed");

                // translation by a time-1 measurable shift
                std::vector<ExtReal> shift;
                for (std::size_t k = 0; k < atoms.size(); ++k)
                    shift.push_back(ExtReal(rng.small_rational()));
                ConditionalValue m(vX.anchor(), shift);
                ConditionalValue vT = eval(F1, X.translated(m));
                for (int k = 0; k < vX.size(); ++k)
                    local.expect(eq(vT.at_index(k), vX.at_index(k) + m.at_index(k)),
                                 tag + ": translation failed");

                // concavity
                Rational lam = Rational(Rational(rng.uniform(0, 8)) / 8);
                ConditionalValue vC = eval(F1, X.scaled(lam) + Y.scaled(Rational(1 - lam)));
                for (int k = 0; k < vX.size(); ++k)
                    local.expect(leq(vX.at_index(k).scaled(lam) +
                                         vY.at_index(k).scaled(Rational(1 - lam)),
                                     vC.at_index(k)),
                                 tag + ": concavity failed");

                // positive homogeneity on coherent representations
                if (F1.coherent()) {
                    Rational cc = Rational(Rational(rng.uniform(0, 6)) / 2);
                    ConditionalValue vH = eval(F1, X.scaled(cc));
                    for (int k = 0; k < vX.size(); ++k)
                        local.expect(eq(vH.at_index(k), vX.at_index(k).scaled(cc)),
                                     tag + ": homogeneity failed");
                }

                // Lipschitz bound in the window supremum
                ConditionalValue d = sup_norm(X - Y, w);
                for (int k = 0; k < vX.size(); ++k) {
                    local.expect(leq(vX.at_index(k) - vY.at_index(k), d.at_index(k)) &&
                                     leq(vY.at_index(k) - vX.at_index(k), d.at_index(k)),
                                 tag + ": Lipschitz bound failed");
                }

                // recovery from the acceptance set
                if (round % 10 == 1) {
                    ConditionalValue rec = recover_from_acceptance(F1, X);
                    for (int k = 0; k < vX.size(); ++k)
                        local.expect(rec.at_index(k).approx_equal(vX.at_index(k), kFloatTol),
                                     tag + ": recovery drifted");
                }
            }
        }
        c.expect(local.ok, local.first);
        c.count += local.count;
        if (!local.ok) return false;
    }
    return c.ok;
}

bool criterion_homomorphisms(Checker& c, FixtureStore& store) {
    Rng rng(kSeed + 6);
    std::vector<FiltrationTree> trees;
    trees.push_back(FiltrationTree::build(counterexample_tree_spec()));
    trees.push_back(FiltrationTree::build(make_random_tree(rng, 3, 3, 300)));
    (void)store;

    int done = 0;
    for (const FiltrationTree& tree : trees) {
        auto sigmas = enumerate_stopping_times(tree, 0, 300);
        for (int i = 0; i < 50; ++i, ++done) {
            TerminalDensity f = random_positive_terminal(tree, rng);
            TerminalDensity g = random_positive_terminal(tree, rng);
            const StoppingTime& theta = sigmas[rng.uniform(0, (long)sigmas.size() - 1)];
            std::vector<NodeId> A;
            for (NodeId m : theta.stop_nodes())
                if (rng.coin()) A.push_back(m);

            TerminalDensity fg = paste_density(f, g, theta, A);
            c.expect(concat(build_density_final(f), build_density_final(g), theta, A) ==
                         build_density_final(fg),
                     "terminal-mass concatenation is not the paste");

            std::vector<Rational> mu = random_weights(tree, rng);
            c.expect(concat(build_density_weighted(f, mu), build_density_weighted(g, mu), theta,
                            A) == build_density_weighted(fg, mu),
                     "weighted concatenation is not the paste");
        }
    }
    c.expect(done == 100, "fewer than 100 draws");
    return c.ok;
}

struct Row {
    int idx;
    std::string label;
    bool (*fn)(Checker&, FixtureStore&);
    double budget; // seconds; 0 = no limit
};

bool run_snell(Checker& c, FixtureStore&) { return criterion_snell_oracle(c); }

} // namespace

int main() {
    FixtureStore store;
    std::vector<Row> rows = {
        {1, "worked counterexample: exact values, one-step refutation", criterion_counterexample,
         1.0},
        {2, "stopping envelope equals exhaustive enumeration", run_snell, 30.0},
        {3, "concatenation-closed scenario sets pass the sweep; unstable pair refuted",
         criterion_stable_closures, 0},
        {4, "exponential-utility one-step recursion within 1e-10", criterion_entropic_one_step,
         0},
        {5, "coherent penalty dichotomy matches hull membership; duality bound",
         criterion_penalty_duality, 0},
        {6, "penalty recursion lower bound, tight at the representing set",
         criterion_penalty_recursion, 0},
        {7, "per-period pasting composes; endpoint pastes are identities", criterion_pasting, 0},
        {8, "axiom battery: 1000 randomized checks per representation", criterion_axioms, 0},
        {9, "pasting homomorphisms on terminal and weighted densities",
         criterion_homomorphisms, 0},
    };

    int failures = 0;
    for (const Row& row : rows) {
        Checker c;
        std::string detail;
        bool ok = false;
        auto t0 = std::chrono::steady_clock::now();
        try {
            ok = row.fn(c, store);
            detail = c.first;
        } catch (const std::exception& e) {
            detail = e.what();
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (ok && row.budget > 0 && secs > row.budget) {
            ok = false;
            detail = "over the " + std::to_string(row.budget) + "s budget";
        }
        std::cout << (ok ? "PASS" : "FAIL") << "  " << row.idx << ". " << row.label << "  ["
                  << c.count << " checks, " << std::fixed << std::setprecision(2) << secs
                  << "s]";
        if (!ok) std::cout << "  -- " << detail;
        std::cout << "\n";
        if (!ok) ++failures;
    }
    std::cout << (failures == 0 ? "all criteria satisfied" : "criteria failing") << "\n";
    return failures == 0 ? 0 : 1;
}
