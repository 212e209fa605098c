#include "dynarisk/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dynarisk/optim.hpp"

namespace dynarisk {

PenaltyFunction::PenaltyFunction(std::vector<ConditionalValue> values) : m_values(std::move(values)) {
    require(!m_values.empty(), ErrorCode::NormalizationViolation, "penalty with no scenarios");
    const StoppingTime& anchor = m_values[0].anchor();
    for (const auto& v : m_values)
        require(v.anchor() == anchor, ErrorCode::AnchorMismatch, "penalty anchors differ");
    for (int atom = 0; atom < m_values[0].size(); ++atom) {
        ExtReal sup = ExtReal::neg_inf();
        for (const auto& v : m_values) {
            const ExtReal& g = v.at_index(atom);
            require(g <= ExtReal(Rational(0)), ErrorCode::NormalizationViolation,
                    "penalty value above zero");
            require(!g.is_pos_inf(), ErrorCode::NormalizationViolation, "penalty value +inf");
            sup = max(sup, g);
        }
        require(sup == ExtReal(Rational(0)), ErrorCode::NormalizationViolation,
                "per-atom penalty supremum is " + sup.str() + ", not 0");
    }
}

PenaltyFunction PenaltyFunction::zero(const StoppingTime& anchor, int scenario_count) {
    std::vector<ConditionalValue> vals(scenario_count,
                                       ConditionalValue::constant(anchor, ExtReal(Rational(0))));
    return PenaltyFunction(std::move(vals));
}

const ExtReal& PenaltyFunction::at(int scenario, NodeId anchor_atom) const {
    return m_values[scenario].at_node(anchor_atom);
}

bool PenaltyFunction::is_zero() const {
    for (const auto& v : m_values)
        for (const auto& g : v.values())
            if (!(g == ExtReal(Rational(0)))) return false;
    return true;
}

const char* tag_name(Tag t) {
    switch (t) {
        case Tag::ROBUST: return "ROBUST";
        case Tag::ENTROPIC: return "ENTROPIC";
        case Tag::AGGREGATED: return "AGGREGATED";
        case Tag::WORST_STOPPING: return "WORST_STOPPING";
        case Tag::PASTED: return "PASTED";
    }
    return "?";
}

Tag rep_tag(const Rep& rep) {
    if (std::holds_alternative<RepRobust>(rep)) return Tag::ROBUST;
    if (std::holds_alternative<RepEntropic>(rep)) return Tag::ENTROPIC;
    if (std::holds_alternative<RepAggregated>(rep)) return Tag::AGGREGATED;
    if (std::holds_alternative<RepWorstStopping>(rep)) return Tag::WORST_STOPPING;
    return Tag::PASTED;
}

bool rep_is_exact(const Rep& rep) {
    if (std::holds_alternative<RepEntropic>(rep)) return false;
    if (const auto* w = std::get_if<RepWorstStopping>(&rep)) return w->base == SnellBase::PSET;
    if (const auto* p = std::get_if<RepPasted>(&rep)) return p->early->exact() && p->late->exact();
    return true;
}

namespace {

void check_pset(const FiltrationTree& tree, const std::vector<TerminalDensity>& P) {
    require(!P.empty(), ErrorCode::EmptyScenarioSet, "empty density set");
    for (const auto& f : P) {
        require(f.tree().same(tree), ErrorCode::TreeMismatch, "density on different tree");
        require(f.strictly_positive(), ErrorCode::NonPositiveDensity,
                "density not strictly positive");
    }
}

Rational pairing_at(const AdaptedProcess& x, const DensityProcess& a, NodeId m,
                    const StoppingTime& hi) {
    const FiltrationTree& tree = x.tree();
    Rational acc(0);
    for (NodeId n : window_nodes(tree, m, hi)) acc += tree.prob(n) * x.at(n) * a.increment(n);
    return Rational(acc / tree.prob(m));
}

// Bottom-up conditional expectations E[f | node] for every node.
std::vector<Rational> terminal_expectations(const TerminalDensity& f) {
    const FiltrationTree& tree = f.tree();
    std::vector<Rational> e(tree.node_count(), Rational(0));
    for (NodeId leaf : tree.leaves()) e[leaf] = f.at_leaf(leaf);
    for (int t = tree.horizon() - 1; t >= 0; --t)
        for (NodeId n : tree.nodes_at_time(t)) {
            Rational acc(0);
            for (NodeId c : tree.children(n)) acc += tree.prob(c) * e[c];
            e[n] = acc / tree.prob(n);
        }
    return e;
}

double log_sum_exp(const std::vector<double>& terms) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double t : terms) mx = std::max(mx, t);
    if (!std::isfinite(mx)) return mx;
    double s = 0;
    for (double t : terms) s += std::exp(t - mx);
    return mx + std::log(s);
}

} // namespace

UtilityFunctional::UtilityFunctional(const FiltrationTree& tree, Window window,
                                     std::shared_ptr<const Rep> rep)
    : m_tree(&tree), m_window(std::move(window)), m_rep(std::move(rep)) {
    require(m_window.tree().same(tree), ErrorCode::TreeMismatch, "window on different tree");
}

UtilityFunctional UtilityFunctional::robust(const FiltrationTree& tree,
                                            std::shared_ptr<const ScenarioSet> Q,
                                            std::optional<PenaltyFunction> penalty) {
    require(Q != nullptr, ErrorCode::EmptyScenarioSet, "missing scenario set");
    Window w = Q->window();
    if (penalty) {
        require(penalty->scenario_count() == Q->size(), ErrorCode::DimensionMismatch,
                "one penalty entry per scenario required");
        require(penalty->for_scenario(0).anchor() == w.lo, ErrorCode::AnchorMismatch,
                "penalty not anchored at the window start");
    }
    auto rep = std::make_shared<Rep>(RepRobust{std::move(Q), std::move(penalty)});
    return UtilityFunctional(tree, std::move(w), std::move(rep));
}

UtilityFunctional UtilityFunctional::entropic(const FiltrationTree& tree, Window window,
                                              std::vector<TerminalDensity> P) {
    check_pset(tree, P);
    auto rep = std::make_shared<Rep>(RepEntropic{std::move(P)});
    return UtilityFunctional(tree, std::move(window), std::move(rep));
}

UtilityFunctional UtilityFunctional::aggregated(const FiltrationTree& tree, Window window,
                                                std::vector<TerminalDensity> P, AggKind kind,
                                                std::vector<Rational> mu) {
    check_pset(tree, P);
    if (kind == AggKind::WEIGHTED) {
        require(static_cast<int>(mu.size()) == tree.horizon() + 1, ErrorCode::BadWeights,
                "need one weight per time in [0, horizon]");
        Rational total(0);
        for (const auto& w : mu) {
            require(w >= 0, ErrorCode::BadWeights, "negative weight");
            total += w;
        }
        require(total == 1, ErrorCode::BadWeights, "weights sum to " + rational_str(total));
        for (int u = window.lo.min_time(); u <= window.hi.max_time(); ++u) {
            Rational tail(0);
            for (int s = u; s <= tree.horizon(); ++s) tail += mu[s];
            require(tail > 0, ErrorCode::BadWeights,
                    "weight tail vanishes at time " + std::to_string(u));
        }
    } else {
        require(mu.empty(), ErrorCode::BadWeights, "weights given for an unweighted aggregation");
    }
    auto rep = std::make_shared<Rep>(RepAggregated{std::move(P), kind, std::move(mu)});
    return UtilityFunctional(tree, std::move(window), std::move(rep));
}

UtilityFunctional UtilityFunctional::worst_stopping(const FiltrationTree& tree, Window window,
                                                    SnellBase base, std::vector<TerminalDensity> P) {
    check_pset(tree, P);
    auto rep = std::make_shared<Rep>(RepWorstStopping{base, std::move(P)});
    return UtilityFunctional(tree, std::move(window), std::move(rep));
}

UtilityFunctional UtilityFunctional::trivial(const FiltrationTree& tree, int t) {
    std::vector<Rational> incr(tree.node_count(), Rational(0));
    for (NodeId n : tree.nodes_at_time(t)) incr[n] = 1;
    Window w = Window::span(tree, t, t);
    auto Q = std::make_shared<ScenarioSet>(tree, w,
                                           std::vector<DensityProcess>{DensityProcess(tree, incr)});
    return robust(tree, std::move(Q));
}

bool UtilityFunctional::coherent() const {
    if (const auto* r = std::get_if<RepRobust>(m_rep.get()))
        return !r->penalty || r->penalty->is_zero();
    if (std::holds_alternative<RepEntropic>(*m_rep)) return false;
    if (std::holds_alternative<RepAggregated>(*m_rep)) return true;
    if (const auto* w = std::get_if<RepWorstStopping>(m_rep.get()))
        return w->base == SnellBase::PSET;
    const auto& p = std::get<RepPasted>(*m_rep);
    return p.early->member(p.early->start()).coherent() &&
           p.late->member(p.late->start()).coherent();
}

UtilityProcess::UtilityProcess(const FiltrationTree& tree, int start, int end,
                               std::shared_ptr<const Rep> rep)
    : m_tree(&tree), m_start(start), m_end(end), m_rep(std::move(rep)) {
    require(0 <= start && start <= end && end <= tree.horizon(), ErrorCode::WindowOrderViolation,
            "process range outside [0, horizon]");
    if (const auto* r = std::get_if<RepRobust>(m_rep.get())) {
        require(r->scenarios->window() == Window::span(tree, start, end),
                ErrorCode::WindowViolation, "scenario window must match the process range");
    }
}

UtilityFunctional UtilityProcess::member(int t) const {
    require(t >= m_start && t <= m_end, ErrorCode::WindowViolation,
            "member time outside the process range");
    return UtilityFunctional(*m_tree, Window::span(*m_tree, t, m_end), m_rep);
}

UtilityFunctional UtilityProcess::conditioned(const StoppingTime& tau) const {
    require(tau.min_time() >= m_start && tau.max_time() <= m_end, ErrorCode::WindowViolation,
            "conditioning time outside the process range");
    return UtilityFunctional(*m_tree, Window(tau, StoppingTime::constant(*m_tree, m_end)), m_rep);
}

namespace {

ExtReal eval_node(const FiltrationTree& tree, const Rep& rep, const StoppingTime& hi,
                  const AdaptedProcess& Xp, NodeId m);

ExtReal eval_robust_node(const RepRobust& r, const StoppingTime& hi, const AdaptedProcess& Xp,
                         NodeId m) {
    const ScenarioSet& Q = *r.scenarios;
    NodeId anchor_atom = Q.window().lo.stop_at_or_above(m);
    require(anchor_atom != kNoNode, ErrorCode::WindowViolation,
            "evaluation node before the scenario window");
    ExtReal best = ExtReal::pos_inf();
    for (int i = 0; i < Q.size(); ++i) {
        if (r.penalty) {
            const ExtReal& g = r.penalty->at(i, anchor_atom);
            if (g.is_neg_inf()) continue;
        }
        Rational mass = conditional_mass_at(Q.at(i), m, hi);
        if (mass == 0) continue;
        Rational val = pairing_at(Xp, Q.at(i), m, hi) / mass;
        if (r.penalty) val -= r.penalty->at(i, anchor_atom).value();
        best = min(best, ExtReal(val));
    }
    return best;
}

ExtReal eval_entropic_node(const FiltrationTree& tree, const RepEntropic& r,
                           const AdaptedProcess& Xp, NodeId m) {
    double best = std::numeric_limits<double>::infinity();
    std::vector<NodeId> leaves = tree.leaves_under(m);
    std::vector<double> lx(leaves.size());
    for (size_t i = 0; i < leaves.size(); ++i) lx[i] = to_double(Xp.at(leaves[i]));
    for (const auto& f : r.densities) {
        std::vector<double> num(leaves.size()), den(leaves.size());
        for (size_t i = 0; i < leaves.size(); ++i) {
            double logpf = std::log(to_double(tree.prob(leaves[i]))) +
                           std::log(to_double(f.at_leaf(leaves[i])));
            num[i] = logpf - lx[i];
            den[i] = logpf;
        }
        double v = -(log_sum_exp(num) - log_sum_exp(den));
        best = std::min(best, v);
    }
    return ExtReal(rational_from_double(best));
}

ExtReal eval_aggregated_node(const FiltrationTree& tree, const RepAggregated& r,
                             const AdaptedProcess& Xp, NodeId m) {
    int u = tree.time(m);
    // Pathwise aggregate into a leaf map.
    std::map<NodeId, Rational> ymap;
    if (r.kind == AggKind::INF_TIME) {
        // Running minimum from m down.
        std::vector<std::pair<NodeId, Rational>> stack = {{m, Xp.at(m)}};
        while (!stack.empty()) {
            auto [n, acc] = stack.back();
            stack.pop_back();
            Rational cur = std::min(acc, Xp.at(n));
            if (tree.is_leaf(n)) ymap[n] = cur;
            else
                for (NodeId c : tree.children(n)) stack.push_back({c, cur});
        }
    } else {
        Rational tail(0);
        for (int s = u; s <= tree.horizon(); ++s) tail += r.mu[s];
        require(tail > 0, ErrorCode::BadWeights, "weight tail vanishes inside the window");
        for (NodeId leaf : tree.leaves_under(m)) {
            Rational acc(0);
            for (int s = u; s <= tree.horizon(); ++s)
                acc += r.mu[s] * Xp.at(tree.ancestor_at(leaf, s));
            ymap[leaf] = acc / tail;
        }
    }
    // Worst conditional mean over the density set.
    ExtReal best = ExtReal::pos_inf();
    for (const auto& f : r.densities) {
        Rational num(0), den(0);
        for (const auto& [leaf, y] : ymap) {
            Rational w = tree.prob(leaf) * f.at_leaf(leaf);
            num += w * y;
            den += w;
        }
        best = min(best, ExtReal(Rational(num / den)));
    }
    return best;
}

// Backward induction values for the worst-stopping representation; defined
// at every node, reading X only on the subtree.
std::vector<ExtReal> snell_envelope(const FiltrationTree& tree, const RepWorstStopping& r,
                                    const AdaptedProcess& Xp) {
    std::vector<std::vector<Rational>> ef;
    ef.reserve(r.densities.size());
    for (const auto& f : r.densities) ef.push_back(terminal_expectations(f));

    std::vector<ExtReal> S(tree.node_count());
    for (NodeId leaf : tree.leaves()) S[leaf] = ExtReal(Xp.at(leaf));
    for (int t = tree.horizon() - 1; t >= 0; --t) {
        for (NodeId n : tree.nodes_at_time(t)) {
            ExtReal cont = ExtReal::pos_inf();
            if (r.base == SnellBase::PSET) {
                for (size_t i = 0; i < ef.size(); ++i) {
                    Rational num(0), den(0);
                    for (NodeId c : tree.children(n)) {
                        Rational w = tree.prob(c) * ef[i][c];
                        num += w * S[c].value();
                        den += w;
                    }
                    cont = min(cont, ExtReal(Rational(num / den)));
                }
            } else {
                double best = std::numeric_limits<double>::infinity();
                for (size_t i = 0; i < ef.size(); ++i) {
                    std::vector<double> num, den;
                    for (NodeId c : tree.children(n)) {
                        double lw = std::log(to_double(tree.prob(c))) + std::log(to_double(ef[i][c]));
                        num.push_back(lw - S[c].as_double());
                        den.push_back(lw);
                    }
                    best = std::min(best, -(log_sum_exp(num) - log_sum_exp(den)));
                }
                cont = ExtReal(rational_from_double(best));
            }
            S[n] = min(ExtReal(Xp.at(n)), cont);
        }
    }
    return S;
}

// psi evaluated at a terminal payoff given as a leaf map, at one node.
ExtReal psi_at_node(const FiltrationTree& tree, SnellBase base,
                    const std::vector<TerminalDensity>& P, const std::map<NodeId, Rational>& y,
                    NodeId m) {
    ExtReal best = ExtReal::pos_inf();
    if (base == SnellBase::PSET) {
        for (const auto& f : P) {
            Rational num(0), den(0);
            for (NodeId leaf : tree.leaves_under(m)) {
                Rational w = tree.prob(leaf) * f.at_leaf(leaf);
                num += w * y.at(leaf);
                den += w;
            }
            best = min(best, ExtReal(Rational(num / den)));
        }
    } else {
        double bd = std::numeric_limits<double>::infinity();
        for (const auto& f : P) {
            std::vector<double> num, den;
            for (NodeId leaf : tree.leaves_under(m)) {
                double lw = std::log(to_double(tree.prob(leaf))) +
                            std::log(to_double(f.at_leaf(leaf)));
                num.push_back(lw - to_double(y.at(leaf)));
                den.push_back(lw);
            }
            bd = std::min(bd, -(log_sum_exp(num) - log_sum_exp(den)));
        }
        best = ExtReal(rational_from_double(bd));
    }
    return best;
}

ExtReal eval_pasted_node(const FiltrationTree& tree, const RepPasted& r, const AdaptedProcess& Xp,
                         NodeId m) {
    StoppingTime late_hi = StoppingTime::constant(tree, r.late->end());
    if (tree.time(m) >= r.split) return eval_node(tree, r.late->rep(), late_hi, Xp, m);

    // phi_{t,S}(X 1_[t,S) + phi_{S,T}(X) 1_[S,infty)) under m.
    std::vector<Rational> raw = Xp.values();
    for (NodeId s : tree.nodes_at_time(r.split)) {
        if (!tree.is_ancestor_or_self(m, s)) continue;
        ExtReal v = eval_node(tree, r.late->rep(), late_hi, Xp, s);
        require(v.is_finite(), ErrorCode::LPFailure, "non-finite continuation value while pasting");
        std::vector<NodeId> stack = {s};
        while (!stack.empty()) {
            NodeId n = stack.back();
            stack.pop_back();
            raw[n] = v.value();
            for (NodeId c : tree.children(n)) stack.push_back(c);
        }
    }
    AdaptedProcess Y(tree, Window::full(tree), std::move(raw));
    StoppingTime early_hi = StoppingTime::constant(tree, r.split);
    return eval_node(tree, r.early->rep(), early_hi, Y, m);
}

ExtReal eval_node(const FiltrationTree& tree, const Rep& rep, const StoppingTime& hi,
                  const AdaptedProcess& Xp, NodeId m) {
    if (const auto* r = std::get_if<RepRobust>(&rep)) return eval_robust_node(*r, hi, Xp, m);
    if (const auto* r = std::get_if<RepEntropic>(&rep)) return eval_entropic_node(tree, *r, Xp, m);
    if (const auto* r = std::get_if<RepAggregated>(&rep))
        return eval_aggregated_node(tree, *r, Xp, m);
    if (const auto* r = std::get_if<RepWorstStopping>(&rep)) {
        std::vector<ExtReal> S = snell_envelope(tree, *r, Xp);
        return S[m];
    }
    return eval_pasted_node(tree, std::get<RepPasted>(rep), Xp, m);
}

void check_anchor_in_window(const UtilityFunctional& F, const StoppingTime& tau) {
    require(tau.tree().same(F.tree()), ErrorCode::TreeMismatch, "anchor on different tree");
    require(F.window().lo.leq(tau), ErrorCode::WindowViolation, "anchor before the window start");
    require(tau.leq(F.window().hi), ErrorCode::WindowViolation, "anchor after the window end");
}

} // namespace

ConditionalValue eval(const UtilityFunctional& F, const AdaptedProcess& X, const StoppingTime& tau) {
    check_anchor_in_window(F, tau);
    AdaptedProcess Xp = project(X, Window(tau, F.window().hi));
    std::vector<ExtReal> out;
    out.reserve(tau.stop_nodes().size());
    for (NodeId m : tau.stop_nodes()) out.push_back(eval_node(F.tree(), F.rep(), F.window().hi, Xp, m));
    return ConditionalValue(tau, std::move(out));
}

ConditionalValue eval(const UtilityFunctional& F, const AdaptedProcess& X) {
    return eval(F, X, F.window().lo);
}

ExtReal eval_at_node(const UtilityFunctional& F, const AdaptedProcess& X, NodeId m) {
    AdaptedProcess Xp = project(X, F.window());
    return eval_node(F.tree(), F.rep(), F.window().hi, Xp, m);
}

bool accepts(const UtilityFunctional& F, const AdaptedProcess& X) {
    ConditionalValue v = eval(F, X);
    if (F.exact()) return v.all_geq(ExtReal(Rational(0)));
    return v.all_geq(ExtReal(Rational(-float_tolerance())));
}

ConditionalValue recover_from_acceptance(const UtilityFunctional& F, const AdaptedProcess& X) {
    const StoppingTime& lo = F.window().lo;
    AdaptedProcess Xp = project(X, F.window());
    ConditionalValue norm = sup_norm(Xp, F.window());
    // Bisect against the exact boundary even for inexact representations:
    // translation invariance puts the supremum at eval(X), and a slackened
    // floor would bias the result a full tolerance upward.
    ExtReal floor_ok = ExtReal(Rational(0));

    std::vector<ExtReal> out;
    out.reserve(lo.stop_nodes().size());
    for (size_t idx = 0; idx < lo.stop_nodes().size(); ++idx) {
        NodeId m = lo.stop_nodes()[idx];
        auto accepted_at = [&](const Rational& f) {
            ConditionalValue shift = ConditionalValue::constant(lo, ExtReal(Rational(0)));
            std::vector<ExtReal> sv(shift.values());
            sv[idx] = ExtReal(Rational(-f));
            AdaptedProcess shifted = Xp.translated(ConditionalValue(lo, std::move(sv)));
            return eval_node(F.tree(), F.rep(), F.window().hi, shifted, m) >= floor_ok;
        };
        Rational radius = norm.at_index(idx).value() + 1;
        Rational lo_f = -radius, hi_f = radius;
        if (!accepted_at(lo_f)) {
            out.push_back(ExtReal::neg_inf());
            continue;
        }
        if (accepted_at(hi_f)) {
            out.push_back(ExtReal::pos_inf());
            continue;
        }
        for (int it = 0; it < 60; ++it) {
            Rational mid = (lo_f + hi_f) / 2;
            if (accepted_at(mid)) lo_f = mid;
            else hi_f = mid;
        }
        out.push_back(ExtReal(lo_f));
    }
    return ConditionalValue(lo, std::move(out));
}

ConditionalValue penalty_sharp(const UtilityFunctional& F, const DensityProcess& a,
                               const StoppingTime& tau) {
    require(F.tag() == Tag::ROBUST, ErrorCode::LPFailure,
            "penalty_sharp needs a robust representation");
    check_anchor_in_window(F, tau);
    require(a.tree().same(F.tree()), ErrorCode::TreeMismatch, "density on different tree");
    const auto& rep = std::get<RepRobust>(F.rep());
    const ScenarioSet& Q = *rep.scenarios;
    const FiltrationTree& tree = F.tree();
    const StoppingTime& hi = F.window().hi;

    std::vector<ExtReal> out;
    out.reserve(tau.stop_nodes().size());
    for (NodeId m : tau.stop_nodes()) {
        NodeId anchor_atom = Q.window().lo.stop_at_or_above(m);
        std::vector<NodeId> support = window_nodes(tree, m, hi);
        int nv = static_cast<int>(support.size());
        LinearProgram lp;
        lp.num_vars = nv;
        lp.objective.resize(nv);
        for (int k = 0; k < nv; ++k)
            lp.objective[k] = tree.prob(support[k]) * a.increment(support[k]) / tree.prob(m);
        for (int i = 0; i < Q.size(); ++i) {
            ExtReal g = rep.penalty ? rep.penalty->at(i, anchor_atom) : ExtReal(Rational(0));
            if (g.is_neg_inf()) continue;
            Rational mass = conditional_mass_at(Q.at(i), m, hi);
            if (mass == 0) continue;
            std::vector<Rational> row(nv);
            for (int k = 0; k < nv; ++k)
                row[k] = tree.prob(support[k]) * Q.at(i).increment(support[k]) / tree.prob(m);
            lp.add_row(std::move(row), LinearProgram::Rel::GE, Rational(g.value() * mass));
        }
        LpSolution sol = lp_solve(lp);
        if (sol.status == LpSolution::Status::UNBOUNDED) out.push_back(ExtReal::neg_inf());
        else if (sol.status == LpSolution::Status::OPTIMAL) out.push_back(ExtReal(sol.value));
        else fail(ErrorCode::LPFailure, "penalty LP infeasible though zero is admissible");
    }
    return ConditionalValue(tau, std::move(out));
}

ConditionalValue penalty_sharp(const UtilityFunctional& F, const DensityProcess& a) {
    return penalty_sharp(F, a, F.window().lo);
}

ConditionalValue gamma_ext(const std::function<ExtReal(const DensityProcess&, NodeId)>& gamma_at,
                           const DensityProcess& a, const StoppingTime& theta,
                           const StoppingTime& hi) {
    DensityProcess shifted = normalize_from(a, theta);
    std::vector<ExtReal> out;
    out.reserve(theta.stop_nodes().size());
    for (NodeId m : theta.stop_nodes()) {
        Rational mass = conditional_mass_at(a, m, hi);
        if (mass == 0) {
            out.push_back(ExtReal(Rational(0)));
            continue;
        }
        ExtReal g = gamma_at(shifted, m);
        require(g <= ExtReal(Rational(0)), ErrorCode::NormalizationViolation,
                "penalty value above zero");
        out.push_back(g.scaled(mass));
    }
    return ConditionalValue(theta, std::move(out));
}

RelevanceReport check_relevance(const UtilityFunctional& F) {
    const FiltrationTree& tree = F.tree();
    const StoppingTime& theta = F.window().hi;
    std::vector<Rational> eps_grid;
    if (F.coherent()) eps_grid.push_back(Rational(1));
    else
        for (int k = 0; k <= 10; ++k) eps_grid.push_back(Rational(1, 1L << k));

    RelevanceReport rep;
    for (NodeId s : theta.stop_nodes()) {
        NodeId anchor_atom = F.window().lo.stop_at_or_above(s);
        for (const auto& eps : eps_grid) {
            std::vector<Rational> raw(tree.node_count(), Rational(0));
            std::vector<NodeId> stack = {s};
            while (!stack.empty()) {
                NodeId n = stack.back();
                stack.pop_back();
                raw[n] = -eps;
                for (NodeId c : tree.children(n)) stack.push_back(c);
            }
            AdaptedProcess X(tree, F.window(), std::move(raw));
            ExtReal v = eval_node(tree, F.rep(), F.window().hi, X, anchor_atom);
            if (!(v < ExtReal(Rational(0)))) {
                rep.relevant = false;
                rep.witnesses.push_back(RelevanceWitness{s, eps});
                break;
            }
        }
    }
    return rep;
}

SnellResult snell_worst_stopping(const UtilityFunctional& F, const AdaptedProcess& X,
                                 const StoppingTime& tau) {
    require(F.tag() == Tag::WORST_STOPPING, ErrorCode::UsageError,
            "snell needs a worst-stopping representation");
    check_anchor_in_window(F, tau);
    const auto& rep = std::get<RepWorstStopping>(F.rep());
    const FiltrationTree& tree = F.tree();
    AdaptedProcess Xp = project(X, Window(tau, F.window().hi));
    std::vector<ExtReal> S = snell_envelope(tree, rep, Xp);

    // First node on each path, at or after tau, where the envelope meets the
    // payoff; leaves always match, so this is a full antichain.
    std::vector<ExtReal> vals;
    vals.reserve(tau.stop_nodes().size());
    std::vector<NodeId> exercise_nodes;
    for (NodeId m : tau.stop_nodes()) {
        vals.push_back(S[m]);
        std::vector<NodeId> stack = {m};
        while (!stack.empty()) {
            NodeId n = stack.back();
            stack.pop_back();
            if (S[n] == ExtReal(Xp.at(n))) {
                exercise_nodes.push_back(n);
                continue;
            }
            for (NodeId c : tree.children(n)) stack.push_back(c);
        }
    }

    SnellResult res{ConditionalValue(tau, vals), AdaptedProcess(),
                    StoppingTime(tree, exercise_nodes), false};

    std::vector<Rational> sraw(tree.node_count(), Rational(0));
    for (NodeId n = 0; n < tree.node_count(); ++n)
        if (S[n].is_finite()) sraw[n] = S[n].value();
    res.envelope = AdaptedProcess(tree, Window(tau, F.window().hi), std::move(sraw));

    ConditionalValue stopped = stopped_value(F, X, tau, res.exercise);
    res.certified = F.exact() ? res.values == stopped
                              : res.values.approx_equal(stopped, float_tolerance());
    return res;
}

ConditionalValue stopped_value(const UtilityFunctional& F, const AdaptedProcess& X,
                               const StoppingTime& tau, const StoppingTime& xi) {
    require(F.tag() == Tag::WORST_STOPPING, ErrorCode::UsageError,
            "stopped_value needs a worst-stopping representation");
    check_anchor_in_window(F, tau);
    require(tau.leq(xi), ErrorCode::WindowOrderViolation, "exercise before the anchor");
    const auto& rep = std::get<RepWorstStopping>(F.rep());
    const FiltrationTree& tree = F.tree();
    AdaptedProcess Xp = project(X, Window(tau, F.window().hi));
    std::map<NodeId, Rational> y;
    for (NodeId leaf : tree.leaves()) y[leaf] = Xp.at(xi.stop_on_path(leaf));
    std::vector<ExtReal> out;
    out.reserve(tau.stop_nodes().size());
    for (NodeId m : tau.stop_nodes())
        out.push_back(psi_at_node(tree, rep.base, rep.densities, y, m));
    return ConditionalValue(tau, std::move(out));
}

} // namespace dynarisk
