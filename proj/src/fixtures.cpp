#include "dynarisk/fixtures.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace dynarisk {

namespace fs = std::filesystem;
using nlohmann::json;

TreeSpec counterexample_tree_spec() {
    TreeSpec spec;
    spec.horizon = 2;
    spec.nodes = {
        {"root", 0, ""}, {"n1", 1, "root"}, {"n2", 1, "root"}, {"w1", 2, "n1"},
        {"w2", 2, "n1"}, {"w3", 2, "n2"},   {"w4", 2, "n2"},
    };
    for (const char* w : {"w1", "w2", "w3", "w4"}) spec.leaf_probs[w] = Rational(1, 4);
    return spec;
}

std::vector<Rational> counterexample_values(const FiltrationTree& tree) {
    std::vector<Rational> raw(tree.node_count(), Rational(0));
    auto set = [&](const char* label, long num) { raw[tree.node_by_label(label)] = num; };
    set("root", 2);
    set("n1", 4);
    set("n2", 1);
    set("w1", 5);
    set("w2", 1);
    set("w3", 2);
    set("w4", -1);
    return raw;
}

UtilityProcess counterexample_process(const FiltrationTree& tree) {
    std::map<NodeId, Rational> ones;
    for (NodeId leaf : tree.leaves()) ones[leaf] = 1;
    auto rep = std::make_shared<Rep>(
        RepAggregated{{TerminalDensity(tree, std::move(ones))}, AggKind::INF_TIME, {}});
    return UtilityProcess(tree, 0, tree.horizon(), std::move(rep));
}

ExtReal parse_ext(const std::string& text) {
    if (text == "-inf") return ExtReal::neg_inf();
    if (text == "inf" || text == "+inf") return ExtReal::pos_inf();
    return ExtReal(parse_rational(text));
}

namespace {

json read_json(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::FixtureParseError, "cannot open fixture '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::FixtureParseError, "bad JSON in '" + path + "': " + e.what());
    }
}

std::string dir_of(const std::string& path) {
    fs::path p(path);
    auto parent = p.parent_path();
    return parent.empty() ? std::string(".") : parent.string();
}

const json& field(const json& j, const char* name, const std::string& path) {
    auto it = j.find(name);
    require(it != j.end(), ErrorCode::FixtureParseError,
            "fixture '" + path + "' lacks field '" + name + "'");
    return *it;
}

Rational rational_field(const json& j, const std::string& path) {
    try {
        if (j.is_number_integer()) return Rational(j.get<long>());
        return parse_rational(j.get<std::string>());
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(ErrorCode::FixtureParseError, "bad rational in '" + path + "': " + e.what());
    }
}

// Per-node rational map keyed by node label; unlisted nodes are zero.
std::vector<Rational> node_map(const json& j, const FiltrationTree& tree,
                               const std::string& path) {
    require(j.is_object(), ErrorCode::FixtureParseError,
            "fixture '" + path + "' node map is not an object");
    std::vector<Rational> out(tree.node_count(), Rational(0));
    for (const auto& [label, value] : j.items())
        out[tree.node_by_label(label)] = rational_field(value, path);
    return out;
}

Window window_field(const json& j, const FiltrationTree& tree, const std::string& path,
                    int default_lo, int default_hi) {
    int lo = default_lo, hi = default_hi;
    if (j.contains("window")) {
        const json& w = j["window"];
        require(w.is_array() && w.size() == 2, ErrorCode::FixtureParseError,
                "fixture '" + path + "' window must be [lo, hi]");
        lo = w[0].get<int>();
        hi = w[1].get<int>();
    }
    return Window::span(tree, lo, hi);
}

std::vector<TerminalDensity> density_set(const json& arr, const FiltrationTree& tree,
                                         const std::string& path) {
    require(arr.is_array() && !arr.empty(), ErrorCode::FixtureParseError,
            "fixture '" + path + "' needs a non-empty density array");
    std::vector<TerminalDensity> out;
    for (const auto& entry : arr) {
        std::map<NodeId, Rational> leaf_values;
        for (const auto& [label, value] : entry.items())
            leaf_values[tree.node_by_label(label)] = rational_field(value, path);
        out.emplace_back(tree, std::move(leaf_values));
    }
    return out;
}

} // namespace

const FiltrationTree& FixtureStore::tree(const std::string& ref, const std::string& base_dir) {
    std::string key;
    if (ref == "counterexample") {
        key = ref;
    } else {
        fs::path p(ref);
        if (p.is_relative()) p = fs::path(base_dir) / p;
        key = fs::weakly_canonical(p).string();
    }
    auto it = m_trees.find(key);
    if (it != m_trees.end()) return *it->second;

    TreeSpec spec;
    if (ref == "counterexample") {
        spec = counterexample_tree_spec();
    } else {
        json j = read_json(key);
        spec.horizon = field(j, "horizon", key).get<int>();
        for (const auto& n : field(j, "nodes", key)) {
            TreeSpec::NodeSpec ns;
            ns.id = field(n, "id", key).get<std::string>();
            ns.time = field(n, "time", key).get<int>();
            if (n.contains("parent") && !n["parent"].is_null())
                ns.parent = n["parent"].get<std::string>();
            spec.nodes.push_back(std::move(ns));
        }
        for (const auto& [label, value] : field(j, "leaf_probs", key).items())
            spec.leaf_probs[label] = rational_field(value, key);
    }
    auto built = std::make_unique<FiltrationTree>(FiltrationTree::build(spec));
    const FiltrationTree& out = *built;
    m_trees.emplace(std::move(key), std::move(built));
    return out;
}

AdaptedProcess load_process(FixtureStore& store, const std::string& path) {
    json j = read_json(path);
    const FiltrationTree& tree =
        store.tree(field(j, "tree", path).get<std::string>(), dir_of(path));
    Window w = window_field(j, tree, path, 0, tree.horizon());
    return AdaptedProcess(tree, w, node_map(field(j, "values", path), tree, path));
}

DensityProcess load_density(FixtureStore& store, const std::string& path) {
    json j = read_json(path);
    const FiltrationTree& tree =
        store.tree(field(j, "tree", path).get<std::string>(), dir_of(path));
    return DensityProcess(tree, node_map(field(j, "increments", path), tree, path));
}

std::shared_ptr<ScenarioSet> load_scenarios(FixtureStore& store, const std::string& path) {
    json j = read_json(path);
    const FiltrationTree& tree =
        store.tree(field(j, "tree", path).get<std::string>(), dir_of(path));
    Window w = window_field(j, tree, path, 0, tree.horizon());
    const json& arr = field(j, "densities", path);
    require(arr.is_array() && !arr.empty(), ErrorCode::FixtureParseError,
            "fixture '" + path + "' needs a non-empty density array");
    std::vector<DensityProcess> densities;
    for (const auto& entry : arr) densities.emplace_back(tree, node_map(entry, tree, path));
    return std::make_shared<ScenarioSet>(tree, std::move(w), std::move(densities));
}

UtilityProcess load_utility(FixtureStore& store, const std::string& path) {
    json j = read_json(path);
    const FiltrationTree& tree =
        store.tree(field(j, "tree", path).get<std::string>(), dir_of(path));
    Window w = window_field(j, tree, path, 0, tree.horizon());
    require(w.lo.is_constant(w.lo.min_time()) && w.hi.is_constant(w.hi.min_time()),
            ErrorCode::FixtureParseError, "utility fixtures use integer windows");
    int start = w.lo.min_time(), end = w.hi.min_time();
    std::string tag = field(j, "tag", path).get<std::string>();

    try {
        std::shared_ptr<const Rep> rep;
        if (tag == "ROBUST") {
            const json& arr = field(j, "scenarios", path);
            require(arr.is_array() && !arr.empty(), ErrorCode::FixtureParseError,
                    "fixture '" + path + "' needs a non-empty scenario array");
            std::vector<DensityProcess> densities;
            for (const auto& entry : arr) densities.emplace_back(tree, node_map(entry, tree, path));
            auto Q = std::make_shared<ScenarioSet>(tree, w, std::move(densities));
            std::optional<PenaltyFunction> penalty;
            if (j.contains("penalty")) {
                const json& parr = j["penalty"];
                require(parr.is_array() && parr.size() == static_cast<std::size_t>(Q->size()),
                        ErrorCode::FixtureParseError, "one penalty map per scenario required");
                const StoppingTime& anchor = w.lo;
                std::vector<ConditionalValue> vals;
                for (const auto& entry : parr) {
                    std::vector<ExtReal> atom_vals(anchor.stop_nodes().size(),
                                                   ExtReal(Rational(0)));
                    for (const auto& [label, value] : entry.items()) {
                        NodeId n = tree.node_by_label(label);
                        auto pos =
                            std::find(anchor.stop_nodes().begin(), anchor.stop_nodes().end(), n);
                        require(pos != anchor.stop_nodes().end(), ErrorCode::FixtureParseError,
                                "penalty key '" + label + "' is not a window-start atom");
                        atom_vals[pos - anchor.stop_nodes().begin()] =
                            parse_ext(value.get<std::string>());
                    }
                    vals.emplace_back(anchor, std::move(atom_vals));
                }
                penalty = PenaltyFunction(std::move(vals));
            }
            rep = UtilityFunctional::robust(tree, std::move(Q), std::move(penalty)).rep_ptr();
        } else if (tag == "ENTROPIC") {
            rep = UtilityFunctional::entropic(
                      tree, w, density_set(field(j, "densities", path), tree, path))
                      .rep_ptr();
        } else if (tag == "AGGREGATED") {
            std::string kind = field(j, "kind", path).get<std::string>();
            require(kind == "INF_TIME" || kind == "WEIGHTED", ErrorCode::FixtureParseError,
                    "unknown aggregation kind '" + kind + "'");
            std::vector<Rational> mu;
            if (kind == "WEIGHTED")
                for (const auto& value : field(j, "weights", path))
                    mu.push_back(rational_field(value, path));
            rep = UtilityFunctional::aggregated(
                      tree, w, density_set(field(j, "densities", path), tree, path),
                      kind == "WEIGHTED" ? AggKind::WEIGHTED : AggKind::INF_TIME, std::move(mu))
                      .rep_ptr();
        } else if (tag == "WORST_STOPPING") {
            std::string base = field(j, "base", path).get<std::string>();
            require(base == "PSET" || base == "ENTROPIC", ErrorCode::FixtureParseError,
                    "unknown stopping base '" + base + "'");
            rep = UtilityFunctional::worst_stopping(
                      tree, w, base == "PSET" ? SnellBase::PSET : SnellBase::ENTROPIC,
                      density_set(field(j, "densities", path), tree, path))
                      .rep_ptr();
        } else {
            fail(ErrorCode::FixtureParseError, "unknown tag '" + tag + "' in '" + path + "'");
        }
        return UtilityProcess(tree, start, end, std::move(rep));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::FixtureParseError) throw;
        fail(ErrorCode::FixtureParseError, "fixture '" + path + "' fails validation: " + e.what());
    }
}

} // namespace dynarisk
