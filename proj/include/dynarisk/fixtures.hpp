#pragma once

#include <map>
#include <memory>
#include <string>

#include "dynarisk/consistency.hpp"

namespace dynarisk {

// Canonical 7-node two-period tree: four equally likely terminal states
// grouped pairwise at time 1. Small enough to hand-check, rich enough to
// defeat non-recursive aggregation.
TreeSpec counterexample_tree_spec();

// The payoff pattern on that tree whose running minimum loses recursivity:
// raw node values ordered by node id.
std::vector<Rational> counterexample_values(const FiltrationTree& tree);

// Running-minimum aggregation under the reference measure on [0, horizon];
// the stock refutation target.
UtilityProcess counterexample_process(const FiltrationTree& tree);

// "-inf" | "inf" | "p/q".
ExtReal parse_ext(const std::string& text);

// Loads and caches trees so every object parsed from fixtures can hold a
// stable reference. Tree references are either the builtin id
// "counterexample" or a file path, resolved relative to the referring
// fixture's directory.
class FixtureStore {
public:
    const FiltrationTree& tree(const std::string& ref, const std::string& base_dir = ".");

private:
    std::map<std::string, std::unique_ptr<FiltrationTree>> m_trees;
};

// {tree, values:{node: "p/q"}, window?: [lo, hi]}; unlisted nodes are 0.
AdaptedProcess load_process(FixtureStore& store, const std::string& path);

// {tree, increments:{node: "p/q"}}; unlisted nodes are 0.
DensityProcess load_density(FixtureStore& store, const std::string& path);

// {tree, window: [lo, hi], densities: [{node: "p/q"}, ...]}.
std::shared_ptr<ScenarioSet> load_scenarios(FixtureStore& store, const std::string& path);

// {tag, tree, window?: [start, end], scenarios|densities, penalty?,
// weights?, kind?, base?}. Returns the family on [start, end].
UtilityProcess load_utility(FixtureStore& store, const std::string& path);

} // namespace dynarisk
