#pragma once

#include <string>

#include "doctest.h"
#include "dynarisk/errors.hpp"
#include "dynarisk/fixtures.hpp"

namespace dtest {

inline std::string fixture(const std::string& name) {
    return std::string(DYNARISK_FIXTURE_DIR) + "/" + name;
}

// One store per test binary so every fixture referencing the builtin tree
// resolves to the same FiltrationTree instance.
inline dynarisk::FixtureStore& store() {
    static dynarisk::FixtureStore s;
    return s;
}

inline const dynarisk::FiltrationTree& ce_tree() {
    return store().tree("counterexample", ".");
}

template <typename Fn>
void expect_code(Fn&& fn, dynarisk::ErrorCode code) {
    try {
        fn();
        FAIL_CHECK("expected error " << dynarisk::error_code_name(code) << ", none thrown");
    } catch (const dynarisk::Error& e) {
        CHECK(e.code() == code);
    }
}

} // namespace dtest
