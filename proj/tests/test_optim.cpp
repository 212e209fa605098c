#include "doctest.h"
#include "dynarisk/optim.hpp"
#include "helpers.hpp"

using namespace dynarisk;

namespace {

Rational dot(const std::vector<Rational>& a, const std::vector<Rational>& b) {
    Rational s(0);
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace

TEST_CASE("bounded minimization") {
    LinearProgram lp;
    lp.num_vars = 1;
    lp.objective = {Rational(1)};
    lp.add_row({Rational(1)}, LinearProgram::Rel::GE, Rational(3));
    LpSolution s = lp_solve(lp);
    REQUIRE(s.status == LpSolution::Status::OPTIMAL);
    CHECK(s.value == 3);
    CHECK(s.x == std::vector<Rational>{Rational(3)});
}

TEST_CASE("unbounded problems carry an improving ray") {
    LinearProgram lp;
    lp.num_vars = 1;
    lp.objective = {Rational(1)};
    lp.add_row({Rational(1)}, LinearProgram::Rel::LE, Rational(3));
    LpSolution s = lp_solve(lp);
    REQUIRE(s.status == LpSolution::Status::UNBOUNDED);
    REQUIRE(s.ray.size() == 1);
    CHECK(s.ray[0] == -1);
}

TEST_CASE("infeasibility is detected") {
    LinearProgram lp;
    lp.num_vars = 1;
    lp.objective = {Rational(0)};
    lp.add_row({Rational(1)}, LinearProgram::Rel::GE, Rational(1));
    lp.add_row({Rational(1)}, LinearProgram::Rel::LE, Rational(0));
    CHECK(lp_solve(lp).status == LpSolution::Status::INFEASIBLE);
}

TEST_CASE("two variable vertex solution") {
    // min -x - 2y subject to x + y <= 4, x <= 3, y <= 2, x >= 0, y >= 0
    LinearProgram lp;
    lp.num_vars = 2;
    lp.objective = {Rational(-1), Rational(-2)};
    lp.add_row({Rational(1), Rational(1)}, LinearProgram::Rel::LE, Rational(4));
    lp.add_row({Rational(1), Rational(0)}, LinearProgram::Rel::LE, Rational(3));
    lp.add_row({Rational(0), Rational(1)}, LinearProgram::Rel::LE, Rational(2));
    lp.add_row({Rational(1), Rational(0)}, LinearProgram::Rel::GE, Rational(0));
    lp.add_row({Rational(0), Rational(1)}, LinearProgram::Rel::GE, Rational(0));
    LpSolution s = lp_solve(lp);
    REQUIRE(s.status == LpSolution::Status::OPTIMAL);
    CHECK(s.value == -6);
    CHECK(s.x == std::vector<Rational>{Rational(2), Rational(2)});
}

TEST_CASE("equality rows and fractional optima") {
    // min x + y subject to 2x + 3y = 1, x - y >= 1/5. Substituting
    // x = (1 - 3y)/2 gives objective 1/2 - y/2 with y capped at 3/25
    // by the inequality, so the optimum sits where it binds.
    LinearProgram lp;
    lp.num_vars = 2;
    lp.objective = {Rational(1), Rational(1)};
    lp.add_row({Rational(2), Rational(3)}, LinearProgram::Rel::EQ, Rational(1));
    lp.add_row({Rational(1), Rational(-1)}, LinearProgram::Rel::GE, Rational(1, 5));
    LpSolution s = lp_solve(lp);
    REQUIRE(s.status == LpSolution::Status::OPTIMAL);
    CHECK(s.x == std::vector<Rational>{Rational(8, 25), Rational(3, 25)});
    CHECK(s.value == Rational(11, 25));
}

TEST_CASE("strong duality on a solved instance") {
    LinearProgram lp;
    lp.num_vars = 2;
    lp.objective = {Rational(3), Rational(1)};
    lp.add_row({Rational(1), Rational(1)}, LinearProgram::Rel::GE, Rational(2));
    lp.add_row({Rational(1), Rational(-1)}, LinearProgram::Rel::LE, Rational(1));
    lp.add_row({Rational(1), Rational(0)}, LinearProgram::Rel::GE, Rational(0));
    lp.add_row({Rational(0), Rational(1)}, LinearProgram::Rel::GE, Rational(0));
    LpSolution primal = lp_solve(lp);
    REQUIRE(primal.status == LpSolution::Status::OPTIMAL);
    CHECK(primal.value == 2);

    LpSolution dual = lp_solve(dual_of(lp));
    REQUIRE(dual.status == LpSolution::Status::OPTIMAL);
    CHECK(dual.value == -primal.value); // dual is stated as a minimization too
}

TEST_CASE("hull membership with certificates") {
    std::vector<std::vector<Rational>> gens = {
        {Rational(0), Rational(0)}, {Rational(1), Rational(0)}, {Rational(0), Rational(1)}};

    SUBCASE("a generator is inside with unit weight") {
        HullResult r = hull_membership(gens[1], gens);
        REQUIRE(r.inside);
        Rational total(0);
        std::vector<Rational> recon(2, Rational(0));
        for (std::size_t i = 0; i < gens.size(); ++i) {
            total += r.weights[i];
            for (int k = 0; k < 2; ++k) recon[k] += r.weights[i] * gens[i][k];
        }
        CHECK(total == 1);
        CHECK(recon == gens[1]);
    }

    SUBCASE("midpoints are inside") {
        CHECK(hull_membership({Rational(1, 2), Rational(1, 2)}, gens).inside);
        CHECK(hull_membership({Rational(1, 4), Rational(1, 4)}, gens).inside);
    }

    SUBCASE("outside points come with a strict separator") {
        std::vector<Rational> p = {Rational(1), Rational(1)};
        HullResult r = hull_membership(p, gens);
        REQUIRE_FALSE(r.inside);
        REQUIRE(r.separator.size() == 2);
        Rational at_p = dot(r.separator, p);
        Rational best = dot(r.separator, gens[0]);
        for (const auto& g : gens) {
            Rational v = dot(r.separator, g);
            if (v < best) best = v;
        }
        CHECK(at_p < best);
        CHECK(r.gap == best - at_p);
        CHECK(r.gap > 0);
    }
}
