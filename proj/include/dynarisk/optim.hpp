#pragma once

#include <vector>

#include "dynarisk/rational.hpp"

namespace dynarisk {

// Minimization over free variables with row constraints. All data exact.
struct LinearProgram {
    enum class Rel { LE, GE, EQ };
    struct Row {
        std::vector<Rational> coeffs;
        Rel rel;
        Rational rhs;
    };

    int num_vars = 0;
    std::vector<Rational> objective;
    std::vector<Row> rows;

    void add_row(std::vector<Rational> coeffs, Rel rel, Rational rhs);
};

struct LpSolution {
    enum class Status { OPTIMAL, INFEASIBLE, UNBOUNDED };
    Status status = Status::INFEASIBLE;
    std::vector<Rational> x;    // optimum when OPTIMAL
    Rational value;             // objective at the optimum
    std::vector<Rational> ray;  // improving direction when UNBOUNDED
};

const char* lp_status_name(LpSolution::Status s);

// Exact two-phase primal simplex with Bland's rule. Certificates are
// re-verified against the input before returning.
LpSolution lp_solve(const LinearProgram& lp);

// Lagrangian dual in the same canonical form (free duals for EQ rows,
// signed duals for inequalities, equality constraints from free primal
// variables). lp_solve(dual_of(lp)).value == -lp_solve(lp).value whenever
// both are OPTIMAL.
LinearProgram dual_of(const LinearProgram& lp);

struct HullResult {
    bool inside = false;
    std::vector<Rational> weights;    // convex weights over generators when inside
    std::vector<Rational> separator;  // functional with <x,point> < min_i <x,gen_i> otherwise
    Rational gap;                     // that minimum minus <x,point>, > 0 when outside
};

// Membership of a point in the convex hull of finitely many generators,
// with an exact certificate either way.
HullResult hull_membership(const std::vector<Rational>& point,
                           const std::vector<std::vector<Rational>>& generators);

} // namespace dynarisk
