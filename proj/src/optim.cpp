#include "dynarisk/optim.hpp"

#include <algorithm>

#include "dynarisk/errors.hpp"

namespace dynarisk {

void LinearProgram::add_row(std::vector<Rational> coeffs, Rel rel, Rational rhs) {
    require(static_cast<int>(coeffs.size()) == num_vars, ErrorCode::DimensionMismatch,
            "row width != num_vars");
    rows.push_back(Row{std::move(coeffs), rel, std::move(rhs)});
}

const char* lp_status_name(LpSolution::Status s) {
    switch (s) {
        case LpSolution::Status::OPTIMAL: return "OPTIMAL";
        case LpSolution::Status::INFEASIBLE: return "INFEASIBLE";
        case LpSolution::Status::UNBOUNDED: return "UNBOUNDED";
    }
    return "?";
}

namespace {

// Dense simplex tableau over nonnegative variables. Columns are laid out as
// [split structural vars | slacks | artificials]; each free variable x_k of
// the input becomes col(2k) - col(2k+1).
struct Tableau {
    int rows = 0;
    int cols = 0; // excluding the rhs column
    std::vector<std::vector<Rational>> a; // rows x (cols + 1), rhs last
    std::vector<Rational> cost;           // cols + 1, objective value (negated) last
    std::vector<int> basis;               // basic column per row
    std::vector<char> disabled;           // columns banned from entering

    void pivot(int r, int c) {
        Rational p = a[r][c];
        for (int j = 0; j <= cols; ++j) a[r][j] /= p;
        for (int i = 0; i < rows; ++i) {
            if (i == r || a[i][c] == 0) continue;
            Rational f = a[i][c];
            for (int j = 0; j <= cols; ++j) a[i][j] -= f * a[r][j];
        }
        if (cost[c] != 0) {
            Rational f = cost[c];
            for (int j = 0; j <= cols; ++j) cost[j] -= f * a[r][j];
        }
        basis[r] = c;
    }

    // Bland: lowest-index eligible column; lowest basic index on ties.
    // Returns 0 on optimal, 1 after a pivot, -1 on unbounded (col in *ub).
    int step(int* ub_col) {
        int enter = -1;
        for (int j = 0; j < cols; ++j) {
            if (disabled[j]) continue;
            if (cost[j] < 0) {
                enter = j;
                break;
            }
        }
        if (enter < 0) return 0;
        int leave = -1;
        Rational best;
        for (int i = 0; i < rows; ++i) {
            if (a[i][enter] <= 0) continue;
            Rational ratio = a[i][cols] / a[i][enter];
            if (leave < 0 || ratio < best || (ratio == best && basis[i] < basis[leave])) {
                leave = i;
                best = ratio;
            }
        }
        if (leave < 0) {
            if (ub_col) *ub_col = enter;
            return -1;
        }
        pivot(leave, enter);
        return 1;
    }
};

void verify_solution(const LinearProgram& lp, const LpSolution& sol) {
    if (sol.status == LpSolution::Status::OPTIMAL) {
        Rational obj(0);
        for (int j = 0; j < lp.num_vars; ++j) obj += lp.objective[j] * sol.x[j];
        require(obj == sol.value, ErrorCode::LPFailure, "objective mismatch at optimum");
        for (const auto& row : lp.rows) {
            Rational lhs(0);
            for (int j = 0; j < lp.num_vars; ++j) lhs += row.coeffs[j] * sol.x[j];
            bool ok = row.rel == LinearProgram::Rel::LE   ? lhs <= row.rhs
                      : row.rel == LinearProgram::Rel::GE ? lhs >= row.rhs
                                                          : lhs == row.rhs;
            require(ok, ErrorCode::LPFailure, "optimum violates a constraint");
        }
    } else if (sol.status == LpSolution::Status::UNBOUNDED) {
        Rational drop(0);
        for (int j = 0; j < lp.num_vars; ++j) drop += lp.objective[j] * sol.ray[j];
        require(drop < 0, ErrorCode::LPFailure, "ray does not improve the objective");
        for (const auto& row : lp.rows) {
            Rational lhs(0);
            for (int j = 0; j < lp.num_vars; ++j) lhs += row.coeffs[j] * sol.ray[j];
            bool ok = row.rel == LinearProgram::Rel::LE   ? lhs <= 0
                      : row.rel == LinearProgram::Rel::GE ? lhs >= 0
                                                          : lhs == 0;
            require(ok, ErrorCode::LPFailure, "ray leaves the feasible cone");
        }
    }
}

} // namespace

LpSolution lp_solve(const LinearProgram& lp) {
    require(static_cast<int>(lp.objective.size()) == lp.num_vars, ErrorCode::DimensionMismatch,
            "objective width != num_vars");
    for (const auto& row : lp.rows)
        require(static_cast<int>(row.coeffs.size()) == lp.num_vars, ErrorCode::DimensionMismatch,
                "row width != num_vars");

    int m = static_cast<int>(lp.rows.size());
    int split = 2 * lp.num_vars;
    int nslack = 0;
    for (const auto& row : lp.rows)
        if (row.rel != LinearProgram::Rel::EQ) ++nslack;

    Tableau t;
    t.rows = m;
    t.cols = split + nslack + m; // artificial block sized for the worst case
    t.a.assign(m, std::vector<Rational>(t.cols + 1, Rational(0)));
    t.cost.assign(t.cols + 1, Rational(0));
    t.basis.assign(m, -1);
    t.disabled.assign(t.cols, 0);

    int slack_at = split;
    int art_at = split + nslack;
    std::vector<int> artificials;
    for (int i = 0; i < m; ++i) {
        const auto& row = lp.rows[i];
        bool neg = row.rhs < 0;
        Rational sgn = neg ? Rational(-1) : Rational(1);
        for (int j = 0; j < lp.num_vars; ++j) {
            t.a[i][2 * j] = sgn * row.coeffs[j];
            t.a[i][2 * j + 1] = -sgn * row.coeffs[j];
        }
        t.a[i][t.cols] = sgn * row.rhs;
        Rational slack_coeff(0);
        if (row.rel == LinearProgram::Rel::LE) slack_coeff = sgn;
        else if (row.rel == LinearProgram::Rel::GE) slack_coeff = -sgn;
        if (slack_coeff != 0) {
            t.a[i][slack_at] = slack_coeff;
            if (slack_coeff == 1) t.basis[i] = slack_at;
            ++slack_at;
        }
        if (t.basis[i] < 0) {
            t.a[i][art_at] = 1;
            t.basis[i] = art_at;
            artificials.push_back(art_at);
            ++art_at;
        }
    }
    for (int j = art_at; j < t.cols; ++j) t.disabled[j] = 1; // unused artificial slots

    // Phase 1: minimize the artificial sum, priced out against the basis.
    if (!artificials.empty()) {
        for (int c : artificials) t.cost[c] = 1;
        for (int i = 0; i < m; ++i) {
            if (t.cost[t.basis[i]] == 0) continue;
            Rational f = t.cost[t.basis[i]];
            for (int j = 0; j <= t.cols; ++j) t.cost[j] -= f * t.a[i][j];
        }
        int ub = -1;
        while (true) {
            int r = t.step(&ub);
            if (r == 0) break;
            require(r != -1, ErrorCode::LPFailure, "phase 1 unbounded");
        }
        if (-t.cost[t.cols] > 0) {
            LpSolution sol;
            sol.status = LpSolution::Status::INFEASIBLE;
            return sol;
        }
        // Drive leftover artificials out of the basis; drop redundant rows
        // by leaving them pinned at zero and banning re-entry.
        for (int i = 0; i < m; ++i) {
            bool is_art = std::find(artificials.begin(), artificials.end(), t.basis[i]) !=
                          artificials.end();
            if (!is_art) continue;
            int col = -1;
            for (int j = 0; j < split + nslack; ++j)
                if (t.a[i][j] != 0) {
                    col = j;
                    break;
                }
            if (col >= 0) t.pivot(i, col);
        }
        for (int c : artificials) t.disabled[c] = 1;
    }

    // Phase 2 with the real objective.
    std::fill(t.cost.begin(), t.cost.end(), Rational(0));
    for (int j = 0; j < lp.num_vars; ++j) {
        t.cost[2 * j] = lp.objective[j];
        t.cost[2 * j + 1] = -lp.objective[j];
    }
    for (int i = 0; i < m; ++i) {
        if (t.cost[t.basis[i]] == 0) continue;
        Rational f = t.cost[t.basis[i]];
        for (int j = 0; j <= t.cols; ++j) t.cost[j] -= f * t.a[i][j];
    }

    LpSolution sol;
    int ub = -1;
    while (true) {
        int r = t.step(&ub);
        if (r == 0) break;
        if (r == -1) {
            std::vector<Rational> dir(t.cols, Rational(0));
            dir[ub] = 1;
            for (int i = 0; i < t.rows; ++i) dir[t.basis[i]] = -t.a[i][ub];
            sol.status = LpSolution::Status::UNBOUNDED;
            sol.ray.assign(lp.num_vars, Rational(0));
            for (int j = 0; j < lp.num_vars; ++j) sol.ray[j] = dir[2 * j] - dir[2 * j + 1];
            verify_solution(lp, sol);
            return sol;
        }
    }

    std::vector<Rational> vals(t.cols, Rational(0));
    for (int i = 0; i < m; ++i) vals[t.basis[i]] = t.a[i][t.cols];
    sol.status = LpSolution::Status::OPTIMAL;
    sol.x.assign(lp.num_vars, Rational(0));
    for (int j = 0; j < lp.num_vars; ++j) sol.x[j] = vals[2 * j] - vals[2 * j + 1];
    sol.value = -t.cost[t.cols];
    verify_solution(lp, sol);
    return sol;
}

LinearProgram dual_of(const LinearProgram& lp) {
    LinearProgram d;
    int m = static_cast<int>(lp.rows.size());
    d.num_vars = m;
    d.objective.resize(m);
    for (int i = 0; i < m; ++i) d.objective[i] = -lp.rows[i].rhs; // max b.y as min -b.y
    // Free primal variables give equality dual constraints A^T y = c.
    for (int j = 0; j < lp.num_vars; ++j) {
        std::vector<Rational> col(m);
        for (int i = 0; i < m; ++i) col[i] = lp.rows[i].coeffs[j];
        d.add_row(std::move(col), LinearProgram::Rel::EQ, lp.objective[j]);
    }
    for (int i = 0; i < m; ++i) {
        if (lp.rows[i].rel == LinearProgram::Rel::EQ) continue;
        std::vector<Rational> sign(m, Rational(0));
        sign[i] = 1;
        auto rel = lp.rows[i].rel == LinearProgram::Rel::GE ? LinearProgram::Rel::GE
                                                            : LinearProgram::Rel::LE;
        d.add_row(std::move(sign), rel, Rational(0));
    }
    return d;
}

HullResult hull_membership(const std::vector<Rational>& point,
                           const std::vector<std::vector<Rational>>& generators) {
    require(!generators.empty(), ErrorCode::DimensionMismatch, "no generators");
    int dim = static_cast<int>(point.size());
    int k = static_cast<int>(generators.size());
    for (const auto& g : generators)
        require(static_cast<int>(g.size()) == dim, ErrorCode::DimensionMismatch,
                "generator dimension mismatch");

    LinearProgram member;
    member.num_vars = k;
    member.objective.assign(k, Rational(0));
    for (int d = 0; d < dim; ++d) {
        std::vector<Rational> row(k);
        for (int i = 0; i < k; ++i) row[i] = generators[i][d];
        member.add_row(std::move(row), LinearProgram::Rel::EQ, point[d]);
    }
    member.add_row(std::vector<Rational>(k, Rational(1)), LinearProgram::Rel::EQ, Rational(1));
    for (int i = 0; i < k; ++i) {
        std::vector<Rational> row(k, Rational(0));
        row[i] = 1;
        member.add_row(std::move(row), LinearProgram::Rel::GE, Rational(0));
    }

    HullResult res;
    LpSolution sol = lp_solve(member);
    if (sol.status == LpSolution::Status::OPTIMAL) {
        res.inside = true;
        res.weights = sol.x;
        return res;
    }

    // Separation: maximize the margin t with the functional box-normalized.
    LinearProgram sep;
    sep.num_vars = dim + 1; // functional coords then t
    sep.objective.assign(dim + 1, Rational(0));
    sep.objective[dim] = -1; // max t
    for (int i = 0; i < k; ++i) {
        std::vector<Rational> row(dim + 1, Rational(0));
        for (int d = 0; d < dim; ++d) row[d] = generators[i][d] - point[d];
        row[dim] = -1;
        sep.add_row(std::move(row), LinearProgram::Rel::GE, Rational(0));
    }
    for (int d = 0; d < dim; ++d) {
        std::vector<Rational> lo(dim + 1, Rational(0)), hi(dim + 1, Rational(0));
        lo[d] = 1;
        hi[d] = 1;
        sep.add_row(std::move(lo), LinearProgram::Rel::GE, Rational(-1));
        sep.add_row(std::move(hi), LinearProgram::Rel::LE, Rational(1));
    }
    LpSolution s = lp_solve(sep);
    require(s.status == LpSolution::Status::OPTIMAL, ErrorCode::LPFailure, "separation LP failed");
    require(s.x[dim] > 0, ErrorCode::LPFailure, "no separating margin for an infeasible hull");
    res.inside = false;
    res.separator.assign(s.x.begin(), s.x.begin() + dim);
    res.gap = s.x[dim];
    // Certificate check: the separator strictly undercuts every generator.
    for (const auto& g : generators) {
        Rational diff(0);
        for (int d = 0; d < dim; ++d) diff += res.separator[d] * (g[d] - point[d]);
        require(diff >= res.gap, ErrorCode::LPFailure, "separator certificate failed");
    }
    return res;
}

} // namespace dynarisk
