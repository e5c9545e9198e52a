#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ehwsn::lp {

// Dense two-phase tableau simplex with Bland's rule, sized for toy problems.
//   minimize c'x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0.
struct Problem {
    std::vector<double> c;
    std::vector<std::vector<double>> A_eq, A_ub;
    std::vector<double> b_eq, b_ub;
};

struct Result {
    bool feasible = false;
    double value = std::numeric_limits<double>::infinity();
    std::vector<double> x;
};

namespace detail {

struct Tableau {
    int m = 0, n = 0;  // rows, columns (excluding rhs)
    std::vector<std::vector<double>> t;
    std::vector<int> basis;

    void pivot(int r, int col) {
        double pv = t[r][col];
        for (double& v : t[r]) v /= pv;
        for (int i = 0; i < static_cast<int>(t.size()); ++i) {
            if (i == r) continue;
            double f = t[i][col];
            if (f == 0.0) continue;
            for (int j = 0; j <= n; ++j) t[i][j] -= f * t[r][j];
        }
        basis[r] = col;
    }

    // Minimizes the objective stored in row m over columns < limit.
    bool run(int limit) {
        const double eps = 1e-11;
        for (int iter = 0; iter < 100000; ++iter) {
            int col = -1;
            for (int j = 0; j < limit; ++j)
                if (t[m][j] < -eps) {
                    col = j;
                    break;
                }
            if (col < 0) return true;
            int row = -1;
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m; ++i) {
                if (t[i][col] <= eps) continue;
                double ratio = t[i][n] / t[i][col];
                if (ratio < best - 1e-14 || (std::abs(ratio - best) <= 1e-14 && row >= 0 && basis[i] < basis[row])) {
                    best = ratio;
                    row = i;
                }
            }
            if (row < 0) return false;
            pivot(row, col);
        }
        throw std::runtime_error("simplex: iteration limit");
    }
};

}  // namespace detail

inline Result solve(const Problem& p) {
    const int nx = static_cast<int>(p.c.size());
    const int meq = static_cast<int>(p.A_eq.size());
    const int mub = static_cast<int>(p.A_ub.size());
    const int m = meq + mub;
    // columns: x | slacks (ub) | artificials (all rows)
    const int ns = mub, na = m;
    const int n = nx + ns + na;
    detail::Tableau T;
    T.m = m;
    T.n = n;
    T.t.assign(static_cast<std::size_t>(m + 1), std::vector<double>(static_cast<std::size_t>(n + 1), 0.0));
    T.basis.assign(static_cast<std::size_t>(m), 0);
    for (int i = 0; i < m; ++i) {
        bool eq = i < meq;
        const auto& row = eq ? p.A_eq[static_cast<std::size_t>(i)] : p.A_ub[static_cast<std::size_t>(i - meq)];
        double rhs = eq ? p.b_eq[static_cast<std::size_t>(i)] : p.b_ub[static_cast<std::size_t>(i - meq)];
        double sign = rhs < 0 ? -1.0 : 1.0;
        auto& tr = T.t[static_cast<std::size_t>(i)];
        for (int j = 0; j < nx; ++j) tr[static_cast<std::size_t>(j)] = sign * row[static_cast<std::size_t>(j)];
        if (!eq) tr[static_cast<std::size_t>(nx + (i - meq))] = sign;
        tr[static_cast<std::size_t>(nx + ns + i)] = 1.0;
        tr[static_cast<std::size_t>(n)] = sign * rhs;
        T.basis[static_cast<std::size_t>(i)] = nx + ns + i;
    }
    // phase one: minimize the sum of artificials
    auto& obj = T.t[static_cast<std::size_t>(m)];
    for (int i = 0; i < m; ++i)
        for (int j = 0; j <= n; ++j)
            if (j < nx + ns || j == n) obj[static_cast<std::size_t>(j)] -= T.t[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    T.run(n);
    Result res;
    if (-obj[static_cast<std::size_t>(n)] > 1e-8) return res;
    // drive artificials out of the basis where possible
    for (int i = 0; i < m; ++i) {
        if (T.basis[static_cast<std::size_t>(i)] < nx + ns) continue;
        for (int j = 0; j < nx + ns; ++j)
            if (std::abs(T.t[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) > 1e-9) {
                T.pivot(i, j);
                break;
            }
    }
    // phase two
    std::fill(obj.begin(), obj.end(), 0.0);
    for (int j = 0; j < nx; ++j) obj[static_cast<std::size_t>(j)] = p.c[static_cast<std::size_t>(j)];
    for (int i = 0; i < m; ++i) {
        int b = T.basis[static_cast<std::size_t>(i)];
        double cb = b < nx ? p.c[static_cast<std::size_t>(b)] : 0.0;
        if (cb == 0.0) continue;
        for (int j = 0; j <= n; ++j) obj[static_cast<std::size_t>(j)] -= cb * T.t[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    if (!T.run(nx + ns)) throw std::runtime_error("simplex: unbounded");
    res.feasible = true;
    res.x.assign(static_cast<std::size_t>(nx), 0.0);
    for (int i = 0; i < m; ++i) {
        int b = T.basis[static_cast<std::size_t>(i)];
        if (b < nx) res.x[static_cast<std::size_t>(b)] = T.t[static_cast<std::size_t>(i)][static_cast<std::size_t>(n)];
    }
    res.value = 0.0;
    for (int j = 0; j < nx; ++j) res.value += p.c[static_cast<std::size_t>(j)] * res.x[static_cast<std::size_t>(j)];
    return res;
}

}  // namespace ehwsn::lp
