#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "rd_optimizer.hpp"
#include "region.hpp"

namespace ehwsn {

struct SideInfoConfig {
    double alpha_d = 1.0;
    double H_max_d = 12.0;
    double theta_d = 1.0;
};

struct SideInfoSolution {
    RdSolution rd;
    double R_d = 0.0;
    double objective = 0.0;
    int evaluations = 0;
};

inline constexpr double kGoldenTol = 1e-4;

// Inner solver used for a given conditioned problem. Defaults to solve_central.
using RdSolver = std::function<RdSolution(const RdProblem&)>;

// base.O is ignored; the matrix is rebuilt from omega for every trial R_d.
// gamma_d is the rate-cost level above which side information cannot pay off.
inline SideInfoSolution rd_optimize_with_side_info(const RdProblem& base, double omega, double E_d,
                                                   const SideInfoConfig& cfg, double gamma_d,
                                                   const RdSolver& solver = {}) {
    RdSolver solve = solver ? solver : RdSolver([](const RdProblem& p) { return solve_central(p); });
    const int K = base.size();
    const double unit_cost = (cfg.theta_d - E_d) * cfg.alpha_d;
    int evals = 0;
    auto eval = [&](double rd, RdSolution* out) {
        RdProblem p = base;
        p.O = conditional_O_with_side_info(omega, rd, K);
        RdSolution s = solve(p);
        ++evals;
        double j = s.objective + unit_cost * rd;
        if (out) *out = std::move(s);
        return j;
    };

    SideInfoSolution best;
    best.R_d = 0.0;
    best.objective = eval(0.0, &best.rd);
    bool worth = omega > 0 && unit_cost < gamma_d * base.V;
    if (worth) {
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = 0.0, b = base.R_max;
        double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
        double f1 = eval(x1, nullptr), f2 = eval(x2, nullptr);
        while (b - a > kGoldenTol) {
            if (f1 <= f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = eval(x1, nullptr);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = eval(x2, nullptr);
            }
        }
        double xm = 0.5 * (a + b);
        RdSolution sm;
        double fm = eval(xm, &sm);
        if (fm < best.objective) {
            best.objective = fm;
            best.R_d = xm;
            best.rd = std::move(sm);
        }
    }
    best.evaluations = evals;
    return best;
}

// Cluster-head backlog under the same min rule as sensor queues.
inline double sink_queue_step(double U_d, double mu_dc, double mu_in) {
    return std::max(U_d - mu_dc, 0.0) + mu_in;
}

}  // namespace ehwsn
