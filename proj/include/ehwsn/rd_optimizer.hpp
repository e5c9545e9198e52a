#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "core.hpp"
#include "region.hpp"

namespace ehwsn {

// Per-slot rate-distortion problem over the measuring nodes (index k = 0..K-1).
struct RdProblem {
    std::vector<double> U, E, theta, alpha;
    double V = 1.0;
    Matrix O;
    std::vector<CostFunction> f;
    double R_max = 1.0, D_min = 1e-3, D_max = 1.0;
    // Optional per-node gamma. When given, nodes whose linear rate cost
    // reaches gamma*V are driven to zero rate (an optimal choice for them).
    std::vector<double> gamma;

    int size() const { return static_cast<int>(U.size()); }

    double rate_cost(int k) const {
        auto i = static_cast<std::size_t>(k);
        return U[i] + (theta[i] - E[i]) * alpha[i];
    }

    void validate() const {
        const std::size_t K = U.size();
        if (E.size() != K || theta.size() != K || alpha.size() != K || f.size() != K || O.size() != K)
            throw std::invalid_argument("rd problem: size mismatch");
        if (!(V > 0)) throw std::invalid_argument("rd problem: V must be positive");
        for (double t : theta)
            if (!(t > 0)) throw std::invalid_argument("rd problem: theta must be positive");
        for (const auto& fn : f)
            if (!std::isfinite(fn(D_min)) || !std::isfinite(fn(D_max)))
                throw std::invalid_argument("rd problem: cost not finite on the box");
    }
};

inline double rd_objective(const RdProblem& p, const std::vector<double>& R,
                           const std::vector<double>& D) {
    double s = 0.0;
    for (int k = 0; k < p.size(); ++k) {
        auto i = static_cast<std::size_t>(k);
        s += p.rate_cost(k) * R[i] + p.V * p.f[i](D[i]);
    }
    return s;
}

struct RdSolution {
    std::vector<double> R, D;
    double objective = 0.0;
    std::vector<double> lambda;  // per subset mask
    int iterations = 0;
    double max_violation = 0.0;
    bool flagged = false;
    double dual_value = 0.0;
};

struct DualState {
    std::vector<double> lambda;
    int tau = 1;
    double eps_reg = 1e-4;
};

struct LocalSolution {
    double r = 0.0, d = 0.0;
};

namespace detail {

// d = base^(z / w) with w = kDistortionLogWeight.
inline double z_scale() { return std::log(kLogBase) / kDistortionLogWeight; }
inline double z_of(double d) { return kDistortionLogWeight * log_b(d); }
inline double d_of(double z) { return std::exp(z * z_scale()); }

}  // namespace detail

inline LocalSolution local_subproblem(int k, double Lambda, const RdProblem& p, double eps_reg) {
    auto i = static_cast<std::size_t>(k);
    LocalSolution s;
    double slope = p.rate_cost(k) - Lambda;
    if (eps_reg > 0) s.r = std::clamp(-slope / (2.0 * eps_reg), 0.0, p.R_max);
    else s.r = slope < 0 ? p.R_max : 0.0;

    const double lnb = std::log(kLogBase);
    auto h = [&](double d) {
        return p.V * p.f[i].df(d) + 2.0 * eps_reg * d - kDistortionLogWeight * Lambda / (d * lnb);
    };
    if (h(p.D_min) >= 0) s.d = p.D_min;
    else if (h(p.D_max) <= 0) s.d = p.D_max;
    else {
        double lo = p.D_min, hi = p.D_max;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            double mid = 0.5 * (lo + hi);
            (h(mid) < 0 ? lo : hi) = mid;
        }
        s.d = 0.5 * (lo + hi);
    }
    return s;
}

inline std::vector<double> node_prices(const std::vector<double>& lambda, int K) {
    std::vector<double> L(static_cast<std::size_t>(K), 0.0);
    for (Mask m = 1; m < lambda.size(); ++m)
        for (int k = 0; k < K; ++k)
            if (m & (Mask{1} << k)) L[static_cast<std::size_t>(k)] += lambda[m];
    return L;
}

// Lagrangian dual value at lambda (regularizer included when eps_reg > 0).
inline double rd_dual_value(const RdProblem& p, const Region& reg, const std::vector<double>& lambda,
                            double eps_reg) {
    auto L = node_prices(lambda, p.size());
    double v = 0.0;
    for (Mask m = 1; m < lambda.size(); ++m) v += lambda[m] * reg.g[m];
    for (int k = 0; k < p.size(); ++k) {
        auto i = static_cast<std::size_t>(k);
        auto s = local_subproblem(k, L[i], p, eps_reg);
        v += p.rate_cost(k) * s.r + p.V * p.f[i](s.d) + eps_reg * (s.r * s.r + s.d * s.d) -
             L[i] * (detail::z_of(s.d) + s.r);
    }
    return v;
}

inline DualState subgradient_step(const DualState& st, const std::vector<double>& R,
                                  const std::vector<double>& D, const Region& reg, double eps0) {
    DualState out = st;
    double step = eps0 / st.tau;
    for (Mask m = 1; m < st.lambda.size(); ++m)
        out.lambda[m] = std::max(0.0, st.lambda[m] + step * reg.violation(m, R, D));
    out.tau = st.tau + 1;
    return out;
}

// Push (R, D) into the region: raise rates uniformly on the most violated
// subset, spilling over saturated members, then raise distortion if every
// member is already at R_max.
inline double repair_feasibility(const RdProblem& p, const Region& reg, std::vector<double>& R,
                                 std::vector<double>& D) {
    const int K = p.size();
    for (int pass = 0; pass < 200; ++pass) {
        Mask worst_m = 0;
        double worst = 0.0;
        for (Mask m = 1; m <= full_mask(K); ++m) {
            double v = reg.violation(m, R, D);
            if (v > worst) {
                worst = v;
                worst_m = m;
            }
        }
        if (worst <= 1e-12) return 0.0;
        double left = worst;
        for (int spill = 0; spill < K && left > 1e-15; ++spill) {
            int open = 0;
            for (int k = 0; k < K; ++k)
                if ((worst_m & (Mask{1} << k)) && R[static_cast<std::size_t>(k)] < p.R_max) ++open;
            if (open == 0) break;
            double each = left / open;
            for (int k = 0; k < K; ++k) {
                auto i = static_cast<std::size_t>(k);
                if (!(worst_m & (Mask{1} << k)) || R[i] >= p.R_max) continue;
                double add = std::min(each, p.R_max - R[i]);
                R[i] += add;
                left -= add;
            }
        }
        if (left > 1e-15) {
            for (int k = 0; k < K && left > 1e-15; ++k) {
                auto i = static_cast<std::size_t>(k);
                if (!(worst_m & (Mask{1} << k))) continue;
                double zmax = detail::z_of(p.D_max);
                double z = detail::z_of(D[i]);
                double add = std::min(left, zmax - z);
                if (add <= 0) continue;
                D[i] = std::min(p.D_max, detail::d_of(z + add));
                left -= add;
            }
            if (left > 1e-12) break;
        }
    }
    double worst = 0.0;
    for (Mask m = 1; m <= full_mask(K); ++m) worst = std::max(worst, reg.violation(m, R, D));
    return worst;
}

inline constexpr double kTolFeas = 1e-3;

enum class DistributedMethod { Proximal, Subgradient };

struct DistributedOptions {
    DistributedMethod method = DistributedMethod::Proximal;
    int max_iter = 300;  // subgradient steps, or proximal outer rounds
    double eps_reg = 1e-4;
    double eps0 = 1.0;
    std::vector<double> lambda0;
    double rho0 = 1.0;  // proximal weight is rho0 * V
    int inner_iter = 200;
    double tol = 1e-10;
};

// Plain projected subgradient on the regularised dual, eps0/tau steps.
inline RdSolution solve_subgradient(const RdProblem& p, const DistributedOptions& opt) {
    p.validate();
    if (!(opt.eps_reg > 0)) throw std::invalid_argument("solve_distributed: eps_reg must be > 0");
    Region reg = Region::build(p.O);
    const int K = p.size();
    DualState st;
    st.eps_reg = opt.eps_reg;
    st.lambda = opt.lambda0.empty() ? std::vector<double>(reg.g.size(), 0.0) : opt.lambda0;

    std::vector<double> R(static_cast<std::size_t>(K)), D(static_cast<std::size_t>(K));
    std::vector<double> Ravg(R.size(), 0.0), Zavg(R.size(), 0.0);
    double wsum = 0.0;
    for (int it = 0; it < opt.max_iter; ++it) {
        auto L = node_prices(st.lambda, K);
        for (int k = 0; k < K; ++k) {
            auto s = local_subproblem(k, L[static_cast<std::size_t>(k)], p, opt.eps_reg);
            R[static_cast<std::size_t>(k)] = s.r;
            D[static_cast<std::size_t>(k)] = s.d;
        }
        double w = opt.eps0 / st.tau;
        wsum += w;
        for (std::size_t i = 0; i < R.size(); ++i) {
            Ravg[i] += w * (R[i] - Ravg[i]) / wsum;
            Zavg[i] += w * (detail::z_of(D[i]) - Zavg[i]) / wsum;
        }
        st = subgradient_step(st, R, D, reg, opt.eps0);
    }
    auto L = node_prices(st.lambda, K);
    for (int k = 0; k < K; ++k) {
        auto s = local_subproblem(k, L[static_cast<std::size_t>(k)], p, opt.eps_reg);
        R[static_cast<std::size_t>(k)] = s.r;
        D[static_cast<std::size_t>(k)] = s.d;
    }
    std::vector<double> Da(R.size());
    for (std::size_t i = 0; i < R.size(); ++i)
        Da[i] = std::clamp(detail::d_of(Zavg[i]), p.D_min, p.D_max);

    double v_last = repair_feasibility(p, reg, R, D);
    double v_avg = repair_feasibility(p, reg, Ravg, Da);
    RdSolution sol;
    bool use_avg = v_avg <= kTolFeas &&
                   (v_last > kTolFeas || rd_objective(p, Ravg, Da) < rd_objective(p, R, D));
    sol.R = use_avg ? Ravg : R;
    sol.D = use_avg ? Da : D;
    sol.max_violation = use_avg ? v_avg : v_last;
    sol.flagged = sol.max_violation > kTolFeas;
    sol.objective = rd_objective(p, sol.R, sol.D);
    sol.lambda = st.lambda;
    sol.iterations = opt.max_iter;
    sol.dual_value = rd_dual_value(p, reg, st.lambda, 0.0);
    return sol;
}

struct ProxLocal {
    double r = 0.0, z = 0.0;
};

// Node k's share of the proximal Lagrangian:
// min c r + V f(d(z)) - Lambda (r + z) + rho/2 ((r - rc)^2 + (z - zc)^2).
inline ProxLocal prox_local_subproblem(int k, double Lambda, const RdProblem& p, double rho, double rc,
                                       double zc) {
    auto i = static_cast<std::size_t>(k);
    ProxLocal s;
    s.r = std::clamp(rc + (Lambda - p.rate_cost(k)) / rho, 0.0, p.R_max);
    const double sc = detail::z_scale();
    const double zmin = detail::z_of(p.D_min), zmax = detail::z_of(p.D_max);
    auto h = [&](double z) {
        double d = detail::d_of(z);
        return p.V * p.f[i].df(d) * d * sc - Lambda + rho * (z - zc);
    };
    if (h(zmin) >= 0) s.z = zmin;
    else if (h(zmax) <= 0) s.z = zmax;
    else {
        double lo = zmin, hi = zmax;
        for (int it = 0; it < 100 && hi - lo > 1e-14; ++it) {
            double mid = 0.5 * (lo + hi);
            (h(mid) < 0 ? lo : hi) = mid;
        }
        s.z = 0.5 * (lo + hi);
    }
    return s;
}

// Proximal point rounds; each round maximises the smooth dual of the
// proximal problem by accelerated projected gradient, which only needs the
// per-node solutions and the per-subset violations.
inline RdSolution solve_proximal(const RdProblem& p, const DistributedOptions& opt) {
    p.validate();
    if (!(opt.rho0 > 0)) throw std::invalid_argument("solve_distributed: rho0 must be > 0");
    Region reg = Region::build(p.O);
    const int K = p.size();
    const Mask nm = full_mask(K);
    const double rho = opt.rho0 * p.V;
    // y_k moves at most 2/rho per unit of Lambda_k; the subset incidence
    // matrix has squared norm 2^(K-1) + (K-1) 2^(K-2)
    const double lip = (std::ldexp(1.0, K - 1) + (K - 1) * std::ldexp(1.0, K - 2)) * 2.0 / rho;
    const double step = 1.0 / lip;

    auto sz = static_cast<std::size_t>(K);
    std::vector<double> rc(sz, 0.0), zc(sz, detail::z_of(p.D_max)), r(sz), z(sz);
    std::vector<double> lam = opt.lambda0.empty() ? std::vector<double>(reg.g.size(), 0.0) : opt.lambda0;
    std::vector<double> y = lam, prev = lam;
    auto locals = [&](const std::vector<double>& l) {
        auto L = node_prices(l, K);
        for (int k = 0; k < K; ++k) {
            auto i = static_cast<std::size_t>(k);
            auto s = prox_local_subproblem(k, L[i], p, rho, rc[i], zc[i]);
            r[i] = s.r;
            z[i] = s.z;
        }
    };
    int total = 0;
    for (int round = 0; round < opt.max_iter; ++round) {
        double tk = 1.0;
        for (int it = 0; it < opt.inner_iter; ++it, ++total) {
            locals(y);
            double moved = 0.0;
            for (Mask m = 1; m <= nm; ++m) {
                double have = 0.0;
                for (int k = 0; k < K; ++k)
                    if (m & (Mask{1} << k)) have += r[static_cast<std::size_t>(k)] + z[static_cast<std::size_t>(k)];
                lam[m] = std::max(0.0, y[m] + step * (reg.g[m] - have));
                moved = std::max(moved, std::abs(lam[m] - y[m]) / step);
            }
            double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
            for (Mask m = 1; m <= nm; ++m) y[m] = std::max(0.0, lam[m] + (tk - 1.0) / tn * (lam[m] - prev[m]));
            prev = lam;
            tk = tn;
            if (moved < opt.tol) break;
        }
        locals(lam);
        double shift = 0.0;
        for (std::size_t i = 0; i < sz; ++i) {
            shift = std::max({shift, std::abs(r[i] - rc[i]), std::abs(z[i] - zc[i])});
            rc[i] = r[i];
            zc[i] = z[i];
        }
        if (shift < opt.tol) break;
    }

    RdSolution sol;
    sol.R = rc;
    sol.D.resize(sz);
    for (std::size_t i = 0; i < sz; ++i) sol.D[i] = std::clamp(detail::d_of(zc[i]), p.D_min, p.D_max);
    sol.max_violation = repair_feasibility(p, reg, sol.R, sol.D);
    sol.flagged = sol.max_violation > kTolFeas;
    sol.objective = rd_objective(p, sol.R, sol.D);
    sol.lambda = lam;
    sol.iterations = total;
    sol.dual_value = rd_dual_value(p, reg, lam, 0.0);
    return sol;
}

inline RdSolution solve_distributed(const RdProblem& p, const DistributedOptions& opt = {}) {
    if (opt.method == DistributedMethod::Subgradient) return solve_subgradient(p, opt);
    return solve_proximal(p, opt);
}

namespace detail {

// Move rate into distortion for nodes whose rate cost is at least gamma*V.
// Lowering such a rate while raising log-distortion by the same amount keeps
// every subset constraint and never increases the objective.
inline void drop_dominated_rates(const RdProblem& p, const Region& reg, std::vector<double>& R,
                                 std::vector<double>& D) {
    if (p.gamma.empty()) return;
    for (int k = 0; k < p.size(); ++k) {
        auto i = static_cast<std::size_t>(k);
        if (R[i] <= 0 || p.rate_cost(k) < p.gamma[i] * p.V) continue;
        double zmax = z_of(p.D_max);
        double move = std::min(R[i], zmax - z_of(D[i]));
        if (move > 0) D[i] = std::min(p.D_max, d_of(z_of(D[i]) + move));
        std::vector<double> trial = R;
        trial[i] = 0.0;
        bool ok = true;
        for (Mask m = 1; m <= full_mask(reg.n) && ok; ++m) ok = reg.violation(m, trial, D) <= 1e-12;
        if (ok) R[i] = 0.0;
        else R[i] = std::max(0.0, R[i] - move);
    }
}

}  // namespace detail

inline constexpr int kMaxCentralNodes = 8;

struct CentralOptions {
    double gap_tol = 1e-9;
    int max_newton = 100;
};

// Log-barrier interior point on (r, z) with z the weighted log-distortion;
// the problem is convex in these coordinates.
inline RdSolution solve_central(const RdProblem& p, const CentralOptions& opt = {}) {
    p.validate();
    Region reg = Region::build(p.O);
    const int K = p.size();
    if (K > kMaxCentralNodes) throw std::invalid_argument("solve_central: too many measuring nodes");
    const double zmin = detail::z_of(p.D_min), zmax = detail::z_of(p.D_max);
    const bool zfixed = zmax - zmin < 1e-12;
    const int nv = zfixed ? K : 2 * K;
    using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2 * kMaxCentralNodes, 1>;
    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 2 * kMaxCentralNodes, 2 * kMaxCentralNodes>;

    // Subset rows: sum_{k in m} (r_k + z_k) >= g(m). Box rows act on one coordinate.
    std::vector<double> sub_b;
    for (Mask m = 1; m <= full_mask(K); ++m)
        sub_b.push_back(reg.g[m] - (zfixed ? popcount(m) * zmin : 0.0));
    const Mask nsub = full_mask(K);
    const int m_rows = static_cast<int>(nsub) + (zfixed ? 2 * K : 4 * K);

    auto D_at = [&](const Vec& x, int k) {
        return zfixed ? p.D_min : detail::d_of(x(K + k));
    };
    auto F = [&](const Vec& x) {
        double s = 0.0;
        for (int k = 0; k < K; ++k)
            s += p.rate_cost(k) * x(k) + p.V * p.f[static_cast<std::size_t>(k)](D_at(x, k));
        return s;
    };
    auto y_of = [&](const Vec& x, int k) { return zfixed ? x(k) : x(k) + x(K + k); };
    auto sub_slack = [&](const Vec& x, Mask m) {
        double v = -sub_b[m - 1];
        for (int k = 0; k < K; ++k)
            if (m & (Mask{1} << k)) v += y_of(x, k);
        return v;
    };
    // barrier value, or +inf outside the domain
    auto barrier = [&](const Vec& x) {
        double v = 0.0;
        for (Mask m = 1; m <= nsub; ++m) {
            double s = sub_slack(x, m);
            if (s <= 0) return std::numeric_limits<double>::infinity();
            v -= std::log(s);
        }
        for (int k = 0; k < K; ++k) {
            double lo = x(k), hi = p.R_max - x(k);
            if (lo <= 0 || hi <= 0) return std::numeric_limits<double>::infinity();
            v -= std::log(lo) + std::log(hi);
            if (!zfixed) {
                double zl = x(K + k) - zmin, zh = zmax - x(K + k);
                if (zl <= 0 || zh <= 0) return std::numeric_limits<double>::infinity();
                v -= std::log(zl) + std::log(zh);
            }
        }
        return v;
    };

    Vec x = Vec::Zero(nv);
    bool found = false;
    for (double frac : {0.5, 0.9, 0.999}) {
        for (int k = 0; k < K; ++k) {
            x(k) = frac * p.R_max;
            if (!zfixed) x(K + k) = zmax - 1e-3 * (zmax - zmin);
        }
        if (std::isfinite(barrier(x))) {
            found = true;
            break;
        }
    }
    if (!found) throw std::domain_error("solve_central: no strictly feasible point in the box");

    const double sc = detail::z_scale();
    double t = m_rows / std::max(1.0, std::abs(F(x)));
    int newton_total = 0;
    Vec g(nv), dx(nv), ad(nv);
    Mat H(nv, nv);
    for (int outer = 0; outer < 60; ++outer) {
        for (int it = 0; it < opt.max_newton; ++it) {
            g.setZero();
            H.setZero();
            for (int k = 0; k < K; ++k) {
                g(k) = t * p.rate_cost(k);
                double lo = x(k), hi = p.R_max - x(k);
                g(k) += -1.0 / lo + 1.0 / hi;
                H(k, k) += 1.0 / (lo * lo) + 1.0 / (hi * hi);
                if (!zfixed) {
                    double d = D_at(x, k);
                    const auto& fn = p.f[static_cast<std::size_t>(k)];
                    double zl = x(K + k) - zmin, zh = zmax - x(K + k);
                    g(K + k) = t * p.V * fn.df(d) * d * sc - 1.0 / zl + 1.0 / zh;
                    H(K + k, K + k) = t * p.V * (fn.d2f(d) * d * d * sc * sc + fn.df(d) * d * sc * sc) +
                                      1.0 / (zl * zl) + 1.0 / (zh * zh);
                }
            }
            for (Mask m = 1; m <= nsub; ++m) {
                double s = sub_slack(x, m);
                ad.setZero();
                for (int k = 0; k < K; ++k)
                    if (m & (Mask{1} << k)) {
                        ad(k) = 1.0;
                        if (!zfixed) ad(K + k) = 1.0;
                    }
                g -= ad / s;
                H.noalias() += (ad * ad.transpose()) / (s * s);
            }
            dx = H.ldlt().solve(-g);
            double dec = -g.dot(dx);
            ++newton_total;
            if (dec / 2.0 < 1e-9) break;
            double step = 1.0;
            // near the centre take the full (feasible) step; the Armijo test
            // cannot resolve decrements this small against t*F
            bool damped = dec > 0.1;
            double phi0 = damped ? t * F(x) + barrier(x) : 0.0;
            while (step > 1e-16) {
                Vec y = x + step * dx;
                double by = barrier(y);
                if (std::isfinite(by) && (!damped || t * F(y) + by <= phi0 - 0.25 * step * dec)) break;
                step *= 0.5;
            }
            if (step <= 1e-16) break;
            x += step * dx;
        }
        if (m_rows / t < opt.gap_tol * std::max(1.0, std::abs(F(x)))) break;
        t *= 50.0;
    }

    RdSolution sol;
    sol.R.resize(static_cast<std::size_t>(K));
    sol.D.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        auto i = static_cast<std::size_t>(k);
        sol.R[i] = std::clamp(x(k), 0.0, p.R_max);
        sol.D[i] = std::clamp(D_at(x, k), p.D_min, p.D_max);
    }
    sol.lambda.assign(reg.g.size(), 0.0);
    for (Mask m = 1; m <= nsub; ++m) sol.lambda[m] = 1.0 / (t * sub_slack(x, m));
    detail::drop_dominated_rates(p, reg, sol.R, sol.D);
    sol.max_violation = repair_feasibility(p, reg, sol.R, sol.D);
    sol.flagged = sol.max_violation > kTolFeas;
    sol.objective = rd_objective(p, sol.R, sol.D);
    sol.iterations = newton_total;
    sol.dual_value = rd_dual_value(p, reg, sol.lambda, 0.0);
    return sol;
}

}  // namespace ehwsn
