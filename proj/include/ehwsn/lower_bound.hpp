#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "core.hpp"
#include "lp.hpp"
#include "power.hpp"
#include "region.hpp"

namespace ehwsn {

struct DiscreteDist {
    std::vector<double> values, probs;
};

// Source states are joint; channel gains and harvests are independent across
// links and nodes, so their joint state sets are products of the marginals.
struct DiscreteStateModel {
    std::vector<Matrix> source_states;
    std::vector<double> source_probs;
    std::vector<DiscreteDist> link_gain;  // per link
    std::vector<DiscreteDist> harvest;    // per sensor

    void validate() const {
        auto check = [](const std::vector<double>& p) {
            double s = std::accumulate(p.begin(), p.end(), 0.0);
            if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("state probabilities must sum to 1");
            for (double v : p)
                if (v < 0) throw std::invalid_argument("negative probability");
        };
        if (source_states.size() != source_probs.size() || source_states.empty())
            throw std::invalid_argument("source states/probabilities mismatch");
        check(source_probs);
        for (const auto& d : link_gain) check(d.probs);
        for (const auto& d : harvest) check(d.probs);
    }
};

// Equal-probability bins with conditional-mean representatives.
inline DiscreteDist quantile_bins_exponential(double mean, int bins) {
    DiscreteDist d;
    for (int i = 0; i < bins; ++i) {
        double a = -mean * std::log(1.0 - static_cast<double>(i) / bins);
        double ea = std::exp(-a / mean);
        double v;
        if (i == bins - 1) v = a + mean;
        else {
            double b = -mean * std::log(1.0 - static_cast<double>(i + 1) / bins);
            double eb = std::exp(-b / mean);
            v = mean + (a * ea - b * eb) / (ea - eb);
        }
        d.values.push_back(v);
        d.probs.push_back(1.0 / bins);
    }
    return d;
}

inline DiscreteDist quantile_bins_uniform(double hi, int bins) {
    DiscreteDist d;
    for (int i = 0; i < bins; ++i) {
        d.values.push_back((i + 0.5) * hi / bins);
        d.probs.push_back(1.0 / bins);
    }
    return d;
}

struct BoundContext {
    NetworkGraph g;
    GlobalParams prm;
    std::vector<CostFunction> f;  // per sensor
    double V = 1.0;
};

struct MultiplierSet {
    std::vector<std::vector<double>> lambda;  // [source state][subset mask]
    std::vector<double> upsilon, chi;         // per sensor

    static MultiplierSet zeros(const BoundContext& c, std::size_t n_source) {
        MultiplierSet m;
        auto K = static_cast<int>(c.g.measuring_nodes().size());
        m.lambda.assign(n_source, std::vector<double>(static_cast<std::size_t>(full_mask(K)) + 1, 0.0));
        m.upsilon.assign(static_cast<std::size_t>(c.g.num_sensors), 0.0);
        m.chi.assign(static_cast<std::size_t>(c.g.num_sensors), 0.0);
        return m;
    }
};

namespace detail {

struct SourcePart {
    double value = 0.0;
    std::vector<double> R, D;  // per measuring index
};

inline double argmin_distortion(const CostFunction& f, double V, double Lambda, double lo, double hi) {
    const double lnb = std::log(kLogBase);
    auto h = [&](double d) { return V * f.df(d) - kDistortionLogWeight * Lambda / (d * lnb); };
    if (h(lo) >= 0) return lo;
    if (h(hi) <= 0) return hi;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        (h(mid) < 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Rate, distortion and subset terms of the per-state infimum.
inline SourcePart source_part(const BoundContext& c, const Region& reg, const std::vector<double>& lambda,
                              const MultiplierSet& m) {
    auto meas = c.g.measuring_nodes();
    const int K = static_cast<int>(meas.size());
    SourcePart sp;
    sp.R.assign(static_cast<std::size_t>(K), 0.0);
    sp.D.assign(static_cast<std::size_t>(K), c.prm.D_max);
    for (Mask x = 1; x <= full_mask(K); ++x) sp.value += lambda[x] * reg.g[x];
    for (int k = 0; k < K; ++k) {
        auto i = static_cast<std::size_t>(k);
        auto n = static_cast<std::size_t>(meas[i]);
        double L = 0.0;
        for (Mask x = 1; x <= full_mask(K); ++x)
            if (x & (Mask{1} << k)) L += lambda[x];
        double d = argmin_distortion(c.f[n], c.V, L, c.prm.D_min, c.prm.D_max);
        sp.D[i] = d;
        sp.value += c.V * c.f[n](d) - L * kDistortionLogWeight * log_b(d);
        double slope = m.upsilon[n] / c.prm.b + m.chi[n] * c.prm.alpha_of(meas[i]) - L;
        if (slope < 0) {
            sp.R[i] = c.prm.R_max;
            sp.value += slope * c.prm.R_max;
        }
    }
    return sp;
}

struct PowerPart {
    double value = 0.0;
    std::vector<double> p, cap;  // per out-link of the node
};

// min over the node's powers of sum_l (ups_to - ups_n) C_l + chi_n sum_l p_l.
inline PowerPart power_part(const BoundContext& c, int n, const std::vector<int>& out,
                            const std::vector<double>& gains, const MultiplierSet& m) {
    PowerPart pp;
    auto i = static_cast<std::size_t>(n);
    double chi = m.chi[i];
    if (chi < 0) throw std::invalid_argument("power_part: chi must be >= 0");
    std::vector<double> w;
    for (int l : out) {
        int to = c.g.links[static_cast<std::size_t>(l)].to;
        double up_to = to < c.g.num_sensors ? m.upsilon[static_cast<std::size_t>(to)] : 0.0;
        w.push_back(m.upsilon[i] - up_to);
    }
    pp.p = water_fill(w, gains, chi, c.prm.P_max, c.prm.mu_max);
    pp.cap.resize(out.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
        pp.cap[j] = link_capacity(pp.p[j], gains[j], c.prm.mu_max);
        pp.value += -w[j] * pp.cap[j] + chi * pp.p[j];
    }
    return pp;
}

// Calls fn(gains, prob) for every joint gain state of the given links.
template <class Fn>
void for_each_gain_state(const DiscreteStateModel& sm, const std::vector<int>& links, Fn&& fn) {
    std::vector<std::size_t> idx(links.size(), 0);
    std::vector<double> gains(links.size());
    while (true) {
        double prob = 1.0;
        for (std::size_t j = 0; j < links.size(); ++j) {
            const auto& d = sm.link_gain[static_cast<std::size_t>(links[j])];
            gains[j] = d.values[idx[j]];
            prob *= d.probs[idx[j]];
        }
        fn(gains, prob);
        std::size_t j = 0;
        while (j < links.size()) {
            if (++idx[j] < sm.link_gain[static_cast<std::size_t>(links[j])].values.size()) break;
            idx[j] = 0;
            ++j;
        }
        if (j == links.size()) break;
    }
}

}  // namespace detail

// Infimum of the Lagrangian for one (source, channel, harvest) state.
inline double dual_per_state(const Matrix& o, const std::vector<double>& lambda_o,
                             const std::vector<double>& s, const std::vector<double>& h,
                             const MultiplierSet& m, const BoundContext& c) {
    Region reg = Region::build(o);
    double v = detail::source_part(c, reg, lambda_o, m).value;
    for (int n = 0; n < c.g.num_sensors; ++n) {
        auto out = c.g.out_links(n);
        std::vector<double> gains;
        for (int l : out) gains.push_back(s[static_cast<std::size_t>(l)]);
        v += detail::power_part(c, n, out, gains, m).value;
        double chi = m.chi[static_cast<std::size_t>(n)];
        if (chi > 0) v -= chi * h[static_cast<std::size_t>(n)];
    }
    return v;
}

struct DualEval {
    double value = 0.0;
    MultiplierSet grad;  // supergradient
};

inline DualEval dual_evaluate(const MultiplierSet& m, const DiscreteStateModel& sm, const BoundContext& c,
                              const std::vector<Region>& regs) {
    DualEval ev;
    ev.grad = m;
    for (auto& l : ev.grad.lambda) std::fill(l.begin(), l.end(), 0.0);
    std::fill(ev.grad.upsilon.begin(), ev.grad.upsilon.end(), 0.0);
    std::fill(ev.grad.chi.begin(), ev.grad.chi.end(), 0.0);
    auto meas = c.g.measuring_nodes();
    const int K = static_cast<int>(meas.size());

    for (std::size_t o = 0; o < sm.source_states.size(); ++o) {
        double rho = sm.source_probs[o];
        auto sp = detail::source_part(c, regs[o], m.lambda[o], m);
        ev.value += rho * sp.value;
        for (Mask x = 1; x <= full_mask(K); ++x) {
            double a = regs[o].g[x];
            for (int k = 0; k < K; ++k)
                if (x & (Mask{1} << k))
                    a -= kDistortionLogWeight * log_b(sp.D[static_cast<std::size_t>(k)]) + sp.R[static_cast<std::size_t>(k)];
            ev.grad.lambda[o][x] = rho * a;
        }
        for (int k = 0; k < K; ++k) {
            auto n = static_cast<std::size_t>(meas[static_cast<std::size_t>(k)]);
            double r = sp.R[static_cast<std::size_t>(k)];
            ev.grad.upsilon[n] += rho * r / c.prm.b;
            ev.grad.chi[n] += rho * c.prm.alpha_of(static_cast<int>(n)) * r;
        }
    }
    for (int n = 0; n < c.g.num_sensors; ++n) {
        auto i = static_cast<std::size_t>(n);
        auto out = c.g.out_links(n);
        if (!out.empty()) {
            detail::for_each_gain_state(sm, out, [&](const std::vector<double>& gains, double prob) {
                auto pp = detail::power_part(c, n, out, gains, m);
                ev.value += prob * pp.value;
                for (std::size_t j = 0; j < out.size(); ++j) {
                    int to = c.g.links[static_cast<std::size_t>(out[j])].to;
                    ev.grad.upsilon[i] -= prob * pp.cap[j];
                    if (to < c.g.num_sensors) ev.grad.upsilon[static_cast<std::size_t>(to)] += prob * pp.cap[j];
                    ev.grad.chi[i] += prob * pp.p[j];
                }
            });
        }
        if (m.chi[i] > 0) {
            double eh = 0.0;
            const auto& hd = sm.harvest[i];
            for (std::size_t k = 0; k < hd.values.size(); ++k) eh += hd.probs[k] * hd.values[k];
            ev.value -= m.chi[i] * eh;
            ev.grad.chi[i] -= eh;
        }
    }
    return ev;
}

inline std::vector<Region> build_regions(const DiscreteStateModel& sm) {
    std::vector<Region> r;
    for (const auto& o : sm.source_states) r.push_back(Region::build(o));
    return r;
}

inline double dual_value(const MultiplierSet& m, const DiscreteStateModel& sm, const BoundContext& c) {
    sm.validate();
    return dual_evaluate(m, sm, c, build_regions(sm)).value;
}

struct DualResult {
    MultiplierSet best;
    double best_value = 0.0;
    double LB = 0.0;
    int iterations = 0;
    std::vector<double> history;  // best value after each iteration
};

// Projected supergradient ascent with normalized steps s0 / sqrt(k).
inline DualResult maximize_dual(const DiscreteStateModel& sm, const BoundContext& c, int iterations,
                                double s0 = 0.0) {
    sm.validate();
    auto regs = build_regions(sm);
    MultiplierSet m = MultiplierSet::zeros(c, sm.source_states.size());
    if (s0 <= 0) s0 = c.V;
    DualResult res;
    auto ev = dual_evaluate(m, sm, c, regs);
    res.best = m;
    res.best_value = ev.value;
    for (int k = 1; k <= iterations; ++k) {
        double norm2 = 0.0;
        for (const auto& l : ev.grad.lambda)
            for (double v : l) norm2 += v * v;
        for (double v : ev.grad.upsilon) norm2 += v * v;
        for (double v : ev.grad.chi) norm2 += v * v;
        if (norm2 <= 0) break;
        double step = s0 / std::sqrt(static_cast<double>(k)) / std::sqrt(norm2);
        for (std::size_t o = 0; o < m.lambda.size(); ++o)
            for (std::size_t x = 1; x < m.lambda[o].size(); ++x)
                m.lambda[o][x] = std::max(0.0, m.lambda[o][x] + step * ev.grad.lambda[o][x]);
        for (std::size_t n = 0; n < m.upsilon.size(); ++n) {
            m.upsilon[n] = std::max(0.0, m.upsilon[n] + step * ev.grad.upsilon[n]);
            m.chi[n] = std::max(0.0, m.chi[n] + step * ev.grad.chi[n]);
        }
        ev = dual_evaluate(m, sm, c, regs);
        if (ev.value > res.best_value) {
            res.best_value = ev.value;
            res.best = m;
        }
        res.history.push_back(res.best_value);
        res.iterations = k;
    }
    res.LB = res.best_value / c.V;
    return res;
}

// Builds the binned model for exponential gains and uniform harvest.
inline DiscreteStateModel discretize(const NetworkGraph& g, const Matrix& O, double gain_mean, double H_max,
                                     int bins) {
    DiscreteStateModel sm;
    sm.source_states = {O};
    sm.source_probs = {1.0};
    for (std::size_t l = 0; l < g.links.size(); ++l) sm.link_gain.push_back(quantile_bins_exponential(gain_mean, bins));
    for (int n = 0; n < g.num_sensors; ++n) sm.harvest.push_back(quantile_bins_uniform(H_max, bins));
    return sm;
}

inline constexpr int kDirectMaxGrid = 15;

namespace detail {

inline std::vector<std::vector<double>> joint_values(const std::vector<DiscreteDist>& ds,
                                                     std::vector<double>& probs) {
    std::vector<std::vector<double>> out;
    probs.clear();
    std::vector<std::size_t> idx(ds.size(), 0);
    while (true) {
        std::vector<double> v(ds.size());
        double p = 1.0;
        for (std::size_t j = 0; j < ds.size(); ++j) {
            v[j] = ds[j].values[idx[j]];
            p *= ds[j].probs[idx[j]];
        }
        out.push_back(v);
        probs.push_back(p);
        std::size_t j = 0;
        while (j < ds.size()) {
            if (++idx[j] < ds[j].values.size()) break;
            idx[j] = 0;
            ++j;
        }
        if (j == ds.size()) break;
    }
    return out;
}

}  // namespace detail

// Relaxed stationary-randomized problem over gridded action atoms, solved as
// a linear program over mixture weights. Returns the optimal cost per slot.
// A node that sends at zero rate is charged distortion D_max.
inline double direct_solve_small(const DiscreteStateModel& sm, const BoundContext& c, int grid = kDirectMaxGrid) {
    sm.validate();
    if (c.g.num_sensors > 2) throw std::invalid_argument("direct_solve_small: at most 2 sensors");
    if (grid < 2 || grid > kDirectMaxGrid) throw std::invalid_argument("direct_solve_small: grid size");
    std::vector<double> pS, pH;
    auto S = detail::joint_values(sm.link_gain, pS);
    auto H = detail::joint_values(sm.harvest, pH);
    if (sm.source_states.size() > 4 || S.size() > 4 || H.size() > 4)
        throw std::invalid_argument("direct_solve_small: at most 4 states per process");

    auto meas = c.g.measuring_nodes();
    const int K = static_cast<int>(meas.size());
    const int N = c.g.num_sensors;
    const auto nl = c.g.links.size();

    struct Col {
        int block;
        double cost;
        std::vector<double> flow, energy;  // per sensor contribution
    };
    std::vector<Col> cols;
    int block = 0;

    std::vector<double> dgrid;
    for (int i = 0; i < grid; ++i)
        dgrid.push_back(c.prm.D_min * std::pow(c.prm.D_max / c.prm.D_min, static_cast<double>(i) / (grid - 1)));

    for (std::size_t o = 0; o < sm.source_states.size(); ++o, ++block) {
        Region reg = Region::build(sm.source_states[o]);
        double rho = sm.source_probs[o];
        std::vector<int> perm(static_cast<std::size_t>(K));
        std::iota(perm.begin(), perm.end(), 0);
        std::vector<std::size_t> di(static_cast<std::size_t>(K), 0);
        while (true) {
            std::vector<double> D(static_cast<std::size_t>(K));
            for (int k = 0; k < K; ++k) D[static_cast<std::size_t>(k)] = dgrid[di[static_cast<std::size_t>(k)]];
            std::sort(perm.begin(), perm.end());
            do {
                std::vector<double> R(static_cast<std::size_t>(K), 0.0);
                Mask seen = 0;
                for (int k : perm) {
                    Mask bit = Mask{1} << k;
                    double need = 0.0;
                    for (Mask x = seen | bit; ; x = (x - 1) & (seen | bit)) {
                        if (x & bit) {
                            double v = reg.requirement(x, D);
                            for (int j = 0; j < K; ++j)
                                if ((x & (Mask{1} << j)) && j != k) v -= R[static_cast<std::size_t>(j)];
                            need = std::max(need, v);
                        }
                        if (x == 0) break;
                    }
                    R[static_cast<std::size_t>(k)] = need;
                    seen |= bit;
                }
                bool ok = true;
                std::vector<double> Dc = D;
                for (int k = 0; k < K; ++k) {
                    auto i = static_cast<std::size_t>(k);
                    if (R[i] > c.prm.R_max + 1e-12) ok = false;
                    if (R[i] <= 0) Dc[i] = c.prm.D_max;
                }
                if (ok) {
                    Col col{block, 0.0, std::vector<double>(static_cast<std::size_t>(N), 0.0),
                            std::vector<double>(static_cast<std::size_t>(N), 0.0)};
                    for (int k = 0; k < K; ++k) {
                        auto i = static_cast<std::size_t>(k);
                        auto n = static_cast<std::size_t>(meas[i]);
                        col.cost += rho * c.f[n](Dc[i]);
                        col.flow[n] += rho * R[i] / c.prm.b;
                        col.energy[n] += rho * c.prm.alpha_of(meas[i]) * R[i];
                    }
                    cols.push_back(std::move(col));
                }
            } while (std::next_permutation(perm.begin(), perm.end()));
            int k = 0;
            while (k < K) {
                if (++di[static_cast<std::size_t>(k)] < dgrid.size()) break;
                di[static_cast<std::size_t>(k)] = 0;
                ++k;
            }
            if (k == K) break;
        }
        Col zero{block, 0.0, std::vector<double>(static_cast<std::size_t>(N), 0.0),
                 std::vector<double>(static_cast<std::size_t>(N), 0.0)};
        for (int k = 0; k < K; ++k) zero.cost += rho * c.f[static_cast<std::size_t>(meas[static_cast<std::size_t>(k)])](c.prm.D_max);
        cols.push_back(std::move(zero));
    }

    for (std::size_t s = 0; s < S.size(); ++s, ++block) {
        std::vector<std::size_t> pi(nl, 0);
        while (true) {
            std::vector<double> P(nl);
            for (std::size_t l = 0; l < nl; ++l) P[l] = c.prm.P_max * static_cast<double>(pi[l]) / (grid - 1);
            bool ok = true;
            for (int n = 0; n < N && ok; ++n) ok = node_power(c.g, n, P) <= c.prm.P_max * (1 + 1e-12);
            if (ok) {
                Col col{block, 0.0, std::vector<double>(static_cast<std::size_t>(N), 0.0),
                        std::vector<double>(static_cast<std::size_t>(N), 0.0)};
                for (std::size_t l = 0; l < nl; ++l) {
                    double cap = link_capacity(P[l], S[s][l], c.prm.mu_max);
                    auto from = static_cast<std::size_t>(c.g.links[l].from);
                    int to = c.g.links[l].to;
                    if (from < static_cast<std::size_t>(N)) {
                        col.flow[from] -= pS[s] * cap;
                        col.energy[from] += pS[s] * P[l];
                    }
                    if (to < N) col.flow[static_cast<std::size_t>(to)] += pS[s] * cap;
                }
                cols.push_back(std::move(col));
            }
            std::size_t l = 0;
            while (l < nl) {
                if (++pi[l] < static_cast<std::size_t>(grid)) break;
                pi[l] = 0;
                ++l;
            }
            if (l == nl) break;
        }
    }

    for (std::size_t h = 0; h < H.size(); ++h, ++block) {
        for (Mask take = 0; take <= full_mask(N); ++take) {
            Col col{block, 0.0, std::vector<double>(static_cast<std::size_t>(N), 0.0),
                    std::vector<double>(static_cast<std::size_t>(N), 0.0)};
            for (int n = 0; n < N; ++n)
                if (take & (Mask{1} << n)) col.energy[static_cast<std::size_t>(n)] -= pH[h] * H[h][static_cast<std::size_t>(n)];
            cols.push_back(std::move(col));
        }
    }

    lp::Problem prob;
    const std::size_t nc = cols.size();
    prob.c.resize(nc);
    for (std::size_t j = 0; j < nc; ++j) prob.c[j] = cols[j].cost;
    for (int b = 0; b < block; ++b) {
        std::vector<double> row(nc, 0.0);
        for (std::size_t j = 0; j < nc; ++j)
            if (cols[j].block == b) row[j] = 1.0;
        prob.A_eq.push_back(row);
        prob.b_eq.push_back(1.0);
    }
    for (int n = 0; n < N; ++n) {
        std::vector<double> fr(nc), er(nc);
        for (std::size_t j = 0; j < nc; ++j) {
            fr[j] = cols[j].flow[static_cast<std::size_t>(n)];
            er[j] = cols[j].energy[static_cast<std::size_t>(n)];
        }
        prob.A_ub.push_back(fr);
        prob.b_ub.push_back(0.0);
        prob.A_eq.push_back(er);
        prob.b_eq.push_back(0.0);
    }
    auto res = lp::solve(prob);
    if (!res.feasible) throw std::runtime_error("direct_solve_small: relaxed problem infeasible");
    return res.value;
}

}  // namespace ehwsn
