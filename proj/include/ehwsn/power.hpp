#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "core.hpp"

namespace ehwsn {

inline double weight_offset(const NetworkGraph& g, const GlobalParams& prm) {
    return g.l_max * prm.mu_max + prm.R_max;
}

// W_l = max(U_from - U_to - delta, 0). Nodes without a tracked backlog
// (plain-mode sink, collector) count as empty.
inline std::vector<double> link_weights(const std::vector<double>& U, const NetworkGraph& g,
                                        double delta) {
    std::vector<double> W(g.links.size(), 0.0);
    auto backlog = [&](int n) {
        auto i = static_cast<std::size_t>(n);
        return i < U.size() ? U[i] : 0.0;
    };
    for (std::size_t l = 0; l < g.links.size(); ++l)
        W[l] = std::max(backlog(g.links[l].from) - backlog(g.links[l].to) - delta, 0.0);
    return W;
}

struct PowerProblem {
    std::vector<double> W;      // per link
    std::vector<double> S;      // per link
    std::vector<double> E, theta;  // per node
    double P_max = 1.0;
    double mu_max = 5.0;
    double delta = 1.0;
};

inline constexpr double kBisectTol = 1e-9;
inline constexpr int kBisectSteps = 200;

namespace detail {

// Maximizes sum_l w_l C(p_l) - cost * sum_l p_l over sum_l p_l <= budget,
// p >= 0, with C the mu_max-capped log capacity. cost >= 0.
inline std::vector<double> water_fill(const std::vector<double>& w, const std::vector<double>& s,
                                      double cost, double budget, double mu_max) {
    const std::size_t n = w.size();
    std::vector<double> p(n, 0.0);
    auto level = [&](double nu) {
        double tot = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (w[i] <= 0 || s[i] <= 0) {
                p[i] = 0.0;
                continue;
            }
            double pc = cap_power(s[i], mu_max);
            double price = nu + cost;
            double v = price > 0 ? w[i] / price - 1.0 / s[i] : pc;
            p[i] = std::clamp(v, 0.0, pc);
            tot += p[i];
        }
        return tot;
    };
    if (level(0.0) <= budget) return p;
    double lo = 0.0, hi = 1.0;
    while (level(hi) > budget) hi *= 2.0;
    for (int it = 0; it < kBisectSteps; ++it) {
        double mid = 0.5 * (lo + hi);
        (level(mid) > budget ? lo : hi) = mid;
        if (hi - lo < kBisectTol * std::max(1.0, hi)) break;
    }
    level(hi);
    return p;
}

}  // namespace detail

// Per-node objective of the max-weight power problem.
inline double power_objective(const NetworkGraph& g, const PowerProblem& pp,
                              const std::vector<double>& P) {
    double v = 0.0;
    for (std::size_t l = 0; l < g.links.size(); ++l) {
        auto n = static_cast<std::size_t>(g.links[l].from);
        v += pp.W[l] * link_capacity(P[l], pp.S[l], pp.mu_max) + (pp.E[n] - pp.theta[n]) * P[l];
    }
    return v;
}

// Solves every transmitting node independently. Nodes listed in
// active_nodes are allocated; others get zero power.
inline std::vector<double> allocate_nodes(const NetworkGraph& g, const PowerProblem& pp,
                                          const std::vector<int>& active_nodes) {
    std::vector<double> P(g.links.size(), 0.0);
    for (int n : active_nodes) {
        auto out = g.out_links(n);
        if (out.empty()) continue;
        auto i = static_cast<std::size_t>(n);
        double cost = std::max(0.0, pp.theta[i] - pp.E[i]);
        std::vector<double> w, s;
        for (int l : out) {
            w.push_back(pp.W[static_cast<std::size_t>(l)]);
            s.push_back(pp.S[static_cast<std::size_t>(l)]);
        }
        auto p = detail::water_fill(w, s, cost, pp.P_max, pp.mu_max);
        for (std::size_t j = 0; j < out.size(); ++j) P[static_cast<std::size_t>(out[j])] = p[j];
    }
    return P;
}

inline std::vector<double> allocate(const NetworkGraph& g, const PowerProblem& pp) {
    std::vector<int> nodes;
    for (int n = 0; n < g.num_sensors; ++n) nodes.push_back(n);
    return allocate_nodes(g, pp, nodes);
}

// Includes the cluster head and its (d, c) link in the decomposition.
inline std::vector<double> allocate_with_side_info(const NetworkGraph& g, const PowerProblem& pp) {
    std::vector<int> nodes;
    for (int n = 0; n < g.num_sensors; ++n) nodes.push_back(n);
    nodes.push_back(g.sink());
    return allocate_nodes(g, pp, nodes);
}

}  // namespace ehwsn
