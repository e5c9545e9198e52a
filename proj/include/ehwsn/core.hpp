#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ehwsn {

// Base of every logarithm in the library. Natural log when equal to e.
inline constexpr double kLogBase = 2.718281828459045;

inline double log_b(double x) {
    if constexpr (kLogBase == 2.718281828459045) return std::log(x);
    return std::log(x) / std::log(kLogBase);
}

struct Link {
    int from = 0;
    int to = 0;
};

// Sensors are 0..num_sensors-1, the sink is num_sensors and the optional
// collector is num_sensors+1.
struct NetworkGraph {
    int num_sensors = 0;
    std::vector<bool> measuring;
    std::vector<Link> links;
    bool has_collector = false;
    int l_max = 0;

    int sink() const { return num_sensors; }
    int collector() const { return num_sensors + 1; }
    int num_nodes() const { return num_sensors + 1 + (has_collector ? 1 : 0); }

    std::vector<int> measuring_nodes() const {
        std::vector<int> out;
        for (int n = 0; n < num_sensors; ++n)
            if (measuring[static_cast<std::size_t>(n)]) out.push_back(n);
        return out;
    }

    std::vector<int> out_links(int node) const {
        std::vector<int> out;
        for (int l = 0; l < static_cast<int>(links.size()); ++l)
            if (links[static_cast<std::size_t>(l)].from == node) out.push_back(l);
        return out;
    }

    std::vector<int> in_links(int node) const {
        std::vector<int> out;
        for (int l = 0; l < static_cast<int>(links.size()); ++l)
            if (links[static_cast<std::size_t>(l)].to == node) out.push_back(l);
        return out;
    }

    int max_fan_out() const {
        int best = 0;
        for (int n = 0; n < num_nodes(); ++n)
            best = std::max(best, static_cast<int>(out_links(n).size()));
        return best;
    }

    void validate() const {
        if (num_sensors <= 0) throw std::invalid_argument("graph: no sensors");
        if (static_cast<int>(measuring.size()) != num_sensors)
            throw std::invalid_argument("graph: measuring flags size mismatch");
        for (const auto& k : links) {
            if (k.from == k.to) throw std::invalid_argument("graph: self-loop");
            if (k.from < 0 || k.from >= num_nodes() || k.to < 0 || k.to >= num_nodes())
                throw std::invalid_argument("graph: link endpoint is not a node");
        }
        if (l_max != max_fan_out()) throw std::invalid_argument("graph: l_max mismatch");
        if (l_max <= 0) throw std::invalid_argument("graph: l_max must be positive");
        if (has_collector) {
            int dc = 0;
            for (const auto& k : links) {
                bool touches = k.from == collector() || k.to == collector();
                if (!touches) continue;
                if (k.from == sink() && k.to == collector()) ++dc;
                else throw std::invalid_argument("graph: collector touched by a non (d,c) link");
            }
            if (dc != 1) throw std::invalid_argument("graph: need exactly one (d,c) link");
        }
    }

    static NetworkGraph make(int num_sensors, std::vector<bool> measuring, std::vector<Link> links,
                             bool has_collector = false) {
        NetworkGraph g;
        g.num_sensors = num_sensors;
        g.measuring = std::move(measuring);
        g.links = std::move(links);
        g.has_collector = has_collector;
        g.l_max = g.max_fan_out();
        g.validate();
        return g;
    }
};

// Convex nondecreasing distortion cost with first and second derivatives.
struct CostFunction {
    std::function<double(double)> f;
    std::function<double(double)> df;
    std::function<double(double)> d2f;

    double operator()(double d) const { return f(d); }

    static CostFunction linear() {
        return {[](double d) { return d; }, [](double) { return 1.0; }, [](double) { return 0.0; }};
    }
    static CostFunction square() {
        return {[](double d) { return d * d; }, [](double d) { return 2.0 * d; },
                [](double) { return 2.0; }};
    }
    static CostFunction constant(double c) {
        return {[c](double) { return c; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
    }
};

struct GlobalParams {
    double P_max = 1.0;
    double R_max = 1.0;
    double D_min = 1e-3;
    double D_max = 1.0;
    double H_max = 3.0;
    double mu_max = 5.0;
    double b = 1.0;
    std::vector<double> alpha;  // per node (sensors, then sink)
    double xi = 1.0;

    double alpha_of(int node) const {
        if (node < 0 || node >= static_cast<int>(alpha.size())) return 0.0;
        return alpha[static_cast<std::size_t>(node)];
    }

    void validate() const {
        if (!(R_max > 0 && std::isfinite(R_max))) throw std::invalid_argument("params: R_max");
        if (!(D_min > 0 && D_min <= D_max && std::isfinite(D_max)))
            throw std::invalid_argument("params: distortion box");
        if (!(P_max > 0 && H_max > 0 && mu_max > 0)) throw std::invalid_argument("params: bounds");
        if (!(b > 0)) throw std::invalid_argument("params: b");
        for (double a : alpha)
            if (a < 0) throw std::invalid_argument("params: alpha must be >= 0");
    }
};

using Matrix = std::vector<std::vector<double>>;

struct SlotState {
    std::vector<double> S;  // per link
    Matrix O;               // measuring nodes only
    std::vector<double> H;  // per node (sensors, then sink)
};

struct QueueState {
    std::vector<double> U;  // per node; sink entry used in side-info mode only
    std::vector<double> E;
};

struct SlotDecision {
    std::vector<double> R;  // per node
    std::vector<double> D;
    std::vector<double> Htilde;
    std::vector<double> P;  // per link
    double R_d = 0.0;
};

// log(1 + p s) capped at mu_max.
inline double link_capacity(double p, double s, double mu_max) {
    return std::min(log_b(1.0 + p * s), mu_max);
}

// Power that reaches the mu_max cap on a link with gain s.
inline double cap_power(double s, double mu_max) {
    if (s <= 0) return std::numeric_limits<double>::infinity();
    return (std::pow(kLogBase, mu_max) - 1.0) / s;
}

inline double capacity(const NetworkGraph& g, const std::vector<double>& P,
                       const std::vector<double>& S, int link, double mu_max) {
    if (link < 0 || link >= static_cast<int>(g.links.size()))
        throw std::out_of_range("capacity: unknown link id");
    auto l = static_cast<std::size_t>(link);
    return link_capacity(P[l], S[l], mu_max);
}

// Shannon rate with interference from every other active link. Evaluation only.
inline double capacity_interference(const NetworkGraph& g, const std::vector<double>& P,
                                    const Matrix& cross_gain, int link, double noise,
                                    double mu_max) {
    if (link < 0 || link >= static_cast<int>(g.links.size()))
        throw std::out_of_range("capacity: unknown link id");
    auto l = static_cast<std::size_t>(link);
    double interf = noise;
    for (std::size_t k = 0; k < g.links.size(); ++k)
        if (k != l) interf += P[k] * cross_gain[k][l];
    return std::min(log_b(1.0 + P[l] * cross_gain[l][l] / interf), mu_max);
}

inline double total_out_rate(const NetworkGraph& g, int node, const std::vector<double>& P,
                             const std::vector<double>& S, double mu_max) {
    double r = 0.0;
    for (int l : g.out_links(node)) r += capacity(g, P, S, l, mu_max);
    return r;
}

inline double total_in_rate(const NetworkGraph& g, int node, const std::vector<double>& P,
                            const std::vector<double>& S, double mu_max) {
    double r = 0.0;
    for (int l : g.in_links(node)) r += capacity(g, P, S, l, mu_max);
    return r;
}

inline double node_power(const NetworkGraph& g, int node, const std::vector<double>& P) {
    double p = 0.0;
    for (int l : g.out_links(node)) p += P[static_cast<std::size_t>(l)];
    return p;
}

inline double compression_power(const GlobalParams& prm, int node, double R) {
    if (R < 0 || R > prm.R_max * (1 + 1e-12)) throw std::out_of_range("compression_power: rate");
    return prm.alpha_of(node) * R;
}

struct EnergyViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double energy_queue_step(double E, double P, double spend_c, double Htilde) {
    if (P + spend_c > E)
        throw EnergyViolation("energy_queue_step: spending " + std::to_string(P + spend_c) +
                              " exceeds battery " + std::to_string(E));
    return std::max(0.0, E - P - spend_c + Htilde);
}

struct DataStepResult {
    std::vector<double> U;
    std::vector<double> sent;  // per link, bits actually moved
};

// Min rule: each node drains its start-of-slot backlog over its out-links in
// ascending link id; receivers get what was actually sent plus R_n/b.
// The sink keeps a backlog only when it has out-links (side-info mode).
inline DataStepResult data_queue_step(const NetworkGraph& g, const std::vector<double>& U,
                                      const std::vector<double>& R, const std::vector<double>& P,
                                      const std::vector<double>& S, const GlobalParams& prm) {
    DataStepResult res;
    res.U.assign(static_cast<std::size_t>(g.num_nodes()), 0.0);
    res.sent.assign(g.links.size(), 0.0);
    std::vector<double> remaining(U.begin(), U.end());
    remaining.resize(res.U.size(), 0.0);
    for (std::size_t l = 0; l < g.links.size(); ++l) {
        auto from = static_cast<std::size_t>(g.links[l].from);
        double c = link_capacity(P[l], S[l], prm.mu_max);
        double s = std::min(remaining[from], c);
        remaining[from] -= s;
        res.sent[l] = s;
    }
    for (std::size_t n = 0; n < res.U.size(); ++n) res.U[n] = remaining[n];
    for (std::size_t l = 0; l < g.links.size(); ++l)
        res.U[static_cast<std::size_t>(g.links[l].to)] += res.sent[l];
    for (int n = 0; n < g.num_sensors; ++n)
        res.U[static_cast<std::size_t>(n)] += R[static_cast<std::size_t>(n)] / prm.b;
    bool sink_forwards = !g.out_links(g.sink()).empty();
    if (!sink_forwards) res.U[static_cast<std::size_t>(g.sink())] = 0.0;
    if (g.has_collector) res.U[static_cast<std::size_t>(g.collector())] = 0.0;
    return res;
}

}  // namespace ehwsn
