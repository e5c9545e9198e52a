#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "core.hpp"
#include "power.hpp"
#include "rd_optimizer.hpp"
#include "region.hpp"
#include "side_info.hpp"

namespace ehwsn {

inline constexpr int kGammaGrid = 10000;

// sup over d in [D_min, D_max) of (f(d) - f(D_max)) / (w log(d / D_max)),
// including the d -> D_max limit f'(D_max) D_max / (w ln base).
inline double gamma_n(const CostFunction& f, double D_min, double D_max, double log_weight = 1.0) {
    const double lnb = std::log(kLogBase);
    double best = f.df(D_max) * D_max / (log_weight * lnb);
    if (D_max > D_min) {
        const double fmax = f(D_max);
        const double span = std::log(D_max / D_min);
        for (int i = 0; i < kGammaGrid; ++i) {
            double d = D_min * std::exp(span * i / kGammaGrid);
            double den = log_weight * log_b(d / D_max);
            if (den >= 0) continue;
            best = std::max(best, (f(d) - fmax) / den);
        }
    }
    return std::max(0.0, best);
}

inline double harvest_decide(double E, double H, double theta) {
    return E < theta ? std::min(theta - E, H) : 0.0;
}

struct BConstants {
    double B_U = 0, B_E = 0, B_tilde = 0, B = 0;
};

inline BConstants constant_B(double mu_max, double R_max, double H_max, double alpha, double P_max,
                             double delta, int l_max, int N) {
    BConstants c;
    c.B_U = mu_max * (mu_max + R_max) + R_max * R_max / 2.0;
    c.B_E = 0.5 * (H_max * H_max + alpha * alpha * R_max * R_max + P_max * P_max +
                   2.0 * alpha * R_max * P_max);
    c.B_tilde = N * (c.B_U + c.B_E);
    c.B = c.B_tilde + N * (delta * l_max * mu_max + H_max * H_max / 4.0);
    return c;
}

inline BConstants constant_B(const GlobalParams& prm, const NetworkGraph& g) {
    double a = 0.0;
    for (int n = 0; n < g.num_sensors; ++n) a = std::max(a, prm.alpha_of(n));
    return constant_B(prm.mu_max, prm.R_max, prm.H_max, a, prm.P_max, weight_offset(g, prm), g.l_max,
                      g.num_sensors);
}

enum class RdSolverKind { Central, Distributed };

struct PolicyOptions {
    double V = 1.0;
    bool side_info = false;
    bool force_zero_side_rate = false;
    double omega = 0.0;  // exchangeable correlation, used to condition on side information
    SideInfoConfig side{};
    RdSolverKind solver = RdSolverKind::Central;
    DistributedOptions dist{};
    bool strict = true;
};

// Per-node settings; entry num_sensors is the cluster head in side-info mode.
struct PolicyConfig {
    double V = 1.0;
    std::vector<double> gamma, beta, theta;
    double B = 0.0;
};

inline PolicyConfig make_policy_config(const NetworkGraph& g, const GlobalParams& prm,
                                       const std::vector<CostFunction>& f, const PolicyOptions& opt) {
    if (!(opt.V > 0)) throw std::invalid_argument("policy: V must be positive");
    PolicyConfig c;
    c.V = opt.V;
    const auto n_all = static_cast<std::size_t>(g.num_sensors + 1);
    c.gamma.assign(n_all, 0.0);
    c.beta.assign(n_all, 0.0);
    c.theta.assign(n_all, 0.0);
    double gsum = 0.0;
    for (int n = 0; n < g.num_sensors; ++n) {
        auto i = static_cast<std::size_t>(n);
        c.gamma[i] = gamma_n(f[i], prm.D_min, prm.D_max, kDistortionLogWeight);
        if (g.measuring[i]) gsum += c.gamma[i];
    }
    auto sink = static_cast<std::size_t>(g.sink());
    if (opt.side_info) c.gamma[sink] = gsum;
    for (std::size_t i = 0; i < n_all; ++i) {
        double a = (opt.side_info && i == sink) ? opt.side.alpha_d : prm.alpha_of(static_cast<int>(i));
        c.beta[i] = std::min(a, 1.0);
        double ratio = c.beta[i] > 0 ? c.gamma[i] / c.beta[i] : c.gamma[i];
        c.theta[i] = ratio * opt.V + a * prm.R_max + prm.P_max;
    }
    c.B = constant_B(prm, g).B;
    return c;
}

// Snapshot of one slot for the invariant monitor.
struct TraceRow {
    std::vector<double> E;        // battery at slot start
    std::vector<double> E_next;   // after the update
    std::vector<double> U_next;
    std::vector<double> spend_c;  // compression / side-info energy
    std::vector<double> spend_p;  // transmit energy
};

struct InvariantReport {
    long eq32 = 0, eq33 = 0, eq34 = 0, eq11 = 0;
    std::string first;
    long total() const { return eq32 + eq33 + eq34 + eq11; }
};

struct InvariantBounds {
    std::vector<double> theta, U_max, spend_floor, alpha;
    std::vector<bool> tracked;
};

inline InvariantBounds invariant_bounds(const NetworkGraph& g, const GlobalParams& prm,
                                        const PolicyConfig& cfg, const PolicyOptions& opt) {
    InvariantBounds b;
    const auto n_all = static_cast<std::size_t>(g.num_sensors + 1);
    b.theta = cfg.theta;
    b.U_max.assign(n_all, 0.0);
    b.spend_floor.assign(n_all, 0.0);
    b.alpha.assign(n_all, 0.0);
    b.tracked.assign(n_all, true);
    auto sink = static_cast<std::size_t>(g.sink());
    b.tracked[sink] = opt.side_info;
    for (std::size_t i = 0; i < n_all; ++i) {
        double a = (opt.side_info && i == sink) ? opt.side.alpha_d : prm.alpha_of(static_cast<int>(i));
        b.alpha[i] = a;
        b.U_max[i] = cfg.gamma[i] * cfg.V + prm.R_max;
        b.spend_floor[i] = a * prm.R_max + prm.P_max;
    }
    return b;
}

inline void check_row(const TraceRow& r, const InvariantBounds& b, long slot, InvariantReport& rep) {
    auto note = [&](const char* what, std::size_t n, double v, double lim) {
        if (!rep.first.empty()) return;
        std::ostringstream os;
        os << what << " slot=" << slot << " node=" << n << " value=" << v << " limit=" << lim;
        rep.first = os.str();
    };
    for (std::size_t n = 0; n < b.theta.size(); ++n) {
        if (!b.tracked[n]) continue;
        double e0 = r.E[n], e1 = r.E_next[n];
        if (e1 < 0 || e1 > b.theta[n]) {
            ++rep.eq32;
            note("battery bound", n, e1, b.theta[n]);
        }
        if (r.U_next[n] < 0 || r.U_next[n] > b.U_max[n]) {
            ++rep.eq33;
            note("backlog bound", n, r.U_next[n], b.U_max[n]);
        }
        double spend = r.spend_c[n] + r.spend_p[n];
        if (spend > 0 && e0 < b.spend_floor[n]) {
            ++rep.eq34;
            note("spending below floor", n, e0, b.spend_floor[n]);
        }
        if (spend > e0) {
            ++rep.eq11;
            note("energy overspent", n, spend, e0);
        }
    }
}

inline InvariantReport check_invariants(const std::vector<TraceRow>& trace, const InvariantBounds& b) {
    InvariantReport rep;
    for (std::size_t t = 0; t < trace.size(); ++t) check_row(trace[t], b, static_cast<long>(t), rep);
    return rep;
}

struct InvariantViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StepResult {
    SlotDecision decision;
    QueueState next;
    TraceRow row;
};

class Policy {
public:
    Policy(NetworkGraph g, GlobalParams prm, std::vector<CostFunction> f, PolicyOptions opt)
        : g_(std::move(g)), prm_(std::move(prm)), f_(std::move(f)), opt_(std::move(opt)) {
        g_.validate();
        prm_.validate();
        if (static_cast<int>(f_.size()) != g_.num_sensors)
            throw std::invalid_argument("policy: one cost function per sensor");
        if (opt_.side_info && !g_.has_collector)
            throw std::invalid_argument("policy: side-info mode needs a collector");
        cfg_ = make_policy_config(g_, prm_, f_, opt_);
        opt_.side.theta_d = cfg_.theta[static_cast<std::size_t>(g_.sink())];
        bounds_ = invariant_bounds(g_, prm_, cfg_, opt_);
        meas_ = g_.measuring_nodes();
        delta_ = weight_offset(g_, prm_);
    }

    const PolicyConfig& config() const { return cfg_; }
    const NetworkGraph& graph() const { return g_; }
    const GlobalParams& params() const { return prm_; }
    const PolicyOptions& options() const { return opt_; }
    const InvariantBounds& bounds() const { return bounds_; }
    const InvariantReport& report() const { return report_; }

    // Empty queues; batteries at energy_fraction * theta.
    QueueState initial_state(double energy_fraction = 0.0) const {
        if (energy_fraction < 0 || energy_fraction > 1)
            throw std::invalid_argument("policy: initial energy fraction must lie in [0,1]");
        QueueState q;
        q.U.assign(static_cast<std::size_t>(g_.num_nodes()), 0.0);
        q.E.assign(static_cast<std::size_t>(g_.num_nodes()), 0.0);
        const int energy_nodes = g_.num_sensors + (opt_.side_info ? 1 : 0);
        for (int n = 0; n < energy_nodes; ++n)
            q.E[static_cast<std::size_t>(n)] = energy_fraction * cfg_.theta[static_cast<std::size_t>(n)];
        return q;
    }

    StepResult step(const QueueState& q, const SlotState& s) {
        const auto n_nodes = static_cast<std::size_t>(g_.num_nodes());
        const auto sink = static_cast<std::size_t>(g_.sink());
        const int energy_nodes = g_.num_sensors + (opt_.side_info ? 1 : 0);
        StepResult res;
        SlotDecision& dec = res.decision;
        dec.R.assign(n_nodes, 0.0);
        dec.D.assign(n_nodes, prm_.D_max);
        dec.Htilde.assign(n_nodes, 0.0);

        for (int n = 0; n < energy_nodes; ++n) {
            auto i = static_cast<std::size_t>(n);
            dec.Htilde[i] = harvest_decide(q.E[i], s.H[i], cfg_.theta[i]);
        }

        if (!meas_.empty()) {
            RdProblem p = rd_problem(q, s);
            RdSolution sol;
            if (opt_.side_info) {
                if (opt_.force_zero_side_rate) sol = solve_rd(p);
                else {
                    auto si = rd_optimize_with_side_info(p, opt_.omega, q.E[sink], opt_.side,
                                                         cfg_.gamma[sink],
                                                         [this](const RdProblem& pp) { return solve_rd(pp); });
                    sol = std::move(si.rd);
                    dec.R_d = si.R_d;
                }
            } else {
                sol = solve_rd(p);
            }
            for (std::size_t k = 0; k < meas_.size(); ++k) {
                auto i = static_cast<std::size_t>(meas_[k]);
                dec.R[i] = sol.R[k];
                dec.D[i] = sol.D[k];
            }
        }

        PowerProblem pp;
        std::vector<double> Uw(q.U.begin(), q.U.end());
        if (!opt_.side_info) Uw[sink] = 0.0;
        pp.W = link_weights(Uw, g_, delta_);
        pp.S = s.S;
        pp.E = q.E;
        pp.theta = cfg_.theta;
        pp.theta.resize(n_nodes, 0.0);
        pp.P_max = prm_.P_max;
        pp.mu_max = prm_.mu_max;
        pp.delta = delta_;
        dec.P = opt_.side_info ? allocate_with_side_info(g_, pp) : allocate(g_, pp);

        TraceRow& row = res.row;
        row.E.assign(bounds_.theta.size(), 0.0);
        row.E_next.assign(bounds_.theta.size(), 0.0);
        row.U_next.assign(bounds_.theta.size(), 0.0);
        row.spend_c.assign(bounds_.theta.size(), 0.0);
        row.spend_p.assign(bounds_.theta.size(), 0.0);

        res.next.E = q.E;
        for (int n = 0; n < energy_nodes; ++n) {
            auto i = static_cast<std::size_t>(n);
            double pc = (opt_.side_info && i == sink) ? opt_.side.alpha_d * dec.R_d
                                                      : compression_power(prm_, n, dec.R[i]);
            double pn = node_power(g_, n, dec.P);
            row.E[i] = q.E[i];
            row.spend_c[i] = pc;
            row.spend_p[i] = pn;
            if (pc + pn > q.E[i]) {
                InvariantReport tmp;
                check_row(row, bounds_, slot_, tmp);
                throw EnergyViolation("energy availability violated: " + tmp.first);
            }
            res.next.E[i] = energy_queue_step(q.E[i], pn, pc, dec.Htilde[i]);
        }

        res.next.U = data_queue_step(g_, q.U, dec.R, dec.P, s.S, prm_).U;
        for (std::size_t i = 0; i < row.E.size(); ++i) {
            row.E_next[i] = res.next.E[i];
            row.U_next[i] = res.next.U[i];
        }
        long before = report_.total();
        check_row(row, bounds_, slot_, report_);
        if (opt_.strict && report_.total() > before)
            throw InvariantViolation("invariant violated: " + report_.first);
        ++slot_;
        return res;
    }

    RdProblem rd_problem(const QueueState& q, const SlotState& s) const {
        RdProblem p;
        for (int n : meas_) {
            auto i = static_cast<std::size_t>(n);
            p.U.push_back(q.U[i]);
            p.E.push_back(q.E[i]);
            p.theta.push_back(cfg_.theta[i]);
            p.alpha.push_back(prm_.alpha_of(n));
            p.f.push_back(f_[i]);
            p.gamma.push_back(cfg_.gamma[i]);
        }
        p.V = cfg_.V;
        p.O = s.O;
        p.R_max = prm_.R_max;
        p.D_min = prm_.D_min;
        p.D_max = prm_.D_max;
        return p;
    }

private:
    RdSolution solve_rd(const RdProblem& p) const {
        if (opt_.solver == RdSolverKind::Distributed) return solve_distributed(p, opt_.dist);
        return solve_central(p);
    }

    NetworkGraph g_;
    GlobalParams prm_;
    std::vector<CostFunction> f_;
    PolicyOptions opt_;
    PolicyConfig cfg_;
    InvariantBounds bounds_;
    InvariantReport report_;
    std::vector<int> meas_;
    double delta_ = 0.0;
    long slot_ = 0;
};

}  // namespace ehwsn
