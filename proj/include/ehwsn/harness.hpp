#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <optional>
#include <functional>
#include <limits>
#include <locale>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "core.hpp"
#include "lower_bound.hpp"
#include "policy.hpp"
#include "region.hpp"

namespace ehwsn {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
    std::string topology = "fig1";  // fig1 | line:N | star:N
    std::optional<NetworkGraph> graph;  // overrides topology when set (plain-mode graph)
    double omega = 0.5;
    double V = 1000.0;
    long slots = 20000;
    std::uint64_t seed = 1;
    std::string mode = "plain";  // plain | side-info
    bool force_zero_side_rate = false;
    double burn_in = 0.1;
    double initial_energy = 0.0;  // starting battery as a fraction of theta
    std::string cost = "linear";  // linear | square

    double gain_scale = 1.0;  // mean of the exponential power gains
    double H_max = 3.0;
    double H_max_sink = 12.0;
    double alpha = 1.0;
    double alpha_sink = 1.0;
    double D_min = 1e-3;
    double D_max = 1.0;
    double mu_max = 5.0;
    double b = 1.0;
    double P_max = 0.0;  // 0: alpha * R_max
    double R_max = 0.0;  // 0: full-set region bound at D_min

    std::string rd_solver = "central";  // central | distributed | subgradient
    int rd_iters = 300;
    double eps0 = 1.0;
    double eps_reg = 1e-4;

    int lb_bins = 8;
    int lb_iters = 3000;
    bool lower_bound = true;
    bool strict = true;
    bool keep_trace = false;
    int replicas = 1;
    int threads = 0;  // 0: hardware concurrency
    std::vector<double> v_list{1, 10, 100, 1000, 10000};
    std::vector<double> omega_list{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99};

    bool side_info() const { return mode == "side-info"; }
};

// Nodes 1..3 measure and 4, 5 relay (0-based 0..2 and 3, 4).
inline NetworkGraph fig1_graph(bool collector) {
    std::vector<Link> links{{0, 3}, {1, 3}, {1, 4}, {2, 4}, {3, 5}, {4, 5}};
    if (collector) links.push_back({5, 6});
    return NetworkGraph::make(5, {true, true, true, false, false}, links, collector);
}

inline NetworkGraph line_graph(int n, bool collector) {
    std::vector<Link> links;
    for (int i = 0; i < n; ++i) links.push_back({i, i + 1});
    if (collector) links.push_back({n, n + 1});
    return NetworkGraph::make(n, std::vector<bool>(static_cast<std::size_t>(n), true), links, collector);
}

inline NetworkGraph star_graph(int n, bool collector) {
    std::vector<Link> links;
    for (int i = 0; i < n; ++i) links.push_back({i, n});
    if (collector) links.push_back({n, n + 1});
    return NetworkGraph::make(n, std::vector<bool>(static_cast<std::size_t>(n), true), links, collector);
}

inline NetworkGraph with_collector(const NetworkGraph& g) {
    if (g.has_collector) return g;
    auto links = g.links;
    links.push_back({g.sink(), g.sink() + 1});
    return NetworkGraph::make(g.num_sensors, g.measuring, links, true);
}

inline NetworkGraph build_graph(const ExperimentConfig& c) {
    bool col = c.side_info();
    if (c.graph) return col ? with_collector(*c.graph) : *c.graph;
    if (c.topology == "fig1") return fig1_graph(col);
    auto colon = c.topology.find(':');
    if (colon != std::string::npos) {
        std::string kind = c.topology.substr(0, colon);
        int n = std::stoi(c.topology.substr(colon + 1));
        if (n < 1 || n > 16) throw std::invalid_argument("topology: node count out of range");
        if (kind == "line") return line_graph(n, col);
        if (kind == "star") return star_graph(n, col);
    }
    throw std::invalid_argument("unknown topology: " + c.topology);
}

// Random acyclic graph: every sensor links to the sink or to later sensors,
// fan-out and fan-in at most 2.
template <class Rng>
NetworkGraph random_graph(Rng& rng, int n) {
    std::vector<Link> links;
    std::vector<int> fan_in(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        std::vector<int> targets;
        for (int j = i + 1; j < n; ++j)
            if (fan_in[static_cast<std::size_t>(j)] < 2) targets.push_back(j);
        std::shuffle(targets.begin(), targets.end(), rng);
        int want = static_cast<int>(rng() % 2) + 1;
        int took = 0;
        for (int j : targets) {
            if (took == want) break;
            links.push_back({i, j});
            ++fan_in[static_cast<std::size_t>(j)];
            ++took;
        }
        if (took == 0 || (took < want && rng() % 2 == 0) || i == n - 1) links.push_back({i, n});
    }
    std::vector<bool> meas(static_cast<std::size_t>(n));
    bool any = false;
    for (int i = 0; i < n; ++i) {
        meas[static_cast<std::size_t>(i)] = rng() % 3 != 0;
        any = any || meas[static_cast<std::size_t>(i)];
    }
    if (!any) meas[0] = true;
    return NetworkGraph::make(n, meas, links, false);
}

struct ResolvedSetup {
    NetworkGraph g;
    GlobalParams prm;
    std::vector<CostFunction> f;
    PolicyOptions opt;
    Matrix O;
};

inline double auto_R_max(const Matrix& O, double D_min) {
    int K = static_cast<int>(O.size());
    return 0.5 * log_b(det_sub(O, full_mask(K)) / std::pow(D_min, K));
}

inline ResolvedSetup resolve(const ExperimentConfig& c) {
    if (c.mode != "plain" && c.mode != "side-info") throw std::invalid_argument("mode must be plain or side-info");
    if (c.omega < 0 || c.omega >= 1) throw std::invalid_argument("omega must lie in [0,1)");
    if (c.slots < 0) throw std::invalid_argument("slots must be >= 0");
    if (c.burn_in < 0 || c.burn_in >= 1) throw std::invalid_argument("burn_in must lie in [0,1)");
    // sources have unit variance; below that a silent node is infeasible
    if (c.D_max < 1.0) throw std::invalid_argument("D_max must be >= 1");
    ResolvedSetup s;
    s.g = build_graph(c);
    int K = static_cast<int>(s.g.measuring_nodes().size());
    s.O = exchangeable_O(c.omega, K);
    check_correlation(s.O);
    s.prm.D_min = c.D_min;
    s.prm.D_max = c.D_max;
    s.prm.H_max = c.H_max;
    s.prm.mu_max = c.mu_max;
    s.prm.b = c.b;
    s.prm.R_max = c.R_max > 0 ? c.R_max : auto_R_max(s.O, c.D_min);
    s.prm.P_max = c.P_max > 0 ? c.P_max : c.alpha * s.prm.R_max;
    s.prm.alpha.assign(static_cast<std::size_t>(s.g.num_sensors), c.alpha);
    s.prm.validate();
    CostFunction fn;
    if (c.cost == "linear") fn = CostFunction::linear();
    else if (c.cost == "square") fn = CostFunction::square();
    else throw std::invalid_argument("cost must be linear or square");
    s.f.assign(static_cast<std::size_t>(s.g.num_sensors), fn);
    s.opt.V = c.V;
    s.opt.side_info = c.side_info();
    s.opt.force_zero_side_rate = c.force_zero_side_rate;
    s.opt.omega = c.omega;
    s.opt.side.alpha_d = c.alpha_sink;
    s.opt.side.H_max_d = c.H_max_sink;
    s.opt.strict = c.strict;
    if (c.rd_solver == "distributed") s.opt.solver = RdSolverKind::Distributed;
    else if (c.rd_solver == "subgradient") {
        s.opt.solver = RdSolverKind::Distributed;
        s.opt.dist.method = DistributedMethod::Subgradient;
    } else if (c.rd_solver != "central")
        throw std::invalid_argument("rd_solver must be central, distributed or subgradient");
    s.opt.dist.max_iter = c.rd_iters;
    s.opt.dist.eps0 = c.eps0;
    s.opt.dist.eps_reg = c.eps_reg;
    return s;
}

// Draw order: one gain per link, then one harvest per node (sensors, sink).
template <class Rng>
SlotState gen_slot_state(Rng& rng, const ExperimentConfig& c, const ResolvedSetup& s) {
    SlotState st;
    std::exponential_distribution<double> gain(1.0 / c.gain_scale);
    for (std::size_t l = 0; l < s.g.links.size(); ++l) st.S.push_back(gain(rng));
    std::uniform_real_distribution<double> h(0.0, 1.0);
    for (int n = 0; n <= s.g.num_sensors; ++n) {
        double hi = n == s.g.sink() ? c.H_max_sink : c.H_max;
        st.H.push_back(h(rng) * hi);
    }
    st.H.resize(static_cast<std::size_t>(s.g.num_nodes()), 0.0);
    st.O = s.O;
    return st;
}

struct RunMetrics {
    double F0 = 0.0;
    double queue_max = 0.0;
    double queue_avg = 0.0;
    double B = 0.0;
    double V = 0.0;
    long slots = 0;
    InvariantReport violations;
    // filled when keep_trace is set
    std::vector<std::vector<double>> U, E, R, D, P;
    std::vector<double> cost_series, queue_series;
};

inline RunMetrics run(const ExperimentConfig& c) {
    ResolvedSetup s = resolve(c);
    Policy pol(s.g, s.prm, s.f, s.opt);
    std::mt19937_64 rng(c.seed);
    RunMetrics m;
    m.B = pol.config().B;
    m.V = c.V;
    m.slots = c.slots;
    auto meas = s.g.measuring_nodes();
    long burn = static_cast<long>(std::floor(c.burn_in * static_cast<double>(c.slots)));
    QueueState q = pol.initial_state(c.initial_energy);
    double cost_sum = 0.0, queue_sum = 0.0;
    long counted = 0;
    for (long t = 0; t < c.slots; ++t) {
        SlotState st = gen_slot_state(rng, c, s);
        StepResult r = pol.step(q, st);
        double cost = 0.0;
        for (int n : meas) cost += s.f[static_cast<std::size_t>(n)](r.decision.D[static_cast<std::size_t>(n)]);
        double queue = 0.0;
        for (int n = 0; n < s.g.num_sensors; ++n) queue += r.next.U[static_cast<std::size_t>(n)];
        m.queue_max = std::max(m.queue_max, queue);
        if (t >= burn) {
            cost_sum += cost;
            queue_sum += queue;
            ++counted;
        }
        if (c.keep_trace) {
            m.U.push_back(r.next.U);
            m.E.push_back(r.next.E);
            m.R.push_back(r.decision.R);
            m.D.push_back(r.decision.D);
            m.P.push_back(r.decision.P);
            m.cost_series.push_back(cost);
            m.queue_series.push_back(queue);
        }
        q = std::move(r.next);
    }
    if (counted > 0) {
        m.F0 = cost_sum / static_cast<double>(counted);
        m.queue_avg = queue_sum / static_cast<double>(counted);
    }
    m.violations = pol.report();
    return m;
}

// Lower bound on the optimal time-average cost for the plain-mode problem.
inline double lower_bound_for(const ExperimentConfig& c) {
    ExperimentConfig pc = c;
    pc.mode = "plain";
    ResolvedSetup s = resolve(pc);
    BoundContext ctx{s.g, s.prm, s.f, 1.0};
    auto sm = discretize(s.g, s.O, c.gain_scale, c.H_max, c.lb_bins);
    return maximize_dual(sm, ctx, c.lb_iters).LB;
}

struct ResultRow {
    std::string sweep_param;
    double value = 0.0;
    double F0 = 0.0, queue_max = 0.0, queue_avg = 0.0;
    double lower_bound = std::numeric_limits<double>::quiet_NaN();
    double B_over_V = 0.0;
    long violations = 0;
    std::uint64_t seed = 0;
    long slots = 0;
};

inline constexpr const char* kCsvHeader =
    "sweep_param,value,F0,queue_max,queue_avg,lower_bound,B_over_V,violations,seed,slots";

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(12);
    os << v;
    return os.str();
}

inline std::string to_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << kCsvHeader << '\n';
    for (const auto& r : rows)
        os << r.sweep_param << ',' << format_number(r.value) << ',' << format_number(r.F0) << ','
           << format_number(r.queue_max) << ',' << format_number(r.queue_avg) << ','
           << format_number(r.lower_bound) << ',' << format_number(r.B_over_V) << ',' << r.violations << ','
           << r.seed << ',' << r.slots << '\n';
    return os.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

// Runs jobs on a small thread pool; results keep the job order.
template <class T>
std::vector<T> run_parallel(const std::vector<std::function<T()>>& jobs, int threads) {
    std::vector<T> out(jobs.size());
    std::vector<std::exception_ptr> errs(jobs.size());
    int nt = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    nt = std::min<int>(nt, static_cast<int>(jobs.size()));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                out[i] = jobs[i]();
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    return out;
}

struct SweepPoint {
    std::string param;
    double value;
    ExperimentConfig cfg;
    double lower_bound;
};

inline std::vector<ResultRow> run_points(const std::vector<SweepPoint>& pts, int replicas, int threads) {
    std::vector<std::function<ResultRow()>> jobs;
    for (const auto& p : pts) {
        for (int i = 0; i < replicas; ++i) {
            jobs.push_back([p, i] {
                ExperimentConfig c = p.cfg;
                c.seed = p.cfg.seed + static_cast<std::uint64_t>(i);
                RunMetrics m = run(c);
                ResultRow r;
                r.sweep_param = p.param;
                r.value = p.value;
                r.F0 = m.F0;
                r.queue_max = m.queue_max;
                r.queue_avg = m.queue_avg;
                r.lower_bound = p.lower_bound;
                r.B_over_V = m.B / m.V;
                r.violations = m.violations.total();
                r.seed = c.seed;
                r.slots = c.slots;
                return r;
            });
        }
    }
    return run_parallel(jobs, threads);
}

inline double maybe_lower_bound(const ExperimentConfig& c) {
    return c.lower_bound ? lower_bound_for(c) : std::numeric_limits<double>::quiet_NaN();
}

inline std::vector<ResultRow> experiment_single(const ExperimentConfig& c) {
    return run_points({{"V", c.V, c, c.side_info() ? std::numeric_limits<double>::quiet_NaN() : maybe_lower_bound(c)}},
                      std::max(1, c.replicas), c.threads);
}

inline std::vector<ResultRow> experiment_v_sweep(const ExperimentConfig& c, const std::vector<double>& V_list) {
    double lb = c.side_info() ? std::numeric_limits<double>::quiet_NaN() : maybe_lower_bound(c);
    std::vector<SweepPoint> pts;
    for (double v : V_list) {
        ExperimentConfig k = c;
        k.V = v;
        pts.push_back({"V", v, k, lb});
    }
    return run_points(pts, std::max(1, c.replicas), c.threads);
}

inline std::vector<ResultRow> experiment_omega_sweep(const ExperimentConfig& c,
                                                     const std::vector<double>& omega_list) {
    std::vector<SweepPoint> pts;
    for (double w : omega_list) {
        ExperimentConfig k = c;
        k.omega = w;
        double lb = c.side_info() ? std::numeric_limits<double>::quiet_NaN() : maybe_lower_bound(k);
        pts.push_back({"omega", w, k, lb});
    }
    return run_points(pts, std::max(1, c.replicas), c.threads);
}

// Side-info mode against the forced R_d = 0 baseline for each omega.
// Baseline rows carry sweep_param "omega_baseline".
inline std::vector<ResultRow> experiment_side_info(const ExperimentConfig& c, const std::vector<double>& omega_list) {
    std::vector<SweepPoint> pts;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (double w : omega_list) {
        ExperimentConfig k = c;
        k.mode = "side-info";
        k.omega = w;
        k.force_zero_side_rate = false;
        pts.push_back({"omega", w, k, nan});
        k.force_zero_side_rate = true;
        pts.push_back({"omega_baseline", w, k, nan});
    }
    return run_points(pts, std::max(1, c.replicas), c.threads);
}

struct Summary {
    std::string param;
    double value;
    double F0_mean, F0_se, qavg_mean, qavg_se, qmax_mean, qmax_se;
    int n;
};

// Mean and standard error per (param, value), in first-seen order.
inline std::vector<Summary> summarize(const std::vector<ResultRow>& rows) {
    std::vector<Summary> out;
    std::vector<std::vector<const ResultRow*>> groups;
    for (const auto& r : rows) {
        std::size_t i = 0;
        while (i < out.size() && !(out[i].param == r.sweep_param && out[i].value == r.value)) ++i;
        if (i == out.size()) {
            out.push_back({r.sweep_param, r.value, 0, 0, 0, 0, 0, 0, 0});
            groups.emplace_back();
        }
        groups[i].push_back(&r);
    }
    auto ms = [](const std::vector<const ResultRow*>& g, double ResultRow::*f, double& mean, double& se) {
        double s = 0;
        for (auto* r : g) s += r->*f;
        mean = s / static_cast<double>(g.size());
        double v = 0;
        for (auto* r : g) v += (r->*f - mean) * (r->*f - mean);
        se = g.size() > 1 ? std::sqrt(v / static_cast<double>(g.size() - 1) / static_cast<double>(g.size())) : 0.0;
    };
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].n = static_cast<int>(groups[i].size());
        ms(groups[i], &ResultRow::F0, out[i].F0_mean, out[i].F0_se);
        ms(groups[i], &ResultRow::queue_avg, out[i].qavg_mean, out[i].qavg_se);
        ms(groups[i], &ResultRow::queue_max, out[i].qmax_mean, out[i].qmax_se);
    }
    return out;
}

}  // namespace ehwsn
