// One line per acceptance criterion. Pass criterion numbers as arguments to
// run a subset; with no arguments all eight run.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <string>

#include "ehwsn/harness.hpp"
#include "oracles.hpp"

using namespace ehwsn;

namespace {

// tolerances
constexpr double kRdRel = 1e-3;
constexpr double kPowerAbs = 1e-6;
constexpr double kSandwichSe = 3.0;
constexpr double kTrendSe = 2.0;
constexpr double kOmegaF0Ratio = 2.0;
constexpr double kOmegaQueueRatio = 1.5;
constexpr double kSideInfoGain = 0.10;

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

struct Stats {
    double F0 = 0, F0_se = 0, qavg = 0, qavg_se = 0, qmax = 0;
    long violations = 0;
};

Stats replicate(ExperimentConfig c, int seeds) {
    c.replicas = seeds;
    c.lower_bound = false;
    auto rows = experiment_single(c);
    auto s = summarize(rows).at(0);
    Stats out{s.F0_mean, s.F0_se, s.qavg_mean, s.qavg_se, s.qmax_mean, 0};
    for (const auto& r : rows) out.violations += r.violations;
    return out;
}

ExperimentConfig base() {
    ExperimentConfig c;
    c.threads = 1;
    c.strict = false;
    return c;
}

// 1: invariants on randomized configs
Outcome invariants() {
    std::mt19937_64 rng(20240);
    const double Vs[] = {1.0, 1e2, 1e4};
    const double omegas[] = {0.0, 0.5, 0.9};
    long bad = 0, energy_throws = 0;
    int configs = 0;
    std::string first;
    for (int i = 0; i < 22; ++i) {
        auto c = base();
        int n = 2 + static_cast<int>(rng() % 4);
        c.graph = random_graph(rng, n);
        c.V = Vs[rng() % 3];
        c.omega = omegas[rng() % 3];
        c.cost = rng() % 2 ? "linear" : "square";
        c.slots = 10000;
        c.seed = rng();
        c.initial_energy = (rng() % 2) ? 0.0 : 1.0;
        // two side-info runs; each slot costs a line search there
        if (i < 2) {
            c.mode = "side-info";
            c.omega = 0.9;
        }
        ++configs;
        try {
            auto m = run(c);
            bad += m.violations.total();
            if (first.empty() && m.violations.total() > 0) first = m.violations.first;
        } catch (const EnergyViolation& e) {
            ++energy_throws;
            if (first.empty()) first = e.what();
        }
    }
    std::string d = fmt("configs=%.0f violations=%.0f energy_throws=%.0f", configs, static_cast<double>(bad),
                        static_cast<double>(energy_throws));
    if (!first.empty()) d += " first: " + first;
    return {bad == 0 && energy_throws == 0 && configs >= 20, d};
}

// 2: LB <= F0 <= LB + B/V + 3 se on the default topology
Outcome sandwich() {
    auto c = base();
    c.lb_bins = 8;
    double lb = lower_bound_for(c);
    bool ok = true;
    std::string d = fmt("LB=%.5f", lb);
    for (double V : {1e2, 1e3, 1e4}) {
        auto k = c;
        k.V = V;
        k.slots = std::max(40000L, static_cast<long>(20 * V));
        k.burn_in = 0.5;
        auto s = replicate(k, 5);
        Policy pol(resolve(k).g, resolve(k).prm, resolve(k).f, resolve(k).opt);
        double gap = pol.config().B / V;
        bool here = lb <= s.F0 && s.F0 <= lb + gap + kSandwichSe * s.F0_se && s.violations == 0;
        ok = ok && here;
        d += fmt(" | V=%.0f F0=%.5f se=%.1e B/V=%.3g", V, s.F0, s.F0_se, gap);
    }
    return {ok, d};
}

// 3: per-slot oracles
Outcome oracles() {
    std::mt19937_64 rng(2024);
    // signed relative excess over the oracle; the grid is not exact, so slightly negative is fine
    double worst_c = -1e300, worst_d = -1e300, worst_cd = 0;
    for (int i = 0; i < 20; ++i) {
        auto p = oracle::random_rd_problem(rng, 2 + i % 2);
        auto o = oracle::rd_grid(p);
        auto c = solve_central(p);
        auto d = solve_distributed(p);
        auto rel = [](double a, double b) { return (a - b) / std::max(1e-12, std::abs(b)); };
        if (c.flagged || d.flagged) return {false, "flagged solution"};
        worst_c = std::max(worst_c, rel(c.objective, o.value));
        worst_d = std::max(worst_d, rel(d.objective, o.value));
        worst_cd = std::max(worst_cd, std::abs(rel(d.objective, c.objective)));
    }
    std::mt19937_64 prng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::exponential_distribution<double> ex(1.0);
    double worst_p = -1e300;
    for (int i = 0; i < 200; ++i) {
        std::size_t n = 1 + i % 2;
        std::vector<double> w, s;
        for (std::size_t j = 0; j < n; ++j) {
            w.push_back(200.0 * u(prng));
            s.push_back(ex(prng));
        }
        double cost = 100.0 * u(prng), budget = 20.0 * u(prng);
        auto p = detail::water_fill(w, s, cost, budget, 5.0);
        worst_p = std::max(worst_p, oracle::power_grid(w, s, cost, budget, 5.0) - oracle::power_value(w, s, cost, p, 5.0));
    }
    bool ok = worst_c <= kRdRel && worst_d <= kRdRel && worst_cd <= kRdRel && worst_p <= kPowerAbs;
    return {ok, fmt("central=%.1e distributed=%.1e dist_vs_central=%.1e power_grid_excess=%.1e", worst_c, worst_d,
                    worst_cd, worst_p)};
}

// 4: F0 nonincreasing in V, queue growth under the backlog envelope
Outcome v_trend() {
    auto c = base();
    std::vector<double> Vs{1, 2500, 5000, 7500, 10000};
    std::vector<Stats> st;
    for (double V : Vs) {
        auto k = c;
        k.V = V;
        k.slots = std::max(20000L, static_cast<long>(20 * V));
        k.burn_in = 0.5;
        st.push_back(replicate(k, 3));
    }
    bool mono = true;
    std::string d = "F0:";
    for (std::size_t i = 0; i < st.size(); ++i) {
        d += fmt(" %.4f", st[i].F0);
        if (i > 0) {
            double tol = kTrendSe * std::hypot(st[i].F0_se, st[i - 1].F0_se);
            mono = mono && st[i].F0 <= st[i - 1].F0 + tol;
        }
    }
    // least-squares slope of max network queue against V
    double mv = 0, mq = 0;
    for (std::size_t i = 0; i < st.size(); ++i) {
        mv += Vs[i];
        mq += st[i].qmax;
    }
    mv /= static_cast<double>(st.size());
    mq /= static_cast<double>(st.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < st.size(); ++i) {
        sxy += (Vs[i] - mv) * (st[i].qmax - mq);
        sxx += (Vs[i] - mv) * (Vs[i] - mv);
    }
    double slope = sxy / sxx;
    auto r = resolve(c);
    Policy pol(r.g, r.prm, r.f, r.opt);
    double gsum = 0;
    for (int n = 0; n < r.g.num_sensors; ++n) gsum += pol.config().gamma[static_cast<std::size_t>(n)];
    long viol = 0;
    for (const auto& s : st) viol += s.violations;
    d += fmt(" | qmax slope=%.3f envelope=%.1f violations=%.0f", slope, gsum, static_cast<double>(viol));
    return {mono && slope <= gsum && viol == 0, d};
}

// 5: correlation helps
Outcome omega_ratio() {
    auto c = base();
    c.V = 1000;
    c.slots = 20000;
    c.burn_in = 0.5;
    auto k0 = c, k1 = c;
    k0.omega = 0.0;
    k1.omega = 0.99;
    auto a = replicate(k0, 3), b = replicate(k1, 3);
    double rf = a.F0 / b.F0, rq = a.qavg / b.qavg;
    return {rf >= kOmegaF0Ratio && rq >= kOmegaQueueRatio,
            fmt("F0 %.4f/%.4f=%.2f", a.F0, b.F0, rf) + fmt(" queue %.1f/%.1f=%.2f", a.qavg, b.qavg, rq)};
}

// 6: side information against the forced zero-rate baseline
Outcome side_info_gain() {
    auto c = base();
    c.V = 1000;
    c.omega = 0.95;
    c.mode = "side-info";
    c.slots = 10000;
    c.burn_in = 0.5;
    auto with = replicate(c, 3);
    c.force_zero_side_rate = true;
    auto without = replicate(c, 3);
    double gf = 1.0 - with.F0 / without.F0, gq = 1.0 - with.qavg / without.qavg;
    bool ok = gf >= kSideInfoGain && gq >= kSideInfoGain && with.violations == 0 && without.violations == 0;
    return {ok, fmt("F0 %.4f vs %.4f (-%.1f%%)", with.F0, without.F0, 100 * gf) +
                    fmt(" queue %.1f vs %.1f (-%.1f%%)", with.qavg, without.qavg, 100 * gq)};
}

// 7: weak duality against the direct relaxed solve
Outcome bound_consistency() {
    struct Toy {
        BoundContext c;
        DiscreteStateModel sm;
    };
    auto params = [](double R_max, double P_max, int N) {
        GlobalParams p;
        p.D_min = 1e-2;
        p.D_max = 1.0;
        p.R_max = R_max;
        p.P_max = P_max;
        p.mu_max = 3.0;
        p.b = 1.0;
        p.alpha.assign(static_cast<std::size_t>(N), 1.0);
        return p;
    };
    auto dist = [](std::vector<double> v) {
        return DiscreteDist{v, std::vector<double>(v.size(), 1.0 / static_cast<double>(v.size()))};
    };
    std::vector<Toy> toys;
    {
        Toy t;
        t.c.g = NetworkGraph::make(1, {true}, {{0, 1}});
        t.c.prm = params(2.3, 2.3, 1);
        t.c.f = {CostFunction::linear()};
        t.sm.source_states = {Matrix{{1.0}}};
        t.sm.source_probs = {1.0};
        t.sm.link_gain = {dist({0.3, 1.0, 2.5})};
        t.sm.harvest = {dist({0.0, 1.0, 2.0})};
        toys.push_back(t);
        t.c.f = {CostFunction::square()};
        t.sm.source_states = {Matrix{{1.0}}, Matrix{{2.0}}};
        t.sm.source_probs = {0.5, 0.5};
        t.c.prm = params(2.7, 2.7, 1);
        toys.push_back(t);
    }
    {
        Toy t;
        t.c.g = NetworkGraph::make(2, {true, true}, {{0, 2}, {1, 2}});
        auto O = exchangeable_O(0.5, 2);
        t.c.prm = params(0.5 * std::log(det_sub(O, 3) / 1e-4), 3.0, 2);
        t.c.f = {CostFunction::linear(), CostFunction::linear()};
        t.sm.source_states = {O};
        t.sm.source_probs = {1.0};
        t.sm.link_gain = {dist({0.5, 1.5}), dist({1.0})};
        t.sm.harvest = {dist({1.0}), dist({0.5, 1.5})};
        toys.push_back(t);
        t.sm.source_states = {exchangeable_O(0.2, 2), exchangeable_O(0.8, 2), exchangeable_O(0.5, 2)};
        t.sm.source_probs = {0.3, 0.3, 0.4};
        t.c.prm = params(0.5 * std::log(1.0 / 1e-4), 3.0, 2);
        toys.push_back(t);
    }
    {
        Toy t;
        t.c.g = NetworkGraph::make(2, {true, false}, {{0, 1}, {1, 2}});
        t.c.prm = params(2.3, 2.0, 2);
        t.c.f = {CostFunction::linear(), CostFunction::linear()};
        t.sm.source_states = {Matrix{{1.0}}};
        t.sm.source_probs = {1.0};
        t.sm.link_gain = {dist({0.5, 2.0}), dist({1.0, 3.0})};
        t.sm.harvest = {dist({0.5, 1.5}), dist({1.0})};
        toys.push_back(t);
    }
    bool ok = true;
    std::string d;
    for (auto& t : toys) {
        t.c.V = 1.0;
        double direct = direct_solve_small(t.sm, t.c);
        double lb = maximize_dual(t.sm, t.c, 3000, 1.0).LB;
        ok = ok && lb <= direct;
        d += fmt("%.4f<=%.4f ", lb, direct);
    }
    return {ok && toys.size() == 5, d};
}

// 8: identical config and seed give identical bytes
Outcome determinism() {
    auto c = base();
    c.slots = 2000;
    c.V = 500;
    c.replicas = 3;
    c.threads = 3;
    c.lb_iters = 200;
    std::string files[2];
    for (int i = 0; i < 2; ++i) {
        files[i] = "acceptance_determinism_" + std::to_string(i) + ".csv";
        write_file(files[i], to_csv(experiment_single(c)));
    }
    auto slurp = [](const std::string& f) {
        std::ifstream in(f, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    std::string a = slurp(files[0]), b = slurp(files[1]);
    return {!a.empty() && a == b, fmt("bytes=%.0f", static_cast<double>(a.size()))};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> want;
    for (int i = 1; i < argc; ++i) want.insert(std::atoi(argv[i]));
    struct Item {
        int id;
        const char* name;
        Outcome (*fn)();
    };
    const Item items[] = {
        {1, "invariants on randomized configs", invariants},
        {2, "lower bound sandwich", sandwich},
        {3, "per-slot subproblem oracles", oracles},
        {4, "V trend", v_trend},
        {5, "correlation ratio", omega_ratio},
        {6, "side information gain", side_info_gain},
        {7, "lower bound consistency", bound_consistency},
        {8, "determinism", determinism},
    };
    int failed = 0;
    for (const auto& it : items) {
        if (!want.empty() && !want.count(it.id)) continue;
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = it.fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %d %s: %s (%.1fs) %s\n", it.id, o.pass ? "PASS" : "FAIL", it.name, secs,
                    o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
