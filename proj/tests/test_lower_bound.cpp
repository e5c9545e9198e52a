#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ehwsn/lower_bound.hpp"

using namespace ehwsn;

namespace {

BoundContext single(double H_scale) {
    BoundContext c;
    c.g = NetworkGraph::make(1, {true}, {{0, 1}});
    c.prm.D_min = 1e-3;
    c.prm.D_max = 1.0;
    c.prm.R_max = 0.5 * std::log(1.0 / c.prm.D_min);
    c.prm.P_max = c.prm.R_max * H_scale + 1.0;
    c.prm.mu_max = 5.0;
    c.prm.b = 1.0;
    c.prm.alpha = {1.0};
    c.f = {CostFunction::linear()};
    c.V = 1.0;
    return c;
}

DiscreteStateModel model(const BoundContext& c, std::vector<double> gains, std::vector<double> harvest) {
    DiscreteStateModel sm;
    sm.source_states = {Matrix{{1.0}}};
    sm.source_probs = {1.0};
    DiscreteDist s{gains, std::vector<double>(gains.size(), 1.0 / static_cast<double>(gains.size()))};
    DiscreteDist h{harvest, std::vector<double>(harvest.size(), 1.0 / static_cast<double>(harvest.size()))};
    sm.link_gain.assign(c.g.links.size(), s);
    sm.harvest.assign(static_cast<std::size_t>(c.g.num_sensors), h);
    return sm;
}

BoundContext pair_ctx() {
    BoundContext c;
    c.g = NetworkGraph::make(2, {true, true}, {{0, 1}, {1, 2}});
    auto O = exchangeable_O(0.5, 2);
    c.prm.D_min = 1e-2;
    c.prm.D_max = 1.0;
    c.prm.R_max = 0.5 * std::log(det_sub(O, 3) / 1e-4);
    c.prm.P_max = 4.0;
    c.prm.mu_max = 3.0;
    c.prm.b = 1.0;
    c.prm.alpha = {1.0, 1.0};
    c.f = {CostFunction::linear(), CostFunction::square()};
    return c;
}

}  // namespace

TEST_CASE("bins") {
    for (int bins : {1, 2, 8, 32}) {
        auto e = quantile_bins_exponential(2.0, bins);
        auto u = quantile_bins_uniform(3.0, bins);
        double pe = 0, me = 0, pu = 0, mu = 0;
        for (std::size_t i = 0; i < e.values.size(); ++i) {
            pe += e.probs[i];
            me += e.probs[i] * e.values[i];
            pu += u.probs[i];
            mu += u.probs[i] * u.values[i];
        }
        CHECK(pe == doctest::Approx(1.0));
        CHECK(pu == doctest::Approx(1.0));
        CHECK(me == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(mu == doctest::Approx(1.5).epsilon(1e-12));
        CHECK(std::is_sorted(e.values.begin(), e.values.end()));
    }
    // first of two bins: mean of Exp(1) below its median
    auto e2 = quantile_bins_exponential(1.0, 2);
    CHECK(e2.values[0] == doctest::Approx(1.0 - std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("zero multipliers give the distortion floor") {
    auto c = pair_ctx();
    c.V = 3.0;
    DiscreteStateModel sm;
    sm.source_states = {exchangeable_O(0.5, 2)};
    sm.source_probs = {1.0};
    sm.link_gain.assign(2, quantile_bins_exponential(1.0, 2));
    sm.harvest.assign(2, quantile_bins_uniform(3.0, 2));
    auto m = MultiplierSet::zeros(c, 1);
    CHECK(dual_value(m, sm, c) == doctest::Approx(3.0 * (1e-2 + 1e-4)));
}

TEST_CASE("single state reduces to the per-state dual") {
    auto c = pair_ctx();
    DiscreteStateModel sm;
    sm.source_states = {exchangeable_O(0.5, 2)};
    sm.source_probs = {1.0};
    sm.link_gain.assign(2, DiscreteDist{{0.7}, {1.0}});
    sm.harvest = {DiscreteDist{{1.2}, {1.0}}, DiscreteDist{{0.4}, {1.0}}};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int i = 0; i < 20; ++i) {
        auto m = MultiplierSet::zeros(c, 1);
        for (double& l : m.lambda[0]) l = u(rng);
        m.lambda[0][0] = 0.0;
        for (double& v : m.upsilon) v = u(rng);
        for (double& v : m.chi) v = u(rng);
        CHECK(dual_value(m, sm, c) ==
              doctest::Approx(dual_per_state(sm.source_states[0], m.lambda[0], {0.7, 0.7}, {1.2, 0.4}, m, c)));
    }
}

TEST_CASE("per-state dual matches a grid infimum") {
    // one sensor: L = V f(d) + lam (g - z - r) + ups (r / b - C(p)) + chi (r + p - h)
    auto c = single(1.0);
    Matrix o{{1.0}};
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int i = 0; i < 10; ++i) {
        auto m = MultiplierSet::zeros(c, 1);
        m.lambda[0][1] = u(rng);
        m.upsilon[0] = u(rng);
        m.chi[0] = u(rng);
        double s = 0.5 + u(rng), h = u(rng);
        double got = dual_per_state(o, m.lambda[0], {s}, {h}, m, c);

        const int n = 4000;
        double lam = m.lambda[0][1], ups = m.upsilon[0], chi = m.chi[0];
        double best_d = std::numeric_limits<double>::infinity(), best_r = best_d, best_p = best_d;
        for (int k = 0; k <= n; ++k) {
            double d = c.prm.D_min * std::pow(c.prm.D_max / c.prm.D_min, static_cast<double>(k) / n);
            best_d = std::min(best_d, c.V * d - lam * 0.5 * std::log(d));
            double r = c.prm.R_max * k / n;
            best_r = std::min(best_r, (ups / c.prm.b + chi - lam) * r);
            double p = c.prm.P_max * k / n;
            best_p = std::min(best_p, -ups * link_capacity(p, s, c.prm.mu_max) + chi * p);
        }
        double grid = best_d + best_r + best_p + lam * 0.0 - chi * h;  // g({0}) = 0 for unit variance
        CHECK(got <= grid + 1e-9);
        CHECK(got >= grid - 1e-3);
    }
}

TEST_CASE("negative energy price is rejected") {
    auto c = single(1.0);
    auto m = MultiplierSet::zeros(c, 1);
    m.chi[0] = -1.0;
    CHECK_THROWS(detail::power_part(c, 0, c.g.out_links(0), {1.0}, m));
}

TEST_CASE("no harvest forces the maximum distortion") {
    auto c = single(1.0);
    auto sm = model(c, {0.5, 2.0}, {0.0});
    CHECK(direct_solve_small(sm, c) == doctest::Approx(1.0));
    auto lb = maximize_dual(sm, c, 2000, 1.0);
    CHECK(lb.LB <= 1.0 + 1e-12);
    CHECK(lb.LB >= 0.9);
}

TEST_CASE("abundant energy and channel reach the distortion floor") {
    auto c = single(10.0);
    auto sm = model(c, {50.0}, {100.0});
    double direct = direct_solve_small(sm, c);
    CHECK(direct == doctest::Approx(c.prm.D_min).epsilon(1e-9));
    auto lb = maximize_dual(sm, c, 2000, 1.0);
    CHECK(lb.LB <= direct + 1e-12);
    CHECK(lb.LB >= 0.0);
}

TEST_CASE("weak duality on toy instances") {
    auto c = single(1.0);
    for (auto [gains, harvest] : std::vector<std::pair<std::vector<double>, std::vector<double>>>{
             {{0.5, 1.5}, {0.0, 2.0}}, {{1.0}, {0.5, 1.0, 1.5}}, {{0.2, 1.0, 3.0}, {1.0}}}) {
        auto sm = model(c, gains, harvest);
        double direct = direct_solve_small(sm, c);
        auto lb = maximize_dual(sm, c, 1000, 1.0);
        CHECK(lb.LB <= direct + 1e-9);
        for (std::size_t i = 1; i < lb.history.size(); ++i) CHECK(lb.history[i] >= lb.history[i - 1]);
    }
}

TEST_CASE("direct solve limits") {
    auto c = pair_ctx();
    DiscreteStateModel sm;
    sm.source_states = {exchangeable_O(0.5, 2)};
    sm.source_probs = {1.0};
    sm.link_gain.assign(2, quantile_bins_exponential(1.0, 5));
    sm.harvest.assign(2, quantile_bins_uniform(3.0, 2));
    CHECK_THROWS(direct_solve_small(sm, c));
    sm.link_gain.assign(2, quantile_bins_exponential(1.0, 2));
    CHECK_THROWS(direct_solve_small(sm, c, 1));
    CHECK_THROWS(direct_solve_small(sm, c, kDirectMaxGrid + 1));
    DiscreteStateModel bad = sm;
    bad.source_probs = {0.5};
    CHECK_THROWS(direct_solve_small(bad, c));
}
