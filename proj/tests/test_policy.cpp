#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ehwsn/policy.hpp"

using namespace ehwsn;

namespace {

GlobalParams one_sensor_params() {
    GlobalParams p;
    p.D_min = 1e-3;
    p.D_max = 1.0;
    p.R_max = 0.5 * std::log(1.0 / p.D_min);
    p.P_max = p.R_max;
    p.H_max = 3.0;
    p.mu_max = 5.0;
    p.b = 1.0;
    p.alpha = {1.0};
    return p;
}

Policy one_sensor(double V) {
    auto g = NetworkGraph::make(1, {true}, {{0, 1}});
    PolicyOptions opt;
    opt.V = V;
    return Policy(g, one_sensor_params(), {CostFunction::linear()}, opt);
}

SlotState slot(double S, double H) {
    SlotState s;
    s.S = {S};
    s.O = {{1.0}};
    s.H = {H, 0.0};
    return s;
}

}  // namespace

TEST_CASE("gamma") {
    CHECK(gamma_n(CostFunction::linear(), 1e-3, 1.0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(gamma_n(CostFunction::square(), 1e-3, 1.0) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(gamma_n(CostFunction::constant(0.7), 1e-3, 1.0) == 0.0);
    CHECK(gamma_n(CostFunction::linear(), 1e-3, 1.0, kDistortionLogWeight) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("harvest decision") {
    CHECK(harvest_decide(3.0, 4.0, 5.0) == 2.0);
    CHECK(harvest_decide(3.0, 1.0, 5.0) == 1.0);
    CHECK(harvest_decide(5.0, 4.0, 5.0) == 0.0);
    CHECK(harvest_decide(6.0, 4.0, 5.0) == 0.0);
}

TEST_CASE("constant B") {
    double delta = 0.7;
    auto b = constant_B(1.0, 1.0, 0.0, 0.0, 0.0, delta, 1, 1);
    CHECK(b.B_U == 2.5);
    CHECK(b.B_E == 0.0);
    CHECK(b.B == doctest::Approx(2.5 + delta));
    CHECK(constant_B(0, 0, 0, 0, 0, 0, 1, 3).B == 0.0);
    // scales with N
    auto b2 = constant_B(2.0, 3.0, 1.0, 0.5, 4.0, 1.0, 2, 2);
    auto b1 = constant_B(2.0, 3.0, 1.0, 0.5, 4.0, 1.0, 2, 1);
    CHECK(b2.B == doctest::Approx(2 * b1.B));
}

TEST_CASE("theta formula") {
    auto pol = one_sensor(100.0);
    const auto& prm = pol.params();
    const auto& c = pol.config();
    CHECK(c.gamma[0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(c.beta[0] == 1.0);
    CHECK(c.theta[0] == doctest::Approx(2.0 * 100.0 + prm.R_max + prm.P_max).epsilon(1e-9));
    CHECK(c.theta[1] == doctest::Approx(prm.P_max));  // sink: no gamma, no compression
}

TEST_CASE("invariant detector") {
    InvariantBounds b;
    b.theta = {10.0};
    b.U_max = {5.0};
    b.spend_floor = {2.0};
    b.alpha = {1.0};
    b.tracked = {true};
    TraceRow ok{{4.0}, {3.0}, {1.0}, {0.5}, {0.5}};
    InvariantReport rep;
    check_row(ok, b, 0, rep);
    CHECK(rep.total() == 0);

    TraceRow over{{4.0}, {11.0}, {1.0}, {0.0}, {0.0}};
    check_row(over, b, 1, rep);
    CHECK(rep.eq32 == 1);
    CHECK(rep.first.find("slot=1") != std::string::npos);

    TraceRow backlog{{4.0}, {3.0}, {6.0}, {0.0}, {0.0}};
    check_row(backlog, b, 2, rep);
    CHECK(rep.eq33 == 1);

    TraceRow low{{1.0}, {0.5}, {1.0}, {0.5}, {0.0}};
    check_row(low, b, 3, rep);
    CHECK(rep.eq34 == 1);
    CHECK(rep.eq11 == 0);

    TraceRow spent{{1.0}, {0.0}, {1.0}, {1.0}, {0.5}};
    check_row(spent, b, 4, rep);
    CHECK(rep.eq11 == 1);
    CHECK(rep.total() == 5);

    b.tracked = {false};
    InvariantReport quiet;
    check_row(spent, b, 0, quiet);
    CHECK(quiet.total() == 0);
    CHECK(check_invariants({ok, over, spent}, b).total() == 0);
}

TEST_CASE("empty battery: no rate and no power") {
    auto pol = one_sensor(10.0);
    auto q = pol.initial_state();
    q.U[0] = 0.5 * pol.config().gamma[0] * pol.config().V;
    auto r = pol.step(q, slot(1.0, 2.0));
    CHECK(r.decision.R[0] == 0.0);
    CHECK(r.decision.D[0] == doctest::Approx(1.0));
    CHECK(r.decision.P[0] == 0.0);
    CHECK(r.decision.Htilde[0] == 2.0);
    CHECK(r.next.E[0] == 2.0);
    CHECK(r.next.U[0] == q.U[0]);
}

TEST_CASE("one sensor hand trace") {
    auto pol = one_sensor(10.0);
    const auto& prm = pol.params();
    double theta = pol.config().theta[0];
    auto q = pol.initial_state(1.0);
    CHECK(q.E[0] == theta);
    // slot 0: full battery and empty queue, rate is free -> D_min, R = R_max
    auto r = pol.step(q, slot(1.0, 3.0));
    CHECK(r.decision.D[0] == doctest::Approx(prm.D_min).epsilon(1e-4));
    CHECK(r.decision.R[0] == doctest::Approx(prm.R_max).epsilon(1e-4));
    CHECK(r.decision.P[0] == 0.0);  // weight U - delta is negative
    CHECK(r.decision.Htilde[0] == 0.0);
    CHECK(r.next.U[0] == doctest::Approx(r.decision.R[0] / prm.b));
    CHECK(r.next.E[0] == doctest::Approx(theta - r.decision.R[0]));
    // slot 1: backlog R_max is still below delta, so no power yet
    auto r1 = pol.step(r.next, slot(1.0, 3.0));
    CHECK(r1.decision.P[0] == 0.0);
    CHECK(r1.decision.Htilde[0] == doctest::Approx(std::min(3.0, theta - r.next.E[0])));
    CHECK(pol.report().total() == 0);
}

TEST_CASE("random run keeps every invariant") {
    auto g = NetworkGraph::make(3, {true, true, false}, {{0, 2}, {1, 2}, {2, 3}});
    GlobalParams prm = one_sensor_params();
    prm.alpha = {1.0, 1.0, 1.0};
    prm.R_max = 0.5 * std::log(det_sub(exchangeable_O(0.5, 2), 3) / 1e-6);
    prm.P_max = prm.R_max;
    PolicyOptions opt;
    opt.V = 50.0;
    Policy pol(g, prm, {CostFunction::linear(), CostFunction::square(), CostFunction::linear()}, opt);
    std::mt19937_64 rng(21);
    std::exponential_distribution<double> gain(1.0);
    std::uniform_real_distribution<double> harvest(0.0, prm.H_max);
    auto q = pol.initial_state();
    for (int t = 0; t < 3000; ++t) {
        SlotState s;
        for (int l = 0; l < 3; ++l) s.S.push_back(gain(rng));
        s.O = exchangeable_O(0.5, 2);
        for (int n = 0; n < 4; ++n) s.H.push_back(harvest(rng));
        q = pol.step(q, s).next;
    }
    CHECK(pol.report().total() == 0);
}

TEST_CASE("bad settings are rejected") {
    auto g = NetworkGraph::make(1, {true}, {{0, 1}});
    PolicyOptions opt;
    opt.V = 0.0;
    CHECK_THROWS(Policy(g, one_sensor_params(), {CostFunction::linear()}, opt));
    opt.V = 1.0;
    opt.side_info = true;
    CHECK_THROWS(Policy(g, one_sensor_params(), {CostFunction::linear()}, opt));
    opt.side_info = false;
    CHECK_THROWS(Policy(g, one_sensor_params(), {}, opt));
    auto pol = one_sensor(1.0);
    CHECK_THROWS(pol.initial_state(1.5));
}
