#include "doctest.h"

#include <cmath>

#include "feederplan/errors.hpp"
#include "feederplan/socp.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace feederplan;
using feederplan::testing::data_path;
using feederplan::testing::two_bus_net;

namespace {

// Manual OpfSolution for the 2-bus fixture.
OpfSolution two_bus_solution(const FeederNetwork& net, double P, double Q, double l,
                             double v0, double v1) {
    OpfSolution sol;
    sol.v_sq = {v0, v1};
    BranchFlow bf;
    bf.branch_index = 0;
    bf.from_bus = 0;
    bf.to_bus = 1;
    bf.from_index = net.index_of(0);
    bf.to_index = net.index_of(1);
    bf.P = P;
    bf.Q = Q;
    bf.l = l;
    bf.loss = net.branches()[0].r * l;
    sol.flows = {bf};
    sol.objective = bf.loss;
    return sol;
}

} // namespace

TEST_CASE("build_problem: injections and sign conventions") {
    SUBCASE("zero loads and PV give zero injections") {
        std::vector<Bus> buses{{0, 0, 0, 0.9, 1.1, 0, 0, true}, {1, 0, 0, 0.9, 1.1, 0, 0, false}};
        std::vector<Branch> branches{{0, 1, 0.01, 0.02, 5.0, false, true}};
        const FeederNetwork net = FeederNetwork::build(1.0, 4.16, buses, branches);
        const OpfProblem prob = build_problem_static(net);
        CHECK(prob.injection_p[0] == 0.0);
        CHECK(prob.injection_p[1] == 0.0);
        CHECK(prob.injection_q[1] == 0.0);
    }
    SUBCASE("load becomes a negative injection") {
        const FeederNetwork net = two_bus_net(500.0, 200.0); // 1 MVA base
        const OpfProblem prob = build_problem_static(net);
        CHECK(prob.injection_p[net.index_of(1)] == doctest::Approx(-0.5).epsilon(1e-12));
        CHECK(prob.injection_q[net.index_of(1)] == doctest::Approx(-0.2).epsilon(1e-12));
    }
    SUBCASE("123-bus: exactly the ten configured buses carry generation") {
        const FeederNetwork net = parse_feeder_file(data_path("ieee123.feeder"));
        DayAheadSchedule s;
        s.g_da = {1000.0};
        s.g_pv = {400.0};
        s.lambda = {0};
        s.expected_rt = {0.0};
        s.clamped = {false};
        DemandSeries d{{2000.0}, {400.0}};
        const std::vector<int> pv_buses{7, 23, 29, 35, 47, 49, 65, 76, 83, 99};
        const OpfProblem prob = build_problem(net, s, d, pv_buses, 0);
        int with_gen = 0;
        for (int i = 0; i < net.bus_count(); ++i) {
            const double load_part = -2000.0 / 3725.0 * net.buses()[i].demand_p / net.s_base_kw();
            if (prob.injection_p[i] - load_part > 1e-12) ++with_gen;
        }
        CHECK(with_gen == 10);
        // PV on a zero-capacity bus is a configuration error
        CHECK_THROWS_AS(build_problem(net, s, d, std::vector<int>{1}, 0), ConfigError);
    }
    SUBCASE("load scaling matches the demand series") {
        const FeederNetwork net = two_bus_net(500.0, 200.0);
        DayAheadSchedule s;
        s.g_da = {250.0};
        s.g_pv = {0.0};
        s.lambda = {0};
        s.expected_rt = {0};
        s.clamped = {false};
        DemandSeries d{{250.0}, {0.0}};
        const OpfProblem prob = build_problem(net, s, d, {}, 0);
        // total load 500 kW scaled to 250 kW on a 1 MVA base
        CHECK(prob.injection_p[net.index_of(1)] == doctest::Approx(-0.25).epsilon(1e-12));
    }
    SUBCASE("root voltage outside the root box is rejected") {
        const FeederNetwork net = two_bus_net();
        CHECK_THROWS_AS(build_problem_static(net, 1.5), ValidationError);
    }
}

TEST_CASE("distflow_residuals") {
    const FeederNetwork net = two_bus_net(500.0, 200.0, 0.01, 0.02);

    SUBCASE("all-zero network and solution have zero residuals") {
        std::vector<Bus> buses{{0, 0, 0, 0.9, 1.1, 0, 0, true}, {1, 0, 0, 0.9, 1.1, 0, 0, false}};
        std::vector<Branch> branches{{0, 1, 0.01, 0.02, 5.0, false, true}};
        const FeederNetwork zero_net = FeederNetwork::build(1.0, 4.16, buses, branches);
        const OpfProblem prob = build_problem_static(zero_net);
        const OpfSolution sol = two_bus_solution(zero_net, 0, 0, 0, 1.0, 1.0);
        const DistflowResiduals res = distflow_residuals(prob, sol);
        CHECK(res.max_p_balance == 0.0);
        CHECK(res.max_q_balance == 0.0);
        CHECK(res.max_voltage == 0.0);
        CHECK(res.max_violation() == 0.0);
    }

    SUBCASE("bisection oracle point has residuals below 1e-10") {
        const OpfProblem prob = build_problem_static(net);
        const auto o = oracle::two_bus_bisection(1.0, 0.01, 0.02, 0.5, 0.2);
        const OpfSolution sol = two_bus_solution(net, o.P, o.Q, o.l, 1.0, o.v_child);
        const DistflowResiduals res = distflow_residuals(prob, sol);
        CHECK(res.max_violation() < 1e-10);
        CHECK(res.min_soc_slack == doctest::Approx(0.0).epsilon(1e-10));
    }

    SUBCASE("perturbing l propagates analytically") {
        const OpfProblem prob = build_problem_static(net);
        const auto o = oracle::two_bus_bisection(1.0, 0.01, 0.02, 0.5, 0.2);
        const double dl = 0.01;
        const OpfSolution sol = two_bus_solution(net, o.P, o.Q, o.l + dl, 1.0, o.v_child);
        const DistflowResiduals res = distflow_residuals(prob, sol);
        // balance picks up r*dl / x*dl, voltage equation (r^2+x^2)*dl
        CHECK(res.max_p_balance == doctest::Approx(0.01 * dl).epsilon(1e-9));
        CHECK(res.max_q_balance == doctest::Approx(0.02 * dl).epsilon(1e-9));
        CHECK(res.max_voltage == doctest::Approx((0.01 * 0.01 + 0.02 * 0.02) * dl).epsilon(1e-9));
        // SOC slack gains v0 * dl
        CHECK(res.min_soc_slack == doctest::Approx(1.0 * dl).epsilon(1e-9));
    }

    SUBCASE("dimension mismatch is an input error") {
        const OpfProblem prob = build_problem_static(net);
        OpfSolution sol = two_bus_solution(net, 0, 0, 0, 1.0, 1.0);
        sol.v_sq.pop_back();
        CHECK_THROWS_AS(distflow_residuals(prob, sol), InputError);
    }
}

TEST_CASE("exactness_gap") {
    const FeederNetwork net = two_bus_net(500.0, 200.0, 0.01, 0.02);
    const auto o = oracle::two_bus_bisection(1.0, 0.01, 0.02, 0.5, 0.2);

    SUBCASE("oracle point is tight") {
        const OpfSolution sol = two_bus_solution(net, o.P, o.Q, o.l, 1.0, o.v_child);
        CHECK(exactness_gap(sol) < 1e-8);
        CHECK(relative_exactness_gap(sol) < 1e-8);
    }
    SUBCASE("inflating l by 10% opens the expected gap") {
        const OpfSolution sol = two_bus_solution(net, o.P, o.Q, 1.1 * o.l, 1.0, o.v_child);
        CHECK(exactness_gap(sol) == doctest::Approx(0.1 * 1.0 * o.l).epsilon(1e-6));
    }
    SUBCASE("zero solution has zero gap") {
        const OpfSolution sol = two_bus_solution(net, 0, 0, 0, 1.0, 1.0);
        CHECK(exactness_gap(sol) == 0.0);
        CHECK(relative_exactness_gap(sol) == 0.0);
    }
}

TEST_CASE("solution CSV export carries both tables") {
    const FeederNetwork net = two_bus_net();
    const OpfSolution sol = two_bus_solution(net, 0.5, 0.2, 0.29, 1.0, 0.98);
    const std::string csv = solution_csv(sol, {0, 1});
    CHECK(csv.find("branch,from,to,P,Q,l,loss") != std::string::npos);
    CHECK(csv.find("bus,v_sq") != std::string::npos);
    CHECK(csv.find("0,0,1,") != std::string::npos);
}
