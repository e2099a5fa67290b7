#include "doctest.h"

#include <cmath>
#include <vector>

#include "feederplan/admm.hpp"
#include "feederplan/errors.hpp"
#include "feederplan/rng.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace feederplan;
using admm_detail::LocalBlock;
using feederplan::testing::data_path;
using feederplan::testing::three_bus_chain;
using feederplan::testing::two_bus_net;

namespace {

LocalBlock leaf_block(double r, double x, double d_p, double d_q, double l_max = 5.0,
                      double v_lo = 0.81, double v_hi = 1.21) {
    LocalBlock blk;
    blk.n = 5;
    blk.iv_self = 0;
    blk.iv_parent = 1;
    blk.ip = 2;
    blk.iq = 3;
    blk.il = 4;
    blk.n_children = 0;
    blk.r = r;
    blk.x = x;
    blk.l_max = l_max;
    blk.v_lo = v_lo;
    blk.v_hi = v_hi;
    blk.d_p = d_p;
    blk.d_q = d_q;
    blk.cost_l = r;
    return blk;
}

AdmmConfig tight_cfg(double eps = 1e-9, int max_iter = 20000) {
    AdmmConfig cfg;
    cfg.eps_primal = eps;
    cfg.eps_dual = eps;
    cfg.max_iter = max_iter;
    return cfg;
}

} // namespace

TEST_CASE("local_update: fixed point when the target is feasible and loss-free") {
    // r = 0 removes the objective term; a target satisfying all constraints
    // must come back unchanged (pure projection of an interior point).
    LocalBlock blk = leaf_block(0.0, 0.02, 0.3, 0.1);
    blk.cost_l = 0.0;
    const double l = 0.15;
    const double P = blk.d_p;                   // r = 0: P = d_p
    const double Q = blk.d_q + blk.x * l;
    const double v_p = 1.0;
    const double v_s = v_p - 2.0 * (blk.r * P + blk.x * Q) + (blk.x * blk.x) * l;
    REQUIRE(P * P + Q * Q < v_p * l); // strictly inside the cone
    const std::vector<double> a{v_s, v_p, P, Q, l};
    std::vector<double> w(5);
    blk.solve(a.data(), 1.0, w.data());
    for (int i = 0; i < 5; ++i) CHECK(w[i] == doctest::Approx(a[i]).epsilon(1e-12));
}

TEST_CASE("local_update: matches the brute-force grid minimizer on random leaf blocks") {
    RandomStream rng(987654321);
    int cone_active_seen = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const double r = rng.uniform(0.002, 0.05);
        const double x = rng.uniform(0.002, 0.05);
        LocalBlock blk = leaf_block(r, x, rng.uniform(-0.4, 0.6), rng.uniform(-0.2, 0.3),
                                    rng.uniform(0.3, 2.0));
        const double rho = rng.uniform(0.5, 2.0);
        std::vector<double> a{rng.uniform(0.85, 1.15), rng.uniform(0.85, 1.15),
                              rng.uniform(-0.5, 0.7), rng.uniform(-0.3, 0.4),
                              rng.uniform(-0.2, 0.5)};
        std::vector<double> w(5);
        blk.solve(a.data(), rho, w.data());

        // feasibility of the engine's answer
        CHECK(std::abs(w[blk.ip] - r * w[blk.il] - blk.d_p) < 1e-9);
        CHECK(std::abs(w[blk.iq] - x * w[blk.il] - blk.d_q) < 1e-9);
        CHECK(std::abs(w[blk.iv_self] - w[blk.iv_parent] + 2 * (r * w[blk.ip] + x * w[blk.iq]) -
                       (r * r + x * x) * w[blk.il]) < 1e-9);
        const double cone = w[blk.ip] * w[blk.ip] + w[blk.iq] * w[blk.iq] -
                            w[blk.iv_parent] * w[blk.il];
        CHECK(cone <= 1e-9);
        if (cone > -1e-7) ++cone_active_seen;
        CHECK(w[blk.iv_self] >= blk.v_lo - 1e-9);
        CHECK(w[blk.iv_self] <= blk.v_hi + 1e-9);
        CHECK(w[blk.il] >= -1e-9);
        CHECK(w[blk.il] <= blk.l_max + 1e-9);

        // optimality against the grid oracle
        const auto grid = oracle::leaf_block_grid_min(blk, a.data(), rho);
        REQUIRE(grid.found);
        const double obj_engine = oracle::block_objective(blk, a.data(), rho, w);
        CHECK(obj_engine <= grid.objective + 1e-8);
        for (int i = 0; i < 5; ++i) CHECK(std::abs(w[i] - grid.w[i]) < 2e-3);
    }
    CHECK(cone_active_seen > 5); // the sweep must actually exercise the cone path
}

TEST_CASE("local_update: empty box intersection throws") {
    LocalBlock blk = leaf_block(0.01, 0.02, 0.1, 0.05);
    blk.v_lo = 1.2;
    blk.v_hi = 0.9;
    const std::vector<double> a{1.0, 1.0, 0.1, 0.05, 0.0};
    std::vector<double> w(5);
    CHECK_THROWS_AS(blk.solve(a.data(), 1.0, w.data()), InfeasibleAgentError);
}

TEST_CASE("consensus_update") {
    // copies: coordinate 0 has two copies, coordinate 1 has one
    std::vector<std::vector<std::pair<int, int>>> copies{{{0, 0}, {1, 0}}, {{1, 1}}};
    std::vector<std::vector<double>> x{{0.9}, {1.1, 2.0}};
    std::vector<std::vector<double>> u{{0.0}, {0.0, 0.25}};
    std::vector<double> z(2);
    admm_detail::consensus_average(x, u, copies, z);
    CHECK(z[0] == doctest::Approx(1.0).epsilon(1e-15));     // average of copies
    CHECK(z[1] == doctest::Approx(2.25).epsilon(1e-15));    // single copy plus dual

    SUBCASE("random copies match a direct re-average") {
        RandomStream rng(13);
        for (int trial = 0; trial < 100; ++trial) {
            const int ncopies = 1 + int(rng.uniform01() * 5);
            std::vector<std::vector<std::pair<int, int>>> cps{{}};
            std::vector<std::vector<double>> xs, us;
            double expect = 0.0;
            for (int i = 0; i < ncopies; ++i) {
                cps[0].push_back({i, 0});
                xs.push_back({rng.uniform(-2, 2)});
                us.push_back({rng.uniform(-1, 1)});
                expect += xs[i][0] + us[i][0];
            }
            expect /= ncopies;
            std::vector<double> zz(1);
            admm_detail::consensus_average(xs, us, cps, zz);
            CHECK(zz[0] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("dual_update") {
    std::vector<std::vector<std::pair<int, int>>> copies{{{0, 0}}, {{0, 1}}};
    std::vector<std::vector<double>> x{{1.0, 2.0}};
    std::vector<double> z{1.0, 1.9};
    std::vector<std::vector<double>> u{{0.5, -0.25}};
    admm_detail::dual_ascend(x, z, copies, u);
    CHECK(u[0][0] == 0.5);                                   // x = z: unchanged
    CHECK(u[0][1] == doctest::Approx(-0.15).epsilon(1e-15)); // += 0.1
}

TEST_CASE("solve: zero-load feeder converges immediately to the zero flow") {
    std::vector<Bus> buses{{0, 0, 0, 0.9, 1.1, 0, 0, true}, {1, 0, 0, 0.9, 1.1, 0, 0, false}};
    std::vector<Branch> branches{{0, 1, 0.01, 0.02, 5.0, false, true}};
    const FeederNetwork net = FeederNetwork::build(1.0, 4.16, buses, branches);
    const OpfProblem prob = build_problem_static(net);
    const SolveResult res = solve(prob, AdmmConfig{});
    CHECK(res.solution.converged);
    CHECK(res.solution.iterations == 1);
    CHECK(res.solution.objective == 0.0);
    for (const BranchFlow& bf : res.solution.flows) {
        CHECK(bf.P == 0.0);
        CHECK(bf.l == 0.0);
    }
}

TEST_CASE("solve: 2-bus objective matches the bisection oracle within 1e-6") {
    const FeederNetwork net = two_bus_net(500.0, 200.0, 0.01, 0.02);
    const OpfProblem prob = build_problem_static(net);
    const SolveResult res = solve(prob, tight_cfg());
    REQUIRE(res.solution.converged);
    const auto o = oracle::two_bus_bisection(1.0, 0.01, 0.02, 0.5, 0.2);
    CHECK(res.solution.objective == doctest::Approx(o.loss).epsilon(1e-6));
    CHECK(std::abs(res.solution.objective - o.loss) < 1e-6);
    CHECK(res.solution.tight);
    CHECK(res.solution.flows[0].l == doctest::Approx(o.l).epsilon(1e-5));
    CHECK(res.solution.v_sq[net.index_of(1)] == doctest::Approx(o.v_child).epsilon(1e-5));
    // assembled solution satisfies the recursion tightly on a tight run
    CHECK(distflow_residuals(prob, res.solution).max_violation() < 1e-6);
    // energy conservation: root import = load + losses
    CHECK(res.solution.root_import(net) ==
          doctest::Approx(0.5 + res.solution.objective).epsilon(1e-6));
}

TEST_CASE("solve: 3-bus chain matches the sweep oracle") {
    const FeederNetwork net = three_bus_chain();
    const OpfProblem prob = build_problem_static(net);
    const SolveResult res = solve(prob, tight_cfg());
    REQUIRE(res.solution.converged);
    const auto o = oracle::radial_pf_sweep(prob);
    REQUIRE(o.converged);
    CHECK(std::abs(res.solution.objective - o.solution.objective) < 1e-6);
    CHECK(res.solution.tight);
    CHECK(distflow_residuals(prob, res.solution).max_violation() < 1e-6);
    for (size_t k = 0; k < res.solution.flows.size(); ++k) {
        CHECK(res.solution.flows[k].P ==
              doctest::Approx(o.solution.flows[k].P).epsilon(1e-5));
        CHECK(res.solution.flows[k].l ==
              doctest::Approx(o.solution.flows[k].l).epsilon(1e-4));
    }
    const double total_load = (300.0 + 200.0) / 1000.0;
    CHECK(res.solution.root_import(net) ==
          doctest::Approx(total_load + res.solution.objective).epsilon(1e-6));
}

TEST_CASE("solve: deterministic traces") {
    const FeederNetwork net = three_bus_chain();
    const OpfProblem prob = build_problem_static(net);
    AdmmConfig cfg;
    cfg.max_iter = 60;
    cfg.eps_primal = cfg.eps_dual = 1e-7;
    const SolveResult a = solve(prob, cfg);
    const SolveResult b = solve(prob, cfg);
    REQUIRE(a.trace.rows.size() == b.trace.rows.size());
    for (size_t i = 0; i < a.trace.rows.size(); ++i) {
        CHECK(a.trace.rows[i].primal == b.trace.rows[i].primal);
        CHECK(a.trace.rows[i].dual == b.trace.rows[i].dual);
        CHECK(a.trace.rows[i].objective == b.trace.rows[i].objective);
    }
}

TEST_CASE("solve: 123-bus reference load converges within the paper envelope") {
    const FeederNetwork net = parse_feeder_file(data_path("ieee123.feeder"));
    const OpfProblem prob = build_problem_static(net);
    const SolveResult res = solve(prob, AdmmConfig{});
    REQUIRE(res.solution.converged);
    CHECK(res.solution.iterations <= 30);
    const auto& last = res.trace.rows.back();
    CHECK(last.primal < 5e-4);
    CHECK(last.dual < 5e-4);
    CHECK(res.solution.tight);
    CHECK(relative_exactness_gap(res.solution) <= 1e-4);
    CHECK(distflow_residuals(prob, res.solution).max_violation() <= 1e-3);

    // objective agrees with the independent sweep oracle at residual scale
    const auto o = oracle::radial_pf_sweep(prob);
    REQUIRE(o.converged);
    CHECK(res.solution.objective == doctest::Approx(o.solution.objective).epsilon(5e-2));

    // soft monotone trend: flag (do not fail) if a 10-iteration window rises
    int flagged = 0;
    const auto& rows = res.trace.rows;
    for (size_t i = 10; i < rows.size(); ++i) {
        const double now = std::max(rows[i].primal, rows[i].dual);
        const double before = std::max(rows[i - 10].primal, rows[i - 10].dual);
        if (now > before) ++flagged;
    }
    if (flagged > 0)
        MESSAGE("residual trend flagged for inspection in ", flagged, " windows");

    // determinism on the big case too
    const SolveResult again = solve(prob, AdmmConfig{});
    CHECK(again.trace.rows.back().primal == last.primal);
    CHECK(again.solution.objective == res.solution.objective);
}

TEST_CASE("solve: non-convergence is reported, not thrown") {
    const FeederNetwork net = three_bus_chain();
    const OpfProblem prob = build_problem_static(net);
    AdmmConfig cfg;
    cfg.max_iter = 2;
    cfg.eps_primal = cfg.eps_dual = 1e-12;
    const SolveResult res = solve(prob, cfg);
    CHECK_FALSE(res.solution.converged);
    CHECK_FALSE(res.solution.tight);
    CHECK(res.solution.iterations == 2);
    CHECK(res.trace.rows.size() == 2);
}

TEST_CASE("config validation") {
    AdmmConfig cfg;
    cfg.rho = -1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = AdmmConfig{};
    cfg.over_relaxation = 2.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = AdmmConfig{};
    CHECK_NOTHROW(cfg.validate());
}
