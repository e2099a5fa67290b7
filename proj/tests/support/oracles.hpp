#pragma once

// Independent reference computations for the test suites. Nothing here may
// call into the solver paths it is used to check: the power-flow oracles work
// by scalar bisection / fixed-point sweeps on the DistFlow equations, and the
// local-block oracle is a brute-force grid minimizer.

#include <vector>

#include "feederplan/admm.hpp"
#include "feederplan/socp.hpp"

namespace feederplan::oracle {

// Exact 2-bus DistFlow solution: load (p, q) behind one branch. Bisection on
// the smaller root of (p + r*l)^2 + (q + x*l)^2 = v0 * l.
struct TwoBusSolution {
    double P = 0.0, Q = 0.0, l = 0.0;
    double v_child = 0.0;
    double loss = 0.0;
};
TwoBusSolution two_bus_bisection(double v0_sq, double r, double x, double p_load, double q_load);

// Radial power flow by backward/forward sweeps with per-branch current
// updates; fixed point of the DistFlow recursion with the cone tight.
// Independent of the ADMM engine.
struct SweepResult {
    OpfSolution solution;
    bool converged = false;
    int sweeps = 0;
};
SweepResult radial_pf_sweep(const OpfProblem& prob, int max_sweeps = 500, double tol = 1e-13);

// Brute-force minimizer of a leaf bus block's augmented local objective over
// its two free coordinates (parent voltage and current), with the equality
// rows eliminated analytically and all constraints checked pointwise.
struct GridMinResult {
    std::vector<double> w; // [v_self, v_parent, P, Q, l]
    double objective = 0.0;
    bool found = false;
};
GridMinResult leaf_block_grid_min(const admm_detail::LocalBlock& blk, const double* a, double rho);

// Augmented local objective value for any block solution (used to compare
// the engine's exact solve against the grid oracle).
double block_objective(const admm_detail::LocalBlock& blk, const double* a, double rho,
                       const std::vector<double>& w);

} // namespace feederplan::oracle
