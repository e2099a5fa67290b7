#pragma once

#include <vector>

#include "feederplan/socp.hpp"

namespace feederplan {

struct AdmmConfig {
    double rho = 1.0;            // penalty parameter
    double eps_primal = 5e-4;    // max-norm threshold on x - z
    double eps_dual = 5e-4;      // max-norm threshold on rho * (z_k - z_{k-1})
    int max_iter = 200;
    double over_relaxation = 1.5; // in [1, 1.8]
    bool adapt_rho = false;       // residual balancing (x2 / /2); off keeps rho fixed
    double tightness_rel_tol = 1e-4;

    void validate() const;
};

struct ResidualTrace {
    struct Row {
        int iter = 0;
        double primal = 0.0;
        double dual = 0.0;
        double objective = 0.0;
    };
    std::vector<Row> rows;
};

struct SolveResult {
    OpfSolution solution;
    ResidualTrace trace;
};

// Trace export: `iter,primal_residual,dual_residual,objective` rows.
std::string trace_csv(const ResidualTrace& trace);

namespace admm_detail {

// One bus agent's subproblem. The agent owns its voltage and the (P, Q, l)
// of branches to its children, and holds consensus copies of the parent
// voltage and the full parent branch. Block layout:
//   [0] v_self, [1] v_parent copy, [2..4] parent-branch (P, Q, l) copies,
//   then (P, Q, l) per child branch (owned; constrained only at the child
//   end, so here they are free prox coordinates carrying the loss cost).
// The root block is [v_0, (P, Q, l) per root branch].
//
//   min  cost . w + (rho/2) |w - a|^2
//   s.t. E w = b                        (balance and voltage-drop rows)
//        P^2 + Q^2 <= v_parent * l      (cone on the parent branch)
//        box constraints on v_self and l
// Solved exactly: active-set enumeration over the boxes; for each candidate
// set, the cone multiplier is located by safeguarded scalar root-finding on
// the complementarity function, each evaluation being one dense KKT solve.
struct LocalBlock {
    int n = 0;
    int iv_self = -1, iv_parent = -1, ip = -1, iq = -1, il = -1;
    int n_children = 0;
    bool is_root = false;
    double v0_sq = 1.0;
    double r = 0.0, x = 0.0;
    double l_max = 0.0;
    double v_lo = 0.0, v_hi = 0.0;  // squared bounds on v_self
    double d_p = 0.0, d_q = 0.0;    // net demand (negative injection)
    double cost_l = 0.0;     // objective weight on the parent-branch l copy
    double v_weight = 1.0;   // prox-metric weight on the voltage slots
    std::vector<int> coords; // local index -> global coordinate

    // Solves the block; a and w_out have length n. Throws
    // InfeasibleAgentError when the constraint set is empty.
    void solve(const double* a, double rho, double* w_out) const;
};

// Exposed for the unit tests (consensus/dual steps are trivial but their
// behavior is part of the contract).
void consensus_average(const std::vector<std::vector<double>>& x,
                       const std::vector<std::vector<double>>& u,
                       const std::vector<std::vector<std::pair<int, int>>>& copies,
                       std::vector<double>& z);

// Scaled-dual ascent: u_a[s] += x_a[s] - z[coord(a, s)].
void dual_ascend(const std::vector<std::vector<double>>& x, const std::vector<double>& z,
                 const std::vector<std::vector<std::pair<int, int>>>& copies,
                 std::vector<std::vector<double>>& u);

} // namespace admm_detail

// Distributed solve of the SOCP-relaxed loss minimization. Agents (one per
// energized bus) run local prox-minimizations; duplicated quantities are
// reconciled by consensus averaging; scaled duals ascend on x - z. Runs
// until both residual max-norms clear their thresholds or max_iter.
SolveResult solve(const OpfProblem& prob, const AdmmConfig& cfg);

} // namespace feederplan
