#pragma once

#include <vector>

#include "feederplan/grid.hpp"
#include "feederplan/schedule.hpp"

namespace feederplan {

// Loss-minimization problem on the branch flow model of a radial feeder.
// All quantities per-unit. Injections are net (generation minus load), so a
// pure load bus carries a negative injection.
struct OpfProblem {
    const FeederNetwork* net = nullptr;
    std::vector<double> injection_p; // by bus index
    std::vector<double> injection_q;
    double v0_sq = 1.0; // fixed squared root voltage

    void validate() const;
};

struct BranchFlow {
    int branch_index = -1; // into net->branches()
    int from_bus = -1;     // bus id, parent end
    int to_bus = -1;       // bus id, child end
    int from_index = -1;   // bus indices, for v_sq lookup
    int to_index = -1;
    double P = 0.0;        // sending-end active flow
    double Q = 0.0;        // sending-end reactive flow
    double l = 0.0;        // squared current
    double loss = 0.0;     // r * l
};

struct OpfSolution {
    std::vector<BranchFlow> flows;  // energized branches, canonical (file) order
    std::vector<double> v_sq;       // by bus index
    double objective = 0.0;         // sum r*l
    bool converged = false;
    bool tight = false;             // relaxation exactness certificate
    int iterations = 0;

    double recompute_objective(const FeederNetwork& net) const;
    // Active power entering the tree at the root (sum of root child flows).
    double root_import(const FeederNetwork& net) const;
};

// Net injections for one scheduled hour: bus loads scaled so their total
// matches the hour's demand, fixed capacitor compensation, and the hour's PV
// dispatch split over `pv_bus_ids` in proportion to installed capacity.
OpfProblem build_problem(const FeederNetwork& net, const DayAheadSchedule& schedule,
                         const DemandSeries& demand, const std::vector<int>& pv_bus_ids,
                         int hour, double v0_sq = 1.0);

// Injections straight from the feeder file (scale 1, no PV dispatch).
OpfProblem build_problem_static(const FeederNetwork& net, double v0_sq = 1.0);

struct DistflowResiduals {
    double max_p_balance = 0.0; // max |power balance violation| over buses
    double max_q_balance = 0.0;
    double max_voltage = 0.0;   // max |voltage drop equation violation|
    double min_soc_slack = 0.0; // min over branches of v*l - P^2 - Q^2
    double max_violation() const;
};

// Residuals of the DistFlow recursion at a candidate solution:
//   balance:  P_ij - r*l_ij + p_j = sum over children k of P_jk
//   voltage:  v_j = v_i - 2(r*P + x*Q) + (r^2 + x^2)*l
//   cone:     P^2 + Q^2 <= v_i * l
DistflowResiduals distflow_residuals(const OpfProblem& prob, const OpfSolution& sol);

// Max over branches of v_i*l - P^2 - Q^2 (nonnegative when the cone holds);
// near zero certifies the relaxation is exact.
double exactness_gap(const OpfSolution& sol);

// Same gap normalized by v_i*l per branch (0 where v*l is 0).
double relative_exactness_gap(const OpfSolution& sol);

// Solution export: a `branch,from,to,P,Q,l,loss` table followed by a
// `bus,v_sq` table. bus_ids maps bus index -> external id.
std::string solution_csv(const OpfSolution& sol, const std::vector<int>& bus_ids);

} // namespace feederplan
