#include "feederplan/socp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "feederplan/errors.hpp"
#include "feederplan/textio.hpp"

namespace feederplan {

void OpfProblem::validate() const {
    if (!net) throw InputError("problem has no network");
    if (!net->has_adjacency())
        throw InputError("problem network must be validated and radial");
    const size_t n = net->buses().size();
    if (injection_p.size() != n || injection_q.size() != n)
        throw InputError("injection vectors must have one entry per bus");
    const Bus& root = net->buses()[net->root_index()];
    if (v0_sq < root.v_min_sq() - 1e-12 || v0_sq > root.v_max_sq() + 1e-12)
        throw ValidationError("root voltage setpoint outside the root bus limits");
}

double OpfSolution::recompute_objective(const FeederNetwork& net) const {
    double f = 0.0;
    for (const BranchFlow& bf : flows) f += net.branches()[bf.branch_index].r * bf.l;
    return f;
}

double OpfSolution::root_import(const FeederNetwork& net) const {
    const int root = net.root_index();
    double p = 0.0;
    for (const BranchFlow& bf : flows)
        if (bf.from_index == root) p += bf.P;
    return p;
}

OpfProblem build_problem(const FeederNetwork& net, const DayAheadSchedule& schedule,
                         const DemandSeries& demand, const std::vector<int>& pv_bus_ids,
                         int hour, double v0_sq) {
    if (hour < 0 || hour >= schedule.nt())
        throw InputError("hour " + std::to_string(hour) + " outside schedule horizon");
    if (demand.nt() != schedule.nt())
        throw InputError("schedule and demand must share the horizon");

    // Hourly shape factor: scale the file's reference loads so the feeder
    // total matches this hour's demand.
    const auto [total_p, total_q] = aggregate_demand(net, hour, schedule.nt());
    (void)total_q;
    const double demand_kw = demand.g_dl[hour]; // kWh over one hour
    if (total_p <= 0.0 && demand_kw > 0.0)
        throw ConfigError("feeder has zero reference load but the demand series is nonzero");
    const double scale = (total_p > 0.0) ? demand_kw / total_p : 0.0;

    // PV dispatch split in proportion to installed capacity.
    double pv_cap_total = 0.0;
    std::vector<int> pv_idx;
    pv_idx.reserve(pv_bus_ids.size());
    for (int id : pv_bus_ids) {
        const int idx = net.index_of(id);
        const Bus& b = net.buses()[idx];
        if (b.pv_capacity <= 0.0)
            throw ConfigError("PV assigned to bus " + std::to_string(id) +
                              " which has pv capacity 0");
        pv_idx.push_back(idx);
        pv_cap_total += b.pv_capacity;
    }
    const double pv_kw = schedule.g_pv[hour];
    if (pv_kw > 0.0 && pv_cap_total <= 0.0)
        throw ConfigError("schedule dispatches PV but no PV buses are configured");

    OpfProblem prob;
    prob.net = &net;
    prob.v0_sq = v0_sq;
    const double s_base = net.s_base_kw();
    prob.injection_p.assign(net.buses().size(), 0.0);
    prob.injection_q.assign(net.buses().size(), 0.0);
    for (int i : net.topo_order()) {
        const Bus& b = net.buses()[i];
        prob.injection_p[i] = -scale * b.demand_p / s_base;
        // Capacitors are fixed compensation; they do not follow the load shape.
        prob.injection_q[i] = (-scale * b.demand_q + b.cap_q) / s_base;
    }
    for (int idx : pv_idx) {
        const double share = net.buses()[idx].pv_capacity / pv_cap_total;
        prob.injection_p[idx] += pv_kw * share / s_base; // unity power factor
    }
    prob.validate();
    return prob;
}

OpfProblem build_problem_static(const FeederNetwork& net, double v0_sq) {
    OpfProblem prob;
    prob.net = &net;
    prob.v0_sq = v0_sq;
    const double s_base = net.s_base_kw();
    prob.injection_p.assign(net.buses().size(), 0.0);
    prob.injection_q.assign(net.buses().size(), 0.0);
    for (size_t i = 0; i < net.buses().size(); ++i) {
        const Bus& b = net.buses()[i];
        prob.injection_p[i] = -b.demand_p / s_base;
        prob.injection_q[i] = (-b.demand_q + b.cap_q) / s_base;
    }
    prob.validate();
    return prob;
}

double DistflowResiduals::max_violation() const {
    const double soc_violation = std::max(0.0, -min_soc_slack);
    return std::max({max_p_balance, max_q_balance, max_voltage, soc_violation});
}

DistflowResiduals distflow_residuals(const OpfProblem& prob, const OpfSolution& sol) {
    prob.validate();
    const FeederNetwork& net = *prob.net;
    if (sol.v_sq.size() != net.buses().size())
        throw InputError("solution voltage vector does not match the network");
    if (sol.flows.size() != net.energized_branches().size())
        throw InputError("solution flow vector does not match the energized branches");

    // Flows keyed by child bus (every energized non-root bus has exactly one).
    std::vector<const BranchFlow*> inflow(net.buses().size(), nullptr);
    for (const BranchFlow& bf : sol.flows) {
        if (bf.to_index < 0 || bf.to_index >= static_cast<int>(net.buses().size()))
            throw InputError("flow record with bad child index");
        inflow[bf.to_index] = &bf;
    }

    DistflowResiduals res;
    res.min_soc_slack = std::numeric_limits<double>::infinity();
    for (int i : net.topo_order()) {
        double child_p = 0.0, child_q = 0.0;
        for (int c : net.children_of(i)) {
            if (!inflow[c]) throw InputError("missing flow for branch into bus " +
                                             std::to_string(net.buses()[c].id));
            child_p += inflow[c]->P;
            child_q += inflow[c]->Q;
        }
        if (i == net.root_index()) continue; // root import is the slack
        const BranchFlow& up = *inflow[i];
        const Branch& br = net.branches()[up.branch_index];
        const double arrive_p = up.P - br.r * up.l;
        const double arrive_q = up.Q - br.x * up.l;
        res.max_p_balance = std::max(res.max_p_balance,
                                     std::abs(arrive_p + prob.injection_p[i] - child_p));
        res.max_q_balance = std::max(res.max_q_balance,
                                     std::abs(arrive_q + prob.injection_q[i] - child_q));
        const double v_from = sol.v_sq[up.from_index];
        const double v_to = sol.v_sq[up.to_index];
        const double drop = v_from - 2.0 * (br.r * up.P + br.x * up.Q) +
                            (br.r * br.r + br.x * br.x) * up.l;
        res.max_voltage = std::max(res.max_voltage, std::abs(v_to - drop));
        res.min_soc_slack = std::min(res.min_soc_slack,
                                     v_from * up.l - up.P * up.P - up.Q * up.Q);
    }
    if (!std::isfinite(res.min_soc_slack)) res.min_soc_slack = 0.0; // no branches
    return res;
}

double exactness_gap(const OpfSolution& sol) {
    double gap = 0.0;
    for (const BranchFlow& bf : sol.flows) {
        const double v = sol.v_sq[bf.from_index];
        gap = std::max(gap, v * bf.l - bf.P * bf.P - bf.Q * bf.Q);
    }
    return gap;
}

double relative_exactness_gap(const OpfSolution& sol) {
    double rel = 0.0;
    for (const BranchFlow& bf : sol.flows) {
        const double vl = sol.v_sq[bf.from_index] * bf.l;
        const double gap = vl - bf.P * bf.P - bf.Q * bf.Q;
        if (vl > 0.0)
            rel = std::max(rel, gap / vl);
        // vl == 0 with zero flows contributes no gap
    }
    return rel;
}

std::string solution_csv(const OpfSolution& sol, const std::vector<int>& bus_ids) {
    std::string out = "branch,from,to,P,Q,l,loss\n";
    for (const BranchFlow& bf : sol.flows) {
        out += std::to_string(bf.branch_index) + ',' + std::to_string(bf.from_bus) + ',' +
               std::to_string(bf.to_bus) + ',' + fmt_double(bf.P) + ',' + fmt_double(bf.Q) + ',' +
               fmt_double(bf.l) + ',' + fmt_double(bf.loss) + "\n";
    }
    out += "\nbus,v_sq\n";
    for (size_t i = 0; i < sol.v_sq.size(); ++i)
        out += std::to_string(bus_ids[i]) + ',' + fmt_double(sol.v_sq[i]) + "\n";
    return out;
}

} // namespace feederplan
