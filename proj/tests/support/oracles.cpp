#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace feederplan::oracle {

TwoBusSolution two_bus_bisection(double v0_sq, double r, double x, double p_load, double q_load) {
    auto g = [&](double l) {
        const double P = p_load + r * l;
        const double Q = q_load + x * l;
        return P * P + Q * Q - v0_sq * l;
    };
    double lo = 0.0;
    double hi = (p_load * p_load + q_load * q_load) / v0_sq;
    if (hi == 0.0) {
        TwoBusSolution s;
        s.v_child = v0_sq;
        return s;
    }
    int guard = 0;
    while (g(hi) > 0.0) {
        hi *= 1.5;
        if (++guard > 200) throw std::runtime_error("two_bus_bisection: no physical solution");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) > 0.0 ? lo : hi) = mid;
    }
    TwoBusSolution s;
    s.l = 0.5 * (lo + hi);
    s.P = p_load + r * s.l;
    s.Q = q_load + x * s.l;
    s.v_child = v0_sq - 2.0 * (r * s.P + x * s.Q) + (r * r + x * x) * s.l;
    s.loss = r * s.l;
    return s;
}

SweepResult radial_pf_sweep(const OpfProblem& prob, int max_sweeps, double tol) {
    const FeederNetwork& net = *prob.net;
    const int n = net.bus_count();
    const auto& ebr = net.energized_branches();
    std::vector<int> pos(net.branches().size(), -1);
    std::vector<int> child_of(ebr.size(), -1);
    for (size_t k = 0; k < ebr.size(); ++k) pos[ebr[k]] = static_cast<int>(k);
    for (int i = 0; i < n; ++i)
        if (net.parent_branch_of(i) >= 0) child_of[pos[net.parent_branch_of(i)]] = i;

    std::vector<double> l(ebr.size(), 0.0), P(ebr.size(), 0.0), Q(ebr.size(), 0.0);
    std::vector<double> v(n, prob.v0_sq);
    const auto& order = net.topo_order();

    bool converged = false;
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        // Backward: sending-end flows including downstream losses.
        std::vector<double> need_p(n), need_q(n);
        for (int i = 0; i < n; ++i) {
            need_p[i] = -prob.injection_p[i];
            need_q[i] = -prob.injection_q[i];
        }
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const int i = *it;
            if (i == net.root_index()) continue;
            const int k = pos[net.parent_branch_of(i)];
            const Branch& br = net.branches()[ebr[k]];
            P[k] = need_p[i] + br.r * l[k];
            Q[k] = need_q[i] + br.x * l[k];
            need_p[net.parent_of(i)] += P[k];
            need_q[net.parent_of(i)] += Q[k];
        }
        // Forward: voltages from the root.
        for (int i : order) {
            if (i == net.root_index()) {
                v[i] = prob.v0_sq;
                continue;
            }
            const int k = pos[net.parent_branch_of(i)];
            const Branch& br = net.branches()[ebr[k]];
            v[i] = v[net.parent_of(i)] - 2.0 * (br.r * P[k] + br.x * Q[k]) +
                   (br.r * br.r + br.x * br.x) * l[k];
        }
        // Current update; fixed point when the cone is tight everywhere.
        double delta = 0.0;
        for (size_t k = 0; k < ebr.size(); ++k) {
            const int child = child_of[k];
            const double v_from = v[net.parent_of(child)];
            const double l_new = (P[k] * P[k] + Q[k] * Q[k]) / v_from;
            delta = std::max(delta, std::abs(l_new - l[k]));
            l[k] = l_new;
        }
        if (delta < tol) {
            converged = true;
            break;
        }
    }

    SweepResult res;
    res.converged = converged;
    res.sweeps = sweep + 1;
    res.solution.v_sq = v;
    res.solution.flows.resize(ebr.size());
    for (size_t k = 0; k < ebr.size(); ++k) {
        BranchFlow bf;
        bf.branch_index = ebr[k];
        bf.to_index = child_of[k];
        bf.from_index = net.parent_of(bf.to_index);
        bf.from_bus = net.buses()[bf.from_index].id;
        bf.to_bus = net.buses()[bf.to_index].id;
        bf.P = P[k];
        bf.Q = Q[k];
        bf.l = l[k];
        bf.loss = net.branches()[ebr[k]].r * l[k];
        res.solution.flows[k] = bf;
    }
    res.solution.objective = res.solution.recompute_objective(net);
    res.solution.converged = converged;
    return res;
}

double block_objective(const admm_detail::LocalBlock& blk, const double* a, double rho,
                       const std::vector<double>& w) {
    double obj = blk.cost_l * w[blk.il];
    for (int i = 0; i < blk.n; ++i) obj += 0.5 * rho * (w[i] - a[i]) * (w[i] - a[i]);
    return obj;
}

GridMinResult leaf_block_grid_min(const admm_detail::LocalBlock& blk, const double* a, double rho) {
    if (blk.n_children != 0 || blk.is_root)
        throw std::runtime_error("grid oracle only handles leaf blocks");

    const double r = blk.r, x = blk.x;
    auto expand = [&](double v_p, double l) {
        std::vector<double> w(5);
        w[blk.iv_parent] = v_p;
        w[blk.il] = l;
        w[blk.ip] = blk.d_p + r * l;
        w[blk.iq] = blk.d_q + x * l;
        w[blk.iv_self] = v_p - 2.0 * (r * w[blk.ip] + x * w[blk.iq]) + (r * r + x * x) * l;
        return w;
    };
    auto feasible = [&](const std::vector<double>& w, double tol) {
        if (w[blk.iv_self] < blk.v_lo - tol || w[blk.iv_self] > blk.v_hi + tol) return false;
        if (w[blk.il] < -tol || w[blk.il] > blk.l_max + tol) return false;
        const double cone = w[blk.ip] * w[blk.ip] + w[blk.iq] * w[blk.iq] -
                            w[blk.iv_parent] * w[blk.il];
        return cone <= tol;
    };

    // Window around the prox target, shrunk through refinement passes.
    double vp_lo = a[blk.iv_parent] - 1.0, vp_hi = a[blk.iv_parent] + 1.0;
    double l_lo = 0.0, l_hi = std::min(blk.l_max, std::abs(a[blk.il]) + 1.0);
    if (l_hi <= l_lo) l_hi = blk.l_max;

    GridMinResult best;
    best.objective = 1e300;
    constexpr int kGrid = 160;
    for (int pass = 0; pass < 5; ++pass) {
        double best_vp = 0.0, best_l = 0.0;
        bool found = false;
        for (int i = 0; i <= kGrid; ++i) {
            const double v_p = vp_lo + (vp_hi - vp_lo) * i / kGrid;
            for (int j = 0; j <= kGrid; ++j) {
                const double l = l_lo + (l_hi - l_lo) * j / kGrid;
                const std::vector<double> w = expand(v_p, l);
                if (!feasible(w, 1e-12)) continue;
                const double obj = block_objective(blk, a, rho, w);
                if (obj < best.objective) {
                    best.objective = obj;
                    best.w = w;
                    best_vp = v_p;
                    best_l = l;
                    found = true;
                }
            }
        }
        if (!found) break;
        best.found = true;
        const double vp_step = (vp_hi - vp_lo) / kGrid;
        const double l_step = (l_hi - l_lo) / kGrid;
        vp_lo = best_vp - 2.0 * vp_step;
        vp_hi = best_vp + 2.0 * vp_step;
        l_lo = std::max(0.0, best_l - 2.0 * l_step);
        l_hi = std::min(blk.l_max, best_l + 2.0 * l_step);
    }
    return best;
}

} // namespace feederplan::oracle
