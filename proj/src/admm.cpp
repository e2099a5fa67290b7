#include "feederplan/admm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "feederplan/errors.hpp"
#include "feederplan/textio.hpp"

namespace feederplan {

std::string trace_csv(const ResidualTrace& trace) {
    std::string out = "iter,primal_residual,dual_residual,objective\n";
    for (const auto& row : trace.rows)
        out += std::to_string(row.iter) + ',' + fmt_double(row.primal) + ',' +
               fmt_double(row.dual) + ',' + fmt_double(row.objective) + "\n";
    return out;
}

void AdmmConfig::validate() const {
    if (!(rho > 0.0)) throw ValidationError("rho must be positive");
    if (!(eps_primal > 0.0) || !(eps_dual > 0.0))
        throw ValidationError("residual thresholds must be positive");
    if (max_iter < 1) throw ValidationError("max_iter must be >= 1");
    if (over_relaxation < 1.0 || over_relaxation > 1.8)
        throw ValidationError("over_relaxation must lie in [1, 1.8]");
    if (!(tightness_rel_tol > 0.0))
        throw ValidationError("tightness tolerance must be positive");
}

namespace admm_detail {

int g_debug_agent = -1;
int g_debug_iter = 0;

namespace {

// Dense LU with partial pivoting, solving M y = rhs in place. Returns false
// on a (numerically) singular matrix.
bool solve_dense(std::vector<double>& M, std::vector<double>& rhs, int d) {
    for (int col = 0; col < d; ++col) {
        int piv = col;
        double best = std::abs(M[size_t(col) * d + col]);
        for (int row = col + 1; row < d; ++row) {
            const double v = std::abs(M[size_t(row) * d + col]);
            if (v > best) {
                best = v;
                piv = row;
            }
        }
        if (best < 1e-13) return false;
        if (piv != col) {
            for (int j = col; j < d; ++j)
                std::swap(M[size_t(piv) * d + j], M[size_t(col) * d + j]);
            std::swap(rhs[piv], rhs[col]);
        }
        const double inv = 1.0 / M[size_t(col) * d + col];
        for (int row = col + 1; row < d; ++row) {
            const double f = M[size_t(row) * d + col] * inv;
            if (f == 0.0) continue;
            for (int j = col; j < d; ++j) M[size_t(row) * d + j] -= f * M[size_t(col) * d + j];
            rhs[row] -= f * rhs[col];
        }
    }
    for (int row = d - 1; row >= 0; --row) {
        double s = rhs[row];
        for (int j = row + 1; j < d; ++j) s -= M[size_t(row) * d + j] * rhs[j];
        rhs[row] = s / M[size_t(row) * d + row];
    }
    return true;
}

struct Pin {
    int var = -1;
    double value = 0.0;
    int side = 0; // -1 lower bound, +1 upper bound
};

} // namespace

void LocalBlock::solve(const double* a, double rho, double* w_out) const {
    const double vw = v_weight;
    if (is_root) {
        // Root block: pinned voltage plus free prox on the owned child-branch
        // copies (their cost and constraints live at the child end).
        w_out[0] = v0_sq;
        for (int c = 0; c < 3 * n_children; ++c) w_out[1 + c] = a[1 + c];
        return;
    }
    if (v_lo > v_hi || l_max < 0.0)
        throw InfeasibleAgentError("empty box intersection in bus block");

    constexpr int kEq = 3;
    // Equality rows over the local block:
    //   [0] P - r*l - sum(child P) = d_p
    //   [1] Q - x*l - sum(child Q) = d_q
    //   [2] v_self - v_parent + 2r*P + 2x*Q - (r^2 + x^2)*l = 0
    // Child-branch (P, Q, l) are owned here but the cone, boxes and loss
    // cost of those branches live at the child end; here they only feel the
    // balance rows (P, Q) and the prox.
    std::vector<double> E(size_t(kEq) * n, 0.0);
    const std::array<double, kEq> b{d_p, d_q, 0.0};
    E[size_t(0) * n + ip] = 1.0;
    E[size_t(0) * n + il] = -r;
    E[size_t(1) * n + iq] = 1.0;
    E[size_t(1) * n + il] = -x;
    E[size_t(2) * n + iv_self] = 1.0;
    E[size_t(2) * n + iv_parent] = -1.0;
    E[size_t(2) * n + ip] = 2.0 * r;
    E[size_t(2) * n + iq] = 2.0 * x;
    E[size_t(2) * n + il] = -(r * r + x * x);
    for (int c = 0; c < n_children; ++c) {
        E[size_t(0) * n + (5 + 3 * c)] = -1.0;
        E[size_t(1) * n + (5 + 3 * c + 1)] = -1.0;
    }

    // Solves the KKT system of
    //   min cost.w + rho/2 |w-a|^2 + lambda*(P^2 + Q^2 - v_parent*l)
    //   s.t. E w = b and the pinned rows.
    // The Hessian rho*I + lambda*G stays positive definite on the equality
    // null space for lambda < rho (the cone form has eigenvalues in
    // [-1, 2]), so every solve in the bisection below is well posed.
    std::vector<double> w, nu_pins;
    auto attempt = [&](double lambda, const std::vector<Pin>& pins) -> bool {
        const int m = kEq + static_cast<int>(pins.size());
        const int d = n + m;
        std::vector<double> M(size_t(d) * d, 0.0);
        std::vector<double> y(d, 0.0);
        for (int i = 0; i < n; ++i)
            M[size_t(i) * d + i] = rho * ((i == iv_self || i == iv_parent) ? vw : 1.0);
        M[size_t(ip) * d + ip] += 2.0 * lambda;
        M[size_t(iq) * d + iq] += 2.0 * lambda;
        M[size_t(iv_parent) * d + il] -= lambda;
        M[size_t(il) * d + iv_parent] -= lambda;
        for (int row = 0; row < kEq; ++row)
            for (int j = 0; j < n; ++j) {
                const double v = E[size_t(row) * n + j];
                if (v != 0.0) {
                    M[size_t(j) * d + (n + row)] = v;
                    M[size_t(n + row) * d + j] = v;
                }
            }
        for (size_t pi = 0; pi < pins.size(); ++pi) {
            const int row = n + kEq + static_cast<int>(pi);
            M[size_t(pins[pi].var) * d + row] = 1.0;
            M[size_t(row) * d + pins[pi].var] = 1.0;
        }
        for (int i = 0; i < n; ++i)
            y[i] = rho * ((i == iv_self || i == iv_parent) ? vw : 1.0) * a[i];
        y[il] -= cost_l;
        for (int row = 0; row < kEq; ++row) y[n + row] = b[row];
        for (size_t pi = 0; pi < pins.size(); ++pi) y[n + kEq + pi] = pins[pi].value;
        if (!solve_dense(M, y, d)) return false;
        w.assign(y.begin(), y.begin() + n);
        nu_pins.assign(y.begin() + n + kEq, y.begin() + d);
        return true;
    };
    auto cone_value = [&]() { return w[ip] * w[ip] + w[iq] * w[iq] - w[iv_parent] * w[il]; };

    auto is_sane = [&]() {
        for (int i = 0; i < n; ++i)
            if (!std::isfinite(w[i]) || std::abs(w[i]) > 1e8) return false;
        return true;
    };
    auto box_ok = [&]() {
        const double vtol = 1e-9 * std::max(1.0, std::abs(v_hi));
        const double ltol = 1e-9 * std::max(1.0, l_max);
        return w[iv_self] >= v_lo - vtol && w[iv_self] <= v_hi + vtol && w[il] >= -ltol &&
               w[il] <= l_max + ltol;
    };
    auto objective = [&]() {
        double obj = cost_l * w[il];
        for (int i = 0; i < n; ++i) {
            const double wt = (i == iv_self || i == iv_parent) ? vw : 1.0;
            obj += 0.5 * rho * wt * (w[i] - a[i]) * (w[i] - a[i]);
        }
        return obj;
    };

    // Active-set candidates over the two boxes, most likely first. Every
    // feasible candidate is an exact minimizer under its pin set, so the
    // lowest-objective feasible candidate is the block optimum; when the
    // unpinned candidate is feasible it wins outright.
    static constexpr int kCombos[9][2] = {{0, 0},  {0, -1}, {0, 1},  {-1, 0}, {1, 0},
                                          {-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
    std::vector<double> best_w;
    double best_obj = std::numeric_limits<double>::infinity();

    for (const auto& combo : kCombos) {
        std::vector<Pin> pins;
        if (combo[0] == -1) pins.push_back({iv_self, v_lo, -1});
        if (combo[0] == +1) pins.push_back({iv_self, v_hi, +1});
        if (combo[1] == -1) pins.push_back({il, 0.0, -1});
        if (combo[1] == +1) pins.push_back({il, l_max, +1});

        if (!attempt(0.0, pins) || !is_sane()) continue;
        double phi = cone_value();
        if (phi > 0.0) {
            // Cone active: locate the multiplier by safeguarded bisection.
            // phi(lambda) is monotone nonincreasing (derivative of the
            // concave dual) and heads to -inf as lambda approaches rho
            // whenever an inflation direction survives the pins; a failed or
            // blown-up solve near the singular edge counts as the negative
            // side, since the exact phi there is -inf.
            double lo = 0.0;
            double hi = rho * (1.0 - 1e-12);
            bool have_neg = !attempt(hi, pins) || !is_sane() || cone_value() <= 0.0;
            if (!have_neg) continue; // pins force a cone violation at any multiplier
            std::vector<double> w_neg = w, nu_neg = nu_pins;
            const bool neg_usable = is_sane();
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                const bool ok = attempt(mid, pins) && is_sane();
                phi = ok ? cone_value() : 1.0;
                if (ok && phi <= 0.0) {
                    hi = mid;
                    w_neg = w;
                    nu_neg = nu_pins;
                    if (phi > -1e-15 * std::max(1.0, std::abs(w[iv_parent] * w[il]))) break;
                } else if (!ok) {
                    // treat as the far (negative) side
                    hi = mid;
                } else {
                    lo = mid;
                }
                if (hi - lo < 1e-15 * rho) break;
            }
            if (!neg_usable && (w_neg.empty() || !std::isfinite(w_neg[0]))) continue;
            w = std::move(w_neg);
            nu_pins = std::move(nu_neg);
            if (!is_sane() || cone_value() > 1e-9 * std::max(1.0, std::abs(w[iv_parent] * w[il])))
                continue;
        }

        if (!box_ok()) continue;
        const double obj = objective();
        if (combo[0] == 0 && combo[1] == 0) {
            if (g_debug_agent >= 0)
                std::fprintf(stderr, "  it %d agent %d: combo(0,0) phi=%.3e w=[%.9f %.9f %.6f %.6f %.6f]\n",
                             g_debug_iter, g_debug_agent, cone_value(), w[0], w[1], w[2], w[3], w[4]);
            // unpinned and feasible: the global block optimum
            std::copy(w.begin(), w.end(), w_out);
            return;
        }
        if (obj < best_obj) {
            best_obj = obj;
            best_w = w;
        }
    }
    if (best_w.empty())
        throw InfeasibleAgentError("bus agent has an empty local constraint set (demand " +
                                   std::to_string(d_p) + " + j" + std::to_string(d_q) + ")");
    if (g_debug_agent >= 0)
        std::fprintf(stderr, "  it %d agent %d: pinned combo obj=%.9e\n", g_debug_iter,
                     g_debug_agent, best_obj);
    std::copy(best_w.begin(), best_w.end(), w_out);
}

void consensus_average(const std::vector<std::vector<double>>& x,
                       const std::vector<std::vector<double>>& u,
                       const std::vector<std::vector<std::pair<int, int>>>& copies,
                       std::vector<double>& z) {
    for (size_t c = 0; c < copies.size(); ++c) {
        double s = 0.0;
        for (const auto& [agent, slot] : copies[c]) s += x[agent][slot] + u[agent][slot];
        z[c] = s / static_cast<double>(copies[c].size());
    }
}

void dual_ascend(const std::vector<std::vector<double>>& x, const std::vector<double>& z,
                 const std::vector<std::vector<std::pair<int, int>>>& copies,
                 std::vector<std::vector<double>>& u) {
    for (size_t c = 0; c < copies.size(); ++c)
        for (const auto& [agent, slot] : copies[c]) u[agent][slot] += x[agent][slot] - z[c];
}

} // namespace admm_detail

namespace {

using admm_detail::LocalBlock;

struct Engine {
    const OpfProblem& prob;
    const FeederNetwork& net;
    int n_bus = 0;
    std::vector<int> vcoord;                    // per bus index
    std::vector<int> pcoord, qcoord, lcoord;    // per energized-branch position
    std::vector<int> branch_pos;                // branch index -> position, -1 if open
    std::vector<LocalBlock> blocks;             // per bus index
    std::vector<std::vector<std::pair<int, int>>> copies; // coord -> (agent, slot)
    std::vector<int> branch_child;              // energized position -> child bus index
    int n_coord = 0;

    explicit Engine(const OpfProblem& p) : prob(p), net(*p.net) {
        n_bus = net.bus_count();
        const auto& ebr = net.energized_branches();
        vcoord.resize(n_bus);
        for (int i = 0; i < n_bus; ++i) vcoord[i] = i;
        n_coord = n_bus;
        branch_pos.assign(net.branches().size(), -1);
        pcoord.resize(ebr.size());
        qcoord.resize(ebr.size());
        lcoord.resize(ebr.size());
        for (size_t k = 0; k < ebr.size(); ++k) {
            branch_pos[ebr[k]] = static_cast<int>(k);
            pcoord[k] = n_coord++;
            qcoord[k] = n_coord++;
            lcoord[k] = n_coord++;
        }
        branch_child.assign(ebr.size(), -1);
        for (int i = 0; i < n_bus; ++i) {
            const int pb = net.parent_branch_of(i);
            if (pb >= 0) branch_child[branch_pos[pb]] = i;
        }

        double vw = 1.0;
        if (const char* e = std::getenv("FP_VW")) vw = atof(e);
        blocks.resize(n_bus);
        for (int i = 0; i < n_bus; ++i) {
            LocalBlock& blk = blocks[i];
            blk.v_weight = vw;
            const Bus& bus = net.buses()[i];
            const auto& cbr = net.child_branches_of(i);
            if (i == net.root_index()) {
                blk.is_root = true;
                blk.v0_sq = prob.v0_sq;
                blk.n_children = static_cast<int>(cbr.size());
                blk.n = 1 + 3 * blk.n_children;
                blk.coords.resize(blk.n);
                blk.coords[0] = vcoord[i];
                for (size_t c = 0; c < cbr.size(); ++c) {
                    blk.coords[1 + 3 * c] = pcoord[branch_pos[cbr[c]]];
                    blk.coords[1 + 3 * c + 1] = qcoord[branch_pos[cbr[c]]];
                    blk.coords[1 + 3 * c + 2] = lcoord[branch_pos[cbr[c]]];
                }
                continue;
            }
            const int pb = net.parent_branch_of(i);
            const Branch& up = net.branches()[pb];
            blk.n = 5 + 3 * static_cast<int>(cbr.size());
            blk.iv_self = 0;
            blk.iv_parent = 1;
            blk.ip = 2;
            blk.iq = 3;
            blk.il = 4;
            blk.n_children = static_cast<int>(cbr.size());
            blk.r = up.r;
            blk.x = up.x;
            blk.l_max = up.l_max;
            blk.v_lo = bus.v_min_sq();
            blk.v_hi = bus.v_max_sq();
            blk.d_p = -prob.injection_p[i];
            blk.d_q = -prob.injection_q[i];
            blk.cost_l = up.r;
            blk.coords.resize(blk.n);
            blk.coords[0] = vcoord[i];
            blk.coords[1] = vcoord[net.parent_of(i)];
            blk.coords[2] = pcoord[branch_pos[pb]];
            blk.coords[3] = qcoord[branch_pos[pb]];
            blk.coords[4] = lcoord[branch_pos[pb]];
            for (size_t c = 0; c < cbr.size(); ++c) {
                blk.coords[5 + 3 * c] = pcoord[branch_pos[cbr[c]]];
                blk.coords[5 + 3 * c + 1] = qcoord[branch_pos[cbr[c]]];
                blk.coords[5 + 3 * c + 2] = lcoord[branch_pos[cbr[c]]];
            }
        }

        copies.assign(n_coord, {});
        for (int agent = 0; agent < n_bus; ++agent)
            for (size_t s = 0; s < blocks[agent].coords.size(); ++s)
                copies[blocks[agent].coords[s]].push_back({agent, static_cast<int>(s)});
    }

    // Flat start: v = 1 pu^2, flows from one lossless accumulation sweep
    // (no r*l terms), currents cone-consistent with those flows at the flat
    // voltage, duals zero.
    std::vector<double> initial_z() const {
        std::vector<double> z(n_coord, 0.0);
        for (int i = 0; i < n_bus; ++i) z[vcoord[i]] = 1.0;
        std::vector<double> acc_p(n_bus), acc_q(n_bus);
        for (int i = 0; i < n_bus; ++i) {
            acc_p[i] = -prob.injection_p[i];
            acc_q[i] = -prob.injection_q[i];
        }
        const auto& order = net.topo_order();
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const int i = *it;
            if (i == net.root_index()) continue;
            const int parent = net.parent_of(i);
            const int k = branch_pos[net.parent_branch_of(i)];
            z[pcoord[k]] = acc_p[i];
            z[qcoord[k]] = acc_q[i];
            z[lcoord[k]] = acc_p[i] * acc_p[i] + acc_q[i] * acc_q[i]; // v = 1
            acc_p[parent] += acc_p[i];
            acc_q[parent] += acc_q[i];
        }
        return z;
    }

    OpfSolution assemble(const std::vector<double>& z) const {
        OpfSolution sol;
        sol.v_sq.resize(n_bus);
        for (int i = 0; i < n_bus; ++i) sol.v_sq[i] = z[vcoord[i]];
        const auto& ebr = net.energized_branches();
        sol.flows.resize(ebr.size());
        for (size_t k = 0; k < ebr.size(); ++k) {
            const int e = ebr[k];
            // Adjacency orientation (parent -> child), which may disagree
            // with the file's from/to on reversed records.
            const int child = branch_child[k];
            BranchFlow bf;
            bf.branch_index = e;
            bf.to_index = child;
            bf.from_index = net.parent_of(child);
            bf.from_bus = net.buses()[bf.from_index].id;
            bf.to_bus = net.buses()[bf.to_index].id;
            bf.P = z[pcoord[k]];
            bf.Q = z[qcoord[k]];
            bf.l = z[lcoord[k]];
            bf.loss = net.branches()[e].r * bf.l;
            sol.flows[k] = bf;
        }
        sol.objective = sol.recompute_objective(net);
        return sol;
    }
};

} // namespace

SolveResult solve(const OpfProblem& prob, const AdmmConfig& cfg) {
    cfg.validate();
    prob.validate();
    Engine eng(prob);

    std::vector<double> z = eng.initial_z();
    std::vector<std::vector<double>> x(eng.n_bus), u(eng.n_bus), xh(eng.n_bus);
    for (int a = 0; a < eng.n_bus; ++a) {
        const LocalBlock& blk = eng.blocks[a];
        x[a].resize(blk.n);
        xh[a].resize(blk.n);
        u[a].assign(blk.n, 0.0);
        for (int s = 0; s < blk.n; ++s) x[a][s] = z[blk.coords[s]];
    }

    double rho = cfg.rho;
    const double gamma = cfg.over_relaxation;
    SolveResult result;
    std::vector<double> z_old = z;
    std::vector<double> targets;
    bool converged = false;
    int iter = 0;

    while (iter < cfg.max_iter) {
        ++iter;
        // Local updates: independent given the (z, u) snapshot.
        for (int a = 0; a < eng.n_bus; ++a) {
            const LocalBlock& blk = eng.blocks[a];
            targets.resize(blk.n);
            for (int s = 0; s < blk.n; ++s) targets[s] = z[blk.coords[s]] - u[a][s];
            if (const char* dbg = std::getenv("FEEDERPLAN_ADMM_TRACE_AGENTS")) {
                admm_detail::g_debug_agent =
                    (std::string(dbg).find("," + std::to_string(a) + ",") != std::string::npos)
                        ? a : -1;
                admm_detail::g_debug_iter = iter;
            }
            try {
                blk.solve(targets.data(), rho, x[a].data());
            } catch (const InfeasibleAgentError&) {
                throw InfeasibleAgentError("infeasible local set at bus " +
                                           std::to_string(eng.net.buses()[a].id));
            }
            for (int s = 0; s < blk.n; ++s)
                xh[a][s] = gamma * x[a][s] + (1.0 - gamma) * z[blk.coords[s]];
        }

        z_old = z;
        admm_detail::consensus_average(xh, u, eng.copies, z);
        double primal = 0.0;
        int primal_agent = -1, primal_slot = -1;
        for (int a = 0; a < eng.n_bus; ++a) {
            const LocalBlock& blk = eng.blocks[a];
            for (int s = 0; s < blk.n; ++s) {
                u[a][s] += xh[a][s] - z[blk.coords[s]];
                const double err = std::abs(x[a][s] - z[blk.coords[s]]);
                if (err > primal) {
                    primal = err;
                    primal_agent = a;
                    primal_slot = s;
                }
            }
        }
        double dual = 0.0;
        int dual_coord = -1;
        for (int c = 0; c < eng.n_coord; ++c) {
            const double err = std::abs(z[c] - z_old[c]);
            if (err > dual) {
                dual = err;
                dual_coord = c;
            }
        }
        dual *= rho;
        if (std::getenv("FEEDERPLAN_ADMM_DEBUG") && iter % 10 == 0)
            std::fprintf(stderr, "it %d primal %.2e at agent=%d slot=%d | dual %.2e at coord=%d (nbus=%d)\n",
                         iter, primal, primal_agent, primal_slot, dual, dual_coord, eng.n_bus);

        double objective = 0.0;
        for (size_t k = 0; k < eng.lcoord.size(); ++k)
            objective += eng.net.branches()[eng.net.energized_branches()[k]].r * z[eng.lcoord[k]];
        result.trace.rows.push_back({iter, primal, dual, objective});

        if (primal < cfg.eps_primal && dual < cfg.eps_dual) {
            converged = true;
            break;
        }

        if (cfg.adapt_rho) {
            // Residual balancing; scaled duals are rescaled with rho.
            if (primal > 10.0 * dual) {
                rho *= 2.0;
                for (auto& ua : u)
                    for (double& v : ua) v *= 0.5;
            } else if (dual > 10.0 * primal) {
                rho *= 0.5;
                for (auto& ua : u)
                    for (double& v : ua) v *= 2.0;
            }
        }
    }

    result.solution = eng.assemble(z);
    result.solution.converged = converged;
    result.solution.iterations = iter;
    result.solution.tight =
        converged && relative_exactness_gap(result.solution) <= cfg.tightness_rel_tol;
    return result;
}

} // namespace feederplan
