#include "feederplan/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "feederplan/errors.hpp"
#include "feederplan/textio.hpp"

namespace feederplan {

namespace {

namespace fs = std::filesystem;

std::string resolve(const std::string& base_dir, const std::string& path) {
    if (path.empty() || fs::path(path).is_absolute() || base_dir.empty()) return path;
    return (fs::path(base_dir) / path).string();
}

double get_double(const std::map<std::string, std::string>& kv, const std::string& key,
                  double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    double v = 0.0;
    if (!parse_double(it->second, v)) throw ConfigError("bad numeric value for " + key);
    return v;
}

long long get_int(const std::map<std::string, std::string>& kv, const std::string& key,
                  long long fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    long long v = 0;
    if (!parse_int(it->second, v)) throw ConfigError("bad integer value for " + key);
    return v;
}

std::string get_str(const std::map<std::string, std::string>& kv, const std::string& key,
                    const std::string& fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
}

// Stage labeling: rethrows any library error with the pipeline stage (and
// hour, when applicable) prepended.
template <typename F>
auto stage(const std::string& label, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error("stage " + label + ": " + e.what());
    }
}

} // namespace

RunConfig RunConfig::from_text(const std::string& text, const std::string& base_dir) {
    const auto kv = parse_ini(text);
    for (const auto& [key, value] : kv) {
        static const char* known[] = {
            "paths.feeder", "paths.prices", "paths.history",
            "schedule.alpha", "schedule.nt", "schedule.seed", "schedule.mc_samples",
            "schedule.resale_sign", "schedule.gmm_n_max",
            "bounds.g_da_min", "bounds.g_da_max", "bounds.g_rt_min", "bounds.g_rt_max",
            "bounds.g_pv_min", "bounds.g_pv_max",
            "opf.beta", "opf.rho", "opf.eps_primal", "opf.eps_dual", "opf.max_iter",
            "opf.over_relaxation", "opf.v0", "opf.adapt_rho", "opf.tightness_rel_tol",
            "pv.buses"};
        bool ok = false;
        for (const char* k : known)
            if (key == k) ok = true;
        if (!ok) throw ConfigError("unknown config key: " + key);
        (void)value;
    }

    RunConfig cfg;
    cfg.feeder_path = resolve(base_dir, get_str(kv, "paths.feeder", ""));
    cfg.prices_path = resolve(base_dir, get_str(kv, "paths.prices", ""));
    cfg.history_path = resolve(base_dir, get_str(kv, "paths.history", ""));
    cfg.alpha = get_double(kv, "schedule.alpha", cfg.alpha);
    cfg.nt = static_cast<int>(get_int(kv, "schedule.nt", cfg.nt));
    cfg.seed = static_cast<std::uint64_t>(get_int(kv, "schedule.seed", 1));
    cfg.mc_samples = static_cast<int>(get_int(kv, "schedule.mc_samples", cfg.mc_samples));
    cfg.gmm_n_max = static_cast<int>(get_int(kv, "schedule.gmm_n_max", cfg.gmm_n_max));
    const std::string resale = get_str(kv, "schedule.resale_sign", "paper");
    if (resale == "paper")
        cfg.resale = ResaleSign::paper;
    else if (resale == "revenue")
        cfg.resale = ResaleSign::revenue;
    else
        throw ConfigError("resale_sign must be paper or revenue");

    cfg.bounds.g_da_min = get_double(kv, "bounds.g_da_min", cfg.bounds.g_da_min);
    cfg.bounds.g_da_max = get_double(kv, "bounds.g_da_max", cfg.bounds.g_da_max);
    cfg.bounds.g_rt_min = get_double(kv, "bounds.g_rt_min", cfg.bounds.g_rt_min);
    cfg.bounds.g_rt_max = get_double(kv, "bounds.g_rt_max", cfg.bounds.g_rt_max);
    cfg.bounds.g_pv_min = get_double(kv, "bounds.g_pv_min", cfg.bounds.g_pv_min);
    cfg.bounds.g_pv_max = get_double(kv, "bounds.g_pv_max", cfg.bounds.g_pv_max);

    cfg.beta_mode = get_str(kv, "opf.beta", "auto");
    cfg.admm.rho = get_double(kv, "opf.rho", cfg.admm.rho);
    cfg.admm.eps_primal = get_double(kv, "opf.eps_primal", cfg.admm.eps_primal);
    cfg.admm.eps_dual = get_double(kv, "opf.eps_dual", cfg.admm.eps_dual);
    cfg.admm.max_iter = static_cast<int>(get_int(kv, "opf.max_iter", cfg.admm.max_iter));
    cfg.admm.over_relaxation = get_double(kv, "opf.over_relaxation", cfg.admm.over_relaxation);
    cfg.admm.adapt_rho = get_int(kv, "opf.adapt_rho", 0) != 0;
    cfg.admm.tightness_rel_tol =
        get_double(kv, "opf.tightness_rel_tol", cfg.admm.tightness_rel_tol);
    const double v0 = get_double(kv, "opf.v0", 1.0);
    cfg.v0_sq = v0 * v0;

    const std::string pv = get_str(kv, "pv.buses", "");
    if (!trim(pv).empty()) {
        for (const std::string& tok : split(pv, ',')) {
            long long id = 0;
            if (!parse_int(tok, id)) throw ConfigError("bad pv bus id '" + trim(tok) + "'");
            cfg.pv_buses.push_back(static_cast<int>(id));
        }
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    const std::string text = read_text_file(path);
    RunConfig cfg = from_text(text, fs::path(path).parent_path().string());
    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    if (feeder_path.empty() || !fs::exists(feeder_path))
        throw ConfigError("feeder file not found: '" + feeder_path + "'");
    if (prices_path.empty() || !fs::exists(prices_path))
        throw ConfigError("prices file not found: '" + prices_path + "'");
    if (history_path.empty() || !fs::exists(history_path))
        throw ConfigError("history file not found: '" + history_path + "'");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (nt < 1) throw ConfigError("nt must be >= 1");
    if (beta_mode != "auto") {
        double v = 0.0;
        if (!parse_double(beta_mode, v)) throw ConfigError("beta must be 'auto' or numeric");
    }
    bounds.validate();
    admm.validate();
}

PricesAndDemand load_prices_csv(const std::string& text, int nt) {
    const CsvTable t = parse_csv(text);
    const char* cols[] = {"hour", "c_da", "c_rt", "c_pv", "c_s", "g_dl", "g_pv_forecast"};
    int idx[7];
    for (int i = 0; i < 7; ++i) {
        idx[i] = t.column(cols[i]);
        if (idx[i] < 0)
            throw ParseError(std::string("price CSV missing column ") + cols[i]);
    }
    if (static_cast<int>(t.rows.size()) < nt)
        throw InputError("price CSV has " + std::to_string(t.rows.size()) +
                         " rows, need " + std::to_string(nt));
    std::vector<double> c_da(nt), c_rt(nt), c_pv(nt), c_s(nt), g_dl(nt), g_pv(nt);
    for (int r = 0; r < nt; ++r) {
        double vals[7];
        for (int i = 0; i < 7; ++i)
            if (!parse_double(t.rows[r][idx[i]], vals[i]))
                throw ParseError("price CSV row " + std::to_string(r + 1) + ": bad value in " +
                                 cols[i]);
        if (static_cast<int>(vals[0]) != r)
            throw ParseError("price CSV row " + std::to_string(r + 1) + ": hours must be 0..NT-1");
        c_da[r] = vals[1];
        c_rt[r] = vals[2];
        c_pv[r] = vals[3];
        c_s[r] = vals[4];
        g_dl[r] = vals[5];
        g_pv[r] = vals[6];
    }
    PricesAndDemand out{PriceSchedule::create(std::move(c_da), std::move(c_rt), std::move(c_pv),
                                              std::move(c_s)),
                        DemandSeries{std::move(g_dl), std::move(g_pv)}};
    out.demand.validate();
    return out;
}

namespace {

struct Step1 {
    GmmModel model;
    std::vector<double> mdl_scores;
    PricesAndDemand market;
    DayAheadSchedule schedule;
    McEstimate f1_mc;
    double beta = 0.0;
};

Step1 run_step1(const RunConfig& cfg, double alpha) {
    Step1 s1;
    stage("error-fit", [&] {
        const std::vector<double> errors = load_error_history_csv(read_text_file(cfg.history_path));
        s1.model = mdl_select(errors, cfg.gmm_n_max, cfg.seed, &s1.mdl_scores);
        return 0;
    });
    stage("market-data", [&] {
        s1.market = load_prices_csv(read_text_file(cfg.prices_path), cfg.nt);
        return 0;
    });
    stage("day-ahead-purchase", [&] {
        s1.schedule = build_schedule(s1.market.demand, s1.model, alpha, cfg.bounds,
                                     s1.market.prices, cfg.resale);
        return 0;
    });
    stage("expected-cost", [&] {
        s1.f1_mc = expected_f1(s1.schedule, s1.market.prices, s1.market.demand, s1.model,
                               cfg.mc_samples, cfg.seed, cfg.resale, cfg.bounds);
        return 0;
    });
    if (cfg.beta_mode == "auto") {
        s1.beta = s1.market.prices.mean_c_da();
    } else {
        parse_double(cfg.beta_mode, s1.beta);
    }
    return s1;
}

// Step 2 for one schedule: per-hour OPF losses (per-unit energy -> kWh).
double run_step2(const RunConfig& cfg, const FeederNetwork& net, const Step1& s1,
                 std::vector<HourOpf>* hours_out) {
    double f2_pu = 0.0;
    for (int t = 0; t < cfg.nt; ++t) {
        const OpfProblem prob = stage("opf-build hour " + std::to_string(t), [&] {
            return build_problem(net, s1.schedule, s1.market.demand, cfg.pv_buses, t, cfg.v0_sq);
        });
        SolveResult res = stage("admm-solve hour " + std::to_string(t), [&] {
            return solve(prob, cfg.admm);
        });
        f2_pu += res.solution.objective;
        if (hours_out) hours_out->push_back({t, std::move(res)});
    }
    return f2_pu * net.s_base_kw(); // 1-hour periods: pu power -> kWh on the base
}

} // namespace

RunReport run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    const FeederNetwork net = stage("feeder-parse", [&] {
        return parse_feeder_file(cfg.feeder_path);
    });
    const Step1 s1 = run_step1(cfg, cfg.alpha);

    RunReport report;
    report.error_model = s1.model;
    report.mdl_scores = s1.mdl_scores;
    report.schedule = s1.schedule;
    report.f1_point = evaluate_f1(s1.schedule, s1.market.prices, s1.market.demand, cfg.resale,
                                  cfg.bounds);
    report.f1_mc = s1.f1_mc;
    report.f1 = s1.f1_mc.mean;
    report.beta = s1.beta;
    report.bus_ids.reserve(net.buses().size());
    for (const Bus& b : net.buses()) report.bus_ids.push_back(b.id);
    report.f2_kwh = run_step2(cfg, net, s1, &report.hours);
    report.total_cost = report.f1 + report.beta * report.f2_kwh;
    report.cost_direction_note =
        "expected total cost is nondecreasing in alpha for the bundled prices "
        "(real-time premium below the break-even spread; direction follows the "
        "implemented deterministic equivalent)";
    return report;
}

std::vector<AlphaSweepRow> alpha_sweep(const RunConfig& cfg, const std::vector<double>& alphas) {
    cfg.validate();
    for (double a : alphas)
        if (!(a > 0.0 && a < 1.0)) throw InputError("sweep alpha must lie in (0, 1)");
    const FeederNetwork net = stage("feeder-parse", [&] {
        return parse_feeder_file(cfg.feeder_path);
    });
    std::vector<AlphaSweepRow> rows;
    for (double a : alphas) {
        const Step1 s1 = run_step1(cfg, a); // shared seeds across alphas
        AlphaSweepRow row;
        row.alpha = a;
        row.f1 = s1.f1_mc.mean;
        row.f2_kwh = run_step2(cfg, net, s1, nullptr);
        row.total = row.f1 + s1.beta * row.f2_kwh;
        rows.push_back(row);
    }
    return rows;
}

namespace {

std::string schedule_csv(const RunReport& r) {
    std::ostringstream out;
    out << "hour,g_da,g_pv,lambda,expected_rt,cost_da,cost_pv,cost_rt,cost_resale,clamped\n";
    for (int t = 0; t < r.schedule.nt(); ++t) {
        out << t << ',' << fmt_double(r.schedule.g_da[t]) << ',' << fmt_double(r.schedule.g_pv[t])
            << ',' << r.schedule.lambda[t] << ',' << fmt_double(r.schedule.expected_rt[t]) << ','
            << fmt_double(r.f1_point.cost_da[t]) << ',' << fmt_double(r.f1_point.cost_pv[t]) << ','
            << fmt_double(r.f1_point.cost_rt[t]) << ',' << fmt_double(r.f1_point.cost_resale[t])
            << ',' << (r.schedule.clamped[t] ? 1 : 0) << "\n";
    }
    return out.str();
}

} // namespace

void emit_reports(const RunReport& report, const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);

    const auto path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };
    write_text_file(path("schedule.csv"), schedule_csv(report));

    for (const HourOpf& h : report.hours) {
        write_text_file(path("opf_hour_" + std::to_string(h.hour) + ".csv"),
                        solution_csv(h.result.solution, report.bus_ids));
        write_text_file(path("residuals_hour_" + std::to_string(h.hour) + ".csv"),
                        trace_csv(h.result.trace));
    }

    std::ostringstream sum;
    sum << "f1 = " << fmt_double(report.f1) << "\n";
    sum << "f1_point = " << fmt_double(report.f1_point.total) << "\n";
    sum << "f1_mc_half_width = " << fmt_double(report.f1_mc.half_width) << "\n";
    sum << "f2_kwh = " << fmt_double(report.f2_kwh) << "\n";
    sum << "beta = " << fmt_double(report.beta) << "\n";
    sum << "C = " << fmt_double(report.total_cost) << "\n";
    sum << "alpha = " << fmt_double(report.schedule.alpha) << "\n";
    sum << "gmm_components = " << report.error_model.n_components() << "\n";
    int not_converged = 0, not_tight = 0, slow = 0;
    for (const HourOpf& h : report.hours) {
        if (!h.result.solution.converged) ++not_converged;
        if (!h.result.solution.tight) ++not_tight;
        if (h.result.solution.iterations > 30) ++slow;
    }
    sum << "hours = " << report.hours.size() << "\n";
    sum << "hours_not_converged = " << not_converged << "\n";
    sum << "hours_not_tight = " << not_tight << "\n";
    sum << "hours_over_30_iter = " << slow << "\n";
    for (const HourOpf& h : report.hours) {
        sum << "hour " << h.hour << ": iters=" << h.result.solution.iterations
            << " converged=" << (h.result.solution.converged ? 1 : 0)
            << " tight=" << (h.result.solution.tight ? 1 : 0)
            << " loss_pu=" << fmt_double(h.result.solution.objective) << "\n";
    }
    sum << "note: " << report.cost_direction_note << "\n";
    write_text_file(path("summary.txt"), sum.str());

    if (report.sweep) {
        std::ostringstream sw, plot;
        sw << "alpha,f1,f2_kwh,total_cost\n";
        for (const AlphaSweepRow& row : *report.sweep) {
            sw << fmt_double(row.alpha) << ',' << fmt_double(row.f1) << ','
               << fmt_double(row.f2_kwh) << ',' << fmt_double(row.total) << "\n";
            plot << fmt_double(row.alpha) << ' ' << fmt_double(row.total) << "\n";
        }
        write_text_file(path("alpha_sweep.csv"), sw.str());
        write_text_file(path("alpha_sweep_plot.dat"), plot.str());
    }
}

} // namespace feederplan
