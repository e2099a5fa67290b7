// feederplan: day-ahead purchase scheduling and feeder loss minimization
// for radial distribution networks.
//
//   feederplan schedule  --config cfg [--out dir]
//   feederplan opf       --feeder file --hour t [--config cfg] [--out dir]
//   feederplan sweep     --config cfg --alphas 0.6,0.7,0.8,0.9 [--out dir]
//   feederplan fit-errors --history csv [--nmax K] [--out dir]

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "feederplan/errors.hpp"
#include "feederplan/pipeline.hpp"
#include "feederplan/textio.hpp"

namespace {

using namespace feederplan;

std::vector<double> parse_alpha_list(const std::string& csv) {
    std::vector<double> out;
    for (const std::string& tok : split(csv, ',')) {
        double a = 0.0;
        if (!parse_double(tok, a)) throw ConfigError("bad alpha '" + trim(tok) + "'");
        out.push_back(a);
    }
    if (out.empty()) throw ConfigError("empty alpha list");
    return out;
}

int cmd_schedule(const std::string& config_path, const std::string& out_dir) {
    const RunConfig cfg = RunConfig::from_file(config_path);
    const RunReport report = run_pipeline(cfg);
    emit_reports(report, out_dir);
    std::printf("f1 = %.6f $\n", report.f1);
    std::printf("f2 = %.6f kWh (beta = %.6f $/kWh)\n", report.f2_kwh, report.beta);
    std::printf("C  = %.6f $\n", report.total_cost);
    int bad = 0;
    for (const HourOpf& h : report.hours)
        if (!h.result.solution.converged || !h.result.solution.tight) ++bad;
    std::printf("hours: %zu, flagged: %d\n", report.hours.size(), bad);
    std::printf("reports written to %s\n", out_dir.c_str());
    return 0;
}

int cmd_opf(const std::string& feeder_path, int hour, const std::string& config_path,
            const std::string& out_dir) {
    const FeederNetwork net = parse_feeder_file(feeder_path);
    OpfProblem prob;
    AdmmConfig admm;
    if (!config_path.empty()) {
        RunConfig cfg = RunConfig::from_file(config_path);
        admm = cfg.admm;
        const PricesAndDemand market = load_prices_csv(read_text_file(cfg.prices_path), cfg.nt);
        const std::vector<double> errors =
            load_error_history_csv(read_text_file(cfg.history_path));
        const GmmModel model = mdl_select(errors, cfg.gmm_n_max, cfg.seed);
        const DayAheadSchedule schedule = build_schedule(market.demand, model, cfg.alpha,
                                                         cfg.bounds, market.prices, cfg.resale);
        prob = build_problem(net, schedule, market.demand, cfg.pv_buses, hour, cfg.v0_sq);
    } else {
        if (hour != 0)
            std::fprintf(stderr, "note: no config given; feeder loads are static, hour ignored\n");
        prob = build_problem_static(net);
    }
    const SolveResult res = solve(prob, admm);

    const OpfSolution& sol = res.solution;
    std::printf("iterations: %d, converged: %s, tight: %s\n", sol.iterations,
                sol.converged ? "yes" : "no", sol.tight ? "yes" : "no");
    std::printf("loss: %.9f pu (%.3f kW)\n", sol.objective, sol.objective * net.s_base_kw());
    if (!res.trace.rows.empty()) {
        const auto& last = res.trace.rows.back();
        std::printf("final residuals: primal %.3e, dual %.3e\n", last.primal, last.dual);
    }

    std::vector<int> bus_ids;
    bus_ids.reserve(net.buses().size());
    for (const Bus& b : net.buses()) bus_ids.push_back(b.id);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);
    const auto out = std::filesystem::path(out_dir);
    write_text_file((out / ("opf_hour_" + std::to_string(hour) + ".csv")).string(),
                    solution_csv(sol, bus_ids));
    write_text_file((out / ("residuals_hour_" + std::to_string(hour) + ".csv")).string(),
                    trace_csv(res.trace));
    std::printf("reports written to %s\n", out_dir.c_str());
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& alphas_csv,
              const std::string& out_dir) {
    const RunConfig cfg = RunConfig::from_file(config_path);
    const std::vector<double> alphas = parse_alpha_list(alphas_csv);
    const std::vector<AlphaSweepRow> rows = alpha_sweep(cfg, alphas);

    RunReport report = run_pipeline(cfg);
    report.sweep = rows;
    emit_reports(report, out_dir);
    std::printf("alpha    expected_C\n");
    for (const AlphaSweepRow& row : rows) std::printf("%.3f    %.6f\n", row.alpha, row.total);
    std::printf("reports written to %s\n", out_dir.c_str());
    return 0;
}

int cmd_fit_errors(const std::string& history_path, int n_max, const std::string& out_dir) {
    const std::vector<double> errors = load_error_history_csv(read_text_file(history_path));
    std::vector<double> scores;
    const GmmModel model = mdl_select(errors, n_max, 1, &scores);
    std::printf("samples: %zu\n", errors.size());
    std::printf("N    MDL\n");
    for (size_t n = 0; n < scores.size(); ++n) std::printf("%zu    %.6f\n", n + 1, scores[n]);
    std::printf("selected N = %d\n", model.n_components());
    std::printf("%s", serialize_gmm(model).c_str());
    if (!out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (ec) throw IoError("cannot create output directory: " + out_dir);
        write_text_file((std::filesystem::path(out_dir) / "gmm.txt").string(),
                        serialize_gmm(model));
        std::printf("model written to %s/gmm.txt\n", out_dir.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Day-ahead scheduling and distributed OPF for radial feeders"};
    app.require_subcommand(1);

    std::string config_path, feeder_path, history_path, alphas_csv;
    std::string out_dir = "out";
    int hour = 0;
    int n_max = 4;

    CLI::App* sc_schedule = app.add_subcommand("schedule", "Run the full two-step pipeline");
    sc_schedule->add_option("--config", config_path, "run configuration file")->required();
    sc_schedule->add_option("--out", out_dir, "output directory");

    CLI::App* sc_opf = app.add_subcommand("opf", "Solve one hour of the feeder OPF");
    sc_opf->add_option("--feeder", feeder_path, "feeder description file")->required();
    sc_opf->add_option("--hour", hour, "hour index")->required();
    sc_opf->add_option("--config", config_path, "optional run configuration");
    sc_opf->add_option("--out", out_dir, "output directory");

    CLI::App* sc_sweep = app.add_subcommand("sweep", "Rerun step 1 over a list of alphas");
    sc_sweep->add_option("--config", config_path, "run configuration file")->required();
    sc_sweep->add_option("--alphas", alphas_csv, "comma-separated confidence levels")->required();
    sc_sweep->add_option("--out", out_dir, "output directory");

    CLI::App* sc_fit = app.add_subcommand("fit-errors", "Fit the forecast-error mixture");
    sc_fit->add_option("--history", history_path, "historical error CSV")->required();
    sc_fit->add_option("--nmax", n_max, "max mixture components");
    sc_fit->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sc_schedule->parsed()) return cmd_schedule(config_path, out_dir);
        if (sc_opf->parsed()) return cmd_opf(feeder_path, hour, config_path, out_dir);
        if (sc_sweep->parsed()) return cmd_sweep(config_path, alphas_csv, out_dir);
        if (sc_fit->parsed()) return cmd_fit_errors(history_path, n_max, out_dir);
    } catch (const feederplan::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 2;
    }
    return 0;
}
