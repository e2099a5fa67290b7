#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feederplan/admm.hpp"
#include "feederplan/gmm.hpp"
#include "feederplan/grid.hpp"
#include "feederplan/schedule.hpp"
#include "feederplan/socp.hpp"

namespace feederplan {

struct RunConfig {
    std::string feeder_path;
    std::string prices_path;
    std::string history_path;
    double alpha = 0.9;
    int nt = 24;
    std::uint64_t seed = 1;
    int mc_samples = 100000;
    ResaleSign resale = ResaleSign::paper;
    std::string beta_mode = "auto"; // "auto" = mean c_da, else numeric string
    int gmm_n_max = 4;
    std::vector<int> pv_buses;
    PurchaseBounds bounds;
    AdmmConfig admm;
    double v0_sq = 1.0;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_text(const std::string& text, const std::string& base_dir);
    void validate() const;
};

struct PricesAndDemand {
    PriceSchedule prices;
    DemandSeries demand;
};
// CSV with header hour,c_da,c_rt,c_pv,c_s,g_dl,g_pv_forecast.
PricesAndDemand load_prices_csv(const std::string& text, int nt);

struct HourOpf {
    int hour = 0;
    SolveResult result;
};

struct AlphaSweepRow {
    double alpha = 0.0;
    double f1 = 0.0;     // Monte Carlo expected substation cost, $
    double f2_kwh = 0.0; // feeder loss energy
    double total = 0.0;  // f1 + beta * f2
};

struct RunReport {
    GmmModel error_model;
    std::vector<double> mdl_scores;
    DayAheadSchedule schedule;
    F1Breakdown f1_point;  // at forecast demand
    McEstimate f1_mc;      // under the fitted error model
    double f1 = 0.0;       // headline value (Monte Carlo mean)
    double f2_kwh = 0.0;
    double beta = 0.0;     // $/kWh applied to f2
    double total_cost = 0.0; // f1 + beta * f2_kwh, exactly as summed
    std::vector<int> bus_ids; // by bus index, for solution export
    std::vector<HourOpf> hours;
    std::string cost_direction_note;
    std::optional<std::vector<AlphaSweepRow>> sweep;
};

// Step 1 (fit errors, schedule purchases, cost them) followed by step 2
// (per-hour loss-minimizing OPF via ADMM), combined as f1 + beta * f2.
// Module failures surface as Error with the stage and hour in the message.
RunReport run_pipeline(const RunConfig& cfg);

// Reruns step 1 per alpha with shared seeds and recomputes step-2 losses
// under each alpha's schedule.
std::vector<AlphaSweepRow> alpha_sweep(const RunConfig& cfg, const std::vector<double>& alphas);

// Writes schedule.csv, opf_hour_<t>.csv, residuals_hour_<t>.csv, summary.txt
// and, when present, alpha_sweep.csv + alpha_sweep_plot.dat into out_dir.
// Identical reports produce byte-identical files.
void emit_reports(const RunReport& report, const std::string& out_dir);

} // namespace feederplan
