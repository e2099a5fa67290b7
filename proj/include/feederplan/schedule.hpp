#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "feederplan/gmm.hpp"

namespace feederplan {

// Hourly market prices, $/kWh. Construction enforces c_s < c_da < c_rt.
struct PriceSchedule {
    std::vector<double> c_da, c_rt, c_pv, c_s;

    static PriceSchedule create(std::vector<double> c_da, std::vector<double> c_rt,
                                std::vector<double> c_pv, std::vector<double> c_s);
    int nt() const { return static_cast<int>(c_da.size()); }
    double mean_c_da() const;
};

// Hourly demand and PV forecast, kWh.
struct DemandSeries {
    std::vector<double> g_dl;
    std::vector<double> g_pv_forecast;
    int nt() const { return static_cast<int>(g_dl.size()); }
    void validate() const;
};

// Per-hour box bounds on the three purchase quantities, kWh.
struct PurchaseBounds {
    double g_da_min = 0.0, g_da_max = 1e18;
    double g_rt_min = 0.0, g_rt_max = 1e18;
    double g_pv_min = 0.0, g_pv_max = 1e18;
    void validate() const;
};

// Sign convention for the surplus term: `paper` adds c_s * surplus to the
// cost; `revenue` subtracts it (resale offsets cost).
enum class ResaleSign { paper, revenue };

struct DayAheadSchedule {
    std::vector<double> g_da;        // kWh purchased day-ahead
    std::vector<double> g_pv;        // kWh renewable dispatched
    std::vector<int> lambda;         // recourse indicator vs forecast demand
    std::vector<double> expected_rt; // E[real-time purchase] under the error model
    std::vector<bool> clamped;       // purchase hit a bound
    double f1 = 0.0;                 // substation cost at forecast demand, $
    double alpha = 0.0;
    int nt() const { return static_cast<int>(g_da.size()); }
};

struct Forecast {
    double point = 0.0;     // next-period value
    GmmModel distribution;  // of the forecast value itself
};

// Persistence-style recursion: next = last * (1 + e) with e from the fitted
// error model; the point forecast uses the mixture mean.
Forecast forecast_next(std::span<const double> history, const GmmModel& error_model);

// 1 if g_da + g_pv < g_dl, else 0.
int recourse_indicator(double g_da, double g_pv, double g_dl);

struct PurchaseResult {
    std::vector<double> g_da;
    std::vector<double> g_pv;
    std::vector<bool> clamped;
};

// Deterministic equivalent of the chance constraint: with shortfall
// f(e) = g_dl*(1+e) - (g_da + g_pv), requiring P(f <= 0) >= alpha gives
// g_da = clamp(g_dl*(1 + Q(alpha)) - g_pv, bounds) where Q is the mixture
// quantile. PV dispatch is min(forecast, g_pv_max).
PurchaseResult deterministic_purchase(const DemandSeries& demand, const GmmModel& error_model,
                                      double alpha, const PurchaseBounds& bounds);

struct F1Breakdown {
    double total = 0.0;
    std::vector<double> cost_da, cost_pv, cost_rt, cost_resale;
    std::vector<double> g_rt;
    std::vector<int> lambda;
};

// Substation cost f1 = sum_t [ c_da*g_da + c_pv*g_pv + lambda*c_rt*g_rt
// + (1-lambda)*c_s*(g_da + g_pv - g_dl) ] with g_rt the realized shortfall
// clipped to its bounds.
F1Breakdown evaluate_f1(const DayAheadSchedule& schedule, const PriceSchedule& prices,
                        const DemandSeries& realized, ResaleSign sign,
                        const PurchaseBounds& bounds = {});

struct McEstimate {
    double mean = 0.0;
    double half_width = 0.0; // 1.96 * standard error
    int n_samples = 0;
};

// Monte Carlo mean of evaluate_f1 over demand realizations g_dl*(1+e).
// Sampling is blocked with per-block seeds derived from `seed`, so the
// result is identical no matter how the work would be sharded.
McEstimate expected_f1(const DayAheadSchedule& schedule, const PriceSchedule& prices,
                       const DemandSeries& demand, const GmmModel& error_model,
                       int n_samples, std::uint64_t seed, ResaleSign sign,
                       const PurchaseBounds& bounds = {});

// Full first-stage product: purchases, recourse flags vs forecast demand,
// analytic expected real-time energy, and f1 at the forecast demand.
DayAheadSchedule build_schedule(const DemandSeries& demand, const GmmModel& error_model,
                                double alpha, const PurchaseBounds& bounds,
                                const PriceSchedule& prices, ResaleSign sign);

} // namespace feederplan
