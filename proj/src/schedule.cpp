#include "feederplan/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "feederplan/errors.hpp"
#include "feederplan/rng.hpp"

namespace feederplan {

namespace {

constexpr int kMcBlock = 4096; // samples per reduction block

double normal_cdf(double z) { return 0.5 * std::erfc(-z / M_SQRT2); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

// E[(Y - k)^+] for Y ~ N(m, s^2).
double expected_excess(double m, double s, double k) {
    if (s <= 0.0) return std::max(m - k, 0.0);
    const double z = (m - k) / s;
    return (m - k) * normal_cdf(z) + s * normal_pdf(z);
}

} // namespace

PriceSchedule PriceSchedule::create(std::vector<double> c_da, std::vector<double> c_rt,
                                    std::vector<double> c_pv, std::vector<double> c_s) {
    const size_t nt = c_da.size();
    if (nt == 0) throw ValidationError("price schedule is empty");
    if (c_rt.size() != nt || c_pv.size() != nt || c_s.size() != nt)
        throw ValidationError("price columns have mismatched lengths");
    for (size_t t = 0; t < nt; ++t) {
        if (!(c_s[t] < c_da[t] && c_da[t] < c_rt[t]))
            throw ValidationError("hour " + std::to_string(t) +
                                  ": prices must satisfy c_s < c_da < c_rt");
    }
    PriceSchedule p;
    p.c_da = std::move(c_da);
    p.c_rt = std::move(c_rt);
    p.c_pv = std::move(c_pv);
    p.c_s = std::move(c_s);
    return p;
}

double PriceSchedule::mean_c_da() const {
    double s = 0.0;
    for (double v : c_da) s += v;
    return s / double(c_da.size());
}

void DemandSeries::validate() const {
    if (g_dl.empty()) throw ValidationError("demand series is empty");
    if (g_pv_forecast.size() != g_dl.size())
        throw ValidationError("demand and PV forecast lengths differ");
    for (double v : g_dl)
        if (v < 0.0) throw ValidationError("demand must be >= 0");
    for (double v : g_pv_forecast)
        if (v < 0.0) throw ValidationError("PV forecast must be >= 0");
}

void PurchaseBounds::validate() const {
    if (g_da_min > g_da_max || g_rt_min > g_rt_max || g_pv_min > g_pv_max)
        throw ValidationError("purchase bounds must satisfy min <= max");
    if (g_da_min < 0.0 || g_rt_min < 0.0 || g_pv_min < 0.0)
        throw ValidationError("purchase bounds must be >= 0");
}

Forecast forecast_next(std::span<const double> history, const GmmModel& error_model) {
    if (history.empty()) throw InputError("forecast_next requires a nonempty history");
    const double last = history.back();
    Forecast f;
    f.point = last * (1.0 + error_model.mean());
    // Value distribution of last * (1 + e): scale the error mixture.
    f.distribution = error_model.affine(last, last);
    return f;
}

int recourse_indicator(double g_da, double g_pv, double g_dl) {
    return (g_da + g_pv < g_dl) ? 1 : 0;
}

PurchaseResult deterministic_purchase(const DemandSeries& demand, const GmmModel& error_model,
                                      double alpha, const PurchaseBounds& bounds) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw InputError("alpha must lie in (0, 1)");
    demand.validate();
    bounds.validate();

    const double q_alpha = mixture_quantile(error_model, alpha);
    const int nt = demand.nt();
    PurchaseResult out;
    out.g_da.resize(nt);
    out.g_pv.resize(nt);
    out.clamped.assign(nt, false);
    for (int t = 0; t < nt; ++t) {
        const double pv = std::clamp(demand.g_pv_forecast[t], bounds.g_pv_min, bounds.g_pv_max);
        const double wanted = demand.g_dl[t] * (1.0 + q_alpha) - pv;
        const double got = std::clamp(wanted, bounds.g_da_min, bounds.g_da_max);
        out.g_pv[t] = pv;
        out.g_da[t] = got;
        out.clamped[t] = (got != wanted);
    }
    return out;
}

F1Breakdown evaluate_f1(const DayAheadSchedule& schedule, const PriceSchedule& prices,
                        const DemandSeries& realized, ResaleSign sign,
                        const PurchaseBounds& bounds) {
    const int nt = schedule.nt();
    if (prices.nt() != nt || realized.nt() != nt)
        throw InputError("schedule, prices and demand must share the horizon");

    F1Breakdown out;
    out.cost_da.resize(nt);
    out.cost_pv.resize(nt);
    out.cost_rt.resize(nt);
    out.cost_resale.resize(nt);
    out.g_rt.resize(nt);
    out.lambda.resize(nt);
    for (int t = 0; t < nt; ++t) {
        const double g_da = schedule.g_da[t];
        const double g_pv = schedule.g_pv[t];
        const double g_dl = realized.g_dl[t];
        const int lam = recourse_indicator(g_da, g_pv, g_dl);
        const double shortfall = std::max(g_dl - g_da - g_pv, 0.0);
        const double g_rt = std::clamp(shortfall, bounds.g_rt_min, bounds.g_rt_max);
        const double surplus = g_da + g_pv - g_dl;

        out.lambda[t] = lam;
        out.g_rt[t] = lam ? g_rt : 0.0;
        out.cost_da[t] = prices.c_da[t] * g_da;
        out.cost_pv[t] = prices.c_pv[t] * g_pv;
        out.cost_rt[t] = lam * prices.c_rt[t] * g_rt;
        const double resale = (1 - lam) * prices.c_s[t] * surplus;
        out.cost_resale[t] = (sign == ResaleSign::paper) ? resale : -resale;
        out.total += out.cost_da[t] + out.cost_pv[t] + out.cost_rt[t] + out.cost_resale[t];
    }
    return out;
}

McEstimate expected_f1(const DayAheadSchedule& schedule, const PriceSchedule& prices,
                       const DemandSeries& demand, const GmmModel& error_model,
                       int n_samples, std::uint64_t seed, ResaleSign sign,
                       const PurchaseBounds& bounds) {
    if (n_samples < 100) throw InputError("expected_f1 needs at least 100 samples");
    const int nt = schedule.nt();
    if (prices.nt() != nt || demand.nt() != nt)
        throw InputError("schedule, prices and demand must share the horizon");

    double sum = 0.0, sum_sq = 0.0;
    DemandSeries realized = demand;
    const int n_blocks = (n_samples + kMcBlock - 1) / kMcBlock;
    int produced = 0;
    for (int b = 0; b < n_blocks; ++b) {
        RandomStream rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
        const int count = std::min(kMcBlock, n_samples - produced);
        for (int s = 0; s < count; ++s) {
            for (int t = 0; t < nt; ++t)
                realized.g_dl[t] = demand.g_dl[t] * (1.0 + error_model.sample(rng));
            const double f1 = evaluate_f1(schedule, prices, realized, sign, bounds).total;
            sum += f1;
            sum_sq += f1 * f1;
        }
        produced += count;
    }
    McEstimate est;
    est.n_samples = n_samples;
    est.mean = sum / n_samples;
    const double var = std::max(sum_sq / n_samples - est.mean * est.mean, 0.0);
    est.half_width = 1.96 * std::sqrt(var / n_samples);
    return est;
}

DayAheadSchedule build_schedule(const DemandSeries& demand, const GmmModel& error_model,
                                double alpha, const PurchaseBounds& bounds,
                                const PriceSchedule& prices, ResaleSign sign) {
    PurchaseResult purchase = deterministic_purchase(demand, error_model, alpha, bounds);
    const int nt = demand.nt();
    if (prices.nt() != nt) throw InputError("prices and demand must share the horizon");

    DayAheadSchedule s;
    s.g_da = std::move(purchase.g_da);
    s.g_pv = std::move(purchase.g_pv);
    s.clamped = std::move(purchase.clamped);
    s.alpha = alpha;
    s.lambda.resize(nt);
    s.expected_rt.resize(nt);
    for (int t = 0; t < nt; ++t) {
        s.lambda[t] = recourse_indicator(s.g_da[t], s.g_pv[t], demand.g_dl[t]);
        // E[(g_dl*(1+e) - supply)^+] with e mixture-distributed: exact via the
        // Gaussian partial expectation of each component.
        const double supply = s.g_da[t] + s.g_pv[t];
        double ert = 0.0;
        for (const GmmComponent& c : error_model.components()) {
            const double m = demand.g_dl[t] * (1.0 + c.mean);
            const double sd = demand.g_dl[t] * std::sqrt(c.var);
            ert += c.weight * expected_excess(m, sd, supply);
        }
        s.expected_rt[t] = ert;
    }
    s.f1 = evaluate_f1(s, prices, demand, sign, bounds).total;
    return s;
}

} // namespace feederplan
