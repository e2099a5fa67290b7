#include "feederplan/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "feederplan/errors.hpp"
#include "feederplan/rng.hpp"
#include "feederplan/textio.hpp"

namespace feederplan {

namespace {

constexpr double kLog2Pi = 1.8378770664093453; // log(2*pi)

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / M_SQRT2);
}

double component_log_pdf(double x, const GmmComponent& c) {
    const double d = x - c.mean;
    return -0.5 * (kLog2Pi + std::log(c.var)) - 0.5 * d * d / c.var;
}

} // namespace

GmmModel::GmmModel(std::vector<GmmComponent> components) : comps_(std::move(components)) {
    if (comps_.empty()) throw ValidationError("mixture needs at least one component");
    double wsum = 0.0;
    for (const GmmComponent& c : comps_) {
        if (c.weight < 0.0) throw ValidationError("mixture weight must be >= 0");
        if (!(c.var >= kVarianceFloor))
            throw ValidationError("mixture variance below floor");
        if (!std::isfinite(c.mean)) throw ValidationError("mixture mean must be finite");
        wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-12)
        throw ValidationError("mixture weights must sum to 1 within 1e-12");
}

GmmModel GmmModel::single(double mean, double var) {
    return GmmModel({{1.0, mean, std::max(var, kVarianceFloor)}});
}

double GmmModel::pdf(double t) const {
    double s = 0.0;
    for (const GmmComponent& c : comps_) s += c.weight * std::exp(component_log_pdf(t, c));
    return s;
}

double GmmModel::mean() const {
    double m = 0.0;
    for (const GmmComponent& c : comps_) m += c.weight * c.mean;
    return m;
}

double GmmModel::variance() const {
    const double m = mean();
    double v = 0.0;
    for (const GmmComponent& c : comps_) v += c.weight * (c.var + (c.mean - m) * (c.mean - m));
    return v;
}

GmmModel GmmModel::affine(double scale, double shift) const {
    std::vector<GmmComponent> out;
    out.reserve(comps_.size());
    for (const GmmComponent& c : comps_)
        out.push_back({c.weight, scale * c.mean + shift,
                       std::max(scale * scale * c.var, kVarianceFloor)});
    return GmmModel(std::move(out));
}

double GmmModel::sample(RandomStream& rng) const {
    const double u = rng.uniform01();
    double acc = 0.0;
    size_t pick = comps_.size() - 1;
    for (size_t i = 0; i < comps_.size(); ++i) {
        acc += comps_[i].weight;
        if (u < acc) {
            pick = i;
            break;
        }
    }
    const GmmComponent& c = comps_[pick];
    return rng.normal(c.mean, std::sqrt(c.var));
}

EmFit em_fit(std::span<const double> data, int n_components, std::uint64_t seed) {
    const size_t q = data.size();
    if (n_components < 1) throw FitError("n_components must be >= 1");
    if (q < 2) throw FitError("need at least 2 samples to fit");
    if (q < static_cast<size_t>(n_components))
        throw FitError("sample count " + std::to_string(q) + " below component count " +
                       std::to_string(n_components));
    for (double v : data)
        if (!std::isfinite(v)) throw FitError("non-finite sample in error data");

    std::vector<double> sorted(data.begin(), data.end());
    std::sort(sorted.begin(), sorted.end());

    const double sample_mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / double(q);
    double pooled_var = 0.0;
    for (double v : sorted) pooled_var += (v - sample_mean) * (v - sample_mean);
    pooled_var /= double(q);

    if (pooled_var <= 0.0 && n_components > 1)
        throw FitError("degenerate data: all samples identical, cannot fit " +
                       std::to_string(n_components) + " components");
    pooled_var = std::max(pooled_var, GmmModel::kVarianceFloor);

    // Quantile-spaced seeding; jitter only if seeds collide.
    const int n = n_components;
    std::vector<GmmComponent> comps(n);
    for (int j = 0; j < n; ++j) {
        const double p = (j + 0.5) / n;
        const size_t idx = std::min(q - 1, static_cast<size_t>(p * double(q)));
        comps[j] = {1.0 / n, sorted[idx], pooled_var};
    }
    bool collision = false;
    for (int j = 1; j < n; ++j)
        if (comps[j].mean == comps[j - 1].mean) collision = true;
    if (collision) {
        RandomStream rng(seed);
        const double spread = std::sqrt(pooled_var);
        for (int j = 0; j < n; ++j) comps[j].mean += 1e-3 * spread * rng.normal();
    }

    constexpr double kTol = 1e-8;
    constexpr int kMaxIter = 500;

    std::vector<double> log_resp(q * n);
    std::vector<double> resp(q * n);
    EmFit fit;
    double prev_ll = -std::numeric_limits<double>::infinity();

    for (int iter = 1; iter <= kMaxIter; ++iter) {
        // E-step with log-sum-exp.
        double ll = 0.0;
        for (size_t i = 0; i < q; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j) {
                const double lw = comps[j].weight > 0.0 ? std::log(comps[j].weight)
                                                        : -std::numeric_limits<double>::infinity();
                log_resp[i * n + j] = lw + component_log_pdf(data[i], comps[j]);
                mx = std::max(mx, log_resp[i * n + j]);
            }
            double sum = 0.0;
            for (int j = 0; j < n; ++j) sum += std::exp(log_resp[i * n + j] - mx);
            const double lse = mx + std::log(sum);
            ll += lse;
            for (int j = 0; j < n; ++j) resp[i * n + j] = std::exp(log_resp[i * n + j] - lse);
        }
        fit.loglik_trace.push_back(ll);
        fit.iterations = iter;

        // M-step.
        for (int j = 0; j < n; ++j) {
            double rsum = 0.0, mean = 0.0;
            for (size_t i = 0; i < q; ++i) {
                rsum += resp[i * n + j];
                mean += resp[i * n + j] * data[i];
            }
            if (rsum < 1e-300) {
                // Collapsed component: park it at the sample mean with pooled
                // spread; weight stays ~0 and the next E-step keeps it inert.
                comps[j] = {0.0, sample_mean, pooled_var};
                continue;
            }
            mean /= rsum;
            double var = 0.0;
            for (size_t i = 0; i < q; ++i)
                var += resp[i * n + j] * (data[i] - mean) * (data[i] - mean);
            var = std::max(var / rsum, GmmModel::kVarianceFloor);
            comps[j] = {rsum / double(q), mean, var};
        }

        if (std::abs(ll - prev_ll) < kTol) break;
        prev_ll = ll;
    }

    // Weights can drift off 1 by rounding; renormalize before the invariant check.
    double wsum = 0.0;
    for (const GmmComponent& c : comps) wsum += c.weight;
    for (GmmComponent& c : comps) c.weight /= wsum;

    fit.model = GmmModel(std::move(comps));
    fit.log_likelihood = fit.loglik_trace.back();
    return fit;
}

double mdl_score(double log_likelihood, int n_components, std::size_t sample_count) {
    const double k = 3.0 * n_components - 1.0;
    return -log_likelihood + 0.5 * k * std::log(static_cast<double>(sample_count));
}

GmmModel mdl_select(std::span<const double> data, int n_max, std::uint64_t seed,
                    std::vector<double>* scores_out) {
    if (n_max < 1) throw FitError("n_max must be >= 1");
    if (scores_out) scores_out->clear();
    GmmModel best;
    double best_score = std::numeric_limits<double>::infinity();
    for (int n = 1; n <= n_max; ++n) {
        const EmFit fit = em_fit(data, n, derive_seed(seed, n));
        const double score = mdl_score(fit.log_likelihood, n, data.size());
        if (scores_out) scores_out->push_back(score);
        if (score < best_score) {
            best_score = score;
            best = fit.model;
        }
    }
    return best;
}

double mixture_cdf(const GmmModel& model, double t) {
    if (!std::isfinite(t)) throw InputError("mixture_cdf requires finite t");
    double s = 0.0;
    for (const GmmComponent& c : model.components())
        s += c.weight * normal_cdf((t - c.mean) / std::sqrt(c.var));
    return s;
}

double mixture_quantile(const GmmModel& model, double p) {
    if (!(p > 0.0 && p < 1.0))
        throw InputError("quantile probability must lie in (0, 1)");

    double mu_min = std::numeric_limits<double>::infinity();
    double mu_max = -std::numeric_limits<double>::infinity();
    double sigma_max = 0.0;
    for (const GmmComponent& c : model.components()) {
        mu_min = std::min(mu_min, c.mean);
        mu_max = std::max(mu_max, c.mean);
        sigma_max = std::max(sigma_max, std::sqrt(c.var));
    }
    double lo = mu_min - 10.0 * sigma_max;
    double hi = mu_max + 10.0 * sigma_max;
    double width = std::max(hi - lo, 1e-12);
    while (mixture_cdf(model, lo) > p) {
        lo -= width;
        width *= 2.0;
    }
    while (mixture_cdf(model, hi) < p) {
        hi += width;
        width *= 2.0;
    }

    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double c = mixture_cdf(model, mid);
        if (std::abs(c - p) <= 1e-12) return mid;
        (c < p ? lo : hi) = mid;
        if (hi - lo < 1e-13 * std::max(1.0, std::abs(mid))) break;
    }
    return 0.5 * (lo + hi);
}

std::string serialize_gmm(const GmmModel& model) {
    std::ostringstream out;
    int n = 0;
    for (const GmmComponent& c : model.components()) {
        out << "component " << ++n << " weight=" << fmt_double(c.weight)
            << " mean=" << fmt_double(c.mean) << " var=" << fmt_double(c.var) << "\n";
    }
    return out.str();
}

GmmModel parse_gmm(const std::string& text) {
    std::vector<GmmComponent> comps;
    int lineno = 0;
    for (const std::string& raw : split(text, '\n')) {
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const std::vector<std::string> tokens = split_ws(line);
        if (tokens.size() != 5 || tokens[0] != "component")
            throw ParseError("line " + std::to_string(lineno) + ": expected component record");
        GmmComponent c;
        for (size_t i = 2; i < tokens.size(); ++i) {
            const size_t eq = tokens[i].find('=');
            if (eq == std::string::npos)
                throw ParseError("line " + std::to_string(lineno) + ": expected key=value");
            const std::string key = tokens[i].substr(0, eq);
            double v = 0.0;
            if (!parse_double(tokens[i].substr(eq + 1), v))
                throw ParseError("line " + std::to_string(lineno) + ": bad value for " + key);
            if (key == "weight")
                c.weight = v;
            else if (key == "mean")
                c.mean = v;
            else if (key == "var")
                c.var = v;
            else
                throw ParseError("line " + std::to_string(lineno) + ": unknown field '" + key + "'");
        }
        comps.push_back(c);
    }
    if (comps.empty()) throw ParseError("no component records");
    return GmmModel(std::move(comps));
}

std::vector<double> load_error_history_csv(const std::string& text) {
    const CsvTable t = parse_csv(text);
    const int cf = t.column("forecast");
    const int ca = t.column("actual");
    if (t.column("timestamp") < 0 || cf < 0 || ca < 0)
        throw ParseError("error history CSV must have header timestamp,forecast,actual");
    std::vector<double> errors;
    errors.reserve(t.rows.size());
    for (size_t i = 0; i < t.rows.size(); ++i) {
        double f = 0.0, a = 0.0;
        if (!parse_double(t.rows[i][cf], f) || !parse_double(t.rows[i][ca], a))
            throw ParseError("error history row " + std::to_string(i + 1) + ": bad numeric value");
        if (f == 0.0)
            throw ParseError("error history row " + std::to_string(i + 1) +
                             ": zero forecast, fractional error undefined");
        errors.push_back((a - f) / f);
    }
    return errors;
}

} // namespace feederplan
