#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace feederplan {

class RandomStream;

struct GmmComponent {
    double weight = 0.0;
    double mean = 0.0;
    double var = 0.0;
};

// 1-D finite Gaussian mixture over fractional forecast errors.
class GmmModel {
public:
    // Guard against singular components during EM.
    static constexpr double kVarianceFloor = 1e-10;

    GmmModel() = default;
    // Normalizes nothing; throws ValidationError unless weights sum to 1
    // within 1e-12, each weight >= 0 and each variance >= the floor.
    explicit GmmModel(std::vector<GmmComponent> components);

    static GmmModel single(double mean, double var);
    // Point mass, represented as a floor-variance Gaussian.
    static GmmModel point_mass(double value) { return single(value, kVarianceFloor); }

    const std::vector<GmmComponent>& components() const { return comps_; }
    int n_components() const { return static_cast<int>(comps_.size()); }

    double pdf(double t) const;
    double mean() const;     // sum of w_n * mu_n
    double variance() const; // law of total variance

    // Affine transform of the underlying variable: if e ~ this model,
    // returns the model of scale * e + shift.
    GmmModel affine(double scale, double shift) const;

    double sample(RandomStream& rng) const;

private:
    std::vector<GmmComponent> comps_;
};

struct EmFit {
    GmmModel model;
    double log_likelihood = 0.0;
    int iterations = 0;
    std::vector<double> loglik_trace; // one entry per EM iteration
};

// Fits an N-component mixture by expectation-maximization. Initial means sit
// on evenly spaced sample quantiles, weights uniform, variances pooled; the
// seed only breaks ties when quantile seeding collides. Stops when the
// log-likelihood improves by less than 1e-8 or after 500 iterations.
EmFit em_fit(std::span<const double> data, int n_components, std::uint64_t seed);

// Description length: -logL + (k_N / 2) ln(q) with k_N = 3N - 1 free
// parameters and q the sample count.
double mdl_score(double log_likelihood, int n_components, std::size_t sample_count);

// Fits N = 1..n_max and returns the model with minimal description length
// (smallest N wins ties). Optionally reports the per-N scores.
GmmModel mdl_select(std::span<const double> data, int n_max, std::uint64_t seed,
                    std::vector<double>* scores_out = nullptr);

// P(e <= t). Monotone nondecreasing with limits 0 and 1.
double mixture_cdf(const GmmModel& model, double t);

// Inverse CDF by bisection on [min mu - 10 max sigma, max mu + 10 max sigma],
// widened until it brackets p. Throws on p outside (0, 1).
double mixture_quantile(const GmmModel& model, double p);

// Text form: one `component <n> weight=<w> mean=<m> var=<v>` line each.
std::string serialize_gmm(const GmmModel& model);
GmmModel parse_gmm(const std::string& text);

// Reads `timestamp,forecast,actual` CSV rows into fractional errors
// (actual - forecast) / forecast. Rows with zero forecast are rejected.
std::vector<double> load_error_history_csv(const std::string& text);

} // namespace feederplan
