#include "flashce/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "flashce/math.hpp"

namespace flashce {

bool ChannelParams::is_valid() const {
    return std::isfinite(lambda) && std::isfinite(sigma_p) && std::isfinite(sigma_e) &&
           std::isfinite(gamma_sigma_r) && std::isfinite(gamma_mu_r) && lambda > 0.0 &&
           sigma_p > 0.0 && sigma_e > 0.0 && gamma_sigma_r >= 0.0;
}

void ChannelParams::require_valid() const {
    if (!is_valid()) {
        throw std::invalid_argument(
            "ChannelParams: lambda, sigma_p, sigma_e must be > 0 and gamma_sigma_r >= 0");
    }
}

std::vector<std::string> ChannelParams::warnings() const {
    std::vector<std::string> w;
    if (sigma_e <= sigma_p) {
        w.push_back("sigma_e <= sigma_p: erased-state spread should exceed programmed-state spread");
    }
    if (gamma_mu_r > 0.0) {
        w.push_back("gamma_mu_r > 0: retention normally shifts programmed thresholds downward");
    }
    return w;
}

void to_json(nlohmann::json& j, const ChannelParams& p) {
    j = nlohmann::json{{"lambda", p.lambda},
                       {"sigma_p", p.sigma_p},
                       {"sigma_e", p.sigma_e},
                       {"gamma_sigma_r", p.gamma_sigma_r},
                       {"gamma_mu_r", p.gamma_mu_r}};
}

void from_json(const nlohmann::json& j, ChannelParams& p) {
    j.at("lambda").get_to(p.lambda);
    j.at("sigma_p").get_to(p.sigma_p);
    j.at("sigma_e").get_to(p.sigma_e);
    j.at("gamma_sigma_r").get_to(p.gamma_sigma_r);
    j.at("gamma_mu_r").get_to(p.gamma_mu_r);
}

std::uint64_t LevelLayout::total_cells() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

void LevelLayout::require_valid() const {
    if (levels.empty() || levels.size() != counts.size()) {
        throw std::invalid_argument("LevelLayout: levels and counts must be non-empty and equal-length");
    }
    if (!std::is_sorted(levels.begin(), levels.end(),
                        [](double a, double b) { return a <= b; })) {
        throw std::invalid_argument("LevelLayout: levels must be strictly increasing");
    }
}

LevelLayout LevelLayout::default_mlc(std::uint64_t cells_per_level) {
    return {{0.0, 1.0, 2.0, 3.0},
            {cells_per_level, cells_per_level, cells_per_level, cells_per_level}};
}

void to_json(nlohmann::json& j, const LevelLayout& l) {
    j = nlohmann::json{{"levels", l.levels}, {"counts", l.counts}};
}

void from_json(const nlohmann::json& j, LevelLayout& l) {
    j.at("levels").get_to(l.levels);
    j.at("counts").get_to(l.counts);
}

LevelNoiseSpec level_noise(const ChannelParams& params, double x, double x0) {
    params.require_valid();
    if (x < x0) {
        throw std::domain_error("level_noise: x below the erased threshold x0");
    }
    LevelNoiseSpec spec;
    if (x == x0) {
        // Erased state: no retention loss, wider programming spread.
        spec.mu_r = 0.0;
        spec.sigma_r = 0.0;
        spec.sigma = params.sigma_e;
        return spec;
    }
    spec.mu_r = params.gamma_mu_r * (x - x0);
    spec.sigma_r = params.gamma_sigma_r * std::sqrt(x - x0);
    spec.sigma = std::sqrt(params.sigma_p * params.sigma_p + spec.sigma_r * spec.sigma_r);
    return spec;
}

namespace {

// Shared core for the pdf and the CDF tail term. Both need
// exp(u/lambda + sigma^2/(2 lambda^2)) * Q(u/sigma + sigma/lambda) with
// u = mu_r + x - y, which overflows as printed for small lambda. For
// t = u/sigma + sigma/lambda >= 0 the exponent collapses against the erfcx
// scaling to -u^2/(2 sigma^2); for t < 0 the plain exponent is itself
// bounded above by -sigma^2/(2 lambda^2) so direct evaluation is safe.
double exp_q_product(double u, double sigma, double lambda) {
    const double t = u / sigma + sigma / lambda;
    if (t >= 0.0) {
        return 0.5 * erfcx(t / kSqrt2) * std::exp(-u * u / (2.0 * sigma * sigma));
    }
    return std::exp(u / lambda + sigma * sigma / (2.0 * lambda * lambda)) * normal_tail(t);
}

}  // namespace

double conditional_pdf(const ChannelParams& params, double x, double x0, double y) {
    const LevelNoiseSpec ns = level_noise(params, x, x0);
    const double u = ns.mu_r + x - y;
    return exp_q_product(u, ns.sigma, params.lambda) / params.lambda;
}

double conditional_cdf(const ChannelParams& params, double x, double x0, double y) {
    if (y == std::numeric_limits<double>::infinity()) return 1.0;
    if (y == -std::numeric_limits<double>::infinity()) return 0.0;
    const LevelNoiseSpec ns = level_noise(params, x, x0);
    const double u = ns.mu_r + x - y;  // = (gaussian mean) - y
    const double gauss_term = normal_cdf(-u / ns.sigma);
    const double cdf = gauss_term - exp_q_product(u, ns.sigma, params.lambda);
    return std::clamp(cdf, 0.0, 1.0);
}

double bin_probability(const ChannelParams& params, const LevelLayout& layout,
                       std::size_t level_index, double q_lo, double q_hi) {
    layout.require_valid();
    if (level_index >= layout.num_levels()) {
        throw std::out_of_range("bin_probability: level_index out of range");
    }
    if (!(q_lo < q_hi)) {
        throw std::domain_error("bin_probability: reversed or degenerate bounds");
    }
    const double x = layout.levels[level_index];
    const double x0 = layout.erased_threshold();
    const double p = conditional_cdf(params, x, x0, q_hi) - conditional_cdf(params, x, x0, q_lo);
    return std::max(p, 0.0);
}

double mixture_pdf(const ChannelParams& params, const LevelLayout& layout, double y) {
    layout.require_valid();
    const double total = static_cast<double>(layout.total_cells());
    if (total <= 0.0) throw std::domain_error("mixture_pdf: layout has no cells");
    const double x0 = layout.erased_threshold();
    double f = 0.0;
    for (std::size_t k = 0; k < layout.num_levels(); ++k) {
        if (layout.counts[k] == 0) continue;
        f += static_cast<double>(layout.counts[k]) / total *
             conditional_pdf(params, layout.levels[k], x0, y);
    }
    return f;
}

double mixture_cdf(const ChannelParams& params, const LevelLayout& layout, double y) {
    layout.require_valid();
    const double total = static_cast<double>(layout.total_cells());
    if (total <= 0.0) throw std::domain_error("mixture_cdf: layout has no cells");
    const double x0 = layout.erased_threshold();
    double f = 0.0;
    for (std::size_t k = 0; k < layout.num_levels(); ++k) {
        if (layout.counts[k] == 0) continue;
        f += static_cast<double>(layout.counts[k]) / total *
             conditional_cdf(params, layout.levels[k], x0, y);
    }
    return f;
}

double mixture_quantile(const ChannelParams& params, const LevelLayout& layout, double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("mixture_quantile: p must lie strictly inside (0,1)");
    }
    params.require_valid();
    layout.require_valid();

    // Initial bracket around the extreme level means, then expand until it
    // encloses the target mass.
    const double x0 = layout.erased_threshold();
    double mean_lo = std::numeric_limits<double>::infinity();
    double mean_hi = -std::numeric_limits<double>::infinity();
    double scale = 0.0;
    for (double x : layout.levels) {
        const LevelNoiseSpec ns = level_noise(params, x, x0);
        mean_lo = std::min(mean_lo, x + ns.mu_r);
        mean_hi = std::max(mean_hi, x + ns.mu_r + params.lambda);
        scale = std::max(scale, ns.sigma + params.lambda);
    }
    double lo = mean_lo - 10.0 * scale - 1.0;
    double hi = mean_hi + 10.0 * scale + 1.0;
    for (int i = 0; i < 200 && mixture_cdf(params, layout, lo) > p; ++i) {
        lo -= 2.0 * (scale + 1.0);
    }
    for (int i = 0; i < 200 && mixture_cdf(params, layout, hi) < p; ++i) {
        hi += 2.0 * (scale + 1.0);
    }
    if (mixture_cdf(params, layout, lo) > p || mixture_cdf(params, layout, hi) < p) {
        throw std::runtime_error("mixture_quantile: failed to bracket target probability");
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (mixture_cdf(params, layout, mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

std::vector<Read> sample_reads(const ChannelParams& params, const LevelLayout& layout,
                               std::uint64_t seed) {
    params.require_valid();
    layout.require_valid();
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> unit_normal(0.0, 1.0);
    std::exponential_distribution<double> wear(1.0 / params.lambda);

    std::vector<Read> reads;
    reads.reserve(layout.total_cells());
    const double x0 = layout.erased_threshold();
    for (std::size_t k = 0; k < layout.num_levels(); ++k) {
        const double x = layout.levels[k];
        const LevelNoiseSpec ns = level_noise(params, x, x0);
        const double sigma_prog = (x == x0) ? params.sigma_e : params.sigma_p;
        for (std::uint64_t c = 0; c < layout.counts[k]; ++c) {
            const double n_p = sigma_prog * unit_normal(gen);
            const double n_w = wear(gen);
            const double n_r = ns.mu_r + ns.sigma_r * unit_normal(gen);
            reads.push_back({static_cast<std::uint32_t>(k), x + n_p + n_w + n_r});
        }
    }
    return reads;
}

}  // namespace flashce
