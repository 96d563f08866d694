#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace flashce {

/// The five level-independent read-channel parameters.
struct ChannelParams {
    double lambda = 0.0;         // wear-out exponential scale (volts)
    double sigma_p = 0.0;        // programmed-state programming-noise std (volts)
    double sigma_e = 0.0;        // erased-state programming-noise std (volts)
    double gamma_sigma_r = 0.0;  // retention-spread coefficient (volts^(1/2) scaled)
    double gamma_mu_r = 0.0;     // retention-shift coefficient (dimensionless)

    /// Hard validity: strictly positive scales, non-negative retention spread.
    bool is_valid() const;
    /// Throws std::invalid_argument when is_valid() is false.
    void require_valid() const;
    /// Soft advisories (sigma_e <= sigma_p, positive gamma_mu_r). Empty when clean.
    std::vector<std::string> warnings() const;

    std::array<double, 5> to_array() const {
        return {lambda, sigma_p, sigma_e, gamma_sigma_r, gamma_mu_r};
    }
    static ChannelParams from_array(const std::array<double, 5>& a) {
        return {a[0], a[1], a[2], a[3], a[4]};
    }

    bool operator==(const ChannelParams&) const = default;
};

void to_json(nlohmann::json& j, const ChannelParams& p);
void from_json(const nlohmann::json& j, ChannelParams& p);

/// Intended threshold voltages and per-level cell counts.
/// levels[0] is the erased-state threshold x0.
struct LevelLayout {
    std::vector<double> levels;
    std::vector<std::uint64_t> counts;

    std::size_t num_levels() const { return levels.size(); }
    double erased_threshold() const { return levels.front(); }
    std::uint64_t total_cells() const;
    void require_valid() const;

    /// 4 levels at {0,1,2,3} V with equal counts per level.
    static LevelLayout default_mlc(std::uint64_t cells_per_level = 250000);

    bool operator==(const LevelLayout&) const = default;
};

void to_json(nlohmann::json& j, const LevelLayout& l);
void from_json(const nlohmann::json& j, LevelLayout& l);

/// Level-dependent noise summary: retention mean shift and combined Gaussian std.
struct LevelNoiseSpec {
    double mu_r = 0.0;     // retention mean shift (volts)
    double sigma_r = 0.0;  // retention spread (volts)
    double sigma = 0.0;    // combined programming+retention Gaussian std (volts)
};

/// Retention shift/spread and combined Gaussian std at intended threshold x.
/// The erased state (x == x0) carries sigma_e and no retention loss.
LevelNoiseSpec level_noise(const ChannelParams& params, double x, double x0);

/// Conditional read density f(y|x): Gaussian (programming + retention) convolved
/// with the one-sided exponential wear-out tail. Evaluated in a stabilized
/// erfcx-based form; finite and non-negative for any finite y.
double conditional_pdf(const ChannelParams& params, double x, double x0, double y);

/// Closed-form CDF of the conditional read distribution.
double conditional_cdf(const ChannelParams& params, double x, double x0, double y);

/// P(q_lo < y <= q_hi | level k). Bounds may be +-infinity.
double bin_probability(const ChannelParams& params, const LevelLayout& layout,
                       std::size_t level_index, double q_lo, double q_hi);

/// Count-weighted aggregate read density sum_k (N_k/N) f(y|x_k).
double mixture_pdf(const ChannelParams& params, const LevelLayout& layout, double y);

/// Count-weighted aggregate CDF.
double mixture_cdf(const ChannelParams& params, const LevelLayout& layout, double y);

/// Inverse of mixture_cdf by bracketed bisection. p in (0,1).
double mixture_quantile(const ChannelParams& params, const LevelLayout& layout, double p);

struct Read {
    std::uint32_t level_index;
    double y;
};

/// Draw one read per cell in the layout: y = x_k + n_p + n_w + n_r.
/// Deterministic for a given seed.
std::vector<Read> sample_reads(const ChannelParams& params, const LevelLayout& layout,
                               std::uint64_t seed);

}  // namespace flashce
