#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "flashce/channel.hpp"
#include "json.hpp"

namespace flashce {

/// Interior read-voltage cut points q_1 < ... < q_{M-1}.
/// q_0 = -inf and q_M = +inf are implicit, so M = cuts.size() + 1 bins.
struct BinBoundaries {
    std::vector<double> cuts;

    std::size_t num_bins() const { return cuts.size() + 1; }
    void require_valid() const;

    /// Edges of bin i including the implicit infinite ends.
    std::pair<double, double> bin_edges(std::size_t i) const;

    bool operator==(const BinBoundaries&) const = default;
};

void to_json(nlohmann::json& j, const BinBoundaries& b);
void from_json(const nlohmann::json& j, BinBoundaries& b);

/// Per-bin cell counts from a measurement.
struct Histogram {
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;

    void require_valid() const;
    bool operator==(const Histogram&) const = default;
};

std::string histogram_to_csv(const Histogram& h, const BinBoundaries& bins);

/// M-1 evenly spaced cuts across [support_lo, support_hi].
BinBoundaries equal_width_bins(double support_lo, double support_hi, std::size_t M);

/// Equal-width cuts with the support defaulted to the 1e-4 and 1-1e-4
/// mixture quantiles of the model distribution.
BinBoundaries equal_width_bins(const ChannelParams& params, const LevelLayout& layout,
                               std::size_t M);

/// Cuts at the i/M quantiles of the model mixture distribution.
BinBoundaries equal_probability_bins(const ChannelParams& params, const LevelLayout& layout,
                                     std::size_t M);

/// Cuts maximizing the mutual information between the stored level and the
/// observed bin index, exact over a uniform candidate grid (contiguous-quantizer
/// dynamic program). Degenerate single-level layouts fall back to
/// equal-probability cuts.
BinBoundaries mmi_bins(const ChannelParams& params, const LevelLayout& layout,
                       std::size_t M, std::size_t grid_size = 2000);

/// I(X;B) in bits for the given boundaries under the model.
double mutual_information(const ChannelParams& params, const LevelLayout& layout,
                          const BinBoundaries& bins);

/// Squared L2 distance between the mixture density and its histogram-density
/// approximation. Semi-infinite edge bins are truncated at the 1e-4 and
/// 1-1e-4 mixture quantiles (the same quantiles that bound the default
/// equal-width support).
double discretization_error(const ChannelParams& params, const LevelLayout& layout,
                            const BinBoundaries& bins);

/// Generic core of the metric, used directly by tests: pdf and per-bin
/// probabilities are supplied rather than derived from a channel model.
double discretization_error_impl(const std::function<double(double)>& pdf,
                                 std::span<const double> bin_probs,
                                 const BinBoundaries& bins,
                                 double trunc_lo, double trunc_hi);

/// Bin count after merging each maximal run of adjacent bins whose induced
/// probability falls below the threshold.
std::size_t effective_resolution(const ChannelParams& params, const LevelLayout& layout,
                                 const BinBoundaries& bins, double threshold = 1e-4);

/// Bin the measured thresholds: counts[i] = #{y : q_i < y <= q_{i+1}}.
Histogram measure_histogram(std::span<const double> samples, const BinBoundaries& bins);

}  // namespace flashce
