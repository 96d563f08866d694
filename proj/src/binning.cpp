#include "flashce/binning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "flashce/math.hpp"

namespace flashce {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void BinBoundaries::require_valid() const {
    // An empty cut list is the degenerate single-bin partition (-inf, inf),
    // used by the estimation layer; the placement strategies all require M >= 2.
    for (std::size_t i = 0; i < cuts.size(); ++i) {
        if (!std::isfinite(cuts[i])) {
            throw std::invalid_argument("BinBoundaries: cuts must be finite");
        }
        if (i > 0 && !(cuts[i - 1] < cuts[i])) {
            throw std::invalid_argument("BinBoundaries: cuts must be strictly increasing");
        }
    }
}

std::pair<double, double> BinBoundaries::bin_edges(std::size_t i) const {
    const double lo = (i == 0) ? -kInf : cuts[i - 1];
    const double hi = (i == cuts.size()) ? kInf : cuts[i];
    return {lo, hi};
}

void to_json(nlohmann::json& j, const BinBoundaries& b) {
    j = nlohmann::json{{"cuts", b.cuts}, {"M", b.num_bins()}};
}

void from_json(const nlohmann::json& j, BinBoundaries& b) {
    j.at("cuts").get_to(b.cuts);
    if (j.contains("M") && j.at("M").get<std::size_t>() != b.num_bins()) {
        throw std::invalid_argument("BinBoundaries: M inconsistent with cuts length");
    }
    b.require_valid();
}

void Histogram::require_valid() const {
    const std::uint64_t sum = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    if (sum != total) {
        throw std::invalid_argument("Histogram: counts do not sum to total");
    }
}

std::string histogram_to_csv(const Histogram& h, const BinBoundaries& bins) {
    if (h.counts.size() != bins.num_bins()) {
        throw std::invalid_argument("histogram_to_csv: bin count mismatch");
    }
    std::ostringstream out;
    out.precision(17);
    out << "bin_index,lo,hi,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        const auto [lo, hi] = bins.bin_edges(i);
        out << i << ',' << lo << ',' << hi << ',' << h.counts[i] << '\n';
    }
    return out.str();
}

BinBoundaries equal_width_bins(double support_lo, double support_hi, std::size_t M) {
    if (M < 2) throw std::domain_error("equal_width_bins: M must be >= 2");
    if (!(support_lo < support_hi)) {
        throw std::domain_error("equal_width_bins: empty support");
    }
    BinBoundaries bins;
    bins.cuts.reserve(M - 1);
    const double width = (support_hi - support_lo) / static_cast<double>(M);
    for (std::size_t i = 1; i < M; ++i) {
        bins.cuts.push_back(support_lo + width * static_cast<double>(i));
    }
    return bins;
}

BinBoundaries equal_width_bins(const ChannelParams& params, const LevelLayout& layout,
                               std::size_t M) {
    const double lo = mixture_quantile(params, layout, 1e-4);
    const double hi = mixture_quantile(params, layout, 1.0 - 1e-4);
    return equal_width_bins(lo, hi, M);
}

BinBoundaries equal_probability_bins(const ChannelParams& params, const LevelLayout& layout,
                                     std::size_t M) {
    if (M < 2) throw std::domain_error("equal_probability_bins: M must be >= 2");
    BinBoundaries bins;
    bins.cuts.reserve(M - 1);
    for (std::size_t i = 1; i < M; ++i) {
        bins.cuts.push_back(
            mixture_quantile(params, layout, static_cast<double>(i) / static_cast<double>(M)));
    }
    bins.require_valid();
    return bins;
}

namespace {

// Per-level CDF table over the extended candidate grid (index 0 = -inf,
// 1..G = candidates, G+1 = +inf).
struct GridTables {
    std::vector<double> candidates;            // G finite cut positions
    std::vector<std::vector<double>> cdf;      // [level][extended index]
    std::vector<double> prior;                 // level priors N_k/N
};

GridTables build_grid(const ChannelParams& params, const LevelLayout& layout,
                      std::size_t grid_size) {
    GridTables t;
    const double lo = mixture_quantile(params, layout, 1e-6);
    const double hi = mixture_quantile(params, layout, 1.0 - 1e-6);
    t.candidates.resize(grid_size);
    for (std::size_t g = 0; g < grid_size; ++g) {
        t.candidates[g] = lo + (hi - lo) * static_cast<double>(g + 1) /
                                   static_cast<double>(grid_size + 1);
    }
    const double total = static_cast<double>(layout.total_cells());
    const double x0 = layout.erased_threshold();
    t.cdf.resize(layout.num_levels());
    t.prior.resize(layout.num_levels());
    for (std::size_t k = 0; k < layout.num_levels(); ++k) {
        t.prior[k] = static_cast<double>(layout.counts[k]) / total;
        auto& row = t.cdf[k];
        row.resize(grid_size + 2);
        row[0] = 0.0;
        row[grid_size + 1] = 1.0;
        for (std::size_t g = 0; g < grid_size; ++g) {
            row[g + 1] = conditional_cdf(params, layout.levels[k], x0, t.candidates[g]);
        }
    }
    return t;
}

// Mutual-information contribution (bits) of one bin spanning extended grid
// indices (i, j].
double bin_mi(const GridTables& t, std::size_t i, std::size_t j) {
    double pb = 0.0;
    double contrib = 0.0;
    const std::size_t L = t.prior.size();
    for (std::size_t k = 0; k < L; ++k) {
        pb += t.prior[k] * (t.cdf[k][j] - t.cdf[k][i]);
    }
    if (pb <= 0.0) return 0.0;
    for (std::size_t k = 0; k < L; ++k) {
        const double pxb = t.prior[k] * (t.cdf[k][j] - t.cdf[k][i]);
        if (pxb <= 0.0) continue;
        contrib += pxb * std::log2(pxb / (t.prior[k] * pb));
    }
    return contrib;
}

}  // namespace

BinBoundaries mmi_bins(const ChannelParams& params, const LevelLayout& layout,
                       std::size_t M, std::size_t grid_size) {
    if (M < 2) throw std::domain_error("mmi_bins: M must be >= 2");
    if (grid_size < 10 * M) {
        throw std::invalid_argument("mmi_bins: grid_size must be at least 10*M");
    }
    layout.require_valid();
    if (layout.num_levels() == 1) {
        // I(X;B) is identically zero; keep the equal-probability tie-break.
        return equal_probability_bins(params, layout, M);
    }

    const GridTables t = build_grid(params, layout, grid_size);
    const std::size_t G = grid_size;
    const std::size_t last = G + 1;  // extended index of +inf

    // dp[b][j]: best MI over the first b bins with the b-th cut at extended
    // index j. Cuts occupy indices 1..G.
    const double neg = -kInf;
    std::vector<std::vector<double>> dp(M, std::vector<double>(G + 2, neg));
    std::vector<std::vector<std::size_t>> back(M, std::vector<std::size_t>(G + 2, 0));
    for (std::size_t j = 1; j <= G; ++j) {
        dp[1][j] = bin_mi(t, 0, j);
    }
    for (std::size_t b = 2; b < M; ++b) {
        for (std::size_t j = b; j <= G; ++j) {
            double best = neg;
            std::size_t arg = 0;
            for (std::size_t i = b - 1; i < j; ++i) {
                if (dp[b - 1][i] == neg) continue;
                const double v = dp[b - 1][i] + bin_mi(t, i, j);
                if (v > best) {
                    best = v;
                    arg = i;
                }
            }
            dp[b][j] = best;
            back[b][j] = arg;
        }
    }
    double best = neg;
    std::size_t arg = 0;
    for (std::size_t j = M - 1; j <= G; ++j) {
        if (dp[M - 1][j] == neg) continue;
        const double v = dp[M - 1][j] + bin_mi(t, j, last);
        if (v > best) {
            best = v;
            arg = j;
        }
    }

    BinBoundaries bins;
    bins.cuts.resize(M - 1);
    std::size_t j = arg;
    for (std::size_t b = M - 1; b >= 1; --b) {
        bins.cuts[b - 1] = t.candidates[j - 1];
        j = back[b][j];
    }
    bins.require_valid();
    return bins;
}

double mutual_information(const ChannelParams& params, const LevelLayout& layout,
                          const BinBoundaries& bins) {
    bins.require_valid();
    layout.require_valid();
    const double total = static_cast<double>(layout.total_cells());
    const std::size_t L = layout.num_levels();
    const std::size_t M = bins.num_bins();
    double mi = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        const auto [lo, hi] = bins.bin_edges(i);
        double pb = 0.0;
        std::vector<double> pxb(L);
        for (std::size_t k = 0; k < L; ++k) {
            pxb[k] = static_cast<double>(layout.counts[k]) / total *
                     bin_probability(params, layout, k, lo, hi);
            pb += pxb[k];
        }
        if (pb <= 0.0) continue;
        for (std::size_t k = 0; k < L; ++k) {
            const double px = static_cast<double>(layout.counts[k]) / total;
            if (pxb[k] <= 0.0 || px <= 0.0) continue;
            mi += pxb[k] * std::log2(pxb[k] / (px * pb));
        }
    }
    return mi;
}

double discretization_error_impl(const std::function<double(double)>& pdf,
                                 std::span<const double> bin_probs,
                                 const BinBoundaries& bins,
                                 double trunc_lo, double trunc_hi) {
    bins.require_valid();
    if (bin_probs.size() != bins.num_bins()) {
        throw std::invalid_argument("discretization_error: bin probability length mismatch");
    }
    double de2 = 0.0;
    for (std::size_t i = 0; i < bins.num_bins(); ++i) {
        auto [lo, hi] = bins.bin_edges(i);
        if (lo == -kInf) lo = std::min(trunc_lo, hi);
        if (hi == kInf) hi = std::max(trunc_hi, lo);
        const double width = hi - lo;
        if (!(width > 0.0)) continue;
        const double density = bin_probs[i] / width;
        de2 += adaptive_simpson(
            [&](double y) {
                const double d = pdf(y) - density;
                return d * d;
            },
            lo, hi, 1e-10);
    }
    return de2;
}

double discretization_error(const ChannelParams& params, const LevelLayout& layout,
                            const BinBoundaries& bins) {
    bins.require_valid();
    std::vector<double> probs(bins.num_bins());
    for (std::size_t i = 0; i < bins.num_bins(); ++i) {
        const auto [lo, hi] = bins.bin_edges(i);
        probs[i] = mixture_cdf(params, layout, hi == kInf ? kInf : hi) -
                   mixture_cdf(params, layout, lo == -kInf ? -kInf : lo);
    }
    const double trunc_lo = mixture_quantile(params, layout, 1e-4);
    const double trunc_hi = mixture_quantile(params, layout, 1.0 - 1e-4);
    return discretization_error_impl(
        [&](double y) { return mixture_pdf(params, layout, y); }, probs, bins, trunc_lo,
        trunc_hi);
}

std::size_t effective_resolution(const ChannelParams& params, const LevelLayout& layout,
                                 const BinBoundaries& bins, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw std::domain_error("effective_resolution: threshold must lie in (0,1)");
    }
    bins.require_valid();
    std::size_t resolution = 0;
    bool in_low_run = false;
    for (std::size_t i = 0; i < bins.num_bins(); ++i) {
        const auto [lo, hi] = bins.bin_edges(i);
        const double p =
            mixture_cdf(params, layout, hi) - mixture_cdf(params, layout, lo);
        if (p < threshold) {
            if (!in_low_run) ++resolution;  // a merged run counts once
            in_low_run = true;
        } else {
            ++resolution;
            in_low_run = false;
        }
    }
    return resolution;
}

Histogram measure_histogram(std::span<const double> samples, const BinBoundaries& bins) {
    bins.require_valid();
    Histogram h;
    h.counts.assign(bins.num_bins(), 0);
    h.total = samples.size();
    for (double y : samples) {
        // bin i covers q_i < y <= q_{i+1}
        const auto it = std::lower_bound(bins.cuts.begin(), bins.cuts.end(), y);
        ++h.counts[static_cast<std::size_t>(it - bins.cuts.begin())];
    }
    return h;
}

}  // namespace flashce
