#pragma once

#include <array>
#include <optional>
#include <vector>

#include "flashce/binning.hpp"
#include "flashce/channel.hpp"
#include "json.hpp"

namespace flashce {

/// Everything a solver needs besides the parameter iterate: the reference
/// histogram (real-valued so analytic expected counts fit too), the bin
/// boundaries it was measured with, and the known level layout.
struct CostContext {
    std::vector<double> reference;  // per-bin reference cell counts
    BinBoundaries bins;
    LevelLayout layout;

    double total() const;
    void require_valid() const;

    static CostContext from_histogram(const Histogram& h, BinBoundaries bins,
                                      LevelLayout layout);
    /// Noise-free reference: expected counts under `truth`.
    static CostContext analytic(const ChannelParams& truth, BinBoundaries bins,
                                LevelLayout layout);
};

struct SolverConfig {
    double eta = 1e-9;            // stop when the parameter-step norm drops below this
    int max_iterations = 500;
    double gd_step = 1e-2;        // GD step size beta
    double lm_beta0 = 30.0;       // initial LM damping
    double lm_v = 0.25;           // LM damping factor, in (0,1)
    double fd_step_rel = 1e-5;    // relative finite-difference step
    double fd_step_abs = 1e-9;
    bool lm_literal_jacobian_refresh = false;  // recompute J every loop regardless of accept

    void require_valid() const;
};

void to_json(nlohmann::json& j, const SolverConfig& c);
void from_json(const nlohmann::json& j, SolverConfig& c);

struct SolverReport {
    ChannelParams estimate;
    int iterations = 0;
    std::vector<double> cost_trace;   // cost at the start plus after each iteration
    std::vector<double> step_trace;   // applied parameter-step norms
    bool converged_by_step = false;
    std::optional<bool> within_one_percent;  // set when ground truth is supplied
    int clamp_events = 0;             // iterates pushed back into the valid region
    bool rank_deficient = false;      // GN saw a rank-deficient Jacobian

    double final_cost() const { return cost_trace.back(); }
};

void to_json(nlohmann::json& j, const SolverReport& r);

/// Expected per-bin cell counts under `params` (Eq. 10 shape): length M,
/// summing to the layout total.
std::vector<double> estimated_bin_counts(const ChannelParams& params, const CostContext& ctx);

/// Normalized squared Euclidean distance between estimated and reference histograms.
double cost(const ChannelParams& params, const CostContext& ctx);

/// G_i = (estimated_i - reference_i) / N, so cost == ||G||^2.
std::vector<double> residual_vector(const ChannelParams& params, const CostContext& ctx);

/// M x 5 Jacobian of the residual vector by central finite differences
/// (one-sided at validity boundaries). Row-major.
std::vector<std::array<double, 5>> jacobian(const ChannelParams& params, const CostContext& ctx,
                                            const SolverConfig& config = {});

/// Gradient of the cost: 2 J^T G.
std::array<double, 5> cost_gradient(const ChannelParams& params, const CostContext& ctx,
                                    const SolverConfig& config = {});

SolverReport solve_gd(const CostContext& ctx, const ChannelParams& init,
                      const SolverConfig& config = {});
SolverReport solve_gn(const CostContext& ctx, const ChannelParams& init,
                      const SolverConfig& config = {});
SolverReport solve_lm(const CostContext& ctx, const ChannelParams& init,
                      const SolverConfig& config = {});

/// Single LM/GN trial steps, exposed for cross-checking the two methods.
std::array<double, 5> gn_step(const ChannelParams& params, const CostContext& ctx,
                              const SolverConfig& config = {});
std::array<double, 5> lm_step(const ChannelParams& params, const CostContext& ctx,
                              double beta, const SolverConfig& config = {});

/// True iff every component of `estimate` is within +-1% of `truth`.
/// Relative criterion; zero truth components are rejected.
bool check_convergence(const ChannelParams& estimate, const ChannelParams& truth,
                       double rel_tol = 0.01);

}  // namespace flashce
