#include "flashce/estimation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace flashce {

namespace {

constexpr double kScaleFloor = 1e-9;  // lower bound for lambda, sigma_p, sigma_e

// Per-component lower bounds of the valid parameter region.
constexpr std::array<double, 5> kLowerBounds = {kScaleFloor, kScaleFloor, kScaleFloor, 0.0,
                                                -std::numeric_limits<double>::infinity()};

// Clamp an iterate back into the valid region; returns true when anything moved.
bool clamp_params(std::array<double, 5>& a) {
    bool clamped = false;
    for (std::size_t j = 0; j < 5; ++j) {
        if (a[j] < kLowerBounds[j]) {
            a[j] = kLowerBounds[j];
            clamped = true;
        }
    }
    return clamped;
}

double norm(const std::array<double, 5>& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

Eigen::MatrixXd to_eigen(const std::vector<std::array<double, 5>>& j) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), 5);
    for (std::size_t r = 0; r < j.size(); ++r) {
        for (std::size_t c = 0; c < 5; ++c) m(static_cast<Eigen::Index>(r), c) = j[r][c];
    }
    return m;
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

double CostContext::total() const {
    return std::accumulate(reference.begin(), reference.end(), 0.0);
}

void CostContext::require_valid() const {
    bins.require_valid();
    layout.require_valid();
    if (reference.size() != bins.num_bins()) {
        throw std::invalid_argument("CostContext: reference length must equal bin count");
    }
    const double n_layout = static_cast<double>(layout.total_cells());
    if (std::abs(total() - n_layout) > 1e-6 * std::max(1.0, n_layout)) {
        throw std::invalid_argument("CostContext: reference total must match layout cell count");
    }
}

CostContext CostContext::from_histogram(const Histogram& h, BinBoundaries bins,
                                        LevelLayout layout) {
    h.require_valid();
    CostContext ctx;
    ctx.reference.assign(h.counts.begin(), h.counts.end());
    ctx.bins = std::move(bins);
    ctx.layout = std::move(layout);
    ctx.require_valid();
    return ctx;
}

CostContext CostContext::analytic(const ChannelParams& truth, BinBoundaries bins,
                                  LevelLayout layout) {
    CostContext ctx;
    ctx.bins = std::move(bins);
    ctx.layout = std::move(layout);
    ctx.reference.assign(ctx.bins.num_bins(), 0.0);
    ctx.reference = estimated_bin_counts(truth, ctx);
    ctx.require_valid();
    return ctx;
}

void SolverConfig::require_valid() const {
    if (!(eta > 0.0) || max_iterations < 1 || !(lm_v > 0.0 && lm_v < 1.0) || !(gd_step > 0.0) ||
        !(lm_beta0 > 0.0) || !(fd_step_rel > 0.0) || !(fd_step_abs > 0.0)) {
        throw std::invalid_argument("SolverConfig: out-of-range field");
    }
}

void to_json(nlohmann::json& j, const SolverConfig& c) {
    j = nlohmann::json{{"eta", c.eta},
                       {"max_iterations", c.max_iterations},
                       {"gd_step", c.gd_step},
                       {"lm_beta0", c.lm_beta0},
                       {"lm_v", c.lm_v},
                       {"fd_step_rel", c.fd_step_rel},
                       {"fd_step_abs", c.fd_step_abs},
                       {"lm_literal_jacobian_refresh", c.lm_literal_jacobian_refresh}};
}

void from_json(const nlohmann::json& j, SolverConfig& c) {
    c = SolverConfig{};
    if (j.contains("eta")) j.at("eta").get_to(c.eta);
    if (j.contains("max_iterations")) j.at("max_iterations").get_to(c.max_iterations);
    if (j.contains("gd_step")) j.at("gd_step").get_to(c.gd_step);
    if (j.contains("lm_beta0")) j.at("lm_beta0").get_to(c.lm_beta0);
    if (j.contains("lm_v")) j.at("lm_v").get_to(c.lm_v);
    if (j.contains("fd_step_rel")) j.at("fd_step_rel").get_to(c.fd_step_rel);
    if (j.contains("fd_step_abs")) j.at("fd_step_abs").get_to(c.fd_step_abs);
    if (j.contains("lm_literal_jacobian_refresh")) {
        j.at("lm_literal_jacobian_refresh").get_to(c.lm_literal_jacobian_refresh);
    }
    c.require_valid();
}

void to_json(nlohmann::json& j, const SolverReport& r) {
    j = nlohmann::json{{"estimate", r.estimate},
                       {"iterations", r.iterations},
                       {"cost_trace", r.cost_trace},
                       {"step_trace", r.step_trace},
                       {"converged_by_step", r.converged_by_step},
                       {"clamp_events", r.clamp_events},
                       {"rank_deficient", r.rank_deficient}};
    if (r.within_one_percent.has_value()) {
        j["within_one_percent"] = *r.within_one_percent;
    } else {
        j["within_one_percent"] = nullptr;
    }
}

std::vector<double> estimated_bin_counts(const ChannelParams& params, const CostContext& ctx) {
    params.require_valid();
    const std::size_t M = ctx.bins.num_bins();
    std::vector<double> counts(M, 0.0);
    for (std::size_t i = 0; i < M; ++i) {
        const auto [lo, hi] = ctx.bins.bin_edges(i);
        for (std::size_t k = 0; k < ctx.layout.num_levels(); ++k) {
            if (ctx.layout.counts[k] == 0) continue;
            counts[i] += static_cast<double>(ctx.layout.counts[k]) *
                         bin_probability(params, ctx.layout, k, lo, hi);
        }
    }
    return counts;
}

std::vector<double> residual_vector(const ChannelParams& params, const CostContext& ctx) {
    const std::vector<double> est = estimated_bin_counts(params, ctx);
    const double n = static_cast<double>(ctx.layout.total_cells());
    std::vector<double> g(est.size());
    for (std::size_t i = 0; i < est.size(); ++i) {
        g[i] = (est[i] - ctx.reference[i]) / n;
    }
    return g;
}

double cost(const ChannelParams& params, const CostContext& ctx) {
    const std::vector<double> g = residual_vector(params, ctx);
    double c = 0.0;
    for (double v : g) c += v * v;
    return c;
}

std::vector<std::array<double, 5>> jacobian(const ChannelParams& params, const CostContext& ctx,
                                            const SolverConfig& config) {
    params.require_valid();
    const std::size_t M = ctx.bins.num_bins();
    std::vector<std::array<double, 5>> j(M);
    const std::array<double, 5> a = params.to_array();
    for (std::size_t col = 0; col < 5; ++col) {
        const double h = std::max(config.fd_step_rel * std::abs(a[col]), config.fd_step_abs);
        std::array<double, 5> lo = a;
        std::array<double, 5> hi = a;
        hi[col] += h;
        lo[col] -= h;
        double denom = 2.0 * h;
        if (lo[col] <= kLowerBounds[col]) {
            // one-sided forward difference at the validity boundary
            lo = a;
            denom = h;
        }
        const std::vector<double> g_hi = residual_vector(ChannelParams::from_array(hi), ctx);
        const std::vector<double> g_lo = residual_vector(ChannelParams::from_array(lo), ctx);
        for (std::size_t row = 0; row < M; ++row) {
            j[row][col] = (g_hi[row] - g_lo[row]) / denom;
        }
    }
    return j;
}

std::array<double, 5> cost_gradient(const ChannelParams& params, const CostContext& ctx,
                                    const SolverConfig& config) {
    const auto j = jacobian(params, ctx, config);
    const auto g = residual_vector(params, ctx);
    std::array<double, 5> grad{};
    for (std::size_t row = 0; row < g.size(); ++row) {
        for (std::size_t col = 0; col < 5; ++col) {
            grad[col] += 2.0 * j[row][col] * g[row];
        }
    }
    return grad;
}

bool check_convergence(const ChannelParams& estimate, const ChannelParams& truth,
                       double rel_tol) {
    const std::array<double, 5> est = estimate.to_array();
    const std::array<double, 5> tru = truth.to_array();
    for (std::size_t j = 0; j < 5; ++j) {
        if (tru[j] == 0.0) {
            throw std::domain_error("check_convergence: zero ground-truth component");
        }
        if (std::abs(est[j] - tru[j]) > rel_tol * std::abs(tru[j])) return false;
    }
    return true;
}

SolverReport solve_gd(const CostContext& ctx, const ChannelParams& init,
                      const SolverConfig& config) {
    ctx.require_valid();
    config.require_valid();
    init.require_valid();

    SolverReport report;
    std::array<double, 5> a = init.to_array();
    double current_cost = cost(ChannelParams::from_array(a), ctx);
    report.cost_trace.push_back(current_cost);

    int k = 0;
    for (; k < config.max_iterations; ++k) {
        const ChannelParams p = ChannelParams::from_array(a);
        const std::array<double, 5> grad = cost_gradient(p, ctx, config);

        // Backtrack within the iteration on cost increase; if nothing improves
        // take the full step anyway (plain gradient descent behavior).
        double beta = config.gd_step;
        std::array<double, 5> chosen = a;
        double chosen_cost = current_cost;
        bool improved = false;
        for (int halving = 0; halving < 20; ++halving) {
            std::array<double, 5> trial = a;
            for (std::size_t j = 0; j < 5; ++j) trial[j] -= beta * grad[j];
            if (clamp_params(trial)) ++report.clamp_events;
            const double trial_cost = cost(ChannelParams::from_array(trial), ctx);
            if (trial_cost < current_cost) {
                chosen = trial;
                chosen_cost = trial_cost;
                improved = true;
                break;
            }
            beta *= 0.5;
        }
        if (!improved) {
            chosen = a;
            for (std::size_t j = 0; j < 5; ++j) chosen[j] -= config.gd_step * grad[j];
            if (clamp_params(chosen)) ++report.clamp_events;
            chosen_cost = cost(ChannelParams::from_array(chosen), ctx);
        }

        std::array<double, 5> step{};
        for (std::size_t j = 0; j < 5; ++j) step[j] = chosen[j] - a[j];
        const double step_norm = norm(step);
        a = chosen;
        current_cost = chosen_cost;
        report.cost_trace.push_back(current_cost);
        report.step_trace.push_back(step_norm);
        ++report.iterations;
        if (step_norm <= config.eta) {
            report.converged_by_step = true;
            ++k;
            break;
        }
    }
    report.estimate = ChannelParams::from_array(a);
    return report;
}

std::array<double, 5> gn_step(const ChannelParams& params, const CostContext& ctx,
                              const SolverConfig& config) {
    const Eigen::MatrixXd J = to_eigen(jacobian(params, ctx, config));
    const Eigen::VectorXd G = to_eigen(residual_vector(params, ctx));
    // Rank-revealing minimum-norm solve of J delta = G.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(J);
    const Eigen::VectorXd delta = cod.solve(G);
    std::array<double, 5> d{};
    for (std::size_t j = 0; j < 5; ++j) d[j] = delta(static_cast<Eigen::Index>(j));
    return d;
}

SolverReport solve_gn(const CostContext& ctx, const ChannelParams& init,
                      const SolverConfig& config) {
    ctx.require_valid();
    config.require_valid();
    init.require_valid();

    SolverReport report;
    std::array<double, 5> a = init.to_array();
    report.cost_trace.push_back(cost(ChannelParams::from_array(a), ctx));

    for (int k = 0; k < config.max_iterations; ++k) {
        const ChannelParams p = ChannelParams::from_array(a);
        const Eigen::MatrixXd J = to_eigen(jacobian(p, ctx, config));
        const Eigen::VectorXd G = to_eigen(residual_vector(p, ctx));
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(J);
        if (cod.rank() < 5) report.rank_deficient = true;
        const Eigen::VectorXd delta = cod.solve(G);

        std::array<double, 5> next = a;
        for (std::size_t j = 0; j < 5; ++j) {
            next[j] -= delta(static_cast<Eigen::Index>(j));
        }
        if (!std::isfinite(norm(next))) {
            // Divergence: freeze at the current iterate and stop.
            report.step_trace.push_back(std::numeric_limits<double>::quiet_NaN());
            ++report.iterations;
            break;
        }
        if (clamp_params(next)) ++report.clamp_events;
        std::array<double, 5> step{};
        for (std::size_t j = 0; j < 5; ++j) step[j] = next[j] - a[j];
        const double step_norm = norm(step);
        a = next;
        report.cost_trace.push_back(cost(ChannelParams::from_array(a), ctx));
        report.step_trace.push_back(step_norm);
        ++report.iterations;
        if (step_norm <= config.eta) {
            report.converged_by_step = true;
            break;
        }
    }
    report.estimate = ChannelParams::from_array(a);
    return report;
}

std::array<double, 5> lm_step(const ChannelParams& params, const CostContext& ctx,
                              double beta, const SolverConfig& config) {
    const Eigen::MatrixXd J = to_eigen(jacobian(params, ctx, config));
    const Eigen::VectorXd G = to_eigen(residual_vector(params, ctx));
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    Eigen::MatrixXd A = JtJ;
    A.diagonal() += beta * JtJ.diagonal();
    const Eigen::VectorXd delta = A.ldlt().solve(J.transpose() * G);
    std::array<double, 5> d{};
    for (std::size_t j = 0; j < 5; ++j) d[j] = delta(static_cast<Eigen::Index>(j));
    return d;
}

SolverReport solve_lm(const CostContext& ctx, const ChannelParams& init,
                      const SolverConfig& config) {
    ctx.require_valid();
    config.require_valid();
    init.require_valid();

    SolverReport report;
    std::array<double, 5> a = init.to_array();
    double current_cost = cost(ChannelParams::from_array(a), ctx);
    report.cost_trace.push_back(current_cost);

    double beta = config.lm_beta0;
    bool update_flag = true;
    Eigen::MatrixXd J;
    Eigen::VectorXd G;

    for (int k = 0; k < config.max_iterations; ++k) {
        if (update_flag || config.lm_literal_jacobian_refresh) {
            const ChannelParams p = ChannelParams::from_array(a);
            J = to_eigen(jacobian(p, ctx, config));
            G = to_eigen(residual_vector(p, ctx));
        }
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        Eigen::MatrixXd A = JtJ;
        A.diagonal() += beta * JtJ.diagonal();
        const Eigen::VectorXd delta = A.ldlt().solve(J.transpose() * G);

        bool solve_ok = delta.allFinite();
        std::array<double, 5> candidate = a;
        double candidate_cost = std::numeric_limits<double>::infinity();
        double candidate_step = 0.0;
        bool clamped = false;
        if (solve_ok) {
            for (std::size_t j = 0; j < 5; ++j) {
                candidate[j] -= delta(static_cast<Eigen::Index>(j));
            }
            clamped = clamp_params(candidate);
            candidate_cost = cost(ChannelParams::from_array(candidate), ctx);
            std::array<double, 5> step{};
            for (std::size_t j = 0; j < 5; ++j) step[j] = candidate[j] - a[j];
            candidate_step = norm(step);
        }

        ++report.iterations;
        // An at-cost zero-length step (already at a stationary point) counts
        // as an accepted converged step rather than a rejection.
        const bool accept = solve_ok && (candidate_cost < current_cost ||
                                         (candidate_step <= config.eta &&
                                          candidate_cost <= current_cost));
        if (accept) {
            const double step_norm = candidate_step;
            a = candidate;
            if (clamped) ++report.clamp_events;
            current_cost = candidate_cost;
            update_flag = true;
            beta *= config.lm_v;
            report.cost_trace.push_back(current_cost);
            report.step_trace.push_back(step_norm);
            if (step_norm <= config.eta) {
                report.converged_by_step = true;
                break;
            }
        } else {
            // reject (including solve failures): raise damping and retry
            update_flag = false;
            beta /= config.lm_v;
            report.cost_trace.push_back(current_cost);
            report.step_trace.push_back(0.0);
            if (!std::isfinite(beta)) break;
        }
    }
    report.estimate = ChannelParams::from_array(a);
    return report;
}

}  // namespace flashce
