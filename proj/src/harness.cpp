#include "flashce/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace flashce {

void to_json(nlohmann::json& j, const TrajectoryPoint& p) {
    to_json(j, p.params);
    j["pe_cycles"] = p.pe_cycles;
}

void from_json(const nlohmann::json& j, TrajectoryPoint& p) {
    from_json(j, p.params);
    j.at("pe_cycles").get_to(p.pe_cycles);
}

std::vector<TrajectoryPoint> load_trajectory(const std::string& path,
                                             std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_trajectory: cannot open " + path);
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_trajectory: " + path + ": " + e.what());
    }
    if (!doc.is_array() || doc.empty()) {
        throw std::runtime_error("load_trajectory: " + path +
                                 ": expected a non-empty JSON array of trajectory points");
    }
    std::map<std::uint64_t, TrajectoryPoint> by_pe;  // sorts and deduplicates
    for (std::size_t i = 0; i < doc.size(); ++i) {
        TrajectoryPoint pt;
        try {
            from_json(doc[i], pt);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("load_trajectory: " + path + ": element " +
                                     std::to_string(i) + ": " + e.what());
        }
        pt.params.require_valid();
        if (warnings) {
            for (const auto& w : pt.params.warnings()) {
                warnings->push_back("pe_cycles=" + std::to_string(pt.pe_cycles) + ": " + w);
            }
        }
        by_pe[pt.pe_cycles] = pt;
    }
    std::vector<TrajectoryPoint> out;
    out.reserve(by_pe.size());
    for (auto& [pe, pt] : by_pe) out.push_back(pt);
    return out;
}

std::vector<TrajectoryPoint> default_trajectory() {
    // Synthetic wear trajectory: linear ramps chosen so the 3000 P/E point
    // carries the reference vector [0.0099, 0.05, 0.35, 0.0617, -0.5882]
    // (sigma_p/sigma_e fixed over life). Not measured device data.
    std::vector<TrajectoryPoint> traj;
    traj.reserve(14);
    for (int k = 0; k < 14; ++k) {
        const double t = static_cast<double>(300 * k) / 3000.0;
        TrajectoryPoint pt;
        pt.pe_cycles = static_cast<std::uint64_t>(300 * k);
        pt.params.lambda = 0.0055 + 0.0044 * t;
        pt.params.sigma_p = 0.05;
        pt.params.sigma_e = 0.35;
        pt.params.gamma_sigma_r = 0.045 + 0.0167 * t;
        pt.params.gamma_mu_r = -(0.30 + 0.2882 * t);
        traj.push_back(pt);
    }
    return traj;
}

std::string to_string(BinStrategy s) {
    switch (s) {
        case BinStrategy::equal_width: return "equal_width";
        case BinStrategy::equal_probability: return "equal_probability";
        case BinStrategy::mmi: return "mmi";
    }
    throw std::logic_error("unknown BinStrategy");
}

std::string to_string(SolverKind s) {
    switch (s) {
        case SolverKind::gd: return "gd";
        case SolverKind::gn: return "gn";
        case SolverKind::lm: return "lm";
    }
    throw std::logic_error("unknown SolverKind");
}

std::string to_string(ReferenceMode m) {
    return m == ReferenceMode::analytic ? "analytic" : "monte_carlo";
}

BinStrategy bin_strategy_from_string(const std::string& s) {
    if (s == "equal_width") return BinStrategy::equal_width;
    if (s == "equal_probability") return BinStrategy::equal_probability;
    if (s == "mmi") return BinStrategy::mmi;
    throw std::invalid_argument("unknown bin strategy: " + s);
}

SolverKind solver_from_string(const std::string& s) {
    if (s == "gd") return SolverKind::gd;
    if (s == "gn") return SolverKind::gn;
    if (s == "lm") return SolverKind::lm;
    throw std::invalid_argument("unknown solver: " + s);
}

ReferenceMode reference_mode_from_string(const std::string& s) {
    if (s == "analytic") return ReferenceMode::analytic;
    if (s == "monte_carlo") return ReferenceMode::monte_carlo;
    throw std::invalid_argument("unknown reference mode: " + s);
}

void ExperimentSpec::require_valid() const {
    if (trajectory.empty()) throw std::invalid_argument("ExperimentSpec: empty trajectory");
    if (num_bins < 2) throw std::invalid_argument("ExperimentSpec: need at least 2 bins");
    if (cells == 0) throw std::invalid_argument("ExperimentSpec: cells must be positive");
    layout.require_valid();
    init.require_valid();
    solver_config.require_valid();
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Independent per-condition stream, regardless of execution order.
std::uint64_t condition_seed(std::uint64_t seed, std::uint64_t pe_cycles) {
    return splitmix64(seed ^ splitmix64(pe_cycles));
}

LevelLayout scaled_layout(const LevelLayout& base, std::uint64_t cells) {
    // Distribute `cells` across the base levels proportionally; remainder to
    // the earliest levels so the total is exact.
    LevelLayout layout = base;
    const double base_total = static_cast<double>(base.total_cells());
    std::uint64_t assigned = 0;
    for (std::size_t k = 0; k < layout.counts.size(); ++k) {
        layout.counts[k] = static_cast<std::uint64_t>(
            std::floor(static_cast<double>(base.counts[k]) / base_total *
                       static_cast<double>(cells)));
        assigned += layout.counts[k];
    }
    for (std::size_t k = 0; assigned < cells; k = (k + 1) % layout.counts.size()) {
        ++layout.counts[k];
        ++assigned;
    }
    return layout;
}

BinBoundaries build_bins(const ExperimentSpec& spec, const ChannelParams& truth,
                         const LevelLayout& layout) {
    switch (spec.bin_strategy) {
        case BinStrategy::equal_width:
            return equal_width_bins(truth, layout, spec.num_bins);
        case BinStrategy::equal_probability:
            return equal_probability_bins(truth, layout, spec.num_bins);
        case BinStrategy::mmi:
            return mmi_bins(truth, layout, spec.num_bins, spec.mmi_grid_size);
    }
    throw std::logic_error("unknown BinStrategy");
}

CostContext build_reference(const ExperimentSpec& spec, const ChannelParams& truth,
                            const LevelLayout& layout, const BinBoundaries& bins,
                            std::uint64_t pe_cycles) {
    if (spec.reference_mode == ReferenceMode::analytic) {
        return CostContext::analytic(truth, bins, layout);
    }
    const auto reads = sample_reads(truth, layout, condition_seed(spec.seed, pe_cycles));
    std::vector<double> ys;
    ys.reserve(reads.size());
    for (const Read& r : reads) ys.push_back(r.y);
    const Histogram h = measure_histogram(ys, bins);
    return CostContext::from_histogram(h, bins, layout);
}

SolverReport run_solver(SolverKind kind, const CostContext& ctx, const ChannelParams& init,
                        const SolverConfig& config) {
    switch (kind) {
        case SolverKind::gd: return solve_gd(ctx, init, config);
        case SolverKind::gn: return solve_gn(ctx, init, config);
        case SolverKind::lm: return solve_lm(ctx, init, config);
    }
    throw std::logic_error("unknown SolverKind");
}

}  // namespace

IterationStats iteration_stats(const std::vector<ConditionResult>& results) {
    IterationStats s;
    std::vector<int> iters;
    for (const auto& r : results) {
        if (!r.error) iters.push_back(r.report.iterations);
    }
    if (iters.empty()) return s;
    s.min = *std::min_element(iters.begin(), iters.end());
    s.max = *std::max_element(iters.begin(), iters.end());
    double sum = 0.0;
    for (int v : iters) sum += v;
    s.mean = sum / static_cast<double>(iters.size());
    double sq = 0.0;
    for (int v : iters) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(iters.size()));
    return s;
}

SweepReport run_sweep(const ExperimentSpec& spec) {
    spec.require_valid();
    const LevelLayout layout = scaled_layout(spec.layout, spec.cells);

    SweepReport report;
    for (const TrajectoryPoint& pt : spec.trajectory) {
        ConditionResult res;
        res.pe_cycles = pt.pe_cycles;
        res.truth = pt.params;
        try {
            const BinBoundaries bins = build_bins(spec, pt.params, layout);
            const CostContext ctx = build_reference(spec, pt.params, layout, bins, pt.pe_cycles);
            res.report = run_solver(spec.solver, ctx, spec.init, spec.solver_config);
            res.report.within_one_percent = check_convergence(res.report.estimate, pt.params);
        } catch (const std::exception& e) {
            res.error = e.what();
        }
        report.conditions.push_back(std::move(res));
    }
    for (const auto& c : report.conditions) {
        if (c.error) continue;
        if (c.report.within_one_percent.value_or(false)) ++report.convergence_count;
        if (c.report.converged_by_step) ++report.step_converged_count;
    }
    report.stats = iteration_stats(report.conditions);
    return report;
}

std::vector<BinningStudyRow> run_binning_study(const ExperimentSpec& spec) {
    spec.require_valid();
    const LevelLayout layout = scaled_layout(spec.layout, spec.cells);
    std::vector<BinningStudyRow> rows;
    for (const TrajectoryPoint& pt : spec.trajectory) {
        for (BinStrategy strategy :
             {BinStrategy::equal_width, BinStrategy::equal_probability, BinStrategy::mmi}) {
            ExperimentSpec s = spec;
            s.bin_strategy = strategy;
            const BinBoundaries bins = build_bins(s, pt.params, layout);
            BinningStudyRow row;
            row.pe_cycles = pt.pe_cycles;
            row.strategy = strategy;
            row.de2 = discretization_error(pt.params, layout, bins);
            row.resolution = effective_resolution(pt.params, layout, bins);
            rows.push_back(row);
        }
    }
    return rows;
}

std::vector<ReadCountStudyRow> run_read_count_study(const ExperimentSpec& spec,
                                                    const std::vector<std::size_t>& bin_counts) {
    spec.require_valid();
    std::vector<ReadCountStudyRow> rows;
    for (std::size_t m : bin_counts) {
        ReadCountStudyRow row;
        row.num_bins = m;
        for (SolverKind kind : {SolverKind::gd, SolverKind::gn, SolverKind::lm}) {
            ExperimentSpec s = spec;
            s.num_bins = m;
            s.solver = kind;
            const SweepReport rep = run_sweep(s);
            switch (kind) {
                case SolverKind::gd: row.gd_converged = rep.convergence_count; break;
                case SolverKind::gn: row.gn_converged = rep.convergence_count; break;
                case SolverKind::lm:
                    row.lm_converged = rep.convergence_count;
                    row.lm_stats = rep.stats;
                    break;
            }
        }
        rows.push_back(row);
    }
    return rows;
}

nlohmann::json sweep_report_to_json(const ExperimentSpec& spec, const SweepReport& report) {
    nlohmann::json conditions = nlohmann::json::array();
    for (const auto& c : report.conditions) {
        nlohmann::json jc;
        jc["pe_cycles"] = c.pe_cycles;
        jc["truth"] = c.truth;
        if (c.error) {
            jc["error"] = *c.error;
        } else {
            jc["report"] = c.report;
        }
        conditions.push_back(jc);
    }
    return nlohmann::json{
        {"schema_version", 1},
        {"spec",
         {{"cells", spec.cells},
          {"bin_strategy", to_string(spec.bin_strategy)},
          {"num_bins", spec.num_bins},
          {"solver", to_string(spec.solver)},
          {"solver_config", spec.solver_config},
          {"init", spec.init},
          {"layout", spec.layout},
          {"seed", spec.seed},
          {"reference_mode", to_string(spec.reference_mode)}}},
        {"bins_recomputed_per_condition", true},
        {"conditions", conditions},
        {"convergence_count", report.convergence_count},
        {"step_converged_count", report.step_converged_count},
        {"iteration_stats",
         {{"min", report.stats.min},
          {"max", report.stats.max},
          {"mean", report.stats.mean},
          {"stddev", report.stats.stddev}}}};
}

std::string sweep_report_to_csv(const SweepReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "pe_cycles,iterations,final_cost,converged_by_step,within_one_percent,"
           "truth_lambda,truth_sigma_p,truth_sigma_e,truth_gamma_sigma_r,truth_gamma_mu_r,"
           "est_lambda,est_sigma_p,est_sigma_e,est_gamma_sigma_r,est_gamma_mu_r,error\n";
    for (const auto& c : report.conditions) {
        out << c.pe_cycles << ',';
        if (c.error) {
            out << ",,,,";
        } else {
            out << c.report.iterations << ',' << c.report.final_cost() << ','
                << (c.report.converged_by_step ? 1 : 0) << ','
                << (c.report.within_one_percent.value_or(false) ? 1 : 0) << ',';
        }
        const auto t = c.truth.to_array();
        for (double v : t) out << v << ',';
        if (c.error) {
            out << ",,,,," << '"' << *c.error << '"';
        } else {
            const auto e = c.report.estimate.to_array();
            for (std::size_t i = 0; i < 5; ++i) out << e[i] << ',';
        }
        out << '\n';
    }
    return out.str();
}

std::string binning_study_to_csv(const std::vector<BinningStudyRow>& rows) {
    std::ostringstream out;
    out.precision(17);
    out << "pe_cycles,strategy,de2,effective_resolution\n";
    for (const auto& r : rows) {
        out << r.pe_cycles << ',' << to_string(r.strategy) << ',' << r.de2 << ','
            << r.resolution << '\n';
    }
    return out.str();
}

std::string read_count_study_to_csv(const std::vector<ReadCountStudyRow>& rows) {
    std::ostringstream out;
    out.precision(17);
    out << "num_bins,reads,iter_min,iter_mean,iter_max,iter_stddev,lm_converged\n";
    for (const auto& r : rows) {
        out << r.num_bins << ',' << (r.num_bins - 1) << ',' << r.lm_stats.min << ','
            << r.lm_stats.mean << ',' << r.lm_stats.max << ',' << r.lm_stats.stddev << ','
            << r.lm_converged << '\n';
    }
    return out.str();
}

std::string convergence_table_to_csv(const std::vector<ReadCountStudyRow>& rows) {
    std::ostringstream out;
    out << "reads,gd,gn,lm\n";
    for (const auto& r : rows) {
        out << (r.num_bins - 1) << ',' << r.gd_converged << ',' << r.gn_converged << ','
            << r.lm_converged << '\n';
    }
    return out.str();
}

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << contents;
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace flashce
