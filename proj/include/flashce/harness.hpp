#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flashce/estimation.hpp"
#include "json.hpp"

namespace flashce {

struct TrajectoryPoint {
    std::uint64_t pe_cycles = 0;
    ChannelParams params;

    bool operator==(const TrajectoryPoint&) const = default;
};

void to_json(nlohmann::json& j, const TrajectoryPoint& p);
void from_json(const nlohmann::json& j, TrajectoryPoint& p);

/// Parse a trajectory JSON file: array of
/// {pe_cycles, lambda, sigma_p, sigma_e, gamma_sigma_r, gamma_mu_r}.
/// Points are sorted and deduplicated by pe_cycles; each parameter set must
/// pass hard validation. Soft advisories go to `warnings` when provided.
std::vector<TrajectoryPoint> load_trajectory(const std::string& path,
                                             std::vector<std::string>* warnings = nullptr);

/// Bundled synthetic 14-point trajectory, 0..3900 P/E every 300. Linear ramps
/// in lambda, gamma_sigma_r and gamma_mu_r anchored so the 3000 P/E point
/// carries the reference parameter vector; sigma_p and sigma_e stay fixed.
std::vector<TrajectoryPoint> default_trajectory();

enum class BinStrategy { equal_width, equal_probability, mmi };
enum class SolverKind { gd, gn, lm };
enum class ReferenceMode { analytic, monte_carlo };

std::string to_string(BinStrategy s);
std::string to_string(SolverKind s);
std::string to_string(ReferenceMode m);
BinStrategy bin_strategy_from_string(const std::string& s);
SolverKind solver_from_string(const std::string& s);
ReferenceMode reference_mode_from_string(const std::string& s);

struct ExperimentSpec {
    std::vector<TrajectoryPoint> trajectory;
    LevelLayout layout = LevelLayout::default_mlc();
    std::uint64_t cells = 1000000;
    BinStrategy bin_strategy = BinStrategy::equal_probability;
    std::size_t num_bins = 10;
    std::size_t mmi_grid_size = 2000;
    SolverKind solver = SolverKind::lm;
    SolverConfig solver_config;
    ChannelParams init{0.007, 0.1, 0.4, 0.04, -0.4};
    std::uint64_t seed = 1;
    ReferenceMode reference_mode = ReferenceMode::analytic;

    void require_valid() const;
};

struct ConditionResult {
    std::uint64_t pe_cycles = 0;
    ChannelParams truth;
    SolverReport report;
    std::optional<std::string> error;  // per-condition failure, sweep continues
};

struct IterationStats {
    int min = 0;
    int max = 0;
    double mean = 0.0;
    double stddev = 0.0;
};

IterationStats iteration_stats(const std::vector<ConditionResult>& results);

struct SweepReport {
    std::vector<ConditionResult> conditions;
    std::size_t convergence_count = 0;  // +-1% criterion
    std::size_t step_converged_count = 0;
    IterationStats stats;
};

/// One solver over every trajectory condition: build bins per strategy from
/// the condition's truth, produce the reference histogram (analytic expected
/// counts or seeded Monte-Carlo reads), solve from spec.init, score +-1%
/// convergence. Per-condition failures are recorded, never fatal.
SweepReport run_sweep(const ExperimentSpec& spec);

struct BinningStudyRow {
    std::uint64_t pe_cycles = 0;
    BinStrategy strategy = BinStrategy::equal_width;
    double de2 = 0.0;
    std::size_t resolution = 0;
};

/// Both discretization metrics for all three strategies across the trajectory.
std::vector<BinningStudyRow> run_binning_study(const ExperimentSpec& spec);

struct ReadCountStudyRow {
    std::size_t num_bins = 0;
    IterationStats lm_stats;
    std::size_t gd_converged = 0;
    std::size_t gn_converged = 0;
    std::size_t lm_converged = 0;
};

/// LM iteration statistics (plus per-solver convergence counts) at several
/// histogram resolutions, default M in {7, 10, 13}.
std::vector<ReadCountStudyRow> run_read_count_study(
    const ExperimentSpec& spec, const std::vector<std::size_t>& bin_counts = {7, 10, 13});

// Report emission. JSON schemas carry a schema_version field; CSV layouts are
// documented in the README. IO failures throw std::runtime_error naming the path.
nlohmann::json sweep_report_to_json(const ExperimentSpec& spec, const SweepReport& report);
std::string sweep_report_to_csv(const SweepReport& report);
std::string binning_study_to_csv(const std::vector<BinningStudyRow>& rows);
std::string read_count_study_to_csv(const std::vector<ReadCountStudyRow>& rows);
std::string convergence_table_to_csv(const std::vector<ReadCountStudyRow>& rows);

void write_text_file(const std::string& path, const std::string& contents);

}  // namespace flashce
