// Command-line front end: simulate reads, place bins, fit parameters, and run
// the sweep/study experiments. See README for CSV/JSON schemas.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "flashce/harness.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    return j;
}

struct CommonOpts {
    std::string params_file;
    std::string layout_file;
    std::string config_file;
};

// Per-flag channel parameters; a params file, then a config file, override.
struct ParamFlags {
    double lambda = 0.0099;
    double sigma_p = 0.05;
    double sigma_e = 0.35;
    double gamma_sigma_r = 0.0617;
    double gamma_mu_r = -0.5882;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--lambda", lambda, "wear-out exponential scale (V)");
        cmd->add_option("--sigma-p", sigma_p, "programmed-state programming std (V)");
        cmd->add_option("--sigma-e", sigma_e, "erased-state programming std (V)");
        cmd->add_option("--gamma-sigma-r", gamma_sigma_r, "retention spread coefficient");
        cmd->add_option("--gamma-mu-r", gamma_mu_r, "retention shift coefficient");
    }

    flashce::ChannelParams resolve(const std::string& params_file) const {
        if (!params_file.empty()) {
            return load_json(params_file).get<flashce::ChannelParams>();
        }
        return {lambda, sigma_p, sigma_e, gamma_sigma_r, gamma_mu_r};
    }
};

flashce::LevelLayout resolve_layout(const std::string& layout_file) {
    if (!layout_file.empty()) {
        return load_json(layout_file).get<flashce::LevelLayout>();
    }
    return flashce::LevelLayout::default_mlc();
}

// JSON config file whose keys override any flag already parsed.
void apply_spec_config(const std::string& path, flashce::ExperimentSpec& spec) {
    if (path.empty()) return;
    const json j = load_json(path);
    if (j.contains("trajectory")) {
        spec.trajectory = j.at("trajectory").get<std::vector<flashce::TrajectoryPoint>>();
    }
    if (j.contains("layout")) spec.layout = j.at("layout").get<flashce::LevelLayout>();
    if (j.contains("cells")) j.at("cells").get_to(spec.cells);
    if (j.contains("bin_strategy")) {
        spec.bin_strategy = flashce::bin_strategy_from_string(j.at("bin_strategy"));
    }
    if (j.contains("num_bins")) j.at("num_bins").get_to(spec.num_bins);
    if (j.contains("mmi_grid_size")) j.at("mmi_grid_size").get_to(spec.mmi_grid_size);
    if (j.contains("solver")) spec.solver = flashce::solver_from_string(j.at("solver"));
    if (j.contains("solver_config")) {
        spec.solver_config = j.at("solver_config").get<flashce::SolverConfig>();
    }
    if (j.contains("init")) spec.init = j.at("init").get<flashce::ChannelParams>();
    if (j.contains("seed")) j.at("seed").get_to(spec.seed);
    if (j.contains("reference_mode")) {
        spec.reference_mode = flashce::reference_mode_from_string(j.at("reference_mode"));
    }
}

void emit(const std::string& out_path, const std::string& contents) {
    if (out_path.empty() || out_path == "-") {
        std::cout << contents;
    } else {
        flashce::write_text_file(out_path, contents);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Flash read-channel simulation, binning, and histogram-based estimation"};
    app.require_subcommand(1);

    std::string trajectory_file;
    std::string out_path;
    std::string format = "json";
    CommonOpts common;

    flashce::ExperimentSpec spec;
    std::string bin_strategy = "equal_probability";
    std::string solver = "lm";
    std::string reference_mode = "analytic";

    auto add_spec_flags = [&](CLI::App* cmd) {
        cmd->add_option("--trajectory", trajectory_file,
                        "trajectory JSON file (default: bundled synthetic trajectory)");
        cmd->add_option("--cells", spec.cells, "simulated cell count");
        cmd->add_option("--strategy", bin_strategy, "equal_width|equal_probability|mmi");
        cmd->add_option("--bins,-M", spec.num_bins, "histogram bin count");
        cmd->add_option("--grid-size", spec.mmi_grid_size, "MMI candidate grid size");
        cmd->add_option("--solver", solver, "gd|gn|lm");
        cmd->add_option("--seed", spec.seed, "RNG seed");
        cmd->add_option("--reference-mode", reference_mode, "analytic|monte_carlo");
        cmd->add_option("--eta", spec.solver_config.eta, "step-norm stop tolerance");
        cmd->add_option("--max-iterations", spec.solver_config.max_iterations);
        cmd->add_option("--layout", common.layout_file, "level layout JSON file");
        cmd->add_option("--config", common.config_file,
                        "JSON config file; its keys override flags");
        cmd->add_option("--out,-o", out_path, "output path ('-' for stdout)");
        cmd->add_option("--format", format, "csv|json");
    };

    // simulate
    auto* sim = app.add_subcommand("simulate", "sample reads from the channel model");
    ParamFlags sim_params;
    sim_params.add_to(sim);
    std::uint64_t sim_cells = 100000;
    std::uint64_t sim_seed = 1;
    std::size_t sim_bins = 0;
    sim->add_option("--params", common.params_file, "channel params JSON file");
    sim->add_option("--layout", common.layout_file, "level layout JSON file");
    sim->add_option("--cells", sim_cells, "total cells to simulate");
    sim->add_option("--seed", sim_seed, "RNG seed");
    sim->add_option("--histogram-bins", sim_bins,
                    "emit an equal-probability histogram instead of raw reads");
    sim->add_option("--out,-o", out_path, "output path ('-' for stdout)");

    // bins
    auto* bins_cmd = app.add_subcommand("bins", "compute read-voltage bin boundaries");
    ParamFlags bins_params;
    bins_params.add_to(bins_cmd);
    std::size_t bins_m = 10;
    std::size_t bins_grid = 2000;
    std::string bins_strategy = "equal_probability";
    bins_cmd->add_option("--params", common.params_file, "channel params JSON file");
    bins_cmd->add_option("--layout", common.layout_file, "level layout JSON file");
    bins_cmd->add_option("--strategy", bins_strategy, "equal_width|equal_probability|mmi");
    bins_cmd->add_option("--bins,-M", bins_m, "bin count");
    bins_cmd->add_option("--grid-size", bins_grid, "MMI candidate grid size");
    bins_cmd->add_option("--out,-o", out_path, "output path ('-' for stdout)");

    // estimate
    auto* est = app.add_subcommand("estimate", "fit channel parameters to a histogram");
    std::string est_histogram;
    std::string est_bins_file;
    std::string est_solver = "lm";
    ParamFlags est_init;
    est_init.lambda = 0.007;
    est_init.sigma_p = 0.1;
    est_init.sigma_e = 0.4;
    est_init.gamma_sigma_r = 0.04;
    est_init.gamma_mu_r = -0.4;
    est_init.add_to(est);
    est->add_option("--histogram", est_histogram, "reference histogram CSV")->required();
    est->add_option("--bin-file", est_bins_file, "bin boundaries JSON")->required();
    est->add_option("--layout", common.layout_file, "level layout JSON file");
    est->add_option("--solver", est_solver, "gd|gn|lm");
    est->add_option("--eta", spec.solver_config.eta, "step-norm stop tolerance");
    est->add_option("--max-iterations", spec.solver_config.max_iterations);
    est->add_option("--out,-o", out_path, "output path ('-' for stdout)");

    auto* sweep = app.add_subcommand("sweep", "solver sweep over a degradation trajectory");
    add_spec_flags(sweep);
    std::string dump_trajectory;
    sweep->add_option("--dump-default-trajectory", dump_trajectory,
                      "write the bundled synthetic trajectory to this path and exit");

    auto* binning_study =
        app.add_subcommand("binning-study", "discretization metrics for all bin strategies");
    add_spec_flags(binning_study);

    auto* read_count =
        app.add_subcommand("read-count-study", "iteration statistics vs histogram resolution");
    add_spec_flags(read_count);
    std::vector<std::size_t> study_bins{7, 10, 13};
    read_count->add_option("--bin-counts", study_bins, "histogram sizes to compare");
    bool emit_table = false;
    read_count->add_flag("--table", emit_table,
                         "emit the per-solver convergence-count table instead of LM stats");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            const auto params = sim_params.resolve(common.params_file);
            auto layout = resolve_layout(common.layout_file);
            // scale layout counts to the requested total
            const double scale =
                static_cast<double>(sim_cells) / static_cast<double>(layout.total_cells());
            for (auto& c : layout.counts) {
                c = static_cast<std::uint64_t>(static_cast<double>(c) * scale);
            }
            const auto reads = flashce::sample_reads(params, layout, sim_seed);
            if (sim_bins >= 2) {
                const auto bb = flashce::equal_probability_bins(params, layout, sim_bins);
                std::vector<double> ys;
                ys.reserve(reads.size());
                for (const auto& r : reads) ys.push_back(r.y);
                const auto h = flashce::measure_histogram(ys, bb);
                emit(out_path, flashce::histogram_to_csv(h, bb));
            } else {
                std::ostringstream out;
                out.precision(17);
                out << "level_index,y\n";
                for (const auto& r : reads) out << r.level_index << ',' << r.y << '\n';
                emit(out_path, out.str());
            }
        } else if (bins_cmd->parsed()) {
            const auto params = bins_params.resolve(common.params_file);
            const auto layout = resolve_layout(common.layout_file);
            flashce::BinBoundaries bb;
            switch (flashce::bin_strategy_from_string(bins_strategy)) {
                case flashce::BinStrategy::equal_width:
                    bb = flashce::equal_width_bins(params, layout, bins_m);
                    break;
                case flashce::BinStrategy::equal_probability:
                    bb = flashce::equal_probability_bins(params, layout, bins_m);
                    break;
                case flashce::BinStrategy::mmi:
                    bb = flashce::mmi_bins(params, layout, bins_m, bins_grid);
                    break;
            }
            emit(out_path, json(bb).dump(2) + "\n");
        } else if (est->parsed()) {
            auto layout = resolve_layout(common.layout_file);
            const auto bb = load_json(est_bins_file).get<flashce::BinBoundaries>();
            // histogram CSV: bin_index,lo,hi,count
            std::ifstream in(est_histogram);
            if (!in) throw std::runtime_error("cannot open " + est_histogram);
            flashce::Histogram h;
            std::string line;
            std::getline(in, line);  // header
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const auto last = line.rfind(',');
                h.counts.push_back(std::stoull(line.substr(last + 1)));
            }
            for (auto c : h.counts) h.total += c;
            // Rescale the layout's per-level counts to the measured total so a
            // histogram of any size fits the default layout proportions.
            if (layout.total_cells() != h.total) {
                const double f =
                    static_cast<double>(h.total) / static_cast<double>(layout.total_cells());
                std::uint64_t assigned = 0;
                for (std::size_t k = 0; k + 1 < layout.counts.size(); ++k) {
                    layout.counts[k] =
                        static_cast<std::uint64_t>(std::llround(f * static_cast<double>(layout.counts[k])));
                    assigned += layout.counts[k];
                }
                layout.counts.back() = h.total - assigned;
            }
            const auto ctx = flashce::CostContext::from_histogram(h, bb, layout);
            const auto init = est_init.resolve("");
            flashce::SolverReport rep;
            switch (flashce::solver_from_string(est_solver)) {
                case flashce::SolverKind::gd: rep = solve_gd(ctx, init, spec.solver_config); break;
                case flashce::SolverKind::gn: rep = solve_gn(ctx, init, spec.solver_config); break;
                case flashce::SolverKind::lm: rep = solve_lm(ctx, init, spec.solver_config); break;
            }
            emit(out_path, json(rep).dump(2) + "\n");
        } else {
            // trajectory-driven commands
            if (sweep->parsed() && !dump_trajectory.empty()) {
                emit(dump_trajectory, json(flashce::default_trajectory()).dump(2) + "\n");
                return 0;
            }
            std::vector<std::string> warnings;
            spec.trajectory = trajectory_file.empty()
                                  ? flashce::default_trajectory()
                                  : flashce::load_trajectory(trajectory_file, &warnings);
            for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
            spec.layout = resolve_layout(common.layout_file);
            spec.bin_strategy = flashce::bin_strategy_from_string(bin_strategy);
            spec.solver = flashce::solver_from_string(solver);
            spec.reference_mode = flashce::reference_mode_from_string(reference_mode);
            apply_spec_config(common.config_file, spec);

            if (sweep->parsed()) {
                const auto report = flashce::run_sweep(spec);
                emit(out_path, format == "csv"
                                   ? flashce::sweep_report_to_csv(report)
                                   : flashce::sweep_report_to_json(spec, report).dump(2) + "\n");
            } else if (binning_study->parsed()) {
                const auto rows = flashce::run_binning_study(spec);
                if (format == "csv") {
                    emit(out_path, flashce::binning_study_to_csv(rows));
                } else {
                    json j = json::array();
                    for (const auto& r : rows) {
                        j.push_back({{"pe_cycles", r.pe_cycles},
                                     {"strategy", flashce::to_string(r.strategy)},
                                     {"de2", r.de2},
                                     {"effective_resolution", r.resolution}});
                    }
                    emit(out_path, j.dump(2) + "\n");
                }
            } else if (read_count->parsed()) {
                const auto rows = flashce::run_read_count_study(spec, study_bins);
                if (emit_table) {
                    emit(out_path, flashce::convergence_table_to_csv(rows));
                } else if (format == "csv") {
                    emit(out_path, flashce::read_count_study_to_csv(rows));
                } else {
                    json j = json::array();
                    for (const auto& r : rows) {
                        j.push_back({{"num_bins", r.num_bins},
                                     {"iter_min", r.lm_stats.min},
                                     {"iter_mean", r.lm_stats.mean},
                                     {"iter_max", r.lm_stats.max},
                                     {"iter_stddev", r.lm_stats.stddev},
                                     {"gd_converged", r.gd_converged},
                                     {"gn_converged", r.gn_converged},
                                     {"lm_converged", r.lm_converged}});
                    }
                    emit(out_path, j.dump(2) + "\n");
                }
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
