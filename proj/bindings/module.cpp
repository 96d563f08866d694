// pybind11 bindings for the main library operations.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flashce/binning.hpp"
#include "flashce/channel.hpp"
#include "flashce/estimation.hpp"
#include "flashce/harness.hpp"

namespace py = pybind11;
using namespace flashce;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Flash read-channel simulation, binning, and histogram-based estimation";

    py::class_<ChannelParams>(m, "ChannelParams")
        .def(py::init<>())
        .def(py::init([](double lambda, double sigma_p, double sigma_e, double gamma_sigma_r,
                         double gamma_mu_r) {
                 return ChannelParams{lambda, sigma_p, sigma_e, gamma_sigma_r, gamma_mu_r};
             }),
             py::arg("lambda_"), py::arg("sigma_p"), py::arg("sigma_e"),
             py::arg("gamma_sigma_r"), py::arg("gamma_mu_r"))
        .def_readwrite("lambda_", &ChannelParams::lambda)
        .def_readwrite("sigma_p", &ChannelParams::sigma_p)
        .def_readwrite("sigma_e", &ChannelParams::sigma_e)
        .def_readwrite("gamma_sigma_r", &ChannelParams::gamma_sigma_r)
        .def_readwrite("gamma_mu_r", &ChannelParams::gamma_mu_r)
        .def("is_valid", &ChannelParams::is_valid)
        .def("warnings", &ChannelParams::warnings)
        .def("to_list", [](const ChannelParams& p) {
            const auto a = p.to_array();
            return std::vector<double>(a.begin(), a.end());
        })
        .def("__repr__", [](const ChannelParams& p) {
            return "ChannelParams(" + nlohmann::json(p).dump() + ")";
        });

    py::class_<LevelLayout>(m, "LevelLayout")
        .def(py::init<>())
        .def(py::init([](std::vector<double> levels, std::vector<std::uint64_t> counts) {
                 return LevelLayout{std::move(levels), std::move(counts)};
             }),
             py::arg("levels"), py::arg("counts"))
        .def_readwrite("levels", &LevelLayout::levels)
        .def_readwrite("counts", &LevelLayout::counts)
        .def("total_cells", &LevelLayout::total_cells)
        .def_static("default_mlc", &LevelLayout::default_mlc,
                    py::arg("cells_per_level") = 250000);

    py::class_<LevelNoiseSpec>(m, "LevelNoiseSpec")
        .def_readonly("mu_r", &LevelNoiseSpec::mu_r)
        .def_readonly("sigma_r", &LevelNoiseSpec::sigma_r)
        .def_readonly("sigma", &LevelNoiseSpec::sigma);

    py::class_<BinBoundaries>(m, "BinBoundaries")
        .def(py::init<>())
        .def(py::init([](std::vector<double> cuts) { return BinBoundaries{std::move(cuts)}; }),
             py::arg("cuts"))
        .def_readwrite("cuts", &BinBoundaries::cuts)
        .def("num_bins", &BinBoundaries::num_bins);

    py::class_<Histogram>(m, "Histogram")
        .def_readonly("counts", &Histogram::counts)
        .def_readonly("total", &Histogram::total);

    py::class_<SolverConfig>(m, "SolverConfig")
        .def(py::init<>())
        .def_readwrite("eta", &SolverConfig::eta)
        .def_readwrite("max_iterations", &SolverConfig::max_iterations)
        .def_readwrite("gd_step", &SolverConfig::gd_step)
        .def_readwrite("lm_beta0", &SolverConfig::lm_beta0)
        .def_readwrite("lm_v", &SolverConfig::lm_v);

    py::class_<SolverReport>(m, "SolverReport")
        .def_readonly("estimate", &SolverReport::estimate)
        .def_readonly("iterations", &SolverReport::iterations)
        .def_readonly("cost_trace", &SolverReport::cost_trace)
        .def_readonly("step_trace", &SolverReport::step_trace)
        .def_readonly("converged_by_step", &SolverReport::converged_by_step)
        .def_readonly("within_one_percent", &SolverReport::within_one_percent);

    py::class_<CostContext>(m, "CostContext")
        .def_static("analytic", &CostContext::analytic, py::arg("truth"), py::arg("bins"),
                    py::arg("layout"))
        .def_static("from_histogram", &CostContext::from_histogram, py::arg("histogram"),
                    py::arg("bins"), py::arg("layout"));

    m.def("level_noise", &level_noise, py::arg("params"), py::arg("x"), py::arg("x0"));
    m.def("conditional_pdf", &conditional_pdf, py::arg("params"), py::arg("x"), py::arg("x0"),
          py::arg("y"));
    m.def("conditional_cdf", &conditional_cdf, py::arg("params"), py::arg("x"), py::arg("x0"),
          py::arg("y"));
    m.def("bin_probability", &bin_probability, py::arg("params"), py::arg("layout"),
          py::arg("level_index"), py::arg("q_lo"), py::arg("q_hi"));
    m.def("mixture_pdf", &mixture_pdf, py::arg("params"), py::arg("layout"), py::arg("y"));
    m.def("mixture_cdf", &mixture_cdf, py::arg("params"), py::arg("layout"), py::arg("y"));
    m.def("mixture_quantile", &mixture_quantile, py::arg("params"), py::arg("layout"),
          py::arg("p"));
    m.def(
        "sample_reads",
        [](const ChannelParams& p, const LevelLayout& l, std::uint64_t seed) {
            std::vector<std::pair<std::uint32_t, double>> out;
            for (const Read& r : sample_reads(p, l, seed)) out.emplace_back(r.level_index, r.y);
            return out;
        },
        py::arg("params"), py::arg("layout"), py::arg("seed"));

    m.def("equal_width_bins",
          py::overload_cast<double, double, std::size_t>(&equal_width_bins),
          py::arg("support_lo"), py::arg("support_hi"), py::arg("M"));
    m.def("equal_width_bins",
          py::overload_cast<const ChannelParams&, const LevelLayout&, std::size_t>(
              &equal_width_bins),
          py::arg("params"), py::arg("layout"), py::arg("M"));
    m.def("equal_probability_bins", &equal_probability_bins, py::arg("params"),
          py::arg("layout"), py::arg("M"));
    m.def("mmi_bins", &mmi_bins, py::arg("params"), py::arg("layout"), py::arg("M"),
          py::arg("grid_size") = 2000);
    m.def("mutual_information", &mutual_information, py::arg("params"), py::arg("layout"),
          py::arg("bins"));
    m.def("discretization_error", &discretization_error, py::arg("params"), py::arg("layout"),
          py::arg("bins"));
    m.def("effective_resolution", &effective_resolution, py::arg("params"), py::arg("layout"),
          py::arg("bins"), py::arg("threshold") = 1e-4);
    m.def(
        "measure_histogram",
        [](const std::vector<double>& samples, const BinBoundaries& bins) {
            return measure_histogram(samples, bins);
        },
        py::arg("samples"), py::arg("bins"));

    m.def("estimated_bin_counts", &estimated_bin_counts, py::arg("params"), py::arg("ctx"));
    m.def("cost", &cost, py::arg("params"), py::arg("ctx"));
    m.def("residual_vector", &residual_vector, py::arg("params"), py::arg("ctx"));
    m.def("solve_gd", &solve_gd, py::arg("ctx"), py::arg("init"),
          py::arg("config") = SolverConfig{});
    m.def("solve_gn", &solve_gn, py::arg("ctx"), py::arg("init"),
          py::arg("config") = SolverConfig{});
    m.def("solve_lm", &solve_lm, py::arg("ctx"), py::arg("init"),
          py::arg("config") = SolverConfig{});
    m.def("check_convergence", &check_convergence, py::arg("estimate"), py::arg("truth"),
          py::arg("rel_tol") = 0.01);

    m.def("default_trajectory", [] {
        std::vector<std::pair<std::uint64_t, ChannelParams>> out;
        for (const TrajectoryPoint& pt : default_trajectory()) {
            out.emplace_back(pt.pe_cycles, pt.params);
        }
        return out;
    });
}
