#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "agestruct/comparison.hpp"
#include "agestruct/errors.hpp"
#include "agestruct/invariance.hpp"
#include "agestruct/scenario.hpp"
#include "agestruct/spectral.hpp"

namespace py = pybind11;
using namespace agestruct;

namespace {

AgeProfile profile_from_values(double a_max, int n_cells, std::vector<double> values, int dim)
{
    return AgeProfile(make_grid(a_max, n_cells), std::move(values), dim);
}

// python-side coefficient: f(coupling: list[float], age: float) -> float | list[list[float]]
CoefficientFn wrap_coefficient(py::function f, int dim)
{
    return [f, dim](std::span<const double> coupling, double age) {
        py::gil_scoped_acquire gil;
        std::vector<double> c(coupling.begin(), coupling.end());
        py::object r = f(c, age);
        SmallMat m(dim);
        if (dim == 1) {
            try {
                m(0, 0) = r.cast<double>();
                return m;
            } catch (const py::cast_error&) {
            }
        }
        auto rows = r.cast<std::vector<std::vector<double>>>();
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) m(i, j) = rows.at(i).at(j);
        return m;
    };
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "age-structured population model solvers and verification tools";

    py::register_exception<StepSizeError>(m, "StepSizeError");
    py::register_exception<NoRootError>(m, "NoRootError");
    py::register_exception<DivergenceError>(m, "DivergenceError");
    py::register_exception<ConfigError>(m, "ConfigError");

    py::class_<AgeProfile>(m, "Profile")
        .def(py::init(&profile_from_values), py::arg("a_max"), py::arg("n_cells"),
             py::arg("values"), py::arg("dim") = 1)
        .def_static(
            "constant",
            [](double a_max, int n_cells, double value, int dim) {
                return AgeProfile::constant(make_grid(a_max, n_cells), value, dim);
            },
            py::arg("a_max"), py::arg("n_cells"), py::arg("value"), py::arg("dim") = 1)
        .def_static(
            "indicator",
            [](double a_max, int n_cells, double lo, double hi) {
                return AgeProfile::indicator(make_grid(a_max, n_cells), lo, hi);
            },
            py::arg("a_max"), py::arg("n_cells"), py::arg("lo"), py::arg("hi"))
        .def_property_readonly("dim", &AgeProfile::dim)
        .def_property_readonly("a_max", [](const AgeProfile& p) { return p.grid().a_max; })
        .def_property_readonly("n_cells", [](const AgeProfile& p) { return p.grid().n_cells; })
        .def_property_readonly("da", [](const AgeProfile& p) { return p.grid().da; })
        .def("nodes", [](const AgeProfile& p) { return p.grid().nodes; })
        .def("values", [](const AgeProfile& p) { return p.raw(); })
        .def("integrate", [](const AgeProfile& p) { return integrate(p); })
        .def("integrate_with",
             [](const AgeProfile& p, const AgeProfile& kernel) { return integrate(p, kernel); })
        .def("max_abs", &AgeProfile::max_abs);

    m.def("le", py::overload_cast<const AgeProfile&, const AgeProfile&, double>(&le),
          py::arg("p"), py::arg("q"), py::arg("tol"));

    py::class_<SirParams>(m, "SirParams")
        .def(py::init<>())
        .def_readwrite("recruitment", &SirParams::recruitment)
        .def_readwrite("susceptible_death", &SirParams::susceptible_death)
        .def_readwrite("transmission", &SirParams::transmission)
        .def_readwrite("infectivity", &SirParams::infectivity)
        .def_readwrite("removal", &SirParams::removal)
        .def_readwrite("removal_floor", &SirParams::removal_floor);

    py::class_<SirState>(m, "SirState")
        .def(py::init<>())
        .def_readwrite("S", &SirState::S)
        .def_readwrite("i", &SirState::i);

    py::class_<SirBounds>(m, "SirBounds")
        .def_readonly("S_minus", &SirBounds::S_minus)
        .def_readonly("S_plus", &SirBounds::S_plus)
        .def_readonly("M", &SirBounds::M);

    py::class_<HivParams>(m, "HivParams")
        .def(py::init<>())
        .def_readwrite("supply", &HivParams::supply)
        .def_readwrite("cell_death", &HivParams::cell_death)
        .def_readwrite("infection_rate", &HivParams::infection_rate)
        .def_readwrite("clearance", &HivParams::clearance)
        .def_readwrite("production", &HivParams::production)
        .def_readwrite("infected_death", &HivParams::infected_death)
        .def_readwrite("infected_death_floor", &HivParams::infected_death_floor);

    py::class_<HivState>(m, "HivState")
        .def(py::init<>())
        .def_readwrite("T", &HivState::T)
        .def_readwrite("V", &HivState::V)
        .def_readwrite("i", &HivState::i);

    py::class_<HivBounds>(m, "HivBounds")
        .def_readonly("T_minus", &HivBounds::T_minus)
        .def_readonly("T_plus", &HivBounds::T_plus)
        .def_readonly("V_cap", &HivBounds::V_cap)
        .def_readonly("d1", &HivBounds::d1);

    py::class_<Trajectory>(m, "Trajectory")
        .def_readonly("times", &Trajectory::times)
        .def_readonly("S", &Trajectory::S)
        .def_readonly("T", &Trajectory::T)
        .def_readonly("V", &Trajectory::V)
        .def_readonly("mass", &Trajectory::mass)
        .def_readonly("flux", &Trajectory::flux)
        .def_readonly("dropped_mass", &Trajectory::dropped_mass)
        .def("profile", [](const Trajectory& t, std::size_t k) { return t.profiles.at(k); })
        .def("__len__", [](const Trajectory& t) { return t.size(); });

    m.def("sir_simulate", &sir_simulate, py::arg("state"), py::arg("params"), py::arg("horizon"));
    m.def("sir_bounds", &sir_bounds, py::arg("state"), py::arg("params"));
    m.def("sir_frozen_simulate", &sir_frozen_simulate, py::arg("i0"), py::arg("S_frozen"),
          py::arg("params"), py::arg("horizon"));
    m.def("hiv_simulate", &hiv_simulate, py::arg("state"), py::arg("params"), py::arg("horizon"));
    m.def("hiv_bounds", &hiv_bounds, py::arg("state"), py::arg("params"));
    m.def("hiv_frozen_simulate", &hiv_frozen_simulate, py::arg("i0"), py::arg("V0"),
          py::arg("T_frozen"), py::arg("params"), py::arg("horizon"));

    py::class_<SpectralData>(m, "SpectralData")
        .def_readonly("growth_rate", &SpectralData::growth_rate)
        .def_readonly("eigenprofile", &SpectralData::eigenprofile)
        .def_readonly("head_coeff", &SpectralData::head_coeff);

    m.def("growth_rate_sir", &growth_rate_sir, py::arg("S_frozen"), py::arg("params"));
    m.def("growth_rate_hiv", &growth_rate_hiv, py::arg("T_frozen"), py::arg("params"));
    m.def("growth_rate_sir_refined", &growth_rate_sir_refined, py::arg("S_frozen"), py::arg("params"));
    m.def("growth_rate_hiv_refined", &growth_rate_hiv_refined, py::arg("T_frozen"), py::arg("params"));
    m.def("spectral_sir", &spectral_sir, py::arg("S_frozen"), py::arg("params"));
    m.def("spectral_hiv", &spectral_hiv, py::arg("T_frozen"), py::arg("params"));
    m.def("invariant_functional",
          py::overload_cast<const SpectralData&, double, const AgeProfile&>(&invariant_functional),
          py::arg("spectral"), py::arg("V"), py::arg("i"));
    m.def("conservation_residual", &conservation_residual, py::arg("trajectory"), py::arg("spectral"));

    py::class_<SandwichReport>(m, "SandwichReport")
        .def_readonly("ok", &SandwichReport::ok)
        .def_readonly("worst_lower_margin", &SandwichReport::worst_lower_margin)
        .def_readonly("worst_upper_margin", &SandwichReport::worst_upper_margin)
        .def_readonly("worst_head_margin", &SandwichReport::worst_head_margin);

    m.def("sandwich_verify", &sandwich_verify, py::arg("lower"), py::arg("mid"), py::arg("upper"),
          py::arg("tol"));

    m.def("kernel_support_end", &kernel_support_end, py::arg("kernel"));

    py::enum_<Region>(m, "Region")
        .value("Interior", Region::Interior)
        .value("Boundary", Region::Boundary);

    py::class_<RegionVerdict>(m, "RegionVerdict")
        .def_readonly("region", &RegionVerdict::region)
        .def_readonly("mass_below_cutoff", &RegionVerdict::mass_below_cutoff)
        .def_readonly("head", &RegionVerdict::head);

    m.def("classify_region", &classify_region, py::arg("i"), py::arg("cutoff"), py::arg("tol_mass"),
          py::arg("head") = 0.0);
    m.def(
        "pure_transport",
        [](const AgeProfile& i0, const AgeProfile& rate, double t) {
            return explicit_boundary_solution(i0, survival_from_rate(rate), t);
        },
        py::arg("i0"), py::arg("rate"), py::arg("t"),
        "transport i0 for time t with the survival implied by the decay rate and zero inflow");
    m.def("default_tol_mass", &default_tol_mass, py::arg("i0"), py::arg("head") = 0.0);

    py::class_<InvarianceReport>(m, "InvarianceReport")
        .def_readonly("ok", &InvarianceReport::ok)
        .def_readonly("region_constant", &InvarianceReport::region_constant)
        .def_readonly("worst_flux", &InvarianceReport::worst_flux)
        .def_readonly("decay_ok", &InvarianceReport::decay_ok)
        .def_readonly("min_mass_below", &InvarianceReport::min_mass_below);

    m.def("invariance_check", &invariance_check, py::arg("trajectory"), py::arg("cutoff"),
          py::arg("tol_mass"));

    py::class_<IterationReport>(m, "IterationReport")
        .def_readonly("converged", &IterationReport::converged)
        .def_readonly("final_gap", &IterationReport::final_gap)
        .def_readonly("total_iterations", &IterationReport::total_iterations)
        .def_readonly("monotone_flags", &IterationReport::monotone_flags)
        .def_readonly("gamma_verified", &IterationReport::gamma_verified)
        .def_readonly("fixed_point", &IterationReport::fixed_point);

    m.def(
        "iterate_sir_frozen",
        [](const AgeProfile& i0, double S_frozen, const SirParams& p, double horizon, int max_iter) {
            const SweepModel model = sweep_sir_frozen(S_frozen, p);
            return monotone_iterate(constant_seed(i0), model, model.gamma_suggested, horizon,
                                    max_iter);
        },
        py::arg("i0"), py::arg("S_frozen"), py::arg("params"), py::arg("horizon"),
        py::arg("max_iter") = 200,
        "fixed-point sweep for the frozen system started from the constant-in-time seed");

    py::class_<RenewalReport>(m, "RenewalReport")
        .def_readonly("iterates", &RenewalReport::iterates)
        .def_readonly("monotone_flags", &RenewalReport::monotone_flags)
        .def_readonly("limit", &RenewalReport::limit);

    m.def(
        "renewal_iterate",
        [](const AgeProfile& i0, double S_plus, const SirParams& p, double horizon, int n_iter,
           std::vector<double> B0) {
            return renewal_iterate(i0, S_plus, p, horizon, n_iter, B0);
        },
        py::arg("i0"), py::arg("S_plus"), py::arg("params"), py::arg("horizon"), py::arg("n_iter"),
        py::arg("B0") = std::vector<double>{});

    py::class_<GeneralParams>(m, "GeneralParams")
        .def(py::init<>())
        .def_readwrite("dim", &GeneralParams::dim)
        .def_readwrite("mortality_coupling", &GeneralParams::mortality_coupling)
        .def_readwrite("birth_coupling", &GeneralParams::birth_coupling)
        .def_readwrite("p_exponent", &GeneralParams::p_exponent)
        .def("set_mortality",
             [](GeneralParams& p, py::function f) { p.mortality = wrap_coefficient(f, p.dim); })
        .def("set_birth",
             [](GeneralParams& p, py::function f) { p.birth = wrap_coefficient(f, p.dim); });

    py::class_<GeneralState>(m, "GeneralState")
        .def(py::init<>())
        .def_readwrite("u", &GeneralState::u);

    m.def("apply_birth", &apply_birth, py::arg("phi"), py::arg("params"));
    m.def("apply_mortality", &apply_mortality, py::arg("phi"), py::arg("params"));
    m.def("general_simulate", &general_simulate, py::arg("state"), py::arg("params"),
          py::arg("horizon"));

    py::enum_<MonotoneClass>(m, "MonotoneClass")
        .value("Increasing", MonotoneClass::Increasing)
        .value("Decreasing", MonotoneClass::Decreasing)
        .value("Neither", MonotoneClass::Neither);

    py::class_<MonotoneCheckResult>(m, "MonotoneCheckResult")
        .def_readonly("cls", &MonotoneCheckResult::cls)
        .def_readonly("datum_ok", &MonotoneCheckResult::datum_ok)
        .def_readonly("trajectory_ok", &MonotoneCheckResult::trajectory_ok)
        .def_readonly("worst_violation", &MonotoneCheckResult::worst_violation);

    m.def("trajectory_monotone_check", &trajectory_monotone_check, py::arg("state"),
          py::arg("params"), py::arg("horizon"));

    py::class_<ProbeResult>(m, "ProbeResult")
        .def_readonly("certified", &ProbeResult::certified)
        .def_readonly("gamma", &ProbeResult::gamma)
        .def_readonly("gamma_exhausted", &ProbeResult::gamma_exhausted)
        .def_readonly("violated", &ProbeResult::violated);

    m.def("monotonicity_probe", &monotonicity_probe, py::arg("params"), py::arg("norm_bound"),
          py::arg("samples"), py::arg("seed"));

    m.def(
        "run_scenario",
        [](const std::string& config_text, const std::string& output_dir, const std::string& mode,
           bool quiet, int levels) {
            const Scenario sc = parse_config(config_text);
            RunOptions opts;
            opts.output_dir = output_dir;
            opts.quiet = quiet;
            opts.levels = levels;
            if (mode == "simulate") opts.mode = RunMode::Simulate;
            else if (mode == "bounds") opts.mode = RunMode::Bounds;
            else if (mode == "spectral") opts.mode = RunMode::Spectral;
            else if (mode == "compare") opts.mode = RunMode::Compare;
            else if (mode == "invariance") opts.mode = RunMode::Invariance;
            else if (mode == "probe") opts.mode = RunMode::Probe;
            else if (mode == "convergence") opts.mode = RunMode::Convergence;
            else throw std::invalid_argument("unknown mode: " + mode);
            py::gil_scoped_release release;
            return run_scenario(sc, opts);
        },
        py::arg("config_text"), py::arg("output_dir") = std::string{},
        py::arg("mode") = std::string("simulate"), py::arg("quiet") = true, py::arg("levels") = 3,
        "parse a JSON scenario, run it, write artifacts, return the exit status");
}
