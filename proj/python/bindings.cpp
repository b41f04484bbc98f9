#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fdelab/cli_reports.hpp"
#include "fdelab/error.hpp"
#include "fdelab/inner_matching.hpp"
#include "fdelab/outer_profiles.hpp"
#include "fdelab/params.hpp"
#include "fdelab/pde_lab.hpp"
#include "fdelab/self_similar.hpp"

namespace py = pybind11;
using namespace fdelab;

namespace {

py::tuple jet_tuple(const Jet& j) { return py::make_tuple(j.value, j.d1, j.d2); }

}  // namespace

PYBIND11_MODULE(_fdelab, m) {
    m.doc() = "Barrier construction and comparison lab for the fast diffusion equation";
    py::register_exception<Error>(m, "FdelabError", PyExc_RuntimeError);

    py::enum_<Sign>(m, "Sign").value("plus", Sign::plus).value("minus", Sign::minus);
    py::enum_<BoundaryChoice>(m, "BoundaryChoice")
        .value("lower", BoundaryChoice::lower)
        .value("upper", BoundaryChoice::upper)
        .value("mean", BoundaryChoice::mean);

    py::class_<ModelParams>(m, "ModelParams")
        .def(py::init<>())
        .def_static("with_defaults", &ModelParams::with_defaults, py::arg("n"), py::arg("m"), py::arg("gamma"),
                    py::arg("A"), py::arg("T") = 1.0, py::arg("lambda_") = 1.0)
        .def_readwrite("n", &ModelParams::n)
        .def_readwrite("m", &ModelParams::m)
        .def_readwrite("gamma", &ModelParams::gamma)
        .def_readwrite("A", &ModelParams::A)
        .def_readwrite("T", &ModelParams::T)
        .def_readwrite("lambda_", &ModelParams::lambda)
        .def_readwrite("theta1_minus", &ModelParams::theta1_minus)
        .def_readwrite("theta1_plus", &ModelParams::theta1_plus)
        .def_readwrite("theta2_minus", &ModelParams::theta2_minus)
        .def_readwrite("theta2_plus", &ModelParams::theta2_plus)
        .def_readwrite("epsilon", &ModelParams::epsilon);

    m.def("derive_constants", [](const ModelParams& p) {
        const DerivedConstants d = derive_constants(p);
        py::dict out;
        out["a0"] = d.a0;
        out["b1"] = d.b1;
        out["b2"] = d.b2;
        out["N"] = d.N;
        out["exponent_rate"] = d.exponent_rate;
        out["beta"] = d.beta;
        out["slope_limit"] = d.slope_limit;
        return out;
    });
    m.def("theta_violations", &theta_violations);

    py::class_<OuterProfiles>(m, "OuterProfiles")
        .def(py::init([](const ModelParams& p, std::vector<double> seeds) {
                 return OuterProfiles(p, ThresholdConfig{}, std::move(seeds));
             }),
             py::arg("params"), py::arg("seeds") = std::vector<double>{})
        .def_property_readonly("eta0", &OuterProfiles::eta0)
        .def_property_readonly("C2", &OuterProfiles::C2)
        .def_property_readonly("C10", &OuterProfiles::C10)
        .def(
            "phi", [](const OuterProfiles& o, int i, double offset) {
                const PointData pt = o.point({offset});
                if (i == 0) return jet_tuple(o.phi0(pt));
                if (i == 4) return jet_tuple(o.phi4(pt));
                return jet_tuple(o.phi(i, pt));
            },
            py::arg("i"), py::arg("eta_offset"), "(value, d/deta, d2/deta2) of phi_i at eta = A + eta_offset");

    py::class_<SelfSimilarProfile>(m, "SelfSimilarProfile")
        .def_static("shoot", [](const ModelParams& p) { return SelfSimilarProfile::shoot(p); })
        .def("value", &SelfSimilarProfile::value)
        .def("slope", &SelfSimilarProfile::slope)
        .def("v0", &SelfSimilarProfile::v0)
        .def("stationary_residual", &SelfSimilarProfile::stationary_residual)
        .def_property_readonly("s_min", &SelfSimilarProfile::s_min)
        .def_property_readonly("s_max", &SelfSimilarProfile::s_max)
        .def_property_readonly("slope_limit", &SelfSimilarProfile::slope_limit);

    py::class_<Matching>(m, "Matching")
        .def(py::init<const OuterProfiles&, const SelfSimilarProfile&, double>(), py::keep_alive<1, 2>(),
             py::keep_alive<1, 3>(), py::arg("outer"), py::arg("inner"), py::arg("xi1"))
        .def_property_readonly("xi1", &Matching::xi1)
        .def("solve", &Matching::solve, py::arg("sign"), py::arg("eps"), py::arg("tau"))
        .def(
            "glued", [](const Matching& mt, Sign s, double eps, double xi, double tau) { return mt.glued(s, eps, xi, tau).value; },
            py::arg("sign"), py::arg("eps"), py::arg("xi"), py::arg("tau"));

    m.def(
        "initial_w_bar",
        [](const Matching& mt, double eps, double tau0, double xi_lo, double xi_hi, int points, BoundaryChoice c) {
            return initial_w_bar(mt, eps, tau0, GridSpec{xi_lo, xi_hi, points, 0.02}, c);
        },
        py::arg("matching"), py::arg("eps"), py::arg("tau0"), py::arg("xi_lo"), py::arg("xi_hi"), py::arg("points"),
        py::arg("choice"));

    m.def(
        "manufactured_convergence",
        [](const ModelParams& p, int points, double dtau) {
            const ConvergenceReport r = manufactured_convergence(p, points, dtau);
            py::dict out;
            out["err_coarse"] = r.err_coarse;
            out["err_fine"] = r.err_fine;
            out["ratio"] = r.ratio;
            out["constant"] = r.constant;
            return out;
        },
        py::arg("params"), py::arg("points") = 41, py::arg("dtau") = 0.05);

    m.def("canonical_config", [](const std::string& text) { return canonical_config(parse_config(text)); },
          py::arg("config_text"));
    m.def(
        "run_command",
        [](const std::string& command, const std::string& config_text, const std::filesystem::path& out_dir,
           bool force, bool dry_run) {
            RunConfig cfg = parse_config(config_text);
            cfg.command = command_from_string(command);
            cfg.out_dir = out_dir;
            cfg.force = force;
            cfg.dry_run = dry_run;
            RunResult r;
            {
                py::gil_scoped_release release;
                r = run_command(cfg);
            }
            py::dict out;
            out["pass"] = r.pass;
            out["dir"] = r.dir;
            out["artifacts"] = r.artifacts;
            out["summary_json"] = r.summary_json;
            out["plan"] = r.plan;
            return out;
        },
        py::arg("command"), py::arg("config_text") = "", py::arg("out_dir") = "fdelab_out", py::arg("force") = false,
        py::arg("dry_run") = false);
}
