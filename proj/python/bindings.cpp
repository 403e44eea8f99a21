#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "wigner2e/bbgky.hpp"
#include "wigner2e/diagnostics.hpp"
#include "wigner2e/force_model.hpp"
#include "wigner2e/scenario.hpp"
#include "wigner2e/single_electron.hpp"
#include "wigner2e/two_electron.hpp"

namespace py = pybind11;
using namespace wigner2e;

namespace {

py::array_t<double> as_array(const WignerState& f) {
    std::vector<py::ssize_t> shape;
    for (int n : f.shape()) shape.push_back(n);
    py::array_t<double> out(shape);
    std::copy(f.data(), f.data() + f.size(), out.mutable_data());
    return out;
}

WignerState from_array(const WignerGrid& g, int electrons, py::array_t<double, py::array::c_style | py::array::forcecast> a,
                       double t) {
    const auto expected = WignerState::zeros(g, electrons == 2 ? Arity::two : Arity::one).size();
    if (std::size_t(a.size()) != expected)
        throw ValidationError("array size " + std::to_string(a.size()) + " does not match the grid (" +
                              std::to_string(expected) + " cells)");
    return WignerState(g, electrons == 2 ? Arity::two : Arity::one, std::vector<double>(a.data(), a.data() + a.size()),
                       t);
}

py::dict series_dict(const ObservableSeries& s) {
    py::dict d;
    for (const auto& c : s.columns()) d[py::str(c)] = s.column(c);
    return d;
}

Vec2 vec(const std::vector<double>& v) {
    if (v.empty() || v.size() > 2) throw ValidationError("expected 1 or 2 components");
    return {v[0], v.size() > 1 ? v[1] : 0.0};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Two-electron Wigner transport: grids, solvers and diagnostics";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<CostGuardError>(m, "CostGuardError", PyExc_RuntimeError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_RuntimeError);
    py::register_exception<NumericalGuardError>(m, "NumericalGuardError", PyExc_RuntimeError);

    py::class_<WignerGrid>(m, "WignerGrid")
        .def(py::init(&WignerGrid::make), py::arg("d"), py::arg("n_x"), py::arg("x_min"), py::arg("x_max"),
             py::arg("coherence_length"), py::arg("n_p"))
        .def_readonly("d", &WignerGrid::d)
        .def_readonly("n_x", &WignerGrid::n_x)
        .def_readonly("n_p", &WignerGrid::n_p)
        .def_readonly("x_min", &WignerGrid::x_min)
        .def_readonly("x_max", &WignerGrid::x_max)
        .def_readonly("coherence_length", &WignerGrid::coherence_length)
        .def_property_readonly("dx", &WignerGrid::dx)
        .def_property_readonly("dp", &WignerGrid::dp)
        .def("x", [](const WignerGrid& g) {
            std::vector<double> v;
            for (int i = 0; i < g.n_x; ++i) v.push_back(g.x(i));
            return v;
        })
        .def("p", [](const WignerGrid& g) {
            std::vector<double> v;
            for (int n = 0; n < g.n_p; ++n) v.push_back(g.p(n));
            return v;
        })
        .def("__repr__", &WignerGrid::describe);

    py::class_<GaussianPacket>(m, "GaussianPacket")
        .def(py::init([](std::vector<double> r, std::vector<double> p, std::vector<double> s) {
                 return GaussianPacket{std::move(r), std::move(p), std::move(s)};
             }),
             py::arg("center_r"), py::arg("center_p"), py::arg("sigma"))
        .def_readonly("center_r", &GaussianPacket::center_r)
        .def_readonly("center_p", &GaussianPacket::center_p)
        .def_readonly("sigma", &GaussianPacket::sigma);

    py::class_<WignerState>(m, "WignerState")
        .def(py::init(&from_array), py::arg("grid"), py::arg("electrons"), py::arg("values"), py::arg("t") = 0.0)
        .def_property_readonly("grid", &WignerState::grid)
        .def_property_readonly("electrons", &WignerState::electrons)
        .def_property_readonly("time", &WignerState::time)
        .def_property_readonly("values", &as_array)
        .def("integral", &WignerState::integral)
        .def("l2_norm", &WignerState::l2_norm);

    m.def("gaussian_state", &make_gaussian_state, py::arg("packet"), py::arg("grid"));
    m.def("weyl_oracle_gaussian", &weyl_oracle_gaussian, py::arg("packet"), py::arg("grid"),
          py::arg("nodes_per_sigma") = 8);
    m.def("tensor_product", &tensor_product);
    m.def("marginal", &marginal, py::arg("state"), py::arg("keep"));
    m.def("purity", &purity);
    m.def("reduced_purity", &reduced_purity, py::arg("state"), py::arg("electron"));
    m.def("separability_metric", &separability_metric);
    m.def("model_distance", [](const WignerState& a, const WignerState& b) { return model_distance(a, b); });

    m.def(
        "evolve_1e",
        [](const WignerState& f0, double T, double dt, double B0, double quadratic_k, int output_every) {
            FieldConfig fields;
            fields.B0 = B0;
            SolverConfig1e sc;
            sc.dt = dt;
            const auto K = quadratic_k == 0.0 ? PotentialKernel::zero(f0.grid())
                                              : wigner_kernel_1e(PotentialSpec::quadratic(quadratic_k), f0.grid());
            const auto ev = evolve_1e(f0, T, fields, K, sc, output_every);
            return py::make_tuple(ev.final_state, series_dict(ev.series));
        },
        py::arg("state"), py::arg("T"), py::arg("dt") = 1e-3, py::arg("B0") = 0.0, py::arg("quadratic_k") = 0.0,
        py::arg("output_every") = 1);

    m.def(
        "evolve_2e",
        [](const WignerState& f0, double T, double dt, double coupling_lambda, double epsilon, int output_every) {
            UnitSystem u;
            u.coupling_lambda = coupling_lambda;
            const auto& g = f0.grid();
            const Kernels2e K{PotentialKernel::zero(g), PotentialKernel::zero(g),
                              coulomb_kernel_2e(u, PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, epsilon), g)};
            SolverConfig2e sc;
            sc.dt = dt;
            const auto ev = evolve_2e(f0, T, K, sc, output_every);
            return py::make_tuple(ev.final_state, series_dict(ev.series));
        },
        py::arg("state"), py::arg("T"), py::arg("dt") = 1e-3, py::arg("coupling_lambda") = 1.0,
        py::arg("epsilon") = 1.0, py::arg("output_every") = 1);

    m.def(
        "closest_approach",
        [](const GaussianPacket& a, const GaussianPacket& b, double t_max, double coupling_lambda, double epsilon) {
            ForceModelConfig cfg;
            cfg.system.d = int(a.center_r.size());
            cfg.system.units.coupling_lambda = coupling_lambda;
            cfg.system.interaction.softening = epsilon;
            const auto c = closest_approach(a, b, t_max, cfg);
            return py::make_tuple(c.t, c.distance);
        },
        py::arg("packet1"), py::arg("packet2"), py::arg("t_max"), py::arg("coupling_lambda") = 1.0,
        py::arg("epsilon") = 1.0);

    m.def(
        "separability_certificate",
        [](const GaussianPacket& a, const GaussianPacket& b, double t, double coupling_lambda, double epsilon,
           int points_per_axis) {
            ForceModelConfig cfg;
            cfg.system.d = int(a.center_r.size());
            cfg.system.interaction.softening = epsilon;
            ProbeSet probes;
            probes.points_per_axis = points_per_axis;
            const auto r = separability_certificate(a, b, t, coupling_lambda, probes, cfg);
            py::dict d;
            d["t"] = r.t;
            d["coulomb_residual"] = r.coulomb_residual;
            d["control_residual"] = r.control_residual;
            d["probes"] = r.probes;
            d["expansion_ratio"] = r.expansion_ratio;
            return d;
        },
        py::arg("packet1"), py::arg("packet2"), py::arg("t"), py::arg("coupling_lambda") = 1.0,
        py::arg("epsilon") = 1.0, py::arg("points_per_axis") = 15);

    m.def(
        "propagate_2e",
        [](std::vector<double> r1, std::vector<double> P1, std::vector<double> r2, std::vector<double> P2,
           double t_from, double t_to, double coupling_lambda, double epsilon, double B0, double h) {
            TwoBodySystem sys;
            sys.d = int(r1.size());
            sys.units.coupling_lambda = coupling_lambda;
            sys.interaction = PotentialSpec::coulomb(PotentialKind::coulomb3d, 1.0, epsilon);
            sys.fields.B0 = B0;
            sys.validate();
            const auto p = propagate_2e({vec(r1), vec(P1), vec(r2), vec(P2)}, t_from, t_to, sys, h);
            auto out = [&](Vec2 v) {
                return sys.d == 1 ? std::vector<double>{v.x} : std::vector<double>{v.x, v.y};
            };
            return py::make_tuple(out(p.r1), out(p.P1), out(p.r2), out(p.P2));
        },
        py::arg("r1"), py::arg("P1"), py::arg("r2"), py::arg("P2"), py::arg("t_from"), py::arg("t_to"),
        py::arg("coupling_lambda") = 1.0, py::arg("epsilon") = 1.0, py::arg("B0") = 0.0, py::arg("h") = 1e-3);

    m.def("list_scenarios", &list_scenarios);
    m.def("bundled_scenario", &bundled_scenario, py::arg("name"));
    m.def("validate_scenario", [](const std::string& json_text) { return scenario_to_json(parse_scenario(json_text)); },
          py::arg("json_text"), "Parses and validates a scenario; returns the resolved configuration as JSON text.");
    m.def(
        "run_scenario",
        [](const std::string& path_or_name, const std::string& output_dir, std::optional<std::uint64_t> seed,
           int threads) {
            RunOptions opt;
            opt.output_directory = output_dir;
            opt.seed = seed;
            opt.threads = threads;
            RunResult r;
            try {
                r = run_scenario(load_scenario(path_or_name), opt);
            } catch (const SchemaError& e) {
                r.status = RunStatus::schema;
                r.message = e.what();
            }
            py::dict d;
            d["exit_code"] = r.exit_code();
            d["message"] = r.message;
            d["directory"] = r.directory.string();
            d["artifacts"] = r.artifacts;
            py::dict series;
            for (const auto& [name, s] : r.series) series[py::str(name)] = series_dict(s);
            d["series"] = series;
            return d;
        },
        py::arg("config"), py::arg("output_dir") = "", py::arg("seed") = py::none(), py::arg("threads") = 1);
}
