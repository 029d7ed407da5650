#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <limits>
#include <optional>
#include <string>

#include "hmflow/diagnostics.hpp"
#include "hmflow/experiment.hpp"
#include "hmflow/problems.hpp"
#include "hmflow/schemes.hpp"

namespace py = pybind11;
using namespace hmflow;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const NodalField& u)
{
    Array out({static_cast<py::ssize_t>(u.size()), py::ssize_t{3}});
    auto v = out.mutable_unchecked<2>();
    for (std::size_t z = 0; z < u.size(); ++z) {
        for (int c = 0; c < 3; ++c) {
            v(static_cast<py::ssize_t>(z), c) = u[z][static_cast<std::size_t>(c)];
        }
    }
    return out;
}

NodalField to_field(const Array& a, std::size_t expected)
{
    if (a.ndim() != 2 || a.shape(1) != 3 || static_cast<std::size_t>(a.shape(0)) != expected) {
        throw py::value_error("field must have shape (num_vertices, 3)");
    }
    const auto v = a.unchecked<2>();
    NodalField u(expected);
    for (std::size_t z = 0; z < expected; ++z) {
        for (int c = 0; c < 3; ++c) {
            u[z][static_cast<std::size_t>(c)] = v(static_cast<py::ssize_t>(z), c);
        }
    }
    return u;
}

Metric parse_metric(const std::string& name)
{
    if (name == "L2" || name == "l2") {
        return Metric::L2;
    }
    if (name == "H1" || name == "h1") {
        return Metric::H1;
    }
    throw py::value_error("metric must be 'L2' or 'H1'");
}

SchemeConfig make_scheme(const std::string& method, const std::string& metric, double tau,
                         std::optional<double> tolerance, std::optional<double> final_time, double theta, double mu,
                         int max_steps)
{
    if (tolerance.has_value() == final_time.has_value()) {
        throw py::value_error("give exactly one of tolerance or final_time");
    }
    StopRule stop = tolerance ? StopRule::tolerance(*tolerance) : StopRule::final_time(*final_time);
    stop.max_steps = max_steps;
    const Metric m = parse_metric(metric);
    const StepPolicy step = StepPolicy::constant(tau);
    if (method == "euler") {
        return SchemeConfig::euler(m, step, stop);
    }
    if (method == "midpoint") {
        return SchemeConfig::midpoint(m, step, stop);
    }
    if (method == "modified_euler") {
        return SchemeConfig::modified_euler(m, step, stop);
    }
    if (method == "bdf2") {
        return SchemeConfig::bdf2(m, tau, stop);
    }
    if (method == "theta_mu") {
        SchemeConfig c = SchemeConfig::euler(m, step, stop);
        c.theta = theta;
        c.mu = mu;
        return c;
    }
    throw py::value_error("unknown method '" + method + "'");
}

py::dict records_dict(const std::vector<StepRecord>& records)
{
    const auto column = [&](auto get) {
        py::array_t<double> a(static_cast<py::ssize_t>(records.size()));
        auto v = a.mutable_unchecked<1>();
        for (std::size_t i = 0; i < records.size(); ++i) {
            v(static_cast<py::ssize_t>(i)) = static_cast<double>(get(records[i]));
        }
        return a;
    };
    py::dict d;
    d["n"] = column([](const StepRecord& r) { return r.n; });
    d["t"] = column([](const StepRecord& r) { return r.t; });
    d["tau"] = column([](const StepRecord& r) { return r.tau; });
    d["energy"] = column([](const StepRecord& r) { return r.energy; });
    d["update_norm_star"] = column([](const StepRecord& r) { return r.update_norm_star; });
    d["dtu_norm_l2"] = column([](const StepRecord& r) { return r.dtu_norm_l2; });
    d["stop_quantity"] = column([](const StepRecord& r) { return r.stop_quantity; });
    d["delta_uni"] = column([](const StepRecord& r) { return r.delta_uni; });
    d["delta_inf"] = column([](const StepRecord& r) { return r.delta_inf; });
    d["a2"] = column([](const StepRecord& r) { return r.a2; });
    d["b2"] = column([](const StepRecord& r) { return r.b2; });
    d["c2"] = column([](const StepRecord& r) { return r.c2; });
    d["cg_iterations"] = column([](const StepRecord& r) { return r.cg_iterations; });
    return d;
}

py::list identity_list(const IdentityReport& report)
{
    py::list out;
    for (const auto& c : report.checks) {
        py::dict d;
        d["name"] = c.name;
        d["m_first"] = c.m_first;
        d["m_last"] = c.m_last;
        d["max_residual"] = c.max_residual;
        d["threshold"] = c.threshold;
        d["kind"] = c.kind;
        d["passed"] = c.passed();
        out.append(d);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Finite element solver for harmonic-map gradient flows into the unit sphere";

    py::register_exception<MeshError>(m, "MeshError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<Mesh>(m, "Mesh")
        .def(py::init([](const Array& vertices, const py::array_t<int, py::array::c_style | py::array::forcecast>& tris) {
                 if (vertices.ndim() != 2 || vertices.shape(1) != 2 || tris.ndim() != 2 || tris.shape(1) != 3) {
                     throw py::value_error("expected vertices (V, 2) and triangles (T, 3)");
                 }
                 std::vector<Point2> v(static_cast<std::size_t>(vertices.shape(0)));
                 const auto va = vertices.unchecked<2>();
                 for (py::ssize_t i = 0; i < vertices.shape(0); ++i) {
                     v[static_cast<std::size_t>(i)] = {va(i, 0), va(i, 1)};
                 }
                 std::vector<Triangle> t(static_cast<std::size_t>(tris.shape(0)));
                 const auto ta = tris.unchecked<2>();
                 for (py::ssize_t i = 0; i < tris.shape(0); ++i) {
                     t[static_cast<std::size_t>(i)] = {ta(i, 0), ta(i, 1), ta(i, 2)};
                 }
                 return Mesh(std::move(v), std::move(t));
             }),
             py::arg("vertices"), py::arg("triangles"))
        .def_property_readonly("num_vertices", &Mesh::num_vertices)
        .def_property_readonly("num_triangles", &Mesh::num_triangles)
        .def_property_readonly("h", &Mesh::h)
        .def_property_readonly("boundary_vertices", &Mesh::boundary_vertices)
        .def_property_readonly("free_vertices", &Mesh::free_vertices)
        .def_property_readonly("vertices",
                               [](const Mesh& mesh) {
                                   Array a({static_cast<py::ssize_t>(mesh.num_vertices()), py::ssize_t{2}});
                                   auto v = a.mutable_unchecked<2>();
                                   for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
                                       v(static_cast<py::ssize_t>(i), 0) = mesh.vertices()[i][0];
                                       v(static_cast<py::ssize_t>(i), 1) = mesh.vertices()[i][1];
                                   }
                                   return a;
                               })
        .def_property_readonly("triangles",
                               [](const Mesh& mesh) {
                                   py::array_t<int> a({static_cast<py::ssize_t>(mesh.num_triangles()), py::ssize_t{3}});
                                   auto v = a.mutable_unchecked<2>();
                                   for (std::size_t i = 0; i < mesh.num_triangles(); ++i) {
                                       for (int c = 0; c < 3; ++c) {
                                           v(static_cast<py::ssize_t>(i), c) = mesh.triangles()[i][static_cast<std::size_t>(c)];
                                       }
                                   }
                                   return a;
                               })
        .def("to_text", &format_mesh)
        .def("__eq__", [](const Mesh& a, const Mesh& b) { return a == b; });

    m.def("structured_mesh", &generate_structured_mesh, py::arg("n"));
    m.def("load_mesh", &load_mesh, py::arg("path"));
    m.def("parse_mesh", &parse_mesh, py::arg("text"));

    m.def("problem_names", &problem_names);
    m.def(
        "initial_value",
        [](const std::string& problem, const Mesh& mesh) {
            return to_array(nodal_interpolate(make_problem(problem).initial_value, mesh));
        },
        py::arg("problem"), py::arg("mesh"), "Nodal interpolant of a named problem's initial value.");
    m.def("reference_energy_stereographic", &reference_energy_stereographic);

    m.def(
        "dirichlet_energy",
        [](const Mesh& mesh, const Array& u) {
            return dirichlet_energy(to_field(u, mesh.num_vertices()), assemble_stiffness(mesh));
        },
        py::arg("mesh"), py::arg("u"));
    m.def(
        "constraint_violation",
        [](const Mesh& mesh, const Array& u) {
            const NodalField f = to_field(u, mesh.num_vertices());
            return py::make_tuple(constraint_violation_linf(f), constraint_violation_l1(f, assemble_mass(mesh, true)));
        },
        py::arg("mesh"), py::arg("u"), "Returns (delta_inf, delta_uni).");
    m.def("eoc", &eoc, py::arg("errors"), py::arg("steps"));

    m.def(
        "run_flow",
        [](const Mesh& mesh, const Array& u0, const std::string& method, const std::string& metric, double tau,
           std::optional<double> tolerance, std::optional<double> final_time, double theta, double mu, int max_steps,
           bool verify) {
            SchemeConfig cfg = make_scheme(method, metric, tau, tolerance, final_time, theta, mu, max_steps);
            cfg.keep_fields = verify;
            const Operators ops = assemble_operators(mesh);
            const NodalField start = to_field(u0, mesh.num_vertices());
            FlowResult r;
            {
                py::gil_scoped_release release;
                r = run_flow(cfg, start, mesh, ops);
            }
            py::dict out;
            out["records"] = records_dict(r.records);
            out["steps"] = r.steps();
            out["stopped_by"] = to_string(r.stopped_by);
            out["failure"] = r.failure;
            out["final_field"] = to_array(r.final_field);
            out["harmonic_map"] = to_array(r.harmonic_map);
            if (verify) {
                out["identities"] = identity_list(verify_identities(r.trajectory, cfg, mesh, ops));
            }
            return out;
        },
        py::arg("mesh"), py::arg("u0"), py::arg("method") = "midpoint", py::arg("metric") = "H1",
        py::arg("tau") = 0.0625, py::arg("tolerance") = std::nullopt, py::arg("final_time") = std::nullopt,
        py::arg("theta") = 0.5, py::arg("mu") = 0.5, py::arg("max_steps") = 1'000'000, py::arg("verify") = false);

    m.def(
        "run_experiment",
        [](const std::string& config_text, int threads, const std::filesystem::path& base_dir) {
            const ExperimentConfig cfg = parse_experiment_config(config_text, base_dir);
            ExperimentResult r;
            {
                py::gil_scoped_release release;
                r = run_experiment(cfg, threads);
            }
            py::dict out;
            out["summary_csv"] = format_summary_csv(r);
            out["table_csv"] = format_table_csv(cfg, r);
            out["eoc_uni"] = r.eoc_uni;
            out["eoc_inf"] = r.eoc_inf;
            out["any_failure"] = r.any_failure();
            return out;
        },
        py::arg("config_text"), py::arg("threads") = 1, py::arg("base_dir") = std::filesystem::path{},
        "Runs an experiment described in the text config format; returns summary and table CSV text.");
}
