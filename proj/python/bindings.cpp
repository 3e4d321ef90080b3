#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pcf/acceptance.hpp"
#include "pcf/errors.hpp"
#include "pcf/experiments.hpp"
#include "pcf/homogeneous.hpp"
#include "pcf/potential.hpp"

namespace py = pybind11;
using pcf::json;

namespace {

// dicts cross the boundary as JSON text
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }
json from_py(const py::object& o) {
    return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict integrate_model(const std::string& name, const std::vector<double>& h0, double t_end, bool normalized) {
    if (h0.size() != 4) throw pcf::ValidationError("initial metric needs (a, b, r, s)");
    pcf::LieModel m = pcf::build_model(name);
    pcf::Trajectory tr = pcf::integrate(m, {h0[0], h0[1], h0[2], h0[3]}, t_end, normalized);
    std::size_t n = tr.times.size();
    py::array_t<double> states({n, std::size_t(4)}), eig({n, std::size_t(4)});
    auto S = states.mutable_unchecked<2>();
    auto E = eig.mutable_unchecked<2>();
    for (std::size_t i = 0; i < n; ++i)
        for (int a = 0; a < 4; ++a) {
            S(i, a) = tr.states[i].vec()(a);
            E(i, a) = tr.eig[i](a);
        }
    py::dict d;
    d["t"] = tr.times;
    d["states"] = states;
    d["eigenvalues"] = eig;
    d["rm"] = tr.rm;
    d["singular"] = tr.singular;
    if (!tr.singular && t_end >= 100) {
        pcf::Classification c = pcf::classify_asymptotics(m, tr);
        d["verdict"] = pcf::to_string(c.verdict);
        d["collapse"] = c.collapse;
    }
    return d;
}

py::dict formulation_report(int n, std::uint64_t seed, int nmodes, int kmax, double amplitude) {
    pcf::HermField w = pcf::random_alpha(seed, nmodes, kmax, amplitude).metric_field(pcf::ChartGrid(n));
    auto r = pcf::pcf_rhs(w).report;
    py::dict d;
    d["sup_ab"] = r.sup_ab;
    d["sup_ac"] = r.sup_ac;
    d["sup_bc"] = r.sup_bc;
    d["pluriclosed_residual"] = r.pluriclosed_residual;
    d["rhs_sup"] = r.rhs_sup;
    return d;
}

py::dict criterion(int id) {
    pcf::CriterionResult r = pcf::run_criterion(id);
    py::dict m;
    for (auto& [k, v] : r.metrics) m[py::str(k)] = v;
    py::dict d;
    d["id"] = r.id;
    d["name"] = r.name;
    d["anchor"] = r.anchor;
    d["pass"] = r.pass;
    d["metrics"] = m;
    d["note"] = r.note;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "pluriclosed flow laboratory";
    py::register_exception<pcf::ValidationError>(mod, "ValidationError", PyExc_ValueError);
    py::register_exception<pcf::SingularityError>(mod, "SingularityError", PyExc_ArithmeticError);

    mod.def(
        "run_experiment",
        [](const py::object& cfg, const std::string& out_root) {
            auto r = pcf::run_experiment(from_py(cfg), out_root);
            return py::make_tuple(to_py(r.summary), r.exit_code);
        },
        py::arg("config"), py::arg("out_root"));
    mod.def("validate_config", [](const py::object& cfg) { pcf::validate_config(from_py(cfg)); });
    mod.def("tau_star", [](const py::object& p) { return to_py(pcf::cone_report(pcf::cone_problem_from_json(from_py(p)))); });
    mod.def("describe_model", [](const std::string& n) { return to_py(pcf::describe_model(n)); });
    mod.def("model_names", &pcf::model_names);
    mod.def("integrate_model", &integrate_model, py::arg("model"), py::arg("initial"), py::arg("t_end"),
            py::arg("normalized") = false);
    mod.def("formulation_report", &formulation_report, py::arg("n"), py::arg("seed"), py::arg("nmodes") = 6,
            py::arg("kmax") = 1, py::arg("amplitude") = 0.03);
    mod.def("run_criterion", &criterion);
    mod.def("criterion_ids", &pcf::criterion_ids);
}
