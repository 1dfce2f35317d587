#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "carnot/coarea.hpp"
#include "carnot/cone.hpp"
#include "carnot/connect.hpp"
#include "carnot/experiments.hpp"
#include "carnot/flows.hpp"
#include "carnot/metrics.hpp"

namespace py = pybind11;
using namespace carnot;

namespace {

Vec to_vec(const Eigen::VectorXd& v, int n)
{
    if (v.size() != n)
        throw ConfigError("expected a vector of length " + std::to_string(n));
    return Vec(v);
}

Eigen::VectorXd out(const Vec& v) { return Eigen::VectorXd(v); }

py::object parse_json(const std::string& s) { return py::module_::import("json").attr("loads")(s); }

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Numerical sub-Riemannian geometry on Carnot frames";

    auto base = py::register_exception<Error>(m, "CarnotError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<LeftDomain>(m, "LeftDomain", base.ptr());
    py::register_exception<NoConvergence>(m, "NoConvergence", base.ptr());
    py::register_exception<NoContraction>(m, "NoContraction", base.ptr());
    py::register_exception<GuardNotVanishing>(m, "GuardNotVanishing", base.ptr());

    py::class_<frames::ChartFrame, std::shared_ptr<frames::ChartFrame>>(m, "Frame")
        .def_property_readonly("name", &frames::ChartFrame::name)
        .def_property_readonly("dim", &frames::ChartFrame::dim)
        .def_property_readonly("grading", [](const frames::ChartFrame& f) { return f.grading().dims(); })
        .def_property_readonly("homogeneous_dim",
                               [](const frames::ChartFrame& f) { return f.grading().homogeneous_dim(); })
        .def("matrix",
             [](const frames::ChartFrame& f, const Eigen::VectorXd& p) {
                 return Eigen::MatrixXd(f.frame(to_vec(p, f.dim())));
             })
        .def(
            "validate",
            [](const frames::ChartFrame& f, int samples, std::uint64_t seed) {
                auto r = frames::validate_carnot(f, samples, seed);
                py::dict d;
                d["ok"] = r.ok();
                d["max_residual"] = r.max_residual;
                d["max_grading_leak"] = r.max_grading_leak;
                d["messages"] = r.messages;
                return d;
            },
            py::arg("samples") = 50, py::arg("seed") = 1);

    m.def("builtin_names", &frames::builtin_names);
    m.def(
        "frame",
        [](const std::string& spec) { return std::const_pointer_cast<frames::ChartFrame>(experiments::load_frame(spec)); },
        py::arg("spec"), "Built-in frame by name, or a polynomial frame from a .json file");

    py::class_<cone::NilpotentCone>(m, "Cone")
        .def_property_readonly("dim", &cone::NilpotentCone::dim)
        .def_property_readonly("base", [](const cone::NilpotentCone& c) { return out(c.base()); })
        .def("bch", [](const cone::NilpotentCone& c, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& y) { return out(c.bch(to_vec(x, c.dim()), to_vec(y, c.dim()))); })
        .def("bracket", [](const cone::NilpotentCone& c, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& y) { return out(c.bracket(to_vec(x, c.dim()), to_vec(y, c.dim()))); })
        .def("dilate", [](const cone::NilpotentCone& c, double e,
                          const Eigen::VectorXd& x) { return out(c.dilate(e, to_vec(x, c.dim()))); })
        .def("homogeneous_norm", [](const cone::NilpotentCone& c, const Eigen::VectorXd& x) {
            return cone::homogeneous_norm(c.grading(), to_vec(x, c.dim()));
        });
    m.def("build_cone", [](const frames::ChartFrame& f, const Eigen::VectorXd& u) {
        return cone::build_cone(f, to_vec(u, f.dim()));
    });

    m.def(
        "exp_combination",
        [](const frames::ChartFrame& f, const Eigen::VectorXd& u, const Eigen::VectorXd& a, double t) {
            return out(flows::exp_combination(f, to_vec(u, f.dim()), to_vec(a, f.dim()), t));
        },
        py::arg("frame"), py::arg("u"), py::arg("a"), py::arg("t") = 1.0);
    m.def("normal_coords", [](const frames::ChartFrame& f, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
        return out(flows::normal_coords(f, to_vec(u, f.dim()), to_vec(v, f.dim())).a);
    });
    m.def("d_inf", [](const frames::ChartFrame& f, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
        return metrics::d_inf(f, to_vec(u, f.dim()), to_vec(v, f.dim()));
    });
    m.def("d_riem", [](const frames::ChartFrame& f, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
        return metrics::d_riem(f, to_vec(u, f.dim()), to_vec(v, f.dim()));
    });
    m.def(
        "cc_connect",
        [](const frames::ChartFrame& f, const Eigen::VectorXd& v, const Eigen::VectorXd& w, double tol) {
            auto r = connect::cc_connect(f, to_vec(v, f.dim()), to_vec(w, f.dim()), tol);
            py::dict d;
            d["residuals"] = r.residuals;
            d["rounds"] = r.rounds;
            d["length"] = r.path.length;
            d["end"] = out(r.path.end);
            std::vector<std::pair<int, double>> segs;
            for (const auto& s : r.path.segments)
                segs.emplace_back(s.field, s.coef);
            d["segments"] = segs;
            return d;
        },
        py::arg("frame"), py::arg("v"), py::arg("w"), py::arg("tol") = 1e-6);
    m.def("cc_distance_upper", [](const frames::ChartFrame& f, const Eigen::VectorXd& v, const Eigen::VectorXd& w) {
        return connect::cc_distance_upper(f, to_vec(v, f.dim()), to_vec(w, f.dim()));
    });
    m.def(
        "coarea_verify",
        [](const frames::ChartFrame& f, const std::string& map, double lo, double hi, int cells, int levels) {
            coarea::CoareaGrid g;
            g.cells = cells;
            g.levels = levels;
            frames::Box box{Vec::Constant(f.dim(), lo), Vec::Constant(f.dim(), hi)};
            auto r = coarea::coarea_verify(f, *frames::abelian(1), experiments::named_map(map, f.dim()), box, g);
            py::dict d;
            d["lhs"] = r.lhs;
            d["rhs"] = r.rhs;
            d["error"] = r.error;
            d["chi_points"] = r.chi_points;
            d["guard_contribution"] = r.guard_contribution;
            return d;
        },
        py::arg("frame"), py::arg("map"), py::arg("lo") = -0.5, py::arg("hi") = 0.5, py::arg("cells") = 20,
        py::arg("levels") = 20);

    m.def("list_experiments", &experiments::list_experiments);
    m.def("experiment_ids", [] {
        std::vector<std::string> ids;
        for (const auto& e : experiments::registry())
            ids.push_back(e.id);
        return ids;
    });
    m.def(
        "run_experiment",
        [](const std::string& config_text, py::object seed, py::object out_dir) {
            auto cfg = experiments::parse_config(config_text);
            if (!seed.is_none())
                cfg.seed = seed.cast<std::uint64_t>();
            auto rep = experiments::run(cfg);
            if (!out_dir.is_none())
                experiments::write_report(rep, out_dir.cast<std::string>());
            py::dict d = parse_json(experiments::summary_json(rep));
            py::dict tables;
            for (const auto& t : rep.tables)
                tables[py::str(t.name)] = experiments::table_csv(t);
            d["csv"] = tables;
            return d;
        },
        py::arg("config"), py::arg("seed") = py::none(), py::arg("out") = py::none(),
        "Run an experiment from config text; returns the summary with CSV tables as strings");
}
