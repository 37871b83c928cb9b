#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "viscofe/cli.hpp"
#include "viscofe/constitutive.hpp"
#include "viscofe/evolution.hpp"
#include "viscofe/matpoint.hpp"
#include "viscofe/problems.hpp"
#include "viscofe/shell_exact.hpp"

namespace py = pybind11;
using namespace viscofe;

namespace {

// Sym3 crosses the boundary as a 3x3 array.
Sym3 sym(const Mat3& m) { return Sym3::from_matrix(0.5 * (m + m.transpose())); }

py::dict trajectory_dict(const PointTrajectory& tr) {
  const std::size_t n = tr.samples.size();
  Eigen::VectorXd t(n), F33(n), lat(n), q(n), S33(n), T33(n), D(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = tr.samples[i];
    t[i] = s.t;
    F33[i] = s.F(2, 2);
    lat[i] = s.F(0, 0);
    q[i] = s.q;
    S33[i] = s.S(2, 2);
    T33[i] = s.T(2, 2);
    D[i] = s.dissipation;
  }
  py::dict d;
  d["t"] = t;
  d["F33"] = F33;
  d["lambda_lat"] = lat;
  d["q"] = q;
  d["S33"] = S33;
  d["T33"] = T33;
  d["dissipation"] = D;
  d["steps"] = tr.steps;
  d["rk_steps"] = tr.rk_steps;
  d["max_det_error"] = tr.max_det_error;
  return d;
}

}  // namespace

PYBIND11_MODULE(_viscofe, m) {
  m.doc() = "Finite-deformation viscoelasticity solvers";

  static py::exception<Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  py::class_<MaterialParams>(m, "MaterialParams")
      .def(py::init<>())
      .def_readwrite("mu1", &MaterialParams::mu1)
      .def_readwrite("mu2", &MaterialParams::mu2)
      .def_readwrite("alpha1", &MaterialParams::alpha1)
      .def_readwrite("alpha2", &MaterialParams::alpha2)
      .def_readwrite("m1", &MaterialParams::m1)
      .def_readwrite("m2", &MaterialParams::m2)
      .def_readwrite("a1", &MaterialParams::a1)
      .def_readwrite("a2", &MaterialParams::a2)
      .def_readwrite("kappa", &MaterialParams::kappa)
      .def_readwrite("eta0", &MaterialParams::eta0)
      .def_readwrite("etaInf", &MaterialParams::etaInf)
      .def_readwrite("K1", &MaterialParams::K1)
      .def_readwrite("K2", &MaterialParams::K2)
      .def_readwrite("beta1", &MaterialParams::beta1)
      .def_readwrite("beta2", &MaterialParams::beta2)
      .def_property_readonly("incompressible", &MaterialParams::incompressible)
      .def("validate", &MaterialParams::validate)
      .def("with_kappa", &MaterialParams::with_kappa)
      .def("with_viscosity_scaled", &MaterialParams::with_viscosity_scaled)
      .def("__eq__", [](const MaterialParams& a, const MaterialParams& b) { return a == b; });
  m.def("vhb4910", &vhb4910, "VHB 4910 constants (incompressible)");

  m.def(
      "piola_stress_hybrid",
      [](const Mat3& F, const Mat3& Dv, double q, const MaterialParams& p) { return piola_stress_hybrid(F, sym(Dv), q, p); },
      py::arg("F"), py::arg("Dv"), py::arg("q"), py::arg("params"));
  m.def(
      "cauchy_stress",
      [](const Mat3& F, const Mat3& Dv, double q, const MaterialParams& p) {
        return cauchy_stress(F, sym(Dv), q, p).T.matrix();
      },
      py::arg("F"), py::arg("Dv"), py::arg("q"), py::arg("params"));
  m.def(
      "tangent_moduli",
      [](const Mat3& F, const Mat3& Dv, double Jhat, const MaterialParams& p) {
        return tangent_moduli(F, sym(Dv), Jhat, p).L;
      },
      py::arg("F"), py::arg("Dv"), py::arg("Jhat"), py::arg("params"),
      "6x6 moduli in (11, 22, 33, 12, 13, 23) order");
  m.def(
      "dissipation_rate",
      [](const Mat3& F, const Mat3& Dv, const MaterialParams& p) { return dissipation_rate(F, sym(Dv), p); },
      py::arg("F"), py::arg("Dv"), py::arg("params"));
  m.def(
      "rk5_step",
      [](const Mat3& F_prev, const Mat3& F_curr, const Mat3& Dv, double dt, const MaterialParams& p) {
        return rk5_step({F_prev, F_curr, sym(Dv), dt}, p).matrix();
      },
      py::arg("F_prev"), py::arg("F_curr"), py::arg("Dv"), py::arg("dt"), py::arg("params"));

  m.def(
      "uniaxial_stress",
      [](const std::vector<std::pair<double, double>>& knots, const MaterialParams& p, double safety,
         double output_interval) {
        MatpointOptions o;
        o.limits.safety = safety;
        o.output_interval = output_interval;
        return trajectory_dict(run_uniaxial_stress(LoadProgram::uniaxial(knots), p, o));
      },
      py::arg("knots"), py::arg("params"), py::arg("safety") = 1.0, py::arg("output_interval") = 0.0,
      "Uniaxial stress history for (t, F33) knots; returns a dict of arrays");

  py::class_<ShellGeometry>(m, "ShellGeometry")
      .def_static("ramp", &ShellGeometry::ramp, py::arg("A"), py::arg("B"), py::arg("rate"), py::arg("t_end"))
      .def_readwrite("A", &ShellGeometry::A)
      .def_readwrite("B", &ShellGeometry::B)
      .def_readwrite("b_knots", &ShellGeometry::b_knots)
      .def("b_at", &ShellGeometry::b_at);

  py::class_<ShellExact>(m, "ShellExact")
      .def(py::init([](const ShellGeometry& g, const MaterialParams& p, int n_gauss, double safety) {
             return ShellExact(g, p, n_gauss, DtLimits{safety, 1e-12, 1e30});
           }),
           py::arg("geometry"), py::arg("params"), py::arg("n_gauss") = 100, py::arg("safety") = 1.0)
      .def("advance_to", &ShellExact::advance_to, py::arg("t"), py::arg("threads") = 1)
      .def_property_readonly("time", &ShellExact::time)
      .def_property_readonly("b", &ShellExact::b)
      .def("outer_pressure", &ShellExact::outer_pressure)
      .def_property_readonly("rk_steps", &ShellExact::rk_steps);
  m.def("exact_shell_pressure", &exact_shell_pressure, py::arg("params"), py::arg("geometry"), py::arg("t"),
        py::arg("n") = 100);

  py::class_<Mesh>(m, "Mesh")
      .def_property_readonly("n_nodes", &Mesh::n_nodes)
      .def_property_readonly("n_elements", &Mesh::n_elements)
      .def_readonly("n_pressure", &Mesh::n_pressure)
      .def("volume", &Mesh::volume)
      .def("mean_size", &Mesh::mean_size)
      .def_property_readonly("facet_sets", [](const Mesh& mesh) {
        std::vector<std::string> names;
        for (const auto& [name, f] : mesh.facet_sets) names.push_back(name);
        return names;
      });
  m.def("generate_cube_mesh", &generate_cube_mesh, py::arg("n"), py::arg("distortion") = 0.0, py::arg("seed") = 1u);
  m.def("generate_shell_mesh", &generate_shell_mesh, py::arg("nr"), py::arg("ntheta"), py::arg("A") = 0.9,
        py::arg("B") = 1.0);

  m.def(
      "patch_test",
      [](const Mesh& mesh, const MaterialParams& p, const std::vector<std::pair<double, double>>& knots,
         const std::vector<double>& times, double dt, double tol1) {
        SolverOptions o;
        o.adaptive = false;
        o.dt_max = dt;
        o.tol1 = tol1;
        py::list rows;
        for (const auto& s : run_patch_test(mesh, patch_test_config(p, LoadProgram::uniaxial(knots), times, o))) {
          py::dict d;
          d["t"] = s.t;
          d["F33"] = s.F33;
          d["lambda_lat"] = s.lambda_lat;
          d["S33"] = s.S33;
          d["F_spread"] = s.F_spread;
          d["det_error"] = s.det_error;
          rows.append(d);
        }
        return rows;
      },
      py::arg("mesh"), py::arg("params"), py::arg("knots"), py::arg("times"), py::arg("dt") = 1.0,
      py::arg("tol1") = 1e-8);
  m.def(
      "shell_fem",
      [](const Mesh& mesh, const MaterialParams& p, const ShellGeometry& g, const std::vector<double>& times,
         int threads) {
        SolverOptions o;
        o.threads = threads;
        std::vector<std::pair<double, double>> out;
        for (const auto& s : run_shell_fe(mesh, shell_fe_config(p, g, times, o), g)) out.emplace_back(s.t, s.P);
        return out;
      },
      py::arg("mesh"), py::arg("params"), py::arg("geometry"), py::arg("times"), py::arg("threads") = 1,
      "(t, P) pairs at t = 0 and each requested time");

  m.def(
      "parse_config", [](const std::string& text) { return cli::serialize_config(cli::parse_config(text)); },
      py::arg("text"), "Validates a run configuration and returns its normalized text");
  m.def(
      "run_config",
      [](const std::string& text, const std::filesystem::path& out_dir, int threads) {
        return cli::run(cli::parse_config(text), {threads, out_dir});
      },
      py::arg("text"), py::arg("out_dir"), py::arg("threads") = 1, "Runs a configuration; returns the files written");
}
