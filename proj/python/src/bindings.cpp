#include <algorithm>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "grushin_lab/error.hpp"
#include "grushin_lab/grushin.hpp"
#include "grushin_lab/io.hpp"
#include "grushin_lab/potential.hpp"
#include "grushin_lab/schrodinger.hpp"
#include "grushin_lab/semiclassics.hpp"
#include "grushin_lab/verify.hpp"

namespace py = pybind11;
using namespace grushin_lab;

namespace {

py::array_t<double> as_array(const std::vector<double>& v) {
  py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Eigenfunctions of -d^2/dx^2 + V and Grushin kernel estimates";

  static py::exception<Error> error(m, "GrushinLabError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error;
      py::object inst = exc(e.what());
      inst.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error.ptr(), inst.ptr());
    }
  });

  // ---- potentials

  py::enum_<PotentialClass>(m, "PotentialClass")
      .value("P1", PotentialClass::P1)
      .value("P1_uc", PotentialClass::P1_uc)
      .value("P1_cv", PotentialClass::P1_cv)
      .value("Pk", PotentialClass::Pk);

  py::class_<PotentialSpec>(m, "PotentialSpec")
      .def_readwrite("amplitude", &PotentialSpec::amplitude)
      .def_readwrite("dilation", &PotentialSpec::dilation)
      .def_property_readonly("family", [](const PotentialSpec& s) { return to_string(s.family()); })
      .def_property_readonly("homogeneous_degree", &PotentialSpec::homogeneous_degree)
      .def("to_json", [](const PotentialSpec& s) { return potential_to_json(s); })
      .def_static("from_json", [](const std::string& text) { return potential_from_json(text); })
      .def("__repr__", [](const PotentialSpec& s) { return "PotentialSpec(" + potential_to_json(s) + ")"; });

  m.def("power", &power, py::arg("d"));
  m.def("power_asym", &power_asym, py::arg("d"), py::arg("a"));
  m.def("power_logperturbed", &power_logperturbed, py::arg("d"), py::arg("eps"));
  m.def("two_power", &two_power, py::arg("d1"), py::arg("d2"));
  m.def("tabulated", &tabulated, py::arg("x"), py::arg("v"));
  m.def("scale", &scale, py::arg("spec"), py::arg("tau"));
  m.def("rescale", &rescale, py::arg("spec"), py::arg("r"));

  py::class_<ClassCertificate>(m, "ClassCertificate")
      .def_property_readonly("cls", [](const ClassCertificate& c) { return to_string(c.cls); })
      .def_readonly("kappa_hat", &ClassCertificate::kappa_hat)
      .def_readonly("theta", &ClassCertificate::theta)
      .def_readonly("k", &ClassCertificate::k)
      .def_readonly("passed", &ClassCertificate::pass)
      .def_readonly("worst_x", &ClassCertificate::worst_x)
      .def_readonly("reason", &ClassCertificate::reason);

  py::class_<Potential>(m, "Potential")
      .def(py::init<PotentialSpec>(), py::arg("spec"))
      .def(py::init([](const std::string& text) { return Potential(potential_from_json(text)); }), py::arg("json"))
      .def_property_readonly("spec", &Potential::spec)
      .def("__call__", py::vectorize(&Potential::value))
      .def("derivative", &Potential::derivative, py::arg("x"), py::arg("order"))
      .def_property_readonly("p1", &Potential::p1)
      .def_property_readonly("kappa", &Potential::kappa)
      .def("scaled", &Potential::scaled, py::arg("tau"))
      .def("rescaled", &Potential::rescaled, py::arg("r"))
      .def_property_readonly("hash", &Potential::hash);

  m.def(
      "certify",
      [](const Potential& V, const std::string& cls, double kappa_max, int grid_points, int k) {
        return certify(V, class_from_string(cls), kappa_max, grid_points, k);
      },
      py::arg("V"), py::arg("cls"), py::arg("kappa_max") = 64.0, py::arg("grid_points") = 1024, py::arg("k") = 3);
  m.def("sublevel_measure", &sublevel_measure, py::arg("V"), py::arg("t"));

  // ---- eigenpairs

  py::class_<EigenSolveConfig>(m, "EigenSolveConfig")
      .def(py::init<>())
      .def_readwrite("rel_tol_eigenvalue", &EigenSolveConfig::rel_tol_eigenvalue)
      .def_readwrite("truncation_factor", &EigenSolveConfig::truncation_factor)
      .def_readwrite("points_per_wavelength", &EigenSolveConfig::points_per_wavelength)
      .def_readwrite("transition_refinement", &EigenSolveConfig::transition_refinement)
      .def_readwrite("max_grid", &EigenSolveConfig::max_grid)
      .def_readwrite("residual_target", &EigenSolveConfig::residual_target)
      .def("validate", &EigenSolveConfig::validate);

  py::class_<EigenPair>(m, "EigenPair")
      .def_readonly("n", &EigenPair::n)
      .def_readonly("E", &EigenPair::E)
      .def_readonly("residual", &EigenPair::residual)
      .def_readonly("norm_defect", &EigenPair::norm_defect)
      .def_property_readonly("grid", [](const EigenPair& p) { return as_array(p.grid); })
      .def_property_readonly("psi", [](const EigenPair& p) { return as_array(p.psi); })
      .def_property_readonly("dpsi", [](const EigenPair& p) { return as_array(p.dpsi); })
      .def("__call__", py::vectorize(&EigenPair::value))
      .def("derivative", py::vectorize(&EigenPair::derivative));

  m.def("eigenvalue", &eigenvalue, py::arg("V"), py::arg("n"), py::arg("cfg") = EigenSolveConfig{});
  m.def("eigenfunction", &eigenfunction, py::arg("V"), py::arg("n"), py::arg("cfg") = EigenSolveConfig{});
  m.def("zeros", &zeros, py::arg("pair"));
  m.def("check_interlacing", &check_interlacing, py::arg("pair"));
  m.def("inner_product", &inner_product, py::arg("a"), py::arg("b"));
  m.def("spectrum_count", &spectrum_count, py::arg("V"), py::arg("Lambda"), py::arg("cfg") = EigenSolveConfig{});
  m.def("save_pair", &save_pair, py::arg("path"), py::arg("pair"));
  m.def("load_pair", &load_pair, py::arg("path"));

  // ---- semiclassics

  py::class_<BsError>(m, "BsError")
      .def_readonly("E", &BsError::E)
      .def_readonly("phase", &BsError::phase)
      .def_readonly("err", &BsError::err)
      .def_readonly("ratio", &BsError::ratio);
  py::class_<VirialResult>(m, "VirialResult")
      .def_readonly("ratio", &VirialResult::ratio)
      .def_readonly("hellmann_feynman", &VirialResult::hellmann_feynman);

  m.def("bs_phase", &bs_phase, py::arg("V"), py::arg("E"));
  m.def("bs_energy", &bs_energy, py::arg("V"), py::arg("phase"));
  m.def("bs_log_error", &bs_log_error, py::arg("V"), py::arg("n"), py::arg("cfg") = EigenSolveConfig{});
  m.def("kv", &kv, py::arg("V"), py::arg("t"));
  m.def("xi", &xi, py::arg("V"), py::arg("n"), py::arg("lam"), py::arg("cfg") = EigenSolveConfig{});
  m.def("virial", &virial, py::arg("V"), py::arg("n"), py::arg("tau"), py::arg("cfg") = EigenSolveConfig{});

  // ---- bounds

  py::class_<SupRatio>(m, "SupRatio")
      .def_readonly("sup_ratio", &SupRatio::sup_ratio)
      .def_readonly("argmax_x", &SupRatio::argmax_x);
  py::class_<EnvelopeResult>(m, "EnvelopeResult")
      .def_readonly("g_violations", &EnvelopeResult::g_violations)
      .def_readonly("h_violations", &EnvelopeResult::h_violations);
  py::class_<SoninResult>(m, "SoninResult")
      .def_readonly("violations", &SoninResult::violations)
      .def_readonly("region_nodes", &SoninResult::region_nodes)
      .def_readonly("max_s", &SoninResult::max_s);
  py::class_<DecayFit>(m, "DecayFit")
      .def_readonly("c_fit", &DecayFit::c_fit)
      .def_readonly("intercept", &DecayFit::intercept)
      .def_readonly("max_violation", &DecayFit::max_violation);
  py::class_<SummationParams>(m, "SummationParams")
      .def(py::init([](double c, double kappa, double theta, double beta) {
             return SummationParams{c, kappa, theta, beta};
           }),
           py::arg("c") = 1.0, py::arg("kappa") = 1.0, py::arg("theta") = 0.5, py::arg("beta") = 0.0)
      .def_readwrite("c", &SummationParams::c)
      .def_readwrite("kappa", &SummationParams::kappa)
      .def_readwrite("theta", &SummationParams::theta)
      .def_readwrite("beta", &SummationParams::beta);
  py::class_<WindowTerm>(m, "WindowTerm").def_readonly("n", &WindowTerm::n).def_readonly("xi", &WindowTerm::xi);
  py::class_<GapLogResult>(m, "GapLogResult")
      .def_readonly("max_ratio", &GapLogResult::max_ratio)
      .def_readonly("max_err", &GapLogResult::max_err);

  m.def(
      "pointwise_ratio",
      [](const Potential& V, const EigenPair& p, double alpha, const std::string& which) {
        if (which != "psi" && which != "dpsi") throw Error(ErrorKind::InvalidSpec, "which must be 'psi' or 'dpsi'");
        return pointwise_ratio(V, p, alpha, which == "psi" ? Quantity::psi : Quantity::dpsi);
      },
      py::arg("V"), py::arg("pair"), py::arg("alpha"), py::arg("which") = "psi");
  m.def(
      "envelope_check", [](const Potential& V, const EigenPair& p) { return envelope_check(V, p); }, py::arg("V"),
      py::arg("pair"));
  m.def(
      "sonin_profile",
      [](const Potential& V, const EigenPair& p, const std::string& variant, double eps_or_delta, double alpha) {
        if (variant != "C3" && variant != "power") throw Error(ErrorKind::InvalidSpec, "variant must be 'C3' or 'power'");
        return sonin_profile(V, p, variant == "C3" ? SoninVariant::C3 : SoninVariant::power, eps_or_delta, alpha);
      },
      py::arg("V"), py::arg("pair"), py::arg("variant"), py::arg("eps_or_delta"), py::arg("alpha") = 0.25);
  m.def(
      "exp_decay_fit", [](const Potential& V, const EigenPair& p) { return exp_decay_fit(V, p); }, py::arg("V"),
      py::arg("pair"));
  m.def("summation_oracle", &summation_oracle, py::arg("t"), py::arg("a"), py::arg("b"), py::arg("params"));
  m.def("random_gap_sequence", &random_gap_sequence, py::arg("params"), py::arg("length"), py::arg("seed"));
  m.def("projector_window", &projector_window, py::arg("V"), py::arg("lam"), py::arg("A"),
        py::arg("cfg") = EigenSolveConfig{});
  m.def("gap_log_check", &gap_log_check, py::arg("V"), py::arg("lam"), py::arg("A"),
        py::arg("cfg") = EigenSolveConfig{});

  // ---- Grushin kernel

  py::class_<MultiplierSpec>(m, "MultiplierSpec")
      .def("__call__", py::vectorize(&MultiplierSpec::operator()))
      .def_property_readonly("support", &MultiplierSpec::support)
      .def("validate", &MultiplierSpec::validate);
  m.def("bump", &bump, py::arg("center") = 0.5, py::arg("half_width") = 0.05, py::arg("ramp") = 0.05);
  m.def("riesz_fragment", &riesz_fragment, py::arg("order"), py::arg("piece"));
  m.def("tabulated_multiplier", &tabulated_multiplier, py::arg("lam"), py::arg("values"));
  m.def("sobolev_norm", &sobolev_norm, py::arg("m"), py::arg("s"));

  py::class_<GrushinConfig>(m, "GrushinConfig")
      .def(py::init<>())
      .def_readwrite("fiber_cap", &GrushinConfig::fiber_cap)
      .def_readwrite("max_fiber_cap", &GrushinConfig::max_fiber_cap)
      .def_readwrite("truncation_limit", &GrushinConfig::truncation_limit)
      .def_readwrite("tail_tol", &GrushinConfig::tail_tol)
      .def_readwrite("threads", &GrushinConfig::threads);

  py::class_<KernelSlice>(m, "KernelSlice")
      .def_readonly("r", &KernelSlice::r)
      .def_readonly("x_prime", &KernelSlice::x_prime)
      .def_readonly("fiber_cap", &KernelSlice::fiber_cap)
      .def_readonly("tail_fraction", &KernelSlice::tail_fraction)
      .def_readonly("truncation_estimate", &KernelSlice::truncation_estimate)
      .def_property_readonly("x", [](const KernelSlice& s) { return as_array(s.x); })
      .def_property_readonly("u", [](const KernelSlice& s) { return as_array(s.u); })
      .def_property_readonly("K", [](const KernelSlice& s) {
        py::array_t<double> a({s.x.size(), s.u.size()});
        std::copy(s.K.begin(), s.K.end(), a.mutable_data());
        return a;
      });

  m.def(
      "kernel_slice",
      [](const MultiplierSpec& mult, const Potential& V, double r, double x_prime, const GrushinConfig& cfg,
         double vartheta) {
        py::gil_scoped_release release;
        return kernel_slice(mult, V, r, x_prime, cfg, vartheta);
      },
      py::arg("m"), py::arg("V"), py::arg("r"), py::arg("x_prime"), py::arg("cfg") = GrushinConfig{},
      py::arg("vartheta") = 0.0);
  m.def(
      "weighted_plancherel_lhs",
      [](const KernelSlice& s, const Potential& V, double vartheta) { return weighted_plancherel_lhs(s, V, vartheta); },
      py::arg("slice"), py::arg("V"), py::arg("vartheta"));
  m.def("plancherel_prefactor", &plancherel_prefactor, py::arg("V"), py::arg("r"), py::arg("vartheta"),
        py::arg("x_prime"));
  m.def(
      "plancherel_oracle",
      [](const MultiplierSpec& mult, const Potential& V, double r, double x_prime, int n_max) {
        FiberSource src(V, GrushinConfig{}.eig);
        return plancherel_oracle(mult, src, r, x_prime, n_max);
      },
      py::arg("m"), py::arg("V"), py::arg("r"), py::arg("x_prime"), py::arg("n_max"));

#ifdef GRUSHIN_LAB_VERSION
  m.attr("__version__") = GRUSHIN_LAB_VERSION;
#else
  m.attr("__version__") = "dev";
#endif
}
