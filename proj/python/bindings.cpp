#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "embedlab/persistence.hpp"
#include "runner.hpp"

namespace py = pybind11;
using namespace embedlab;

namespace {

PyObject* error_type = nullptr;

py::object json_to_py(const runner::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

runner::json py_to_json(const py::object& o) {
    return runner::json::parse(py::str(py::module_::import("json").attr("dumps")(o)).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Embedded eigenvalue persistence: operators, boundary resolvents, Fermi map and persistence solver";

    error_type = PyErr_NewException("embedlab._core.EmbedlabError", PyExc_RuntimeError, nullptr);
    m.add_object("EmbedlabError", py::handle(error_type));
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object inst = py::reinterpret_borrow<py::object>(error_type)(e.what());
            inst.attr("kind") = to_string(e.kind());
            if (const auto* s = dynamic_cast<const runner::StageError*>(&e)) inst.attr("stage") = s->stage();
            PyErr_SetObject(error_type, inst.ptr());
        }
    });

    py::class_<Interval>(m, "Interval")
        .def(py::init<double, double>(), py::arg("lo"), py::arg("hi"))
        .def_readwrite("lo", &Interval::lo)
        .def_readwrite("hi", &Interval::hi);

    py::class_<Grid1D>(m, "Grid1D")
        .def(py::init([](double a, double b, int n) {
                 Grid1D g{a, b, n};
                 g.validate();
                 return g;
             }),
             py::arg("x_min") = -20.0, py::arg("x_max") = 20.0, py::arg("n_points") = 2001)
        .def_readonly("x_min", &Grid1D::x_min)
        .def_readonly("x_max", &Grid1D::x_max)
        .def_readonly("n_points", &Grid1D::n_points)
        .def_property_readonly("spacing", &Grid1D::spacing)
        .def("nodes", &Grid1D::nodes);

    py::class_<SechPair>(m, "SechPair")
        .def(py::init<double, double>(), py::arg("a") = 20.0, py::arg("b") = -24.0)
        .def_readwrite("a", &SechPair::a)
        .def_readwrite("b", &SechPair::b);
    py::class_<SechSquaredWell>(m, "SechSquaredWell")
        .def(py::init<double>(), py::arg("v0") = 1.19)
        .def_readwrite("v0", &SechSquaredWell::v0);
    py::class_<Tabulated>(m, "Tabulated")
        .def(py::init<std::vector<double>>(), py::arg("values"))
        .def_readwrite("values", &Tabulated::values);

    py::enum_<ModelKind>(m, "ModelKind")
        .value("FourthOrderLine", ModelKind::FourthOrderLine)
        .value("CylinderEvenSector", ModelKind::CylinderEvenSector)
        .value("CylinderFull", ModelKind::CylinderFull);

    py::class_<ModelSpec>(m, "ModelSpec")
        .def(py::init([](ModelKind kind, PotentialSpec potential, int cutoff, int index) {
                 ModelSpec s;
                 s.kind = kind;
                 s.potential = std::move(potential);
                 s.angular_cutoff = cutoff;
                 s.angular_index = index;
                 return s;
             }),
             py::arg("kind") = ModelKind::FourthOrderLine, py::arg("potential") = PotentialSpec{SechPair{}},
             py::arg("angular_cutoff") = 0, py::arg("angular_index") = 1)
        .def_readwrite("kind", &ModelSpec::kind)
        .def_readwrite("potential", &ModelSpec::potential)
        .def_readwrite("angular_cutoff", &ModelSpec::angular_cutoff)
        .def_readwrite("angular_index", &ModelSpec::angular_index);

    py::class_<EmbeddingCalibration>(m, "EmbeddingCalibration")
        .def_readonly("potential", &EmbeddingCalibration::potential)
        .def_readonly("lambda_", &EmbeddingCalibration::lambda)
        .def_readonly("amplitude_shift", &EmbeddingCalibration::amplitude_shift)
        .def_readonly("mismatch", &EmbeddingCalibration::mismatch);
    m.def("calibrate_embedding", &calibrate_embedding, py::arg("potential"), py::arg("grid"),
          py::arg("lambda_guess") = 1.0);
    m.def("sample_potential", &sample_potential, py::arg("potential"), py::arg("grid"));

    py::class_<ModeLayout>(m, "ModeLayout")
        .def_property_readonly("nz", &ModeLayout::nz)
        .def_property_readonly("n_modes", &ModeLayout::n_modes)
        .def_property_readonly("theta_nodes", &ModeLayout::theta_nodes)
        .def_property_readonly("size", &ModeLayout::size)
        .def("to_nodal", &ModeLayout::to_nodal)
        .def("from_nodal", &ModeLayout::from_nodal);

    py::class_<DiscreteOperator>(m, "DiscreteOperator")
        .def_property_readonly("size", &DiscreteOperator::size)
        .def_readonly("layout", &DiscreteOperator::layout)
        .def_readonly("grid", &DiscreteOperator::grid)
        .def_readonly("potential", &DiscreteOperator::potential)
        .def_readonly("bandwidth", &DiscreteOperator::bandwidth)
        .def("apply", &DiscreteOperator::apply)
        .def("asymmetry", &DiscreteOperator::asymmetry);
    m.def(
        "build_operator", [](const ModelSpec& model, const Grid1D& grid) { return build_operator(model, grid, Dirichlet{}); },
        py::arg("model"), py::arg("grid"), "Operator with the Dirichlet box closure");
    m.def("add_multiplication", &add_multiplication, py::arg("op"), py::arg("nodal_w"));

    py::class_<SpectralData>(m, "SpectralData")
        .def_readonly("lambda0", &SpectralData::lambda0)
        .def_readonly("eigvecs", &SpectralData::eigvecs)
        .def_readonly("multiplicity", &SpectralData::multiplicity)
        .def_readonly("continuum_edge", &SpectralData::continuum_edge)
        .def_readonly("dirichlet_lambda", &SpectralData::dirichlet_lambda)
        .def_readonly("residuals", &SpectralData::residuals)
        .def_readonly("edge_amplitudes", &SpectralData::edge_amplitudes);
    m.def(
        "find_embedded_eigenpairs",
        [](const DiscreteOperator& op, const Interval& window, double edge_threshold) {
            EigenSearchOptions o;
            o.edge_threshold = edge_threshold;
            return find_embedded_eigenpairs(op, window, o);
        },
        py::arg("op"), py::arg("window"), py::arg("edge_threshold") = 1e-8);
    m.def("make_hbar", &make_hbar, py::arg("op"), py::arg("spec"));
    m.def(
        "eigen_residual",
        [](const DiscreteOperator& op, double lambda, const Eigen::VectorXcd& psi) { return eigen_residual(op, lambda, psi); },
        py::arg("op"), py::arg("lambda_"), py::arg("psi"));

    py::class_<HypothesisCheck>(m, "HypothesisCheck")
        .def_readonly("name", &HypothesisCheck::name)
        .def_readonly("passed", &HypothesisCheck::passed)
        .def_readonly("value", &HypothesisCheck::value)
        .def_readonly("detail", &HypothesisCheck::detail);
    m.def(
        "check_hypotheses",
        [](const SpectralData& spec, const DiscreteOperator& op, const PerturbationBasis* basis,
           const std::optional<Eigen::MatrixXd>& jac, int expected_rank) {
            HypothesisInputs in;
            in.basis = basis;
            in.fermi_jacobian = jac ? &*jac : nullptr;
            in.expected_rank = expected_rank;
            return check_hypotheses(spec, op, in).checks;
        },
        py::arg("spec"), py::arg("op"), py::arg("basis") = nullptr, py::arg("fermi_jacobian") = py::none(),
        py::arg("expected_rank") = 0);

    py::enum_<ResolventMethod>(m, "ResolventMethod")
        .value("RadiationBC", ResolventMethod::RadiationBC)
        .value("EpsilonExtrapolation", ResolventMethod::EpsilonExtrapolation);
    m.def(
        "resolve",
        [](const DiscreteOperator& op, double lambda, const Eigen::VectorXcd& v, bool plus, ResolventMethod method) {
            ResolventOptions o;
            o.method = method;
            return BoundaryResolvent(op, lambda, plus ? Branch::Plus : Branch::Minus, o).resolve(v);
        },
        py::arg("op"), py::arg("lambda_"), py::arg("v"), py::arg("plus") = true,
        py::arg("method") = ResolventMethod::RadiationBC, "(op - lambda -/+ i0)^{-1} v");
    m.def(
        "density",
        [](const DiscreteOperator& op, double lambda, const Eigen::VectorXcd& v) {
            return density(ResolventPair(op, lambda), v);
        },
        py::arg("op"), py::arg("lambda_"), py::arg("v"));
    m.def("gaussian_probes", &gaussian_probes, py::arg("layout"), py::arg("grid"), py::arg("count"),
          py::arg("seed") = 7, py::arg("span") = 4.0);

    py::class_<DensityRank>(m, "DensityRank")
        .def_readonly("m", &DensityRank::m)
        .def_readonly("singular_values", &DensityRank::singular_values)
        .def_property_readonly("gap", &DensityRank::gap);
    m.def(
        "density_rank",
        [](const DiscreteOperator& op, double lambda, const Eigen::MatrixXd& probes, double threshold) {
            return density_rank(ResolventPair(op, lambda), probes, threshold);
        },
        py::arg("op"), py::arg("lambda_"), py::arg("probes"), py::arg("threshold") = 1e-6);
    m.def(
        "reduced_q",
        [](const SpectralData& spec, const DiscreteOperator& hbar, double lambda) {
            return reduced_q(spec, BoundaryResolvent(hbar, lambda, Branch::Plus));
        },
        py::arg("spec"), py::arg("hbar"), py::arg("lambda_"), "Q(lambda + i0) at W = 0 on Ran P0");
    py::class_<QCriterion>(m, "QCriterion")
        .def_readonly("is_eigenvalue", &QCriterion::is_eigenvalue)
        .def_readonly("gap", &QCriterion::gap)
        .def_readonly("eigenvalues", &QCriterion::eigenvalues);
    m.def(
        "eigenvalue_criterion",
        [](const SpectralData& spec, const DiscreteOperator& hbar, double lambda, double tol) {
            return eigenvalue_criterion(spec, BoundaryResolvent(hbar, lambda, Branch::Plus), tol);
        },
        py::arg("spec"), py::arg("hbar"), py::arg("lambda_"), py::arg("tol") = 1e-6);
    m.def("perturbation_identity_residual", &perturbation_identity_residual, py::arg("hbar"), py::arg("nodal_w"),
          py::arg("lambda_"), py::arg("v"), py::arg("lhs_method") = ResolventMethod::RadiationBC,
          py::arg("rhs_method") = ResolventMethod::EpsilonExtrapolation);

    py::class_<Ball>(m, "Ball")
        .def(py::init<double, double>(), py::arg("center") = 0.0, py::arg("radius") = 1.0)
        .def_readwrite("center", &Ball::center)
        .def_readwrite("radius", &Ball::radius);
    py::class_<BumpSpec>(m, "BumpSpec")
        .def(py::init<double, double, int, bool, double>(), py::arg("center") = 0.0, py::arg("width") = 1.0,
             py::arg("harmonic") = 0, py::arg("sine") = false, py::arg("amplitude") = 1.0);
    py::class_<PerturbationBasis>(m, "PerturbationBasis")
        .def_property_readonly("size", &PerturbationBasis::size)
        .def_readonly("labels", &PerturbationBasis::labels)
        .def("element", &PerturbationBasis::real_element)
        .def("combine", &PerturbationBasis::combine);
    m.def("make_bump_basis", &make_bump_basis, py::arg("layout"), py::arg("grid"), py::arg("bumps"));

    py::class_<SystemContext>(m, "SystemContext")
        .def_readonly("hbar", &SystemContext::hbar)
        .def_readonly("spectral", &SystemContext::spectral)
        .def_readonly("window", &SystemContext::window)
        .def_property_readonly("n", &SystemContext::n)
        .def_property_readonly("psi1", &SystemContext::psi1);
    m.def("make_context", &make_context, py::arg("op"), py::arg("spec"), py::arg("window"), py::arg("rotation") = 0.0,
          py::arg("method") = ResolventMethod::RadiationBC);

    py::class_<FermiFrame>(m, "FermiFrame")
        .def_readonly("probes", &FermiFrame::probes)
        .def_readonly("densities", &FermiFrame::densities)
        .def_readonly("duals", &FermiFrame::duals)
        .def_readonly("m", &FermiFrame::m)
        .def_readonly("lambda0", &FermiFrame::lambda0)
        .def_readonly("selected", &FermiFrame::selected)
        .def_readonly("imag_ratio", &FermiFrame::imag_ratio);
    m.def(
        "build_frame",
        [](const SystemContext& ctx, const Eigen::MatrixXd& probes, int m) {
            const ResolventPair pair(ctx.hbar, ctx.spectral.lambda0, ctx.resolvent);
            return build_frame(ctx, pair, probes, m);
        },
        py::arg("ctx"), py::arg("probes"), py::arg("m"));

    py::class_<LambdaSolve>(m, "LambdaSolve")
        .def_readonly("lambda_", &LambdaSolve::lambda)
        .def_readonly("iterations", &LambdaSolve::iterations)
        .def_readonly("a_value", &LambdaSolve::a_value)
        .def_readonly("derivative", &LambdaSolve::derivative)
        .def_readonly("converged", &LambdaSolve::converged);
    m.def(
        "solve_lambda",
        [](const SystemContext& ctx, const Eigen::VectorXd& w, double guess) { return solve_lambda(ctx, w, guess); },
        py::arg("ctx"), py::arg("nodal_w"), py::arg("guess"));
    py::class_<FermiValue>(m, "FermiValue")
        .def_readonly("values", &FermiValue::values)
        .def_readonly("max_imag", &FermiValue::max_imag)
        .def_readonly("lambda_", &FermiValue::lambda)
        .def_readonly("density_rows", &FermiValue::density_rows);
    m.def("fermi_map", &fermi_map, py::arg("frame"), py::arg("ctx"), py::arg("basis"), py::arg("coeffs"));
    m.def("fermi_jacobian", &fermi_jacobian, py::arg("frame"), py::arg("ctx"), py::arg("basis"));
    m.def("fermi_jacobian_fd", &fermi_jacobian_fd, py::arg("frame"), py::arg("ctx"), py::arg("basis"), py::arg("at"),
          py::arg("t") = 0.0);

    py::class_<SplitBasis>(m, "SplitBasis")
        .def_readonly("jacobian", &SplitBasis::jacobian)
        .def_readonly("kernel", &SplitBasis::kernel)
        .def_readonly("normal", &SplitBasis::normal)
        .def_readonly("singular_values", &SplitBasis::singular_values)
        .def_readonly("codim", &SplitBasis::codim);
    m.def("split", &split, py::arg("jacobian"), py::arg("expected_codim") = -1, py::arg("rel") = 1e-6);
    m.def("normal_direction", &normal_direction, py::arg("split"), py::arg("k"));

    py::class_<ManifoldPoint>(m, "ManifoldPoint")
        .def_readonly("xi", &ManifoldPoint::xi)
        .def_readonly("eta", &ManifoldPoint::eta)
        .def_readonly("coeffs", &ManifoldPoint::coeffs)
        .def_readonly("lambda_", &ManifoldPoint::lambda)
        .def_readonly("eigvec", &ManifoldPoint::eigvec)
        .def_readonly("fermi_values", &ManifoldPoint::fermi_values)
        .def_readonly("fermi_residual", &ManifoldPoint::fermi_residual)
        .def_readonly("eigen_residual", &ManifoldPoint::eigen_residual)
        .def_readonly("orthogonality", &ManifoldPoint::orthogonality)
        .def_readonly("q_gap", &ManifoldPoint::q_gap)
        .def_readonly("iterations", &ManifoldPoint::iterations);
    py::class_<OffManifoldSample>(m, "OffManifoldSample")
        .def_readonly("magnitude", &OffManifoldSample::magnitude)
        .def_readonly("min_gap", &OffManifoldSample::min_gap)
        .def_readonly("argmin_lambda", &OffManifoldSample::argmin_lambda);
    py::class_<TraceResult>(m, "TraceResult")
        .def_readonly("points", &TraceResult::points)
        .def_readonly("complete", &TraceResult::complete)
        .def_readonly("stop_message", &TraceResult::stop_message);
    py::class_<PersistenceSolver>(m, "PersistenceSolver")
        .def(py::init<SystemContext, FermiFrame, PerturbationBasis, SplitBasis>(), py::arg("ctx"), py::arg("frame"),
             py::arg("basis"), py::arg("split"))
        .def_property_readonly("chart_radius", &PersistenceSolver::chart_radius)
        .def_property_readonly("split_basis", &PersistenceSolver::split_basis)
        .def("solve_eta", &PersistenceSolver::solve_eta, py::arg("xi"), py::arg("eta_guess") = Eigen::VectorXd())
        .def("evaluate", &PersistenceSolver::evaluate, py::arg("coeffs"))
        .def("trace", &PersistenceSolver::trace, py::arg("direction"), py::arg("steps"), py::arg("step_size"))
        .def("off_manifold_probe", &PersistenceSolver::off_manifold_probe, py::arg("direction"),
             py::arg("magnitudes"), py::arg("samples") = 41);
    m.def("eigenvector_formula", &eigenvector_formula, py::arg("ctx"), py::arg("nodal_w"), py::arg("lambda_"));
    m.def("q_gap", &q_gap, py::arg("ctx"), py::arg("nodal_w"), py::arg("lambda_"));

    py::class_<CompactW>(m, "ConstructedW")
        .def_readonly("w", &CompactW::w)
        .def_readonly("u", &CompactW::u)
        .def_readonly("psi", &CompactW::psi)
        .def_readonly("lambda_", &CompactW::lambda)
        .def_readonly("orthogonality", &CompactW::orthogonality)
        .def_readonly("min_divisor", &CompactW::min_divisor);
    m.def("construct_w", &construct_compact_w, py::arg("ctx"), py::arg("u"), py::arg("ball"),
          "W = (H - lambda0) u / (psi_1 - u) supported in the ball");

    m.def(
        "run_scenario",
        [](const py::object& scenario, const std::filesystem::path& out_dir) {
            runner::Scenario s = py::isinstance<py::dict>(scenario)
                                     ? runner::parse_scenario(py_to_json(scenario))
                                     : runner::load_scenario(py::str(scenario).cast<std::string>());
            runner::RunResult r;
            {
                py::gil_scoped_release release;
                r = runner::run_scenario(s, out_dir);
            }
            return json_to_py(r.report);
        },
        py::arg("scenario"), py::arg("out_dir"), "Runs a scenario (path or dict) and returns the report");
    m.def("list_scenarios", [] {
        py::list out;
        for (const auto& e : runner::catalog())
            out.append(py::dict(py::arg("name") = e.name, py::arg("anchor") = e.anchor,
                                py::arg("description") = e.description, py::arg("path") = e.path.string()));
        return out;
    });
    m.attr("__version__") = EMBEDLAB_VERSION;
}
