#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include "runner.hpp"

#ifndef EMBEDLAB_VERSION
#define EMBEDLAB_VERSION "0.0.0"
#endif

namespace embedlab::runner {

namespace fs = std::filesystem;

namespace {

template <class F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(e, stage);
    }
}

// Runs body(i) for i < n on up to thread_cap() threads; rethrows the first failure.
template <class F>
void parallel_for(int n, F&& body) {
    const int workers = std::max(1, std::min(thread_cap(), n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first;
    std::mutex lock;
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> g(lock);
                    if (!first) first = std::current_exception();
                    next = n;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
    return rows;
}

std::vector<std::string> numbered(const std::string& prefix, int count) {
    std::vector<std::string> out;
    for (int i = 1; i <= count; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

std::string csv_text(std::string s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += (c == '"') ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

struct Setup {
    DiscreteOperator op;
    std::optional<EmbeddingCalibration> calibration;
    SpectralData spec;
    SystemContext ctx;
    PerturbationBasis basis;
    bool has_basis = false;
    Eigen::MatrixXd probes;
    DensityRank rank;
    FermiFrame frame;
    bool has_frame = false;
};

EigenSearchOptions search_options(const Scenario& s) {
    EigenSearchOptions o;
    o.edge_threshold = s.tol("edge_threshold");
    o.isolation_radius = s.tol("isolation_radius");
    return o;
}

Setup prepare(const Scenario& s, bool need_frame) {
    Setup st;
    ModelSpec model = s.model;
    if (s.calibrate && !model.is_cylinder())
        if (const auto* p = std::get_if<SechPair>(&model.potential)) {
            st.calibration = in_stage("operator_lab", [&] { return calibrate_embedding(*p, s.grid, s.search.center()); });
            model.potential = st.calibration->potential;
        }
    st.op = in_stage("operator_lab", [&] { return build_operator(model, s.grid, Dirichlet{}); });
    if (!s.bumps.empty() || !s.tables.empty()) {
        st.basis = in_stage("operator_lab", [&] {
            PerturbationBasis b = s.bumps.empty() ? PerturbationBasis{}
                                                  : make_bump_basis(st.op.layout, s.grid, s.bumps);
            for (const auto& [label, values] : s.tables) {
                b.elements.push_back(Eigen::Map<const Eigen::VectorXd>(values.data(), values.size()).cast<cplx>());
                b.labels.push_back(label);
            }
            validate_basis(b, st.op.layout);
            return b;
        });
        st.has_basis = true;
    }
    if (!s.has_eigenvalue) return st;

    st.spec = in_stage("spectral_core", [&] { return find_embedded_eigenpairs(st.op, s.search, search_options(s)); });
    const Interval window{st.spec.lambda0 - s.window_half, st.spec.lambda0 + s.window_half};
    st.ctx = in_stage("boundary_resolvent", [&] { return make_context(st.op, st.spec, window, s.rotation, s.method); });
    if (!need_frame) return st;

    in_stage("fermi_frame", [&] {
        const ResolventPair pair(st.ctx.hbar, st.spec.lambda0, st.ctx.resolvent);
        st.probes = gaussian_probes(st.op.layout, s.grid, s.probe_count, s.seed, s.probe_span);
        st.rank = density_rank(pair, st.probes, s.tol("rank_threshold"));
        st.frame = build_frame(st.ctx, pair, st.probes, st.rank.m);
        return 0;
    });
    st.has_frame = true;
    return st;
}

PersistenceSolver make_solver(const Scenario& s, const Setup& st, const Eigen::MatrixXd& jac) {
    PersistenceOptions o;
    o.tol = s.tol("tol_manifold");
    const SplitBasis sp = in_stage("persistence_solver", [&] { return split(jac, -1, s.tol("rank_threshold")); });
    return PersistenceSolver(st.ctx, st.frame, st.basis, sp, o);
}

json spectral_json(const Setup& st) {
    json j;
    j["lambda0"] = st.spec.lambda0;
    j["multiplicity"] = st.spec.multiplicity;
    j["continuum_edge"] = st.spec.continuum_edge;
    j["dirichlet_lambda"] = st.spec.dirichlet_lambda;
    j["residuals"] = st.spec.residuals;
    j["edge_amplitudes"] = st.spec.edge_amplitudes;
    j["nearest_other"] = std::isfinite(st.spec.nearest_other) ? json(st.spec.nearest_other) : json(nullptr);
    j["refined"] = st.spec.refined;
    if (st.calibration) {
        j["calibration"] = {{"a", st.calibration->potential.a},
                            {"b", st.calibration->potential.b},
                            {"amplitude_shift", st.calibration->amplitude_shift},
                            {"mismatch", st.calibration->mismatch}};
    }
    return j;
}

json point_json(const ManifoldPoint& p, const Scenario& s) {
    return {{"xi", vec_json(p.xi)},
            {"eta", vec_json(p.eta)},
            {"coeffs", vec_json(p.coeffs)},
            {"lambda", p.lambda},
            {"fermi_residual", p.fermi_residual},
            {"eigen_residual", p.eigen_residual},
            {"imag_residual", p.imag_residual},
            {"orthogonality", p.orthogonality},
            {"q_gap", p.q_gap},
            {"iterations", p.iterations},
            {"refreshes", p.refreshes},
            {"passed", p.fermi_residual <= s.tol("tol_manifold") && p.eigen_residual <= s.tol("tol_eig_pert") &&
                           p.q_gap <= s.tol("q_tol")}};
}

std::vector<std::string> point_row(int index, const ManifoldPoint& p) {
    return {std::to_string(index), num(p.xi.norm()),        num(p.lambda),        num(p.fermi_residual),
            num(p.eigen_residual), num(p.imag_residual),    num(p.orthogonality), num(p.q_gap),
            std::to_string(p.iterations)};
}

const std::vector<std::string> point_header = {"index",          "xi_norm",       "lambda",
                                               "fermi_residual", "eigen_residual", "imag_residual",
                                               "orthogonality",  "q_gap",         "iterations"};

struct Output {
    fs::path dir;
    std::vector<fs::path> files;
    json artifacts = json::object();
    void csv(const std::string& key, const std::string& file, const std::vector<std::string>& header,
             const std::vector<std::vector<std::string>>& rows) {
        fs::create_directories(dir);
        const fs::path p = dir / file;
        write_csv(p, header, rows);
        files.push_back(p);
        artifacts[key] = file;
    }
};

json run_spectrum(const Scenario& s, const Setup& st, Output& out) {
    json r = spectral_json(st);
    const auto q = in_stage("boundary_resolvent", [&] {
        const BoundaryResolvent plus(st.ctx.hbar, st.spec.lambda0, Branch::Plus, st.ctx.resolvent);
        return eigenvalue_criterion(st.spec, plus, s.tol("q_tol"));
    });
    r["q_criterion"] = {{"is_eigenvalue", q.is_eigenvalue}, {"gap", q.gap}};

    const auto& layout = st.op.layout;
    const int n = st.spec.multiplicity;
    std::vector<std::string> header = {"index", "z", "harmonic", "sine"};
    for (auto& h : numbered("psi_", n)) header.push_back(h);
    std::vector<std::vector<std::string>> rows;
    for (int iz = 0; iz < layout.nz(); ++iz)
        for (int a = 0; a < layout.n_modes(); ++a) {
            const int k = layout.index(iz, a);
            std::vector<std::string> row = {std::to_string(k), num(s.grid.x(iz)),
                                            std::to_string(layout.modes()[a].harmonic),
                                            layout.modes()[a].sine ? "1" : "0"};
            for (int i = 0; i < n; ++i) row.push_back(num(st.spec.eigvecs(k, i)));
            rows.push_back(std::move(row));
        }
    out.csv("eigenvectors", "eigenvectors.csv", header, rows);
    return r;
}

json run_delta_rank(const Scenario& s, const Setup& st, Output& out) {
    json r;
    const double lambda = s.options.contains("lambda") ? s.options["lambda"].get<double>() : st.spec.lambda0;
    const DensityRank dr = in_stage("boundary_resolvent", [&] {
        const DiscreteOperator& base = s.has_eigenvalue ? st.ctx.hbar : st.op;
        ResolventOptions o;
        o.method = s.method;
        const ResolventPair pair(base, lambda, o);
        const Eigen::MatrixXd probes = gaussian_probes(st.op.layout, s.grid, s.probe_count, s.seed, s.probe_span);
        return density_rank(pair, probes, s.tol("rank_threshold"));
    });
    r["lambda"] = lambda;
    r["rank"] = dr.m;
    r["singular_values"] = vec_json(dr.singular_values);
    r["gap"] = dr.m < dr.singular_values.size() ? json(dr.gap()) : json(nullptr);
    if (s.has_eigenvalue) r["spectral"] = spectral_json(st);
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < dr.singular_values.size(); ++i)
        rows.push_back({std::to_string(i + 1), num(dr.singular_values[i])});
    out.csv("singular_values", "singular_values.csv", {"index", "sigma"}, rows);
    return r;
}

json frame_json(const Setup& st) {
    return {{"m", st.frame.m},
            {"rank_singular_values", vec_json(st.rank.singular_values)},
            {"selected", st.frame.selected},
            {"pivots", vec_json(st.frame.pivots)},
            {"imag_ratio", st.frame.imag_ratio}};
}

std::vector<std::vector<std::string>> matrix_rows(const Eigen::MatrixXd& m) {
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < m.rows(); ++i) {
        std::vector<std::string> row = {std::to_string(i + 1)};
        for (int j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

json run_fermi_jacobian(const Scenario& s, const Setup& st, Output& out) {
    const double step = s.options.value("fd_step", 0.0);
    Eigen::MatrixXd jac, fd;
    in_stage("fermi_frame", [&] {
        jac = fermi_jacobian(st.frame, st.ctx, st.basis);
        fd = fermi_jacobian_fd(st.frame, st.ctx, st.basis, Eigen::VectorXd::Zero(st.basis.size()), step);
        return 0;
    });
    const double scale = jac.cwiseAbs().maxCoeff();
    const double err = (jac - fd).cwiseAbs().maxCoeff() / (scale > 0 ? scale : 1.0);
    Eigen::VectorXd sv;
    const int rank = numerical_rank(jac, s.tol("rank_threshold"), &sv);
    json r;
    r["spectral"] = spectral_json(st);
    r["frame"] = frame_json(st);
    r["rows"] = jac.rows();
    r["density_rows"] = st.frame.m;
    r["basis_size"] = st.basis.size();
    r["jacobian"] = mat_json(jac);
    r["singular_values"] = vec_json(sv);
    r["rank"] = rank;
    r["full_row_rank"] = rank == jac.rows();
    r["fd_max_rel_error"] = err;
    r["fd_passed"] = err <= s.tol("fd_rel");

    std::vector<std::string> header = {"row"};
    for (auto& h : numbered("c_", jac.cols())) header.push_back(h);
    out.csv("jacobian", "jacobian.csv", header, matrix_rows(jac));
    out.csv("jacobian_fd", "jacobian_fd.csv", header, matrix_rows(fd));
    std::vector<std::vector<std::string>> rows;
    for (int k = 0; k < st.frame.m; ++k)
        rows.push_back({std::to_string(k + 1), std::to_string(st.frame.selected[k]), num(st.frame.pivots[k])});
    out.csv("frame", "frame.csv", {"column", "probe", "pivot"}, rows);
    return r;
}

Eigen::MatrixXd jacobian_of(const Setup& st) {
    return in_stage("fermi_frame", [&] { return fermi_jacobian(st.frame, st.ctx, st.basis); });
}

json run_solve_manifold(const Scenario& s, const Setup& st, Output& out) {
    const PersistenceSolver solver = make_solver(s, st, jacobian_of(st));
    const double xi_norm = s.options.value("xi_norm", 0.1 * solver.chart_radius());
    const int k = static_cast<int>(solver.split_basis().kernel.cols());
    std::vector<ManifoldPoint> points(k + 1);
    parallel_for(k + 1, [&](int i) {
        Eigen::VectorXd xi = Eigen::VectorXd::Zero(k);
        if (i > 0) xi[i - 1] = xi_norm;
        points[i] = in_stage("persistence_solver", [&] { return solver.solve_eta(xi); });
    });
    json r;
    r["spectral"] = spectral_json(st);
    r["frame"] = frame_json(st);
    r["codim"] = solver.split_basis().codim;
    r["kernel_dim"] = k;
    r["chart_radius"] = solver.chart_radius();
    r["xi_norm"] = xi_norm;
    r["points"] = json::array();
    bool all = true;
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i <= k; ++i) {
        json p = point_json(points[i], s);
        all = all && p["passed"].get<bool>();
        r["points"].push_back(p);
        rows.push_back(point_row(i, points[i]));
    }
    r["all_passed"] = all;
    out.csv("manifold_points", "manifold_points.csv", point_header, rows);
    return r;
}

json run_trace(const Scenario& s, const Setup& st, Output& out) {
    const PersistenceSolver solver = make_solver(s, st, jacobian_of(st));
    const auto& kernel = solver.split_basis().kernel;
    const int index = s.options.value("kernel_index", 0);
    if (index < 0 || index >= kernel.cols())
        fail(ErrorKind::ConfigError, "options.kernel_index is outside the kernel (dimension " +
                                         std::to_string(kernel.cols()) + ")");
    Eigen::VectorXd dir = kernel.col(index);
    if (s.options.value("reverse", false)) dir = -dir;
    const int steps = s.options.value("steps", 10);
    const double step = s.options.value("step_size", 1e-4);
    const TraceResult tr = in_stage("persistence_solver", [&] { return solver.trace(dir, steps, step); });

    std::vector<double> fresh(tr.points.size());
    parallel_for(static_cast<int>(tr.points.size()), [&](int i) {
        fresh[i] = in_stage("fermi_frame", [&] {
            return solve_lambda(st.ctx, st.basis, tr.points[i].coeffs, tr.points[i].lambda).lambda;
        });
    });
    json r;
    r["spectral"] = spectral_json(st);
    r["complete"] = tr.complete;
    if (!tr.complete) r["stop"] = {{"kind", to_string(tr.stop_kind)}, {"message", tr.stop_message}};
    r["steps"] = steps;
    r["step_size"] = step;
    r["points"] = json::array();
    double max_fresh = 0, max_jump = 0, prev = st.spec.lambda0;
    bool all = tr.complete;
    std::vector<std::string> header = point_header;
    header.push_back("fresh_lambda_diff");
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < tr.points.size(); ++i) {
        const auto& p = tr.points[i];
        json pj = point_json(p, s);
        const double d = std::abs(fresh[i] - p.lambda);
        pj["fresh_lambda_diff"] = d;
        all = all && pj["passed"].get<bool>();
        max_fresh = std::max(max_fresh, d);
        max_jump = std::max(max_jump, std::abs(p.lambda - prev));
        prev = p.lambda;
        r["points"].push_back(pj);
        auto row = point_row(static_cast<int>(i + 1), p);
        row.push_back(num(d));
        rows.push_back(std::move(row));
    }
    r["max_fresh_lambda_diff"] = max_fresh;
    r["max_lambda_step"] = max_jump;
    r["all_passed"] = all && max_fresh <= s.tol("tol_manifold");
    out.csv("trace", "trace.csv", header, rows);
    return r;
}

struct BumpU {
    double center, width;
};

// Gaussian profile in z times one angular mode, cut to the ball, scaled to L2 norm `norm`.
Eigen::VectorXd bump_u(const Setup& st, const Ball& ball, const BumpU& b, int harmonic, bool sine, double norm) {
    const auto& layout = st.op.layout;
    int mode = -1;
    for (int a = 0; a < layout.n_modes(); ++a)
        if (layout.modes()[a].harmonic == harmonic && layout.modes()[a].sine == sine) mode = a;
    if (mode < 0) fail(ErrorKind::ConfigError, "options.u names an angular mode the model does not carry");
    Eigen::VectorXd u = Eigen::VectorXd::Zero(layout.size());
    for (int iz = 0; iz < layout.nz(); ++iz) {
        const double z = st.op.grid.x(iz);
        if (!ball.contains(z)) continue;
        const double t = (z - b.center) / b.width;
        u[layout.index(iz, mode)] = std::exp(-t * t);
    }
    const double n = layout.norm(u);
    return n > 0 ? Eigen::VectorXd(u * (norm / n)) : u;
}

json run_construct_w(const Scenario& s, const Setup& st, Output& out) {
    const json& bj = s.options["ball"];
    const Ball ball{bj.value("center", 0.0), bj.value("radius", 1.0)};
    const json uj = s.options.value("u", json::object());
    const BumpU nominal{uj.value("center", ball.center), uj.value("width", 0.25 * ball.radius)};
    const double norm = s.options.value("norm", 1e-3);
    const int harmonic = uj.value("harmonic", s.model.is_cylinder() ? s.model.angular_index : 0);
    const bool sine = uj.value("sine", false);
    const int samples = s.options.value("samples", 1);
    if (samples < 1) fail(ErrorKind::ConfigError, "options.samples must be positive");

    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<BumpU> draws = {nominal};
    for (int k = 1; k < samples; ++k)
        draws.push_back({nominal.center + 0.1 * ball.radius * unit(rng), nominal.width * (1.0 + 0.2 * unit(rng))});

    struct Sample {
        CompactW c;
        double eigen_residual, identity, lambda_shift, fermi_norm, q_gap, w_max;
    };
    std::vector<Sample> out_samples(draws.size());
    parallel_for(static_cast<int>(draws.size()), [&](int i) {
        Sample& r = out_samples[i];
        r.c = in_stage("persistence_solver",
                       [&] { return construct_compact_w(st.ctx, bump_u(st, ball, draws[i], harmonic, sine, norm), ball); });
        in_stage("persistence_solver", [&] {
            const DiscreteOperator hw = add_multiplication(st.ctx.hbar, r.c.w);
            const Eigen::VectorXcd psi = r.c.psi.cast<cplx>();
            r.eigen_residual = eigen_residual(hw, r.c.lambda, psi);
            r.identity = (eigenvector_formula(st.ctx, r.c.w, st.spec.lambda0) - psi).norm() / psi.norm();
            r.lambda_shift = std::abs(solve_lambda(st.ctx, r.c.w, st.spec.lambda0).lambda - st.spec.lambda0);
            r.fermi_norm = st.has_frame ? fermi_map_nodal(st.frame, st.ctx, r.c.w).values.norm() : 0.0;
            r.q_gap = q_gap(st.ctx, r.c.w, st.spec.lambda0);
            r.w_max = r.c.w.cwiseAbs().maxCoeff();
            return 0;
        });
    });

    json r;
    r["spectral"] = spectral_json(st);
    r["ball"] = {{"center", ball.center}, {"radius", ball.radius}};
    r["samples"] = json::array();
    bool all = true;
    std::vector<std::vector<std::string>> summary;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        const Sample& x = out_samples[i];
        const bool ok = x.eigen_residual <= s.tol("tol_eig_pert") && x.identity <= s.tol("tol_eig_pert") &&
                        x.lambda_shift <= s.tol("tol_manifold");
        all = all && ok;
        r["samples"].push_back({{"u_center", draws[i].center},
                                {"u_width", draws[i].width},
                                {"u_norm", norm},
                                {"lambda", x.c.lambda},
                                {"orthogonality", x.c.orthogonality},
                                {"min_divisor", x.c.min_divisor},
                                {"w_max", x.w_max},
                                {"support", {s.grid.x(x.c.support_lo), s.grid.x(std::max(x.c.support_lo, x.c.support_hi))}},
                                {"eigen_residual", x.eigen_residual},
                                {"identity_residual", x.identity},
                                {"lambda_shift", x.lambda_shift},
                                {"fermi_norm", x.fermi_norm},
                                {"q_gap", x.q_gap},
                                {"passed", ok}});
        summary.push_back({std::to_string(i), num(x.eigen_residual), num(x.identity), num(x.lambda_shift),
                           num(x.q_gap), num(x.w_max)});
    }
    r["all_passed"] = all;

    // nodal W of the nominal sample
    const auto& layout = st.op.layout;
    const Eigen::VectorXd& w = out_samples[0].c.w;
    std::vector<std::vector<std::string>> rows;
    for (int iz = 0; iz < layout.nz(); ++iz)
        for (int l = 0; l < layout.theta_nodes(); ++l) {
            const int k = iz * layout.theta_nodes() + l;
            rows.push_back({std::to_string(k), num(s.grid.x(iz)), num(layout.cylinder() ? layout.theta(l) : 0.0),
                            num(w[k])});
        }
    out.csv("compact_w", "compact_w.csv", {"node", "z", "theta", "w"}, rows);
    out.csv("compact_w_samples", "compact_w_samples.csv",
            {"sample", "eigen_residual", "identity_residual", "lambda_shift", "q_gap", "w_max"}, summary);
    return r;
}

json run_off_manifold(const Scenario& s, const Setup& st, Output& out) {
    const PersistenceSolver solver = make_solver(s, st, jacobian_of(st));
    const int index = s.options.value("normal_index", 0);
    if (index < 0 || index >= solver.split_basis().codim)
        fail(ErrorKind::ConfigError, "options.normal_index is outside the normal block");
    const Eigen::VectorXd d = normal_direction(solver.split_basis(), index);
    std::vector<double> mags = {0.005, 0.01, 0.02};
    if (s.options.contains("magnitudes")) mags = s.options["magnitudes"].get<std::vector<double>>();
    const int samples = s.options.value("samples", 41);
    std::vector<OffManifoldSample> res(mags.size());
    parallel_for(static_cast<int>(mags.size()), [&](int i) {
        res[i] = in_stage("persistence_solver", [&] { return solver.off_manifold_probe(d, {mags[i]}, samples).at(0); });
    });
    json r;
    r["spectral"] = spectral_json(st);
    r["direction"] = vec_json(d);
    r["samples"] = json::array();
    std::vector<std::vector<std::string>> rows;
    for (const auto& x : res) {
        r["samples"].push_back({{"magnitude", x.magnitude}, {"min_gap", x.min_gap}, {"argmin_lambda", x.argmin_lambda}});
        for (std::size_t k = 0; k < x.lambdas.size(); ++k)
            rows.push_back({num(x.magnitude), num(x.lambdas[k]), num(x.gaps[k])});
    }
    json ratios = json::array();
    for (std::size_t i = 1; i < res.size(); ++i)
        ratios.push_back(res[i - 1].min_gap > 0 ? json(res[i].min_gap / res[i - 1].min_gap) : json(nullptr));
    r["gap_ratios"] = ratios;
    out.csv("off_manifold", "off_manifold.csv", {"magnitude", "lambda", "gap"}, rows);
    return r;
}

json run_hypotheses(const Scenario& s, const Setup& st, Output& out) {
    Eigen::MatrixXd jac;
    HypothesisInputs in;
    in.edge_threshold = s.tol("edge_threshold");
    in.rank_threshold = s.tol("rank_threshold");
    if (st.has_basis) {
        in.basis = &st.basis;
        if (st.has_frame) {
            jac = jacobian_of(st);
            in.fermi_jacobian = &jac;
            in.expected_rank = s.options.value("expected_rank", static_cast<int>(jac.rows()));
        }
    }
    const HypothesisReport rep = in_stage("spectral_core", [&] { return check_hypotheses(st.spec, st.op, in); });
    json r;
    r["spectral"] = spectral_json(st);
    r["checks"] = json::array();
    std::vector<std::vector<std::string>> rows;
    for (const auto& c : rep.checks) {
        r["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"detail", c.detail}});
        rows.push_back({c.name, c.passed ? "1" : "0", num(c.value), csv_text(c.detail)});
    }
    r["all_passed"] = rep.all_passed();
    out.csv("hypotheses", "hypotheses.csv", {"name", "passed", "value", "detail"}, rows);
    return r;
}

bool needs_frame(const Scenario& s) {
    switch (s.task) {
        case Task::FermiJacobian:
        case Task::SolveManifold:
        case Task::Trace:
        case Task::OffManifold:
            return true;
        case Task::ConstructW:
            return true;
        case Task::HypothesisCheck:
            return !s.bumps.empty() || !s.tables.empty();
        default:
            return false;
    }
}

}  // namespace

RunResult run_scenario(const Scenario& s, const fs::path& out_dir) {
    const auto start = std::chrono::steady_clock::now();
    Output out{out_dir};
    const Setup st = prepare(s, needs_frame(s));

    json results;
    switch (s.task) {
        case Task::Spectrum: results = run_spectrum(s, st, out); break;
        case Task::DeltaRank: results = run_delta_rank(s, st, out); break;
        case Task::FermiJacobian: results = run_fermi_jacobian(s, st, out); break;
        case Task::SolveManifold: results = run_solve_manifold(s, st, out); break;
        case Task::Trace: results = run_trace(s, st, out); break;
        case Task::ConstructW: results = run_construct_w(s, st, out); break;
        case Task::OffManifold: results = run_off_manifold(s, st, out); break;
        case Task::HypothesisCheck: results = run_hypotheses(s, st, out); break;
    }

    json report;
    report["status"] = "ok";
    report["scenario"] = s.raw;
    report["scenario"]["name"] = s.name;
    report["task"] = to_string(s.task);
    report["seed"] = s.seed;
    report["versions"] = {{"embedlab", EMBEDLAB_VERSION},
                          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                        "." + std::to_string(EIGEN_MINOR_VERSION)},
                          {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                       std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                       std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    report["grid"] = {{"x_min", s.grid.x_min}, {"x_max", s.grid.x_max}, {"n_points", s.grid.n_points},
                      {"h", s.grid.spacing()}};
    report["tolerances"] = json::object();
    for (const auto& [k, v] : default_tolerances()) report["tolerances"][k] = s.tol(k);
    report["threads"] = thread_cap();
    report["results"] = {{to_string(s.task), results}};
    report["artifacts"] = out.artifacts;
    report["artifacts"]["report"] = "report.json";
    report["runtime_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    fs::create_directories(out_dir);
    const fs::path rp = out_dir / "report.json";
    std::ofstream(rp) << report.dump(2) << '\n';
    out.files.push_back(rp);
    return {report, out.files};
}

}  // namespace embedlab::runner
