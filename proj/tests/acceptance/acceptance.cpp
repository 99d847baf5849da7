// Acceptance checks, one line per criterion. Exit status is nonzero if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "embedlab/error.hpp"
#include "embedlab/persistence.hpp"

using namespace embedlab;
using Clock = std::chrono::steady_clock;

namespace {

const cplx I1(0.0, 1.0);

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
    bool passed = true;
    std::ostringstream detail;
    std::string failures;
    void require(bool ok, const std::string& what) {
        if (ok) return;
        passed = false;
        failures += (failures.empty() ? "" : "; ") + what;
    }
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

DiscreteOperator calibrated_line(const Grid1D& g) {
    ModelSpec m;
    m.potential = calibrate_embedding(SechPair{}, g, 1.0).potential;
    return build_operator(m, g, Dirichlet{});
}

DiscreteOperator free_line(const Grid1D& g) {
    ModelSpec m;
    m.potential = Tabulated{std::vector<double>(g.n_points, 0.0)};
    return build_operator(m, g, Dirichlet{});
}

DiscreteOperator cylinder(ModelKind kind, int n, const Grid1D& g) {
    ModelSpec m;
    m.kind = kind;
    m.potential = SechSquaredWell{1.19};
    m.angular_cutoff = 3;
    m.angular_index = n;
    return build_operator(m, g, Dirichlet{});
}

SystemContext context_for(const DiscreteOperator& op, const Interval& search) {
    const SpectralData spec = find_embedded_eigenpairs(op, search);
    return make_context(op, spec, {spec.lambda0 - 0.2, spec.lambda0 + 0.2});
}

// Calibrated sech line on [-40, 40] with the six-bump basis used throughout.
struct Line {
    Grid1D grid{-40.0, 40.0, 2001};
    DiscreteOperator op;
    SystemContext ctx;
    FermiFrame frame;
    PerturbationBasis basis;
    Eigen::MatrixXd jac;
    Line() {
        op = calibrated_line(grid);
        ctx = context_for(op, {0.5, 1.5});
        const ResolventPair pair(ctx.hbar, ctx.spectral.lambda0, ctx.resolvent);
        frame = build_frame(ctx, pair, gaussian_probes(op.layout, grid, 8, 7), 2);
        basis = make_bump_basis(op.layout, grid,
                                {{-2.1, 0.6}, {-1.2, 0.8}, {-0.3, 0.5}, {0.6, 0.9}, {1.5, 0.7}, {2.4, 0.6}});
        jac = fermi_jacobian(frame, ctx, basis);
    }
};

const Line& line() {
    static const Line l;
    return l;
}

Outcome c1() {
    Outcome o;
    const auto start = Clock::now();
    double lam_err[2], fn_err[2];
    const int ns[2] = {2001, 4001};
    for (int k = 0; k < 2; ++k) {
        const Grid1D g{-20.0, 20.0, ns[k]};
        const auto op = calibrated_line(g);
        const auto s = find_embedded_eigenpairs(op, {0.5, 1.5});
        Eigen::VectorXd phi(g.n_points);
        for (int i = 0; i < g.n_points; ++i) phi[i] = 1.0 / std::cosh(g.x(i));
        phi /= op.layout.norm(phi);
        Eigen::VectorXd psi = s.eigvecs.col(0);
        if (psi.dot(phi) < 0) psi = -psi;
        lam_err[k] = std::abs(s.lambda0 - 1.0);
        fn_err[k] = op.layout.norm(psi - phi);
    }
    const double t = seconds_since(start);
    const double rl = lam_err[0] / lam_err[1], rf = fn_err[0] / fn_err[1];
    o.require(lam_err[0] <= 1e-3 && lam_err[1] <= 1e-3, "|lambda0 - 1| <= 1e-3");
    o.require(fn_err[0] <= 1e-3 && fn_err[1] <= 1e-3, "eigenfunction error <= 1e-3");
    o.require(rl >= 3.0 && rl <= 5.0, "eigenvalue ratio ~4");
    o.require(rf >= 3.0 && rf <= 5.0, "eigenfunction ratio ~4");
    o.require(t <= 30.0, "runtime <= 30 s");
    o.detail << "|lambda0-1| " << sci(lam_err[0]) << " -> " << sci(lam_err[1]) << " (ratio " << sci(rl)
             << "), L2 error " << sci(fn_err[0]) << " -> " << sci(fn_err[1]) << " (ratio " << sci(rf) << "), "
             << sci(t) << " s";
    return o;
}

Outcome c2() {
    Outcome o;
    const Grid1D g{-10.0, 10.0, 2001};
    const auto op = free_line(g);
    const int j = g.n_points / 2 + 100;
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(g.n_points);
    v[j] = 1.0 / g.spacing();
    const auto u = BoundaryResolvent(op, 1.0, Branch::Plus).resolve(v);
    ResolventOptions eps;
    eps.method = ResolventMethod::EpsilonExtrapolation;
    const auto ue = BoundaryResolvent(op, 1.0, Branch::Plus, eps).resolve(v);
    const double mu = 1.0;
    double err = 0, top = 0;
    for (int i = 0; i < g.n_points; ++i) {
        if (std::abs(g.x(i)) > 8.0) continue;
        const double r = std::abs(g.x(i) - g.x(j));
        const cplx green = (I1 * std::exp(I1 * mu * r) - std::exp(-mu * r)) / (4.0 * mu * mu * mu);
        err = std::max(err, std::abs(u[i] - green));
        top = std::max(top, std::abs(green));
    }
    const double agree = (u - ue).cwiseAbs().maxCoeff() / u.cwiseAbs().maxCoeff();
    o.require(err / top <= 1e-4, "Green's function sup error <= 1e-4");
    o.require(agree <= 1e-6, "radiation vs epsilon <= 1e-6");
    o.detail << "sup error on |x|<=8 " << sci(err / top) << ", method difference " << sci(agree);
    return o;
}

Outcome c3() {
    Outcome o;
    auto record = [&](const std::string& name, const DensityRank& r, int expect) {
        o.require(r.m == expect, name + " rank");
        o.require(r.gap() >= 1e4, name + " gap");
        o.detail << (o.detail.tellp() > 0 ? "; " : "") << name << " m=" << r.m << " gap " << sci(r.gap());
    };
    {
        const Grid1D g{-20.0, 20.0, 2001};
        const auto op = free_line(g);
        record("free", density_rank(ResolventPair(op, 1.0), gaussian_probes(op.layout, g, 8, 3)), 2);
    }
    {
        const Line& l = line();
        record("sech line",
               density_rank(ResolventPair(l.ctx.hbar, l.ctx.spectral.lambda0),
                            gaussian_probes(l.op.layout, l.grid, 8, 3)),
               2);
    }
    const Grid1D g{-40.0, 40.0, 2001};
    for (int n : {1, 2}) {
        const auto op = cylinder(ModelKind::CylinderEvenSector, n, g);
        const double l0 = n * n - 0.49;
        const auto spec = find_embedded_eigenpairs(op, {l0 - 0.2, l0 + 0.2});
        const auto hb = make_hbar(op, spec);
        record("cylinder even n=" + std::to_string(n),
               density_rank(ResolventPair(hb, spec.lambda0), gaussian_probes(op.layout, g, 2 * n + 6, 5)), 2 * n);
    }
    return o;
}

Outcome c4() {
    Outcome o;
    const Line& l = line();
    const double lambda0 = l.ctx.spectral.lambda0;
    double worst = 0;
    for (int k = 0; k < 20; ++k) {
        const double lam = l.ctx.window.lo + 0.01 + (l.ctx.window.width() - 0.02) * k / 19.0;
        const cplx expect = 1.0 / (lambda0 + 1.0 - lam);
        const cplx q = reduced_q(l.ctx.spectral, BoundaryResolvent(l.ctx.hbar, lam, Branch::Plus))(0, 0);
        worst = std::max(worst, std::abs(q - expect) / std::abs(expect));
    }
    o.require(worst <= 1e-8, "relative error <= 1e-8");
    o.detail << "worst relative error over 20 samples " << sci(worst);
    return o;
}

Outcome c5() {
    Outcome o;
    const Line& l = line();
    const double h = l.grid.spacing();
    const double l0 = solve_lambda(l.ctx, Eigen::VectorXd(), l.ctx.spectral.lambda0).lambda;
    const Eigen::VectorXd phi = l.ctx.psi1();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> center(-3.0, 3.0), width(0.3, 1.5);
    const double t = 1e-5;
    double worst = 0;
    for (int k = 0; k < 10; ++k) {
        const auto basis = make_bump_basis(l.op.layout, l.grid, {{center(rng), width(rng)}});
        const Eigen::VectorXd w = basis.real_element(0);
        const double first = h * phi.dot(w.cwiseProduct(phi));
        const LambdaSolve s = solve_lambda(l.ctx, basis, Eigen::VectorXd::Constant(1, t), l0);
        worst = std::max(worst, std::abs((s.lambda - l0) / t - first) / std::abs(first));
    }
    o.require(worst <= 1e-4, "relative deviation <= 1e-4");
    o.detail << "worst relative deviation over 10 bumps " << sci(worst);
    return o;
}

Outcome c6() {
    Outcome o;
    const Line& l = line();
    const Eigen::MatrixXd fd = fermi_jacobian_fd(l.frame, l.ctx, l.basis, Eigen::VectorXd::Zero(l.basis.size()));
    const double floor = 1e-8 * l.jac.cwiseAbs().maxCoeff();
    double worst = 0;
    for (int i = 0; i < l.jac.rows(); ++i)
        for (int j = 0; j < l.jac.cols(); ++j)
            worst = std::max(worst, std::abs(l.jac(i, j) - fd(i, j)) / std::max(std::abs(l.jac(i, j)), floor));
    const int rank = numerical_rank(l.jac, 1e-6);
    o.require(worst <= 1e-3, "entrywise relative error <= 1e-3");
    o.require(rank == 2, "rank 2");
    o.detail << "entrywise relative error " << sci(worst) << ", rank " << rank << " with p=6";
    return o;
}

Outcome c7() {
    Outcome o;
    const Line& l = line();
    const PersistenceSolver solver(l.ctx, l.frame, l.basis, split(l.jac));
    const auto& sp = solver.split_basis();
    double f = 0, e = 0, g = 0;
    for (int k = 0; k < sp.kernel.cols(); ++k) {
        Eigen::VectorXd xi = Eigen::VectorXd::Zero(sp.kernel.cols());
        xi[k] = 1e-3;
        const ManifoldPoint p = solver.solve_eta(xi);
        f = std::max(f, p.fermi_residual);
        e = std::max(e, p.eigen_residual);
        g = std::max(g, p.q_gap);
    }
    o.require(sp.kernel.cols() == 4, "p - 2 kernel directions");
    o.require(f <= 1e-10, "|F| <= 1e-10");
    o.require(e <= 1e-7, "eigen residual <= 1e-7");
    o.require(g <= 1e-6, "Q gap <= 1e-6");
    o.detail << sp.kernel.cols() << " kernel directions: max |F| " << sci(f) << ", eigen residual " << sci(e)
             << ", Q gap " << sci(g) << "; normal directions at c=1e-2: min Q gap over the window";
    for (int k = 0; k < sp.codim; ++k) {
        const auto r = solver.off_manifold_probe(sp.normal.col(k), {1e-2}, 41);
        o.require(r[0].min_gap >= 1e-4, "normal " + std::to_string(k + 1) + " Q gap >= 1e-4");
        o.detail << (k ? ", " : " ") << sci(r[0].min_gap);
    }
    return o;
}

Eigen::VectorXd profile_u(const DiscreteOperator& op, const Ball& ball, double center, double width, int mode,
                          double norm) {
    const auto& layout = op.layout;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(layout.size());
    for (int iz = 0; iz < layout.nz(); ++iz) {
        const double z = op.grid.x(iz);
        if (!ball.contains(z)) continue;
        const double t = (z - center) / width;
        u[layout.index(iz, mode)] = std::exp(-t * t);
    }
    return u * (norm / layout.norm(u));
}

Outcome c8() {
    Outcome o;
    const Line& l = line();
    const SystemContext cyl = context_for(cylinder(ModelKind::CylinderEvenSector, 1, l.grid), {0.31, 0.71});
    const Ball ball{0.0, 2.0};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> center(-0.3, 0.3), width(0.3, 0.7);
    struct Model {
        const char* name;
        const SystemContext* ctx;
        int mode;
    };
    for (const Model& m : {Model{"line", &l.ctx, 0}, Model{"cylinder", &cyl, 1}}) {
        double e = 0, id = 0, shift = 0;
        const double lambda0 = m.ctx->spectral.lambda0;
        for (int k = 0; k < 5; ++k) {
            const Eigen::VectorXd u = profile_u(m.ctx->hbar, ball, center(rng), width(rng), m.mode, 1e-3);
            const CompactW c = construct_compact_w(*m.ctx, u, ball);
            const Eigen::VectorXcd psi = c.psi.cast<cplx>();
            e = std::max(e, eigen_residual(add_multiplication(m.ctx->hbar, c.w), lambda0, psi));
            id = std::max(id, (eigenvector_formula(*m.ctx, c.w, lambda0) - psi).norm() / psi.norm());
            shift = std::max(shift, std::abs(solve_lambda(*m.ctx, c.w, lambda0).lambda - lambda0));
        }
        o.require(e <= 1e-8, std::string(m.name) + " eigen residual");
        o.require(id <= 1e-8, std::string(m.name) + " resolvent identity");
        o.require(shift <= 1e-10, std::string(m.name) + " lambda(W) = lambda0");
        o.detail << m.name << ": eigen residual " << sci(e) << ", identity " << sci(id) << ", |lambda(W)-lambda0| "
                 << sci(shift) << (m.mode == 0 ? "; " : "");
    }
    return o;
}

Outcome c9() {
    Outcome o;
    const Line& l = line();
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> center(-2.0, 2.0), width(0.4, 1.0), coeff(-0.05, 0.05),
        offset(-0.1, 0.1);
    double worst = 0;
    for (int k = 0; k < 5; ++k) {
        const auto basis = make_bump_basis(l.op.layout, l.grid, {{center(rng), width(rng)}, {center(rng), width(rng)}});
        const Eigen::Vector2d c(coeff(rng), coeff(rng));
        const Eigen::VectorXcd v = gaussian_probes(l.op.layout, l.grid, 3, 100 + k).col(k % 3).cast<cplx>();
        const double lam = l.ctx.spectral.lambda0 + offset(rng);
        worst = std::max(worst, perturbation_identity_residual(l.ctx.hbar, basis.combine(c), lam, v));
    }
    o.require(worst <= 1e-6, "residual <= 1e-6");
    o.detail << "worst residual over 5 draws " << sci(worst);
    return o;
}

Outcome c10(Clock::time_point suite_start) {
    Outcome o;
    const Grid1D g{-40.0, 40.0, 2001};
    const auto op = cylinder(ModelKind::CylinderFull, 1, g);
    const SystemContext ctx = context_for(op, {0.31, 0.71});
    const ResolventPair pair(ctx.hbar, ctx.spectral.lambda0, ctx.resolvent);
    const Eigen::MatrixXd probes = gaussian_probes(op.layout, g, 8, 7);
    const int m = density_rank(pair, probes).m;
    const FermiFrame frame = build_frame(ctx, pair, probes, m);
    const auto basis = make_bump_basis(
        op.layout, g, {{-0.8, 0.7, 1}, {0.5, 0.6, 1}, {0.0, 0.8, 2, true}, {0.7, 0.5, 2, true}, {-0.4, 0.9, 0}});
    const Eigen::MatrixXd jac = fermi_jacobian(frame, ctx, basis);
    const int rank = numerical_rank(jac, 1e-6);
    const PersistenceSolver solver(ctx, frame, basis, split(jac));
    const int kdim = static_cast<int>(solver.split_basis().kernel.cols());
    double rows = 0, e = 0, orth = 0;
    for (int k = 0; k < kdim; ++k)
        for (double sgn : {1.0, -1.0}) {
            Eigen::VectorXd xi = Eigen::VectorXd::Zero(kdim);
            xi[k] = sgn * 1e-3;
            const ManifoldPoint p = solver.solve_eta(xi);
            rows = std::max(rows, p.fermi_values.cwiseAbs().maxCoeff());
            e = std::max(e, p.eigen_residual);
            orth = std::max(orth, p.orthogonality);
        }
    const double total = seconds_since(suite_start);
    o.require(ctx.n() == 2, "multiplicity 2");
    o.require(m == 2, "m = 2");
    o.require(rank == 3, "rank m + n - 1 = 3");
    o.require(rows <= 1e-10, "condition blocks <= 1e-10");
    o.require(e <= 1e-7, "eigen residual <= 1e-7");
    o.require(orth <= 1e-8, "orthogonality <= 1e-8");
    o.require(total <= 600.0, "suite runtime <= 10 min");
    o.detail << "multiplicity " << ctx.n() << ", m " << m << ", rank " << rank << "; " << 2 * kdim
             << " points: condition rows " << sci(rows) << ", eigen residual " << sci(e) << ", orthogonality "
             << sci(orth) << "; suite runtime " << sci(total) << " s";
    return o;
}

}  // namespace

int main() {
    const auto start = Clock::now();
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"C1", c1}, {"C2", c2}, {"C3", c3}, {"C4", c4}, {"C5", c5},
        {"C6", c6}, {"C7", c7}, {"C8", c8}, {"C9", c9}, {"C10", [&] { return c10(start); }}};
    int failed = 0;
    for (const auto& [id, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const Error& e) {
            o.passed = false;
            o.detail << "error " << to_string(e.kind()) << ": " << e.what();
        }
        std::string line = o.detail.str();
        if (!o.failures.empty()) line += " | failed: " + o.failures;
        std::printf("%s %s %s\n", id, o.passed ? "PASS" : "FAIL", line.c_str());
        std::fflush(stdout);
        if (!o.passed) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
