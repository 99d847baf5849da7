#include "embedlab/fermi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "embedlab/error.hpp"

namespace embedlab {

namespace {

double q11(const SystemContext& ctx, const DiscreteOperator& op, double lambda) {
    const BoundaryResolvent r(op, lambda, Branch::Plus, ctx.resolvent);
    const Eigen::VectorXcd psi = ctx.psi1().cast<cplx>();
    // A = Re Q+ for real psi_1 and real W (the two branches are conjugate)
    return (op.layout.h() * psi.dot(r.resolve(psi))).real();
}

}  // namespace

SystemContext make_context(const DiscreteOperator& h, const SpectralData& spec, const Interval& window,
                           double rotation, ResolventMethod method) {
    if (!std::holds_alternative<Dirichlet>(h.bc))
        fail(ErrorKind::InvalidArgument, "context expects the Dirichlet operator");
    if (!window.contains(spec.lambda0)) fail(ErrorKind::InvalidArgument, "window must contain lambda0");
    SystemContext ctx;
    ctx.spectral = spec;
    if (rotation != 0.0) {
        if (spec.multiplicity < 2) fail(ErrorKind::InvalidArgument, "rotation needs a degenerate eigenvalue");
        const Eigen::VectorXd a = spec.eigvecs.col(0), b = spec.eigvecs.col(1);
        ctx.spectral.eigvecs.col(0) = std::cos(rotation) * a + std::sin(rotation) * b;
        ctx.spectral.eigvecs.col(1) = -std::sin(rotation) * a + std::cos(rotation) * b;
    }
    DiscreteOperator bare = h;
    bare.projector.resize(h.size(), 0);
    ctx.hbar = make_hbar(bare, ctx.spectral);
    ctx.window = window;
    ctx.resolvent.method = method;
    ctx.resolvent.window = window;
    return ctx;
}

FermiFrame build_frame(const SystemContext& ctx, const ResolventPair& pair, const Eigen::MatrixXd& probes, int m) {
    if (m < 1) fail(ErrorKind::InvalidArgument, "frame needs m >= 1");
    if (probes.rows() != ctx.hbar.size()) fail(ErrorKind::DimensionMismatch, "probe length mismatch");
    const int k = static_cast<int>(probes.cols());
    const double h = ctx.hbar.layout.h();
    const Eigen::MatrixXcd images = density_many(pair, probes.cast<cplx>());

    FermiFrame fr;
    fr.m = m;
    fr.lambda0 = pair.lambda();
    const double re_top = images.real().cwiseAbs().maxCoeff();
    fr.imag_ratio = re_top > 0 ? images.imag().cwiseAbs().maxCoeff() / re_top : 0.0;

    // delta commutes with conjugation, so Re and Im of each image are images
    // of Re and Im of the probe; pick among the real candidates.
    Eigen::MatrixXd cand(images.rows(), 2 * k), src(probes.rows(), 2 * k);
    cand << images.real(), images.imag();
    src << probes, Eigen::MatrixXd::Zero(probes.rows(), k);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(std::sqrt(h) * cand);
    const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(std::min<Eigen::Index>(m, cand.cols()), std::min<Eigen::Index>(m, cand.cols()));
    const double r0 = std::abs(qr.matrixR()(0, 0));
    fr.pivots.resize(m);
    for (int j = 0; j < m; ++j) {
        const double rj = j < r.rows() ? std::abs(qr.matrixR()(j, j)) : 0.0;
        fr.pivots[j] = r0 > 0 ? rj / r0 : 0.0;
        if (!(fr.pivots[j] >= 1e-8)) {
            std::ostringstream msg;
            msg << "only " << j << " independent density images, need " << m;
            fail(ErrorKind::RankCollapse, msg.str());
        }
    }
    fr.probes.resize(probes.rows(), m);
    fr.densities.resize(images.rows(), m);
    for (int j = 0; j < m; ++j) {
        const int c = qr.colsPermutation().indices()[j];
        fr.selected.push_back(c);
        fr.probes.col(j) = src.col(c);
        fr.densities.col(j) = cand.col(c);
    }
    const Eigen::MatrixXd gram = h * fr.densities.transpose() * fr.densities;
    fr.duals = fr.densities * gram.inverse();
    return fr;
}

LambdaSolve solve_lambda(const SystemContext& ctx, const Eigen::VectorXd& nodal_w, double guess, double tol,
                         int max_iter) {
    const DiscreteOperator op = nodal_w.size() > 0 ? add_multiplication(ctx.hbar, nodal_w) : ctx.hbar;
    LambdaSolve out;
    double lo = ctx.window.lo, hi = ctx.window.hi;
    const double margin = 1e-9 * std::max(1.0, ctx.window.width());
    double lambda = std::clamp(guess, lo + margin, hi - margin);
    const double step = 1e-4 * std::max(1.0, std::abs(lambda));

    auto derivative = [&](double l) {
        const double d = std::min(step, 0.5 * std::min(l - ctx.window.lo, ctx.window.hi - l));
        return (q11(ctx, op, l + d) - q11(ctx, op, l - d)) / (2 * d);
    };

    // chord Newton: the slope is refreshed only when the residual stalls
    double slope = 0.0, last = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= max_iter; ++it) {
        out.iterations = it;
        const double a = q11(ctx, op, lambda);
        out.a_value = a;
        const double f = a - 1.0;
        if (std::abs(f) <= tol) {
            out.converged = true;
            break;
        }
        // A - 1 increases through its root near lambda0
        if (f < 0) lo = lambda;
        else hi = lambda;
        if (lo >= ctx.window.hi - margin || hi <= ctx.window.lo + margin) {
            out.left_window = true;
            break;
        }
        if (hi - lo <= 4e-16 * std::max(1.0, std::abs(lambda))) break;
        if (slope <= 0 || std::abs(f) > 0.1 * last) slope = derivative(lambda);
        last = std::abs(f);
        double next = lambda - f / slope;
        if (!std::isfinite(next) || slope <= 0 || next <= lo || next >= hi) next = 0.5 * (lo + hi);
        lambda = next;
    }
    out.lambda = lambda;
    if (out.converged) out.derivative = derivative(lambda);
    return out;
}

LambdaSolve solve_lambda(const SystemContext& ctx, const PerturbationBasis& basis, const Eigen::VectorXd& coeffs,
                         double guess) {
    const LambdaSolve s = solve_lambda(ctx, basis.combine(coeffs), guess);
    if (!s.converged) {
        std::ostringstream msg;
        msg << "lambda(W) did not converge after " << s.iterations << " iterations"
            << (s.left_window ? " (left the window)" : "");
        fail(ErrorKind::NoConvergence, msg.str());
    }
    return s;
}

FermiValue fermi_map_nodal(const FermiFrame& frame, const SystemContext& ctx, const Eigen::VectorXd& w) {
    FermiValue out;
    out.lambda = solve_lambda(ctx, w, ctx.spectral.lambda0);
    if (!out.lambda.converged) {
        std::ostringstream msg;
        msg << "lambda(W) did not converge" << (out.lambda.left_window ? " (left the window)" : "");
        fail(out.lambda.left_window ? ErrorKind::LeftWindow : ErrorKind::NoConvergence, msg.str());
    }
    const DiscreteOperator op = w.size() > 0 ? add_multiplication(ctx.hbar, w) : ctx.hbar;
    const ResolventPair pair(op, out.lambda.lambda, ctx.resolvent);
    const double h = op.layout.h();
    const int n = ctx.n();
    out.density_rows = frame.m;
    out.values.resize(frame.m + n - 1);

    const Eigen::VectorXcd psi1 = ctx.psi1().cast<cplx>();
    const Eigen::VectorXcd rp = pair.plus.resolve(psi1), rm = pair.minus.resolve(psi1);
    const cplx two_pi_i(0.0, 2 * std::numbers::pi);
    const Eigen::VectorXcd d = (rp - rm) / two_pi_i;
    for (int j = 0; j < frame.m; ++j) {
        const cplx v = h * frame.duals.col(j).cast<cplx>().dot(d);
        out.values[j] = v.real();
        out.max_imag = std::max(out.max_imag, std::abs(v.imag()));
    }
    for (int i = 1; i < n; ++i) {
        const Eigen::VectorXcd psi = ctx.spectral.eigvecs.col(i).cast<cplx>();
        const cplx a = 0.5 * h * (psi.dot(rp) + psi.dot(rm));
        out.values[frame.m + i - 1] = a.real();
        out.max_imag = std::max(out.max_imag, std::abs(a.imag()));
    }
    return out;
}

FermiValue fermi_map(const FermiFrame& frame, const SystemContext& ctx, const PerturbationBasis& basis,
                     const Eigen::VectorXd& coeffs) {
    return fermi_map_nodal(frame, ctx, basis.combine(coeffs));
}

Eigen::MatrixXd fermi_jacobian(const FermiFrame& frame, const SystemContext& ctx, const PerturbationBasis& basis) {
    const int p = basis.size(), n = ctx.n();
    const double h = ctx.hbar.layout.h();
    const ModeLayout& L = ctx.hbar.layout;
    const Eigen::VectorXcd psi1 = ctx.psi1().cast<cplx>();
    Eigen::MatrixXcd wpsi(L.size(), p);
    for (int k = 0; k < p; ++k) wpsi.col(k) = multiply(L, basis.real_element(k), psi1);

    const ResolventPair pair(ctx.hbar, ctx.spectral.lambda0, ctx.resolvent);
    const Eigen::MatrixXcd dw = density_many(pair, wpsi);
    Eigen::MatrixXd jac(frame.m + n - 1, p);
    jac.topRows(frame.m) = -(h * frame.duals.transpose().cast<cplx>() * dw).real();
    for (int i = 1; i < n; ++i)
        jac.row(frame.m + i - 1) = -(h * ctx.spectral.eigvecs.col(i).transpose().cast<cplx>() * wpsi).real();
    return jac;
}

Eigen::MatrixXd fermi_jacobian_fd(const FermiFrame& frame, const SystemContext& ctx, const PerturbationBasis& basis,
                                  const Eigen::VectorXd& at, double t) {
    const int p = basis.size();
    if (at.size() != p) fail(ErrorKind::DimensionMismatch, "expansion point has wrong length");
    if (t <= 0) t = 1e-5 * (1.0 + at.norm());
    Eigen::MatrixXd jac(frame.m + ctx.n() - 1, p);
    for (int k = 0; k < p; ++k) {
        Eigen::VectorXd e = at;
        e[k] += t;
        const Eigen::VectorXd fp = fermi_map(frame, ctx, basis, e).values;
        e[k] -= 2 * t;
        const Eigen::VectorXd fm = fermi_map(frame, ctx, basis, e).values;
        jac.col(k) = (fp - fm) / (2 * t);
    }
    return jac;
}

double span_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double h) {
    auto basis = [&](const Eigen::MatrixXd& x) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(std::sqrt(h) * x);
        return Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(x.rows(), x.cols()));
    };
    const Eigen::MatrixXd qa = basis(a), qb = basis(b);
    // sine of the largest principal angle
    const Eigen::MatrixXd resid = qb - qa * (qa.transpose() * qb);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(resid);
    return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

}  // namespace embedlab
