#include "embedlab/persistence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace embedlab {

namespace {

void fix_signs(Eigen::MatrixXd& m) {
    for (int j = 0; j < m.cols(); ++j) {
        Eigen::Index imax;
        m.col(j).cwiseAbs().maxCoeff(&imax);
        if (m(imax, j) < 0) m.col(j) *= -1.0;
    }
}

DiscreteOperator bare_operator(const SystemContext& ctx) {
    DiscreteOperator op = ctx.hbar;
    op.projector.resize(op.size(), 0);
    return op;
}

}  // namespace

SplitBasis split(const Eigen::MatrixXd& jacobian, int expected_codim, double rel) {
    const int rows = static_cast<int>(jacobian.rows()), p = static_cast<int>(jacobian.cols());
    const int codim = expected_codim < 0 ? rows : expected_codim;
    if (codim > p) fail(ErrorKind::RankDeficient, "fewer basis elements than the codimension");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jacobian, Eigen::ComputeFullV);
    const Eigen::VectorXd s = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < s.size(); ++i)
        if (s[i] > 0 && s[i] >= rel * s[0]) ++rank;
    if (rank < codim) {
        std::ostringstream msg;
        msg << "Jacobian rank " << rank << " below codimension " << codim;
        fail(ErrorKind::RankDeficient, msg.str());
    }
    SplitBasis out;
    out.jacobian = jacobian;
    out.singular_values = s;
    out.codim = codim;
    out.normal = svd.matrixV().leftCols(codim);
    out.kernel = svd.matrixV().rightCols(p - codim);
    fix_signs(out.normal);
    fix_signs(out.kernel);
    out.min_normal_singular = codim > 0 ? s[codim - 1] : 0.0;
    return out;
}

Eigen::VectorXd normal_direction(const SplitBasis& s, int k) {
    if (k < 0 || k >= s.normal.cols()) fail(ErrorKind::InvalidArgument, "normal index out of range");
    const Eigen::VectorXd d = s.normal.col(k);
    return d / (s.jacobian * d).norm();
}

double fix_phase(Eigen::VectorXcd& v) {
    if (v.size() == 0) return 0.0;
    Eigen::Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    const double mag = std::abs(v[imax]);
    if (mag == 0) return 0.0;
    v *= std::conj(v[imax]) / mag;
    return v.imag().norm() / v.norm();
}

Eigen::VectorXcd eigenvector_formula(const SystemContext& ctx, const Eigen::VectorXd& w, double lambda) {
    const DiscreteOperator op = w.size() > 0 ? add_multiplication(ctx.hbar, w) : ctx.hbar;
    const BoundaryResolvent r(op, lambda, Branch::Plus, ctx.resolvent);
    return r.resolve(ctx.psi1().cast<cplx>());
}

double q_gap(const SystemContext& ctx, const Eigen::VectorXd& w, double lambda) {
    const DiscreteOperator op = w.size() > 0 ? add_multiplication(ctx.hbar, w) : ctx.hbar;
    return eigenvalue_criterion(ctx.spectral, BoundaryResolvent(op, lambda, Branch::Plus, ctx.resolvent)).gap;
}

PersistenceSolver::PersistenceSolver(SystemContext ctx, FermiFrame frame, PerturbationBasis basis, SplitBasis split,
                                     PersistenceOptions options)
    : ctx_(std::move(ctx)),
      frame_(std::move(frame)),
      basis_(std::move(basis)),
      split_(std::move(split)),
      options_(options) {
    if (split_.kernel.rows() != basis_.size())
        fail(ErrorKind::DimensionMismatch, "split does not match the basis size");
    if (split_.jacobian.rows() != frame_.m + ctx_.n() - 1)
        fail(ErrorKind::DimensionMismatch, "split does not match the Fermi map");
}

double PersistenceSolver::chart_radius() const {
    const double top = split_.singular_values.size() ? split_.singular_values[0] : 0.0;
    return top > 0 ? 1e-2 / top : 0.0;
}

Eigen::VectorXd PersistenceSolver::residual(const Eigen::VectorXd& coeffs) const {
    return fermi_map(frame_, ctx_, basis_, coeffs).values;
}

ManifoldPoint PersistenceSolver::evaluate(const Eigen::VectorXd& coeffs) const {
    ManifoldPoint pt;
    pt.coeffs = coeffs;
    const Eigen::VectorXd w = basis_.combine(coeffs);
    const FermiValue fv = fermi_map_nodal(frame_, ctx_, w);
    pt.fermi_values = fv.values;
    pt.fermi_residual = fv.values.norm();
    pt.lambda = fv.lambda.lambda;

    const double h = ctx_.hbar.layout.h();
    Eigen::VectorXcd psi = eigenvector_formula(ctx_, w, pt.lambda);
    psi /= std::sqrt(h) * psi.norm();
    pt.imag_residual = fix_phase(psi);
    pt.eigvec = psi;
    pt.eigen_residual = eigen_residual(add_multiplication(ctx_.hbar, w), pt.lambda, psi);
    for (int i = 1; i < ctx_.n(); ++i)
        pt.orthogonality =
            std::max(pt.orthogonality, std::abs(h * ctx_.spectral.eigvecs.col(i).cast<cplx>().dot(psi)));
    pt.q_gap = q_gap(ctx_, w, pt.lambda);
    return pt;
}

ManifoldPoint PersistenceSolver::solve_eta(const Eigen::VectorXd& xi, const Eigen::VectorXd& eta_guess) const {
    const Eigen::MatrixXd& K = split_.kernel;
    const Eigen::MatrixXd& N = split_.normal;
    const int codim = split_.codim;
    if (xi.size() != K.cols()) fail(ErrorKind::DimensionMismatch, "xi has wrong length");
    Eigen::VectorXd eta = eta_guess.size() == codim ? eta_guess : Eigen::VectorXd::Zero(codim);
    const Eigen::VectorXd base = K * xi;

    auto G = [&](const Eigen::VectorXd& e) { return residual(base + N * e); };
    auto fd_block = [&](const Eigen::VectorXd& e) {
        const double t = 1e-5 * (1.0 + (base + N * e).norm());
        Eigen::MatrixXd j(codim, codim);
        for (int i = 0; i < codim; ++i) {
            Eigen::VectorXd a = e, b = e;
            a[i] += t;
            b[i] -= t;
            j.col(i) = (G(a) - G(b)) / (2 * t);
        }
        return j;
    };

    // analytic F'(0) N as the first preconditioner
    Eigen::MatrixXd jn = split_.jacobian * N;
    Eigen::VectorXd g = G(eta);
    double gn = g.norm();
    int it = 0, refreshes = 0, stalls = 0;
    bool fresh = false;
    while (gn > options_.tol) {
        if (it >= options_.max_iter) {
            std::ostringstream msg;
            msg << "eta solve hit the iteration cap with |F| = " << gn;
            fail(ErrorKind::NoConvergence, msg.str());
        }
        ++it;
        const Eigen::VectorXd trial = eta - jn.colPivHouseholderQr().solve(g);
        const Eigen::VectorXd gt = G(trial);
        const double tn = gt.norm();
        if (tn <= options_.contraction * gn) {
            eta = trial;
            g = gt;
            gn = tn;
            stalls = 0;
            fresh = false;
            continue;
        }
        if (tn < gn) {
            eta = trial;
            g = gt;
            gn = tn;
            fresh = false;
        }
        if (!fresh) {
            jn = fd_block(eta);
            ++refreshes;
            fresh = true;
        } else if (++stalls >= options_.max_stalls) {
            std::ostringstream msg;
            msg << "eta solve stagnated at |F| = " << gn;
            fail(ErrorKind::NoConvergence, msg.str());
        }
    }
    ManifoldPoint pt = evaluate(base + N * eta);
    pt.xi = xi;
    pt.eta = eta;
    pt.iterations = it;
    pt.refreshes = refreshes;
    return pt;
}

TraceResult PersistenceSolver::trace(const Eigen::VectorXd& direction, int steps, double step_size) const {
    const Eigen::MatrixXd& K = split_.kernel;
    if (direction.size() != K.rows()) fail(ErrorKind::DimensionMismatch, "direction has wrong length");
    if (steps < 0) fail(ErrorKind::InvalidArgument, "steps must be non-negative");
    Eigen::VectorXd u = K.transpose() * direction;
    if ((direction - K * u).norm() > 1e-8 * std::max(1.0, direction.norm()))
        fail(ErrorKind::InvalidArgument, "direction is not in the kernel of F'(0)");
    if (u.norm() > 0) u /= u.norm();

    TraceResult out;
    Eigen::VectorXd prev = Eigen::VectorXd::Zero(split_.codim), prev2 = prev;
    for (int k = 1; k <= steps; ++k) {
        const Eigen::VectorXd guess = k >= 2 ? Eigen::VectorXd(2 * prev - prev2) : prev;
        try {
            ManifoldPoint pt = solve_eta(k * step_size * u, guess);
            prev2 = prev;
            prev = pt.eta;
            out.points.push_back(std::move(pt));
        } catch (const Error& e) {
            out.complete = false;
            out.stop_kind = e.kind();
            out.stop_message = e.what();
            break;
        }
    }
    return out;
}

std::vector<OffManifoldSample> PersistenceSolver::off_manifold_probe(const Eigen::VectorXd& direction,
                                                                     const std::vector<double>& magnitudes,
                                                                     int samples) const {
    const Eigen::MatrixXd& N = split_.normal;
    if (direction.size() != N.rows()) fail(ErrorKind::DimensionMismatch, "direction has wrong length");
    if ((direction - N * (N.transpose() * direction)).norm() > 1e-8 * std::max(1.0, direction.norm()))
        fail(ErrorKind::InvalidArgument, "direction is not in the normal block");
    if (samples < 3) fail(ErrorKind::InvalidArgument, "need at least 3 samples");

    const double margin = 1e-3 * ctx_.window.width();
    const double lo = ctx_.window.lo + margin, hi = ctx_.window.hi - margin;
    std::vector<OffManifoldSample> out;
    for (double c : magnitudes) {
        OffManifoldSample s;
        s.magnitude = c;
        const Eigen::VectorXd w = basis_.combine(c * direction);
        auto gap = [&](double l) { return q_gap(ctx_, w, l); };
        for (int i = 0; i < samples; ++i) {
            const double l = lo + (hi - lo) * i / (samples - 1);
            s.lambdas.push_back(l);
            s.gaps.push_back(gap(l));
        }
        const int i = static_cast<int>(std::min_element(s.gaps.begin(), s.gaps.end()) - s.gaps.begin());
        double a = s.lambdas[std::max(i - 1, 0)], b = s.lambdas[std::min(i + 1, samples - 1)];
        // golden section on the bracketing cell pair
        const double r = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = b - r * (b - a), x2 = a + r * (b - a);
        double f1 = gap(x1), f2 = gap(x2);
        for (int k = 0; k < 60 && b - a > 1e-12 * std::max(1.0, std::abs(a)); ++k) {
            if (f1 < f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - r * (b - a);
                f1 = gap(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + r * (b - a);
                f2 = gap(x2);
            }
        }
        s.min_gap = s.gaps[i];
        s.argmin_lambda = s.lambdas[i];
        for (auto [x, f] : {std::pair{x1, f1}, std::pair{x2, f2}})
            if (f < s.min_gap) {
                s.min_gap = f;
                s.argmin_lambda = x;
            }
        out.push_back(std::move(s));
    }
    return out;
}

CompactW construct_compact_w(const SystemContext& ctx, const Eigen::VectorXd& u_in, const Ball& ball) {
    const ModeLayout& L = ctx.hbar.layout;
    const Grid1D& grid = ctx.hbar.grid;
    const int nz = L.nz(), nm = L.n_modes(), n = ctx.n();
    const double h = L.h();
    if (u_in.size() != L.size()) fail(ErrorKind::DimensionMismatch, "u has wrong length");
    if (!(ball.radius > 0)) fail(ErrorKind::InvalidArgument, "ball radius must be positive");

    for (int iz = 0; iz < nz; ++iz) {
        if (ball.contains(grid.x(iz))) continue;
        for (int a = 0; a < nm; ++a)
            if (u_in[L.index(iz, a)] != 0.0) {
                std::ostringstream msg;
                msg << "u is nonzero at z = " << grid.x(iz) << ", outside the ball";
                fail(ErrorKind::SupportViolation, msg.str());
            }
    }

    // keep u where the whole stencil stays inside the ball
    const int reach = L.cylinder() ? 1 : 2;
    const Ball inner{ball.center, ball.radius - reach * h};
    Eigen::VectorXd mask = Eigen::VectorXd::Zero(L.size());
    int lo = nz, hi = -1;
    for (int iz = 0; iz < nz; ++iz) {
        if (!(inner.radius >= 0 && inner.contains(grid.x(iz)))) continue;
        lo = std::min(lo, iz);
        hi = std::max(hi, iz);
        for (int a = 0; a < nm; ++a) mask[L.index(iz, a)] = 1.0;
    }
    if (hi < lo) fail(ErrorKind::SupportViolation, "ball is narrower than the stencil");

    CompactW out;
    out.lambda = ctx.spectral.lambda0;
    Eigen::VectorXd u = u_in.cwiseProduct(mask);
    const Eigen::MatrixXd& psi = ctx.spectral.eigvecs;
    // smooth weight on the inner ball keeps the projected u smooth
    Eigen::VectorXd weight = Eigen::VectorXd::Zero(L.size());
    // fixed cutoff width so the construction converges with the grid
    const double rho = std::min(0.9 * ball.radius, inner.radius + h);
    for (int iz = lo; iz <= hi; ++iz) {
        const double s = (grid.x(iz) - inner.center) / rho;
        if (std::abs(s) >= 1) continue;
        const double chi = std::exp(1.0 - 1.0 / (1.0 - s * s));
        for (int a = 0; a < nm; ++a) weight[L.index(iz, a)] = chi;
    }
    const Eigen::MatrixXd masked = weight.asDiagonal() * psi;
    const Eigen::MatrixXd gram = h * psi.transpose() * masked;
    const Eigen::FullPivLU<Eigen::MatrixXd> glu(gram);
    Eigen::JacobiSVD<Eigen::MatrixXd> gsvd(gram);
    if (glu.rank() < n || gsvd.singularValues()[n - 1] < 1e-12)
        fail(ErrorKind::NotOrthogonal, "eigenvectors are negligible on the ball, u cannot be projected");
    u -= masked * glu.solve(h * psi.transpose() * u);
    const double un = u.norm();
    out.orthogonality = un > 0 ? (h * psi.transpose() * u).cwiseAbs().maxCoeff() / (std::sqrt(h) * un) : 0.0;
    if (out.orthogonality > 1e-12) {
        std::ostringstream msg;
        msg << "u is not orthogonal to the eigenspace after projection (" << out.orthogonality << ")";
        fail(ErrorKind::NotOrthogonal, msg.str());
    }

    const Eigen::VectorXd r =
        apply_shifted_accurate(bare_operator(ctx), out.lambda, u.cast<cplx>()).real();
    out.psi = ctx.psi1() - u;
    out.u = u;
    const Eigen::VectorXd rn = L.to_nodal(r), dn = L.to_nodal(out.psi);
    const int M = L.theta_nodes();
    out.support_lo = std::max(lo - reach, 0);
    out.support_hi = std::min(hi + reach, nz - 1);
    out.w = Eigen::VectorXd::Zero(L.nodal_size());
    const double scale = ctx.psi1().cwiseAbs().maxCoeff();
    out.min_divisor = std::numeric_limits<double>::infinity();
    for (int iz = out.support_lo; iz <= out.support_hi; ++iz)
        for (int l = 0; l < M; ++l) {
            const int k = iz * M + l;
            out.min_divisor = std::min(out.min_divisor, std::abs(dn[k]));
            if (!(std::abs(dn[k]) > 1e-12 * scale)) {
                std::ostringstream msg;
                msg << "psi_1 - u vanishes at z = " << grid.x(iz);
                fail(ErrorKind::ZeroDivisor, msg.str());
            }
            if (iz > out.support_lo && dn[k] * dn[k - M] <= 0) {
                std::ostringstream msg;
                msg << "psi_1 - u changes sign near z = " << grid.x(iz);
                fail(ErrorKind::ZeroDivisor, msg.str());
            }
            out.w[k] = rn[k] / dn[k];
        }
    return out;
}

}  // namespace embedlab
