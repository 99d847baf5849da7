#include "embedlab/resolvent.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/SparseLU>

#include "embedlab/error.hpp"

namespace embedlab {

const char* to_string(ResolventMethod method) {
    return method == ResolventMethod::RadiationBC ? "RadiationBC" : "EpsilonExtrapolation";
}

struct BoundaryResolvent::Factor {
    Eigen::SparseLU<SparseC> lu;  // of A_E = local - z + E
    int n = 0;
    double eps = 0.0;
    // low-rank part: op - z = A_E + U C V^T, stored as Z = A_E^{-1} U and K = C^{-1} + V^T Z
    Eigen::MatrixXcd v;
    Eigen::MatrixXcd z;
    Eigen::PartialPivLU<Eigen::MatrixXcd> k;
    bool low_rank = false;
    DiscreteOperator op;  // closure included, for accurate residuals
    cplx shift;
};

namespace {

using FactorPtr = std::shared_ptr<const BoundaryResolvent::Factor>;

// The local part minus z is singular at the embedded eigenvalue while the
// full operator with the projector is not. E adds alpha on r nodes where the
// eigenbasis is well conditioned, which lifts the near-null space; the
// projector and -E are then restored with a Woodbury correction.
FactorPtr factorize(const DiscreteOperator& op, cplx z, double eps) {
    const int n = op.size(), r = static_cast<int>(op.projector.cols());
    const double h = op.layout.h();
    SparseC a = op.matrix;
    for (int i = 0; i < n; ++i) a.coeffRef(i, i) -= z;

    auto f = std::make_shared<BoundaryResolvent::Factor>();
    f->n = n;
    f->eps = eps;
    f->op = op;
    f->shift = z;
    std::vector<int> nodes;
    double alpha = 0.0;
    if (r > 0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(op.projector.transpose());
        for (int j = 0; j < r; ++j) nodes.push_back(qr.colsPermutation().indices()[j]);
        for (int i = 0; i < n; ++i) alpha = std::max(alpha, std::abs(a.coeff(i, i)));
        for (int k : nodes) a.coeffRef(k, k) += alpha;
    }
    a.makeCompressed();
    f->lu.compute(a);
    if (f->lu.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "sparse factorization failed at z = " << z << ": " << f->lu.lastErrorMessage();
        fail(ErrorKind::SolveFailure, msg.str());
    }
    if (r > 0) {
        Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(n, 2 * r);
        u.leftCols(r) = op.projector.cast<cplx>();
        for (int j = 0; j < r; ++j) u(nodes[j], r + j) = 1.0;
        f->v = u;
        Eigen::VectorXcd cinv(2 * r);
        cinv.head(r).setConstant(1.0 / h);
        cinv.tail(r).setConstant(-1.0 / alpha);
        f->z = f->lu.solve(u);
        const Eigen::MatrixXcd k = Eigen::MatrixXcd(cinv.asDiagonal()) + u.transpose() * f->z;
        f->k.compute(k);
        f->low_rank = true;
        if (!f->z.allFinite() || !(std::abs(f->k.determinant()) > 0))
            fail(ErrorKind::SolveFailure, "capacitance matrix is singular");
    }
    return f;
}

Eigen::MatrixXcd solve_once(const BoundaryResolvent::Factor& f, const Eigen::MatrixXcd& v) {
    Eigen::MatrixXcd x = f.lu.solve(v);
    if (f.low_rank) x -= f.z * f.k.solve(f.v.transpose() * x);
    return x;
}

// Two steps of iterative refinement with extended-precision residuals.
Eigen::MatrixXcd solve_with(const BoundaryResolvent::Factor& f, const Eigen::MatrixXcd& v) {
    Eigen::MatrixXcd x = solve_once(f, v);
    for (int step = 0; step < 2; ++step) {
        Eigen::MatrixXcd r(v.rows(), v.cols());
        for (int c = 0; c < v.cols(); ++c) r.col(c) = v.col(c) - apply_shifted_accurate(f.op, f.shift, x.col(c));
        x += solve_once(f, r);
    }
    if (!x.allFinite()) fail(ErrorKind::SolveFailure, "resolvent solve produced non-finite values");
    return x;
}

}  // namespace

BoundaryResolvent::BoundaryResolvent(const DiscreteOperator& op, double lambda, Branch branch,
                                     const ResolventOptions& options)
    : base_(op), lambda_(lambda), branch_(branch), method_(options.method), schedule_(options.schedule) {
    if (options.window && !options.window->contains(lambda)) {
        std::ostringstream msg;
        msg << "lambda = " << lambda << " outside (" << options.window->lo << ", " << options.window->hi << ")";
        fail(ErrorKind::LeftWindow, msg.str());
    }
    if (method_ == ResolventMethod::RadiationBC) {
        factors_.push_back(factorize(with_boundary(op, Radiation{lambda, branch}), lambda, 0.0));
        return;
    }
    if (schedule_.eps.size() < 2) fail(ErrorKind::InvalidArgument, "epsilon schedule needs two or more values");
    for (double e : schedule_.eps) {
        if (!(e > 0)) fail(ErrorKind::InvalidArgument, "epsilon values must be positive");
        const cplx z(lambda, sign_of(branch) * e);
        factors_.push_back(factorize(with_boundary(op, ComplexEnergy{z}), z, e));
    }
}

BoundaryResolvent BoundaryResolvent::at_complex(const DiscreteOperator& op, cplx z) {
    BoundaryResolvent r;
    r.base_ = op;
    r.lambda_ = z.real();
    r.branch_ = z.imag() >= 0 ? Branch::Plus : Branch::Minus;
    r.factors_.push_back(factorize(with_boundary(op, ComplexEnergy{z}), z, std::abs(z.imag())));
    return r;
}

Eigen::MatrixXcd BoundaryResolvent::resolve_many(const Eigen::MatrixXcd& v) const {
    if (v.rows() != size()) fail(ErrorKind::DimensionMismatch, "vector has wrong length");
    if (!v.allFinite()) fail(ErrorKind::InvalidArgument, "vector is not finite");
    if (factors_.size() == 1) return solve_with(*factors_.front(), v);

    // Neville tableau towards eps = 0
    const size_t k = factors_.size();
    std::vector<Eigen::MatrixXcd> p(k);
    for (size_t i = 0; i < k; ++i) p[i] = solve_with(*factors_[i], v);
    Eigen::MatrixXcd previous;
    for (size_t m = 1; m < k; ++m) {
        if (m == k - 1) previous = p[1];
        for (size_t i = 0; i + m < k; ++i) {
            const double ei = factors_[i]->eps, ej = factors_[i + m]->eps;
            p[i] = (ej * p[i] - ei * p[i + 1]) / (ej - ei);
        }
    }
    // p[0] uses all points, `previous` all but the coarsest
    const double scale = p[0].norm();
    const double spread = (p[0] - previous).norm();
    if (!(spread <= schedule_.cauchy_tol * scale)) {
        std::ostringstream msg;
        msg << "epsilon extrapolation not Cauchy: relative spread " << spread / scale;
        fail(ErrorKind::ExtrapolationDiverged, msg.str());
    }
    return p[0];
}

Eigen::VectorXcd BoundaryResolvent::resolve(const Eigen::VectorXcd& v) const {
    return resolve_many(v);
}

ResolventPair::ResolventPair(const DiscreteOperator& op, double lambda, const ResolventOptions& options)
    : plus(op, lambda, Branch::Plus, options), minus(op, lambda, Branch::Minus, options) {}

Eigen::MatrixXcd density_many(const ResolventPair& pair, const Eigen::MatrixXcd& v) {
    const cplx two_pi_i(0.0, 2 * std::numbers::pi);
    return (pair.plus.resolve_many(v) - pair.minus.resolve_many(v)) / two_pi_i;
}

Eigen::VectorXcd density(const ResolventPair& pair, const Eigen::VectorXcd& v) {
    return density_many(pair, v);
}

double DensityRank::gap() const {
    if (m <= 0 || m >= singular_values.size()) return std::numeric_limits<double>::infinity();
    return singular_values[m] > 0 ? singular_values[m - 1] / singular_values[m]
                                  : std::numeric_limits<double>::infinity();
}

DensityRank density_rank(const ResolventPair& pair, const Eigen::MatrixXd& probes, double threshold) {
    if (probes.rows() != pair.plus.size()) fail(ErrorKind::DimensionMismatch, "probe length mismatch");
    const double sqh = std::sqrt(pair.plus.base().layout.h());
    Eigen::JacobiSVD<Eigen::MatrixXd> psvd(sqh * probes);
    const Eigen::VectorXd ps = psvd.singularValues();
    if (ps.size() == 0 || ps[ps.size() - 1] <= 1e-10 * ps[0]) fail(ErrorKind::ProbeDeficient, "probe vectors are linearly dependent");

    DensityRank out;
    out.images = density_many(pair, probes.cast<cplx>());
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sqh * out.images);
    out.singular_values = svd.singularValues();
    for (int i = 0; i < out.singular_values.size(); ++i)
        if (out.singular_values[i] >= threshold * out.singular_values[0] && out.singular_values[i] > 0) ++out.m;
    return out;
}

Eigen::MatrixXd gaussian_probes(const ModeLayout& layout, const Grid1D& grid, int count, std::uint64_t seed,
                                double span) {
    if (count < 1) fail(ErrorKind::InvalidArgument, "need at least one probe");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    const double width = 5 * grid.spacing();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(layout.size(), count);
    for (int k = 0; k < count; ++k) {
        const double c = count == 1 ? 0.0 : -span + 2 * span * k / (count - 1);
        Eigen::VectorXd weights = Eigen::VectorXd::Ones(layout.n_modes());
        if (layout.cylinder())
            for (int a = 0; a < layout.n_modes(); ++a) weights[a] = nd(rng);
        for (int iz = 0; iz < layout.nz(); ++iz) {
            const double t = (grid.x(iz) - c) / width;
            const double g = std::exp(-t * t);
            if (g < 1e-300) continue;
            for (int a = 0; a < layout.n_modes(); ++a) out(layout.index(iz, a), k) = g * weights[a];
        }
    }
    return out;
}

Eigen::MatrixXcd reduced_q(const SpectralData& spec, const BoundaryResolvent& r) {
    if (spec.eigvecs.rows() != r.size()) fail(ErrorKind::DimensionMismatch, "eigenbasis does not match");
    const Eigen::MatrixXcd psi = spec.eigvecs.cast<cplx>();
    return r.base().layout.h() * psi.transpose() * r.resolve_many(psi);
}

QCriterion eigenvalue_criterion(const SpectralData& spec, const BoundaryResolvent& plus, double tol) {
    QCriterion out;
    const Eigen::MatrixXcd q = reduced_q(spec, plus);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(q, false);
    out.eigenvalues = es.eigenvalues();
    out.gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < out.eigenvalues.size(); ++i) out.gap = std::min(out.gap, std::abs(1.0 - out.eigenvalues[i]));
    out.is_eigenvalue = out.gap < tol;
    return out;
}

Eigen::VectorXcd multiply(const ModeLayout& layout, const Eigen::VectorXd& w, const Eigen::VectorXcd& v) {
    if (w.size() != layout.nodal_size() || v.size() != layout.size())
        fail(ErrorKind::DimensionMismatch, "multiplication operand has wrong length");
    const int nm = layout.n_modes(), M = layout.theta_nodes();
    if (!layout.cylinder()) return w.cast<cplx>().cwiseProduct(v);
    const Eigen::MatrixXd& T = layout.transform();
    Eigen::VectorXcd out(v.size());
    for (int iz = 0; iz < layout.nz(); ++iz) {
        // nodal product then back to modes: T^T diag(w) T v
        const Eigen::VectorXcd nodal = T.cast<cplx>() * v.segment(iz * nm, nm);
        const Eigen::VectorXcd prod = w.segment(iz * M, M).cast<cplx>().cwiseProduct(nodal);
        out.segment(iz * nm, nm) = T.transpose().cast<cplx>() * prod;
    }
    return out;
}

double perturbation_identity_residual(const DiscreteOperator& hbar, const Eigen::VectorXd& w, double lambda,
                                      const Eigen::VectorXcd& v, ResolventMethod lhs_method,
                                      ResolventMethod rhs_method) {
    const DiscreteOperator perturbed = add_multiplication(hbar, w);
    ResolventOptions lhs_opt, rhs_opt;
    lhs_opt.method = lhs_method;
    rhs_opt.method = rhs_method;
    const Eigen::VectorXcd lhs = density(ResolventPair(perturbed, lambda, lhs_opt), v);

    const ResolventPair rw(perturbed, lambda, rhs_opt);
    const ResolventPair r0(hbar, lambda, rhs_opt);
    const ModeLayout& L = hbar.layout;
    const Eigen::VectorXcd right = v - multiply(L, w, rw.minus.resolve(v));
    const Eigen::VectorXcd mid = density(r0, right);
    const Eigen::VectorXcd rhs = mid - rw.plus.resolve(multiply(L, w, mid));
    return L.norm(lhs - rhs) / L.norm(v);
}

}  // namespace embedlab
