#include "embedlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/SparseLU>

#include "embedlab/error.hpp"
#include "linalg.hpp"

namespace embedlab {

namespace {

struct Cluster {
    std::vector<double> lambdas;
    double mean() const {
        double s = 0.0;
        for (double l : lambdas) s += l;
        return s / lambdas.size();
    }
};

std::vector<Cluster> cluster_values(std::vector<double> values, double tol) {
    std::sort(values.begin(), values.end());
    std::vector<Cluster> out;
    for (double v : values) {
        if (!out.empty() && std::abs(v - out.back().lambdas.back()) <= tol * std::max(1.0, std::abs(v)))
            out.back().lambdas.push_back(v);
        else
            out.push_back({{v}});
    }
    return out;
}

// L2-orthonormal columns via thin QR.
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& x, double h) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(x.rows(), x.cols());
    return q / std::sqrt(h);
}

// Eigenvectors of a cluster of the real band matrix by shifted block inverse iteration.
Eigen::MatrixXd cluster_vectors(const Eigen::MatrixXd& ab, const Cluster& c, double h,
                                std::mt19937_64& rng) {
    const int n = static_cast<int>(ab.cols()), k = static_cast<int>(c.lambdas.size());
    std::normal_distribution<double> nd;
    Eigen::MatrixXd x(n, k);
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < n; ++i) x(i, j) = nd(rng);
    const double mu = c.mean();
    const double shift = mu + 1e-11 * std::max(1.0, std::abs(mu));
    for (int it = 0; it < 3; ++it) x = orthonormalize(detail::band_shifted_solve(ab, shift, x), h);
    return x;
}

// Fixed ordering inside a degenerate eigenspace: diagonalize the mode-slot
// weight so cos-type vectors come before sin-type ones.
Eigen::MatrixXd canonical_basis(const Eigen::MatrixXd& psi, const ModeLayout& layout) {
    Eigen::MatrixXd out = psi;
    const int n = static_cast<int>(psi.cols());
    if (n > 1) {
        Eigen::VectorXd d(layout.size());
        for (int iz = 0; iz < layout.nz(); ++iz)
            for (int a = 0; a < layout.n_modes(); ++a) d[layout.index(iz, a)] = a + 1.0;
        const Eigen::MatrixXd k = layout.h() * psi.transpose() * d.asDiagonal() * psi;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (k + k.transpose()));
        out = psi * es.eigenvectors();
        // exact re-orthonormalization keeps the Gram matrix at round-off
        out = orthonormalize(out, layout.h());
    }
    for (int j = 0; j < n; ++j) {
        Eigen::Index imax;
        out.col(j).cwiseAbs().maxCoeff(&imax);
        if (out(imax, j) < 0) out.col(j) *= -1.0;
    }
    return out;
}

// Radiation-consistent inverse iteration; returns the refined eigenvalue.
double refine(const DiscreteOperator& op, Eigen::MatrixXd& psi, double lambda, int steps) {
    const double h = op.layout.h();
    const int n = static_cast<int>(psi.cols());
    SparseC eye(op.size(), op.size());
    eye.setIdentity();
    for (int s = 0; s < steps; ++s) {
        const DiscreteOperator rad = with_boundary(op, Radiation{lambda, Branch::Plus});
        const SparseC t = rad.matrix - lambda * eye;
        Eigen::SparseLU<SparseC> lu;
        lu.compute(t);
        if (lu.info() != Eigen::Success) break;  // singular: lambda already exact
        const Eigen::MatrixXcd rhs = psi.cast<cplx>();
        Eigen::MatrixXcd x = lu.solve(rhs);
        if (!x.allFinite()) break;
        for (int j = 0; j < n; ++j)
            x.col(j) += lu.solve(rhs.col(j) - apply_shifted_accurate(rad, lambda, x.col(j)));
        // realify: the real eigenspace is spanned by the real and imaginary parts
        Eigen::MatrixXd parts(x.rows(), 2 * n);
        parts << x.real(), x.imag();
        Eigen::BDCSVD<Eigen::MatrixXd> svd(parts, Eigen::ComputeThinU);
        psi = orthonormalize(svd.matrixU().leftCols(n), h);

        double shift = 0;
        for (int j = 0; j < n; ++j) {
            const Eigen::VectorXcd p = psi.col(j).cast<cplx>();
            shift += h * p.dot(apply_shifted_accurate(rad, lambda, p)).real();
        }
        const double next = lambda + shift / n;
        const double change = std::abs(next - lambda);
        lambda = next;
        if (s >= 1 && change <= 4e-16 * std::max(1.0, std::abs(lambda))) break;
    }
    return lambda;
}

// Without a perturbation the cylinder matrix splits into one tridiagonal block
// per mode, which avoids the O(kd N^2) band reduction.
std::vector<double> window_eigenvalues(const DiscreteOperator& op, const Eigen::MatrixXd& ab,
                                       const Interval& window) {
    if (!op.model.is_cylinder() || op.has_perturbation())
        return detail::band_eigenvalues(ab, window.lo, window.hi);
    const int nz = op.layout.nz(), nm = op.layout.n_modes();
    const int kd = static_cast<int>(ab.rows()) - 1;
    std::vector<double> out;
    for (int a = 0; a < nm; ++a) {
        Eigen::VectorXd d(nz), e(nz - 1);
        for (int iz = 0; iz < nz; ++iz) {
            const int i = op.layout.index(iz, a);
            d[iz] = ab(kd, i);
            if (iz > 0) e[iz - 1] = ab(kd - nm, i);
        }
        const auto w = detail::tridiagonal_eigenvalues(d, e, window.lo, window.hi);
        out.insert(out.end(), w.begin(), w.end());
    }
    return out;
}

}  // namespace

std::vector<BoxState> box_states(const DiscreteOperator& op, const Interval& window,
                                 double edge_fraction) {
    if (!std::holds_alternative<Dirichlet>(op.bc))
        fail(ErrorKind::InvalidArgument, "eigenpair search needs the Dirichlet closure");
    const double h = op.layout.h();
    std::vector<BoxState> out;
    if (op.has_projector()) {
        Eigen::MatrixXd dense = Eigen::MatrixXd(op.matrix.real());
        dense += h * op.projector * op.projector.transpose();
        const auto eig = detail::dense_eigen_range(dense, window.lo, window.hi);
        for (int j = 0; j < eig.values.size(); ++j) {
            const Eigen::VectorXd v = eig.vectors.col(j) / std::sqrt(h);
            out.push_back({eig.values[j], op.layout.edge_amplitude(v, edge_fraction)});
        }
        return out;
    }
    const Eigen::MatrixXd ab = band_storage(op);
    std::mt19937_64 rng(20240611);
    for (const auto& c : cluster_values(window_eigenvalues(op, ab, window), 1e-8)) {
        const Eigen::MatrixXd v = cluster_vectors(ab, c, h, rng);
        double edge = 0.0;
        for (int j = 0; j < v.cols(); ++j)
            edge = std::max(edge, op.layout.edge_amplitude(v.col(j), edge_fraction));
        for (double l : c.lambdas) out.push_back({l, edge});
    }
    return out;
}

SpectralData find_embedded_eigenpairs(const DiscreteOperator& op, const Interval& window,
                                      const EigenSearchOptions& options) {
    if (!std::holds_alternative<Dirichlet>(op.bc))
        fail(ErrorKind::InvalidArgument, "eigenpair search needs the Dirichlet closure");
    const double edge0 = 0.0;
    if (!(window.lo >= edge0) || !(window.hi > window.lo))
        fail(ErrorKind::InvalidArgument, "window must be a nonempty interval above the continuum edge");
    const double h = op.layout.h();

    // all box eigenpairs in the window, grouped by (near) degeneracy
    std::vector<double> localized;
    double min_edge = std::numeric_limits<double>::infinity();
    for (const auto& s : box_states(op, window, options.edge_fraction)) {
        min_edge = std::min(min_edge, s.edge_amplitude);
        if (s.edge_amplitude < options.edge_threshold) localized.push_back(s.lambda);
    }
    if (localized.empty()) {
        std::ostringstream msg;
        msg << "no edge-localized eigenvector in (" << window.lo << ", " << window.hi
            << "); smallest edge amplitude " << min_edge;
        fail(ErrorKind::EmbeddedNotFound, msg.str());
    }
    const auto clusters = cluster_values(localized, options.cluster_tol);
    size_t pick = 0;
    for (size_t i = 1; i < clusters.size(); ++i)
        if (std::abs(clusters[i].mean() - window.center()) < std::abs(clusters[pick].mean() - window.center()))
            pick = i;

    SpectralData spec;
    spec.continuum_edge = edge0;
    spec.isolation_radius = options.isolation_radius;
    spec.dirichlet_lambda = clusters[pick].mean();
    spec.multiplicity = static_cast<int>(clusters[pick].lambdas.size());
    for (size_t i = 0; i < clusters.size(); ++i)
        if (i != pick)
            spec.nearest_other = std::min(spec.nearest_other, std::abs(clusters[i].mean() - spec.dirichlet_lambda));
    if (spec.nearest_other < options.isolation_radius) {
        std::ostringstream msg;
        msg << "another localized eigenvalue lies " << spec.nearest_other << " from "
            << spec.dirichlet_lambda << " (isolation radius " << options.isolation_radius << ")";
        fail(ErrorKind::WindowNotIsolated, msg.str());
    }

    Eigen::MatrixXd psi;
    if (op.has_projector()) {
        Eigen::MatrixXd dense = Eigen::MatrixXd(op.matrix.real());
        dense += h * op.projector * op.projector.transpose();
        const double l = spec.dirichlet_lambda, pad = 1e-8 * std::max(1.0, std::abs(l));
        psi = detail::dense_eigen_range(dense, clusters[pick].lambdas.front() - pad,
                                        clusters[pick].lambdas.back() + pad).vectors / std::sqrt(h);
    } else {
        std::mt19937_64 rng(20240611);
        psi = cluster_vectors(band_storage(op), clusters[pick], h, rng);
    }
    spec.lambda0 = spec.dirichlet_lambda;
    if (options.refine && !op.has_projector()) {
        spec.lambda0 = refine(op, psi, spec.dirichlet_lambda, options.refine_steps);
        spec.refined = true;
    }
    spec.eigvecs = canonical_basis(psi, op.layout);
    for (int j = 0; j < spec.multiplicity; ++j) {
        spec.edge_amplitudes.push_back(op.layout.edge_amplitude(spec.eigvecs.col(j), options.edge_fraction));
        if (!op.has_projector())
            spec.residuals.push_back(eigen_residual(op, spec.lambda0, spec.eigvecs.col(j).cast<cplx>()));
    }
    return spec;
}

DiscreteOperator make_hbar(const DiscreteOperator& op, const SpectralData& spec) {
    if (spec.eigvecs.rows() != op.size())
        fail(ErrorKind::DimensionMismatch, "eigenbasis does not match the operator");
    DiscreteOperator out = op;
    out.projector = spec.eigvecs;
    out.kind = op.kind == OperatorKind::HplusW ? OperatorKind::HbarPlusW : OperatorKind::Hbar;
    return out;
}

double eigen_residual(const DiscreteOperator& op, double lambda, const Eigen::VectorXcd& psi) {
    DiscreteOperator bare = op;
    bare.projector.resize(op.size(), 0);
    const DiscreteOperator rad = with_boundary(bare, Radiation{lambda, Branch::Plus});
    const Eigen::VectorXcd r = apply_shifted_accurate(rad, lambda, psi);
    return r.norm() / psi.norm();
}

int numerical_rank(const Eigen::MatrixXd& m, double rel, Eigen::VectorXd* singular_values) {
    if (m.size() == 0) {
        if (singular_values) singular_values->resize(0);
        return 0;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const Eigen::VectorXd s = svd.singularValues();
    if (singular_values) *singular_values = s;
    int rank = 0;
    for (int i = 0; i < s.size(); ++i)
        if (s[i] > 0 && s[i] >= rel * s[0]) ++rank;
    return rank;
}

bool HypothesisReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const HypothesisCheck* HypothesisReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

HypothesisReport check_hypotheses(const SpectralData& spec, const DiscreteOperator& op,
                                  const HypothesisInputs& in) {
    HypothesisReport rep;
    const bool dirichlet = std::holds_alternative<Dirichlet>(op.bc);
    const double asym = dirichlet ? op.asymmetry() : std::numeric_limits<double>::infinity();
    rep.checks.push_back({"H1.symmetry", dirichlet && asym == 0.0, asym,
                          dirichlet ? "max |M - M^T| of the box matrix" : "needs the Dirichlet closure"});

    bool real = spec.eigvecs.allFinite();
    std::string why = "eigenbasis real";
    if (in.basis) {
        if (!in.basis->is_real()) {
            real = false;
            why = "perturbation basis has a non-real element";
        } else {
            why += ", perturbation basis real";
        }
    }
    rep.checks.push_back({"H1.reality", real, real ? 0.0 : 1.0, why});

    rep.checks.push_back({"H2.embedded", spec.lambda0 > spec.continuum_edge,
                          spec.lambda0 - spec.continuum_edge, "lambda0 above the continuum edge"});
    double edge = 0.0;
    for (int j = 0; j < spec.eigvecs.cols(); ++j)
        edge = std::max(edge, op.layout.edge_amplitude(spec.eigvecs.col(j), in.edge_fraction));
    rep.checks.push_back({"H2.edge_decay", edge < in.edge_threshold, edge,
                          "largest eigenvector amplitude on the outer grid band"});
    rep.checks.push_back({"H2.isolation", spec.nearest_other >= spec.isolation_radius,
                          spec.nearest_other, "distance to the nearest other localized eigenvalue"});

    if (in.fermi_jacobian) {
        Eigen::VectorXd sv;
        const int rank = numerical_rank(*in.fermi_jacobian, in.rank_threshold, &sv);
        std::ostringstream d;
        d << "rank " << rank << " of the " << in.fermi_jacobian->rows() << "x"
          << in.fermi_jacobian->cols() << " Jacobian, expected " << in.expected_rank;
        rep.checks.push_back({"H5.surjectivity", rank == in.expected_rank, double(rank), d.str()});
    }
    return rep;
}

}  // namespace embedlab
