#include "embedlab/discrete_operator.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "embedlab/error.hpp"

namespace embedlab {

const char* to_string(OperatorKind kind) {
    switch (kind) {
        case OperatorKind::H: return "H";
        case OperatorKind::Hbar: return "Hbar";
        case OperatorKind::HplusW: return "HplusW";
        case OperatorKind::HbarPlusW: return "HbarPlusW";
    }
    return "Unknown";
}

namespace {

// Root of q^2 - w q + 1 = 0 inside the unit disk; on the circle the branch
// picks Im q > 0 for +i0.
cplx inner_root(cplx w, Branch branch) {
    const cplx r = std::sqrt(w * w - 4.0);
    const cplx q1 = 0.5 * (w + r), q2 = 0.5 * (w - r);
    const double a1 = std::abs(q1), a2 = std::abs(q2);
    if (std::abs(a1 - 1.0) > 1e-12 || std::abs(a2 - 1.0) > 1e-12) return a1 < a2 ? q1 : q2;
    const cplx up = q1.imag() > 0 ? q1 : q2;
    return branch == Branch::Plus ? up : std::conj(up);
}

struct Energy {
    cplx z;
    Branch branch;
};

Energy closure_energy(const BoundaryCondition& bc) {
    if (const auto* r = std::get_if<Radiation>(&bc)) return {cplx(r->lambda, 0.0), r->branch};
    const auto& c = std::get<ComplexEnergy>(bc);
    if (c.z.imag() == 0.0)
        fail(ErrorKind::InvalidArgument, "complex-energy closure needs Im z != 0");
    return {c.z, c.z.imag() > 0 ? Branch::Plus : Branch::Minus};
}

void assemble(DiscreteOperator& op) {
    const ModeLayout& L = op.layout;
    const int nz = L.nz(), nm = L.n_modes(), M = L.theta_nodes();
    const double h = op.grid.spacing();
    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(static_cast<size_t>(L.size()) * (op.model.is_cylinder() ? 3 + nm : 5));
    auto add = [&](int r, int c, cplx v) { trip.emplace_back(r, c, v); };

    const bool closed = !std::holds_alternative<Dirichlet>(op.bc);
    std::vector<cplx> roots;
    if (closed) roots = exterior_roots(op, op.bc);

    if (!op.model.is_cylinder()) {
        if (nz < 5) fail(ErrorKind::InvalidArgument, "grid too small for the 5-point stencil");
        const double c = 1.0 / std::pow(h, 4);
        const double st[5] = {c, -4 * c, 6 * c, -4 * c, c};
        for (int i = 0; i < nz; ++i) {
            for (int k = -2; k <= 2; ++k) {
                const int j = i + k;
                if (j >= 0 && j < nz) add(i, j, st[k + 2]);
            }
            add(i, i, op.potential[i]);
        }
        if (closed) {
            const cplx s = roots[0] + roots[1], p = roots[0] * roots[1];
            // right ghosts u_N = s u_{N-1} - p u_{N-2}, u_{N+1} = (s^2 - p) u_{N-1} - s p u_{N-2}
            const int a = nz - 1, b = nz - 2;
            add(b, a, c * s);
            add(b, b, -c * p);
            add(a, a, c * (-4.0 * s + s * s - p));
            add(a, b, c * (4.0 * p - s * p));
            // mirrored on the left
            add(1, 0, c * s);
            add(1, 1, -c * p);
            add(0, 0, c * (-4.0 * s + s * s - p));
            add(0, 1, c * (4.0 * p - s * p));
        }
        op.bandwidth = 2;
    } else {
        if (nz < 3) fail(ErrorKind::InvalidArgument, "grid too small for the 3-point stencil");
        const double c = 1.0 / (h * h);
        for (int iz = 0; iz < nz; ++iz) {
            for (int a = 0; a < nm; ++a) {
                const int r = L.index(iz, a);
                const double j = L.modes()[a].harmonic;
                add(r, r, 2 * c + op.potential[iz] + j * j);
                if (iz > 0) add(r, L.index(iz - 1, a), -c);
                if (iz + 1 < nz) add(r, L.index(iz + 1, a), -c);
            }
        }
        if (closed) {
            for (int a = 0; a < nm; ++a) {
                add(L.index(0, a), L.index(0, a), -c * roots[a]);
                add(L.index(nz - 1, a), L.index(nz - 1, a), -c * roots[a]);
            }
        }
        op.bandwidth = nm;
    }

    if (op.has_perturbation()) {
        if (op.perturbation.size() != L.nodal_size())
            fail(ErrorKind::DimensionMismatch, "perturbation has wrong length");
        const Eigen::MatrixXd& T = L.transform();
        for (int iz = 0; iz < nz; ++iz) {
            const Eigen::VectorXd w = op.perturbation.segment(iz * M, M);
            if (w.cwiseAbs().maxCoeff() == 0.0) continue;
            Eigen::MatrixXd C = T.transpose() * w.asDiagonal() * T;
            C = 0.5 * (C + C.transpose()).eval();  // bitwise symmetric
            for (int a = 0; a < nm; ++a)
                for (int b = 0; b < nm; ++b)
                    if (C(a, b) != 0.0) add(L.index(iz, a), L.index(iz, b), C(a, b));
        }
    }

    op.matrix.resize(L.size(), L.size());
    op.matrix.setFromTriplets(trip.begin(), trip.end());
    op.matrix.makeCompressed();
}

}  // namespace

std::vector<cplx> exterior_roots(const DiscreteOperator& op, const BoundaryCondition& bc) {
    if (std::holds_alternative<Dirichlet>(bc)) return {};
    const Energy e = closure_energy(bc);
    const double h = op.grid.spacing();
    const bool real = e.z.imag() == 0.0;
    if (!op.model.is_cylinder()) {
        if (real && !(e.z.real() > 0))
            fail(ErrorKind::InvalidArgument, "radiation closure needs lambda > 0");
        const cplx s = std::sqrt(e.z) * h * h;
        return {inner_root(2.0 - s, e.branch), inner_root(2.0 + s, e.branch)};
    }
    std::vector<cplx> out;
    for (const auto& m : op.layout.modes()) {
        const cplx rel = e.z - double(m.harmonic * m.harmonic);
        if (real && std::abs(rel.real()) < 1e-12)
            fail(ErrorKind::ThresholdEnergy, "energy sits on the channel threshold j^2 = " +
                                                 std::to_string(m.harmonic * m.harmonic));
        out.push_back(inner_root(2.0 - rel * h * h, e.branch));
    }
    return out;
}

DiscreteOperator build_operator(const ModelSpec& model, const Grid1D& grid,
                                const BoundaryCondition& bc) {
    grid.validate();
    DiscreteOperator op;
    op.model = model;
    op.grid = grid;
    op.layout = ModeLayout(model, grid);
    op.bc = bc;
    op.kind = OperatorKind::H;
    op.potential = sample_potential(model.potential, grid);
    assemble(op);
    return op;
}

DiscreteOperator with_boundary(const DiscreteOperator& op, const BoundaryCondition& bc) {
    DiscreteOperator out = op;
    out.bc = bc;
    assemble(out);
    return out;
}

DiscreteOperator add_multiplication(const DiscreteOperator& op, const Eigen::VectorXd& nodal_w) {
    if (nodal_w.size() != op.layout.nodal_size())
        fail(ErrorKind::DimensionMismatch, "perturbation has wrong length");
    if (!nodal_w.allFinite()) fail(ErrorKind::InvalidArgument, "perturbation is not finite");
    DiscreteOperator out = op;
    if (out.has_perturbation()) out.perturbation += nodal_w;
    else out.perturbation = nodal_w;
    if (out.kind == OperatorKind::H) out.kind = OperatorKind::HplusW;
    if (out.kind == OperatorKind::Hbar) out.kind = OperatorKind::HbarPlusW;
    assemble(out);
    return out;
}

DiscreteOperator apply_perturbation(const DiscreteOperator& op, const PerturbationBasis& basis,
                                    const Eigen::VectorXd& coeffs) {
    if (basis.size() > 0 && basis.elements.front().size() != op.layout.nodal_size())
        fail(ErrorKind::DimensionMismatch, "basis does not match the operator grid");
    return add_multiplication(op, basis.combine(coeffs));
}

Eigen::VectorXcd DiscreteOperator::apply(const Eigen::VectorXcd& v) const {
    if (v.size() != size()) fail(ErrorKind::DimensionMismatch, "vector has wrong length");
    Eigen::VectorXcd out = matrix * v;
    if (has_projector()) {
        const Eigen::VectorXcd c = layout.h() * (projector.transpose().cast<cplx>() * v);
        out += projector.cast<cplx>() * c;
    }
    return out;
}

Eigen::VectorXd DiscreteOperator::apply_real(const Eigen::VectorXd& v) const {
    if (!std::holds_alternative<Dirichlet>(bc))
        fail(ErrorKind::InvalidArgument, "real application needs the Dirichlet closure");
    return apply(v.cast<cplx>()).real();
}

double DiscreteOperator::asymmetry() const {
    const SparseC t = matrix.transpose();
    const SparseC d = matrix - t;
    double worst = 0.0;
    for (int k = 0; k < d.outerSize(); ++k)
        for (SparseC::InnerIterator it(d, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    return worst;
}

Eigen::VectorXcd apply_shifted_accurate(const DiscreteOperator& op, cplx z, const Eigen::VectorXcd& xin) {
    using L = long double;
    using CL = std::complex<L>;
    const ModeLayout& lay = op.layout;
    const int n = lay.size(), nz = lay.nz(), nm = lay.n_modes(), M = lay.theta_nodes();
    if (xin.size() != n) fail(ErrorKind::DimensionMismatch, "vector has wrong length");
    std::vector<CL> x(n), y(n, CL(0));
    for (int i = 0; i < n; ++i) x[i] = CL(xin[i].real(), xin[i].imag());
    const CL zl(z.real(), z.imag());
    const std::vector<cplx> roots = exterior_roots(op, op.bc);
    const L h = op.grid.spacing();
    const bool pert = op.has_perturbation();

    if (!op.model.is_cylinder()) {
        const L c = 1 / (h * h * h * h);
        const L st[5] = {c, -4 * c, 6 * c, -4 * c, c};
        for (int i = 0; i < nz; ++i) {
            CL acc(0);
            for (int k = -2; k <= 2; ++k) {
                const int j = i + k;
                if (j >= 0 && j < nz) acc += st[k + 2] * x[j];
            }
            L diag = op.potential[i];
            if (pert) diag += op.perturbation[i];
            y[i] = acc + (CL(diag) - zl) * x[i];
        }
        if (!roots.empty()) {
            const CL q1(roots[0].real(), roots[0].imag()), q2(roots[1].real(), roots[1].imag());
            const CL s = q1 + q2, p = q1 * q2;
            const int a = nz - 1, b = nz - 2;
            y[b] += c * (s * x[a] - p * x[b]);
            y[a] += c * ((L(-4) * s + s * s - p) * x[a] + (L(4) * p - s * p) * x[b]);
            y[1] += c * (s * x[0] - p * x[1]);
            y[0] += c * ((L(-4) * s + s * s - p) * x[0] + (L(4) * p - s * p) * x[1]);
        }
    } else {
        const L c = 1 / (h * h);
        for (int iz = 0; iz < nz; ++iz)
            for (int a = 0; a < nm; ++a) {
                const int r = lay.index(iz, a);
                const L j = lay.modes()[a].harmonic;
                CL acc = (2 * c + L(op.potential[iz]) + j * j) * x[r] - zl * x[r];
                if (iz > 0) acc -= c * x[lay.index(iz - 1, a)];
                if (iz + 1 < nz) acc -= c * x[lay.index(iz + 1, a)];
                y[r] = acc;
            }
        if (!roots.empty())
            for (int a = 0; a < nm; ++a) {
                const CL q(roots[a].real(), roots[a].imag());
                y[lay.index(0, a)] -= c * q * x[lay.index(0, a)];
                y[lay.index(nz - 1, a)] -= c * q * x[lay.index(nz - 1, a)];
            }
        if (pert) {
            const Eigen::MatrixXd& T = lay.transform();
            std::vector<CL> nodal(M);
            for (int iz = 0; iz < nz; ++iz) {
                bool any = false;
                for (int l = 0; l < M; ++l) any = any || op.perturbation[iz * M + l] != 0.0;
                if (!any) continue;
                for (int l = 0; l < M; ++l) {
                    CL acc(0);
                    for (int a = 0; a < nm; ++a) acc += L(T(l, a)) * x[lay.index(iz, a)];
                    nodal[l] = acc * L(op.perturbation[iz * M + l]);
                }
                for (int a = 0; a < nm; ++a) {
                    CL acc(0);
                    for (int l = 0; l < M; ++l) acc += L(T(l, a)) * nodal[l];
                    y[lay.index(iz, a)] += acc;
                }
            }
        }
    }
    for (int j = 0; j < op.projector.cols(); ++j) {
        CL coef(0);
        for (int i = 0; i < n; ++i) coef += L(op.projector(i, j)) * x[i];
        coef *= h;
        for (int i = 0; i < n; ++i) y[i] += L(op.projector(i, j)) * coef;
    }
    Eigen::VectorXcd out(n);
    for (int i = 0; i < n; ++i) out[i] = cplx(static_cast<double>(y[i].real()), static_cast<double>(y[i].imag()));
    return out;
}

Eigen::MatrixXd band_storage(const DiscreteOperator& op) {
    const int kd = op.bandwidth, n = op.size();
    Eigen::MatrixXd ab = Eigen::MatrixXd::Zero(kd + 1, n);
    for (int k = 0; k < op.matrix.outerSize(); ++k)
        for (SparseC::InnerIterator it(op.matrix, k); it; ++it) {
            const int i = static_cast<int>(it.row()), j = static_cast<int>(it.col());
            if (i > j) continue;
            if (j - i > kd) fail(ErrorKind::InvalidArgument, "entry outside the band");
            ab(kd + i - j, j) += it.value().real();
        }
    return ab;
}

}  // namespace embedlab
