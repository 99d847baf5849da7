#include "embedlab/perturbation.hpp"

#include <cmath>
#include <string>

#include "embedlab/error.hpp"

namespace embedlab {

bool PerturbationBasis::is_real(double tol) const {
    for (const auto& e : elements)
        if (e.imag().cwiseAbs().maxCoeff() > tol) return false;
    return true;
}

Eigen::VectorXd PerturbationBasis::real_element(int k) const {
    if (k < 0 || k >= size()) fail(ErrorKind::DimensionMismatch, "basis index out of range");
    const auto& e = elements[k];
    if (e.size() > 0 && e.imag().cwiseAbs().maxCoeff() != 0.0)
        fail(ErrorKind::InvalidArgument, "perturbation element " + std::to_string(k) +
                                             " is not real; W must be a real multiplier");
    return e.real();
}

Eigen::VectorXd PerturbationBasis::combine(const Eigen::VectorXd& coeffs) const {
    if (coeffs.size() != size())
        fail(ErrorKind::DimensionMismatch, "expected " + std::to_string(size()) +
                                               " coefficients, got " +
                                               std::to_string(coeffs.size()));
    if (size() == 0) return {};
    Eigen::VectorXd w = Eigen::VectorXd::Zero(elements.front().size());
    for (int k = 0; k < size(); ++k)
        if (coeffs[k] != 0.0) w += coeffs[k] * real_element(k);
    return w;
}

int PerturbationBasis::gram_rank(double h, double rel_tol) const {
    if (size() == 0) return 0;
    Eigen::MatrixXcd g(size(), size());
    for (int i = 0; i < size(); ++i)
        for (int j = 0; j < size(); ++j) g(i, j) = h * elements[i].dot(elements[j]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    int rank = 0;
    for (int i = 0; i < ev.size(); ++i)
        if (ev[i] > rel_tol * top) ++rank;
    return rank;
}

PerturbationBasis make_bump_basis(const ModeLayout& layout, const Grid1D& grid,
                                  const std::vector<BumpSpec>& bumps) {
    PerturbationBasis basis;
    const int M = layout.theta_nodes();
    for (const auto& b : bumps) {
        if (!(b.width > 0)) fail(ErrorKind::InvalidArgument, "bump width must be positive");
        if (!layout.cylinder() && (b.harmonic != 0 || b.sine))
            fail(ErrorKind::InvalidArgument, "angular bumps need a cylinder model");
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(layout.nodal_size());
        for (int iz = 0; iz < layout.nz(); ++iz) {
            const double t = (grid.x(iz) - b.center) / b.width;
            const double g = b.amplitude * std::exp(-t * t);
            for (int l = 0; l < M; ++l) {
                const double th = layout.theta(l);
                const double ang = b.sine ? std::sin(b.harmonic * th) : std::cos(b.harmonic * th);
                e[iz * M + l] = g * ang;
            }
        }
        basis.elements.push_back(std::move(e));
        std::string label = "bump(z=" + std::to_string(b.center) + ",w=" + std::to_string(b.width);
        if (layout.cylinder())
            label += std::string(",") + (b.sine ? "sin" : "cos") + std::to_string(b.harmonic);
        basis.labels.push_back(label + ")");
    }
    return basis;
}

bool is_theta_even(const ModeLayout& layout, const Eigen::VectorXd& nodal, double tol) {
    const int M = layout.theta_nodes();
    const double scale = std::max(1.0, nodal.cwiseAbs().maxCoeff());
    for (int iz = 0; iz < layout.nz(); ++iz)
        for (int l = 1; l < M; ++l)
            if (std::abs(nodal[iz * M + l] - nodal[iz * M + (M - l)]) > tol * scale) return false;
    return true;
}

void validate_basis(const PerturbationBasis& basis, const ModeLayout& layout) {
    if (basis.labels.size() != basis.elements.size())
        fail(ErrorKind::DimensionMismatch, "basis labels and elements differ in count");
    for (int k = 0; k < basis.size(); ++k) {
        if (basis.elements[k].size() != layout.nodal_size())
            fail(ErrorKind::DimensionMismatch, "basis element " + std::to_string(k) +
                                                   " has wrong length");
        if (!basis.elements[k].allFinite())
            fail(ErrorKind::InvalidArgument, "basis element has non-finite values");
    }
    if (!basis.is_real()) fail(ErrorKind::InvalidArgument, "basis contains a non-real element");
    bool even_sector = layout.cylinder();
    for (const auto& m : layout.modes())
        if (m.sine) even_sector = false;
    if (even_sector)
        for (int k = 0; k < basis.size(); ++k)
            if (!is_theta_even(layout, basis.elements[k].real()))
                fail(ErrorKind::InvalidArgument,
                     "even-sector basis element " + std::to_string(k) + " is not even in theta");
    if (basis.gram_rank(layout.h()) < basis.size())
        fail(ErrorKind::InvalidArgument, "basis elements are linearly dependent");
}

}  // namespace embedlab
