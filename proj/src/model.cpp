#include "embedlab/model.hpp"

#include <algorithm>
#include <numbers>

#include "embedlab/error.hpp"

namespace embedlab {

const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::FourthOrderLine: return "FourthOrderLine";
        case ModelKind::CylinderEvenSector: return "CylinderEvenSector";
        case ModelKind::CylinderFull: return "CylinderFull";
    }
    return "Unknown";
}

ModeLayout::ModeLayout(const ModelSpec& model, const Grid1D& grid)
    : nz_(grid.n_points), h_(grid.spacing()), cylinder_(model.is_cylinder()) {
    grid.validate();
    if (!cylinder_) {
        modes_.push_back({0, false});
        theta_nodes_ = 1;
        transform_ = Eigen::MatrixXd::Ones(1, 1);
        return;
    }
    const int J = model.angular_cutoff;
    if (J < 0) fail(ErrorKind::InvalidArgument, "angular cutoff must be nonnegative");
    if (model.angular_index < 1 || model.angular_index > J)
        fail(ErrorKind::InvalidArgument, "angular index must lie in 1..J");
    for (int j = 0; j <= J; ++j) modes_.push_back({j, false});
    if (model.kind == ModelKind::CylinderFull)
        for (int j = 1; j <= J; ++j) modes_.push_back({j, true});

    // 2J+1 nodes integrate products of retained modes exactly; M odd keeps
    // every cos(j theta) nonzero somewhere on the nodes.
    theta_nodes_ = 2 * J + 1;
    const double pi = std::numbers::pi;
    const double s = std::sqrt(2 * pi / theta_nodes_);
    transform_.resize(theta_nodes_, n_modes());
    for (int l = 0; l < theta_nodes_; ++l) {
        const double th = theta(l);
        for (int a = 0; a < n_modes(); ++a) {
            const auto& m = modes_[a];
            double e;
            if (m.harmonic == 0) e = 1.0 / std::sqrt(2 * pi);
            else if (m.sine) e = std::sin(m.harmonic * th) / std::sqrt(pi);
            else e = std::cos(m.harmonic * th) / std::sqrt(pi);
            transform_(l, a) = e * s;
        }
    }
}

double ModeLayout::theta(int l) const {
    return 2 * std::numbers::pi * l / theta_nodes_;
}

Eigen::VectorXd ModeLayout::to_nodal(const Eigen::VectorXd& coeffs) const {
    if (coeffs.size() != size())
        fail(ErrorKind::DimensionMismatch, "mode vector has wrong length");
    if (!cylinder_) return coeffs;
    const int nm = n_modes(), M = theta_nodes_;
    const double s = std::sqrt(2 * std::numbers::pi / M);
    Eigen::VectorXd out(nodal_size());
    for (int iz = 0; iz < nz_; ++iz)
        out.segment(iz * M, M) = transform_ * coeffs.segment(iz * nm, nm) / s;
    return out;
}

Eigen::VectorXd ModeLayout::from_nodal(const Eigen::VectorXd& values) const {
    if (values.size() != nodal_size())
        fail(ErrorKind::DimensionMismatch, "nodal vector has wrong length");
    if (!cylinder_) return values;
    const int nm = n_modes(), M = theta_nodes_;
    const double s = std::sqrt(2 * std::numbers::pi / M);
    Eigen::VectorXd out(size());
    for (int iz = 0; iz < nz_; ++iz)
        out.segment(iz * nm, nm) = s * transform_.transpose() * values.segment(iz * M, M);
    return out;
}

double ModeLayout::edge_amplitude(const Eigen::VectorXd& u, double fraction) const {
    const Eigen::VectorXd f = to_nodal(u);
    const int M = theta_nodes_;
    const int k = std::max(1, static_cast<int>(std::ceil(fraction * nz_)));
    double worst = 0.0;
    for (int iz = 0; iz < nz_; ++iz) {
        if (iz >= k && iz < nz_ - k) continue;
        worst = std::max(worst, f.segment(iz * M, M).cwiseAbs().maxCoeff());
    }
    return worst;
}

}  // namespace embedlab
