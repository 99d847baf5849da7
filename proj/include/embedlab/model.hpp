#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "embedlab/grid.hpp"
#include "embedlab/potential.hpp"

namespace embedlab {

enum class ModelKind { FourthOrderLine, CylinderEvenSector, CylinderFull };

const char* to_string(ModelKind kind);

struct ModelSpec {
    ModelKind kind = ModelKind::FourthOrderLine;
    PotentialSpec potential = SechPair{};
    int angular_cutoff = 0;   // J, cylinder only
    int angular_index = 1;    // n, cylinder only
    double weight_index = 1.0; // s of the weighted spaces; metadata only

    bool is_cylinder() const { return kind != ModelKind::FourthOrderLine; }
};

// One transverse Fourier mode: cos(j theta) or sin(j theta).
struct AngularMode {
    int harmonic = 0;
    bool sine = false;
};

// Unknowns are stored interleaved, index = iz * n_modes + a, so every model
// operator is banded. Grid functions are also handled in nodal form on the
// (z, theta_l) product grid with theta_l = 2 pi l / M, index = iz * M + l.
class ModeLayout {
public:
    ModeLayout() = default;
    ModeLayout(const ModelSpec& model, const Grid1D& grid);

    int nz() const { return nz_; }
    int n_modes() const { return static_cast<int>(modes_.size()); }
    int theta_nodes() const { return theta_nodes_; }
    int size() const { return nz_ * n_modes(); }
    int nodal_size() const { return nz_ * theta_nodes_; }
    int index(int iz, int a) const { return iz * n_modes() + a; }
    double h() const { return h_; }
    const std::vector<AngularMode>& modes() const { return modes_; }
    double theta(int l) const;
    bool cylinder() const { return cylinder_; }

    // Orthogonal map between mode coefficients and scaled nodal values,
    // T(l, a) = e_a(theta_l) sqrt(2 pi / M).
    const Eigen::MatrixXd& transform() const { return transform_; }

    // Mode-space vector <-> nodal function values.
    Eigen::VectorXd to_nodal(const Eigen::VectorXd& coeffs) const;
    Eigen::VectorXd from_nodal(const Eigen::VectorXd& values) const;

    // Discrete L2 inner product h * sum conj(u) v in mode space.
    template <class A, class B>
    typename A::Scalar inner(const Eigen::MatrixBase<A>& u, const Eigen::MatrixBase<B>& v) const {
        return h_ * u.dot(v);
    }
    template <class A>
    double norm(const Eigen::MatrixBase<A>& u) const { return std::sqrt(h_) * u.norm(); }

    // Largest nodal magnitude among z-rows at the outer `fraction` of each end.
    double edge_amplitude(const Eigen::VectorXd& u, double fraction) const;

private:
    int nz_ = 0;
    int theta_nodes_ = 1;
    double h_ = 1.0;
    bool cylinder_ = false;
    std::vector<AngularMode> modes_;
    Eigen::MatrixXd transform_;
};

}  // namespace embedlab
