#pragma once

#include <complex>
#include <variant>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "embedlab/grid.hpp"
#include "embedlab/model.hpp"
#include "embedlab/perturbation.hpp"

namespace embedlab {

using cplx = std::complex<double>;
using SparseC = Eigen::SparseMatrix<cplx>;

enum class Branch { Plus, Minus };  // lambda + i0 or lambda - i0

inline double sign_of(Branch b) { return b == Branch::Plus ? 1.0 : -1.0; }

struct Dirichlet {};

// Outgoing / decaying closure at a real energy.
struct Radiation {
    double lambda = 1.0;
    Branch branch = Branch::Plus;
};

// Decaying closure at a complex energy z (Im z != 0).
struct ComplexEnergy {
    cplx z{1.0, 0.1};
};

using BoundaryCondition = std::variant<Dirichlet, Radiation, ComplexEnergy>;

enum class OperatorKind { H, Hbar, HplusW, HbarPlusW };

const char* to_string(OperatorKind kind);

// Everything needed to re-assemble the operator under another closure is kept
// next to the assembled matrix.
struct DiscreteOperator {
    ModelSpec model;
    Grid1D grid;
    ModeLayout layout;
    BoundaryCondition bc = Dirichlet{};
    OperatorKind kind = OperatorKind::H;

    Eigen::VectorXd potential;     // sampled V on the z grid
    Eigen::VectorXd perturbation;  // nodal W, empty when absent
    Eigen::MatrixXd projector;     // columns psi_i (mode space); adds h psi psi^T
    SparseC matrix;                // local banded part, no projector
    int bandwidth = 0;

    int size() const { return layout.size(); }
    bool has_projector() const { return projector.cols() > 0; }
    bool has_perturbation() const { return perturbation.size() > 0; }

    Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const;
    Eigen::VectorXd apply_real(const Eigen::VectorXd& v) const;  // Dirichlet only
    double asymmetry() const;  // max |M - M^T| of the local part
};

DiscreteOperator build_operator(const ModelSpec& model, const Grid1D& grid,
                                const BoundaryCondition& bc);

// Same model, grid, perturbation and projector under a different closure.
DiscreteOperator with_boundary(const DiscreteOperator& op, const BoundaryCondition& bc);

DiscreteOperator apply_perturbation(const DiscreteOperator& op, const PerturbationBasis& basis,
                                    const Eigen::VectorXd& coeffs);
// Adds a nodal multiplication function directly.
DiscreteOperator add_multiplication(const DiscreteOperator& op, const Eigen::VectorXd& nodal_w);

// (op - z) x accumulated in long double from the model data (stencil, V, W,
// closure roots, projector) instead of the rounded matrix entries. Used for
// residuals in iterative refinement; the diagonal of the fourth-order stencil
// is ~6/h^4, so double residuals would swamp small perturbations.
Eigen::VectorXcd apply_shifted_accurate(const DiscreteOperator& op, cplx z, const Eigen::VectorXcd& x);

// Roots q (|q| <= 1) of the exterior recurrence selected by the closure.
// Fourth-order line: two roots (propagating / evanescent). Cylinder: one per mode.
std::vector<cplx> exterior_roots(const DiscreteOperator& op, const BoundaryCondition& bc);

// Real band of the local part in LAPACK upper storage (ldab = bandwidth + 1).
Eigen::MatrixXd band_storage(const DiscreteOperator& op);

}  // namespace embedlab
