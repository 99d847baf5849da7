#pragma once

#include <vector>

#include <Eigen/Dense>

#include "embedlab/perturbation.hpp"
#include "embedlab/resolvent.hpp"
#include "embedlab/spectral.hpp"

namespace embedlab {

// Unperturbed data shared by the frame, lambda(W) and the Fermi map.
struct SystemContext {
    DiscreteOperator hbar;  // H + P0, Dirichlet closure; closures are swapped per energy
    SpectralData spectral;  // eigvecs rotated so that column 0 is psi_1
    Interval window;
    ResolventOptions resolvent;
    int n() const { return spectral.multiplicity; }
    Eigen::VectorXd psi1() const { return spectral.eigvecs.col(0); }
};

// `rotation` mixes the first two eigenvectors (degenerate case only).
SystemContext make_context(const DiscreteOperator& h, const SpectralData& spec, const Interval& window,
                           double rotation = 0.0,
                           ResolventMethod method = ResolventMethod::RadiationBC);

struct FermiFrame {
    Eigen::MatrixXd probes;     // phi_j
    Eigen::MatrixXd densities;  // f_j = delta(Hbar - lambda0) phi_j
    Eigen::MatrixXd duals;      // g_l with <f_j, g_l> = delta_jl
    int m = 0;
    double lambda0 = 0.0;
    std::vector<int> selected;  // indices into the candidate probe list
    Eigen::VectorXd pivots;     // |R_jj| of the pivoted QR, normalized
    double imag_ratio = 0.0;    // max |Im f| / max |Re f| before realification
};

// Selects m probes whose density images are most independent.
FermiFrame build_frame(const SystemContext& ctx, const ResolventPair& at_lambda0, const Eigen::MatrixXd& probes,
                       int m);

struct LambdaSolve {
    double lambda = 0.0;
    int iterations = 0;
    double a_value = 0.0;     // <psi_1, A(lambda, W) psi_1>
    double derivative = 0.0;  // A'_lambda at the solution
    bool left_window = false;
    bool converged = false;
};

// Newton with bisection safeguard on <psi_1, A(lambda, W) psi_1> = 1.
LambdaSolve solve_lambda(const SystemContext& ctx, const Eigen::VectorXd& nodal_w, double guess,
                         double tol = 1e-12, int max_iter = 50);
LambdaSolve solve_lambda(const SystemContext& ctx, const PerturbationBasis& basis, const Eigen::VectorXd& coeffs,
                         double guess);

struct FermiValue {
    Eigen::VectorXd values;  // m density rows, then n - 1 rows <psi_i, A psi_1>
    double max_imag = 0.0;
    LambdaSolve lambda;
    int density_rows = 0;
};

FermiValue fermi_map(const FermiFrame& frame, const SystemContext& ctx, const PerturbationBasis& basis,
                     const Eigen::VectorXd& coeffs);
FermiValue fermi_map_nodal(const FermiFrame& frame, const SystemContext& ctx, const Eigen::VectorXd& nodal_w);

// Analytic F'(0): rows -<g_j, delta_0 W_k psi_1>, then -<psi_i, W_k psi_1>.
Eigen::MatrixXd fermi_jacobian(const FermiFrame& frame, const SystemContext& ctx, const PerturbationBasis& basis);

// Centered differences of fermi_map with step t (default 1e-5 (1 + |c|)).
Eigen::MatrixXd fermi_jacobian_fd(const FermiFrame& frame, const SystemContext& ctx, const PerturbationBasis& basis,
                                  const Eigen::VectorXd& at, double t = 0.0);

// Largest principal-angle sine between the column spans of a and b.
double span_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double h);

}  // namespace embedlab
