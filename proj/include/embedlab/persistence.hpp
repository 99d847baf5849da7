#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "embedlab/error.hpp"
#include "embedlab/fermi.hpp"

namespace embedlab {

// ker F'(0) and a complement M, both in coefficient space.
struct SplitBasis {
    Eigen::MatrixXd jacobian;
    Eigen::MatrixXd kernel;  // p x (p - codim), orthonormal columns
    Eigen::MatrixXd normal;  // p x codim
    Eigen::VectorXd singular_values;
    int codim = 0;
    double min_normal_singular = 0.0;
};

// expected_codim < 0 means the number of Jacobian rows.
SplitBasis split(const Eigen::MatrixXd& jacobian, int expected_codim = -1, double rel = 1e-6);

// Normal column k scaled so that |J d| = 1.
Eigen::VectorXd normal_direction(const SplitBasis& s, int k);

struct ManifoldPoint {
    Eigen::VectorXd xi;
    Eigen::VectorXd eta;
    Eigen::VectorXd coeffs;
    double lambda = 0.0;
    Eigen::VectorXcd eigvec;       // unit norm, phase chosen to make it real
    Eigen::VectorXd fermi_values;  // density rows, then solvability rows
    double fermi_residual = 0.0;
    double eigen_residual = 0.0;   // full H + W with the radiation closure
    double imag_residual = 0.0;    // |Im psi| after the phase fix
    double orthogonality = 0.0;    // max |<psi_i, psi_1^W>|, i >= 2
    double q_gap = 0.0;
    int iterations = 0;
    int refreshes = 0;             // finite-difference Jacobian rebuilds
};

struct PersistenceOptions {
    double tol = 1e-10;
    int max_iter = 30;
    double contraction = 0.5;  // refresh the Jacobian when |G| shrinks less than this
    int max_stalls = 3;
};

struct TraceResult {
    std::vector<ManifoldPoint> points;
    bool complete = true;
    ErrorKind stop_kind = ErrorKind::NoConvergence;
    std::string stop_message;
};

struct OffManifoldSample {
    double magnitude = 0.0;
    double min_gap = 0.0;
    double argmin_lambda = 0.0;
    std::vector<double> lambdas;
    std::vector<double> gaps;
};

class PersistenceSolver {
public:
    PersistenceSolver(SystemContext ctx, FermiFrame frame, PerturbationBasis basis, SplitBasis split,
                      PersistenceOptions options = {});

    const SystemContext& context() const { return ctx_; }
    const FermiFrame& frame() const { return frame_; }
    const PerturbationBasis& basis() const { return basis_; }
    const SplitBasis& split_basis() const { return split_; }
    double chart_radius() const;

    // Solves F(K xi + N eta) = 0 for eta.
    ManifoldPoint solve_eta(const Eigen::VectorXd& xi, const Eigen::VectorXd& eta_guess = {}) const;

    // Eigenpair, residuals and Q gap at given coefficients.
    ManifoldPoint evaluate(const Eigen::VectorXd& coeffs) const;

    // direction is a coefficient vector in span(kernel); points at xi = k step u, k = 1..steps.
    TraceResult trace(const Eigen::VectorXd& direction, int steps, double step_size) const;

    // Minimum Q gap over the window for W = c d, d in span(normal).
    std::vector<OffManifoldSample> off_manifold_probe(const Eigen::VectorXd& direction,
                                                      const std::vector<double>& magnitudes,
                                                      int samples = 41) const;

private:
    Eigen::VectorXd residual(const Eigen::VectorXd& coeffs) const;

    SystemContext ctx_;
    FermiFrame frame_;
    PerturbationBasis basis_;
    SplitBasis split_;
    PersistenceOptions options_;
};

// (Hbar + W - lambda - i0)^{-1} psi_1
Eigen::VectorXcd eigenvector_formula(const SystemContext& ctx, const Eigen::VectorXd& nodal_w, double lambda);

// Rotates v by a global phase so that its largest entry is real and positive;
// returns |Im| / |v| of the result.
double fix_phase(Eigen::VectorXcd& v);

// Min |mu - 1| over eigenvalues mu of Q(lambda + i0, W).
double q_gap(const SystemContext& ctx, const Eigen::VectorXd& nodal_w, double lambda);

struct CompactW {
    Eigen::VectorXd w;    // nodal
    Eigen::VectorXd u;    // after truncation and projection, mode space
    Eigen::VectorXd psi;  // psi_1 - u
    double lambda = 0.0;
    double orthogonality = 0.0;  // max |<psi_i, u>| / |u|
    double min_divisor = 0.0;    // min |psi_1 - u| on the support, nodal
    int support_lo = 0;          // z index range carrying W
    int support_hi = -1;
};

// W = (H - lambda0) u / (psi_1 - u) on the ball. u must vanish outside the ball;
// it is cut to the ball shrunk by the stencil reach and projected off Ran P0
// along a smoothly cut-off copy of the eigenvectors, so the support is kept.
CompactW construct_compact_w(const SystemContext& ctx, const Eigen::VectorXd& u, const Ball& ball);

}  // namespace embedlab
