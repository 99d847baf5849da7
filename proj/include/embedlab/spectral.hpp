#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "embedlab/discrete_operator.hpp"
#include "embedlab/grid.hpp"
#include "embedlab/perturbation.hpp"

namespace embedlab {

struct SpectralData {
    double lambda0 = 0.0;
    Eigen::MatrixXd eigvecs;  // columns psi_i in mode space, L2-orthonormal, real
    int multiplicity = 0;
    double continuum_edge = 0.0;
    double dirichlet_lambda = 0.0;  // eigenvalue of the box matrix before refinement
    std::vector<double> residuals;  // ||(H - lambda0) psi_i|| with the radiation closure
    std::vector<double> edge_amplitudes;
    double nearest_other = std::numeric_limits<double>::infinity();
    double isolation_radius = 0.0;
    bool refined = false;
};

struct EigenSearchOptions {
    double edge_threshold = 1e-8;
    double edge_fraction = 0.02;
    double isolation_radius = 0.2;
    double cluster_tol = 1e-8;  // relative, groups a degenerate eigenvalue
    int refine_steps = 5;
    bool refine = true;
};

SpectralData find_embedded_eigenpairs(const DiscreteOperator& op, const Interval& window,
                                      const EigenSearchOptions& options = {});

// Eigenvalues of the box matrix in the window with their edge amplitudes.
struct BoxState {
    double lambda = 0.0;
    double edge_amplitude = 0.0;
};
std::vector<BoxState> box_states(const DiscreteOperator& op, const Interval& window,
                                 double edge_fraction = 0.02);

DiscreteOperator make_hbar(const DiscreteOperator& op, const SpectralData& spec);

// ||(H - lambda) psi|| / ||psi|| with the outgoing closure at lambda, projector ignored.
double eigen_residual(const DiscreteOperator& op, double lambda, const Eigen::VectorXcd& psi);

struct HypothesisCheck {
    std::string name;
    bool passed = false;
    double value = 0.0;
    std::string detail;
};

struct HypothesisReport {
    std::vector<HypothesisCheck> checks;
    bool all_passed() const;
    const HypothesisCheck* find(const std::string& name) const;
};

struct HypothesisInputs {
    const PerturbationBasis* basis = nullptr;
    const Eigen::MatrixXd* fermi_jacobian = nullptr;  // enables the surjectivity proxy
    int expected_rank = 0;
    double edge_threshold = 1e-8;
    double edge_fraction = 0.02;
    double rank_threshold = 1e-6;
};

HypothesisReport check_hypotheses(const SpectralData& spec, const DiscreteOperator& op,
                                  const HypothesisInputs& inputs = {});

// Numerical rank by sigma >= rel * sigma_max.
int numerical_rank(const Eigen::MatrixXd& m, double rel, Eigen::VectorXd* singular_values = nullptr);

}  // namespace embedlab
