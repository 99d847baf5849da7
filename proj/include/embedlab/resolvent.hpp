#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "embedlab/discrete_operator.hpp"
#include "embedlab/grid.hpp"
#include "embedlab/spectral.hpp"

namespace embedlab {

enum class ResolventMethod { RadiationBC, EpsilonExtrapolation };

const char* to_string(ResolventMethod method);

struct EpsilonSchedule {
    std::vector<double> eps = {0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125, 0.0015625};
    double cauchy_tol = 1e-4;  // relative spread of the last two extrapolants
};

struct ResolventOptions {
    ResolventMethod method = ResolventMethod::RadiationBC;
    EpsilonSchedule schedule;
    std::optional<Interval> window;
};

// (op - lambda -/+ i0)^{-1} where op may carry the rank-n projector; the
// projector enters through a Woodbury update, since op - lambda without it is
// singular at the embedded eigenvalue.
class BoundaryResolvent {
public:
    BoundaryResolvent(const DiscreteOperator& op, double lambda, Branch branch,
                      const ResolventOptions& options = {});
    // Plain resolvent at a complex energy with the decaying exterior closure.
    static BoundaryResolvent at_complex(const DiscreteOperator& op, cplx z);

    Eigen::VectorXcd resolve(const Eigen::VectorXcd& v) const;
    Eigen::MatrixXcd resolve_many(const Eigen::MatrixXcd& v) const;

    double lambda() const { return lambda_; }
    Branch branch() const { return branch_; }
    ResolventMethod method() const { return method_; }
    const DiscreteOperator& base() const { return base_; }
    int size() const { return base_.size(); }

    struct Factor;

private:
    BoundaryResolvent() = default;
    DiscreteOperator base_;
    double lambda_ = 0.0;
    Branch branch_ = Branch::Plus;
    ResolventMethod method_ = ResolventMethod::RadiationBC;
    EpsilonSchedule schedule_;
    std::vector<std::shared_ptr<const Factor>> factors_;
};

// Both branches at one energy.
struct ResolventPair {
    BoundaryResolvent plus;
    BoundaryResolvent minus;

    ResolventPair(const DiscreteOperator& op, double lambda, const ResolventOptions& options = {});
    double lambda() const { return plus.lambda(); }
};

// (1 / 2 pi i) [R(lambda + i0) - R(lambda - i0)] v
Eigen::VectorXcd density(const ResolventPair& pair, const Eigen::VectorXcd& v);
Eigen::MatrixXcd density_many(const ResolventPair& pair, const Eigen::MatrixXcd& v);

struct DensityRank {
    int m = 0;
    Eigen::VectorXd singular_values;
    Eigen::MatrixXcd images;  // delta applied to each probe
    double gap() const;       // sigma_m / sigma_{m+1}
};

DensityRank density_rank(const ResolventPair& pair, const Eigen::MatrixXd& probes, double threshold = 1e-6);

// Narrow Gaussian probes (width 5h) at equally spaced centers in [-span, span];
// on the cylinder each probe carries seeded random mode weights.
Eigen::MatrixXd gaussian_probes(const ModeLayout& layout, const Grid1D& grid, int count,
                                std::uint64_t seed, double span = 4.0);

// Q_ij = <psi_i, R psi_j>
Eigen::MatrixXcd reduced_q(const SpectralData& spec, const BoundaryResolvent& r);

struct QCriterion {
    bool is_eigenvalue = false;
    double gap = 0.0;
    Eigen::VectorXcd eigenvalues;
};

QCriterion eigenvalue_criterion(const SpectralData& spec, const BoundaryResolvent& plus, double tol = 1e-6);

// Multiplication by a nodal function in mode space.
Eigen::VectorXcd multiply(const ModeLayout& layout, const Eigen::VectorXd& nodal_w, const Eigen::VectorXcd& v);

// ||delta_W v - (I - R_W^+ W) delta_0 (I - W R_W^-) v|| / ||v|| with R^+ = R(lambda + i0).
// The left side uses `lhs_method`, the right side `rhs_method`.
double perturbation_identity_residual(const DiscreteOperator& hbar, const Eigen::VectorXd& nodal_w, double lambda,
                                      const Eigen::VectorXcd& v,
                                      ResolventMethod lhs_method = ResolventMethod::RadiationBC,
                                      ResolventMethod rhs_method = ResolventMethod::EpsilonExtrapolation);

}  // namespace embedlab
