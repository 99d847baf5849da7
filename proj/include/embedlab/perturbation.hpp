#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "embedlab/grid.hpp"
#include "embedlab/model.hpp"

namespace embedlab {

// Region in z; on the cylinder it covers every theta.
struct Ball {
    double center = 0.0;
    double radius = 1.0;
    bool contains(double z) const { return std::abs(z - center) <= radius; }
};

// Multiplication perturbations W_1..W_p as nodal grid functions. Elements are
// stored complex so that a non-real input can be represented and rejected.
struct PerturbationBasis {
    std::vector<Eigen::VectorXcd> elements;
    std::vector<std::string> labels;
    std::optional<Ball> support;

    int size() const { return static_cast<int>(elements.size()); }
    bool is_real(double tol = 0.0) const;
    // Real part of element k; throws InvalidArgument when it is not real.
    Eigen::VectorXd real_element(int k) const;
    // Nodal W = sum_k c_k W_k.
    Eigen::VectorXd combine(const Eigen::VectorXd& coeffs) const;
    int gram_rank(double h, double rel_tol = 1e-10) const;
};

// Gaussian bump exp(-((z - center)/width)^2) times cos or sin(harmonic theta).
struct BumpSpec {
    double center = 0.0;
    double width = 1.0;
    int harmonic = 0;
    bool sine = false;
    double amplitude = 1.0;
};

PerturbationBasis make_bump_basis(const ModeLayout& layout, const Grid1D& grid,
                                  const std::vector<BumpSpec>& bumps);

// Checks every element is even in theta (needed on the even sector).
bool is_theta_even(const ModeLayout& layout, const Eigen::VectorXd& nodal, double tol = 1e-12);

void validate_basis(const PerturbationBasis& basis, const ModeLayout& layout);

}  // namespace embedlab
