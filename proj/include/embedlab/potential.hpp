#pragma once

#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "embedlab/grid.hpp"

namespace embedlab {

// V(x) = a sech^2 x + b sech^4 x
struct SechPair {
    double a = 20.0;
    double b = -24.0;
};

// V(z) = -v0 sech^2 z
struct SechSquaredWell {
    double v0 = 1.19;
};

// Values given on the grid nodes.
struct Tabulated {
    std::vector<double> values;
};

using PotentialSpec = std::variant<SechPair, SechSquaredWell, Tabulated>;

Eigen::VectorXd sample_potential(const PotentialSpec& potential, const Grid1D& grid);

// Largest |V(x)| (1 + x^2)^q over the outer `fraction` of nodes on each side.
// Small values certify the decay condition at the box edges.
double edge_decay_bound(const Eigen::VectorXd& values, const Grid1D& grid, double q = 1.0,
                        double fraction = 0.02);

// Adjusts the sech^2 amplitude so that the sampled lattice operator
// d^4 + V carries an exact even eigenvector at an energy near `lambda_guess`.
// The continuum eigenpair only holds up to O(h^2) on the lattice; without the
// shift the discrete problem has a narrow resonance instead of an eigenvalue.
struct EmbeddingCalibration {
    SechPair potential;
    double lambda = 0.0;
    double amplitude_shift = 0.0;
    double mismatch = 0.0;
    int iterations = 0;
};

EmbeddingCalibration calibrate_embedding(const SechPair& potential, const Grid1D& grid,
                                         double lambda_guess);

}  // namespace embedlab
