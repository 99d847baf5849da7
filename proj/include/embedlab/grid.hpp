#pragma once

#include <Eigen/Dense>

namespace embedlab {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x) const { return x > lo && x < hi; }
    double center() const { return 0.5 * (lo + hi); }
    double width() const { return hi - lo; }
};

// Uniform grid on [x_min, x_max] including both end points.
struct Grid1D {
    double x_min = -20.0;
    double x_max = 20.0;
    int n_points = 2001;

    double spacing() const { return (x_max - x_min) / (n_points - 1); }
    double x(int i) const { return x_min + i * spacing(); }
    Eigen::VectorXd nodes() const;

    // Throws InvalidArgument when the invariants fail.
    void validate() const;
    bool symmetric(double tol = 1e-12) const;
    // Index of the node nearest to x, clamped to the grid.
    int nearest(double x) const;
};

}  // namespace embedlab
