#include "embedlab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "embedlab/error.hpp"

namespace embedlab {

Eigen::VectorXd Grid1D::nodes() const {
    Eigen::VectorXd out(n_points);
    for (int i = 0; i < n_points; ++i) out[i] = x(i);
    return out;
}

void Grid1D::validate() const {
    if (!(std::isfinite(x_min) && std::isfinite(x_max)) || !(x_max > x_min))
        fail(ErrorKind::InvalidArgument, "grid requires x_max > x_min");
    if (n_points < 16)
        fail(ErrorKind::InvalidArgument,
             "grid needs at least 16 points, got " + std::to_string(n_points));
}

bool Grid1D::symmetric(double tol) const {
    return std::abs(x_min + x_max) <= tol * std::max(1.0, x_max - x_min);
}

int Grid1D::nearest(double xv) const {
    const long i = std::lround((xv - x_min) / spacing());
    return static_cast<int>(std::clamp<long>(i, 0, n_points - 1));
}

}  // namespace embedlab
