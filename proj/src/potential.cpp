#include "embedlab/potential.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "embedlab/error.hpp"

namespace embedlab {

namespace {

double sech(double x) { return 1.0 / std::cosh(x); }

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

using ld = long double;

// Shoots the lattice equation d^4 u + V u = lambda u inward from the right end,
// starting on the pure decaying exterior mode, and returns the two evenness
// mismatches at the grid center.
std::array<ld, 2> evenness_mismatch(ld lambda, ld a, ld b, const Grid1D& grid) {
    const int n = grid.n_points;
    const ld h = static_cast<ld>(grid.x_max - grid.x_min) / (n - 1);
    const ld h4 = h * h * h * h;
    const ld w = 2 + std::sqrt(lambda) * h * h;
    const ld q = (w - std::sqrt(w * w - 4)) / 2;

    // u[k] holds node k - 2, so ghosts -2..n+1 fit.
    std::vector<ld> u(n + 4, 0.0L);
    auto at = [&](int i) -> ld& { return u[i + 2]; };
    at(n - 2) = 1 / q;
    at(n - 1) = 1;
    at(n) = q;
    at(n + 1) = q * q;

    const int stop = (n % 2 == 1) ? (n - 1) / 2 - 2 : n / 2 - 2;
    for (int i = n - 1; i - 2 >= stop; --i) {
        const ld x = grid.x_min + i * h;
        const ld s = 1 / std::cosh(x);
        const ld v = a * s * s + b * s * s * s * s;
        at(i - 2) = (lambda - v) * h4 * at(i) -
                    (-4 * at(i - 1) + 6 * at(i) - 4 * at(i + 1) + at(i + 2));
        if (std::abs(at(i - 2)) > 1e200L) {
            for (auto& val : u) val *= 1e-200L;
        }
    }

    ld d1, d2, scale;
    if (n % 2 == 1) {
        const int c = (n - 1) / 2;
        d1 = at(c - 1) - at(c + 1);
        d2 = at(c - 2) - at(c + 2);
        scale = std::max({std::abs(at(c)), std::abs(at(c + 1)), std::abs(at(c + 2))});
    } else {
        const int c0 = n / 2 - 1, c1 = n / 2;
        d1 = at(c0) - at(c1);
        d2 = at(c0 - 1) - at(c1 + 1);
        scale = std::max(std::abs(at(c1)), std::abs(at(c1 + 1)));
    }
    return {d1 / scale, d2 / scale};
}

}  // namespace

Eigen::VectorXd sample_potential(const PotentialSpec& potential, const Grid1D& grid) {
    grid.validate();
    Eigen::VectorXd out(grid.n_points);
    std::visit(overloaded{
                   [&](const SechPair& p) {
                       for (int i = 0; i < grid.n_points; ++i) {
                           const double s2 = std::pow(sech(grid.x(i)), 2);
                           out[i] = p.a * s2 + p.b * s2 * s2;
                       }
                   },
                   [&](const SechSquaredWell& p) {
                       for (int i = 0; i < grid.n_points; ++i)
                           out[i] = -p.v0 * std::pow(sech(grid.x(i)), 2);
                   },
                   [&](const Tabulated& p) {
                       if (static_cast<int>(p.values.size()) != grid.n_points)
                           fail(ErrorKind::DimensionMismatch,
                                "tabulated potential has " + std::to_string(p.values.size()) +
                                    " values for " + std::to_string(grid.n_points) + " nodes");
                       for (int i = 0; i < grid.n_points; ++i) out[i] = p.values[i];
                   },
               },
               potential);
    if (!out.allFinite()) fail(ErrorKind::InvalidArgument, "potential has non-finite values");
    return out;
}

double edge_decay_bound(const Eigen::VectorXd& values, const Grid1D& grid, double q,
                        double fraction) {
    const int n = grid.n_points;
    const int k = std::max(1, static_cast<int>(std::ceil(fraction * n)));
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        if (i >= k && i < n - k) continue;
        const double x = grid.x(i);
        worst = std::max(worst, std::abs(values[i]) * std::pow(1.0 + x * x, q));
    }
    return worst;
}

EmbeddingCalibration calibrate_embedding(const SechPair& potential, const Grid1D& grid,
                                         double lambda_guess) {
    grid.validate();
    if (!grid.symmetric()) fail(ErrorKind::InvalidArgument, "calibration needs a symmetric grid");
    if (!(lambda_guess > 0)) fail(ErrorKind::InvalidArgument, "calibration needs lambda > 0");

    ld lambda = lambda_guess;
    ld a = potential.a;
    const ld b = potential.b;
    EmbeddingCalibration out;

    auto norm2 = [](const std::array<ld, 2>& f) { return std::hypot((double)f[0], (double)f[1]); };
    std::array<ld, 2> f = evenness_mismatch(lambda, a, b, grid);
    int it = 0;
    for (; it < 40 && norm2(f) > 1e-17; ++it) {
        const ld dl = 1e-8L * std::max<ld>(1, std::abs(lambda));
        const ld da = 1e-8L * std::max<ld>(1, std::abs(a));
        const auto fl = evenness_mismatch(lambda + dl, a, b, grid);
        const auto fa = evenness_mismatch(lambda, a + da, b, grid);
        const ld j00 = (fl[0] - f[0]) / dl, j01 = (fa[0] - f[0]) / da;
        const ld j10 = (fl[1] - f[1]) / dl, j11 = (fa[1] - f[1]) / da;
        const ld det = j00 * j11 - j01 * j10;
        if (det == 0) break;
        const ld step_l = (j11 * f[0] - j01 * f[1]) / det;
        const ld step_a = (-j10 * f[0] + j00 * f[1]) / det;
        lambda -= step_l;
        a -= step_a;
        f = evenness_mismatch(lambda, a, b, grid);
        if (std::abs(step_l) < 1e-18L && std::abs(step_a) < 1e-18L) {
            ++it;
            break;
        }
    }
    out.mismatch = norm2(f);
    if (!(out.mismatch < 1e-10) || !std::isfinite(static_cast<double>(lambda)))
        fail(ErrorKind::NoConvergence, "embedding calibration did not converge");
    out.potential = SechPair{static_cast<double>(a), potential.b};
    out.lambda = static_cast<double>(lambda);
    out.amplitude_shift = static_cast<double>(a) - potential.a;
    out.iterations = it;
    return out;
}

}  // namespace embedlab
