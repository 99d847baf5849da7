#include <cmath>

#include "doctest.h"
#include "embedlab/discrete_operator.hpp"
#include "embedlab/error.hpp"

using namespace embedlab;

namespace {

ModelSpec line(PotentialSpec v) {
    ModelSpec m;
    m.kind = ModelKind::FourthOrderLine;
    m.potential = std::move(v);
    return m;
}

ModelSpec cylinder(ModelKind kind, int J, int n) {
    ModelSpec m;
    m.kind = kind;
    m.potential = SechSquaredWell{1.19};
    m.angular_cutoff = J;
    m.angular_index = n;
    return m;
}

double sech_residual(int n) {
    const Grid1D g{-20.0, 20.0, n};
    const auto op = build_operator(line(SechPair{20, -24}), g, Dirichlet{});
    Eigen::VectorXd phi(n);
    for (int i = 0; i < n; ++i) phi[i] = 1.0 / std::cosh(g.x(i));
    const Eigen::VectorXd r = op.apply_real(phi) - phi;
    // the Dirichlet ghosts cut sech(20)/h^4 at the ends, so look at the interior
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        if (std::abs(g.x(i)) <= 15.0) worst = std::max(worst, std::abs(r[i]));
    return worst;
}

}  // namespace

TEST_CASE("grid validation") {
    CHECK_THROWS_AS(Grid1D({1.0, -1.0, 100}).validate(), Error);
    CHECK_THROWS_AS(Grid1D({-1.0, 1.0, 15}).validate(), Error);
    const Grid1D g{-2.0, 2.0, 401};
    CHECK(g.spacing() == doctest::Approx(0.01));
    CHECK(g.symmetric());
    CHECK(g.nearest(0.0) == 200);
}

TEST_CASE("sech pair samples") {
    const Grid1D g{-20.0, 20.0, 2001};
    const Eigen::VectorXd v = sample_potential(SechPair{20, -24}, g);
    CHECK(v[1000] == doctest::Approx(-4.0).epsilon(1e-15));
    for (int i = 0; i < g.n_points; i += 37) {
        const double s = 1.0 / std::cosh(g.x(i));
        CHECK(std::abs(v[i] - (20 * s * s - 24 * s * s * s * s)) <= 1e-14);
    }
    CHECK(edge_decay_bound(v, g, 1.0) < 1e-12);
}

TEST_CASE("dirichlet matrices are exactly symmetric") {
    const Grid1D g{-20.0, 20.0, 401};
    auto op = build_operator(line(SechPair{}), g, Dirichlet{});
    CHECK(op.asymmetry() == 0.0);
    const auto cyl = build_operator(cylinder(ModelKind::CylinderFull, 3, 1), g, Dirichlet{});
    CHECK(cyl.asymmetry() == 0.0);
    PerturbationBasis b = make_bump_basis(cyl.layout, g, {{0.5, 1.0, 1, false}, {-1.0, 0.7, 2, true}});
    const auto pert = apply_perturbation(cyl, b, Eigen::Vector2d(0.3, -0.2));
    CHECK(pert.asymmetry() == 0.0);
    CHECK(pert.kind == OperatorKind::HplusW);
}

TEST_CASE("stencil is exact on x^4 and on plane waves") {
    const Grid1D g{-1.0, 1.0, 201};
    const auto op = build_operator(line(Tabulated{std::vector<double>(201, 0.0)}), g, Dirichlet{});
    Eigen::VectorXd u(201), w(201);
    const double h = g.spacing(), k = 3.7;
    for (int i = 0; i < 201; ++i) {
        u[i] = std::pow(g.x(i), 4);
        w[i] = std::cos(k * g.x(i));
    }
    const Eigen::VectorXd d4 = op.apply_real(u), dw = op.apply_real(w);
    const double symbol = 16.0 / std::pow(h, 4) * std::pow(std::sin(k * h / 2), 4);
    for (int i = 2; i < 199; ++i) {
        CHECK(std::abs(d4[i] - 24.0) < 1e-6);
        CHECK(std::abs(dw[i] - symbol * w[i]) < 1e-6);
    }
}

TEST_CASE("free biharmonic spectrum bounds") {
    const Grid1D g{-1.0, 1.0, 64};
    const auto op = build_operator(line(Tabulated{std::vector<double>(64, 0.0)}), g, Dirichlet{});
    Eigen::MatrixXd dense = Eigen::MatrixXd(op.matrix.real());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
    const double top = 16.0 / std::pow(g.spacing(), 4);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    CHECK(es.eigenvalues().maxCoeff() < top);
}

TEST_CASE("sech is an approximate eigenvector with second-order residual") {
    const double r1 = sech_residual(1001), r2 = sech_residual(2001);
    CHECK(r1 < 5e-2);
    CHECK(r1 / r2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("cylinder blocks") {
    const Grid1D g{-10.0, 10.0, 101};
    const auto op = build_operator(cylinder(ModelKind::CylinderEvenSector, 3, 1), g, Dirichlet{});
    REQUIRE(op.layout.n_modes() == 4);
    const Eigen::MatrixXd dense = Eigen::MatrixXd(op.matrix.real());
    for (int j = 0; j < 4; ++j)
        for (int a = 0; a < 101; ++a)
            for (int b = 0; b < 101; ++b) {
                const double blk = dense(op.layout.index(a, j), op.layout.index(b, j));
                const double base = dense(op.layout.index(a, 0), op.layout.index(b, 0));
                CHECK(blk == doctest::Approx(base + (a == b ? j * j : 0.0)));
                if (j > 0) CHECK(dense(op.layout.index(a, j), op.layout.index(b, 0)) == 0.0);
            }
    const auto full = build_operator(cylinder(ModelKind::CylinderFull, 3, 1), g, Dirichlet{});
    CHECK(full.layout.n_modes() == 7);
}

TEST_CASE("mode transform round trip") {
    const Grid1D g{-10.0, 10.0, 51};
    const ModeLayout L(cylinder(ModelKind::CylinderFull, 3, 2), g);
    Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(L.size(), -1.0, 2.0);
    CHECK((L.from_nodal(L.to_nodal(c)) - c).norm() < 1e-12);
    const Eigen::MatrixXd tt = L.transform().transpose() * L.transform();
    CHECK((tt - Eigen::MatrixXd::Identity(7, 7)).norm() < 1e-13);
}

TEST_CASE("apply_perturbation") {
    const Grid1D g{-5.0, 5.0, 101};
    const auto op = build_operator(line(SechPair{}), g, Dirichlet{});
    auto b = make_bump_basis(op.layout, g, {{-2.0, 0.3}, {2.0, 0.3}});
    const auto same = apply_perturbation(op, b, Eigen::Vector2d::Zero());
    CHECK((Eigen::MatrixXcd(same.matrix) - Eigen::MatrixXcd(op.matrix)).norm() == 0.0);

    const auto one = apply_perturbation(op, b, Eigen::Vector2d(0.7, 0.0));
    const auto both = apply_perturbation(op, b, Eigen::Vector2d(1.0, 1.0));
    for (int i = 0; i < 101; ++i) {
        const double w0 = b.elements[0][i].real(), w1 = b.elements[1][i].real();
        const double tol = 1e-15 * std::abs(op.matrix.coeff(i, i));
        CHECK(one.perturbation[i] == 0.7 * w0);
        CHECK(both.perturbation[i] == w0 + w1);
        CHECK(std::abs(one.matrix.coeff(i, i) - op.matrix.coeff(i, i) - 0.7 * w0) <= tol);
        CHECK(std::abs(both.matrix.coeff(i, i) - op.matrix.coeff(i, i) - (w0 + w1)) <= tol);
    }
    CHECK_THROWS_AS(apply_perturbation(op, b, Eigen::Vector3d::Zero()), Error);
    b.elements[1][50] = {0.0, 1.0};
    CHECK_FALSE(b.is_real());
    CHECK_THROWS_AS(apply_perturbation(op, b, Eigen::Vector2d(1.0, 1.0)), Error);
}

TEST_CASE("radiation closure rejects bad energies") {
    const Grid1D g{-10.0, 10.0, 101};
    CHECK_THROWS_AS(build_operator(line(SechPair{}), g, Radiation{-1.0}), Error);
    try {
        build_operator(cylinder(ModelKind::CylinderEvenSector, 2, 1), g, Radiation{1.0});
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ThresholdEnergy);
    }
    const auto op = build_operator(line(SechPair{}), g, Radiation{1.0, Branch::Plus});
    const auto roots = exterior_roots(op, op.bc);
    CHECK(std::abs(std::abs(roots[0]) - 1.0) < 1e-14);
    CHECK(roots[0].imag() > 0.0);
    CHECK(std::abs(roots[1]) < 1.0);
}

TEST_CASE("embedding calibration shift is second order") {
    const auto c1 = calibrate_embedding(SechPair{}, Grid1D{-20.0, 20.0, 1001}, 1.0);
    const auto c2 = calibrate_embedding(SechPair{}, Grid1D{-20.0, 20.0, 2001}, 1.0);
    CHECK(std::abs(c1.lambda - 1.0) < 1e-2);
    CHECK(c1.amplitude_shift / c2.amplitude_shift == doctest::Approx(4.0).epsilon(0.05));
    CHECK((c1.lambda - 1.0) / (c2.lambda - 1.0) == doctest::Approx(4.0).epsilon(0.05));
}
