#include <cmath>
#include <random>

#include "doctest.h"
#include "embedlab/error.hpp"
#include "embedlab/fermi.hpp"

using namespace embedlab;

namespace {

struct Line {
    Grid1D grid{-40.0, 40.0, 2001};
    DiscreteOperator op;
    SpectralData spec;
    SystemContext ctx;
    FermiFrame frame;
    Line() {
        ModelSpec m;
        m.potential = calibrate_embedding(SechPair{}, grid, 1.0).potential;
        op = build_operator(m, grid, Dirichlet{});
        spec = find_embedded_eigenpairs(op, {0.5, 1.5});
        ctx = make_context(op, spec, {spec.lambda0 - 0.2, spec.lambda0 + 0.2});
        const ResolventPair pair(ctx.hbar, spec.lambda0, ctx.resolvent);
        frame = build_frame(ctx, pair, gaussian_probes(op.layout, grid, 8, 7), 2);
    }
};

const Line& line() {
    static const Line l;
    return l;
}

PerturbationBasis six_bumps(const Line& l) {
    return make_bump_basis(l.op.layout, l.grid,
                           {{-2.1, 0.6}, {-1.2, 0.8}, {-0.3, 0.5}, {0.6, 0.9}, {1.5, 0.7}, {2.4, 0.6}});
}

}  // namespace

TEST_CASE("free frame lies in the span of the discrete plane waves") {
    const Grid1D g{-10.0, 10.0, 2001};
    ModelSpec m;
    m.potential = Tabulated{std::vector<double>(g.n_points, 0.0)};
    SystemContext ctx;
    ctx.hbar = build_operator(m, g, Dirichlet{});
    ctx.window = {0.5, 1.5};
    const ResolventPair pair(ctx.hbar, 1.0, ctx.resolvent);
    const Eigen::MatrixXd probes = gaussian_probes(ctx.hbar.layout, g, 6, 3);
    const FermiFrame fr = build_frame(ctx, pair, probes, 2);
    CHECK(fr.m == 2);

    // 2 - 2 cos(mu h) = h^2 for the lattice symbol at energy 1
    const double h = g.spacing();
    const double mu = std::acos(1.0 - 0.5 * h * h) / h;
    Eigen::MatrixXd waves(g.n_points, 2);
    for (int i = 0; i < g.n_points; ++i) {
        waves(i, 0) = std::cos(mu * g.x(i));
        waves(i, 1) = std::sin(mu * g.x(i));
    }
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(waves);
    const Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(g.n_points, 2);
    for (int j = 0; j < 2; ++j) {
        const Eigen::VectorXd f = fr.densities.col(j);
        const Eigen::VectorXd rest = f - basis * (basis.transpose() * f);
        CHECK(rest.norm() / f.norm() < 1e-8);
    }

    // every probe image is reproduced by the frame
    const Eigen::MatrixXcd images = density_many(pair, probes.cast<cplx>());
    const Eigen::HouseholderQR<Eigen::MatrixXd> fq(fr.densities);
    const Eigen::MatrixXd fb = fq.householderQ() * Eigen::MatrixXd::Identity(g.n_points, 2);
    for (int j = 0; j < images.cols(); ++j) {
        const Eigen::VectorXd f = images.col(j).real();
        CHECK((f - fb * (fb.transpose() * f)).norm() / f.norm() < 1e-8);
    }
}

TEST_CASE("sech frame is real and biorthogonal") {
    const Line& l = line();
    const double h = l.grid.spacing();
    CHECK(l.frame.m == 2);
    CHECK(l.frame.imag_ratio < 1e-10);
    const Eigen::MatrixXd gram = h * l.frame.densities.transpose() * l.frame.duals;
    CHECK((gram - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("dependent probes collapse the frame") {
    const Line& l = line();
    const Eigen::MatrixXd one = gaussian_probes(l.op.layout, l.grid, 1, 5);
    Eigen::MatrixXd probes(one.rows(), 3);
    probes << one, one, 2.0 * one;
    const ResolventPair pair(l.ctx.hbar, l.spec.lambda0, l.ctx.resolvent);
    try {
        build_frame(l.ctx, pair, probes, 2);
        FAIL("expected RankCollapse");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::RankCollapse);
    }
}

TEST_CASE("frame span is stable across probe seeds") {
    const Line& l = line();
    const ResolventPair pair(l.ctx.hbar, l.spec.lambda0, l.ctx.resolvent);
    for (std::uint64_t seed : {11u, 23u, 99u}) {
        const FermiFrame other = build_frame(l.ctx, pair, gaussian_probes(l.op.layout, l.grid, 8, seed), 2);
        CHECK(span_distance(l.frame.densities, other.densities, l.grid.spacing()) < 1e-6);
    }
}

TEST_CASE("lambda(0) is the eigenvalue and the slope is one") {
    const Line& l = line();
    const LambdaSolve s = solve_lambda(l.ctx, Eigen::VectorXd(), l.spec.lambda0 + 0.05);
    CHECK(s.converged);
    CHECK(std::abs(s.a_value - 1.0) <= 1e-12);
    CHECK(std::abs(s.lambda - l.spec.lambda0) < 1e-11);
    CHECK(std::abs(s.derivative - 1.0) < 1e-6);
}

TEST_CASE("lambda(tW) follows the first-order formula") {
    const Line& l = line();
    const double h = l.grid.spacing();
    const double l0 = solve_lambda(l.ctx, Eigen::VectorXd(), l.spec.lambda0).lambda;
    const Eigen::VectorXd phi = l.spec.eigvecs.col(0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> center(-3.0, 3.0), width(0.3, 1.5);
    const double t = 1e-5;
    for (int k = 0; k < 10; ++k) {
        const auto basis = make_bump_basis(l.op.layout, l.grid, {{center(rng), width(rng)}});
        const Eigen::VectorXd w = basis.real_element(0);
        const double first = h * phi.dot(w.cwiseProduct(phi));
        const LambdaSolve s = solve_lambda(l.ctx, basis, Eigen::VectorXd::Constant(1, t), l0);
        CHECK(std::abs((s.lambda - l0) / t - first) < 1e-4 * std::abs(first));
    }
}

TEST_CASE("a far bump barely moves lambda") {
    const Line& l = line();
    const double h = l.grid.spacing();
    const double c = 0.1;
    const auto basis = make_bump_basis(l.op.layout, l.grid, {{15.0, 0.5}});
    const Eigen::VectorXd phi = l.spec.eigvecs.col(0);
    const double bound = c * h * phi.cwiseAbs2().dot(basis.real_element(0).cwiseAbs());
    const LambdaSolve s = solve_lambda(l.ctx, basis, Eigen::VectorXd::Constant(1, c), l.spec.lambda0);
    CHECK(s.converged);
    CHECK(std::abs(s.lambda - l.spec.lambda0) <= 2.0 * bound + 1e-12);
}

TEST_CASE("Fermi map vanishes at zero and stays real") {
    const Line& l = line();
    const auto basis = six_bumps(l);
    const FermiValue zero = fermi_map(l.frame, l.ctx, basis, Eigen::VectorXd::Zero(6));
    CHECK(zero.values.size() == 2);
    CHECK(zero.values.cwiseAbs().maxCoeff() < 1e-10);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1e-3, 1e-3);
    for (int k = 0; k < 3; ++k) {
        Eigen::VectorXd c(6);
        for (auto& v : c) v = u(rng);
        CHECK(fermi_map(l.frame, l.ctx, basis, c).max_imag < 1e-10);
    }
}

TEST_CASE("analytic Jacobian matches finite differences and has full rank") {
    const Line& l = line();
    const auto basis = six_bumps(l);
    const Eigen::MatrixXd j = fermi_jacobian(l.frame, l.ctx, basis);
    const Eigen::MatrixXd fd = fermi_jacobian_fd(l.frame, l.ctx, basis, Eigen::VectorXd::Zero(6));
    REQUIRE(j.rows() == 2);
    REQUIRE(j.cols() == 6);
    CHECK(((j - fd).array() / j.array()).abs().maxCoeff() < 1e-3);
    CHECK(numerical_rank(j, 1e-6) == 2);

    HypothesisInputs in;
    in.basis = &basis;
    in.fermi_jacobian = &j;
    in.expected_rank = 2;
    CHECK(check_hypotheses(l.spec, l.op, in).all_passed());

    const auto single = make_bump_basis(l.op.layout, l.grid, {{0.4, 0.7}});
    const Eigen::MatrixXd j1 = fermi_jacobian(l.frame, l.ctx, single);
    in.basis = &single;
    in.fermi_jacobian = &j1;
    const auto rep = check_hypotheses(l.spec, l.op, in);
    REQUIRE(rep.find("H5.surjectivity") != nullptr);
    CHECK_FALSE(rep.find("H5.surjectivity")->passed);
}

TEST_CASE("zero basis element gives a zero Jacobian column") {
    const Line& l = line();
    PerturbationBasis basis = six_bumps(l);
    basis.elements[2].setZero();
    const Eigen::MatrixXd j = fermi_jacobian(l.frame, l.ctx, basis);
    CHECK(j.col(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("complex basis fails the reality check") {
    const Line& l = line();
    PerturbationBasis basis = six_bumps(l);
    basis.elements[0] *= cplx(0.0, 1.0);
    HypothesisInputs in;
    in.basis = &basis;
    const auto rep = check_hypotheses(l.spec, l.op, in);
    REQUIRE(rep.find("H1.reality") != nullptr);
    CHECK_FALSE(rep.find("H1.reality")->passed);
}

TEST_CASE("degenerate cylinder adds solvability rows") {
    const Grid1D g{-40.0, 40.0, 2001};
    ModelSpec m;
    m.kind = ModelKind::CylinderFull;
    m.potential = SechSquaredWell{1.19};
    m.angular_cutoff = 3;
    m.angular_index = 1;
    const auto op = build_operator(m, g, Dirichlet{});
    const double l0 = 1.0 - 0.49;
    const auto spec = find_embedded_eigenpairs(op, {l0 - 0.2, l0 + 0.2});
    REQUIRE(spec.multiplicity == 2);
    const auto ctx = make_context(op, spec, {spec.lambda0 - 0.2, spec.lambda0 + 0.2});
    const ResolventPair pair(ctx.hbar, spec.lambda0, ctx.resolvent);
    const FermiFrame fr = build_frame(ctx, pair, gaussian_probes(op.layout, g, 8, 7), 2);
    const auto basis = make_bump_basis(op.layout, g,
                                       {{-0.8, 0.7, 1}, {0.5, 0.6, 1}, {0.0, 0.8, 2, true}, {0.7, 0.5, 2, true},
                                        {-0.4, 0.9, 0}});

    const FermiValue zero = fermi_map(fr, ctx, basis, Eigen::VectorXd::Zero(5));
    CHECK(zero.values.size() == 3);
    CHECK(zero.density_rows == 2);
    CHECK(zero.values.cwiseAbs().maxCoeff() < 1e-10);

    const Eigen::MatrixXd j = fermi_jacobian(fr, ctx, basis);
    REQUIRE(j.rows() == 3);
    CHECK(numerical_rank(j, 1e-6) == 3);
    const Eigen::MatrixXd fd = fermi_jacobian_fd(fr, ctx, basis, Eigen::VectorXd::Zero(5));
    for (int r = 0; r < j.rows(); ++r)
        for (int c = 0; c < j.cols(); ++c) {
            const double scale = j.cwiseAbs().maxCoeff();
            if (std::abs(j(r, c)) > 1e-6 * scale)
                CHECK(std::abs(j(r, c) - fd(r, c)) < 1e-3 * std::abs(j(r, c)));
            else
                CHECK(std::abs(fd(r, c)) < 1e-6 * scale);
        }
}
