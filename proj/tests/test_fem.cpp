#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "plate_nc/fdm.hpp"
#include "plate_nc/fem.hpp"
#include "plate_nc/spectral.hpp"

using namespace plate_nc;
using namespace plate_nc::fem;

namespace {

const auto kZero = [](double, double) { return 0.0; };
const auto kW0 = [](double x, double y) { return 1.5 * std::sin(2 * x) * std::sin(2 * y); };

std::shared_ptr<const FemSpace> structured(int n, double a = M_PI) {
    return std::make_shared<const FemSpace>(build_structured_mesh(n, a));
}

// Reference triangle (0,0), (1,0), (0,1).
TriMesh reference_triangle() {
    TriMesh m;
    m.vertices = {{0, 0}, {1, 0}, {0, 1}};
    m.boundary = {true, true, true};
    m.triangles = {{0, 1, 2}};
    return m;
}

double lowest_generalized_eigenvalue(const FemSpace& s) {
    const Eigen::MatrixXd k(s.stiffness().matrix()), m(s.mass().matrix());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(k, m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace

TEST(StructuredMesh, Counts) {
    const auto mesh = build_structured_mesh(4, M_PI);
    EXPECT_EQ(mesh.vertices.size(), 36u);
    EXPECT_EQ(mesh.triangles.size(), 50u);
    EXPECT_EQ(mesh.interior_count(), 16u);
    EXPECT_THROW(build_structured_mesh(1, M_PI), ConfigError);
    EXPECT_THROW(build_structured_mesh(4, 0.0), ConfigError);
}

TEST(StructuredMesh, AreasSumToDomainArea) {
    const auto mesh = build_structured_mesh(7, 2.0);
    double total = 0.0;
    for (const auto& t : mesh.triangles) {
        EXPECT_GT(mesh.signed_area(t), 0.0);
        total += mesh.signed_area(t);
    }
    EXPECT_NEAR(total, 4.0, 1e-12);
}

TEST(StructuredMesh, SatisfiesFamilyBounds) {
    for (int n : {2, 3, 8, 16, 57}) {
        const auto audit = audit_mesh(build_structured_mesh(n, M_PI));
        EXPECT_TRUE(audit.positive_areas);
        EXPECT_TRUE(audit.conforming);
        EXPECT_LE(audit.max_valence, 6);
        EXPECT_TRUE(audit.satisfies(MeshFamilyBounds::structured(M_PI))) << "n = " << n;
    }
}

TEST(MeshAudit, DetectsInvertedAndHangingEdges) {
    TriMesh m = reference_triangle();
    m.triangles[0] = {0, 2, 1};
    EXPECT_FALSE(audit_mesh(m).positive_areas);

    TriMesh h = reference_triangle();
    h.boundary[2] = false;  // the hypotenuse is used once but is not a boundary edge
    EXPECT_FALSE(audit_mesh(h).conforming);
}

TEST(ElementMatrices, ReferenceTriangle) {
    const TriMesh m = reference_triangle();
    const ElementMatrix me = element_mass(m, m.triangles[0]);
    const ElementMatrix ke = element_stiffness(m, m.triangles[0]);
    EXPECT_NEAR(me(0, 0), 1.0 / 12, 1e-15);
    EXPECT_NEAR(me(0, 1), 1.0 / 24, 1e-15);
    EXPECT_NEAR(me.sum(), 0.5, 1e-15);  // integral of 1
    Eigen::Matrix3d expected;
    expected << 1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5;
    EXPECT_LT((ke - expected).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT(ke.rowwise().sum().cwiseAbs().maxCoeff(), 1e-15);  // constants are in the kernel
}

TEST(ElementMatrices, StiffnessAnnihilatesConstantsOnAnyTriangle) {
    TriMesh m;
    m.vertices = {{0.3, 0.1}, {2.0, 0.4}, {0.7, 1.9}};
    m.boundary = {true, true, true};
    m.triangles = {{0, 1, 2}};
    const ElementMatrix ke = element_stiffness(m, m.triangles[0]);
    EXPECT_LT(ke.rowwise().sum().cwiseAbs().maxCoeff(), 1e-14);
    // Energy of the linear function x: |grad x|^2 * area.
    const Eigen::Vector3d x(0.3, 2.0, 0.7);
    EXPECT_NEAR(x.dot(ke * x), m.signed_area(m.triangles[0]), 1e-13);
}

TEST(ElementMatrices, DegenerateTriangleThrows) {
    TriMesh m;
    m.vertices = {{0, 0}, {1, 1}, {2, 2}};
    m.boundary = {true, true, true};
    m.triangles = {{0, 1, 2}};
    EXPECT_THROW(element_mass(m, m.triangles[0]), std::invalid_argument);
    EXPECT_THROW(element_stiffness(m, m.triangles[0]), std::invalid_argument);
}

TEST(Assembly, MassRowSumsAreSupportAreaOverThree) {
    const auto mesh = build_structured_mesh(5, M_PI);
    const Eigen::MatrixXd m(assemble_mass_all_vertices(mesh));
    std::vector<double> support(mesh.vertices.size(), 0.0);
    for (const auto& t : mesh.triangles)
        for (int v : t) support[v] += mesh.signed_area(t);
    for (std::size_t k = 0; k < support.size(); ++k) EXPECT_NEAR(m.row(k).sum(), support[k] / 3, 1e-13);
    EXPECT_NEAR(m.sum(), M_PI * M_PI, 1e-12);
}

TEST(Assembly, FullStiffnessHasConstantKernel) {
    const Eigen::MatrixXd s(assemble_stiffness_all_vertices(build_structured_mesh(4, 1.0)));
    EXPECT_LT((s * Eigen::VectorXd::Ones(s.cols())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Assembly, StructuredStiffnessIsFivePointStencil) {
    for (int n : {2, 5, 9}) {
        const fdm::FdGrid g(n, M_PI);
        const FemSpace space(build_structured_mesh(n, M_PI));
        const Eigen::MatrixXd s(space.stiffness().matrix());
        const Eigen::MatrixXd d(fdm::build_dn(g).matrix());
        EXPECT_LT((s - g.h * g.h * d).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Assembly, MassAndStiffnessAreSpd) {
    const FemSpace space(build_structured_mesh(6, M_PI));
    const Eigen::MatrixXd m(space.mass().matrix()), s(space.stiffness().matrix());
    EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(m).info(), Eigen::Success);
    EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(s).info(), Eigen::Success);
    EXPECT_EQ(space.dim(), 36);
}

TEST(FemSpace, LowestEigenvalueDecreasesTowardsTwo) {
    double prev = INFINITY;
    for (int n : {4, 8, 16}) {
        const double l = lowest_generalized_eigenvalue(FemSpace(build_structured_mesh(n, M_PI)));
        EXPECT_GT(l, 2.0);  // conforming: Rayleigh quotients bound from above
        EXPECT_LT(l, prev);
        prev = l;
    }
    EXPECT_LT(prev - 2.0, 0.05);
}

TEST(FemSpace, RayleighQuotientByInversePower) {
    const FemSpace space(build_structured_mesh(20, M_PI));
    SpdSolver solve_s(space.stiffness());
    Vector x = Vector::Ones(space.dim());
    double rq = 0.0;
    for (int it = 0; it < 60; ++it) {
        x = solve_s.solve(space.mass() * x);
        x /= std::sqrt(x.dot(space.mass() * x));
        rq = x.dot(space.stiffness() * x);
    }
    EXPECT_NEAR(rq, 2.0, 0.02);
    EXPECT_GT(rq, 2.0);
}

TEST(FemSpace, InterpolantNormApproachesContinuousNorm) {
    auto f = [](double x, double y) { return std::sin(x) * std::sin(y); };
    double prev = INFINITY;
    for (int n : {8, 16, 32}) {
        const FemSpace space(build_structured_mesh(n, M_PI));
        const Vector c = interpolate_nodal(f, space);
        const double err = std::abs(std::sqrt(c.dot(space.mass() * c)) - M_PI / 2);
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 5e-3);
}

TEST(FemSpace, RejectsMeshWithoutInteriorNodes) {
    EXPECT_THROW(FemSpace{reference_triangle()}, ConfigError);
}

TEST(MeshIo, RoundTrip) {
    const auto mesh = build_structured_mesh(3, 1.5);
    std::stringstream ss;
    write_mesh(ss, mesh);
    const auto back = read_mesh(ss);
    ASSERT_EQ(back.vertices.size(), mesh.vertices.size());
    EXPECT_EQ(back.triangles, mesh.triangles);
    EXPECT_EQ(back.boundary, mesh.boundary);
    for (std::size_t k = 0; k < mesh.vertices.size(); ++k) EXPECT_EQ(back.vertices[k], mesh.vertices[k]);
}

TEST(MeshIo, CommentsAndClockwiseTriangles) {
    std::istringstream in(
        "# square with one interior node\n"
        "5 4\n0 0 1\n1 0 1\n1 1 1\n0 1 1\n0.5 0.5 0\n\n"
        "0 4 1\n1 2 4\n2 3 4\n3 0 4\n");
    const auto mesh = read_mesh(in);
    for (const auto& t : mesh.triangles) EXPECT_GT(mesh.signed_area(t), 0.0);
    const FemSpace space(mesh);
    EXPECT_EQ(space.dim(), 1);
    EXPECT_NEAR(space.stiffness().coeff(0, 0), 4.0, 1e-14);
    EXPECT_NEAR(space.mass().coeff(0, 0), 4 * (0.25 / 6), 1e-14);
}

TEST(MeshIo, Errors) {
    std::istringstream empty("");
    EXPECT_THROW(read_mesh(empty), ConfigError);
    std::istringstream bad_count("3 1\n0 0 1\n1 0 1\n");
    EXPECT_THROW(read_mesh(bad_count), ConfigError);
    std::istringstream bad_index("3 1\n0 0 1\n1 0 1\n0 1 1\n0 1 7\n");
    EXPECT_THROW(read_mesh(bad_index), ConfigError);
    std::istringstream bad_vertex("3 1\n0 0 1\n1 x 1\n0 1 1\n0 1 2\n");
    EXPECT_THROW(read_mesh(bad_vertex), ConfigError);
}

TEST(FemStep, ZeroIsAFixedPoint) {
    const auto space = structured(4);
    EXPECT_EQ(energy(fem_homogeneous_step(StatePair::zero(space->dim()), 0.2, 2.5, space)), 0.0);
}

TEST(FemStep, SatisfiesCoefficientEquations) {
    const auto space = structured(6);
    const FemScheme s(space, 2.5, 0.1);
    std::mt19937 rng(9);
    std::normal_distribution<double> nd;
    StatePair x = StatePair::zero(space->dim());
    Vector u(space->dim());
    for (Eigen::Index k = 0; k < space->dim(); ++k) x.v[k] = nd(rng), x.w[k] = nd(rng), u[k] = nd(rng);
    const auto y = s.controlled_step(x, u);
    const auto& M = space->mass();
    const auto& S = space->stiffness();
    EXPECT_LT((M * y.v - 0.1 * (S * y.w) - M * x.v).norm(), 1e-10 * (M * x.v).norm());
    EXPECT_LT((0.1 * (S * y.v) + M * y.w + 0.25 * (S * y.w) - M * x.w - 0.1 * (M * u)).norm(),
              1e-10 * (M * x.w).norm());
}

TEST(FemStep, EnergyDoesNotIncrease) {
    const auto space = structured(7);
    std::mt19937 rng(17);
    std::normal_distribution<double> nd;
    for (double dt : {0.01, 0.1, 0.3}) {
        const FemScheme s(space, 2.5, dt);
        StatePair x = StatePair::zero(space->dim());
        for (Eigen::Index k = 0; k < space->dim(); ++k) x.v[k] = nd(rng), x.w[k] = nd(rng);
        EXPECT_LE(energy(s.homogeneous_step(x), s.norm()), energy(x, s.norm()));
    }
}

TEST(FemStep, ZeroControlEqualsHomogeneousStep) {
    const auto space = structured(4);
    const FemScheme s(space, 2.5, 0.2);
    StatePair x{Vector::LinSpaced(space->dim(), 0, 1), Vector::LinSpaced(space->dim(), 1, -1)};
    const auto a = s.homogeneous_step(x);
    const auto b = s.controlled_step(x, Vector::Zero(space->dim()));
    EXPECT_EQ((a.v - b.v).norm(), 0.0);
    EXPECT_EQ((a.w - b.w).norm(), 0.0);
    EXPECT_THROW(s.homogeneous_step(StatePair::zero(3)), std::invalid_argument);
}

TEST(FemStep, HomogeneousRunConvergesToExactSolution) {
    const auto space = structured(32);
    auto error_at_one = [&](double dt) {
        const FemScheme s(space, 2.5, dt);
        StatePair x{interpolate_nodal(kZero, *space), interpolate_nodal(kW0, *space)};
        for (int j = 0; j < static_cast<int>(std::llround(1.0 / dt)); ++j) x = s.homogeneous_step(x);
        double err = 0.0;
        for (Eigen::Index i = 0; i < space->dim(); ++i) {
            const auto& p = space->node(i);
            const auto [v, w] = spectral::exact_test_solution(p[0], p[1], 1.0);
            err = std::max({err, std::abs(x.v[i] - v), std::abs(x.w[i] - w)});
        }
        return err;
    };
    const double e1 = error_at_one(0.04), e2 = error_at_one(0.02);
    EXPECT_LT(e2, e1);
    EXPECT_GT(e1 / e2, 1.5);
    EXPECT_LT(e2, 1e-2);
}

TEST(FemControl, ResidualOfMuOnePrime) {
    const auto space = structured(8);
    const FemScheme s(space, 2.5, 0.1);
    const Vector g = Vector::LinSpaced(space->dim(), -1, 2);
    const Vector mu = s.mu_one_prime(g);
    EXPECT_LT((space->stiffness() * mu + space->mass() * g).norm(), 1e-10 * (space->mass() * g).norm());
}

TEST(FemControl, SingleModeControlIsNearlyCollinear) {
    auto misalignment = [](int n) {
        const auto space = structured(n);
        const FemScheme s(space, 2.5, 0.1);
        const Vector phi = interpolate_nodal([](double x, double y) { return std::sin(x) * std::sin(y); }, *space);
        const StatePair h1 = s.homogeneous_step({Vector::Zero(space->dim()), phi});
        const StatePair h2 = s.homogeneous_step(h1);
        const Vector u = s.control_at_step(h2.v, h1.v, h1.w, 1.0, 2.0);
        const Vector mphi = space->mass() * phi;
        const Vector r = u - (u.dot(mphi) / phi.dot(mphi)) * phi;
        return std::sqrt(r.dot(space->mass() * r) / u.dot(space->mass() * u));
    };
    const double m8 = misalignment(8), m16 = misalignment(16);
    EXPECT_LT(m16, m8);
    EXPECT_LT(m16, 0.05);
}

TEST(FemRun, ZeroDataAndLinearity) {
    const PlateParams p{2.5, M_PI, 1.0, 10, 6};
    const auto zero = run_fem_null_control(p, kZero, kZero);
    EXPECT_EQ(zero.report.control_norm, 0.0);
    const auto one = run_fem_null_control(p, kZero, kW0);
    const auto two = run_fem_null_control(p, kZero, [](double x, double y) { return 2 * kW0(x, y); });
    EXPECT_NEAR(two.report.control_norm, 2 * one.report.control_norm, 1e-12 * one.report.control_norm);
    EXPECT_NEAR(two.report.terminal_energy, 4 * one.report.terminal_energy, 1e-10 * one.report.terminal_energy);
}

TEST(FemRun, ControlReducesTerminalEnergy) {
    const auto space = structured(12);
    const PlateParams p{2.5, M_PI, 2.0, 10, 12};
    const auto run = run_fem_null_control(p, kZero, kW0, space);
    const FemScheme s(space, 2.5, 0.2);
    StatePair x{interpolate_nodal(kZero, *space), interpolate_nodal(kW0, *space)};
    for (int j = 0; j < 10; ++j) x = s.homogeneous_step(x);
    EXPECT_LT(run.report.terminal_energy, energy(x, s.norm()));
    EXPECT_TRUE(run.warnings.empty());
}

TEST(FemRun, LargeStepWarns) {
    const auto run = run_fem_null_control({2.5, M_PI, 2.0, 4, 4}, kZero, kW0);
    EXPECT_FALSE(run.warnings.empty());
}

TEST(FemKalman, IdentityAndRank) {
    for (int n = 2; n <= 8; ++n) {
        const auto d = kalman_check_fem(FemSpace(build_structured_mesh(n, M_PI)), 2.5);
        EXPECT_TRUE(d.passes()) << "n = " << n << " error " << d.identity_error;
    }
}
