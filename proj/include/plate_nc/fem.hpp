/**
 * @file fem.hpp
 * @brief P1 finite elements on triangulations of the square: meshes,
 *        exact mass/stiffness assembly over interior nodes, implicit Euler
 *        stepping of the variational system and the steering control.
 */
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plate_nc/control.hpp"
#include "plate_nc/core.hpp"
#include "plate_nc/linalg.hpp"
#include "plate_nc/null_control.hpp"

namespace plate_nc::fem {

using Field = std::function<double(double, double)>;
using Point = std::array<double, 2>;
using Triangle = std::array<int, 3>;

struct TriMesh {
    std::vector<Point> vertices;
    std::vector<Triangle> triangles;
    std::vector<bool> boundary;

    std::size_t interior_count() const {
        std::size_t c = 0;
        for (bool b : boundary) c += b ? 0 : 1;
        return c;
    }

    double signed_area(const Triangle& t) const {
        const auto& p = vertices[t[0]];
        const auto& q = vertices[t[1]];
        const auto& r = vertices[t[2]];
        return 0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]));
    }

    double diameter(const Triangle& t) const {
        double d = 0.0;
        for (int a = 0; a < 3; ++a) {
            const auto& p = vertices[t[a]];
            const auto& q = vertices[t[(a + 1) % 3]];
            d = std::max(d, std::hypot(q[0] - p[0], q[1] - p[1]));
        }
        return d;
    }
};

/// Uniform (n+2) x (n+2) vertex lattice on (0,a)^2, each cell cut along
/// its lower-left to upper-right diagonal into two right triangles.
inline TriMesh build_structured_mesh(int n, double a) {
    if (n < 2) throw ConfigError("build_structured_mesh: n must be >= 2");
    if (!(a > 0.0)) throw ConfigError("build_structured_mesh: side must be positive");
    const int np = n + 2;
    const double H = a / (n + 1);
    TriMesh mesh;
    mesh.vertices.reserve(static_cast<std::size_t>(np * np));
    mesh.boundary.reserve(static_cast<std::size_t>(np * np));
    for (int j = 0; j < np; ++j) {
        for (int i = 0; i < np; ++i) {
            // exact endpoints so boundary nodes sit on the boundary
            const double x = (i == np - 1) ? a : i * H;
            const double y = (j == np - 1) ? a : j * H;
            mesh.vertices.push_back({x, y});
            mesh.boundary.push_back(i == 0 || j == 0 || i == np - 1 || j == np - 1);
        }
    }
    auto id = [np](int i, int j) { return j * np + i; };
    mesh.triangles.reserve(static_cast<std::size_t>(2 * (n + 1) * (n + 1)));
    for (int j = 0; j + 1 < np; ++j) {
        for (int i = 0; i + 1 < np; ++i) {
            mesh.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    return mesh;
}

/// Text format:
///     <num_vertices> <num_triangles>
///     x y boundary_flag        (num_vertices lines)
///     i j k                    (num_triangles lines, zero-based)
/// Blank lines and lines starting with '#' are ignored.
inline TriMesh read_mesh(std::istream& in) {
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        const auto p = line.find_first_not_of(" \t\r");
        if (p == std::string::npos || line[p] == '#') continue;
        lines.push_back(line);
    }
    if (lines.empty()) throw ConfigError("read_mesh: empty input");
    std::size_t nv = 0, nt = 0;
    {
        std::istringstream hs(lines[0]);
        if (!(hs >> nv >> nt)) throw ConfigError("read_mesh: bad header");
    }
    if (lines.size() != 1 + nv + nt) throw ConfigError("read_mesh: line count does not match header");
    TriMesh mesh;
    for (std::size_t k = 0; k < nv; ++k) {
        std::istringstream ls(lines[1 + k]);
        double x, y;
        int flag;
        if (!(ls >> x >> y >> flag)) throw ConfigError("read_mesh: bad vertex line " + std::to_string(k));
        mesh.vertices.push_back({x, y});
        mesh.boundary.push_back(flag != 0);
    }
    for (std::size_t k = 0; k < nt; ++k) {
        std::istringstream ls(lines[1 + nv + k]);
        Triangle t;
        if (!(ls >> t[0] >> t[1] >> t[2])) throw ConfigError("read_mesh: bad triangle line " + std::to_string(k));
        for (int v : t)
            if (v < 0 || static_cast<std::size_t>(v) >= nv)
                throw ConfigError("read_mesh: vertex index out of range");
        // store counterclockwise
        if (mesh.signed_area(t) < 0.0) std::swap(t[1], t[2]);
        mesh.triangles.push_back(t);
    }
    return mesh;
}

inline void write_mesh(std::ostream& out, const TriMesh& mesh) {
    out << mesh.vertices.size() << ' ' << mesh.triangles.size() << '\n';
    out.precision(17);
    for (std::size_t k = 0; k < mesh.vertices.size(); ++k)
        out << mesh.vertices[k][0] << ' ' << mesh.vertices[k][1] << ' ' << (mesh.boundary[k] ? 1 : 0) << '\n';
    for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

/// Constants of the mesh-family assumptions: valence <= c0,
/// c1/N <= area <= c2/N, c3/sqrt(N) <= diam <= c4/sqrt(N).
struct MeshFamilyBounds {
    int c0;
    double c1, c2, c3, c4;

    /// Constants that hold for build_structured_mesh(n, a) for every n >= 2.
    static MeshFamilyBounds structured(double a) {
        return {6, a * a / 10.0, a * a / 2.0, a / 2.0, std::sqrt(2.0) * a};
    }
};

struct MeshAudit {
    bool positive_areas = true;
    bool conforming = true;
    int max_valence = 0;
    double min_area_times_n = 0.0, max_area_times_n = 0.0;
    double min_diam_times_sqrt_n = 0.0, max_diam_times_sqrt_n = 0.0;

    bool satisfies(const MeshFamilyBounds& b) const {
        return positive_areas && conforming && max_valence <= b.c0 && min_area_times_n >= b.c1 &&
               max_area_times_n <= b.c2 && min_diam_times_sqrt_n >= b.c3 &&
               max_diam_times_sqrt_n <= b.c4;
    }
};

/// Positive orientation, edge-based conformity (every edge shared by at
/// most two triangles, edges used once lie between boundary vertices) and
/// the scaled area/diameter/valence extremes, with N = interior nodes.
inline MeshAudit audit_mesh(const TriMesh& mesh) {
    MeshAudit out;
    const double n = static_cast<double>(mesh.interior_count());
    std::vector<int> valence(mesh.vertices.size(), 0);
    std::map<std::pair<int, int>, int> edges;
    double amin = INFINITY, amax = 0.0, dmin = INFINITY, dmax = 0.0;
    for (const auto& t : mesh.triangles) {
        const double area = mesh.signed_area(t);
        if (!(area > 0.0)) out.positive_areas = false;
        amin = std::min(amin, area);
        amax = std::max(amax, area);
        const double d = mesh.diameter(t);
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
        for (int a = 0; a < 3; ++a) {
            ++valence[t[a]];
            const int p = t[a], q = t[(a + 1) % 3];
            ++edges[{std::min(p, q), std::max(p, q)}];
        }
    }
    for (const auto& [e, count] : edges) {
        if (count > 2) out.conforming = false;
        if (count == 1 && !(mesh.boundary[e.first] && mesh.boundary[e.second])) out.conforming = false;
    }
    for (int v : valence) out.max_valence = std::max(out.max_valence, v);
    out.min_area_times_n = amin * n;
    out.max_area_times_n = amax * n;
    out.min_diam_times_sqrt_n = dmin * std::sqrt(n);
    out.max_diam_times_sqrt_n = dmax * std::sqrt(n);
    return out;
}

using ElementMatrix = Eigen::Matrix3d;

/// (area/12) [[2,1,1],[1,2,1],[1,1,2]]
inline ElementMatrix element_mass(const TriMesh& mesh, const Triangle& t) {
    const double area = mesh.signed_area(t);
    if (!(area > 0.0)) throw std::invalid_argument("element_mass: degenerate or inverted triangle");
    ElementMatrix m = ElementMatrix::Constant(1.0);
    m.diagonal().setConstant(2.0);
    return m * (area / 12.0);
}

/// Gradients of the barycentric basis are constant: grad phi_a =
/// (y_b - y_c, x_c - x_b) / (2 area).
inline ElementMatrix element_stiffness(const TriMesh& mesh, const Triangle& t) {
    const double area = mesh.signed_area(t);
    if (!(area > 0.0)) throw std::invalid_argument("element_stiffness: degenerate or inverted triangle");
    Eigen::Matrix<double, 3, 2> grad;
    for (int a = 0; a < 3; ++a) {
        const auto& pb = mesh.vertices[t[(a + 1) % 3]];
        const auto& pc = mesh.vertices[t[(a + 2) % 3]];
        grad(a, 0) = pb[1] - pc[1];
        grad(a, 1) = pc[0] - pb[0];
    }
    return grad * grad.transpose() / (4.0 * area);
}

namespace detail {
template <class ElementFn>
SparseMatrix assemble(const TriMesh& mesh, const std::vector<int>& dof_of_vertex, Eigen::Index ndof,
                      ElementFn&& element) {
    std::vector<Triplet> t;
    t.reserve(9 * mesh.triangles.size());
    for (const auto& tri : mesh.triangles) {
        const ElementMatrix ke = element(mesh, tri);
        for (int a = 0; a < 3; ++a) {
            const int ia = dof_of_vertex[tri[a]];
            if (ia < 0) continue;
            for (int b = 0; b < 3; ++b) {
                const int ib = dof_of_vertex[tri[b]];
                if (ib >= 0) t.emplace_back(ia, ib, ke(a, b));
            }
        }
    }
    SparseMatrix out(ndof, ndof);
    out.setFromTriplets(t.begin(), t.end());
    out.makeCompressed();
    return out;
}
}  // namespace detail

/// Mass matrix over all vertices (boundary rows kept).
inline SparseMatrix assemble_mass_all_vertices(const TriMesh& mesh) {
    std::vector<int> all(mesh.vertices.size());
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = static_cast<int>(k);
    return detail::assemble(mesh, all, static_cast<Eigen::Index>(all.size()), element_mass);
}

inline SparseMatrix assemble_stiffness_all_vertices(const TriMesh& mesh) {
    std::vector<int> all(mesh.vertices.size());
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = static_cast<int>(k);
    return detail::assemble(mesh, all, static_cast<Eigen::Index>(all.size()), element_stiffness);
}

/// V_N spanned by the hat functions of the interior vertices, with its
/// mass and stiffness matrices.
class FemSpace {
public:
    explicit FemSpace(TriMesh mesh) : mesh_(std::move(mesh)) {
        if (mesh_.boundary.size() != mesh_.vertices.size())
            throw std::invalid_argument("FemSpace: boundary flags do not match vertices");
        dof_of_vertex_.assign(mesh_.vertices.size(), -1);
        for (std::size_t k = 0; k < mesh_.vertices.size(); ++k) {
            if (!mesh_.boundary[k]) {
                dof_of_vertex_[k] = static_cast<int>(vertex_of_dof_.size());
                vertex_of_dof_.push_back(static_cast<int>(k));
            }
        }
        if (vertex_of_dof_.empty()) throw ConfigError("FemSpace: mesh has no interior vertices");
        const auto n = dim();
        mass_ = SparseSpdMatrix(detail::assemble(mesh_, dof_of_vertex_, n, element_mass));
        stiffness_ = SparseSpdMatrix(detail::assemble(mesh_, dof_of_vertex_, n, element_stiffness));
    }

    const TriMesh& mesh() const { return mesh_; }
    Eigen::Index dim() const { return static_cast<Eigen::Index>(vertex_of_dof_.size()); }
    const SparseSpdMatrix& mass() const { return mass_; }
    const SparseSpdMatrix& stiffness() const { return stiffness_; }
    const Point& node(Eigen::Index dof) const { return mesh_.vertices[vertex_of_dof_[dof]]; }
    int dof_of_vertex(int v) const { return dof_of_vertex_[v]; }

private:
    TriMesh mesh_;
    std::vector<int> dof_of_vertex_;
    std::vector<int> vertex_of_dof_;
    SparseSpdMatrix mass_;
    SparseSpdMatrix stiffness_;
};

inline const SparseSpdMatrix& assemble_mass(const FemSpace& space) { return space.mass(); }
inline const SparseSpdMatrix& assemble_stiffness(const FemSpace& space) { return space.stiffness(); }

/// Coefficients f(node_i) over interior nodes.
inline Vector interpolate_nodal(const Field& f, const FemSpace& space) {
    Vector out(space.dim());
    for (Eigen::Index i = 0; i < space.dim(); ++i) {
        const auto& p = space.node(i);
        out[i] = f(p[0], p[1]);
    }
    return out;
}

/// Implicit Euler in coefficient form:
///
///     M v+ - dt S w+                 = M v
///     dt S v+ + (M + rho dt S) w+    = M w + dt M u
///
/// and the control u = mu_0 + mu_1' with S mu_1' = -M G.
class FemScheme {
public:
    FemScheme(std::shared_ptr<const FemSpace> space, double rho, double dt)
        : space_(std::move(space)), rho_(rho), dt_(dt) {
        if (!space_) throw std::invalid_argument("FemScheme: null space");
        if (!(dt > 0.0)) throw ConfigError("FemScheme: dt must be positive");
        if (!(rho > 0.0)) throw ConfigError("FemScheme: rho must be positive");
        const auto& m = space_->mass().matrix();
        const auto& s = space_->stiffness().matrix();
        step_ = std::make_shared<BlockSolver2x2>(m, SparseMatrix(-dt * s), SparseMatrix(dt * s),
                                                 SparseMatrix(m + rho * dt * s));
        stiffness_solver_ = std::make_shared<SpdSolver>(space_->stiffness());
    }

    const FemSpace& space() const { return *space_; }
    const BlockSolver2x2& step_solver() const { return *step_; }
    Eigen::Index dim() const { return space_->dim(); }
    double dt() const { return dt_; }
    double rho() const { return rho_; }

    NormWeight norm() const {
        auto space = space_;
        return {[space](const Vector& x) -> Vector { return space->mass() * x; }, dim()};
    }

    StatePair homogeneous_step(const StatePair& s) const {
        check(s);
        const auto& m = space_->mass();
        auto [v, w] = step_->solve(m * s.v, m * s.w);
        return {std::move(v), std::move(w)};
    }

    StatePair controlled_step(const StatePair& s, const Vector& u) const {
        check(s);
        if (u.size() != dim()) throw std::invalid_argument("controlled_step: control has wrong length");
        const auto& m = space_->mass();
        auto [v, w] = step_->solve(m * s.v, m * (s.w + dt_ * u));
        return {std::move(v), std::move(w)};
    }

    Vector control_at_step(const Vector& vh_next2, const Vector& vh_next, const Vector& wh_next,
                           double t_next, double T) const {
        Vector mu0 = control::mu_zero(vh_next, wh_next, rho_, t_next, T);
        const Vector g = control::g_vector(vh_next2, vh_next, dt_, t_next, T);
        return mu0 - stiffness_solver_->solve(space_->mass() * g);
    }

    /// mu_1' alone, exposed for residual checks.
    Vector mu_one_prime(const Vector& g) const { return -stiffness_solver_->solve(space_->mass() * g); }

private:
    void check(const StatePair& s) const {
        if (s.v.size() != dim() || s.w.size() != dim())
            throw std::invalid_argument("FemScheme: state has wrong dimension");
    }

    std::shared_ptr<const FemSpace> space_;
    double rho_;
    double dt_;
    std::shared_ptr<BlockSolver2x2> step_;
    std::shared_ptr<SpdSolver> stiffness_solver_;
};

inline StatePair fem_homogeneous_step(const StatePair& s, double dt, double rho,
                                      std::shared_ptr<const FemSpace> space) {
    return FemScheme(std::move(space), rho, dt).homogeneous_step(s);
}

inline StatePair fem_controlled_step(const StatePair& s, const Vector& u, double dt, double rho,
                                     std::shared_ptr<const FemSpace> space) {
    return FemScheme(std::move(space), rho, dt).controlled_step(s, u);
}

inline Vector fem_control_at_step(const Vector& vh_next2, const Vector& vh_next,
                                  const Vector& wh_next, double t_next, double dt, double T,
                                  double rho, std::shared_ptr<const FemSpace> space) {
    return FemScheme(std::move(space), rho, dt).control_at_step(vh_next2, vh_next, wh_next, t_next, T);
}

/// Full steering run. Uses `space` when given, otherwise the structured
/// mesh of resolution p.n on (0, p.side)^2.
inline NullControlRun run_fem_null_control(const PlateParams& p, const Field& v0, const Field& w0,
                                           std::shared_ptr<const FemSpace> space = nullptr) {
    p.validate();
    if (!space) space = std::make_shared<const FemSpace>(build_structured_mesh(p.n, p.side));
    const FemScheme scheme(space, p.rho, p.dt());
    auto run = run_null_control(
        scheme, {interpolate_nodal(v0, *space), interpolate_nodal(w0, *space)}, p.T);
    if (!p.dt_below_inverse_rho()) run.warnings.emplace_back("dt >= 1/rho: FEM step solvability not guaranteed");
    return run;
}

struct KalmanDiagnostic {
    double identity_error = 0.0;
    Eigen::Index rank = 0;
    Eigen::Index expected_rank = 0;

    bool full_rank() const { return rank == expected_rank; }
    bool passes(double tol = 1e-10) const { return identity_error <= tol && full_rank(); }
};

/// Dense check of K = [[0, M^{-1}S], [I, -rho M^{-1}S]] against
/// K^{-1} = [[rho I, I], [S^{-1}M, 0]].
inline KalmanDiagnostic kalman_check_fem(const FemSpace& space, double rho) {
    const Eigen::Index n = space.dim();
    if (n > 600) throw ConfigError("kalman_check_fem: dense check limited to small spaces");
    const Eigen::MatrixXd m = Eigen::MatrixXd(space.mass().matrix());
    const Eigen::MatrixXd s = Eigen::MatrixXd(space.stiffness().matrix());
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd minv_s = m.llt().solve(s);
    const Eigen::MatrixXd sinv_m = s.llt().solve(m);

    Eigen::MatrixXd k(2 * n, 2 * n), kinv(2 * n, 2 * n);
    k << Eigen::MatrixXd::Zero(n, n), minv_s, id, -rho * minv_s;
    kinv << rho * id, id, sinv_m, Eigen::MatrixXd::Zero(n, n);

    KalmanDiagnostic out;
    out.identity_error = (k * kinv - Eigen::MatrixXd::Identity(2 * n, 2 * n)).cwiseAbs().maxCoeff();
    out.rank = Eigen::FullPivLU<Eigen::MatrixXd>(k).rank();
    out.expected_rank = 2 * n;
    return out;
}

}  // namespace plate_nc::fem
