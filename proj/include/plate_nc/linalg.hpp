/**
 * @file linalg.hpp
 * @brief Sparse SPD storage, factor-once solvers and the 2x2 block solve
 *        used by the implicit time steppers.
 *
 * Every solve checks its relative residual after the fact and throws
 * SolverError when the bound is missed, so callers never see a silently
 * inaccurate answer.
 */
#pragma once

#include <memory>
#include <sstream>
#include <string>
#include <variant>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "plate_nc/core.hpp"

namespace plate_nc {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Largest stored magnitude; 0 for an empty matrix.
inline double max_abs(SparseMatrix a) {
    a.prune(0.0);
    a.makeCompressed();
    return a.nonZeros() == 0 ? 0.0 : a.coeffs().cwiseAbs().maxCoeff();
}

/// Symmetric sparse matrix. Symmetry is checked on construction;
/// definiteness is certified by the factorization in SpdSolver.
class SparseSpdMatrix {
public:
    SparseSpdMatrix() = default;

    explicit SparseSpdMatrix(SparseMatrix a, double sym_tol = 1e-12) : a_(std::move(a)) {
        if (a_.rows() != a_.cols()) throw std::invalid_argument("SparseSpdMatrix: matrix is not square");
        a_.makeCompressed();
        const double scale = std::max(1.0, max_abs(a_));
        if (max_abs(SparseMatrix(a_.transpose()) - a_) > sym_tol * scale)
            throw std::invalid_argument("SparseSpdMatrix: matrix is not symmetric");
    }

    static SparseSpdMatrix identity(Eigen::Index n, double scale = 1.0) {
        SparseMatrix a(n, n);
        a.setIdentity();
        a *= scale;
        return SparseSpdMatrix(std::move(a));
    }

    Eigen::Index dim() const { return a_.rows(); }
    const SparseMatrix& matrix() const { return a_; }
    double coeff(Eigen::Index i, Eigen::Index j) const { return a_.coeff(i, j); }
    Vector operator*(const Vector& x) const { return a_ * x; }

private:
    SparseMatrix a_;
};

inline double relative_residual(const SparseMatrix& a, const Vector& x, const Vector& b) {
    const double bn = b.norm();
    const double rn = (a * x - b).norm();
    return bn > 0.0 ? rn / bn : rn;
}

/// Options for SpdSolver. Direct factorization below `direct_limit`
/// unknowns, conjugate gradients above it.
struct SpdSolverOptions {
    Eigen::Index direct_limit = 10000;
    double cg_tolerance = 1e-12;
    double residual_bound = 1e-12;
};

/// Factor-once SPD solver. Immutable after construction, so one instance
/// may serve concurrent solves.
class SpdSolver {
public:
    explicit SpdSolver(const SparseSpdMatrix& a, SpdSolverOptions opt = {})
        : a_(a.matrix()), opt_(opt) {
        if (a_.rows() <= opt_.direct_limit) {
            auto llt = std::make_shared<Eigen::SimplicialLLT<SparseMatrix>>();
            llt->compute(a_);
            if (llt->info() != Eigen::Success)
                throw SolverError("Cholesky factorization failed: matrix is not SPD");
            impl_ = std::move(llt);
        } else {
            auto cg = std::make_shared<Cg>();
            cg->setTolerance(opt_.cg_tolerance);
            cg->setMaxIterations(10 * a_.rows());
            cg->compute(a_);
            if (cg->info() != Eigen::Success) throw SolverError("CG preconditioner setup failed");
            impl_ = std::move(cg);
        }
    }

    Eigen::Index dim() const { return a_.rows(); }
    bool is_direct() const { return std::holds_alternative<LltPtr>(impl_); }

    Vector solve(const Vector& b) const {
        if (b.size() != a_.rows()) throw std::invalid_argument("solve_spd: dimension mismatch");
        Vector x = std::visit([&](const auto& s) -> Vector { return s->solve(b); }, impl_);
        if (const auto* cg = std::get_if<CgPtr>(&impl_); cg && (*cg)->info() != Eigen::Success)
            throw SolverError("conjugate gradients did not converge");
        const double res = relative_residual(a_, x, b);
        if (!(res <= opt_.residual_bound)) {
            std::ostringstream msg;
            msg << "SPD solve residual " << res << " exceeds " << opt_.residual_bound;
            throw SolverError(msg.str());
        }
        return x;
    }

private:
    using Cg = Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                                        Eigen::IncompleteCholesky<double>>;
    using LltPtr = std::shared_ptr<Eigen::SimplicialLLT<SparseMatrix>>;
    using CgPtr = std::shared_ptr<Cg>;

    SparseMatrix a_;
    SpdSolverOptions opt_;
    std::variant<LltPtr, CgPtr> impl_;
};

inline Vector solve_spd(const SparseSpdMatrix& a, const Vector& b, SpdSolverOptions opt = {}) {
    return SpdSolver(a, opt).solve(b);
}

/// Factor-once solver for
///
///     [A11 A12] [x1]   [b1]
///     [A21 A22] [x2] = [b2]
///
/// When A11 is the identity the Schur complement A22 - A21*A12 is sparse
/// and is factored directly (Cholesky when symmetric, LU otherwise), then
/// x1 = b1 - A12*x2. For a general A11 the Schur complement is dense, so
/// the assembled 2N x 2N matrix is LU-factored instead.
class BlockSolver2x2 {
public:
    BlockSolver2x2(const SparseMatrix& a11, const SparseMatrix& a12, const SparseMatrix& a21,
                   const SparseMatrix& a22, double residual_bound = 1e-10)
        : a11_(a11), a12_(a12), a21_(a21), a22_(a22), bound_(residual_bound) {
        const Eigen::Index n = a11.rows();
        if (a11.cols() != n || a12.rows() != n || a21.cols() != n || a22.rows() != a21.rows() ||
            a22.cols() != a12.cols())
            throw std::invalid_argument("BlockSolver2x2: blocks are not conformable");

        if (is_identity(a11_)) {
            SparseMatrix schur = a22_ - a21_ * a12_;
            schur.makeCompressed();
            const bool symmetric = max_abs(SparseMatrix(schur.transpose()) - schur) <=
                                   1e-13 * std::max(1.0, max_abs(schur));
            if (symmetric) {
                auto llt = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(schur);
                if (llt->info() != Eigen::Success)
                    throw SolverError("BlockSolver2x2: Schur complement is singular");
                schur_ldlt_ = std::move(llt);
            } else {
                auto lu = std::make_shared<Eigen::SparseLU<SparseMatrix>>();
                lu->analyzePattern(schur);
                lu->factorize(schur);
                if (lu->info() != Eigen::Success)
                    throw SolverError("BlockSolver2x2: Schur complement is singular");
                schur_lu_ = std::move(lu);
            }
        } else {
            SparseMatrix full = assemble();
            auto lu = std::make_shared<Eigen::SparseLU<SparseMatrix>>();
            lu->analyzePattern(full);
            lu->factorize(full);
            if (lu->info() != Eigen::Success)
                throw SolverError("BlockSolver2x2: block matrix is singular");
            full_lu_ = std::move(lu);
        }
    }

    bool uses_schur_complement() const { return schur_ldlt_ || schur_lu_; }

    std::pair<Vector, Vector> solve(const Vector& b1, const Vector& b2) const {
        if (b1.size() != a11_.rows() || b2.size() != a22_.rows())
            throw std::invalid_argument("BlockSolver2x2: right-hand side has wrong length");
        Vector x1, x2;
        if (uses_schur_complement()) {
            const Vector rhs = b2 - a21_ * b1;
            x2 = schur_ldlt_ ? Vector(schur_ldlt_->solve(rhs)) : Vector(schur_lu_->solve(rhs));
            x1 = b1 - a12_ * x2;
        } else {
            Vector b(b1.size() + b2.size());
            b << b1, b2;
            const Vector x = full_lu_->solve(b);
            x1 = x.head(b1.size());
            x2 = x.tail(b2.size());
        }
        const double res = residual(x1, x2, b1, b2);
        if (!(res <= bound_)) {
            std::ostringstream msg;
            msg << "block solve residual " << res << " exceeds " << bound_;
            throw SolverError(msg.str());
        }
        return {std::move(x1), std::move(x2)};
    }

    /// Relative residual of the stacked system.
    double residual(const Vector& x1, const Vector& x2, const Vector& b1, const Vector& b2) const {
        const Vector r1 = a11_ * x1 + a12_ * x2 - b1;
        const Vector r2 = a21_ * x1 + a22_ * x2 - b2;
        const double bn = std::sqrt(b1.squaredNorm() + b2.squaredNorm());
        const double rn = std::sqrt(r1.squaredNorm() + r2.squaredNorm());
        return bn > 0.0 ? rn / bn : rn;
    }

private:
    static bool is_identity(const SparseMatrix& a) {
        if (a.rows() != a.cols()) return false;
        for (Eigen::Index k = 0; k < a.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(a, k); it; ++it)
                if (it.value() != (it.row() == it.col() ? 1.0 : 0.0)) return false;
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            if (a.coeff(i, i) != 1.0) return false;
        return true;
    }

    SparseMatrix assemble() const {
        const Eigen::Index n1 = a11_.rows(), n2 = a22_.rows();
        std::vector<Triplet> t;
        t.reserve(static_cast<std::size_t>(a11_.nonZeros() + a12_.nonZeros() + a21_.nonZeros() +
                                           a22_.nonZeros()));
        auto put = [&t](const SparseMatrix& a, Eigen::Index r0, Eigen::Index c0) {
            for (Eigen::Index k = 0; k < a.outerSize(); ++k)
                for (SparseMatrix::InnerIterator it(a, k); it; ++it)
                    t.emplace_back(it.row() + r0, it.col() + c0, it.value());
        };
        put(a11_, 0, 0);
        put(a12_, 0, n1);
        put(a21_, n1, 0);
        put(a22_, n1, n1);
        SparseMatrix full(n1 + n2, n1 + n2);
        full.setFromTriplets(t.begin(), t.end());
        full.makeCompressed();
        return full;
    }

    SparseMatrix a11_, a12_, a21_, a22_;
    double bound_;
    std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> schur_ldlt_;
    std::shared_ptr<Eigen::SparseLU<SparseMatrix>> schur_lu_;
    std::shared_ptr<Eigen::SparseLU<SparseMatrix>> full_lu_;
};

inline std::pair<Vector, Vector> solve_block_2x2(const SparseMatrix& a11, const SparseMatrix& a12,
                                                 const SparseMatrix& a21, const SparseMatrix& a22,
                                                 const Vector& b1, const Vector& b2) {
    return BlockSolver2x2(a11, a12, a21, a22).solve(b1, b2);
}

}  // namespace plate_nc
