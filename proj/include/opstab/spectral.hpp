#pragma once

// Eigenvalues of dense matrices, unimodular point spectrum of structured
// operators, the reversible/stable splitting and the Wold decomposition.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "opstab/dense.hpp"
#include "opstab/error.hpp"
#include "opstab/operator.hpp"
#include "opstab/vector.hpp"

namespace opstab {

struct DenseEigenPair {
    Complex value;
    ColumnVector vector; ///< unit norm
    double residual = 0.0; ///< ||A v - lambda v||
};

struct DenseEigen {
    std::vector<DenseEigenPair> pairs; ///< all m eigenvalues with multiplicity
    bool partial = false;              ///< iteration cap reached
    bool defective = false;            ///< some cluster lacks a full eigenvector set
    bool normal = false;
    double max_residual = 0.0;
};

/// Eigen-decomposition of a square matrix (Hessenberg reduction and shifted QR,
/// capped at 100 m iterations). Eigenvalues closer than 1e-8 form a cluster
/// whose eigenvectors are orthonormalized jointly.
inline DenseEigen dense_eigen(const Matrix& a, std::size_t cap = kDenseDimensionCap) {
    check_dense_dimension(a, cap);
    DenseEigen out;
    const Eigen::Index m = a.rows();
    if (m == 0) return out;
    const double scale = std::max(a.norm(), 1e-300);
    out.normal = (a * a.adjoint() - a.adjoint() * a).norm() <= 1e-10 * scale * scale;

    std::vector<Complex> values;
    Matrix vectors;
    if (out.normal) {
        Eigen::ComplexSchur<Matrix> schur(m);
        schur.setMaxIterations(100 * m);
        schur.compute(a);
        if (schur.info() != Eigen::Success) {
            out.partial = true;
            return out;
        }
        for (Eigen::Index i = 0; i < m; ++i) values.push_back(schur.matrixT()(i, i));
        vectors = schur.matrixU();
    } else {
        Eigen::ComplexEigenSolver<Matrix> es;
        es.setMaxIterations(100 * m);
        es.compute(a);
        if (es.info() != Eigen::Success) {
            out.partial = true;
            return out;
        }
        for (Eigen::Index i = 0; i < m; ++i) values.push_back(es.eigenvalues()(i));
        vectors = es.eigenvectors();
        // Joint orthonormalization inside clusters.
        std::vector<bool> done(static_cast<std::size_t>(m), false);
        for (Eigen::Index i = 0; i < m; ++i) {
            if (done[static_cast<std::size_t>(i)]) continue;
            std::vector<Eigen::Index> cluster;
            for (Eigen::Index j = i; j < m; ++j)
                if (!done[static_cast<std::size_t>(j)] && std::abs(values[static_cast<std::size_t>(j)] -
                                                                   values[static_cast<std::size_t>(i)]) <= 1e-8) {
                    cluster.push_back(j);
                    done[static_cast<std::size_t>(j)] = true;
                }
            if (cluster.size() < 2) continue;
            std::vector<ColumnVector> basis;
            for (Eigen::Index j : cluster) {
                ColumnVector v = vectors.col(j);
                for (int pass = 0; pass < 2; ++pass)
                    for (const auto& q : basis) v -= q.dot(v) * q;
                const double n = v.norm();
                if (n <= 1e-8) {
                    out.defective = true;
                    continue;
                }
                basis.push_back(v / n);
            }
            for (std::size_t k = 0; k < cluster.size(); ++k)
                if (k < basis.size()) vectors.col(cluster[k]) = basis[k];
        }
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        DenseEigenPair p;
        p.value = values[static_cast<std::size_t>(i)];
        p.vector = vectors.col(i).normalized();
        p.residual = (a * p.vector - p.value * p.vector).norm();
        out.max_residual = std::max(out.max_residual, p.residual);
        out.pairs.push_back(std::move(p));
    }
    return out;
}

struct EigenWitness {
    Complex gamma;
    Vector vector; ///< unit norm
    std::uint64_t branch = 0;
};

struct PointSpectrum {
    std::vector<EigenWitness> pairs;
    bool has_more = false; ///< listed pairs are representatives of larger eigenspaces
    bool partial = false;  ///< dense solver hit its cap
};

namespace detail {

inline constexpr std::size_t kMaxListedPairs = 4096;

inline Vector unit_coordinate(std::uint64_t b, std::uint64_t slot) { return Vector(SparseVector::basis(slot, b)); }

inline void leaf_point_spectrum(const Operator& op, std::uint64_t b, double tol, PointSpectrum& out) {
    auto full = [&] { return out.pairs.size() >= kMaxListedPairs; };
    if (const auto* d = op.as<Diagonal>()) {
        auto unimodular = [&](const DiagEntry& e) { return e.angle || std::abs(e.value) >= 1.0 - tol; };
        auto list = [&](std::uint64_t s) {
            if (full()) {
                out.has_more = true;
                return false;
            }
            const DiagEntry e = d->at(s);
            if (unimodular(e)) out.pairs.push_back({e.value, unit_coordinate(b, s), b});
            return true;
        };
        const std::uint64_t start = d->entries.empty() ? 0 : d->entries.rbegin()->first + 1;
        if (d->dimension) {
            for (std::uint64_t s = 0; s < *d->dimension; ++s)
                if (!list(s)) break;
            return;
        }
        // Explicit part, then one period of the tail as representatives of
        // its (infinite) eigenspaces.
        const std::uint64_t end = start + d->tail.slot_period();
        for (std::uint64_t s = 0; s < end; ++s)
            if (!list(s)) return;
        for (std::uint64_t s = start; s < end; ++s)
            if (unimodular(d->tail.at(s))) out.has_more = true;
        return;
    }
    if (op.as<RightShift>()) return;
    if (const auto* c = op.as<CyclicMix>()) {
        const double inv = 1.0 / std::sqrt(static_cast<double>(c->period));
        for (std::uint64_t k = 0; k < c->period; ++k) {
            const Complex gamma = RationalAngle::make(static_cast<std::int64_t>(k), c->period).value();
            for (std::uint64_t coord = 0; coord < c->block; ++coord) {
                if (full()) {
                    out.has_more = true;
                    return;
                }
                SparseVector v;
                for (std::uint64_t j = 0; j < c->period; ++j)
                    v.set({b, j * c->block + coord},
                          inv * RationalAngle::make(-static_cast<std::int64_t>(j * k % c->period), c->period).value());
                out.pairs.push_back({gamma, Vector(std::move(v)), b});
            }
        }
        out.pairs.push_back({1.0, unit_coordinate(b, c->period * c->block), b});
        out.has_more = true;
        return;
    }
    if (const auto* m = op.as<Dense>()) {
        const DenseEigen e = dense_eigen(m->matrix);
        out.partial = out.partial || e.partial;
        for (const auto& p : e.pairs) {
            if (std::abs(p.value) < 1.0 - tol) continue;
            SparseVector v;
            for (Eigen::Index i = 0; i < p.vector.size(); ++i) v.set({b, static_cast<std::uint64_t>(i)}, p.vector(i));
            out.pairs.push_back({p.value, Vector(std::move(v)), b});
        }
        return;
    }
    if (const auto* u = op.as<SpectralUnitary>()) {
        const SpectralMeasure& mu = *u->measure;
        if (u->symbol) {
            const auto& s = *u->symbol;
            for (std::size_t k = 0; k < s.values.size(); ++k) {
                const double mass = measure_of(mu, s.breaks[k], s.breaks[k + 1]);
                if (!(mass > 0.0)) continue;
                Vector v = Vector::function(StepFunction::indicator(s.breaks[k], s.breaks[k + 1], 1.0 / std::sqrt(mass)), b);
                out.pairs.push_back({s.values[k].value, std::move(v), b});
                // Continuous mass or several atoms make the eigenspace larger than one vector.
                double atomic_inside = 0.0;
                std::size_t atoms_inside = 0;
                for (const Atom& a : mu.atoms())
                    if (a.location >= s.breaks[k] && a.location < s.breaks[k + 1]) {
                        atomic_inside += a.weight;
                        ++atoms_inside;
                    }
                if (atoms_inside != 1 || mass > atomic_inside * (1.0 + 1e-12)) out.has_more = true;
            }
            return;
        }
        for (const Atom& a : mu.atoms()) {
            Field f;
            f.points.emplace(a.location, 1.0 / std::sqrt(a.weight));
            Vector v;
            v.set_field(b, std::move(f));
            out.pairs.push_back({turn(a.location), std::move(v), b});
        }
        return;
    }
    throw ValidationError("nested direct sums are not supported");
}

} // namespace detail

/// Eigenpairs T v = gamma v with |gamma| >= 1 - tol. Infinite eigenspaces are
/// represented by finitely many members and flagged with has_more.
inline PointSpectrum unimodular_point_spectrum(const Operator& op, double tol = 1e-8) {
    PointSpectrum out;
    const auto parts = op.branches();
    for (std::size_t b = 0; b < parts.size(); ++b) detail::leaf_point_spectrum(*parts[b], b, tol, out);
    return out;
}

struct ReversiblePair {
    Complex gamma;
    Vector vector;
    double residual = 0.0;          ///< ||T v - gamma v||
    double reducing_residual = 0.0; ///< ||T* v - conj(gamma) v||
};

/// H = H_r + H_s with H_r spanned by unimodular eigenvectors.
struct JgdlSplit {
    std::vector<ReversiblePair> reversible_basis; ///< orthonormal
    bool basis_complete = true;                   ///< false when eigenspaces are only represented
    bool partial = false;
    double max_residual = 0.0;
    double max_reducing_residual = 0.0;
    bool reducing_verified = true; ///< max_reducing_residual <= 10 tol
    std::function<Vector(const Vector&)> stable_projection;
};

namespace detail {

inline Vector leaf_stable_projection(const Operator& op, std::uint64_t b, double tol, const Vector& part,
                                     const std::vector<Vector>& dense_basis, const Space& space) {
    if (const auto* d = op.as<Diagonal>()) {
        Vector out;
        for (const auto& [idx, a] : part.coords().entries()) {
            const DiagEntry e = d->at(idx.slot);
            if (!(e.angle || std::abs(e.value) >= 1.0 - tol)) out.coords().set(idx, a);
        }
        return out;
    }
    if (op.as<RightShift>()) return part;
    if (op.as<CyclicMix>()) return {};
    if (const auto* u = op.as<SpectralUnitary>()) {
        if (u->symbol) return {};
        const Field* f = part.field(b);
        if (!f) return {};
        Field g = *f;
        for (const Atom& a : u->measure->atoms()) {
            const Complex step = f->step_value(a.location);
            g.points[a.location] = -step;
        }
        Vector out;
        out.set_field(b, std::move(g));
        return out;
    }
    Vector out = part;
    for (const Vector& q : dense_basis) out -= inner(space, part, q) * q;
    return out;
}

} // namespace detail

inline JgdlSplit jgdl_split(const Operator& op, double tol = 1e-8) {
    const ClassReport cls = classify_operator(op, std::max(tol, 1e-10));
    if (cls.cls == OperatorClass::none) throw ClassMismatch("reversible/stable splitting needs a contraction");
    JgdlSplit out;
    const PointSpectrum ps = unimodular_point_spectrum(op, tol);
    out.partial = ps.partial;
    out.basis_complete = !ps.has_more;
    const Space space = space_of(op);
    const auto parts = op.branches();

    // Orthonormalize jointly per branch (dense clusters may come back non-orthogonal).
    std::vector<std::vector<Vector>> dense_basis(parts.size());
    for (const auto& w : ps.pairs) {
        Vector v = w.vector;
        if (parts[w.branch]->as<Dense>()) {
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& q : dense_basis[w.branch]) v -= inner(space, v, q) * q;
            const double n = norm(space, v);
            if (n <= 1e-8) continue;
            v = (1.0 / n) * v;
            dense_basis[w.branch].push_back(v);
        }
        ReversiblePair p;
        p.gamma = w.gamma;
        p.vector = v;
        p.residual = norm(space, apply(op, v) - w.gamma * v);
        p.reducing_residual = norm(space, apply_adjoint(op, v) - std::conj(w.gamma) * v);
        out.max_residual = std::max(out.max_residual, p.residual);
        out.max_reducing_residual = std::max(out.max_reducing_residual, p.reducing_residual);
        out.reversible_basis.push_back(std::move(p));
    }
    out.reducing_verified = out.max_reducing_residual <= 10.0 * tol;

    out.stable_projection = [op, tol, space, dense_basis](const Vector& x) {
        check_membership(space, x);
        const auto ps = op.branches();
        Vector r;
        for (std::uint64_t b : x.occupied_branches())
            r += detail::leaf_stable_projection(*ps[b], b, tol, x.restrict_to(b), dense_basis[b], space);
        return r;
    };
    return out;
}

struct WoldSplit {
    std::vector<std::uint64_t> unitary_branches; ///< branches forming H_0
    std::vector<std::uint64_t> shift_branches;   ///< branches forming H_1
    std::optional<Operator> unitary_part;        ///< V restricted to H_0, branches renumbered in order
    std::vector<Vector> wandering_basis;         ///< orthonormal basis of Y
    std::uint64_t shift_multiplicity = 0;
    bool numerical = false;           ///< some branch went through the range-intersection path
    double range_defect = 0.0;        ///< dense path: max distance of a basis vector from range(V^horizon)
    std::uint64_t horizon = 0;
};

/// H = H_0 + H_1, V unitary on H_0 and a unilateral shift on H_1 = sum V^n Y.
inline WoldSplit wold_decompose(const Operator& v, std::uint64_t horizon = 64, double tol = 1e-8) {
    const ClassReport cls = classify_operator(v, std::max(tol, 1e-10));
    if (cls.cls < OperatorClass::isometry)
        throw ClassMismatch("Wold decomposition needs an isometry (got " + to_string(cls.cls) + ")");
    WoldSplit out;
    out.horizon = horizon;
    std::vector<Operator> unitary_parts;
    const auto parts = v.branches();
    for (std::uint64_t b = 0; b < parts.size(); ++b) {
        const Operator& p = *parts[b];
        if (const auto* s = p.as<RightShift>()) {
            out.shift_branches.push_back(b);
            out.shift_multiplicity += s->block;
            for (std::uint64_t c = 0; c < s->block; ++c) out.wandering_basis.push_back(detail::unit_coordinate(b, c));
            continue;
        }
        if (const auto* m = p.as<Dense>()) {
            // Finite dimension: the ranges of V^n are nested, so their
            // intersection up to the horizon is range(V^horizon).
            out.numerical = true;
            const Eigen::Index dim = m->matrix.rows();
            Matrix power = Matrix::Identity(dim, dim);
            Eigen::Index rank = dim;
            for (std::uint64_t n = 1; n <= std::max<std::uint64_t>(horizon, 1); ++n) {
                power = m->matrix * power;
                Eigen::ColPivHouseholderQR<Matrix> qr(power);
                qr.setThreshold(tol);
                rank = std::min(rank, qr.rank());
                if (n == std::max<std::uint64_t>(horizon, 1)) {
                    const Matrix q = qr.householderQ() * Matrix::Identity(dim, qr.rank());
                    const Matrix resid = Matrix::Identity(dim, dim) - q * q.adjoint();
                    for (Eigen::Index i = 0; i < dim; ++i)
                        out.range_defect = std::max(out.range_defect, resid.col(i).norm());
                }
            }
            if (rank < dim) throw NumericalError("dense isometry lost rank along its powers", static_cast<double>(rank));
        }
        out.unitary_branches.push_back(b);
        unitary_parts.push_back(p);
    }
    if (unitary_parts.size() == 1) out.unitary_part = unitary_parts.front();
    else if (!unitary_parts.empty()) out.unitary_part = Operator::direct_sum(std::move(unitary_parts));
    return out;
}

/// Norm of the part of x outside H_0 + span{V^n y : n <= horizon, y in Y}.
inline double wold_residual(const Operator& v, const WoldSplit& split, const Vector& x, std::uint64_t horizon) {
    const Space space = space_of(v);
    double captured = 0.0;
    for (std::uint64_t b : split.unitary_branches) captured += std::pow(norm(space, x.restrict_to(b)), 2);
    for (const Vector& y : split.wandering_basis) {
        Vector w = y;
        for (std::uint64_t n = 0; n <= horizon; ++n) {
            captured += std::norm(inner(space, x, w));
            w = apply(v, w);
        }
    }
    return std::sqrt(std::max(0.0, std::pow(norm(space, x), 2) - captured));
}

} // namespace opstab
