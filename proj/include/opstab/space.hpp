#pragma once

// Hilbert-space primitives: finitely supported vectors on (branch, slot)
// index sets, step functions on bounded intervals, Gram-Schmidt, and the
// deterministic test-vector family used by the operator metrics.

#include <algorithm>
#include <cmath>
#include <compare>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "opstab/error.hpp"

namespace opstab {

using Complex = std::complex<double>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

struct CompositeIndex {
    std::uint64_t branch = 0;
    std::uint64_t slot = 0;

    friend auto operator<=>(const CompositeIndex&, const CompositeIndex&) = default;
};

/// Finitely supported complex vector. Stored amplitudes are never exactly zero.
class SparseVector {
public:
    using Map = std::map<CompositeIndex, Complex>;

    SparseVector() = default;

    static SparseVector basis(std::uint64_t slot, std::uint64_t branch = 0, Complex amplitude = 1.0) {
        SparseVector v;
        v.set({branch, slot}, amplitude);
        return v;
    }

    void set(CompositeIndex index, Complex amplitude) {
        if (amplitude == Complex{}) {
            entries_.erase(index);
        } else {
            entries_[index] = amplitude;
        }
    }

    void add(CompositeIndex index, Complex amplitude) {
        if (amplitude == Complex{}) return;
        auto it = entries_.find(index);
        if (it == entries_.end()) {
            entries_.emplace(index, amplitude);
            return;
        }
        it->second += amplitude;
        if (it->second == Complex{}) entries_.erase(it);
    }

    Complex get(CompositeIndex index) const {
        auto it = entries_.find(index);
        return it == entries_.end() ? Complex{} : it->second;
    }

    const Map& entries() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }
    std::size_t size() const noexcept { return entries_.size(); }

    double norm_squared() const {
        double s = 0.0;
        for (const auto& [_, a] : entries_) s += std::norm(a);
        return s;
    }
    double norm() const { return std::sqrt(norm_squared()); }

    /// Entries restricted to one branch.
    SparseVector branch(std::uint64_t b) const {
        SparseVector out;
        for (auto it = entries_.lower_bound({b, 0}); it != entries_.end() && it->first.branch == b; ++it)
            out.entries_.insert(*it);
        return out;
    }

    /// Largest slot + 1 on a branch (0 when the branch is empty).
    std::uint64_t extent(std::uint64_t b) const {
        std::uint64_t e = 0;
        for (auto it = entries_.lower_bound({b, 0}); it != entries_.end() && it->first.branch == b; ++it)
            e = it->first.slot + 1;
        return e;
    }

    SparseVector& operator+=(const SparseVector& o) {
        for (const auto& [i, a] : o.entries_) add(i, a);
        return *this;
    }
    SparseVector& operator-=(const SparseVector& o) {
        for (const auto& [i, a] : o.entries_) add(i, -a);
        return *this;
    }
    SparseVector& operator*=(Complex s) {
        if (s == Complex{}) {
            entries_.clear();
            return *this;
        }
        for (auto it = entries_.begin(); it != entries_.end();) {
            it->second *= s;
            if (it->second == Complex{}) it = entries_.erase(it);
            else ++it;
        }
        return *this;
    }

    friend SparseVector operator+(SparseVector a, const SparseVector& b) { return a += b; }
    friend SparseVector operator-(SparseVector a, const SparseVector& b) { return a -= b; }
    friend SparseVector operator*(Complex s, SparseVector a) { return a *= s; }
    friend bool operator==(const SparseVector&, const SparseVector&) = default;

private:
    Map entries_;
};

/// Linear in the first argument, conjugate-linear in the second.
inline Complex inner(const SparseVector& x, const SparseVector& y) {
    const auto& a = x.entries();
    const auto& b = y.entries();
    Complex s{};
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (i->first < j->first) ++i;
        else if (j->first < i->first) ++j;
        else {
            s += i->second * std::conj(j->second);
            ++i;
            ++j;
        }
    }
    return s;
}

/// Piecewise-constant complex function, zero outside [breaks.front(), breaks.back()).
/// Interval k is [breaks[k], breaks[k+1]) with value values[k]. Stored in
/// canonical form: equal neighbours merged, zero pieces at both ends trimmed.
class StepFunction {
public:
    StepFunction() = default;

    StepFunction(std::vector<double> breaks, std::vector<Complex> values)
        : breaks_(std::move(breaks)), values_(std::move(values)) {
        if (breaks_.empty() && values_.empty()) return;
        if (breaks_.size() != values_.size() + 1 || values_.empty())
            throw ValidationError("step function needs one more breakpoint than values");
        for (std::size_t k = 0; k < breaks_.size(); ++k) {
            if (!std::isfinite(breaks_[k])) throw ValidationError("step function breakpoint is not finite");
            if (k > 0 && !(breaks_[k] > breaks_[k - 1]))
                throw ValidationError("step function breakpoints must be strictly increasing");
        }
        *this = trimmed(std::move(breaks_), std::move(values_));
    }

    static StepFunction indicator(double a, double b, Complex value = 1.0) {
        if (!(b > a)) throw DomainError("indicator needs a < b");
        return StepFunction({a, b}, {value});
    }

    const std::vector<double>& breakpoints() const noexcept { return breaks_; }
    const std::vector<Complex>& values() const noexcept { return values_; }
    std::size_t pieces() const noexcept { return values_.size(); }
    bool is_zero() const {
        return std::all_of(values_.begin(), values_.end(), [](Complex v) { return v == Complex{}; });
    }
    double lower() const { return breaks_.empty() ? 0.0 : breaks_.front(); }
    double upper() const { return breaks_.empty() ? 0.0 : breaks_.back(); }

    Complex operator()(double t) const {
        if (breaks_.empty() || t < breaks_.front() || t >= breaks_.back()) return {};
        auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
        return values_[static_cast<std::size_t>(it - breaks_.begin()) - 1];
    }

    double norm_squared() const {
        double s = 0.0;
        for (std::size_t k = 0; k < values_.size(); ++k) s += std::norm(values_[k]) * (breaks_[k + 1] - breaks_[k]);
        return s;
    }
    double norm() const { return std::sqrt(norm_squared()); }

    /// Pointwise combination on the common refinement; zero pieces at both ends are trimmed.
    template <class Op>
    static StepFunction combine(const StepFunction& f, const StepFunction& g, Op op) {
        std::vector<double> grid;
        grid.reserve(f.breaks_.size() + g.breaks_.size());
        std::merge(f.breaks_.begin(), f.breaks_.end(), g.breaks_.begin(), g.breaks_.end(), std::back_inserter(grid));
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        if (grid.size() < 2) return {};
        std::vector<Complex> vals(grid.size() - 1);
        std::size_t fi = 0, gi = 0;
        for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
            const double t = grid[k];
            while (fi < f.values_.size() && f.breaks_[fi + 1] <= t) ++fi;
            while (gi < g.values_.size() && g.breaks_[gi + 1] <= t) ++gi;
            const Complex fv = (fi < f.values_.size() && f.breaks_[fi] <= t) ? f.values_[fi] : Complex{};
            const Complex gv = (gi < g.values_.size() && g.breaks_[gi] <= t) ? g.values_[gi] : Complex{};
            vals[k] = op(fv, gv);
        }
        return trimmed(std::move(grid), std::move(vals));
    }

    StepFunction conj() const {
        StepFunction r = *this;
        for (auto& v : r.values_) v = std::conj(v);
        return r;
    }

    StepFunction& operator*=(Complex s) {
        for (auto& v : values_) v *= s;
        if (!values_.empty()) *this = trimmed(std::move(breaks_), std::move(values_));
        return *this;
    }

    friend StepFunction operator+(const StepFunction& f, const StepFunction& g) {
        return combine(f, g, [](Complex a, Complex b) { return a + b; });
    }
    friend StepFunction operator-(const StepFunction& f, const StepFunction& g) {
        return combine(f, g, [](Complex a, Complex b) { return a - b; });
    }
    /// Pointwise product.
    friend StepFunction operator*(const StepFunction& f, const StepFunction& g) {
        return combine(f, g, [](Complex a, Complex b) { return a * b; });
    }
    friend StepFunction operator*(Complex s, StepFunction f) { return f *= s; }
    friend bool operator==(const StepFunction&, const StepFunction&) = default;

private:
    static StepFunction trimmed(std::vector<double> grid, std::vector<Complex> vals) {
        std::size_t lo = 0, hi = vals.size();
        while (lo < hi && vals[lo] == Complex{}) ++lo;
        while (hi > lo && vals[hi - 1] == Complex{}) --hi;
        if (lo == hi) return {};
        StepFunction r;
        r.breaks_.push_back(grid[lo]);
        for (std::size_t k = lo; k < hi; ++k) {
            if (!r.values_.empty() && r.values_.back() == vals[k]) {
                r.breaks_.back() = grid[k + 1];
                continue;
            }
            r.values_.push_back(vals[k]);
            r.breaks_.push_back(grid[k + 1]);
        }
        return r;
    }

    std::vector<double> breaks_;
    std::vector<Complex> values_;
};

/// Lebesgue inner product, computed on the common refinement.
inline Complex inner(const StepFunction& f, const StepFunction& g) {
    const StepFunction h = StepFunction::combine(f, g, [](Complex a, Complex b) { return a * std::conj(b); });
    Complex s{};
    const auto& br = h.breakpoints();
    for (std::size_t k = 0; k < h.pieces(); ++k) s += h.values()[k] * (br[k + 1] - br[k]);
    return s;
}

using AnyVector = std::variant<SparseVector, StepFunction>;

inline Complex inner(const AnyVector& x, const AnyVector& y) {
    if (x.index() != y.index())
        throw KindMismatch("inner product between a sparse vector and a step function");
    if (const auto* sx = std::get_if<SparseVector>(&x)) return inner(*sx, std::get<SparseVector>(y));
    return inner(std::get<StepFunction>(x), std::get<StepFunction>(y));
}

template <class V>
struct Orthonormalized {
    std::vector<V> basis;
    std::vector<std::size_t> dropped; ///< input positions found linearly dependent
};

/// Modified Gram-Schmidt with one reorthogonalization pass. An input whose
/// residual falls below rel_tol times its norm is reported as dependent.
template <class V, class Inner>
Orthonormalized<V> orthonormalize(std::span<const V> vs, Inner&& ip, double rel_tol = 1e-10) {
    Orthonormalized<V> out;
    for (std::size_t i = 0; i < vs.size(); ++i) {
        V r = vs[i];
        const double n0 = std::sqrt(std::real(ip(r, r)));
        if (n0 == 0.0) {
            out.dropped.push_back(i);
            continue;
        }
        for (int pass = 0; pass < 2; ++pass)
            for (const V& q : out.basis) r = r - ip(r, q) * q;
        const double n1 = std::sqrt(std::real(ip(r, r)));
        if (n1 <= rel_tol * n0) {
            out.dropped.push_back(i);
            continue;
        }
        out.basis.push_back((1.0 / n1) * r);
    }
    return out;
}

inline Orthonormalized<SparseVector> orthonormalize(std::span<const SparseVector> vs, double rel_tol = 1e-10) {
    return orthonormalize(vs, [](const SparseVector& a, const SparseVector& b) { return inner(a, b); }, rel_tol);
}

/// Branch layout used to enumerate basis vectors: one entry per branch,
/// nullopt for an infinite branch, otherwise its finite dimension.
struct SpaceShape {
    std::vector<std::optional<std::uint64_t>> dims{std::nullopt};

    friend bool operator==(const SpaceShape&, const SpaceShape&) = default;
};

namespace detail {

/// Inverse of the Cantor pairing (a, b) -> (a + b)(a + b + 1)/2 + b.
inline std::pair<std::uint64_t, std::uint64_t> unpair(std::uint64_t n) {
    auto w = static_cast<std::uint64_t>((std::sqrt(8.0 * static_cast<double>(n) + 1.0) - 1.0) / 2.0);
    while (w * (w + 1) / 2 > n) --w;
    while ((w + 1) * (w + 2) / 2 <= n) ++w;
    const std::uint64_t b = n - w * (w + 1) / 2;
    return {w - b, b};
}

/// 0, -1, 1, -2, 2, ... (natural -> integer).
inline std::int64_t zigzag(std::uint64_t u) {
    return (u % 2 == 0) ? static_cast<std::int64_t>(u / 2) : -static_cast<std::int64_t>((u + 1) / 2);
}

} // namespace detail

/// a-th basis index in round-robin (slot-major) order over the branches of the shape.
inline CompositeIndex basis_index(std::uint64_t a, const SpaceShape& shape) {
    if (shape.dims.empty()) throw DomainError("space shape has no branches");
    std::optional<std::uint64_t> total = 0;
    for (const auto& d : shape.dims) {
        if (!d) {
            total.reset();
            break;
        }
        *total += *d;
    }
    if (total) {
        if (*total == 0) throw DomainError("space shape has dimension zero");
        a %= *total;
    }
    const bool all_infinite =
        std::all_of(shape.dims.begin(), shape.dims.end(), [](const auto& d) { return !d.has_value(); });
    if (all_infinite) {
        const auto nb = static_cast<std::uint64_t>(shape.dims.size());
        return {a % nb, a / nb};
    }
    for (std::uint64_t slot = 0;; ++slot) {
        for (std::uint64_t b = 0; b < shape.dims.size(); ++b) {
            const auto& d = shape.dims[b];
            if (d && slot >= *d) continue;
            if (a == 0) return {b, slot};
            --a;
        }
    }
}

/// j-th member (j >= 1) of the canonical dense family. Indices decode through
/// the Cantor pairing into (a, b): b = 0 gives the a-th basis vector; b >= 1
/// decodes a into a finite list of Gaussian integers placed on basis numbers
/// 0, 1, ... and divided by b.
inline SparseVector test_vector(std::uint64_t j, const SpaceShape& shape = {}) {
    if (j == 0) throw DomainError("test_vector index starts at 1");
    const auto [a, b] = detail::unpair(j - 1);
    if (b == 0) {
        const auto idx = basis_index(a, shape);
        return SparseVector::basis(idx.slot, idx.branch);
    }
    const double denom = static_cast<double>(b);
    SparseVector v;
    std::uint64_t c = a;
    std::uint64_t position = 0;
    while (c > 0) {
        const auto [head, rest] = detail::unpair(c - 1);
        const auto [u, w] = detail::unpair(head);
        const Complex coef(static_cast<double>(detail::zigzag(u)) / denom, static_cast<double>(detail::zigzag(w)) / denom);
        v.add(basis_index(position, shape), coef);
        ++position;
        c = rest;
    }
    if (v.empty()) {
        const auto idx = basis_index(a + b, shape);
        return SparseVector::basis(idx.slot, idx.branch);
    }
    return v;
}

} // namespace opstab
