#pragma once

// Structured operator representations and their exact action on vectors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "opstab/dense.hpp"
#include "opstab/error.hpp"
#include "opstab/measure.hpp"
#include "opstab/space.hpp"
#include "opstab/vector.hpp"

namespace opstab {

/// e^{2 pi i p/q} with gcd(p, q) = 1 and 0 <= p < q.
struct RationalAngle {
    std::uint64_t p = 0;
    std::uint64_t q = 1;

    static RationalAngle make(std::int64_t p, std::uint64_t q) {
        if (q == 0) throw DomainError("rational angle needs q >= 1");
        const auto qi = static_cast<__int128>(q);
        auto r = static_cast<__int128>(p) % qi;
        if (r < 0) r += qi;
        auto pr = static_cast<std::uint64_t>(r);
        const std::uint64_t g = std::gcd(pr, q);
        return {pr / g, q / g};
    }

    double turns() const { return static_cast<double>(p) / static_cast<double>(q); }

    Complex value() const {
        if (p == 0) return 1.0;
        if (q == 2) return -1.0;
        if (q == 4) return p == 1 ? Complex(0.0, 1.0) : Complex(0.0, -1.0);
        return detail::turn(turns());
    }

    /// n * (p/q) reduced.
    RationalAngle times(std::int64_t n) const {
        const auto qi = static_cast<__int128>(q);
        auto r = (static_cast<__int128>(p) * static_cast<__int128>(n)) % qi;
        if (r < 0) r += qi;
        return make(static_cast<std::int64_t>(r), q);
    }

    RationalAngle conj() const { return make(-static_cast<std::int64_t>(p), q); }

    friend bool operator==(const RationalAngle&, const RationalAngle&) = default;
    friend bool operator<(const RationalAngle& a, const RationalAngle& b) {
        return static_cast<unsigned __int128>(a.p) * b.q < static_cast<unsigned __int128>(b.p) * a.q;
    }
};

namespace detail {

/// Best rational approximation p/q of t in [0, 1) with q <= max_q (continued fractions).
inline RationalAngle nearest_fraction(double t, std::uint64_t max_q) {
    std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double x = t;
    for (int k = 0; k < 64; ++k) {
        const double a = std::floor(x);
        const auto ai = static_cast<std::int64_t>(a);
        const std::int64_t p2 = ai * p1 + p0;
        const std::int64_t q2 = ai * q1 + q0;
        if (q2 > static_cast<std::int64_t>(max_q)) break;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        const double f = x - a;
        if (f < 1e-15) break;
        x = 1.0 / f;
    }
    if (q1 == 0) return {0, 1};
    return RationalAngle::make(p1, static_cast<std::uint64_t>(q1));
}

inline std::uint64_t checked_lcm(std::uint64_t a, std::uint64_t b) {
    const std::uint64_t g = std::gcd(a, b);
    const unsigned __int128 l = static_cast<unsigned __int128>(a / g) * b;
    if (l > std::numeric_limits<std::uint64_t>::max()) throw CapacityError("period overflows 64 bits");
    return static_cast<std::uint64_t>(l);
}

} // namespace detail

/// Diagonal entry; carries an exact rational angle when it is a root of unity.
struct DiagEntry {
    Complex value{1.0, 0.0};
    std::optional<RationalAngle> angle{RationalAngle{}};

    static DiagEntry from_angle(RationalAngle a) { return {a.value(), a}; }
    static DiagEntry from_angle(std::int64_t p, std::uint64_t q) { return from_angle(RationalAngle::make(p, q)); }

    /// Contraction gate: |z| <= 1 + 1e-12 accepted and clipped to the disk.
    /// Roots of unity with q <= 10^4 within 1e-12 are stored by their angle.
    static DiagEntry from_value(Complex z) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw ValidationError("diagonal entry is not finite");
        const double r = std::abs(z);
        if (r > 1.0 + 1e-12) throw ValidationError("diagonal entry of modulus " + std::to_string(r) + " exceeds 1");
        if (r > 1.0) z /= r;
        if (std::abs(r - 1.0) <= 1e-12) {
            const double t = detail::frac(std::arg(z) / kTwoPi);
            const RationalAngle a = detail::nearest_fraction(t, 10000);
            if (std::abs(a.value() - z) <= 1e-12) return from_angle(a);
        }
        return {z, std::nullopt};
    }

    bool unimodular(double tol = 1e-12) const { return angle.has_value() || std::abs(std::abs(value) - 1.0) <= tol; }

    DiagEntry pow(std::uint64_t n) const {
        if (n == 0) return {};
        if (angle) {
            const RationalAngle a = angle->times(static_cast<std::int64_t>(n % angle->q));
            return a == *angle ? *this : from_angle(a);
        }
        Complex result = 1.0, base = value;
        for (std::uint64_t e = n; e > 0; e >>= 1) {
            if (e & 1U) result *= base;
            base *= base;
        }
        return {result, std::nullopt};
    }

    DiagEntry conj() const {
        if (angle) return from_angle(angle->conj());
        return {std::conj(value), std::nullopt};
    }

    friend bool operator==(const DiagEntry&, const DiagEntry&) = default;
};

/// Rule for the slots without an explicit entry.
struct DiagonalTail {
    enum class Kind { identity, constant, rotation, cycle };

    Kind kind = Kind::identity;
    DiagEntry constant{};
    std::int64_t a = 0, b = 0; ///< rotation: angle (a * slot + b) / q
    std::uint64_t q = 1;
    std::vector<DiagEntry> cycle; ///< entry at slot s is cycle[s % size]

    static DiagonalTail identity() { return {}; }
    static DiagonalTail constant_of(DiagEntry e) {
        DiagonalTail t;
        t.kind = Kind::constant;
        t.constant = e;
        return t;
    }
    static DiagonalTail rotation(std::int64_t a, std::int64_t b, std::uint64_t q) {
        if (q == 0) throw ValidationError("rotation tail needs q >= 1");
        DiagonalTail t;
        t.kind = Kind::rotation;
        t.a = a;
        t.b = b;
        t.q = q;
        return t;
    }
    static DiagonalTail cycle_of(std::vector<DiagEntry> entries) {
        if (entries.empty()) throw ValidationError("cycle tail needs at least one entry");
        DiagonalTail t;
        t.kind = Kind::cycle;
        t.cycle = std::move(entries);
        return t;
    }

    DiagEntry at(std::uint64_t slot) const {
        switch (kind) {
        case Kind::identity: return {};
        case Kind::constant: return constant;
        case Kind::rotation: {
            const auto s = static_cast<__int128>(slot % q);
            const auto num = (static_cast<__int128>(a) * s + b) % static_cast<__int128>(q);
            return DiagEntry::from_angle(static_cast<std::int64_t>(num), q);
        }
        case Kind::cycle: return cycle[slot % cycle.size()];
        }
        return {};
    }

    /// Slot period of the rule.
    std::uint64_t slot_period() const {
        switch (kind) {
        case Kind::rotation: return q;
        case Kind::cycle: return cycle.size();
        default: return 1;
        }
    }

    friend bool operator==(const DiagonalTail&, const DiagonalTail&) = default;
};

struct Diagonal {
    std::map<std::uint64_t, DiagEntry> entries;
    DiagonalTail tail;
    std::optional<std::uint64_t> dimension; ///< nullopt: l^2(N)

    DiagEntry at(std::uint64_t slot) const {
        auto it = entries.find(slot);
        return it == entries.end() ? tail.at(slot) : it->second;
    }

    friend bool operator==(const Diagonal&, const Diagonal&) = default;
};

/// Unilateral shift on l^2(N, C^block): slot s -> s + block.
struct RightShift {
    std::uint64_t block = 1;
    friend bool operator==(const RightShift&, const RightShift&) = default;
};

/// (x_1, x_2, ...) -> (x_n, x_1, ..., x_{n-1}, x_{n+1}, x_{n+2}, ...) on
/// l^2(N, C^block), with x_k the k-th block.
struct CyclicMix {
    std::uint64_t period = 1;
    std::uint64_t block = 1;
    friend bool operator==(const CyclicMix&, const CyclicMix&) = default;
};

struct Dense {
    Matrix matrix;
    friend bool operator==(const Dense& a, const Dense& b) {
        return a.matrix.rows() == b.matrix.rows() && a.matrix.cols() == b.matrix.cols() && a.matrix == b.matrix;
    }
};

/// Step function on [0, 1) with unimodular values.
struct SpectralSymbol {
    std::vector<double> breaks; ///< 0 = b_0 < ... < b_k = 1
    std::vector<DiagEntry> values;

    std::size_t piece_of(double theta) const {
        auto it = std::upper_bound(breaks.begin(), breaks.end(), theta);
        const auto k = static_cast<std::size_t>(it - breaks.begin());
        return k == 0 ? 0 : std::min(k - 1, values.size() - 1);
    }
    StepFunction power(std::uint64_t n, bool conjugate) const {
        std::vector<Complex> v;
        v.reserve(values.size());
        for (const auto& e : values) {
            const DiagEntry p = e.pow(n);
            v.push_back(conjugate ? std::conj(p.value) : p.value);
        }
        return StepFunction(breaks, std::move(v));
    }

    friend bool operator==(const SpectralSymbol&, const SpectralSymbol&) = default;
};

/// Multiplication by e^{2 pi i theta}, or by a symbol psi(theta), on L^2(mu).
struct SpectralUnitary {
    std::shared_ptr<const SpectralMeasure> measure;
    std::optional<SpectralSymbol> symbol;

    friend bool operator==(const SpectralUnitary& a, const SpectralUnitary& b) {
        const bool same_measure = a.measure == b.measure || (a.measure && b.measure && *a.measure == *b.measure);
        return same_measure && a.symbol == b.symbol;
    }
};

class Operator;

struct DirectSum {
    std::vector<Operator> parts;
};

class Operator {
public:
    using Rep = std::variant<Diagonal, RightShift, CyclicMix, Dense, SpectralUnitary, DirectSum>;

    Operator(Diagonal d) : rep_(std::move(d)) { validate(); }
    Operator(RightShift s) : rep_(s) { validate(); }
    Operator(CyclicMix c) : rep_(c) { validate(); }
    Operator(Dense d) : rep_(std::move(d)) { validate(); }
    Operator(SpectralUnitary s) : rep_(std::move(s)) { validate(); }
    Operator(DirectSum s) : rep_(std::move(s)) { validate(); }

    static Operator identity() { return Diagonal{}; }
    static Operator constant(DiagEntry e) { return Diagonal{{}, DiagonalTail::constant_of(e), std::nullopt}; }
    static Operator shift(std::uint64_t block = 1) { return RightShift{block}; }
    static Operator cyclic(std::uint64_t period, std::uint64_t block = 1) { return CyclicMix{period, block}; }
    static Operator dense(Matrix m) { return Dense{std::move(m)}; }
    static Operator spectral(SpectralMeasure mu, std::optional<SpectralSymbol> symbol = std::nullopt) {
        return SpectralUnitary{std::make_shared<const SpectralMeasure>(std::move(mu)), std::move(symbol)};
    }
    static Operator direct_sum(std::vector<Operator> parts) { return DirectSum{std::move(parts)}; }

    const Rep& rep() const noexcept { return rep_; }

    template <class T>
    const T* as() const noexcept {
        return std::get_if<T>(&rep_);
    }

    std::string kind_name() const {
        static constexpr const char* names[] = {"diagonal", "shift", "cyclic", "dense", "spectral", "direct_sum"};
        return names[rep_.index()];
    }

    /// Branch operators: the parts of a direct sum, or the operator itself.
    std::vector<const Operator*> branches() const {
        std::vector<const Operator*> out;
        if (const auto* s = as<DirectSum>())
            for (const auto& p : s->parts) out.push_back(&p);
        else out.push_back(this);
        return out;
    }

    friend bool operator==(const Operator& a, const Operator& b);

private:
    void validate() const;
    Rep rep_;
};

inline bool operator==(const DirectSum& a, const DirectSum& b) { return a.parts == b.parts; }
inline bool operator==(const Operator& a, const Operator& b) { return a.rep_ == b.rep_; }

inline void Operator::validate() const {
    std::visit(
        [](const auto& r) {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, Diagonal>) {
                auto check = [](const DiagEntry& e) {
                    if (std::abs(e.value) > 1.0 + 1e-12) throw ValidationError("diagonal entry exceeds modulus 1");
                };
                for (const auto& [slot, e] : r.entries) {
                    check(e);
                    if (r.dimension && slot >= *r.dimension) throw ValidationError("diagonal entry beyond dimension");
                }
                check(r.tail.constant);
                for (const auto& e : r.tail.cycle) check(e);
                if (r.dimension && *r.dimension == 0) throw ValidationError("diagonal dimension must be positive");
            } else if constexpr (std::is_same_v<R, RightShift>) {
                if (r.block == 0) throw ValidationError("shift block dimension must be >= 1");
            } else if constexpr (std::is_same_v<R, CyclicMix>) {
                if (r.period == 0 || r.block == 0) throw ValidationError("cyclic period and block must be >= 1");
                if (r.period > std::numeric_limits<std::uint64_t>::max() / r.block)
                    throw CapacityError("cyclic window overflows slot indices");
            } else if constexpr (std::is_same_v<R, Dense>) {
                if (r.matrix.rows() == 0) throw ValidationError("dense operator must have positive dimension");
                check_dense_dimension(r.matrix);
                if (!r.matrix.allFinite()) throw ValidationError("dense operator has non-finite entries");
            } else if constexpr (std::is_same_v<R, SpectralUnitary>) {
                if (!r.measure) throw ValidationError("spectral operator needs a measure");
                if (r.symbol) {
                    const auto& s = *r.symbol;
                    if (s.values.empty() || s.breaks.size() != s.values.size() + 1 || s.breaks.front() != 0.0 ||
                        s.breaks.back() != 1.0)
                        throw ValidationError("symbol must be a step function covering [0, 1)");
                    for (std::size_t k = 1; k < s.breaks.size(); ++k)
                        if (!(s.breaks[k] > s.breaks[k - 1])) throw ValidationError("symbol breaks must increase");
                    for (const auto& e : s.values)
                        if (!e.unimodular()) throw ValidationError("symbol values must be unimodular");
                }
            } else {
                if (r.parts.empty()) throw ValidationError("direct sum needs at least one branch");
                for (const auto& p : r.parts)
                    if (p.template as<DirectSum>()) throw ValidationError("nested direct sums are not supported");
            }
        },
        rep_);
}

/// Space the operator acts on.
inline Space space_of(const Operator& op) {
    Space s;
    for (const Operator* b : op.branches()) {
        BranchSpace bs;
        if (const auto* d = b->as<Diagonal>()) bs.dimension = d->dimension;
        else if (const auto* m = b->as<Dense>()) bs.dimension = static_cast<std::uint64_t>(m->matrix.rows());
        else if (const auto* u = b->as<SpectralUnitary>()) {
            bs.kind = BranchSpace::Kind::spectral;
            bs.measure = u->measure;
        }
        s.branches.push_back(std::move(bs));
    }
    return s;
}

enum class Direction { forward, adjoint };

namespace detail {

inline void require_coordinates_only(const Vector& part, std::uint64_t branch) {
    if (!part.fields().empty())
        throw KindMismatch("function component on coordinate branch " + std::to_string(branch));
}

inline void require_slot(std::optional<std::uint64_t> dim, std::uint64_t slot, std::uint64_t branch) {
    if (dim && slot >= *dim)
        throw KindMismatch("slot " + std::to_string(slot) + " exceeds dimension of branch " + std::to_string(branch));
}

inline Matrix matrix_power(Matrix a, std::uint64_t n) {
    Matrix r = Matrix::Identity(a.rows(), a.cols());
    for (; n > 0; n >>= 1) {
        if (n & 1U) r = a * r;
        if (n > 1) a = a * a;
    }
    return r;
}

inline Vector leaf_power(const Operator& op, std::uint64_t n, Direction dir, const Vector& part, std::uint64_t b) {
    const bool adj = dir == Direction::adjoint;
    Vector out;
    if (const auto* d = op.as<Diagonal>()) {
        require_coordinates_only(part, b);
        for (const auto& [idx, a] : part.coords().entries()) {
            require_slot(d->dimension, idx.slot, b);
            const DiagEntry e = d->at(idx.slot).pow(n);
            out.coords().add(idx, (adj ? std::conj(e.value) : e.value) * a);
        }
        return out;
    }
    if (const auto* s = op.as<RightShift>()) {
        require_coordinates_only(part, b);
        const unsigned __int128 step = static_cast<unsigned __int128>(n) * s->block;
        for (const auto& [idx, a] : part.coords().entries()) {
            if (adj) {
                if (step <= idx.slot) out.coords().add({b, idx.slot - static_cast<std::uint64_t>(step)}, a);
                continue;
            }
            const unsigned __int128 target = step + idx.slot;
            if (target > std::numeric_limits<std::uint64_t>::max())
                throw CapacityError("shift power overflows slot index");
            out.coords().add({b, static_cast<std::uint64_t>(target)}, a);
        }
        return out;
    }
    if (const auto* c = op.as<CyclicMix>()) {
        require_coordinates_only(part, b);
        const std::uint64_t r = n % c->period;
        for (const auto& [idx, a] : part.coords().entries()) {
            const std::uint64_t blk = idx.slot / c->block;
            if (blk >= c->period) {
                out.coords().add(idx, a);
                continue;
            }
            const std::uint64_t moved = adj ? (blk + c->period - r) % c->period : (blk + r) % c->period;
            out.coords().add({b, moved * c->block + idx.slot % c->block}, a);
        }
        return out;
    }
    if (const auto* m = op.as<Dense>()) {
        require_coordinates_only(part, b);
        const auto dim = static_cast<std::uint64_t>(m->matrix.rows());
        ColumnVector v = ColumnVector::Zero(m->matrix.rows());
        for (const auto& [idx, a] : part.coords().entries()) {
            require_slot(dim, idx.slot, b);
            v(static_cast<Eigen::Index>(idx.slot)) = a;
        }
        const Matrix base = adj ? Matrix(m->matrix.adjoint()) : m->matrix;
        if (n <= 64) {
            for (std::uint64_t k = 0; k < n; ++k) v = base * v;
        } else {
            v = matrix_power(base, n) * v;
        }
        for (Eigen::Index i = 0; i < v.size(); ++i) out.coords().add({b, static_cast<std::uint64_t>(i)}, v(i));
        return out;
    }
    if (const auto* u = op.as<SpectralUnitary>()) {
        if (!part.coords().empty())
            throw KindMismatch("coordinate entries on spectral branch " + std::to_string(b));
        const Field* f = part.field(b);
        if (!f) return out;
        Field g;
        if (u->symbol) {
            const StepFunction psi = u->symbol->power(n, adj);
            for (const auto& [mode, h] : f->modes) g.modes.emplace(mode, h * psi);
            for (const auto& [t, v] : f->points) g.points.emplace(t, v * psi(t));
        } else {
            if (n > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max() / 2))
                throw CapacityError("spectral power overflows the mode index");
            const auto sn = adj ? -static_cast<std::int64_t>(n) : static_cast<std::int64_t>(n);
            for (const auto& [mode, h] : f->modes) {
                if ((sn > 0 && mode > std::numeric_limits<std::int64_t>::max() - sn) ||
                    (sn < 0 && mode < std::numeric_limits<std::int64_t>::min() - sn))
                    throw CapacityError("spectral power overflows the mode index");
                g.modes.emplace(mode + sn, h);
            }
            for (const auto& [t, v] : f->points) g.points.emplace(t, v * turn(sn, t));
        }
        out.set_field(b, std::move(g));
        return out;
    }
    throw ValidationError("nested direct sums are not supported");
}

} // namespace detail

/// T^n x (or (T*)^n x). A direct sum acts blockwise on the branches; any other
/// operator acts on branch 0.
inline Vector apply_power(const Operator& op, std::uint64_t n, const Vector& x, Direction dir = Direction::forward) {
    const auto parts = op.branches();
    for (std::uint64_t b : x.occupied_branches())
        if (b >= parts.size())
            throw KindMismatch("vector has content on branch " + std::to_string(b) + " outside the operator's space");
    if (n == 0) {
        check_membership(space_of(op), x);
        return x;
    }
    if (parts.size() == 1 && parts[0] == &op) return detail::leaf_power(op, n, dir, x, 0);
    Vector out;
    for (std::uint64_t b : x.occupied_branches()) out += detail::leaf_power(*parts[b], n, dir, x.restrict_to(b), b);
    return out;
}

inline Vector apply(const Operator& op, const Vector& x) { return apply_power(op, 1, x); }
inline Vector apply_adjoint(const Operator& op, const Vector& x) { return apply_power(op, 1, x, Direction::adjoint); }

inline SparseVector apply_power(const Operator& op, std::uint64_t n, const SparseVector& x,
                                Direction dir = Direction::forward) {
    return apply_power(op, n, Vector(x), dir).coords();
}
inline SparseVector apply(const Operator& op, const SparseVector& x) { return apply_power(op, 1, x); }
inline SparseVector apply_adjoint(const Operator& op, const SparseVector& x) {
    return apply_power(op, 1, x, Direction::adjoint);
}

/// Multiplication operators on a single spectral branch act on step functions directly.
inline StepFunction apply(const Operator& op, const StepFunction& f) {
    const Vector r = apply(op, Vector::function(f));
    const Field* g = r.field(0);
    if (!g) return {};
    if (!g->points.empty() || g->modes.size() != 1 || g->modes.begin()->first != 0)
        throw KindMismatch("result is not a step function; use Vector");
    return g->modes.begin()->second;
}

enum class OperatorClass { none, contraction, isometry, unitary };

inline std::string to_string(OperatorClass c) {
    switch (c) {
    case OperatorClass::none: return "none";
    case OperatorClass::contraction: return "contraction";
    case OperatorClass::isometry: return "isometry";
    case OperatorClass::unitary: return "unitary";
    }
    return "none";
}

struct ClassReport {
    OperatorClass cls = OperatorClass::none;
    double norm = 0.0;              ///< operator norm (exact or estimated)
    double isometry_defect = 0.0;   ///< ||T*T - I||
    double coisometry_defect = 0.0; ///< ||TT* - I||
    std::vector<std::string> evidence;
};

namespace detail {

inline void diagonal_modulus_range(const Diagonal& d, double& lo, double& hi) {
    lo = std::numeric_limits<double>::infinity();
    hi = 0.0;
    auto take = [&](const DiagEntry& e) {
        const double r = e.angle ? 1.0 : std::abs(e.value);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    };
    for (const auto& [_, e] : d.entries) take(e);
    const bool tail_used = !d.dimension || d.entries.size() < *d.dimension;
    if (tail_used) {
        switch (d.tail.kind) {
        case DiagonalTail::Kind::identity: take(DiagEntry{}); break;
        case DiagonalTail::Kind::constant: take(d.tail.constant); break;
        case DiagonalTail::Kind::rotation: take(DiagEntry{}); break;
        case DiagonalTail::Kind::cycle:
            for (const auto& e : d.tail.cycle) take(e);
            break;
        }
    }
    if (lo > hi) lo = hi = 1.0;
}

inline ClassReport classify_leaf(const Operator& op, double tol) {
    ClassReport r;
    if (const auto* d = op.as<Diagonal>()) {
        double lo = 0.0, hi = 0.0;
        diagonal_modulus_range(*d, lo, hi);
        r.norm = hi;
        r.isometry_defect = r.coisometry_defect = std::max(std::abs(hi * hi - 1.0), std::abs(lo * lo - 1.0));
        if (r.isometry_defect <= tol) {
            r.cls = OperatorClass::unitary;
            r.evidence.push_back("diagonal: every entry unimodular");
        } else {
            r.cls = OperatorClass::contraction;
            r.evidence.push_back("diagonal: entries in the closed disk, min modulus " + std::to_string(lo));
        }
        return r;
    }
    if (op.as<RightShift>()) {
        r.cls = OperatorClass::isometry;
        r.norm = 1.0;
        r.coisometry_defect = 1.0;
        r.evidence.push_back("shift: isometry, not unitary (first block is not in the range)");
        return r;
    }
    if (op.as<CyclicMix>()) {
        r.cls = OperatorClass::unitary;
        r.norm = 1.0;
        r.evidence.push_back("cyclic: permutation of the first blocks, identity beyond");
        return r;
    }
    if (const auto* m = op.as<Dense>()) {
        const Matrix& a = m->matrix;
        const Matrix eye = Matrix::Identity(a.rows(), a.cols());
        Eigen::SelfAdjointEigenSolver<Matrix> s1(a.adjoint() * a - eye, Eigen::EigenvaluesOnly);
        Eigen::SelfAdjointEigenSolver<Matrix> s2(a * a.adjoint() - eye, Eigen::EigenvaluesOnly);
        r.isometry_defect = s1.eigenvalues().cwiseAbs().maxCoeff();
        r.coisometry_defect = s2.eigenvalues().cwiseAbs().maxCoeff();
        r.norm = std::sqrt(std::max(0.0, 1.0 + s1.eigenvalues().maxCoeff()));
        if (r.isometry_defect <= tol && r.coisometry_defect <= tol) r.cls = OperatorClass::unitary;
        else if (r.isometry_defect <= tol) r.cls = OperatorClass::isometry;
        else if (r.norm <= 1.0 + tol) r.cls = OperatorClass::contraction;
        r.evidence.push_back("dense: ||T*T - I|| = " + std::to_string(r.isometry_defect) +
                             ", ||TT* - I|| = " + std::to_string(r.coisometry_defect) +
                             ", ||T|| = " + std::to_string(r.norm));
        return r;
    }
    if (op.as<SpectralUnitary>()) {
        r.cls = OperatorClass::unitary;
        r.norm = 1.0;
        r.evidence.push_back("spectral: multiplication by a unimodular function");
        return r;
    }
    throw ValidationError("nested direct sums are not supported");
}

} // namespace detail

/// Strongest class certified within tol; a direct sum gets the weakest class of its branches.
inline ClassReport classify_operator(const Operator& op, double tol = 1e-10) {
    if (!(tol > 0.0)) throw DomainError("classification tolerance must be positive");
    const auto parts = op.branches();
    if (parts.size() == 1 && parts[0] == &op) return detail::classify_leaf(op, tol);
    ClassReport out;
    out.cls = OperatorClass::unitary;
    for (std::size_t b = 0; b < parts.size(); ++b) {
        ClassReport r = detail::classify_leaf(*parts[b], tol);
        out.cls = std::min(out.cls, r.cls);
        out.norm = std::max(out.norm, r.norm);
        out.isometry_defect = std::max(out.isometry_defect, r.isometry_defect);
        out.coisometry_defect = std::max(out.coisometry_defect, r.coisometry_defect);
        for (auto& e : r.evidence) out.evidence.push_back("branch " + std::to_string(b) + ": " + e);
    }
    return out;
}

/// sup over slots of |a_k - b_k|. Tails are compared over one common period
/// past the explicit entries.
inline double diagonal_distance(const Diagonal& a, const Diagonal& b) {
    if (a.dimension != b.dimension) throw DomainError("diagonals act on spaces of different dimension");
    double sup = 0.0;
    std::uint64_t last = 0;
    for (const auto* d : {&a, &b})
        for (const auto& [slot, _] : d->entries) {
            sup = std::max(sup, std::abs(a.at(slot).value - b.at(slot).value));
            last = std::max(last, slot + 1);
        }
    const std::uint64_t pa = a.tail.slot_period(), pb = b.tail.slot_period();
    const std::uint64_t g = std::gcd(pa, pb);
    if (pa / g > 1'000'000 / pb) throw DomainError("diagonal tails are incomparable: common period exceeds 10^6");
    const std::uint64_t period = pa / g * pb;
    std::uint64_t end = last + period;
    if (a.dimension) end = std::min(end, *a.dimension);
    for (std::uint64_t s = last; s < end; ++s) {
        if (a.entries.count(s) || b.entries.count(s)) continue;
        sup = std::max(sup, std::abs(a.tail.at(s).value - b.tail.at(s).value));
    }
    return sup;
}

inline double diagonal_distance(const Operator& a, const Operator& b) {
    const auto* da = a.as<Diagonal>();
    const auto* db = b.as<Diagonal>();
    if (!da || !db) throw KindMismatch("diagonal_distance needs two diagonal operators");
    return diagonal_distance(*da, *db);
}

/// Smallest n >= 1 with T^n = I when the representation certifies one.
inline std::optional<std::uint64_t> period_of(const Operator& op) {
    std::uint64_t p = 1;
    auto take = [&](const DiagEntry& e) {
        if (e.angle) {
            p = detail::checked_lcm(p, e.angle->q);
            return true;
        }
        return e.value == Complex(1.0, 0.0);
    };
    for (const Operator* b : op.branches()) {
        if (const auto* d = b->as<Diagonal>()) {
            for (const auto& [_, e] : d->entries)
                if (!take(e)) return std::nullopt;
            if (d->dimension && d->entries.size() >= *d->dimension) continue;
            switch (d->tail.kind) {
            case DiagonalTail::Kind::identity: break;
            case DiagonalTail::Kind::constant:
                if (!take(d->tail.constant)) return std::nullopt;
                break;
            case DiagonalTail::Kind::rotation:
                if (d->tail.q <= 1'000'000) {
                    for (std::uint64_t s = 0; s < d->tail.q; ++s) take(d->tail.at(s));
                } else {
                    const auto g = std::gcd(std::gcd(static_cast<std::uint64_t>(std::abs(d->tail.a)),
                                                     static_cast<std::uint64_t>(std::abs(d->tail.b))),
                                            d->tail.q);
                    p = detail::checked_lcm(p, d->tail.q / g);
                }
                break;
            case DiagonalTail::Kind::cycle:
                for (const auto& e : d->tail.cycle)
                    if (!take(e)) return std::nullopt;
                break;
            }
        } else if (const auto* c = b->as<CyclicMix>()) {
            p = detail::checked_lcm(p, c->period);
        } else if (const auto* u = b->as<SpectralUnitary>()) {
            if (!u->symbol) return std::nullopt;
            for (const auto& e : u->symbol->values)
                if (!take(e)) return std::nullopt;
        } else {
            return std::nullopt;
        }
    }
    return p;
}

} // namespace opstab
