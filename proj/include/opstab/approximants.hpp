#pragma once

// Approximation procedures: periodic approximants of unitaries (snapping to a
// Farey mesh), atom-free perturbations of the identity, atom-free
// approximants of periodic unitaries near finitely many vectors, cyclic
// approximants of the shift, and their combination for isometries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "opstab/error.hpp"
#include "opstab/measure.hpp"
#include "opstab/operator.hpp"
#include "opstab/spectral.hpp"
#include "opstab/vector.hpp"

namespace opstab {

struct ApproxReport {
    double requested_epsilon = 0.0;
    double achieved = 0.0; ///< achieved distance (exact sup where a closed form exists)
    double bound = 0.0;    ///< certified upper bound
    std::optional<std::uint64_t> period;
    std::optional<std::uint64_t> period_floor; ///< N; period must exceed it
    std::string certificate;
    std::vector<double> forward_errors; ///< per probe
    std::vector<double> adjoint_errors; ///< per probe
    std::vector<std::pair<std::string, double>> figures;
};

// ---------------------------------------------------------------------------
// Farey mesh {p/q : gcd(p, q) = 1, N < q <= Q}

/// Mesh of rational angles with denominators in (N, q_max]. Every gap is at
/// most max_gap turns and 2 sin(pi max_gap) < epsilon.
struct FareyMesh {
    std::uint64_t floor = 1; ///< N
    std::uint64_t q_max = 2;
    double max_gap = 1.0; ///< turns
    bool closed_form = true;
    bool prime_grid = false; ///< only {p/q_max : 0 < p < q_max}, q_max prime

    double max_chord() const { return 2.0 * std::sin(M_PI * max_gap); }
};

namespace detail {

/// Max gap (turns, cyclically) of {p/q : N < q <= Q} by walking the Farey sequence F_Q.
inline double enumerated_max_gap(std::uint64_t n, std::uint64_t q_max) {
    std::uint64_t a = 0, b = 1, c = 1, d = q_max;
    double first = -1.0, prev = -1.0, gap = 0.0;
    while (c != d) {
        if (d > n) {
            const double v = static_cast<double>(c) / static_cast<double>(d);
            if (first < 0.0) first = v;
            else gap = std::max(gap, v - prev);
            prev = v;
        }
        const std::uint64_t k = (q_max + b) / d;
        const std::uint64_t e = k * c - a, f = k * d - b;
        a = c;
        b = d;
        c = e;
        d = f;
    }
    if (first < 0.0) return 1.0;
    return std::max(gap, first + 1.0 - prev);
}

} // namespace detail

/// Smallest q_max whose mesh has all chords below epsilon. The gap around 0
/// is always 2/Q; for Q >= 2N + 1 it is also the largest gap, which gives a
/// closed form. Smaller Q are searched by enumeration.
inline FareyMesh make_mesh(std::uint64_t n, double epsilon) {
    if (n < 1) throw DomainError("period floor N must be >= 1");
    if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
    auto chord_ok = [&](std::uint64_t q) { return 2.0 * std::sin(kTwoPi / static_cast<double>(q)) < epsilon; };
    std::uint64_t q0 = std::max<std::uint64_t>(n + 1, 4);
    if (!chord_ok(q0)) {
        const double guess = kTwoPi / std::asin(std::min(1.0, epsilon / 2.0));
        if (guess > 1e12) throw CapacityError("epsilon too small for a 64-bit mesh");
        q0 = std::max(q0, static_cast<std::uint64_t>(guess) > 2 ? static_cast<std::uint64_t>(guess) - 2 : 4);
        while (!chord_ok(q0)) ++q0;
    }
    FareyMesh m;
    m.floor = n;
    if (q0 >= 2 * n + 1) {
        m.q_max = q0;
        m.max_gap = 2.0 / static_cast<double>(q0);
        return m;
    }
    m.closed_form = false;
    std::uint64_t hi = 2 * n + 1;
    if (hi * hi > 40'000'000ULL) {
        // Enumeration too large: fall back to the closed-form size.
        m.q_max = hi;
        m.max_gap = 2.0 / static_cast<double>(hi);
        return m;
    }
    auto ok = [&](std::uint64_t q) { return 2.0 * std::sin(M_PI * detail::enumerated_max_gap(n, q)) < epsilon; };
    std::uint64_t lo = q0;
    while (lo < hi) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        if (ok(mid)) hi = mid;
        else lo = mid + 1;
    }
    m.q_max = lo;
    m.max_gap = detail::enumerated_max_gap(n, lo);
    return m;
}

/// Sub-mesh {p/P : 0 < p < P} of the Farey mesh with P prime: every point
/// has order exactly P, so snapped operators have period P. Gaps are 1/P
/// except 2/P around 0.
inline FareyMesh make_prime_mesh(std::uint64_t n, double epsilon) {
    const FareyMesh base = make_mesh(n, epsilon);
    auto is_prime = [](std::uint64_t v) {
        if (v < 2) return false;
        for (std::uint64_t d = 2; d * d <= v; ++d)
            if (v % d == 0) return false;
        return true;
    };
    std::uint64_t p = std::max(base.q_max, 2 * n + 1);
    while (!is_prime(p)) ++p;
    FareyMesh m;
    m.floor = n;
    m.q_max = p;
    m.max_gap = 2.0 / static_cast<double>(p);
    m.prime_grid = true;
    return m;
}

/// Largest mesh point <= t, wrapping to (Q-1)/Q below the first point. Exact.
inline RationalAngle snap_down(const FareyMesh& mesh, RationalAngle t) {
    if (mesh.prime_grid) {
        const auto p = static_cast<std::uint64_t>(static_cast<unsigned __int128>(t.p) * mesh.q_max / t.q);
        return p == 0 ? RationalAngle{mesh.q_max - 1, mesh.q_max} : RationalAngle{p, mesh.q_max};
    }
    std::optional<RationalAngle> best;
    for (std::uint64_t q = mesh.floor + 1; q <= mesh.q_max; ++q) {
        auto p = static_cast<std::uint64_t>(static_cast<unsigned __int128>(t.p) * q / t.q);
        while (p >= 1 && std::gcd(p, q) != 1) --p;
        if (p == 0) continue;
        const RationalAngle c{p, q};
        if (!best || *best < c) best = c;
    }
    return best ? *best : RationalAngle{mesh.q_max - 1, mesh.q_max};
}

/// Largest mesh point <= t (t in turns, [0, 1)).
inline RationalAngle snap_down(const FareyMesh& mesh, double t) {
    std::optional<RationalAngle> best;
    const long double lt = t;
    if (mesh.prime_grid) {
        const long double lq = static_cast<long double>(mesh.q_max);
        auto p = static_cast<std::uint64_t>(std::floor(lt * lq));
        while (p > 0 && static_cast<long double>(p) / lq > lt) --p;
        while (p + 1 < mesh.q_max && static_cast<long double>(p + 1) / lq <= lt) ++p;
        return p == 0 ? RationalAngle{mesh.q_max - 1, mesh.q_max} : RationalAngle{p, mesh.q_max};
    }
    for (std::uint64_t q = mesh.floor + 1; q <= mesh.q_max; ++q) {
        const long double lq = static_cast<long double>(q);
        auto p = static_cast<std::uint64_t>(std::floor(lt * lq));
        while (p > 0 && static_cast<long double>(p) / lq > lt) --p;
        while (p + 1 < q && static_cast<long double>(p + 1) / lq <= lt) ++p;
        while (p >= 1 && std::gcd(p, q) != 1) --p;
        if (p == 0) continue;
        const RationalAngle c{p, q};
        if (!best || *best < c) best = c;
    }
    return best ? *best : RationalAngle{mesh.q_max - 1, mesh.q_max};
}

/// Mesh points strictly inside (a, b), sorted.
inline std::vector<RationalAngle> mesh_points_between(const FareyMesh& mesh, double a, double b,
                                                      std::size_t cap = 20'000'000) {
    std::vector<RationalAngle> out;
    for (std::uint64_t q = mesh.prime_grid ? mesh.q_max : mesh.floor + 1; q <= mesh.q_max; ++q) {
        const double lq = static_cast<double>(q);
        auto p = static_cast<std::uint64_t>(std::max(0.0, std::floor(a * lq)));
        for (; p < q; ++p) {
            const double v = static_cast<double>(p) / lq;
            if (v >= b) break;
            if (v <= a || std::gcd(p, q) != 1) continue;
            out.push_back({p, q});
            if (out.size() > cap) throw CapacityError("mesh restricted to the support is too large");
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace detail {

inline DiagEntry snap_entry(const FareyMesh& mesh, const DiagEntry& e) {
    if (e.angle) return DiagEntry::from_angle(snap_down(mesh, *e.angle));
    if (std::abs(std::abs(e.value) - 1.0) > 1e-10)
        throw ClassMismatch("periodic approximation needs a unitary (entry of modulus " +
                            std::to_string(std::abs(e.value)) + ")");
    return DiagEntry::from_angle(snap_down(mesh, frac(std::arg(e.value) / kTwoPi)));
}

inline Diagonal snap_diagonal(const FareyMesh& mesh, const Diagonal& d) {
    Diagonal p;
    p.dimension = d.dimension;
    for (const auto& [slot, e] : d.entries) p.entries.emplace(slot, snap_entry(mesh, e));
    switch (d.tail.kind) {
    case DiagonalTail::Kind::identity: p.tail = DiagonalTail::constant_of(snap_entry(mesh, DiagEntry{})); break;
    case DiagonalTail::Kind::constant: p.tail = DiagonalTail::constant_of(snap_entry(mesh, d.tail.constant)); break;
    case DiagonalTail::Kind::rotation: {
        if (d.tail.q > 1'000'000) throw CapacityError("rotation tail period too large to snap");
        std::vector<DiagEntry> cyc;
        cyc.reserve(d.tail.q);
        for (std::uint64_t s = 0; s < d.tail.q; ++s) cyc.push_back(snap_entry(mesh, d.tail.at(s)));
        p.tail = DiagonalTail::cycle_of(std::move(cyc));
        break;
    }
    case DiagonalTail::Kind::cycle: {
        std::vector<DiagEntry> cyc;
        for (const auto& e : d.tail.cycle) cyc.push_back(snap_entry(mesh, e));
        p.tail = DiagonalTail::cycle_of(std::move(cyc));
        break;
    }
    }
    // A constant cycle is a constant tail.
    if (p.tail.kind == DiagonalTail::Kind::cycle &&
        std::all_of(p.tail.cycle.begin(), p.tail.cycle.end(), [&](const DiagEntry& e) { return e == p.tail.cycle[0]; }))
        p.tail = DiagonalTail::constant_of(p.tail.cycle[0]);
    return p;
}

/// Closed support pieces [a, b] of mu (atoms as degenerate intervals).
inline std::vector<std::pair<double, double>> support_intervals(const SpectralMeasure& mu) {
    std::vector<std::pair<double, double>> out;
    for (const Atom& a : mu.atoms()) out.emplace_back(a.location, a.location);
    const auto& d = mu.density();
    for (std::size_t k = 0; k < d.pieces(); ++k)
        if (d.values()[k] != Complex{}) out.emplace_back(d.breakpoints()[k], d.breakpoints()[k + 1]);
    if (const auto& s = mu.self_similar()) out.emplace_back(s->hull_low(), std::min(1.0, s->hull_high()));
    return out;
}

inline SpectralSymbol snap_symbol(const FareyMesh& mesh, const SpectralUnitary& u) {
    SpectralSymbol out;
    if (u.symbol) {
        out.breaks = u.symbol->breaks;
        for (const auto& e : u.symbol->values) out.values.push_back(snap_entry(mesh, e));
        return out;
    }
    std::vector<double> breaks{0.0};
    for (const auto& [a, b] : support_intervals(*u.measure)) {
        const RationalAngle s = snap_down(mesh, a);
        if (s.turns() <= a) breaks.push_back(s.turns());
        for (const RationalAngle& r : mesh_points_between(mesh, a, b, 1'000'000)) breaks.push_back(r.turns());
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    for (double t : breaks) out.values.push_back(DiagEntry::from_angle(snap_down(mesh, t)));
    breaks.push_back(1.0);
    out.breaks = std::move(breaks);
    // Merge neighbours with the same value.
    SpectralSymbol merged;
    merged.breaks.push_back(0.0);
    for (std::size_t k = 0; k < out.values.size(); ++k) {
        if (!merged.values.empty() && merged.values.back() == out.values[k]) {
            merged.breaks.back() = out.breaks[k + 1];
            continue;
        }
        merged.values.push_back(out.values[k]);
        merged.breaks.push_back(out.breaks[k + 1]);
    }
    return merged;
}

} // namespace detail

namespace detail {

inline std::pair<Operator, ApproxReport> periodic_snap(const Operator& u, const FareyMesh& mesh, double epsilon) {
    const std::uint64_t n = mesh.floor;
    ApproxReport rep;
    rep.requested_epsilon = epsilon;
    rep.period_floor = n;
    rep.bound = mesh.max_chord();
    rep.figures = {{"q_max", static_cast<double>(mesh.q_max)}, {"mesh_gap_turns", mesh.max_gap}};

    auto snap_leaf = [&](const Operator& leaf) -> Operator {
        if (const auto* d = leaf.as<Diagonal>()) return snap_diagonal(mesh, *d);
        if (const auto* s = leaf.as<SpectralUnitary>()) return SpectralUnitary{s->measure, snap_symbol(mesh, *s)};
        throw KindMismatch("periodic_approx_unitary takes diagonal or spectral operators, got " + leaf.kind_name());
    };
    std::vector<Operator> parts;
    for (const Operator* b : u.branches()) parts.push_back(snap_leaf(*b));
    Operator p = u.as<DirectSum>() ? Operator::direct_sum(std::move(parts)) : std::move(parts.front());

    double achieved = 0.0;
    bool exact = true;
    const auto ub = u.branches();
    const auto pb = p.branches();
    for (std::size_t k = 0; k < ub.size(); ++k) {
        if (const auto* d = ub[k]->as<Diagonal>()) achieved = std::max(achieved, diagonal_distance(*d, *pb[k]->as<Diagonal>()));
        else exact = false;
    }
    rep.achieved = exact ? achieved : rep.bound;
    rep.period = period_of(p);
    if (!rep.period || *rep.period <= n) throw NumericalError("periodic approximant failed its period certificate");
    rep.certificate = "period " + std::to_string(*rep.period) + " > " + std::to_string(n) +
                      (mesh.prime_grid ? " on the prime grid " + std::to_string(mesh.q_max) : std::string{}) +
                      (exact ? "; distance is the exact sup over entries" : "; distance bounded by the mesh chord");
    return {std::move(p), std::move(rep)};
}

} // namespace detail

/// Periodic unitary with period > N within epsilon in operator norm: every
/// angle is snapped down to the left end of its mesh arc. When the Farey
/// mesh yields a period beyond 64 bits (or too many support pieces), the
/// prime sub-mesh is used instead.
inline std::pair<Operator, ApproxReport> periodic_approx_unitary(const Operator& u, std::uint64_t n, double epsilon) {
    try {
        return detail::periodic_snap(u, make_mesh(n, epsilon), epsilon);
    } catch (const CapacityError&) {
        return detail::periodic_snap(u, make_prime_mesh(n, epsilon), epsilon);
    }
}

// ---------------------------------------------------------------------------
// Atom-free perturbations: multiplication by e^{i q(s)/n} on L^2[s_0, s_k]

/// Strictly increasing piecewise-linear map from [s_0, s_k] into [0, 1].
struct PiecewiseLinear {
    std::vector<double> s{0.0, 1.0};
    std::vector<double> q{0.0, 1.0};

    static PiecewiseLinear identity() { return {}; }

    void validate() const {
        if (s.size() < 2 || s.size() != q.size()) throw DomainError("q needs at least two knots, one value each");
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (!std::isfinite(s[k]) || !std::isfinite(q[k])) throw DomainError("q knots must be finite");
            if (q[k] < 0.0 || q[k] > 1.0) throw DomainError("q must map into [0, 1]");
            if (k > 0 && (!(s[k] > s[k - 1]) || !(q[k] > q[k - 1]))) throw DomainError("q must be strictly increasing");
        }
    }

    double operator()(double x) const {
        auto it = std::upper_bound(s.begin(), s.end(), x);
        if (it == s.begin()) return q.front();
        if (it == s.end()) return q.back();
        const auto k = static_cast<std::size_t>(it - s.begin()) - 1;
        if (x == s[k]) return q[k];
        return q[k] + (q[k + 1] - q[k]) * (x - s[k]) / (s[k + 1] - s[k]);
    }
    double max_value() const { return q.back(); }
};

namespace detail {

/// Moves the part of g on [1, 2) to [0, 1).
inline StepFunction wrap_unit(const StepFunction& g) {
    if (g.breakpoints().empty() || g.upper() <= 1.0) return g;
    std::vector<double> lb, rb;
    std::vector<Complex> lv, rv;
    const auto& br = g.breakpoints();
    for (std::size_t k = 0; k < g.pieces(); ++k) {
        const double a = br[k], b = br[k + 1];
        if (b <= 1.0) {
            if (lb.empty()) lb.push_back(a);
            lv.push_back(g.values()[k]);
            lb.push_back(b);
        } else if (a >= 1.0) {
            if (rb.empty()) rb.push_back(a - 1.0);
            rv.push_back(g.values()[k]);
            rb.push_back(b - 1.0);
        } else {
            if (lb.empty()) lb.push_back(a);
            lv.push_back(g.values()[k]);
            lb.push_back(1.0);
            rb.push_back(0.0);
            rv.push_back(g.values()[k]);
            rb.push_back(b - 1.0);
        }
    }
    StepFunction left = lv.empty() ? StepFunction{} : StepFunction(lb, lv);
    StepFunction right = rv.empty() ? StepFunction{} : StepFunction(rb, rv);
    return left + right;
}

/// Pushforward of Lebesgue measure on [s_0, s_k] under theta = base + q(s) / (2 pi n) mod 1.
struct Pushforward {
    double base = 0.0;
    std::uint64_t n = 1;
    PiecewiseLinear q;

    double u(double s) const { return base + q(s) / (kTwoPi * static_cast<double>(n)); }

    SpectralMeasure measure() const {
        std::vector<double> br;
        std::vector<Complex> vals;
        for (std::size_t k = 0; k < q.s.size(); ++k) br.push_back(u(q.s[k]));
        for (std::size_t k = 0; k + 1 < br.size(); ++k) vals.push_back((q.s[k + 1] - q.s[k]) / (br[k + 1] - br[k]));
        return SpectralMeasure({}, wrap_unit(StepFunction(br, vals)), std::nullopt);
    }

    /// f(s) as a function of theta.
    StepFunction embed(const StepFunction& f) const {
        if (f.breakpoints().empty()) return {};
        if (f.lower() < q.s.front() || f.upper() > q.s.back())
            throw DomainError("step function is not supported in the domain of q");
        std::vector<double> br;
        for (double b : f.breakpoints()) br.push_back(u(b));
        return wrap_unit(StepFunction(br, f.values()));
    }
};

} // namespace detail

struct AwsIdentity {
    Operator op;
    ApproxReport report;
    std::function<Vector(const StepFunction&)> embed; ///< L^2[s_0, s_k] -> L^2(mu)
};

/// Multiplication by e^{i q(s)/n} as a spectral unitary with an absolutely
/// continuous measure; its distance from I is 2 sin(q_max / (2n)) <= 2 sin(1/(2n)).
inline AwsIdentity aws_approx_identity(std::uint64_t n, const PiecewiseLinear& q = PiecewiseLinear::identity()) {
    if (n < 1) throw DomainError("n must be >= 1");
    q.validate();
    const detail::Pushforward pf{0.0, n, q};
    auto mu = std::make_shared<const SpectralMeasure>(pf.measure());
    AwsIdentity out{SpectralUnitary{mu, std::nullopt}, {}, nullptr};
    const double nn = static_cast<double>(n);
    out.report.achieved = 2.0 * std::sin(q.max_value() / (2.0 * nn));
    out.report.bound = 2.0 * std::sin(1.0 / (2.0 * nn));
    out.report.requested_epsilon = out.report.bound;
    out.report.certificate = "absolutely continuous spectral measure, atomic mass " + std::to_string(mu->atomic_mass());
    out.report.figures = {{"n", nn}, {"atomic_mass", mu->atomic_mass()}};
    out.embed = [pf](const StepFunction& f) { return Vector::function(pf.embed(f)); };
    return out;
}

// ---------------------------------------------------------------------------
// Atom-free approximation of a periodic unitary near finitely many vectors

namespace detail {

/// x split over the eigenspaces of a periodic leaf, keyed by eigenvalue angle.
inline std::map<RationalAngle, Vector> eigen_components(const Operator& leaf, std::uint64_t b, const Vector& part,
                                                        const Space& space) {
    std::map<RationalAngle, Vector> out;
    if (const auto* d = leaf.as<Diagonal>()) {
        require_coordinates_only(part, b);
        for (const auto& [idx, a] : part.coords().entries()) {
            const DiagEntry e = d->at(idx.slot);
            if (!e.angle) throw ClassMismatch("diagonal entry at slot " + std::to_string(idx.slot) + " is not a root of unity");
            out[*e.angle].coords().set(idx, a);
        }
        return out;
    }
    if (const auto* c = leaf.as<CyclicMix>()) {
        require_coordinates_only(part, b);
        const double inv = 1.0 / std::sqrt(static_cast<double>(c->period));
        std::map<std::uint64_t, bool> coords_used;
        for (const auto& [idx, a] : part.coords().entries()) {
            if (idx.slot / c->block >= c->period) out[RationalAngle{}].coords().set(idx, a);
            else coords_used[idx.slot % c->block] = true;
        }
        for (const auto& [coord, _] : coords_used) {
            for (std::uint64_t k = 0; k < c->period; ++k) {
                SparseVector v;
                for (std::uint64_t j = 0; j < c->period; ++j)
                    v.set({b, j * c->block + coord},
                          inv * RationalAngle::make(-static_cast<std::int64_t>(j * k % c->period), c->period).value());
                const Complex a = inner(part.coords(), v);
                if (a == Complex{}) continue;
                out[RationalAngle::make(static_cast<std::int64_t>(k), c->period)] += Vector(a * v);
            }
        }
        return out;
    }
    if (const auto* u = leaf.as<SpectralUnitary>()) {
        if (!u->symbol) throw ClassMismatch("spectral operator without a periodic symbol is not periodic");
        if (!part.coords().empty()) throw KindMismatch("coordinate entries on spectral branch");
        const Field* f = part.field(b);
        if (!f) return out;
        const auto& s = *u->symbol;
        for (std::size_t k = 0; k < s.values.size(); ++k) {
            if (!s.values[k].angle) throw ClassMismatch("symbol value is not a root of unity");
            const StepFunction ind = StepFunction::indicator(s.breaks[k], s.breaks[k + 1]);
            Field g;
            for (const auto& [m, h] : f->modes) g.modes.emplace(m, h * ind);
            for (const auto& [t, v] : f->points)
                if (t >= s.breaks[k] && t < s.breaks[k + 1]) g.points.emplace(t, v);
            g.normalize();
            if (g.empty()) continue;
            Vector piece;
            piece.set_field(b, std::move(g));
            out[*s.values[k].angle] += piece;
        }
        (void)space;
        return out;
    }
    throw ClassMismatch("aws_approx_periodic takes diagonal, cyclic or symbol-spectral branches, got " + leaf.kind_name());
}

} // namespace detail

struct AwsPeriodic {
    Operator t;                                      ///< atom-free unitary on the inflated space
    Operator s;                                      ///< periodic copy of U with infinite eigenspaces
    std::function<Vector(const Vector&)> embed;      ///< span of the probes' eigen-expansion -> inflated space
    std::vector<RationalAngle> eigenvalues;          ///< eigenvalue of each output branch
    ApproxReport report;
};

/// For a periodic unitary U and probes x_j: expands the probes over an
/// orthonormal eigenbasis y_1..y_K of U, embeds each eigenspace into L^2[0, 1]
/// (y_k -> normalized dyadic indicator) carried on its own branch, and places
/// lambda e^{i s/n} there, with n the smallest integer satisfying
/// 2 sin(1/(2n)) < eps / (4 K M).
inline AwsPeriodic aws_approx_periodic(const Operator& u, const std::vector<Vector>& xs, double epsilon) {
    if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
    const auto period = period_of(u);
    if (!period) throw ClassMismatch("aws_approx_periodic needs a periodic unitary");
    const Space space = space_of(u);
    for (const Vector& x : xs) {
        check_membership(space, x);
        if (x.empty()) throw DomainError("probe vectors must be nonzero");
    }

    // (a) eigen-expansion of every probe.
    const auto parts = u.branches();
    std::map<RationalAngle, std::vector<Vector>> comps; // eigenvalue -> component of each probe
    for (std::size_t j = 0; j < xs.size(); ++j) {
        for (std::uint64_t b : xs[j].occupied_branches()) {
            if (b >= parts.size()) throw KindMismatch("probe outside the operator's space");
            for (auto& [lam, v] : detail::eigen_components(*parts[b], b, xs[j].restrict_to(b), space)) {
                auto& list = comps[lam];
                list.resize(xs.size());
                list[j] += v;
            }
        }
    }
    struct Group {
        RationalAngle lambda;
        std::vector<Vector> basis; // orthonormal y_k
    };
    std::vector<Group> groups;
    std::size_t k_total = 0;
    double m_max = 0.0;
    for (auto& [lam, list] : comps) {
        std::vector<Vector> nonzero;
        for (const Vector& v : list)
            if (!v.empty()) nonzero.push_back(v);
        auto on = orthonormalize(std::span<const Vector>(nonzero),
                                 [&](const Vector& a, const Vector& b) { return inner(space, a, b); });
        if (on.basis.empty()) continue;
        k_total += on.basis.size();
        for (const Vector& x : xs)
            for (const Vector& y : on.basis) m_max = std::max(m_max, std::abs(inner(space, x, y)));
        groups.push_back({lam, std::move(on.basis)});
    }

    // (c) perturbation size.
    AwsPeriodic out{Operator::identity(), Operator::identity(), nullptr, {}, {}};
    ApproxReport& rep = out.report;
    rep.requested_epsilon = epsilon;
    const double budget = k_total > 0 ? epsilon / (4.0 * static_cast<double>(k_total) * m_max) : epsilon;
    std::uint64_t n = 1;
    if (budget < 2.0) {
        const double x = std::asin(budget / 2.0);
        n = static_cast<std::uint64_t>(std::max(1.0, std::floor(1.0 / (2.0 * x))));
        while (!(2.0 * std::sin(1.0 / (2.0 * static_cast<double>(n))) < budget)) ++n;
        while (n > 1 && 2.0 * std::sin(1.0 / (2.0 * static_cast<double>(n - 1))) < budget) --n;
    }
    rep.bound = 2.0 * std::sin(1.0 / (2.0 * static_cast<double>(n)));
    rep.figures = {{"K", static_cast<double>(k_total)},
                   {"M", m_max},
                   {"budget", budget},
                   {"n", static_cast<double>(n)},
                   {"input_period", static_cast<double>(*period)}};

    // (b) inflated copies, one branch per eigenvalue, in eigenvalue order.
    std::vector<Operator> t_parts, s_parts;
    std::vector<detail::Pushforward> maps;
    std::vector<std::uint32_t> levels;
    double atomic = 0.0;
    for (const Group& g : groups) {
        const detail::Pushforward pf{g.lambda.turns(), n, PiecewiseLinear::identity()};
        auto mu = std::make_shared<const SpectralMeasure>(pf.measure());
        atomic += mu->atomic_mass();
        t_parts.push_back(SpectralUnitary{mu, std::nullopt});
        s_parts.push_back(SpectralUnitary{mu, SpectralSymbol{{0.0, 1.0}, {DiagEntry::from_angle(g.lambda)}}});
        maps.push_back(pf);
        std::uint32_t level = 0;
        while ((std::size_t{1} << level) < g.basis.size()) ++level;
        levels.push_back(level);
        out.eigenvalues.push_back(g.lambda);
    }
    if (groups.empty()) throw DomainError("probe vectors have no eigen-expansion");
    out.t = t_parts.size() == 1 ? t_parts.front() : Operator::direct_sum(t_parts);
    out.s = s_parts.size() == 1 ? s_parts.front() : Operator::direct_sum(s_parts);

    auto embed_basis = [maps, levels](std::size_t group, std::size_t k) {
        const double width = std::ldexp(1.0, -static_cast<int>(levels[group]));
        const StepFunction ind = StepFunction::indicator(static_cast<double>(k) * width, static_cast<double>(k + 1) * width,
                                                         1.0 / std::sqrt(width));
        return Vector::function(maps[group].embed(ind), group);
    };
    out.embed = [space, groups, embed_basis](const Vector& x) {
        Vector y;
        double captured = 0.0;
        for (std::size_t g = 0; g < groups.size(); ++g)
            for (std::size_t k = 0; k < groups[g].basis.size(); ++k) {
                const Complex a = inner(space, x, groups[g].basis[k]);
                captured += std::norm(a);
                if (a != Complex{}) y += a * embed_basis(g, k);
            }
        const double nx = norm(space, x);
        if (nx * nx - captured > 1e-18 + 1e-12 * nx * nx)
            throw DomainError("vector lies outside the span of the probes' eigen-expansion");
        return y;
    };

    const Space out_space = space_of(out.t);
    for (const Vector& x : xs) {
        const Vector ex = out.embed(x);
        rep.forward_errors.push_back(norm(out_space, apply(out.s, ex) - apply(out.t, ex)));
        rep.adjoint_errors.push_back(norm(out_space, apply_adjoint(out.s, ex) - apply_adjoint(out.t, ex)));
    }
    rep.achieved = 0.0;
    for (double e : rep.forward_errors) rep.achieved = std::max(rep.achieved, e);
    for (double e : rep.adjoint_errors) rep.achieved = std::max(rep.achieved, e);
    rep.certificate = "every branch carries an absolutely continuous measure (atomic mass " + std::to_string(atomic) +
                      "); no unimodular eigenvalues";
    return out;
}

// ---------------------------------------------------------------------------
// Cyclic approximants of the unilateral shift

/// ||x_n||^2 + sum_{k >= n} ||x_{k+1} - x_k||^2 over blocks x_k (1-based) of branch b.
inline double shift_error_functional(const SparseVector& x, std::uint64_t n, std::uint64_t block, std::uint64_t b = 0) {
    const SparseVector xb = x.branch(b);
    const std::uint64_t blocks = (xb.extent(b) + block - 1) / block;
    auto block_vec = [&](std::uint64_t k, std::uint64_t c) { return xb.get({b, (k - 1) * block + c}); };
    double s = 0.0;
    for (std::uint64_t c = 0; c < block; ++c) s += std::norm(block_vec(n, c));
    for (std::uint64_t k = n; k <= std::max(blocks, n); ++k)
        for (std::uint64_t c = 0; c < block; ++c) s += std::norm(block_vec(k + 1, c) - block_vec(k, c));
    return s;
}

inline std::pair<Operator, ApproxReport> periodic_approx_shift(std::uint64_t n, std::uint64_t block,
                                                               const std::vector<SparseVector>& probes = {}) {
    if (n < 1 || block < 1) throw DomainError("cyclic approximant needs n >= 1 and block >= 1");
    Operator t = Operator::cyclic(n, block);
    const Operator r = Operator::shift(block);
    ApproxReport rep;
    rep.period = n;
    rep.certificate = "cyclic permutation of the first " + std::to_string(n) + " blocks; period " + std::to_string(n);
    for (const SparseVector& x : probes) {
        const double formula = shift_error_functional(x, n, block);
        const double computed = (apply(t, x) - apply(r, x)).norm_squared();
        rep.forward_errors.push_back(std::sqrt(computed));
        rep.figures.emplace_back("closed_form_squared", formula);
        rep.achieved = std::max(rep.achieved, std::sqrt(computed));
    }
    return {std::move(t), std::move(rep)};
}

// ---------------------------------------------------------------------------
// Isometries

enum class ApproxMode { periodic, aws };

struct IsometryApprox {
    Operator op;                                 ///< periodic mode: on V's space; aws mode: on the inflated space
    std::function<Vector(const Vector&)> embed;  ///< aws mode: probe span -> output space
    WoldSplit wold;
    ApproxReport report;
};

/// Wold-split V, replace each shift branch by a cyclic approximant whose
/// window covers the probes and exceeds N, snap the unitary branches
/// (periodic mode) and, in aws mode, run the atom-free pipeline on the
/// resulting periodic unitary with epsilon / 2 for each stage.
inline IsometryApprox approx_isometry(const Operator& v, ApproxMode mode, std::uint64_t n, double epsilon,
                                      const std::vector<Vector>& probes) {
    if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
    WoldSplit w = wold_decompose(v);
    const Space space = space_of(v);
    const double stage_eps = mode == ApproxMode::aws ? epsilon / 2.0 : epsilon;
    const auto parts = v.branches();

    // Branches already free of atoms stay as they are in aws mode.
    auto keep = [&](const Operator& p) {
        const auto* s = p.as<SpectralUnitary>();
        return mode == ApproxMode::aws && s && !s->symbol && s->measure->atoms().empty();
    };

    std::vector<Operator> periodic_parts;
    std::vector<std::uint64_t> periodic_ids, kept_ids;
    double stage_bound = 0.0;
    for (std::uint64_t b = 0; b < parts.size(); ++b) {
        const Operator& p = *parts[b];
        if (keep(p)) {
            kept_ids.push_back(b);
            continue;
        }
        periodic_ids.push_back(b);
        if (const auto* s = p.as<RightShift>()) {
            std::uint64_t extent = 0;
            for (const Vector& x : probes) extent = std::max(extent, x.coords().extent(b));
            const std::uint64_t blocks = (extent + s->block - 1) / s->block;
            periodic_parts.push_back(Operator::cyclic(std::max(n + 1, blocks + 1), s->block));
        } else if (p.as<CyclicMix>()) {
            periodic_parts.push_back(p);
        } else if (p.as<Diagonal>() || p.as<SpectralUnitary>()) {
            auto [q, r] = periodic_approx_unitary(p, n, stage_eps);
            stage_bound = std::max(stage_bound, r.bound);
            periodic_parts.push_back(std::move(q));
        } else {
            throw DomainError("approx_isometry does not snap " + p.kind_name() + " branches");
        }
    }

    IsometryApprox out{Operator::identity(), nullptr, w, {}};
    ApproxReport& rep = out.report;
    rep.requested_epsilon = epsilon;
    rep.period_floor = n;

    // Periodic operator on V's space (kept branches unchanged).
    std::vector<Operator> all(parts.size(), Operator::identity());
    for (std::size_t k = 0; k < periodic_ids.size(); ++k) all[periodic_ids[k]] = periodic_parts[k];
    for (std::uint64_t b : kept_ids) all[b] = *parts[b];
    Operator p_full = all.size() == 1 ? all.front() : Operator::direct_sum(all);

    std::vector<double> stage1;
    for (const Vector& x : probes) stage1.push_back(norm(space, apply(v, x) - apply(p_full, x)));

    if (mode == ApproxMode::periodic) {
        rep.period = period_of(p_full);
        rep.forward_errors = stage1;
        rep.bound = stage_bound;
        for (double e : stage1) rep.achieved = std::max(rep.achieved, e);
        rep.certificate = rep.period ? "periodic, period " + std::to_string(*rep.period) : "periodic branches";
        out.op = std::move(p_full);
        out.embed = [](const Vector& x) { return x; };
        return out;
    }

    // aws mode: atom-free pipeline on the periodic branches.
    std::vector<Vector> periodic_probes;
    std::map<std::uint64_t, std::uint64_t> renumber;
    for (std::size_t k = 0; k < periodic_ids.size(); ++k) renumber[periodic_ids[k]] = k;
    auto project_periodic = [renumber](const Vector& x) {
        Vector y;
        for (std::uint64_t b : x.occupied_branches())
            if (auto it = renumber.find(b); it != renumber.end()) y += x.relabel(b, it->second);
        return y;
    };
    for (const Vector& x : probes) {
        Vector y = project_periodic(x);
        if (!y.empty()) periodic_probes.push_back(std::move(y));
    }
    std::vector<Operator> out_parts;
    std::function<Vector(const Vector&)> inner_embed = [](const Vector&) { return Vector{}; };
    std::size_t inflated = 0;
    if (!periodic_parts.empty() && !periodic_probes.empty()) {
        const Operator p_periodic =
            periodic_parts.size() == 1 ? periodic_parts.front() : Operator::direct_sum(periodic_parts);
        AwsPeriodic a = aws_approx_periodic(p_periodic, periodic_probes, stage_eps);
        for (const Operator* b : a.t.branches()) out_parts.push_back(*b);
        inflated = out_parts.size();
        inner_embed = a.embed;
        rep.figures = a.report.figures;
    }
    std::map<std::uint64_t, std::uint64_t> kept_to;
    for (std::uint64_t b : kept_ids) {
        kept_to[b] = out_parts.size();
        out_parts.push_back(*parts[b]);
    }
    if (out_parts.empty()) throw DomainError("aws approximation needs probes on the periodic branches");
    out.op = out_parts.size() == 1 ? out_parts.front() : Operator::direct_sum(out_parts);
    out.embed = [project_periodic, inner_embed, kept_to](const Vector& x) {
        Vector y = inner_embed(project_periodic(x));
        for (const auto& [from, to] : kept_to) y += x.relabel(from, to);
        return y;
    };
    const Space out_space = space_of(out.op);
    // Stage 2 compares P with T in the inflated picture: P x -> embed(P x).
    for (std::size_t j = 0; j < probes.size(); ++j) {
        const Vector ex = out.embed(probes[j]);
        const Vector px = out.embed(apply(p_full, probes[j]));
        const double stage2 = norm(out_space, px - apply(out.op, ex));
        rep.forward_errors.push_back(stage1[j] + stage2);
        rep.achieved = std::max(rep.achieved, stage1[j] + stage2);
    }
    rep.bound = stage_bound;
    double atomic = 0.0;
    for (const Operator* b : out.op.branches())
        if (const auto* s = b->as<SpectralUnitary>()) atomic += s->measure->atomic_mass();
    rep.certificate = std::to_string(inflated) + " inflated branch(es) and " + std::to_string(kept_ids.size()) +
                      " kept atom-free branch(es); atomic mass " + std::to_string(atomic);
    return out;
}

} // namespace opstab
