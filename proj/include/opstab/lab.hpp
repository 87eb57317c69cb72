#pragma once

// Measurements on orbits: correlation sequences <T^n x, y>, density and
// Wiener statistics, stability verdicts, the three operator metrics, the
// category-set predicates and the weak-to-strong inequality check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "opstab/error.hpp"
#include "opstab/io.hpp"
#include "opstab/operator.hpp"
#include "opstab/spectral.hpp"
#include "opstab/vector.hpp"

namespace opstab {

inline constexpr std::uint64_t kDefaultHorizon = 10000;
inline constexpr double kDefaultEpsilon = 1e-2;
inline constexpr std::uint64_t kDefaultTruncation = 20;

// ---------------------------------------------------------------------------
// Correlation sequences

struct CorrelationSeries {
    std::vector<Complex> values; ///< c_0 .. c_N
    std::uint64_t op_hash = 0;
    Vector x, y;
    std::uint64_t horizon = 0;
    std::vector<double> tail_max; ///< tail_max[n] = max_{m >= n} |c_m|
    std::vector<double> wiener;   ///< wiener[N] = (1/N) sum_{n=1}^N |c_n|^2, wiener[0] = 0

    void refresh_stats() {
        const std::size_t len = values.size();
        tail_max.assign(len, 0.0);
        double m = 0.0;
        for (std::size_t k = len; k-- > 0;) {
            m = std::max(m, std::abs(values[k]));
            tail_max[k] = m;
        }
        wiener.assign(len, 0.0);
        double s = 0.0;
        for (std::size_t n = 1; n < len; ++n) {
            s += std::norm(values[n]);
            wiener[n] = s / static_cast<double>(n);
        }
    }
};

namespace detail {

inline Complex branch_inner(const BranchSpace& space, std::uint64_t b, const Vector& x, const Vector& y) {
    Complex s = inner(x.coords(), y.coords());
    const Field* f = x.field(b);
    const Field* g = y.field(b);
    if (f && g) s += field_inner(*space.measure, *f, *g);
    return s;
}

/// Constant on [0, 1) with no point values: returns the constant.
inline std::optional<Complex> constant_field(const Field* f) {
    if (!f || !f->points.empty() || f->modes.size() != 1 || f->modes.begin()->first != 0) return std::nullopt;
    const StepFunction& h = f->modes.begin()->second;
    if (h.pieces() != 1 || h.lower() != 0.0 || h.upper() != 1.0) return std::nullopt;
    return h.values().front();
}

/// Adds <T^n x, y> restricted to branch b, n = 0..N, into c.
inline void branch_correlation(const Operator& leaf, std::uint64_t b, const BranchSpace& space, const Vector& xb,
                               const Vector& yb, std::vector<Complex>& c) {
    const std::uint64_t N = c.size() - 1;
    if (xb.empty() || yb.empty()) return;
    if (const auto* d = leaf.as<Diagonal>()) {
        for (const auto& [idx, a] : xb.coords().entries()) {
            const Complex w = a * std::conj(yb.coords().get(idx));
            if (w == Complex{}) continue;
            const DiagEntry e = d->at(idx.slot);
            if (e.angle) {
                for (std::uint64_t n = 0; n <= N; ++n) c[n] += w * e.pow(n).value;
            } else {
                Complex z = 1.0;
                for (std::uint64_t n = 0; n <= N; ++n, z *= e.value) c[n] += w * z;
            }
        }
        return;
    }
    if (const auto* s = leaf.as<RightShift>()) {
        // R^n moves slot s to s + n d: only pairs with t - s = n d contribute.
        for (const auto& [ix, a] : xb.coords().entries())
            for (const auto& [iy, v] : yb.coords().entries()) {
                if (iy.slot < ix.slot || (iy.slot - ix.slot) % s->block != 0) continue;
                const std::uint64_t n = (iy.slot - ix.slot) / s->block;
                if (n <= N) c[n] += a * std::conj(v);
            }
        return;
    }
    if (const auto* m = leaf.as<Dense>()) {
        ColumnVector v = ColumnVector::Zero(m->matrix.rows());
        ColumnVector w = ColumnVector::Zero(m->matrix.rows());
        for (const auto& [idx, a] : xb.coords().entries()) v(static_cast<Eigen::Index>(idx.slot)) = a;
        for (const auto& [idx, a] : yb.coords().entries()) w(static_cast<Eigen::Index>(idx.slot)) = a;
        for (std::uint64_t n = 0; n <= N; ++n) {
            c[n] += w.dot(v); // Eigen's dot conjugates the left factor
            v = m->matrix * v;
        }
        return;
    }
    if (const auto* u = leaf.as<SpectralUnitary>(); u && !u->symbol) {
        const auto fx = constant_field(xb.field(b));
        const auto fy = constant_field(yb.field(b));
        if (fx && fy) {
            const Complex w = *fx * std::conj(*fy);
            for (std::uint64_t n = 0; n <= N; ++n)
                c[n] += w * fourier_coefficient(*u->measure, static_cast<std::int64_t>(n));
            return;
        }
    }
    // Periodic leaves repeat after one period.
    std::uint64_t period = N + 1;
    if (const auto* cm = leaf.as<CyclicMix>()) period = std::min(period, cm->period);
    std::vector<Complex> local(std::min<std::uint64_t>(period, N + 1));
    for (std::uint64_t n = 0; n < local.size(); ++n)
        local[n] = branch_inner(space, b, leaf_power(leaf, n, Direction::forward, xb, b), yb);
    for (std::uint64_t n = 0; n <= N; ++n) c[n] += local[n % local.size()];
}

} // namespace detail

/// c_n = <T^n x, y> for n = 0..N, with exact structured paths per branch.
inline CorrelationSeries correlation_sequence(const Operator& t, const Vector& x, const Vector& y, std::uint64_t n) {
    if (n > (std::uint64_t{1} << 28)) throw CapacityError("correlation horizon too large");
    const Space space = space_of(t);
    check_membership(space, x);
    check_membership(space, y);
    CorrelationSeries out;
    out.values.assign(n + 1, Complex{});
    const auto parts = t.branches();
    for (std::uint64_t b = 0; b < parts.size(); ++b)
        detail::branch_correlation(*parts[b], b, space.branches[b], x.restrict_to(b), y.restrict_to(b), out.values);
    out.op_hash = operator_hash(t);
    out.x = x;
    out.y = y;
    out.horizon = n;
    out.refresh_stats();
    return out;
}

/// Reference path: iterated apply, one step at a time.
inline std::vector<Complex> correlation_by_iteration(const Operator& t, const Vector& x, const Vector& y,
                                                     std::uint64_t n) {
    const Space space = space_of(t);
    std::vector<Complex> c;
    Vector v = x;
    for (std::uint64_t k = 0; k <= n; ++k) {
        c.push_back(inner(space, v, y));
        if (k < n) v = apply(t, v);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Statistics

struct DensityProfile {
    double epsilon = 0.0;
    std::vector<std::uint64_t> counts; ///< counts[N] = #{1 <= n <= N : |c_n| < eps}
    std::vector<double> density;       ///< density[N] = counts[N] / N, density[0] = 0
    double lower_density = 0.0;        ///< min of density over [N/2, N]

    double at_horizon() const { return density.empty() ? 0.0 : density.back(); }
};

inline DensityProfile density_profile(const CorrelationSeries& s, double eps) {
    if (!(eps > 0.0)) throw DomainError("density threshold must be positive");
    DensityProfile p;
    p.epsilon = eps;
    const std::size_t len = s.values.size();
    p.counts.assign(len, 0);
    p.density.assign(len, 0.0);
    for (std::size_t n = 1; n < len; ++n) {
        p.counts[n] = p.counts[n - 1] + (std::abs(s.values[n]) < eps ? 1 : 0);
        p.density[n] = static_cast<double>(p.counts[n]) / static_cast<double>(n);
    }
    const std::size_t big = len - 1;
    if (big == 0) return p;
    p.lower_density = 1.0;
    for (std::size_t m = std::max<std::size_t>(1, (big + 1) / 2); m <= big; ++m)
        p.lower_density = std::min(p.lower_density, p.density[m]);
    return p;
}

inline std::vector<double> wiener_average(const CorrelationSeries& s) { return s.wiener; }

// ---------------------------------------------------------------------------
// Stability verdicts

enum class Verdict { weakly_stable_evidence, aws_not_ws_evidence, not_aws, inconclusive };

inline std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::weakly_stable_evidence: return "weakly-stable-evidence";
    case Verdict::aws_not_ws_evidence: return "aws-not-ws-evidence";
    case Verdict::not_aws: return "not-aws";
    case Verdict::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

struct ProbeEvidence {
    double tail_sup = 0.0;        ///< max |c_n| over n in [N/2, N]
    bool recurrent = false;       ///< exceedances of eps in both halves of the window
    double density = 0.0;         ///< D(N)
    double lower_density = 0.0;
};

struct StabilityVerdict {
    Verdict verdict = Verdict::inconclusive;
    bool point_spectrum_found = false;
    std::vector<EigenWitness> witnesses; ///< at most 16 listed
    bool spectrum_partial = false;
    double weak_decay_evidence = 0.0; ///< max tail_sup over probes
    std::vector<ProbeEvidence> probes;
    std::uint64_t horizon = 0;
    double epsilon = 0.0;
};

inline StabilityVerdict classify_stability(const Operator& t, const std::vector<std::pair<Vector, Vector>>& probes,
                                           std::uint64_t horizon = kDefaultHorizon, double eps = kDefaultEpsilon) {
    if (probes.empty()) throw DomainError("classify_stability needs at least one probe pair");
    if (!(eps > 0.0)) throw DomainError("epsilon must be positive");
    if (horizon < 4) throw DomainError("horizon must be at least 4");
    if (classify_operator(t).cls == OperatorClass::none) throw ClassMismatch("operator is not a contraction");

    StabilityVerdict v;
    v.horizon = horizon;
    v.epsilon = eps;
    const PointSpectrum ps = unimodular_point_spectrum(t);
    v.point_spectrum_found = !ps.pairs.empty();
    v.spectrum_partial = ps.partial;
    for (std::size_t k = 0; k < std::min<std::size_t>(16, ps.pairs.size()); ++k) v.witnesses.push_back(ps.pairs[k]);

    const std::uint64_t lo = horizon / 2, mid = 3 * horizon / 4;
    bool all_decay = true, any_recurrent = false, all_dense = true;
    for (const auto& [x, y] : probes) {
        const CorrelationSeries s = correlation_sequence(t, x, y, horizon);
        const DensityProfile d = density_profile(s, eps);
        ProbeEvidence e;
        e.tail_sup = s.tail_max[lo];
        bool first = false, second = false;
        for (std::uint64_t n = lo; n <= horizon; ++n)
            if (std::abs(s.values[n]) >= eps) (n < mid ? first : second) = true;
        e.recurrent = first && second;
        e.density = d.at_horizon();
        e.lower_density = d.lower_density;
        v.weak_decay_evidence = std::max(v.weak_decay_evidence, e.tail_sup);
        all_decay = all_decay && e.tail_sup < eps;
        any_recurrent = any_recurrent || e.recurrent;
        all_dense = all_dense && e.density > 0.9;
        v.probes.push_back(e);
    }

    if (v.point_spectrum_found) v.verdict = Verdict::not_aws;
    else if (ps.partial) v.verdict = Verdict::inconclusive;
    else if (all_decay) v.verdict = Verdict::weakly_stable_evidence;
    else if (any_recurrent && all_dense) v.verdict = Verdict::aws_not_ws_evidence;
    else v.verdict = Verdict::inconclusive;
    return v;
}

// ---------------------------------------------------------------------------
// Metrics over the test-vector family x_1, x_2, ...

struct MetricValue {
    double partial = 0.0;
    double tail_bound = 0.0;
    std::uint64_t truncation = 0;
    std::vector<double> terms; ///< per j (strong, strong*) or per (i, j) row-major (weak)
};

namespace detail {

inline Space common_space(const Operator& a, const Operator& b) {
    Space s = space_of(a);
    if (!(s == space_of(b))) throw KindMismatch("operators act on different spaces");
    return s;
}

inline void require_class(const Operator& op, OperatorClass at_least, const char* what) {
    if (classify_operator(op).cls < at_least) throw ClassMismatch(std::string("metric needs ") + what + " operators");
}

inline std::vector<Vector> test_family(const Space& space, std::uint64_t J) {
    std::vector<Vector> xs;
    const SpaceShape shape = space.shape();
    for (std::uint64_t j = 1; j <= J; ++j) xs.push_back(realize(space, test_vector(j, shape)));
    return xs;
}

inline void require_truncation(std::uint64_t J) {
    if (J < 1 || J > 60) throw DomainError("truncation J must lie in [1, 60]");
}

} // namespace detail

/// sum_j (||Ux_j - Vx_j|| + ||U*x_j - V*x_j||) / (2^j ||x_j||), j <= J.
inline MetricValue metric_strong_star(const Operator& u, const Operator& v, std::uint64_t J = kDefaultTruncation) {
    detail::require_truncation(J);
    const Space space = detail::common_space(u, v);
    detail::require_class(u, OperatorClass::unitary, "unitary");
    detail::require_class(v, OperatorClass::unitary, "unitary");
    MetricValue m{0.0, 4.0 * std::ldexp(1.0, -static_cast<int>(J)), J, {}};
    const auto xs = detail::test_family(space, J);
    for (std::uint64_t j = 1; j <= J; ++j) {
        const Vector& x = xs[j - 1];
        const double f = norm(space, apply(u, x) - apply(v, x));
        const double a = norm(space, apply_adjoint(u, x) - apply_adjoint(v, x));
        const double term = (f + a) / (std::ldexp(1.0, static_cast<int>(j)) * norm(space, x));
        m.terms.push_back(term);
        m.partial += term;
    }
    return m;
}

/// sum_j ||Tx_j - Sx_j|| / (2^j ||x_j||), j <= J.
inline MetricValue metric_strong(const Operator& t, const Operator& s, std::uint64_t J = kDefaultTruncation) {
    detail::require_truncation(J);
    const Space space = detail::common_space(t, s);
    detail::require_class(t, OperatorClass::isometry, "isometric");
    detail::require_class(s, OperatorClass::isometry, "isometric");
    MetricValue m{0.0, 2.0 * std::ldexp(1.0, -static_cast<int>(J)), J, {}};
    const auto xs = detail::test_family(space, J);
    for (std::uint64_t j = 1; j <= J; ++j) {
        const Vector& x = xs[j - 1];
        const double term =
            norm(space, apply(t, x) - apply(s, x)) / (std::ldexp(1.0, static_cast<int>(j)) * norm(space, x));
        m.terms.push_back(term);
        m.partial += term;
    }
    return m;
}

/// sum_{i,j} |<Tx_i, x_j> - <Sx_i, x_j>| / (2^{i+j} ||x_i|| ||x_j||), i, j <= J.
inline MetricValue metric_weak(const Operator& t, const Operator& s, std::uint64_t J = kDefaultTruncation) {
    detail::require_truncation(J);
    const Space space = detail::common_space(t, s);
    detail::require_class(t, OperatorClass::contraction, "contractive");
    detail::require_class(s, OperatorClass::contraction, "contractive");
    const double tj = std::ldexp(1.0, -static_cast<int>(J));
    MetricValue m{0.0, 2.0 * (2.0 * tj - tj * tj), J, {}};
    const auto xs = detail::test_family(space, J);
    std::vector<double> norms;
    std::vector<Vector> diff;
    for (const auto& x : xs) {
        norms.push_back(norm(space, x));
        diff.push_back(apply(t, x) - apply(s, x));
    }
    for (std::uint64_t i = 1; i <= J; ++i)
        for (std::uint64_t j = 1; j <= J; ++j) {
            const double term = std::abs(inner(space, diff[i - 1], xs[j - 1])) /
                                (std::ldexp(1.0, static_cast<int>(i + j)) * norms[i - 1] * norms[j - 1]);
            m.terms.push_back(term);
            m.partial += term;
        }
    return m;
}

// ---------------------------------------------------------------------------
// Category-set predicates

enum class CategorySet { M_k, N_n, W_jkn, W_jk_complement };
enum class Decision { in, out, undecided };

inline std::string to_string(CategorySet s) {
    switch (s) {
    case CategorySet::M_k: return "M_k";
    case CategorySet::N_n: return "N_n";
    case CategorySet::W_jkn: return "W_jkn";
    case CategorySet::W_jk_complement: return "W_jk_complement";
    }
    return "";
}

inline std::string to_string(Decision d) {
    switch (d) {
    case Decision::in: return "in";
    case Decision::out: return "out";
    case Decision::undecided: return "undecided-at-horizon";
    }
    return "";
}

struct MembershipParams {
    std::optional<Vector> x; ///< M_k, N_n: unit vector; W sets: overrides x_j
    std::uint64_t j = 1, k = 1, n = 1;
    std::optional<Vector> eigen_hint; ///< candidate eigenvector for W_jk_complement
};

struct Membership {
    Decision decision = Decision::undecided;
    std::string reason;
    std::optional<std::uint64_t> witness; ///< power at which the decision was read off
    double value = 0.0;                   ///< |<T^witness x, x>|
    double bound = 0.0;                   ///< eigen-witness lower bound, when used
    std::uint64_t checked_from = 0, checked_to = 0;
};

namespace detail {

/// Some n0 with <T^n x, y> = 0 exactly for n >= n0, when the structure gives one.
inline std::optional<std::uint64_t> vanishing_from(const Operator& t, const Vector& x, const Vector& y) {
    std::uint64_t n0 = 0;
    const auto parts = t.branches();
    for (std::uint64_t b : x.occupied_branches()) {
        const auto* s = parts[b]->as<RightShift>();
        if (!s) return std::nullopt;
        const SparseVector xb = x.coords().branch(b), yb = y.coords().branch(b);
        if (xb.empty() || yb.empty()) continue;
        const std::uint64_t lo = xb.entries().begin()->first.slot;
        const std::uint64_t hi = yb.entries().rbegin()->first.slot;
        if (hi >= lo) n0 = std::max(n0, (hi - lo) / s->block + 1);
    }
    return n0;
}

/// Unit eigenvectors with unimodular eigenvalue close to x: the listed point
/// spectrum, eigenspace projections of x on diagonal branches, and a hint.
inline std::vector<EigenWitness> eigen_candidates(const Operator& t, const Vector& x, const std::optional<Vector>& hint) {
    const Space space = space_of(t);
    std::vector<EigenWitness> out = unimodular_point_spectrum(t).pairs;
    const auto parts = t.branches();
    for (std::uint64_t b = 0; b < parts.size(); ++b) {
        const auto* d = parts[b]->as<Diagonal>();
        if (!d) continue;
        std::map<std::pair<std::uint64_t, std::uint64_t>, SparseVector> groups;
        const SparseVector xb = x.coords().branch(b);
        for (const auto& [idx, a] : xb.entries()) {
            const DiagEntry e = d->at(idx.slot);
            if (e.angle) groups[{e.angle->p, e.angle->q}].set(idx, a);
        }
        for (auto& [key, g] : groups) {
            g *= 1.0 / std::sqrt(g.norm_squared());
            out.push_back({RationalAngle{key.first, key.second}.value(), Vector(g), b});
        }
    }
    if (hint) {
        const double h = norm(space, *hint);
        if (h > 0.0) {
            const Vector u = Complex(1.0 / h) * *hint;
            out.push_back({inner(space, apply(t, u), u), u, 0});
        }
    }
    return out;
}

} // namespace detail

inline Membership set_membership(const Operator& t, CategorySet set, const MembershipParams& params,
                                 std::uint64_t horizon = kDefaultHorizon) {
    const Space space = space_of(t);
    Membership m;
    const bool needs_unit = set == CategorySet::M_k || set == CategorySet::N_n;
    Vector x;
    if (needs_unit) {
        if (!params.x) throw DomainError(to_string(set) + " needs a unit vector x");
        x = *params.x;
        check_membership(space, x);
        if (std::abs(norm(space, x) - 1.0) > 1e-12) throw DomainError(to_string(set) + " needs ||x|| = 1");
    } else {
        if (params.j < 1) throw DomainError("j must be >= 1");
        x = params.x ? *params.x : realize(space, test_vector(params.j, space.shape()));
        check_membership(space, x);
    }
    if (params.k < 1) throw DomainError("k must be >= 1");

    auto exact = [&](std::uint64_t power, auto&& inside) {
        const CorrelationSeries s = correlation_sequence(t, apply_power(t, power, x), x, 0);
        m.witness = power;
        m.value = std::abs(s.values[0]);
        m.checked_from = m.checked_to = power;
        m.decision = inside(m.value) ? Decision::in : Decision::out;
        m.reason = "single correlation value";
        return m;
    };

    switch (set) {
    case CategorySet::M_k: return exact(params.k, [](double c) { return c <= 0.5; });
    case CategorySet::W_jkn: {
        const double inv = 1.0 / static_cast<double>(params.k);
        return exact(params.n, [inv](double c) { return c < inv; });
    }
    case CategorySet::N_n: {
        // Out needs one k >= n with |c_k| > 1/2; in needs all k >= n.
        std::uint64_t span = horizon;
        const auto period = period_of(t);
        if (period && *period <= std::max<std::uint64_t>(horizon, 1000000)) span = std::max(span, *period - 1);
        const auto vanish = detail::vanishing_from(t, x, x);
        const std::uint64_t last = params.n + span;
        const CorrelationSeries s = correlation_sequence(t, x, x, last);
        m.checked_from = params.n;
        m.checked_to = last;
        for (std::uint64_t k = params.n; k <= last; ++k)
            if (std::abs(s.values[k]) > 0.5) {
                m.decision = Decision::out;
                m.witness = k;
                m.value = std::abs(s.values[k]);
                m.reason = "|<T^k x, x>| > 1/2 at k = " + std::to_string(k);
                return m;
            }
        if (period && span + 1 >= *period) {
            m.decision = Decision::in;
            m.reason = "periodic operator, one full period checked";
        } else if (vanish && *vanish <= last + 1) {
            m.decision = Decision::in;
            m.reason = "correlations vanish exactly beyond the support offset";
        } else {
            m.reason = "no violation up to the horizon";
        }
        return m;
    }
    case CategorySet::W_jk_complement: {
        const double inv = 1.0 / static_cast<double>(params.k);
        const CorrelationSeries s = correlation_sequence(t, x, x, horizon);
        m.checked_from = 1;
        m.checked_to = horizon;
        for (std::uint64_t n = 1; n <= horizon; ++n)
            if (std::abs(s.values[n]) < inv) {
                m.decision = Decision::out;
                m.witness = n;
                m.value = std::abs(s.values[n]);
                m.reason = "|<T^n x_j, x_j>| < 1/k at n = " + std::to_string(n);
                return m;
            }
        // |<T^n x_j, x_j>| >= 1 - d^2 - 2d for a unit eigenvector v, d = ||v - x_j||.
        const double xx = std::real(inner(space, x, x));
        for (const EigenWitness& w : detail::eigen_candidates(t, x, params.eigen_hint)) {
            if (std::abs(std::abs(w.gamma) - 1.0) > 1e-10) continue;
            if (norm(space, apply(t, w.vector) - w.gamma * w.vector) > 1e-10) continue;
            const double overlap = std::abs(inner(space, x, w.vector));
            const double dist = std::sqrt(std::max(0.0, xx + 1.0 - 2.0 * overlap));
            const double bound = 1.0 - dist * dist - 2.0 * dist;
            if (bound >= inv && bound > m.bound) {
                m.decision = Decision::in;
                m.bound = bound;
                m.reason = "eigen-witness at distance " + format_double(dist) + " gives bound " + format_double(bound);
            }
        }
        if (m.decision == Decision::in) return m;
        if (const auto period = period_of(t); period && *period <= horizon) {
            m.decision = Decision::in;
            m.reason = "periodic operator, one full period checked";
            return m;
        }
        m.reason = "no violation up to the horizon and no eigen-witness";
        return m;
    }
    }
    return m;
}

// ---------------------------------------------------------------------------
// ||T x - S x||^2 <= 2 Re <(S - T) x, S x> whenever ||T x|| <= ||S x||

struct WeakStrongRow {
    std::size_t probe = 0, index = 0; ///< probe number, position in Ts
    double lhs = 0.0;                 ///< ||T x - S x||^2
    double rhs = 0.0;                 ///< 2 Re <(S - T) x, S x>
    double norm_t = 0.0, norm_s = 0.0;
    bool hypothesis = false;          ///< ||T x|| <= ||S x|| + 1e-12
    bool chain = false;               ///< lhs <= rhs + 1e-10
    double expansion_residual = 0.0;  ///< lhs - (||Sx||^2 + ||Tx||^2 - 2 Re <Tx, Sx>)
};

struct WeakStrongReport {
    std::vector<WeakStrongRow> rows;
    bool all_hypotheses = true;
    bool all_chains = true; ///< among rows whose hypothesis holds
    double max_expansion_residual = 0.0;
};

inline WeakStrongReport weak_to_strong_check(const std::vector<Operator>& ts, const Operator& s,
                                             const std::vector<Vector>& probes) {
    const Space space = space_of(s);
    for (const auto& t : ts) detail::common_space(t, s);
    WeakStrongReport r;
    for (std::size_t p = 0; p < probes.size(); ++p) {
        check_membership(space, probes[p]);
        const Vector sx = apply(s, probes[p]);
        const double ss = std::real(inner(space, sx, sx));
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const Vector tx = apply(ts[i], probes[p]);
            WeakStrongRow row;
            row.probe = p;
            row.index = i;
            const Vector diff = tx - sx;
            row.lhs = std::real(inner(space, diff, diff));
            row.rhs = 2.0 * std::real(inner(space, sx - tx, sx));
            const double tt = std::real(inner(space, tx, tx));
            row.norm_t = std::sqrt(tt);
            row.norm_s = std::sqrt(ss);
            row.hypothesis = row.norm_t <= row.norm_s + 1e-12;
            row.chain = row.lhs <= row.rhs + 1e-10;
            row.expansion_residual = row.lhs - (ss + tt - 2.0 * std::real(inner(space, tx, sx)));
            r.all_hypotheses = r.all_hypotheses && row.hypothesis;
            if (row.hypothesis) r.all_chains = r.all_chains && row.chain;
            r.max_expansion_residual = std::max(r.max_expansion_residual, std::abs(row.expansion_residual));
            r.rows.push_back(row);
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// |<U^n x_j, x_j>| >= 1 - d^2 - 2d, d = ||x - x_j||, for a unit eigenvector x

struct EigenBoundReport {
    Complex gamma;
    double distance = 0.0;
    double bound = 0.0;
    double min_abs = 0.0;
    std::uint64_t argmin = 0;
    bool holds = false;
    bool exceeds_third = false;
};

inline EigenBoundReport eigenvector_bound_check(const Operator& u, const Vector& x, const Vector& xj,
                                                std::uint64_t n) {
    const Space space = space_of(u);
    check_membership(space, x);
    check_membership(space, xj);
    if (std::abs(norm(space, x) - 1.0) > 1e-10) throw DomainError("eigenvector must have unit norm");
    const Vector ux = apply(u, x);
    EigenBoundReport r;
    r.gamma = inner(space, ux, x);
    if (norm(space, ux - r.gamma * x) > 1e-10 || std::abs(std::abs(r.gamma) - 1.0) > 1e-10)
        throw DomainError("x is not an eigenvector with unimodular eigenvalue");
    r.distance = norm(space, x - xj);
    r.bound = 1.0 - r.distance * r.distance - 2.0 * r.distance;
    const CorrelationSeries s = correlation_sequence(u, xj, xj, n);
    r.min_abs = std::numeric_limits<double>::infinity();
    for (std::uint64_t k = 0; k <= n; ++k)
        if (std::abs(s.values[k]) < r.min_abs) {
            r.min_abs = std::abs(s.values[k]);
            r.argmin = k;
        }
    r.holds = r.min_abs >= r.bound - 1e-12;
    r.exceeds_third = r.bound > 1.0 / 3.0;
    return r;
}

} // namespace opstab
