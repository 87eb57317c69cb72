#pragma once

// Elements of the structured spaces operators act on. A space is a finite
// direct sum of branches; a coordinate branch is l^2 of its slots (finite or
// countable), a spectral branch is L^2(mu) on the circle. Elements of a
// spectral branch are kept as finite sums e^{2 pi i m theta} f_m(theta) of
// modulated step functions plus values at atoms of mu, which keeps
// multiplication by e^{2 pi i theta} exact.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "opstab/measure.hpp"
#include "opstab/space.hpp"

namespace opstab {

/// Function on [0, 1): sum over m of e^{2 pi i m theta} modes[m](theta), plus
/// `points` added at individual atom locations.
struct Field {
    std::map<std::int64_t, StepFunction> modes;
    std::map<double, Complex> points;

    static Field step(StepFunction f) {
        Field r;
        if (!f.breakpoints().empty()) r.modes.emplace(0, std::move(f));
        return r;
    }

    bool empty() const { return modes.empty() && points.empty(); }

    /// Value of the step part at theta.
    Complex step_value(double theta) const {
        Complex s{};
        for (const auto& [m, f] : modes) s += detail::turn(m, theta) * f(theta);
        return s;
    }

    Field& operator+=(const Field& o) {
        for (const auto& [m, f] : o.modes) {
            auto it = modes.find(m);
            if (it == modes.end()) modes.emplace(m, f);
            else it->second = it->second + f;
        }
        for (const auto& [t, v] : o.points) points[t] += v;
        normalize();
        return *this;
    }
    Field& operator*=(Complex s) {
        for (auto& [_, f] : modes) f *= s;
        for (auto& [_, v] : points) v *= s;
        normalize();
        return *this;
    }
    void normalize() {
        std::erase_if(modes, [](const auto& kv) { return kv.second.breakpoints().empty() || kv.second.is_zero(); });
        std::erase_if(points, [](const auto& kv) { return kv.second == Complex{}; });
    }

    friend bool operator==(const Field&, const Field&) = default;
};

class Vector {
public:
    Vector() = default;
    Vector(SparseVector coords) : coords_(std::move(coords)) {}

    static Vector coordinates(SparseVector v) { return Vector(std::move(v)); }
    static Vector function(StepFunction f, std::uint64_t branch = 0) {
        Vector v;
        v.set_field(branch, Field::step(std::move(f)));
        return v;
    }

    const SparseVector& coords() const noexcept { return coords_; }
    SparseVector& coords() noexcept { return coords_; }
    const std::map<std::uint64_t, Field>& fields() const noexcept { return fields_; }

    const Field* field(std::uint64_t branch) const {
        auto it = fields_.find(branch);
        return it == fields_.end() ? nullptr : &it->second;
    }
    void set_field(std::uint64_t branch, Field f) {
        f.normalize();
        if (f.empty()) fields_.erase(branch);
        else fields_[branch] = std::move(f);
    }

    bool empty() const { return coords_.empty() && fields_.empty(); }

    /// Branches that carry any content.
    std::vector<std::uint64_t> occupied_branches() const {
        std::vector<std::uint64_t> out;
        for (const auto& [idx, _] : coords_.entries())
            if (out.empty() || out.back() != idx.branch) out.push_back(idx.branch);
        for (const auto& [b, _] : fields_) out.push_back(b);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    /// Content of one branch, kept at the same branch id.
    Vector restrict_to(std::uint64_t branch) const {
        Vector r(coords_.branch(branch));
        if (const Field* f = field(branch)) r.fields_.emplace(branch, *f);
        return r;
    }

    /// Content of `from` moved to branch `to`.
    Vector relabel(std::uint64_t from, std::uint64_t to) const {
        Vector r;
        for (const auto& [idx, a] : coords_.entries())
            if (idx.branch == from) r.coords_.set({to, idx.slot}, a);
        if (const Field* f = field(from)) r.fields_.emplace(to, *f);
        return r;
    }

    Vector& operator+=(const Vector& o) {
        coords_ += o.coords_;
        for (const auto& [b, f] : o.fields_) {
            Field g = fields_.count(b) ? fields_[b] : Field{};
            g += f;
            set_field(b, std::move(g));
        }
        return *this;
    }
    Vector& operator-=(const Vector& o) { return *this += (-1.0) * o; }
    Vector& operator*=(Complex s) {
        coords_ *= s;
        std::map<std::uint64_t, Field> next;
        for (auto& [b, f] : fields_) {
            f *= s;
            if (!f.empty()) next.emplace(b, std::move(f));
        }
        fields_ = std::move(next);
        return *this;
    }

    friend Vector operator+(Vector a, const Vector& b) { return a += b; }
    friend Vector operator-(Vector a, const Vector& b) { return a -= b; }
    friend Vector operator*(Complex s, Vector a) { return a *= s; }
    friend bool operator==(const Vector&, const Vector&) = default;

private:
    SparseVector coords_;
    std::map<std::uint64_t, Field> fields_;
};

struct BranchSpace {
    enum class Kind { coordinate, spectral };

    Kind kind = Kind::coordinate;
    std::optional<std::uint64_t> dimension; ///< coordinate branches; nullopt = l^2(N)
    std::shared_ptr<const SpectralMeasure> measure; ///< spectral branches

    friend bool operator==(const BranchSpace& a, const BranchSpace& b) {
        if (a.kind != b.kind) return false;
        if (a.kind == Kind::coordinate) return a.dimension == b.dimension;
        return a.measure == b.measure || (a.measure && b.measure && *a.measure == *b.measure);
    }
};

struct Space {
    std::vector<BranchSpace> branches;

    SpaceShape shape() const {
        SpaceShape s;
        s.dims.clear();
        for (const auto& b : branches) s.dims.push_back(b.kind == BranchSpace::Kind::coordinate ? b.dimension : std::nullopt);
        return s;
    }

    friend bool operator==(const Space&, const Space&) = default;
};

/// Throws KindMismatch unless every component of x belongs to the space.
inline void check_membership(const Space& space, const Vector& x) {
    for (const auto& [idx, _] : x.coords().entries()) {
        if (idx.branch >= space.branches.size())
            throw KindMismatch("vector has entries on branch " + std::to_string(idx.branch) + " outside the space");
        const BranchSpace& b = space.branches[idx.branch];
        if (b.kind != BranchSpace::Kind::coordinate)
            throw KindMismatch("coordinate entries on spectral branch " + std::to_string(idx.branch));
        if (b.dimension && idx.slot >= *b.dimension)
            throw KindMismatch("slot " + std::to_string(idx.slot) + " exceeds dimension of branch " +
                               std::to_string(idx.branch));
    }
    for (const auto& [br, f] : x.fields()) {
        if (br >= space.branches.size() || space.branches[br].kind != BranchSpace::Kind::spectral)
            throw KindMismatch("function component on non-spectral branch " + std::to_string(br));
        const SpectralMeasure& mu = *space.branches[br].measure;
        for (const auto& [m, g] : f.modes)
            if (g.lower() < 0.0 || g.upper() > 1.0)
                throw KindMismatch("function component must be supported in [0, 1)");
        for (const auto& [t, _] : f.points)
            if (mu.atom_weight(t) == 0.0) throw KindMismatch("point value placed off the atoms of the measure");
    }
}

/// L^2(mu) inner product of two fields.
inline Complex field_inner(const SpectralMeasure& mu, const Field& f, const Field& g) {
    Complex s{};
    for (const auto& [m, fm] : f.modes)
        for (const auto& [k, gk] : g.modes) s += spectral_integral(mu, m - k, fm * gk.conj());
    if (!f.points.empty() || !g.points.empty()) {
        for (const Atom& a : mu.atoms()) {
            auto fp = f.points.find(a.location);
            auto gp = g.points.find(a.location);
            const Complex pf = fp == f.points.end() ? Complex{} : fp->second;
            const Complex pg = gp == g.points.end() ? Complex{} : gp->second;
            if (pf == Complex{} && pg == Complex{}) continue;
            const Complex sf = f.step_value(a.location);
            const Complex sg = g.step_value(a.location);
            s += a.weight * (sf * std::conj(pg) + pf * std::conj(sg) + pf * std::conj(pg));
        }
    }
    return s;
}

inline Complex inner(const Space& space, const Vector& x, const Vector& y) {
    Complex s = inner(x.coords(), y.coords());
    for (const auto& [b, f] : x.fields()) {
        const Field* g = y.field(b);
        if (!g) continue;
        if (b >= space.branches.size() || !space.branches[b].measure)
            throw KindMismatch("function component on non-spectral branch " + std::to_string(b));
        s += field_inner(*space.branches[b].measure, f, *g);
    }
    return s;
}

inline double norm(const Space& space, const Vector& x) {
    return std::sqrt(std::max(0.0, std::real(inner(space, x, x))));
}

namespace detail {

/// Mode index carried by slot s of a spectral branch: 0, 1, -1, 2, -2, ...
inline std::int64_t character_of_slot(std::uint64_t s) {
    return (s % 2 == 1) ? static_cast<std::int64_t>((s + 1) / 2) : -static_cast<std::int64_t>(s / 2);
}

} // namespace detail

/// Maps coordinates into the space: identity on coordinate branches, slot s
/// of a spectral branch becomes the character e^{2 pi i z(s) theta}.
inline Vector realize(const Space& space, const SparseVector& v) {
    Vector out;
    std::map<std::uint64_t, Field> fields;
    for (const auto& [idx, a] : v.entries()) {
        if (idx.branch >= space.branches.size())
            throw KindMismatch("coordinate on branch " + std::to_string(idx.branch) + " outside the space");
        if (space.branches[idx.branch].kind == BranchSpace::Kind::coordinate) {
            out.coords().set(idx, a);
            continue;
        }
        Field ch;
        ch.modes.emplace(detail::character_of_slot(idx.slot), StepFunction::indicator(0.0, 1.0, a));
        fields[idx.branch] += ch;
    }
    for (auto& [b, f] : fields) out.set_field(b, std::move(f));
    return out;
}

} // namespace opstab
