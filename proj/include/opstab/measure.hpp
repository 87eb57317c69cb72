#pragma once

// Finite measures on the circle [0, 1): atoms, a piecewise-constant density
// and an optional self-similar (Cantor-type) component. Fourier coefficients
// and integrals of e^{2 pi i n theta} h(theta) against the measure are
// evaluated in closed form (atoms, density) or through the self-similar
// product formula with a certified truncation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "opstab/error.hpp"
#include "opstab/space.hpp"

namespace opstab {

struct Atom {
    double location = 0.0; ///< in turns, [0, 1)
    double weight = 0.0;

    friend bool operator==(const Atom&, const Atom&) = default;
};

/// Invariant measure of the maps x -> ratio * x + d, d in digits, with equal
/// weights, scaled to total mass `weight`.
struct SelfSimilar {
    double ratio = 1.0 / 3.0;
    std::vector<double> digits{0.0, 2.0 / 3.0};
    double weight = 1.0;

    double hull_low() const { return *std::min_element(digits.begin(), digits.end()) / (1.0 - ratio); }
    double hull_high() const { return *std::max_element(digits.begin(), digits.end()) / (1.0 - ratio); }

    friend bool operator==(const SelfSimilar&, const SelfSimilar&) = default;
};

namespace detail {

inline double frac(double x) { return x - std::floor(x); }

/// e^{2 pi i t} with t reduced mod 1 first.
inline Complex turn(double t) {
    const double f = frac(t);
    return {std::cos(kTwoPi * f), std::sin(kTwoPi * f)};
}

/// e^{2 pi i n t} with the product reduced mod 1.
inline Complex turn(std::int64_t n, double t) {
    if (n == 0) return 1.0;
    // Split t so that n * t_hi is exact enough before reduction.
    const double t_hi = static_cast<double>(static_cast<float>(t));
    const double t_lo = t - t_hi;
    return turn(frac(static_cast<double>(n) * t_hi) + static_cast<double>(n) * t_lo);
}

} // namespace detail

class SpectralMeasure {
public:
    SpectralMeasure(std::vector<Atom> atoms, StepFunction density, std::optional<SelfSimilar> self_similar)
        : atoms_(std::move(atoms)), density_(std::move(density)), self_similar_(std::move(self_similar)) {
        std::sort(atoms_.begin(), atoms_.end(), [](const Atom& a, const Atom& b) { return a.location < b.location; });
        for (std::size_t k = 0; k < atoms_.size(); ++k) {
            const Atom& a = atoms_[k];
            if (!(a.location >= 0.0 && a.location < 1.0)) throw ValidationError("atom location must lie in [0, 1)");
            if (!(a.weight > 0.0) || !std::isfinite(a.weight)) throw ValidationError("atom weight must be positive");
            if (k > 0 && atoms_[k - 1].location == a.location) throw ValidationError("atom locations must be distinct");
        }
        if (!density_.breakpoints().empty()) {
            if (density_.lower() < 0.0 || density_.upper() > 1.0)
                throw ValidationError("density must be supported in [0, 1)");
            for (Complex v : density_.values())
                if (v.imag() != 0.0 || !(v.real() >= 0.0) || !std::isfinite(v.real()))
                    throw ValidationError("density values must be real and nonnegative");
        }
        if (self_similar_) {
            const SelfSimilar& s = *self_similar_;
            if (!(s.ratio > 0.0 && s.ratio < 1.0)) throw ValidationError("self-similar ratio must lie in (0, 1)");
            if (s.digits.size() < 2) throw ValidationError("self-similar component needs at least two digits");
            for (double d : s.digits)
                if (!(d >= 0.0 && d < 1.0)) throw ValidationError("self-similar digits must lie in [0, 1)");
            std::vector<double> sorted = s.digits;
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
                throw ValidationError("self-similar digits must be distinct");
            if (s.hull_high() > 1.0 + 1e-12) throw ValidationError("self-similar attractor must lie in [0, 1]");
            if (!(s.weight > 0.0) || !std::isfinite(s.weight)) throw ValidationError("self-similar weight must be positive");
        }
        const double m = total_mass();
        if (!(m > 0.0) || !std::isfinite(m)) throw ValidationError("measure must have finite positive mass");
    }

    static SpectralMeasure lebesgue(double weight = 1.0) {
        return SpectralMeasure({}, StepFunction::indicator(0.0, 1.0, weight), std::nullopt);
    }
    static SpectralMeasure atoms_only(std::vector<Atom> atoms) {
        return SpectralMeasure(std::move(atoms), {}, std::nullopt);
    }
    static SpectralMeasure middle_thirds_cantor(double weight = 1.0) {
        return SpectralMeasure({}, {}, SelfSimilar{1.0 / 3.0, {0.0, 2.0 / 3.0}, weight});
    }

    const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    const StepFunction& density() const noexcept { return density_; }
    const std::optional<SelfSimilar>& self_similar() const noexcept { return self_similar_; }

    double atomic_mass() const {
        double s = 0.0;
        for (const Atom& a : atoms_) s += a.weight;
        return s;
    }
    double density_mass() const { return std::real(inner(density_, StepFunction::indicator(0.0, 1.0))); }
    double continuous_mass() const { return density_mass() + (self_similar_ ? self_similar_->weight : 0.0); }
    double total_mass() const { return atomic_mass() + continuous_mass(); }

    /// Weight of the atom at exactly this location, 0 if none.
    double atom_weight(double location) const {
        auto it = std::lower_bound(atoms_.begin(), atoms_.end(), location,
                                   [](const Atom& a, double t) { return a.location < t; });
        return (it != atoms_.end() && it->location == location) ? it->weight : 0.0;
    }

    friend bool operator==(const SpectralMeasure&, const SpectralMeasure&) = default;

private:
    std::vector<Atom> atoms_;
    StepFunction density_;
    std::optional<SelfSimilar> self_similar_;
};

/// Normalized transform of the self-similar probability measure at real xi,
/// as the product over m of the digit averages of e^{2 pi i xi d r^m}. The
/// mean digit phase is factored out exactly; the centered factors satisfy
/// |f_m - 1| <= x_m^2 / 2 with x_m = 2 pi |xi| max|d - c| r^m, and the product
/// stops once the remaining sum of x_m^2 is below 1e-13.
inline Complex self_similar_transform(const SelfSimilar& s, double xi) {
    if (xi == 0.0) return 1.0;
    const double count = static_cast<double>(s.digits.size());
    double mean = 0.0;
    for (double d : s.digits) mean += d;
    mean /= count;
    double spread = 0.0;
    for (double d : s.digits) spread = std::max(spread, std::abs(d - mean));

    Complex product = detail::turn(xi * mean / (1.0 - s.ratio));
    const double amp = kTwoPi * std::abs(xi) * spread;
    const double tail_scale = amp * amp / (1.0 - s.ratio * s.ratio);
    double rm = 1.0;
    for (int m = 0; m < 4096; ++m) {
        if (tail_scale * rm * rm < 1e-13) break;
        Complex f{};
        for (double d : s.digits) {
            const double phase = kTwoPi * xi * (d - mean) * rm;
            f += Complex(std::cos(phase), std::sin(phase));
        }
        product *= f / count;
        rm *= s.ratio;
    }
    return product;
}

/// Integral of e^{2 pi i n theta} over [a, b).
inline Complex interval_exponential(double a, double b, std::int64_t n) {
    if (n == 0) return b - a;
    const Complex num = detail::turn(n, b) - detail::turn(n, a);
    return num / Complex(0.0, kTwoPi * static_cast<double>(n));
}

namespace detail {

inline void self_similar_integral(const SelfSimilar& s, std::int64_t n, const StepFunction& h, double offset,
                                  double scale, double mass, Complex& acc) {
    const auto& br = h.breakpoints();
    const double lo = offset + scale * s.hull_low();
    const double hi = offset + scale * s.hull_high();
    if (hi <= br.front() || lo >= br.back()) return;
    auto it = std::upper_bound(br.begin(), br.end(), lo);
    const bool inside_support = it != br.begin();
    const std::size_t piece = inside_support ? static_cast<std::size_t>(it - br.begin()) - 1 : 0;
    const bool single_piece = inside_support && hi <= br[piece + 1];
    if (single_piece || mass < 1e-16) {
        const Complex v = single_piece ? h.values()[piece] : h(lo);
        if (v == Complex{}) return;
        acc += v * mass * turn(n, offset) * self_similar_transform(s, static_cast<double>(n) * scale);
        return;
    }
    const double child_mass = mass / static_cast<double>(s.digits.size());
    for (double d : s.digits) self_similar_integral(s, n, h, offset + scale * d, scale * s.ratio, child_mass, acc);
}

} // namespace detail

/// Integral of e^{2 pi i n theta} h(theta) d mu(theta) for a step function h on [0, 1).
inline Complex spectral_integral(const SpectralMeasure& mu, std::int64_t n, const StepFunction& h) {
    if (h.breakpoints().empty()) return {};
    Complex acc{};
    for (const Atom& a : mu.atoms()) {
        const Complex v = h(a.location);
        if (v != Complex{}) acc += a.weight * v * detail::turn(n, a.location);
    }
    const StepFunction rho = mu.density() * h;
    const auto& br = rho.breakpoints();
    for (std::size_t k = 0; k < rho.pieces(); ++k)
        acc += rho.values()[k] * interval_exponential(br[k], br[k + 1], n);
    if (const auto& s = mu.self_similar()) detail::self_similar_integral(*s, n, h, 0.0, 1.0, s->weight, acc);
    return acc;
}

/// mu-hat(n) = integral of e^{2 pi i n theta} d mu.
inline Complex fourier_coefficient(const SpectralMeasure& mu, std::int64_t n) {
    Complex acc{};
    for (const Atom& a : mu.atoms()) acc += a.weight * detail::turn(n, a.location);
    const auto& d = mu.density();
    const auto& br = d.breakpoints();
    for (std::size_t k = 0; k < d.pieces(); ++k) acc += d.values()[k] * interval_exponential(br[k], br[k + 1], n);
    if (const auto& s = mu.self_similar()) acc += s->weight * self_similar_transform(*s, static_cast<double>(n));
    return acc;
}

/// mu([a, b)).
inline double measure_of(const SpectralMeasure& mu, double a, double b) {
    if (!(b > a)) return 0.0;
    return std::real(spectral_integral(mu, 0, StepFunction::indicator(a, b)));
}

struct MeasureSplit {
    std::optional<SpectralMeasure> atomic;
    std::optional<SpectralMeasure> continuous;
    double atomic_mass = 0.0;
    double continuous_mass = 0.0;
};

inline MeasureSplit measure_split(const SpectralMeasure& mu) {
    MeasureSplit out;
    out.atomic_mass = mu.atomic_mass();
    out.continuous_mass = mu.continuous_mass();
    if (!mu.atoms().empty()) out.atomic = SpectralMeasure::atoms_only(mu.atoms());
    if (out.continuous_mass > 0.0) out.continuous = SpectralMeasure({}, mu.density(), mu.self_similar());
    return out;
}

} // namespace opstab
