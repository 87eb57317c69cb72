#include <gtest/gtest.h>

#include <random>

#include "opstab/approximants.hpp"
#include "test_util.hpp"

using namespace opstab;

namespace {

/// All p/q in [0, 1) with gcd 1 and n < q <= q_max, sorted.
std::vector<RationalAngle> farey_points(std::uint64_t n, std::uint64_t q_max) {
    std::vector<RationalAngle> pts;
    for (std::uint64_t q = n + 1; q <= q_max; ++q)
        for (std::uint64_t p = 0; p < q; ++p)
            if (std::gcd(p, q) == 1) pts.push_back({p, q});
    std::sort(pts.begin(), pts.end());
    return pts;
}

double circular_max_gap(const std::vector<RationalAngle>& pts) {
    double gap = 1.0 - pts.back().turns() + pts.front().turns();
    for (std::size_t i = 1; i < pts.size(); ++i) gap = std::max(gap, pts[i].turns() - pts[i - 1].turns());
    return gap;
}

/// Smallest Q >= max(n + 1, 4) whose Farey mesh has all chords below eps, by linear scan.
std::uint64_t brute_q_max(std::uint64_t n, double eps) {
    for (std::uint64_t q = std::max<std::uint64_t>(n + 1, 4);; ++q)
        if (2.0 * std::sin(M_PI * circular_max_gap(farey_points(n, q))) < eps) return q;
}

/// Largest brute-force mesh point <= t, wrapping below the first point.
RationalAngle brute_snap(const std::vector<RationalAngle>& pts, double t) {
    RationalAngle best = pts.back();
    for (const auto& p : pts)
        if (p.turns() <= t) best = p;
    return best;
}

double angle_distance(Complex a, Complex b) { return std::abs(a - b); }

} // namespace

TEST(FareyMesh, QmaxIsMinimal) {
    for (std::uint64_t n : {1, 2, 3, 5, 8, 13, 20})
        for (double eps : {0.5, 0.2, 0.08}) {
            const FareyMesh m = make_mesh(n, eps);
            EXPECT_EQ(m.q_max, brute_q_max(n, eps)) << n << " " << eps;
            EXPECT_NEAR(m.max_gap, circular_max_gap(farey_points(n, m.q_max)), 1e-15);
            EXPECT_LT(m.max_chord(), eps);
        }
}

TEST(FareyMesh, RejectsBadArguments) {
    EXPECT_THROW(make_mesh(0, 0.1), DomainError);
    EXPECT_THROW(make_mesh(3, 0.0), DomainError);
    EXPECT_THROW(periodic_approx_unitary(Operator::identity(), 3, -1.0), DomainError);
}

TEST(FareyMesh, SnapDownMatchesExhaustiveSearch) {
    std::mt19937_64 rng(40);
    for (std::uint64_t n : {2, 5, 11}) {
        const FareyMesh m = make_mesh(n, 0.1);
        const auto pts = farey_points(n, m.q_max);
        for (int t = 0; t < 300; ++t) {
            const double x = testing_util::angle_in_turns(rng);
            ASSERT_EQ(snap_down(m, x), brute_snap(pts, x)) << x;
            const RationalAngle r = RationalAngle::make(static_cast<std::int64_t>(rng() % 997), 997);
            ASSERT_EQ(snap_down(m, r), brute_snap(pts, r.turns()));
        }
        for (const auto& p : pts) ASSERT_EQ(snap_down(m, p), p);
    }
}

TEST(FareyMesh, SnappedAnglesStayInTheirArc) {
    std::mt19937_64 rng(41);
    const FareyMesh m = make_mesh(10, 1e-2);
    for (int t = 0; t < 2000; ++t) {
        const double x = testing_util::angle_in_turns(rng);
        const RationalAngle s = snap_down(m, x);
        ASSERT_GT(s.q, 10u);
        ASSERT_LE(s.q, m.q_max);
        double back = x - s.turns();
        if (back < 0) back += 1.0;
        ASSERT_LE(back, m.max_gap);
        ASSERT_LT(2.0 * std::sin(M_PI * back), 1e-2);
    }
}

TEST(FareyMesh, PrimeGrid) {
    const FareyMesh m = make_prime_mesh(10, 1e-3);
    EXPECT_TRUE(m.prime_grid);
    for (std::uint64_t d = 2; d * d <= m.q_max; ++d) ASSERT_NE(m.q_max % d, 0u);
    EXPECT_GE(m.q_max, 21u);
    EXPECT_LT(m.max_chord(), 1e-3);
    const RationalAngle s = snap_down(m, 0.3);
    EXPECT_EQ(s.q, m.q_max);
    EXPECT_LE(s.turns(), 0.3);
    EXPECT_GT(s.turns() + 1.0 / static_cast<double>(m.q_max), 0.3);
    EXPECT_EQ(snap_down(m, 0.0).p, m.q_max - 1);
}

TEST(PeriodicApprox, IdentityWithSmallFloor) {
    const auto [p, rep] = periodic_approx_unitary(Operator::identity(), 3, 0.5);
    const auto* d = p.as<Diagonal>();
    ASSERT_TRUE(d);
    const DiagEntry e = d->at(0);
    ASSERT_TRUE(e.angle);
    EXPECT_GE(e.angle->q, 5u);
    EXPECT_LE(diagonal_distance(Operator::identity(), p), 0.5);
    ASSERT_TRUE(rep.period);
    EXPECT_GT(*rep.period, 3u);
    EXPECT_LE(rep.achieved, 0.5);
}

TEST(PeriodicApprox, SingleEntryAgainstFareyOracle) {
    Diagonal u;
    u.dimension = 1;
    u.entries[0] = DiagEntry::from_value(std::polar(1.0, kTwoPi * 0.26));
    const auto [p, rep] = periodic_approx_unitary(Operator(u), 3, 0.02);
    const DiagEntry e = p.as<Diagonal>()->at(0);
    ASSERT_TRUE(e.angle);
    EXPECT_GT(e.angle->q, 3u);
    const FareyMesh m = make_mesh(3, 0.02);
    EXPECT_EQ(*e.angle, brute_snap(farey_points(3, brute_q_max(3, 0.02)), 0.26));
    EXPECT_EQ(m.q_max, brute_q_max(3, 0.02));
    EXPECT_LE(diagonal_distance(Operator(u), p), 0.02);
    EXPECT_EQ(rep.achieved, diagonal_distance(Operator(u), p));
}

TEST(PeriodicApprox, AlreadyPeriodicIsAFixedPoint) {
    Diagonal u;
    u.entries[0] = DiagEntry::from_angle(3, 7);
    u.entries[1] = DiagEntry::from_angle(1, 7);
    u.tail = DiagonalTail::constant_of(DiagEntry::from_angle(2, 7));
    const auto [p, rep] = periodic_approx_unitary(Operator(u), 5, 1e-6);
    EXPECT_EQ(p, Operator(u));
    EXPECT_EQ(rep.period, std::uint64_t{7});
    EXPECT_EQ(rep.achieved, 0.0);
}

TEST(PeriodicApprox, PeriodCertificateOnRandomProbes) {
    std::mt19937_64 rng(42);
    for (int t = 0; t < 20; ++t) {
        Diagonal u;
        for (std::uint64_t s = 0; s < 3; ++s)
            u.entries[s] = DiagEntry::from_value(std::polar(1.0, kTwoPi * testing_util::angle_in_turns(rng)));
        u.tail = DiagonalTail::constant_of(DiagEntry::from_value(std::polar(1.0, kTwoPi * testing_util::angle_in_turns(rng))));
        const auto [p, rep] = periodic_approx_unitary(Operator(u), 10, 1e-3);
        ASSERT_TRUE(rep.period);
        EXPECT_GT(*rep.period, 10u);
        EXPECT_LE(diagonal_distance(Operator(u), p), 1e-3);
        for (int k = 0; k < 100; ++k) {
            const SparseVector x = testing_util::random_sparse(rng, 8);
            ASSERT_EQ(apply_power(p, *rep.period, x), x);
        }
    }
}

TEST(PeriodicApprox, FallsBackToPrimeGridOnPeriodOverflow) {
    std::mt19937_64 rng(43);
    Diagonal u;
    for (std::uint64_t s = 0; s < 12; ++s)
        u.entries[s] = DiagEntry::from_value(std::polar(1.0, kTwoPi * testing_util::angle_in_turns(rng)));
    const auto [p, rep] = periodic_approx_unitary(Operator(u), 10, 1e-3);
    ASSERT_TRUE(rep.period);
    EXPECT_LE(diagonal_distance(Operator(u), p), 1e-3);
    for (std::uint64_t s = 0; s < 12; ++s) ASSERT_EQ(apply_power(p, *rep.period, SparseVector::basis(s)), SparseVector::basis(s));
}

TEST(PeriodicApprox, SpectralMeasureIsSnappedPiecewise) {
    const auto u = Operator::spectral(SpectralMeasure::lebesgue());
    const auto [p, rep] = periodic_approx_unitary(u, 4, 0.05);
    const auto* s = p.as<SpectralUnitary>();
    ASSERT_TRUE(s && s->symbol);
    ASSERT_TRUE(rep.period);
    EXPECT_GT(*rep.period, 4u);
    // |psi(theta) - e^{2 pi i theta}| stays below the mesh chord everywhere.
    for (int k = 0; k < 10000; ++k) {
        const double th = (k + 0.5) / 10000.0;
        ASSERT_LE(angle_distance(s->symbol->values[s->symbol->piece_of(th)].value, detail::turn(th)), rep.bound + 1e-12);
    }
    EXPECT_LT(rep.bound, 0.05);
}

TEST(PeriodicApprox, RejectsNonUnitaries) {
    EXPECT_THROW(periodic_approx_unitary(Operator::constant(DiagEntry::from_value(0.5)), 3, 0.1), ClassMismatch);
    EXPECT_THROW(periodic_approx_unitary(Operator::shift(), 3, 0.1), KindMismatch);
}

TEST(AwsIdentity, DistanceAtTen) {
    const auto a = aws_approx_identity(10);
    EXPECT_NEAR(a.report.bound, 0.09996, 1e-5);
    EXPECT_DOUBLE_EQ(a.report.bound, 2.0 * std::sin(1.0 / 20.0));
    EXPECT_LE(a.report.achieved, a.report.bound);
    const auto* s = a.op.as<SpectralUnitary>();
    ASSERT_TRUE(s);
    EXPECT_EQ(s->measure->atomic_mass(), 0.0);
    // Multiplication by e^{2 pi i theta} on a measure supported in [0, theta_max].
    const double theta_max = s->measure->density().upper();
    EXPECT_NEAR(2.0 * std::sin(M_PI * theta_max), a.report.achieved, 1e-15);
    EXPECT_TRUE(unimodular_point_spectrum(a.op).pairs.empty());
}

TEST(AwsIdentity, BoundRatioTendsToAQuarter) {
    double last = 1.0;
    for (std::uint64_t n = 1; n <= 100; ++n) {
        const double r = aws_approx_identity(4 * n).report.bound / aws_approx_identity(n).report.bound;
        const double dev = std::abs(r - 0.25);
        ASSERT_LE(dev, last);
        last = dev;
    }
    EXPECT_LT(last, 1e-5);
}

TEST(AwsIdentity, CustomProfileAndValidation) {
    PiecewiseLinear q{{0.0, 0.5, 2.0}, {0.0, 0.1, 0.8}};
    const auto a = aws_approx_identity(3, q);
    EXPECT_DOUBLE_EQ(a.report.achieved, 2.0 * std::sin(0.8 / 6.0));
    EXPECT_NEAR(a.op.as<SpectralUnitary>()->measure->total_mass(), 2.0, 1e-14);
    EXPECT_THROW(aws_approx_identity(3, PiecewiseLinear{{0.0, 1.0}, {0.5, 0.5}}), DomainError);
    EXPECT_THROW(aws_approx_identity(0), DomainError);
}

TEST(AwsIdentity, EmbeddingIsIsometric) {
    const auto a = aws_approx_identity(5);
    const Space space = space_of(a.op);
    const StepFunction f({0.0, 0.3, 1.0}, {Complex(1.0, 1.0), 2.0});
    EXPECT_NEAR(norm(space, a.embed(f)), f.norm(), 1e-13);
}

TEST(AwsPeriodic, IdentityNearOneVector) {
    const auto a = aws_approx_periodic(Operator::identity(), {Vector(SparseVector::basis(0))}, 0.1);
    ASSERT_EQ(a.report.forward_errors.size(), 1u);
    EXPECT_LT(a.report.forward_errors[0], 0.1);
    EXPECT_LE(a.report.forward_errors[0], a.report.bound + 1e-15);
    EXPECT_TRUE(unimodular_point_spectrum(a.t).pairs.empty());
    EXPECT_EQ(a.eigenvalues, std::vector<RationalAngle>{RationalAngle{}});
}

TEST(AwsPeriodic, MinusIdentityNearTwoVectors) {
    const auto u = Operator::constant(DiagEntry::from_angle(1, 2));
    const std::vector<Vector> xs{Vector(SparseVector::basis(0)), Vector(SparseVector::basis(1))};
    const auto a = aws_approx_periodic(u, xs, 0.05);
    const Space out = space_of(a.t);
    for (std::size_t j = 0; j < 2; ++j) {
        EXPECT_LT(a.report.forward_errors[j], 0.05);
        EXPECT_LT(a.report.adjoint_errors[j], 0.05);
        // Direct evaluation in the embedded picture: U x = -x.
        const Vector ex = a.embed(xs[j]);
        EXPECT_NEAR(norm(out, a.embed(apply(u, xs[j])) - apply(a.t, ex)), a.report.forward_errors[j], 1e-14);
    }
    EXPECT_TRUE(unimodular_point_spectrum(a.t).pairs.empty());
}

TEST(AwsPeriodic, BudgetHonored) {
    std::mt19937_64 rng(44);
    Diagonal d;
    d.tail = DiagonalTail::cycle_of({DiagEntry::from_angle(0, 1), DiagEntry::from_angle(1, 3), DiagEntry::from_angle(2, 3)});
    const Operator u(d);
    std::vector<Vector> xs;
    for (int k = 0; k < 4; ++k) xs.emplace_back(testing_util::random_sparse(rng, 9));
    const auto a = aws_approx_periodic(u, xs, 0.01);
    std::map<std::string, double> f(a.report.figures.begin(), a.report.figures.end());
    EXPECT_LT(2.0 * std::sin(1.0 / (2.0 * f["n"])), 0.01 / (4.0 * f["K"] * f["M"]));
    for (std::size_t j = 0; j < xs.size(); ++j) {
        EXPECT_LT(a.report.forward_errors[j], 0.01);
        EXPECT_LT(a.report.adjoint_errors[j], 0.01);
    }
}

TEST(AwsPeriodic, RejectsNonPeriodic) {
    EXPECT_THROW(aws_approx_periodic(Operator::shift(), {Vector(SparseVector::basis(0))}, 0.1), ClassMismatch);
    EXPECT_THROW(aws_approx_periodic(Operator::identity(), {Vector(SparseVector::basis(0))}, 0.0), DomainError);
}

TEST(ShiftApprox, ErrorFunctionalExamples) {
    EXPECT_EQ(shift_error_functional(SparseVector::basis(0), 3, 1), 0.0);
    EXPECT_EQ(shift_error_functional(SparseVector::basis(2), 3, 1), 2.0);
    const auto [t, rep] = periodic_approx_shift(3, 1, {SparseVector::basis(0), SparseVector::basis(2)});
    EXPECT_EQ(t, Operator::cyclic(3));
    EXPECT_EQ(rep.forward_errors[0], 0.0);
    EXPECT_NEAR(rep.forward_errors[1] * rep.forward_errors[1], 2.0, 1e-15);
}

TEST(ShiftApprox, ClosedFormMatchesComputedError) {
    std::mt19937_64 rng(45);
    for (std::uint64_t block : {1, 2}) {
        const auto r = Operator::shift(block);
        for (int t = 0; t < 200; ++t) {
            const SparseVector x = testing_util::random_sparse(rng, 40, 0, 6);
            for (std::uint64_t n = 1; n <= 32; ++n) {
                const double computed = (apply(Operator::cyclic(n, block), x) - apply(r, x)).norm_squared();
                ASSERT_NEAR(computed, shift_error_functional(x, n, block), 1e-12);
            }
        }
    }
}

TEST(ShiftApprox, ErrorVanishesOnceTheWindowCoversTheSupport) {
    std::mt19937_64 rng(46);
    const SparseVector x = testing_util::random_sparse(rng, 10, 0, 8);
    double last = std::numeric_limits<double>::infinity();
    for (std::uint64_t n = 11; n <= 40; ++n) {
        const double e = shift_error_functional(x, n, 1);
        EXPECT_LE(e, last);
        EXPECT_EQ(e, 0.0);
        last = e;
    }
}

TEST(IsometryApprox, ShiftPeriodic) {
    const Vector e1(SparseVector::basis(0));
    const auto a = approx_isometry(Operator::shift(), ApproxMode::periodic, 5, 0.1, {e1});
    const auto* c = a.op.as<CyclicMix>();
    ASSERT_TRUE(c);
    EXPECT_GT(c->period, 5u);
    EXPECT_NEAR(a.report.forward_errors[0] * a.report.forward_errors[0], shift_error_functional(e1.coords(), c->period, 1),
                1e-15);
    EXPECT_EQ(a.wold.shift_multiplicity, 1u);
}

TEST(IsometryApprox, UnitaryReducesToTheUnitaryPipeline) {
    Diagonal d;
    d.entries[0] = DiagEntry::from_value(std::polar(1.0, 0.4));
    d.tail = DiagonalTail::constant_of(DiagEntry::from_value(std::polar(1.0, 2.0)));
    const auto a = approx_isometry(Operator(d), ApproxMode::periodic, 6, 0.01, {Vector(SparseVector::basis(0))});
    EXPECT_EQ(a.op, periodic_approx_unitary(Operator(d), 6, 0.01).first);
    EXPECT_EQ(a.wold.shift_multiplicity, 0u);
}

TEST(IsometryApprox, AwsModeOnDiagonalPlusShift) {
    const auto v = Operator::direct_sum({Operator::constant(DiagEntry::from_angle(1, 4)), Operator::shift()});
    const std::vector<Vector> probes{Vector(SparseVector::basis(0, 0)), Vector(SparseVector::basis(2, 1))};
    const auto a = approx_isometry(v, ApproxMode::aws, 4, 0.1, probes);
    EXPECT_TRUE(unimodular_point_spectrum(a.op).pairs.empty());
    for (const Operator* b : a.op.branches()) {
        const auto* s = b->as<SpectralUnitary>();
        ASSERT_TRUE(s);
        EXPECT_EQ(s->measure->atomic_mass(), 0.0);
    }
    for (double e : a.report.forward_errors) EXPECT_LT(e, 0.1);
    EXPECT_THROW(approx_isometry(Operator::constant(DiagEntry::from_value(0.5)), ApproxMode::aws, 4, 0.1, probes), ClassMismatch);
}
