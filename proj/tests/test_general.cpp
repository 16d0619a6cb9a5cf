#include "agestruct/general.hpp"

#include "agestruct/comparison.hpp"
#include "agestruct/smallmat.hpp"
#include "oracles.hpp"

#include "doctest.h"

#include <cmath>

using namespace agestruct;

namespace {

GeneralParams scalar_params(const AgeGridPtr& g, double birth_rate, double death_rate)
{
    GeneralParams p;
    p.dim = 1;
    p.mortality_coupling = AgeProfile::constant(g, 1.0);
    p.birth_coupling = AgeProfile::constant(g, 1.0);
    p.mortality = [death_rate](std::span<const double>, double) {
        SmallMat m(1);
        m(0, 0) = -death_rate;
        return m;
    };
    p.birth = [birth_rate](std::span<const double>, double) {
        SmallMat m(1);
        m(0, 0) = birth_rate;
        return m;
    };
    return p;
}

} // namespace

TEST_CASE("small matrix building blocks")
{
    SmallMat n(2);
    n(0, 1) = 1.0; // nilpotent
    const SmallMat e = expm(n);
    CHECK(e(0, 0) == doctest::Approx(1.0));
    CHECK(e(0, 1) == doctest::Approx(1.0));
    CHECK(e(1, 0) == doctest::Approx(0.0));
    CHECK(e(1, 1) == doctest::Approx(1.0));

    SmallMat d = SmallMat::diagonal(3, -0.7);
    const SmallMat ed = expm(d);
    for (int i = 0; i < 3; ++i) CHECK(ed(i, i) == doctest::Approx(std::exp(-0.7)));

    SmallMat metzler(2);
    metzler(0, 0) = -1.0;
    metzler(0, 1) = 0.5;
    metzler(1, 0) = 0.3;
    metzler(1, 1) = -1.2;
    const SmallMat em = expm(metzler);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) CHECK(em(r, c) >= 0.0);

    // solve against a known inverse
    SmallMat a(2);
    a(0, 0) = 2.0;
    a(0, 1) = 1.0;
    a(1, 0) = 1.0;
    a(1, 1) = 3.0;
    double rhs[2] = {5.0, 10.0};
    REQUIRE(solve_inplace(a, std::span<double>(rhs, 2)));
    CHECK(rhs[0] == doctest::Approx(1.0));
    CHECK(rhs[1] == doctest::Approx(3.0));
}

TEST_CASE("birth functional closed forms")
{
    SUBCASE("zero profile maps to zero")
    {
        const AgeGridPtr g = make_grid(10.0, 100);
        const GeneralParams p = scalar_params(g, 2.0, 1.0);
        CHECK(apply_birth(AgeProfile(g, 1), p)[0] == 0.0);
    }

    SUBCASE("constant kernel times mass")
    {
        const AgeGridPtr g = make_grid(10.0, 200);
        const GeneralParams p = scalar_params(g, 2.5, 1.0);
        CHECK(apply_birth(AgeProfile::constant(g, 1.0), p)[0] == doctest::Approx(25.0));
    }

    SUBCASE("coupling-proportional kernel squares the mass")
    {
        const AgeGridPtr g = make_grid(2.0, 100);
        GeneralParams p = scalar_params(g, 1.0, 1.0);
        p.birth = [](std::span<const double> s, double) {
            SmallMat m(1);
            m(0, 0) = s[0];
            return m;
        };
        CHECK(apply_birth(AgeProfile::constant(g, 1.0), p)[0] == doctest::Approx(4.0));
    }
}

TEST_CASE("mortality image with saturating response")
{
    const AgeGridPtr g = make_grid(1.0, 100);
    GeneralParams p = scalar_params(g, 1.0, 1.0);
    p.mortality = [](std::span<const double> gt, double) {
        SmallMat m(1);
        m(0, 0) = -1.0 / (1.0 + gt[0]);
        return m;
    };
    CHECK(apply_mortality(AgeProfile(g, 1), p).max_abs() == 0.0);
    const AgeProfile ones = AgeProfile::constant(g, 1.0);
    const AgeProfile image = apply_mortality(ones, p);
    for (int j = 0; j < image.n_nodes(); ++j) CHECK(image.at(j) == doctest::Approx(-0.5));

    // the shifted map is order preserving once the shift clears the rate cap
    std::mt19937_64 rng(11);
    const double gamma = 1.5;
    for (int trial = 0; trial < 20; ++trial) {
        const AgeProfile lo = oracles::random_profile(rng, g);
        AgeProfile hi = lo;
        for (int j = 0; j < hi.n_nodes(); ++j) hi.at(j) += oracles::uniform01(rng);
        const AgeProfile d_lo = apply_mortality(lo, p);
        const AgeProfile d_hi = apply_mortality(hi, p);
        for (int j = 0; j < lo.n_nodes(); ++j) {
            const double s_lo = gamma * lo.at(j) + d_lo.at(j);
            const double s_hi = gamma * hi.at(j) + d_hi.at(j);
            CHECK(s_lo >= -1e-12);
            CHECK(s_lo <= s_hi + 1e-12);
        }
    }
}

TEST_CASE("simulation of ordered data stays ordered")
{
    const AgeGridPtr g = make_grid(10.0, 500);
    GeneralParams p = scalar_params(g, 1.0, 1.0);
    p.mortality = [](std::span<const double> gt, double) {
        SmallMat m(1);
        m(0, 0) = -1.0 / (1.0 + gt[0]);
        return m;
    };
    REQUIRE(monotonicity_probe(p, 5.0, 16, 3).certified);

    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        const AgeProfile lo = oracles::random_profile(rng, g);
        AgeProfile hi = lo;
        for (int j = 0; j < hi.n_nodes(); ++j) hi.at(j) += oracles::uniform01(rng);
        const Trajectory ta = general_simulate(GeneralState{lo}, p, 2.0);
        const Trajectory tb = general_simulate(GeneralState{hi}, p, 2.0);
        const double slack = order_tol(hi.max_abs()) + 5.0 * g->da;
        for (std::size_t k = 0; k < ta.size(); ++k) {
            CHECK(le_margin(ta.profiles[k], tb.profiles[k]) <= slack);
            CHECK(ta.profiles[k].nonnegative(0.0));
        }
    }
}

TEST_CASE("zero data stay zero when births vanish on zero")
{
    const AgeGridPtr g = make_grid(5.0, 100);
    const GeneralParams p = scalar_params(g, 3.0, 1.0);
    const Trajectory traj = general_simulate(GeneralState{AgeProfile(g, 1)}, p, 2.0);
    for (const auto& prof : traj.profiles) CHECK(prof.max_abs() == 0.0);
}

TEST_CASE("two-component system keeps positivity and order")
{
    const AgeGridPtr g = make_grid(5.0, 200);
    GeneralParams p;
    p.dim = 2;
    p.mortality_coupling = AgeProfile::constant(g, 1.0, 4);
    p.birth_coupling = AgeProfile::constant(g, 1.0, 4);
    p.mortality = [](std::span<const double>, double) {
        SmallMat m(2);
        m(0, 0) = -1.0;
        m(0, 1) = 0.4;
        m(1, 0) = 0.2;
        m(1, 1) = -1.5;
        return m;
    };
    p.birth = [](std::span<const double>, double) {
        SmallMat m(2);
        m(0, 0) = 0.8;
        m(0, 1) = 0.2;
        m(1, 0) = 0.1;
        m(1, 1) = 0.6;
        return m;
    };

    std::mt19937_64 rng(23);
    AgeProfile lo(g, 2);
    AgeProfile hi(g, 2);
    for (int j = 0; j < lo.n_nodes(); ++j) {
        for (int c = 0; c < 2; ++c) {
            lo.at(j, c) = oracles::uniform01(rng);
            hi.at(j, c) = lo.at(j, c) + oracles::uniform01(rng);
        }
    }
    const Trajectory ta = general_simulate(GeneralState{lo}, p, 1.0);
    const Trajectory tb = general_simulate(GeneralState{hi}, p, 1.0);
    const double slack = order_tol(hi.max_abs()) + 5.0 * g->da;
    for (std::size_t k = 0; k < ta.size(); ++k) {
        CHECK(ta.profiles[k].nonnegative(0.0));
        CHECK(le_margin(ta.profiles[k], tb.profiles[k]) <= slack);
    }
}

TEST_CASE("sampled probe verdicts")
{
    const AgeGridPtr g = make_grid(10.0, 200);

    SUBCASE("saturating mortality response certifies")
    {
        GeneralParams p = scalar_params(g, 1.0, 1.0);
        p.mortality = [](std::span<const double> gt, double) {
            SmallMat m(1);
            m(0, 0) = -1.0 / (1.0 + gt[0]);
            return m;
        };
        const ProbeResult res = monotonicity_probe(p, 5.0, 32, 42);
        CHECK(res.certified);
        CHECK(res.gamma > 1.0);
    }

    SUBCASE("steeply decaying birth response is caught")
    {
        GeneralParams p = scalar_params(g, 3.0, 1.0);
        p.birth = [](std::span<const double> s, double) {
            SmallMat m(1);
            const double d = 1.0 + s[0];
            m(0, 0) = 3.0 / (d * d);
            return m;
        };
        const ProbeResult res = monotonicity_probe(p, 5.0, 32, 42);
        CHECK_FALSE(res.certified);
        CHECK(res.counterexample.has_value());
        CHECK(res.violated.find("monotone") != std::string::npos);
    }

    SUBCASE("zero coefficients certify at the unit shift")
    {
        GeneralParams p = scalar_params(g, 0.0, 0.0);
        const ProbeResult res = monotonicity_probe(p, 5.0, 16, 7);
        CHECK(res.certified);
        CHECK(res.gamma == doctest::Approx(1.0));
    }
}

TEST_CASE("time monotonicity classification")
{
    const AgeGridPtr g = make_grid(10.0, 1000);
    const GeneralParams p = scalar_params(g, 3.0, 1.0);

    SUBCASE("fast-decaying datum gives an increasing run")
    {
        const GeneralState u{AgeProfile::sample(g, [](double a) { return std::exp(-2.0 * a); })};
        const MonotoneCheckResult res = trajectory_monotone_check(u, p, 2.0);
        CHECK(res.cls == MonotoneClass::Increasing);
        CHECK(res.datum_ok);
        CHECK(res.trajectory_ok);
    }

    SUBCASE("slow-decaying datum fits neither template")
    {
        const GeneralState u{AgeProfile::sample(g, [](double a) { return std::exp(-0.5 * a); })};
        const MonotoneCheckResult res = trajectory_monotone_check(u, p, 2.0);
        CHECK(res.cls == MonotoneClass::Neither);
        CHECK_FALSE(res.datum_ok);
    }

    SUBCASE("zero datum classifies increasing with a constant run")
    {
        const GeneralState u{AgeProfile(g, 1)};
        const MonotoneCheckResult res = trajectory_monotone_check(u, p, 2.0);
        CHECK(res.cls == MonotoneClass::Increasing);
        CHECK(res.worst_violation == 0.0);
    }

    SUBCASE("a genuinely decreasing run")
    {
        // births too weak to offset mortality: the constant-one datum decays
        GeneralParams q = scalar_params(g, 0.05, 1.0);
        const GeneralState u{AgeProfile::constant(g, 1.0)};
        const MonotoneCheckResult res = trajectory_monotone_check(u, q, 2.0);
        CHECK(res.cls == MonotoneClass::Decreasing);
    }
}

TEST_CASE("expm matches a truncated series on a dense system matrix")
{
    SmallMat a(3);
    const double entries[9] = {-1.2, 0.4, 0.1, 0.3, -0.9, 0.2, 0.05, 0.6, -1.5};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) a(r, c) = entries[r * 3 + c];

    // independent reference: plain Taylor series, converges fast at this norm
    SmallMat term = SmallMat::identity(3);
    SmallMat series = SmallMat::identity(3);
    for (int k = 1; k <= 20; ++k) {
        term = (1.0 / k) * (term * a);
        series = series + term;
    }
    const SmallMat pade = expm(a);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) CHECK(pade(r, c) == doctest::Approx(series(r, c)).epsilon(1e-9));
}

TEST_CASE("a subsolution track stays below the run it bounds")
{
    const AgeGridPtr g = make_grid(10.0, 500);
    const GeneralParams p = scalar_params(g, 3.0, 1.0);
    const AgeProfile phi = AgeProfile::sample(g, [](double a) { return std::exp(-2.0 * a); });

    // the one-sided datum makes its own constant track a verified subsolution
    const OperatorPair ops = operators_general(p);
    const std::vector<AgeProfile> track(21, phi);
    CHECK(check_subsolution(track, ops, order_tol(1.0)).ok);

    const Trajectory run = general_simulate(GeneralState{phi}, p, 1.0);
    for (std::size_t k = 0; k < std::min<std::size_t>(run.size(), track.size()); ++k) {
        CHECK(le(track[k], run.profiles[k]));
    }
}

TEST_CASE("general model fixed-point sweep matches direct stepping")
{
    const AgeGridPtr g = make_grid(10.0, 500);
    GeneralParams p = scalar_params(g, 1.0, 1.0);
    p.mortality = [](std::span<const double> gt, double) {
        SmallMat m(1);
        m(0, 0) = -1.0 / (1.0 + gt[0]);
        return m;
    };
    const GeneralState u{AgeProfile::sample(g, [](double a) { return std::exp(-a); })};
    const Trajectory direct = general_simulate(u, p, 1.0);
    const SweepModel model = sweep_general(p);
    const IterationReport rep = monotone_iterate(constant_seed(u.u), model, 2.0, 1.0, 200);
    REQUIRE(rep.converged);
    double worst = 0.0;
    for (std::size_t k = 0; k < direct.size(); ++k) {
        const auto& a = direct.profiles[k].raw();
        const auto& b = rep.fixed_point.profiles[k].raw();
        for (std::size_t n = 0; n < a.size(); ++n) worst = std::max(worst, std::abs(a[n] - b[n]));
    }
    CHECK(worst < 1e-8);
}
