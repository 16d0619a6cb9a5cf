#include "agestruct/comparison.hpp"

#include "agestruct/errors.hpp"
#include "agestruct/spectral.hpp"
#include "oracles.hpp"

#include "doctest.h"

#include <cmath>

using namespace agestruct;

namespace {

SirParams sir_constants(const AgeGridPtr& g, double eta, double beta, double nu)
{
    SirParams p;
    p.recruitment = 1.0;
    p.susceptible_death = 0.5;
    p.transmission = eta;
    p.infectivity = AgeProfile::constant(g, beta);
    p.removal = AgeProfile::constant(g, nu);
    p.removal_floor = nu;
    return p;
}

std::vector<AgeProfile> constant_track(const AgeProfile& x, std::size_t levels)
{
    return std::vector<AgeProfile>(levels, x);
}

} // namespace

TEST_CASE("zero seed with zero data converges immediately")
{
    const AgeGridPtr g = make_grid(5.0, 100);
    const SirParams p = sir_constants(g, 1.0, 1.0, 1.0);
    const SweepModel model = sweep_sir_frozen(2.0, p);
    const IterationReport rep =
        monotone_iterate(constant_seed(AgeProfile(g, 1)), model, model.gamma_suggested, 1.0, 50);
    CHECK(rep.converged);
    for (const auto& prof : rep.fixed_point.profiles) CHECK(prof.max_abs() == 0.0);
    for (bool f : rep.monotone_flags) CHECK(f);
}

TEST_CASE("iterates increase from a subsolution seed and reach the direct solution")
{
    const AgeGridPtr g = make_grid(10.0, 500);
    // transmission * S * infectivity = 4 while the seed decays at rate 2
    const SirParams p = sir_constants(g, 2.0, 1.0, 1.0);
    const double S_frozen = 2.0;
    const AgeProfile x = AgeProfile::sample(g, [](double a) { return std::exp(-2.0 * a); });

    // the seed is a verified discrete subsolution
    const OperatorPair ops = operators_sir_frozen(S_frozen, p);
    const auto track = constant_track(x, 11);
    const InequalityReport sub = check_subsolution(track, ops, order_tol(1.0));
    REQUIRE(sub.ok);

    const SweepModel model = sweep_sir_frozen(S_frozen, p);
    const IterationReport rep = monotone_iterate(constant_seed(x), model, model.gamma_suggested, 1.0, 200);
    CHECK(rep.converged);
    CHECK(rep.gamma_verified);
    for (bool f : rep.monotone_flags) CHECK(f);

    const Trajectory direct = sir_frozen_simulate(x, S_frozen, p, 1.0);
    double worst = 0.0;
    for (std::size_t k = 0; k < direct.size(); ++k) {
        const auto& a = direct.profiles[k].raw();
        const auto& b = rep.fixed_point.profiles[k].raw();
        for (std::size_t n = 0; n < a.size(); ++n) worst = std::max(worst, std::abs(a[n] - b[n]));
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("iterates decrease from a supersolution seed")
{
    const AgeGridPtr g = make_grid(10.0, 500);
    // weak boundary feedback: transmission * S * infectivity = 0.5
    const SirParams p = sir_constants(g, 1.0, 1.0, 1.0);
    const double S_frozen = 0.5;
    const AgeProfile x = AgeProfile::sample(g, [](double a) { return std::exp(-0.5 * a); });

    const OperatorPair ops = operators_sir_frozen(S_frozen, p);
    const auto track = constant_track(x, 11);
    CHECK(check_supersolution(track, ops, order_tol(1.0)).ok);

    const SweepModel model = sweep_sir_frozen(S_frozen, p);
    const IterationReport rep = monotone_iterate(constant_seed(x), model, model.gamma_suggested, 1.0, 200);
    CHECK(rep.converged);
    for (bool f : rep.monotone_flags_decreasing) CHECK(f);
}

TEST_CASE("ordered seeds produce ordered fixed points")
{
    std::mt19937_64 rng(606);
    const AgeGridPtr g = make_grid(5.0, 100);
    const SirParams p = sir_constants(g, 1.0, 1.0, 1.0);
    const SweepModel model = sweep_sir_frozen(2.0, p);
    for (int trial = 0; trial < 5; ++trial) {
        const AgeProfile x = oracles::random_profile(rng, g);
        AgeProfile y = x;
        for (int j = 0; j < y.n_nodes(); ++j) y.at(j) += oracles::uniform01(rng);
        const IterationReport rx = monotone_iterate(constant_seed(x), model, model.gamma_suggested, 1.0, 200);
        const IterationReport ry = monotone_iterate(constant_seed(y), model, model.gamma_suggested, 1.0, 200);
        REQUIRE(rx.converged);
        REQUIRE(ry.converged);
        for (std::size_t k = 0; k < rx.fixed_point.size(); ++k) {
            CHECK(le(rx.fixed_point.profiles[k], ry.fixed_point.profiles[k]));
        }
    }
}

TEST_CASE("runaway feedback raises a divergence error")
{
    const AgeGridPtr g = make_grid(5.0, 100);
    const SirParams p = sir_constants(g, 1.0, 1.0, 1.0);
    const SweepModel model = sweep_sir_frozen(100.0, p); // kernel mass far above one
    const AgeProfile x = AgeProfile::indicator(g, 0.0, 1.0);
    CHECK_THROWS_AS(monotone_iterate(constant_seed(x), model, model.gamma_suggested, 5.0, 200),
                    DivergenceError);
}

TEST_CASE("renewal iteration from the nonlinear boundary trace")
{
    const AgeGridPtr g = make_grid(10.0, 500);
    const SirParams p = sir_constants(g, 1.0, 1.0, 1.0);
    const AgeProfile i0 = AgeProfile::indicator(g, 0.0, 1.0);
    const SirState st{1.0, i0};
    const SirBounds b = sir_bounds(st, p);
    const Trajectory nonlinear = sir_simulate(st, p, 4.0);

    const std::vector<double> b0 = boundary_trace(nonlinear, p);

    const RenewalReport rep = renewal_iterate(i0, b.S_plus, p, 4.0, 50, b0);
    for (bool f : rep.monotone_flags) CHECK(f);

    const Trajectory frozen = sir_frozen_simulate(i0, b.S_plus, p, 4.0);
    double worst = 0.0;
    double scale = 0.0;
    for (std::size_t k = 1; k < frozen.size(); ++k) {
        scale = std::max(scale, frozen.profiles[k].at(0));
        worst = std::max(worst, std::abs(rep.limit[k] - frozen.profiles[k].at(0)));
    }
    CHECK(worst / scale < 1e-8);
}

TEST_CASE("renewal iteration of zero data is identically zero")
{
    const AgeGridPtr g = make_grid(5.0, 100);
    const SirParams p = sir_constants(g, 1.0, 1.0, 1.0);
    const RenewalReport rep = renewal_iterate(AgeProfile(g, 1), 2.0, p, 2.0, 10);
    for (double v : rep.limit) CHECK(v == 0.0);
    for (bool f : rep.monotone_flags) CHECK(f);
}

TEST_CASE("renewal limit grows at the characteristic rate")
{
    const AgeGridPtr g = make_grid(10.0, 500); // dt = 0.02
    const SirParams p = sir_constants(g, 1.0, 1.0, 1.0);
    const double S_plus = 3.0;
    const AgeProfile i0 = AgeProfile::indicator(g, 0.0, 1.0);
    const RenewalReport rep = renewal_iterate(i0, S_plus, p, 8.0, 80);
    const double lam = growth_rate_sir(S_plus, p);
    const std::size_t last = rep.limit.size() - 1;
    const double ratio = rep.limit[last] / rep.limit[last - 1];
    CHECK(std::abs(ratio - std::exp(lam * g->da)) < 0.01 * std::exp(lam * g->da));
}

TEST_CASE("inequality checks accept the solver output and locate violations")
{
    const AgeGridPtr g = make_grid(10.0, 500);
    const SirParams p = sir_constants(g, 2.0, 1.0, 1.0);
    const double S_frozen = 2.0;
    const AgeProfile x = AgeProfile::sample(g, [](double a) { return std::exp(-2.0 * a); });
    const Trajectory traj = sir_frozen_simulate(x, S_frozen, p, 1.0);
    const OperatorPair ops = operators_sir_frozen(S_frozen, p);

    SUBCASE("solver output is a subsolution up to the step error")
    {
        const InequalityReport rep =
            check_subsolution(traj.profiles, ops, 5.0 * traj.dt * (1.0 + x.max_abs()));
        CHECK(rep.ok);
    }

    SUBCASE("an upward bump breaks the transport inequality at its node")
    {
        std::vector<AgeProfile> bumped(traj.profiles.begin(), traj.profiles.end());
        bumped[20].at(123) += 0.5;
        const InequalityReport rep =
            check_subsolution(bumped, ops, 5.0 * traj.dt * (1.0 + x.max_abs()));
        CHECK_FALSE(rep.ok);
        // the bump shows up as a too-fast rise into (20, 123) or a too-fast
        // fall out of it one step later along the shifted characteristic
        const bool located = (rep.transport_step == 19 && rep.transport_node == 123) ||
                             (rep.transport_step == 20 && rep.transport_node == 124);
        CHECK(located);
    }

    SUBCASE("a downward dent breaks the supersolution check")
    {
        std::vector<AgeProfile> dented(traj.profiles.begin(), traj.profiles.end());
        dented[30].at(200) = 0.0;
        CHECK_FALSE(check_supersolution(dented, ops, 5.0 * traj.dt * (1.0 + x.max_abs())).ok);
    }

    SUBCASE("disease-free constant track satisfies both inequalities")
    {
        const auto zeros = constant_track(AgeProfile(g, 1), 5);
        CHECK(check_subsolution(zeros, ops, 0.0).ok);
        CHECK(check_supersolution(zeros, ops, 0.0).ok);
    }

    SUBCASE("negative entries are rejected")
    {
        std::vector<AgeProfile> bad(traj.profiles.begin(), traj.profiles.begin() + 3);
        bad[1].at(5) = -1.0;
        CHECK_THROWS_AS(check_subsolution(bad, ops, 1e-6), std::invalid_argument);
    }
}

TEST_CASE("sandwich verification reports margins and locations")
{
    const AgeGridPtr g = make_grid(10.0, 200);
    const SirParams p = sir_constants(g, 1.0, 1.0, 1.0);
    const AgeProfile i0 = AgeProfile::indicator(g, 0.0, 1.0);
    const Trajectory mid = sir_frozen_simulate(i0, 2.0, p, 2.0);

    SUBCASE("equal trajectories pass with zero margins")
    {
        const SandwichReport rep = sandwich_verify(mid, mid, mid, 0.0);
        CHECK(rep.ok);
        CHECK(rep.worst_lower_margin <= 0.0);
        CHECK(rep.worst_upper_margin <= 0.0);
    }

    SUBCASE("zero lower bound always passes below a nonnegative run")
    {
        Trajectory zero = sir_frozen_simulate(AgeProfile(g, 1), 2.0, p, 2.0);
        const SandwichReport rep = sandwich_verify(zero, mid, mid, 0.0);
        CHECK(rep.worst_lower_margin <= 0.0);
    }

    SUBCASE("violations carry a location")
    {
        Trajectory upper = mid;
        upper.profiles[40].at(7) -= 0.5; // make the upper bound dip below mid
        const SandwichReport rep = sandwich_verify(mid, mid, upper, 1e-9);
        CHECK_FALSE(rep.ok);
        CHECK(rep.worst_upper_step == 40);
        CHECK(rep.worst_upper_age == doctest::Approx(g->nodes[7]));
    }

    SUBCASE("length mismatch is rejected")
    {
        const Trajectory shorter = sir_frozen_simulate(i0, 2.0, p, 1.0);
        CHECK_THROWS_AS(sandwich_verify(shorter, mid, mid, 0.0), std::invalid_argument);
    }
}

TEST_CASE("full sandwich on the generic scenario")
{
    const AgeGridPtr g = make_grid(20.0, 1000); // dt = 0.02 keeps this test quick
    const SirParams p = sir_constants(g, 1.0, 1.0, 1.0);
    const SirState st{1.0, AgeProfile::indicator(g, 0.0, 1.0)};
    const SirBounds b = sir_bounds(st, p);
    const Trajectory mid = sir_simulate(st, p, 20.0);
    const Trajectory lo = sir_frozen_simulate(st.i, b.S_minus, p, 20.0);
    const Trajectory hi = sir_frozen_simulate(st.i, b.S_plus, p, 20.0);
    const SandwichReport rep = sandwich_verify(lo, mid, hi, 1e-6 + 5.0 * g->da);
    CHECK(rep.ok);
}

TEST_CASE("sandwich holds across random admissible parameters")
{
    std::mt19937_64 rng(314159);
    const AgeGridPtr g = make_grid(12.0, 300); // dt = 0.04
    const double tol = 1e-6 + 5.0 * g->da;
    for (int draw = 0; draw < 10; ++draw) {
        SirParams p;
        p.recruitment = 0.5 + oracles::uniform01(rng);
        p.susceptible_death = 0.3 + oracles::uniform01(rng);
        p.transmission = 0.5 + oracles::uniform01(rng);
        const double b0 = 0.3 + oracles::uniform01(rng);
        const double b1 = 0.3 + oracles::uniform01(rng);
        p.infectivity = AgeProfile::sample(g, [&](double a) { return b0 + (b1 - b0) * a / 12.0; });
        const double floor = 0.6 + 0.5 * oracles::uniform01(rng);
        p.removal = AgeProfile::sample(g, [&](double a) { return floor + 0.2 * std::abs(std::sin(a)); });
        p.removal_floor = floor;

        const SirState st{0.2 + oracles::uniform01(rng), oracles::random_profile(rng, g)};
        const SirBounds b = sir_bounds(st, p);
        const Trajectory mid = sir_simulate(st, p, 6.0);
        const Trajectory lo = sir_frozen_simulate(st.i, b.S_minus, p, 6.0);
        const Trajectory hi = sir_frozen_simulate(st.i, b.S_plus, p, 6.0);
        const SandwichReport rep = sandwich_verify(lo, mid, hi, tol);
        CHECK(rep.ok);
    }
    for (int draw = 0; draw < 10; ++draw) {
        HivParams p;
        p.supply = 0.5 + oracles::uniform01(rng);
        p.cell_death = 0.5 + oracles::uniform01(rng);
        p.infection_rate = 0.5 + oracles::uniform01(rng);
        p.clearance = 0.5 + oracles::uniform01(rng);
        p.production = AgeProfile::sample(
            g, [&, s = 0.3 + oracles::uniform01(rng)](double a) { return s / (1.0 + 0.1 * a); });
        const double floor = 0.6 + 0.5 * oracles::uniform01(rng);
        p.infected_death = AgeProfile::constant(g, floor);
        p.infected_death_floor = floor;

        const HivState st{0.2 + oracles::uniform01(rng), oracles::uniform01(rng),
                          oracles::random_profile(rng, g)};
        const HivBounds b = hiv_bounds(st, p);
        const Trajectory mid = hiv_simulate(st, p, 6.0);
        const Trajectory lo = hiv_frozen_simulate(st.i, st.V, b.T_minus, p, 6.0);
        const Trajectory hi = hiv_frozen_simulate(st.i, st.V, b.T_plus, p, 6.0);
        const SandwichReport rep = sandwich_verify(lo, mid, hi, tol);
        CHECK(rep.ok);
    }
}
