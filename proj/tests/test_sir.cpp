#include "agestruct/sir.hpp"

#include "agestruct/comparison.hpp"
#include "agestruct/errors.hpp"
#include "oracles.hpp"

#include "doctest.h"

#include <cmath>

using namespace agestruct;

namespace {

SirParams make_params(const AgeGridPtr& g, double recruitment, double death, double eta,
                      double beta, double nu)
{
    SirParams p;
    p.recruitment = recruitment;
    p.susceptible_death = death;
    p.transmission = eta;
    p.infectivity = AgeProfile::constant(g, beta);
    p.removal = AgeProfile::constant(g, nu);
    p.removal_floor = nu;
    return p;
}

} // namespace

TEST_CASE("disease-free equilibrium is a fixed point of the step")
{
    const AgeGridPtr g = make_grid(1.0, 10); // da = dt = 0.1
    SirParams p = make_params(g, 1.0, 1.0, 1.0, 1.0, 1.0);
    // no infectivity: S decouples
    p.infectivity = AgeProfile::constant(g, 0.0);
    SirState st{1.0, AgeProfile(g, 1)};
    const SirState next = sir_step(st, p);
    CHECK(next.S == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(next.i.max_abs() == 0.0);
}

TEST_CASE("zero infection stays zero")
{
    const AgeGridPtr g = make_grid(5.0, 50);
    const SirParams p = make_params(g, 1.0, 0.5, 1.0, 1.0, 1.0);
    SirState st{2.0, AgeProfile(g, 1)};
    for (int k = 0; k < 30; ++k) st = sir_step(st, p);
    CHECK(st.i.max_abs() == 0.0);
}

TEST_CASE("nonlinear trajectory matches the fixed-point sweep")
{
    const AgeGridPtr g = make_grid(10.0, 1000); // dt = 0.01
    const SirParams p = make_params(g, 1.0, 0.5, 1.0, 1.0, 1.0);
    const SirState st{1.0, AgeProfile::indicator(g, 0.0, 1.0)};
    const Trajectory direct = sir_simulate(st, p, 1.0);

    const SweepModel model = sweep_sir_full(p);
    const IterationReport rep =
        monotone_iterate(constant_seed(st.i, {st.S}), model, model.gamma_suggested, 1.0, 200);
    REQUIRE(rep.converged);
    double worst = 0.0;
    for (std::size_t k = 0; k < direct.size(); ++k) {
        worst = std::max(worst, std::abs(direct.S[k] - rep.fixed_point.S[k]));
        const auto& a = direct.profiles[k].raw();
        const auto& b = rep.fixed_point.profiles[k].raw();
        for (std::size_t n = 0; n < a.size(); ++n) worst = std::max(worst, std::abs(a[n] - b[n]));
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("susceptibles relax to the equilibrium without infection")
{
    const AgeGridPtr g = make_grid(10.0, 1000);
    const SirParams p = make_params(g, 1.0, 1.0, 1.0, 1.0, 1.0);
    const SirState st{0.0, AgeProfile(g, 1)};
    const Trajectory traj = sir_simulate(st, p, 1.0);
    for (std::size_t k = 1; k < traj.size(); ++k) CHECK(traj.S[k] >= traj.S[k - 1]);
    CHECK(traj.S.back() == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(0.01));
}

TEST_CASE("discrete mass balance residual shrinks at first order")
{
    double resid[2];
    int n = 500;
    for (int lvl = 0; lvl < 2; ++lvl, n *= 2) {
        const AgeGridPtr g = make_grid(10.0, n);
        const SirParams p = make_params(g, 1.0, 0.5, 1.0, 1.0, 1.0);
        const SirState st{1.0, AgeProfile::indicator(g, 0.0, 1.0)};
        const Trajectory traj = sir_simulate(st, p, 1.0);
        double worst = 0.0;
        for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
            const double dI = (traj.mass[k + 1] - traj.mass[k]) / traj.dt;
            const double gain = p.transmission * traj.S[k + 1] * traj.flux[k + 1];
            const double loss = integrate_scalar(traj.profiles[k + 1], p.removal);
            worst = std::max(worst, std::abs(dI - (gain - loss)));
        }
        resid[lvl] = worst;
    }
    CHECK(resid[1] < resid[0]);
    CHECK(oracles::observed_order(resid[0], resid[1]) == doctest::Approx(1.0).epsilon(0.4));
}

TEST_CASE("random nonnegative data stay nonnegative")
{
    std::mt19937_64 rng(2024);
    const AgeGridPtr g = make_grid(5.0, 200);
    const SirParams p = make_params(g, 1.0, 0.5, 1.0, 1.0, 1.0);
    for (int run = 0; run < 100; ++run) {
        SirState st{2.0 * oracles::uniform01(rng), oracles::random_profile(rng, g)};
        const Trajectory traj = sir_simulate(st, p, 1.0);
        for (const auto& prof : traj.profiles) CHECK(prof.nonnegative(0.0));
        for (double s : traj.S) CHECK(s >= 0.0);
    }
}

TEST_CASE("a priori susceptible bounds")
{
    const AgeGridPtr g = make_grid(20.0, 1000);

    SUBCASE("upper bound arithmetic")
    {
        const SirParams p = make_params(g, 1.0, 0.5, 1.0, 1.0, 1.0);
        const SirState st{1.0, AgeProfile(g, 1)};
        CHECK(sir_bounds(st, p).S_plus == doctest::Approx(3.0));
    }

    SUBCASE("population cap and lower bound")
    {
        const SirParams p = make_params(g, 1.0, 0.5, 1.0, 1.0, 1.0);
        AgeProfile i0 = AgeProfile::indicator(g, 0.0, 1.0);
        const double scale = 0.5 / integrate_scalar(i0);
        for (double& v : i0.raw()) v *= scale; // total infected mass 0.5
        const SirBounds b = sir_bounds(SirState{1.0, i0}, p);
        CHECK(b.M == doctest::Approx(2.0));
        CHECK(b.S_minus == doctest::Approx(0.4));
    }

    SUBCASE("nonpositive initial susceptibles are rejected")
    {
        const SirParams p = make_params(g, 1.0, 0.5, 1.0, 1.0, 1.0);
        CHECK_THROWS_AS(sir_bounds(SirState{0.0, AgeProfile(g, 1)}, p), std::invalid_argument);
    }

    SUBCASE("simulated susceptibles stay inside the bounds")
    {
        const SirParams p = make_params(g, 1.0, 0.5, 1.0, 1.0, 1.0);
        const SirState st{1.0, AgeProfile::indicator(g, 0.0, 1.0)};
        const SirBounds b = sir_bounds(st, p);
        const Trajectory traj = sir_simulate(st, p, 50.0);
        const double tol = order_tol(b.S_plus);
        for (double s : traj.S) {
            CHECK(s >= b.S_minus - tol);
            CHECK(s <= b.S_plus + tol);
        }
    }
}

TEST_CASE("frozen system grows at the constant-coefficient rate")
{
    // transmission * S * infectivity = 2, removal = 1: growth rate 1
    double err[2];
    int n = 500;
    for (int lvl = 0; lvl < 2; ++lvl, n *= 2) {
        const AgeGridPtr g = make_grid(10.0, n);
        const SirParams p = make_params(g, 1.0, 0.5, 1.0, 1.0, 1.0);
        const AgeProfile i0 = AgeProfile::indicator(g, 0.0, 1.0);
        const Trajectory traj = sir_frozen_simulate(i0, 2.0, p, 1.0);
        const double growth = traj.mass.back() / traj.mass.front();
        err[lvl] = std::abs(growth - std::exp(1.0)) / std::exp(1.0);
    }
    CHECK(err[0] < 0.05);
    CHECK(err[1] < err[0]);
}

TEST_CASE("frozen system conserves mass when the rates balance")
{
    const AgeGridPtr g = make_grid(10.0, 1000);
    // transmission * S * infectivity = 2, removal = 2: growth rate 0
    const SirParams p = make_params(g, 1.0, 0.5, 1.0, 1.0, 2.0);
    const AgeProfile i0 = AgeProfile::indicator(g, 0.0, 1.0);
    const Trajectory traj = sir_frozen_simulate(i0, 2.0, p, 1.0);
    for (double m : traj.mass) CHECK(m == doctest::Approx(traj.mass.front()).epsilon(0.03));
}

TEST_CASE("frozen system with zero data stays zero")
{
    const AgeGridPtr g = make_grid(10.0, 200);
    const SirParams p = make_params(g, 1.0, 0.5, 1.0, 1.0, 1.0);
    const Trajectory traj = sir_frozen_simulate(AgeProfile(g, 1), 2.0, p, 2.0);
    for (const auto& prof : traj.profiles) CHECK(prof.max_abs() == 0.0);
}

TEST_CASE("boundary solvability failure names a smaller step")
{
    const AgeGridPtr g = make_grid(10.0, 10); // da = 1, huge step
    const SirParams p = make_params(g, 1.0, 0.5, 1.0, 1.0, 1.0);
    const SirState st{10.0, AgeProfile::indicator(g, 0.0, 1.0)};
    CHECK_THROWS_AS(sir_step(st, p), StepSizeError);
    try {
        sir_step(st, p);
    } catch (const StepSizeError& e) {
        CHECK(e.suggested_da() > 0.0);
        CHECK(e.suggested_da() < g->da);
    }
}

TEST_CASE("horizon must be a step multiple")
{
    const AgeGridPtr g = make_grid(10.0, 100);
    const SirParams p = make_params(g, 1.0, 0.5, 1.0, 1.0, 1.0);
    const SirState st{1.0, AgeProfile(g, 1)};
    CHECK_THROWS_AS(sir_simulate(st, p, 1.05), std::invalid_argument);
}
