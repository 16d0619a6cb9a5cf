#include "agestruct/hiv.hpp"

#include "agestruct/comparison.hpp"
#include "oracles.hpp"

#include "doctest.h"

#include <cmath>

using namespace agestruct;

namespace {

HivParams make_params(const AgeGridPtr& g, double s, double d, double k, double c, double prod,
                      double death)
{
    HivParams p;
    p.supply = s;
    p.cell_death = d;
    p.infection_rate = k;
    p.clearance = c;
    p.production = AgeProfile::constant(g, prod);
    p.infected_death = AgeProfile::constant(g, death);
    p.infected_death_floor = death;
    return p;
}

} // namespace

TEST_CASE("uninfected dynamics relax target cells")
{
    const AgeGridPtr g = make_grid(1.0, 10); // dt = 0.1
    const HivParams p = make_params(g, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
    HivState st{0.0, 0.0, AgeProfile(g, 1)};
    const HivState next = hiv_step(st, p);
    CHECK(next.T == doctest::Approx(0.1 / 1.1).epsilon(1e-15));
    CHECK(next.V == 0.0);
    CHECK(next.i.max_abs() == 0.0);
}

TEST_CASE("virions decay geometrically without production")
{
    const AgeGridPtr g = make_grid(1.0, 10);
    const HivParams p = make_params(g, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0);
    HivState st{1.0, 2.0, AgeProfile(g, 1)};
    const HivState next = hiv_step(st, p);
    CHECK(next.V == doctest::Approx(2.0 / 1.1).epsilon(1e-15));
}

TEST_CASE("nonlinear trajectory matches the fixed-point sweep")
{
    const AgeGridPtr g = make_grid(10.0, 1000);
    const HivParams p = make_params(g, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
    const HivState st{1.0, 0.5, AgeProfile::indicator(g, 0.0, 1.0)};
    const Trajectory direct = hiv_simulate(st, p, 1.0);

    const SweepModel model = sweep_hiv_full(p);
    const IterationReport rep =
        monotone_iterate(constant_seed(st.i, {st.T, st.V}), model, model.gamma_suggested, 1.0, 200);
    REQUIRE(rep.converged);
    double worst = 0.0;
    for (std::size_t k = 0; k < direct.size(); ++k) {
        worst = std::max(worst, std::abs(direct.T[k] - rep.fixed_point.T[k]));
        worst = std::max(worst, std::abs(direct.V[k] - rep.fixed_point.V[k]));
        const auto& a = direct.profiles[k].raw();
        const auto& b = rep.fixed_point.profiles[k].raw();
        for (std::size_t n = 0; n < a.size(); ++n) worst = std::max(worst, std::abs(a[n] - b[n]));
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("population and virion caps hold on random runs")
{
    std::mt19937_64 rng(99);
    const AgeGridPtr g = make_grid(5.0, 200);
    const HivParams p = make_params(g, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
    const double d0 = std::min(p.cell_death, p.infected_death_floor);
    const double p_sup = p.production.max_abs();
    for (int run = 0; run < 50; ++run) {
        HivState st{oracles::uniform01(rng) + 0.1, oracles::uniform01(rng),
                    oracles::random_profile(rng, g)};
        const double I0 = integrate_scalar(st.i);
        const double pop_cap = std::max(st.T + I0, p.supply / d0);
        const double v_cap = std::max(st.V, (p_sup / p.clearance) * pop_cap);
        const Trajectory traj = hiv_simulate(st, p, 2.0);
        const double tol = order_tol(pop_cap);
        for (std::size_t k = 0; k < traj.size(); ++k) {
            CHECK(traj.T[k] + traj.mass[k] <= pop_cap + tol);
            CHECK(traj.V[k] <= v_cap + tol);
        }
    }
}

TEST_CASE("all-zero data stay on the uninfected branch")
{
    const AgeGridPtr g = make_grid(5.0, 100);
    const HivParams p = make_params(g, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
    const Trajectory traj = hiv_simulate(HivState{0.0, 0.0, AgeProfile(g, 1)}, p, 5.0);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        CHECK(traj.V[k] == 0.0);
        CHECK(traj.mass[k] == 0.0);
        CHECK(traj.T[k] <= p.supply / p.cell_death + 1e-12);
    }
}

TEST_CASE("a priori target-cell bounds")
{
    const AgeGridPtr g = make_grid(20.0, 1000);
    const HivParams p = make_params(g, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);

    SUBCASE("displayed arithmetic")
    {
        const HivBounds b = hiv_bounds(HivState{1.0, 0.0, AgeProfile(g, 1)}, p);
        CHECK(b.T_plus == doctest::Approx(1.0));
        CHECK(b.V_cap == doctest::Approx(1.0));
        CHECK(b.d1 == doctest::Approx(2.0));
        CHECK(b.T_minus == doctest::Approx(0.5));
    }

    SUBCASE("nonpositive initial target cells are rejected")
    {
        CHECK_THROWS_AS(hiv_bounds(HivState{0.0, 0.0, AgeProfile(g, 1)}, p), std::invalid_argument);
    }

    SUBCASE("trajectory stays inside the bounds over a long run")
    {
        const HivState st{1.0, 0.0, AgeProfile::indicator(g, 0.0, 1.0)};
        const HivBounds b = hiv_bounds(st, p);
        const Trajectory traj = hiv_simulate(st, p, 50.0);
        const double tol = order_tol(b.T_plus);
        for (double t : traj.T) {
            CHECK(t >= b.T_minus - tol);
            CHECK(t <= b.T_plus + tol);
        }
    }

    SUBCASE("large infected mass raises the cap and still contains the run")
    {
        AgeProfile i0 = AgeProfile::indicator(g, 0.0, 1.0);
        const double scale = 10.0 / integrate_scalar(i0);
        for (double& v : i0.raw()) v *= scale;
        const HivState st{1.0, 0.0, i0};
        const HivBounds b = hiv_bounds(st, p);
        CHECK(b.T_plus == doctest::Approx(11.0));
        const Trajectory traj = hiv_simulate(st, p, 20.0);
        const double tol = order_tol(b.T_plus);
        for (double t : traj.T) {
            CHECK(t >= b.T_minus - tol);
            CHECK(t <= b.T_plus + tol);
        }
    }
}

TEST_CASE("frozen system pairing grows at the characteristic rate")
{
    // production 4, clearance 1, death 1, kT = 1: root of (x+1)^2 = 4 is 1
    double err[2];
    int n = 500;
    for (int lvl = 0; lvl < 2; ++lvl, n *= 2) {
        const AgeGridPtr g = make_grid(10.0, n);
        const HivParams p = make_params(g, 1.0, 1.0, 1.0, 1.0, 4.0, 1.0);
        const AgeProfile i0 = AgeProfile::indicator(g, 0.0, 1.0);
        const Trajectory traj = hiv_frozen_simulate(i0, 0.3, 1.0, p, 1.0);
        // head-weighted pairing at the exact constant-coefficient rate
        const double w0 = 0.5 * traj.V.front() + traj.mass.front();
        const double w1 = 0.5 * traj.V.back() + traj.mass.back();
        err[lvl] = std::abs(w1 / w0 - std::exp(1.0)) / std::exp(1.0);
    }
    CHECK(err[0] < 0.1);
    CHECK(err[1] < err[0]);
}

TEST_CASE("frozen system basics")
{
    const AgeGridPtr g = make_grid(5.0, 100);

    SUBCASE("zero data stay zero")
    {
        const HivParams p = make_params(g, 1.0, 1.0, 1.0, 1.0, 4.0, 1.0);
        const Trajectory traj = hiv_frozen_simulate(AgeProfile(g, 1), 0.0, 1.0, p, 3.0);
        for (std::size_t k = 0; k < traj.size(); ++k) {
            CHECK(traj.V[k] == 0.0);
            CHECK(traj.mass[k] == 0.0);
        }
    }

    SUBCASE("pure virion decay without production")
    {
        const HivParams p = make_params(g, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0);
        const Trajectory traj = hiv_frozen_simulate(AgeProfile(g, 1), 2.0, 1.0, p, 1.0);
        double expected = 2.0;
        for (std::size_t k = 0; k < traj.size(); ++k) {
            CHECK(traj.V[k] == doctest::Approx(expected).epsilon(1e-14));
            expected /= 1.0 + p.clearance * traj.dt;
        }
    }
}
