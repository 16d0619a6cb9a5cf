#include "agestruct/sir.hpp"

#include "agestruct/errors.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace agestruct {

void SirParams::validate() const
{
    if (!(recruitment > 0.0)) throw std::invalid_argument("recruitment must be positive");
    if (!(susceptible_death > 0.0)) throw std::invalid_argument("susceptible_death must be positive");
    if (!(transmission > 0.0)) throw std::invalid_argument("transmission must be positive");
    if (!(removal_floor > 0.0)) throw std::invalid_argument("removal_floor must be positive");
    if (infectivity.dim() != 1 || removal.dim() != 1) {
        throw std::invalid_argument("infectivity and removal must be scalar age profiles");
    }
    if (!same_grid(infectivity.grid(), removal.grid())) {
        throw std::invalid_argument("infectivity and removal must share one grid");
    }
    if (!infectivity.nonnegative(0.0)) throw std::invalid_argument("infectivity must be nonnegative");
    for (int j = 0; j < removal.n_nodes(); ++j) {
        if (removal.at(j) < removal_floor) {
            throw std::invalid_argument("removal must stay above removal_floor at every node");
        }
    }
}

namespace {

void check_state(const SirState& st, const SirParams& p)
{
    if (!same_grid(st.i.grid(), *p.grid())) {
        throw std::invalid_argument("sir: state and parameters live on different grids");
    }
    if (st.i.dim() != 1) throw std::invalid_argument("sir: infected profile must have dim 1");
}

// Semi-implicit boundary solve: B = eta*S*(w0*beta0*B + tail) with tail the
// quadrature over the already-transported nodes. Keeps the renewal identity
// at the new time level.
double solve_boundary(double eta_s, const AgeProfile& transported, const SirParams& p)
{
    const auto& w = transported.grid().weights;
    double tail = 0.0;
    for (int j = 1; j < transported.n_nodes(); ++j) {
        tail += w[j] * p.infectivity.at(j) * transported.at(j);
    }
    const double self = eta_s * w[0] * p.infectivity.at(0);
    if (self >= 1.0) {
        const double suggested = 1.0 / (eta_s * p.infectivity.at(0));
        throw StepSizeError(
            "sir_step: boundary solvability needs transmission*S*w0*infectivity(0) < 1; "
            "reduce the age step to below " + std::to_string(suggested),
            suggested);
    }
    return eta_s * tail / (1.0 - self);
}

} // namespace

SirState sir_step(const SirState& st, const SirParams& p)
{
    const SurvivalFactors surv = survival_from_rate(p.removal);
    return sir_step(st, p, surv, nullptr);
}

SirState sir_step(const SirState& st, const SirParams& p, const SurvivalFactors& surv,
                  double* dropped)
{
    check_state(st, p);
    const double dt = st.i.grid().da;
    const double lambda_flux = integrate_scalar(st.i, p.infectivity);
    // implicit in the linear-in-S terms, so S stays positive for any step
    const double S_new = (st.S + dt * p.recruitment) /
                         (1.0 + dt * (p.susceptible_death + p.transmission * lambda_flux));
    AgeProfile moved = transport_step(st.i, surv, {}, dropped);
    const double B = solve_boundary(p.transmission * S_new, moved, p);
    moved.at(0) = B;
    return SirState{S_new, std::move(moved)};
}

Trajectory sir_simulate(const SirState& st0, const SirParams& p, double horizon)
{
    p.validate();
    check_state(st0, p);
    const double dt = st0.i.grid().da;
    const double steps_exact = horizon / dt;
    const long n_steps = std::lround(steps_exact);
    if (n_steps < 0 || std::abs(steps_exact - static_cast<double>(n_steps)) > 1e-9 * (1.0 + steps_exact)) {
        throw std::invalid_argument("sir_simulate: horizon must be a multiple of the age step");
    }
    const SurvivalFactors surv = survival_from_rate(p.removal);

    Trajectory traj;
    traj.kind = ModelKind::Sir;
    traj.grid = st0.i.grid_ptr();
    traj.dt = dt;
    traj.decay_floor = p.removal_floor;
    traj.times.reserve(n_steps + 1);
    traj.profiles.reserve(n_steps + 1);

    SirState st = st0;
    const double initial_mass = integrate_scalar(st0.i);
    for (long k = 0; k <= n_steps; ++k) {
        traj.times.push_back(k * dt);
        traj.S.push_back(st.S);
        traj.mass.push_back(integrate_scalar(st.i));
        traj.flux.push_back(integrate_scalar(st.i, p.infectivity));
        traj.profiles.push_back(st.i);
        if (k < n_steps) st = sir_step(st, p, surv, &traj.dropped_mass);
    }
    traj.dropped_mass_warning = traj.dropped_mass > 1e-8 * initial_mass;
    return traj;
}

SirBounds sir_bounds(const SirState& st0, const SirParams& p)
{
    p.validate();
    if (!(st0.S > 0.0)) {
        throw std::invalid_argument(
            "sir_bounds: requires S(0) > 0 (restart the run from a small positive time)");
    }
    const double I0 = integrate_scalar(st0.i);
    const double beta_sup = p.infectivity.max_abs();
    SirBounds b;
    b.S_plus = st0.S + p.recruitment / p.susceptible_death;
    // cap on S+I from (S+I)' <= recruitment - min(death rates) (S+I)
    b.M = std::max(st0.S + I0, p.recruitment / std::min(p.susceptible_death, p.removal_floor));
    b.S_minus = std::min(st0.S, p.recruitment / (p.susceptible_death + p.transmission * beta_sup * b.M));
    return b;
}

Trajectory sir_frozen_simulate(const AgeProfile& i0, double S_frozen, const SirParams& p,
                               double horizon)
{
    p.validate();
    if (!(S_frozen > 0.0)) throw std::invalid_argument("sir_frozen_simulate: S_frozen must be positive");
    if (!same_grid(i0.grid(), *p.grid())) {
        throw std::invalid_argument("sir_frozen_simulate: profile and parameters on different grids");
    }
    const double dt = i0.grid().da;
    const double steps_exact = horizon / dt;
    const long n_steps = std::lround(steps_exact);
    if (n_steps < 0 || std::abs(steps_exact - static_cast<double>(n_steps)) > 1e-9 * (1.0 + steps_exact)) {
        throw std::invalid_argument("sir_frozen_simulate: horizon must be a multiple of the age step");
    }
    const SurvivalFactors surv = survival_from_rate(p.removal);

    Trajectory traj;
    traj.kind = ModelKind::SirFrozen;
    traj.grid = i0.grid_ptr();
    traj.dt = dt;
    traj.decay_floor = p.removal_floor;

    AgeProfile i = i0;
    const double initial_mass = integrate_scalar(i0);
    for (long k = 0; k <= n_steps; ++k) {
        traj.times.push_back(k * dt);
        traj.S.push_back(S_frozen);
        traj.mass.push_back(integrate_scalar(i));
        traj.flux.push_back(integrate_scalar(i, p.infectivity));
        traj.profiles.push_back(i);
        if (k < n_steps) {
            AgeProfile moved = transport_step(i, surv, {}, &traj.dropped_mass);
            moved.at(0) = solve_boundary(p.transmission * S_frozen, moved, p);
            i = std::move(moved);
        }
    }
    traj.dropped_mass_warning = traj.dropped_mass > 1e-8 * initial_mass;
    return traj;
}

} // namespace agestruct
