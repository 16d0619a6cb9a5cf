#include "agestruct/hiv.hpp"

#include <cmath>
#include <stdexcept>

namespace agestruct {

void HivParams::validate() const
{
    if (!(supply > 0.0)) throw std::invalid_argument("supply must be positive");
    if (!(cell_death > 0.0)) throw std::invalid_argument("cell_death must be positive");
    if (!(infection_rate > 0.0)) throw std::invalid_argument("infection_rate must be positive");
    if (!(clearance > 0.0)) throw std::invalid_argument("clearance must be positive");
    if (!(infected_death_floor > 0.0)) throw std::invalid_argument("infected_death_floor must be positive");
    if (production.dim() != 1 || infected_death.dim() != 1) {
        throw std::invalid_argument("production and infected_death must be scalar age profiles");
    }
    if (!same_grid(production.grid(), infected_death.grid())) {
        throw std::invalid_argument("production and infected_death must share one grid");
    }
    if (!production.nonnegative(0.0)) throw std::invalid_argument("production must be nonnegative");
    for (int j = 0; j < infected_death.n_nodes(); ++j) {
        if (infected_death.at(j) < infected_death_floor) {
            throw std::invalid_argument("infected_death must stay above infected_death_floor at every node");
        }
    }
}

namespace {

void check_state(const HivState& st, const HivParams& p)
{
    if (!same_grid(st.i.grid(), *p.grid())) {
        throw std::invalid_argument("hiv: state and parameters live on different grids");
    }
    if (st.i.dim() != 1) throw std::invalid_argument("hiv: infected profile must have dim 1");
}

} // namespace

HivState hiv_step(const HivState& st, const HivParams& p)
{
    const SurvivalFactors surv = survival_from_rate(p.infected_death);
    return hiv_step(st, p, surv, nullptr);
}

HivState hiv_step(const HivState& st, const HivParams& p, const SurvivalFactors& surv,
                  double* dropped)
{
    check_state(st, p);
    const double dt = st.i.grid().da;
    const double prod_flux = integrate_scalar(st.i, p.production);
    // Gauss-Seidel ordering T -> V -> boundary; each scalar update implicit
    // in its own linear terms so every compartment stays nonnegative
    const double T_new = (st.T + dt * p.supply) /
                         (1.0 + dt * (p.cell_death + p.infection_rate * st.V));
    const double V_new = (st.V + dt * prod_flux) / (1.0 + dt * p.clearance);
    AgeProfile moved = transport_step(st.i, surv, {}, dropped);
    moved.at(0) = p.infection_rate * T_new * V_new;
    return HivState{T_new, V_new, std::move(moved)};
}

namespace {

long step_count(double horizon, double dt, const char* where)
{
    const double steps_exact = horizon / dt;
    const long n = std::lround(steps_exact);
    if (n < 0 || std::abs(steps_exact - static_cast<double>(n)) > 1e-9 * (1.0 + steps_exact)) {
        throw std::invalid_argument(std::string(where) + ": horizon must be a multiple of the age step");
    }
    return n;
}

} // namespace

Trajectory hiv_simulate(const HivState& st0, const HivParams& p, double horizon)
{
    p.validate();
    check_state(st0, p);
    const double dt = st0.i.grid().da;
    const long n_steps = step_count(horizon, dt, "hiv_simulate");
    const SurvivalFactors surv = survival_from_rate(p.infected_death);

    Trajectory traj;
    traj.kind = ModelKind::Hiv;
    traj.grid = st0.i.grid_ptr();
    traj.dt = dt;
    traj.decay_floor = p.infected_death_floor;

    HivState st = st0;
    const double initial_mass = integrate_scalar(st0.i);
    for (long k = 0; k <= n_steps; ++k) {
        traj.times.push_back(k * dt);
        traj.T.push_back(st.T);
        traj.V.push_back(st.V);
        traj.mass.push_back(integrate_scalar(st.i));
        traj.flux.push_back(integrate_scalar(st.i, p.production));
        traj.profiles.push_back(st.i);
        if (k < n_steps) st = hiv_step(st, p, surv, &traj.dropped_mass);
    }
    traj.dropped_mass_warning = traj.dropped_mass > 1e-8 * initial_mass;
    return traj;
}

HivBounds hiv_bounds(const HivState& st0, const HivParams& p)
{
    p.validate();
    if (!(st0.T > 0.0)) {
        throw std::invalid_argument(
            "hiv_bounds: requires T(0) > 0 (restart the run from a small positive time)");
    }
    const double I0 = integrate_scalar(st0.i);
    const double p_sup = p.production.max_abs();
    const double d0 = std::min(p.cell_death, p.infected_death_floor);
    HivBounds b;
    b.T_plus = std::max(st0.T + I0, p.supply / d0);
    b.V_cap = std::max(st0.V, (p_sup / p.clearance) * b.T_plus);
    b.d1 = p.cell_death + p.infection_rate * (p_sup / p.clearance) * b.T_plus;
    b.T_minus = std::min(st0.T, p.supply / b.d1);
    return b;
}

Trajectory hiv_frozen_simulate(const AgeProfile& i0, double V0, double T_frozen,
                               const HivParams& p, double horizon)
{
    p.validate();
    if (!(T_frozen > 0.0)) throw std::invalid_argument("hiv_frozen_simulate: T_frozen must be positive");
    if (!same_grid(i0.grid(), *p.grid())) {
        throw std::invalid_argument("hiv_frozen_simulate: profile and parameters on different grids");
    }
    const double dt = i0.grid().da;
    const long n_steps = step_count(horizon, dt, "hiv_frozen_simulate");
    const SurvivalFactors surv = survival_from_rate(p.infected_death);

    Trajectory traj;
    traj.kind = ModelKind::HivFrozen;
    traj.grid = i0.grid_ptr();
    traj.dt = dt;
    traj.decay_floor = p.infected_death_floor;

    AgeProfile i = i0;
    double V = V0;
    const double initial_mass = integrate_scalar(i0);
    for (long k = 0; k <= n_steps; ++k) {
        traj.times.push_back(k * dt);
        traj.T.push_back(T_frozen);
        traj.V.push_back(V);
        traj.mass.push_back(integrate_scalar(i));
        traj.flux.push_back(integrate_scalar(i, p.production));
        traj.profiles.push_back(i);
        if (k < n_steps) {
            const double prod_flux = traj.flux.back();
            V = (V + dt * prod_flux) / (1.0 + dt * p.clearance);
            AgeProfile moved = transport_step(i, surv, {}, &traj.dropped_mass);
            moved.at(0) = p.infection_rate * T_frozen * V;
            i = std::move(moved);
        }
    }
    traj.dropped_mass_warning = traj.dropped_mass > 1e-8 * initial_mass;
    return traj;
}

} // namespace agestruct
