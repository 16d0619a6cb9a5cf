#pragma once

#include "agestruct/grid.hpp"
#include "agestruct/trajectory.hpp"
#include "agestruct/transport.hpp"

namespace agestruct {

/// Parameters of the susceptible / infected-by-infection-age model.
struct SirParams {
    double recruitment = 0.0;        // inflow of susceptibles per unit time
    double susceptible_death = 0.0;  // per-capita susceptible removal rate
    double transmission = 0.0;       // transmission coefficient
    AgeProfile infectivity;          // infectiousness by infection age (dim 1, >= 0)
    AgeProfile removal;              // infected removal rate by infection age (dim 1)
    double removal_floor = 0.0;      // uniform lower bound of the removal rate

    const AgeGridPtr& grid() const { return infectivity.grid_ptr(); }
    void validate() const; // throws std::invalid_argument naming the field
};

struct SirState {
    double S = 0.0;
    AgeProfile i;
};

/// A priori susceptible bounds and the population cap they derive from.
struct SirBounds {
    double S_minus = 0.0;
    double S_plus = 0.0;
    double M = 0.0;
};

/// One step of length da: transport with survival, semi-implicit boundary
/// solve, positivity-preserving implicit susceptible update.
SirState sir_step(const SirState& st, const SirParams& p);
SirState sir_step(const SirState& st, const SirParams& p, const SurvivalFactors& surv,
                  double* dropped = nullptr);

Trajectory sir_simulate(const SirState& st0, const SirParams& p, double horizon);

/// All-t susceptible bounds from the scalar comparison inequalities.
SirBounds sir_bounds(const SirState& st0, const SirParams& p);

/// Linear renewal system with the susceptible count frozen.
Trajectory sir_frozen_simulate(const AgeProfile& i0, double S_frozen, const SirParams& p,
                               double horizon);

} // namespace agestruct
