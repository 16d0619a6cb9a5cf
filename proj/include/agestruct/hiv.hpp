#pragma once

#include "agestruct/grid.hpp"
#include "agestruct/trajectory.hpp"
#include "agestruct/transport.hpp"

namespace agestruct {

/// Parameters of the target-cell / infected-by-infection-age / virion model.
struct HivParams {
    double supply = 0.0;          // target cell production per unit time
    double cell_death = 0.0;      // per-capita target cell death rate
    double infection_rate = 0.0;  // mass-action infection coefficient
    double clearance = 0.0;       // virion clearance rate
    AgeProfile production;        // virion production by infection age (dim 1, >= 0, not identically 0)
    AgeProfile infected_death;    // infected cell death rate by infection age (dim 1)
    double infected_death_floor = 0.0;

    const AgeGridPtr& grid() const { return production.grid_ptr(); }
    void validate() const;
};

struct HivState {
    double T = 0.0;
    double V = 0.0;
    AgeProfile i;
};

/// A priori target-cell bounds plus the virion cap and effective death rate
/// used to derive them.
struct HivBounds {
    double T_minus = 0.0;
    double T_plus = 0.0;
    double V_cap = 0.0;
    double d1 = 0.0;
};

HivState hiv_step(const HivState& st, const HivParams& p);
HivState hiv_step(const HivState& st, const HivParams& p, const SurvivalFactors& surv,
                  double* dropped = nullptr);

Trajectory hiv_simulate(const HivState& st0, const HivParams& p, double horizon);

HivBounds hiv_bounds(const HivState& st0, const HivParams& p);

/// Coupled linear (V, i) system with the target cell count frozen.
Trajectory hiv_frozen_simulate(const AgeProfile& i0, double V0, double T_frozen,
                               const HivParams& p, double horizon);

} // namespace agestruct
