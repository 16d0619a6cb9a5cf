#pragma once

#include "agestruct/grid.hpp"
#include "agestruct/trajectory.hpp"
#include "agestruct/transport.hpp"

#include <cstddef>

namespace agestruct {

enum class Region { Interior, Boundary };

struct RegionVerdict {
    Region region = Region::Boundary;
    double mass_below_cutoff = 0.0;
    double head = 0.0; // virion count for the HIV classification, 0 otherwise
};

/// Last age at which the kernel is still active: the first node at or above
/// which every sample is zero, or infinity when the final sample is positive
/// (the truncated mesh cannot see past a_max). Throws std::domain_error for
/// an identically zero kernel.
double kernel_support_end(const AgeProfile& kernel);

/// Split a state by the profile mass strictly below the cutoff age (plus the
/// scalar head for the HIV variant). Support starting exactly at the cutoff
/// node counts as boundary, matching the zero-inflow discrete dynamics.
RegionVerdict classify_region(const AgeProfile& i, double cutoff, double tol_mass,
                              double head = 0.0);

/// Pure shifted-decay solution: the profile transported for time t with
/// survival and zero boundary inflow. Exact on the age-time-aligned mesh.
AgeProfile explicit_boundary_solution(const AgeProfile& i0, const SurvivalFactors& surv, double t);

/// Relative mass threshold: 1e-12 times the initial mass (plus head).
double default_tol_mass(const AgeProfile& i0, double head = 0.0);

struct InvarianceReport {
    bool ok = false;
    Region initial_region = Region::Boundary;
    bool region_constant = false;
    std::size_t first_flip_step = 0; // meaningful only when !region_constant
    double worst_flux = 0.0;         // boundary runs: largest kernel flux seen
    bool flux_zero = true;           // boundary runs: flux stayed below tolerance
    bool decay_ok = true;            // boundary runs: geometric norm decay held
    double min_mass_below = 0.0;     // interior runs: smallest sub-cutoff mass (+head)
};

/// Classify every step of a trajectory, assert the region never flips, and
/// for boundary runs additionally assert vanishing kernel flux and the
/// geometric decay of the total mass.
InvarianceReport invariance_check(const Trajectory& traj, double cutoff, double tol_mass);

} // namespace agestruct
