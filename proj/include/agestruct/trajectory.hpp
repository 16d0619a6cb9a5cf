#pragma once

#include "agestruct/grid.hpp"

#include <vector>

namespace agestruct {

enum class ModelKind { Sir, SirFrozen, Hiv, HivFrozen, General };

/// Time-indexed sequence of states plus per-step diagnostic scalars.
/// Scalar compartment columns are populated according to the model kind
/// (S for the SIR kinds, T and V for the HIV kinds).
struct Trajectory {
    ModelKind kind = ModelKind::General;
    AgeGridPtr grid;
    double dt = 0.0;

    std::vector<double> times;
    std::vector<AgeProfile> profiles;
    std::vector<double> S; // susceptibles; frozen value repeated for frozen runs
    std::vector<double> T; // target cells
    std::vector<double> V; // virions

    std::vector<double> mass; // L1 mass of the profile (summed over components)
    std::vector<double> flux; // kernel-weighted mass: infectivity or production pairing

    double dropped_mass = 0.0;        // cumulative mass advected past a_max
    bool dropped_mass_warning = false; // set when dropped exceeds 1e-8 x initial mass
    double decay_floor = 0.0;          // uniform lower bound of the removal rate

    std::size_t size() const { return times.size(); }
};

} // namespace agestruct
