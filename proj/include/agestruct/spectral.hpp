#pragma once

#include "agestruct/grid.hpp"
#include "agestruct/hiv.hpp"
#include "agestruct/sir.hpp"
#include "agestruct/trajectory.hpp"

namespace agestruct {

/// Characteristic root and adjoint eigenprofile of a frozen-coefficient
/// renewal system. The eigenprofile is normalized to 1 at age 0, and its
/// pairing with the frozen solution grows exactly like exp(growth_rate * t).
struct SpectralData {
    double growth_rate = 0.0;  // characteristic root
    AgeProfile eigenprofile;   // age weight, value 1 at age 0
    double head_coeff = 0.0;   // virion weight of the paired functional (0 for SIR)
};

/// Root of the frozen-SIR characteristic equation, found by bisection to
/// absolute tolerance 1e-12 after bracket expansion from just above the
/// integrability boundary.
double growth_rate_sir(double S_frozen, const SirParams& p);
double growth_rate_hiv(double T_frozen, const HivParams& p);

/// Adjoint eigenprofile at a given root, by backward integration from a_max
/// with a constant-tail closure beyond the mesh.
AgeProfile eigenprofile_sir(double lambda, double S_frozen, const SirParams& p);
AgeProfile eigenprofile_hiv(double lambda, double T_frozen, const HivParams& p);

/// Root plus eigenprofile bundled.
SpectralData spectral_sir(double S_frozen, const SirParams& p);
SpectralData spectral_hiv(double T_frozen, const HivParams& p);

/// Root with one Richardson refinement: solve on the params' grid and on a
/// doubled grid, extrapolate at second order.
double growth_rate_sir_refined(double S_frozen, const SirParams& p);
double growth_rate_hiv_refined(double T_frozen, const HivParams& p);

/// The conserved pairing: head_coeff * V + integral of eigenprofile * i.
double invariant_functional(const SpectralData& sd, double V, const AgeProfile& i);
double invariant_functional(const SpectralData& sd, const AgeProfile& i);

/// Largest relative deviation of the pairing from exact exponential growth
/// along a frozen-coefficient trajectory.
double conservation_residual(const Trajectory& traj, const SpectralData& sd);

} // namespace agestruct
