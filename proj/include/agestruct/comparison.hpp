#pragma once

#include "agestruct/general.hpp"
#include "agestruct/grid.hpp"
#include "agestruct/hiv.hpp"
#include "agestruct/sir.hpp"
#include "agestruct/trajectory.hpp"

#include <functional>
#include <span>
#include <vector>

namespace agestruct {

/// Discrete building blocks the fixed-point sweep drives. The induced map
/// transports the working trajectory with a uniform exp(-gamma*dt) cell decay
/// and injects the remaining survival as a source read from the previous
/// iterate, so its fixed point reproduces the model's direct stepping exactly.
struct SweepModel {
    int dim = 1;
    int n_heads = 0;
    AgeGridPtr grid;
    ModelKind kind = ModelKind::SirFrozen;

    /// Full per-cell, per-component survival for one step, evaluated on the
    /// previous iterate's old-level profile (state dependent for the vector
    /// model). Layout: cell-major, dim entries per cell.
    std::function<std::vector<double>(const AgeProfile& v_old)> cell_survival;

    /// Head compartments advanced one step; sources read from the previous
    /// iterate (implicit updates matching the direct scheme). Null when the
    /// model has no heads.
    std::function<std::vector<double>(const std::vector<double>& heads_old,
                                      const AgeProfile& v_old)>
        head_step;

    /// Boundary (age 0) value from the new-level heads and the previous
    /// iterate's new-level profile.
    std::function<std::vector<double>(const std::vector<double>& heads_new,
                                      const AgeProfile& v_new)>
        inflow;

    double gamma_suggested = 1.0;
};

SweepModel sweep_sir_frozen(double S_frozen, const SirParams& p);
SweepModel sweep_sir_full(const SirParams& p);   // heads = {S}
SweepModel sweep_hiv_frozen(double T_frozen, const HivParams& p); // heads = {V}
SweepModel sweep_hiv_full(const HivParams& p);   // heads = {T, V}
/// Vector model with componentwise (diagonal) mortality only.
SweepModel sweep_general(const GeneralParams& p);

/// Starting iterate: profile (and optional heads) as functions of time.
struct IterateSeed {
    std::function<AgeProfile(double t)> profile;
    std::function<std::vector<double>(double t)> heads; // optional
};

IterateSeed constant_seed(const AgeProfile& x, std::vector<double> heads = {});

struct IterationReport {
    std::vector<std::vector<double>> iterates; // boundary trace per sweep
    std::vector<bool> monotone_flags;          // consecutive iterates increasing (up to tol_order)
    std::vector<bool> monotone_flags_decreasing; // consecutive iterates decreasing
    bool converged = false;
    double final_gap = 0.0;
    int total_iterations = 0;
    bool gamma_verified = true; // sampled order-preservation check of the shifted source
    Trajectory fixed_point;
};

/// Repeated application of the discrete variation-of-constants map. The
/// horizon splits into windows of length about 1/(2*gamma) chained end to
/// end; each window iterates until the sup gap falls below 1e-10 or max_iter
/// sweeps. Five consecutive growing gaps raise DivergenceError.
IterationReport monotone_iterate(const IterateSeed& v0, const SweepModel& model, double gamma,
                                 double horizon, int max_iter);

struct RenewalReport {
    std::vector<std::vector<double>> iterates; // boundary function per sweep, size n_steps+1
    std::vector<bool> monotone_flags;
    std::vector<double> limit; // last iterate
};

/// Renewal-consistent boundary trace of a run: the age-0 profile values for
/// positive times, and the birth functional of the initial profile at time 0
/// (the datum's own age-0 value need not satisfy the renewal identity).
std::vector<double> boundary_trace(const Trajectory& traj, const SirParams& p);

/// Iteration of the boundary renewal equation with the susceptible count
/// replaced by its upper bound. B0 defaults to zero when empty; passing the
/// nonlinear run's boundary trace starts the increasing sequence the
/// comparison argument uses.
RenewalReport renewal_iterate(const AgeProfile& i0, double S_plus, const SirParams& p,
                              double horizon, int n_iter, std::span<const double> B0 = {});

/// Birth / mortality closures used by the inequality checks.
struct OperatorPair {
    int dim = 1;
    std::function<std::vector<double>(const AgeProfile&)> birth;
    std::function<AgeProfile(const AgeProfile&)> mortality;
};

OperatorPair operators_sir_frozen(double S_frozen, const SirParams& p);
OperatorPair operators_general(const GeneralParams& p);

struct InequalityReport {
    bool ok = false;
    double worst_transport_margin = 0.0; // positive = violation
    std::size_t transport_step = 0;
    int transport_node = 0;
    double worst_boundary_margin = 0.0;
    std::size_t boundary_step = 0;
    int boundary_comp = 0;
};

/// Verify the discrete one-sided system inequalities for a time-indexed
/// profile function: upwind difference along characteristics against the
/// mortality image, and the age-0 value against the birth functional.
InequalityReport check_subsolution(std::span<const AgeProfile> w, const OperatorPair& ops,
                                   double tol);
InequalityReport check_supersolution(std::span<const AgeProfile> w, const OperatorPair& ops,
                                     double tol);

struct SandwichReport {
    bool ok = false;
    double worst_lower_margin = 0.0; // max over nodes/steps of lower - mid
    double worst_upper_margin = 0.0; // max of mid - upper
    std::size_t worst_lower_step = 0;
    double worst_lower_age = 0.0;
    std::size_t worst_upper_step = 0;
    double worst_upper_age = 0.0;
    double worst_head_margin = 0.0; // scalar compartment violations (HIV virions)
};

/// Per-step, per-node order checks lower <= mid <= upper, including the
/// virion compartment for the HIV kinds.
SandwichReport sandwich_verify(const Trajectory& lower, const Trajectory& mid,
                               const Trajectory& upper, double tol);

} // namespace agestruct
