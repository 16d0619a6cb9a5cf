#pragma once

#include "agestruct/grid.hpp"
#include "agestruct/smallmat.hpp"
#include "agestruct/trajectory.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>

namespace agestruct {

/// Matrix-valued coefficient of the vector age model, evaluated at a coupling
/// vector (the kernel-weighted population total) and an age.
using CoefficientFn = std::function<SmallMat(std::span<const double> coupling, double age)>;

/// The n-component age model: transport with state-dependent mortality
/// matrix and a nonlocal birth boundary. Coupling totals feed the mortality
/// and birth coefficients through the alpha / sigma kernels.
struct GeneralParams {
    int dim = 1;
    AgeProfile mortality_coupling; // alpha kernel (dim^2 components per node, entrywise >= 0)
    AgeProfile birth_coupling;     // sigma kernel (dim^2 components per node, entrywise >= 0)
    CoefficientFn mortality;       // mu(G, a)
    CoefficientFn birth;           // beta(Sigma, a)
    int p_exponent = 1;            // carried as metadata; discrete norms are L1

    const AgeGridPtr& grid() const { return mortality_coupling.grid_ptr(); }
    void validate() const;
};

struct GeneralState {
    AgeProfile u;
};

/// Birth functional: integral of birth(Sigma(phi), a) phi(a) da.
std::vector<double> apply_birth(const AgeProfile& phi, const GeneralParams& p);

/// Mortality image: mortality(G(phi), a) phi(a) per node.
AgeProfile apply_mortality(const AgeProfile& phi, const GeneralParams& p);

Trajectory general_simulate(const GeneralState& u0, const GeneralParams& p, double horizon);

/// Verdict of the sampled positivity / monotonicity probe.
struct ProbeResult {
    bool certified = false;
    double gamma = 0.0;         // certified shift when certified
    bool gamma_exhausted = false; // shift search hit its cap without certifying
    std::string violated;       // violated condition, empty when certified
    std::optional<std::pair<AgeProfile, AgeProfile>> counterexample;
};

/// Draw seeded ordered nonnegative pairs phi <= psi with L1 norm below
/// norm_bound and test: birth nonnegative and monotone, and existence of a
/// shift gamma making gamma*phi + mortality(phi) nonnegative and monotone.
/// A counterexample is a normal verdict, not an error.
ProbeResult monotonicity_probe(const GeneralParams& p, double norm_bound, int samples,
                               unsigned long long seed);

enum class MonotoneClass { Increasing, Decreasing, Neither };

struct MonotoneCheckResult {
    MonotoneClass cls = MonotoneClass::Neither;
    bool datum_ok = false;      // the initial datum satisfied the one-sided inequalities
    bool trajectory_ok = false; // the simulated run verified them step over step
    double worst_violation = 0.0;
};

/// Classify the initial datum by the discrete one-sided inequalities
/// (forward age differences against the mortality image, boundary value
/// against the birth functional), then verify time monotonicity along the
/// simulated trajectory. Ties classify as Increasing.
MonotoneCheckResult trajectory_monotone_check(const GeneralState& u0, const GeneralParams& p,
                                              double horizon);

} // namespace agestruct
