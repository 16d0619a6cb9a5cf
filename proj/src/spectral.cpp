#include "agestruct/spectral.hpp"

#include "agestruct/errors.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace agestruct {

namespace {

constexpr double kRootTol = 1e-12;
constexpr double kBoundaryOffset = 1e-6;

// Backward recurrence for the adjoint weight at a fixed root candidate:
//   w(a) = coef * int_a^inf exp(-int_a^theta (decay + lambda)) kernel(theta) dtheta,
// with kernel and decay held at their last samples beyond a_max. The value
// at age 0 is exactly the trapezoid characteristic function, so root finding
// and eigenprofile construction share one code path.
AgeProfile adjoint_weight(double lambda, double coef, const AgeProfile& kernel,
                          const AgeProfile& decay)
{
    const double da = kernel.grid().da;
    const int last = kernel.n_nodes() - 1;
    AgeProfile w(kernel.grid_ptr(), 1);
    const double tail_rate = decay.at(last) + lambda;
    if (tail_rate <= 0.0) {
        // the constant-tail closure diverges; report an unbounded value so
        // bracket expansion keeps moving right
        w.at(last) = std::numeric_limits<double>::infinity();
    } else {
        w.at(last) = coef * kernel.at(last) / tail_rate;
    }
    for (int j = last - 1; j >= 0; --j) {
        const double step = std::exp(-(0.5 * da * (decay.at(j) + decay.at(j + 1)) + lambda * da));
        w.at(j) = step * w.at(j + 1) + coef * 0.5 * da * (kernel.at(j) + step * kernel.at(j + 1));
    }
    return w;
}

double bisect_root(const std::function<double(double)>& g, double lower_bound, const char* what)
{
    double lo = lower_bound + kBoundaryOffset;
    double g_lo = g(lo);
    if (!(g_lo > 1.0)) {
        throw NoRootError(std::string(what) +
                              ": characteristic function is already <= 1 at the lower "
                              "boundary (value " + std::to_string(g_lo) +
                              "); the kernel may vanish on the mesh",
                          g_lo);
    }
    double step = 1.0;
    double hi = lo + step;
    int expansions = 0;
    while (g(hi) >= 1.0) {
        lo = hi;
        step *= 2.0;
        hi = lo + step;
        if (++expansions > 200) {
            throw NoRootError(std::string(what) + ": bracket expansion failed; g(" +
                                  std::to_string(hi) + ") = " + std::to_string(g(hi)),
                              g_lo);
        }
    }
    while (hi - lo > kRootTol) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) >= 1.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

void require_active_kernel(const AgeProfile& kernel, const char* what)
{
    if (kernel.max_abs() == 0.0) {
        throw NoRootError(std::string(what) + ": kernel is identically zero on the mesh", 0.0);
    }
}

} // namespace

double growth_rate_sir(double S_frozen, const SirParams& p)
{
    p.validate();
    if (!(S_frozen > 0.0)) throw std::invalid_argument("growth_rate_sir: S_frozen must be positive");
    require_active_kernel(p.infectivity, "growth_rate_sir");
    const double coef = p.transmission * S_frozen;
    auto g = [&](double lambda) {
        return adjoint_weight(lambda, coef, p.infectivity, p.removal).at(0);
    };
    return bisect_root(g, -p.removal_floor, "growth_rate_sir");
}

double growth_rate_hiv(double T_frozen, const HivParams& p)
{
    p.validate();
    if (!(T_frozen > 0.0)) throw std::invalid_argument("growth_rate_hiv: T_frozen must be positive");
    require_active_kernel(p.production, "growth_rate_hiv");
    auto g = [&](double lambda) {
        const double coef = p.infection_rate * T_frozen / (lambda + p.clearance);
        return adjoint_weight(lambda, coef, p.production, p.infected_death).at(0);
    };
    return bisect_root(g, std::max(-p.clearance, -p.infected_death_floor), "growth_rate_hiv");
}

AgeProfile eigenprofile_sir(double lambda, double S_frozen, const SirParams& p)
{
    return adjoint_weight(lambda, p.transmission * S_frozen, p.infectivity, p.removal);
}

AgeProfile eigenprofile_hiv(double lambda, double T_frozen, const HivParams& p)
{
    const double coef = p.infection_rate * T_frozen / (lambda + p.clearance);
    return adjoint_weight(lambda, coef, p.production, p.infected_death);
}

SpectralData spectral_sir(double S_frozen, const SirParams& p)
{
    SpectralData sd;
    sd.growth_rate = growth_rate_sir(S_frozen, p);
    sd.eigenprofile = eigenprofile_sir(sd.growth_rate, S_frozen, p);
    sd.head_coeff = 0.0;
    return sd;
}

SpectralData spectral_hiv(double T_frozen, const HivParams& p)
{
    SpectralData sd;
    sd.growth_rate = growth_rate_hiv(T_frozen, p);
    sd.eigenprofile = eigenprofile_hiv(sd.growth_rate, T_frozen, p);
    sd.head_coeff = p.infection_rate * T_frozen / (sd.growth_rate + p.clearance);
    return sd;
}

namespace {

// second-order extrapolation from roots on the base and doubled meshes
double richardson(double coarse, double fine)
{
    return (4.0 * fine - coarse) / 3.0;
}

} // namespace

double growth_rate_sir_refined(double S_frozen, const SirParams& p)
{
    const double coarse = growth_rate_sir(S_frozen, p);
    SirParams fine = p;
    const AgeGridPtr g2 = refine_grid(*p.grid());
    fine.infectivity = resample(p.infectivity, g2);
    fine.removal = resample(p.removal, g2);
    return richardson(coarse, growth_rate_sir(S_frozen, fine));
}

double growth_rate_hiv_refined(double T_frozen, const HivParams& p)
{
    const double coarse = growth_rate_hiv(T_frozen, p);
    HivParams fine = p;
    const AgeGridPtr g2 = refine_grid(*p.grid());
    fine.production = resample(p.production, g2);
    fine.infected_death = resample(p.infected_death, g2);
    return richardson(coarse, growth_rate_hiv(T_frozen, fine));
}

double invariant_functional(const SpectralData& sd, double V, const AgeProfile& i)
{
    return sd.head_coeff * V + integrate_scalar(i, sd.eigenprofile);
}

double invariant_functional(const SpectralData& sd, const AgeProfile& i)
{
    return invariant_functional(sd, 0.0, i);
}

double conservation_residual(const Trajectory& traj, const SpectralData& sd)
{
    if (traj.kind != ModelKind::SirFrozen && traj.kind != ModelKind::HivFrozen) {
        throw std::invalid_argument(
            "conservation_residual: trajectory must come from a frozen-coefficient run");
    }
    if (traj.size() == 0) return 0.0;
    const bool with_head = traj.kind == ModelKind::HivFrozen;
    const double f0 = invariant_functional(sd, with_head ? traj.V[0] : 0.0, traj.profiles[0]);
    const double floor = 1e-300;
    const double denom = std::max(std::abs(f0), floor);
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double fk = invariant_functional(sd, with_head ? traj.V[k] : 0.0, traj.profiles[k]);
        const double expected = std::exp(sd.growth_rate * traj.times[k]) * f0;
        worst = std::max(worst, std::abs(fk - expected) / denom);
    }
    return worst;
}

} // namespace agestruct
