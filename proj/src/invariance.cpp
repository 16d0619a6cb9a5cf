#include "agestruct/invariance.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace agestruct {

double kernel_support_end(const AgeProfile& kernel)
{
    if (kernel.dim() != 1) throw std::invalid_argument("kernel_support_end: kernel must have dim 1");
    if (!kernel.nonnegative(0.0)) throw std::invalid_argument("kernel_support_end: kernel must be nonnegative");
    const int last = kernel.n_nodes() - 1;
    if (kernel.at(last) > 0.0) return std::numeric_limits<double>::infinity();
    for (int j = last - 1; j >= 0; --j) {
        if (kernel.at(j) > 0.0) return kernel.grid().nodes[j + 1];
    }
    throw std::domain_error("kernel_support_end: kernel is identically zero");
}

RegionVerdict classify_region(const AgeProfile& i, double cutoff, double tol_mass, double head)
{
    if (i.dim() != 1) throw std::invalid_argument("classify_region: profile must have dim 1");
    RegionVerdict v;
    v.head = head;
    const auto& nodes = i.grid().nodes;
    const double da = i.grid().da;
    // trapezoid over the nodes strictly below the cutoff; the cutoff node is
    // excluded so data supported from the cutoff onward has exactly zero mass
    int last_below = -1;
    for (int j = 0; j < i.n_nodes(); ++j) {
        if (nodes[j] < cutoff) last_below = j;
    }
    double mass = 0.0;
    for (int j = 0; j <= last_below; ++j) {
        const double w = (j == 0 || j == last_below) ? 0.5 * da : da;
        mass += w * i.at(j);
    }
    v.mass_below_cutoff = mass;
    v.region = (head + mass <= tol_mass) ? Region::Boundary : Region::Interior;
    return v;
}

AgeProfile explicit_boundary_solution(const AgeProfile& i0, const SurvivalFactors& surv, double t)
{
    if (!same_grid(i0.grid(), *surv.grid)) {
        throw std::invalid_argument("explicit_boundary_solution: grids do not match");
    }
    const double dt = i0.grid().da;
    const double steps_exact = t / dt;
    const long k = std::lround(steps_exact);
    if (k < 0 || std::abs(steps_exact - static_cast<double>(k)) > 1e-9 * (1.0 + steps_exact)) {
        throw std::invalid_argument("explicit_boundary_solution: t must be a multiple of the age step");
    }
    AgeProfile out = i0;
    for (long s = 0; s < k; ++s) out = transport_step(out, surv, {});
    return out;
}

double default_tol_mass(const AgeProfile& i0, double head)
{
    double total = head;
    for (double m : integrate(i0)) total += m;
    return 1e-12 * total;
}

InvarianceReport invariance_check(const Trajectory& traj, double cutoff, double tol_mass)
{
    if (traj.size() == 0) throw std::invalid_argument("invariance_check: empty trajectory");
    const bool with_head = traj.kind == ModelKind::Hiv || traj.kind == ModelKind::HivFrozen;

    InvarianceReport rep;
    rep.min_mass_below = std::numeric_limits<double>::infinity();
    rep.region_constant = true;

    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double head = with_head ? traj.V[k] : 0.0;
        const RegionVerdict v = classify_region(traj.profiles[k], cutoff, tol_mass, head);
        if (k == 0) rep.initial_region = v.region;
        if (v.region != rep.initial_region && rep.region_constant) {
            rep.region_constant = false;
            rep.first_flip_step = k;
        }
        rep.min_mass_below = std::min(rep.min_mass_below, v.head + v.mass_below_cutoff);
    }

    if (rep.initial_region == Region::Boundary) {
        const double mass0 = traj.mass.empty() ? 0.0 : traj.mass[0];
        const double flux_tol = tol_mass + order_tol(mass0);
        for (std::size_t k = 0; k < traj.size(); ++k) {
            rep.worst_flux = std::max(rep.worst_flux, std::abs(traj.flux[k]));
            const double cap = std::exp(-traj.decay_floor * traj.times[k]) * mass0 * (1.0 + 1e-9);
            if (traj.mass[k] > cap + tol_mass) rep.decay_ok = false;
        }
        rep.flux_zero = rep.worst_flux <= flux_tol;
        rep.ok = rep.region_constant && rep.flux_zero && rep.decay_ok;
    } else {
        rep.ok = rep.region_constant;
    }
    return rep;
}

} // namespace agestruct
