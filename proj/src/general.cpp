#include "agestruct/general.hpp"

#include "agestruct/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace agestruct {

void GeneralParams::validate() const
{
    if (dim < 1 || dim > 3) throw std::invalid_argument("dim must be in 1..3");
    if (!mortality || !birth) throw std::invalid_argument("mortality and birth coefficients are required");
    if (mortality_coupling.dim() != dim * dim || birth_coupling.dim() != dim * dim) {
        throw std::invalid_argument("coupling kernels must have dim^2 components per node");
    }
    if (!same_grid(mortality_coupling.grid(), birth_coupling.grid())) {
        throw std::invalid_argument("coupling kernels must share one grid");
    }
    if (!mortality_coupling.nonnegative(0.0) || !birth_coupling.nonnegative(0.0)) {
        throw std::invalid_argument("coupling kernels must be entrywise nonnegative");
    }
}

namespace {

void check_profile(const AgeProfile& phi, const GeneralParams& p, const char* where)
{
    if (phi.dim() != p.dim) throw std::invalid_argument(std::string(where) + ": profile dim mismatch");
    if (!same_grid(phi.grid(), *p.grid())) {
        throw std::invalid_argument(std::string(where) + ": profile and parameters on different grids");
    }
}

} // namespace

std::vector<double> apply_birth(const AgeProfile& phi, const GeneralParams& p)
{
    check_profile(phi, p, "apply_birth");
    const std::vector<double> sigma_total = integrate(phi, p.birth_coupling);
    const int n = p.dim;
    std::vector<double> out(n, 0.0);
    std::array<double, 3> bv{};
    const auto& w = phi.grid().weights;
    for (int j = 0; j < phi.n_nodes(); ++j) {
        const SmallMat b = p.birth(sigma_total, phi.grid().nodes[j]);
        std::array<double, 3> xv{};
        for (int c = 0; c < n; ++c) xv[c] = phi.at(j, c);
        matvec(b, std::span<const double>(xv.data(), n), std::span<double>(bv.data(), n));
        for (int c = 0; c < n; ++c) out[c] += w[j] * bv[c];
    }
    return out;
}

AgeProfile apply_mortality(const AgeProfile& phi, const GeneralParams& p)
{
    check_profile(phi, p, "apply_mortality");
    const std::vector<double> g_total = integrate(phi, p.mortality_coupling);
    const int n = p.dim;
    AgeProfile out(phi.grid_ptr(), n);
    std::array<double, 3> xv{};
    std::array<double, 3> yv{};
    for (int j = 0; j < phi.n_nodes(); ++j) {
        const SmallMat m = p.mortality(g_total, phi.grid().nodes[j]);
        for (int c = 0; c < n; ++c) xv[c] = phi.at(j, c);
        matvec(m, std::span<const double>(xv.data(), n), std::span<double>(yv.data(), n));
        for (int c = 0; c < n; ++c) out.at(j, c) = yv[c];
    }
    return out;
}

namespace {

// One characteristics step: per-cell matrix survival from the trapezoid of
// the mortality matrix over the cell (coupling frozen at the old level),
// then a semi-implicit linear solve for the vector boundary value.
AgeProfile general_step(const AgeProfile& u, const GeneralParams& p, double* dropped)
{
    const int n = p.dim;
    const double dt = u.grid().da;
    const int n_nodes = u.n_nodes();
    const std::vector<double> g_total = integrate(u, p.mortality_coupling);

    AgeProfile next(u.grid_ptr(), n);
    double lost = 0.0;
    for (int c = 0; c < n; ++c) lost += std::abs(u.at(n_nodes - 1, c));
    if (dropped) *dropped += dt * lost;

    std::array<double, 3> xv{};
    std::array<double, 3> yv{};
    SmallMat prev_rate = p.mortality(g_total, u.grid().nodes[0]);
    for (int j = 1; j < n_nodes; ++j) {
        const SmallMat rate = p.mortality(g_total, u.grid().nodes[j]);
        const SmallMat surv = expm(0.5 * dt * (prev_rate + rate));
        for (int c = 0; c < n; ++c) xv[c] = u.at(j - 1, c);
        matvec(surv, std::span<const double>(xv.data(), n), std::span<double>(yv.data(), n));
        for (int c = 0; c < n; ++c) next.at(j, c) = yv[c];
        prev_rate = rate;
    }

    // boundary: solve (I - w0 * birth(Sigma, 0)) b = sum_{j>=1} w_j birth(Sigma, a_j) u_j
    const std::vector<double> sigma_total = integrate(next, p.birth_coupling);
    const auto& w = u.grid().weights;
    std::array<double, 3> rhs{};
    for (int j = 1; j < n_nodes; ++j) {
        const SmallMat b = p.birth(sigma_total, u.grid().nodes[j]);
        for (int c = 0; c < n; ++c) xv[c] = next.at(j, c);
        matvec(b, std::span<const double>(xv.data(), n), std::span<double>(yv.data(), n));
        for (int c = 0; c < n; ++c) rhs[c] += w[j] * yv[c];
    }
    SmallMat lhs = SmallMat::identity(n) + (-w[0]) * p.birth(sigma_total, 0.0);
    if (!solve_inplace(lhs, std::span<double>(rhs.data(), n))) {
        throw StepSizeError("general_simulate: boundary system is singular; reduce the age step",
                            0.5 * dt);
    }
    for (int c = 0; c < n; ++c) next.at(0, c) = rhs[c];
    return next;
}

} // namespace

Trajectory general_simulate(const GeneralState& u0, const GeneralParams& p, double horizon)
{
    p.validate();
    check_profile(u0.u, p, "general_simulate");
    const double dt = u0.u.grid().da;
    const double steps_exact = horizon / dt;
    const long n_steps = std::lround(steps_exact);
    if (n_steps < 0 || std::abs(steps_exact - static_cast<double>(n_steps)) > 1e-9 * (1.0 + steps_exact)) {
        throw std::invalid_argument("general_simulate: horizon must be a multiple of the age step");
    }

    Trajectory traj;
    traj.kind = ModelKind::General;
    traj.grid = u0.u.grid_ptr();
    traj.dt = dt;

    AgeProfile u = u0.u;
    double initial_mass = 0.0;
    for (double m : integrate(u0.u)) initial_mass += m;
    for (long k = 0; k <= n_steps; ++k) {
        traj.times.push_back(k * dt);
        double total = 0.0;
        for (double m : integrate(u)) total += m;
        traj.mass.push_back(total);
        traj.flux.push_back(0.0);
        traj.profiles.push_back(u);
        if (k < n_steps) u = general_step(u, p, &traj.dropped_mass);
    }
    traj.dropped_mass_warning = traj.dropped_mass > 1e-8 * initial_mass;
    return traj;
}

namespace {

double uniform01(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// piecewise-linear profile from seeded uniform node values, rescaled to a
// target L1 norm
AgeProfile random_profile(std::mt19937_64& rng, const AgeGridPtr& grid, int dim, double norm_target)
{
    AgeProfile p(grid, dim);
    for (int j = 0; j < p.n_nodes(); ++j)
        for (int c = 0; c < dim; ++c) p.at(j, c) = uniform01(rng);
    double total = 0.0;
    for (double m : integrate(p)) total += m;
    if (total > 0.0) {
        const double s = norm_target / total;
        for (double& v : p.raw()) v *= s;
    }
    return p;
}

double worst_order_violation(const AgeProfile& lo, const AgeProfile& hi)
{
    double worst = 0.0;
    for (size_t k = 0; k < lo.raw().size(); ++k) {
        worst = std::max(worst, lo.raw()[k] - hi.raw()[k]);
    }
    return worst;
}

} // namespace

ProbeResult monotonicity_probe(const GeneralParams& p, double norm_bound, int samples,
                               unsigned long long seed)
{
    p.validate();
    if (samples < 1) throw std::invalid_argument("monotonicity_probe: samples must be >= 1");
    std::mt19937_64 rng(seed);
    const AgeGridPtr grid = p.grid();

    std::vector<std::pair<AgeProfile, AgeProfile>> pairs;
    pairs.reserve(samples);
    for (int s = 0; s < samples; ++s) {
        const double lo_norm = 0.5 * norm_bound * uniform01(rng);
        const double bump_norm = 0.5 * norm_bound * uniform01(rng);
        AgeProfile lo = random_profile(rng, grid, p.dim, lo_norm);
        const AgeProfile bump = random_profile(rng, grid, p.dim, bump_norm);
        AgeProfile hi = lo;
        for (size_t k = 0; k < hi.raw().size(); ++k) hi.raw()[k] += bump.raw()[k];
        pairs.emplace_back(std::move(lo), std::move(hi));
    }

    ProbeResult res;
    const double tol = order_tol(norm_bound);

    // birth positivity and monotonicity are shift independent
    for (const auto& [lo, hi] : pairs) {
        const std::vector<double> c_lo = apply_birth(lo, p);
        const std::vector<double> c_hi = apply_birth(hi, p);
        for (int c = 0; c < p.dim; ++c) {
            if (c_lo[c] < -tol) {
                res.violated = "birth functional is negative on a nonnegative profile";
                res.counterexample = {lo, hi};
                return res;
            }
            if (c_lo[c] > c_hi[c] + tol) {
                res.violated = "birth functional is not monotone on an ordered pair";
                res.counterexample = {lo, hi};
                return res;
            }
        }
    }

    // estimate a starting shift from the mortality scale on the samples
    double rate_scale = 0.0;
    for (const auto& [lo, hi] : pairs) {
        const std::vector<double> g_lo = integrate(lo, p.mortality_coupling);
        const std::vector<double> g_hi = integrate(hi, p.mortality_coupling);
        for (int j = 0; j < lo.n_nodes(); ++j) {
            const double age = grid->nodes[j];
            rate_scale = std::max(rate_scale, p.mortality(g_lo, age).max_abs());
            rate_scale = std::max(rate_scale, p.mortality(g_hi, age).max_abs());
        }
    }

    std::vector<std::pair<AgeProfile, AgeProfile>> images;
    images.reserve(pairs.size());
    for (const auto& [lo, hi] : pairs) {
        images.emplace_back(apply_mortality(lo, p), apply_mortality(hi, p));
    }

    double gamma = rate_scale + 1.0;
    for (int doubling = 0; doubling < 20; ++doubling, gamma *= 2.0) {
        bool ok = true;
        for (size_t s = 0; s < pairs.size(); ++s) {
            const auto& [lo, hi] = pairs[s];
            const auto& [d_lo, d_hi] = images[s];
            for (size_t k = 0; k < lo.raw().size() && ok; ++k) {
                const double shifted_lo = gamma * lo.raw()[k] + d_lo.raw()[k];
                const double shifted_hi = gamma * hi.raw()[k] + d_hi.raw()[k];
                if (shifted_lo < -tol || shifted_lo > shifted_hi + tol) ok = false;
            }
            if (!ok) {
                res.counterexample = {lo, hi};
                break;
            }
        }
        if (ok) {
            res.certified = true;
            res.gamma = gamma;
            res.counterexample.reset();
            return res;
        }
    }
    res.gamma_exhausted = true;
    res.violated = "no shift up to the search cap made the mortality map order preserving";
    return res;
}

MonotoneCheckResult trajectory_monotone_check(const GeneralState& u0, const GeneralParams& p,
                                              double horizon)
{
    p.validate();
    check_profile(u0.u, p, "trajectory_monotone_check");
    const AgeProfile& phi = u0.u;
    const double da = phi.grid().da;
    const int last = phi.n_nodes() - 1;
    const double tol = order_tol(phi.max_abs());

    const AgeProfile d_phi = apply_mortality(phi, p);
    const std::vector<double> c_phi = apply_birth(phi, p);

    auto derivative = [&](int j, int c) {
        if (j < last) return (phi.at(j + 1, c) - phi.at(j, c)) / da;
        return (phi.at(last, c) - phi.at(last - 1, c)) / da;
    };

    bool incr = true;
    bool decr = true;
    for (int j = 0; j <= last; ++j) {
        for (int c = 0; c < p.dim; ++c) {
            const double dv = derivative(j, c);
            if (dv > d_phi.at(j, c) + tol) incr = false;
            if (dv < d_phi.at(j, c) - tol) decr = false;
        }
    }
    for (int c = 0; c < p.dim; ++c) {
        if (phi.at(0, c) > c_phi[c] + tol) incr = false;
        if (phi.at(0, c) < c_phi[c] - tol) decr = false;
    }

    MonotoneCheckResult res;
    if (!incr && !decr) return res;
    res.datum_ok = true;
    const MonotoneClass candidate = incr ? MonotoneClass::Increasing : MonotoneClass::Decreasing;

    const Trajectory traj = general_simulate(u0, p, horizon);
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
        const double gap = candidate == MonotoneClass::Increasing
                               ? worst_order_violation(traj.profiles[k], traj.profiles[k + 1])
                               : worst_order_violation(traj.profiles[k + 1], traj.profiles[k]);
        worst = std::max(worst, gap);
    }
    res.worst_violation = worst;
    res.trajectory_ok = worst <= tol;
    res.cls = res.trajectory_ok ? candidate : MonotoneClass::Neither;
    return res;
}

} // namespace agestruct
