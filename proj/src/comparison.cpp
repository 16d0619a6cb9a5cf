#include "agestruct/comparison.hpp"

#include "agestruct/errors.hpp"
#include "agestruct/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace agestruct {

namespace {

std::vector<double> flat_survival(const SurvivalFactors& s)
{
    return s.factors;
}

long checked_steps(double horizon, double dt, const char* where)
{
    const double steps_exact = horizon / dt;
    const long n = std::lround(steps_exact);
    if (n < 1 || std::abs(steps_exact - static_cast<double>(n)) > 1e-9 * (1.0 + steps_exact)) {
        throw std::invalid_argument(std::string(where) +
                                    ": horizon must be a positive multiple of the age step");
    }
    return n;
}

} // namespace

SweepModel sweep_sir_frozen(double S_frozen, const SirParams& params)
{
    params.validate();
    if (!(S_frozen > 0.0)) throw std::invalid_argument("sweep_sir_frozen: S_frozen must be positive");
    SweepModel m;
    m.dim = 1;
    m.n_heads = 0;
    m.grid = params.grid();
    m.kind = ModelKind::SirFrozen;
    m.gamma_suggested = params.removal.max_abs() + 1.0;
    const std::vector<double> surv = flat_survival(survival_from_rate(params.removal));
    m.cell_survival = [surv](const AgeProfile&) { return surv; };
    const SirParams p = params;
    m.inflow = [p, S_frozen](const std::vector<double>&, const AgeProfile& v_new) {
        return std::vector<double>{p.transmission * S_frozen * integrate_scalar(v_new, p.infectivity)};
    };
    return m;
}

SweepModel sweep_sir_full(const SirParams& params)
{
    params.validate();
    SweepModel m;
    m.dim = 1;
    m.n_heads = 1;
    m.grid = params.grid();
    m.kind = ModelKind::Sir;
    m.gamma_suggested = params.removal.max_abs() + 1.0;
    const std::vector<double> surv = flat_survival(survival_from_rate(params.removal));
    m.cell_survival = [surv](const AgeProfile&) { return surv; };
    const SirParams p = params;
    const double dt = params.grid()->da;
    m.head_step = [p, dt](const std::vector<double>& heads, const AgeProfile& v_old) {
        const double flux = integrate_scalar(v_old, p.infectivity);
        const double S_new = (heads[0] + dt * p.recruitment) /
                             (1.0 + dt * (p.susceptible_death + p.transmission * flux));
        return std::vector<double>{S_new};
    };
    m.inflow = [p](const std::vector<double>& heads, const AgeProfile& v_new) {
        return std::vector<double>{p.transmission * heads[0] * integrate_scalar(v_new, p.infectivity)};
    };
    return m;
}

SweepModel sweep_hiv_frozen(double T_frozen, const HivParams& params)
{
    params.validate();
    if (!(T_frozen > 0.0)) throw std::invalid_argument("sweep_hiv_frozen: T_frozen must be positive");
    SweepModel m;
    m.dim = 1;
    m.n_heads = 1;
    m.grid = params.grid();
    m.kind = ModelKind::HivFrozen;
    m.gamma_suggested = params.infected_death.max_abs() + 1.0;
    const std::vector<double> surv = flat_survival(survival_from_rate(params.infected_death));
    m.cell_survival = [surv](const AgeProfile&) { return surv; };
    const HivParams p = params;
    const double dt = params.grid()->da;
    m.head_step = [p, dt](const std::vector<double>& heads, const AgeProfile& v_old) {
        const double flux = integrate_scalar(v_old, p.production);
        return std::vector<double>{(heads[0] + dt * flux) / (1.0 + dt * p.clearance)};
    };
    m.inflow = [p, T_frozen](const std::vector<double>& heads, const AgeProfile&) {
        return std::vector<double>{p.infection_rate * T_frozen * heads[0]};
    };
    return m;
}

SweepModel sweep_hiv_full(const HivParams& params)
{
    params.validate();
    SweepModel m;
    m.dim = 1;
    m.n_heads = 2;
    m.grid = params.grid();
    m.kind = ModelKind::Hiv;
    m.gamma_suggested = params.infected_death.max_abs() + 1.0;
    const std::vector<double> surv = flat_survival(survival_from_rate(params.infected_death));
    m.cell_survival = [surv](const AgeProfile&) { return surv; };
    const HivParams p = params;
    const double dt = params.grid()->da;
    m.head_step = [p, dt](const std::vector<double>& heads, const AgeProfile& v_old) {
        const double flux = integrate_scalar(v_old, p.production);
        const double T_new = (heads[0] + dt * p.supply) /
                             (1.0 + dt * (p.cell_death + p.infection_rate * heads[1]));
        const double V_new = (heads[1] + dt * flux) / (1.0 + dt * p.clearance);
        return std::vector<double>{T_new, V_new};
    };
    m.inflow = [p](const std::vector<double>& heads, const AgeProfile&) {
        return std::vector<double>{p.infection_rate * heads[0] * heads[1]};
    };
    return m;
}

SweepModel sweep_general(const GeneralParams& params)
{
    params.validate();
    SweepModel m;
    m.dim = params.dim;
    m.n_heads = 0;
    m.grid = params.grid();
    m.kind = ModelKind::General;
    m.gamma_suggested = 1.0; // refined by the sampled check below
    const GeneralParams p = params;
    const double dt = params.grid()->da;
    m.cell_survival = [p, dt](const AgeProfile& v_old) {
        const std::vector<double> g_total = integrate(v_old, p.mortality_coupling);
        const int n = p.dim;
        const auto& nodes = v_old.grid().nodes;
        std::vector<double> out(static_cast<size_t>(v_old.grid().n_cells) * n);
        SmallMat prev = p.mortality(g_total, nodes[0]);
        for (int c = 0; c < v_old.grid().n_cells; ++c) {
            const SmallMat rate = p.mortality(g_total, nodes[c + 1]);
            if (!prev.is_diagonal(0.0) || !rate.is_diagonal(0.0)) {
                throw std::invalid_argument(
                    "sweep_general: the fixed-point sweep supports componentwise mortality only");
            }
            for (int r = 0; r < n; ++r) {
                out[static_cast<size_t>(c) * n + r] = std::exp(0.5 * dt * (prev(r, r) + rate(r, r)));
            }
            prev = rate;
        }
        return out;
    };
    m.inflow = [p](const std::vector<double>&, const AgeProfile& v_new) {
        // same semi-implicit boundary solve as the direct stepping, with the
        // coupling total taken over the transported part of the profile
        AgeProfile body = v_new;
        for (int c = 0; c < p.dim; ++c) body.at(0, c) = 0.0;
        const std::vector<double> sigma_total = integrate(body, p.birth_coupling);
        const auto& w = v_new.grid().weights;
        const auto& nodes = v_new.grid().nodes;
        std::array<double, 3> rhs{};
        std::array<double, 3> xv{};
        std::array<double, 3> yv{};
        for (int j = 1; j < v_new.n_nodes(); ++j) {
            const SmallMat b = p.birth(sigma_total, nodes[j]);
            for (int c = 0; c < p.dim; ++c) xv[c] = v_new.at(j, c);
            matvec(b, std::span<const double>(xv.data(), p.dim), std::span<double>(yv.data(), p.dim));
            for (int c = 0; c < p.dim; ++c) rhs[c] += w[j] * yv[c];
        }
        SmallMat lhs = SmallMat::identity(p.dim) + (-w[0]) * p.birth(sigma_total, 0.0);
        if (!solve_inplace(lhs, std::span<double>(rhs.data(), p.dim))) {
            throw StepSizeError("sweep_general: boundary system is singular; reduce the age step",
                                0.5 * v_new.grid().da);
        }
        return std::vector<double>(rhs.begin(), rhs.begin() + p.dim);
    };
    return m;
}

IterateSeed constant_seed(const AgeProfile& x, std::vector<double> heads)
{
    IterateSeed seed;
    seed.profile = [x](double) { return x; };
    if (!heads.empty()) {
        seed.heads = [heads](double) { return heads; };
    }
    return seed;
}

namespace {

struct WindowState {
    std::vector<AgeProfile> profiles; // levels 0..L
    std::vector<std::vector<double>> heads;
};

double sup_gap(const WindowState& a, const WindowState& b)
{
    double gap = 0.0;
    for (std::size_t m = 0; m < a.profiles.size(); ++m) {
        const auto& pa = a.profiles[m].raw();
        const auto& pb = b.profiles[m].raw();
        for (std::size_t k = 0; k < pa.size(); ++k) gap = std::max(gap, std::abs(pa[k] - pb[k]));
        for (std::size_t h = 0; h < a.heads[m].size(); ++h) {
            gap = std::max(gap, std::abs(a.heads[m][h] - b.heads[m][h]));
        }
    }
    return gap;
}

// v <= w componentwise over the whole window, up to the order tolerance
bool window_le(const WindowState& v, const WindowState& w)
{
    double scale = 0.0;
    for (const auto& prof : v.profiles) scale = std::max(scale, prof.max_abs());
    for (const auto& prof : w.profiles) scale = std::max(scale, prof.max_abs());
    const double tol = order_tol(scale);
    for (std::size_t m = 0; m < v.profiles.size(); ++m) {
        const auto& pv = v.profiles[m].raw();
        const auto& pw = w.profiles[m].raw();
        for (std::size_t k = 0; k < pv.size(); ++k) {
            if (pv[k] > pw[k] + tol) return false;
        }
        for (std::size_t h = 0; h < v.heads[m].size(); ++h) {
            if (v.heads[m][h] > w.heads[m][h] + tol) return false;
        }
    }
    return true;
}

WindowState apply_sweep(const SweepModel& model, double gamma, const AgeProfile& x_profile,
                        const std::vector<double>& x_heads, const WindowState& v)
{
    const double dt = model.grid->da;
    const double decay = std::exp(-gamma * dt);
    const int n_nodes = model.grid->n_nodes();
    const int dim = model.dim;
    const std::size_t L = v.profiles.size() - 1;

    WindowState w;
    w.profiles.reserve(L + 1);
    w.heads.reserve(L + 1);
    w.profiles.push_back(x_profile);
    w.heads.push_back(x_heads);
    for (std::size_t k = 0; k < L; ++k) {
        std::vector<double> heads_new =
            model.head_step ? model.head_step(w.heads[k], v.profiles[k]) : std::vector<double>{};
        const std::vector<double> surv = model.cell_survival(v.profiles[k]);
        AgeProfile next(model.grid, dim);
        for (int j = n_nodes - 1; j >= 1; --j) {
            for (int c = 0; c < dim; ++c) {
                const double s = surv[static_cast<size_t>(j - 1) * dim + c];
                next.at(j, c) = decay * w.profiles[k].at(j - 1, c) +
                                (s - decay) * v.profiles[k].at(j - 1, c);
            }
        }
        const std::vector<double> b = model.inflow(heads_new, v.profiles[k + 1]);
        for (int c = 0; c < dim; ++c) next.at(0, c) = b[c];
        w.profiles.push_back(std::move(next));
        w.heads.push_back(std::move(heads_new));
    }
    return w;
}

double uniform01(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Sampled order-preservation check of the discrete shifted source on ordered
// nonnegative pairs within the run's scale.
bool verify_gamma(const SweepModel& model, double gamma, double scale)
{
    const double dt = model.grid->da;
    const double decay = std::exp(-gamma * dt);
    std::mt19937_64 rng(0x5eedULL);
    const double tol = order_tol(scale);
    for (int trial = 0; trial < 32; ++trial) {
        AgeProfile lo(model.grid, model.dim);
        AgeProfile hi(model.grid, model.dim);
        for (std::size_t k = 0; k < lo.raw().size(); ++k) {
            lo.raw()[k] = scale * uniform01(rng);
            hi.raw()[k] = lo.raw()[k] + scale * uniform01(rng);
        }
        const std::vector<double> s_lo = model.cell_survival(lo);
        const std::vector<double> s_hi = model.cell_survival(hi);
        for (std::size_t c = 0; c < s_lo.size(); ++c) {
            const int cell = static_cast<int>(c) / model.dim;
            const int comp = static_cast<int>(c) % model.dim;
            const double src_lo = (s_lo[c] - decay) * lo.at(cell, comp);
            const double src_hi = (s_hi[c] - decay) * hi.at(cell, comp);
            if (src_lo < -tol || src_lo > src_hi + tol) return false;
        }
    }
    return true;
}

} // namespace

IterationReport monotone_iterate(const IterateSeed& v0, const SweepModel& model, double gamma,
                                 double horizon, int max_iter)
{
    if (!v0.profile) throw std::invalid_argument("monotone_iterate: seed profile function required");
    if (max_iter < 1) throw std::invalid_argument("monotone_iterate: max_iter must be >= 1");
    const double dt = model.grid->da;
    const long n_steps = checked_steps(horizon, dt, "monotone_iterate");

    const AgeProfile x0 = v0.profile(0.0);
    if (!same_grid(x0.grid(), *model.grid) || x0.dim() != model.dim) {
        throw std::invalid_argument("monotone_iterate: seed profile does not match the model grid");
    }
    std::vector<double> x_heads =
        v0.heads ? v0.heads(0.0) : std::vector<double>(model.n_heads, 0.0);

    // short windows keep the sweep a contraction; chain them end to end
    const long window_steps =
        std::clamp(static_cast<long>(std::floor(1.0 / (2.0 * gamma * dt))), 1L, n_steps);

    IterationReport report;
    report.converged = true;
    report.gamma_verified = verify_gamma(model, gamma, x0.max_abs() + 1.0);

    Trajectory& fp = report.fixed_point;
    fp.kind = model.kind;
    fp.grid = model.grid;
    fp.dt = dt;

    AgeProfile x_profile = x0;
    auto push_level = [&](double t, const AgeProfile& prof, const std::vector<double>& heads) {
        fp.times.push_back(t);
        fp.profiles.push_back(prof);
        double total = 0.0;
        for (double v : integrate(prof)) total += v;
        fp.mass.push_back(total);
        fp.flux.push_back(0.0);
        switch (model.kind) {
        case ModelKind::Sir: fp.S.push_back(heads.empty() ? 0.0 : heads[0]); break;
        case ModelKind::HivFrozen: fp.V.push_back(heads.empty() ? 0.0 : heads[0]); break;
        case ModelKind::Hiv:
            fp.T.push_back(heads.size() > 0 ? heads[0] : 0.0);
            fp.V.push_back(heads.size() > 1 ? heads[1] : 0.0);
            break;
        default: break;
        }
    };
    push_level(0.0, x_profile, x_heads);

    long s0 = 0;
    while (s0 < n_steps) {
        const long L = std::min(window_steps, n_steps - s0);
        WindowState v;
        v.profiles.reserve(L + 1);
        v.heads.reserve(L + 1);
        for (long m = 0; m <= L; ++m) {
            const double t = (s0 + m) * dt;
            v.profiles.push_back(v0.profile(t));
            v.heads.push_back(v0.heads ? v0.heads(t) : x_heads);
        }

        double prev_gap = std::numeric_limits<double>::infinity();
        int growing = 0;
        bool window_converged = false;
        WindowState w;
        std::vector<double> gap_history;
        for (int it = 0; it < max_iter; ++it) {
            w = apply_sweep(model, gamma, x_profile, x_heads, v);
            const double gap = sup_gap(v, w);
            gap_history.push_back(gap);
            report.monotone_flags.push_back(window_le(v, w));
            report.monotone_flags_decreasing.push_back(window_le(w, v));
            std::vector<double> trace(w.profiles.size());
            for (std::size_t m = 0; m < w.profiles.size(); ++m) trace[m] = w.profiles[m].at(0, 0);
            report.iterates.push_back(std::move(trace));
            ++report.total_iterations;
            report.final_gap = gap;
            if (gap > prev_gap) {
                if (++growing >= 5) {
                    throw DivergenceError(
                        "monotone_iterate: gap grew for five consecutive sweeps", gap_history);
                }
            } else {
                growing = 0;
            }
            prev_gap = gap;
            v = w;
            double scale = 0.0;
            for (const auto& prof : w.profiles) scale = std::max(scale, prof.max_abs());
            if (gap <= std::max(1e-10, 1e-13 * scale)) {
                window_converged = true;
                break;
            }
        }
        report.converged = report.converged && window_converged;

        for (long m = 1; m <= L; ++m) {
            push_level((s0 + m) * dt, w.profiles[m], w.heads[m]);
        }
        x_profile = w.profiles[L];
        x_heads = w.heads[L];
        s0 += L;
    }
    return report;
}

std::vector<double> boundary_trace(const Trajectory& traj, const SirParams& p)
{
    std::vector<double> trace(traj.size());
    if (traj.size() == 0) return trace;
    trace[0] = p.transmission * traj.S[0] * integrate_scalar(traj.profiles[0], p.infectivity);
    for (std::size_t k = 1; k < traj.size(); ++k) trace[k] = traj.profiles[k].at(0);
    return trace;
}

RenewalReport renewal_iterate(const AgeProfile& i0, double S_plus, const SirParams& p,
                              double horizon, int n_iter, std::span<const double> B0)
{
    p.validate();
    if (!(S_plus > 0.0)) throw std::invalid_argument("renewal_iterate: S_plus must be positive");
    if (!same_grid(i0.grid(), *p.grid())) {
        throw std::invalid_argument("renewal_iterate: profile and parameters on different grids");
    }
    const double dt = i0.grid().da;
    const long n_steps = checked_steps(horizon, dt, "renewal_iterate");
    if (!B0.empty() && B0.size() != static_cast<std::size_t>(n_steps) + 1) {
        throw std::invalid_argument("renewal_iterate: B0 must hold one value per time level");
    }

    const SurvivalFactors surv = survival_from_rate(p.removal);
    const int n_nodes = i0.n_nodes();
    const auto& w = i0.grid().weights;

    // kernel of the discrete renewal convolution: quadrature weight times
    // infectivity times survival from age 0
    std::vector<double> kappa(n_nodes);
    double running = 1.0;
    for (int j = 0; j < n_nodes; ++j) {
        kappa[j] = w[j] * p.infectivity.at(j) * running;
        if (j < n_nodes - 1) running *= surv.cell(j);
    }

    // source from the transported initial data
    std::vector<double> source(n_steps + 1);
    AgeProfile shifted = i0;
    source[0] = integrate_scalar(shifted, p.infectivity);
    for (long k = 1; k <= n_steps; ++k) {
        shifted = transport_step(shifted, surv, {});
        source[k] = integrate_scalar(shifted, p.infectivity);
    }

    const double eta_s = p.transmission * S_plus;
    std::vector<double> prev(B0.begin(), B0.end());
    if (prev.empty()) prev.assign(n_steps + 1, 0.0);

    RenewalReport report;
    for (int m = 0; m < n_iter; ++m) {
        std::vector<double> next(n_steps + 1);
        next[0] = eta_s * source[0];
        for (long k = 1; k <= n_steps; ++k) {
            double conv = kappa[0] * prev[k];
            const long jmax = std::min<long>(k - 1, n_nodes - 1);
            for (long j = 1; j <= jmax; ++j) conv += kappa[j] * prev[k - j];
            next[k] = eta_s * (source[k] + conv);
        }
        double scale = 0.0;
        for (long k = 0; k <= n_steps; ++k) scale = std::max(scale, std::abs(next[k]));
        const double tol = order_tol(scale);
        bool increasing = true;
        for (long k = 0; k <= n_steps; ++k) {
            if (prev[k] > next[k] + tol) {
                increasing = false;
                break;
            }
        }
        report.monotone_flags.push_back(increasing);
        report.iterates.push_back(next);
        prev = std::move(next);
    }
    report.limit = prev;
    return report;
}

OperatorPair operators_sir_frozen(double S_frozen, const SirParams& params)
{
    params.validate();
    OperatorPair ops;
    ops.dim = 1;
    const SirParams p = params;
    ops.birth = [p, S_frozen](const AgeProfile& phi) {
        return std::vector<double>{p.transmission * S_frozen * integrate_scalar(phi, p.infectivity)};
    };
    ops.mortality = [p](const AgeProfile& phi) {
        AgeProfile out(phi.grid_ptr(), 1);
        for (int j = 0; j < phi.n_nodes(); ++j) out.at(j) = -p.removal.at(j) * phi.at(j);
        return out;
    };
    return ops;
}

OperatorPair operators_general(const GeneralParams& params)
{
    params.validate();
    OperatorPair ops;
    ops.dim = params.dim;
    const GeneralParams p = params;
    ops.birth = [p](const AgeProfile& phi) { return apply_birth(phi, p); };
    ops.mortality = [p](const AgeProfile& phi) { return apply_mortality(phi, p); };
    return ops;
}

namespace {

InequalityReport check_one_sided(std::span<const AgeProfile> w, const OperatorPair& ops,
                                 double tol, double sign)
{
    if (w.size() < 2) throw std::invalid_argument("inequality check: need at least two time levels");
    const double dt = w[0].grid().da;
    double scale = 0.0;
    for (const auto& prof : w) scale = std::max(scale, prof.max_abs());
    for (const auto& prof : w) {
        if (!prof.nonnegative(order_tol(scale))) {
            throw std::invalid_argument("inequality check: profiles must be nonnegative at all times");
        }
    }

    InequalityReport rep;
    rep.worst_transport_margin = -std::numeric_limits<double>::infinity();
    rep.worst_boundary_margin = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < w.size(); ++k) {
        const AgeProfile d_new = ops.mortality(w[k + 1]);
        for (int j = 1; j < w[k].n_nodes(); ++j) {
            for (int c = 0; c < ops.dim; ++c) {
                const double upwind = (w[k + 1].at(j, c) - w[k].at(j - 1, c)) / dt;
                const double margin = sign * (upwind - d_new.at(j, c));
                if (margin > rep.worst_transport_margin) {
                    rep.worst_transport_margin = margin;
                    rep.transport_step = k;
                    rep.transport_node = j;
                }
            }
        }
    }
    for (std::size_t k = 0; k < w.size(); ++k) {
        const std::vector<double> births = ops.birth(w[k]);
        for (int c = 0; c < ops.dim; ++c) {
            const double margin = sign * (w[k].at(0, c) - births[c]);
            if (margin > rep.worst_boundary_margin) {
                rep.worst_boundary_margin = margin;
                rep.boundary_step = k;
                rep.boundary_comp = c;
            }
        }
    }
    rep.ok = rep.worst_transport_margin <= tol && rep.worst_boundary_margin <= tol;
    return rep;
}

} // namespace

InequalityReport check_subsolution(std::span<const AgeProfile> w, const OperatorPair& ops,
                                   double tol)
{
    return check_one_sided(w, ops, tol, +1.0);
}

InequalityReport check_supersolution(std::span<const AgeProfile> w, const OperatorPair& ops,
                                     double tol)
{
    return check_one_sided(w, ops, tol, -1.0);
}

SandwichReport sandwich_verify(const Trajectory& lower, const Trajectory& mid,
                               const Trajectory& upper, double tol)
{
    if (lower.size() != mid.size() || mid.size() != upper.size()) {
        throw std::invalid_argument("sandwich_verify: trajectories have different lengths");
    }
    if (!same_grid(*lower.grid, *mid.grid) || !same_grid(*mid.grid, *upper.grid)) {
        throw std::invalid_argument("sandwich_verify: trajectories live on different grids");
    }
    SandwichReport rep;
    rep.worst_lower_margin = -std::numeric_limits<double>::infinity();
    rep.worst_upper_margin = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < mid.size(); ++k) {
        int node = 0;
        int comp = 0;
        const double lo_gap = le_margin(lower.profiles[k], mid.profiles[k], &node, &comp);
        if (lo_gap > rep.worst_lower_margin) {
            rep.worst_lower_margin = lo_gap;
            rep.worst_lower_step = k;
            rep.worst_lower_age = mid.grid->nodes[node];
        }
        const double up_gap = le_margin(mid.profiles[k], upper.profiles[k], &node, &comp);
        if (up_gap > rep.worst_upper_margin) {
            rep.worst_upper_margin = up_gap;
            rep.worst_upper_step = k;
            rep.worst_upper_age = mid.grid->nodes[node];
        }
    }
    const bool with_heads = !mid.V.empty() && !lower.V.empty() && !upper.V.empty();
    if (with_heads) {
        for (std::size_t k = 0; k < mid.size(); ++k) {
            rep.worst_head_margin = std::max(rep.worst_head_margin,
                                             std::max(lower.V[k] - mid.V[k], mid.V[k] - upper.V[k]));
        }
    }
    rep.ok = rep.worst_lower_margin <= tol && rep.worst_upper_margin <= tol &&
             rep.worst_head_margin <= tol;
    return rep;
}

} // namespace agestruct
