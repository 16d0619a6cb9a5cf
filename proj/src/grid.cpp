#include "agestruct/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace agestruct {

AgeGridPtr make_grid(double a_max, int n_cells)
{
    if (!(a_max > 0.0)) {
        throw std::invalid_argument("make_grid: a_max must be positive, got " + std::to_string(a_max));
    }
    if (n_cells < 1) {
        throw std::invalid_argument("make_grid: n_cells must be >= 1, got " + std::to_string(n_cells));
    }
    auto g = std::make_shared<AgeGrid>();
    g->a_max = a_max;
    g->n_cells = n_cells;
    g->da = a_max / n_cells;
    g->nodes.resize(n_cells + 1);
    g->weights.resize(n_cells + 1);
    for (int j = 0; j <= n_cells; ++j) {
        g->nodes[j] = j * g->da;
        g->weights[j] = (j == 0 || j == n_cells) ? 0.5 * g->da : g->da;
    }
    g->nodes.back() = a_max;
    return g;
}

AgeGridPtr refine_grid(const AgeGrid& g, int factor)
{
    return make_grid(g.a_max, g.n_cells * factor);
}

bool same_grid(const AgeGrid& a, const AgeGrid& b)
{
    return a.n_cells == b.n_cells && a.a_max == b.a_max;
}

double order_tol(double scale)
{
    return 1e-9 * (1.0 + std::abs(scale));
}

AgeProfile::AgeProfile(AgeGridPtr grid, int dim)
    : grid_(std::move(grid)), dim_(dim)
{
    if (!grid_) throw std::invalid_argument("AgeProfile: null grid");
    if (dim_ < 1) throw std::invalid_argument("AgeProfile: dim must be >= 1");
    values_.assign(static_cast<size_t>(grid_->n_nodes()) * dim_, 0.0);
}

AgeProfile::AgeProfile(AgeGridPtr grid, std::vector<double> values, int dim)
    : grid_(std::move(grid)), dim_(dim), values_(std::move(values))
{
    if (!grid_) throw std::invalid_argument("AgeProfile: null grid");
    if (dim_ < 1) throw std::invalid_argument("AgeProfile: dim must be >= 1");
    if (values_.size() != static_cast<size_t>(grid_->n_nodes()) * dim_) {
        throw std::invalid_argument("AgeProfile: value count must equal (n_cells+1)*dim");
    }
}

AgeProfile AgeProfile::sample(AgeGridPtr grid, const std::function<double(double)>& f)
{
    AgeProfile p(std::move(grid), 1);
    for (int j = 0; j < p.n_nodes(); ++j) p.at(j) = f(p.grid().nodes[j]);
    return p;
}

AgeProfile AgeProfile::constant(AgeGridPtr grid, double value, int dim)
{
    AgeProfile p(std::move(grid), dim);
    std::fill(p.values_.begin(), p.values_.end(), value);
    return p;
}

AgeProfile AgeProfile::indicator(AgeGridPtr grid, double lo, double hi)
{
    AgeProfile p(std::move(grid), 1);
    for (int j = 0; j < p.n_nodes(); ++j) {
        const double a = p.grid().nodes[j];
        p.at(j) = (a >= lo && a < hi) ? 1.0 : 0.0;
    }
    return p;
}

double AgeProfile::max_abs() const
{
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

bool AgeProfile::nonnegative(double tol) const
{
    return std::all_of(values_.begin(), values_.end(), [tol](double v) { return v >= -tol; });
}

namespace {

void require_same_grid(const AgeProfile& p, const AgeProfile& q, const char* where)
{
    if (!same_grid(p.grid(), q.grid())) {
        throw std::invalid_argument(std::string(where) + ": operands live on different grids");
    }
}

} // namespace

std::vector<double> integrate(const AgeProfile& p)
{
    std::vector<double> out(p.dim(), 0.0);
    const auto& w = p.grid().weights;
    for (int j = 0; j < p.n_nodes(); ++j) {
        for (int c = 0; c < p.dim(); ++c) out[c] += w[j] * p.at(j, c);
    }
    return out;
}

std::vector<double> integrate(const AgeProfile& p, const AgeProfile& kernel)
{
    require_same_grid(p, kernel, "integrate");
    const int n = p.dim();
    std::vector<double> out(n, 0.0);
    const auto& w = p.grid().weights;
    if (kernel.dim() == 1) {
        for (int j = 0; j < p.n_nodes(); ++j) {
            const double k = w[j] * kernel.at(j);
            for (int c = 0; c < n; ++c) out[c] += k * p.at(j, c);
        }
    } else if (kernel.dim() == n * n) {
        for (int j = 0; j < p.n_nodes(); ++j) {
            for (int r = 0; r < n; ++r) {
                double acc = 0.0;
                for (int c = 0; c < n; ++c) acc += kernel.at(j, r * n + c) * p.at(j, c);
                out[r] += w[j] * acc;
            }
        }
    } else {
        throw std::invalid_argument("integrate: kernel dim must be 1 or dim^2");
    }
    return out;
}

double integrate_scalar(const AgeProfile& p)
{
    return integrate(p)[0];
}

double integrate_scalar(const AgeProfile& p, const AgeProfile& kernel)
{
    return integrate(p, kernel)[0];
}

bool le(const AgeProfile& p, const AgeProfile& q, double tol)
{
    return le_margin(p, q) <= tol;
}

bool le(const AgeProfile& p, const AgeProfile& q)
{
    return le(p, q, order_tol(std::max(p.max_abs(), q.max_abs())));
}

double le_margin(const AgeProfile& p, const AgeProfile& q, int* node, int* comp)
{
    require_same_grid(p, q, "le");
    if (p.dim() != q.dim()) throw std::invalid_argument("le: operands have different dim");
    double worst = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < p.n_nodes(); ++j) {
        for (int c = 0; c < p.dim(); ++c) {
            const double gap = p.at(j, c) - q.at(j, c);
            if (gap > worst) {
                worst = gap;
                if (node) *node = j;
                if (comp) *comp = c;
            }
        }
    }
    return worst;
}

AgeProfile resample(const AgeProfile& p, const AgeGridPtr& target)
{
    if (std::abs(p.grid().a_max - target->a_max) > 1e-12 * (1.0 + target->a_max)) {
        throw std::invalid_argument("resample: target grid must span the same age interval");
    }
    AgeProfile out(target, p.dim());
    const double da = p.grid().da;
    const int last = p.grid().n_cells;
    for (int j = 0; j < out.n_nodes(); ++j) {
        const double a = target->nodes[j];
        int cell = static_cast<int>(std::floor(a / da));
        cell = std::clamp(cell, 0, last - 1);
        const double s = (a - p.grid().nodes[cell]) / da;
        for (int c = 0; c < p.dim(); ++c) {
            out.at(j, c) = (1.0 - s) * p.at(cell, c) + s * p.at(cell + 1, c);
        }
    }
    return out;
}

} // namespace agestruct
