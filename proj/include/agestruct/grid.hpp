#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace agestruct {

/// Uniform age mesh on [0, a_max] with composite trapezoid weights.
/// The time step of every solver is locked to the age step, so transport
/// along characteristics is an exact one-cell shift.
struct AgeGrid {
    double a_max = 0.0;
    int n_cells = 0;
    double da = 0.0;
    std::vector<double> nodes;   // a_j = j*da, j = 0..n_cells
    std::vector<double> weights; // da/2 at both ends, da inside

    int n_nodes() const { return n_cells + 1; }
};

using AgeGridPtr = std::shared_ptr<const AgeGrid>;

AgeGridPtr make_grid(double a_max, int n_cells);

/// Doubled mesh with the same a_max. Used by refinement studies.
AgeGridPtr refine_grid(const AgeGrid& g, int factor = 2);

bool same_grid(const AgeGrid& a, const AgeGrid& b);

/// Default tolerance for order comparisons: 1e-9 * (1 + scale).
double order_tol(double scale);

/// Vector-valued function of age sampled on the grid nodes.
/// Values are population densities per unit age; dim components per node,
/// stored node-major.
class AgeProfile {
public:
    AgeProfile() = default;
    AgeProfile(AgeGridPtr grid, int dim = 1);
    AgeProfile(AgeGridPtr grid, std::vector<double> values, int dim = 1);

    /// Sample a scalar function of age at the nodes (dim 1).
    static AgeProfile sample(AgeGridPtr grid, const std::function<double(double)>& f);
    static AgeProfile constant(AgeGridPtr grid, double value, int dim = 1);
    /// 1 on [lo, hi), 0 elsewhere.
    static AgeProfile indicator(AgeGridPtr grid, double lo, double hi);

    int dim() const { return dim_; }
    int n_nodes() const { return grid_ ? grid_->n_nodes() : 0; }
    const AgeGrid& grid() const { return *grid_; }
    const AgeGridPtr& grid_ptr() const { return grid_; }

    double& at(int node, int comp = 0) { return values_[static_cast<size_t>(node) * dim_ + comp]; }
    double at(int node, int comp = 0) const { return values_[static_cast<size_t>(node) * dim_ + comp]; }

    std::span<const double> values() const { return values_; }
    std::vector<double>& raw() { return values_; }
    const std::vector<double>& raw() const { return values_; }

    double max_abs() const;
    bool nonnegative(double tol) const;

private:
    AgeGridPtr grid_;
    int dim_ = 1;
    std::vector<double> values_;
};

/// Trapezoid mass per component: sum_j w_j p_j.
std::vector<double> integrate(const AgeProfile& p);

/// Kernel-weighted trapezoid sum. The kernel shares the grid and has either
/// one component (scalar weight applied to every component of p) or dim^2
/// components per node (row-major matrix applied to the node value).
std::vector<double> integrate(const AgeProfile& p, const AgeProfile& kernel);

double integrate_scalar(const AgeProfile& p);
double integrate_scalar(const AgeProfile& p, const AgeProfile& kernel);

/// Componentwise partial order up to tol: p_j <= q_j + tol at every node.
bool le(const AgeProfile& p, const AgeProfile& q, double tol);
/// Same with the default order tolerance built from the operands' scale.
bool le(const AgeProfile& p, const AgeProfile& q);

/// Worst violation of p <= q (positive value means p exceeds q somewhere).
double le_margin(const AgeProfile& p, const AgeProfile& q, int* node = nullptr, int* comp = nullptr);

/// Piecewise-linear resampling onto another grid with the same a_max.
AgeProfile resample(const AgeProfile& p, const AgeGridPtr& target);

} // namespace agestruct
