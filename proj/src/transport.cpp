#include "agestruct/transport.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace agestruct {

SurvivalFactors survival_from_rate(const AgeProfile& rate)
{
    if (rate.dim() != 1) throw std::invalid_argument("survival_from_rate: rate must have dim 1");
    SurvivalFactors s;
    s.grid = rate.grid_ptr();
    const double da = rate.grid().da;
    s.factors.resize(rate.grid().n_cells);
    for (int c = 0; c < rate.grid().n_cells; ++c) {
        s.factors[c] = std::exp(-0.5 * da * (rate.at(c) + rate.at(c + 1)));
    }
    return s;
}

std::vector<double> cumulative_decay(const AgeProfile& rate)
{
    if (rate.dim() != 1) throw std::invalid_argument("cumulative_decay: rate must have dim 1");
    const double da = rate.grid().da;
    std::vector<double> cum(rate.n_nodes(), 0.0);
    for (int j = 1; j < rate.n_nodes(); ++j) {
        cum[j] = cum[j - 1] + 0.5 * da * (rate.at(j - 1) + rate.at(j));
    }
    return cum;
}

AgeProfile transport_step(const AgeProfile& p, const SurvivalFactors& surv,
                          std::span<const double> inflow, double* dropped)
{
    if (!same_grid(p.grid(), *surv.grid)) {
        throw std::invalid_argument("transport_step: profile and survival factors on different grids");
    }
    if (!inflow.empty() && inflow.size() != static_cast<size_t>(p.dim())) {
        throw std::invalid_argument("transport_step: inflow size must equal profile dim");
    }
    const int n = p.grid().n_cells;
    AgeProfile out(p.grid_ptr(), p.dim());
    for (int j = n; j >= 1; --j) {
        const double s = surv.cell(j - 1);
        for (int c = 0; c < p.dim(); ++c) out.at(j, c) = s * p.at(j - 1, c);
    }
    for (int c = 0; c < p.dim(); ++c) out.at(0, c) = inflow.empty() ? 0.0 : inflow[c];
    if (dropped) {
        // the content of the last node leaves the truncated domain
        double lost = 0.0;
        for (int c = 0; c < p.dim(); ++c) lost += std::abs(p.at(n, c));
        *dropped += p.grid().da * lost;
    }
    return out;
}

AgeProfile resolvent_apply(double lambda, double gamma, std::span<const double> head,
                           const AgeProfile& tail)
{
    if (gamma < 0.0) throw std::invalid_argument("resolvent_apply: gamma must be >= 0");
    if (!(lambda > -gamma)) {
        throw std::domain_error("resolvent_apply: lambda = " + std::to_string(lambda) +
                                " is outside the resolvent half line (must exceed " +
                                std::to_string(-gamma) + ")");
    }
    if (head.size() != static_cast<size_t>(tail.dim())) {
        throw std::invalid_argument("resolvent_apply: head size must equal tail dim");
    }
    const double da = tail.grid().da;
    const double decay = std::exp(-(lambda + gamma) * da);
    AgeProfile out(tail.grid_ptr(), tail.dim());
    for (int c = 0; c < tail.dim(); ++c) out.at(0, c) = head[c];
    for (int j = 1; j < tail.n_nodes(); ++j) {
        for (int c = 0; c < tail.dim(); ++c) {
            // trapezoid of exp(-(lambda+gamma)(a_j - l)) tail(l) over the new cell,
            // chained onto the decayed running convolution
            out.at(j, c) = decay * out.at(j - 1, c) +
                           0.5 * da * (tail.at(j, c) + decay * tail.at(j - 1, c));
        }
    }
    return out;
}

} // namespace agestruct
