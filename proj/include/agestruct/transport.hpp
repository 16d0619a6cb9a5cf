#pragma once

#include "agestruct/grid.hpp"

#include <span>
#include <vector>

namespace agestruct {

/// Per-cell survival fractions s_c = exp(-trapezoid of the decay rate over
/// the cell (a_c, a_{c+1})). Entries lie in (0, 1] for nonnegative rates,
/// and below exp(-floor*da) when the rate is bounded below by floor.
struct SurvivalFactors {
    AgeGridPtr grid;
    std::vector<double> factors; // n_cells entries

    double cell(int c) const { return factors[c]; }
};

/// Build survival factors from a decay-rate profile (dim 1).
SurvivalFactors survival_from_rate(const AgeProfile& rate);

/// Cumulative trapezoid of the rate from 0 to each node (size n_nodes,
/// first entry 0).
std::vector<double> cumulative_decay(const AgeProfile& rate);

/// One characteristics step of length da: out_j = s_j * p_{j-1} for j >= 1,
/// out_0 = inflow componentwise. Mass shifted past a_max is accumulated into
/// *dropped (L1, summed over components) when given.
AgeProfile transport_step(const AgeProfile& p, const SurvivalFactors& surv,
                          std::span<const double> inflow, double* dropped = nullptr);

/// Resolvent of the shifted transport generator applied to (head, tail):
/// phi(a) = exp(-(lambda+gamma) a) head + int_0^a exp(-(lambda+gamma)(a-l)) tail(l) dl,
/// with the inner convolution evaluated by trapezoid on [0, a_j].
/// Requires lambda > -gamma.
AgeProfile resolvent_apply(double lambda, double gamma, std::span<const double> head,
                           const AgeProfile& tail);

} // namespace agestruct
