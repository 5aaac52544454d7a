#pragma once

#include "cloudmkt/model.hpp"

namespace cloudmkt {

/// Loads this close to 1 are treated as unstable; waiting times blow up as
/// the margin shrinks, and no equilibrium lives in that band.
inline constexpr double kStabilityEpsilon = 1e-9;

/// Expected-sojourn model of the spot market as a function of a job's
/// waiting cost and the per-class participation cutoffs.
///
/// Any implementation must satisfy:
///   - w(c) = 1/mu for c >= max(c1, c2), and w(c) > 1/mu below it;
///   - w nonincreasing in c, nondecreasing in c1 and c2;
///   - w(t; c1, c2) = w(t; c1, c2') for t >= max(c2, c2') when c1 >= both.
class WaitingTimeModel {
public:
    virtual ~WaitingTimeModel() = default;

    /// Expected time in system (queue + service) for a cost-c spot job.
    /// Throws UnstableError when the cutoff load is at or beyond capacity.
    virtual double waiting_time(double cost, const CutoffVector &cutoffs,
                                const MarketParams &params) const = 0;

    /// True when the model can integrate itself in closed form for these
    /// parameters (used as a fast path by the equilibrium solvers and as an
    /// independent cross-check in tests).
    virtual bool has_closed_form_integral(const MarketParams &params) const {
        (void)params;
        return false;
    }

    /// Closed-form value of integral_0^c w(t; cutoffs) dt. Only valid when
    /// has_closed_form_integral(params); the default throws.
    virtual double cumulative_wait_closed(double cost, const CutoffVector &cutoffs,
                                          const MarketParams &params) const;
};

/// The shipped instance: k parallel M/M/1 queues with preemptive-resume
/// priority by waiting cost and uniform random routing,
///   w(c; c1, c2) = 1 / (mu * (1 - residual_load(c))^2).
/// Offers a closed-form integral when both cost distributions are uniform.
class Mm1PriorityWait final : public WaitingTimeModel {
public:
    double waiting_time(double cost, const CutoffVector &cutoffs,
                        const MarketParams &params) const override;
    bool has_closed_form_integral(const MarketParams &params) const override;
    double cumulative_wait_closed(double cost, const CutoffVector &cutoffs,
                                  const MarketParams &params) const override;
};

/// Shared immutable default instance.
const WaitingTimeModel &default_wait_model();

/// Fraction of per-queue capacity claimed by participating jobs with waiting
/// cost above c:  rho1*[F1(c1)-F1(c)]+ + rho2*[F2(c2)-F2(c)]+.
/// Throws UnstableError when the load at c = 0 is >= 1 - kStabilityEpsilon.
double residual_load(double cost, const CutoffVector &cutoffs, const MarketParams &params);

/// residual_load at c = 0, the overall spot utilization; does not throw.
double stability_margin(const CutoffVector &cutoffs, const MarketParams &params);

double waiting_time(double cost, const CutoffVector &cutoffs, const MarketParams &params,
                    const WaitingTimeModel &model = default_wait_model());

/// integral_0^c w(t; cutoffs) dt by adaptive quadrature (abs tol 1e-10) with
/// panels split at the cutoff and support kinks. The tail beyond
/// max(c1, c2), where w == 1/mu, is added exactly.
double cumulative_wait(double cost, const CutoffVector &cutoffs, const MarketParams &params,
                       const WaitingTimeModel &model = default_wait_model());

}  // namespace cloudmkt
