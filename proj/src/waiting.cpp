#include "cloudmkt/waiting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cloudmkt/quadrature.hpp"

namespace cloudmkt {

double WaitingTimeModel::cumulative_wait_closed(double, const CutoffVector &,
                                                const MarketParams &) const {
    throw std::logic_error("waiting-time model has no closed-form integral");
}

double stability_margin(const CutoffVector &cut, const MarketParams &p) {
    return p.rho(1) * p.class1.cost_dist.cdf(cut.c1) + p.rho(2) * p.class2.cost_dist.cdf(cut.c2);
}

namespace {

void require_stable(const CutoffVector &cut, const MarketParams &p) {
    if (stability_margin(cut, p) >= 1.0 - kStabilityEpsilon)
        throw UnstableError("spot load at cutoffs (" + std::to_string(cut.c1) + ", " +
                            std::to_string(cut.c2) + ") is at or beyond capacity");
}

}  // namespace

double residual_load(double cost, const CutoffVector &cut, const MarketParams &p) {
    require_stable(cut, p);
    double l1 = p.rho(1) * std::max(0.0, p.class1.cost_dist.cdf(cut.c1) - p.class1.cost_dist.cdf(cost));
    double l2 = p.rho(2) * std::max(0.0, p.class2.cost_dist.cdf(cut.c2) - p.class2.cost_dist.cdf(cost));
    return l1 + l2;
}

double Mm1PriorityWait::waiting_time(double cost, const CutoffVector &cut,
                                     const MarketParams &p) const {
    double slack = 1.0 - residual_load(cost, cut, p);
    return 1.0 / (p.service_rate * slack * slack);
}

bool Mm1PriorityWait::has_closed_form_integral(const MarketParams &p) const {
    return p.class1.cost_dist.kind() == DistKind::Uniform &&
           p.class2.cost_dist.kind() == DistKind::Uniform;
}

// With uniform costs the residual load is piecewise affine in t:
// A - B*t on [0, min cutoff) with both classes active, then the larger-cutoff
// class alone on [min, max), then zero. Each piece integrates to
// (1/y0 - 1/y1)/(mu*B) with y = 1 - A + B*t.
double Mm1PriorityWait::cumulative_wait_closed(double cost, const CutoffVector &cut,
                                               const MarketParams &p) const {
    require_stable(cut, p);
    if (cost <= 0.0) return 0.0;

    double mu = p.service_rate;
    double s1 = 1.0 / p.cost_upper(1), s2 = 1.0 / p.cost_upper(2);
    double g1 = p.rho(1) * s1, g2 = p.rho(2) * s2;
    double a = std::min(cut.c1, cut.c2), b = std::max(cut.c1, cut.c2);

    // (1/y0 - 1/y1)/(mu*B) collapses to (t1-t0)/(mu*y0*y1), which is exact
    // for B = 0 too and avoids cancellation for vanishing loads.
    auto seg = [mu](double A, double B, double t0, double t1) {
        if (!(t1 > t0)) return 0.0;
        double y0 = 1.0 - A + B * t0, y1 = 1.0 - A + B * t1;
        return (t1 - t0) / (mu * y0 * y1);
    };

    double total = seg(g1 * cut.c1 + g2 * cut.c2, g1 + g2, 0.0, std::min(a, cost));
    if (cut.c1 >= cut.c2)
        total += seg(g1 * cut.c1, g1, std::min(a, cost), std::min(b, cost));
    else
        total += seg(g2 * cut.c2, g2, std::min(a, cost), std::min(b, cost));
    total += std::max(0.0, cost - b) / mu;
    return total;
}

const WaitingTimeModel &default_wait_model() {
    static const Mm1PriorityWait model;
    return model;
}

double waiting_time(double cost, const CutoffVector &cut, const MarketParams &p,
                    const WaitingTimeModel &model) {
    return model.waiting_time(cost, cut, p);
}

double cumulative_wait(double cost, const CutoffVector &cut, const MarketParams &p,
                       const WaitingTimeModel &model) {
    require_stable(cut, p);
    if (cost <= 0.0) return 0.0;

    double cmax = cut.max_cutoff();
    double head = std::min(cost, cmax);
    double total = integrate_adaptive(
        [&](double t) { return model.waiting_time(t, cut, p); }, 0.0, head,
        {cut.c2, cut.c1, p.cost_upper(2), p.cost_upper(1)}, 1e-10);
    // w == 1/mu beyond the larger cutoff; integrate that tail exactly.
    total += std::max(0.0, cost - cmax) / p.service_rate;
    return total;
}

}  // namespace cloudmkt
