#pragma once

#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "cloudmkt/errors.hpp"

namespace cloudmkt {

enum class DistKind { Uniform, TruncatedExponential };

/// Waiting-cost distribution of one job class, supported on [0, upper]
/// with upper = mu * value. CDF is continuous, strictly increasing on the
/// support, with cdf(0) = 0 and cdf(upper) = 1; the density is strictly
/// positive on (0, upper).
class CostDistribution {
public:
    static CostDistribution uniform(double upper);
    /// Exponential with the given rate, renormalized to [0, upper].
    static CostDistribution truncated_exponential(double rate, double upper);

    DistKind kind() const { return kind_; }
    double upper() const { return upper_; }
    double rate() const { return rate_; }  // 0 for uniform

    /// CDF, clamped: 0 below the support, 1 above.
    double cdf(double c) const;
    /// Density; 0 outside [0, upper].
    double pdf(double c) const;
    /// Quantile; u is clamped to [0, 1].
    double inverse_cdf(double u) const;
    /// Inverse-transform sample from caller-owned RNG state.
    double sample(std::mt19937_64 &rng) const;

private:
    CostDistribution(DistKind kind, double upper, double rate)
        : kind_(kind), upper_(upper), rate_(rate) {}

    DistKind kind_;
    double upper_;
    double rate_;
};

/// One job class: completion value, Poisson arrival rate, waiting-cost law.
struct ClassParams {
    double value;          // v_i > 0
    double arrival_rate;   // lambda_i > 0
    CostDistribution cost_dist;
};

/// Full market description. Class 1 is the high-value class (v1 > v2).
struct MarketParams {
    double service_rate;  // mu > 0, per server
    int num_servers;      // k >= 1, spot servers
    ClassParams class1;
    ClassParams class2;

    const ClassParams &cls(int i) const { return i == 1 ? class1 : class2; }
    /// Per-queue load contribution factor lambda_i / (k * mu).
    double rho(int i) const { return cls(i).arrival_rate / (num_servers * service_rate); }
    /// Top of class i's cost support, mu * v_i.
    double cost_upper(int i) const { return service_rate * cls(i).value; }
};

/// Checks every model invariant; returns one message per violation
/// (empty means the parameters are valid).
std::vector<std::string> validate(const MarketParams &params);

/// Throws InvalidParamsError listing all violations.
void validate_or_throw(const MarketParams &params);

/// Participation thresholds for the spot market; class-i jobs with waiting
/// cost below c_i bid for spot instances. All equilibria produced by the
/// solvers satisfy c1 >= c2.
struct CutoffVector {
    double c1 = 0.0;
    double c2 = 0.0;

    double max_cutoff() const { return c1 > c2 ? c1 : c2; }
};

/// Parses the key-value market config format:
///   mu = 1.0
///   k = 2
///   v1 = 2.0      lambda1 = 1.0     dist1 = uniform
///   v2 = 1.0      lambda2 = 1.0     dist2 = texp:1.5
/// One `key = value` pair per line; '#' starts a comment. All eight keys are
/// required; dist values are `uniform` or `texp:<rate>`. The cost support is
/// always [0, mu*v_i]. Throws ConfigError on grammar problems and
/// InvalidParamsError if the resulting parameters are invalid.
MarketParams load_market_params(std::istream &in);
MarketParams load_market_params_file(const std::string &path);

}  // namespace cloudmkt
