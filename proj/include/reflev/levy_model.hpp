#pragma once

// Levy processes X_t = d t + sigma W_t + compound Poisson(lambda, J) with
// exponential-tailed (or bounded) jump laws, so that the Laplace exponent,
// its derivative and every truncated jump moment are available in closed form.

#include <reflev/rng.hpp>

#include <variant>

namespace reflev {

/// Positive jumps, J ~ Exp(rate).
struct ExpPositive {
    double rate;
};

/// Negative jumps, -J ~ Exp(rate).
struct ExpNegative {
    double rate;
};

/// With probability p_up an Exp(rate_up) upward jump, otherwise -Exp(rate_down).
struct TwoSidedExp {
    double p_up;
    double rate_up;
    double rate_down;
};

/// Deterministic jump of size `size`. Lattice; intended for tests only.
struct PointMass {
    double size;
};

using JumpLaw = std::variant<ExpPositive, ExpNegative, TwoSidedExp, PointMass>;

/// Throws ConfigError on non-positive rates, weights outside [0,1] or a zero point mass.
void validate(const JumpLaw& law);

double jump_mean(const JumpLaw& law);
/// E e^{alpha J}; throws DomainError outside the convergence strip.
double jump_mgf(const JumpLaw& law, double alpha);
double jump_mgf_derivative(const JumpLaw& law, double alpha);
double sample_jump(const JumpLaw& law, Rng& rng);

/// int_lo^hi (c0 + c1 y + c2 y^2) f(y) dy for the normalized jump density f.
/// Infinite bounds are allowed. Point masses count when lo <= size <= hi.
double jump_polynomial_integral(const JumpLaw& law, double lo, double hi, double c0, double c1,
                                double c2);

struct LevyModel {
    double drift = 0.0;      // level / time
    double sigma = 0.0;      // level / sqrt(time)
    double intensity = 0.0;  // jumps / time
    JumpLaw jump = ExpPositive{1.0};

    /// Throws ConfigError when sigma < 0, intensity < 0 or the jump law is invalid.
    void validate() const;
    bool has_jumps() const { return intensity > 0.0; }
};

/// Open interval (lo, hi) on which kappa is finite. Infinite ends are +-infinity.
struct ExponentDomain {
    double lo;
    double hi;

    bool contains(double alpha) const { return alpha > lo && alpha < hi; }
};

ExponentDomain exponent_domain(const LevyModel& model);

/// Laplace exponent kappa(alpha) = log E exp(alpha X_1).
double kappa(const LevyModel& model, double alpha);
double kappa_derivative(const LevyModel& model, double alpha);

/// E X_1 = d + lambda E J.
double mean_x1(const LevyModel& model);

/// Positive root gamma of kappa. Requires E X_1 < 0; throws NoRootError when
/// kappa stays negative on (0, hi).
double lundberg_root(const LevyModel& model);

/// The model under the exponentially tilted measure dP^g/dP = exp(g X_t - kappa(g) t).
LevyModel tilt(const LevyModel& model, double gamma);

/// Whether int_1^inf y nu(dy) < infinity. Every supported jump law has an exponential
/// or bounded tail, so this is currently always true.
bool integrable_tail(const LevyModel& model);

}  // namespace reflev
