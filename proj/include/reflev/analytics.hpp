#pragma once

// Exact-formula side: the integral representation of the loss rate through the
// kernel phi_K, the Cramer constant for the M/M/1 sawtooth example, and the
// log-linear fit of simulated loss rates against K.

#include <reflev/estimation.hpp>
#include <reflev/levy_model.hpp>
#include <reflev/periodic_barrier.hpp>

#include <optional>
#include <string>
#include <vector>

namespace reflev {

/// phi_K(x, y, z) for 0 <= z <= x <= K.
double phi_kernel(double x, double y, double z, double buffer);

/// int phi_K(x, y, z) nu(dy), with nu = lambda * (jump density), in closed form.
double phi_kernel_nu_integral(const LevyModel& model, double x, double z, double buffer);

struct LossIntegralInput {
    const LevyModel& model;
    const PeriodicBarrier& barrier;
    double buffer;
    const StationaryHistogram& histogram;
};

struct LossIntegralTerms {
    double mean_level = 0.0;   // int x pi_K(dx)
    double mean_barrier = 0.0; // E A_0
    double drift_term = 0.0;
    double diffusion_term = 0.0;
    double jump_term = 0.0;
    double kernel_integral = 0.0;  // the triple integral of phi_K
    double loss_rate = 0.0;        // sum of the three terms

    /// Same second-order balance, but with a measured time-average of int A dL^A
    /// instead of E A_0 * l^A. Diagnostic only.
    double loss_rate_with_barrier_work(const LevyModel& model, double buffer,
                                       double barrier_work_rate) const;
};

/// Loss rate from the stationary histogram. The outer integrals are sums over
/// histogram cells (x at cell midpoints, z at A-bin midpoints weighted by the
/// xi-mass of the bin); the inner nu-integral is exact. Returns +inf when the
/// jump tail is not integrable.
LossIntegralTerms loss_integral_rate(const LossIntegralInput& input);

/// Two candidate Cramer constants for M/M/1 input with the sawtooth barrier.
struct MM1SawConstant {
    double gamma = 0.0;
    /// (1/a)(e^{a(mu-lambda)} - 1) ((mu-lambda)/mu) (lambda/mu), as printed.
    double printed = 0.0;
    /// The general constant assembled term by term for this model, by quadrature.
    double assembled = 0.0;
};

/// Throws ConfigError unless 0 < lambda < mu and a > 0.
MM1SawConstant mm1_saw_constant(double lambda, double mu, double amplitude);

/// Which candidate the simulated intercepts support: the one inside the
/// sandwich [D0, D0 e^{gamma a}] that lies nearest to D-hat on the log scale.
/// Returns "printed", "assembled" or "neither".
std::string supported_route(const MM1SawConstant& candidates, double d_hat, double d0_hat,
                            double gamma, double amplitude);

struct LossPoint {
    double buffer;
    double rate;
    double half_width;
};

struct AsymptoticsReport {
    double gamma = 0.0;
    double fixed_intercept = 0.0;  // D-hat with slope pinned at -gamma
    double free_slope = 0.0;
    double free_intercept = 0.0;   // exp of the free-fit intercept
    std::vector<LossPoint> points;
    std::vector<double> log_residuals;  // log l - (log D-hat - gamma K)
    std::optional<double> c_gamma;
    std::optional<MM1SawConstant> closed_form;
};

/// Needs >= 4 distinct K with 0 < half-width < 25% of the rate (zero half-widths
/// are accepted for exact data); throws InsufficientDataError otherwise.
/// The free fit weights log-rates by (rate / half-width)^2, or uniformly when any
/// half-width is zero.
AsymptoticsReport fit_asymptote(const std::vector<LossPoint>& table, double gamma);

/// Loss-rate estimate with the lower barrier replaced by the constant 0.
LossRateReport constant_barrier_reference(const LevyModel& model, double buffer,
                                          const SimConfig& cfg, std::size_t replicas,
                                          std::size_t workers = 1);

/// Whether `value` is not significantly below `lower`, i.e. the two 95% intervals
/// overlap or are ordered.
bool not_below(const RegulatorRate& value, const RegulatorRate& lower);

}  // namespace reflev
