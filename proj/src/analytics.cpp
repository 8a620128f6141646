#include <reflev/analytics.hpp>

#include <reflev/errors.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <variant>

namespace reflev {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class F>
double integrate(F f, double lo, double hi) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-14);
}

}  // namespace

double phi_kernel(double x, double y, double z, double buffer) {
    const double below = x - z;
    const double above = buffer - x;
    if (y <= -below) return -below * below - 2.0 * y * below;
    if (y < above) return y * y;
    return 2.0 * y * above - above * above;
}

double phi_kernel_nu_integral(const LevyModel& model, double x, double z, double buffer) {
    if (!model.has_jumps()) return 0.0;
    if (const auto* pm = std::get_if<PointMass>(&model.jump))
        return model.intensity * phi_kernel(x, pm->size, z, buffer);
    const double below = x - z;
    const double above = buffer - x;
    const auto& law = model.jump;
    const double lower_branch = jump_polynomial_integral(law, -kInf, -below, -below * below, -2.0 * below, 0.0);
    const double middle_branch = jump_polynomial_integral(law, -below, above, 0.0, 0.0, 1.0);
    const double upper_branch = jump_polynomial_integral(law, above, kInf, -above * above, 2.0 * above, 0.0);
    return model.intensity * (lower_branch + middle_branch + upper_branch);
}

double LossIntegralTerms::loss_rate_with_barrier_work(const LevyModel& model, double buffer,
                                                      double barrier_work_rate) const {
    const double s2 = model.sigma * model.sigma;
    return (mean_x1(model) * mean_level + barrier_work_rate + 0.5 * s2 + 0.5 * kernel_integral) /
           buffer;
}

LossIntegralTerms loss_integral_rate(const LossIntegralInput& in) {
    LossIntegralTerms t;
    if (!integrable_tail(in.model)) {
        t.loss_rate = kInf;
        return t;
    }
    if (!(in.buffer > in.barrier.mean_level()))
        throw ConfigError("buffer level must exceed E A_0");
    const auto& hist = in.histogram;
    const auto& xi = in.barrier.invariant_measure();

    t.mean_level = hist.mean_level();
    t.mean_barrier = in.barrier.mean_level();
    const double denom = in.buffer - t.mean_barrier;

    double triple = 0.0;
    for (std::size_t col = 0; col < hist.a_bins(); ++col) {
        const auto [a_lo, a_hi] = hist.a_range(col);
        const double weight = hist.a_bins() == 1 ? 1.0 : xi.mass(a_lo, a_hi);
        if (weight == 0.0) continue;
        const auto cond = hist.conditional(col);
        const double z = hist.a_mid(col);
        double inner = 0.0;
        for (std::size_t row = 0; row < hist.rows(); ++row) {
            if (cond[row] == 0.0) continue;
            const double x = std::max(hist.v_mid(row, col), z);
            inner += cond[row] * phi_kernel_nu_integral(in.model, x, z, in.buffer);
        }
        triple += weight * inner;
    }
    t.kernel_integral = triple;

    t.drift_term = mean_x1(in.model) * (t.mean_level - t.mean_barrier) / denom;
    t.diffusion_term = in.model.sigma * in.model.sigma / (2.0 * denom);
    t.jump_term = triple / (2.0 * denom);
    t.loss_rate = t.drift_term + t.diffusion_term + t.jump_term;
    return t;
}

MM1SawConstant mm1_saw_constant(double lambda, double mu, double amplitude) {
    if (!(lambda > 0.0) || !(lambda < mu)) throw ConfigError("M/M/1 constant needs 0 < lambda < mu");
    if (!(amplitude > 0.0)) throw ConfigError("sawtooth amplitude must be positive");
    MM1SawConstant c;
    const double gamma = mu - lambda;
    c.gamma = gamma;
    c.printed = std::expm1(amplitude * gamma) / amplitude * (gamma / mu) * (lambda / mu);

    const double mean = lambda / mu - 1.0;
    // C_gamma = E e^{gamma A} with A uniform on [0, a]; also the law of Y in B = e_1 - Y.
    const double c_gamma =
        integrate([&](double y) { return std::exp(gamma * y) / amplitude; }, 0.0, amplitude);
    // Under the tilted measure, upward jumps arrive at rate mu with Exp(lambda) sizes.
    const double overshoot_transform =
        integrate([&](double t) { return std::exp(-gamma * t) * lambda * std::exp(-lambda * t); }, 0.0, kInf);
    const double tilted_overshoot = overshoot_transform * c_gamma;

    // e^{gamma x} int_x^inf (1 - e^{gamma (y - x)}) nu(dy), with exponents merged so the
    // integrand stays finite for large x and y.
    auto weighted_upper_tail = [&](double x) {
        return integrate(
            [&](double y) {
                return lambda * mu * (std::exp(gamma * x - mu * y) - std::exp((gamma - mu) * y));
            },
            x, kInf);
    };
    // P^gamma(tau^-_{-x} = infinity) = 1 - e^{-gamma x}
    const double overflow_integral = integrate(
        [&](double x) { return -std::expm1(-gamma * x) * weighted_upper_tail(x); }, 0.0, kInf);
    // Both downward-jump terms vanish: nu has no mass on (-inf, 0).
    c.assembled = -mean * c_gamma + tilted_overshoot * overflow_integral;
    return c;
}

std::string supported_route(const MM1SawConstant& c, double d_hat, double d0_hat, double gamma,
                            double amplitude) {
    const double upper = d0_hat * std::exp(gamma * amplitude);
    auto inside = [&](double d) { return d >= d0_hat && d <= upper; };
    auto distance = [&](double d) { return std::abs(std::log(d / d_hat)); };
    const bool printed_in = inside(c.printed);
    const bool assembled_in = inside(c.assembled);
    if (printed_in && assembled_in)
        return distance(c.printed) < distance(c.assembled) ? "printed" : "assembled";
    if (printed_in) return "printed";
    if (assembled_in) return "assembled";
    return "neither";
}

AsymptoticsReport fit_asymptote(const std::vector<LossPoint>& table, double gamma) {
    std::vector<LossPoint> usable;
    std::set<double> distinct;
    for (const auto& p : table) {
        if (!(p.rate > 0.0) || !(p.half_width >= 0.0) || !(p.half_width < 0.25 * p.rate)) continue;
        usable.push_back(p);
        distinct.insert(p.buffer);
    }
    if (distinct.size() < 4)
        throw InsufficientDataError("asymptote fit needs at least 4 distinct K with CI < 25%");

    AsymptoticsReport r;
    r.gamma = gamma;
    r.points = usable;

    double log_d = 0.0;
    for (const auto& p : usable) log_d += std::log(p.rate) + gamma * p.buffer;
    log_d /= static_cast<double>(usable.size());
    r.fixed_intercept = std::exp(log_d);
    for (const auto& p : usable) r.log_residuals.push_back(std::log(p.rate) - (log_d - gamma * p.buffer));

    const bool exact = std::any_of(usable.begin(), usable.end(),
                                   [](const LossPoint& p) { return p.half_width == 0.0; });
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (const auto& p : usable) {
        const double w = exact ? 1.0 : (p.rate / p.half_width) * (p.rate / p.half_width);
        sw += w;
        sx += w * p.buffer;
        sy += w * std::log(p.rate);
    }
    const double xbar = sx / sw;
    const double ybar = sy / sw;
    double sxy = 0.0, sxx = 0.0;
    for (const auto& p : usable) {
        const double w = exact ? 1.0 : (p.rate / p.half_width) * (p.rate / p.half_width);
        sxy += w * (p.buffer - xbar) * (std::log(p.rate) - ybar);
        sxx += w * (p.buffer - xbar) * (p.buffer - xbar);
    }
    r.free_slope = sxy / sxx;
    r.free_intercept = std::exp(ybar - r.free_slope * xbar);
    return r;
}

LossRateReport constant_barrier_reference(const LevyModel& model, double buffer,
                                          const SimConfig& cfg, std::size_t replicas,
                                          std::size_t workers) {
    const PeriodicBarrier zero = PeriodicBarrier::zero();
    SimConfig run = cfg;
    run.buffer = buffer;
    return estimate_loss_rates(model, zero, run, replicas, workers);
}

bool not_below(const RegulatorRate& value, const RegulatorRate& lower) {
    return value.rate + value.half_width >= lower.rate - lower.half_width;
}

}  // namespace reflev
