#include <reflev/levy_model.hpp>

#include <reflev/errors.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace reflev {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_rate(double rate, const char* what) {
    if (!(rate > 0.0) || !std::isfinite(rate))
        throw ConfigError(std::string(what) + " must be a positive finite rate");
}

// int_lo^hi (c0 + c1 y + c2 y^2) mu e^{-mu y} dy over y > 0.
double positive_exp_poly(double mu, double lo, double hi, double c0, double c1, double c2) {
    lo = std::max(lo, 0.0);
    if (!(hi > lo)) return 0.0;
    auto antiderivative = [&](double y) {
        if (std::isinf(y)) return 0.0;
        const double e = std::exp(-mu * y);
        const double p0 = 1.0;
        const double p1 = y + 1.0 / mu;
        const double p2 = y * y + 2.0 * y / mu + 2.0 / (mu * mu);
        return -e * (c0 * p0 + c1 * p1 + c2 * p2);
    };
    return antiderivative(hi) - antiderivative(lo);
}

// int_lo^hi (c0 + c1 y + c2 y^2) mu e^{mu y} dy over y < 0.
double negative_exp_poly(double mu, double lo, double hi, double c0, double c1, double c2) {
    hi = std::min(hi, 0.0);
    if (!(hi > lo)) return 0.0;
    auto antiderivative = [&](double y) {
        if (std::isinf(y)) return 0.0;
        const double e = std::exp(mu * y);
        const double p0 = 1.0;
        const double p1 = y - 1.0 / mu;
        const double p2 = y * y - 2.0 * y / mu + 2.0 / (mu * mu);
        return e * (c0 * p0 + c1 * p1 + c2 * p2);
    };
    return antiderivative(hi) - antiderivative(lo);
}

}  // namespace

void validate(const JumpLaw& law) {
    std::visit(Overloaded{
                   [](const ExpPositive& j) { require_rate(j.rate, "exp_positive rate"); },
                   [](const ExpNegative& j) { require_rate(j.rate, "exp_negative rate"); },
                   [](const TwoSidedExp& j) {
                       if (!(j.p_up >= 0.0 && j.p_up <= 1.0))
                           throw ConfigError("two_sided weight p_up must lie in [0,1]");
                       require_rate(j.rate_up, "two_sided rate_up");
                       require_rate(j.rate_down, "two_sided rate_down");
                   },
                   [](const PointMass& j) {
                       if (j.size == 0.0 || !std::isfinite(j.size))
                           throw ConfigError("point_mass size must be finite and nonzero");
                   },
               },
               law);
}

double jump_mean(const JumpLaw& law) {
    return std::visit(Overloaded{
                          [](const ExpPositive& j) { return 1.0 / j.rate; },
                          [](const ExpNegative& j) { return -1.0 / j.rate; },
                          [](const TwoSidedExp& j) {
                              return j.p_up / j.rate_up - (1.0 - j.p_up) / j.rate_down;
                          },
                          [](const PointMass& j) { return j.size; },
                      },
                      law);
}

double jump_mgf(const JumpLaw& law, double alpha) {
    return std::visit(
        Overloaded{
            [&](const ExpPositive& j) {
                if (alpha >= j.rate) throw DomainError("alpha outside the exponent domain");
                return j.rate / (j.rate - alpha);
            },
            [&](const ExpNegative& j) {
                if (alpha <= -j.rate) throw DomainError("alpha outside the exponent domain");
                return j.rate / (j.rate + alpha);
            },
            [&](const TwoSidedExp& j) {
                double m = 0.0;
                if (j.p_up > 0.0) {
                    if (alpha >= j.rate_up) throw DomainError("alpha outside the exponent domain");
                    m += j.p_up * j.rate_up / (j.rate_up - alpha);
                }
                if (j.p_up < 1.0) {
                    if (alpha <= -j.rate_down)
                        throw DomainError("alpha outside the exponent domain");
                    m += (1.0 - j.p_up) * j.rate_down / (j.rate_down + alpha);
                }
                return m;
            },
            [&](const PointMass& j) { return std::exp(alpha * j.size); },
        },
        law);
}

double jump_mgf_derivative(const JumpLaw& law, double alpha) {
    return std::visit(
        Overloaded{
            [&](const ExpPositive& j) {
                if (alpha >= j.rate) throw DomainError("alpha outside the exponent domain");
                return j.rate / ((j.rate - alpha) * (j.rate - alpha));
            },
            [&](const ExpNegative& j) {
                if (alpha <= -j.rate) throw DomainError("alpha outside the exponent domain");
                return -j.rate / ((j.rate + alpha) * (j.rate + alpha));
            },
            [&](const TwoSidedExp& j) {
                double m = 0.0;
                if (j.p_up > 0.0) {
                    if (alpha >= j.rate_up) throw DomainError("alpha outside the exponent domain");
                    m += j.p_up * j.rate_up / ((j.rate_up - alpha) * (j.rate_up - alpha));
                }
                if (j.p_up < 1.0) {
                    if (alpha <= -j.rate_down)
                        throw DomainError("alpha outside the exponent domain");
                    m -= (1.0 - j.p_up) * j.rate_down / ((j.rate_down + alpha) * (j.rate_down + alpha));
                }
                return m;
            },
            [&](const PointMass& j) { return j.size * std::exp(alpha * j.size); },
        },
        law);
}

double sample_jump(const JumpLaw& law, Rng& rng) {
    return std::visit(Overloaded{
                          [&](const ExpPositive& j) {
                              return std::exponential_distribution<double>(j.rate)(rng);
                          },
                          [&](const ExpNegative& j) {
                              return -std::exponential_distribution<double>(j.rate)(rng);
                          },
                          [&](const TwoSidedExp& j) {
                              const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
                              if (u < j.p_up)
                                  return std::exponential_distribution<double>(j.rate_up)(rng);
                              return -std::exponential_distribution<double>(j.rate_down)(rng);
                          },
                          [](const PointMass& j) { return j.size; },
                      },
                      law);
}

double jump_polynomial_integral(const JumpLaw& law, double lo, double hi, double c0, double c1,
                                double c2) {
    if (!(hi > lo)) return 0.0;
    return std::visit(
        Overloaded{
            [&](const ExpPositive& j) { return positive_exp_poly(j.rate, lo, hi, c0, c1, c2); },
            [&](const ExpNegative& j) { return negative_exp_poly(j.rate, lo, hi, c0, c1, c2); },
            [&](const TwoSidedExp& j) {
                double r = 0.0;
                if (j.p_up > 0.0) r += j.p_up * positive_exp_poly(j.rate_up, lo, hi, c0, c1, c2);
                if (j.p_up < 1.0)
                    r += (1.0 - j.p_up) * negative_exp_poly(j.rate_down, lo, hi, c0, c1, c2);
                return r;
            },
            [&](const PointMass& j) {
                if (j.size < lo || j.size > hi) return 0.0;
                return c0 + c1 * j.size + c2 * j.size * j.size;
            },
        },
        law);
}

void LevyModel::validate() const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be >= 0");
    if (!(intensity >= 0.0) || !std::isfinite(intensity))
        throw ConfigError("jump intensity must be >= 0");
    if (!std::isfinite(drift)) throw ConfigError("drift must be finite");
    reflev::validate(jump);
}

ExponentDomain exponent_domain(const LevyModel& model) {
    if (!model.has_jumps()) return {-kInf, kInf};
    return std::visit(Overloaded{
                          [](const ExpPositive& j) { return ExponentDomain{-kInf, j.rate}; },
                          [](const ExpNegative& j) { return ExponentDomain{-j.rate, kInf}; },
                          [](const TwoSidedExp& j) {
                              return ExponentDomain{j.p_up < 1.0 ? -j.rate_down : -kInf,
                                                    j.p_up > 0.0 ? j.rate_up : kInf};
                          },
                          [](const PointMass&) { return ExponentDomain{-kInf, kInf}; },
                      },
                      model.jump);
}

double kappa(const LevyModel& model, double alpha) {
    if (!exponent_domain(model).contains(alpha))
        throw DomainError("alpha outside the exponent domain");
    double k = model.drift * alpha + 0.5 * model.sigma * model.sigma * alpha * alpha;
    if (model.has_jumps()) k += model.intensity * (jump_mgf(model.jump, alpha) - 1.0);
    return k;
}

double kappa_derivative(const LevyModel& model, double alpha) {
    if (!exponent_domain(model).contains(alpha))
        throw DomainError("alpha outside the exponent domain");
    double k = model.drift + model.sigma * model.sigma * alpha;
    if (model.has_jumps()) k += model.intensity * jump_mgf_derivative(model.jump, alpha);
    return k;
}

double mean_x1(const LevyModel& model) {
    double m = model.drift;
    if (model.has_jumps()) m += model.intensity * jump_mean(model.jump);
    return m;
}

double lundberg_root(const LevyModel& model) {
    if (!(mean_x1(model) < 0.0)) throw DomainError("E X_1 >= 0: no positive Lundberg root");
    const ExponentDomain dom = exponent_domain(model);

    // Grow the right end of the bracket until kappa turns positive.
    double lo = 0.0;
    double hi = 0.0;
    if (std::isfinite(dom.hi)) {
        const double cap = dom.hi * (1.0 - 1e-9);
        double gap = dom.hi / 2.0;
        hi = dom.hi - gap;
        while (kappa(model, hi) <= 0.0) {
            lo = hi;
            if (hi >= cap) throw NoRootError("kappa < 0 on the whole positive exponent domain");
            gap /= 2.0;
            hi = std::min(dom.hi - gap, cap);
        }
    } else {
        hi = 1e-9;
        while (kappa(model, hi) <= 0.0) {
            lo = hi;
            if (hi > 1e12) throw NoRootError("kappa < 0 on the whole positive exponent domain");
            hi *= 2.0;
        }
    }

    for (int i = 0; i < 40; ++i) {
        const double mid = 0.5 * (lo + hi);
        (kappa(model, mid) > 0.0 ? hi : lo) = mid;
    }

    // Newton from the right end; kappa is convex so iterates decrease monotonically.
    double x = hi;
    for (int i = 0; i < 50; ++i) {
        const double f = kappa(model, x);
        const double df = kappa_derivative(model, x);
        double next = x - f / df;
        if (!(next > lo && next <= hi)) next = 0.5 * (lo + hi);
        if (kappa(model, next) > 0.0)
            hi = next;
        else
            lo = next;
        const bool converged = std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * x;
        x = next;
        if (converged) break;
    }
    return x;
}

LevyModel tilt(const LevyModel& model, double gamma) {
    if (!exponent_domain(model).contains(gamma))
        throw DomainError("tilt parameter outside the exponent domain");
    LevyModel out = model;
    out.drift = model.drift + model.sigma * model.sigma * gamma;
    if (!model.has_jumps()) return out;
    const double mgf = jump_mgf(model.jump, gamma);
    out.intensity = model.intensity * mgf;
    out.jump = std::visit(
        Overloaded{
            [&](const ExpPositive& j) -> JumpLaw { return ExpPositive{j.rate - gamma}; },
            [&](const ExpNegative& j) -> JumpLaw { return ExpNegative{j.rate + gamma}; },
            [&](const TwoSidedExp& j) -> JumpLaw {
                const double up = j.p_up > 0.0 ? j.p_up * j.rate_up / (j.rate_up - gamma) : 0.0;
                return TwoSidedExp{up / mgf, j.rate_up - gamma, j.rate_down + gamma};
            },
            [](const PointMass& j) -> JumpLaw { return j; },
        },
        model.jump);
    reflev::validate(out.jump);
    return out;
}

bool integrable_tail(const LevyModel& model) {
    // Exponential and bounded tails only; heavy-tailed laws would answer false here.
    (void)model;
    return true;
}

}  // namespace reflev
