#include <doctest.h>

#include "oracles.hpp"

#include <reflev/analytics.hpp>
#include <reflev/errors.hpp>

#include <cmath>
#include <random>

using namespace reflev;

namespace {

LevyModel mm1(double lambda, double mu) {
    LevyModel m;
    m.drift = -1.0;
    m.intensity = lambda;
    m.jump = ExpPositive{mu};
    return m;
}

// Occupation histogram for a flat barrier filled from an exact law: `cell_mass(lo, hi)`
// per V-bin plus `atom` time spent on the barrier.
template <class CellMass>
OccupationHistogram flat_histogram(std::size_t bins, double buffer, double atom, CellMass cell_mass) {
    OccupationHistogram occ(bins, 1, buffer, 0.0);
    const double w = buffer / static_cast<double>(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        const double lo = w * static_cast<double>(i);
        const double mass = cell_mass(lo, lo + w);
        if (mass > 0.0) occ.add({mass, lo + 0.5 * w, 0.0, 0.0, 0.0, Contact::kNone, 0.0});
    }
    if (atom > 0.0) occ.add({atom, 0.0, 0.0, 0.0, 0.0, Contact::kLower, 0.0});
    return occ;
}

double phi_nu_by_quadrature(const LevyModel& m, double x, double z, double k) {
    const auto& t = std::get<TwoSidedExp>(m.jump);
    auto up = [&](double y) { return m.intensity * t.p_up * phi_kernel(x, y, z, k) * oracle::exp_density(t.rate_up, y); };
    auto down = [&](double y) {
        return m.intensity * (1.0 - t.p_up) * phi_kernel(x, -y, z, k) * oracle::exp_density(t.rate_down, y);
    };
    // Split at the kinks so each piece is smooth.
    return oracle::integrate(up, 0.0, k - x) + oracle::integrate(up, k - x, oracle::kInf) +
           oracle::integrate(down, 0.0, x - z) + oracle::integrate(down, x - z, oracle::kInf);
}

}  // namespace

TEST_SUITE("analytics") {
    TEST_CASE("phi kernel: continuous, between 0 and y^2, quadratic in the middle") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int n = 0; n < 500; ++n) {
            const double k = 1.0 + 4.0 * u(rng);
            const double x = k * u(rng);
            const double z = x * u(rng);
            for (double y : {-(x - z), k - x}) {
                const double eps = 1e-9;
                CHECK(std::abs(phi_kernel(x, y - eps, z, k) - phi_kernel(x, y + eps, z, k)) < 1e-7);
            }
            const double y = 6.0 * (u(rng) - 0.5);
            const double v = phi_kernel(x, y, z, k);
            CHECK(v >= -1e-12);
            CHECK(v <= y * y + 1e-12);
            if (y > -(x - z) && y < k - x) CHECK(v == y * y);
        }
        CHECK(phi_kernel(1.0, 5.0, 0.0, 2.0) == doctest::Approx(2.0 * 5.0 * 1.0 - 1.0));
        CHECK(phi_kernel(1.5, -4.0, 0.5, 2.0) == doctest::Approx(-1.0 + 8.0));
    }

    TEST_CASE("nu-integral of the kernel against quadrature") {
        LevyModel m;
        m.intensity = 1.3;
        m.jump = TwoSidedExp{0.35, 1.7, 0.6};
        for (auto [x, z, k] : {std::array{1.0, 0.2, 3.0}, {2.5, 0.0, 3.0}, {0.4, 0.4, 1.0}, {3.9, 1.1, 4.0}})
            CHECK(phi_kernel_nu_integral(m, x, z, k) == doctest::Approx(phi_nu_by_quadrature(m, x, z, k)).epsilon(1e-9));
        LevyModel quiet;
        CHECK(phi_kernel_nu_integral(quiet, 1.0, 0.0, 2.0) == 0.0);
    }

    TEST_CASE("reflected Brownian motion: the integral formula reproduces the exact loss rate") {
        const oracle::ReflectedBrownian bm{-0.5, 0.8, 2.0};
        LevyModel m;
        m.drift = bm.drift;
        m.sigma = bm.sigma;
        const auto occ = flat_histogram(4000, bm.buffer, 0.0, [&](double lo, double hi) { return bm.cdf(hi) - bm.cdf(lo); });
        const StationaryHistogram h(occ);
        const auto flat = PeriodicBarrier::zero();
        const auto terms = loss_integral_rate({m, flat, bm.buffer, h});
        CHECK(terms.kernel_integral == 0.0);
        CHECK(terms.loss_rate == doctest::Approx(bm.loss_rate()).epsilon(1e-6));
    }

    TEST_CASE("flat barrier M/M/1: the integral formula reproduces the exact loss rate") {
        for (auto [lambda, mu, k] : {std::array{1.0, 2.0, 3.0}, {2.0, 3.0, 4.0}, {0.5, 1.5, 1.5}}) {
            const oracle::MM1FlatBuffer exact{lambda, mu, k};
            auto cell = [&](double lo, double hi) { return exact.tail(lo) - exact.tail(hi); };
            auto evaluate = [&](std::size_t bins) {
                const StationaryHistogram h(flat_histogram(bins, k, exact.idle_mass(), cell));
                const auto flat = PeriodicBarrier::zero();
                return loss_integral_rate({mm1(lambda, mu), flat, k, h}).loss_rate;
            };
            const double fine = evaluate(4000);
            CHECK(fine == doctest::Approx(exact.loss_rate()).epsilon(1e-5));
            const double coarse = evaluate(100);
            CHECK(std::abs(coarse - evaluate(200)) < 0.02 * fine);
        }
    }

    TEST_CASE("M/M/1 sawtooth constant: both routes against the closed form") {
        for (auto [lambda, mu, a] : {std::array{1.0, 2.0, 1.0}, {1.0, 3.0, 0.25}, {2.0, 3.0, 1.0}, {0.4, 1.0, 2.0}}) {
            const double g = mu - lambda;
            const double d0 = g * lambda / (mu * mu);
            const double c_gamma = std::expm1(g * a) / (g * a);
            const auto c = mm1_saw_constant(lambda, mu, a);
            CHECK(c.gamma == doctest::Approx(g));
            CHECK(c.assembled == doctest::Approx(d0 * c_gamma).epsilon(1e-9));
            CHECK(c.printed == doctest::Approx(g * d0 * c_gamma).epsilon(1e-12));
            CHECK(c.assembled >= d0);
            CHECK(c.assembled <= d0 * std::exp(g * a));
        }
        const auto unit = mm1_saw_constant(1.0, 2.0, 1.0);
        CHECK(std::abs(unit.printed - unit.assembled) < 1e-9);
        CHECK(unit.printed == doctest::Approx(0.4295704571).epsilon(1e-9));
        CHECK_THROWS_AS(mm1_saw_constant(2.0, 2.0, 1.0), ConfigError);
        CHECK_THROWS_AS(mm1_saw_constant(1.0, 2.0, 0.0), ConfigError);
    }

    TEST_CASE("supported route picks the candidate inside the sandwich") {
        const auto c = mm1_saw_constant(1.0, 3.0, 0.25);
        const double d0 = 2.0 / 9.0;
        CHECK(supported_route(c, 0.30, d0, 2.0, 0.25) == "assembled");
        CHECK(supported_route(c, 0.57, d0, 2.0, 0.25) == "assembled");
        CHECK(supported_route({2.0, 0.30, 0.35}, 0.34, d0, 2.0, 0.25) == "assembled");
        CHECK(supported_route({2.0, 0.30, 0.35}, 0.29, d0, 2.0, 0.25) == "printed");
        CHECK(supported_route({2.0, 0.9, 0.1}, 0.3, d0, 2.0, 0.25) == "neither");
    }

    TEST_CASE("asymptote fit recovers exact exponential data") {
        std::vector<LossPoint> pts;
        for (double k : {1.0, 2.0, 3.0, 4.0, 5.0}) pts.push_back({k, 2.0 * std::exp(-1.5 * k), 0.0});
        const auto fit = fit_asymptote(pts, 1.5);
        CHECK(fit.fixed_intercept == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(fit.free_slope == doctest::Approx(-1.5).epsilon(1e-12));
        CHECK(fit.free_intercept == doctest::Approx(2.0).epsilon(1e-12));
        for (double r : fit.log_residuals) CHECK(std::abs(r) < 1e-12);

        std::vector<LossPoint> noisy;
        for (double k : {1.0, 2.0, 3.0, 4.0}) noisy.push_back({k, std::exp(-k), 0.05 * std::exp(-k)});
        noisy.push_back({5.0, std::exp(-5.0), 0.3 * std::exp(-5.0)});
        const auto fit2 = fit_asymptote(noisy, 1.0);
        CHECK(fit2.points.size() == 4);
        CHECK(fit2.free_slope == doctest::Approx(-1.0).epsilon(1e-12));

        noisy[0].half_width = noisy[0].rate;
        CHECK_THROWS_AS(fit_asymptote(noisy, 1.0), InsufficientDataError);
        CHECK_THROWS_AS(fit_asymptote({{1.0, 0.1, 0.0}, {1.0, 0.1, 0.0}, {2.0, 0.01, 0.0}, {3.0, 0.001, 0.0}}, 1.0),
                        InsufficientDataError);
    }

    TEST_CASE("flat-barrier references sandwich the periodic loss rate") {
        const LevyModel m = mm1(1.0, 2.0);
        SimConfig c;
        c.buffer = 4.0;
        c.horizon = 1e5;
        c.seed = 31;
        c.record_histogram = false;
        const auto saw = estimate_loss_rates(m, PeriodicBarrier::sawtooth(1.0), c, 2);
        const auto at_k = constant_barrier_reference(m, 4.0, c, 2);
        const auto below = constant_barrier_reference(m, 3.0, c, 2);
        CHECK(at_k.buffer == 4.0);
        CHECK(below.buffer == 3.0);
        CHECK(not_below(saw.loss, at_k.loss));
        CHECK(not_below(below.loss, saw.loss));
        const oracle::MM1FlatBuffer exact{1.0, 2.0, 3.0};
        CHECK(std::abs(below.loss.rate - exact.loss_rate()) < 3.5 * below.loss.standard_error);
    }

    TEST_CASE("not_below compares confidence intervals") {
        RegulatorRate low{1.0, 0.1, 0.05, 0.0, 1.0};
        RegulatorRate high{1.3, 0.1, 0.05, 0.0, 1.3};
        CHECK(not_below(high, low));
        CHECK_FALSE(not_below(low, high));
        high.rate = 1.15;
        CHECK(not_below(low, high));
    }
}
