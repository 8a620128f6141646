#include <doctest.h>

#include <reflev/errors.hpp>
#include <reflev/estimation.hpp>
#include <reflev/reflection_sim.hpp>

#include <cmath>
#include <cstring>
#include <vector>

using namespace reflev;

namespace {

LevyModel mm1() {
    LevyModel m;
    m.drift = -1.0;
    m.intensity = 1.0;
    m.jump = ExpPositive{2.0};
    return m;
}

LevyModel deterministic() {
    LevyModel m;
    m.drift = -1.0;
    return m;
}

LevyModel two_sided(double sigma) {
    LevyModel m;
    m.drift = -0.5;
    m.sigma = sigma;
    m.intensity = 1.0;
    m.jump = TwoSidedExp{0.5, 1.0, 1.0};
    return m;
}

// Flat at 0 on [0,1), jumps up to 1 at t = 1, then ramps down to 1/2.
PeriodicBarrier step_barrier() {
    return PeriodicBarrier({{0.0, 1.0, 0.0, 0.0}, {1.0, 2.0, 1.0, -0.5}});
}

SimConfig config(double k, double horizon, Scheme scheme = Scheme::kEvent) {
    SimConfig c;
    c.buffer = k;
    c.horizon = horizon;
    c.scheme = scheme;
    c.seed = 9;
    return c;
}

// Checks every segment and discrete push against A <= V <= K.
class Auditor : public PathObserver {
public:
    explicit Auditor(double buffer) : buffer_(buffer) {}
    void on_segment(const Segment& s) override {
        worst = std::max({worst, s.a_start - s.v_start, s.a_end() - s.v_end(), s.v_start - buffer_,
                          s.v_end() - buffer_});
        if (s.push_rate > 0.0 && s.contact == Contact::kLower) pushed_off_contact |= s.v_start != s.a_start;
        if (s.push_rate < 0.0) ++negative;
        if (s.contact == Contact::kLower) {
            lower_cont += s.push_rate * s.duration;
            contact_time += s.duration;
        }
    }
    void on_regulation(Side side, Part, double amount, double level) override {
        if (amount < 0.0) ++negative;
        if (side == Side::kUpper) worst = std::max(worst, std::abs(level - buffer_));
        ++pushes;
    }
    double worst = 0.0;
    bool pushed_off_contact = false;
    int negative = 0;
    int pushes = 0;
    double lower_cont = 0.0;
    double contact_time = 0.0;

private:
    double buffer_;
};

class FirstPush : public PathObserver {
public:
    void on_regulation(Side side, Part part, double amount, double level) override {
        if (seen) return;
        seen = true;
        this->side = side;
        this->part = part;
        this->amount = amount;
        this->level = level;
    }
    bool seen = false;
    Side side = Side::kLower;
    Part part = Part::kContinuous;
    double amount = 0.0;
    double level = 0.0;
};

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_SUITE("reflection_sim") {
    TEST_CASE("deterministic descent meets the sawtooth and rides it") {
        const auto saw = PeriodicBarrier::sawtooth(1.0);
        SimConfig c = config(2.0, 100.0);
        c.initial_level = 2.0;
        const LevyModel model = deterministic();
        ReflectedPath path(model, saw, c, 0);
        Auditor audit(2.0);
        // V_t = 2 - t cannot meet A_t < 1 before t = 1 and must have met it by t = 2.
        path.advance(1.0, audit);
        CHECK(audit.contact_time == 0.0);
        path.advance(2.0, audit);
        CHECK(audit.contact_time > 0.0);
        CHECK(audit.worst <= 1e-12);
        CHECK_FALSE(audit.pushed_off_contact);
        // While riding, L^A grows at rate b - d = 2.
        CHECK(audit.lower_cont == doctest::Approx(2.0 * audit.contact_time).epsilon(1e-12));
        if (path.contact() == Contact::kLower)
            CHECK(path.level() == doctest::Approx(saw.value(path.phase())).epsilon(1e-12));
    }

    TEST_CASE("deterministic steady state: l_A = 1, no loss, half the time in contact") {
        const auto saw = PeriodicBarrier::sawtooth(1.0);
        SimConfig c = config(2.0, 50.0 + 64.0);
        c.batches = 32;
        const PathAccumulators acc = simulate(deterministic(), saw, c, 0);
        CHECK(acc.upper_total() == 0.0);
        CHECK(acc.lower_total() / acc.duration == doctest::Approx(1.0).epsilon(1e-12));
        // Each period: ride from 1/2 to 1 (contact, length 1/2), then fall freely.
        const StationaryHistogram h(acc.histogram);
        CHECK(h.contact_mass() == doctest::Approx(0.5).epsilon(1e-12));
        // int A dL^A per period = int_{1/2}^{1} 2 z dz = 3/4.
        CHECK(acc.barrier_work / acc.duration == doctest::Approx(0.75).epsilon(1e-12));
    }

    TEST_CASE("single jump over K books the overshoot as loss") {
        LevyModel m;
        m.intensity = 1.0;
        m.jump = PointMass{3.0};
        SimConfig c = config(2.0, 10.0);
        c.initial_level = 1.0;
        const auto flat = PeriodicBarrier::zero();
        ReflectedPath path(m, flat, c, 0);
        FirstPush first;
        while (!first.seen) path.advance(1.0, first);
        CHECK(first.side == Side::kUpper);
        CHECK(first.part == Part::kJump);
        CHECK(first.amount == doctest::Approx(3.0 - (2.0 - 1.0)));
        CHECK(first.level == 2.0);
    }

    TEST_CASE("M/M/1 input never pushes continuously at K") {
        SimConfig c = config(3.0, 20000.0);
        const auto acc = simulate(mm1(), PeriodicBarrier::sawtooth(1.0), c, 0);
        CHECK(acc.upper_continuous == 0.0);
        CHECK(acc.upper_jump > 0.0);
    }

    TEST_CASE("containment, monotonicity and pathwise balance on every scheme") {
        struct Case {
            LevyModel model;
            PeriodicBarrier barrier;
            Scheme scheme;
        };
        LevyModel down;
        down.drift = 0.2;
        down.intensity = 1.0;
        down.jump = ExpNegative{1.0};
        const Case cases[] = {
            {mm1(), PeriodicBarrier::sawtooth(1.0), Scheme::kEvent},
            {two_sided(0.0), PeriodicBarrier::three_ramp(), Scheme::kEvent},
            {down, step_barrier(), Scheme::kEvent},
            {two_sided(0.5), PeriodicBarrier::sawtooth(1.0), Scheme::kGrid},
            {mm1(), PeriodicBarrier::three_ramp(), Scheme::kGrid},
        };
        for (const auto& cs : cases) {
            SimConfig c = config(4.0, 3000.0, cs.scheme);
            c.grid_step = 1e-2;
            const auto acc = simulate(cs.model, cs.barrier, c, 1);
            CHECK(acc.containment_violation <= 1e-9);
            CHECK(acc.negative_regulations == 0);
            CHECK(std::abs(acc.balance_residual()) <= 1e-9 * acc.balance_scale());

            ReflectedPath path(cs.model, cs.barrier, c, 2);
            Auditor audit(4.0);
            path.advance(500.0, audit);
            CHECK(audit.worst <= 1e-9);
            CHECK(audit.negative == 0);
            CHECK_FALSE(audit.pushed_off_contact);
        }
    }

    TEST_CASE("grid scheme converges to the event scheme at first order") {
        const auto saw = PeriodicBarrier::sawtooth(1.0);
        SimConfig c = config(2.0, 1e5 + 100.0);
        c.record_histogram = false;
        const double exact = estimate_loss_rates(mm1(), saw, c, 2).loss.rate;
        c.scheme = Scheme::kGrid;
        std::vector<double> gaps;
        for (double h : {0.04, 0.02, 0.01}) {
            c.grid_step = h;
            gaps.push_back(std::abs(estimate_loss_rates(mm1(), saw, c, 2).loss.rate - exact));
        }
        for (std::size_t i = 0; i + 1 < gaps.size(); ++i) {
            const double ratio = gaps[i] / gaps[i + 1];
            CHECK(ratio > 1.5);
            CHECK(ratio < 2.5);
        }
    }

    TEST_CASE("identical seeds give bit-identical accumulators") {
        SimConfig c = config(3.0, 5000.0);
        const auto a = simulate(mm1(), PeriodicBarrier::sawtooth(1.0), c, 4);
        const auto b = simulate(mm1(), PeriodicBarrier::sawtooth(1.0), c, 4);
        CHECK(same_bits(a.upper_jump, b.upper_jump));
        CHECK(same_bits(a.lower_continuous, b.lower_continuous));
        CHECK(same_bits(a.barrier_work, b.barrier_work));
        CHECK(same_bits(a.level_integral, b.level_integral));
        for (std::size_t i = 0; i < a.histogram.v_bins(); ++i) CHECK(same_bits(a.histogram.joint(i, 3), b.histogram.joint(i, 3)));
        const auto other = simulate(mm1(), PeriodicBarrier::sawtooth(1.0), c, 5);
        CHECK_FALSE(same_bits(a.upper_jump, other.upper_jump));
    }

    TEST_CASE("occupation mass equals the measurement window") {
        SimConfig c = config(4.0, 4000.0, Scheme::kGrid);
        c.grid_step = 0.01;
        for (Scheme s : {Scheme::kEvent, Scheme::kGrid}) {
            c.scheme = s;
            const auto acc = simulate(mm1(), PeriodicBarrier::three_ramp(), c, 0);
            const double window = c.horizon - c.effective_burn_in(mm1(), PeriodicBarrier::three_ramp());
            CHECK(acc.histogram.total() == doctest::Approx(window).epsilon(1e-9));
            CHECK(acc.duration == doctest::Approx(window).epsilon(1e-9));
            double direct = 0.0;
            for (double m : acc.histogram.v_marginal()) direct += m;
            CHECK(direct == doctest::Approx(window).epsilon(1e-9));
            const StationaryHistogram h(acc.histogram);
            const auto from_joint = h.v_marginal_from_joint();
            for (std::size_t i = 0; i < from_joint.size(); ++i) CHECK(std::abs(from_joint[i] - h.v_marginal()[i]) < 1e-12);
        }
    }

    TEST_CASE("martingale vanishes on a deterministic path without contact") {
        SimConfig c = config(4.0, 10.0);
        c.burn_in = 0.0;
        c.initial_level = 3.0;
        for (double alpha : {0.5, 1.0, -0.7}) {
            const auto s = martingale_statistic(deterministic(), PeriodicBarrier::sawtooth(1.0), c, alpha, 0);
            CHECK(std::abs(s.value) < 1e-12 * std::exp(3.0 * std::abs(alpha)));
            CHECK(s.terms[3] == 0.0);
        }
    }

    TEST_CASE("martingale vanishes on deterministic paths with contact and barrier jumps") {
        for (const auto& barrier : {PeriodicBarrier::sawtooth(1.0), PeriodicBarrier::three_ramp(), step_barrier()}) {
            SimConfig c = config(4.0, 100.0);
            c.burn_in = 0.0;
            c.initial_level = 3.5;
            for (std::uint64_t r = 0; r < 5; ++r) {
                const auto s = martingale_statistic(deterministic(), barrier, c, 0.8, r, 7.0);
                CHECK(std::abs(s.value) < 1e-10);
                CHECK(s.terms[3] > 0.0);
            }
        }
    }

    TEST_CASE("at the Lundberg root the occupation term is zero") {
        SimConfig c = config(4.0, 300.0);
        const double g = lundberg_root(mm1());
        const auto s = martingale_statistic(mm1(), PeriodicBarrier::sawtooth(1.0), c, g, 0);
        CHECK(std::abs(s.terms[0]) < 1e-12);
        CHECK_THROWS_AS(martingale_statistic(mm1(), PeriodicBarrier::sawtooth(1.0), c, 2.5, 0), DomainError);
    }

    TEST_CASE("configuration errors") {
        const auto saw = PeriodicBarrier::sawtooth(1.0);
        SimConfig c = config(4.0, 1000.0);
        CHECK_NOTHROW(c.validate(mm1(), saw));
        c.buffer = 1.0;
        CHECK_THROWS_AS(c.validate(mm1(), saw), ConfigError);
        c = config(4.0, 50.0);
        CHECK_THROWS_AS(c.validate(mm1(), saw), ConfigError);
        c = config(4.0, 1000.0);
        CHECK_THROWS_AS(simulate(two_sided(0.5), saw, c, 0), ConfigError);
        c.scheme = Scheme::kGrid;
        c.grid_step = 0.0;
        CHECK_THROWS_AS(c.validate(two_sided(0.5), saw), ConfigError);
        CHECK(default_burn_in(mm1(), saw) == doctest::Approx(100.0));
        CHECK(default_burn_in(mm1(), PeriodicBarrier::sawtooth(10.0)) == doctest::Approx(200.0));
    }

    TEST_CASE("the reversed-clamp mutation breaks pathwise balance") {
        SimConfig c = config(3.0, 3000.0);
        c.mutation = Mutation::kReversedClamp;
        const auto acc = simulate(mm1(), PeriodicBarrier::sawtooth(1.0), c, 0);
        CHECK(std::abs(acc.balance_residual()) > 1.0);
    }
}
