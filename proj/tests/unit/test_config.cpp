#include <doctest.h>

#include <reflev/config.hpp>
#include <reflev/errors.hpp>

#include <string>

using namespace reflev;

namespace {

std::string error_of(const std::string& text, const std::vector<std::string>& overrides = {}) {
    try {
        parse_config(text, overrides);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_SUITE("config") {
    TEST_CASE("defaults") {
        const RunConfig cfg = parse_config("");
        CHECK(cfg.model.drift == -1.0);
        CHECK(cfg.model.intensity == 1.0);
        CHECK(std::get<ExpPositive>(cfg.model.jump).rate == 2.0);
        CHECK(sawtooth_amplitude(cfg.barrier) == 1.0);
        REQUIRE(cfg.buffers.size() == 1);
        CHECK(cfg.sim.buffer == 4.0);
        CHECK(cfg.sim.horizon == 1e5);
        CHECK(cfg.sim.scheme == Scheme::kEvent);
        CHECK(cfg.warnings.empty());
        CHECK(as_mm1(cfg.model) == std::pair{1.0, 2.0});
        CHECK(load_config("").sim.seed == cfg.sim.seed);
    }

    TEST_CASE("full document with comments") {
        const RunConfig cfg = parse_config(R"({
            // two-sided input on a custom barrier
            "model": {"drift": -0.5, "sigma": 0.3, "lambda": 1,
                      "jump": {"kind": "two_sided", "p_up": 0.4, "rate_up": 2, "rate_down": 1}},
            "barrier": {"kind": "pieces", "pieces": [{"t0": 0, "t1": 1, "c": 0, "b": 1},
                                                      {"t0": 1, "t1": 3, "c": 1, "b": -0.5}]},
            "sim": {"K_list": [3, 4, 5, 6], "T": 2e4, "T_b": 500, "scheme": "grid", "h": 1e-3,
                    "seed": 99, "replicas": 1e1, "workers": 2, "v_bins": 50, "a_bins": 5,
                    "batches": 16, "initial_level": 2.5, "histogram": false},
            "validate": {"martingale_replicas": 500, "ks_samples": 1000, "integral_tolerance": 0.2},
            "sweep": {"reference": true, "table": "t.csv"}
        })");
        const auto& j = std::get<TwoSidedExp>(cfg.model.jump);
        CHECK(j.p_up == 0.4);
        CHECK(cfg.model.sigma == 0.3);
        CHECK(cfg.barrier.period() == 3.0);
        CHECK(cfg.barrier.amplitude() == 1.0);
        CHECK(cfg.buffers == std::vector<double>{3, 4, 5, 6});
        CHECK(cfg.sim.buffer == 3.0);
        CHECK(cfg.sim_at(5.0).buffer == 5.0);
        CHECK(cfg.sim.burn_in == 500.0);
        CHECK(cfg.sim.scheme == Scheme::kGrid);
        CHECK(cfg.sim.seed == 99);
        CHECK(cfg.replicas == 10);
        CHECK(cfg.workers == 2);
        CHECK(cfg.resolved_workers() == 2);
        CHECK(cfg.sim.v_bins == 50);
        CHECK(cfg.sim.batches == 16);
        CHECK(cfg.sim.initial_level == 2.5);
        CHECK_FALSE(cfg.sim.record_histogram);
        CHECK(cfg.validate.martingale_replicas == 500);
        CHECK(cfg.validate.integral_tolerance == 0.2);
        CHECK(cfg.sweep.reference);
        CHECK(cfg.sweep.table == "t.csv");
        CHECK_FALSE(as_mm1(cfg.model));
        CHECK_FALSE(sawtooth_amplitude(cfg.barrier));
    }

    TEST_CASE("presets and barrier kinds") {
        const auto cfg = parse_config(R"({"model": {"preset": "mm1", "lambda": 1, "mu": 3},
                                           "barrier": {"kind": "three_ramp"}})");
        CHECK(as_mm1(cfg.model) == std::pair{1.0, 3.0});
        CHECK(cfg.barrier.period() == 2.5);
        CHECK(parse_config(R"({"barrier": {"kind": "zero", "period": 2}})").barrier.amplitude() == 0.0);
        CHECK(sawtooth_amplitude(parse_config(R"({"barrier": {"a": 0.25}})").barrier) == 0.25);
        const auto point = parse_config(R"({"model": {"drift": -2, "lambda": 1, "jump": {"kind": "point", "size": 1}}})");
        CHECK(std::get<PointMass>(point.model.jump).size == 1.0);
        const auto down = parse_config(R"({"model": {"drift": 0.5, "lambda": 1, "jump": {"kind": "exp_down", "rate": 1}}})");
        CHECK(std::get<ExpNegative>(down.model.jump).rate == 1.0);
        const auto bm = parse_config(R"({"model": {"drift": -1, "sigma": 1}, "sim": {"scheme": "grid", "h": 1e-3}})");
        CHECK_FALSE(bm.model.has_jumps());
    }

    TEST_CASE("overrides") {
        const auto cfg = parse_config(R"({"sim": {"K_list": [3, 4, 5, 6]}})",
                                      {"sim.K=7", "sim.seed=11", "barrier.a=0.5", "sim.scheme=grid", "sim.h=0.001"});
        CHECK(cfg.buffers == std::vector<double>{7.0});
        CHECK(cfg.sim.seed == 11);
        CHECK(sawtooth_amplitude(cfg.barrier) == 0.5);
        CHECK(cfg.sim.scheme == Scheme::kGrid);
        const auto list = parse_config(R"({"sim": {"K": 3}})", {"sim.K_list=[2,3,4,5]"});
        CHECK(list.buffers.size() == 4);
        const auto fresh = parse_config("", {"model.preset=mm1", "model.lambda=0.5", "model.mu=1"});
        CHECK(as_mm1(fresh.model) == std::pair{0.5, 1.0});
        CHECK(contains(error_of("", {"sim.seed"}), "expected key=value"));
        CHECK(contains(error_of("", {"sim..seed=1"}), "empty key segment"));
        CHECK(contains(error_of("", {"sim.seed=abc"}), "sim.seed"));
    }

    TEST_CASE("errors name the offending key") {
        CHECK(contains(error_of(R"({"sim": {"bogus": 1}})"), "'sim.bogus': unknown key"));
        CHECK(contains(error_of(R"({"extra": 1})"), "'extra': unknown key"));
        CHECK(contains(error_of(R"({"model": {"drift": "x"}})"), "'model.drift': expected a number"));
        CHECK(contains(error_of(R"({"model": {"lambda": 1}})"), "'model.jump'"));
        CHECK(contains(error_of(R"({"model": {"lambda": 1, "jump": {"kind": "cauchy"}}})"), "model.jump.kind"));
        CHECK(contains(error_of(R"({"model": {"lambda": 1, "jump": {"kind": "exp_up", "rate": -1}}})"), "'model'"));
        CHECK(contains(error_of(R"({"model": {"preset": "mg1"}})"), "model.preset"));
        CHECK(contains(error_of(R"({"barrier": {"kind": "spiral"}})"), "barrier.kind"));
        CHECK(contains(error_of(R"({"barrier": {"kind": "pieces", "pieces": [{"t0": 0, "t1": 1, "c": 0}]}})"),
                       "barrier.pieces[0].b"));
        CHECK(contains(error_of(R"({"barrier": {"kind": "pieces", "pieces": [{"t0": 0.5, "t1": 1, "c": 0, "b": 0}]}})"),
                       "'barrier'"));
        CHECK(contains(error_of(R"({"sim": {"K": 3, "K_list": [3]}})"), "sim.K_list"));
        CHECK(contains(error_of(R"({"sim": {"K_list": []}})"), "sim.K_list"));
        CHECK(contains(error_of(R"({"sim": {"scheme": "exact"}})"), "sim.scheme"));
        CHECK(contains(error_of(R"({"sim": {"replicas": 0}})"), "sim.replicas"));
        CHECK(contains(error_of(R"({"sim": {"seed": 1.5}})"), "sim.seed"));
        CHECK(contains(error_of(R"({"sim": {"mutation": "flip"}})"), "sim.mutation"));
        CHECK(contains(error_of(R"({"sim": {"K": 0.5}})"), "'sim'"));
        CHECK(contains(error_of(R"({"sim": {"T": 10}})"), "burn-in"));
        CHECK(contains(error_of(R"({"validate": {"martingale_replicas": 1}})"), "validate.martingale_replicas"));
        CHECK(contains(error_of(R"({"sweep": {"reference": 1}})"), "sweep.reference"));
        CHECK(contains(error_of("[1, 2]"), "top level"));
        CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
    }

    TEST_CASE("syntax errors report line and column") {
        const std::string e = error_of("{\n  \"sim\": {\"K\": 3,}\n}");
        CHECK(contains(e, "config syntax"));
        CHECK(contains(e, "line 2"));
        CHECK(contains(e, "column"));
    }

    TEST_CASE("warnings") {
        const auto mismatch = parse_config(R"({"model": {"drift": -1, "sigma": 0.5}})");
        REQUIRE(mismatch.warnings.size() == 1);
        CHECK(contains(mismatch.warnings[0], "event scheme requires sigma = 0"));
        const auto coarse = parse_config(R"({"sim": {"scheme": "grid", "h": 0.1}})");
        REQUIRE(coarse.warnings.size() == 1);
        CHECK(contains(coarse.warnings[0], "grid step"));
        CHECK(parse_config(R"({"sim": {"scheme": "grid", "h": 0.001}})").warnings.empty());
    }
}
