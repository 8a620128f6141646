#pragma once

// Run configuration: a JSON document with three blocks plus optional command
// sections, e.g.
//
//   {
//     "model":   {"drift": -1, "sigma": 0, "lambda": 1, "jump": {"kind": "exp_up", "rate": 2}},
//     "barrier": {"kind": "sawtooth", "a": 1},
//     "sim":     {"K": 4, "T": 1e5, "scheme": "event", "seed": 7, "replicas": 4}
//   }
//
// Overrides use dotted paths ("sim.seed=11", "barrier.a=0.5"); the value is
// read as JSON when it parses as JSON and as a plain string otherwise.

#include <reflev/levy_model.hpp>
#include <reflev/periodic_barrier.hpp>
#include <reflev/reflection_sim.hpp>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace reflev {

struct ValidateOptions {
    std::size_t martingale_replicas = 10000;
    std::size_t ks_samples = 100000;
    /// Relative tolerance of the integral-representation loss rate against simulation.
    double integral_tolerance = 0.10;
};

struct SweepOptions {
    /// Also run the flat-barrier references at K and K - a.
    bool reference = false;
    /// Fit a precomputed table (CSV with K, loss rate and CI columns) instead of simulating.
    std::optional<std::string> table;
};

struct RunConfig {
    LevyModel model;
    PeriodicBarrier barrier = PeriodicBarrier::sawtooth(1.0);
    SimConfig sim;
    /// Buffer levels; sim.buffer is set to the first entry.
    std::vector<double> buffers;
    std::size_t replicas = 4;
    /// 0 selects default_worker_count().
    std::size_t workers = 0;
    ValidateOptions validate;
    SweepOptions sweep;
    /// Non-fatal remarks found while parsing (e.g. a coarse grid step).
    std::vector<std::string> warnings;

    std::size_t resolved_workers() const;
    /// Copy of sim with buffer set to K.
    SimConfig sim_at(double buffer) const;
};

/// Parses a JSON document. Throws ConfigError naming the offending key, or
/// the line and column of a syntax error.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});

/// Reads and parses a file; an empty path means "all defaults".
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// The defaults: M/M/1 input (lambda = 1, mu = 2), sawtooth barrier a = 1, K = 4.
RunConfig default_config();

/// lambda and mu when the model is M/M/1 workload input (drift -1, no diffusion,
/// Exp(mu) upward jumps at rate lambda).
std::optional<std::pair<double, double>> as_mm1(const LevyModel& model);

/// a when the barrier is the sawtooth t mod a.
std::optional<double> sawtooth_amplitude(const PeriodicBarrier& barrier);

}  // namespace reflev
