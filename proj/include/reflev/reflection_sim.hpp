#pragma once

// Paths of V_t = X_t + L^A_t - L^K_t kept inside [A_t, K] by the minimal
// regulators L^A (push up at the moving lower barrier) and L^K (loss at the
// buffer level K).
//
// Two schemes share one jump stream:
//  * event: sigma == 0 only. Between Poisson epochs and barrier-piece ends both
//    V and A are affine, so contact and detachment times are solved exactly.
//  * grid: fixed step h (split at piece ends). Free increment, then a single
//    clamp to [A_{t+h}, K]. Clamps in a step that contains a jump are booked as
//    jump parts of the regulator, all others as continuous parts.

#include <reflev/levy_model.hpp>
#include <reflev/periodic_barrier.hpp>
#include <reflev/rng.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace reflev {

enum class Scheme { kEvent, kGrid };

/// Deliberate defects for negative-control tests.
enum class Mutation {
    kNone,
    /// The state is clamped before the jump is added; the jump overshoot is then
    /// removed without being booked on either regulator.
    kReversedClamp,
};

enum class Contact { kNone, kLower, kUpper };
enum class Side { kLower, kUpper };
enum class Part { kContinuous, kJump };

struct SimConfig {
    double buffer = 1.0;   // K
    double horizon = 1.0;  // T, burn-in included
    /// T_b; negative selects default_burn_in().
    double burn_in = -1.0;
    double grid_step = 1e-3;
    Scheme scheme = Scheme::kEvent;
    std::uint64_t seed = 1;
    std::size_t batches = 32;
    std::size_t v_bins = 200;
    std::size_t a_bins = 20;
    bool record_histogram = true;
    /// Starting level; defaults to the barrier level at time 0.
    std::optional<double> initial_level;
    Mutation mutation = Mutation::kNone;

    /// Throws ConfigError for K <= a, T_b >= T, a non-positive step, or the
    /// event scheme combined with sigma > 0.
    void validate(const LevyModel& model, const PeriodicBarrier& barrier) const;
    double effective_burn_in(const LevyModel& model, const PeriodicBarrier& barrier) const;
};

/// max(50 / |E X_1|, 20 periods).
double default_burn_in(const LevyModel& model, const PeriodicBarrier& barrier);

/// Piece of path on which V and A are both affine.
struct Segment {
    double duration;
    double v_start;
    double v_slope;
    double a_start;
    double a_slope;
    Contact contact;
    /// d/dt of the continuous regulator on the contact side (0 when free).
    double push_rate;

    double v_end() const { return v_start + v_slope * duration; }
    double a_end() const { return a_start + a_slope * duration; }
};

class PathObserver {
public:
    virtual ~PathObserver() = default;
    virtual void on_segment(const Segment&) {}
    /// Discrete regulator increment; `level` is the state right after the push.
    virtual void on_regulation(Side, Part, double /*amount*/, double /*level*/) {}
    /// Free increment of X (drift, diffusion or a jump).
    virtual void on_increment(double) {}
};

/// Occupation time over (V, A) cells. Rows 0..v_bins-1 are uniform V-bins on
/// [0, K]; row v_bins holds time spent in contact V = A. Columns are uniform
/// A-bins on [0, a] (a single column for a flat zero barrier).
class OccupationHistogram {
public:
    OccupationHistogram() = default;
    OccupationHistogram(std::size_t v_bins, std::size_t a_bins, double buffer, double amplitude);

    void add(const Segment& seg);
    void merge(const OccupationHistogram& other);

    std::size_t v_bins() const { return v_bins_; }
    std::size_t a_bins() const { return a_bins_; }
    std::size_t contact_row() const { return v_bins_; }
    double buffer() const { return buffer_; }
    double amplitude() const { return amplitude_; }
    double v_width() const { return buffer_ / static_cast<double>(v_bins_); }
    double a_width() const { return amplitude_ / static_cast<double>(a_bins_); }

    double joint(std::size_t row, std::size_t col) const { return joint_[row * a_bins_ + col]; }
    /// Directly accumulated V-marginal, v_bins + 1 entries (last = contact).
    const std::vector<double>& v_marginal() const { return v_marginal_; }
    double total() const;
    bool empty() const { return joint_.empty(); }

    std::size_t v_bin(double v) const;
    std::size_t a_bin(double a) const;

private:
    void deposit(std::size_t row, std::size_t col, double dt);

    std::size_t v_bins_ = 0;
    std::size_t a_bins_ = 0;
    double buffer_ = 0.0;
    double amplitude_ = 0.0;
    std::vector<double> joint_;
    std::vector<double> v_marginal_;
    std::vector<double> crossings_;
};

/// Regulator totals over one batch of the measurement window.
struct BatchTotals {
    double duration = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double barrier_work = 0.0;  // int A dL^A
};

struct PathAccumulators {
    double duration = 0.0;
    double lower_continuous = 0.0;
    double lower_jump = 0.0;
    double upper_continuous = 0.0;
    double upper_jump = 0.0;
    double lower_jump_squares = 0.0;
    double upper_jump_squares = 0.0;
    double barrier_work = 0.0;    // int A_s dL^A_s
    double level_integral = 0.0;  // int V_s ds
    double x_increment = 0.0;     // X_T - X_{T_b}
    std::uint64_t lower_jump_events = 0;
    std::uint64_t upper_jump_events = 0;
    /// Largest excursion of V outside [A, K] seen at a segment end.
    double containment_violation = 0.0;
    /// Regulator increments (discrete or push rates) that were negative.
    std::uint64_t negative_regulations = 0;
    // After a merge these three hold sums over replicas, which keeps
    // balance_residual() meaningful for merged totals.
    double v_start = 0.0;
    double v_end = 0.0;
    double barrier_end = 0.0;
    OccupationHistogram histogram;
    std::vector<BatchTotals> batches;

    double lower_total() const { return lower_continuous + lower_jump; }
    double upper_total() const { return upper_continuous + upper_jump; }
    /// (V_T - V_0) - (X_T - X_0 + L^A - L^K); zero up to rounding for an exact path.
    double balance_residual() const;
    /// |X increment| + L^A + L^K, the scale for relative balance tolerances.
    double balance_scale() const;
    bool finite() const;
    /// Additive merge of totals and histograms; batch lists are concatenated.
    void merge(const PathAccumulators& other);
};

/// Observer that books everything into PathAccumulators (and one batch).
class Recorder : public PathObserver {
public:
    Recorder(PathAccumulators& acc, BatchTotals* batch, double buffer)
        : acc_(acc), batch_(batch), buffer_(buffer) {}
    void on_segment(const Segment& seg) override;
    void on_regulation(Side side, Part part, double amount, double level) override;
    void on_increment(double dx) override { acc_.x_increment += dx; }

private:
    PathAccumulators& acc_;
    BatchTotals* batch_;
    double buffer_;
};

/// One replica of the doubly reflected process.
class ReflectedPath {
public:
    ReflectedPath(const LevyModel& model, const PeriodicBarrier& barrier, const SimConfig& cfg,
                  std::uint64_t replica);

    void advance(double duration, PathObserver& obs);

    double time() const { return time_; }
    double level() const { return level_; }
    double phase() const { return phase_; }
    double barrier_level() const;
    Contact contact() const { return contact_; }

private:
    void advance_event(double duration, PathObserver& obs);
    void advance_grid(double duration, PathObserver& obs);
    void apply_jump(PathObserver& obs);
    void cross_piece_boundary(PathObserver& obs);
    void clamp_and_book(double free_level, double barrier, Part part, PathObserver& obs);

    const LevyModel& model_;
    const PeriodicBarrier& barrier_;
    SimConfig cfg_;
    Rng jump_rng_;
    Rng diffusion_rng_;
    double time_ = 0.0;
    double phase_ = 0.0;
    std::size_t piece_ = 0;
    double level_ = 0.0;
    Contact contact_ = Contact::kNone;
    double next_jump_ = 0.0;
};

/// Runs burn-in, then the measurement window [T_b, T] split into cfg.batches batches.
PathAccumulators simulate(const LevyModel& model, const PeriodicBarrier& barrier,
                          const SimConfig& cfg, std::uint64_t replica = 0);

/// M_t of the Kella-Whitt martingale along one path, split into its seven terms.
struct MartingaleSample {
    double alpha = 0.0;
    double time = 1.0;
    /// kappa * occupation, e^{aV_0}, -e^{aV_t}, lower continuous, lower jumps,
    /// upper continuous, upper jumps; the value is their sum.
    std::array<double, 7> terms{};
    double value = 0.0;
};

/// Observer accumulating the seven martingale terms for a fixed alpha.
class MartingaleObserver : public PathObserver {
public:
    MartingaleObserver(const LevyModel& model, double buffer, double alpha);
    void on_segment(const Segment& seg) override;
    void on_regulation(Side side, Part part, double amount, double level) override;
    MartingaleSample finish(double v_start, double v_end, double elapsed) const;

private:
    double alpha_;
    double kappa_;
    double buffer_;
    double exp_buffer_;
    double occupation_ = 0.0;
    double lower_cont_ = 0.0;
    double lower_jump_ = 0.0;
    double upper_cont_ = 0.0;
    double upper_jump_ = 0.0;
};

/// Burn-in of cfg's length from the replica's own stream, then M_t over [0, t].
MartingaleSample martingale_statistic(const LevyModel& model, const PeriodicBarrier& barrier,
                                      const SimConfig& cfg, double alpha, std::uint64_t replica,
                                      double t = 1.0);

}  // namespace reflev
