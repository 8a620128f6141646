#pragma once

// Steady-state estimators over independent replicas (batch means for the
// confidence intervals) and the validation identities that hold in stationarity.

#include <reflev/levy_model.hpp>
#include <reflev/periodic_barrier.hpp>
#include <reflev/reflection_sim.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace reflev {

/// Two-sided 95% normal quantile used for every reported half-width.
inline constexpr double kZ95 = 1.959963984540054;

struct RegulatorRate {
    double rate = 0.0;
    double half_width = 0.0;
    double standard_error = 0.0;
    double continuous = 0.0;
    double jump = 0.0;
};

struct LossRateReport {
    double buffer = 0.0;
    RegulatorRate loss;   // l^K
    RegulatorRate lower;  // l^A
    double effective_horizon = 0.0;
    std::size_t replicas = 0;
    std::size_t batch_count = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
};

/// Runs `replicas` independent replicas and merges them in replica order.
PathAccumulators run_replicas(const LevyModel& model, const PeriodicBarrier& barrier,
                              const SimConfig& cfg, std::size_t replicas, std::size_t workers);

LossRateReport loss_rate_report(const PathAccumulators& acc, const SimConfig& cfg,
                                std::size_t replicas);

/// Requires E X_1 < 0.
LossRateReport estimate_loss_rates(const LevyModel& model, const PeriodicBarrier& barrier,
                                   const SimConfig& cfg, std::size_t replicas,
                                   std::size_t workers = 1);

/// Normalized (V, A) occupation. Row `contact_row()` is the contact set V = A.
class StationaryHistogram {
public:
    /// Throws InsufficientDataError when the occupation is empty.
    explicit StationaryHistogram(const OccupationHistogram& occupation);

    std::size_t v_bins() const { return v_bins_; }
    std::size_t a_bins() const { return a_bins_; }
    std::size_t contact_row() const { return v_bins_; }
    std::size_t rows() const { return v_bins_ + 1; }
    double buffer() const { return buffer_; }
    double amplitude() const { return amplitude_; }

    double mass(std::size_t row, std::size_t col) const { return joint_[row * a_bins_ + col]; }
    /// V-range of a cell; contact cells inherit the A-range of their column.
    std::pair<double, double> v_range(std::size_t row, std::size_t col) const;
    std::pair<double, double> a_range(std::size_t col) const;
    double v_mid(std::size_t row, std::size_t col) const;
    double a_mid(std::size_t col) const;

    /// Sum over columns of the joint masses (v_bins + 1 entries, last = contact).
    std::vector<double> v_marginal_from_joint() const;
    /// Independently accumulated V-marginal.
    const std::vector<double>& v_marginal() const { return v_marginal_; }
    std::vector<double> a_marginal() const;
    /// pi_K^z for the A-bin `col`; sums to 1 when the column carries mass.
    std::vector<double> conditional(std::size_t col) const;
    /// int x pi_K(dx) with x at cell midpoints.
    double mean_level() const;
    /// P(V > x) by cell, partial cells interpolated linearly.
    double tail(double x) const;
    double contact_mass() const;

private:
    std::size_t v_bins_;
    std::size_t a_bins_;
    double buffer_;
    double amplitude_;
    std::vector<double> joint_;
    std::vector<double> v_marginal_;
};

StationaryHistogram stationary_histogram(const PathAccumulators& acc);

/// Outcome of a residual check: pass iff |residual| <= 3 SE (or <= exact_tol).
struct ResidualCheck {
    double residual = 0.0;
    double standard_error = 0.0;
    bool pass = false;
};

/// l^A - l^K + E X_1, SE from the batch series.
ResidualCheck balance_check(const PathAccumulators& acc, const LevyModel& model,
                            double exact_tol = 0.0);

/// (int A dL^A)/T - E A_0 * l^A, SE from the batch series.
ResidualCheck barrier_work_check(const PathAccumulators& acc, const PeriodicBarrier& barrier,
                                 double exact_tol = 0.0);

struct ZeroMeanTest {
    double alpha = 0.0;
    double mean = 0.0;
    double standard_error = 0.0;
    std::size_t replicas = 0;
    std::array<double, 7> term_means{};
    bool pass = false;
};

/// Sample mean of M_1 over stationary-start replicas; passes when |mean| <= 3 SE.
ZeroMeanTest martingale_zero_mean(const LevyModel& model, const PeriodicBarrier& barrier,
                                  const SimConfig& cfg, double alpha, std::size_t replicas,
                                  std::size_t workers = 1);

/// Kolmogorov-Smirnov distance between the histogram's A-marginal and xi,
/// evaluated at the A-bin edges.
double phase_marginal_ks(const StationaryHistogram& hist, const PeriodicBarrier& barrier);

/// KS distance between n draws of phi(t + U) and xi. Draws come from the
/// auxiliary stream of (seed, replica 0).
double phase_sample_ks(const PeriodicBarrier& barrier, double t, std::size_t n, std::uint64_t seed);

/// Mean and standard error of a sample (SE = sd / sqrt(n)).
std::pair<double, double> mean_and_standard_error(const std::vector<double>& xs);

}  // namespace reflev
