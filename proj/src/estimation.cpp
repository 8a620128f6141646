#include <reflev/estimation.hpp>

#include <reflev/errors.hpp>
#include <reflev/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

namespace reflev {

std::size_t default_worker_count() {
    if (const char* env = std::getenv("REFLEV_WORKERS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n > 0) return static_cast<std::size_t>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::pair<double, double> mean_and_standard_error(const std::vector<double>& xs) {
    const auto n = static_cast<double>(xs.size());
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

namespace {

template <class Fn>
double batch_standard_error(const std::vector<BatchTotals>& batches, Fn value) {
    std::vector<double> xs;
    xs.reserve(batches.size());
    for (const auto& b : batches)
        if (b.duration > 0.0) xs.push_back(value(b));
    return mean_and_standard_error(xs).second;
}

}  // namespace

PathAccumulators run_replicas(const LevyModel& model, const PeriodicBarrier& barrier,
                              const SimConfig& cfg, std::size_t replicas, std::size_t workers) {
    if (replicas == 0) throw ConfigError("replica count must be positive");
    cfg.validate(model, barrier);
    auto parts = parallel_map(replicas, workers, [&](std::size_t r) {
        return simulate(model, barrier, cfg, r);
    });
    PathAccumulators total = std::move(parts.front());
    for (std::size_t r = 1; r < parts.size(); ++r) total.merge(parts[r]);
    return total;
}

LossRateReport loss_rate_report(const PathAccumulators& acc, const SimConfig& cfg,
                                std::size_t replicas) {
    if (!(acc.duration > 0.0)) throw InsufficientDataError("empty measurement window");
    LossRateReport r;
    r.buffer = cfg.buffer;
    r.effective_horizon = acc.duration;
    r.replicas = replicas;
    r.batch_count = acc.batches.size();
    r.seed = cfg.seed;

    const double t = acc.duration;
    r.loss.continuous = acc.upper_continuous / t;
    r.loss.jump = acc.upper_jump / t;
    r.loss.rate = r.loss.continuous + r.loss.jump;
    r.loss.standard_error =
        batch_standard_error(acc.batches, [](const BatchTotals& b) { return b.upper / b.duration; });
    r.loss.half_width = kZ95 * r.loss.standard_error;

    r.lower.continuous = acc.lower_continuous / t;
    r.lower.jump = acc.lower_jump / t;
    r.lower.rate = r.lower.continuous + r.lower.jump;
    r.lower.standard_error =
        batch_standard_error(acc.batches, [](const BatchTotals& b) { return b.lower / b.duration; });
    r.lower.half_width = kZ95 * r.lower.standard_error;

    if (r.loss.half_width > 0.25 * r.loss.rate) {
        std::ostringstream msg;
        msg << "loss-rate CI half-width exceeds 25% of the estimate at K=" << cfg.buffer;
        r.warnings.push_back(msg.str());
    }
    return r;
}

LossRateReport estimate_loss_rates(const LevyModel& model, const PeriodicBarrier& barrier,
                                   const SimConfig& cfg, std::size_t replicas, std::size_t workers) {
    if (!(mean_x1(model) < 0.0)) throw ConfigError("E X_1 >= 0: no stationary regime");
    return loss_rate_report(run_replicas(model, barrier, cfg, replicas, workers), cfg, replicas);
}

// ---------------------------------------------------------------------------
// StationaryHistogram

StationaryHistogram::StationaryHistogram(const OccupationHistogram& occ)
    : v_bins_(occ.v_bins()), a_bins_(occ.a_bins()), buffer_(occ.buffer()), amplitude_(occ.amplitude()) {
    const double total = occ.empty() ? 0.0 : occ.total();
    if (!(total > 0.0)) throw InsufficientDataError("empty occupation histogram");
    joint_.resize(rows() * a_bins_);
    for (std::size_t i = 0; i < rows(); ++i)
        for (std::size_t j = 0; j < a_bins_; ++j) joint_[i * a_bins_ + j] = occ.joint(i, j) / total;
    v_marginal_ = occ.v_marginal();
    for (auto& m : v_marginal_) m /= total;
}

std::pair<double, double> StationaryHistogram::a_range(std::size_t col) const {
    if (a_bins_ == 1 && amplitude_ == 0.0) return {0.0, 0.0};
    const double w = amplitude_ / static_cast<double>(a_bins_);
    return {w * static_cast<double>(col), w * static_cast<double>(col + 1)};
}

std::pair<double, double> StationaryHistogram::v_range(std::size_t row, std::size_t col) const {
    if (row == contact_row()) return a_range(col);
    const double w = buffer_ / static_cast<double>(v_bins_);
    return {w * static_cast<double>(row), w * static_cast<double>(row + 1)};
}

double StationaryHistogram::v_mid(std::size_t row, std::size_t col) const {
    const auto [lo, hi] = v_range(row, col);
    return 0.5 * (lo + hi);
}

double StationaryHistogram::a_mid(std::size_t col) const {
    const auto [lo, hi] = a_range(col);
    return 0.5 * (lo + hi);
}

std::vector<double> StationaryHistogram::v_marginal_from_joint() const {
    std::vector<double> m(rows(), 0.0);
    for (std::size_t i = 0; i < rows(); ++i)
        for (std::size_t j = 0; j < a_bins_; ++j) m[i] += mass(i, j);
    return m;
}

std::vector<double> StationaryHistogram::a_marginal() const {
    std::vector<double> m(a_bins_, 0.0);
    for (std::size_t i = 0; i < rows(); ++i)
        for (std::size_t j = 0; j < a_bins_; ++j) m[j] += mass(i, j);
    return m;
}

std::vector<double> StationaryHistogram::conditional(std::size_t col) const {
    std::vector<double> c(rows(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < rows(); ++i) total += mass(i, col);
    if (total > 0.0)
        for (std::size_t i = 0; i < rows(); ++i) c[i] = mass(i, col) / total;
    return c;
}

double StationaryHistogram::mean_level() const {
    double m = 0.0;
    for (std::size_t i = 0; i < rows(); ++i)
        for (std::size_t j = 0; j < a_bins_; ++j) m += mass(i, j) * v_mid(i, j);
    return m;
}

double StationaryHistogram::tail(double x) const {
    double p = 0.0;
    for (std::size_t i = 0; i < rows(); ++i)
        for (std::size_t j = 0; j < a_bins_; ++j) {
            const auto [lo, hi] = v_range(i, j);
            if (lo >= x)
                p += mass(i, j);
            else if (hi > x)
                p += mass(i, j) * (hi - x) / (hi - lo);
        }
    return p;
}

double StationaryHistogram::contact_mass() const {
    double m = 0.0;
    for (std::size_t j = 0; j < a_bins_; ++j) m += mass(contact_row(), j);
    return m;
}

StationaryHistogram stationary_histogram(const PathAccumulators& acc) {
    return StationaryHistogram(acc.histogram);
}

// ---------------------------------------------------------------------------
// Identity checks

ResidualCheck balance_check(const PathAccumulators& acc, const LevyModel& model, double exact_tol) {
    const double m = mean_x1(model);
    ResidualCheck c;
    c.residual = (acc.lower_total() - acc.upper_total()) / acc.duration + m;
    c.standard_error = batch_standard_error(
        acc.batches, [&](const BatchTotals& b) { return (b.lower - b.upper) / b.duration + m; });
    c.pass = std::abs(c.residual) <= std::max(3.0 * c.standard_error, exact_tol);
    return c;
}

ResidualCheck barrier_work_check(const PathAccumulators& acc, const PeriodicBarrier& barrier,
                                 double exact_tol) {
    const double mean_a = barrier.mean_level();
    ResidualCheck c;
    c.residual = (acc.barrier_work - mean_a * acc.lower_total()) / acc.duration;
    c.standard_error = batch_standard_error(acc.batches, [&](const BatchTotals& b) {
        return (b.barrier_work - mean_a * b.lower) / b.duration;
    });
    c.pass = std::abs(c.residual) <= std::max(3.0 * c.standard_error, exact_tol);
    return c;
}

ZeroMeanTest martingale_zero_mean(const LevyModel& model, const PeriodicBarrier& barrier,
                                  const SimConfig& cfg, double alpha, std::size_t replicas,
                                  std::size_t workers) {
    if (replicas < 2) throw ConfigError("zero-mean test needs at least two replicas");
    auto samples = parallel_map(replicas, workers, [&](std::size_t r) {
        return martingale_statistic(model, barrier, cfg, alpha, r);
    });
    ZeroMeanTest z;
    z.alpha = alpha;
    z.replicas = replicas;
    std::vector<double> values;
    values.reserve(replicas);
    for (const auto& s : samples) {
        values.push_back(s.value);
        for (std::size_t k = 0; k < s.terms.size(); ++k) z.term_means[k] += s.terms[k];
    }
    for (auto& t : z.term_means) t /= static_cast<double>(replicas);
    std::tie(z.mean, z.standard_error) = mean_and_standard_error(values);
    z.pass = std::abs(z.mean) <= 3.0 * z.standard_error;
    return z;
}

double phase_marginal_ks(const StationaryHistogram& hist, const PeriodicBarrier& barrier) {
    const auto marginal = hist.a_marginal();
    const auto& xi = barrier.invariant_measure();
    double cum = 0.0;
    double ks = 0.0;
    for (std::size_t j = 0; j < marginal.size(); ++j) {
        cum += marginal[j];
        ks = std::max(ks, std::abs(cum - xi.cdf(hist.a_range(j).second)));
    }
    return ks;
}

double phase_sample_ks(const PeriodicBarrier& barrier, double t, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ConfigError("KS test needs at least one sample");
    Rng rng = make_stream(seed, 0, Stream::kAuxiliary);
    std::vector<double> xs(n);
    for (auto& x : xs) x = barrier.value(t + barrier.sample_phase(rng));
    std::sort(xs.begin(), xs.end());
    const auto& xi = barrier.invariant_measure();
    const double total = static_cast<double>(n);
    double ks = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double above = xi.cdf(xs[i]);
        const double below = xi.cdf(std::nextafter(xs[i], -std::numeric_limits<double>::infinity()));
        ks = std::max({ks, static_cast<double>(i + 1) / total - above,
                       below - static_cast<double>(i) / total});
    }
    return ks;
}

}  // namespace reflev
