#include <reflev/periodic_barrier.hpp>

#include <reflev/errors.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace reflev {

bool BarrierPiece::image_contains(double z) const {
    if (flat()) return z == level;
    if (slope > 0.0) return z >= image_lo() && z < image_hi();
    return z > image_lo() && z <= image_hi();
}

double InvariantMeasure::total_mass() const {
    double m = 0.0;
    for (const auto& iv : intervals) m += iv.density * (iv.hi - iv.lo);
    for (const auto& at : atoms) m += at.mass;
    return m;
}

double InvariantMeasure::mass(double lo, double hi) const {
    double m = 0.0;
    for (const auto& iv : intervals) {
        const double l = std::max(lo, iv.lo);
        const double h = std::min(hi, iv.hi);
        if (h > l) m += iv.density * (h - l);
    }
    for (const auto& at : atoms)
        if (at.level >= lo && at.level < hi) m += at.mass;
    return m;
}

double InvariantMeasure::cdf(double y) const {
    double m = 0.0;
    for (const auto& iv : intervals) {
        if (y <= iv.lo) continue;
        m += iv.density * (std::min(y, iv.hi) - iv.lo);
    }
    for (const auto& at : atoms)
        if (at.level <= y) m += at.mass;
    return m;
}

double InvariantMeasure::density(double y) const {
    double d = 0.0;
    for (const auto& iv : intervals)
        if (y >= iv.lo && y < iv.hi) d += iv.density;
    return d;
}

double InvariantMeasure::mean() const {
    double m = 0.0;
    for (const auto& iv : intervals) m += iv.density * 0.5 * (iv.hi * iv.hi - iv.lo * iv.lo);
    for (const auto& at : atoms) m += at.mass * at.level;
    return m;
}

double InvariantMeasure::exp_moment(double gamma) const {
    double m = 0.0;
    for (const auto& iv : intervals) {
        const double width = iv.hi - iv.lo;
        const double integral = gamma == 0.0
                                    ? width
                                    : std::exp(gamma * iv.lo) * std::expm1(gamma * width) / gamma;
        m += iv.density * integral;
    }
    for (const auto& at : atoms) m += at.mass * std::exp(gamma * at.level);
    return m;
}

PeriodicBarrier::PeriodicBarrier(std::vector<BarrierPiece> pieces) : pieces_(std::move(pieces)) {
    if (pieces_.empty()) throw ConfigError("barrier needs at least one piece");
    if (pieces_.front().t_begin != 0.0) throw ConfigError("first barrier piece must start at t=0");
    double lo = pieces_.front().level;
    for (std::size_t k = 0; k < pieces_.size(); ++k) {
        const auto& p = pieces_[k];
        if (!std::isfinite(p.level) || !std::isfinite(p.slope) || !std::isfinite(p.t_end))
            throw ConfigError("barrier piece " + std::to_string(k) + " has non-finite fields");
        if (!(p.t_end > p.t_begin))
            throw ConfigError("barrier piece " + std::to_string(k) + " has an empty interval");
        if (k > 0 && p.t_begin != pieces_[k - 1].t_end)
            throw ConfigError("barrier pieces must be contiguous (piece " + std::to_string(k) + ")");
        lo = std::min(lo, p.image_lo());
        amplitude_ = std::max(amplitude_, p.image_hi());
    }
    if (lo < 0.0) throw ConfigError("barrier must be nonnegative");
    period_ = pieces_.back().t_end;

    std::vector<double> breaks;
    for (const auto& p : pieces_) {
        if (p.flat()) {
            const double w = (p.t_end - p.t_begin) / period_;
            auto it = std::find_if(measure_.atoms.begin(), measure_.atoms.end(),
                                   [&](const Atom& a) { return a.level == p.level; });
            if (it == measure_.atoms.end())
                measure_.atoms.push_back({p.level, w});
            else
                it->mass += w;
            continue;
        }
        breaks.push_back(p.image_lo());
        breaks.push_back(p.image_hi());
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double mid = 0.5 * (breaks[i] + breaks[i + 1]);
        double d = 0.0;
        for (const auto& p : pieces_)
            if (!p.flat() && mid > p.image_lo() && mid < p.image_hi())
                d += 1.0 / (period_ * std::abs(p.slope));
        if (d > 0.0) measure_.intervals.push_back({breaks[i], breaks[i + 1], d});
    }
    std::sort(measure_.atoms.begin(), measure_.atoms.end(),
              [](const Atom& a, const Atom& b) { return a.level < b.level; });
}

PeriodicBarrier PeriodicBarrier::sawtooth(double amplitude) {
    if (!(amplitude > 0.0)) throw ConfigError("sawtooth amplitude must be positive");
    return PeriodicBarrier({{0.0, amplitude, 0.0, 1.0}});
}

PeriodicBarrier PeriodicBarrier::three_ramp() {
    return PeriodicBarrier({
        {0.0, 1.0, 0.0, 1.0},
        {1.0, 1.5, 1.0, -2.0},
        {1.5, 2.5, 0.0, 3.0},
    });
}

PeriodicBarrier PeriodicBarrier::zero(double period) {
    if (!(period > 0.0)) throw ConfigError("barrier period must be positive");
    return PeriodicBarrier({{0.0, period, 0.0, 0.0}});
}

std::size_t PeriodicBarrier::piece_index(double phase) const {
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), phase,
                               [](double t, const BarrierPiece& p) { return t < p.t_begin; });
    if (it == pieces_.begin()) return 0;
    return static_cast<std::size_t>(std::distance(pieces_.begin(), it) - 1);
}

double PeriodicBarrier::value(double t) const {
    double phase = std::fmod(t, period_);
    if (phase < 0.0) phase += period_;
    return pieces_[piece_index(phase)].value_at(phase);
}

std::vector<double> PeriodicBarrier::phase_weights(double z) const {
    std::vector<double> w(pieces_.size(), 0.0);
    double total = 0.0;
    // Flat pieces carry positive xi-mass at their level and dominate any density.
    for (std::size_t k = 0; k < pieces_.size(); ++k)
        if (pieces_[k].flat() && pieces_[k].level == z) {
            w[k] = pieces_[k].t_end - pieces_[k].t_begin;
            total += w[k];
        }
    if (total == 0.0) {
        for (std::size_t k = 0; k < pieces_.size(); ++k)
            if (!pieces_[k].flat() && pieces_[k].image_contains(z)) {
                w[k] = 1.0 / std::abs(pieces_[k].slope);
                total += w[k];
            }
    }
    if (total == 0.0) throw DomainError("no barrier piece attains level " + std::to_string(z));
    for (auto& x : w) x /= total;
    return w;
}

double PeriodicBarrier::sample_phase(Rng& rng) const {
    return std::uniform_real_distribution<double>(0.0, period_)(rng);
}

}  // namespace reflev
