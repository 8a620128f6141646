#include <reflev/reflection_sim.hpp>

#include <reflev/errors.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace reflev {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// int_0^dt e^{alpha (x0 + slope s)} ds
double exp_affine_integral(double alpha, double x0, double slope, double dt) {
    const double rate = alpha * slope;
    const double base = std::exp(alpha * x0);
    if (rate == 0.0) return base * dt;
    return base * std::expm1(rate * dt) / rate;
}

double next_epoch(double now, double intensity, Rng& rng) {
    if (!(intensity > 0.0)) return kInf;
    return now + std::exponential_distribution<double>(intensity)(rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// SimConfig

double default_burn_in(const LevyModel& model, const PeriodicBarrier& barrier) {
    const double m = std::abs(mean_x1(model));
    const double by_drift = m > 0.0 ? 50.0 / m : 0.0;
    return std::max(by_drift, 20.0 * barrier.period());
}

double SimConfig::effective_burn_in(const LevyModel& model, const PeriodicBarrier& barrier) const {
    return burn_in < 0.0 ? default_burn_in(model, barrier) : burn_in;
}

void SimConfig::validate(const LevyModel& model, const PeriodicBarrier& barrier) const {
    model.validate();
    if (!integrable_tail(model)) throw ConfigError("jump law has a non-integrable tail");
    if (!(buffer > barrier.amplitude()))
        throw ConfigError("buffer level K must exceed the barrier amplitude a");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon T must be positive");
    if (!(effective_burn_in(model, barrier) < horizon))
        throw ConfigError("burn-in T_b must be shorter than the horizon T");
    if (scheme == Scheme::kEvent && model.sigma > 0.0)
        throw ConfigError("event scheme requires sigma = 0; use the grid scheme");
    if (scheme == Scheme::kGrid && !(grid_step > 0.0)) throw ConfigError("grid step h must be positive");
    if (batches == 0) throw ConfigError("batch count must be positive");
    if (record_histogram && (v_bins == 0 || a_bins == 0))
        throw ConfigError("histogram bin counts must be positive");
    if (initial_level && !(*initial_level >= 0.0 && *initial_level <= buffer))
        throw ConfigError("initial level must lie in [0, K]");
}

// ---------------------------------------------------------------------------
// OccupationHistogram

OccupationHistogram::OccupationHistogram(std::size_t v_bins, std::size_t a_bins, double buffer,
                                         double amplitude)
    : v_bins_(v_bins),
      a_bins_(amplitude > 0.0 ? a_bins : 1),
      buffer_(buffer),
      amplitude_(amplitude),
      joint_((v_bins_ + 1) * a_bins_, 0.0),
      v_marginal_(v_bins_ + 1, 0.0) {}

std::size_t OccupationHistogram::v_bin(double v) const {
    if (!(v > 0.0)) return 0;
    const auto i = static_cast<std::size_t>(v / buffer_ * static_cast<double>(v_bins_));
    return std::min(i, v_bins_ - 1);
}

std::size_t OccupationHistogram::a_bin(double a) const {
    if (a_bins_ == 1 || !(a > 0.0)) return 0;
    const auto j = static_cast<std::size_t>(a / amplitude_ * static_cast<double>(a_bins_));
    return std::min(j, a_bins_ - 1);
}

void OccupationHistogram::deposit(std::size_t row, std::size_t col, double dt) {
    joint_[row * a_bins_ + col] += dt;
    v_marginal_[row] += dt;
}

void OccupationHistogram::add(const Segment& seg) {
    const double dt = seg.duration;
    if (!(dt > 0.0) || joint_.empty()) return;
    const bool contact = seg.contact == Contact::kLower;
    const std::size_t i0 = contact ? contact_row() : v_bin(seg.v_start);
    const std::size_t i1 = contact ? contact_row() : v_bin(seg.v_end());
    const std::size_t j0 = a_bin(seg.a_start);
    const std::size_t j1 = a_bin(seg.a_end());
    if (i0 == i1 && j0 == j1) {
        deposit(i0, j0, dt);
        return;
    }

    // Split the affine segment at every bin edge it crosses.
    crossings_.clear();
    crossings_.push_back(0.0);
    crossings_.push_back(dt);
    auto add_edges = [&](std::size_t b0, std::size_t b1, double width, double x0, double slope) {
        if (b0 == b1 || slope == 0.0) return;
        for (std::size_t e = std::min(b0, b1) + 1; e <= std::max(b0, b1); ++e) {
            const double t = (static_cast<double>(e) * width - x0) / slope;
            if (t > 0.0 && t < dt) crossings_.push_back(t);
        }
    };
    if (!contact) add_edges(i0, i1, v_width(), seg.v_start, seg.v_slope);
    if (a_bins_ > 1) add_edges(j0, j1, a_width(), seg.a_start, seg.a_slope);
    std::sort(crossings_.begin(), crossings_.end());

    for (std::size_t k = 0; k + 1 < crossings_.size(); ++k) {
        const double lo = crossings_[k];
        const double hi = crossings_[k + 1];
        if (!(hi > lo)) continue;
        const double mid = 0.5 * (lo + hi);
        const std::size_t row = contact ? contact_row() : v_bin(seg.v_start + seg.v_slope * mid);
        deposit(row, a_bin(seg.a_start + seg.a_slope * mid), hi - lo);
    }
}

void OccupationHistogram::merge(const OccupationHistogram& other) {
    if (other.empty()) return;
    if (empty()) {
        *this = other;
        return;
    }
    if (other.v_bins_ != v_bins_ || other.a_bins_ != a_bins_)
        throw ConfigError("cannot merge histograms with different binning");
    for (std::size_t i = 0; i < joint_.size(); ++i) joint_[i] += other.joint_[i];
    for (std::size_t i = 0; i < v_marginal_.size(); ++i) v_marginal_[i] += other.v_marginal_[i];
}

double OccupationHistogram::total() const {
    double t = 0.0;
    for (double x : joint_) t += x;
    return t;
}

// ---------------------------------------------------------------------------
// PathAccumulators

bool PathAccumulators::finite() const {
    return std::isfinite(lower_continuous) && std::isfinite(lower_jump) &&
           std::isfinite(upper_continuous) && std::isfinite(upper_jump) &&
           std::isfinite(lower_jump_squares) && std::isfinite(upper_jump_squares) &&
           std::isfinite(barrier_work) && std::isfinite(level_integral) &&
           std::isfinite(x_increment);
}

double PathAccumulators::balance_residual() const {
    return (v_end - v_start) - (x_increment + lower_total() - upper_total());
}

double PathAccumulators::balance_scale() const {
    return std::abs(x_increment) + lower_total() + upper_total();
}

void PathAccumulators::merge(const PathAccumulators& other) {
    duration += other.duration;
    lower_continuous += other.lower_continuous;
    lower_jump += other.lower_jump;
    upper_continuous += other.upper_continuous;
    upper_jump += other.upper_jump;
    lower_jump_squares += other.lower_jump_squares;
    upper_jump_squares += other.upper_jump_squares;
    barrier_work += other.barrier_work;
    level_integral += other.level_integral;
    x_increment += other.x_increment;
    lower_jump_events += other.lower_jump_events;
    upper_jump_events += other.upper_jump_events;
    containment_violation = std::max(containment_violation, other.containment_violation);
    negative_regulations += other.negative_regulations;
    v_start += other.v_start;
    v_end += other.v_end;
    barrier_end += other.barrier_end;
    histogram.merge(other.histogram);
    batches.insert(batches.end(), other.batches.begin(), other.batches.end());
}

void Recorder::on_segment(const Segment& seg) {
    const double dt = seg.duration;
    acc_.duration += dt;
    acc_.level_integral += dt * 0.5 * (seg.v_start + seg.v_end());
    if (batch_) batch_->duration += dt;
    const double k = buffer_;
    acc_.containment_violation =
        std::max({acc_.containment_violation, seg.a_start - seg.v_start, seg.a_end() - seg.v_end(),
                  seg.v_start - k, seg.v_end() - k});
    if (seg.push_rate < 0.0) ++acc_.negative_regulations;
    if (seg.push_rate > 0.0) {
        const double amount = seg.push_rate * dt;
        if (seg.contact == Contact::kLower) {
            const double work = amount * 0.5 * (seg.a_start + seg.a_end());
            acc_.lower_continuous += amount;
            acc_.barrier_work += work;
            if (batch_) {
                batch_->lower += amount;
                batch_->barrier_work += work;
            }
        } else if (seg.contact == Contact::kUpper) {
            acc_.upper_continuous += amount;
            if (batch_) batch_->upper += amount;
        }
    }
    acc_.histogram.add(seg);
}

void Recorder::on_regulation(Side side, Part part, double amount, double level) {
    if (amount < 0.0) ++acc_.negative_regulations;
    if (side == Side::kLower) {
        (part == Part::kJump ? acc_.lower_jump : acc_.lower_continuous) += amount;
        acc_.barrier_work += amount * level;
        if (part == Part::kJump) {
            acc_.lower_jump_squares += amount * amount;
            ++acc_.lower_jump_events;
        }
        if (batch_) {
            batch_->lower += amount;
            batch_->barrier_work += amount * level;
        }
    } else {
        (part == Part::kJump ? acc_.upper_jump : acc_.upper_continuous) += amount;
        if (part == Part::kJump) {
            acc_.upper_jump_squares += amount * amount;
            ++acc_.upper_jump_events;
        }
        if (batch_) batch_->upper += amount;
    }
}

// ---------------------------------------------------------------------------
// ReflectedPath

ReflectedPath::ReflectedPath(const LevyModel& model, const PeriodicBarrier& barrier,
                             const SimConfig& cfg, std::uint64_t replica)
    : model_(model),
      barrier_(barrier),
      cfg_(cfg),
      jump_rng_(make_stream(cfg.seed, replica, Stream::kJumps)),
      diffusion_rng_(make_stream(cfg.seed, replica, Stream::kDiffusion)) {
    phase_ = barrier_.sample_phase(jump_rng_);
    piece_ = barrier_.piece_index(phase_);
    next_jump_ = next_epoch(0.0, model_.intensity, jump_rng_);
    const double a = barrier_level();
    level_ = std::clamp(cfg_.initial_level.value_or(a), a, cfg_.buffer);
    contact_ = level_ == a ? Contact::kLower : (level_ == cfg_.buffer ? Contact::kUpper : Contact::kNone);
}

double ReflectedPath::barrier_level() const { return barrier_.pieces()[piece_].value_at(phase_); }

void ReflectedPath::advance(double duration, PathObserver& obs) {
    if (!(duration > 0.0)) return;
    if (cfg_.scheme == Scheme::kEvent)
        advance_event(duration, obs);
    else
        advance_grid(duration, obs);
}

void ReflectedPath::clamp_and_book(double free_level, double barrier, Part part, PathObserver& obs) {
    const double k = cfg_.buffer;
    if (cfg_.mutation == Mutation::kReversedClamp) {
        level_ = std::clamp(free_level, barrier, k);
    } else if (free_level > k) {
        obs.on_regulation(Side::kUpper, part, free_level - k, k);
        level_ = k;
    } else if (free_level < barrier) {
        obs.on_regulation(Side::kLower, part, barrier - free_level, barrier);
        level_ = barrier;
    } else {
        level_ = free_level;
    }
    contact_ = level_ == barrier ? Contact::kLower : (level_ == k ? Contact::kUpper : Contact::kNone);
}

void ReflectedPath::apply_jump(PathObserver& obs) {
    const double y = sample_jump(model_.jump, jump_rng_);
    next_jump_ = next_epoch(next_jump_, model_.intensity, jump_rng_);
    obs.on_increment(y);
    clamp_and_book(level_ + y, barrier_level(), Part::kJump, obs);
}

void ReflectedPath::cross_piece_boundary(PathObserver& obs) {
    const auto& pieces = barrier_.pieces();
    piece_ = (piece_ + 1) % pieces.size();
    phase_ = pieces[piece_].t_begin;
    const double a = pieces[piece_].level;
    if (a > level_) {
        // Upward barrier discontinuity: a push not caused by X, booked as a jump.
        obs.on_regulation(Side::kLower, Part::kJump, a - level_, a);
        level_ = a;
        contact_ = Contact::kLower;
    } else if (contact_ == Contact::kLower && a != level_) {
        contact_ = Contact::kNone;
    }
}

void ReflectedPath::advance_event(double duration, PathObserver& obs) {
    enum class Limit { kPiece, kJump, kEnd, kHit };
    const double end = time_ + duration;
    const double k = cfg_.buffer;
    const double d = model_.drift;

    while (true) {
        const BarrierPiece& piece = barrier_.pieces()[piece_];
        const double a0 = piece.value_at(phase_);
        const double b = piece.slope;

        double tau = piece.t_end - phase_;
        Limit limit = Limit::kPiece;
        if (next_jump_ - time_ < tau) {
            tau = next_jump_ - time_;
            limit = Limit::kJump;
        }
        if (end - time_ <= tau) {
            tau = end - time_;
            limit = Limit::kEnd;
        }

        // Detach when the free motion no longer pushes into the barrier.
        if (contact_ == Contact::kLower && !(b > d)) contact_ = Contact::kNone;
        if (contact_ == Contact::kUpper && !(d > 0.0)) contact_ = Contact::kNone;

        Contact hit = Contact::kNone;
        if (contact_ == Contact::kNone) {
            if (d < b) {
                const double t_hit = (level_ - a0) / (b - d);
                if (t_hit < tau) {
                    tau = t_hit;
                    limit = Limit::kHit;
                    hit = Contact::kLower;
                }
            }
            if (d > 0.0) {
                const double t_hit = (k - level_) / d;
                if (t_hit < tau) {
                    tau = t_hit;
                    limit = Limit::kHit;
                    hit = Contact::kUpper;
                }
            }
        }
        tau = std::max(tau, 0.0);

        Segment seg{tau, level_, d, a0, b, contact_, 0.0};
        if (contact_ == Contact::kLower) {
            seg.v_slope = b;
            seg.push_rate = b - d;
        } else if (contact_ == Contact::kUpper) {
            seg.v_slope = 0.0;
            seg.push_rate = d;
        }
        if (tau > 0.0) {
            obs.on_segment(seg);
            obs.on_increment(d * tau);
        }

        time_ = limit == Limit::kJump ? next_jump_ : (limit == Limit::kEnd ? end : time_ + tau);
        phase_ = limit == Limit::kPiece ? piece.t_end : phase_ + tau;
        const double a1 = piece.value_at(phase_);
        switch (contact_) {
            case Contact::kLower: level_ = a1; break;
            case Contact::kUpper: level_ = k; break;
            case Contact::kNone: level_ = std::clamp(level_ + d * tau, a1, k); break;
        }
        if (hit != Contact::kNone) {
            contact_ = hit;
            level_ = hit == Contact::kLower ? a1 : k;
        }

        switch (limit) {
            case Limit::kPiece: cross_piece_boundary(obs); break;
            case Limit::kJump: apply_jump(obs); break;
            case Limit::kEnd: return;
            case Limit::kHit: break;
        }
    }
}

void ReflectedPath::advance_grid(double duration, PathObserver& obs) {
    const double end = time_ + duration;
    const double d = model_.drift;
    std::normal_distribution<double> normal(0.0, 1.0);

    while (time_ < end) {
        const BarrierPiece& piece = barrier_.pieces()[piece_];
        const double a0 = piece.value_at(phase_);
        double tau = cfg_.grid_step;
        bool piece_end = false;
        bool run_end = false;
        if (piece.t_end - phase_ <= tau) {
            tau = piece.t_end - phase_;
            piece_end = true;
        }
        if (end - time_ <= tau) {
            tau = end - time_;
            run_end = true;
            piece_end = piece_end && tau == piece.t_end - phase_;
        }
        const double step_end = time_ + tau;

        double jumps = 0.0;
        bool jumped = false;
        while (next_jump_ <= step_end) {
            const double y = sample_jump(model_.jump, jump_rng_);
            next_jump_ = next_epoch(next_jump_, model_.intensity, jump_rng_);
            obs.on_increment(y);
            jumps += y;
            jumped = true;
        }
        double dx = d * tau;
        if (model_.sigma > 0.0) dx += model_.sigma * std::sqrt(tau) * normal(diffusion_rng_);
        obs.on_increment(dx);

        const double a1 = piece_end ? piece.end_value() : piece.value_at(phase_ + tau);
        const double v0 = level_;
        const bool started_on_barrier = contact_ == Contact::kLower;
        clamp_and_book(v0 + dx + jumps, a1, jumped ? Part::kJump : Part::kContinuous, obs);

        Contact seg_contact = Contact::kNone;
        if (started_on_barrier && contact_ == Contact::kLower) seg_contact = Contact::kLower;
        if (tau > 0.0)
            obs.on_segment({tau, v0, (level_ - v0) / tau, a0, piece.slope, seg_contact, 0.0});

        time_ = run_end ? end : step_end;
        if (piece_end) {
            phase_ = piece.t_end;
            cross_piece_boundary(obs);
        } else {
            phase_ += tau;
        }
        if (run_end) break;
    }
}

// ---------------------------------------------------------------------------

PathAccumulators simulate(const LevyModel& model, const PeriodicBarrier& barrier,
                          const SimConfig& cfg, std::uint64_t replica) {
    cfg.validate(model, barrier);
    const double burn_in = cfg.effective_burn_in(model, barrier);
    ReflectedPath path(model, barrier, cfg, replica);
    PathObserver discard;
    path.advance(burn_in, discard);

    PathAccumulators acc;
    if (cfg.record_histogram)
        acc.histogram = OccupationHistogram(cfg.v_bins, cfg.a_bins, cfg.buffer, barrier.amplitude());
    acc.v_start = path.level();
    const double batch_len = (cfg.horizon - burn_in) / static_cast<double>(cfg.batches);
    acc.batches.reserve(cfg.batches);
    for (std::size_t b = 0; b < cfg.batches; ++b) {
        BatchTotals batch;
        Recorder rec(acc, &batch, cfg.buffer);
        path.advance(batch_len, rec);
        acc.batches.push_back(batch);
        if (!acc.finite()) throw OverflowError("non-finite path accumulator");
    }
    acc.v_end = path.level();
    acc.barrier_end = path.barrier_level();
    return acc;
}

// ---------------------------------------------------------------------------
// Martingale

MartingaleObserver::MartingaleObserver(const LevyModel& model, double buffer, double alpha)
    : alpha_(alpha),
      kappa_(kappa(model, alpha)),
      buffer_(buffer),
      exp_buffer_(std::exp(alpha * buffer)) {}

void MartingaleObserver::on_segment(const Segment& seg) {
    occupation_ += exp_affine_integral(alpha_, seg.v_start, seg.v_slope, seg.duration);
    if (seg.push_rate > 0.0) {
        if (seg.contact == Contact::kLower)
            lower_cont_ += alpha_ * seg.push_rate *
                           exp_affine_integral(alpha_, seg.a_start, seg.a_slope, seg.duration);
        else if (seg.contact == Contact::kUpper)
            upper_cont_ -= alpha_ * exp_buffer_ * seg.push_rate * seg.duration;
    }
}

void MartingaleObserver::on_regulation(Side side, Part part, double amount, double level) {
    if (side == Side::kLower) {
        if (part == Part::kContinuous)
            lower_cont_ += alpha_ * std::exp(alpha_ * level) * amount;
        else
            lower_jump_ -= std::exp(alpha_ * level) * std::expm1(-alpha_ * amount);
    } else {
        if (part == Part::kContinuous)
            upper_cont_ -= alpha_ * exp_buffer_ * amount;
        else
            upper_jump_ -= exp_buffer_ * std::expm1(alpha_ * amount);
    }
}

MartingaleSample MartingaleObserver::finish(double v_start, double v_end, double elapsed) const {
    MartingaleSample s;
    s.alpha = alpha_;
    s.time = elapsed;
    s.terms = {kappa_ * occupation_, std::exp(alpha_ * v_start), -std::exp(alpha_ * v_end),
               lower_cont_, lower_jump_, upper_cont_, upper_jump_};
    s.value = 0.0;
    for (double t : s.terms) s.value += t;
    return s;
}

MartingaleSample martingale_statistic(const LevyModel& model, const PeriodicBarrier& barrier,
                                      const SimConfig& cfg, double alpha, std::uint64_t replica,
                                      double t) {
    if (!exponent_domain(model).contains(alpha))
        throw DomainError("alpha outside the exponent domain");
    const double burn_in = cfg.effective_burn_in(model, barrier);
    SimConfig run = cfg;
    run.horizon = burn_in + t + 1.0;
    run.validate(model, barrier);
    ReflectedPath path(model, barrier, run, replica);
    PathObserver discard;
    path.advance(burn_in, discard);
    MartingaleObserver obs(model, cfg.buffer, alpha);
    const double v0 = path.level();
    path.advance(t, obs);
    return obs.finish(v0, path.level(), t);
}

}  // namespace reflev
