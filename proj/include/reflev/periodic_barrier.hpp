#pragma once

// Periodic piecewise-affine lower barrier A_t = phi(t + U), U ~ Uniform[0, s).
//
// Each piece is affine on its phase interval, so the stationary law xi of A_t is
// a piecewise-constant density (plus atoms for flat pieces) and every
// xi-integral used downstream is exact.

#include <reflev/rng.hpp>

#include <cstddef>
#include <vector>

namespace reflev {

/// phi(t) = level + slope * (t - t_begin) on [t_begin, t_end).
struct BarrierPiece {
    double t_begin;
    double t_end;
    double level;
    double slope;

    double value_at(double t) const { return level + slope * (t - t_begin); }
    /// Left limit of phi at t_end.
    double end_value() const { return value_at(t_end); }
    double image_lo() const { return slope >= 0.0 ? level : end_value(); }
    double image_hi() const { return slope >= 0.0 ? end_value() : level; }
    bool flat() const { return slope == 0.0; }
    /// Half-open image: [lo, hi) for increasing pieces, (lo, hi] for decreasing ones.
    bool image_contains(double z) const;
};

struct DensityInterval {
    double lo;
    double hi;
    double density;
};

struct Atom {
    double level;
    double mass;
};

/// Stationary law xi of A_t: piecewise-constant density plus atoms from flat pieces.
struct InvariantMeasure {
    std::vector<DensityInterval> intervals;
    std::vector<Atom> atoms;

    double total_mass() const;
    /// xi([lo, hi]) for the density part plus atoms in [lo, hi).
    double mass(double lo, double hi) const;
    double cdf(double y) const;
    double density(double y) const;
    /// int y xi(dy)
    double mean() const;
    /// int e^{gamma y} xi(dy)
    double exp_moment(double gamma) const;
};

class PeriodicBarrier {
public:
    /// Pieces must partition [0, s) in order; values must stay nonnegative.
    /// Throws ConfigError otherwise.
    explicit PeriodicBarrier(std::vector<BarrierPiece> pieces);

    /// phi(t) = t mod a.
    static PeriodicBarrier sawtooth(double amplitude);
    /// Three ramps with slopes 1, -2, 3 on [0,1), [1,3/2), [3/2,5/2).
    static PeriodicBarrier three_ramp();
    /// phi == 0, i.e. reflection at a constant zero level.
    static PeriodicBarrier zero(double period = 1.0);

    const std::vector<BarrierPiece>& pieces() const { return pieces_; }
    double period() const { return period_; }
    /// sup phi
    double amplitude() const { return amplitude_; }

    /// Index of the piece containing phase theta in [0, s).
    std::size_t piece_index(double phase) const;
    /// phi(t mod s), right-continuous at piece boundaries.
    double value(double t) const;

    const InvariantMeasure& invariant_measure() const { return measure_; }
    /// p_k(z) = P(U in J_k | phi(U) = z). Throws DomainError when no piece image holds z.
    std::vector<double> phase_weights(double z) const;
    double sample_phase(Rng& rng) const;
    /// E A_0
    double mean_level() const { return measure_.mean(); }
    /// C_gamma = E e^{gamma A_0}
    double exp_moment(double gamma) const { return measure_.exp_moment(gamma); }

private:
    std::vector<BarrierPiece> pieces_;
    double period_ = 0.0;
    double amplitude_ = 0.0;
    InvariantMeasure measure_;
};

}  // namespace reflev
