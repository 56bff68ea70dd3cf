#pragma once

#include <span>
#include <vector>

namespace ropepp {

// Rotary frequency schedule: thetas[n] = base^(-2n/head_dim).
struct RotaryParams {
    int head_dim = 0;
    double base = 0.0;
    std::vector<double> thetas; // head_dim/2 entries, strictly decreasing, thetas[0] == 1
};

RotaryParams build_thetas(int head_dim, double base);

// A head vector viewed as head_dim/2 consecutive (x, y) pairs.
using PairVector = std::vector<double>;

// One attention score in both channels. `imag` is the negated imaginary part
// of the complex pairwise product; that sign makes similar vectors score
// high on average in both channels.
struct ScorePair {
    double real = 0.0;
    double imag = 0.0;
};

enum class ScoreKind { real, imag };

// Rotates each pair by thetas[n] * position. Positions are real-valued so
// interpolated (fractional) indices work; they must be non-negative.
PairVector apply_absolute(std::span<const double> v, double position, const RotaryParams& params);

// Per-pair (x, y) -> (y, -x): rotation by -pi/2. Exact; order 4.
PairVector rotate_quarter_neg(std::span<const double> v);

// Per-pair (x, y) -> (-y, x): the inverse rotation, used by the
// channel-swap identities.
PairVector rotate_quarter_pos(std::span<const double> v);

// Relative-form scores; delta_t = t - s may be negative or fractional.
double score_real_relative(std::span<const double> q, std::span<const double> k,
                           double delta_t, const RotaryParams& params);
double score_imag_relative(std::span<const double> q, std::span<const double> k,
                           double delta_t, const RotaryParams& params);

// Absolute form: rotate q and k by their own positions, then dot. The imag
// channel pre-rotates q by -pi/2 before the positional rotation.
double score_absolute(std::span<const double> q, std::span<const double> k,
                      double t, double s, const RotaryParams& params, ScoreKind which);

// Ground-truth path: accumulates sum_n conj(q~_n) k~_n e^{-i thetas[n] (t-s)}
// with explicit real/imaginary bookkeeping, sharing no code with the
// rotation-form scorers above. Returns (Re, -Im).
ScorePair score_complex_oracle(std::span<const double> q, std::span<const double> k,
                               double t, double s, const RotaryParams& params);

} // namespace ropepp
