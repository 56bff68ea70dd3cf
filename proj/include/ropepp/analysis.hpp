#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ropepp/rotary.hpp"

namespace ropepp {

// ---------------------------------------------------------------------------
// Characteristic curves
//
// The average of cos / sin over the rotary frequency schedule. With the
// default base-10000 schedule the discrete average approximates a normalized
// cosine / sine integral difference; both forms are exposed.
// ---------------------------------------------------------------------------

enum class CurveKind { real_discrete, imag_discrete, real_integral, imag_integral };

struct CurveSample {
    double delta_t = 0.0;
    double value = 0.0;
    CurveKind kind = CurveKind::real_discrete;
};

// (2/d) * sum_n cos(10^(-8n/d) * delta_t), the base-10000 schedule.
double char_curve_real(int d, double delta_t);
double char_curve_imag(int d, double delta_t);

// Same averages over an arbitrary schedule.
double char_curve_real(const RotaryParams& params, double delta_t);
double char_curve_imag(const RotaryParams& params, double delta_t);

// Si(x) = int_0^x sin(u)/u du; Ci(x) = gamma + ln x + int_0^x (cos(u)-1)/u du.
// Power series up to |x| = 8, auxiliary-function continued fraction beyond;
// absolute error well under 1e-8 on (0, 1e5].
double sine_integral(double x);
double cosine_integral(double x); // throws std::domain_error at x <= 0

// [F(dt) - F(dt/1e4)] / ln(1e4) with F = Ci (real) or Si (imag). The 1/ln(1e4)
// normalization keeps the curve on the same scale as the discrete average.
double integral_curve(ScoreKind kind, double delta_t);

// ---------------------------------------------------------------------------
// Monte-Carlo verification of the expectation identities
// ---------------------------------------------------------------------------

struct ExpectationCheck {
    ScoreKind variant = ScoreKind::real;
    double mu = 0.0;
    double sigma = 0.0;
    int d = 0;
    int delta_t = 0;
    double closed_form = 0.0;
    double mc_estimate = 0.0;
    double mc_stderr = 0.0;
    std::int64_t n_samples = 0;
};

// Semantic aggregation: E[score(q, q + eps)] - E[score(q, k)] for i.i.d.
// per-dimension N(mu, sigma^2) draws. Closed form 2 sigma^2 sum cos/sin.
ExpectationCheck mc_aggregation_check(ScoreKind variant, double mu, double sigma, int d,
                                      int delta_t, std::int64_t n_samples, std::uint64_t seed);

// Mean self-score decay: E[score(q, q)] at relative distance delta_t.
// Closed form 2 (mu^2 + sigma^2) sum cos/sin.
ExpectationCheck mc_mean_score_check(ScoreKind variant, double mu, double sigma, int d,
                                     int delta_t, std::int64_t n_samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Positional coverage
//
// For every frequency, which multiplier values each query/key dimension-parity
// product observes over the integer grid delta_t in {0..L-1}. The real channel
// multipliers are {+cos, +cos, +sin, -sin} and the imaginary channel
// {+sin, +sin, -cos, +cos} for terms (ee, oo, eo, oe) respectively.
// ---------------------------------------------------------------------------

enum class CoverageVariant { rope, ropepp };

enum class TermKind { q_even_k_even = 0, q_even_k_odd = 1, q_odd_k_even = 2, q_odd_k_odd = 3 };

inline constexpr std::array<TermKind, 4> all_terms = {
    TermKind::q_even_k_even, TermKind::q_even_k_odd, TermKind::q_odd_k_even, TermKind::q_odd_k_odd};

struct CoverageCell {
    double lo = 0.0;
    double hi = 0.0;
    bool saw_negative = false;
    bool saw_full_range = false; // both +1 and -1 attained within 1e-3
};

struct CoverageRow {
    int n = 0;
    double theta = 0.0;
    std::array<CoverageCell, 4> real;     // indexed by TermKind
    std::array<CoverageCell, 4> imag;     // ropepp only
    std::array<CoverageCell, 4> combined; // union over the channels the variant uses
};

struct CoverageReport {
    CoverageVariant variant = CoverageVariant::rope;
    int train_len = 0;
    std::vector<CoverageRow> rows; // one per frequency
};

inline constexpr double coverage_extreme_tol = 1e-3;

CoverageReport coverage_map(const RotaryParams& params, int train_len, CoverageVariant variant);

// ---------------------------------------------------------------------------
// CSV emitters
// ---------------------------------------------------------------------------

void write_curves_csv(std::ostream& os, const std::vector<CurveSample>& samples);
void write_coverage_csv(std::ostream& os, const CoverageReport& report);

const char* curve_kind_name(CurveKind kind);
const char* term_name(TermKind term);

} // namespace ropepp
