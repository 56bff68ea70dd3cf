#include "ropepp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "ropepp/common.hpp"
#include "ropepp/parallel.hpp"
#include "ropepp/rng.hpp"

namespace ropepp {

// ---------------------------------------------------------------------------
// Characteristic curves
// ---------------------------------------------------------------------------

double char_curve_real(const RotaryParams& params, double delta_t) {
    require(delta_t >= 0.0, "char_curve_real: delta_t must be >= 0");
    double acc = 0.0;
    for (double theta : params.thetas) {
        acc += std::cos(theta * delta_t);
    }
    return acc / static_cast<double>(params.thetas.size());
}

double char_curve_imag(const RotaryParams& params, double delta_t) {
    require(delta_t >= 0.0, "char_curve_imag: delta_t must be >= 0");
    double acc = 0.0;
    for (double theta : params.thetas) {
        acc += std::sin(theta * delta_t);
    }
    return acc / static_cast<double>(params.thetas.size());
}

double char_curve_real(int d, double delta_t) {
    return char_curve_real(build_thetas(d, 10000.0), delta_t);
}

double char_curve_imag(int d, double delta_t) {
    return char_curve_imag(build_thetas(d, 10000.0), delta_t);
}

// ---------------------------------------------------------------------------
// Si / Ci
// ---------------------------------------------------------------------------

namespace {

constexpr double euler_gamma = 0.57721566490153286060651209008240243;
constexpr double series_cutoff = 8.0;

// Si power series: sum (-1)^k x^(2k+1) / ((2k+1)(2k+1)!)
double si_series(double x) {
    double term = x; // x^(2k+1)/(2k+1)!
    double acc = 0.0;
    for (int k = 0;; ++k) {
        acc += term / (2 * k + 1);
        const double next = -term * x * x / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
        if (std::abs(next) < 1e-18 * (1.0 + std::abs(acc))) {
            break;
        }
        term = next;
    }
    return acc;
}

// Cin(x) = sum_{k>=1} (-1)^(k+1) x^(2k) / (2k (2k)!); Ci = gamma + ln x - Cin.
double ci_series(double x) {
    double term = x * x / 2.0; // x^(2k)/(2k)!
    double sign = 1.0;
    double cin = 0.0;
    for (int k = 1;; ++k) {
        cin += sign * term / (2 * k);
        const double next = term * x * x / ((2.0 * k + 1.0) * (2.0 * k + 2.0));
        if (next / (2.0 * k + 2.0) < 1e-18 * (1.0 + std::abs(cin))) {
            break;
        }
        term = next;
        sign = -sign;
    }
    return euler_gamma + std::log(x) - cin;
}

struct SiCi {
    double si;
    double ci;
};

// Auxiliary-function evaluation for large x via the modified Lentz continued
// fraction of E1(ix) = e^{-ix} (g(x) - i f(x)); then
// Ci(x) = -Re E1(ix), Si(x) = pi/2 + Im E1(ix).
SiCi si_ci_large(double x) {
    double br = 1.0, bi = x; // b = 1 + ix
    double cr = 1e300, ci_ = 0.0;
    double dr, di;
    {
        const double den = br * br + bi * bi;
        dr = br / den;
        di = -bi / den;
    }
    double hr = dr, hi = di;
    for (int i = 1; i < 20000; ++i) {
        const double a = -static_cast<double>(i) * static_cast<double>(i);
        br += 2.0;
        // d = 1 / (a*d + b)
        double tr = a * dr + br;
        double ti = a * di + bi;
        double den = tr * tr + ti * ti;
        dr = tr / den;
        di = -ti / den;
        // c = b + a/c
        den = cr * cr + ci_ * ci_;
        tr = br + a * cr / den;
        ti = bi - a * ci_ / den;
        cr = tr;
        ci_ = ti;
        // h *= c*d
        const double delr = cr * dr - ci_ * di;
        const double deli = cr * di + ci_ * dr;
        const double nhr = hr * delr - hi * deli;
        const double nhi = hr * deli + hi * delr;
        hr = nhr;
        hi = nhi;
        if (std::abs(delr - 1.0) + std::abs(deli) < 1e-16) {
            break;
        }
    }
    // h *= e^{-ix}
    const double c = std::cos(x);
    const double s = std::sin(x);
    const double er = hr * c + hi * s;
    const double ei = hi * c - hr * s;
    return {std::numbers::pi / 2.0 + ei, -er};
}

} // namespace

double sine_integral(double x) {
    require(x >= 0.0, "sine_integral: x must be >= 0");
    if (x == 0.0) {
        return 0.0;
    }
    if (x <= series_cutoff) {
        return si_series(x);
    }
    return si_ci_large(x).si;
}

double cosine_integral(double x) {
    if (x <= 0.0) {
        throw std::domain_error("cosine_integral: x must be > 0");
    }
    if (x <= series_cutoff) {
        return ci_series(x);
    }
    return si_ci_large(x).ci;
}

double integral_curve(ScoreKind kind, double delta_t) {
    static const double ln_1e4 = std::log(1e4);
    if (kind == ScoreKind::real) {
        if (delta_t <= 0.0) {
            throw std::domain_error("integral_curve: real kind requires delta_t > 0");
        }
        return (cosine_integral(delta_t) - cosine_integral(delta_t / 1e4)) / ln_1e4;
    }
    require(delta_t >= 0.0, "integral_curve: delta_t must be >= 0");
    if (delta_t == 0.0) {
        return 0.0;
    }
    return (sine_integral(delta_t) - sine_integral(delta_t / 1e4)) / ln_1e4;
}

// ---------------------------------------------------------------------------
// Monte-Carlo checks
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t stream_q = 0x71;
constexpr std::uint64_t stream_k = 0x6b;
constexpr std::uint64_t stream_eps = 0x65;

void fill_gaussian(std::vector<double>& v, double mu, double sigma,
                   std::uint64_t seed, std::uint64_t stream, std::uint64_t sample) {
    const std::uint64_t base = rng::key(seed, stream, sample);
    for (std::size_t j = 0; j < v.size(); j += 2) {
        const rng::GaussPair g = rng::gaussian_pair(rng::key(base, j));
        v[j] = mu + sigma * g.z0;
        if (j + 1 < v.size()) {
            v[j + 1] = mu + sigma * g.z1;
        }
    }
}

double closed_sum(ScoreKind variant, const RotaryParams& params, double delta_t) {
    double acc = 0.0;
    for (double theta : params.thetas) {
        acc += variant == ScoreKind::real ? std::cos(theta * delta_t) : std::sin(theta * delta_t);
    }
    return acc;
}

// Shards the sample range into fixed-size chunks combined in chunk order, so
// the result is bitwise independent of the thread count.
ExpectationCheck run_mc(ScoreKind variant, double mu, double sigma, int d, int delta_t,
                        std::int64_t n_samples, std::uint64_t seed, bool aggregation) {
    require(sigma > 0.0, "mc check: sigma must be > 0");
    require(n_samples >= 2, "mc check: n_samples must be >= 2");

    const RotaryParams params = build_thetas(d, 10000.0);
    const auto score = variant == ScoreKind::real ? score_real_relative : score_imag_relative;

    constexpr std::int64_t chunk = 4096;
    const std::size_t n_chunks = static_cast<std::size_t>((n_samples + chunk - 1) / chunk);
    std::vector<double> sums(n_chunks, 0.0);
    std::vector<double> sq_sums(n_chunks, 0.0);

    parallel_for(n_chunks, 0, [&](std::size_t ci) {
        const std::int64_t lo = static_cast<std::int64_t>(ci) * chunk;
        const std::int64_t hi = std::min(n_samples, lo + chunk);
        std::vector<double> q(static_cast<std::size_t>(d));
        std::vector<double> other(static_cast<std::size_t>(d));
        double sum = 0.0;
        double sq = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) {
            const auto idx = static_cast<std::uint64_t>(i);
            fill_gaussian(q, mu, sigma, seed, stream_q, idx);
            double x;
            if (aggregation) {
                // score(q, q + eps) - score(q, k)
                fill_gaussian(other, 0.0, sigma, seed, stream_eps, idx);
                for (std::size_t j = 0; j < other.size(); ++j) {
                    other[j] += q[j];
                }
                x = score(q, other, delta_t, params);
                fill_gaussian(other, mu, sigma, seed, stream_k, idx);
                x -= score(q, other, delta_t, params);
            } else {
                x = score(q, q, delta_t, params);
            }
            sum += x;
            sq += x * x;
        }
        sums[ci] = sum;
        sq_sums[ci] = sq;
    });

    double total = 0.0;
    double total_sq = 0.0;
    for (std::size_t ci = 0; ci < n_chunks; ++ci) {
        total += sums[ci];
        total_sq += sq_sums[ci];
    }

    const double n = static_cast<double>(n_samples);
    const double mean = total / n;
    const double var = std::max(0.0, (total_sq - n * mean * mean) / (n - 1.0));

    ExpectationCheck out;
    out.variant = variant;
    out.mu = mu;
    out.sigma = sigma;
    out.d = d;
    out.delta_t = delta_t;
    out.mc_estimate = mean;
    out.mc_stderr = std::sqrt(var / n);
    out.n_samples = n_samples;
    const double factor = aggregation ? 2.0 * sigma * sigma : 2.0 * (mu * mu + sigma * sigma);
    out.closed_form = factor * closed_sum(variant, params, delta_t);
    return out;
}

} // namespace

ExpectationCheck mc_aggregation_check(ScoreKind variant, double mu, double sigma, int d,
                                      int delta_t, std::int64_t n_samples, std::uint64_t seed) {
    return run_mc(variant, mu, sigma, d, delta_t, n_samples, seed, true);
}

ExpectationCheck mc_mean_score_check(ScoreKind variant, double mu, double sigma, int d,
                                     int delta_t, std::int64_t n_samples, std::uint64_t seed) {
    return run_mc(variant, mu, sigma, d, delta_t, n_samples, seed, false);
}

// ---------------------------------------------------------------------------
// Coverage
// ---------------------------------------------------------------------------

namespace {

// Multiplier sign tables per term (ee, eo, oe, oo order of TermKind values).
// real channel: +cos, +sin, -sin, +cos ; imag channel: +sin, -cos, +cos, +sin
struct Multiplier {
    bool is_cos;
    double sign;
};

constexpr Multiplier real_mult(TermKind term) {
    switch (term) {
        case TermKind::q_even_k_even: return {true, 1.0};
        case TermKind::q_even_k_odd: return {false, 1.0};
        case TermKind::q_odd_k_even: return {false, -1.0};
        case TermKind::q_odd_k_odd: return {true, 1.0};
    }
    return {true, 1.0};
}

constexpr Multiplier imag_mult(TermKind term) {
    switch (term) {
        case TermKind::q_even_k_even: return {false, 1.0};
        case TermKind::q_even_k_odd: return {true, -1.0};
        case TermKind::q_odd_k_even: return {true, 1.0};
        case TermKind::q_odd_k_odd: return {false, 1.0};
    }
    return {false, 1.0};
}

CoverageCell scan_cell(const Multiplier& m, double theta, int train_len) {
    CoverageCell cell;
    cell.lo = std::numeric_limits<double>::infinity();
    cell.hi = -std::numeric_limits<double>::infinity();
    bool pos_extreme = false;
    bool neg_extreme = false;
    for (int dt = 0; dt < train_len; ++dt) {
        const double angle = theta * dt;
        const double v = m.sign * (m.is_cos ? std::cos(angle) : std::sin(angle));
        cell.lo = std::min(cell.lo, v);
        cell.hi = std::max(cell.hi, v);
        if (v < 0.0) {
            cell.saw_negative = true;
        }
        pos_extreme = pos_extreme || std::abs(v - 1.0) <= coverage_extreme_tol;
        neg_extreme = neg_extreme || std::abs(v + 1.0) <= coverage_extreme_tol;
    }
    cell.saw_full_range = pos_extreme && neg_extreme;
    return cell;
}

CoverageCell merge_cells(const CoverageCell& a, const CoverageCell& b) {
    CoverageCell out;
    out.lo = std::min(a.lo, b.lo);
    out.hi = std::max(a.hi, b.hi);
    out.saw_negative = a.saw_negative || b.saw_negative;
    // hull bounds are attained values, so they decide the extremes
    out.saw_full_range = out.hi >= 1.0 - coverage_extreme_tol && out.lo <= -1.0 + coverage_extreme_tol;
    return out;
}

} // namespace

CoverageReport coverage_map(const RotaryParams& params, int train_len, CoverageVariant variant) {
    require(train_len >= 2, "coverage_map: train_len must be >= 2");

    CoverageReport report;
    report.variant = variant;
    report.train_len = train_len;
    report.rows.reserve(params.thetas.size());

    for (std::size_t n = 0; n < params.thetas.size(); ++n) {
        CoverageRow row;
        row.n = static_cast<int>(n);
        row.theta = params.thetas[n];
        for (TermKind term : all_terms) {
            const auto ti = static_cast<std::size_t>(term);
            row.real[ti] = scan_cell(real_mult(term), row.theta, train_len);
            if (variant == CoverageVariant::ropepp) {
                row.imag[ti] = scan_cell(imag_mult(term), row.theta, train_len);
                row.combined[ti] = merge_cells(row.real[ti], row.imag[ti]);
            } else {
                row.combined[ti] = row.real[ti];
            }
        }
        report.rows.push_back(row);
    }
    return report;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

const char* curve_kind_name(CurveKind kind) {
    switch (kind) {
        case CurveKind::real_discrete: return "real_discrete";
        case CurveKind::imag_discrete: return "imag_discrete";
        case CurveKind::real_integral: return "real_integral";
        case CurveKind::imag_integral: return "imag_integral";
    }
    return "?";
}

const char* term_name(TermKind term) {
    switch (term) {
        case TermKind::q_even_k_even: return "q_even.k_even";
        case TermKind::q_even_k_odd: return "q_even.k_odd";
        case TermKind::q_odd_k_even: return "q_odd.k_even";
        case TermKind::q_odd_k_odd: return "q_odd.k_odd";
    }
    return "?";
}

namespace {

void write_double(std::ostream& os, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
}

} // namespace

void write_curves_csv(std::ostream& os, const std::vector<CurveSample>& samples) {
    os << "# schema: ropepp.curves.v1\n";
    os << "delta_t,kind,value\n";
    for (const CurveSample& s : samples) {
        write_double(os, s.delta_t);
        os << ',' << curve_kind_name(s.kind) << ',';
        write_double(os, s.value);
        os << '\n';
    }
}

void write_coverage_csv(std::ostream& os, const CoverageReport& report) {
    os << "# schema: ropepp.coverage.v1\n";
    os << "n,theta,term,channel,lo,hi,saw_negative,saw_full_range\n";
    auto emit = [&os](const CoverageRow& row, TermKind term, const char* channel, const CoverageCell& cell) {
        os << row.n << ',';
        write_double(os, row.theta);
        os << ',' << term_name(term) << ',' << channel << ',';
        write_double(os, cell.lo);
        os << ',';
        write_double(os, cell.hi);
        os << ',' << (cell.saw_negative ? 1 : 0) << ',' << (cell.saw_full_range ? 1 : 0) << '\n';
    };
    for (const CoverageRow& row : report.rows) {
        for (TermKind term : all_terms) {
            const auto ti = static_cast<std::size_t>(term);
            emit(row, term, "real", row.real[ti]);
            if (report.variant == CoverageVariant::ropepp) {
                emit(row, term, "imag", row.imag[ti]);
                emit(row, term, "combined", row.combined[ti]);
            }
        }
    }
}

} // namespace ropepp
