#include "ropepp/rotary.hpp"

#include <cmath>

#include "ropepp/common.hpp"

namespace ropepp {

RotaryParams build_thetas(int head_dim, double base) {
    require(head_dim >= 2, "build_thetas: head_dim must be >= 2");
    require(head_dim % 2 == 0, "build_thetas: head_dim must be even");
    require(base > 1.0, "build_thetas: base must be > 1");

    RotaryParams params;
    params.head_dim = head_dim;
    params.base = base;
    params.thetas.resize(static_cast<std::size_t>(head_dim) / 2);
    for (std::size_t n = 0; n < params.thetas.size(); ++n) {
        params.thetas[n] = std::pow(base, -2.0 * static_cast<double>(n) / head_dim);
    }
    return params;
}

static void check_length(std::span<const double> v, const RotaryParams& params, const char* who) {
    require(v.size() == static_cast<std::size_t>(params.head_dim),
            std::string(who) + ": vector length does not match head_dim");
}

PairVector apply_absolute(std::span<const double> v, double position, const RotaryParams& params) {
    check_length(v, params, "apply_absolute");
    require(position >= 0.0, "apply_absolute: position must be non-negative");

    PairVector out(v.size());
    for (std::size_t n = 0; n < params.thetas.size(); ++n) {
        const double angle = params.thetas[n] * position;
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const double x = v[2 * n];
        const double y = v[2 * n + 1];
        out[2 * n] = x * c - y * s;
        out[2 * n + 1] = x * s + y * c;
    }
    return out;
}

PairVector rotate_quarter_neg(std::span<const double> v) {
    require(v.size() % 2 == 0, "rotate_quarter_neg: vector length must be even");
    PairVector out(v.size());
    for (std::size_t n = 0; n < v.size() / 2; ++n) {
        out[2 * n] = v[2 * n + 1];
        out[2 * n + 1] = -v[2 * n];
    }
    return out;
}

PairVector rotate_quarter_pos(std::span<const double> v) {
    require(v.size() % 2 == 0, "rotate_quarter_pos: vector length must be even");
    PairVector out(v.size());
    for (std::size_t n = 0; n < v.size() / 2; ++n) {
        out[2 * n] = -v[2 * n + 1];
        out[2 * n + 1] = v[2 * n];
    }
    return out;
}

double score_real_relative(std::span<const double> q, std::span<const double> k,
                           double delta_t, const RotaryParams& params) {
    check_length(q, params, "score_real_relative");
    check_length(k, params, "score_real_relative");

    double acc = 0.0;
    for (std::size_t n = 0; n < params.thetas.size(); ++n) {
        const double angle = params.thetas[n] * delta_t;
        const double sym = q[2 * n] * k[2 * n] + q[2 * n + 1] * k[2 * n + 1];
        const double skew = q[2 * n] * k[2 * n + 1] - q[2 * n + 1] * k[2 * n];
        acc += sym * std::cos(angle) + skew * std::sin(angle);
    }
    return acc;
}

double score_imag_relative(std::span<const double> q, std::span<const double> k,
                           double delta_t, const RotaryParams& params) {
    check_length(q, params, "score_imag_relative");
    check_length(k, params, "score_imag_relative");

    double acc = 0.0;
    for (std::size_t n = 0; n < params.thetas.size(); ++n) {
        const double angle = params.thetas[n] * delta_t;
        const double sym = q[2 * n] * k[2 * n] + q[2 * n + 1] * k[2 * n + 1];
        const double skew = q[2 * n] * k[2 * n + 1] - q[2 * n + 1] * k[2 * n];
        acc += sym * std::sin(angle) - skew * std::cos(angle);
    }
    return acc;
}

double score_absolute(std::span<const double> q, std::span<const double> k,
                      double t, double s, const RotaryParams& params, ScoreKind which) {
    require(t >= 0.0 && s >= 0.0, "score_absolute: positions must be non-negative");

    const PairVector q_eff = which == ScoreKind::imag
                                 ? apply_absolute(rotate_quarter_neg(q), t, params)
                                 : apply_absolute(q, t, params);
    const PairVector k_rot = apply_absolute(k, s, params);

    double acc = 0.0;
    for (std::size_t i = 0; i < q_eff.size(); ++i) {
        acc += q_eff[i] * k_rot[i];
    }
    return acc;
}

ScorePair score_complex_oracle(std::span<const double> q, std::span<const double> k,
                               double t, double s, const RotaryParams& params) {
    check_length(q, params, "score_complex_oracle");
    check_length(k, params, "score_complex_oracle");
    require(t >= 0.0 && s >= 0.0, "score_complex_oracle: positions must be non-negative");

    double sum_re = 0.0;
    double sum_im = 0.0;
    for (std::size_t n = 0; n < params.thetas.size(); ++n) {
        // conj(q~) * k~
        const double pr = q[2 * n] * k[2 * n] + q[2 * n + 1] * k[2 * n + 1];
        const double pi = q[2 * n] * k[2 * n + 1] - q[2 * n + 1] * k[2 * n];
        // * e^{-i theta (t - s)}
        const double phase = -params.thetas[n] * (t - s);
        const double er = std::cos(phase);
        const double ei = std::sin(phase);
        sum_re += pr * er - pi * ei;
        sum_im += pr * ei + pi * er;
    }
    return {sum_re, -sum_im};
}

} // namespace ropepp
