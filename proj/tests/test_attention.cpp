#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "ropepp/attention.hpp"
#include "ropepp/rotary.hpp"
#include "ropepp/weights.hpp"

using namespace ropepp;

namespace {

std::vector<double> random_vec(std::mt19937& gen, std::size_t n, double sigma = 1.0) {
    std::normal_distribution<double> dist(0.0, sigma);
    std::vector<double> v(n);
    for (double& x : v) {
        x = dist(gen);
    }
    return v;
}

std::vector<double> iota_positions(std::size_t n, double offset = 0.0) {
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = offset + static_cast<double>(i);
    }
    return p;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

} // namespace

TEST_CASE("build_layout shapes per variant") {
    auto rope = build_layout(Variant::rope, 8, 4, 128);
    CHECK(rope.physical_q_heads == 8);
    CHECK(rope.output_heads == 8);
    CHECK(rope.kv_heads == 4);
    CHECK(rope.group_size == 2);

    auto ec = build_layout(Variant::ec, 8, 4, 128);
    CHECK(ec.physical_q_heads == 8);
    CHECK(ec.output_heads == 16);
    CHECK(ec.kv_heads == 4);
    CHECK(ec.group_size == 4); // doubled vs rope

    auto eh = build_layout(Variant::eh, 8, 4, 128);
    CHECK(eh.physical_q_heads == 4);
    CHECK(eh.output_heads == 8);
    CHECK(eh.kv_heads == 2);
    CHECK(eh.group_size == 4);
}

TEST_CASE("build_layout names the failing constraint") {
    CHECK_THROWS_WITH_AS(build_layout(Variant::rope, 8, 3, 128),
                         doctest::Contains("divisible"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(build_layout(Variant::eh, 7, 1, 128), doctest::Contains("even"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(build_layout(Variant::eh, 8, 3, 128), doctest::Contains("divisible"),
                         std::invalid_argument);
    CHECK_THROWS_AS(build_layout(Variant::rope, 8, 4, 7), std::invalid_argument);
}

TEST_CASE("expand_queries pass-through and interleave") {
    auto rope = build_layout(Variant::rope, 2, 2, 4);
    std::mt19937 gen(1);
    auto q = random_vec(gen, 2 * 2 * 4);
    auto same = expand_queries(q, 2, rope);
    CHECK(same == q);

    auto ec = build_layout(Variant::ec, 1, 1, 2);
    std::vector<double> one = {1.0, 0.0};
    auto heads = expand_queries(one, 1, ec);
    CHECK(heads == std::vector<double>{1.0, 0.0, 0.0, -1.0});
}

TEST_CASE("odd expanded heads score like the imag channel") {
    auto ec = build_layout(Variant::ec, 1, 1, 8);
    auto params = build_thetas(8, 10000.0);
    std::mt19937 gen(5);
    auto q = random_vec(gen, 8);
    auto k = random_vec(gen, 8);

    auto expanded = expand_queries(q, 1, ec);
    const double t = 9.0;
    const double s = 2.0;
    std::span<const double> imag_head(expanded.data() + 8, 8);

    const auto q_rot = apply_absolute(imag_head, t, params);
    const auto k_rot = apply_absolute(k, s, params);
    const double dot = std::inner_product(q_rot.begin(), q_rot.end(), k_rot.begin(), 0.0);
    CHECK(dot == doctest::Approx(score_imag_relative(q, k, t - s, params)).epsilon(1e-10));
}

TEST_CASE("single-token attention returns the value row") {
    auto params = build_thetas(4, 10000.0);
    std::mt19937 gen(2);
    for (Variant variant : {Variant::rope, Variant::eh, Variant::ec}) {
        auto layout = build_layout(variant, 4, 2, 4);
        const auto hq = static_cast<std::size_t>(layout.physical_q_heads);
        const auto hkv = static_cast<std::size_t>(layout.kv_heads);
        auto q = random_vec(gen, hq * 4);
        auto k = random_vec(gen, hkv * 4);
        auto v = random_vec(gen, hkv * 4);
        std::vector<double> pos = {0.0};
        auto res = attend(q, k, v, pos, layout, params);
        REQUIRE(res.context.size() ==
                static_cast<std::size_t>(layout.output_heads) * 4);
        for (int o = 0; o < layout.output_heads; ++o) {
            const auto g = static_cast<std::size_t>(kv_group(layout, o));
            for (std::size_t j = 0; j < 4; ++j) {
                CHECK(res.context[static_cast<std::size_t>(o) * 4 + j] ==
                      doctest::Approx(v[g * 4 + j]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("softmax rows over unmasked entries sum to one") {
    auto params = build_thetas(8, 10000.0);
    auto layout = build_layout(Variant::ec, 4, 2, 8);
    std::mt19937 gen(3);
    const std::size_t n = 12;
    auto q = random_vec(gen, n * 4 * 8);
    auto k = random_vec(gen, n * 2 * 8);
    auto v = random_vec(gen, n * 2 * 8);
    auto pos = iota_positions(n);
    AttendOptions opt;
    opt.record_logits = true;
    auto res = attend(q, k, v, pos, layout, params, opt);
    for (int o = 0; o < layout.output_heads; ++o) {
        for (std::size_t t = 0; t < n; ++t) {
            double denom = 0.0;
            double row_max = -1e300;
            for (std::size_t s = 0; s <= t; ++s) {
                row_max = std::max(row_max, res.logit(o, t, s));
            }
            for (std::size_t s = 0; s <= t; ++s) {
                denom += std::exp(res.logit(o, t, s) - row_max);
            }
            double sum = 0.0;
            for (std::size_t s = 0; s <= t; ++s) {
                sum += std::exp(res.logit(o, t, s) - row_max) / denom;
            }
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("causality: future perturbations never reach earlier outputs") {
    auto params = build_thetas(8, 10000.0);
    auto layout = build_layout(Variant::ec, 2, 2, 8);
    std::mt19937 gen(4);
    const std::size_t n = 8;
    auto q = random_vec(gen, n * 2 * 8);
    auto k = random_vec(gen, n * 2 * 8);
    auto v = random_vec(gen, n * 2 * 8);
    auto pos = iota_positions(n);

    auto base = attend(q, k, v, pos, layout, params);

    const std::size_t j = 5;
    auto k2 = k;
    auto v2 = v;
    for (std::size_t i = 0; i < 2 * 8; ++i) {
        k2[j * 2 * 8 + i] += 3.5;
        v2[j * 2 * 8 + i] -= 1.25;
    }
    auto poked = attend(q, k2, v2, pos, layout, params);

    const std::size_t row_width = static_cast<std::size_t>(layout.output_heads) * 8;
    for (std::size_t t = 0; t < j; ++t) {
        for (std::size_t i = 0; i < row_width; ++i) {
            CHECK(base.context[t * row_width + i] == poked.context[t * row_width + i]); // exact
        }
    }
    // and position j itself does change
    double moved = 0.0;
    for (std::size_t i = 0; i < row_width; ++i) {
        moved += std::abs(base.context[j * row_width + i] - poked.context[j * row_width + i]);
    }
    CHECK(moved > 0.0);
}

TEST_CASE("ec with zeroed imaginary w_o rows collapses to rope") {
    const std::size_t hidden = 32;
    const int d = 8;
    auto params = build_thetas(d, 10000.0);
    auto rope = build_layout(Variant::rope, 4, 2, d);
    auto ec = build_layout(Variant::ec, 4, 2, d);

    const std::uint64_t seed = 2024;
    auto w_rope = generate_weights(rope, hidden, seed);
    auto w_ec = generate_weights(ec, hidden, seed);

    // same draw shares the query projection bit-exactly
    CHECK(w_rope.w_q.data == w_ec.w_q.data);
    CHECK(w_rope.w_k.data == w_ec.w_k.data);
    CHECK(w_rope.w_v.data == w_ec.w_v.data);

    // ec w_o: even heads copy the rope blocks, odd (imaginary) rows zeroed
    w_ec.w_o.data.assign(w_ec.w_o.data.size(), 0.0);
    for (int h = 0; h < rope.output_heads; ++h) {
        for (int j = 0; j < d; ++j) {
            const std::size_t src = (static_cast<std::size_t>(h) * d + j) * hidden;
            const std::size_t dst = ((static_cast<std::size_t>(2 * h)) * d + j) * hidden;
            std::copy_n(w_rope.w_o.data.begin() + src, hidden, w_ec.w_o.data.begin() + dst);
        }
    }

    std::mt19937 gen(6);
    const std::size_t n = 24;
    auto x = random_vec(gen, n * hidden);
    auto pos = iota_positions(n);

    auto out_rope = forward(x, n, hidden, w_rope, rope, params, pos);
    auto out_ec = forward(x, n, hidden, w_ec, ec, params, pos);
    CHECK(max_abs_diff(out_rope.output, out_ec.output) < 1e-10);
}

TEST_CASE("full layer output is shift invariant") {
    const std::size_t hidden = 16;
    const int d = 4;
    auto params = build_thetas(d, 10000.0);
    auto layout = build_layout(Variant::ec, 4, 2, d);
    auto proj = generate_weights(layout, hidden, 7);
    std::mt19937 gen(8);
    const std::size_t n = 10;
    auto x = random_vec(gen, n * hidden);

    auto base = forward(x, n, hidden, proj, layout, params, iota_positions(n));
    for (double off : {1.0, 1000.0, 1e6}) {
        auto shifted = forward(x, n, hidden, proj, layout, params, iota_positions(n, off));
        CHECK(max_abs_diff(base.output, shifted.output) < 1e-10);
    }
}

TEST_CASE("eh halves the consumed k/v rows but keeps output heads") {
    auto rope = build_layout(Variant::rope, 8, 4, 16);
    auto eh = build_layout(Variant::eh, 8, 4, 16);
    CHECK(eh.output_heads == rope.output_heads);
    CHECK(eh.kv_heads == rope.kv_heads / 2);
    CHECK(eh.physical_q_heads == rope.physical_q_heads / 2);

    // a forward pass accepts exactly half-width K/V tensors
    const std::size_t hidden = 16 * 8;
    auto params = build_thetas(16, 10000.0);
    auto proj = generate_weights(eh, hidden, 3);
    CHECK(proj.w_k.cols == static_cast<std::size_t>(rope.kv_heads) / 2 * 16);
    std::mt19937 gen(9);
    const std::size_t n = 6;
    auto x = random_vec(gen, n * hidden);
    auto out = forward(x, n, hidden, proj, eh, params, iota_positions(n));
    CHECK(out.attend.output_heads == 8);
    CHECK(out.output.size() == n * hidden);
}

TEST_CASE("attend rejects malformed inputs") {
    auto params = build_thetas(4, 10000.0);
    auto layout = build_layout(Variant::rope, 2, 2, 4);
    std::vector<double> empty;
    std::vector<double> q(2 * 4), k(2 * 4), v(2 * 4);
    CHECK_THROWS_AS(attend(empty, empty, empty, empty, layout, params), std::invalid_argument);
    std::vector<double> pos = {0.0};
    std::vector<double> q_short(3);
    CHECK_THROWS_AS(attend(q_short, k, v, pos, layout, params), std::invalid_argument);
    std::vector<double> neg_pos = {-1.0};
    CHECK_THROWS_AS(attend(q, k, v, neg_pos, layout, params), std::invalid_argument);
}

TEST_CASE("arbitrary position ids mask by value, not index") {
    auto params = build_thetas(4, 10000.0);
    auto layout = build_layout(Variant::rope, 1, 1, 4);
    std::mt19937 gen(15);
    const std::size_t n = 4;
    auto q = random_vec(gen, n * 4);
    auto k = random_vec(gen, n * 4);
    auto v = random_vec(gen, n * 4);
    std::vector<double> pos = {3.0, 0.0, 2.0, 1.0};
    AttendOptions opt;
    opt.record_logits = true;
    auto res = attend(q, k, v, pos, layout, params, opt);

    const double neg_inf = -std::numeric_limits<double>::infinity();
    // the token at position 0 (index 1) sees only itself
    for (std::size_t s = 0; s < n; ++s) {
        if (s == 1) {
            CHECK(res.logit(0, 1, s) != neg_inf);
        } else {
            CHECK(res.logit(0, 1, s) == neg_inf);
        }
    }
    // the token at position 3 (index 0) sees every key
    for (std::size_t s = 0; s < n; ++s) {
        CHECK(res.logit(0, 0, s) != neg_inf);
    }
    // and the position-0 token's context is exactly its own value row
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(res.context[1 * 4 + j] == doctest::Approx(v[1 * 4 + j]).epsilon(1e-12));
    }
}

TEST_CASE("all-masked query rows yield zeros and a flag") {
    // decode-style call where the query sits before every cached key
    auto params = build_thetas(4, 10000.0);
    auto layout = build_layout(Variant::rope, 1, 1, 4);
    std::mt19937 gen(10);
    auto q = random_vec(gen, 4);
    auto k = random_vec(gen, 2 * 4);
    auto v = random_vec(gen, 2 * 4);
    std::vector<double> q_pos = {1.0};
    std::vector<double> kv_pos = {5.0, 6.0};
    auto res = attend(q, q_pos, k, v, kv_pos, layout, params, {});
    REQUIRE(res.all_masked.size() == 1);
    CHECK(res.all_masked[0] == 1);
    for (double c : res.context) {
        CHECK(c == 0.0);
    }
}

TEST_CASE("attend results do not depend on the thread schedule") {
    auto params = build_thetas(8, 10000.0);
    auto layout = build_layout(Variant::ec, 4, 2, 8);
    std::mt19937 gen(12);
    const std::size_t n = 16;
    auto q = random_vec(gen, n * 4 * 8);
    auto k = random_vec(gen, n * 2 * 8);
    auto v = random_vec(gen, n * 2 * 8);
    auto pos = iota_positions(n);

    AttendOptions multi;
    multi.record_logits = true;
    auto a = attend(q, k, v, pos, layout, params, multi);

    AttendOptions single = multi;
    single.threads = 1;
    auto b = attend(q, k, v, pos, layout, params, single);
    CHECK(a.context == b.context); // bitwise
    CHECK(a.logits == b.logits);
}

TEST_CASE("project_output against the naive oracle") {
    std::mt19937 gen(11);
    Matrix w_o;
    w_o.rows = 4 * 4; // 4 heads of d=4
    w_o.cols = 8;
    w_o.data = random_vec(gen, w_o.rows * w_o.cols);
    const std::size_t n = 5;
    auto ctx = random_vec(gen, n * w_o.rows);

    auto got = project_output(ctx, n, w_o);
    auto want = oracle::matmul_naive(ctx, n, w_o.data, w_o.rows, w_o.cols);
    CHECK(max_abs_diff(got, want) < 1e-12);

    // selector matrix copies one head
    Matrix sel;
    sel.rows = w_o.rows;
    sel.cols = 4;
    sel.data.assign(sel.rows * sel.cols, 0.0);
    for (std::size_t j = 0; j < 4; ++j) {
        sel.data[(2 * 4 + j) * 4 + j] = 1.0; // head 2 -> output
    }
    auto picked = project_output(ctx, n, sel);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(picked[t * 4 + j] == ctx[t * w_o.rows + 2 * 4 + j]);
        }
    }

    // zero heads map to zero
    std::vector<double> zeros(n * w_o.rows, 0.0);
    for (double y : project_output(zeros, n, w_o)) {
        CHECK(y == 0.0);
    }

    std::vector<double> bad(n * (w_o.rows - 1));
    CHECK_THROWS_AS(project_output(bad, n, w_o), std::invalid_argument);
}

TEST_CASE("noise: zero sigma is bit-exact, parity routes sigmas") {
    auto params = build_thetas(8, 10000.0);
    auto layout = build_layout(Variant::ec, 2, 1, 8);
    std::mt19937 gen(13);
    const std::size_t n = 6;
    auto q = random_vec(gen, n * 2 * 8);
    auto k = random_vec(gen, n * 1 * 8);
    auto v = random_vec(gen, n * 1 * 8);
    auto pos = iota_positions(n);

    AttendOptions plain;
    plain.record_logits = true;
    auto base = attend(q, k, v, pos, layout, params, plain);

    AttendOptions zero = plain;
    zero.noise = NoiseSpec{0.0, 0.0, 999};
    auto zres = attend(q, k, v, pos, layout, params, zero);
    CHECK(base.logits == zres.logits);
    CHECK(base.context == zres.context);

    AttendOptions real_only = plain;
    real_only.noise = NoiseSpec{1.0, 0.0, 999};
    auto rres = attend(q, k, v, pos, layout, params, real_only);
    bool even_changed = false;
    for (int o = 0; o < layout.output_heads; ++o) {
        for (std::size_t t = 0; t < n; ++t) {
            for (std::size_t s = 0; s <= t; ++s) {
                if (o % 2 == 1) {
                    CHECK(rres.logit(o, t, s) == base.logit(o, t, s));
                } else if (rres.logit(o, t, s) != base.logit(o, t, s)) {
                    even_changed = true;
                }
            }
        }
    }
    CHECK(even_changed);
}

TEST_CASE("noise is deterministic per coordinates and sigma-accurate") {
    NoiseSpec spec{1.0, 1.0, 4242};
    const std::size_t n_kv = 100;
    const std::size_t n_q = 1000;
    std::vector<double> logits(n_q * n_kv, 0.0);
    std::vector<std::uint8_t> masked(n_q * n_kv, 0);
    inject_noise(logits, masked, spec, 3, false, n_kv);

    std::vector<double> again(n_q * n_kv, 0.0);
    inject_noise(again, masked, spec, 3, false, n_kv);
    CHECK(logits == again);

    // empirical std over 1e5 draws within 1%
    double sum = 0.0;
    double sq = 0.0;
    for (double x : logits) {
        sum += x;
        sq += x * x;
    }
    const double mean = sum / static_cast<double>(logits.size());
    const double stddev =
        std::sqrt(sq / static_cast<double>(logits.size()) - mean * mean);
    CHECK(stddev > 0.99);
    CHECK(stddev < 1.01);

    // masked entries stay untouched
    std::vector<double> ml(n_kv, 7.0);
    std::vector<std::uint8_t> mm(n_kv, 1);
    inject_noise(ml, mm, spec, 0, true, n_kv);
    for (double x : ml) {
        CHECK(x == 7.0);
    }

    NoiseSpec bad{-1.0, 0.0, 1};
    CHECK_THROWS_AS(inject_noise(ml, mm, bad, 0, false, n_kv), std::invalid_argument);
}

TEST_CASE("generated w_o real-head blocks match across layouts") {
    const std::size_t hidden = 24;
    const int d = 8;
    auto rope = build_layout(Variant::rope, 4, 2, d);
    auto ec = build_layout(Variant::ec, 4, 2, d);
    auto w_rope = generate_weights(rope, hidden, 321);
    auto w_ec = generate_weights(ec, hidden, 321);
    for (int h = 0; h < rope.output_heads; ++h) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(d) * hidden; ++i) {
            const std::size_t rope_idx = static_cast<std::size_t>(h) * d * hidden + i;
            const std::size_t ec_idx = static_cast<std::size_t>(2 * h) * d * hidden + i;
            CHECK(w_rope.w_o.data[rope_idx] == w_ec.w_o.data[ec_idx]);
        }
    }
}

TEST_CASE("weight blob round-trips through disk") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ropepp_wtest";
    fs::create_directories(dir);
    const fs::path blob = dir / "weights.bin";

    auto layout = build_layout(Variant::ec, 4, 2, 8);
    const std::size_t hidden = 32;
    auto proj = generate_weights(layout, hidden, 77);
    save_weights(blob, proj, layout, hidden);
    auto loaded = load_weights(blob, layout, hidden);

    CHECK(loaded.w_q.data == proj.w_q.data);
    CHECK(loaded.w_k.data == proj.w_k.data);
    CHECK(loaded.w_v.data == proj.w_v.data);
    CHECK(loaded.w_o.data == proj.w_o.data);

    // loading under a mismatched layout must fail
    auto other = build_layout(Variant::rope, 4, 2, 8);
    CHECK_THROWS(load_weights(blob, other, hidden));
    fs::remove_all(dir);
}
