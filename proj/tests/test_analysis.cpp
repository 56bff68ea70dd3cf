#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "ropepp/analysis.hpp"

using namespace ropepp;

TEST_CASE("characteristic curves at the origin and d=2") {
    CHECK(char_curve_real(4096, 0.0) == 1.0);
    CHECK(char_curve_imag(4096, 0.0) == 0.0);
    for (double dt : {0.3, 2.0, 77.0}) {
        CHECK(char_curve_real(2, dt) == doctest::Approx(std::cos(dt)).epsilon(1e-15));
        CHECK(char_curve_imag(2, dt) == doctest::Approx(std::sin(dt)).epsilon(1e-15));
    }
    CHECK_THROWS_AS(char_curve_real(5, 1.0), std::invalid_argument);
}

TEST_CASE("sine integral against quadrature refinement") {
    CHECK(sine_integral(0.0) == 0.0);
    // Si(pi) is the Wilbraham-Gibbs constant
    CHECK(std::abs(sine_integral(std::numbers::pi) - oracle::si_quadrature(std::numbers::pi)) <
          1e-10);
    CHECK(sine_integral(std::numbers::pi) == doctest::Approx(1.8519370519824661703).epsilon(1e-12));
    for (double x : {0.25, 1.0, 5.0, 7.9, 8.1, 12.0, 40.0, 300.0}) {
        CHECK(std::abs(sine_integral(x) - oracle::si_quadrature(x)) < 1e-9);
    }
    // asymptote
    CHECK(std::abs(sine_integral(1e5) - std::numbers::pi / 2.0) < 1e-4);
}

TEST_CASE("cosine integral against quadrature refinement") {
    CHECK_THROWS_AS(cosine_integral(0.0), std::domain_error);
    CHECK_THROWS_AS(cosine_integral(-1.0), std::domain_error);
    CHECK(cosine_integral(1.0) == doctest::Approx(0.3374039229009681347).epsilon(1e-12));
    for (double x : {0.1, 0.5, 2.0, 7.9, 8.1, 25.0, 120.0}) {
        CHECK(std::abs(cosine_integral(x) - oracle::ci_quadrature(x)) < 1e-9);
    }
    // Ci decays like sin(x)/x
    CHECK(std::abs(cosine_integral(1e4)) < 2e-4);
}

TEST_CASE("integral curve matches direct quadrature of the integrand") {
    for (double dt : {1.0, 10.0, 100.0, 1000.0}) {
        const double imag = integral_curve(ScoreKind::imag, dt);
        const double real = integral_curve(ScoreKind::real, dt);
        CHECK(std::abs(imag - oracle::curve_integral_quadrature(true, dt)) < 1e-6);
        CHECK(std::abs(real - oracle::curve_integral_quadrature(false, dt)) < 1e-6);
    }
    // frozen reference values
    CHECK(integral_curve(ScoreKind::imag, 1000.0) == doctest::Approx(0.15963456305415857).epsilon(1e-10));
    CHECK(integral_curve(ScoreKind::real, 1000.0) == doctest::Approx(0.18769064251177900).epsilon(1e-10));

    // the imag channel plateaus while real keeps decaying: beyond the
    // crossover (between dt = 1000 and 2000 per quadrature) imag stays above
    CHECK(integral_curve(ScoreKind::imag, 1000.0) > 0.0);
    CHECK(integral_curve(ScoreKind::real, 1000.0) > integral_curve(ScoreKind::imag, 1000.0));
    for (double dt : {2000.0, 5000.0, 10000.0}) {
        CHECK(integral_curve(ScoreKind::imag, dt) > integral_curve(ScoreKind::real, dt));
    }

    CHECK(integral_curve(ScoreKind::imag, 0.0) == 0.0);
    CHECK(integral_curve(ScoreKind::imag, 1e-6) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK_THROWS_AS(integral_curve(ScoreKind::real, 0.0), std::domain_error);
    CHECK_THROWS_AS(integral_curve(ScoreKind::real, -1.0), std::domain_error);
}

TEST_CASE("discrete curve approaches the integral form as d grows") {
    double prev_re = 1e9;
    double prev_im = 1e9;
    for (int d : {64, 256, 1024, 4096}) {
        double max_re = 0.0;
        double max_im = 0.0;
        for (double e = 0.0; e <= 4.0; e += 0.25) {
            const double dt = std::round(std::pow(10.0, e));
            max_re = std::max(max_re, std::abs(char_curve_real(d, dt) -
                                               integral_curve(ScoreKind::real, dt)));
            max_im = std::max(max_im, std::abs(char_curve_imag(d, dt) -
                                               integral_curve(ScoreKind::imag, dt)));
        }
        CHECK(max_re < prev_re);
        CHECK(max_im < prev_im);
        prev_re = max_re;
        prev_im = max_im;
    }
    // the d=4096 curve sits within 0.02 of the normalized integral form
    CHECK(prev_re < 0.02);
    CHECK(prev_im < 0.02);
}

TEST_CASE("imag integral curve stays positive over the working range") {
    for (double e = -1.0; e <= 4.0; e += 0.125) {
        CHECK(integral_curve(ScoreKind::imag, std::pow(10.0, e)) > 0.0);
    }
}

TEST_CASE("real discrete curve decays relative to the origin") {
    for (double e = 0.0; e <= 4.0; e += 0.125) {
        CHECK(char_curve_real(4096, std::pow(10.0, e)) < 1.0);
    }
}

TEST_CASE("mc aggregation check, trivial closed forms") {
    auto imag0 = mc_aggregation_check(ScoreKind::imag, 0.3, 1.0, 8, 0, 10000, 42);
    CHECK(imag0.closed_form == 0.0);
    auto real0 = mc_aggregation_check(ScoreKind::real, 0.3, 1.0, 8, 0, 10000, 42);
    CHECK(real0.closed_form == doctest::Approx(2.0 * 1.0 * 4.0).epsilon(1e-12)); // 2 sigma^2 d/2
    CHECK(real0.mc_stderr > 0.0);
}

TEST_CASE("mc aggregation check matches closed form within 4 stderr") {
    auto chk = mc_aggregation_check(ScoreKind::real, 0.3, 1.0, 8, 13, 100000, 1234);
    CHECK(std::abs(chk.mc_estimate - chk.closed_form) <= 4.0 * chk.mc_stderr);
    auto chk2 = mc_aggregation_check(ScoreKind::imag, 0.3, 1.0, 8, 13, 100000, 1234);
    CHECK(std::abs(chk2.mc_estimate - chk2.closed_form) <= 4.0 * chk2.mc_stderr);
}

TEST_CASE("mc mean-score check, trivial and random configs") {
    auto imag0 = mc_mean_score_check(ScoreKind::imag, 0.0, 1.0, 8, 0, 10000, 7);
    CHECK(imag0.closed_form == 0.0);
    // mu=0, sigma=1, real, dt=0 -> 2 sigma^2 d/2 = d
    auto real0 = mc_mean_score_check(ScoreKind::real, 0.0, 1.0, 16, 0, 10000, 7);
    CHECK(real0.closed_form == doctest::Approx(16.0).epsilon(1e-12));
    CHECK(std::abs(real0.mc_estimate - real0.closed_form) <= 4.0 * real0.mc_stderr);

    auto chk = mc_mean_score_check(ScoreKind::real, 0.5, 0.8, 16, 40, 100000, 99);
    CHECK(std::abs(chk.mc_estimate - chk.closed_form) <= 4.0 * chk.mc_stderr);
}

TEST_CASE("mc checks reject bad parameters") {
    CHECK_THROWS_AS(mc_aggregation_check(ScoreKind::real, 0.0, 0.0, 8, 1, 1000, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(mc_mean_score_check(ScoreKind::real, 0.0, -1.0, 8, 1, 1000, 1),
                    std::invalid_argument);
}

TEST_CASE("mc checks are schedule independent") {
    auto multi = mc_aggregation_check(ScoreKind::real, 0.2, 1.0, 8, 5, 20000, 77);
    setenv("ROPEPP_THREADS", "1", 1);
    auto single = mc_aggregation_check(ScoreKind::real, 0.2, 1.0, 8, 5, 20000, 77);
    unsetenv("ROPEPP_THREADS");
    CHECK(multi.mc_estimate == single.mc_estimate);
    CHECK(multi.mc_stderr == single.mc_stderr);
}

TEST_CASE("coverage multipliers carry the expected signs") {
    // pick a frequency with theta*(L-1) < pi/2 so cos stays positive
    auto params = build_thetas(128, 10000.0);
    const int L = 64;
    const std::size_t n = 32; // theta = 0.01, theta*(L-1) = 0.63
    REQUIRE(params.thetas[n] * (L - 1) < std::numbers::pi / 2.0);

    auto rope = coverage_map(params, L, CoverageVariant::rope);
    auto pp = coverage_map(params, L, CoverageVariant::ropepp);

    const auto ee = static_cast<std::size_t>(TermKind::q_even_k_even);
    const auto eo = static_cast<std::size_t>(TermKind::q_even_k_odd);
    const auto oe = static_cast<std::size_t>(TermKind::q_odd_k_even);

    // rope, cos term: interval inside (0, 1], no negatives
    CHECK(rope.rows[n].combined[ee].lo > 0.0);
    CHECK(rope.rows[n].combined[ee].hi <= 1.0);
    CHECK_FALSE(rope.rows[n].combined[ee].saw_negative);
    // rope, -sin term: non-positive
    CHECK(rope.rows[n].combined[oe].saw_negative);
    CHECK(rope.rows[n].combined[oe].hi <= 0.0);

    // ropepp: the -cos multiplier from the imaginary channel turns the
    // q_even.k_odd term negative immediately (it is -1 at dt = 0)
    CHECK_FALSE(rope.rows[n].combined[eo].saw_negative);
    CHECK(pp.rows[n].combined[eo].saw_negative);
    CHECK(pp.rows[n].imag[eo].lo == doctest::Approx(-1.0));
}

TEST_CASE("coverage attained sets only grow from rope to ropepp") {
    auto params = build_thetas(64, 10000.0);
    const int L = 512;
    auto rope = coverage_map(params, L, CoverageVariant::rope);
    auto pp = coverage_map(params, L, CoverageVariant::ropepp);
    REQUIRE(rope.rows.size() == pp.rows.size());
    for (std::size_t n = 0; n < rope.rows.size(); ++n) {
        for (TermKind term : all_terms) {
            const auto ti = static_cast<std::size_t>(term);
            // the real channel is shared, so the union can only widen
            CHECK(pp.rows[n].combined[ti].lo <= rope.rows[n].combined[ti].lo);
            CHECK(pp.rows[n].combined[ti].hi >= rope.rows[n].combined[ti].hi);
            CHECK((pp.rows[n].combined[ti].saw_negative ||
                   !rope.rows[n].combined[ti].saw_negative));
            CHECK((pp.rows[n].combined[ti].saw_full_range ||
                   !rope.rows[n].combined[ti].saw_full_range));
        }
    }
}

TEST_CASE("full range triggers at half the length under ropepp") {
    // theta = 0.01 mid-band frequency; brute-force scan for the smallest L
    // whose grid attains both extremes within 1e-3
    auto params = build_thetas(128, 10000.0);
    const std::size_t n = 32;
    const auto eo = static_cast<std::size_t>(TermKind::q_even_k_odd);

    auto min_full = [&](CoverageVariant variant) {
        for (int L = 2; L < 4096; ++L) {
            auto rep = coverage_map(params, L, variant);
            if (rep.rows[n].combined[eo].saw_full_range) {
                return L;
            }
        }
        return -1;
    };
    const int l_rope = min_full(CoverageVariant::rope);
    const int l_pp = min_full(CoverageVariant::ropepp);
    // frozen from an independent scan of sin/cos extrema on the integer grid
    CHECK(l_rope == 468);
    CHECK(l_pp == 154);
    CHECK(l_pp <= l_rope / 2);
}

TEST_CASE("coverage handles the minimal grid") {
    auto params = build_thetas(8, 10000.0);
    auto rep = coverage_map(params, 2, CoverageVariant::ropepp);
    CHECK(rep.rows.size() == 4);
    for (const auto& row : rep.rows) {
        for (TermKind term : all_terms) {
            const auto ti = static_cast<std::size_t>(term);
            CHECK(row.combined[ti].lo >= -1.0);
            CHECK(row.combined[ti].hi <= 1.0);
            CHECK(row.combined[ti].lo <= row.combined[ti].hi);
        }
    }
    CHECK_THROWS_AS(coverage_map(params, 1, CoverageVariant::rope), std::invalid_argument);
}

TEST_CASE("csv emitters carry schema headers") {
    std::ostringstream curves;
    write_curves_csv(curves, {{0.0, 1.0, CurveKind::real_discrete}});
    CHECK(curves.str().find("# schema: ropepp.curves.v1") == 0);
    CHECK(curves.str().find("delta_t,kind,value") != std::string::npos);
    CHECK(curves.str().find("real_discrete") != std::string::npos);

    std::ostringstream cov;
    auto params = build_thetas(4, 10000.0);
    write_coverage_csv(cov, coverage_map(params, 8, CoverageVariant::ropepp));
    CHECK(cov.str().find("# schema: ropepp.coverage.v1") == 0);
    CHECK(cov.str().find("n,theta,term,channel,lo,hi,saw_negative,saw_full_range") !=
          std::string::npos);
    CHECK(cov.str().find("q_even.k_odd,imag,") != std::string::npos);
}
