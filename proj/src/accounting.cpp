#include "ropepp/accounting.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "ropepp/common.hpp"
#include "ropepp/rng.hpp"

namespace ropepp {

void validate(const ModelConfig& config) {
    require(config.hidden > 0 && config.layers > 0 && config.attn_heads > 0 &&
                config.kv_heads > 0 && config.vocab > 0 && config.intermediate > 0,
            "ModelConfig: all fields must be positive");
    require(config.hidden % config.attn_heads == 0,
            "ModelConfig: hidden must be divisible by attn_heads");
    require(config.attn_heads % config.kv_heads == 0,
            "ModelConfig: attn_heads must be divisible by kv_heads");
    require(config.head_dim() % 2 == 0, "ModelConfig: head_dim must be even");
}

HeadLayout layout_for(const ModelConfig& config, Variant variant) {
    validate(config);
    return build_layout(variant, config.attn_heads, config.kv_heads, config.head_dim());
}

std::uint64_t kv_cache_bytes(const ModelConfig& config, Variant variant, int dtype_bytes) {
    require(dtype_bytes > 0, "kv_cache_bytes: dtype_bytes must be positive");
    const HeadLayout layout = layout_for(config, variant);
    return 2ull * static_cast<std::uint64_t>(config.layers) *
           static_cast<std::uint64_t>(layout.kv_heads) *
           static_cast<std::uint64_t>(layout.head_dim) * static_cast<std::uint64_t>(dtype_bytes);
}

ProjectionParams projection_params(const ModelConfig& config, Variant variant) {
    const HeadLayout layout = layout_for(config, variant);
    const auto hidden = static_cast<std::uint64_t>(config.hidden);
    const auto d = static_cast<std::uint64_t>(layout.head_dim);
    ProjectionParams p;
    p.wq = hidden * static_cast<std::uint64_t>(layout.physical_q_heads) * d;
    p.wk = hidden * static_cast<std::uint64_t>(layout.kv_heads) * d;
    p.wv = hidden * static_cast<std::uint64_t>(layout.kv_heads) * d;
    p.wo = static_cast<std::uint64_t>(layout.output_heads) * d * hidden;
    return p;
}

FlopsBreakdown score_flops(const ModelConfig& config, Variant variant, std::uint64_t seq) {
    require(seq >= 1, "score_flops: seq must be >= 1");
    const HeadLayout layout = layout_for(config, variant);
    const ProjectionParams p = projection_params(config, variant);
    const auto layers = static_cast<std::uint64_t>(config.layers);
    const auto oh = static_cast<std::uint64_t>(layout.output_heads);
    const auto d = static_cast<std::uint64_t>(layout.head_dim);
    const std::uint64_t pairs = seq * (seq + 1) / 2; // causal (t, s<=t)

    FlopsBreakdown f;
    f.proj_qkv = layers * seq * p.qkv();
    f.proj_o = layers * seq * p.wo;
    f.logits = layers * oh * pairs * d;
    f.weighted_sum = layers * oh * pairs * d;
    return f;
}

std::uint64_t decode_flops(const ModelConfig& config, Variant variant, std::uint64_t seq) {
    require(seq >= 1, "decode_flops: seq must be >= 1");
    const HeadLayout layout = layout_for(config, variant);
    return 2ull * static_cast<std::uint64_t>(config.layers) *
           static_cast<std::uint64_t>(layout.output_heads) * seq *
           static_cast<std::uint64_t>(layout.head_dim);
}

Budget make_budget(const ModelConfig& config, Variant variant, int dtype_bytes) {
    Budget b;
    b.config = config;
    b.variant = variant;
    b.dtype_bytes = dtype_bytes;
    b.kv_bytes_per_token = kv_cache_bytes(config, variant, dtype_bytes);
    b.params = projection_params(config, variant);
    return b;
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

namespace {

float unit_gauss_f(std::uint64_t k) {
    return static_cast<float>(rng::gaussian(k));
}

// One decode step for one layer: rotated query heads against a rotated-key
// cache of length seq. Returns a checksum so the work cannot be elided.
float decode_layer(const float* q_rot,   // [output_heads][d]
                   const float* k_cache, // [seq][kv_heads*d]
                   const float* v_cache, const HeadLayout& layout, std::uint64_t seq,
                   double scale, float* logits, float* context) {
    const auto d = static_cast<std::size_t>(layout.head_dim);
    const auto hkv = static_cast<std::size_t>(layout.kv_heads);
    float checksum = 0.0f;
    for (int o = 0; o < layout.output_heads; ++o) {
        const auto group = static_cast<std::size_t>(kv_group(layout, o));
        const float* qv = q_rot + static_cast<std::size_t>(o) * d;
        float row_max = -std::numeric_limits<float>::infinity();
        for (std::uint64_t s = 0; s < seq; ++s) {
            const float* kv = k_cache + (s * hkv + group) * d;
            float dot = 0.0f;
            for (std::size_t j = 0; j < d; ++j) {
                dot += qv[j] * kv[j];
            }
            logits[s] = static_cast<float>(scale) * dot;
            row_max = std::max(row_max, logits[s]);
        }
        float denom = 0.0f;
        for (std::uint64_t s = 0; s < seq; ++s) {
            logits[s] = std::exp(logits[s] - row_max);
            denom += logits[s];
        }
        float* ctx = context + static_cast<std::size_t>(o) * d;
        std::fill(ctx, ctx + d, 0.0f);
        for (std::uint64_t s = 0; s < seq; ++s) {
            const float w = logits[s] / denom;
            const float* vv = v_cache + (s * hkv + group) * d;
            for (std::size_t j = 0; j < d; ++j) {
                ctx[j] += w * vv[j];
            }
        }
        checksum += ctx[0];
    }
    return checksum;
}

} // namespace

BenchReport bench_attend(const ModelConfig& config, Variant variant,
                         std::span<const std::uint64_t> seq_lengths, int repeats,
                         std::uint64_t seed) {
    require(repeats >= 1, "bench_attend: repeats must be >= 1");
    require(!seq_lengths.empty(), "bench_attend: no sequence lengths given");
    for (std::size_t i = 1; i < seq_lengths.size(); ++i) {
        require(seq_lengths[i - 1] <= seq_lengths[i],
                "bench_attend: seq_lengths must be sorted ascending");
    }

    const HeadLayout layout = layout_for(config, variant);
    const RotaryParams params = build_thetas(layout.head_dim, 10000.0);
    const auto d = static_cast<std::size_t>(layout.head_dim);
    const auto hkv = static_cast<std::size_t>(layout.kv_heads);
    const auto oh = static_cast<std::size_t>(layout.output_heads);
    const auto layers = static_cast<std::size_t>(config.layers);
    const double scale = 1.0 / std::sqrt(static_cast<double>(layout.head_dim));

    BenchReport report;
    report.config = config;
    report.variant = variant;
    report.dtype_bytes = static_cast<int>(sizeof(float));
    report.threads = 1;
    report.repeats = repeats;

    std::vector<float> q_rot(oh * d);
    std::vector<float> context(oh * d);
    volatile float sink = 0.0f;

    for (std::uint64_t seq : seq_lengths) {
        // Caches sized for exactly this context length so the byte figure is
        // measured, not derived. Keys are stored already rotated, as a
        // decoder would keep them.
        std::vector<float> k_cache(layers * seq * hkv * d);
        std::vector<float> v_cache(layers * seq * hkv * d);
        std::vector<float> logits(seq);
        for (std::size_t l = 0; l < layers; ++l) {
            for (std::uint64_t pos = 0; pos < seq; ++pos) {
                float* krow = k_cache.data() + (l * seq + pos) * hkv * d;
                float* vrow = v_cache.data() + (l * seq + pos) * hkv * d;
                for (std::size_t h = 0; h < hkv; ++h) {
                    for (std::size_t n = 0; n < d / 2; ++n) {
                        const rng::GaussPair g = rng::gaussian_pair(rng::key(seed, l * hkv + h, pos, n));
                        const double angle = params.thetas[n] * static_cast<double>(pos);
                        const double c = std::cos(angle);
                        const double s = std::sin(angle);
                        krow[h * d + 2 * n] = static_cast<float>(g.z0 * c - g.z1 * s);
                        krow[h * d + 2 * n + 1] = static_cast<float>(g.z0 * s + g.z1 * c);
                        const rng::GaussPair gv =
                            rng::gaussian_pair(rng::key(seed ^ 0x76, l * hkv + h, pos, n));
                        vrow[h * d + 2 * n] = static_cast<float>(gv.z0);
                        vrow[h * d + 2 * n + 1] = static_cast<float>(gv.z1);
                    }
                }
            }
        }
        // Fresh query per decode step, expanded and rotated to position seq-1.
        const auto hq = static_cast<std::size_t>(layout.physical_q_heads);
        std::vector<float> q_phys(hq * d);
        for (std::size_t i = 0; i < q_phys.size(); ++i) {
            q_phys[i] = unit_gauss_f(rng::key(seed ^ 0x71, seq, i));
        }
        const double q_pos = static_cast<double>(seq - 1);
        for (std::size_t h = 0; h < hq; ++h) {
            for (std::size_t n = 0; n < d / 2; ++n) {
                const double angle = params.thetas[n] * q_pos;
                const double c = std::cos(angle);
                const double s = std::sin(angle);
                const float x = q_phys[h * d + 2 * n];
                const float y = q_phys[h * d + 2 * n + 1];
                if (layout.variant == Variant::rope) {
                    q_rot[h * d + 2 * n] = static_cast<float>(x * c - y * s);
                    q_rot[h * d + 2 * n + 1] = static_cast<float>(x * s + y * c);
                } else {
                    float* real_dst = q_rot.data() + (2 * h) * d;
                    float* imag_dst = q_rot.data() + (2 * h + 1) * d;
                    real_dst[2 * n] = static_cast<float>(x * c - y * s);
                    real_dst[2 * n + 1] = static_cast<float>(x * s + y * c);
                    // -pi/2 pre-rotation folded in: (x, y) -> (y, -x)
                    imag_dst[2 * n] = static_cast<float>(y * c + x * s);
                    imag_dst[2 * n + 1] = static_cast<float>(y * s - x * c);
                }
            }
        }

        std::vector<double> times_us(static_cast<std::size_t>(repeats));
        for (int r = 0; r < repeats; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            float checksum = 0.0f;
            for (std::size_t l = 0; l < layers; ++l) {
                const float* kl = k_cache.data() + l * seq * hkv * d;
                const float* vl = v_cache.data() + l * seq * hkv * d;
                checksum += decode_layer(q_rot.data(), kl, vl, layout, seq, scale,
                                         logits.data(), context.data());
            }
            const auto t1 = std::chrono::steady_clock::now();
            sink = sink + checksum;
            times_us[static_cast<std::size_t>(r)] =
                std::chrono::duration<double, std::micro>(t1 - t0).count();
        }
        std::sort(times_us.begin(), times_us.end());
        const double median = times_us[times_us.size() / 2];

        BenchRow row;
        row.seq = seq;
        row.tpot_us = median;
        row.kv_bytes = (k_cache.size() + v_cache.size()) * sizeof(float);
        row.flops = decode_flops(config, variant, seq);
        report.rows.push_back(row);
    }
    (void)sink;
    return report;
}

} // namespace ropepp
