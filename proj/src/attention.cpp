#include "ropepp/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ropepp/common.hpp"
#include "ropepp/parallel.hpp"
#include "ropepp/rng.hpp"

namespace ropepp {

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::rope: return "rope";
        case Variant::eh: return "eh";
        case Variant::ec: return "ec";
    }
    return "?";
}

HeadLayout build_layout(Variant variant, int base_heads, int base_kv_heads, int head_dim) {
    require(base_heads >= 1, "build_layout: base_heads must be >= 1");
    require(base_kv_heads >= 1, "build_layout: base_kv_heads must be >= 1");
    require(head_dim >= 2 && head_dim % 2 == 0, "build_layout: head_dim must be even and >= 2");
    require(base_heads % base_kv_heads == 0,
            "build_layout: base_heads must be divisible by base_kv_heads");

    HeadLayout layout;
    layout.variant = variant;
    layout.base_heads = base_heads;
    layout.base_kv_heads = base_kv_heads;
    layout.head_dim = head_dim;

    switch (variant) {
        case Variant::rope:
            layout.physical_q_heads = base_heads;
            layout.output_heads = base_heads;
            layout.kv_heads = base_kv_heads;
            break;
        case Variant::ec:
            layout.physical_q_heads = base_heads;
            layout.output_heads = 2 * base_heads;
            layout.kv_heads = base_kv_heads;
            break;
        case Variant::eh:
            require(base_heads % 2 == 0, "build_layout: eh requires even base_heads");
            require(base_kv_heads % 2 == 0, "build_layout: eh requires even base_kv_heads");
            layout.physical_q_heads = base_heads / 2;
            layout.output_heads = base_heads;
            layout.kv_heads = base_kv_heads / 2;
            break;
    }
    layout.group_size = layout.output_heads / layout.kv_heads;
    return layout;
}

bool is_imag_head(const HeadLayout& layout, int output_head) {
    return layout.variant != Variant::rope && output_head % 2 == 1;
}

int kv_group(const HeadLayout& layout, int output_head) {
    return output_head / layout.group_size;
}

std::vector<double> expand_queries(std::span<const double> q, std::size_t n_tokens,
                                   const HeadLayout& layout) {
    const auto d = static_cast<std::size_t>(layout.head_dim);
    const auto hq = static_cast<std::size_t>(layout.physical_q_heads);
    require(q.size() == n_tokens * hq * d, "expand_queries: q shape mismatch");

    if (layout.variant == Variant::rope) {
        return std::vector<double>(q.begin(), q.end());
    }

    const auto oh = static_cast<std::size_t>(layout.output_heads);
    std::vector<double> out(n_tokens * oh * d);
    for (std::size_t t = 0; t < n_tokens; ++t) {
        for (std::size_t h = 0; h < hq; ++h) {
            const double* src = q.data() + (t * hq + h) * d;
            double* real_dst = out.data() + (t * oh + 2 * h) * d;
            double* imag_dst = real_dst + d;
            for (std::size_t j = 0; j < d; j += 2) {
                real_dst[j] = src[j];
                real_dst[j + 1] = src[j + 1];
                imag_dst[j] = src[j + 1];
                imag_dst[j + 1] = -src[j];
            }
        }
    }
    return out;
}

void inject_noise(std::span<double> logits, std::span<const std::uint8_t> masked,
                  const NoiseSpec& spec, int head, bool imag_parity, std::size_t n_kv) {
    require(spec.sigma_real >= 0.0 && spec.sigma_imag >= 0.0,
            "inject_noise: sigma must be non-negative");
    require(n_kv > 0 && logits.size() % n_kv == 0, "inject_noise: bad logits shape");
    require(masked.size() == logits.size(), "inject_noise: mask shape mismatch");

    const double sigma = imag_parity ? spec.sigma_imag : spec.sigma_real;
    if (sigma == 0.0) {
        return;
    }
    const std::uint64_t head_key = rng::key(spec.seed, static_cast<std::uint64_t>(head));
    for (std::size_t t = 0; t < logits.size() / n_kv; ++t) {
        for (std::size_t s = 0; s < n_kv; ++s) {
            const std::size_t idx = t * n_kv + s;
            if (masked[idx]) {
                continue;
            }
            logits[idx] += sigma * rng::gaussian(rng::key(head_key, t, s));
        }
    }
}

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// Position-rotates every head vector of a [n][heads][d] tensor in place.
void rotate_all(std::vector<double>& tensor, std::span<const double> positions,
                std::size_t heads, const RotaryParams& params) {
    const auto d = static_cast<std::size_t>(params.head_dim);
    const std::size_t half = d / 2;
    for (std::size_t t = 0; t < positions.size(); ++t) {
        for (std::size_t n = 0; n < half; ++n) {
            const double angle = params.thetas[n] * positions[t];
            const double c = std::cos(angle);
            const double s = std::sin(angle);
            double* base = tensor.data() + t * heads * d;
            for (std::size_t h = 0; h < heads; ++h) {
                double* pair = base + h * d + 2 * n;
                const double x = pair[0];
                const double y = pair[1];
                pair[0] = x * c - y * s;
                pair[1] = x * s + y * c;
            }
        }
    }
}

} // namespace

AttendResult attend(std::span<const double> q, std::span<const double> q_positions,
                    std::span<const double> k, std::span<const double> v,
                    std::span<const double> kv_positions, const HeadLayout& layout,
                    const RotaryParams& params, const AttendOptions& options) {
    const auto d = static_cast<std::size_t>(layout.head_dim);
    const auto hq = static_cast<std::size_t>(layout.physical_q_heads);
    const auto hkv = static_cast<std::size_t>(layout.kv_heads);
    const auto oh = static_cast<std::size_t>(layout.output_heads);
    const std::size_t n_q = q_positions.size();
    const std::size_t n_kv = kv_positions.size();

    require(layout.head_dim == params.head_dim, "attend: layout/params head_dim mismatch");
    require(n_q > 0 && n_kv > 0, "attend: empty sequence");
    require(q.size() == n_q * hq * d, "attend: q shape mismatch");
    require(k.size() == n_kv * hkv * d, "attend: k shape mismatch");
    require(v.size() == n_kv * hkv * d, "attend: v shape mismatch");
    for (double p : q_positions) {
        require(p >= 0.0, "attend: positions must be non-negative");
    }
    for (double p : kv_positions) {
        require(p >= 0.0, "attend: positions must be non-negative");
    }
    if (options.noise) {
        require(options.noise->sigma_real >= 0.0 && options.noise->sigma_imag >= 0.0,
                "attend: noise sigma must be non-negative");
    }

    const double scale = options.scale > 0.0
                             ? options.scale
                             : 1.0 / std::sqrt(static_cast<double>(layout.head_dim));

    // Expand queries, then rotate queries and keys by their positions.
    std::vector<double> qx = expand_queries(q, n_q, layout);
    rotate_all(qx, q_positions, oh, params);
    std::vector<double> kx(k.begin(), k.end());
    rotate_all(kx, kv_positions, hkv, params);

    AttendResult result;
    result.n_q = n_q;
    result.n_kv = n_kv;
    result.output_heads = layout.output_heads;
    result.head_dim = layout.head_dim;
    result.context.assign(n_q * oh * d, 0.0);
    result.all_masked.assign(n_q, 0);
    if (options.record_logits) {
        result.logits.assign(oh * n_q * n_kv, neg_inf);
    }

    // Causal mask depends only on positions, shared by all heads.
    std::vector<std::uint8_t> masked(n_q * n_kv, 0);
    std::vector<std::uint8_t> row_all_masked(n_q, 0);
    for (std::size_t t = 0; t < n_q; ++t) {
        bool any_open = false;
        for (std::size_t s = 0; s < n_kv; ++s) {
            const bool m = options.causal && kv_positions[s] > q_positions[t];
            masked[t * n_kv + s] = m ? 1 : 0;
            any_open = any_open || !m;
        }
        row_all_masked[t] = any_open ? 0 : 1;
    }
    for (std::size_t t = 0; t < n_q; ++t) {
        result.all_masked[t] = row_all_masked[t];
    }

    parallel_for(oh, options.threads, [&](std::size_t o) {
        const auto group = static_cast<std::size_t>(kv_group(layout, static_cast<int>(o)));
        const bool imag_parity = is_imag_head(layout, static_cast<int>(o));
        std::vector<double> logits(n_q * n_kv, neg_inf);

        for (std::size_t t = 0; t < n_q; ++t) {
            const double* qv = qx.data() + (t * oh + o) * d;
            for (std::size_t s = 0; s < n_kv; ++s) {
                if (masked[t * n_kv + s]) {
                    continue;
                }
                const double* kv = kx.data() + (s * hkv + group) * d;
                double dot = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    dot += qv[j] * kv[j];
                }
                logits[t * n_kv + s] = scale * dot;
            }
        }

        if (options.noise) {
            inject_noise(logits, masked, *options.noise, static_cast<int>(o), imag_parity, n_kv);
        }

        if (options.record_logits) {
            std::copy(logits.begin(), logits.end(),
                      result.logits.begin() + static_cast<std::ptrdiff_t>(o * n_q * n_kv));
        }

        // Stable softmax per row over unmasked entries, then weighted V sum.
        for (std::size_t t = 0; t < n_q; ++t) {
            if (row_all_masked[t]) {
                continue; // context stays zero
            }
            double row_max = neg_inf;
            for (std::size_t s = 0; s < n_kv; ++s) {
                if (!masked[t * n_kv + s]) {
                    row_max = std::max(row_max, logits[t * n_kv + s]);
                }
            }
            double denom = 0.0;
            for (std::size_t s = 0; s < n_kv; ++s) {
                if (!masked[t * n_kv + s]) {
                    denom += std::exp(logits[t * n_kv + s] - row_max);
                }
            }
            double* ctx = result.context.data() + (t * oh + o) * d;
            for (std::size_t s = 0; s < n_kv; ++s) {
                if (masked[t * n_kv + s]) {
                    continue;
                }
                const double w = std::exp(logits[t * n_kv + s] - row_max) / denom;
                const double* vv = v.data() + (s * hkv + group) * d;
                for (std::size_t j = 0; j < d; ++j) {
                    ctx[j] += w * vv[j];
                }
            }
        }
    });

    return result;
}

AttendResult attend(std::span<const double> q, std::span<const double> k,
                    std::span<const double> v, std::span<const double> positions,
                    const HeadLayout& layout, const RotaryParams& params,
                    const AttendOptions& options) {
    return attend(q, positions, k, v, positions, layout, params, options);
}

std::vector<double> project_output(std::span<const double> head_contexts, std::size_t n_tokens,
                                   const Matrix& w_o) {
    require(n_tokens > 0, "project_output: empty input");
    require(head_contexts.size() == n_tokens * w_o.rows,
            "project_output: concatenated head width does not match w_o");

    std::vector<double> out(n_tokens * w_o.cols, 0.0);
    for (std::size_t t = 0; t < n_tokens; ++t) {
        const double* row = head_contexts.data() + t * w_o.rows;
        double* dst = out.data() + t * w_o.cols;
        for (std::size_t i = 0; i < w_o.rows; ++i) {
            const double x = row[i];
            const double* wrow = w_o.data.data() + i * w_o.cols;
            for (std::size_t j = 0; j < w_o.cols; ++j) {
                dst[j] += x * wrow[j];
            }
        }
    }
    return out;
}

namespace {

// y [n x cols] = x [n x rows] * w [rows x cols]
std::vector<double> matmul(std::span<const double> x, std::size_t n, const Matrix& w,
                           const char* who) {
    require(x.size() == n * w.rows, std::string(who) + ": input width does not match weights");
    std::vector<double> y(n * w.cols, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        const double* row = x.data() + t * w.rows;
        double* dst = y.data() + t * w.cols;
        for (std::size_t i = 0; i < w.rows; ++i) {
            const double xi = row[i];
            const double* wrow = w.data.data() + i * w.cols;
            for (std::size_t j = 0; j < w.cols; ++j) {
                dst[j] += xi * wrow[j];
            }
        }
    }
    return y;
}

} // namespace

ForwardResult forward(std::span<const double> x, std::size_t n_tokens, std::size_t hidden,
                      const ProjectionSet& proj, const HeadLayout& layout,
                      const RotaryParams& params, std::span<const double> positions,
                      const AttendOptions& options) {
    require(x.size() == n_tokens * hidden, "forward: x shape mismatch");
    require(proj.w_q.rows == hidden && proj.w_k.rows == hidden && proj.w_v.rows == hidden,
            "forward: projection input width mismatch");
    require(proj.w_q.cols ==
                static_cast<std::size_t>(layout.physical_q_heads * layout.head_dim),
            "forward: w_q output width mismatch");
    require(proj.w_k.cols == static_cast<std::size_t>(layout.kv_heads * layout.head_dim),
            "forward: w_k output width mismatch");
    require(proj.w_v.cols == static_cast<std::size_t>(layout.kv_heads * layout.head_dim),
            "forward: w_v output width mismatch");
    require(proj.w_o.rows == static_cast<std::size_t>(layout.output_heads * layout.head_dim) &&
                proj.w_o.cols == hidden,
            "forward: w_o shape mismatch");

    const std::vector<double> q = matmul(x, n_tokens, proj.w_q, "forward/w_q");
    const std::vector<double> k = matmul(x, n_tokens, proj.w_k, "forward/w_k");
    const std::vector<double> v = matmul(x, n_tokens, proj.w_v, "forward/w_v");

    ForwardResult result;
    result.attend = attend(q, k, v, positions, layout, params, options);
    result.output = project_output(result.attend.context, n_tokens, proj.w_o);
    return result;
}

} // namespace ropepp
