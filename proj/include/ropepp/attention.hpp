#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ropepp/rotary.hpp"

namespace ropepp {

// Head layout variants:
//   rope - standard layout, one real head per physical query head
//   eh   - equal head count: physical query heads and KV heads are halved,
//          each physical head contributes a real and an imaginary output head
//   ec   - equal cache: KV heads unchanged, output heads doubled
enum class Variant { rope, eh, ec };

const char* variant_name(Variant v);

struct HeadLayout {
    Variant variant = Variant::rope;
    int base_heads = 0;    // reference query-head count H
    int base_kv_heads = 0; // reference KV-head count
    int head_dim = 0;
    int physical_q_heads = 0;
    int output_heads = 0;
    int kv_heads = 0;
    int group_size = 0; // output heads per KV head
};

HeadLayout build_layout(Variant variant, int base_heads, int base_kv_heads, int head_dim);

// True for output heads that carry the imaginary channel (odd index under
// eh/ec; never under rope).
bool is_imag_head(const HeadLayout& layout, int output_head);

// KV group an output head reads from.
int kv_group(const HeadLayout& layout, int output_head);

// Row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// Projection weights. The imaginary output heads are derived from the same
// w_q columns as their real twins; there is no separate imaginary projection.
struct ProjectionSet {
    Matrix w_q; // [hidden x physical_q_heads*d]
    Matrix w_k; // [hidden x kv_heads*d]
    Matrix w_v; // [hidden x kv_heads*d]
    Matrix w_o; // [output_heads*d x hidden]
};

// Gaussian score-noise probe. Deterministic per (seed, head, t, s).
struct NoiseSpec {
    double sigma_real = 0.0;
    double sigma_imag = 0.0;
    std::uint64_t seed = 0;
};

// Expands projected (not yet position-rotated) query heads to output heads:
// rope passes through; eh/ec interleave each physical head with its -pi/2
// rotation (even index = real head, odd = imaginary head).
// q: [n_tokens][physical_q_heads][d] -> [n_tokens][output_heads][d]
std::vector<double> expand_queries(std::span<const double> q, std::size_t n_tokens,
                                   const HeadLayout& layout);

// Adds N(0, sigma^2) noise to unmasked logits of one head laid out as
// [n_q x n_kv]; sigma is sigma_real for real-parity heads and sigma_imag for
// imaginary-parity heads. masked entries (flag 1) are untouched.
void inject_noise(std::span<double> logits, std::span<const std::uint8_t> masked,
                  const NoiseSpec& spec, int head, bool imag_parity, std::size_t n_kv);

struct AttendOptions {
    bool causal = true;
    double scale = 0.0; // <= 0 means 1/sqrt(head_dim)
    std::optional<NoiseSpec> noise;
    bool record_logits = false;
    int threads = 0; // 0 = ROPEPP_THREADS / hardware
};

struct AttendResult {
    std::size_t n_q = 0;
    std::size_t n_kv = 0;
    int output_heads = 0;
    int head_dim = 0;
    std::vector<double> context;          // [n_q][output_heads][d]
    std::vector<std::uint8_t> all_masked; // [n_q], rows with no unmasked key
    std::vector<double> logits;           // if recorded: [output_heads][n_q][n_kv], -inf where masked

    double logit(int head, std::size_t t, std::size_t s) const {
        return logits[(static_cast<std::size_t>(head) * n_q + t) * n_kv + s];
    }
};

// Full attention pass on projected tensors.
//   q: [n_q][physical_q_heads][d], k/v: [n_kv][kv_heads][d]
// Causal masking hides keys with kv_pos > q_pos. Softmax rows are computed
// over unmasked entries; all-masked rows yield zero context and a flag.
AttendResult attend(std::span<const double> q, std::span<const double> q_positions,
                    std::span<const double> k, std::span<const double> v,
                    std::span<const double> kv_positions, const HeadLayout& layout,
                    const RotaryParams& params, const AttendOptions& options = {});

// Self-attention convenience: one position array for queries and keys.
AttendResult attend(std::span<const double> q, std::span<const double> k,
                    std::span<const double> v, std::span<const double> positions,
                    const HeadLayout& layout, const RotaryParams& params,
                    const AttendOptions& options = {});

// contexts: [n_tokens][output_heads*d] times w_o -> [n_tokens][hidden].
std::vector<double> project_output(std::span<const double> head_contexts, std::size_t n_tokens,
                                   const Matrix& w_o);

struct ForwardResult {
    std::vector<double> output; // [n_tokens][hidden]
    AttendResult attend;
};

// One attention block: QKV projections, attend, output projection. No biases.
ForwardResult forward(std::span<const double> x, std::size_t n_tokens, std::size_t hidden,
                      const ProjectionSet& proj, const HeadLayout& layout,
                      const RotaryParams& params, std::span<const double> positions,
                      const AttendOptions& options = {});

} // namespace ropepp
