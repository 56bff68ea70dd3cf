#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ropepp/attention.hpp"

namespace ropepp {

// Model hyper-parameters as they appear in config files.
struct ModelConfig {
    int hidden = 0;
    int intermediate = 0;
    int layers = 0;
    int attn_heads = 0;
    int kv_heads = 0;
    int vocab = 0;

    int head_dim() const { return attn_heads > 0 ? hidden / attn_heads : 0; }
};

void validate(const ModelConfig& config);

HeadLayout layout_for(const ModelConfig& config, Variant variant);

// KV cache bytes per token across all layers: 2 (K and V) * layers *
// kv_heads(variant) * head_dim * dtype_bytes.
std::uint64_t kv_cache_bytes(const ModelConfig& config, Variant variant, int dtype_bytes);

struct ProjectionParams {
    std::uint64_t wq = 0;
    std::uint64_t wk = 0;
    std::uint64_t wv = 0;
    std::uint64_t wo = 0;

    std::uint64_t qkv() const { return wq + wk + wv; }
    std::uint64_t total() const { return wq + wk + wv + wo; }
};

ProjectionParams projection_params(const ModelConfig& config, Variant variant);

// Multiply-add counts for one full causal pass over `seq` tokens.
struct FlopsBreakdown {
    std::uint64_t proj_qkv = 0;
    std::uint64_t proj_o = 0;
    std::uint64_t logits = 0;       // output_heads * causal pairs * head_dim
    std::uint64_t weighted_sum = 0; // same shape as logits

    std::uint64_t total() const { return proj_qkv + proj_o + logits + weighted_sum; }
};

FlopsBreakdown score_flops(const ModelConfig& config, Variant variant, std::uint64_t seq);

// Multiply-adds for decoding a single token against a cache of `seq` entries
// (the quantity the benchmark rows report).
std::uint64_t decode_flops(const ModelConfig& config, Variant variant, std::uint64_t seq);

struct Budget {
    ModelConfig config;
    Variant variant = Variant::rope;
    int dtype_bytes = 2;
    std::uint64_t kv_bytes_per_token = 0;
    ProjectionParams params;

    FlopsBreakdown flops(std::uint64_t seq) const { return score_flops(config, variant, seq); }
};

Budget make_budget(const ModelConfig& config, Variant variant, int dtype_bytes = 2);

// ---------------------------------------------------------------------------
// Decode micro-benchmark: single-threaded, float32 arrays, rotated keys
// cached. Counts only attention math (logits, softmax, weighted sum); the
// projections and MLP are excluded since they do not depend on context
// length. Memory figures cover the KV cache arrays only.
// ---------------------------------------------------------------------------

struct BenchRow {
    std::uint64_t seq = 0;
    double tpot_us = 0.0;      // median wall clock per decoded token
    std::uint64_t kv_bytes = 0; // measured size of the allocated cache arrays
    std::uint64_t flops = 0;   // decode_flops at this context length
};

struct BenchReport {
    ModelConfig config;
    Variant variant = Variant::rope;
    int dtype_bytes = 4; // float32 path
    int threads = 1;
    int repeats = 0;
    std::vector<BenchRow> rows;
};

BenchReport bench_attend(const ModelConfig& config, Variant variant,
                         std::span<const std::uint64_t> seq_lengths, int repeats,
                         std::uint64_t seed);

} // namespace ropepp
