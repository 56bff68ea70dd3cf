// ropepp command-line tool: verification batteries, curve/coverage exports,
// single-block attention runs, and cache/parameter/TPOT accounting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ropepp/accounting.hpp"
#include "ropepp/analysis.hpp"
#include "ropepp/attention.hpp"
#include "ropepp/rng.hpp"
#include "ropepp/rotary.hpp"
#include "ropepp/scaling.hpp"
#include "ropepp/weights.hpp"

using nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_check_failed = 1;
constexpr int exit_usage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- flat key = value config files -----------------------------------------

using KvMap = std::map<std::string, std::string>;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

KvMap parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot open config file: " + path);
    }
    KvMap kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

const std::set<std::string> known_keys = {
    "model.hidden", "model.intermediate", "model.layers",    "model.attn_heads",
    "model.kv_heads", "model.vocab",      "rotary.base",     "scaling.kind",
    "scaling.new_base", "scaling.factor",
};

void reject_unknown_keys(const KvMap& kv, const std::string& path) {
    for (const auto& [key, value] : kv) {
        if (!known_keys.count(key)) {
            throw UsageError(path + ": unknown key '" + key + "'");
        }
    }
}

int kv_int(const KvMap& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) {
        throw UsageError("config is missing required key '" + key + "'");
    }
    return std::stoi(it->second);
}

ropepp::ModelConfig model_from_kv(const KvMap& kv) {
    ropepp::ModelConfig cfg;
    cfg.hidden = kv_int(kv, "model.hidden");
    cfg.intermediate = kv_int(kv, "model.intermediate");
    cfg.layers = kv_int(kv, "model.layers");
    cfg.attn_heads = kv_int(kv, "model.attn_heads");
    cfg.kv_heads = kv_int(kv, "model.kv_heads");
    cfg.vocab = kv_int(kv, "model.vocab");
    ropepp::validate(cfg);
    return cfg;
}

ropepp::ScalingSpec scaling_from_kv(const KvMap& kv) {
    ropepp::ScalingSpec spec;
    const auto it = kv.find("scaling.kind");
    if (it == kv.end() || it->second == "none") {
        return spec;
    }
    if (it->second == "ntk_rebase") {
        spec.kind = ropepp::ScalingKind::ntk_rebase;
        if (!kv.count("scaling.new_base")) {
            throw UsageError("scaling.kind = ntk_rebase requires scaling.new_base");
        }
        spec.new_base = std::stod(kv.at("scaling.new_base"));
    } else if (it->second == "linear_pi") {
        spec.kind = ropepp::ScalingKind::linear_pi;
        if (!kv.count("scaling.factor")) {
            throw UsageError("scaling.kind = linear_pi requires scaling.factor");
        }
        spec.factor = std::stod(kv.at("scaling.factor"));
    } else {
        throw UsageError("unknown scaling.kind '" + it->second + "'");
    }
    return spec;
}

ropepp::Variant parse_variant(const std::string& name) {
    if (name == "rope") return ropepp::Variant::rope;
    if (name == "eh") return ropepp::Variant::eh;
    if (name == "ec") return ropepp::Variant::ec;
    throw UsageError("unknown variant '" + name + "' (expected rope|eh|ec)");
}

void write_output(const std::string& out_path, const std::string& payload) {
    if (out_path.empty() || out_path == "-") {
        std::cout << payload;
        return;
    }
    std::ofstream out(out_path);
    if (!out) {
        throw UsageError("cannot open output file: " + out_path);
    }
    out << payload;
}

json config_json(const ropepp::ModelConfig& cfg) {
    return json{{"hidden", cfg.hidden},     {"intermediate", cfg.intermediate},
                {"layers", cfg.layers},     {"attn_heads", cfg.attn_heads},
                {"kv_heads", cfg.kv_heads}, {"vocab", cfg.vocab},
                {"head_dim", cfg.head_dim()}};
}

// --- verify ----------------------------------------------------------------

struct DevTracker {
    std::int64_t cases = 0;
    double max_dev = 0.0;

    void note(double a, double b, double ref_mag) {
        ++cases;
        max_dev = std::max(max_dev, std::abs(a - b) / (1.0 + ref_mag));
    }
};

int cmd_verify(std::uint64_t seed, std::vector<int> sizes, std::int64_t cases,
               const std::string& out_path) {
    if (sizes.empty()) {
        sizes = {2, 8, 64, 128};
    }
    for (int d : sizes) {
        if (d < 2 || d % 2 != 0) {
            throw UsageError("--sizes entries must be even and >= 2");
        }
    }

    const double tol = 1e-10;
    DevTracker tri_real, tri_imag, shift, quarter;

    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist;
    // positions span a 64k context; far beyond that the absolute-form angle
    // theta*t loses enough ulps to double precision to crowd the tolerance
    std::uniform_int_distribution<int> pos_dist(0, (1 << 16) - 1);

    const std::int64_t per_d =
        std::max<std::int64_t>(1, cases / static_cast<std::int64_t>(sizes.size()));
    for (int d : sizes) {
        const auto params = ropepp::build_thetas(d, 10000.0);
        std::vector<double> q(static_cast<std::size_t>(d));
        std::vector<double> k(static_cast<std::size_t>(d));
        for (std::int64_t it = 0; it < per_d; ++it) {
            for (double& x : q) x = dist(gen);
            for (double& x : k) x = dist(gen);
            const double t = pos_dist(gen);
            const double s = pos_dist(gen);

            const auto sp = ropepp::score_complex_oracle(q, k, t, s, params);
            const double re_rel = ropepp::score_real_relative(q, k, t - s, params);
            const double im_rel = ropepp::score_imag_relative(q, k, t - s, params);
            const double re_abs =
                ropepp::score_absolute(q, k, t, s, params, ropepp::ScoreKind::real);
            const double im_abs =
                ropepp::score_absolute(q, k, t, s, params, ropepp::ScoreKind::imag);

            tri_real.note(re_rel, sp.real, std::abs(sp.real));
            tri_real.note(re_abs, sp.real, std::abs(sp.real));
            tri_imag.note(im_rel, sp.imag, std::abs(sp.imag));
            tri_imag.note(im_abs, sp.imag, std::abs(sp.imag));

            if (it % 10 == 0) {
                const double c = pos_dist(gen);
                shift.note(
                    ropepp::score_absolute(q, k, t + c, s + c, params, ropepp::ScoreKind::real),
                    re_abs, std::abs(re_abs));
                shift.note(
                    ropepp::score_absolute(q, k, t + c, s + c, params, ropepp::ScoreKind::imag),
                    im_abs, std::abs(im_abs));
            }
            if (it % 10 == 1) {
                const auto q_plus = ropepp::rotate_quarter_pos(q);
                quarter.note(ropepp::score_imag_relative(q_plus, k, t - s, params), re_rel,
                             std::abs(re_rel));
                quarter.note(
                    ropepp::score_real_relative(ropepp::rotate_quarter_neg(q), k, t - s, params),
                    im_rel, std::abs(im_rel));
            }
        }
    }

    auto check_json = [tol](const char* name, const DevTracker& t) {
        return json{{"name", name},
                    {"cases", t.cases},
                    {"max_dev", t.max_dev},
                    {"tolerance", tol},
                    {"passed", t.max_dev <= tol}};
    };

    json report;
    report["schema"] = "ropepp.verify.v1";
    report["seed"] = seed;
    report["sizes"] = sizes;
    report["checks"] = json::array({check_json("tripartite_real", tri_real),
                                    check_json("tripartite_imag", tri_imag),
                                    check_json("shift_invariance", shift),
                                    check_json("quarter_turn_identity", quarter)});
    const bool passed = tri_real.max_dev <= tol && tri_imag.max_dev <= tol &&
                        shift.max_dev <= tol && quarter.max_dev <= tol;
    report["passed"] = passed;
    write_output(out_path, report.dump(2) + "\n");
    return passed ? exit_ok : exit_check_failed;
}

// --- curves ----------------------------------------------------------------

int cmd_curves(int d, double max_dt, int grid, std::vector<std::string> kind_names,
               const std::string& out_path) {
    if (max_dt < 1.0) {
        throw UsageError("--max-dt must be >= 1");
    }
    if (grid < 1) {
        throw UsageError("--grid must be >= 1");
    }
    std::set<ropepp::CurveKind> kinds;
    if (kind_names.empty()) {
        kind_names = {"real", "imag"};
    }
    for (const auto& name : kind_names) {
        if (name == "real") {
            kinds.insert(ropepp::CurveKind::real_discrete);
            kinds.insert(ropepp::CurveKind::real_integral);
        } else if (name == "imag") {
            kinds.insert(ropepp::CurveKind::imag_discrete);
            kinds.insert(ropepp::CurveKind::imag_integral);
        } else {
            throw UsageError("--kinds entries must be real|imag");
        }
    }

    std::vector<double> grid_points = {0.0};
    const double hi = std::log10(max_dt);
    for (int i = 0; i < grid; ++i) {
        const double e = grid == 1 ? hi : hi * static_cast<double>(i) / (grid - 1);
        grid_points.push_back(std::pow(10.0, e));
    }

    std::vector<ropepp::CurveSample> samples;
    for (double dt : grid_points) {
        for (ropepp::CurveKind kind : kinds) {
            double value;
            switch (kind) {
                case ropepp::CurveKind::real_discrete:
                    value = ropepp::char_curve_real(d, dt);
                    break;
                case ropepp::CurveKind::imag_discrete:
                    value = ropepp::char_curve_imag(d, dt);
                    break;
                case ropepp::CurveKind::real_integral:
                    if (dt <= 0.0) {
                        continue; // outside the real integral's domain
                    }
                    value = ropepp::integral_curve(ropepp::ScoreKind::real, dt);
                    break;
                case ropepp::CurveKind::imag_integral:
                default:
                    value = ropepp::integral_curve(ropepp::ScoreKind::imag, dt);
                    break;
            }
            samples.push_back({dt, value, kind});
        }
    }

    std::ostringstream os;
    ropepp::write_curves_csv(os, samples);
    write_output(out_path, os.str());
    return exit_ok;
}

// --- coverage ----------------------------------------------------------------

int cmd_coverage(int d, double base, int train_len, const std::string& variant_name,
                 const std::string& out_path) {
    ropepp::CoverageVariant variant;
    if (variant_name == "rope") {
        variant = ropepp::CoverageVariant::rope;
    } else if (variant_name == "ropepp" || variant_name == "eh" || variant_name == "ec") {
        variant = ropepp::CoverageVariant::ropepp;
    } else {
        throw UsageError("--variant must be rope|ropepp (eh/ec alias ropepp)");
    }
    const auto params = ropepp::build_thetas(d, base);
    const auto report = ropepp::coverage_map(params, train_len, variant);
    std::ostringstream os;
    ropepp::write_coverage_csv(os, report);
    write_output(out_path, os.str());
    return exit_ok;
}

// --- attend ------------------------------------------------------------------

int cmd_attend(const std::string& config_path, const std::string& variant_name, int seq,
               std::uint64_t seed, bool seed_given, double noise_real, double noise_imag,
               const std::string& weights_path, const std::string& save_weights_path,
               double base_flag, bool zero_imag_wo, bool full, const std::string& out_path) {
    if (config_path.empty()) {
        throw UsageError("attend requires --config");
    }
    if (weights_path.empty() && !seed_given) {
        throw UsageError("attend requires --weights or --seed (generator)");
    }
    if (seq < 1) {
        throw UsageError("--seq must be >= 1");
    }

    const KvMap kv = parse_kv_file(config_path);
    reject_unknown_keys(kv, config_path);
    const ropepp::ModelConfig cfg = model_from_kv(kv);
    const ropepp::Variant variant = parse_variant(variant_name);
    const ropepp::HeadLayout layout = ropepp::layout_for(cfg, variant);

    double rotary_base = base_flag;
    if (rotary_base <= 0.0) {
        rotary_base = kv.count("rotary.base") ? std::stod(kv.at("rotary.base")) : 10000.0;
    }
    ropepp::RotaryParams params = ropepp::build_thetas(cfg.head_dim(), rotary_base);

    const ropepp::ScalingSpec scaling = scaling_from_kv(kv);
    params = ropepp::apply_scaling(params, scaling);
    const auto map_position = ropepp::position_transform(scaling);

    const auto hidden = static_cast<std::size_t>(cfg.hidden);
    ropepp::ProjectionSet proj;
    if (!weights_path.empty()) {
        proj = ropepp::load_weights(weights_path, layout, hidden);
    } else {
        proj = ropepp::generate_weights(layout, hidden, seed);
    }
    if (zero_imag_wo) {
        const auto d = static_cast<std::size_t>(layout.head_dim);
        for (int o = 0; o < layout.output_heads; ++o) {
            if (ropepp::is_imag_head(layout, o)) {
                std::fill_n(proj.w_o.data.begin() +
                                static_cast<std::ptrdiff_t>(static_cast<std::size_t>(o) * d * hidden),
                            d * hidden, 0.0);
            }
        }
    }
    if (!save_weights_path.empty()) {
        ropepp::save_weights(save_weights_path, proj, layout, hidden);
    }

    // deterministic token activations
    const auto n = static_cast<std::size_t>(seq);
    std::vector<double> x(n * hidden);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = ropepp::rng::gaussian(ropepp::rng::key(seed ^ 0x78, i));
    }
    std::vector<double> positions(n);
    for (std::size_t i = 0; i < n; ++i) {
        positions[i] = map_position(static_cast<double>(i));
    }

    ropepp::AttendOptions opt;
    opt.record_logits = true;
    if (noise_real > 0.0 || noise_imag > 0.0) {
        opt.noise = ropepp::NoiseSpec{noise_real, noise_imag, ropepp::rng::key(seed, 0x6e)};
    }

    const auto result = ropepp::forward(x, n, hidden, proj, layout, params, positions, opt);
    const auto& att = result.attend;

    json per_head = json::array();
    const auto d_sz = static_cast<std::size_t>(layout.head_dim);
    for (int o = 0; o < layout.output_heads; ++o) {
        double l2 = 0.0;
        double max_abs = 0.0;
        double dist_mass = 0.0;
        double prob_mass = 0.0;
        double ctx_l2 = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            double row_max = -1e300;
            for (std::size_t s = 0; s <= t; ++s) {
                row_max = std::max(row_max, att.logit(o, t, s));
            }
            double denom = 0.0;
            for (std::size_t s = 0; s <= t; ++s) {
                denom += std::exp(att.logit(o, t, s) - row_max);
            }
            for (std::size_t s = 0; s <= t; ++s) {
                const double logit = att.logit(o, t, s);
                l2 += logit * logit;
                max_abs = std::max(max_abs, std::abs(logit));
                const double p = std::exp(logit - row_max) / denom;
                dist_mass += p * (positions[t] - positions[s]);
                prob_mass += p;
            }
            for (std::size_t j = 0; j < d_sz; ++j) {
                const double c =
                    att.context[(t * static_cast<std::size_t>(layout.output_heads) +
                                 static_cast<std::size_t>(o)) * d_sz + j];
                ctx_l2 += c * c;
            }
        }
        per_head.push_back({{"head", o},
                            {"channel", ropepp::is_imag_head(layout, o) ? "imag" : "real"},
                            {"logit_l2", std::sqrt(l2)},
                            {"logit_max_abs", max_abs},
                            {"mean_attended_distance", dist_mass / prob_mass},
                            {"context_l2", std::sqrt(ctx_l2)}});
    }

    double out_l2 = 0.0;
    double out_sum = 0.0;
    for (double yv : result.output) {
        out_l2 += yv * yv;
        out_sum += yv;
    }

    json digest;
    digest["schema"] = "ropepp.attend.v1";
    digest["config"] = config_json(cfg);
    digest["variant"] = ropepp::variant_name(variant);
    digest["seq"] = seq;
    digest["rotary_base"] = rotary_base;
    digest["seed"] = seed;
    digest["weights"] = weights_path.empty() ? "generated" : weights_path;
    digest["noise"] = {{"sigma_real", noise_real}, {"sigma_imag", noise_imag}};
    digest["zero_imag_wo"] = zero_imag_wo;
    digest["all_masked_rows"] =
        std::count(att.all_masked.begin(), att.all_masked.end(), std::uint8_t{1});
    digest["per_head"] = per_head;
    digest["output_l2"] = std::sqrt(out_l2);
    digest["output_sum"] = out_sum;
    if (full) {
        digest["output"] = result.output;
        digest["context"] = att.context;
    }
    write_output(out_path, digest.dump(2) + "\n");
    return exit_ok;
}

// --- budget / bench ----------------------------------------------------------

int cmd_budget(const std::string& config_path, std::vector<std::string> variant_names,
               std::vector<std::uint64_t> seqs, int dtype_bytes, const std::string& out_path) {
    if (config_path.empty()) {
        throw UsageError("budget requires --config");
    }
    const KvMap kv = parse_kv_file(config_path);
    reject_unknown_keys(kv, config_path);
    const ropepp::ModelConfig cfg = model_from_kv(kv);
    if (variant_names.empty()) {
        variant_names = {"rope", "eh", "ec"};
    }
    if (seqs.empty()) {
        seqs = {1, 4096};
    }

    const auto rope_budget = ropepp::make_budget(cfg, ropepp::Variant::rope, dtype_bytes);

    json variants = json::array();
    for (const auto& name : variant_names) {
        const ropepp::Variant variant = parse_variant(name);
        const auto b = ropepp::make_budget(cfg, variant, dtype_bytes);
        json flops = json::array();
        for (std::uint64_t seq : seqs) {
            const auto f = b.flops(seq);
            const auto f_rope = rope_budget.flops(seq);
            flops.push_back(
                {{"seq", seq},
                 {"proj_qkv", f.proj_qkv},
                 {"proj_o", f.proj_o},
                 {"logits", f.logits},
                 {"weighted_sum", f.weighted_sum},
                 {"total", f.total()},
                 {"logit_ratio_vs_rope",
                  static_cast<double>(f.logits) / static_cast<double>(f_rope.logits)}});
        }
        variants.push_back(
            {{"variant", name},
             {"kv_bytes_per_token", b.kv_bytes_per_token},
             {"kv_ratio_vs_rope", static_cast<double>(b.kv_bytes_per_token) /
                                      static_cast<double>(rope_budget.kv_bytes_per_token)},
             {"params",
              {{"wq", b.params.wq},
               {"wk", b.params.wk},
               {"wv", b.params.wv},
               {"wo", b.params.wo},
               {"qkv", b.params.qkv()},
               {"total", b.params.total()}}},
             {"flops", flops}});
    }

    json report;
    report["schema"] = "ropepp.budget.v1";
    report["config"] = config_json(cfg);
    report["dtype_bytes"] = dtype_bytes;
    report["variants"] = variants;
    write_output(out_path, report.dump(2) + "\n");
    return exit_ok;
}

int cmd_bench(const std::string& config_path, const std::string& variant_name,
              std::vector<std::uint64_t> seqs, int repeats, std::uint64_t seed,
              const std::string& out_path) {
    if (config_path.empty()) {
        throw UsageError("bench requires --config");
    }
    const KvMap kv = parse_kv_file(config_path);
    reject_unknown_keys(kv, config_path);
    const ropepp::ModelConfig cfg = model_from_kv(kv);
    const ropepp::Variant variant = parse_variant(variant_name);
    if (seqs.empty()) {
        seqs = {64, 256, 1024, 4096};
    }
    std::sort(seqs.begin(), seqs.end());

    const auto report = ropepp::bench_attend(cfg, variant, seqs, repeats, seed);

    json rows = json::array();
    for (const auto& row : report.rows) {
        rows.push_back({{"seq", row.seq},
                        {"tpot_us", row.tpot_us},
                        {"kv_bytes", row.kv_bytes},
                        {"flops", row.flops}});
    }
    json out;
    out["schema"] = "ropepp.bench.v1";
    out["config"] = config_json(cfg);
    out["variant"] = ropepp::variant_name(variant);
    out["dtype_bytes"] = report.dtype_bytes;
    out["threads"] = report.threads;
    out["repeats"] = report.repeats;
    out["scope"] = "attention kernel only (logits, softmax, weighted sum); "
                   "cache bytes cover K/V arrays only";
    out["rows"] = rows;
    write_output(out_path, out.dump(2) + "\n");
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"RoPE++ numerical toolkit"};
    app.require_subcommand(1);

    // verify
    auto* verify = app.add_subcommand("verify", "run the score-equivalence battery");
    std::uint64_t v_seed = 1;
    std::vector<int> v_sizes;
    std::int64_t v_cases = 10000;
    std::string v_out;
    verify->add_option("--seed", v_seed, "rng seed");
    verify->add_option("--sizes", v_sizes, "head dims to test")->delimiter(',');
    verify->add_option("--cases", v_cases, "total random cases");
    verify->add_option("--out", v_out, "output path (default stdout)");

    // curves
    auto* curves = app.add_subcommand("curves", "emit characteristic-curve CSV");
    int c_d = 4096;
    double c_max_dt = 10000.0;
    int c_grid = 101;
    std::vector<std::string> c_kinds;
    std::string c_out;
    curves->add_option("--d", c_d, "head dim for the discrete curve");
    curves->add_option("--max-dt", c_max_dt, "largest relative distance");
    curves->add_option("--grid", c_grid, "log-grid point count");
    curves->add_option("--kinds", c_kinds, "real,imag subset")->delimiter(',');
    curves->add_option("--out", c_out, "output path (default stdout)");

    // coverage
    auto* coverage = app.add_subcommand("coverage", "emit positional-coverage CSV");
    int g_d = 128;
    double g_base = 10000.0;
    int g_train_len = 4096;
    std::string g_variant = "ropepp";
    std::string g_out;
    coverage->add_option("--d", g_d, "head dim");
    coverage->add_option("--base", g_base, "rotary base");
    coverage->add_option("--train-len", g_train_len, "training context length");
    coverage->add_option("--variant", g_variant, "rope|ropepp");
    coverage->add_option("--out", g_out, "output path (default stdout)");

    // attend
    auto* attend = app.add_subcommand("attend", "run one attention block");
    std::string a_config, a_variant = "rope", a_weights, a_save_weights, a_out;
    int a_seq = 64;
    std::uint64_t a_seed = 0;
    double a_noise_real = 0.0, a_noise_imag = 0.0, a_base = 0.0;
    bool a_full = false;
    attend->add_option("--config", a_config, "model config file");
    attend->add_option("--variant", a_variant, "rope|eh|ec");
    attend->add_option("--seq", a_seq, "sequence length");
    auto* a_seed_opt = attend->add_option("--seed", a_seed, "weight/input generator seed");
    attend->add_option("--noise-real", a_noise_real, "sigma for real-head logits");
    attend->add_option("--noise-imag", a_noise_imag, "sigma for imaginary-head logits");
    attend->add_option("--weights", a_weights, "weight blob path");
    attend->add_option("--save-weights", a_save_weights, "write the weights used to this path");
    attend->add_option("--base", a_base, "rotary base override");
    bool a_zero_imag_wo = false;
    attend->add_flag("--zero-imag-wo", a_zero_imag_wo,
                     "zero the imaginary heads' output-projection rows");
    attend->add_flag("--full", a_full, "include full output tensors in the digest");
    attend->add_option("--out", a_out, "output path (default stdout)");

    // budget
    auto* budget = app.add_subcommand("budget", "closed-form cache/parameter/flop accounting");
    std::string b_config, b_out;
    std::vector<std::string> b_variants;
    std::vector<std::uint64_t> b_seqs;
    int b_dtype = 2;
    budget->add_option("--config", b_config, "model config file");
    budget->add_option("--variants", b_variants, "subset of rope,eh,ec")->delimiter(',');
    budget->add_option("--seqs", b_seqs, "sequence lengths for flop rows")->delimiter(',');
    budget->add_option("--dtype-bytes", b_dtype, "cache element size");
    budget->add_option("--out", b_out, "output path (default stdout)");

    // bench
    auto* bench = app.add_subcommand("bench", "decode micro-benchmark");
    std::string n_config, n_variant = "rope", n_out;
    std::vector<std::uint64_t> n_seqs;
    int n_repeats = 5;
    std::uint64_t n_seed = 1;
    bench->add_option("--config", n_config, "model config file");
    bench->add_option("--variant", n_variant, "rope|eh|ec");
    bench->add_option("--seqs", n_seqs, "context lengths")->delimiter(',');
    bench->add_option("--repeats", n_repeats, "timing repeats per row");
    bench->add_option("--seed", n_seed, "workload seed");
    bench->add_option("--out", n_out, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return exit_usage;
    }

    try {
        if (verify->parsed()) {
            return cmd_verify(v_seed, v_sizes, v_cases, v_out);
        }
        if (curves->parsed()) {
            return cmd_curves(c_d, c_max_dt, c_grid, c_kinds, c_out);
        }
        if (coverage->parsed()) {
            return cmd_coverage(g_d, g_base, g_train_len, g_variant, g_out);
        }
        if (attend->parsed()) {
            return cmd_attend(a_config, a_variant, a_seq, a_seed, a_seed_opt->count() > 0,
                              a_noise_real, a_noise_imag, a_weights, a_save_weights, a_base,
                              a_zero_imag_wo, a_full, a_out);
        }
        if (budget->parsed()) {
            return cmd_budget(b_config, b_variants, b_seqs, b_dtype, b_out);
        }
        if (bench->parsed()) {
            return cmd_bench(n_config, n_variant, n_seqs, n_repeats, n_seed, n_out);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    }
    return exit_usage;
}
