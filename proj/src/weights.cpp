#include "ropepp/weights.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ropepp/common.hpp"
#include "ropepp/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "weight blobs are little-endian; big-endian hosts are unsupported");

namespace ropepp {

namespace {

constexpr const char* weights_schema = "ropepp.weights.v1";

Matrix draw_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, std::uint64_t stream) {
    Matrix m;
    m.rows = rows;
    m.cols = cols;
    m.data.resize(rows * cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
    const std::uint64_t base = rng::key(seed, stream);
    for (std::size_t i = 0; i < m.data.size(); i += 2) {
        const rng::GaussPair g = rng::gaussian_pair(rng::key(base, i));
        m.data[i] = scale * g.z0;
        if (i + 1 < m.data.size()) {
            m.data[i + 1] = scale * g.z1;
        }
    }
    return m;
}

struct NamedMatrix {
    const char* name;
    const Matrix* m;
};

} // namespace

namespace {

// w_o rows are drawn per (physical head, channel parity) so layouts built
// from one seed agree block-wise: the real-head rows of an ec draw are
// bit-identical to the rope draw, and zeroing the imaginary rows makes the
// two layers equivalent.
Matrix draw_output_matrix(const HeadLayout& layout, std::size_t hidden, std::uint64_t seed) {
    const auto d = static_cast<std::size_t>(layout.head_dim);
    Matrix m;
    m.rows = static_cast<std::size_t>(layout.output_heads) * d;
    m.cols = hidden;
    m.data.resize(m.rows * m.cols);
    const double scale =
        1.0 / std::sqrt(static_cast<double>(layout.base_heads) * static_cast<double>(d));
    for (int o = 0; o < layout.output_heads; ++o) {
        const bool imag = is_imag_head(layout, o);
        const int physical = layout.variant == Variant::rope ? o : o / 2;
        const std::uint64_t head_key =
            rng::key(seed, 4, static_cast<std::uint64_t>(physical), imag ? 1 : 0);
        double* block = m.data.data() + static_cast<std::size_t>(o) * d * hidden;
        for (std::size_t i = 0; i < d * hidden; i += 2) {
            const rng::GaussPair g = rng::gaussian_pair(rng::key(head_key, i));
            block[i] = scale * g.z0;
            if (i + 1 < d * hidden) {
                block[i + 1] = scale * g.z1;
            }
        }
    }
    return m;
}

} // namespace

ProjectionSet generate_weights(const HeadLayout& layout, std::size_t hidden, std::uint64_t seed) {
    require(hidden > 0, "generate_weights: hidden must be positive");
    const auto d = static_cast<std::size_t>(layout.head_dim);
    ProjectionSet proj;
    proj.w_q = draw_matrix(hidden, static_cast<std::size_t>(layout.physical_q_heads) * d, seed, 1);
    proj.w_k = draw_matrix(hidden, static_cast<std::size_t>(layout.kv_heads) * d, seed, 2);
    proj.w_v = draw_matrix(hidden, static_cast<std::size_t>(layout.kv_heads) * d, seed, 3);
    proj.w_o = draw_output_matrix(layout, hidden, seed);
    return proj;
}

void save_weights(const std::filesystem::path& path, const ProjectionSet& proj,
                  const HeadLayout& layout, std::size_t hidden) {
    const NamedMatrix mats[] = {
        {"w_q", &proj.w_q}, {"w_k", &proj.w_k}, {"w_v", &proj.w_v}, {"w_o", &proj.w_o}};

    std::ofstream blob(path, std::ios::binary);
    if (!blob) {
        throw std::runtime_error("save_weights: cannot open " + path.string());
    }
    nlohmann::json sidecar;
    sidecar["schema"] = weights_schema;
    sidecar["dtype"] = "f64";
    sidecar["variant"] = variant_name(layout.variant);
    sidecar["hidden"] = hidden;
    sidecar["head_dim"] = layout.head_dim;
    sidecar["base_heads"] = layout.base_heads;
    sidecar["base_kv_heads"] = layout.base_kv_heads;
    sidecar["matrices"] = nlohmann::json::array();

    std::size_t offset = 0;
    for (const NamedMatrix& nm : mats) {
        const std::size_t bytes = nm.m->data.size() * sizeof(double);
        blob.write(reinterpret_cast<const char*>(nm.m->data.data()),
                   static_cast<std::streamsize>(bytes));
        sidecar["matrices"].push_back({{"name", nm.name},
                                       {"rows", nm.m->rows},
                                       {"cols", nm.m->cols},
                                       {"offset_bytes", offset}});
        offset += bytes;
    }
    if (!blob) {
        throw std::runtime_error("save_weights: write failed for " + path.string());
    }

    std::ofstream side(path.string() + ".json");
    side << sidecar.dump(2) << '\n';
    if (!side) {
        throw std::runtime_error("save_weights: sidecar write failed for " + path.string());
    }
}

ProjectionSet load_weights(const std::filesystem::path& path, const HeadLayout& layout,
                           std::size_t hidden) {
    std::ifstream side(path.string() + ".json");
    if (!side) {
        throw std::runtime_error("load_weights: missing sidecar " + path.string() + ".json");
    }
    nlohmann::json sidecar = nlohmann::json::parse(side);
    if (sidecar.value("schema", "") != weights_schema) {
        throw std::runtime_error("load_weights: unexpected schema in sidecar");
    }
    if (sidecar.value("dtype", "") != "f64") {
        throw std::runtime_error("load_weights: unsupported dtype");
    }
    if (sidecar.value("hidden", std::size_t{0}) != hidden ||
        sidecar.value("head_dim", -1) != layout.head_dim ||
        sidecar.value("variant", "") != variant_name(layout.variant)) {
        throw std::runtime_error("load_weights: sidecar does not match requested layout");
    }

    const auto d = static_cast<std::size_t>(layout.head_dim);
    const std::size_t expect_cols[4] = {static_cast<std::size_t>(layout.physical_q_heads) * d,
                                        static_cast<std::size_t>(layout.kv_heads) * d,
                                        static_cast<std::size_t>(layout.kv_heads) * d, hidden};
    const std::size_t expect_rows[4] = {hidden, hidden, hidden,
                                        static_cast<std::size_t>(layout.output_heads) * d};
    const char* names[4] = {"w_q", "w_k", "w_v", "w_o"};

    std::ifstream blob(path, std::ios::binary);
    if (!blob) {
        throw std::runtime_error("load_weights: cannot open " + path.string());
    }

    ProjectionSet proj;
    Matrix* dst[4] = {&proj.w_q, &proj.w_k, &proj.w_v, &proj.w_o};
    const auto& mats = sidecar.at("matrices");
    if (mats.size() != 4) {
        throw std::runtime_error("load_weights: sidecar must list four matrices");
    }
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& entry = mats.at(i);
        if (entry.value("name", "") != names[i] || entry.value("rows", std::size_t{0}) != expect_rows[i] ||
            entry.value("cols", std::size_t{0}) != expect_cols[i]) {
            throw std::runtime_error(std::string("load_weights: shape mismatch for ") + names[i]);
        }
        Matrix& m = *dst[i];
        m.rows = expect_rows[i];
        m.cols = expect_cols[i];
        m.data.resize(m.rows * m.cols);
        blob.seekg(static_cast<std::streamoff>(entry.value("offset_bytes", std::size_t{0})));
        blob.read(reinterpret_cast<char*>(m.data.data()),
                  static_cast<std::streamsize>(m.data.size() * sizeof(double)));
        if (!blob) {
            throw std::runtime_error(std::string("load_weights: short read for ") + names[i]);
        }
    }
    return proj;
}

} // namespace ropepp
