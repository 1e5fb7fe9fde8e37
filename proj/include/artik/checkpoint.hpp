#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "artik/spasdf.hpp"

#include "json.hpp"

namespace artik {

// ---------------------------------------------------------------------------
// Checkpoint file: "ARTK" magic, u32 version, JSON metadata (architecture
// config, category, seed, epoch), then named f64 little-endian parameter
// blobs in SpasdfParams::for_each order. Layout documented in
// docs/FORMATS.md.
// ---------------------------------------------------------------------------

struct Checkpoint {
    SpasdfConfig config;
    SpasdfParams params;
    std::string category;
    std::uint64_t seed = 0;
    std::int64_t epoch = 0;
};

inline nlohmann::json spasdf_config_to_json(const SpasdfConfig& c) {
    return nlohmann::json{{"latent_dim", c.latent_dim},
                          {"fourier_freqs", c.fourier_freqs},
                          {"pe_freqs", c.pe_freqs},
                          {"fs_layers", c.fs_layers},
                          {"fs_width", c.fs_width},
                          {"fs_skip_layer", c.fs_skip_layer},
                          {"fa_layers", c.fa_layers},
                          {"fa_width", c.fa_width},
                          {"pose_width", c.pose_width},
                          {"part_count", c.part_count},
                          {"lambda_latent", c.lambda_latent},
                          {"lambda_part", c.lambda_part},
                          {"psi_min", c.psi_min},
                          {"psi_max", c.psi_max},
                          {"use_pe", c.use_pe},
                          {"use_shape_latent", c.use_shape_latent},
                          {"use_pose", c.use_pose},
                          {"use_part_head", c.use_part_head},
                          {"use_clamp", c.use_clamp},
                          {"clamp_dist", c.clamp_dist}};
}

inline SpasdfConfig spasdf_config_from_json(const nlohmann::json& j) {
    SpasdfConfig c;
    c.latent_dim = j.at("latent_dim").get<int>();
    c.fourier_freqs = j.at("fourier_freqs").get<int>();
    c.pe_freqs = j.at("pe_freqs").get<int>();
    c.fs_layers = j.at("fs_layers").get<int>();
    c.fs_width = j.at("fs_width").get<int>();
    c.fs_skip_layer = j.at("fs_skip_layer").get<int>();
    c.fa_layers = j.at("fa_layers").get<int>();
    c.fa_width = j.at("fa_width").get<int>();
    c.pose_width = j.at("pose_width").get<int>();
    c.part_count = j.at("part_count").get<int>();
    c.lambda_latent = j.at("lambda_latent").get<double>();
    c.lambda_part = j.at("lambda_part").get<double>();
    c.psi_min = j.at("psi_min").get<double>();
    c.psi_max = j.at("psi_max").get<double>();
    c.use_pe = j.at("use_pe").get<bool>();
    c.use_shape_latent = j.at("use_shape_latent").get<bool>();
    c.use_pose = j.at("use_pose").get<bool>();
    c.use_part_head = j.at("use_part_head").get<bool>();
    c.use_clamp = j.at("use_clamp").get<bool>();
    c.clamp_dist = j.at("clamp_dist").get<double>();
    validate_config(c);
    return c;
}

namespace ckpt_detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), 8);
}
inline std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

}  // namespace ckpt_detail

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    // Atomic: write a temp file in the same directory, then rename.
    const auto tmp = path.parent_path() / (path.filename().string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw FormatError("cannot open for writing: " + tmp.string());
        os.write("ARTK", 4);
        ckpt_detail::write_u32(os, 1);  // version

        nlohmann::json meta{{"config", spasdf_config_to_json(ck.config)},
                            {"category", ck.category},
                            {"seed", ck.seed},
                            {"epoch", ck.epoch}};
        const std::string meta_str = meta.dump();
        ckpt_detail::write_u64(os, meta_str.size());
        os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

        std::uint32_t blob_count = 0;
        ck.params.for_each([&](const std::string&, const Matrix&) { blob_count++; });
        ckpt_detail::write_u32(os, blob_count);
        ck.params.for_each([&](const std::string& name, const Matrix& m) {
            ckpt_detail::write_u32(os, static_cast<std::uint32_t>(name.size()));
            os.write(name.data(), static_cast<std::streamsize>(name.size()));
            ckpt_detail::write_u64(os, static_cast<std::uint64_t>(m.rows()));
            ckpt_detail::write_u64(os, static_cast<std::uint64_t>(m.cols()));
            // Row-major element order.
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                os.write(reinterpret_cast<const char*>(m.row(i).eval().data()),
                         static_cast<std::streamsize>(8 * m.cols()));
        });
        if (!os) throw FormatError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open: " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "ARTK", 4) != 0)
        throw FormatError(path.string() + ": not a checkpoint file");
    const auto version = ckpt_detail::read_u32(is);
    if (version != 1)
        throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));

    const auto meta_len = ckpt_detail::read_u64(is);
    std::string meta_str(meta_len, '\0');
    is.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
    if (!is) throw FormatError(path.string() + ": truncated metadata");

    Checkpoint ck;
    try {
        const auto meta = nlohmann::json::parse(meta_str);
        ck.config = spasdf_config_from_json(meta.at("config"));
        ck.category = meta.at("category").get<std::string>();
        ck.seed = meta.at("seed").get<std::uint64_t>();
        ck.epoch = meta.at("epoch").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad checkpoint metadata: " + e.what());
    }

    const auto blob_count = ckpt_detail::read_u32(is);
    std::vector<std::pair<std::string, Matrix>> blobs;
    for (std::uint32_t b = 0; b < blob_count; ++b) {
        const auto name_len = ckpt_detail::read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const auto rows = static_cast<Eigen::Index>(ckpt_detail::read_u64(is));
        const auto cols = static_cast<Eigen::Index>(ckpt_detail::read_u64(is));
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            Eigen::RowVectorXd row(cols);
            is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(8 * cols));
            m.row(i) = row;
        }
        if (!is) throw FormatError(path.string() + ": truncated blob " + name);
        blobs.emplace_back(std::move(name), std::move(m));
    }

    // Rebuild the parameter struct and verify every expected blob arrived
    // with the expected shape.
    ck.params = init_params(ck.config, 0);
    std::size_t used = 0;
    ck.params.for_each([&](const std::string& name, Matrix& m) {
        if (used >= blobs.size() || blobs[used].first != name)
            throw FormatError(path.string() + ": checkpoint blob order mismatch at '" + name + "'");
        if (blobs[used].second.rows() != m.rows() || blobs[used].second.cols() != m.cols())
            throw FormatError(path.string() + ": blob '" + name + "' has unexpected shape");
        m = blobs[used].second;
        used++;
    });
    if (used != blobs.size()) throw FormatError(path.string() + ": extra checkpoint blobs");
    return ck;
}

}  // namespace artik
