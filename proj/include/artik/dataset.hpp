#pragma once

#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "artik/mesh_io.hpp"
#include "artik/normalize.hpp"
#include "artik/tensor.hpp"

#include "json.hpp"

namespace artik {

enum class Split : std::uint8_t { kTrain, kSeen, kUnseen };

inline std::string to_string(Split s) {
    switch (s) {
        case Split::kTrain: return "train";
        case Split::kSeen: return "seen";
        case Split::kUnseen: return "unseen";
    }
    return "unknown";
}

inline Split split_from_string(const std::string& s) {
    if (s == "train") return Split::kTrain;
    if (s == "seen") return Split::kSeen;
    if (s == "unseen") return Split::kUnseen;
    throw FormatError("unknown split '" + s + "'");
}

inline double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }
inline Vec3 round_f32(const Vec3& v) {
    return Vec3(round_f32(v.x()), round_f32(v.y()), round_f32(v.z()));
}

// Final sampled point cloud in normalized coordinates (float32 precision, so
// the in-memory object equals its PLY round-trip bit-exactly).
struct LabeledPointCloud {
    std::vector<Vec3> points;
    std::vector<std::uint8_t> part_ids;
    std::vector<std::uint8_t> anomaly_labels;  // present iff is_abnormal
    double psi = 0.0;
    std::string category;
    Split split = Split::kTrain;
    bool is_abnormal = false;

    std::size_t size() const { return points.size(); }

    Matrix points_matrix() const {
        Matrix m(static_cast<Eigen::Index>(points.size()), 3);
        for (std::size_t i = 0; i < points.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = points[i];
        return m;
    }
};

inline void validate_cloud(const LabeledPointCloud& cloud, std::size_t expected_points = 16384) {
    if (cloud.points.size() != expected_points)
        throw ContractError("cloud has " + std::to_string(cloud.points.size()) + " points, expected " +
                            std::to_string(expected_points));
    if (cloud.part_ids.size() != cloud.points.size())
        throw ContractError("cloud part ids not aligned with points");
    if (cloud.is_abnormal != !cloud.anomaly_labels.empty())
        throw ContractError("anomaly labels must be present iff the cloud is abnormal");
    if (cloud.is_abnormal && cloud.anomaly_labels.size() != cloud.points.size())
        throw ContractError("cloud anomaly labels not aligned with points");
    if (cloud.split == Split::kTrain && cloud.is_abnormal)
        throw ContractError("train split must contain only normal samples");
}

// Dense pre-subsampling abnormal cloud in unnormalized coordinates.
struct DenseCloud {
    std::vector<Vec3> points;
    std::vector<std::uint8_t> part_ids;
    std::vector<std::uint8_t> anomaly_labels;
};

// SDF supervision tuples for one articulation sample. Class order in the
// record stream is fixed: on-surface, near-surface, bbox-uniform,
// global-uniform; counts travel in the manifest.
struct SdfTupleSet {
    Matrix points;  // n x 3
    Eigen::VectorXd sdf;
    std::vector<std::uint8_t> part_ids;
    double psi = 0.0;
    std::array<std::int64_t, 4> class_counts{0, 0, 0, 0};

    Eigen::Index size() const { return points.rows(); }
};

// ---------------------------------------------------------------------------
// Cloud PLY files: float32 x,y,z + uint8 part_id (+ uint8 label when
// abnormal). Dense clouds use the same layout with labels always present.
// ---------------------------------------------------------------------------

inline void save_cloud_ply(const std::filesystem::path& path, const LabeledPointCloud& cloud) {
    PointCloudFile file;
    file.points = cloud.points;
    PlyProperty part{"part_id", PlyProperty::Type::kU8, {}};
    part.values.assign(cloud.part_ids.begin(), cloud.part_ids.end());
    file.props.push_back(std::move(part));
    if (cloud.is_abnormal) {
        PlyProperty label{"label", PlyProperty::Type::kU8, {}};
        label.values.assign(cloud.anomaly_labels.begin(), cloud.anomaly_labels.end());
        file.props.push_back(std::move(label));
    }
    write_point_cloud_ply(path, file);
}

inline LabeledPointCloud load_cloud_ply(const std::filesystem::path& path) {
    const PointCloudFile file = read_point_cloud_ply(path);
    LabeledPointCloud cloud;
    cloud.points = file.points;
    const PlyProperty* part = file.find("part_id");
    if (!part) throw FormatError(path.string() + ": missing part_id property");
    cloud.part_ids.assign(part->values.begin(), part->values.end());
    if (const PlyProperty* label = file.find("label")) {
        cloud.anomaly_labels.assign(label->values.begin(), label->values.end());
        cloud.is_abnormal = true;
    }
    return cloud;
}

inline void save_dense_ply(const std::filesystem::path& path, const DenseCloud& dense) {
    PointCloudFile file;
    file.points = dense.points;
    PlyProperty part{"part_id", PlyProperty::Type::kU8, {}};
    part.values.assign(dense.part_ids.begin(), dense.part_ids.end());
    file.props.push_back(std::move(part));
    PlyProperty label{"label", PlyProperty::Type::kU8, {}};
    label.values.assign(dense.anomaly_labels.begin(), dense.anomaly_labels.end());
    file.props.push_back(std::move(label));
    write_point_cloud_ply(path, file);
}

inline DenseCloud load_dense_ply(const std::filesystem::path& path) {
    const PointCloudFile file = read_point_cloud_ply(path);
    DenseCloud dense;
    dense.points = file.points;
    const PlyProperty* part = file.find("part_id");
    const PlyProperty* label = file.find("label");
    if (!part || !label) throw FormatError(path.string() + ": dense cloud needs part_id and label");
    dense.part_ids.assign(part->values.begin(), part->values.end());
    dense.anomaly_labels.assign(label->values.begin(), label->values.end());
    return dense;
}

// ---------------------------------------------------------------------------
// ASDF tuple files: "ASDF" magic, u32 record count, then packed records of
// (x: 3 x f32, sdf: f32, part_id: u8), little-endian, 17 bytes each.
// ---------------------------------------------------------------------------

inline void save_tuples_asdf(const std::filesystem::path& path, const SdfTupleSet& tuples) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open for writing: " + path.string());
    os.write("ASDF", 4);
    const auto count = static_cast<std::uint32_t>(tuples.size());
    os.write(reinterpret_cast<const char*>(&count), 4);
    for (Eigen::Index i = 0; i < tuples.size(); ++i) {
        for (int j = 0; j < 3; ++j) io_detail::write_f32(os, static_cast<float>(tuples.points(i, j)));
        io_detail::write_f32(os, static_cast<float>(tuples.sdf(i)));
        io_detail::write_u8(os, tuples.part_ids[static_cast<std::size_t>(i)]);
    }
    if (!os) throw FormatError("write failed: " + path.string());
}

inline SdfTupleSet load_tuples_asdf(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open: " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "ASDF", 4) != 0)
        throw FormatError(path.string() + ": not an ASDF tuple file");
    std::uint32_t count = 0;
    is.read(reinterpret_cast<char*>(&count), 4);
    SdfTupleSet tuples;
    tuples.points.resize(count, 3);
    tuples.sdf.resize(count);
    tuples.part_ids.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        for (int j = 0; j < 3; ++j) tuples.points(i, j) = io_detail::read_f32(is);
        tuples.sdf(i) = io_detail::read_f32(is);
        tuples.part_ids[i] = io_detail::read_u8(is);
    }
    if (!is) throw FormatError(path.string() + ": truncated tuple records");
    return tuples;
}

// ---------------------------------------------------------------------------
// Dataset manifest (JSON).
// ---------------------------------------------------------------------------

struct SampleEntry {
    std::string id;
    Split split = Split::kTrain;
    double psi = 0.0;
    bool is_abnormal = false;
    std::string anomaly_kind;      // empty for normal samples
    std::string cloud_file;        // relative to the manifest directory
    std::string tuple_file;        // train samples only
    std::string dense_file;        // abnormal samples only
    std::array<std::int64_t, 4> tuple_class_counts{0, 0, 0, 0};
};

struct DatasetManifest {
    std::string category;
    int part_count = 0;
    std::string joint_kind;
    double psi_min = 0.0, psi_max = 0.0;
    double train_psi_lo = 0.0, train_psi_hi = 0.0;
    std::uint64_t seed = 0;
    std::string normalization_file;
    std::vector<SampleEntry> samples;

    std::vector<const SampleEntry*> split_samples(Split s) const {
        std::vector<const SampleEntry*> out;
        for (const auto& e : samples)
            if (e.split == s) out.push_back(&e);
        return out;
    }
};

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& e : m.samples) {
        nlohmann::json j{{"id", e.id},
                         {"split", to_string(e.split)},
                         {"psi", e.psi},
                         {"is_abnormal", e.is_abnormal},
                         {"cloud", e.cloud_file}};
        if (e.is_abnormal) {
            j["anomaly_kind"] = e.anomaly_kind;
            j["dense"] = e.dense_file;
        }
        if (!e.tuple_file.empty()) {
            j["tuples"] = e.tuple_file;
            j["tuple_class_counts"] = e.tuple_class_counts;
        }
        samples.push_back(std::move(j));
    }
    return nlohmann::json{{"format_version", 1},
                          {"category", m.category},
                          {"part_count", m.part_count},
                          {"joint_kind", m.joint_kind},
                          {"psi_range", {m.psi_min, m.psi_max}},
                          {"train_psi_interval", {m.train_psi_lo, m.train_psi_hi}},
                          {"seed", m.seed},
                          {"normalization", m.normalization_file},
                          {"samples", samples}};
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
        if (j.at("format_version").get<int>() != 1) throw FormatError("unsupported manifest version");
        m.category = j.at("category").get<std::string>();
        m.part_count = j.at("part_count").get<int>();
        m.joint_kind = j.at("joint_kind").get<std::string>();
        m.psi_min = j.at("psi_range").at(0).get<double>();
        m.psi_max = j.at("psi_range").at(1).get<double>();
        m.train_psi_lo = j.at("train_psi_interval").at(0).get<double>();
        m.train_psi_hi = j.at("train_psi_interval").at(1).get<double>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.normalization_file = j.at("normalization").get<std::string>();
        for (const auto& s : j.at("samples")) {
            SampleEntry e;
            e.id = s.at("id").get<std::string>();
            e.split = split_from_string(s.at("split").get<std::string>());
            e.psi = s.at("psi").get<double>();
            e.is_abnormal = s.at("is_abnormal").get<bool>();
            e.cloud_file = s.at("cloud").get<std::string>();
            if (e.is_abnormal) {
                e.anomaly_kind = s.at("anomaly_kind").get<std::string>();
                e.dense_file = s.at("dense").get<std::string>();
            }
            if (s.contains("tuples")) {
                e.tuple_file = s.at("tuples").get<std::string>();
                for (int c = 0; c < 4; ++c)
                    e.tuple_class_counts[static_cast<std::size_t>(c)] =
                        s.at("tuple_class_counts").at(c).get<std::int64_t>();
            }
            m.samples.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad manifest: ") + e.what());
    }
    return m;
}

inline void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open for writing: " + path.string());
    os << manifest_to_json(m).dump(2) << "\n";
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open: " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return manifest_from_json(j);
}

// Loads a sample's cloud with the manifest metadata attached.
inline LabeledPointCloud load_sample_cloud(const std::filesystem::path& manifest_dir,
                                           const DatasetManifest& m, const SampleEntry& entry) {
    LabeledPointCloud cloud = load_cloud_ply(manifest_dir / entry.cloud_file);
    cloud.psi = entry.psi;
    cloud.category = m.category;
    cloud.split = entry.split;
    if (cloud.is_abnormal != entry.is_abnormal)
        throw FormatError("sample " + entry.id + ": manifest/cloud abnormality mismatch");
    return cloud;
}

inline SdfTupleSet load_sample_tuples(const std::filesystem::path& manifest_dir, const SampleEntry& entry) {
    if (entry.tuple_file.empty())
        throw InvalidInputError("sample " + entry.id + " has no tuple file");
    SdfTupleSet tuples = load_tuples_asdf(manifest_dir / entry.tuple_file);
    tuples.psi = entry.psi;
    tuples.class_counts = entry.tuple_class_counts;
    return tuples;
}

}  // namespace artik
