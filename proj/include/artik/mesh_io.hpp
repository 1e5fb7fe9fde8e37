#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "artik/mesh.hpp"

namespace artik {

// ---------------------------------------------------------------------------
// Point-cloud PLY files. The writer emits a canonical binary_little_endian
// layout (x, y, z as float32, then extra properties in declared order) so a
// read-write cycle reproduces the original bytes.
// ---------------------------------------------------------------------------

struct PlyProperty {
    enum class Type : std::uint8_t { kU8, kF32 };
    std::string name;
    Type type = Type::kF32;
    std::vector<double> values;  // exact u8/f32 values widened to double
};

struct PointCloudFile {
    std::vector<Vec3> points;  // float32 precision
    std::vector<PlyProperty> props;

    const PlyProperty* find(const std::string& name) const {
        for (const auto& p : props)
            if (p.name == name) return &p;
        return nullptr;
    }
};

namespace io_detail {

inline void write_f32(std::ostream& os, float v) { os.write(reinterpret_cast<const char*>(&v), 4); }
inline void write_u8(std::ostream& os, std::uint8_t v) { os.write(reinterpret_cast<const char*>(&v), 1); }

inline float read_f32(std::istream& is) {
    float v;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
inline std::uint8_t read_u8(std::istream& is) {
    std::uint8_t v;
    is.read(reinterpret_cast<char*>(&v), 1);
    return v;
}

}  // namespace io_detail

inline void write_point_cloud_ply(const std::filesystem::path& path, const PointCloudFile& cloud) {
    for (const auto& p : cloud.props)
        if (p.values.size() != cloud.points.size())
            throw InvalidInputError("ply write: property '" + p.name + "' size mismatch");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open for writing: " + path.string());

    os << "ply\nformat binary_little_endian 1.0\n";
    os << "element vertex " << cloud.points.size() << "\n";
    os << "property float x\nproperty float y\nproperty float z\n";
    for (const auto& p : cloud.props) {
        os << "property " << (p.type == PlyProperty::Type::kU8 ? "uchar" : "float") << " " << p.name
           << "\n";
    }
    os << "end_header\n";
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        io_detail::write_f32(os, static_cast<float>(cloud.points[i].x()));
        io_detail::write_f32(os, static_cast<float>(cloud.points[i].y()));
        io_detail::write_f32(os, static_cast<float>(cloud.points[i].z()));
        for (const auto& p : cloud.props) {
            if (p.type == PlyProperty::Type::kU8)
                io_detail::write_u8(os, static_cast<std::uint8_t>(p.values[i]));
            else
                io_detail::write_f32(os, static_cast<float>(p.values[i]));
        }
    }
    if (!os) throw FormatError("write failed: " + path.string());
}

namespace io_detail {

struct PlyHeader {
    bool binary = false;
    std::size_t vertex_count = 0;
    std::size_t face_count = 0;
    // vertex property (name, type string) in order
    std::vector<std::pair<std::string, std::string>> vertex_props;
    std::string face_index_count_type, face_index_type;
};

inline PlyHeader read_ply_header(std::istream& is, const std::string& path) {
    PlyHeader h;
    std::string line;
    if (!std::getline(is, line) || line.substr(0, 3) != "ply")
        throw FormatError(path + ": not a PLY file");
    std::string element;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "comment" || tok == "obj_info") continue;
        if (tok == "format") {
            std::string fmt;
            ss >> fmt;
            if (fmt == "binary_little_endian")
                h.binary = true;
            else if (fmt == "ascii")
                h.binary = false;
            else
                throw FormatError(path + ": unsupported PLY format " + fmt);
        } else if (tok == "element") {
            std::size_t count;
            ss >> element >> count;
            if (element == "vertex")
                h.vertex_count = count;
            else if (element == "face")
                h.face_count = count;
            else
                throw FormatError(path + ": unsupported PLY element " + element);
        } else if (tok == "property") {
            std::string type;
            ss >> type;
            if (type == "list") {
                std::string count_type, index_type, name;
                ss >> count_type >> index_type >> name;
                if (element != "face" || name != "vertex_indices")
                    throw FormatError(path + ": unsupported list property " + name);
                h.face_index_count_type = count_type;
                h.face_index_type = index_type;
            } else {
                std::string name;
                ss >> name;
                if (element == "vertex") h.vertex_props.emplace_back(name, type);
            }
        } else if (tok == "end_header") {
            return h;
        }
    }
    throw FormatError(path + ": PLY header without end_header");
}

inline double read_scalar(std::istream& is, const std::string& type, bool binary, const std::string& path) {
    if (!binary) {
        double v;
        is >> v;
        if (!is) throw FormatError(path + ": truncated ASCII PLY");
        return v;
    }
    auto raw = [&](auto value) {
        is.read(reinterpret_cast<char*>(&value), sizeof(value));
        if (!is) throw FormatError(path + ": truncated binary PLY");
        return static_cast<double>(value);
    };
    if (type == "float" || type == "float32") return raw(float{});
    if (type == "double" || type == "float64") return raw(double{});
    if (type == "uchar" || type == "uint8") return raw(std::uint8_t{});
    if (type == "char" || type == "int8") return raw(std::int8_t{});
    if (type == "short" || type == "int16") return raw(std::int16_t{});
    if (type == "ushort" || type == "uint16") return raw(std::uint16_t{});
    if (type == "int" || type == "int32") return raw(std::int32_t{});
    if (type == "uint" || type == "uint32") return raw(std::uint32_t{});
    throw FormatError(path + ": unsupported PLY scalar type " + type);
}

}  // namespace io_detail

inline PointCloudFile read_point_cloud_ply(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open: " + path.string());
    const auto header = io_detail::read_ply_header(is, path.string());
    if (header.face_count != 0) throw FormatError(path.string() + ": expected a point cloud, found faces");

    int ix = -1, iy = -1, iz = -1;
    for (std::size_t i = 0; i < header.vertex_props.size(); ++i) {
        if (header.vertex_props[i].first == "x") ix = static_cast<int>(i);
        if (header.vertex_props[i].first == "y") iy = static_cast<int>(i);
        if (header.vertex_props[i].first == "z") iz = static_cast<int>(i);
    }
    if (ix < 0 || iy < 0 || iz < 0) throw FormatError(path.string() + ": PLY lacks x/y/z properties");

    PointCloudFile out;
    out.points.resize(header.vertex_count);
    for (std::size_t i = 0; i < header.vertex_props.size(); ++i) {
        if (static_cast<int>(i) == ix || static_cast<int>(i) == iy || static_cast<int>(i) == iz) continue;
        PlyProperty p;
        p.name = header.vertex_props[i].first;
        const std::string& t = header.vertex_props[i].second;
        p.type = (t == "uchar" || t == "uint8") ? PlyProperty::Type::kU8 : PlyProperty::Type::kF32;
        p.values.resize(header.vertex_count);
        out.props.push_back(std::move(p));
    }

    for (std::size_t v = 0; v < header.vertex_count; ++v) {
        std::size_t extra = 0;
        for (std::size_t i = 0; i < header.vertex_props.size(); ++i) {
            const double value =
                io_detail::read_scalar(is, header.vertex_props[i].second, header.binary, path.string());
            if (static_cast<int>(i) == ix)
                out.points[v].x() = value;
            else if (static_cast<int>(i) == iy)
                out.points[v].y() = value;
            else if (static_cast<int>(i) == iz)
                out.points[v].z() = value;
            else
                out.props[extra++].values[v] = value;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mesh readers: OBJ (v/f, polygons fan-triangulated) and PLY meshes.
// ---------------------------------------------------------------------------

inline TriangleMesh read_mesh_obj(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open: " + path.string());
    TriangleMesh mesh;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "v") {
            Vec3 v;
            ss >> v.x() >> v.y() >> v.z();
            if (!ss && !ss.eof()) throw FormatError(path.string() + ": malformed vertex line");
            mesh.vertices.push_back(v);
        } else if (tok == "f") {
            std::vector<std::int32_t> idx;
            std::string ref;
            while (ss >> ref) {
                const auto slash = ref.find('/');
                const long raw = std::stol(slash == std::string::npos ? ref : ref.substr(0, slash));
                // OBJ indices are 1-based; negative indices count from the end.
                const long resolved = raw > 0 ? raw - 1 : static_cast<long>(mesh.vertices.size()) + raw;
                if (resolved < 0 || resolved >= static_cast<long>(mesh.vertices.size()))
                    throw FormatError(path.string() + ": face index out of range");
                idx.push_back(static_cast<std::int32_t>(resolved));
            }
            if (idx.size() < 3) throw FormatError(path.string() + ": face with fewer than 3 vertices");
            for (std::size_t i = 1; i + 1 < idx.size(); ++i)
                mesh.faces.push_back({idx[0], idx[i], idx[i + 1]});
        }
    }
    return mesh;
}

inline TriangleMesh read_mesh_ply(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open: " + path.string());
    const auto header = io_detail::read_ply_header(is, path.string());
    int ix = -1, iy = -1, iz = -1;
    for (std::size_t i = 0; i < header.vertex_props.size(); ++i) {
        if (header.vertex_props[i].first == "x") ix = static_cast<int>(i);
        if (header.vertex_props[i].first == "y") iy = static_cast<int>(i);
        if (header.vertex_props[i].first == "z") iz = static_cast<int>(i);
    }
    if (ix < 0 || iy < 0 || iz < 0) throw FormatError(path.string() + ": PLY lacks x/y/z properties");

    TriangleMesh mesh;
    mesh.vertices.resize(header.vertex_count);
    for (std::size_t v = 0; v < header.vertex_count; ++v) {
        for (std::size_t i = 0; i < header.vertex_props.size(); ++i) {
            const double value =
                io_detail::read_scalar(is, header.vertex_props[i].second, header.binary, path.string());
            if (static_cast<int>(i) == ix) mesh.vertices[v].x() = value;
            if (static_cast<int>(i) == iy) mesh.vertices[v].y() = value;
            if (static_cast<int>(i) == iz) mesh.vertices[v].z() = value;
        }
    }
    for (std::size_t f = 0; f < header.face_count; ++f) {
        const auto n = static_cast<std::size_t>(
            io_detail::read_scalar(is, header.face_index_count_type, header.binary, path.string()));
        std::vector<std::int32_t> idx(n);
        for (auto& id : idx)
            id = static_cast<std::int32_t>(
                io_detail::read_scalar(is, header.face_index_type, header.binary, path.string()));
        if (n < 3) throw FormatError(path.string() + ": face with fewer than 3 vertices");
        for (std::size_t i = 1; i + 1 < n; ++i) mesh.faces.push_back({idx[0], idx[i], idx[i + 1]});
    }
    return mesh;
}

inline TriangleMesh read_mesh(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".obj") return read_mesh_obj(path);
    if (ext == ".ply") return read_mesh_ply(path);
    throw FormatError("unsupported mesh format: " + path.string());
}

}  // namespace artik
