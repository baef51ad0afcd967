#pragma once

#include "sloshlab/geometry.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace sloshlab {

/// 17 significant digits, enough to round-trip an IEEE double exactly.
inline std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// Format: header "mesh2d v1", then "v x y" per vertex, "t i j k" per triangle,
// "b i j TAG" per boundary edge, TAG in {S, W}.  Indices are 0-based.
inline void write_mesh(std::ostream& os, const MeshDomain& m) {
    os << "mesh2d v1\n";
    for (const auto& v : m.vertices) os << "v " << format_double(v.x()) << " " << format_double(v.y()) << "\n";
    for (const auto& t : m.triangles) os << "t " << t[0] << " " << t[1] << " " << t[2] << "\n";
    for (const auto& b : m.boundary_edges)
        os << "b " << b.a << " " << b.b << " " << to_string(b.tag) << "\n";
}

inline void write_mesh_file(const std::string& path, const MeshDomain& m) {
    std::ofstream os(path);
    if (!os) throw InvalidArgument("cannot open mesh file for writing: " + path);
    write_mesh(os, m);
}

inline MeshDomain read_mesh(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw InvalidArgument("empty mesh stream");
    if (line != "mesh2d v1") throw InvalidArgument("unsupported mesh header: '" + line + "'");

    MeshDomain m;
    m.label = "file";
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "v") {
            double x, y;
            if (!(ls >> x >> y)) throw InvalidArgument("mesh line " + std::to_string(lineno) + ": bad vertex");
            m.vertices.emplace_back(x, y);
        } else if (kind == "t") {
            int i, j, k;
            if (!(ls >> i >> j >> k)) throw InvalidArgument("mesh line " + std::to_string(lineno) + ": bad triangle");
            m.triangles.push_back({i, j, k});
        } else if (kind == "b") {
            int i, j;
            std::string tag;
            if (!(ls >> i >> j >> tag) || (tag != "S" && tag != "W"))
                throw InvalidArgument("mesh line " + std::to_string(lineno) + ": bad boundary edge");
            m.boundary_edges.push_back({i, j, tag == "S" ? BoundaryTag::S : BoundaryTag::W});
        } else {
            throw InvalidArgument("mesh line " + std::to_string(lineno) + ": unknown record '" + kind + "'");
        }
    }
    finalize_mesh(m);
    return m;
}

inline MeshDomain read_mesh_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InvalidArgument("cannot open mesh file: " + path);
    MeshDomain m = read_mesh(is);
    m.label = path;
    return m;
}

}  // namespace sloshlab
