#pragma once

#include "sloshlab/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace sloshlab {

enum class BoundaryTag { S, W };

enum class ProblemKind { SteklovDirichlet, SteklovNeumann, PureSteklov };

inline const char* to_string(BoundaryTag t) { return t == BoundaryTag::S ? "S" : "W"; }

inline const char* to_string(ProblemKind k) {
    switch (k) {
        case ProblemKind::SteklovDirichlet: return "sd";
        case ProblemKind::SteklovNeumann: return "sn";
        default: return "steklov";
    }
}

struct BoundaryEdge {
    int a = -1;
    int b = -1;
    BoundaryTag tag = BoundaryTag::S;
};

/// Tagged 2D triangulation.  The free surface S and the walls W partition the
/// boundary; interface_vertices holds the junction set where both tags meet.
/// Values are immutable after construction and safe to share read-only.
struct MeshDomain {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;  // counterclockwise
    std::vector<BoundaryEdge> boundary_edges;
    std::vector<Vec2> edge_normals;  // outward unit normal, aligned with boundary_edges
    std::vector<int> interface_vertices;  // sorted
    // Edges of this tag lie on the unit circle; refine() projects their midpoints.
    std::optional<BoundaryTag> unit_circle_tag;
    std::string label;

    int num_vertices() const { return static_cast<int>(vertices.size()); }
    int num_triangles() const { return static_cast<int>(triangles.size()); }
    int num_boundary_edges() const { return static_cast<int>(boundary_edges.size()); }

    double triangle_area(int t) const {
        const auto& tri = triangles[t];
        const Vec2& p0 = vertices[tri[0]];
        const Vec2& p1 = vertices[tri[1]];
        const Vec2& p2 = vertices[tri[2]];
        return 0.5 * ((p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y()));
    }

    double edge_length(int e) const {
        const auto& be = boundary_edges[e];
        return (vertices[be.b] - vertices[be.a]).norm();
    }

    double boundary_length() const {
        double len = 0.0;
        for (int e = 0; e < num_boundary_edges(); ++e) len += edge_length(e);
        return len;
    }

    double boundary_length(BoundaryTag tag) const {
        double len = 0.0;
        for (int e = 0; e < num_boundary_edges(); ++e)
            if (boundary_edges[e].tag == tag) len += edge_length(e);
        return len;
    }

    bool has_tag(BoundaryTag tag) const {
        for (const auto& be : boundary_edges)
            if (be.tag == tag) return true;
        return false;
    }

    /// Vertices touching at least one edge of the given tag.
    std::vector<char> boundary_vertex_mask(BoundaryTag tag) const {
        std::vector<char> mask(vertices.size(), 0);
        for (const auto& be : boundary_edges) {
            if (be.tag == tag) {
                mask[be.a] = 1;
                mask[be.b] = 1;
            }
        }
        return mask;
    }

    std::vector<int> vertices_with_tag(BoundaryTag tag) const {
        auto mask = boundary_vertex_mask(tag);
        std::vector<int> out;
        for (int v = 0; v < num_vertices(); ++v)
            if (mask[v]) out.push_back(v);
        return out;
    }
};

namespace detail {

inline std::pair<int, int> edge_key(int a, int b) { return a < b ? std::make_pair(a, b) : std::make_pair(b, a); }

// Count of adjacent triangles per undirected edge.
inline std::map<std::pair<int, int>, int> edge_triangle_counts(const MeshDomain& m) {
    std::map<std::pair<int, int>, int> counts;
    for (const auto& tri : m.triangles)
        for (int k = 0; k < 3; ++k) counts[edge_key(tri[k], tri[(k + 1) % 3])]++;
    return counts;
}

// Maps each undirected edge to one containing triangle (the first seen).
inline std::map<std::pair<int, int>, int> edge_owner(const MeshDomain& m) {
    std::map<std::pair<int, int>, int> owner;
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto& tri = m.triangles[t];
        for (int k = 0; k < 3; ++k) owner.emplace(edge_key(tri[k], tri[(k + 1) % 3]), t);
    }
    return owner;
}

}  // namespace detail

/// Recomputes edge normals and the interface set from tags and connectivity.
/// Builders and the mesh reader call this; it rejects structurally unusable input.
inline void finalize_mesh(MeshDomain& m) {
    const int nv = m.num_vertices();
    for (const auto& tri : m.triangles)
        for (int v : tri)
            if (v < 0 || v >= nv) throw InvalidArgument("triangle vertex index out of range");
    for (const auto& be : m.boundary_edges)
        if (be.a < 0 || be.a >= nv || be.b < 0 || be.b >= nv || be.a == be.b)
            throw InvalidArgument("boundary edge vertex index out of range");

    auto owner = detail::edge_owner(m);
    m.edge_normals.resize(m.boundary_edges.size());
    for (size_t e = 0; e < m.boundary_edges.size(); ++e) {
        const auto& be = m.boundary_edges[e];
        auto it = owner.find(detail::edge_key(be.a, be.b));
        if (it == owner.end()) throw InvalidArgument("boundary edge not part of any triangle");
        const auto& tri = m.triangles[it->second];
        Vec2 centroid = (m.vertices[tri[0]] + m.vertices[tri[1]] + m.vertices[tri[2]]) / 3.0;
        Vec2 d = m.vertices[be.b] - m.vertices[be.a];
        double len = d.norm();
        if (len <= 0.0) throw InvalidArgument("zero-length boundary edge");
        Vec2 n(d.y() / len, -d.x() / len);
        Vec2 mid = 0.5 * (m.vertices[be.a] + m.vertices[be.b]);
        if (n.dot(centroid - mid) > 0.0) n = -n;
        m.edge_normals[e] = n;
    }

    auto s_mask = m.boundary_vertex_mask(BoundaryTag::S);
    auto w_mask = m.boundary_vertex_mask(BoundaryTag::W);
    m.interface_vertices.clear();
    for (int v = 0; v < nv; ++v)
        if (s_mask[v] && w_mask[v]) m.interface_vertices.push_back(v);
}

// Two-sided power grading of s in [0,1] toward both endpoints; gamma=1 is uniform.
inline double grade_both_ends(double s, double gamma) {
    if (gamma == 1.0) return s;
    if (s <= 0.5) return 0.5 * std::pow(2.0 * s, gamma);
    return 1.0 - 0.5 * std::pow(2.0 * (1.0 - s), gamma);
}

/// Structured tank mesh on [0,width] x [-depth,0]; top edge tagged S, the other
/// three sides W.  Optional grading > 1 clusters vertices toward the interface
/// corners (0,0) and (width,0).
inline MeshDomain build_rectangle(double width, double depth, int nx, int ny, double grading = 1.0) {
    if (!(width > 0.0) || !(depth > 0.0)) throw InvalidArgument("build_rectangle: dimensions must be positive");
    if (nx < 2 || ny < 2) throw InvalidArgument("build_rectangle: nx, ny must be at least 2");
    if (!(grading >= 1.0)) throw InvalidArgument("build_rectangle: grading must be >= 1");

    MeshDomain m;
    m.vertices.reserve(static_cast<size_t>(nx + 1) * (ny + 1));
    std::vector<double> xs(nx + 1), ys(ny + 1);
    for (int i = 0; i <= nx; ++i) xs[i] = width * grade_both_ends(double(i) / nx, grading);
    for (int j = 0; j <= ny; ++j) {
        // one-sided grading toward the free surface y = 0
        double s = double(j) / ny;
        ys[j] = -depth * (1.0 - (grading == 1.0 ? s : 1.0 - std::pow(1.0 - s, grading)));
    }
    xs[0] = 0.0; xs[nx] = width;
    ys[0] = -depth; ys[ny] = 0.0;

    auto vid = [&](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) m.vertices.emplace_back(xs[i], ys[j]);

    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            int v00 = vid(i, j), v10 = vid(i + 1, j), v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
            m.triangles.push_back({v00, v10, v11});
            m.triangles.push_back({v00, v11, v01});
        }
    }

    for (int i = 0; i < nx; ++i) {
        m.boundary_edges.push_back({vid(i, ny), vid(i + 1, ny), BoundaryTag::S});
        m.boundary_edges.push_back({vid(i, 0), vid(i + 1, 0), BoundaryTag::W});
    }
    for (int j = 0; j < ny; ++j) {
        m.boundary_edges.push_back({vid(0, j), vid(0, j + 1), BoundaryTag::W});
        m.boundary_edges.push_back({vid(nx, j), vid(nx, j + 1), BoundaryTag::W});
    }

    std::ostringstream lbl;
    lbl << "rect(" << width << "," << depth << "," << nx << "," << ny << ")";
    m.label = lbl.str();
    finalize_mesh(m);
    return m;
}

/// Polar mesh of the unit disk, all boundary tagged S (classical Steklov).
inline MeshDomain build_disk(int n_rings, int n_sectors) {
    if (n_rings < 1) throw InvalidArgument("build_disk: n_rings must be at least 1");
    if (n_sectors < 3) throw InvalidArgument("build_disk: n_sectors must be at least 3");

    MeshDomain m;
    m.vertices.emplace_back(0.0, 0.0);
    auto vid = [&](int r, int j) { return 1 + (r - 1) * n_sectors + (j % n_sectors); };
    for (int r = 1; r <= n_rings; ++r) {
        double rad = double(r) / n_rings;
        for (int j = 0; j < n_sectors; ++j) {
            double th = 2.0 * M_PI * j / n_sectors;
            m.vertices.emplace_back(rad * std::cos(th), rad * std::sin(th));
        }
    }
    for (int j = 0; j < n_sectors; ++j) m.triangles.push_back({0, vid(1, j), vid(1, j + 1)});
    for (int r = 1; r < n_rings; ++r) {
        for (int j = 0; j < n_sectors; ++j) {
            int a = vid(r, j), b = vid(r, j + 1), c = vid(r + 1, j + 1), d = vid(r + 1, j);
            m.triangles.push_back({a, d, c});
            m.triangles.push_back({a, c, b});
        }
    }
    for (int j = 0; j < n_sectors; ++j)
        m.boundary_edges.push_back({vid(n_rings, j), vid(n_rings, j + 1), BoundaryTag::S});

    m.unit_circle_tag = BoundaryTag::S;
    std::ostringstream lbl;
    lbl << "disk(" << n_rings << "," << n_sectors << ")";
    m.label = lbl.str();
    finalize_mesh(m);
    return m;
}

/// Lower half of the unit disk: flat diameter y = 0 tagged S, circular arc W.
/// n_sectors counts angular subdivisions of the arc.  Optional grading clusters
/// angular nodes toward the interface points (-1,0) and (1,0).
inline MeshDomain build_half_disk(int n_rings, int n_sectors, double grading = 1.0) {
    if (n_rings < 1) throw InvalidArgument("build_half_disk: n_rings must be at least 1");
    if (n_sectors < 3) throw InvalidArgument("build_half_disk: n_sectors must be at least 3");
    if (!(grading >= 1.0)) throw InvalidArgument("build_half_disk: grading must be >= 1");

    MeshDomain m;
    m.vertices.emplace_back(0.0, 0.0);
    auto vid = [&](int r, int j) { return 1 + (r - 1) * (n_sectors + 1) + j; };
    for (int r = 1; r <= n_rings; ++r) {
        double rad = double(r) / n_rings;
        for (int j = 0; j <= n_sectors; ++j) {
            double s = grade_both_ends(double(j) / n_sectors, grading);
            double th = M_PI * (1.0 + s);  // from pi down through 3pi/2 to 2pi
            double x = rad * std::cos(th), y = rad * std::sin(th);
            if (j == 0) { x = -rad; y = 0.0; }
            if (j == n_sectors) { x = rad; y = 0.0; }
            m.vertices.emplace_back(x, y);
        }
    }
    for (int j = 0; j < n_sectors; ++j) m.triangles.push_back({0, vid(1, j), vid(1, j + 1)});
    for (int r = 1; r < n_rings; ++r) {
        for (int j = 0; j < n_sectors; ++j) {
            int a = vid(r, j), b = vid(r, j + 1), c = vid(r + 1, j + 1), d = vid(r + 1, j);
            m.triangles.push_back({a, d, c});
            m.triangles.push_back({a, c, b});
        }
    }
    // Flat surface: the two radii along y = 0.
    for (int r = 1; r <= n_rings; ++r) {
        int inner_l = (r == 1) ? 0 : vid(r - 1, 0);
        int inner_r = (r == 1) ? 0 : vid(r - 1, n_sectors);
        m.boundary_edges.push_back({inner_l, vid(r, 0), BoundaryTag::S});
        m.boundary_edges.push_back({inner_r, vid(r, n_sectors), BoundaryTag::S});
    }
    for (int j = 0; j < n_sectors; ++j)
        m.boundary_edges.push_back({vid(n_rings, j), vid(n_rings, j + 1), BoundaryTag::W});

    m.unit_circle_tag = BoundaryTag::W;
    std::ostringstream lbl;
    lbl << "halfdisk(" << n_rings << "," << n_sectors << ")";
    m.label = lbl.str();
    finalize_mesh(m);
    return m;
}

/// Uniform red refinement: each triangle splits into 4 by edge midpoints.
/// Boundary tags are inherited; midpoints of boundary edges on a unit-circle
/// arc are projected back to the circle.
inline MeshDomain refine(const MeshDomain& src) {
    MeshDomain m;
    m.vertices = src.vertices;
    m.unit_circle_tag = src.unit_circle_tag;
    m.label = src.label + "+r";

    std::set<std::pair<int, int>> circle_edges;
    if (src.unit_circle_tag) {
        for (const auto& be : src.boundary_edges)
            if (be.tag == *src.unit_circle_tag) circle_edges.insert(detail::edge_key(be.a, be.b));
    }

    std::map<std::pair<int, int>, int> midpoint;
    auto mid_of = [&](int a, int b) {
        auto key = detail::edge_key(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        Vec2 p = 0.5 * (m.vertices[a] + m.vertices[b]);
        if (circle_edges.count(key)) p.normalize();
        int id = m.num_vertices();
        m.vertices.push_back(p);
        midpoint.emplace(key, id);
        return id;
    };

    for (const auto& tri : src.triangles) {
        int m01 = mid_of(tri[0], tri[1]);
        int m12 = mid_of(tri[1], tri[2]);
        int m20 = mid_of(tri[2], tri[0]);
        m.triangles.push_back({tri[0], m01, m20});
        m.triangles.push_back({tri[1], m12, m01});
        m.triangles.push_back({tri[2], m20, m12});
        m.triangles.push_back({m01, m12, m20});
    }
    for (const auto& be : src.boundary_edges) {
        int mid = mid_of(be.a, be.b);
        m.boundary_edges.push_back({be.a, mid, be.tag});
        m.boundary_edges.push_back({mid, be.b, be.tag});
    }
    finalize_mesh(m);
    return m;
}

struct MeshDiagnostics {
    std::vector<std::string> issues;
    bool ok() const { return issues.empty(); }
    std::string summary() const {
        if (issues.empty()) return "mesh valid";
        std::string s;
        for (const auto& i : issues) {
            s += i;
            s += '\n';
        }
        return s;
    }
};

/// Structural invariant check; purely diagnostic, never throws.
inline MeshDiagnostics validate_mesh(const MeshDomain& m) {
    MeshDiagnostics diag;
    auto note = [&](const std::string& s) { diag.issues.push_back(s); };

    const int nv = m.num_vertices();
    bool indices_ok = true;
    for (int t = 0; t < m.num_triangles(); ++t)
        for (int v : m.triangles[t])
            if (v < 0 || v >= nv) {
                note("triangle " + std::to_string(t) + ": vertex index out of range");
                indices_ok = false;
            }
    for (size_t e = 0; e < m.boundary_edges.size(); ++e) {
        const auto& be = m.boundary_edges[e];
        if (be.a < 0 || be.a >= nv || be.b < 0 || be.b >= nv)
            note("boundary edge " + std::to_string(e) + ": vertex index out of range"), indices_ok = false;
    }
    if (!indices_ok) return diag;

    for (int t = 0; t < m.num_triangles(); ++t) {
        double area = m.triangle_area(t);
        if (!(area > 0.0)) note("triangle " + std::to_string(t) + ": non-positive signed area " + std::to_string(area));
    }

    auto counts = detail::edge_triangle_counts(m);
    std::set<std::pair<int, int>> tagged;
    for (size_t e = 0; e < m.boundary_edges.size(); ++e) {
        const auto& be = m.boundary_edges[e];
        auto key = detail::edge_key(be.a, be.b);
        if (!tagged.insert(key).second) note("boundary edge " + std::to_string(e) + ": duplicate");
        auto it = counts.find(key);
        int c = (it == counts.end()) ? 0 : it->second;
        if (c != 1)
            note("boundary edge " + std::to_string(e) + " (" + std::to_string(be.a) + "," +
                 std::to_string(be.b) + "): adjacent to " + std::to_string(c) + " triangles, expected 1");
    }
    for (const auto& [key, c] : counts) {
        bool is_tagged = tagged.count(key) > 0;
        if (c == 1 && !is_tagged)
            note("untagged boundary edge (" + std::to_string(key.first) + "," + std::to_string(key.second) + ")");
        if (c > 2) note("edge (" + std::to_string(key.first) + "," + std::to_string(key.second) +
                        "): shared by " + std::to_string(c) + " triangles");
        if (c == 2 && is_tagged)
            note("interior edge (" + std::to_string(key.first) + "," + std::to_string(key.second) +
                 ") carries a boundary tag");
    }

    auto s_mask = m.boundary_vertex_mask(BoundaryTag::S);
    auto w_mask = m.boundary_vertex_mask(BoundaryTag::W);
    std::set<int> declared(m.interface_vertices.begin(), m.interface_vertices.end());
    for (int v = 0; v < nv; ++v) {
        bool is_if = s_mask[v] && w_mask[v];
        if (is_if && !declared.count(v)) note("vertex " + std::to_string(v) + ": touches S and W but not listed in interface");
        if (!is_if && declared.count(v)) note("vertex " + std::to_string(v) + ": listed in interface but does not touch both tags");
    }
    return diag;
}

inline bool kind_compatible(const MeshDomain& m, ProblemKind kind) {
    bool has_w = m.has_tag(BoundaryTag::W);
    if (kind == ProblemKind::PureSteklov) return !has_w;
    return has_w && m.has_tag(BoundaryTag::S);
}

inline void require_kind_compatible(const MeshDomain& m, ProblemKind kind) {
    if (!kind_compatible(m, kind))
        throw InvalidArgument(std::string("mesh '") + m.label + "' is not compatible with kind " + to_string(kind));
}

}  // namespace sloshlab
