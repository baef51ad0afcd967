#include "sloshlab/geometry.hpp"
#include "sloshlab/mesh_io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace sloshlab;

TEST(Geometry, RectangleCounts) {
    MeshDomain m = build_rectangle(1.0, 1.0, 2, 2);
    EXPECT_EQ(m.num_vertices(), 9);
    EXPECT_EQ(m.num_triangles(), 8);
    int n_s = 0, n_w = 0;
    for (const auto& be : m.boundary_edges) (be.tag == BoundaryTag::S ? n_s : n_w)++;
    EXPECT_EQ(n_s, 2);
    EXPECT_EQ(n_w, 6);
    ASSERT_EQ(m.interface_vertices.size(), 2u);
    for (int g : m.interface_vertices) {
        EXPECT_NEAR(m.vertices[g].y(), 0.0, 1e-15);
        EXPECT_TRUE(std::abs(m.vertices[g].x()) < 1e-15 || std::abs(m.vertices[g].x() - 1.0) < 1e-15);
    }
}

TEST(Geometry, RectangleRejectsDegenerateInput) {
    EXPECT_THROW(build_rectangle(1.0, 0.0, 2, 2), InvalidArgument);
    EXPECT_THROW(build_rectangle(-1.0, 1.0, 2, 2), InvalidArgument);
    EXPECT_THROW(build_rectangle(1.0, 1.0, 1, 2), InvalidArgument);
    EXPECT_THROW(build_rectangle(1.0, 1.0, 2, 0), InvalidArgument);
}

TEST(Geometry, RectangleBoundaryLengthExact) {
    MeshDomain m = build_rectangle(2.5, 1.25, 5, 3);
    EXPECT_NEAR(m.boundary_length(), 2 * 2.5 + 2 * 1.25, 1e-12);
    EXPECT_NEAR(m.boundary_length(BoundaryTag::S), 2.5, 1e-12);
    EXPECT_NEAR(m.boundary_length(BoundaryTag::W), 2.5 + 2 * 1.25, 1e-12);
}

TEST(Geometry, RectangleAllAreasPositive) {
    MeshDomain m = build_rectangle(M_PI, 1.0, 8, 5);
    for (int t = 0; t < m.num_triangles(); ++t) EXPECT_GT(m.triangle_area(t), 0.0);
    EXPECT_TRUE(validate_mesh(m).ok());
}

TEST(Geometry, RectangleGradingKeepsEndpointsAndValidity) {
    MeshDomain m = build_rectangle(1.0, 1.0, 8, 8, 2.0);
    EXPECT_TRUE(validate_mesh(m).ok());
    EXPECT_NEAR(m.boundary_length(BoundaryTag::S), 1.0, 1e-12);
    // Grading clusters surface vertices toward the interface corners.
    double min_dx = 1e9;
    for (int e = 0; e < m.num_boundary_edges(); ++e)
        if (m.boundary_edges[e].tag == BoundaryTag::S) min_dx = std::min(min_dx, m.edge_length(e));
    EXPECT_LT(min_dx, 1.0 / 8.0);
}

TEST(Geometry, DiskSmallestFan) {
    MeshDomain m = build_disk(1, 3);
    EXPECT_EQ(m.num_vertices(), 4);
    EXPECT_EQ(m.num_triangles(), 3);
    EXPECT_EQ(m.num_boundary_edges(), 3);
    for (const auto& be : m.boundary_edges) EXPECT_EQ(be.tag, BoundaryTag::S);
    EXPECT_TRUE(m.interface_vertices.empty());
    EXPECT_TRUE(validate_mesh(m).ok());
}

TEST(Geometry, DiskRejectsSmallCounts) {
    EXPECT_THROW(build_disk(0, 8), InvalidArgument);
    EXPECT_THROW(build_disk(1, 2), InvalidArgument);
}

TEST(Geometry, DiskPerimeterSecondOrderConvergence) {
    double e32 = 2 * M_PI - build_disk(1, 32).boundary_length();
    double e64 = 2 * M_PI - build_disk(1, 64).boundary_length();
    EXPECT_GT(e32, 0.0);
    EXPECT_NEAR(e32 / e64, 4.0, 0.2);
}

TEST(Geometry, HalfDiskInterface) {
    MeshDomain m = build_half_disk(1, 4);
    EXPECT_EQ(m.num_vertices(), 6);
    EXPECT_EQ(m.num_triangles(), 4);
    ASSERT_EQ(m.interface_vertices.size(), 2u);
    for (int g : m.interface_vertices) {
        EXPECT_NEAR(std::abs(m.vertices[g].x()), 1.0, 1e-15);
        EXPECT_NEAR(m.vertices[g].y(), 0.0, 1e-15);
    }
    int n_s = 0, n_w = 0;
    for (const auto& be : m.boundary_edges) (be.tag == BoundaryTag::S ? n_s : n_w)++;
    EXPECT_EQ(n_s, 2);
    EXPECT_EQ(n_w, 4);
    EXPECT_TRUE(validate_mesh(m).ok());
}

TEST(Geometry, HalfDiskLiesBelowSurface) {
    MeshDomain m = build_half_disk(4, 16);
    EXPECT_TRUE(validate_mesh(m).ok());
    for (const auto& v : m.vertices) EXPECT_LE(v.y(), 1e-15);
    // S edges lie on y = 0.
    for (size_t e = 0; e < m.boundary_edges.size(); ++e) {
        if (m.boundary_edges[e].tag != BoundaryTag::S) continue;
        EXPECT_NEAR(m.vertices[m.boundary_edges[e].a].y(), 0.0, 1e-15);
        EXPECT_NEAR(m.vertices[m.boundary_edges[e].b].y(), 0.0, 1e-15);
    }
}

TEST(Geometry, OutwardNormals) {
    MeshDomain m = build_rectangle(1.0, 1.0, 2, 2);
    for (int e = 0; e < m.num_boundary_edges(); ++e) {
        Vec2 mid = 0.5 * (m.vertices[m.boundary_edges[e].a] + m.vertices[m.boundary_edges[e].b]);
        Vec2 out = mid + 0.1 * m.edge_normals[e];
        bool inside = out.x() > 0 && out.x() < 1 && out.y() > -1 && out.y() < 0;
        EXPECT_FALSE(inside);
        EXPECT_NEAR(m.edge_normals[e].norm(), 1.0, 1e-14);
    }
    MeshDomain d = build_disk(2, 16);
    for (int e = 0; e < d.num_boundary_edges(); ++e) {
        Vec2 mid = 0.5 * (d.vertices[d.boundary_edges[e].a] + d.vertices[d.boundary_edges[e].b]);
        EXPECT_GT(d.edge_normals[e].dot(mid), 0.0);
    }
}

TEST(Geometry, RefineCounts) {
    MeshDomain m = build_rectangle(1.0, 1.0, 2, 2);
    MeshDomain r = refine(m);
    EXPECT_EQ(r.num_triangles(), 32);
    // V + E new vertices: Euler on the disk-like complex gives E = 16 here.
    EXPECT_EQ(r.num_vertices(), 9 + 16);
    EXPECT_EQ(r.num_boundary_edges(), 2 * m.num_boundary_edges());
    EXPECT_TRUE(validate_mesh(r).ok());
    EXPECT_NEAR(r.boundary_length(BoundaryTag::S), m.boundary_length(BoundaryTag::S), 1e-12);
    EXPECT_NEAR(r.boundary_length(BoundaryTag::W), m.boundary_length(BoundaryTag::W), 1e-12);
}

TEST(Geometry, RefineProjectsCircleMidpoints) {
    MeshDomain m = build_disk(2, 12);
    MeshDomain r = refine(m);
    EXPECT_TRUE(validate_mesh(r).ok());
    for (const auto& be : r.boundary_edges) {
        EXPECT_NEAR(r.vertices[be.a].norm(), 1.0, 1e-14);
        EXPECT_NEAR(r.vertices[be.b].norm(), 1.0, 1e-14);
    }
    // Perimeter approaches the circle from below under refinement.
    EXPECT_GT(r.boundary_length(), m.boundary_length());
    EXPECT_LT(r.boundary_length(), 2 * M_PI);

    MeshDomain h = refine(build_half_disk(2, 8));
    EXPECT_TRUE(validate_mesh(h).ok());
    for (const auto& be : h.boundary_edges)
        if (be.tag == BoundaryTag::W) {
            EXPECT_NEAR(h.vertices[be.a].norm(), 1.0, 1e-14);
            EXPECT_NEAR(h.vertices[be.b].norm(), 1.0, 1e-14);
        }
}

TEST(Geometry, ValidateFlagsFlippedTriangle) {
    MeshDomain m = build_rectangle(1.0, 1.0, 2, 2);
    std::swap(m.triangles[3][0], m.triangles[3][1]);
    MeshDiagnostics diag = validate_mesh(m);
    ASSERT_FALSE(diag.ok());
    bool mentions = false;
    for (const auto& s : diag.issues)
        if (s.find("triangle 3") != std::string::npos) mentions = true;
    EXPECT_TRUE(mentions);
}

TEST(Geometry, ValidateFlagsUntaggedBoundaryEdge) {
    MeshDomain m = build_rectangle(1.0, 1.0, 2, 2);
    m.boundary_edges.pop_back();
    MeshDiagnostics diag = validate_mesh(m);
    ASSERT_FALSE(diag.ok());
    bool mentions = false;
    for (const auto& s : diag.issues)
        if (s.find("untagged boundary edge") != std::string::npos) mentions = true;
    EXPECT_TRUE(mentions);
}

TEST(Geometry, ValidateFlagsInterfaceMismatch) {
    MeshDomain m = build_rectangle(1.0, 1.0, 2, 2);
    m.interface_vertices.pop_back();
    EXPECT_FALSE(validate_mesh(m).ok());
}

TEST(Geometry, KindCompatibility) {
    MeshDomain rect = build_rectangle(1.0, 1.0, 2, 2);
    MeshDomain disk = build_disk(1, 8);
    EXPECT_TRUE(kind_compatible(rect, ProblemKind::SteklovDirichlet));
    EXPECT_TRUE(kind_compatible(rect, ProblemKind::SteklovNeumann));
    EXPECT_FALSE(kind_compatible(rect, ProblemKind::PureSteklov));
    EXPECT_TRUE(kind_compatible(disk, ProblemKind::PureSteklov));
    EXPECT_FALSE(kind_compatible(disk, ProblemKind::SteklovDirichlet));
    EXPECT_THROW(require_kind_compatible(disk, ProblemKind::SteklovNeumann), InvalidArgument);
}

TEST(MeshIO, RoundTripIsExact) {
    MeshDomain m = build_half_disk(2, 7);
    std::ostringstream os;
    write_mesh(os, m);
    std::istringstream is(os.str());
    MeshDomain r = read_mesh(is);
    ASSERT_EQ(r.num_vertices(), m.num_vertices());
    ASSERT_EQ(r.num_triangles(), m.num_triangles());
    ASSERT_EQ(r.num_boundary_edges(), m.num_boundary_edges());
    for (int v = 0; v < m.num_vertices(); ++v) {
        EXPECT_EQ(r.vertices[v].x(), m.vertices[v].x());
        EXPECT_EQ(r.vertices[v].y(), m.vertices[v].y());
    }
    for (int t = 0; t < m.num_triangles(); ++t) EXPECT_EQ(r.triangles[t], m.triangles[t]);
    for (int e = 0; e < m.num_boundary_edges(); ++e) {
        EXPECT_EQ(r.boundary_edges[e].a, m.boundary_edges[e].a);
        EXPECT_EQ(r.boundary_edges[e].b, m.boundary_edges[e].b);
        EXPECT_EQ(r.boundary_edges[e].tag, m.boundary_edges[e].tag);
    }
    EXPECT_EQ(r.interface_vertices, m.interface_vertices);
}

TEST(MeshIO, RejectsBadInput) {
    std::istringstream bad1("nonsense");
    EXPECT_THROW(read_mesh(bad1), InvalidArgument);
    std::istringstream bad2("mesh2d v1\nv 0 0\nv 1 0\nv 0 1\nt 0 1 5\n");
    EXPECT_THROW(read_mesh(bad2), InvalidArgument);
    std::istringstream bad3("mesh2d v1\nv 0 0\nv 1 0\nv 0 1\nt 0 1 2\nb 0 1 Q\n");
    EXPECT_THROW(read_mesh(bad3), InvalidArgument);
}

TEST(Geometry, HalfDiskGradingClustersTowardInterface) {
    MeshDomain uniform = build_half_disk(4, 16);
    MeshDomain graded = build_half_disk(4, 16, 2.0);
    EXPECT_TRUE(validate_mesh(graded).ok());
    ASSERT_EQ(graded.interface_vertices.size(), 2u);
    // Shortest arc edge shrinks relative to the uniform mesh.
    auto min_arc = [](const MeshDomain& m) {
        double best = 1e9;
        for (int e = 0; e < m.num_boundary_edges(); ++e)
            if (m.boundary_edges[e].tag == BoundaryTag::W) best = std::min(best, m.edge_length(e));
        return best;
    };
    EXPECT_LT(min_arc(graded), 0.8 * min_arc(uniform));
}
