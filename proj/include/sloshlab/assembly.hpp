#pragma once

#include "sloshlab/geometry.hpp"
#include "sloshlab/perturbation.hpp"
#include "sloshlab/types.hpp"

#include <Eigen/SparseCholesky>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace sloshlab {

enum class FormTag { Stiffness, BoundaryMassS, Robin };

/// Assembled symmetric bilinear form over mesh vertex indices.
struct FormMatrix {
    SpMat mat;
    FormTag tag = FormTag::Stiffness;
    std::string mesh_label;
    std::string quadrature;
};

/// Mapping between the full vertex set and the free dofs after Dirichlet
/// elimination on W.  Identity for Neumann / pure Steklov problems.
struct DofMap {
    std::vector<int> full_to_free;  // -1 for eliminated vertices
    std::vector<int> free_to_full;
    bool identity = true;

    int n_free() const { return static_cast<int>(free_to_full.size()); }

    VecX restrict_vector(const VecX& full) const {
        if (identity) return full;
        VecX out(n_free());
        for (int i = 0; i < n_free(); ++i) out[i] = full[free_to_full[i]];
        return out;
    }

    VecX extend_vector(const VecX& freev, int n_full) const {
        if (identity) return freev;
        VecX out = VecX::Zero(n_full);
        for (int i = 0; i < n_free(); ++i) out[free_to_full[i]] = freev[i];
        return out;
    }
};

namespace detail {

// Basis-function gradients of the P1 element on triangle t.
inline std::array<Vec2, 3> p1_gradients(const MeshDomain& m, int t, double& area) {
    const auto& tri = m.triangles[t];
    const Vec2& p0 = m.vertices[tri[0]];
    const Vec2& p1 = m.vertices[tri[1]];
    const Vec2& p2 = m.vertices[tri[2]];
    area = 0.5 * ((p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y()));
    double inv2a = 1.0 / (2.0 * area);
    return {Vec2((p1.y() - p2.y()) * inv2a, (p2.x() - p1.x()) * inv2a),
            Vec2((p2.y() - p0.y()) * inv2a, (p0.x() - p2.x()) * inv2a),
            Vec2((p0.y() - p1.y()) * inv2a, (p1.x() - p0.x()) * inv2a)};
}

inline Vec2 p1_gradient(const MeshDomain& m, int t, const VecX& nodal) {
    double area;
    auto g = p1_gradients(m, t, area);
    const auto& tri = m.triangles[t];
    return nodal[tri[0]] * g[0] + nodal[tri[1]] * g[1] + nodal[tri[2]] * g[2];
}

constexpr double kGauss2 = 0.57735026918962576451;  // 1/sqrt(3)

}  // namespace detail

/// P1 Galerkin matrix of the Dirichlet form  a(u,v) = int grad u . grad v.
inline FormMatrix stiffness(const MeshDomain& m) {
    std::vector<Triplet> trips;
    trips.reserve(static_cast<size_t>(m.num_triangles()) * 9);
    for (int t = 0; t < m.num_triangles(); ++t) {
        double area;
        auto g = detail::p1_gradients(m, t, area);
        const auto& tri = m.triangles[t];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) trips.emplace_back(tri[i], tri[j], area * g[i].dot(g[j]));
    }
    FormMatrix fm;
    fm.mat.resize(m.num_vertices(), m.num_vertices());
    fm.mat.setFromTriplets(trips.begin(), trips.end());
    fm.tag = FormTag::Stiffness;
    fm.mesh_label = m.label;
    fm.quadrature = "exact-p1";
    return fm;
}

/// Consistent P1 mass on edges of one tag (or the whole boundary).
inline FormMatrix boundary_mass(const MeshDomain& m, std::optional<BoundaryTag> region) {
    std::vector<Triplet> trips;
    for (int e = 0; e < m.num_boundary_edges(); ++e) {
        const auto& be = m.boundary_edges[e];
        if (region && be.tag != *region) continue;
        double len = m.edge_length(e);
        trips.emplace_back(be.a, be.a, len / 3.0);
        trips.emplace_back(be.b, be.b, len / 3.0);
        trips.emplace_back(be.a, be.b, len / 6.0);
        trips.emplace_back(be.b, be.a, len / 6.0);
    }
    FormMatrix fm;
    fm.mat.resize(m.num_vertices(), m.num_vertices());
    fm.mat.setFromTriplets(trips.begin(), trips.end());
    fm.tag = FormTag::BoundaryMassS;
    fm.mesh_label = m.label;
    fm.quadrature = "exact-edge-p1";
    return fm;
}

/// Free-surface mass:  (u,v) -> int_S u v.
inline FormMatrix boundary_mass_S(const MeshDomain& m) { return boundary_mass(m, BoundaryTag::S); }

/// Robin form  K + M_S; positive definite whenever S is nonempty.
inline FormMatrix robin_matrix(const MeshDomain& m) {
    FormMatrix fm = stiffness(m);
    fm.mat = fm.mat + boundary_mass_S(m).mat;
    fm.tag = FormTag::Robin;
    fm.quadrature = "exact-p1";
    return fm;
}

/// Builds the free-dof map for homogeneous Dirichlet data on W.  Interface
/// vertices touch W edges, so they are eliminated with the walls.
inline DofMap dirichlet_dof_map(const MeshDomain& m) {
    if (!m.has_tag(BoundaryTag::W))
        throw UnsupportedOperation("dirichlet_restrict: mesh has no W boundary to eliminate");
    auto w_mask = m.boundary_vertex_mask(BoundaryTag::W);
    DofMap map;
    map.identity = false;
    map.full_to_free.assign(m.num_vertices(), -1);
    for (int v = 0; v < m.num_vertices(); ++v) {
        if (!w_mask[v]) {
            map.full_to_free[v] = static_cast<int>(map.free_to_full.size());
            map.free_to_full.push_back(v);
        }
    }
    return map;
}

inline DofMap identity_dof_map(const MeshDomain& m) {
    DofMap map;
    map.identity = true;
    map.full_to_free.resize(m.num_vertices());
    map.free_to_full.resize(m.num_vertices());
    for (int v = 0; v < m.num_vertices(); ++v) {
        map.full_to_free[v] = v;
        map.free_to_full[v] = v;
    }
    return map;
}

inline SpMat restrict_matrix(const SpMat& full, const DofMap& map) {
    if (map.identity) return full;
    std::vector<Triplet> trips;
    trips.reserve(full.nonZeros());
    for (int col = 0; col < full.outerSize(); ++col) {
        int jc = map.full_to_free[col];
        if (jc < 0) continue;
        for (SpMat::InnerIterator it(full, col); it; ++it) {
            int ir = map.full_to_free[it.row()];
            if (ir >= 0) trips.emplace_back(ir, jc, it.value());
        }
    }
    SpMat out(map.n_free(), map.n_free());
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

/// Removes rows and columns of every W (and interface) vertex.
inline std::pair<FormMatrix, DofMap> dirichlet_restrict(const FormMatrix& fm, const MeshDomain& m) {
    DofMap map = dirichlet_dof_map(m);
    FormMatrix out = fm;
    out.mat = restrict_matrix(fm.mat, map);
    return {out, map};
}

/// Volume shape-derivative of the Dirichlet form:
///   int div psi grad u . grad v - (d_i u d_j v + d_j u d_i v) d_j psi_i.
/// Bilinear in (u,v), linear in psi, symmetric.
inline double form_dA(const MeshDomain& m, const PerturbationField& psi, const VecX& u, const VecX& v) {
    double total = 0.0;
    for (int t = 0; t < m.num_triangles(); ++t) {
        double area;
        auto gb = detail::p1_gradients(m, t, area);
        const auto& tri = m.triangles[t];
        Vec2 gu = u[tri[0]] * gb[0] + u[tri[1]] * gb[1] + u[tri[2]] * gb[2];
        Vec2 gv = v[tri[0]] * gb[0] + v[tri[1]] * gb[1] + v[tri[2]] * gb[2];
        const Vec2& p0 = m.vertices[tri[0]];
        const Vec2& p1 = m.vertices[tri[1]];
        const Vec2& p2 = m.vertices[tri[2]];
        Vec2 q[3] = {0.5 * (p0 + p1), 0.5 * (p1 + p2), 0.5 * (p2 + p0)};
        double acc = 0.0;
        for (const Vec2& x : q) {
            FieldEval ev = psi.eval(x);
            acc += ev.divergence * gu.dot(gv) - (gu.dot(ev.jacobian * gv) + gv.dot(ev.jacobian * gu));
        }
        total += acc * (area / 3.0);
    }
    return total;
}

/// Boundary shape-derivative of the trace mass on the given region (none =
/// whole boundary):  int uv (div psi - nu . (Dpsi) nu).
inline double form_dB(const MeshDomain& m, const PerturbationField& psi, const VecX& u, const VecX& v,
                      std::optional<BoundaryTag> region) {
    double total = 0.0;
    for (int e = 0; e < m.num_boundary_edges(); ++e) {
        const auto& be = m.boundary_edges[e];
        if (region && be.tag != *region) continue;
        const Vec2& pa = m.vertices[be.a];
        const Vec2& pb = m.vertices[be.b];
        const Vec2& n = m.edge_normals[e];
        double len = (pb - pa).norm();
        double acc = 0.0;
        for (double xi : {-detail::kGauss2, detail::kGauss2}) {
            double sa = 0.5 * (1.0 - xi), sb = 0.5 * (1.0 + xi);
            Vec2 x = sa * pa + sb * pb;
            double uu = sa * u[be.a] + sb * u[be.b];
            double vv = sa * v[be.a] + sb * v[be.b];
            FieldEval ev = psi.eval(x);
            acc += uu * vv * (ev.divergence - n.dot(ev.jacobian * n));
        }
        total += acc * (len / 2.0);
    }
    return total;
}

/// Shape-derivative of the volume pairing  int_Omega u v:
///   -int psi . grad(uv) dx  +  int_boundary (psi . nu) uv.
inline double form_dV(const MeshDomain& m, const PerturbationField& psi, const VecX& u, const VecX& v) {
    double total = 0.0;
    for (int t = 0; t < m.num_triangles(); ++t) {
        double area;
        auto gb = detail::p1_gradients(m, t, area);
        const auto& tri = m.triangles[t];
        Vec2 gu = u[tri[0]] * gb[0] + u[tri[1]] * gb[1] + u[tri[2]] * gb[2];
        Vec2 gv = v[tri[0]] * gb[0] + v[tri[1]] * gb[1] + v[tri[2]] * gb[2];
        const Vec2& p0 = m.vertices[tri[0]];
        const Vec2& p1 = m.vertices[tri[1]];
        const Vec2& p2 = m.vertices[tri[2]];
        // Values at edge midpoints follow from vertex averages.
        double um[3] = {0.5 * (u[tri[0]] + u[tri[1]]), 0.5 * (u[tri[1]] + u[tri[2]]),
                        0.5 * (u[tri[2]] + u[tri[0]])};
        double vm[3] = {0.5 * (v[tri[0]] + v[tri[1]]), 0.5 * (v[tri[1]] + v[tri[2]]),
                        0.5 * (v[tri[2]] + v[tri[0]])};
        Vec2 q[3] = {0.5 * (p0 + p1), 0.5 * (p1 + p2), 0.5 * (p2 + p0)};
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) {
            FieldEval ev = psi.eval(q[k]);
            Vec2 grad_uv = um[k] * gv + vm[k] * gu;
            acc -= ev.value.dot(grad_uv);
        }
        total += acc * (area / 3.0);
    }
    for (int e = 0; e < m.num_boundary_edges(); ++e) {
        const auto& be = m.boundary_edges[e];
        const Vec2& pa = m.vertices[be.a];
        const Vec2& pb = m.vertices[be.b];
        const Vec2& n = m.edge_normals[e];
        double len = (pb - pa).norm();
        double acc = 0.0;
        for (double xi : {-detail::kGauss2, detail::kGauss2}) {
            double sa = 0.5 * (1.0 - xi), sb = 0.5 * (1.0 + xi);
            Vec2 x = sa * pa + sb * pb;
            double uu = sa * u[be.a] + sb * u[be.b];
            double vv = sa * v[be.a] + sb * v[be.b];
            acc += psi.eval(x).value.dot(n) * uu * vv;
        }
        total += acc * (len / 2.0);
    }
    return total;
}

/// Variational normal-flux recovery on one boundary region: solves
///   M_region g = (K e - lambda M_S e) | region vertices.
/// Returns a full-length vector, zero off the region.  On W this approximates
/// the outward normal derivative of e.
inline VecX flux_recovery(const MeshDomain& m, const VecX& e, double lambda, BoundaryTag region) {
    auto region_vertices = m.vertices_with_tag(region);
    if (region_vertices.empty()) throw InvalidArgument("flux_recovery: region has zero measure");

    SpMat k = stiffness(m).mat;
    SpMat ms = boundary_mass_S(m).mat;
    VecX resid = k * e - lambda * (ms * e);

    SpMat mreg_full = boundary_mass(m, region).mat;
    const int nr = static_cast<int>(region_vertices.size());
    std::vector<int> full_to_reg(m.num_vertices(), -1);
    for (int i = 0; i < nr; ++i) full_to_reg[region_vertices[i]] = i;
    std::vector<Triplet> trips;
    for (int col = 0; col < mreg_full.outerSize(); ++col) {
        int jc = full_to_reg[col];
        if (jc < 0) continue;
        for (SpMat::InnerIterator it(mreg_full, col); it; ++it) {
            int ir = full_to_reg[it.row()];
            if (ir >= 0) trips.emplace_back(ir, jc, it.value());
        }
    }
    SpMat mreg(nr, nr);
    mreg.setFromTriplets(trips.begin(), trips.end());

    VecX rhs(nr);
    for (int i = 0; i < nr; ++i) rhs[i] = resid[region_vertices[i]];

    Eigen::SimplicialLDLT<SpMat> solver(mreg);
    if (solver.info() != Eigen::Success) throw SingularSystem("flux_recovery: region mass factorization failed");
    VecX g = solver.solve(rhs);

    VecX out = VecX::Zero(m.num_vertices());
    for (int i = 0; i < nr; ++i) out[region_vertices[i]] = g[i];
    return out;
}

/// Owning triangle per boundary edge (each boundary edge has exactly one).
inline std::vector<int> boundary_edge_triangles(const MeshDomain& m) {
    auto owner = detail::edge_owner(m);
    std::vector<int> out(m.num_boundary_edges(), -1);
    for (int e = 0; e < m.num_boundary_edges(); ++e) {
        auto it = owner.find(detail::edge_key(m.boundary_edges[e].a, m.boundary_edges[e].b));
        if (it != owner.end()) out[e] = it->second;
    }
    return out;
}

}  // namespace sloshlab
