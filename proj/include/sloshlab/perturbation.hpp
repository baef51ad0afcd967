#pragma once

#include "sloshlab/geometry.hpp"
#include "sloshlab/types.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace sloshlab {

enum class FieldKind { NormalBump, InteriorBump, Affine, VertexTable };

struct FieldEval {
    Vec2 value = Vec2::Zero();
    Mat2 jacobian = Mat2::Zero();
    double divergence = 0.0;
};

namespace detail {

// Distance from point to segment [a,b].
inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    Vec2 d = b - a;
    double len2 = d.squaredNorm();
    double t = len2 > 0.0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
    return (p - (a + t * d)).norm();
}

}  // namespace detail

/// A C2 vector field on the plane with closed-form value, Jacobian and
/// divergence.  VertexTable is the exception: it only knows per-vertex
/// displacements and exists for finite-difference oracles.
class PerturbationField {
public:
    static PerturbationField affine(const Mat2& matrix, const Vec2& offset) {
        PerturbationField f;
        f.kind_ = FieldKind::Affine;
        f.matrix_ = matrix;
        f.offset_ = offset;
        return f;
    }

    static PerturbationField translation(const Vec2& offset) { return affine(Mat2::Zero(), offset); }

    static PerturbationField dilation() { return affine(Mat2::Identity(), Vec2::Zero()); }

    static PerturbationField zero() { return affine(Mat2::Zero(), Vec2::Zero()); }

    static PerturbationField interior_bump(const Vec2& center, double radius, double amplitude,
                                           const Vec2& direction) {
        if (!(radius > 0.0)) throw InvalidArgument("interior_bump: radius must be positive");
        if (direction.norm() == 0.0) throw InvalidArgument("interior_bump: zero direction");
        PerturbationField f;
        f.kind_ = FieldKind::InteriorBump;
        f.center_ = center;
        f.radius_ = radius;
        f.amplitude_ = amplitude;
        f.direction_ = direction.normalized();
        return f;
    }

    static PerturbationField vertex_table(std::vector<Vec2> displacements) {
        PerturbationField f;
        f.kind_ = FieldKind::VertexTable;
        f.table_ = std::move(displacements);
        return f;
    }

    FieldKind kind() const { return kind_; }
    double amplitude() const { return amplitude_; }
    double radius() const { return radius_; }
    const Vec2& anchor() const { return center_; }
    BoundaryTag side() const { return side_; }

    /// Largest displacement in a VertexTable; the natural scale for that kind.
    double table_max() const {
        double vmax = 0.0;
        for (const auto& d : table_) vmax = std::max(vmax, d.norm());
        return vmax;
    }

    bool is_zero() const {
        switch (kind_) {
            case FieldKind::Affine: return matrix_.isZero(0.0) && offset_.isZero(0.0);
            case FieldKind::VertexTable: {
                for (const auto& d : table_)
                    if (d.norm() != 0.0) return false;
                return true;
            }
            default: return amplitude_ == 0.0;
        }
    }

    /// Value, Jacobian and divergence at a point; the three are mutually
    /// consistent (divergence is the Jacobian trace).
    FieldEval eval(const Vec2& x) const {
        FieldEval out;
        switch (kind_) {
            case FieldKind::Affine:
                out.value = matrix_ * x + offset_;
                out.jacobian = matrix_;
                out.divergence = matrix_.trace();
                return out;
            case FieldKind::InteriorBump:
                return bump_eval(x, direction_, Mat2::Zero(), 0.0);
            case FieldKind::NormalBump: {
                if (radial_normal_) {
                    double r = x.norm();
                    // The support sits on the unit circle, far from the origin.
                    if (r < 1e-12) return out;
                    Vec2 n = x / r;
                    Mat2 dn = (Mat2::Identity() - n * n.transpose()) / r;
                    return bump_eval(x, n, dn, 1.0 / r);
                }
                return bump_eval(x, direction_, Mat2::Zero(), 0.0);
            }
            case FieldKind::VertexTable:
                throw UnsupportedOperation("eval_field: VertexTable has no pointwise evaluator");
        }
        return out;
    }

    /// Displacement used by transplant; defined for every kind.
    Vec2 displacement_at_vertex(int v, const MeshDomain& m) const {
        if (kind_ == FieldKind::VertexTable) {
            if (v < 0 || v >= static_cast<int>(table_.size()))
                throw InvalidArgument("vertex_table: vertex index out of range");
            return table_[v];
        }
        return eval(m.vertices[v]).value;
    }

    /// Copy with the amplitude scaled; every derivative scales with it.
    PerturbationField scaled(double factor) const {
        PerturbationField f = *this;
        switch (kind_) {
            case FieldKind::Affine:
                f.matrix_ *= factor;
                f.offset_ *= factor;
                break;
            case FieldKind::VertexTable:
                for (auto& d : f.table_) d *= factor;
                break;
            default:
                f.amplitude_ *= factor;
        }
        return f;
    }

    std::string describe() const {
        std::ostringstream os;
        os.precision(12);
        switch (kind_) {
            case FieldKind::Affine:
                os << "affine(A=[" << matrix_(0, 0) << "," << matrix_(0, 1) << ";" << matrix_(1, 0) << ","
                   << matrix_(1, 1) << "],b=[" << offset_.x() << "," << offset_.y() << "])";
                break;
            case FieldKind::InteriorBump:
                os << "interior_bump(center=[" << center_.x() << "," << center_.y() << "],radius=" << radius_
                   << ",amplitude=" << amplitude_ << ",dir=[" << direction_.x() << "," << direction_.y() << "])";
                break;
            case FieldKind::NormalBump:
                os << "normal_bump(anchor=[" << center_.x() << "," << center_.y() << "],radius=" << radius_
                   << ",amplitude=" << amplitude_ << ",side=" << to_string(side_)
                   << (radial_normal_ ? ",normal=radial" : ",normal=fixed") << ")";
                break;
            case FieldKind::VertexTable:
                os << "vertex_table(n=" << table_.size() << ")";
                break;
        }
        return os.str();
    }

    // Sampling box for norm estimation: the support for compact kinds, a fixed
    // reference box for affine fields (all reference domains fit inside it).
    void sampling_box(Vec2& lo, Vec2& hi) const {
        if (kind_ == FieldKind::Affine || kind_ == FieldKind::VertexTable) {
            lo = Vec2(-2.0, -2.0);
            hi = Vec2(2.0, 2.0);
            return;
        }
        lo = center_ - Vec2(radius_, radius_);
        hi = center_ + Vec2(radius_, radius_);
    }

    friend PerturbationField normal_bump(const MeshDomain&, const Vec2&, double, double, BoundaryTag);

private:
    // Profile (1 - s^2)^3 vanishes to third order at the support boundary, so
    // value, gradient and Hessian are continuous there.
    FieldEval bump_eval(const Vec2& x, const Vec2& n, const Mat2& dn, double div_n) const {
        FieldEval out;
        Vec2 d = x - center_;
        double s2 = d.squaredNorm() / (radius_ * radius_);
        if (s2 >= 1.0) return out;
        double q = 1.0 - s2;
        double p = q * q * q;
        Vec2 grad_p = (-6.0 * q * q / (radius_ * radius_)) * d;
        out.value = amplitude_ * p * n;
        out.jacobian = amplitude_ * (n * grad_p.transpose() + p * dn);
        out.divergence = amplitude_ * (n.dot(grad_p) + p * div_n);
        return out;
    }

    FieldKind kind_ = FieldKind::Affine;
    Mat2 matrix_ = Mat2::Zero();
    Vec2 offset_ = Vec2::Zero();
    Vec2 center_ = Vec2::Zero();   // bump center / anchor
    double radius_ = 0.0;
    double amplitude_ = 0.0;
    Vec2 direction_ = Vec2::UnitX();  // bump direction / fixed normal
    bool radial_normal_ = false;
    BoundaryTag side_ = BoundaryTag::S;
    std::vector<Vec2> table_;
};

inline FieldEval eval_field(const PerturbationField& f, const Vec2& x) { return f.eval(x); }

/// Outward bump psi = alpha * N supported in a ball around a boundary anchor.
/// The support must stay on the requested side and keep clear of the
/// interface; N is the anchor edge normal, or x/|x| on a unit-circle arc.
inline PerturbationField normal_bump(const MeshDomain& m, const Vec2& anchor, double radius,
                                     double amplitude, BoundaryTag side) {
    if (!(radius > 0.0)) throw InvalidArgument("normal_bump: radius must be positive");
    if (!(amplitude > 0.0)) throw InvalidArgument("normal_bump: amplitude must be positive");
    if (!m.has_tag(side)) throw InvalidSupport("normal_bump: mesh has no boundary tagged " + std::string(to_string(side)));

    // Nearest point of the side polyline; the anchor must sit on that side.
    double best = std::numeric_limits<double>::infinity();
    int best_edge = -1;
    for (int e = 0; e < m.num_boundary_edges(); ++e) {
        if (m.boundary_edges[e].tag != side) continue;
        double d = detail::point_segment_distance(anchor, m.vertices[m.boundary_edges[e].a],
                                                  m.vertices[m.boundary_edges[e].b]);
        if (d < best) {
            best = d;
            best_edge = e;
        }
    }
    if (best_edge < 0 || best > 0.25 * radius)
        throw InvalidSupport("normal_bump: anchor does not lie on the " + std::string(to_string(side)) +
                             " portion of the boundary");

    for (int g : m.interface_vertices)
        if ((m.vertices[g] - anchor).norm() <= radius)
            throw InvalidSupport("normal_bump: support reaches the interface vertex " + std::to_string(g));

    BoundaryTag other = side == BoundaryTag::S ? BoundaryTag::W : BoundaryTag::S;
    for (int e = 0; e < m.num_boundary_edges(); ++e) {
        if (m.boundary_edges[e].tag != other) continue;
        double d = detail::point_segment_distance(anchor, m.vertices[m.boundary_edges[e].a],
                                                  m.vertices[m.boundary_edges[e].b]);
        if (d <= radius)
            throw InvalidSupport("normal_bump: support crosses onto the " + std::string(to_string(other)) +
                                 " portion of the boundary");
    }

    PerturbationField f;
    f.kind_ = FieldKind::NormalBump;
    f.center_ = anchor;
    f.radius_ = radius;
    f.amplitude_ = amplitude;
    f.side_ = side;
    if (m.unit_circle_tag && *m.unit_circle_tag == side && std::abs(anchor.norm() - 1.0) < 0.05) {
        f.radial_normal_ = true;
    } else {
        f.direction_ = m.edge_normals[best_edge];
    }
    return f;
}

/// Sampled sup-estimate of max(|psi|, |Dpsi|, |D2psi|): the C2 norm of the
/// perturbation space.  Nested dyadic grids make the estimate monotone
/// nondecreasing in the sampling density.
inline double c2_norm_estimate(const PerturbationField& f, int density = 64) {
    if (density < 2) throw InvalidArgument("c2_norm_estimate: density must be at least 2");
    if (f.kind() == FieldKind::VertexTable) {
        // FD-oracle kind: derivatives are unavailable, report the value sup.
        return f.table_max();
    }

    Vec2 lo, hi;
    f.sampling_box(lo, hi);
    double best = 0.0;
    for (int level = 2; level <= density; level *= 2) {
        int n = level;
        double hx = (hi.x() - lo.x()) / n;
        double hy = (hi.y() - lo.y()) / n;
        double fd_step = 0.25 * std::min(hx, hy);
        for (int i = 0; i <= n; ++i) {
            for (int j = 0; j <= n; ++j) {
                Vec2 x(lo.x() + i * hx, lo.y() + j * hy);
                FieldEval ev = f.eval(x);
                best = std::max(best, ev.value.norm());
                best = std::max(best, ev.jacobian.operatorNorm());
                // Central-difference Hessian estimate from the exact Jacobian.
                Mat2 dx = (f.eval(x + Vec2(fd_step, 0)).jacobian - f.eval(x - Vec2(fd_step, 0)).jacobian) /
                          (2 * fd_step);
                Mat2 dy = (f.eval(x + Vec2(0, fd_step)).jacobian - f.eval(x - Vec2(0, fd_step)).jacobian) /
                          (2 * fd_step);
                best = std::max(best, std::sqrt(dx.squaredNorm() + dy.squaredNorm()));
            }
        }
    }
    return best;
}

/// A mesh moved by x -> x + t psi(x); connectivity and tags are untouched.
struct TransplantRecord {
    std::string source_mesh;
    std::string field;
    double t = 0.0;
    MeshDomain mesh;
};

inline TransplantRecord transplant(const MeshDomain& m, const PerturbationField& f, double t) {
    TransplantRecord rec;
    rec.source_mesh = m.label;
    rec.field = f.describe();
    rec.t = t;

    if (t == 0.0) {
        rec.mesh = m;
        return rec;
    }
    if (f.kind() != FieldKind::VertexTable) {
        double norm = c2_norm_estimate(f);
        if (!(std::abs(t) * norm < 0.5))
            throw AmplitudeTooLarge("transplant: |t|*c2_norm = " + std::to_string(std::abs(t) * norm) +
                                    " violates the < 1/2 invertibility guard");
    }

    MeshDomain out = m;
    for (int v = 0; v < m.num_vertices(); ++v)
        out.vertices[v] = m.vertices[v] + t * f.displacement_at_vertex(v, m);
    // The moved boundary no longer lies on the reference circle.
    out.unit_circle_tag.reset();
    out.label = m.label + "+" + std::to_string(t) + "*psi";
    for (int tr = 0; tr < out.num_triangles(); ++tr)
        if (!(out.triangle_area(tr) > 0.0))
            throw MeshFolded("transplant: triangle " + std::to_string(tr) + " inverted at t = " + std::to_string(t));
    finalize_mesh(out);
    rec.mesh = std::move(out);
    return rec;
}

}  // namespace sloshlab
