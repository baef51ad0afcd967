#include "sloshlab/geometry.hpp"
#include "sloshlab/perturbation.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace sloshlab;

TEST(Perturbation, AffineIdentityField) {
    PerturbationField f = PerturbationField::dilation();
    Vec2 x(0.3, -0.7);
    FieldEval ev = eval_field(f, x);
    EXPECT_NEAR((ev.value - x).norm(), 0.0, 1e-15);
    EXPECT_NEAR((ev.jacobian - Mat2::Identity()).norm(), 0.0, 1e-15);
    EXPECT_NEAR(ev.divergence, 2.0, 1e-15);
}

TEST(Perturbation, AffineTranslation) {
    Vec2 c(0.2, 0.5);
    PerturbationField f = PerturbationField::translation(c);
    FieldEval ev = f.eval(Vec2(10.0, -3.0));
    EXPECT_NEAR((ev.value - c).norm(), 0.0, 1e-15);
    EXPECT_NEAR(ev.jacobian.norm(), 0.0, 1e-15);
    EXPECT_NEAR(ev.divergence, 0.0, 1e-15);
}

TEST(Perturbation, JacobianTraceIsDivergence) {
    MeshDomain disk = build_disk(4, 32);
    PerturbationField bump = normal_bump(disk, Vec2(1.0, 0.0), 0.3, 0.05, BoundaryTag::S);
    for (Vec2 x : {Vec2(0.95, 0.1), Vec2(0.8, -0.1), Vec2(1.0, 0.0)}) {
        FieldEval ev = bump.eval(x);
        EXPECT_NEAR(ev.jacobian.trace(), ev.divergence, 1e-14);
    }
}

TEST(Perturbation, BumpVanishesOutsideSupport) {
    MeshDomain disk = build_disk(4, 32);
    PerturbationField bump = normal_bump(disk, Vec2(1.0, 0.0), 0.3, 0.05, BoundaryTag::S);
    FieldEval ev = bump.eval(Vec2(-1.0, 0.0));
    EXPECT_EQ(ev.value.norm(), 0.0);
    EXPECT_EQ(ev.jacobian.norm(), 0.0);
    EXPECT_EQ(ev.divergence, 0.0);
}

TEST(Perturbation, NormalBumpNormalization) {
    MeshDomain disk = build_disk(8, 64);
    double amp = 0.04;
    PerturbationField bump = normal_bump(disk, Vec2(1.0, 0.0), 0.3, amp, BoundaryTag::S);
    // psi . nu equals the amplitude at the anchor.
    FieldEval ev = bump.eval(Vec2(1.0, 0.0));
    EXPECT_NEAR(ev.value.dot(Vec2(1.0, 0.0)), amp, 1e-14);
}

TEST(Perturbation, NormalBumpSideMismatch) {
    MeshDomain rect = build_rectangle(1.0, 1.0, 8, 8);
    EXPECT_THROW(normal_bump(rect, Vec2(0.5, 0.0), 0.2, 0.01, BoundaryTag::W), InvalidSupport);
}

TEST(Perturbation, NormalBumpInterfaceMargin) {
    MeshDomain rect = build_rectangle(1.0, 1.0, 8, 8);
    // Anchor on S within one radius of the corner (0,0).
    EXPECT_THROW(normal_bump(rect, Vec2(0.1, 0.0), 0.2, 0.01, BoundaryTag::S), InvalidSupport);
    // Far enough from both corners is fine.
    EXPECT_NO_THROW(normal_bump(rect, Vec2(0.5, 0.0), 0.2, 0.01, BoundaryTag::S));
}

TEST(Perturbation, NormalBumpZeroOnOppositeSide) {
    MeshDomain rect = build_rectangle(1.0, 1.0, 8, 8);
    PerturbationField bump = normal_bump(rect, Vec2(0.5, 0.0), 0.25, 0.02, BoundaryTag::S);
    auto w_mask = rect.boundary_vertex_mask(BoundaryTag::W);
    for (int v = 0; v < rect.num_vertices(); ++v)
        if (w_mask[v]) {
            EXPECT_EQ(bump.eval(rect.vertices[v]).value.norm(), 0.0);
        }
}

TEST(Perturbation, C2NormExactForConstantField) {
    PerturbationField f = PerturbationField::translation(Vec2(0.1, 0.0));
    EXPECT_DOUBLE_EQ(c2_norm_estimate(f, 16), 0.1);
    EXPECT_DOUBLE_EQ(c2_norm_estimate(PerturbationField::zero(), 8), 0.0);
}

TEST(Perturbation, C2NormMonotoneInDensity) {
    MeshDomain disk = build_disk(4, 32);
    PerturbationField bump = normal_bump(disk, Vec2(0.0, -1.0), 0.25, 0.03, BoundaryTag::S);
    double e8 = c2_norm_estimate(bump, 8);
    double e16 = c2_norm_estimate(bump, 16);
    double e64 = c2_norm_estimate(bump, 64);
    EXPECT_LE(e8, e16 + 1e-15);
    EXPECT_LE(e16, e64 + 1e-15);
    EXPECT_TRUE(std::isfinite(e64));
}

TEST(Perturbation, C2NormMatchesProfileOracle) {
    // Fixed-normal bump: the Hessian Frobenius sup is amp * 6 sqrt(2) / R^2,
    // attained at the anchor; it dominates |psi| and |Dpsi| for small R.
    MeshDomain rect = build_rectangle(2.0, 1.0, 16, 8);
    double amp = 0.01, radius = 0.3;
    PerturbationField bump = normal_bump(rect, Vec2(1.0, -1.0), radius, amp, BoundaryTag::W);
    double expected = amp * 6.0 * std::sqrt(2.0) / (radius * radius);
    double est = c2_norm_estimate(bump, 64);
    EXPECT_GE(est, amp);
    EXPECT_NEAR(est, expected, 0.03 * expected);
}

TEST(Perturbation, VertexTableHasNoEvaluator) {
    PerturbationField f = PerturbationField::vertex_table({Vec2(0, 0), Vec2(0.1, 0)});
    EXPECT_THROW(f.eval(Vec2(0, 0)), UnsupportedOperation);
    EXPECT_DOUBLE_EQ(c2_norm_estimate(f), 0.1);
}

TEST(Perturbation, TransplantZeroAmplitudeIsBitwiseCopy) {
    MeshDomain disk = build_disk(4, 32);
    PerturbationField f = PerturbationField::dilation();
    TransplantRecord rec = transplant(disk, f, 0.0);
    ASSERT_EQ(rec.mesh.num_vertices(), disk.num_vertices());
    for (int v = 0; v < disk.num_vertices(); ++v) {
        EXPECT_EQ(rec.mesh.vertices[v].x(), disk.vertices[v].x());
        EXPECT_EQ(rec.mesh.vertices[v].y(), disk.vertices[v].y());
    }
    EXPECT_EQ(rec.t, 0.0);
}

TEST(Perturbation, TransplantTranslationAndDilation) {
    MeshDomain disk = build_disk(2, 16);
    Vec2 c(0.05, -0.02);
    TransplantRecord shifted = transplant(disk, PerturbationField::translation(c), 1.0);
    for (int v = 0; v < disk.num_vertices(); ++v)
        EXPECT_NEAR((shifted.mesh.vertices[v] - disk.vertices[v] - c).norm(), 0.0, 1e-15);

    TransplantRecord scaled = transplant(disk, PerturbationField::dilation(), 0.1);
    for (const auto& be : scaled.mesh.boundary_edges) {
        EXPECT_NEAR(scaled.mesh.vertices[be.a].norm(), 1.1, 1e-12);
        EXPECT_NEAR(scaled.mesh.vertices[be.b].norm(), 1.1, 1e-12);
    }
}

TEST(Perturbation, TransplantInteriorFieldFixesBoundary) {
    MeshDomain disk = build_disk(6, 24);
    PerturbationField f = PerturbationField::interior_bump(Vec2(0.2, 0.1), 0.3, 0.004, Vec2(1.0, 1.0));
    TransplantRecord rec = transplant(disk, f, 1.0);
    auto s_mask = disk.boundary_vertex_mask(BoundaryTag::S);
    bool some_interior_moved = false;
    for (int v = 0; v < disk.num_vertices(); ++v) {
        double moved = (rec.mesh.vertices[v] - disk.vertices[v]).norm();
        if (s_mask[v])
            EXPECT_EQ(moved, 0.0);
        else if (moved > 0)
            some_interior_moved = true;
    }
    EXPECT_TRUE(some_interior_moved);
}

TEST(Perturbation, TransplantLinearInAmplitude) {
    MeshDomain disk = build_disk(4, 16);
    PerturbationField bump = normal_bump(disk, Vec2(1.0, 0.0), 0.4, 0.02, BoundaryTag::S);
    TransplantRecord rec = transplant(disk, bump, 0.25);
    for (int v = 0; v < disk.num_vertices(); ++v) {
        Vec2 expected = disk.vertices[v] + 0.25 * bump.eval(disk.vertices[v]).value;
        EXPECT_NEAR((rec.mesh.vertices[v] - expected).norm(), 0.0, 1e-15);
    }
}

TEST(Perturbation, TransplantGuardRejectsLargeAmplitude) {
    MeshDomain disk = build_disk(2, 16);
    EXPECT_THROW(transplant(disk, PerturbationField::dilation(), 0.4), AmplitudeTooLarge);
}

TEST(Perturbation, TransplantDetectsFold) {
    MeshDomain disk = build_disk(2, 16);
    // Vertex tables skip the C2 guard; push the center across its ring.
    std::vector<Vec2> disp(disk.num_vertices(), Vec2::Zero());
    disp[0] = Vec2(2.0, 0.0);
    PerturbationField f = PerturbationField::vertex_table(std::move(disp));
    EXPECT_THROW(transplant(disk, f, 1.0), MeshFolded);
}

TEST(Perturbation, ScaledFieldIsExactlyLinear) {
    MeshDomain disk = build_disk(4, 32);
    PerturbationField bump = normal_bump(disk, Vec2(1.0, 0.0), 0.3, 0.05, BoundaryTag::S);
    PerturbationField half = bump.scaled(0.5);
    Vec2 x(0.9, 0.05);
    EXPECT_NEAR((half.eval(x).value - 0.5 * bump.eval(x).value).norm(), 0.0, 1e-15);
    EXPECT_NEAR(c2_norm_estimate(half, 32), 0.5 * c2_norm_estimate(bump, 32), 1e-12);
}
