// Acceptance suite: one criterion per function, one PASS/FAIL line each.
// Exit status is the number of failed criteria.

#include "sloshlab/exports.hpp"
#include "sloshlab/hadamard.hpp"
#include "sloshlab/spectral.hpp"
#include "sloshlab/splitting.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace sloshlab;

namespace {

struct Check {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

double sn_exact(int k) { return k * std::tanh(double(k)); }
double sd_exact(int k) { return k / std::tanh(double(k)); }

Cluster make_cluster(const Spectrum& spec, int first, int size) {
    Cluster cl;
    cl.first = first;
    cl.size = size;
    cl.center = 0.5 * (spec.lambda[first] + spec.lambda[first + size - 1]);
    cl.rel_width =
        (spec.lambda[first + size - 1] - spec.lambda[first]) / std::max(1.0, std::abs(cl.center));
    return cl;
}

// ---- criterion 1 & 2: analytic tank spectra at the second refinement ----

Check analytic_tank(ProblemKind kind) {
    Check c;
    MeshDomain m = refine(refine(build_rectangle(M_PI, 1.0, 64, 64)));
    auto t0 = std::chrono::steady_clock::now();
    Spectrum spec = solve(m, kind, kind == ProblemKind::SteklovNeumann ? 6 : 5);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.require(secs <= 60.0, "solve took " + fmt(secs) + " s (> 60 s)");

    int offset = kind == ProblemKind::SteklovNeumann ? 1 : 0;  // skip the zero mode
    for (int k = 1; k <= 5; ++k) {
        double exact = kind == ProblemKind::SteklovNeumann ? sn_exact(k) : sd_exact(k);
        double got = spec.lambda[offset + k - 1];
        double rel = std::abs(got - exact) / exact;
        c.require(rel <= 0.01, "lambda_" + std::to_string(k) + " rel err " + fmt(rel));
    }
    c.detail += " [" + fmt(secs) + " s]";
    return c;
}

// ---- criterion 3: disk spectrum with discrete multiplicity ----

Check disk_spectrum() {
    Check c;
    MeshDomain m = build_disk(32, 128);
    Spectrum spec = solve(m, ProblemKind::PureSteklov, 7);
    double expected[7] = {0, 1, 1, 2, 2, 3, 3};
    c.require(std::abs(spec.lambda[0]) <= 1e-8, "zero mode off by " + fmt(spec.lambda[0]));
    for (int k = 1; k < 7; ++k) {
        double rel = std::abs(spec.lambda[k] - expected[k]) / expected[k];
        c.require(rel <= 0.01, "lambda[" + std::to_string(k) + "] rel err " + fmt(rel));
    }
    for (int p : {1, 3, 5}) {
        double split = (spec.lambda[p + 1] - spec.lambda[p]) / expected[p + 1];
        c.require(split <= 1e-3, "pair at lambda=" + fmt(expected[p]) + " split " + fmt(split));
    }
    return c;
}

// ---- criterion 4: slope oracle equivalence with measured refinement floor ----

struct SlopePair {
    std::vector<double> pred;  // sorted
    std::vector<double> fd;    // sorted
    double min_r2 = 1.0;
};

SlopePair slopes_at(const MeshDomain& m, ProblemKind kind, const Cluster& cl,
                    const PerturbationField& f) {
    Spectrum spec = solve(m, kind, cl.first + cl.size + 1);
    Cluster here = make_cluster(spec, cl.first, cl.size);
    ClusterDerivative cd = cluster_matrix(m, spec, here, f);
    FdSlopes fd = fd_slopes(m, f, here, kind, {1e-3, 2e-3, 4e-3});
    SlopePair out;
    out.pred = cd.lambda_slopes;
    out.fd = fd.lambda_slopes;
    std::sort(out.pred.begin(), out.pred.end());
    std::sort(out.fd.begin(), out.fd.end());
    for (double r2 : fd.lambda_r2) out.min_r2 = std::min(out.min_r2, r2);
    return out;
}

Check oracle_equivalence() {
    Check c;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Case A: tank SD, simple modes analyzed one branch at a time.
    {
        MeshDomain coarse = build_rectangle(M_PI, 1.0, 48, 32);
        MeshDomain fine = refine(coarse);
        for (int trial = 0; trial < 5; ++trial) {
            bool on_s = trial % 2 == 0;
            double x = 0.7 + unit(rng) * (M_PI - 1.4);
            Vec2 anchor(x, on_s ? 0.0 : -1.0);
            double radius = 0.3 + 0.2 * unit(rng);
            PerturbationField f =
                normal_bump(coarse, anchor, radius, 1.0, on_s ? BoundaryTag::S : BoundaryTag::W);
            f = f.scaled(0.05 / c2_norm_estimate(f));

            for (int mode = 0; mode < 2; ++mode) {
                Cluster cl{mode, 1, 0.0, 0.0};
                SlopePair lo = slopes_at(coarse, ProblemKind::SteklovDirichlet, cl, f);
                SlopePair hi = slopes_at(fine, ProblemKind::SteklovDirichlet, cl, f);
                c.require(hi.min_r2 >= 0.999, "tank fd fit r2 " + fmt(hi.min_r2));
                double floor = std::abs(hi.pred[0] - lo.pred[0]) + std::abs(hi.fd[0] - lo.fd[0]);
                double tol = std::max(0.02 * std::abs(hi.fd[0]), floor);
                c.require(std::abs(hi.pred[0] - hi.fd[0]) <= tol,
                          "tank trial " + std::to_string(trial) + " mode " + std::to_string(mode) +
                              ": pred " + fmt(hi.pred[0]) + " vs fd " + fmt(hi.fd[0]));
            }
        }
    }

    // Case B: disk pure Steklov, double modes.
    {
        MeshDomain coarse = build_disk(16, 64);
        MeshDomain fine = build_disk(32, 128);
        for (int trial = 0; trial < 5; ++trial) {
            double th = 2 * M_PI * unit(rng);
            double radius = 0.35 + 0.15 * unit(rng);
            PerturbationField f =
                normal_bump(coarse, Vec2(std::cos(th), std::sin(th)), radius, 1.0, BoundaryTag::S);
            f = f.scaled(0.05 / c2_norm_estimate(f));

            Cluster cl{1, 2, 1.0, 0.0};
            SlopePair lo = slopes_at(coarse, ProblemKind::PureSteklov, cl, f);
            SlopePair hi = slopes_at(fine, ProblemKind::PureSteklov, cl, f);
            c.require(hi.min_r2 >= 0.999, "disk fd fit r2 " + fmt(hi.min_r2));
            for (int k = 0; k < 2; ++k) {
                double floor = std::abs(hi.pred[k] - lo.pred[k]) + std::abs(hi.fd[k] - lo.fd[k]);
                double tol = std::max(0.02 * std::abs(hi.fd[k]), floor);
                c.require(std::abs(hi.pred[k] - hi.fd[k]) <= tol,
                          "disk trial " + std::to_string(trial) + " branch " + std::to_string(k) +
                              ": pred " + fmt(hi.pred[k]) + " vs fd " + fmt(hi.fd[k]));
            }
        }
    }
    return c;
}

// ---- criterion 5: scaling law under dilation ----

Check scaling_law() {
    Check c;
    MeshDomain m = build_disk(32, 128);
    Spectrum spec = solve(m, ProblemKind::PureSteklov, 7);
    PerturbationField dil = PerturbationField::dilation();
    for (int first : {1, 3, 5}) {
        Cluster cl = make_cluster(spec, first, 2);
        ClusterDerivative cd = cluster_matrix(m, spec, cl, dil);
        FdSlopes fd = fd_slopes(m, dil, cl, ProblemKind::PureSteklov, {1e-3, 2e-3, 4e-3});
        for (int r = 0; r < 2; ++r) {
            int k = first + r;
            if (k > 5) continue;  // first 5 nonzero eigenvalues
            double lam = spec.lambda[k];
            c.require(std::abs(cd.lambda_slopes[r] + lam) <= 0.01 * lam,
                      "pred slope at k=" + std::to_string(k) + ": " + fmt(cd.lambda_slopes[r]));
            c.require(std::abs(fd.lambda_slopes[r] + lam) <= 0.01 * lam,
                      "fd slope at k=" + std::to_string(k) + ": " + fmt(fd.lambda_slopes[r]));
            double mu_ratio = cd.mu_slopes[r] * lam;  // mu-slope / mu with mu = 1/lambda
            c.require(std::abs(mu_ratio - 1.0) <= 0.01,
                      "mu-slope ratio at k=" + std::to_string(k) + ": " + fmt(mu_ratio));
        }
    }
    return c;
}

// ---- criterion 6: interior nullity ----

Check interior_nullity() {
    Check c;
    PerturbationField f = PerturbationField::interior_bump(Vec2(0.3, 0.2), 0.25, 0.004, Vec2(1.0, 0.5));
    MeshDomain m = build_disk(8, 32);

    Spectrum spec = solve(m, ProblemKind::PureSteklov, 4);
    FdSlopes fd = fd_slopes(m, f, make_cluster(spec, 1, 2), ProblemKind::PureSteklov, {1e-3, 2e-3, 4e-3});
    for (double s : fd.lambda_slopes)
        c.require(std::abs(s) <= 1e-10, "fd slope " + fmt(s));

    double prev = -1.0;
    MeshDomain mm = m;
    for (int level = 0; level < 3; ++level) {
        Spectrum sp = solve(mm, ProblemKind::PureSteklov, 4);
        double nrm = cluster_matrix(mm, sp, make_cluster(sp, 1, 2), f).matrix.norm();
        if (prev >= 0.0)
            c.require(prev >= 3.0 * nrm,
                      "matrix norm ratio " + fmt(prev / nrm) + " at level " + std::to_string(level));
        prev = nrm;
        if (level < 2) mm = refine(mm);
    }
    return c;
}

// ---- criterion 7: gauge agreement on the tank walls ----

Check gauge_agreement() {
    Check c;
    MeshDomain m = build_rectangle(M_PI, 1.0, 32, 24);
    double prev_off = -1.0, prev_dd = -1.0;
    for (int level = 0; level < 2; ++level) {
        Spectrum spec = solve(m, ProblemKind::SteklovDirichlet, 3);
        Cluster cl = make_cluster(spec, 0, 2);
        PerturbationField bump = normal_bump(m, Vec2(1.3, -1.0), 0.5, 1.0, BoundaryTag::W);
        bump = bump.scaled(0.05 / c2_norm_estimate(bump));
        ClusterDerivative cd = cluster_matrix(m, spec, cl, bump);
        MatX red = reduced_matrix(ReducedCase::SD_W, m, spec, cl, bump);
        double scale = std::max(cd.matrix.norm(), red.norm());
        double off = std::abs(cd.matrix(0, 1) - red(0, 1));
        double dd = std::abs((cd.matrix(0, 0) - cd.matrix(1, 1)) - (red(0, 0) - red(1, 1)));
        if (level == 1) {
            c.require(off <= 0.05 * scale, "off-diagonal discrepancy " + fmt(off / scale));
            c.require(dd <= 0.05 * scale, "diagonal-difference discrepancy " + fmt(dd / scale));
            c.require(off <= prev_off, "off-diagonal discrepancy not decreasing");
            c.require(dd <= prev_dd, "diagonal-difference discrepancy not decreasing");
        }
        prev_off = off;
        prev_dd = dd;
        if (level == 0) m = refine(m);
    }
    return c;
}

// ---- criterion 8: splitting demonstration on the disk pair ----

Check splitting_demonstration() {
    Check c;
    MeshDomain m = build_disk(32, 128);
    Spectrum spec = solve(m, ProblemKind::PureSteklov, 7);
    auto clusters = detect_clusters(spec, 1e-4);
    c.require(!clusters.empty() && clusters.front().first == 1, "lambda=1 pair not detected");
    if (!c.ok) return c;

    FindOptions opts;
    opts.seed = 7;
    opts.n_candidates = 16;
    auto [field, cd] = find_splitting(m, spec, clusters.front(), BoundaryTag::S, 0.05, opts);
    c.require(cd.score >= 0.1, "score " + fmt(cd.score));

    SplitReport rep =
        verify_split(m, field, clusters.front(), ProblemKind::PureSteklov, {1e-3, 2e-3, 4e-3, 8e-3}, 0.10);
    c.require(rep.verdict == Verdict::SplitConfirmed, std::string("verdict ") + to_string(rep.verdict));
    c.require(rep.spread_r2 >= 0.99, "gap fit r2 " + fmt(rep.spread_r2));
    c.require(rep.slope_rel_error <= 0.10, "slope error " + fmt(rep.slope_rel_error));
    c.detail += " [score " + fmt(cd.score) + ", slope err " + fmt(rep.slope_rel_error) + "]";
    return c;
}

// ---- criterion 9: end-to-end generic simplicity at desk scale ----

Check end_to_end_simplicity() {
    Check c;
    MeshDomain m = build_disk(32, 128);
    SimplificationTrace tr = simplify_spectrum(m, ProblemKind::PureSteklov, 7, 0.05, BoundaryTag::S, 7);
    c.require(tr.status == TraceStatus::Completed, std::string("status ") + to_string(tr.status));
    c.require(tr.steps.size() <= 4, "took " + std::to_string(tr.steps.size()) + " steps");

    for (int k = 0; k + 1 < tr.final_spectrum.count(); ++k) {
        double gap = tr.final_spectrum.lambda[k + 1] - tr.final_spectrum.lambda[k];
        double bound = 1e-4 * std::max(1.0, std::abs(tr.final_spectrum.lambda[k + 1]));
        c.require(gap >= bound, "final gap " + std::to_string(k) + " = " + fmt(gap));
    }
    double expected = 0.05;
    for (const auto& s : tr.steps) {
        c.require(std::abs(s.eps_budget - expected) <= 1e-12, "budget ledger not halving");
        expected *= 0.5;
    }
    c.require(tr.total_amplitude <= 2 * 0.05 + 1e-12, "total amplitude " + fmt(tr.total_amplitude));
    c.detail += " [" + std::to_string(tr.steps.size()) + " step(s), amplitude " +
                fmt(tr.total_amplitude) + "]";
    return c;
}

// ---- criterion 10: min-max property per kind ----

Check minmax_property() {
    Check c;
    struct Case {
        MeshDomain mesh;
        ProblemKind kind;
    };
    std::vector<Case> cases;
    cases.push_back({build_rectangle(M_PI, 1.0, 24, 20), ProblemKind::SteklovDirichlet});
    cases.push_back({build_rectangle(M_PI, 1.0, 24, 20), ProblemKind::SteklovNeumann});
    cases.push_back({build_disk(12, 48), ProblemKind::PureSteklov});
    for (auto& cs : cases) {
        Spectrum spec = solve(cs.mesh, cs.kind, 3);
        MinmaxReport rep = minmax_check(spec, cs.mesh, 100, 99, 1e-8);
        c.require(rep.violations == 0, std::string(to_string(cs.kind)) + ": " +
                                           std::to_string(rep.violations) + " violations");
        c.require(rep.attainment_gap <= 1e-8,
                  std::string(to_string(cs.kind)) + ": attainment gap " + fmt(rep.attainment_gap));
    }
    return c;
}

// ---- criterion 11: form linearity / symmetry suite ----

Check form_linearity_suite() {
    Check c;
    MeshDomain m = build_half_disk(4, 16);
    std::mt19937_64 rng(31);
    std::normal_distribution<double> gauss(0.0, 1.0);
    // Dyadic coefficients keep the combined field parameters exactly
    // representable, so the identity is probed at pure quadrature round-off.
    std::uniform_int_distribution<int> dyadic(-16, 16);
    auto coef = [&](auto& g) { return dyadic(g) / 8.0; };
    auto random_vec = [&](int n) {
        VecX v(n);
        for (int i = 0; i < n; ++i) v[i] = gauss(rng);
        return v;
    };

    // Backward-error data scale: the identities are sums over quadrature
    // contributions, so "relative" means relative to the form-data norms, not
    // to a possibly cancelled result.
    SpMat k_form = stiffness(m).mat;
    SpMat mb_form = boundary_mass(m, std::nullopt).mat;
    auto data_norm = [&](const VecX& x) {
        double vol = 0.0;
        for (int t = 0; t < m.num_triangles(); ++t) {
            const auto& tri = m.triangles[t];
            double area = m.triangle_area(t);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) vol += (i == j ? 2.0 : 1.0) * x[tri[i]] * x[tri[j]] * area / 12.0;
        }
        return std::sqrt(x.dot(k_form * x) + x.dot(mb_form * x) + vol);
    };

    int bilinear_fail = 0, field_fail = 0, translation_fail = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = m.num_vertices();
        VecX u = random_vec(n), w = random_vec(n), v = random_vec(n);
        double a = coef(rng), b = coef(rng);
        Mat2 a1, a2;
        a1 << coef(rng), coef(rng), coef(rng), coef(rng);
        a2 << coef(rng), coef(rng), coef(rng), coef(rng);
        Vec2 b1(coef(rng), coef(rng)), b2(coef(rng), coef(rng));
        PerturbationField f1 = PerturbationField::affine(a1, b1);
        PerturbationField f2 = PerturbationField::affine(a2, b2);
        PerturbationField combo = PerturbationField::affine(a * a1 + b * a2, a * b1 + b * b2);

        auto da = [&](const PerturbationField& f, const VecX& x, const VecX& y) {
            return form_dA(m, f, x, y);
        };
        auto db = [&](const PerturbationField& f, const VecX& x, const VecX& y) {
            return form_dB(m, f, x, y, std::nullopt);
        };
        auto dv = [&](const PerturbationField& f, const VecX& x, const VecX& y) {
            return form_dV(m, f, x, y);
        };
        VecX uw = a * u + b * w;
        double eu = data_norm(u), ew = data_norm(w), ev = data_norm(v);
        const double field_scale = 8.0;  // coefficient/parameter headroom

        auto check_form = [&](auto&& form) {
            double lhs_u = form(f1, uw, v);
            double rhs_u = a * form(f1, u, v) + b * form(f1, w, v);
            double scale_u = field_scale * (std::abs(a) * eu + std::abs(b) * ew) * ev;
            if (std::abs(lhs_u - rhs_u) > 1e-12 * scale_u) bilinear_fail++;
            if (std::abs(form(f1, u, v) - form(f1, v, u)) > 1e-12 * field_scale * eu * ev) bilinear_fail++;

            double lhs_f = form(combo, u, v);
            double rhs_f = a * form(f1, u, v) + b * form(f2, u, v);
            double scale_f = field_scale * (std::abs(a) + std::abs(b)) * eu * ev;
            if (std::abs(lhs_f - rhs_f) > 1e-12 * scale_f) field_fail++;
        };
        check_form(da);
        check_form(db);
        check_form(dv);

        PerturbationField shift = PerturbationField::translation(Vec2(coef(rng), coef(rng)));
        double scale_t = u.norm() * v.norm();
        if (std::abs(da(shift, u, v)) > 1e-13 * scale_t) translation_fail++;
        if (std::abs(db(shift, u, v)) > 1e-13 * scale_t) translation_fail++;
        if (std::abs(dv(shift, u, v)) > 1e-13 * scale_t) translation_fail++;
    }
    c.require(bilinear_fail == 0, std::to_string(bilinear_fail) + " bilinearity failures");
    c.require(field_fail == 0, std::to_string(field_fail) + " field-linearity failures");
    c.require(translation_fail == 0, std::to_string(translation_fail) + " translation failures");
    return c;
}

int report(int idx, const std::string& name, const Check& c) {
    std::printf("%s criterion %2d: %s%s%s\n", c.ok ? "PASS" : "FAIL", idx, name.c_str(),
                c.detail.empty() ? "" : " -- ", c.detail.c_str());
    std::fflush(stdout);
    return c.ok ? 0 : 1;
}

}  // namespace

int main() {
    int failures = 0;
    failures += report(1, "analytic spectra, Steklov-Neumann tank", analytic_tank(ProblemKind::SteklovNeumann));
    failures += report(2, "analytic spectra, Steklov-Dirichlet tank", analytic_tank(ProblemKind::SteklovDirichlet));
    failures += report(3, "disk Steklov spectrum with discrete multiplicity", disk_spectrum());
    failures += report(4, "slope oracle equivalence (predicted vs finite differences)", oracle_equivalence());
    failures += report(5, "dilation scaling law", scaling_law());
    failures += report(6, "interior-field nullity", interior_nullity());
    failures += report(7, "gauge agreement of wall-reduced derivative", gauge_agreement());
    failures += report(8, "splitting demonstration on the disk pair", splitting_demonstration());
    failures += report(9, "end-to-end spectral simplification", end_to_end_simplicity());
    failures += report(10, "min-max characterization", minmax_property());
    failures += report(11, "form linearity and symmetry suite", form_linearity_suite());
    if (failures == 0)
        std::printf("all acceptance criteria passed\n");
    else
        std::printf("%d acceptance criteria FAILED\n", failures);
    return failures;
}
