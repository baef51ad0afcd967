#pragma once

#include "sloshlab/assembly.hpp"
#include "sloshlab/perturbation.hpp"
#include "sloshlab/spectral.hpp"
#include "sloshlab/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace sloshlab {

namespace detail {

struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double r2 = 1.0;
    double rms = 0.0;
};

inline LineFit linear_fit(const std::vector<double>& ts, const std::vector<double>& ys) {
    const int n = static_cast<int>(ts.size());
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (int i = 0; i < n; ++i) {
        st += ts[i];
        sy += ys[i];
        stt += ts[i] * ts[i];
        sty += ts[i] * ys[i];
    }
    LineFit fit;
    double det = n * stt - st * st;
    fit.slope = (n * sty - st * sy) / det;
    fit.intercept = (sy - fit.slope * st) / n;
    double ss_res = 0, ss_tot = 0, ybar = sy / n;
    for (int i = 0; i < n; ++i) {
        double pred = fit.intercept + fit.slope * ts[i];
        ss_res += (ys[i] - pred) * (ys[i] - pred);
        ss_tot += (ys[i] - ybar) * (ys[i] - ybar);
    }
    fit.rms = std::sqrt(ss_res / n);
    fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

// Cluster eigenvector block; for pure Steklov the block is re-orthonormalized
// in the Dirichlet form, the natural inner product for mu = 1/lambda.
inline MatX cluster_basis(const MeshDomain& m, const Spectrum& spec, const Cluster& cl) {
    if (cl.first < 0 || cl.size < 1 || cl.first + cl.size > spec.count())
        throw InvalidArgument("cluster does not fit inside the spectrum");
    MatX e = spec.eigenvectors.middleCols(cl.first, cl.size);
    if (spec.kind == ProblemKind::PureSteklov) {
        SpMat k = stiffness(m).mat;
        for (int j = 0; j < e.cols(); ++j) {
            VecX w = e.col(j);
            for (int pass = 0; pass < 2; ++pass)
                for (int i = 0; i < j; ++i) w -= e.col(i).dot(k * w) * e.col(i);
            double nrm = std::sqrt(w.dot(k * w));
            if (!(nrm > 0.0)) throw InvalidArgument("cluster_basis: degenerate Dirichlet norm (zero mode?)");
            e.col(j) = w / nrm;
        }
    }
    return e;
}

// Kind-specific mu per cluster member.
inline std::vector<double> cluster_mu(const Spectrum& spec, const Cluster& cl) {
    std::vector<double> mu(cl.size);
    for (int r = 0; r < cl.size; ++r) {
        int k = cl.first + r;
        if (spec.kind == ProblemKind::SteklovNeumann) {
            mu[r] = 1.0 / (spec.lambda[k] + 1.0);
        } else {
            if (!(spec.lambda[k] > 1e-12))
                throw InvalidArgument("cluster at the zero mode has no finite mu");
            mu[r] = 1.0 / spec.lambda[k];
        }
    }
    return mu;
}

}  // namespace detail

/// Verification tolerance: clusters wider than this (relative) are analyzed
/// with a warning attached.
inline constexpr double kClusterWidthTol = 1e-4;

struct ClusterDerivative {
    Cluster cluster;
    std::string field;
    MatX matrix;  // symmetrized m x m derivative matrix
    double asym = 0.0;  // Frobenius norm of the discarded antisymmetric part
    double mu = 0.0;    // cluster-center mu
    std::vector<double> mu_slopes;      // eigenvalues of matrix, descending
    std::vector<double> lambda_slopes;  // mapped to ascending lambda branches
    double score = std::numeric_limits<double>::quiet_NaN();  // no-splitting score, m >= 2
    bool wide_cluster = false;
};

/// Violation of the scalar-matrix shape forced by multiplicity persistence:
/// ||M - (tr M / m) I||_F / (||M||_F + floor), zero iff M is scalar.
inline double no_splitting_score(const MatX& m) {
    if (m.rows() != m.cols()) throw InvalidArgument("no_splitting_score: matrix must be square");
    if (m.rows() < 2) throw UndefinedForSimple("no_splitting_score: needs multiplicity at least 2");
    const double floor = 1e-14;
    MatX dev = m - (m.trace() / m.rows()) * MatX::Identity(m.rows(), m.cols());
    return dev.norm() / (m.norm() + floor);
}

/// First-order derivative matrix of a cluster under the field psi, assembled
/// from the boundary-mass and Dirichlet-form shape derivatives:
///   SD / pure Steklov:  M_rs = dB_S(e_r,e_s) - mu dA(e_r,e_s)
///   SN:                 M_rs = (1-mu) dB_S(e_r,e_s) - mu dA(e_r,e_s)
/// Per-row mu is used and the result symmetrized; the antisymmetric part is
/// zero for true clusters and reported as a diagnostic for wide ones.
inline ClusterDerivative cluster_matrix(const MeshDomain& m, const Spectrum& spec, const Cluster& cl,
                                        const PerturbationField& psi) {
    MatX basis = detail::cluster_basis(m, spec, cl);
    std::vector<double> mu = detail::cluster_mu(spec, cl);
    const int mm = cl.size;

    MatX g(mm, mm), a(mm, mm);
    for (int r = 0; r < mm; ++r) {
        for (int s = r; s < mm; ++s) {
            g(r, s) = g(s, r) = form_dB(m, psi, basis.col(r), basis.col(s), BoundaryTag::S);
            a(r, s) = a(s, r) = form_dA(m, psi, basis.col(r), basis.col(s));
        }
    }

    MatX raw(mm, mm);
    for (int r = 0; r < mm; ++r)
        for (int s = 0; s < mm; ++s)
            raw(r, s) = spec.kind == ProblemKind::SteklovNeumann
                            ? (1.0 - mu[r]) * g(r, s) - mu[r] * a(r, s)
                            : g(r, s) - mu[r] * a(r, s);

    ClusterDerivative cd;
    cd.cluster = cl;
    cd.field = psi.describe();
    cd.matrix = 0.5 * (raw + raw.transpose());
    cd.asym = 0.5 * (raw - raw.transpose()).norm();
    cd.mu = 0.0;
    for (double v : mu) cd.mu += v;
    cd.mu /= mm;
    cd.wide_cluster = cl.rel_width > kClusterWidthTol;

    Eigen::SelfAdjointEigenSolver<MatX> es(cd.matrix);
    cd.mu_slopes.resize(mm);
    cd.lambda_slopes.resize(mm);
    for (int k = 0; k < mm; ++k) {
        double nu = es.eigenvalues()[mm - 1 - k];  // descending
        cd.mu_slopes[k] = nu;
        // d(lambda)/dt = -mu'/mu^2; for SN this is the lambda_hat slope, and
        // lambda = lambda_hat - 1 shares it.  Descending mu-slopes map to
        // ascending lambda branches.
        cd.lambda_slopes[k] = -nu / (cd.mu * cd.mu);
    }
    if (mm >= 2) cd.score = no_splitting_score(cd.matrix);
    return cd;
}

/// First-order branch slopes predicted by the cluster derivative matrix.
inline std::vector<double> predicted_slopes(const ClusterDerivative& cd) { return cd.lambda_slopes; }

struct FdSlopes {
    std::vector<double> t_grid;  // includes the baseline t = 0
    std::vector<std::vector<double>> lambda_paths;  // [branch][t]
    std::vector<double> lambda_slopes;  // ascending branches
    std::vector<double> mu_slopes;
    std::vector<double> lambda_r2;
    std::vector<double> lambda_fit_rms;
};

namespace detail {

// Sorted branch values of the cluster on each transplanted mesh, with a
// collision guard against the neighboring eigenvalues.  t = 0 is prepended.
inline std::pair<std::vector<double>, std::vector<std::vector<double>>> track_cluster(
    const MeshDomain& m, const PerturbationField& psi, const Cluster& cl, ProblemKind kind,
    const std::vector<double>& t_grid, const SolveOptions& opts) {
    if (t_grid.empty()) throw InvalidArgument("track_cluster: empty amplitude grid");
    const int want = cl.first + cl.size + 1;  // one extra branch for collision tracking

    std::vector<double> ts{0.0};
    for (double t : t_grid) ts.push_back(t);
    std::vector<std::vector<double>> paths(cl.size, std::vector<double>(ts.size(), 0.0));

    double gap_below0 = 0.0, gap_above0 = 0.0;
    for (size_t it = 0; it < ts.size(); ++it) {
        double t = ts[it];
        MeshDomain moved = t == 0.0 ? m : transplant(m, psi, t).mesh;
        Spectrum spec = solve(moved, kind, want, opts);
        if (spec.count() < cl.first + cl.size)
            throw TrackingFailure(t, "track_cluster: spectrum truncated below the cluster");

        double below = cl.first > 0 ? spec.lambda[cl.first] - spec.lambda[cl.first - 1]
                                    : std::numeric_limits<double>::infinity();
        double above = cl.first + cl.size < spec.count()
                           ? spec.lambda[cl.first + cl.size] - spec.lambda[cl.first + cl.size - 1]
                           : std::numeric_limits<double>::infinity();
        if (it == 0) {
            gap_below0 = below;
            gap_above0 = above;
        } else if (below <= 0.0 || above <= 0.0 || below < 0.1 * gap_below0 || above < 0.1 * gap_above0) {
            throw TrackingFailure(t, "track_cluster: cluster collided with a neighboring eigenvalue");
        }

        for (int r = 0; r < cl.size; ++r) paths[r][it] = spec.lambda[cl.first + r];
    }
    return {std::move(ts), std::move(paths)};
}

}  // namespace detail

/// Independent oracle for cluster_matrix: re-solves the eigenproblem on
/// transplanted meshes and fits the tracked branch values linearly in t.
inline FdSlopes fd_slopes(const MeshDomain& m, const PerturbationField& psi, const Cluster& cl,
                          ProblemKind kind, const std::vector<double>& t_grid,
                          const SolveOptions& opts = {}) {
    FdSlopes out;
    auto [ts, paths] = detail::track_cluster(m, psi, cl, kind, t_grid, opts);
    out.t_grid = std::move(ts);
    out.lambda_paths = std::move(paths);

    for (int r = 0; r < cl.size; ++r) {
        auto lf = detail::linear_fit(out.t_grid, out.lambda_paths[r]);
        out.lambda_slopes.push_back(lf.slope);
        out.lambda_r2.push_back(lf.r2);
        out.lambda_fit_rms.push_back(lf.rms);
        std::vector<double> mu_path(out.t_grid.size());
        for (size_t it = 0; it < out.t_grid.size(); ++it) {
            double lam = out.lambda_paths[r][it];
            mu_path[it] = kind == ProblemKind::SteklovNeumann ? 1.0 / (lam + 1.0) : 1.0 / lam;
        }
        out.mu_slopes.push_back(detail::linear_fit(out.t_grid, mu_path).slope);
    }
    return out;
}

enum class ReducedCase { SD_W, SD_S, SN_S, SN_W };

inline const char* to_string(ReducedCase c) {
    switch (c) {
        case ReducedCase::SD_W: return "sd-w";
        case ReducedCase::SD_S: return "sd-s";
        case ReducedCase::SN_S: return "sn-s";
        default: return "sn-w";
    }
}

/// Boundary-only reductions of the cluster derivative for side-supported
/// fields.  They agree with cluster_matrix modulo a multiple of the identity,
/// up to discretization error:
///   SD-W:  mu int_W (psi.nu) dnu(e_r) dnu(e_s), fluxes recovered variationally
///   SN-W: -mu int_W (psi.nu) grad e_r . grad e_s           (tangential gradient)
/// The S-cases keep the pre-simplification pair: the Steklov condition turns
/// the mixed gradient term into psi . grad(e_r e_s), which is NOT integrated
/// by parts along S (that step only holds for tangential fields):
///   SD-S: -mu int_S (psi.nu) grad e_r . grad e_s + int_S psi . grad(e_r e_s)
///         + int_S e_r e_s (div psi - nu.(Dpsi)nu)
///   SN-S: -mu int_S (psi.nu) grad e_r . grad e_s
///         + (1-mu) [ int_S psi . grad(e_r e_s) + int_S e_r e_s (div psi - nu.(Dpsi)nu) ]
inline MatX reduced_matrix(ReducedCase rc, const MeshDomain& m, const Spectrum& spec, const Cluster& cl,
                           const PerturbationField& psi) {
    const bool wants_sd = rc == ReducedCase::SD_W || rc == ReducedCase::SD_S;
    if (wants_sd && spec.kind == ProblemKind::SteklovNeumann)
        throw InvalidCase("reduced_matrix: SD case requested for an SN spectrum");
    if (!wants_sd && spec.kind != ProblemKind::SteklovNeumann)
        throw InvalidCase("reduced_matrix: SN case requested for a non-SN spectrum");
    if ((rc == ReducedCase::SD_W || rc == ReducedCase::SN_W) && !m.has_tag(BoundaryTag::W))
        throw InvalidCase("reduced_matrix: W case on a mesh without walls");

    BoundaryTag support_side =
        (rc == ReducedCase::SD_W || rc == ReducedCase::SN_W) ? BoundaryTag::W : BoundaryTag::S;
    BoundaryTag other = support_side == BoundaryTag::S ? BoundaryTag::W : BoundaryTag::S;
    if (m.has_tag(other)) {
        auto mask = m.boundary_vertex_mask(other);
        for (int v = 0; v < m.num_vertices(); ++v) {
            if (!mask[v]) continue;
            if (psi.eval(m.vertices[v]).value.norm() > 1e-12)
                throw InvalidCase("reduced_matrix: field is not supported on the required side");
        }
    }

    MatX basis = detail::cluster_basis(m, spec, cl);
    std::vector<double> mu = detail::cluster_mu(spec, cl);
    const int mm = cl.size;

    auto owners = boundary_edge_triangles(m);

    MatX fluxes;
    if (rc == ReducedCase::SD_W) {
        fluxes.resize(m.num_vertices(), mm);
        for (int r = 0; r < mm; ++r)
            fluxes.col(r) = flux_recovery(m, basis.col(r), spec.lambda[cl.first + r], BoundaryTag::W);
    }

    MatX out = MatX::Zero(mm, mm);
    for (int e = 0; e < m.num_boundary_edges(); ++e) {
        const auto& be = m.boundary_edges[e];
        if (be.tag != support_side) continue;
        const Vec2& pa = m.vertices[be.a];
        const Vec2& pb = m.vertices[be.b];
        const Vec2& n = m.edge_normals[e];
        double len = (pb - pa).norm();

        std::vector<Vec2> grad(mm);
        if (rc != ReducedCase::SD_W)
            for (int r = 0; r < mm; ++r) grad[r] = detail::p1_gradient(m, owners[e], basis.col(r));

        for (double xi : {-detail::kGauss2, detail::kGauss2}) {
            double sa = 0.5 * (1.0 - xi), sb = 0.5 * (1.0 + xi);
            Vec2 x = sa * pa + sb * pb;
            FieldEval ev = psi.eval(x);
            double alpha = ev.value.dot(n);
            double ndpn = n.dot(ev.jacobian * n);
            double w = len / 2.0;

            for (int r = 0; r < mm; ++r) {
                for (int s = r; s < mm; ++s) {
                    double mu_rs = 0.5 * (mu[r] + mu[s]);
                    double contrib = 0.0;
                    switch (rc) {
                        case ReducedCase::SD_W: {
                            double gr = sa * fluxes(be.a, r) + sb * fluxes(be.b, r);
                            double gs = sa * fluxes(be.a, s) + sb * fluxes(be.b, s);
                            contrib = mu_rs * alpha * gr * gs;
                            break;
                        }
                        case ReducedCase::SD_S:
                        case ReducedCase::SN_S: {
                            double er = sa * basis(be.a, r) + sb * basis(be.b, r);
                            double es = sa * basis(be.a, s) + sb * basis(be.b, s);
                            double grad_pair = ev.value.dot(er * grad[s] + es * grad[r]);
                            double trace_term = er * es * (ev.divergence - ndpn);
                            double coef = rc == ReducedCase::SD_S ? 1.0 : 1.0 - mu_rs;
                            contrib = -mu_rs * alpha * grad[r].dot(grad[s]) + coef * (grad_pair + trace_term);
                            break;
                        }
                        case ReducedCase::SN_W:
                            contrib = -mu_rs * alpha * grad[r].dot(grad[s]);
                            break;
                    }
                    out(r, s) += w * contrib;
                }
            }
        }
    }
    for (int r = 0; r < mm; ++r)
        for (int s = r + 1; s < mm; ++s) out(s, r) = out(r, s);
    return out;
}

}  // namespace sloshlab
