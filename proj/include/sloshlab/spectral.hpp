#pragma once

#include "sloshlab/assembly.hpp"
#include "sloshlab/geometry.hpp"
#include "sloshlab/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace sloshlab {

struct SolveOptions {
    enum class Method { Auto, Dense, Iterative };
    Method method = Method::Auto;
    int dense_threshold = 1500;  // Auto uses the dense path below this many dofs
    int max_iterations = 800;
    double tol = 1e-11;  // relative operator residual target
    std::uint64_t seed = 0x510514bULL;
};

/// Ascending eigenvalues with eigenvectors orthonormal in the kind's inner
/// product: the Dirichlet form for SD, the Robin form for SN / pure Steklov.
/// Eigenvectors are full-length nodal vectors (zero on W for SD).
struct Spectrum {
    ProblemKind kind = ProblemKind::SteklovNeumann;
    std::string mesh_label;
    std::vector<double> lambda;
    std::vector<double> lambda_hat;  // lambda + 1, kept for SN / pure Steklov
    std::vector<double> mu;      // 1/lambda (SD, pure Steklov) or 1/lambda_hat (SN)
    std::vector<double> op_mu;   // eigenvalue of the discrete solution operator
    MatX eigenvectors;           // n_vertices x count
    std::vector<double> residuals;       // ||K e - lambda M_S e|| per pair
    std::vector<double> residual_scale;  // ||K e|| per pair
    std::vector<std::string> warnings;

    int count() const { return static_cast<int>(lambda.size()); }
};

namespace detail {

struct OperatorSetup {
    SpMat a;   // definite kind matrix on free dofs
    SpMat ms;  // free-surface mass on free dofs
    DofMap map;
    int rank_bound = 0;  // number of S vertices among the free dofs
};

inline OperatorSetup operator_setup(const MeshDomain& m, ProblemKind kind) {
    OperatorSetup s;
    SpMat k = stiffness(m).mat;
    SpMat ms = boundary_mass_S(m).mat;
    if (kind == ProblemKind::SteklovDirichlet) {
        s.map = dirichlet_dof_map(m);
        s.a = restrict_matrix(k, s.map);
        s.ms = restrict_matrix(ms, s.map);
    } else {
        s.map = identity_dof_map(m);
        s.a = k + ms;
        s.ms = ms;
    }
    auto s_mask = m.boundary_vertex_mask(BoundaryTag::S);
    for (int v = 0; v < m.num_vertices(); ++v)
        if (s_mask[v] && s.map.full_to_free[v] >= 0) s.rank_bound++;
    return s;
}

// Modified Gram-Schmidt in the inner product u' A v, run twice.  Columns that
// collapse are replaced with seeded random data and re-orthogonalized.
inline void a_orthonormalize(MatX& x, const SpMat& a, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int p = static_cast<int>(x.cols());
    for (int pass = 0; pass < 2; ++pass) {
        for (int j = 0; j < p; ++j) {
            VecX w = x.col(j);
            for (int attempt = 0; attempt < 3; ++attempt) {
                for (int i = 0; i < j; ++i) {
                    double proj = x.col(i).dot(a * w);
                    w -= proj * x.col(i);
                }
                double nrm = std::sqrt(w.dot(a * w));
                if (nrm > 1e-150) {
                    w /= nrm;
                    break;
                }
                for (int r = 0; r < w.size(); ++r) w[r] = gauss(rng);
            }
            x.col(j) = w;
        }
    }
}

inline void fix_sign(VecX& v) {
    int imax = 0;
    double amax = 0.0;
    for (int i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > amax) {
            amax = std::abs(v[i]);
            imax = i;
        }
    }
    if (v[imax] < 0.0) v = -v;
}

}  // namespace detail

/// Solves the discrete eigenproblem by iterating the compact solution
/// operator f -> A^{-1} M_S f, Rayleigh-Ritz projected in the A inner
/// product.  Small problems go through a dense generalized eigensolver,
/// which doubles as the oracle in tests.
inline Spectrum solve(const MeshDomain& m, ProblemKind kind, int count, const SolveOptions& opts = {}) {
    require_kind_compatible(m, kind);
    if (count < 1) throw InvalidArgument("solve: eigenvalue count must be at least 1");

    auto setup = detail::operator_setup(m, kind);
    const int n = static_cast<int>(setup.a.rows());

    Spectrum spec;
    spec.kind = kind;
    spec.mesh_label = m.label;

    int k_eff = std::min(count, setup.rank_bound);
    if (k_eff < count)
        spec.warnings.push_back("requested " + std::to_string(count) + " eigenvalues, truncated to " +
                                std::to_string(k_eff) + " (free-surface mass rank bound)");
    if (k_eff == 0) throw InvalidArgument("solve: no free-surface dofs available");

    bool dense = opts.method == SolveOptions::Method::Dense ||
                 (opts.method == SolveOptions::Method::Auto && n < opts.dense_threshold);

    MatX vecs_free(n, k_eff);
    std::vector<double> op_mu(k_eff);

    if (dense) {
        MatX ad = MatX(setup.a);
        MatX md = MatX(setup.ms);
        Eigen::GeneralizedSelfAdjointEigenSolver<MatX> ges(md, ad);
        if (ges.info() != Eigen::Success) throw SingularSystem("solve: dense generalized eigensolver failed");
        // Eigenvalues come ascending; the operator spectrum is the top slice.
        for (int k = 0; k < k_eff; ++k) {
            int src = n - 1 - k;
            op_mu[k] = ges.eigenvalues()[src];
            vecs_free.col(k) = ges.eigenvectors().col(src);
        }
    } else {
        Eigen::SimplicialLDLT<SpMat> solver(setup.a);
        if (solver.info() != Eigen::Success) throw SingularSystem("solve: factorization of the definite form failed");

        std::mt19937_64 rng(opts.seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        int p = std::min({n, setup.rank_bound, std::max(2 * k_eff, k_eff + 8)});
        MatX x(n, p);
        for (int j = 0; j < p; ++j)
            for (int i = 0; i < n; ++i) x(i, j) = gauss(rng);

        VecX ritz = VecX::Zero(p);
        bool converged = false;
        for (int it = 0; it < opts.max_iterations && !converged; ++it) {
            MatX y = solver.solve(setup.ms * x);
            detail::a_orthonormalize(y, setup.a, rng);
            MatX my = setup.ms * y;
            MatX small = y.transpose() * my;
            small = 0.5 * (small + small.transpose()).eval();
            Eigen::SelfAdjointEigenSolver<MatX> saes(small);
            // Ritz values ascending; reorder descending.
            MatX rot(p, p);
            for (int k = 0; k < p; ++k) {
                rot.col(k) = saes.eigenvectors().col(p - 1 - k);
                ritz[k] = saes.eigenvalues()[p - 1 - k];
            }
            x = y * rot;

            if (it % 2 == 1 || it == opts.max_iterations - 1) {
                MatX mx = setup.ms * x.leftCols(k_eff);
                MatX ax = setup.a * x.leftCols(k_eff);
                double worst = 0.0;
                for (int k = 0; k < k_eff; ++k) {
                    double r = (mx.col(k) - ritz[k] * ax.col(k)).norm();
                    double scale = mx.col(k).norm() + std::abs(ritz[k]) * ax.col(k).norm();
                    worst = std::max(worst, r / std::max(scale, 1e-300));
                }
                converged = worst <= opts.tol;
            }
        }
        if (!converged) spec.warnings.push_back("operator iteration hit the iteration cap before full convergence");
        for (int k = 0; k < k_eff; ++k) {
            op_mu[k] = ritz[k];
            vecs_free.col(k) = x.col(k);
        }
    }

    // Final orthonormalization in the kind's inner product, run twice.
    {
        std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
        detail::a_orthonormalize(vecs_free, setup.a, rng);
    }

    const int nv = m.num_vertices();
    spec.eigenvectors.resize(nv, k_eff);
    SpMat k_full = stiffness(m).mat;
    SpMat ms_full = boundary_mass_S(m).mat;
    SpMat khat_full = kind == ProblemKind::SteklovDirichlet ? k_full : SpMat(k_full + ms_full);

    for (int k = 0; k < k_eff; ++k) {
        double mu_op = op_mu[k];
        if (!(mu_op > 0.0)) {
            spec.warnings.push_back("operator eigenvalue " + std::to_string(k) + " is not positive; truncating");
            spec.eigenvectors.conservativeResize(nv, k);
            k_eff = k;
            break;
        }
        VecX full = setup.map.extend_vector(vecs_free.col(k), nv);
        detail::fix_sign(full);
        spec.eigenvectors.col(k) = full;

        double lam_op = 1.0 / mu_op;  // lambda for SD, lambda_hat otherwise
        if (kind == ProblemKind::SteklovDirichlet) {
            spec.lambda.push_back(lam_op);
            spec.mu.push_back(mu_op);
        } else {
            spec.lambda_hat.push_back(lam_op);
            spec.lambda.push_back(lam_op - 1.0);
            spec.mu.push_back(kind == ProblemKind::SteklovNeumann
                                  ? mu_op
                                  : 1.0 / (lam_op - 1.0));  // pure Steklov: 1/lambda, infinite at the zero mode
        }
        spec.op_mu.push_back(mu_op);

        VecX ke = khat_full * full;
        VecX mse = ms_full * full;
        double lam_res = kind == ProblemKind::SteklovDirichlet ? spec.lambda.back() : spec.lambda_hat.back();
        // Free-dof norm: for SD the wall rows carry the boundary flux and are
        // not part of the eigen equation.
        VecX r = setup.map.restrict_vector(ke - lam_res * mse);
        spec.residuals.push_back(r.norm());
        spec.residual_scale.push_back(setup.map.restrict_vector(ke).norm());
    }
    return spec;
}

/// A contiguous run of nearly equal eigenvalues.
struct Cluster {
    int first = 0;      // index into the spectrum
    int size = 0;       // multiplicity m
    double center = 0.0;
    double rel_width = 0.0;
};

/// Maximal runs of eigenvalues with pairwise relative spacing below
/// tol_cluster; singletons are not reported.  The run width is bounded by the
/// same tolerance, so every member stays within the window around the center.
inline std::vector<Cluster> detect_clusters(const Spectrum& spec, double tol_cluster) {
    if (!(tol_cluster > 0.0)) throw InvalidArgument("detect_clusters: tolerance must be positive");
    std::vector<Cluster> out;
    const int n = spec.count();
    int start = 0;
    while (start < n) {
        int end = start;
        while (end + 1 < n) {
            double window = tol_cluster * std::max(1.0, std::abs(spec.lambda[end + 1]));
            double gap = spec.lambda[end + 1] - spec.lambda[end];
            double width = spec.lambda[end + 1] - spec.lambda[start];
            if (gap <= window && width <= window)
                ++end;
            else
                break;
        }
        if (end > start) {
            Cluster c;
            c.first = start;
            c.size = end - start + 1;
            double lo = spec.lambda[start], hi = spec.lambda[end];
            c.center = 0.5 * (lo + hi);
            c.rel_width = (hi - lo) / std::max(1.0, std::abs(c.center));
            out.push_back(c);
        }
        start = end + 1;
    }
    return out;
}

struct MinmaxReport {
    int trials = 0;
    int violations = 0;
    double worst_margin = 0.0;    // max over trials of (int_S phi^2 - mu_1)
    double attainment_gap = 0.0;  // |int_S e_1^2 - mu_1|
};

/// Random Rayleigh-quotient check of the variational characterization:
/// unit-norm trial functions never beat mu_1, and e_1 attains it.
inline MinmaxReport minmax_check(const Spectrum& spec, const MeshDomain& m, int n_trials,
                                 std::uint64_t seed, double tol = 1e-8) {
    auto setup = detail::operator_setup(m, spec.kind);
    MinmaxReport rep;
    rep.trials = n_trials;
    double mu1 = spec.op_mu.at(0);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    rep.worst_margin = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < n_trials; ++t) {
        VecX phi(setup.a.rows());
        for (int i = 0; i < phi.size(); ++i) phi[i] = gauss(rng);
        double anorm = std::sqrt(phi.dot(setup.a * phi));
        phi /= anorm;
        double val = phi.dot(setup.ms * phi);
        rep.worst_margin = std::max(rep.worst_margin, val - mu1);
        if (val > mu1 + tol) rep.violations++;
    }
    VecX e1 = setup.map.restrict_vector(spec.eigenvectors.col(0));
    rep.attainment_gap = std::abs(e1.dot(setup.ms * e1) - mu1);
    return rep;
}

/// Residual of a single would-be eigenpair, measured in the free-dof norm.
inline double eigen_residual(const MeshDomain& m, ProblemKind kind, const VecX& e, double lambda) {
    if (e.norm() == 0.0) throw InvalidArgument("eigen_residual: zero vector is not an eigenvector");
    SpMat k = stiffness(m).mat;
    SpMat ms = boundary_mass_S(m).mat;
    if (kind == ProblemKind::SteklovDirichlet) {
        DofMap map = dirichlet_dof_map(m);
        return map.restrict_vector(k * e - lambda * (ms * e)).norm();
    }
    SpMat khat = k + ms;
    return (khat * e - (lambda + 1.0) * (ms * e)).norm();
}

/// Recomputed per-pair residual norms.
inline std::vector<double> residual(const Spectrum& spec, const MeshDomain& m) {
    std::vector<double> out;
    out.reserve(spec.count());
    for (int k = 0; k < spec.count(); ++k)
        out.push_back(eigen_residual(m, spec.kind, spec.eigenvectors.col(k), spec.lambda[k]));
    return out;
}

}  // namespace sloshlab
