#pragma once

#include "sloshlab/hadamard.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace sloshlab {

enum class Verdict { SplitConfirmed, Inconclusive, NoSplit };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::SplitConfirmed: return "split-confirmed";
        case Verdict::Inconclusive: return "inconclusive";
        default: return "no-split";
    }
}

/// Measured gap growth of a cluster under one field, against the first-order
/// prediction.  split-confirmed requires an R^2 >= 0.99 linear gap fit whose
/// slope matches the predicted branch-slope spread within the tolerance.
struct SplitReport {
    Cluster cluster;
    std::string field;
    std::vector<double> t_grid;                     // includes the baseline 0
    std::vector<std::vector<double>> lambda_paths;  // [branch][t]
    std::vector<std::vector<double>> pair_gaps;     // [adjacent pair][t]
    std::vector<double> pair_slopes;
    std::vector<double> pair_r2;
    double spread_slope = 0.0;  // fit of lambda_last - lambda_first
    double spread_r2 = 1.0;
    double spread_intercept = 0.0;
    double predicted_spread = 0.0;
    double slope_rel_error = 0.0;
    double slope_tol = 0.1;
    Verdict verdict = Verdict::Inconclusive;
};

/// Re-solves on each transplanted mesh, fits gap growth, and compares with
/// the ClusterDerivative prediction.
inline SplitReport verify_split(const MeshDomain& m, const PerturbationField& psi, const Cluster& cl,
                                ProblemKind kind, const std::vector<double>& t_grid,
                                double slope_tol = 0.10, const SolveOptions& opts = {}) {
    if (cl.size < 2) throw InvalidArgument("verify_split: cluster multiplicity must be at least 2");
    double guard = psi.kind() == FieldKind::VertexTable ? psi.table_max() : c2_norm_estimate(psi);
    for (double t : t_grid)
        if (!(std::abs(t) * guard < 0.5))
            throw AmplitudeTooLarge("verify_split: grid amplitude violates the transplant guard");

    SplitReport rep;
    rep.cluster = cl;
    rep.field = psi.describe();
    rep.slope_tol = slope_tol;

    Spectrum base = solve(m, kind, cl.first + cl.size + 1, opts);
    ClusterDerivative cd = cluster_matrix(m, base, cl, psi);
    rep.predicted_spread = cd.lambda_slopes.back() - cd.lambda_slopes.front();

    auto [ts, paths] = detail::track_cluster(m, psi, cl, kind, t_grid, opts);
    rep.t_grid = std::move(ts);
    rep.lambda_paths = std::move(paths);

    const int nt = static_cast<int>(rep.t_grid.size());
    std::vector<double> spread(nt);
    for (int p = 0; p + 1 < cl.size; ++p) {
        std::vector<double> gap(nt);
        for (int it = 0; it < nt; ++it) gap[it] = rep.lambda_paths[p + 1][it] - rep.lambda_paths[p][it];
        auto lf = detail::linear_fit(rep.t_grid, gap);
        rep.pair_gaps.push_back(std::move(gap));
        rep.pair_slopes.push_back(lf.slope);
        rep.pair_r2.push_back(lf.r2);
    }
    for (int it = 0; it < nt; ++it)
        spread[it] = rep.lambda_paths[cl.size - 1][it] - rep.lambda_paths[0][it];
    auto sf = detail::linear_fit(rep.t_grid, spread);
    rep.spread_slope = sf.slope;
    rep.spread_r2 = sf.r2;
    rep.spread_intercept = sf.intercept;

    double t_max = rep.t_grid.back();
    double growth = std::abs(rep.spread_slope) * t_max;
    bool gaps_flat = growth <= std::max(1e-12, 0.05 * spread[0]);

    if (rep.predicted_spread <= 1e-12) {
        rep.slope_rel_error = 0.0;
        rep.verdict = psi.is_zero() && gaps_flat ? Verdict::NoSplit : Verdict::Inconclusive;
        return rep;
    }
    rep.slope_rel_error = std::abs(rep.spread_slope - rep.predicted_spread) / rep.predicted_spread;
    if (rep.spread_r2 >= 0.99 && rep.slope_rel_error <= slope_tol)
        rep.verdict = Verdict::SplitConfirmed;
    else if (gaps_flat)
        rep.verdict = Verdict::NoSplit;
    else
        rep.verdict = Verdict::Inconclusive;
    return rep;
}

struct FindOptions {
    int n_candidates = 16;
    std::uint64_t seed = 7;
    double score_floor = 1e-8;
    // InteriorOnly exists to demonstrate that interior fields cannot split.
    enum class Family { NormalBumps, InteriorOnly } family = Family::NormalBumps;
};

namespace detail {

// L2 norm of the normal boundary displacement.  First-order eigenvalue motion
// only sees the boundary, so a field with zero normal motion cannot split:
// its cluster matrix is pure discretization noise and its anisotropy ratio is
// meaningless.
inline double normal_motion_l2(const MeshDomain& m, const PerturbationField& psi) {
    double acc = 0.0;
    for (int e = 0; e < m.num_boundary_edges(); ++e) {
        const auto& be = m.boundary_edges[e];
        const Vec2& pa = m.vertices[be.a];
        const Vec2& pb = m.vertices[be.b];
        double len = (pb - pa).norm();
        for (double xi : {-kGauss2, kGauss2}) {
            Vec2 x = 0.5 * (1.0 - xi) * pa + 0.5 * (1.0 + xi) * pb;
            double a = psi.eval(x).value.dot(m.edge_normals[e]);
            acc += 0.5 * len * a * a;
        }
    }
    return std::sqrt(acc);
}

struct SidePolyline {
    std::vector<int> edges;       // boundary edge indices with the tag
    std::vector<double> cum_len;  // cumulative length, cum_len[i] = end of edges[i]
    double total = 0.0;
};

inline SidePolyline side_polyline(const MeshDomain& m, BoundaryTag side) {
    SidePolyline p;
    for (int e = 0; e < m.num_boundary_edges(); ++e) {
        if (m.boundary_edges[e].tag != side) continue;
        p.edges.push_back(e);
        p.total += m.edge_length(e);
        p.cum_len.push_back(p.total);
    }
    return p;
}

inline Vec2 point_at_arclength(const MeshDomain& m, const SidePolyline& p, double s) {
    auto it = std::lower_bound(p.cum_len.begin(), p.cum_len.end(), s);
    size_t i = std::min<size_t>(it - p.cum_len.begin(), p.edges.size() - 1);
    const auto& be = m.boundary_edges[p.edges[i]];
    double start = i == 0 ? 0.0 : p.cum_len[i - 1];
    double len = p.cum_len[i] - start;
    double frac = len > 0.0 ? std::clamp((s - start) / len, 0.0, 1.0) : 0.0;
    return (1.0 - frac) * m.vertices[be.a] + frac * m.vertices[be.b];
}

}  // namespace detail

/// Samples admissible bump fields on the chosen side, scores each candidate by
/// the no-splitting violation of its cluster derivative, and returns the best:
/// among candidates whose score clears the floor, the one whose predicted
/// branch motion opens the smallest adjacent gap the most.  Every candidate is
/// scaled so its full-amplitude C2 norm stays within the budget.  Throws
/// NoCandidateFound when no candidate violates the no-splitting condition.
inline std::pair<PerturbationField, ClusterDerivative> find_splitting(
    const MeshDomain& m, const Spectrum& spec, const Cluster& cl, BoundaryTag side, double budget_eps,
    const FindOptions& opts = {}) {
    if (cl.size < 2) throw InvalidArgument("find_splitting: cluster multiplicity must be at least 2");
    if (!(budget_eps > 0.0) || budget_eps >= 0.5)
        throw InvalidArgument("find_splitting: budget must lie in (0, 1/2) to honor the transplant guard");
    if (opts.n_candidates < 1) throw InvalidArgument("find_splitting: need at least one candidate");
    if (!m.has_tag(side))
        throw InvalidArgument(std::string("find_splitting: mesh has no boundary tagged ") + to_string(side));

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> jitter(-0.3, 0.3);
    std::uniform_real_distribution<double> radius_frac(0.25, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Candidates must violate the no-splitting condition (score above the
    // floor).  Among those, prefer the largest predicted opening of the
    // smallest adjacent gap at full amplitude, from the branch pencil
    // diag(lambda_r - center) + t * (lambda-slope matrix): at exact
    // degeneracy this is the branch-slope spread, and for partially split
    // clusters it accounts for the existing gaps (avoided crossings).  The
    // anisotropy ratio alone would favor the narrowest bumps, which carry the
    // least amplitude per unit C2 budget and open the smallest gaps.
    MatX d0 = MatX::Zero(cl.size, cl.size);
    for (int r = 0; r < cl.size; ++r) d0(r, r) = spec.lambda[cl.first + r] - cl.center;
    auto min_adjacent_gap = [](const VecX& sorted) {
        double g = std::numeric_limits<double>::infinity();
        for (int k = 0; k + 1 < sorted.size(); ++k) g = std::min(g, sorted[k + 1] - sorted[k]);
        return g;
    };
    double gap0 = min_adjacent_gap(Eigen::SelfAdjointEigenSolver<MatX>(d0).eigenvalues());

    double best_seen_score = -1.0;
    double best_opening = -std::numeric_limits<double>::infinity();
    bool have_candidate = false;
    PerturbationField best_field = PerturbationField::zero();
    ClusterDerivative best_cd;

    auto consider = [&](const PerturbationField& f) {
        ClusterDerivative cd = cluster_matrix(m, spec, cl, f);
        double score = detail::normal_motion_l2(m, f) > 0.0 ? cd.score : 0.0;
        best_seen_score = std::max(best_seen_score, score);
        if (score <= opts.score_floor) return;
        MatX lam_dot = -cd.matrix / (cd.mu * cd.mu);
        Eigen::SelfAdjointEigenSolver<MatX> es(d0 + lam_dot);
        double opening = min_adjacent_gap(es.eigenvalues()) - gap0;
        if (!have_candidate || opening > best_opening) {
            have_candidate = true;
            best_opening = opening;
            best_field = f;
            best_cd = cd;
        }
    };

    if (opts.family == FindOptions::Family::InteriorOnly) {
        for (int j = 0; j < opts.n_candidates; ++j) {
            double r = 0.15 + 0.1 * unit(rng);
            double cx = (2.0 * unit(rng) - 1.0) * 0.4;
            double cy = -unit(rng) * 0.4;
            double ang = 2.0 * M_PI * unit(rng);
            PerturbationField f = PerturbationField::interior_bump(
                Vec2(cx, cy), r, 1.0, Vec2(std::cos(ang), std::sin(ang)));
            consider(f.scaled(budget_eps / c2_norm_estimate(f)));
        }
    } else {
        auto poly = detail::side_polyline(m, side);
        BoundaryTag other = side == BoundaryTag::S ? BoundaryTag::W : BoundaryTag::S;
        for (int j = 0; j < opts.n_candidates; ++j) {
            double s = poly.total * ((j + 0.5 + jitter(rng)) / opts.n_candidates);
            s = std::fmod(s + poly.total, poly.total);
            Vec2 anchor = detail::point_at_arclength(m, poly, s);

            // Wide bumps carry more amplitude per unit C2 budget (the second
            // derivative scales like radius^-2), so explore up to the largest
            // admissible support at this anchor.
            double cap = 0.25 * poly.total;
            for (int g : m.interface_vertices)
                cap = std::min(cap, 0.8 * (m.vertices[g] - anchor).norm());
            for (int e = 0; e < m.num_boundary_edges(); ++e)
                if (m.boundary_edges[e].tag == other)
                    cap = std::min(cap, 0.8 * detail::point_segment_distance(
                                             anchor, m.vertices[m.boundary_edges[e].a],
                                             m.vertices[m.boundary_edges[e].b]));
            double radius = radius_frac(rng) * cap;
            if (radius < 0.02 * poly.total) continue;

            try {
                PerturbationField f = normal_bump(m, anchor, radius, 1.0, side);
                consider(f.scaled(budget_eps / c2_norm_estimate(f)));
            } catch (const InvalidSupport&) {
                continue;  // stratified neighbor candidates cover the gap
            }
        }
    }

    if (!have_candidate)
        throw NoCandidateFound(std::max(best_seen_score, 0.0),
                               "find_splitting: no candidate violates the no-splitting condition (best score " +
                                   std::to_string(std::max(best_seen_score, 0.0)) + ")");
    return {best_field, best_cd};
}

enum class TraceStatus { Completed, AlreadySimple, NoCandidate, MaxIterations, Inconclusive };

inline const char* to_string(TraceStatus s) {
    switch (s) {
        case TraceStatus::Completed: return "completed";
        case TraceStatus::AlreadySimple: return "already-simple";
        case TraceStatus::NoCandidate: return "no-candidate-found";
        case TraceStatus::MaxIterations: return "max-iterations";
        default: return "inconclusive";
    }
}

struct SimplifyStep {
    int iteration = 0;
    double eps_budget = 0.0;
    Cluster cluster;
    std::string field;
    double score = 0.0;
    Verdict verdict = Verdict::Inconclusive;
    double t_applied = 0.0;
    double amplitude_spent = 0.0;  // t * ||psi||_C2
    int clustered_before = 0;
    int clustered_after = 0;
    double min_rel_gap_before = 0.0;
    double min_rel_gap_after = 0.0;
};

struct SimplifyOptions {
    double tol_simple = 1e-4;
    int max_iterations = 12;
    int n_candidates = 16;
    double slope_tol = 0.25;  // driver amplitudes are larger, allow curvature
    std::vector<double> t_grid = {0.125, 0.25, 0.5, 1.0};
    SolveOptions solve;
};

struct SimplificationTrace {
    ProblemKind kind = ProblemKind::PureSteklov;
    int count = 0;
    double eps_initial = 0.0;
    BoundaryTag side = BoundaryTag::S;
    std::uint64_t seed = 0;
    TraceStatus status = TraceStatus::Completed;
    std::string note;
    std::vector<SimplifyStep> steps;
    std::vector<SplitReport> reports;  // one per confirmed or attempted step
    Spectrum initial_spectrum;
    Spectrum final_spectrum;
    MeshDomain final_mesh;
    double total_amplitude = 0.0;
};

namespace detail {

inline int clustered_index_count(const Spectrum& spec, double tol) {
    int n = 0;
    for (const Cluster& c : detect_clusters(spec, tol)) n += c.size;
    return n;
}

inline double min_rel_gap(const Spectrum& spec) {
    double g = std::numeric_limits<double>::infinity();
    for (int k = 0; k + 1 < spec.count(); ++k)
        g = std::min(g, (spec.lambda[k + 1] - spec.lambda[k]) /
                            std::max(1.0, std::abs(spec.lambda[k + 1])));
    return g;
}

}  // namespace detail

/// Iterative splitting driver: find a field that violates the no-splitting
/// condition for the first remaining cluster, verify the split on transplanted
/// meshes, apply the largest verified amplitude permanently, halve the budget,
/// repeat until the leading spectrum is simple at tol_simple.
inline SimplificationTrace simplify_spectrum(const MeshDomain& m, ProblemKind kind, int count, double eps,
                                             BoundaryTag side, std::uint64_t seed,
                                             const SimplifyOptions& opts = {}) {
    require_kind_compatible(m, kind);
    if (!(eps > 0.0) || eps >= 0.5)
        throw InvalidArgument("simplify_spectrum: budget must lie in (0, 1/2)");

    SimplificationTrace trace;
    trace.kind = kind;
    trace.count = count;
    trace.eps_initial = eps;
    trace.side = side;
    trace.seed = seed;

    MeshDomain current = m;
    double eps_l = eps;
    trace.initial_spectrum = solve(m, kind, count, opts.solve);

    for (int iter = 1; iter <= opts.max_iterations; ++iter) {
        Spectrum spec = solve(current, kind, count, opts.solve);
        auto clusters = detect_clusters(spec, opts.tol_simple);
        if (clusters.empty()) {
            trace.status = iter == 1 ? TraceStatus::AlreadySimple : TraceStatus::Completed;
            trace.final_spectrum = spec;
            trace.final_mesh = current;
            return trace;
        }

        SimplifyStep step;
        step.iteration = iter;
        step.eps_budget = eps_l;
        step.cluster = clusters.front();
        step.clustered_before = detail::clustered_index_count(spec, opts.tol_simple);
        step.min_rel_gap_before = detail::min_rel_gap(spec);

        FindOptions fopts;
        fopts.n_candidates = opts.n_candidates;
        fopts.seed = seed + 1000ULL * iter;
        PerturbationField field = PerturbationField::zero();
        try {
            auto [f, cd] = find_splitting(current, spec, step.cluster, side, eps_l, fopts);
            field = f;
            step.field = f.describe();
            step.score = cd.score;
        } catch (const NoCandidateFound& e) {
            trace.status = TraceStatus::NoCandidate;
            trace.note = e.what();
            trace.steps.push_back(step);
            trace.final_spectrum = spec;
            trace.final_mesh = current;
            return trace;
        }

        // Largest verified amplitude: retry on shrunken grids if the full one
        // leaves the linear regime.
        SplitReport report;
        bool confirmed = false;
        for (double shrink : {1.0, 0.5, 0.25}) {
            std::vector<double> grid;
            for (double t : opts.t_grid) grid.push_back(shrink * t);
            report = verify_split(current, field, step.cluster, kind, grid, opts.slope_tol, opts.solve);
            if (report.verdict == Verdict::SplitConfirmed) {
                confirmed = true;
                break;
            }
        }
        step.verdict = report.verdict;
        trace.reports.push_back(report);

        if (!confirmed) {
            trace.status = TraceStatus::Inconclusive;
            trace.note = "verify_split did not confirm a linear gap opening";
            trace.steps.push_back(step);
            trace.final_spectrum = spec;
            trace.final_mesh = current;
            return trace;
        }

        step.t_applied = report.t_grid.back();
        step.amplitude_spent = step.t_applied * eps_l;
        current = transplant(current, field, step.t_applied).mesh;
        trace.total_amplitude += step.amplitude_spent;

        Spectrum after = solve(current, kind, count, opts.solve);
        step.clustered_after = detail::clustered_index_count(after, opts.tol_simple);
        step.min_rel_gap_after = detail::min_rel_gap(after);
        trace.steps.push_back(step);

        if (step.clustered_after >= step.clustered_before) {
            // Tolerance interlock: the split is real but the budget cannot
            // open gaps past tol_simple; halving further only makes it worse.
            trace.status = TraceStatus::Inconclusive;
            trace.note = "confirmed split stays below tol_simple; enlarge the budget or relax the tolerance";
            trace.final_spectrum = after;
            trace.final_mesh = current;
            return trace;
        }

        eps_l *= 0.5;
    }

    trace.status = TraceStatus::MaxIterations;
    trace.final_mesh = current;
    trace.final_spectrum = solve(current, kind, count, opts.solve);
    return trace;
}

}  // namespace sloshlab
