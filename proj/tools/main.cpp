// sloshlab: mixed Steklov eigenvalue laboratory.
//
// Subcommands: solve, derivative, split, simplify, validate.  Outputs are
// plain CSV/JSON/SVG, deterministic for a fixed config and seed; every file
// embeds the config hash and the seed.

#include "sloshlab/exports.hpp"
#include "sloshlab/field_spec.hpp"
#include "sloshlab/hadamard.hpp"
#include "sloshlab/mesh_io.hpp"
#include "sloshlab/spectral.hpp"
#include "sloshlab/splitting.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sloshlab;

namespace {

double parse_number(const std::string& tok) {
    if (tok == "pi") return M_PI;
    if (tok == "2pi") return 2.0 * M_PI;
    size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw InvalidArgument("cannot parse number '" + tok + "'");
    return v;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    return out;
}

// Builtin domain specs: rect:a,h,nx,ny[,grading] | disk:nr,ns | halfdisk:nr,ns[,grading]
MeshDomain build_domain(const std::string& spec) {
    auto colon = spec.find(':');
    if (colon == std::string::npos) throw InvalidArgument("domain spec needs the form name:args");
    std::string name = spec.substr(0, colon);
    auto args = split_commas(spec.substr(colon + 1));
    if (name == "rect") {
        if (args.size() != 4 && args.size() != 5) throw InvalidArgument("rect spec: rect:a,h,nx,ny[,grading]");
        return build_rectangle(parse_number(args[0]), parse_number(args[1]), std::stoi(args[2]),
                               std::stoi(args[3]), args.size() == 5 ? parse_number(args[4]) : 1.0);
    }
    if (name == "disk") {
        if (args.size() != 2) throw InvalidArgument("disk spec: disk:n_rings,n_sectors");
        return build_disk(std::stoi(args[0]), std::stoi(args[1]));
    }
    if (name == "halfdisk") {
        if (args.size() != 2 && args.size() != 3)
            throw InvalidArgument("halfdisk spec: halfdisk:n_rings,n_sectors[,grading]");
        return build_half_disk(std::stoi(args[0]), std::stoi(args[1]),
                               args.size() == 3 ? parse_number(args[2]) : 1.0);
    }
    throw InvalidArgument("unknown builtin domain '" + name + "'");
}

ProblemKind parse_kind(const std::string& s) {
    if (s == "sd") return ProblemKind::SteklovDirichlet;
    if (s == "sn") return ProblemKind::SteklovNeumann;
    if (s == "steklov") return ProblemKind::PureSteklov;
    throw InvalidArgument("unknown kind '" + s + "' (expected sd, sn or steklov)");
}

BoundaryTag parse_side(const std::string& s) {
    if (s == "S") return BoundaryTag::S;
    if (s == "W") return BoundaryTag::W;
    throw InvalidArgument("side must be S or W");
}

std::vector<double> parse_grid(const std::string& s) {
    std::vector<double> out;
    for (const auto& tok : split_commas(s)) out.push_back(parse_number(tok));
    if (out.empty()) throw InvalidArgument("empty t-grid");
    return out;
}

// FNV-1a over the canonical config string.
std::string config_hash(const std::string& canonical) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct CommonArgs {
    std::string domain;
    std::string mesh_file;
    int refine_levels = 0;
    std::string out_dir;
    std::uint64_t seed = 1;
    std::string method = "auto";

    MeshDomain load_mesh() const {
        if (domain.empty() == mesh_file.empty())
            throw InvalidArgument("exactly one of --domain and --mesh is required");
        MeshDomain m = domain.empty() ? read_mesh_file(mesh_file) : build_domain(domain);
        for (int i = 0; i < refine_levels; ++i) m = refine(m);
        MeshDiagnostics diag = validate_mesh(m);
        if (!diag.ok()) throw InvalidArgument("input mesh is invalid:\n" + diag.summary());
        return m;
    }

    SolveOptions solve_options() const {
        SolveOptions o;
        o.seed = seed;
        if (method == "dense")
            o.method = SolveOptions::Method::Dense;
        else if (method == "iterative")
            o.method = SolveOptions::Method::Iterative;
        else if (method != "auto")
            throw InvalidArgument("method must be auto, dense or iterative");
        return o;
    }
};

void add_common(CLI::App* cmd, CommonArgs& c) {
    cmd->add_option("--domain", c.domain, "builtin domain: rect:a,h,nx,ny | disk:nr,ns | halfdisk:nr,ns");
    cmd->add_option("--mesh", c.mesh_file, "mesh2d v1 file");
    cmd->add_option("--refine", c.refine_levels, "uniform refinement levels")->check(CLI::NonNegativeNumber);
    cmd->add_option("--out", c.out_dir, "output directory (default out/<command>-<hash>)");
    cmd->add_option("--seed", c.seed, "random seed recorded in every output");
    cmd->add_option("--method", c.method, "eigensolver path: auto | dense | iterative");
}

fs::path prepare_out_dir(const CommonArgs& c, const std::string& command, const std::string& hash) {
    fs::path dir = c.out_dir.empty() ? fs::path("out") / (command + "-" + hash.substr(0, 8)) : fs::path(c.out_dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw InvalidArgument("cannot write " + p.string());
    os << content;
}

int exit_code_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::NoCandidateFound: return 4;
        case ErrorCode::AmplitudeTooLarge:
        case ErrorCode::MeshFolded:
        case ErrorCode::SingularSystem:
        case ErrorCode::TrackingFailure: return 3;
        default: return 2;
    }
}

void emit_error_record(const std::string& code, const std::string& message) {
    Json j;
    j["error"] = Json{{"code", code}, {"message", message}};
    std::cerr << j.dump() << "\n";
}

const char* code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::InvalidArgument: return "invalid-argument";
        case ErrorCode::InvalidSupport: return "invalid-support";
        case ErrorCode::UnsupportedOperation: return "unsupported-operation";
        case ErrorCode::UndefinedForSimple: return "undefined-for-simple";
        case ErrorCode::InvalidCase: return "invalid-case";
        case ErrorCode::AmplitudeTooLarge: return "amplitude-too-large";
        case ErrorCode::MeshFolded: return "mesh-folded";
        case ErrorCode::SingularSystem: return "singular-system";
        case ErrorCode::TrackingFailure: return "tracking-failure";
        case ErrorCode::NoCandidateFound: return "no-candidate-found";
    }
    return "error";
}

Cluster select_cluster(const Spectrum& spec, int cluster_first, int cluster_size, double tol_cluster) {
    if (cluster_first > 0) {
        Cluster cl;
        cl.first = cluster_first - 1;  // CLI is 1-based
        cl.size = cluster_size;
        if (cl.first + cl.size > spec.count())
            throw InvalidArgument("requested cluster exceeds the computed spectrum");
        cl.center = 0.5 * (spec.lambda[cl.first] + spec.lambda[cl.first + cl.size - 1]);
        cl.rel_width = (spec.lambda[cl.first + cl.size - 1] - spec.lambda[cl.first]) /
                       std::max(1.0, std::abs(cl.center));
        return cl;
    }
    auto clusters = detect_clusters(spec, tol_cluster);
    if (clusters.empty())
        throw InvalidArgument("no cluster detected at tolerance " + std::to_string(tol_cluster) +
                              "; pass --cluster/--size explicitly");
    return clusters.front();
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* threads = std::getenv("SLOSHLAB_THREADS")) {
        int n = std::atoi(threads);
        if (n > 0) Eigen::setNbThreads(n);
    }

    CLI::App app{"sloshlab: mixed Steklov (sloshing) eigenvalue laboratory"};
    app.require_subcommand(1);

    // solve
    auto* solve_cmd = app.add_subcommand("solve", "solve the eigenproblem and export the spectrum");
    CommonArgs solve_args;
    add_common(solve_cmd, solve_args);
    std::string solve_kind = "sn";
    int solve_k = 6;
    bool solve_vectors = false;
    solve_cmd->add_option("--kind", solve_kind, "sd | sn | steklov");
    solve_cmd->add_option("-k,--count", solve_k, "number of eigenvalues");
    solve_cmd->add_flag("--eigenvectors", solve_vectors, "also export eigenvectors.csv");

    // derivative
    auto* deriv_cmd = app.add_subcommand("derivative", "cluster derivative matrix and slope comparison");
    CommonArgs deriv_args;
    add_common(deriv_cmd, deriv_args);
    std::string deriv_kind = "steklov", deriv_field, deriv_grid = "1e-3,2e-3,4e-3";
    int deriv_k = 6, deriv_cluster = 0, deriv_size = 2;
    double deriv_tol_cluster = 1e-2;
    deriv_cmd->add_option("--kind", deriv_kind, "sd | sn | steklov");
    deriv_cmd->add_option("-k,--count", deriv_k, "number of eigenvalues to solve");
    deriv_cmd->add_option("--field", deriv_field, "field spec JSON or @file")->required();
    deriv_cmd->add_option("--cluster", deriv_cluster, "1-based index of the first cluster eigenvalue");
    deriv_cmd->add_option("--size", deriv_size, "cluster multiplicity (with --cluster)");
    deriv_cmd->add_option("--tol-cluster", deriv_tol_cluster, "cluster detection tolerance");
    deriv_cmd->add_option("--t-grid", deriv_grid, "finite-difference amplitude grid");
    bool deriv_refine_check = false;
    deriv_cmd->add_flag("--refine-check", deriv_refine_check,
                        "re-run on a refined mesh and embed the per-branch refinement floor");

    // split
    auto* split_cmd = app.add_subcommand("split", "search for a splitting field and verify it");
    CommonArgs split_args;
    add_common(split_cmd, split_args);
    std::string split_kind = "steklov", split_side = "S", split_grid = "1e-3,2e-3,4e-3,8e-3";
    int split_k = 7, split_candidates = 16, split_cluster = 0, split_size = 2;
    double split_eps = 0.05, split_tol_cluster = 1e-4, split_slope_tol = 0.10;
    split_cmd->add_option("--kind", split_kind, "sd | sn | steklov");
    split_cmd->add_option("-k,--count", split_k, "number of eigenvalues to solve");
    split_cmd->add_option("--side", split_side, "boundary side carrying the perturbation: S | W");
    split_cmd->add_option("--eps", split_eps, "C2-norm budget for candidate fields");
    split_cmd->add_option("--candidates", split_candidates, "number of sampled candidates");
    split_cmd->add_option("--cluster", split_cluster, "1-based index of the first cluster eigenvalue");
    split_cmd->add_option("--size", split_size, "cluster multiplicity (with --cluster)");
    split_cmd->add_option("--tol-cluster", split_tol_cluster, "cluster detection tolerance");
    split_cmd->add_option("--t-grid", split_grid, "verification amplitude grid");
    split_cmd->add_option("--slope-tol", split_slope_tol, "relative tolerance on the gap slope");

    // simplify
    auto* simp_cmd = app.add_subcommand("simplify", "iterative splitting driver");
    CommonArgs simp_args;
    add_common(simp_cmd, simp_args);
    std::string simp_kind = "steklov", simp_side = "S";
    int simp_k = 7, simp_candidates = 16, simp_maxit = 12;
    double simp_eps = 0.05, simp_tol_simple = 1e-4;
    simp_cmd->add_option("--kind", simp_kind, "sd | sn | steklov");
    simp_cmd->add_option("-k,--count", simp_k, "number of leading eigenvalues to simplify");
    simp_cmd->add_option("--side", simp_side, "boundary side carrying the perturbations: S | W");
    simp_cmd->add_option("--eps", simp_eps, "initial C2-norm budget");
    simp_cmd->add_option("--candidates", simp_candidates, "candidates per iteration");
    simp_cmd->add_option("--tol-simple", simp_tol_simple, "relative gap defining a simple spectrum");
    simp_cmd->add_option("--max-iterations", simp_maxit, "iteration cap");

    // validate
    auto* val_cmd = app.add_subcommand("validate", "mesh diagnostics and invariant summary");
    CommonArgs val_args;
    add_common(val_cmd, val_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*solve_cmd) {
            std::ostringstream canon;
            canon << "solve|" << solve_args.domain << solve_args.mesh_file << "|r" << solve_args.refine_levels
                  << "|" << solve_kind << "|k" << solve_k << "|seed" << solve_args.seed << "|"
                  << solve_args.method;
            std::string hash = config_hash(canon.str());
            MeshDomain m = solve_args.load_mesh();
            Spectrum spec = solve(m, parse_kind(solve_kind), solve_k, solve_args.solve_options());
            fs::path dir = prepare_out_dir(solve_args, "solve", hash);
            write_file(dir / "spectrum.csv", spectrum_to_csv(spec, hash, solve_args.seed));
            if (solve_vectors)
                write_file(dir / "eigenvectors.csv", eigenvectors_to_csv(spec, hash, solve_args.seed));
            for (const auto& w : spec.warnings) std::cerr << "warning: " << w << "\n";
            std::cout << "wrote " << (dir / "spectrum.csv").string() << "\n";
            for (int k = 0; k < spec.count(); ++k)
                std::printf("lambda[%d] = %.12g\n", k + 1, spec.lambda[k]);
            return 0;
        }

        if (*deriv_cmd) {
            std::ostringstream canon;
            canon << "derivative|" << deriv_args.domain << deriv_args.mesh_file << "|r"
                  << deriv_args.refine_levels << "|" << deriv_kind << "|k" << deriv_k << "|" << deriv_field
                  << "|c" << deriv_cluster << "x" << deriv_size << "|tol" << deriv_tol_cluster << "|"
                  << deriv_grid << "|seed" << deriv_args.seed << "|" << deriv_args.method;
            std::string hash = config_hash(canon.str());
            MeshDomain m = deriv_args.load_mesh();
            ProblemKind kind = parse_kind(deriv_kind);
            Spectrum spec = solve(m, kind, deriv_k, deriv_args.solve_options());
            Cluster cl = select_cluster(spec, deriv_cluster, deriv_size, deriv_tol_cluster);
            PerturbationField field = parse_field_arg(m, deriv_field);
            ClusterDerivative cd = cluster_matrix(m, spec, cl, field);
            FdSlopes fd = fd_slopes(m, field, cl, kind, parse_grid(deriv_grid), deriv_args.solve_options());

            fs::path dir = prepare_out_dir(deriv_args, "derivative", hash);
            Json j = cluster_derivative_to_json(cd);
            j["config"] = hash;
            j["seed"] = deriv_args.seed;
            j["fd_lambda_slopes"] = fd.lambda_slopes;
            j["fd_r2"] = fd.lambda_r2;
            j["refinement_floor"] = Json();
            if (deriv_refine_check) {
                MeshDomain fine = refine(m);
                Spectrum spec2 = solve(fine, kind, deriv_k, deriv_args.solve_options());
                Cluster cl2 = select_cluster(spec2, cl.first + 1, cl.size, deriv_tol_cluster);
                PerturbationField field2 = parse_field_arg(fine, deriv_field);
                ClusterDerivative cd2 = cluster_matrix(fine, spec2, cl2, field2);
                FdSlopes fd2 =
                    fd_slopes(fine, field2, cl2, kind, parse_grid(deriv_grid), deriv_args.solve_options());
                Json floor = Json::array();
                for (size_t r = 0; r < cd.lambda_slopes.size(); ++r)
                    floor.push_back(checked(std::abs(cd2.lambda_slopes[r] - cd.lambda_slopes[r]) +
                                            std::abs(fd2.lambda_slopes[r] - fd.lambda_slopes[r])));
                j["refinement_floor"] = floor;
            }
            write_file(dir / "derivative.json", j.dump(2) + "\n");
            write_file(dir / "slopes.csv", slope_comparison_csv(cd, fd, hash, deriv_args.seed));
            std::cout << "wrote " << (dir / "derivative.json").string() << "\n";
            std::cout << "score: " << (std::isnan(cd.score) ? 0.0 : cd.score) << "\n";
            return 0;
        }

        if (*split_cmd) {
            std::ostringstream canon;
            canon << "split|" << split_args.domain << split_args.mesh_file << "|r" << split_args.refine_levels
                  << "|" << split_kind << "|k" << split_k << "|" << split_side << "|eps" << split_eps << "|n"
                  << split_candidates << "|c" << split_cluster << "x" << split_size << "|tol"
                  << split_tol_cluster << "|" << split_grid << "|st" << split_slope_tol << "|seed"
                  << split_args.seed << "|" << split_args.method;
            std::string hash = config_hash(canon.str());
            MeshDomain m = split_args.load_mesh();
            ProblemKind kind = parse_kind(split_kind);
            Spectrum spec = solve(m, kind, split_k, split_args.solve_options());
            Cluster cl = select_cluster(spec, split_cluster, split_size, split_tol_cluster);

            FindOptions fopts;
            fopts.n_candidates = split_candidates;
            fopts.seed = split_args.seed;
            auto [field, cd] = find_splitting(m, spec, cl, parse_side(split_side), split_eps, fopts);
            SplitReport rep = verify_split(m, field, cl, kind, parse_grid(split_grid), split_slope_tol,
                                           split_args.solve_options());

            fs::path dir = prepare_out_dir(split_args, "split", hash);
            Json j = split_report_to_json(rep);
            j["config"] = hash;
            j["seed"] = split_args.seed;
            j["score"] = cd.score;
            j["derivative"] = cluster_derivative_to_json(cd);
            write_file(dir / "split.json", j.dump(2) + "\n");
            write_file(dir / "branch_fan.svg", branch_fan_svg(rep, hash, split_args.seed));
            std::cout << "wrote " << (dir / "split.json").string() << "\n";
            std::cout << "score: " << cd.score << ", verdict: " << to_string(rep.verdict) << "\n";
            return 0;
        }

        if (*simp_cmd) {
            std::ostringstream canon;
            canon << "simplify|" << simp_args.domain << simp_args.mesh_file << "|r" << simp_args.refine_levels
                  << "|" << simp_kind << "|k" << simp_k << "|" << simp_side << "|eps" << simp_eps << "|n"
                  << simp_candidates << "|ts" << simp_tol_simple << "|it" << simp_maxit << "|seed"
                  << simp_args.seed << "|" << simp_args.method;
            std::string hash = config_hash(canon.str());
            MeshDomain m = simp_args.load_mesh();
            SimplifyOptions opts;
            opts.tol_simple = simp_tol_simple;
            opts.max_iterations = simp_maxit;
            opts.n_candidates = simp_candidates;
            opts.solve = simp_args.solve_options();
            SimplificationTrace tr = simplify_spectrum(m, parse_kind(simp_kind), simp_k, simp_eps,
                                                       parse_side(simp_side), simp_args.seed, opts);

            fs::path dir = prepare_out_dir(simp_args, "simplify", hash);
            Json j = trace_to_json(tr);
            j["config"] = hash;
            j["seed"] = simp_args.seed;
            write_file(dir / "trace.json", j.dump(2) + "\n");
            write_file(dir / "spectrum_before.csv", spectrum_to_csv(tr.initial_spectrum, hash, simp_args.seed));
            write_file(dir / "spectrum_after.csv", spectrum_to_csv(tr.final_spectrum, hash, simp_args.seed));
            for (size_t i = 0; i < tr.reports.size(); ++i)
                write_file(dir / ("branch_fan_step" + std::to_string(i + 1) + ".svg"),
                           branch_fan_svg(tr.reports[i], hash, simp_args.seed));
            std::cout << "wrote " << (dir / "trace.json").string() << "\n";
            std::cout << "status: " << to_string(tr.status) << ", steps: " << tr.steps.size()
                      << ", total amplitude: " << tr.total_amplitude << "\n";
            if (tr.status == TraceStatus::NoCandidate) {
                emit_error_record("no-candidate-found", tr.note);
                return 4;
            }
            return 0;
        }

        if (*val_cmd) {
            std::ostringstream canon;
            canon << "validate|" << val_args.domain << val_args.mesh_file << "|r" << val_args.refine_levels
                  << "|seed" << val_args.seed;
            std::string hash = config_hash(canon.str());
            if (val_args.domain.empty() == val_args.mesh_file.empty())
                throw InvalidArgument("exactly one of --domain and --mesh is required");
            MeshDomain m = val_args.domain.empty() ? read_mesh_file(val_args.mesh_file)
                                                   : build_domain(val_args.domain);
            for (int i = 0; i < val_args.refine_levels; ++i) m = refine(m);
            MeshDiagnostics diag = validate_mesh(m);

            Json j = diagnostics_to_json(diag);
            j["config"] = hash;
            j["seed"] = val_args.seed;
            j["label"] = m.label;
            j["vertices"] = m.num_vertices();
            j["triangles"] = m.num_triangles();
            j["boundary_edges"] = m.num_boundary_edges();
            j["interface_vertices"] = m.interface_vertices.size();
            j["boundary_length"] = checked(m.boundary_length());
            j["surface_length"] = m.has_tag(BoundaryTag::S) ? checked(m.boundary_length(BoundaryTag::S)) : 0.0;
            fs::path dir = prepare_out_dir(val_args, "validate", hash);
            write_file(dir / "validate.json", j.dump(2) + "\n");
            std::cout << diag.summary() << (diag.ok() ? "\n" : "");
            std::cout << "wrote " << (dir / "validate.json").string() << "\n";
            return diag.ok() ? 0 : 3;
        }
    } catch (const Error& e) {
        emit_error_record(code_name(e.code()), e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        emit_error_record("internal", e.what());
        return 3;
    }
    return 2;
}
