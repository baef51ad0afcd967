#pragma once

#include "sloshlab/hadamard.hpp"
#include "sloshlab/mesh_io.hpp"
#include "sloshlab/spectral.hpp"
#include "sloshlab/splitting.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>
#include <string>

namespace sloshlab {

using Json = nlohmann::ordered_json;

/// Emitted numbers must be finite; anything else aborts the run.
inline double checked(double x) {
    if (!std::isfinite(x)) throw SingularSystem("refusing to emit a non-finite value");
    return x;
}

/// Coordinate-format text export, one "i j value" triple per stored entry.
inline void write_coo(std::ostream& os, const SpMat& m) {
    for (int col = 0; col < m.outerSize(); ++col)
        for (SpMat::InnerIterator it(m, col); it; ++it)
            os << it.row() << " " << it.col() << " " << format_double(checked(it.value())) << "\n";
}

inline std::string csv_header(const std::string& config_hash, std::uint64_t seed) {
    std::ostringstream os;
    os << "# config=" << config_hash << " seed=" << seed << "\n";
    return os.str();
}

/// Spectrum CSV: one "k, lambda, residual" row per eigenvalue, 1-based k.
inline std::string spectrum_to_csv(const Spectrum& spec, const std::string& config_hash,
                                   std::uint64_t seed) {
    std::ostringstream os;
    os << csv_header(config_hash, seed);
    os << "k,lambda,residual\n";
    for (int k = 0; k < spec.count(); ++k)
        os << (k + 1) << "," << format_double(checked(spec.lambda[k])) << ","
           << format_double(checked(spec.residuals.empty() ? 0.0 : spec.residuals[k])) << "\n";
    return os.str();
}

/// Companion eigenvector CSV: "k, vertex, value" rows.
inline std::string eigenvectors_to_csv(const Spectrum& spec, const std::string& config_hash,
                                       std::uint64_t seed) {
    std::ostringstream os;
    os << csv_header(config_hash, seed);
    os << "k,vertex,value\n";
    for (int k = 0; k < spec.count(); ++k)
        for (int v = 0; v < spec.eigenvectors.rows(); ++v)
            os << (k + 1) << "," << v << "," << format_double(checked(spec.eigenvectors(v, k))) << "\n";
    return os.str();
}

inline Json cluster_to_json(const Cluster& cl) {
    return Json{{"first", cl.first + 1},  // 1-based in exports
                {"size", cl.size},
                {"center", checked(cl.center)},
                {"rel_width", checked(cl.rel_width)}};
}

inline Json cluster_derivative_to_json(const ClusterDerivative& cd) {
    Json m = Json::array();
    for (int r = 0; r < cd.matrix.rows(); ++r) {
        Json row = Json::array();
        for (int c = 0; c < cd.matrix.cols(); ++c) row.push_back(checked(cd.matrix(r, c)));
        m.push_back(row);
    }
    Json j;
    j["cluster"] = cluster_to_json(cd.cluster);
    j["field"] = cd.field;
    j["matrix"] = m;
    j["asymmetry"] = checked(cd.asym);
    j["mu"] = checked(cd.mu);
    j["mu_slopes"] = cd.mu_slopes;
    j["lambda_slopes"] = cd.lambda_slopes;
    j["score"] = std::isnan(cd.score) ? Json() : Json(checked(cd.score));
    j["wide_cluster"] = cd.wide_cluster;
    return j;
}

/// Predicted-vs-measured slope table, one row per branch.
inline std::string slope_comparison_csv(const ClusterDerivative& cd, const FdSlopes& fd,
                                        const std::string& config_hash, std::uint64_t seed) {
    std::ostringstream os;
    os << csv_header(config_hash, seed);
    os << "branch,predicted_lambda_slope,fd_lambda_slope,fd_r2\n";
    for (size_t r = 0; r < cd.lambda_slopes.size(); ++r)
        os << (r + 1) << "," << format_double(checked(cd.lambda_slopes[r])) << ","
           << format_double(checked(fd.lambda_slopes[r])) << ","
           << format_double(checked(fd.lambda_r2[r])) << "\n";
    return os.str();
}

inline Json split_report_to_json(const SplitReport& rep) {
    Json j;
    j["cluster"] = cluster_to_json(rep.cluster);
    j["field"] = rep.field;
    j["t_grid"] = rep.t_grid;
    j["lambda_paths"] = rep.lambda_paths;
    j["pair_gaps"] = rep.pair_gaps;
    j["pair_slopes"] = rep.pair_slopes;
    j["pair_r2"] = rep.pair_r2;
    j["spread_slope"] = checked(rep.spread_slope);
    j["spread_r2"] = checked(rep.spread_r2);
    j["predicted_spread"] = checked(rep.predicted_spread);
    j["slope_rel_error"] = checked(rep.slope_rel_error);
    j["slope_tol"] = rep.slope_tol;
    j["verdict"] = to_string(rep.verdict);
    return j;
}

inline Json trace_to_json(const SimplificationTrace& tr) {
    Json steps = Json::array();
    for (const auto& s : tr.steps) {
        steps.push_back(Json{{"iteration", s.iteration},
                             {"eps_budget", checked(s.eps_budget)},
                             {"cluster", cluster_to_json(s.cluster)},
                             {"field", s.field},
                             {"score", checked(s.score)},
                             {"verdict", to_string(s.verdict)},
                             {"t_applied", checked(s.t_applied)},
                             {"amplitude_spent", checked(s.amplitude_spent)},
                             {"clustered_before", s.clustered_before},
                             {"clustered_after", s.clustered_after},
                             {"min_rel_gap_before", checked(s.min_rel_gap_before)},
                             {"min_rel_gap_after", checked(s.min_rel_gap_after)}});
    }
    Json j;
    j["kind"] = to_string(tr.kind);
    j["count"] = tr.count;
    j["eps_initial"] = checked(tr.eps_initial);
    j["side"] = to_string(tr.side);
    j["seed"] = tr.seed;
    j["status"] = to_string(tr.status);
    j["note"] = tr.note;
    j["steps"] = steps;
    j["total_amplitude"] = checked(tr.total_amplitude);
    j["lambda_before"] = tr.initial_spectrum.lambda;
    j["lambda_after"] = tr.final_spectrum.lambda;
    return j;
}

inline Json diagnostics_to_json(const MeshDiagnostics& diag) {
    Json j;
    j["ok"] = diag.ok();
    j["issues"] = diag.issues;
    return j;
}

/// Branch-fan plot: lambda_k(t) polylines over the amplitude grid.  Static
/// figure, no timestamps, byte-stable for a fixed report.
inline std::string branch_fan_svg(const SplitReport& rep, const std::string& config_hash,
                                  std::uint64_t seed) {
    const double width = 640, height = 480;
    const double ml = 70, mr = 20, mt = 30, mb = 50;
    double tmin = rep.t_grid.front(), tmax = rep.t_grid.back();
    double ymin = 1e300, ymax = -1e300;
    for (const auto& path : rep.lambda_paths)
        for (double y : path) {
            checked(y);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (!(ymax > ymin)) {
        ymax += 1e-12;
        ymin -= 1e-12;
    }
    auto xmap = [&](double t) { return ml + (t - tmin) / (tmax - tmin) * (width - ml - mr); };
    auto ymap = [&](double y) { return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb); };
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6g", v);
        return std::string(buf);
    };

    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "<!-- config=" << config_hash << " seed=" << seed << " -->\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr << "\" y2=\""
       << height - mb << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << height - mb
       << "\" stroke=\"black\"/>\n";
    for (size_t b = 0; b < rep.lambda_paths.size(); ++b) {
        os << "<polyline fill=\"none\" stroke=\"" << colors[b % 6] << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < rep.t_grid.size(); ++i) {
            os << fmt(xmap(rep.t_grid[i])) << "," << fmt(ymap(rep.lambda_paths[b][i]));
            if (i + 1 < rep.t_grid.size()) os << " ";
        }
        os << "\"/>\n";
    }
    os << "<text x=\"" << (width / 2) << "\" y=\"" << (height - 12)
       << "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">amplitude t</text>\n";
    os << "<text x=\"16\" y=\"" << (height / 2)
       << "\" font-family=\"monospace\" font-size=\"12\" transform=\"rotate(-90 16 " << (height / 2)
       << ")\" text-anchor=\"middle\">lambda</text>\n";
    os << "<text x=\"" << ml << "\" y=\"" << (mt - 10) << "\" font-family=\"monospace\" font-size=\"11\">"
       << "branch fan: " << to_string(rep.verdict) << ", spread slope " << fmt(rep.spread_slope)
       << "</text>\n";
    os << "<text x=\"" << (ml - 6) << "\" y=\"" << (height - mb + 14)
       << "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">" << fmt(tmin) << "</text>\n";
    os << "<text x=\"" << (width - mr) << "\" y=\"" << (height - mb + 14)
       << "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">" << fmt(tmax) << "</text>\n";
    os << "<text x=\"" << (ml - 8) << "\" y=\"" << ymap(ymin)
       << "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">" << fmt(ymin) << "</text>\n";
    os << "<text x=\"" << (ml - 8) << "\" y=\"" << (ymap(ymax) + 10)
       << "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">" << fmt(ymax) << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace sloshlab
