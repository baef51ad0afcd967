#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <stdexcept>
#include <string>

namespace sloshlab {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Failure classes surfaced by the library.  The CLI maps these to exit codes:
/// usage/config errors -> 2, numerical failures -> 3, no-candidate-found -> 4.
enum class ErrorCode {
    InvalidArgument,
    InvalidSupport,
    UnsupportedOperation,
    UndefinedForSimple,
    InvalidCase,
    AmplitudeTooLarge,
    MeshFolded,
    SingularSystem,
    TrackingFailure,
    NoCandidateFound,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& w) : Error(ErrorCode::InvalidArgument, w) {}
};
struct InvalidSupport : Error {
    explicit InvalidSupport(const std::string& w) : Error(ErrorCode::InvalidSupport, w) {}
};
struct UnsupportedOperation : Error {
    explicit UnsupportedOperation(const std::string& w) : Error(ErrorCode::UnsupportedOperation, w) {}
};
struct UndefinedForSimple : Error {
    explicit UndefinedForSimple(const std::string& w) : Error(ErrorCode::UndefinedForSimple, w) {}
};
struct InvalidCase : Error {
    explicit InvalidCase(const std::string& w) : Error(ErrorCode::InvalidCase, w) {}
};
struct AmplitudeTooLarge : Error {
    explicit AmplitudeTooLarge(const std::string& w) : Error(ErrorCode::AmplitudeTooLarge, w) {}
};
struct MeshFolded : Error {
    explicit MeshFolded(const std::string& w) : Error(ErrorCode::MeshFolded, w) {}
};
struct SingularSystem : Error {
    explicit SingularSystem(const std::string& w) : Error(ErrorCode::SingularSystem, w) {}
};

/// Eigenvalue branch tracking lost the cluster at some amplitude.
struct TrackingFailure : Error {
    TrackingFailure(double t, const std::string& w) : Error(ErrorCode::TrackingFailure, w), t(t) {}
    double t;
};

/// Candidate search exhausted its family; carries the best score seen.
struct NoCandidateFound : Error {
    NoCandidateFound(double best, const std::string& w)
        : Error(ErrorCode::NoCandidateFound, w), best_score(best) {}
    double best_score;
};

}  // namespace sloshlab
