#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace conlasso {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class FormulationKind { R1, R2, R3, R4, C1, C2 };

inline bool is_classification(FormulationKind k) {
  return k == FormulationKind::C1 || k == FormulationKind::C2;
}
inline bool is_concomitant(FormulationKind k) {
  return k == FormulationKind::R3 || k == FormulationKind::R4;
}
inline bool is_huber(FormulationKind k) {
  return k == FormulationKind::R2 || k == FormulationKind::R4;
}

const char* to_string(FormulationKind k);
std::optional<FormulationKind> formulation_from_string(std::string_view s);

// Which loss and which solvers are legal is decided by the kind; rho is
// the Huber threshold (R2/R4), rho_class the huberization knee (C2).
struct Formulation {
  FormulationKind kind = FormulationKind::R1;
  double rho = 1.345;
  double rho_class = -1.0;
};

enum class ErrorCode {
  Ok = 0,
  InvalidArgument,
  DimensionMismatch,
  NonFinite,
  BadLabels,
  BadWeights,
  IncompatibleMethod,
  MaxIterExceeded,
  MaxBreakpointsExceeded,
  DegeneratePath,
  FoldTooSmall,
  SubsampleTooSmall,
  Io,
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Immutable estimation input. k may be 0 (unconstrained); weights default
// to all ones and scale the l1 penalty per feature.
struct ProblemData {
  Matrix X;        // n x d
  Vector y;        // n
  Matrix C;        // k x d
  Vector weights;  // d, strictly positive

  Index n() const { return X.rows(); }
  Index d() const { return X.cols(); }
  Index k() const { return C.rows(); }

  static ProblemData make(Matrix X, Vector y, Matrix C = Matrix(), Vector weights = Vector());
};

struct SolverDiagnostics {
  std::string solver;
  long iterations = 0;
  double iterate_change = std::numeric_limits<double>::quiet_NaN();
  double feasibility = 0.0;  // ||C beta||_inf at return
  double kkt_residual = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
  bool converged = true;
};

struct Solution {
  Vector beta;
  std::optional<double> sigma;     // present iff R3/R4
  std::optional<Vector> dual_mu;   // multiplier for C beta = 0
  double lambda = 0.0;
  double objective = 0.0;
  SolverDiagnostics diagnostics;
};

enum class SolverMethod { PathAlg, DR, PPDS, PFPDS, Oracle };

const char* to_string(SolverMethod m);
std::optional<SolverMethod> method_from_string(std::string_view s);

bool method_legal(FormulationKind kind, SolverMethod m);

struct SolverConfig {
  SolverMethod method = SolverMethod::PathAlg;
  long max_iter = 100000;
  double tol = 1e-8;
  double path_lambda_min_ratio = 1e-2;
};

enum class PathKind { Breakpoints, Grid };

struct PathResult {
  PathKind kind = PathKind::Breakpoints;
  std::vector<double> lambdas;  // strictly decreasing, starts at lambda_max
  Matrix betas;                 // d x lambdas.size(), one column per point
  std::vector<double> sigmas;   // nonempty iff concomitant formulation
  double lambda_max = 0.0;
  // internal parameter of each point when the path is traced in a
  // different coordinate than lambda (the concomitant reparametrization);
  // equal to lambdas otherwise
  std::vector<double> aux_param;
  std::vector<Index> entry_order;  // features in order of first activation
  long num_events = 0;
  bool truncated = false;  // hit a singular active system before lambda_min
  SolverDiagnostics diagnostics;

  Index num_points() const { return static_cast<Index>(lambdas.size()); }
};

enum class CVRule { MinMSE, OneSE };

struct CVResult {
  std::vector<double> lambdas;  // decreasing grid
  std::vector<double> mean_error;
  std::vector<double> std_error;
  std::vector<double> zero_one_error;  // classification only, else empty
  double lambda_min = 0.0;
  double lambda_1se = 0.0;
  CVRule rule = CVRule::MinMSE;
  Solution refit;
  std::uint64_t seed = 0;
  int folds = 0;
};

enum class StabSelMode { FixedLam, FirstQ, MaxCoef };

const char* to_string(StabSelMode m);
std::optional<StabSelMode> stabsel_mode_from_string(std::string_view s);

struct StabSelResult {
  Vector frequency;  // d, in [0,1]
  double threshold = 0.7;
  std::vector<Index> selected;
  std::vector<std::vector<Index>> per_subsample;  // audit trail
  StabSelMode mode = StabSelMode::FirstQ;
  double lambda = std::numeric_limits<double>::quiet_NaN();  // FixedLam only
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

struct FixedLambdaPlan {
  double lam = 0.1;
  bool rescaled = true;  // lam is the proportion l, lambda = l * lambda_max
  bool theory = false;   // use the scale-dependent tuning value instead
};

struct PathPlan {
  double lambda_min_ratio = 1e-2;
  int num_grid = 40;  // grid size when the formulation has no exact path
};

struct CVPlan {
  int folds = 5;
  int grid_size = 80;
  CVRule rule = CVRule::MinMSE;
  std::uint64_t seed = 0;
  double lambda_min_ratio = 1e-2;
};

struct StabSelPlan {
  StabSelMode mode = StabSelMode::FirstQ;
  int q = 10;
  int B = 50;
  double subsample_fraction = 0.5;
  double threshold = 0.7;
  std::uint64_t seed = 0;
  double lam = 0.1;  // FixedLam mode
  bool rescaled = true;
  double lambda_min_ratio = 1e-2;
};

struct ModelSelectionPlan {
  std::optional<FixedLambdaPlan> fixed;
  std::optional<PathPlan> path;
  std::optional<CVPlan> cv;
  std::optional<StabSelPlan> stabsel;

  bool any() const { return fixed || path || cv || stabsel; }
};

}  // namespace conlasso
