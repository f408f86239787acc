#include "conlasso/losses.hpp"
#include "conlasso/solvers.hpp"

#include <Eigen/Cholesky>

#include <chrono>
#include <cmath>

namespace conlasso {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Product-space Douglas-Rachford over m copies of the variable: each block
// holds one proximable term, the consensus is their mean, relaxation 1.
//
// R1 (and augmented R2) blocks: least squares, weighted l1, null(C).
// R3 (and augmented R4) blocks work on (z, r, sigma) with the residual
// split out so the perspective prox applies to (sigma, r) directly:
// perspective-of-LS plus c_sigma * sigma, weighted l1 on z, and the
// affine set {C z = 0, r = X z - y}.

struct DrLeastSquares {
  const ProblemData* prob;
  Vector tau;  // per-coordinate l1 threshold at unit gamma
  double gamma;
  Eigen::LLT<Matrix> ls_factor;   // I + 2 gamma X^T X
  Vector ls_shift;                // 2 gamma X^T y
  ConstraintProjector projector;

  Index dim() const { return prob->d(); }

  void init(const ProblemData& p, const Vector& tau_in, double g) {
    prob = &p;
    tau = tau_in;
    gamma = g;
    Matrix A = Matrix::Identity(p.d(), p.d()) + 2.0 * g * (p.X.transpose() * p.X);
    ls_factor.compute(A);
    ls_shift = 2.0 * g * (p.X.transpose() * p.y);
    projector = ConstraintProjector(p.C, p.d());
  }

  Vector prox_block(int which, const Vector& v) const {
    switch (which) {
      case 0:
        return ls_factor.solve(v + ls_shift);
      case 1:
        return soft_threshold(v, Vector(gamma * tau));
      default:
        return projector.project(v);
    }
  }
};

Solution dr_quadratic(const ProblemData& problem, const Formulation& formulation,
                      const ProblemData& work, const Vector& tau, double lambda,
                      const SolverConfig& config, const Vector* warm, Vector* state_out) {
  const auto t0 = Clock::now();
  const Index D = work.d();
  const double L2 = spectral_norm_sq(work.X);
  const double gamma = 1.0 / std::sqrt(L2 + 1e-12);

  DrLeastSquares ops;
  ops.init(work, tau, gamma);

  Matrix Z = Matrix::Zero(D, 3);
  if (warm && warm->size() == 3 * D)
    for (int b = 0; b < 3; ++b) Z.col(b) = warm->segment(b * D, D);

  Vector xbar = (Z.col(0) + Z.col(1) + Z.col(2)) / 3.0;
  double change = std::numeric_limits<double>::infinity();
  long it = 0;
  for (; it < config.max_iter; ++it) {
    change = 0.0;
    Vector xbar_new = Vector::Zero(D);
    for (int b = 0; b < 3; ++b) {
      Vector p = ops.prox_block(b, 2.0 * xbar - Z.col(b));
      Vector znew = Z.col(b) + p - xbar;
      change = std::max(change, (znew - Z.col(b)).cwiseAbs().maxCoeff());
      Z.col(b) = znew;
      xbar_new += znew;
    }
    xbar = xbar_new / 3.0;
    if (change <= config.tol) {
      ++it;
      break;
    }
  }
  if (state_out) {
    state_out->resize(3 * D);
    for (int b = 0; b < 3; ++b) state_out->segment(b * D, D) = Z.col(b);
  }

  Vector z = ops.projector.project(xbar);
  Solution sol;
  sol.beta = z.head(problem.d());
  sol.lambda = lambda;
  sol.sigma = optimal_sigma(problem, formulation, sol.beta);
  sol.objective = objective_value(problem, formulation, sol.beta, sol.sigma, lambda);
  sol.diagnostics.solver = "dr";
  sol.diagnostics.iterations = it;
  sol.diagnostics.iterate_change = change;
  sol.diagnostics.converged = change <= config.tol;
  sol.diagnostics.feasibility =
      problem.k() > 0 ? (problem.C * sol.beta).cwiseAbs().maxCoeff() : 0.0;
  KktCertificate cert = kkt_certificate(problem, formulation, sol.beta, sol.sigma, lambda);
  sol.diagnostics.kkt_residual = cert.residual;
  sol.dual_mu = cert.mu;
  sol.diagnostics.wall_seconds = seconds_since(t0);
  return sol;
}

Solution dr_concomitant(const ProblemData& problem, const Formulation& formulation,
                        const ProblemData& work, const Vector& tau, double c_sigma, double lambda,
                        const SolverConfig& config, const Vector* warm, Vector* state_out) {
  const auto t0 = Clock::now();
  const Index D = work.d(), n = work.n();
  const Index S = D + n + 1;  // (z, r, sigma) stacked

  ConstraintProjector projector(work.C, D);
  const Matrix& N = projector.null_basis();
  Matrix XN = work.X * N;
  Eigen::LLT<Matrix> aff(Matrix(Matrix::Identity(N.cols(), N.cols()) + XN.transpose() * XN));

  const double sigma0 = std::max(concomitant_sigma(work.y, n), 1e-12);
  const double gamma = sigma0 / (2.0 * c_sigma);

  auto prox_block = [&](int which, const Vector& v) -> Vector {
    Vector out = v;
    if (which == 0) {
      PerspectiveProx pp =
          prox_perspective_sq(v[D + n] - gamma * c_sigma, v.segment(D, n), gamma);
      out.segment(D, n) = pp.p;
      out[D + n] = pp.sigma;
    } else if (which == 1) {
      out.head(D) = soft_threshold(v.head(D), Vector(gamma * tau));
    } else {
      Vector rhs = N.transpose() * v.head(D) + XN.transpose() * (work.y + v.segment(D, n));
      Vector wv = aff.solve(rhs);
      out.head(D) = N * wv;
      out.segment(D, n) = XN * wv - work.y;
    }
    return out;
  };

  Matrix Z = Matrix::Zero(S, 3);
  if (warm && warm->size() == 3 * S)
    for (int b = 0; b < 3; ++b) Z.col(b) = warm->segment(b * S, S);
  else
    for (int b = 0; b < 3; ++b) {
      Z.col(b).segment(D, n) = -work.y;
      Z.col(b)[D + n] = sigma0;
    }

  Vector xbar = (Z.col(0) + Z.col(1) + Z.col(2)) / 3.0;
  double change = std::numeric_limits<double>::infinity();
  long it = 0;
  for (; it < config.max_iter; ++it) {
    change = 0.0;
    Vector xbar_new = Vector::Zero(S);
    for (int b = 0; b < 3; ++b) {
      Vector p = prox_block(b, 2.0 * xbar - Z.col(b));
      Vector znew = Z.col(b) + p - xbar;
      change = std::max(change, (znew - Z.col(b)).cwiseAbs().maxCoeff());
      Z.col(b) = znew;
      xbar_new += znew;
    }
    xbar = xbar_new / 3.0;
    if (change <= config.tol) {
      ++it;
      break;
    }
  }
  if (state_out) {
    state_out->resize(3 * S);
    for (int b = 0; b < 3; ++b) state_out->segment(b * S, S) = Z.col(b);
  }

  Vector z = projector.project(xbar.head(D));
  Solution sol;
  sol.beta = z.head(problem.d());
  sol.lambda = lambda;
  sol.sigma = optimal_sigma(problem, formulation, sol.beta);
  sol.objective = objective_value(problem, formulation, sol.beta, sol.sigma, lambda);
  sol.diagnostics.solver = "dr";
  sol.diagnostics.iterations = it;
  sol.diagnostics.iterate_change = change;
  sol.diagnostics.converged = change <= config.tol;
  sol.diagnostics.feasibility =
      problem.k() > 0 ? (problem.C * sol.beta).cwiseAbs().maxCoeff() : 0.0;
  KktCertificate cert = kkt_certificate(problem, formulation, sol.beta, sol.sigma, lambda);
  sol.diagnostics.kkt_residual = cert.residual;
  sol.dual_mu = cert.mu;
  sol.diagnostics.wall_seconds = seconds_since(t0);
  return sol;
}

}  // namespace

Solution douglas_rachford(const ProblemData& problem, const Formulation& formulation,
                          double lambda, const SolverConfig& config, const Vector* warm_start,
                          Vector* state_out) {
  validate(problem, formulation);
  if (!method_legal(formulation.kind, SolverMethod::DR))
    throw Error(ErrorCode::IncompatibleMethod,
                std::string("dr does not support ") + to_string(formulation.kind));
  if (lambda < 0) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");

  switch (formulation.kind) {
    case FormulationKind::R1: {
      Vector tau = lambda * problem.weights;
      return dr_quadratic(problem, formulation, problem, tau, lambda, config, warm_start,
                          state_out);
    }
    case FormulationKind::R2: {
      if (lambda <= 0.0) {
        // no augmentation at lambda = 0; the huber fit reduces to the
        // unpenalized augmented least squares all the same
        AugmentedProblem aug = mean_shift_augment(problem, formulation, 1.0);
        Vector tau = Vector::Zero(aug.data.d());
        tau.tail(problem.n()).setConstant(2.0 * formulation.rho);
        return dr_quadratic(problem, formulation, aug.data, tau, lambda, config, warm_start,
                            state_out);
      }
      AugmentedProblem aug = mean_shift_augment(problem, formulation, lambda);
      Vector tau = lambda * aug.data.weights;
      return dr_quadratic(problem, formulation, aug.data, tau, lambda, config, warm_start,
                          state_out);
    }
    case FormulationKind::R3: {
      Vector tau = lambda * problem.weights;
      return dr_concomitant(problem, formulation, problem, tau, 0.5 * double(problem.n()), lambda,
                            config, warm_start, state_out);
    }
    case FormulationKind::R4: {
      const double lam_eff = lambda > 0.0 ? lambda : 1.0;
      AugmentedProblem aug = mean_shift_augment(problem, formulation, lam_eff);
      Vector tau = lam_eff * aug.data.weights;
      if (lambda <= 0.0) tau.head(problem.d()).setZero();
      return dr_concomitant(problem, formulation, aug.data, tau, double(problem.n()), lambda,
                            config, warm_start, state_out);
    }
    default:
      throw Error(ErrorCode::IncompatibleMethod, "dr does not support classification kinds");
  }
}

}  // namespace conlasso
