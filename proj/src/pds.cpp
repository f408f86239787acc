#include "conlasso/losses.hpp"
#include "conlasso/solvers.hpp"

#include <chrono>
#include <cmath>

namespace conlasso {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Vector smooth_gradient(const ProblemData& p, const Formulation& f, const Vector& beta) {
  Vector r = p.X * beta - p.y;
  if (f.kind == FormulationKind::R2) return p.X.transpose() * huber_gradient(r, f.rho);
  return 2.0 * (p.X.transpose() * r);
}

void finish(Solution& sol, const ProblemData& problem, const Formulation& formulation,
            double lambda, Clock::time_point t0) {
  sol.lambda = lambda;
  sol.sigma = optimal_sigma(problem, formulation, sol.beta);
  sol.objective = objective_value(problem, formulation, sol.beta, sol.sigma, lambda);
  sol.diagnostics.feasibility =
      problem.k() > 0 ? (problem.C * sol.beta).cwiseAbs().maxCoeff() : 0.0;
  KktCertificate cert = kkt_certificate(problem, formulation, sol.beta, sol.sigma, lambda);
  sol.diagnostics.kkt_residual = cert.residual;
  sol.dual_mu = cert.mu;
  sol.diagnostics.wall_seconds = seconds_since(t0);
}

}  // namespace

// Three-operator splitting with the subspace handled by projection: the
// shadow point is projected onto null(C), the smooth loss enters by a
// forward step at the projected point, the l1 term by its prox. With k = 0
// the projector is the identity and the recursion is exactly proximal
// gradient descent on the shadow sequence.
Solution ppds(const ProblemData& problem, const Formulation& formulation, double lambda,
              const SolverConfig& config) {
  const auto t0 = Clock::now();
  validate(problem, formulation);
  if (!method_legal(formulation.kind, SolverMethod::PPDS))
    throw Error(ErrorCode::IncompatibleMethod,
                std::string("p-pds does not support ") + to_string(formulation.kind));
  if (lambda < 0) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");

  const Index d = problem.d();
  const double L = 2.0 * spectral_norm_sq(problem.X);
  const double tau = 0.9 / std::max(L, 1e-12);
  const Vector thresh = tau * lambda * problem.weights;
  ConstraintProjector proj(problem.C, d);

  Vector w = Vector::Zero(d);
  double change = std::numeric_limits<double>::infinity();
  long it = 0;
  Vector xh = proj.project(w);
  for (; it < config.max_iter; ++it) {
    Vector grad = smooth_gradient(problem, formulation, xh);
    Vector xg = soft_threshold(2.0 * xh - w - tau * grad, thresh);
    Vector w_new = w + xg - xh;
    change = (w_new - w).cwiseAbs().maxCoeff();
    w = w_new;
    xh = proj.project(w);
    if (change <= config.tol) {
      ++it;
      break;
    }
  }

  Solution sol;
  sol.beta = xh;
  sol.diagnostics.solver = "p-pds";
  sol.diagnostics.iterations = it;
  sol.diagnostics.iterate_change = change;
  sol.diagnostics.converged = change <= config.tol;
  finish(sol, problem, formulation, lambda, t0);
  return sol;
}

// Forward-backward-forward iterations on the primal-dual inclusion; the
// equality constraint acts through its multiplier only, so no projection
// is ever applied. With k = 0 the dual variable stays put and the scheme
// is Tseng's FBF on the smooth-plus-l1 problem.
Solution pfpds(const ProblemData& problem, const Formulation& formulation, double lambda,
               const SolverConfig& config) {
  const auto t0 = Clock::now();
  validate(problem, formulation);
  if (!method_legal(formulation.kind, SolverMethod::PFPDS))
    throw Error(ErrorCode::IncompatibleMethod,
                std::string("pf-pds does not support ") + to_string(formulation.kind));
  if (lambda < 0) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");

  const Index d = problem.d(), k = problem.k();
  const double L = 2.0 * spectral_norm_sq(problem.X);
  const double Cnorm = k > 0 ? std::sqrt(spectral_norm_sq(problem.C)) : 0.0;
  const double gamma = 0.9 / (L + Cnorm + 1e-12);
  const Vector thresh = gamma * lambda * problem.weights;

  Vector x = Vector::Zero(d);
  Vector v = Vector::Zero(k);
  double change = std::numeric_limits<double>::infinity();
  double feas = 0.0;
  long it = 0;
  for (; it < config.max_iter; ++it) {
    Vector bx = smooth_gradient(problem, formulation, x);
    if (k > 0) bx += problem.C.transpose() * v;
    Vector xbar = soft_threshold(x - gamma * bx, thresh);
    Vector vbar = k > 0 ? Vector(v + gamma * (problem.C * x)) : v;

    Vector bxbar = smooth_gradient(problem, formulation, xbar);
    if (k > 0) bxbar += problem.C.transpose() * vbar;
    Vector x_new = xbar - gamma * (bxbar - bx);
    Vector v_new = k > 0 ? Vector(vbar + gamma * (problem.C * (xbar - x))) : vbar;

    change = (x_new - x).cwiseAbs().maxCoeff();
    if (k > 0) change = std::max(change, (v_new - v).cwiseAbs().maxCoeff());
    x = x_new;
    v = v_new;
    feas = k > 0 ? (problem.C * x).cwiseAbs().maxCoeff() : 0.0;
    if (change <= config.tol && feas <= 1e-6 * (1.0 + x.cwiseAbs().maxCoeff())) {
      ++it;
      break;
    }
  }

  Solution sol;
  sol.beta = x;
  sol.diagnostics.solver = "pf-pds";
  sol.diagnostics.iterations = it;
  sol.diagnostics.iterate_change = change;
  sol.diagnostics.converged =
      change <= config.tol && feas <= 1e-6 * (1.0 + x.cwiseAbs().maxCoeff());
  finish(sol, problem, formulation, lambda, t0);
  sol.diagnostics.feasibility = feas;
  return sol;
}

Solution solve_fixed(const ProblemData& problem, const Formulation& formulation, double lambda,
                     const SolverConfig& config) {
  if (!method_legal(formulation.kind, config.method))
    throw Error(ErrorCode::IncompatibleMethod,
                std::string(to_string(config.method)) + " does not support " +
                    to_string(formulation.kind) + " (see the scheme compatibility table)");
  switch (config.method) {
    case SolverMethod::PathAlg:
      return path_alg_solve(problem, formulation, lambda, config);
    case SolverMethod::DR:
      return douglas_rachford(problem, formulation, lambda, config);
    case SolverMethod::PPDS:
      return ppds(problem, formulation, lambda, config);
    case SolverMethod::PFPDS:
      return pfpds(problem, formulation, lambda, config);
    case SolverMethod::Oracle:
      return oracle_solve(problem, formulation, lambda, 20000);
  }
  throw Error(ErrorCode::Internal, "unknown method");
}

}  // namespace conlasso
