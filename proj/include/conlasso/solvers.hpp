#pragma once

#include "conlasso/prox.hpp"
#include "conlasso/types.hpp"

namespace conlasso {

// min over mu of max_j |v_j - (C^T mu)_j| / w_j, the dual reduction behind
// lambda_max. Exact for k <= 1 (midrange-style vertex solve); subgradient
// plus multilevel grid refinement for k >= 2.
struct ChebyshevMin {
  double value = 0.0;
  Vector mu;                  // k
  std::vector<Index> argmax;  // coords attaining the max at the optimum
};

ChebyshevMin weighted_chebyshev_min(const Vector& v, const Matrix& C, const Vector& w);

// gradient vector v defining lambda_max: 2 X^T y for regression kinds,
// minus the margin-loss gradient at beta = 0 for classification kinds
Vector lambda_max_gradient(const ProblemData& problem, const Formulation& formulation);

double compute_lambda_max(const ProblemData& problem, const Formulation& formulation);

// smallest lambda at which beta = 0 is optimal for the formulation itself
// (differs from compute_lambda_max for R2/R3/R4, whose loss gradients at
// zero are rescaled or clipped); paths start here
double lambda_zero_threshold(const ProblemData& problem, const Formulation& formulation);

// Stationarity certificate: minimizes over mu the max-norm violation of
// grad_loss + lambda w s + C^T mu with s a sign-consistent subgradient of
// the weighted l1 norm.
struct KktCertificate {
  double residual = 0.0;
  Vector mu;
};

KktCertificate kkt_certificate(const ProblemData& problem, const Formulation& formulation,
                               const Vector& beta, std::optional<double> sigma, double lambda);

// --- solvers ---

PathResult path_alg(const ProblemData& problem, const Formulation& formulation,
                    const SolverConfig& config);

// homotopy variant that stops once `max_entries` distinct features have
// entered; used by stability selection
PathResult path_alg_first_entries(const ProblemData& problem, const Formulation& formulation,
                                  const SolverConfig& config, int max_entries);

Solution path_alg_solve(const ProblemData& problem, const Formulation& formulation, double lambda,
                        const SolverConfig& config);

Solution douglas_rachford(const ProblemData& problem, const Formulation& formulation,
                          double lambda, const SolverConfig& config,
                          const Vector* warm_start = nullptr, Vector* state_out = nullptr);

Solution ppds(const ProblemData& problem, const Formulation& formulation, double lambda,
              const SolverConfig& config);

Solution pfpds(const ProblemData& problem, const Formulation& formulation, double lambda,
               const SolverConfig& config);

// independent verification route: proximal-subgradient descent with
// diminishing steps from beta = 0 (golden-section on sigma for R3/R4),
// followed by a guarded least-squares polish on the detected support;
// the best feasible iterate by objective is returned
Solution oracle_solve(const ProblemData& problem, const Formulation& formulation, double lambda,
                      long budget);

// dispatch on config.method with the compatibility table enforced
Solution solve_fixed(const ProblemData& problem, const Formulation& formulation, double lambda,
                     const SolverConfig& config);

// exact evaluation of a breakpoint path at an arbitrary lambda; clamps to
// beta = 0 above lambda_max and to the last point below the path's end
Vector path_beta_at(const PathResult& path, const ProblemData& problem,
                    const Formulation& formulation, double lambda);

}  // namespace conlasso
