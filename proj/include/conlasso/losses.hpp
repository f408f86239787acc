#pragma once

#include "conlasso/types.hpp"

namespace conlasso {

// Throws Error collecting every violated invariant in the message.
void validate(const ProblemData& problem, const Formulation& formulation);

// sum of phi(r_i), phi(t) = t^2 for |t| <= rho, 2*rho*|t| - rho^2 beyond;
// the quadratic branch carries no 1/2 factor so the rho -> inf limit is
// the plain squared norm
double huber_value(const Eigen::Ref<const Vector>& r, double rho);

// derivative of huber_value: 2r clipped to +-2rho componentwise
Vector huber_gradient(const Eigen::Ref<const Vector>& r, double rho);

// sum of l(m_i), l(r) = (1-r)^2 for r <= 1, 0 for r >= 1
double squared_hinge_value(const Eigen::Ref<const Vector>& margins);

// sum of l_rho(m_i):
//   (1-r)^2            for rho <= r <= 1
//   (1-rho)(1+rho-2r)  for r <= rho
//   0                  for r >= 1
double huberized_hinge_value(const Eigen::Ref<const Vector>& margins, double rho_class);

// margin-loss derivative at a single margin value
double squared_hinge_derivative(double m);
double huberized_hinge_derivative(double m, double rho_class);

// data-fit part of the objective (no penalty); sigma required for R3/R4
double loss_value(const ProblemData& problem, const Formulation& formulation,
                  const Vector& beta, std::optional<double> sigma);

// gradient of loss_value in beta at fixed sigma
Vector loss_gradient(const ProblemData& problem, const Formulation& formulation,
                     const Vector& beta, std::optional<double> sigma);

double penalty_value(const ProblemData& problem, double lambda, const Vector& beta);

// full objective; never checks C beta = 0 (feasibility is a side condition)
double objective_value(const ProblemData& problem, const Formulation& formulation,
                       const Vector& beta, std::optional<double> sigma, double lambda);

// argmin over sigma > 0 of ||r||^2/sigma + (n/2) sigma, i.e. sqrt(2/n)*||r||
double concomitant_sigma(const Eigen::Ref<const Vector>& residual, Index n);

// argmin over sigma >= 0 of (h_rho(r/sigma) + n) sigma, solved exactly by
// scanning the |r_i|/rho breakpoints of the piecewise-smooth objective
double concomitant_sigma_huber(const Eigen::Ref<const Vector>& residual, double rho, Index n);

// sigma-part minimized out at fixed beta (R3/R4); identity for the rest
std::optional<double> optimal_sigma(const ProblemData& problem, const Formulation& formulation,
                                    const Vector& beta);

}  // namespace conlasso
