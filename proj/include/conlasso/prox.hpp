#pragma once

#include "conlasso/types.hpp"

#include <utility>

namespace conlasso {

// componentwise sign(v_j) * max(|v_j| - tau_j, 0)
Vector soft_threshold(const Eigen::Ref<const Vector>& v, double tau);
Vector soft_threshold(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& tau);

// Orthogonal projector onto null(C) with pseudo-inverse semantics, valid
// for rank-deficient and duplicated constraint rows. Immutable, shareable.
class ConstraintProjector {
 public:
  ConstraintProjector() = default;
  ConstraintProjector(const Matrix& C, Index d);

  Index dim() const { return d_; }
  Index rank() const { return rank_; }

  Vector project(const Eigen::Ref<const Vector>& v) const;

  // d x (d - rank) orthonormal basis of null(C); identity when k = 0
  const Matrix& null_basis() const { return null_basis_; }

 private:
  Index d_ = 0;
  Index rank_ = 0;
  Matrix row_basis_;   // d x rank, orthonormal basis of the row space
  Matrix null_basis_;  // d x (d - rank)
};

struct PerspectiveProx {
  double sigma = 0.0;
  Vector p;
};

// Proximal point of gamma * P at (eta, u), where P(sigma, x) = ||x||^2/sigma
// for sigma > 0, P(0,0) = 0, +inf otherwise. Returns (0, 0) iff
// eta + ||u||^2/(4 gamma) <= 0; otherwise sigma is the unique root of
// (sigma - eta)(sigma + 2 gamma)^2 = gamma ||u||^2 above max(eta, 0) and
// p = u * sigma / (sigma + 2 gamma).
PerspectiveProx prox_perspective_sq(double eta, const Eigen::Ref<const Vector>& u, double gamma);

// Huber problems restated as a least-squares lasso in (beta, o) with design
// [X | I]: the l1 weight on the shift block is 2 rho / lambda so that the
// lambda-scaled augmented penalty equals lambda ||beta||_1,w + 2 rho ||o||_1.
struct AugmentedProblem {
  ProblemData data;  // X_aug = [X | I], C_aug = [C | 0], weights_aug
  Index d_orig = 0;
  Index n = 0;
  double lambda = 0.0;
  double rho = 0.0;

  Vector beta_part(const Vector& z) const { return z.head(d_orig); }
  Vector shift_part(const Vector& z) const { return z.tail(n); }
};

AugmentedProblem mean_shift_augment(const ProblemData& problem, const Formulation& formulation,
                                    double lambda);

// ||X||_op^2 via power iteration on X^T X with a fixed deterministic start;
// the optional history records the Rayleigh quotient sequence
double spectral_norm_sq(const Matrix& X, std::vector<double>* history = nullptr);

}  // namespace conlasso
