#include "conlasso/prox.hpp"

#include "conlasso/rng.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace conlasso {

Vector soft_threshold(const Eigen::Ref<const Vector>& v, double tau) {
  if (tau < 0.0) throw Error(ErrorCode::InvalidArgument, "soft_threshold: tau must be >= 0");
  Vector out(v.size());
  for (Index j = 0; j < v.size(); ++j) {
    const double a = std::abs(v[j]) - tau;
    out[j] = a > 0.0 ? (v[j] > 0 ? a : -a) : 0.0;
  }
  return out;
}

Vector soft_threshold(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& tau) {
  if (v.size() != tau.size())
    throw Error(ErrorCode::DimensionMismatch, "soft_threshold: tau size mismatch");
  Vector out(v.size());
  for (Index j = 0; j < v.size(); ++j) {
    if (tau[j] < 0.0) throw Error(ErrorCode::InvalidArgument, "soft_threshold: tau must be >= 0");
    const double a = std::abs(v[j]) - tau[j];
    out[j] = a > 0.0 ? (v[j] > 0 ? a : -a) : 0.0;
  }
  return out;
}

ConstraintProjector::ConstraintProjector(const Matrix& C, Index d) : d_(d) {
  if (C.size() > 0 && C.cols() != d)
    throw Error(ErrorCode::DimensionMismatch, "constraint matrix has wrong column count");
  if (C.rows() == 0) {
    rank_ = 0;
    row_basis_ = Matrix(d, 0);
    null_basis_ = Matrix::Identity(d, d);
    return;
  }
  Eigen::JacobiSVD<Matrix> svd(C, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double drop = 1e-10 * (sv.size() > 0 ? sv[0] : 0.0);
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv[i] > drop) ++r;
  rank_ = r;
  row_basis_ = svd.matrixV().leftCols(r);
  null_basis_ = svd.matrixV().rightCols(d - r);
}

Vector ConstraintProjector::project(const Eigen::Ref<const Vector>& v) const {
  if (rank_ == 0) return v;
  return v - row_basis_ * (row_basis_.transpose() * v);
}

PerspectiveProx prox_perspective_sq(double eta, const Eigen::Ref<const Vector>& u, double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "prox_perspective_sq: gamma must be > 0");
  PerspectiveProx out;
  const double unorm2 = u.squaredNorm();
  if (eta + unorm2 / (4.0 * gamma) <= 0.0) {
    out.sigma = 0.0;
    out.p = Vector::Zero(u.size());
    return out;
  }
  // root of c(s) = (s - eta)(s + 2 gamma)^2 - gamma ||u||^2, strictly
  // increasing on [max(eta,0), inf); safeguarded Newton inside a bracket
  const double lo0 = std::max(eta, 0.0);
  const double hi0 = lo0 + std::sqrt(gamma * unorm2) + 1.0;
  auto cubic = [&](double s) {
    const double t = s + 2.0 * gamma;
    return (s - eta) * t * t - gamma * unorm2;
  };
  auto dcubic = [&](double s) {
    const double t = s + 2.0 * gamma;
    return t * t + 2.0 * (s - eta) * t;
  };
  double lo = lo0, hi = hi0;
  while (cubic(hi) < 0.0) hi = lo0 + 2.0 * (hi - lo0) + 1.0;
  double s = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double c = cubic(s);
    if (std::abs(c) <= 1e-12 * (1.0 + gamma * unorm2 + std::abs(eta))) break;
    if (c > 0.0)
      hi = s;
    else
      lo = s;
    const double dc = dcubic(s);
    double step = dc > 0.0 ? s - c / dc : lo;
    s = (step > lo && step < hi) ? step : 0.5 * (lo + hi);
  }
  out.sigma = s;
  out.p = u * (s / (s + 2.0 * gamma));
  return out;
}

AugmentedProblem mean_shift_augment(const ProblemData& problem, const Formulation& formulation,
                                    double lambda) {
  if (!is_huber(formulation.kind))
    throw Error(ErrorCode::IncompatibleMethod, "mean-shift augmentation applies to R2/R4 only");
  if (!(lambda > 0.0))
    throw Error(ErrorCode::InvalidArgument, "mean-shift augmentation requires lambda > 0");
  const Index n = problem.n(), d = problem.d(), k = problem.k();

  AugmentedProblem aug;
  aug.d_orig = d;
  aug.n = n;
  aug.lambda = lambda;
  aug.rho = formulation.rho;

  Matrix Xa(n, d + n);
  Xa.leftCols(d) = problem.X;
  Xa.rightCols(n) = Matrix::Identity(n, n);

  Matrix Ca(k, d + n);
  if (k > 0) {
    Ca.leftCols(d) = problem.C;
    Ca.rightCols(n).setZero();
  }

  Vector wa(d + n);
  wa.head(d) = problem.weights;
  wa.tail(n).setConstant(2.0 * formulation.rho / lambda);

  aug.data = ProblemData::make(std::move(Xa), problem.y, std::move(Ca), std::move(wa));
  return aug;
}

double spectral_norm_sq(const Matrix& X, std::vector<double>* history) {
  const Index d = X.cols();
  if (X.size() == 0) return 0.0;
  Rng rng(0x5eedc0de5eedc0deULL);
  Vector v(d);
  for (Index j = 0; j < d; ++j) v[j] = rng.next_normal();
  double nv = v.norm();
  if (nv == 0.0) return 0.0;
  v /= nv;
  double rq = 0.0;
  for (int it = 0; it < 20000; ++it) {
    Vector w = X.transpose() * (X * v);
    const double rq_new = v.dot(w);  // Rayleigh quotient, nondecreasing
    if (history) history->push_back(rq_new);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    if (it > 2 && std::abs(rq_new - rq) <= 1e-13 * std::max(1.0, rq_new)) {
      rq = rq_new;
      break;
    }
    rq = rq_new;
  }
  return rq;
}

}  // namespace conlasso
