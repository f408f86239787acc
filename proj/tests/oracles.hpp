// Independent reference routines for tests: small, slow, self-contained
// implementations that never call the library code paths they check.
#pragma once

#include "conlasso/types.hpp"

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

namespace oracles {

using conlasso::Index;
using conlasso::Matrix;
using conlasso::Vector;

inline double golden_min(const std::function<double(double)>& f, double lo, double hi,
                         int iters = 200) {
  const double gr = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < iters; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

// multilevel 1-d grid minimization (handles non-smooth kinks)
inline double grid_min_1d(const std::function<double(double)>& f, double lo, double hi,
                          int levels = 24, int pts = 81) {
  double best_x = 0.5 * (lo + hi), best = f(best_x);
  double center = best_x, radius = 0.5 * (hi - lo);
  for (int lv = 0; lv < levels; ++lv) {
    for (int i = 0; i < pts; ++i) {
      const double x = center + radius * (2.0 * i / (pts - 1) - 1.0);
      if (x < lo || x > hi) continue;
      const double v = f(x);
      if (v < best) {
        best = v;
        best_x = x;
      }
    }
    center = best_x;
    radius *= 0.3;
  }
  return best_x;
}

// symmetric eigendecomposition by cyclic Jacobi rotations (small matrices)
inline std::pair<Matrix, Vector> jacobi_eigen_sym(Matrix A) {
  const Index n = A.rows();
  Matrix V = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off = std::max(off, std::abs(A(p, q)));
    if (off < 1e-14 * (1.0 + A.cwiseAbs().maxCoeff())) break;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) {
        if (std::abs(A(p, q)) < 1e-300) continue;
        const double theta = 0.5 * std::atan2(2.0 * A(p, q), A(q, q) - A(p, p));
        const double c = std::cos(theta), s = std::sin(theta);
        for (Index i = 0; i < n; ++i) {
          const double aip = A(i, p), aiq = A(i, q);
          A(i, p) = c * aip - s * aiq;
          A(i, q) = s * aip + c * aiq;
        }
        for (Index i = 0; i < n; ++i) {
          const double api = A(p, i), aqi = A(q, i);
          A(p, i) = c * api - s * aqi;
          A(q, i) = s * api + c * aqi;
        }
        for (Index i = 0; i < n; ++i) {
          const double vip = V(i, p), viq = V(i, q);
          V(i, p) = c * vip - s * viq;
          V(i, q) = s * vip + c * viq;
        }
      }
  }
  return {V, A.diagonal()};
}

// one-sided Jacobi: orthogonalize column pairs, singular values are the
// resulting column norms
inline std::vector<double> jacobi_singular_values(Matrix A) {
  const Index n = A.cols();
  for (int sweep = 0; sweep < 200; ++sweep) {
    bool rotated = false;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) {
        const double a = A.col(i).squaredNorm();
        const double b = A.col(j).squaredNorm();
        const double c = A.col(i).dot(A.col(j));
        if (std::abs(c) <= 1e-15 * std::sqrt(a * b) + 1e-300) continue;
        rotated = true;
        const double zeta = (b - a) / (2.0 * c);
        const double t = (zeta >= 0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t), sn = cs * t;
        Vector ci = A.col(i), cj = A.col(j);
        A.col(i) = cs * ci - sn * cj;
        A.col(j) = sn * ci + cs * cj;
      }
    if (!rotated) break;
  }
  std::vector<double> sv(n);
  for (Index j = 0; j < n; ++j) sv[j] = A.col(j).norm();
  std::sort(sv.begin(), sv.end(), std::greater<double>());
  return sv;
}

// projector onto null(C) from the pseudo-inverse of C C^T computed by the
// Jacobi eigensolver above
inline Matrix pinv_projector(const Matrix& C, Index d) {
  if (C.rows() == 0) return Matrix::Identity(d, d);
  Matrix G = C * C.transpose();
  auto [V, evals] = jacobi_eigen_sym(G);
  const double emax = evals.cwiseAbs().maxCoeff();
  Matrix Ginv = Matrix::Zero(G.rows(), G.cols());
  for (Index i = 0; i < evals.size(); ++i)
    if (evals[i] > 1e-12 * (emax + 1e-300))
      Ginv += V.col(i) * V.col(i).transpose() / evals[i];
  return Matrix::Identity(d, d) - C.transpose() * Ginv * C;
}

// min over mu of max_j |v_j - mu c_j| / w_j by multilevel grid
inline double brute_chebyshev_k1(const Vector& v, const Vector& c, const Vector& w,
                                 double radius) {
  auto g = [&](double mu) {
    double worst = 0.0;
    for (Index j = 0; j < v.size(); ++j)
      worst = std::max(worst, std::abs(v[j] - mu * c[j]) / w[j]);
    return worst;
  };
  const double mu = grid_min_1d(g, -radius, radius, 30, 201);
  return g(mu);
}

// min over (mu1, mu2) of max_j |v_j - (C^T mu)_j| / w_j by multilevel grid
inline double brute_chebyshev_k2(const Vector& v, const Matrix& C, const Vector& w,
                                 double radius) {
  auto g = [&](double m1, double m2) {
    double worst = 0.0;
    for (Index j = 0; j < v.size(); ++j)
      worst = std::max(worst, std::abs(v[j] - m1 * C(0, j) - m2 * C(1, j)) / w[j]);
    return worst;
  };
  double bx = 0.0, by = 0.0, best = g(0, 0), r = radius;
  for (int lv = 0; lv < 30; ++lv) {
    const double cx = bx, cy = by;
    for (int i = 0; i < 41; ++i)
      for (int j = 0; j < 41; ++j) {
        const double m1 = cx + r * (2.0 * i / 40.0 - 1.0);
        const double m2 = cy + r * (2.0 * j / 40.0 - 1.0);
        const double val = g(m1, m2);
        if (val < best) {
          best = val;
          bx = m1;
          by = m2;
        }
      }
    r *= 0.3;
  }
  return best;
}

// unconstrained lasso with orthonormal design: soft threshold at lambda/2
inline Vector orthogonal_lasso(const Vector& y, double lambda) {
  Vector b(y.size());
  for (Index j = 0; j < y.size(); ++j) {
    const double a = std::abs(y[j]) - 0.5 * lambda;
    b[j] = a > 0 ? (y[j] > 0 ? a : -a) : 0.0;
  }
  return b;
}

// plain proximal-gradient (ISTA) reference for the unconstrained problem
inline Vector ista_reference(const Matrix& X, const Vector& y, const Vector& w, double lambda,
                             double tau, bool huber, double rho, int steps) {
  Vector x = Vector::Zero(X.cols());
  for (int t = 0; t < steps; ++t) {
    Vector r = X * x - y;
    Vector g;
    if (huber) {
      Vector psi(r.size());
      for (Index i = 0; i < r.size(); ++i)
        psi[i] = std::abs(r[i]) <= rho ? 2.0 * r[i] : 2.0 * rho * (r[i] > 0 ? 1 : -1);
      g = X.transpose() * psi;
    } else {
      g = 2.0 * (X.transpose() * r);
    }
    Vector v = x - tau * g;
    for (Index j = 0; j < v.size(); ++j) {
      const double thr = tau * lambda * w[j];
      const double a = std::abs(v[j]) - thr;
      x[j] = a > 0 ? (v[j] > 0 ? a : -a) : 0.0;
    }
  }
  return x;
}

// centered finite difference
inline double numeric_derivative(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace oracles
