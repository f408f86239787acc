#include "conlasso/losses.hpp"
#include "conlasso/solvers.hpp"

#include <algorithm>
#include <cmath>

namespace conlasso {

namespace {

double cheby_eval(const Vector& v, const Matrix& C, const Vector& w, const Vector& mu) {
  double best = 0.0;
  for (Index j = 0; j < v.size(); ++j) {
    double t = v[j];
    if (C.rows() > 0) t -= C.col(j).dot(mu);
    best = std::max(best, std::abs(t) / w[j]);
  }
  return best;
}

std::vector<Index> cheby_argmax(const Vector& v, const Matrix& C, const Vector& w,
                                const Vector& mu, double value) {
  std::vector<Index> out;
  const double cut = value * (1.0 - 1e-9) - 1e-300;
  for (Index j = 0; j < v.size(); ++j) {
    double t = v[j];
    if (C.rows() > 0) t -= C.col(j).dot(mu);
    if (std::abs(t) / w[j] >= cut) out.push_back(j);
  }
  return out;
}

ChebyshevMin cheby_k1(const Vector& v, const Matrix& C, const Vector& w) {
  const Index d = v.size();
  double min_slope = std::numeric_limits<double>::infinity();
  double max_abs = 0.0;
  for (Index j = 0; j < d; ++j) {
    max_abs = std::max(max_abs, std::abs(v[j]) / w[j]);
    const double cj = std::abs(C(0, j)) / w[j];
    if (cj > 1e-14) min_slope = std::min(min_slope, cj);
  }
  ChebyshevMin out;
  out.mu = Vector::Zero(1);
  if (!std::isfinite(min_slope)) {  // zero constraint row
    out.value = max_abs;
    out.argmax = cheby_argmax(v, C, w, out.mu, out.value);
    return out;
  }

  auto g = [&](double mu) {
    Vector m(1);
    m[0] = mu;
    return cheby_eval(v, C, w, m);
  };

  // ternary search on the convex envelope, then an exact vertex polish by
  // intersecting the near-active lines pairwise
  double lo = -(2.0 * max_abs / min_slope + 1.0), hi = -lo;
  for (int it = 0; it < 300; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (g(m1) <= g(m2))
      hi = m2;
    else
      lo = m1;
  }
  double mu_best = 0.5 * (lo + hi);
  double val_best = g(mu_best);

  std::vector<Index> near;
  for (Index j = 0; j < d; ++j) {
    const double t = std::abs(v[j] - C(0, j) * mu_best) / w[j];
    if (t >= val_best - 1e-6 * (1.0 + val_best)) near.push_back(j);
  }
  for (std::size_t ai = 0; ai < near.size(); ++ai) {
    for (std::size_t bi = ai + 1; bi < near.size(); ++bi) {
      const Index i = near[ai], j = near[bi];
      const double si = (v[i] - C(0, i) * mu_best) >= 0 ? 1.0 : -1.0;
      const double sj = (v[j] - C(0, j) * mu_best) >= 0 ? 1.0 : -1.0;
      const double denom = si * C(0, i) / w[i] - sj * C(0, j) / w[j];
      if (std::abs(denom) < 1e-14) continue;
      const double mu_c = (si * v[i] / w[i] - sj * v[j] / w[j]) / denom;
      const double val_c = g(mu_c);
      if (val_c < val_best) {
        val_best = val_c;
        mu_best = mu_c;
      }
    }
  }
  out.mu[0] = mu_best;
  out.value = val_best;
  out.argmax = cheby_argmax(v, C, w, out.mu, out.value);
  return out;
}

ChebyshevMin cheby_kn(const Vector& v, const Matrix& C, const Vector& w) {
  const Index k = C.rows(), d = v.size();
  Vector mu = Vector::Zero(k);
  auto g = [&](const Vector& m) { return cheby_eval(v, C, w, m); };

  double best_val = g(mu);
  Vector best_mu = mu;
  const double g0 = best_val;

  // subgradient phase
  const long T = 4000 * k + 4000;
  for (long t = 0; t < T; ++t) {
    Index jmax = 0;
    double fmax = -1.0;
    double sign = 1.0;
    for (Index j = 0; j < d; ++j) {
      const double r = v[j] - C.col(j).dot(mu);
      const double f = std::abs(r) / w[j];
      if (f > fmax) {
        fmax = f;
        jmax = j;
        sign = r >= 0 ? 1.0 : -1.0;
      }
    }
    Vector sub = -sign / w[jmax] * C.col(jmax);
    const double nrm = sub.norm();
    if (nrm < 1e-300) break;
    mu -= (g0 / (nrm * std::sqrt(double(t + 1)))) * sub;
    const double f = g(mu);
    if (f < best_val) {
      best_val = f;
      best_mu = mu;
    }
  }

  // multilevel axis-aligned grid refinement around the incumbent
  if (k <= 4) {
    double radius = best_mu.cwiseAbs().maxCoeff() + g0 + 1.0;
    const int pts = 9;
    for (int level = 0; level < 28; ++level) {
      Vector center = best_mu;
      const long total = static_cast<long>(std::pow(pts, double(k)));
      for (long c = 0; c < total; ++c) {
        long rem = c;
        Vector cand = center;
        for (Index a = 0; a < k; ++a) {
          const int step = int(rem % pts);
          rem /= pts;
          cand[a] += radius * (double(step) - (pts - 1) / 2.0) / ((pts - 1) / 2.0);
        }
        const double f = g(cand);
        if (f < best_val) {
          best_val = f;
          best_mu = cand;
        }
      }
      radius *= 0.45;
    }
  }

  ChebyshevMin out;
  out.value = best_val;
  out.mu = best_mu;
  out.argmax = cheby_argmax(v, C, w, best_mu, best_val);
  return out;
}

}  // namespace

ChebyshevMin weighted_chebyshev_min(const Vector& v, const Matrix& C, const Vector& w) {
  const Index k = C.rows();
  if (k == 0) {
    ChebyshevMin out;
    out.mu = Vector(0);
    out.value = 0.0;
    for (Index j = 0; j < v.size(); ++j) out.value = std::max(out.value, std::abs(v[j]) / w[j]);
    out.argmax = cheby_argmax(v, C, w, out.mu, out.value);
    return out;
  }
  if (k == 1) return cheby_k1(v, C, w);
  return cheby_kn(v, C, w);
}

Vector lambda_max_gradient(const ProblemData& problem, const Formulation& formulation) {
  if (!is_classification(formulation.kind)) return 2.0 * (problem.X.transpose() * problem.y);
  const double dl0 = formulation.kind == FormulationKind::C1
                         ? squared_hinge_derivative(0.0)
                         : huberized_hinge_derivative(0.0, formulation.rho_class);
  return -dl0 * (problem.X.transpose() * problem.y);
}

double compute_lambda_max(const ProblemData& problem, const Formulation& formulation) {
  Vector v = lambda_max_gradient(problem, formulation);
  return weighted_chebyshev_min(v, problem.C, problem.weights).value;
}

double lambda_zero_threshold(const ProblemData& problem, const Formulation& formulation) {
  Vector v;
  switch (formulation.kind) {
    case FormulationKind::R1:
    case FormulationKind::C1:
    case FormulationKind::C2:
      return compute_lambda_max(problem, formulation);
    case FormulationKind::R2:
      v = problem.X.transpose() * huber_gradient(problem.y, formulation.rho);
      break;
    case FormulationKind::R3: {
      const double s0 = std::max(concomitant_sigma(problem.y, problem.n()), 1e-12);
      v = 2.0 * (problem.X.transpose() * problem.y) / s0;
      break;
    }
    case FormulationKind::R4: {
      const double s0 =
          std::max(concomitant_sigma_huber(problem.y, formulation.rho, problem.n()), 1e-12);
      Vector ys = problem.y / s0;
      v = problem.X.transpose() * huber_gradient(ys, formulation.rho);
      break;
    }
  }
  return weighted_chebyshev_min(v, problem.C, problem.weights).value;
}

KktCertificate kkt_certificate(const ProblemData& problem, const Formulation& formulation,
                               const Vector& beta, std::optional<double> sigma, double lambda) {
  Vector g = loss_gradient(problem, formulation, beta, sigma);
  const Vector& w = problem.weights;
  const Matrix& C = problem.C;
  const Index d = problem.d(), k = problem.k();
  const double act_tol = 1e-7 * (1.0 + beta.cwiseAbs().maxCoeff());

  auto residual = [&](const Vector& mu) {
    double worst = 0.0;
    for (Index j = 0; j < d; ++j) {
      double t = g[j];
      if (k > 0) t += C.col(j).dot(mu);
      if (std::abs(beta[j]) > act_tol) {
        const double s = beta[j] > 0 ? 1.0 : -1.0;
        worst = std::max(worst, std::abs(t + lambda * w[j] * s));
      } else {
        worst = std::max(worst, std::max(std::abs(t) - lambda * w[j], 0.0));
      }
    }
    return worst;
  };

  KktCertificate out;
  if (k == 0) {
    out.mu = Vector(0);
    out.residual = residual(out.mu);
    return out;
  }

  if (k == 1) {
    double cmin = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < d; ++j) {
      const double a = std::abs(C(0, j));
      if (a > 1e-14) cmin = std::min(cmin, a);
    }
    Vector mu(1);
    if (!std::isfinite(cmin)) {
      mu[0] = 0.0;
      out.mu = mu;
      out.residual = residual(mu);
      return out;
    }
    const double scale = g.cwiseAbs().maxCoeff() + lambda * w.maxCoeff() + 1.0;
    double lo = -2.0 * scale / cmin, hi = -lo;
    auto f = [&](double m) {
      Vector mm(1);
      mm[0] = m;
      return residual(mm);
    };
    for (int it = 0; it < 300; ++it) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      if (f(m1) <= f(m2))
        hi = m2;
      else
        lo = m1;
    }
    mu[0] = 0.5 * (lo + hi);
    out.mu = mu;
    out.residual = f(mu[0]);
    return out;
  }

  // k >= 2: subgradient with grid refinement, same scheme as the
  // chebyshev solver but on the certificate function
  Vector mu = Vector::Zero(k);
  double best = residual(mu);
  Vector best_mu = mu;
  const double r0 = best + 1e-12;
  for (long t = 0; t < 6000 * k; ++t) {
    // one-sided finite-difference subgradient on the active coordinate
    Index jworst = 0;
    double fworst = -1.0;
    double sign = 1.0;
    bool active_pen = false;
    for (Index j = 0; j < d; ++j) {
      double v = g[j] + C.col(j).dot(mu);
      double f;
      bool act = std::abs(beta[j]) > act_tol;
      double s = 0.0;
      if (act) {
        s = beta[j] > 0 ? 1.0 : -1.0;
        f = std::abs(v + lambda * w[j] * s);
        if (f > fworst) {
          fworst = f;
          jworst = j;
          sign = (v + lambda * w[j] * s) >= 0 ? 1.0 : -1.0;
          active_pen = true;
        }
      } else {
        f = std::max(std::abs(v) - lambda * w[j], 0.0);
        if (f > fworst) {
          fworst = f;
          jworst = j;
          sign = v >= 0 ? 1.0 : -1.0;
          active_pen = f > 0.0;
        }
      }
    }
    if (!active_pen) break;
    Vector sub = sign * C.col(jworst);
    const double nrm = sub.norm();
    if (nrm < 1e-300) break;
    mu -= (r0 / (nrm * std::sqrt(double(t + 1)))) * sub;
    const double f = residual(mu);
    if (f < best) {
      best = f;
      best_mu = mu;
    }
  }
  if (k <= 4) {
    double radius = best_mu.cwiseAbs().maxCoeff() + r0 + 1.0;
    const int pts = 9;
    for (int level = 0; level < 28; ++level) {
      Vector center = best_mu;
      const long total = static_cast<long>(std::pow(pts, double(k)));
      for (long c = 0; c < total; ++c) {
        long rem = c;
        Vector cand = center;
        for (Index a = 0; a < k; ++a) {
          const int step = int(rem % pts);
          rem /= pts;
          cand[a] += radius * (double(step) - (pts - 1) / 2.0) / ((pts - 1) / 2.0);
        }
        const double f = residual(cand);
        if (f < best) {
          best = f;
          best_mu = cand;
        }
      }
      radius *= 0.45;
    }
  }
  out.mu = best_mu;
  out.residual = best;
  return out;
}

}  // namespace conlasso
