#include "conlasso/losses.hpp"
#include "conlasso/solvers.hpp"

#include <Eigen/QR>

#include <chrono>
#include <cmath>
#include <functional>

namespace conlasso {

namespace {

double golden_min_sigma(const std::function<double(double)>& f, double lo, double hi) {
  const double gr = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 160; ++it) {
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

// Active-set refinement from a warm start: repeatedly solve the
// stationarity system on the working support, drop sign-inconsistent
// coordinates, admit the worst dual violator. For the Huber kinds the
// sample branches are reclassified from the current residual each round
// and the whole system lives in the sigma-scaled coordinates, so the
// penalty weight is lambda * sigma and the clip level rho * sigma.
bool active_set_refine(const ProblemData& p, const Formulation& f, double lambda,
                       double sigma, const Vector& start, Vector* out) {
  const Index d = p.d(), k = p.k(), n = p.n();
  const double lam_eff = is_concomitant(f.kind) ? lambda * sigma : lambda;
  const double rho_eff = is_huber(f.kind) ? f.rho * (is_concomitant(f.kind) ? sigma : 1.0)
                                          : std::numeric_limits<double>::infinity();

  std::vector<Index> S;
  Vector sgn = Vector::Zero(d);
  const double big = start.cwiseAbs().maxCoeff();
  for (Index j = 0; j < d; ++j)
    if (std::abs(start[j]) > 1e-7 * (1.0 + big)) {
      S.push_back(j);
      sgn[j] = start[j] > 0 ? 1.0 : -1.0;
    }

  Vector beta = start;
  for (int round = 0; round < 120; ++round) {
    const Index m = static_cast<Index>(S.size());
    Vector r = p.X * beta - p.y;

    Matrix K = Matrix::Zero(m + k, m + k);
    Vector rhs = Vector::Zero(m + k);
    Vector drift = Vector::Zero(d);
    Vector xty_full = Vector::Zero(d);
    std::vector<char> in_branch(n, 1);
    for (Index i = 0; i < n; ++i)
      if (std::abs(r[i]) > rho_eff) in_branch[i] = 0;
    for (Index i = 0; i < n; ++i) {
      if (in_branch[i]) {
        xty_full += p.X.row(i).transpose() * p.y[i];
      } else {
        const double s = r[i] > 0 ? 1.0 : -1.0;
        drift += 2.0 * rho_eff * s * p.X.row(i).transpose();
      }
    }
    for (Index a = 0; a < m; ++a)
      for (Index b = 0; b < m; ++b) {
        double acc = 0.0;
        for (Index i = 0; i < n; ++i)
          if (in_branch[i]) acc += p.X(i, S[a]) * p.X(i, S[b]);
        K(a, b) = 2.0 * acc;
      }
    for (Index rr = 0; rr < k; ++rr)
      for (Index a = 0; a < m; ++a) {
        K(m + rr, a) = p.C(rr, S[a]);
        K(a, m + rr) = p.C(rr, S[a]);
      }
    for (Index a = 0; a < m; ++a)
      rhs[a] = 2.0 * xty_full[S[a]] - drift[S[a]] - lam_eff * p.weights[S[a]] * sgn[S[a]];

    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(K);
    Vector sol = cod.solve(rhs);
    if (m + k > 0 &&
        (K * sol - rhs).cwiseAbs().maxCoeff() > 1e-7 * (1.0 + rhs.cwiseAbs().maxCoeff()))
      return false;

    Vector cand = Vector::Zero(d);
    for (Index a = 0; a < m; ++a) cand[S[a]] = sol[a];
    Vector mu = sol.tail(k);

    // drop coordinates that crossed zero against their sign
    bool dropped = false;
    std::vector<Index> keep;
    for (Index a = 0; a < m; ++a) {
      if (cand[S[a]] * sgn[S[a]] < -1e-12) {
        sgn[S[a]] = 0.0;
        dropped = true;
      } else {
        keep.push_back(S[a]);
      }
    }
    if (dropped) {
      S = keep;
      for (Index j = 0; j < d; ++j) beta[j] = sgn[j] != 0.0 ? beta[j] : 0.0;
      continue;
    }
    beta = cand;

    // stationarity residual in the scaled coordinates
    Vector rr2 = p.X * beta - p.y;
    Vector c = Vector::Zero(d);
    for (Index i = 0; i < n; ++i) {
      const double clipped = std::abs(rr2[i]) <= rho_eff
                                 ? 2.0 * rr2[i]
                                 : 2.0 * rho_eff * (rr2[i] > 0 ? 1.0 : -1.0);
      c += clipped * p.X.row(i).transpose();
    }
    if (k > 0) c += p.C.transpose() * mu;

    Index worst = -1;
    double worst_viol = 1e-9 * (1.0 + lam_eff);
    for (Index j = 0; j < d; ++j) {
      if (sgn[j] != 0.0) continue;
      const double viol = std::abs(c[j]) - lam_eff * p.weights[j];
      if (viol > worst_viol) {
        worst_viol = viol;
        worst = j;
      }
    }
    if (worst < 0) {
      *out = beta;
      return true;
    }
    S.push_back(worst);
    sgn[worst] = c[worst] > 0 ? -1.0 : 1.0;
  }
  return false;
}

}  // namespace

Solution oracle_solve(const ProblemData& problem, const Formulation& formulation, double lambda,
                      long budget) {
  const auto t0 = std::chrono::steady_clock::now();
  validate(problem, formulation);
  if (lambda < 0) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");

  const Index d = problem.d();
  ConstraintProjector proj(problem.C, d);
  const double L = std::max(2.0 * spectral_norm_sq(problem.X), 1e-12);

  const bool conc = is_concomitant(formulation.kind);
  Vector x = Vector::Zero(d);
  double sigma = 1.0;

  auto sigma_for = [&](const Vector& beta) {
    if (!conc) return 1.0;
    Vector r = problem.X * beta - problem.y;
    const double hi = 2.0 * concomitant_sigma(r, problem.n()) + 1.0;
    auto f1d = [&](double s) {
      return loss_value(problem, formulation, beta, std::max(s, 1e-12));
    };
    return std::max(golden_min_sigma(f1d, 1e-12, hi), 1e-12);
  };

  auto full_objective = [&](const Vector& beta, double s) {
    return objective_value(problem, formulation, beta,
                           conc ? std::optional<double>(s) : std::nullopt, lambda);
  };

  sigma = sigma_for(x);
  Vector best_x = x;
  double best_sigma = sigma;
  double best_obj = full_objective(x, sigma);

  for (long t = 0; t < budget; ++t) {
    if (conc && t % 10 == 0) sigma = sigma_for(x);
    Vector g = loss_gradient(problem, formulation, x,
                             conc ? std::optional<double>(sigma) : std::nullopt);
    const double step = (conc ? sigma : 1.0) / (L * std::sqrt(1.0 + double(t) / 50.0));
    x = proj.project(soft_threshold(x - step * g, Vector(step * lambda * problem.weights)));
    if (t % 5 == 0 || t == budget - 1) {
      const double s = conc ? sigma_for(x) : 1.0;
      const double obj = full_objective(x, s);
      if (obj < best_obj) {
        best_obj = obj;
        best_x = x;
        best_sigma = s;
      }
    }
  }

  // guarded polish: active-set refinement from the subgradient iterate,
  // kept only when it lowers the objective and stays feasible; for the
  // concomitant kinds sigma and the support alternate a few rounds
  if (!is_classification(formulation.kind)) {
    Vector cand = best_x;
    double csig = best_sigma;
    for (int outer = 0; outer < (conc ? 8 : 1); ++outer) {
      Vector next;
      if (!active_set_refine(problem, formulation, lambda, csig, cand, &next)) break;
      const double nsig = conc ? sigma_for(next) : 1.0;
      const double obj = full_objective(next, nsig);
      if (obj < best_obj - 1e-15 * (1.0 + std::abs(best_obj))) {
        best_obj = obj;
        best_x = next;
        best_sigma = nsig;
      }
      const bool settled =
          (next - cand).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + cand.cwiseAbs().maxCoeff()) &&
          std::abs(nsig - csig) <= 1e-12 * (1.0 + csig);
      cand = next;
      csig = nsig;
      if (settled) break;
    }
  }

  Solution sol;
  sol.beta = best_x;
  sol.lambda = lambda;
  if (conc) sol.sigma = std::max(best_sigma, 1e-12);
  sol.objective = best_obj;
  sol.diagnostics.solver = "oracle";
  sol.diagnostics.iterations = budget;
  sol.diagnostics.converged = true;
  sol.diagnostics.feasibility =
      problem.k() > 0 ? (problem.C * sol.beta).cwiseAbs().maxCoeff() : 0.0;
  sol.diagnostics.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

}  // namespace conlasso
