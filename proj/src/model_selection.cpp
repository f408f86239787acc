#include "conlasso/model_selection.hpp"

#include "conlasso/losses.hpp"
#include "conlasso/parallel.hpp"
#include "conlasso/rng.hpp"
#include "conlasso/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace conlasso {

namespace {

std::vector<double> log_grid(double lam_hi, double lam_lo, int count) {
  std::vector<double> g(count);
  if (count == 1) {
    g[0] = lam_hi;
    return g;
  }
  const double lh = std::log(lam_hi), ll = std::log(lam_lo);
  for (int i = 0; i < count; ++i)
    g[i] = std::exp(lh + (ll - lh) * double(i) / double(count - 1));
  g.front() = lam_hi;
  g.back() = lam_lo;
  return g;
}

ProblemData row_subset(const ProblemData& p, const std::vector<std::size_t>& rows) {
  Matrix X(rows.size(), p.d());
  Vector y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    X.row(static_cast<Index>(i)) = p.X.row(static_cast<Index>(rows[i]));
    y[static_cast<Index>(i)] = p.y[static_cast<Index>(rows[i])];
  }
  return ProblemData::make(std::move(X), std::move(y), p.C, p.weights);
}

// warm-started descent over a log grid for formulations without an exact
// homotopy; the first point is beta = 0 at the zero threshold, which is
// exact there by definition
PathResult grid_dr_path(const ProblemData& problem, const Formulation& formulation,
                        const std::vector<double>& grid, const SolverConfig& config) {
  PathResult out;
  out.kind = PathKind::Grid;
  out.lambdas = grid;
  out.aux_param = grid;
  out.lambda_max = grid.front();
  out.betas = Matrix::Zero(problem.d(), static_cast<Index>(grid.size()));
  out.diagnostics.solver = "dr";
  const bool conc = is_concomitant(formulation.kind);
  if (conc) out.sigmas.assign(grid.size(), 0.0);

  Vector state;
  bool have_state = false;
  long iters = 0;
  bool ok = true;
  std::vector<Index> seen;
  std::vector<bool> entered(problem.d(), false);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Vector beta;
    std::optional<double> sigma;
    if (i == 0 && grid[0] >= lambda_zero_threshold(problem, formulation) * (1.0 - 1e-12)) {
      beta = Vector::Zero(problem.d());
      sigma = optimal_sigma(problem, formulation, beta);
    } else {
      Solution s = douglas_rachford(problem, formulation, grid[i], config,
                                    have_state ? &state : nullptr, &state);
      have_state = true;
      iters += s.diagnostics.iterations;
      ok = ok && s.diagnostics.converged;
      beta = s.beta;
      sigma = s.sigma;
    }
    out.betas.col(static_cast<Index>(i)) = beta;
    if (conc) out.sigmas[i] = sigma.value_or(0.0);
    for (Index j = 0; j < problem.d(); ++j)
      if (!entered[j] && std::abs(beta[j]) > 1e-8) {
        entered[j] = true;
        out.entry_order.push_back(j);
      }
  }
  out.diagnostics.iterations = iters;
  out.diagnostics.converged = ok;
  out.num_events = static_cast<long>(grid.size());
  return out;
}

SolverConfig with_method(const SolverConfig& c, SolverMethod m) {
  SolverConfig out = c;
  out.method = m;
  return out;
}

}  // namespace

SolverMethod default_method_for(FormulationKind kind, Task task, double lam_ratio) {
  switch (kind) {
    case FormulationKind::C1:
    case FormulationKind::C2:
      return SolverMethod::PathAlg;
    case FormulationKind::R4:
      return SolverMethod::DR;
    case FormulationKind::R3:
      return task == Task::Fixed ? SolverMethod::DR : SolverMethod::PathAlg;
    case FormulationKind::R1:
    case FormulationKind::R2:
      if (task != Task::Fixed) return SolverMethod::PathAlg;
      return lam_ratio >= 0.05 ? SolverMethod::PathAlg : SolverMethod::DR;
  }
  return SolverMethod::PathAlg;
}

double theory_lambda(Index n, Index d) {
  // Acklam's rational approximation of the standard normal quantile
  auto qnorm = [](double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double e[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (p < plow) {
      const double q = std::sqrt(-2.0 * std::log(p));
      return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
             ((((e[0] * q + e[1]) * q + e[2]) * q + e[3]) * q + 1.0);
    }
    if (p <= 1.0 - plow) {
      const double q = p - 0.5, r = q * q;
      return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
             (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((e[0] * q + e[1]) * q + e[2]) * q + e[3]) * q + 1.0);
  };
  return std::sqrt(2.0 / double(n)) * qnorm(1.0 - 0.05 / (2.0 * double(d)));
}

double resolve_lambda(const ProblemData& problem, const Formulation& formulation,
                      const FixedLambdaPlan& plan) {
  if (plan.theory) return theory_lambda(problem.n(), problem.d());
  if (!plan.rescaled) return plan.lam;
  if (plan.lam < 0.0 || plan.lam > 1.0)
    throw Error(ErrorCode::InvalidArgument, "rescaled lam must lie in [0, 1]");
  return plan.lam * compute_lambda_max(problem, formulation);
}

Solution run_fixed_lambda(const ProblemData& problem, const Formulation& formulation,
                          const FixedLambdaPlan& plan, const SolverConfig& config,
                          std::optional<SolverMethod> method_override) {
  validate(problem, formulation);
  const double lambda = resolve_lambda(problem, formulation, plan);
  const double lam_max = compute_lambda_max(problem, formulation);
  const double ratio = lam_max > 0.0 ? lambda / lam_max : 1.0;
  const SolverMethod method =
      method_override.value_or(default_method_for(formulation.kind, Task::Fixed, ratio));
  return solve_fixed(problem, formulation, lambda, with_method(config, method));
}

PathResult run_path(const ProblemData& problem, const Formulation& formulation,
                    const PathPlan& plan, const SolverConfig& config,
                    std::optional<SolverMethod> method_override) {
  validate(problem, formulation);
  SolverMethod method =
      method_override.value_or(default_method_for(formulation.kind, Task::Path, 1.0));
  if (!method_legal(formulation.kind, method))
    throw Error(ErrorCode::IncompatibleMethod,
                std::string(to_string(method)) + " does not support " +
                    to_string(formulation.kind));
  SolverConfig c = config;
  c.path_lambda_min_ratio = plan.lambda_min_ratio;
  if (method == SolverMethod::PathAlg) return path_alg(problem, formulation, c);

  const double lam0 = lambda_zero_threshold(problem, formulation);
  if (lam0 <= 0.0) {
    PathResult out;
    out.kind = PathKind::Grid;
    out.lambdas = {0.0};
    out.aux_param = {0.0};
    out.betas = Matrix::Zero(problem.d(), 1);
    if (is_concomitant(formulation.kind)) out.sigmas = {optimal_sigma(problem, formulation, Vector::Zero(problem.d())).value_or(0.0)};
    return out;
  }
  const int ng = std::max(plan.num_grid, 2);
  return grid_dr_path(problem, formulation, log_grid(lam0, plan.lambda_min_ratio * lam0, ng),
                      with_method(c, SolverMethod::DR));
}

std::vector<int> cv_fold_assignment(Index n, int folds, std::uint64_t seed) {
  Rng rng(substream_seed(seed, 0xf01d));
  std::vector<std::size_t> order = rng.sample_without_replacement(std::size_t(n), std::size_t(n));
  std::vector<int> fold(n, 0);
  for (Index i = 0; i < n; ++i) fold[order[i]] = int(i % folds);
  return fold;
}

CVResult run_cv(const ProblemData& problem, const Formulation& formulation, const CVPlan& plan,
                const SolverConfig& config, int threads,
                std::optional<SolverMethod> method_override) {
  validate(problem, formulation);
  const Index n = problem.n();
  if (plan.folds < 2 || Index(plan.folds) > n)
    throw Error(ErrorCode::FoldTooSmall, "folds must lie in [2, n]");
  const Index max_fold = (n + plan.folds - 1) / plan.folds;
  if (n - max_fold < 2)
    throw Error(ErrorCode::FoldTooSmall, "training split would have fewer than 2 samples");

  const bool classification = is_classification(formulation.kind);
  const double lam0 = lambda_zero_threshold(problem, formulation);
  if (lam0 <= 0.0) throw Error(ErrorCode::InvalidArgument, "data admits no nonzero lambda grid");
  const int G = std::max(plan.grid_size, 2);
  std::vector<double> grid = log_grid(lam0, plan.lambda_min_ratio * lam0, G);

  const std::vector<int> fold_of = cv_fold_assignment(n, plan.folds, plan.seed);

  Matrix err(plan.folds, G);
  Matrix zo = classification ? Matrix(plan.folds, G) : Matrix();

  const SolverMethod method =
      method_override.value_or(default_method_for(formulation.kind, Task::CV, 1.0));
  if (!method_legal(formulation.kind, method))
    throw Error(ErrorCode::IncompatibleMethod,
                std::string(to_string(method)) + " does not support " +
                    to_string(formulation.kind));

  parallel_indexed(plan.folds, threads, [&](int f) {
    std::vector<std::size_t> train, test;
    for (Index i = 0; i < n; ++i)
      (fold_of[i] == f ? test : train).push_back(std::size_t(i));
    ProblemData ptr_train = row_subset(problem, train);
    ProblemData ptr_test = row_subset(problem, test);

    PathResult path;
    SolverConfig c = config;
    if (method == SolverMethod::PathAlg) {
      const double fold0 = lambda_zero_threshold(ptr_train, formulation);
      double ratio = fold0 > 0.0 ? 0.9 * grid.back() / fold0 : 0.5;
      c.path_lambda_min_ratio = std::clamp(ratio, 1e-8, 0.999999);
      path = path_alg(ptr_train, formulation, c);
    } else {
      path = grid_dr_path(ptr_train, formulation, grid, with_method(c, SolverMethod::DR));
    }

    for (int gi = 0; gi < G; ++gi) {
      Vector beta = path_beta_at(path, ptr_train, formulation, grid[gi]);
      if (!classification) {
        err(f, gi) = (ptr_test.X * beta - ptr_test.y).squaredNorm() / double(test.size());
      } else {
        err(f, gi) =
            loss_value(ptr_test, formulation, beta, std::nullopt) / double(test.size());
        long wrong = 0;
        Vector scores = ptr_test.X * beta;
        for (Index i = 0; i < ptr_test.n(); ++i)
          if (scores[i] * ptr_test.y[i] <= 0.0) ++wrong;
        zo(f, gi) = double(wrong) / double(test.size());
      }
    }
  });

  CVResult out;
  out.lambdas = grid;
  out.folds = plan.folds;
  out.seed = plan.seed;
  out.rule = plan.rule;
  out.mean_error.resize(G);
  out.std_error.resize(G);
  if (classification) out.zero_one_error.resize(G);
  for (int gi = 0; gi < G; ++gi) {
    const double mean = err.col(gi).mean();
    double var = 0.0;
    for (int f = 0; f < plan.folds; ++f) var += (err(f, gi) - mean) * (err(f, gi) - mean);
    var /= double(plan.folds - 1);
    out.mean_error[gi] = mean;
    out.std_error[gi] = std::sqrt(var / double(plan.folds));
    if (classification) out.zero_one_error[gi] = zo.col(gi).mean();
  }

  int imin = 0;
  for (int gi = 1; gi < G; ++gi)
    if (out.mean_error[gi] < out.mean_error[imin]) imin = gi;
  out.lambda_min = grid[imin];
  int i1se = imin;
  const double cutoff = out.mean_error[imin] + out.std_error[imin];
  for (int gi = 0; gi <= imin; ++gi) {
    if (out.mean_error[gi] <= cutoff) {
      i1se = gi;
      break;
    }
  }
  out.lambda_1se = grid[i1se];

  const double chosen = plan.rule == CVRule::OneSE ? out.lambda_1se : out.lambda_min;
  const double ratio = chosen / lam0;
  const SolverMethod refit_method =
      method_override.value_or(default_method_for(formulation.kind, Task::Fixed, ratio));
  out.refit = solve_fixed(problem, formulation, chosen, with_method(config, refit_method));
  return out;
}

StabSelResult run_stability_selection(const ProblemData& problem, const Formulation& formulation,
                                      const StabSelPlan& plan, const SolverConfig& config,
                                      int threads,
                                      std::optional<SolverMethod> method_override) {
  const auto t0 = std::chrono::steady_clock::now();
  validate(problem, formulation);
  const Index n = problem.n(), d = problem.d();
  if (plan.B < 1) throw Error(ErrorCode::InvalidArgument, "B must be >= 1");
  if (plan.q < 1) throw Error(ErrorCode::InvalidArgument, "q must be >= 1");
  if (plan.threshold < 0.0 || plan.threshold > 1.0)
    throw Error(ErrorCode::InvalidArgument, "threshold must lie in [0, 1]");
  const Index ns = Index(plan.subsample_fraction * double(n));
  if (ns < 2) throw Error(ErrorCode::SubsampleTooSmall, "subsample has fewer than 2 samples");

  double lambda_fixed = std::numeric_limits<double>::quiet_NaN();
  if (plan.mode == StabSelMode::FixedLam) {
    FixedLambdaPlan fp;
    fp.lam = plan.lam;
    fp.rescaled = plan.rescaled;
    lambda_fixed = resolve_lambda(problem, formulation, fp);
  }

  const bool pathable = method_legal(formulation.kind, SolverMethod::PathAlg);
  std::vector<std::vector<Index>> picks(plan.B);

  parallel_indexed(plan.B, threads, [&](int b) {
    Rng rng(substream_seed(plan.seed, std::uint64_t(b) + 1));
    std::vector<std::size_t> rows = rng.sample_without_replacement(std::size_t(n), std::size_t(ns));
    std::sort(rows.begin(), rows.end());
    ProblemData sub = row_subset(problem, rows);

    SolverConfig c = config;
    c.path_lambda_min_ratio = plan.lambda_min_ratio;
    std::vector<Index> sel;

    switch (plan.mode) {
      case StabSelMode::FixedLam: {
        const double lam_max = compute_lambda_max(problem, formulation);
        const double ratio = lam_max > 0 ? lambda_fixed / lam_max : 1.0;
        const SolverMethod m = method_override.value_or(
            default_method_for(formulation.kind, Task::Fixed, ratio));
        Solution s = solve_fixed(sub, formulation, lambda_fixed, with_method(c, m));
        for (Index j = 0; j < d; ++j)
          if (std::abs(s.beta[j]) > 1e-8) sel.push_back(j);
        break;
      }
      case StabSelMode::FirstQ: {
        if (pathable) {
          PathResult p = path_alg_first_entries(sub, formulation, c, plan.q);
          sel = p.entry_order;
        } else {
          const double lam0 = lambda_zero_threshold(sub, formulation);
          PathResult p = grid_dr_path(sub, formulation,
                                      log_grid(lam0, plan.lambda_min_ratio * lam0, 40),
                                      with_method(c, SolverMethod::DR));
          sel = p.entry_order;
        }
        if (Index(sel.size()) > Index(plan.q)) sel.resize(plan.q);
        break;
      }
      case StabSelMode::MaxCoef: {
        PathResult p;
        if (pathable) {
          p = path_alg(sub, formulation, c);
        } else {
          const double lam0 = lambda_zero_threshold(sub, formulation);
          p = grid_dr_path(sub, formulation, log_grid(lam0, plan.lambda_min_ratio * lam0, 40),
                           with_method(c, SolverMethod::DR));
        }
        Vector peak = p.betas.cwiseAbs().rowwise().maxCoeff();
        std::vector<Index> order(d);
        std::iota(order.begin(), order.end(), Index(0));
        std::sort(order.begin(), order.end(), [&](Index a, Index bb) {
          if (peak[a] != peak[bb]) return peak[a] > peak[bb];
          return a < bb;
        });
        for (Index r = 0; r < std::min<Index>(plan.q, d); ++r)
          if (peak[order[r]] > 1e-8) sel.push_back(order[r]);
        std::sort(sel.begin(), sel.end());
        break;
      }
    }
    picks[b] = std::move(sel);
  });

  StabSelResult out;
  out.mode = plan.mode;
  out.threshold = plan.threshold;
  out.seed = plan.seed;
  out.lambda = lambda_fixed;
  out.frequency = Vector::Zero(d);
  out.per_subsample = std::move(picks);
  for (const auto& sel : out.per_subsample)
    for (Index j : sel) out.frequency[j] += 1.0;
  out.frequency /= double(plan.B);
  for (Index j = 0; j < d; ++j) {
    const bool in = plan.threshold > 0.0 ? out.frequency[j] >= plan.threshold
                                         : out.frequency[j] > 0.0;
    if (in) out.selected.push_back(j);
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace conlasso
