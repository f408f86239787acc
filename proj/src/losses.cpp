#include "conlasso/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace conlasso {

const char* to_string(FormulationKind k) {
  switch (k) {
    case FormulationKind::R1: return "R1";
    case FormulationKind::R2: return "R2";
    case FormulationKind::R3: return "R3";
    case FormulationKind::R4: return "R4";
    case FormulationKind::C1: return "C1";
    case FormulationKind::C2: return "C2";
  }
  return "?";
}

std::optional<FormulationKind> formulation_from_string(std::string_view s) {
  if (s == "R1") return FormulationKind::R1;
  if (s == "R2") return FormulationKind::R2;
  if (s == "R3") return FormulationKind::R3;
  if (s == "R4") return FormulationKind::R4;
  if (s == "C1") return FormulationKind::C1;
  if (s == "C2") return FormulationKind::C2;
  return std::nullopt;
}

const char* to_string(SolverMethod m) {
  switch (m) {
    case SolverMethod::PathAlg: return "path-alg";
    case SolverMethod::DR: return "dr";
    case SolverMethod::PPDS: return "p-pds";
    case SolverMethod::PFPDS: return "pf-pds";
    case SolverMethod::Oracle: return "oracle";
  }
  return "?";
}

std::optional<SolverMethod> method_from_string(std::string_view s) {
  if (s == "path-alg") return SolverMethod::PathAlg;
  if (s == "dr") return SolverMethod::DR;
  if (s == "p-pds") return SolverMethod::PPDS;
  if (s == "pf-pds") return SolverMethod::PFPDS;
  if (s == "oracle") return SolverMethod::Oracle;
  return std::nullopt;
}

const char* to_string(StabSelMode m) {
  switch (m) {
    case StabSelMode::FixedLam: return "fixed-lam";
    case StabSelMode::FirstQ: return "first-q";
    case StabSelMode::MaxCoef: return "max-coef";
  }
  return "?";
}

std::optional<StabSelMode> stabsel_mode_from_string(std::string_view s) {
  if (s == "fixed-lam") return StabSelMode::FixedLam;
  if (s == "first-q") return StabSelMode::FirstQ;
  if (s == "max-coef") return StabSelMode::MaxCoef;
  return std::nullopt;
}

bool method_legal(FormulationKind kind, SolverMethod m) {
  if (m == SolverMethod::Oracle) return true;
  switch (kind) {
    case FormulationKind::R1:
    case FormulationKind::R2:
      return true;
    case FormulationKind::R3:
      return m == SolverMethod::PathAlg || m == SolverMethod::DR;
    case FormulationKind::R4:
      return m == SolverMethod::DR;
    case FormulationKind::C1:
    case FormulationKind::C2:
      return m == SolverMethod::PathAlg;
  }
  return false;
}

ProblemData ProblemData::make(Matrix X, Vector y, Matrix C, Vector weights) {
  ProblemData p;
  p.X = std::move(X);
  p.y = std::move(y);
  if (C.size() == 0) C = Matrix(0, p.X.cols());
  p.C = std::move(C);
  if (weights.size() == 0) weights = Vector::Ones(p.X.cols());
  p.weights = std::move(weights);
  return p;
}

void validate(const ProblemData& problem, const Formulation& formulation) {
  std::vector<std::string> errs;
  ErrorCode first = ErrorCode::Ok;
  auto add = [&](ErrorCode c, std::string msg) {
    if (first == ErrorCode::Ok) first = c;
    errs.push_back(std::move(msg));
  };

  const Index n = problem.X.rows(), d = problem.X.cols();
  if (n < 1 || d < 1) add(ErrorCode::DimensionMismatch, "X must have at least 1 row and 1 column");
  if (problem.y.size() != n) {
    std::ostringstream os;
    os << "y has " << problem.y.size() << " entries, expected n=" << n;
    add(ErrorCode::DimensionMismatch, os.str());
  }
  if (problem.C.size() > 0 && problem.C.cols() != d) {
    std::ostringstream os;
    os << "C has " << problem.C.cols() << " columns, expected d=" << d;
    add(ErrorCode::DimensionMismatch, os.str());
  }
  if (problem.weights.size() != d) {
    std::ostringstream os;
    os << "weights has " << problem.weights.size() << " entries, expected d=" << d;
    add(ErrorCode::DimensionMismatch, os.str());
  }

  if (!problem.X.allFinite()) add(ErrorCode::NonFinite, "X contains a non-finite entry");
  if (!problem.y.allFinite()) add(ErrorCode::NonFinite, "y contains a non-finite entry");
  if (problem.C.size() > 0 && !problem.C.allFinite())
    add(ErrorCode::NonFinite, "C contains a non-finite entry");
  if (problem.weights.size() == d) {
    for (Index j = 0; j < d; ++j) {
      if (!(problem.weights[j] > 0.0) || !std::isfinite(problem.weights[j])) {
        std::ostringstream os;
        os << "weights[" << j << "] = " << problem.weights[j] << " is not strictly positive";
        add(ErrorCode::BadWeights, os.str());
        break;
      }
    }
  }

  if (!(formulation.rho > 0.0))
    add(ErrorCode::InvalidArgument, "rho must be > 0");
  if (!(formulation.rho_class < 1.0))
    add(ErrorCode::InvalidArgument, "rho_class must be < 1");

  if (is_classification(formulation.kind) && problem.y.size() == n) {
    for (Index i = 0; i < n; ++i) {
      if (problem.y[i] != 1.0 && problem.y[i] != -1.0) {
        std::ostringstream os;
        os << "classification labels must be +-1, y[" << i << "] = " << problem.y[i];
        add(ErrorCode::BadLabels, os.str());
        break;
      }
    }
  }

  if (!errs.empty()) {
    std::string joined;
    for (std::size_t i = 0; i < errs.size(); ++i) {
      if (i) joined += "; ";
      joined += errs[i];
    }
    throw Error(first, joined);
  }
}

double huber_value(const Eigen::Ref<const Vector>& r, double rho) {
  if (!(rho > 0.0)) throw Error(ErrorCode::InvalidArgument, "huber_value: rho must be > 0");
  double acc = 0.0;
  for (Index i = 0; i < r.size(); ++i) {
    const double a = std::abs(r[i]);
    acc += (a <= rho) ? a * a : 2.0 * rho * a - rho * rho;
  }
  return acc;
}

Vector huber_gradient(const Eigen::Ref<const Vector>& r, double rho) {
  Vector g(r.size());
  for (Index i = 0; i < r.size(); ++i) {
    const double t = r[i];
    g[i] = (std::abs(t) <= rho) ? 2.0 * t : 2.0 * rho * (t > 0 ? 1.0 : -1.0);
  }
  return g;
}

double squared_hinge_value(const Eigen::Ref<const Vector>& margins) {
  double acc = 0.0;
  for (Index i = 0; i < margins.size(); ++i) {
    const double m = margins[i];
    if (m < 1.0) acc += (1.0 - m) * (1.0 - m);
  }
  return acc;
}

double huberized_hinge_value(const Eigen::Ref<const Vector>& margins, double rho_class) {
  if (!(rho_class < 1.0))
    throw Error(ErrorCode::InvalidArgument, "huberized_hinge_value: rho_class must be < 1");
  double acc = 0.0;
  for (Index i = 0; i < margins.size(); ++i) {
    const double m = margins[i];
    if (m >= 1.0) continue;
    if (m >= rho_class)
      acc += (1.0 - m) * (1.0 - m);
    else
      acc += (1.0 - rho_class) * (1.0 + rho_class - 2.0 * m);
  }
  return acc;
}

double squared_hinge_derivative(double m) { return m < 1.0 ? 2.0 * (m - 1.0) : 0.0; }

double huberized_hinge_derivative(double m, double rho_class) {
  if (m >= 1.0) return 0.0;
  if (m >= rho_class) return 2.0 * (m - 1.0);
  return -2.0 * (1.0 - rho_class);
}

namespace {

void require_sigma(const Formulation& f, const std::optional<double>& sigma) {
  if (!is_concomitant(f.kind)) return;
  if (!sigma.has_value())
    throw Error(ErrorCode::InvalidArgument,
                std::string("sigma is required for formulation ") + to_string(f.kind));
  if (!(*sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be > 0");
}

Vector margins_of(const ProblemData& p, const Vector& beta) {
  return p.y.cwiseProduct(p.X * beta);
}

}  // namespace

double loss_value(const ProblemData& problem, const Formulation& formulation,
                  const Vector& beta, std::optional<double> sigma) {
  require_sigma(formulation, sigma);
  const Index n = problem.n();
  switch (formulation.kind) {
    case FormulationKind::R1: {
      return (problem.X * beta - problem.y).squaredNorm();
    }
    case FormulationKind::R2: {
      return huber_value(problem.X * beta - problem.y, formulation.rho);
    }
    case FormulationKind::R3: {
      const double s = *sigma;
      return (problem.X * beta - problem.y).squaredNorm() / s + 0.5 * double(n) * s;
    }
    case FormulationKind::R4: {
      const double s = *sigma;
      Vector r = (problem.X * beta - problem.y) / s;
      return (huber_value(r, formulation.rho) + double(n)) * s;
    }
    case FormulationKind::C1: {
      return squared_hinge_value(margins_of(problem, beta));
    }
    case FormulationKind::C2: {
      return huberized_hinge_value(margins_of(problem, beta), formulation.rho_class);
    }
  }
  throw Error(ErrorCode::Internal, "unknown formulation");
}

Vector loss_gradient(const ProblemData& problem, const Formulation& formulation,
                     const Vector& beta, std::optional<double> sigma) {
  require_sigma(formulation, sigma);
  switch (formulation.kind) {
    case FormulationKind::R1:
      return 2.0 * (problem.X.transpose() * (problem.X * beta - problem.y));
    case FormulationKind::R2:
      return problem.X.transpose() * huber_gradient(problem.X * beta - problem.y, formulation.rho);
    case FormulationKind::R3:
      return 2.0 * (problem.X.transpose() * (problem.X * beta - problem.y)) / *sigma;
    case FormulationKind::R4: {
      Vector r = (problem.X * beta - problem.y) / *sigma;
      return problem.X.transpose() * huber_gradient(r, formulation.rho);
    }
    case FormulationKind::C1:
    case FormulationKind::C2: {
      Vector m = margins_of(problem, beta);
      Vector dl(m.size());
      for (Index i = 0; i < m.size(); ++i)
        dl[i] = formulation.kind == FormulationKind::C1
                    ? squared_hinge_derivative(m[i])
                    : huberized_hinge_derivative(m[i], formulation.rho_class);
      return problem.X.transpose() * problem.y.cwiseProduct(dl);
    }
  }
  throw Error(ErrorCode::Internal, "unknown formulation");
}

double penalty_value(const ProblemData& problem, double lambda, const Vector& beta) {
  return lambda * problem.weights.cwiseProduct(beta.cwiseAbs()).sum();
}

double objective_value(const ProblemData& problem, const Formulation& formulation,
                       const Vector& beta, std::optional<double> sigma, double lambda) {
  return loss_value(problem, formulation, beta, sigma) + penalty_value(problem, lambda, beta);
}

double concomitant_sigma(const Eigen::Ref<const Vector>& residual, Index n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "concomitant_sigma: n must be >= 1");
  return std::sqrt(2.0 / double(n)) * residual.norm();
}

double concomitant_sigma_huber(const Eigen::Ref<const Vector>& residual, double rho, Index n) {
  if (!(rho > 0.0)) throw Error(ErrorCode::InvalidArgument, "rho must be > 0");
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "n must be >= 1");
  std::vector<double> a(residual.size());
  for (Index i = 0; i < residual.size(); ++i) a[i] = std::abs(residual[i]);
  std::sort(a.begin(), a.end());
  const Index m = static_cast<Index>(a.size());

  // On [a_j/rho, a_{j+1}/rho] the objective is A/sigma + B*sigma + const
  // with A the sum of squares of the j smallest |r_i| and
  // B = n - rho^2 (m - j). The function is convex, so the best interior
  // or endpoint candidate over all intervals is the global minimizer.
  double best_sigma = 0.0;
  double best_val = std::numeric_limits<double>::infinity();
  auto eval = [&](double s) {
    if (s <= 0.0) {
      double v = 0.0;
      for (double ai : a) v += 2.0 * rho * ai;
      return v;
    }
    Vector r = residual / s;
    return (huber_value(r, rho) + double(n)) * s;
  };
  auto consider = [&](double s) {
    if (s < 0.0) return;
    double v = eval(s);
    if (v < best_val) {
      best_val = v;
      best_sigma = s;
    }
  };

  double A = 0.0;
  consider(0.0);
  for (Index j = 0; j <= m; ++j) {
    const double lo = (j == 0) ? 0.0 : a[j - 1] / rho;
    const double hi = (j == m) ? std::numeric_limits<double>::infinity() : a[j] / rho;
    const double B = double(n) - rho * rho * double(m - j);
    if (B > 0.0 && A >= 0.0) {
      const double s = std::sqrt(A / B);
      if (s >= lo && s <= hi) consider(s);
    }
    if (std::isfinite(hi)) consider(hi);
    if (j < m) A += a[j] * a[j];
  }
  return best_sigma;
}

std::optional<double> optimal_sigma(const ProblemData& problem, const Formulation& formulation,
                                    const Vector& beta) {
  if (!is_concomitant(formulation.kind)) return std::nullopt;
  Vector r = problem.X * beta - problem.y;
  double s = (formulation.kind == FormulationKind::R3)
                 ? concomitant_sigma(r, problem.n())
                 : concomitant_sigma_huber(r, formulation.rho, problem.n());
  return std::max(s, 1e-12);
}

}  // namespace conlasso
