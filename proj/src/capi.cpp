#include "conlasso.h"

#include "conlasso/data_io.hpp"
#include "conlasso/losses.hpp"
#include "conlasso/model_selection.hpp"
#include "conlasso/solvers.hpp"

#include <chrono>
#include <cstring>
#include <new>
#include <optional>
#include <string>

namespace {

using namespace conlasso;

thread_local std::string g_last_error;

int status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::Ok: return CONLASSO_OK;
    case ErrorCode::InvalidArgument: return CONLASSO_ERR_INVALID_ARG;
    case ErrorCode::DimensionMismatch: return CONLASSO_ERR_DIMENSION;
    case ErrorCode::NonFinite: return CONLASSO_ERR_NON_FINITE;
    case ErrorCode::BadLabels: return CONLASSO_ERR_BAD_LABELS;
    case ErrorCode::BadWeights: return CONLASSO_ERR_BAD_WEIGHTS;
    case ErrorCode::IncompatibleMethod: return CONLASSO_ERR_INCOMPATIBLE_METHOD;
    case ErrorCode::MaxIterExceeded: return CONLASSO_ERR_MAX_ITER;
    case ErrorCode::MaxBreakpointsExceeded:
    case ErrorCode::DegeneratePath: return CONLASSO_ERR_DEGENERATE_PATH;
    case ErrorCode::FoldTooSmall: return CONLASSO_ERR_FOLD_TOO_SMALL;
    case ErrorCode::SubsampleTooSmall: return CONLASSO_ERR_SUBSAMPLE_TOO_SMALL;
    case ErrorCode::Io: return CONLASSO_ERR_IO;
    case ErrorCode::Internal: return CONLASSO_ERR_INTERNAL;
  }
  return CONLASSO_ERR_INTERNAL;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CONLASSO_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return CONLASSO_ERR_INTERNAL;
  }
}

template <typename Fn>
auto guarded_ptr(Fn&& fn) -> decltype(fn()) {
  using Ptr = decltype(fn());
  try {
    return fn();
  } catch (const Error& e) {
    g_last_error = e.what();
    return Ptr(nullptr);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return Ptr(nullptr);
  }
}

}  // namespace

struct conlasso_problem {
  conlasso::ProblemData data;
  conlasso::Formulation formulation;
  conlasso::SolverConfig config;
  std::optional<conlasso::SolverMethod> method_override;
  int threads = 1;
  std::vector<std::string> feature_names;
};

struct conlasso_result {
  conlasso::ResultBox box;
};

extern "C" {

const char* conlasso_version(void) { return "0.1.0"; }

const char* conlasso_status_name(int status) {
  switch (status) {
    case CONLASSO_OK: return "ok";
    case CONLASSO_ERR_INVALID_ARG: return "invalid argument";
    case CONLASSO_ERR_DIMENSION: return "dimension mismatch";
    case CONLASSO_ERR_NON_FINITE: return "non-finite entry";
    case CONLASSO_ERR_BAD_LABELS: return "labels must be +-1";
    case CONLASSO_ERR_BAD_WEIGHTS: return "weights must be strictly positive";
    case CONLASSO_ERR_INCOMPATIBLE_METHOD: return "method incompatible with formulation";
    case CONLASSO_ERR_MAX_ITER: return "iteration limit reached";
    case CONLASSO_ERR_DEGENERATE_PATH: return "degenerate path";
    case CONLASSO_ERR_FOLD_TOO_SMALL: return "fold too small";
    case CONLASSO_ERR_SUBSAMPLE_TOO_SMALL: return "subsample too small";
    case CONLASSO_ERR_IO: return "i/o failure";
    case CONLASSO_ERR_INTERNAL: return "internal failure";
  }
  return "unknown status";
}

const char* conlasso_last_error(void) { return g_last_error.c_str(); }

conlasso_problem* conlasso_problem_create(conlasso_index n, conlasso_index d,
                                          const double* X_rowmajor, const double* y) {
  return guarded_ptr([&]() -> conlasso_problem* {
    if (n < 1 || d < 1 || !X_rowmajor || !y)
      throw Error(ErrorCode::InvalidArgument, "need n >= 1, d >= 1 and non-null arrays");
    Matrix X(n, d);
    for (conlasso_index i = 0; i < n; ++i)
      for (conlasso_index j = 0; j < d; ++j) X(i, j) = X_rowmajor[i * d + j];
    Vector yy(n);
    for (conlasso_index i = 0; i < n; ++i) yy[i] = y[i];
    auto* p = new conlasso_problem();
    p->data = ProblemData::make(std::move(X), std::move(yy));
    return p;
  });
}

conlasso_problem* conlasso_problem_from_csv(const char* x_csv, const char* y_csv,
                                            const char* c_csv_or_null) {
  return guarded_ptr([&]() -> conlasso_problem* {
    if (!x_csv || !y_csv) throw Error(ErrorCode::InvalidArgument, "x and y paths are required");
    CsvTable xt = read_csv(x_csv);
    Matrix X = read_matrix_csv(x_csv);
    Vector y = read_vector_csv(y_csv);
    Matrix C;
    if (c_csv_or_null && std::strlen(c_csv_or_null) > 0) C = read_matrix_csv(c_csv_or_null);
    auto* p = new conlasso_problem();
    p->data = ProblemData::make(std::move(X), std::move(y), std::move(C));
    p->feature_names = xt.header;
    return p;
  });
}

conlasso_problem* conlasso_problem_from_dataset(
    const char* features_csv, const char* response_column, const char* const* compositional,
    conlasso_index n_compositional, int all_compositional, double pseudocount, int closure,
    int log_transform, int zero_sum_row, const char* constraints_csv_or_null) {
  return guarded_ptr([&]() -> conlasso_problem* {
    if (!features_csv || !response_column)
      throw Error(ErrorCode::InvalidArgument, "features csv and response column are required");
    DatasetOptions opts;
    opts.all_compositional = all_compositional != 0;
    for (conlasso_index i = 0; i < n_compositional; ++i)
      opts.compositional.emplace_back(compositional[i]);
    opts.pseudocount = pseudocount;
    opts.closure = closure != 0;
    opts.log_transform = log_transform != 0;
    opts.zero_sum_row = zero_sum_row != 0;
    if (constraints_csv_or_null) opts.constraints_csv = constraints_csv_or_null;
    Dataset ds = load_dataset(features_csv, response_column, opts);
    auto* p = new conlasso_problem();
    p->data = ProblemData::make(std::move(ds.X), std::move(ds.y), std::move(ds.C));
    p->feature_names = std::move(ds.feature_names);
    return p;
  });
}

conlasso_problem* conlasso_problem_from_synthetic(conlasso_index n, conlasso_index d,
                                                  conlasso_index d_nonzero, conlasso_index k,
                                                  double sigma, int zerosum, uint64_t seed) {
  return guarded_ptr([&]() -> conlasso_problem* {
    SyntheticSpec spec{n, d, d_nonzero, k, sigma, zerosum != 0, seed};
    SyntheticData data = conlasso::random_data(spec);
    auto* p = new conlasso_problem();
    p->data = ProblemData::make(std::move(data.X), std::move(data.y), std::move(data.C));
    return p;
  });
}

void conlasso_problem_free(conlasso_problem* p) { delete p; }

int conlasso_problem_set_constraints(conlasso_problem* p, conlasso_index k,
                                     const double* C_rowmajor) {
  return guarded([&]() {
    if (!p) throw Error(ErrorCode::InvalidArgument, "null problem");
    if (k > 0 && !C_rowmajor) throw Error(ErrorCode::InvalidArgument, "null constraint matrix");
    const conlasso_index d = p->data.d();
    Matrix C(k, d);
    for (conlasso_index r = 0; r < k; ++r)
      for (conlasso_index j = 0; j < d; ++j) C(r, j) = C_rowmajor[r * d + j];
    p->data.C = std::move(C);
    return CONLASSO_OK;
  });
}

int conlasso_problem_set_weights(conlasso_problem* p, const double* w) {
  return guarded([&]() {
    if (!p || !w) throw Error(ErrorCode::InvalidArgument, "null argument");
    Vector ww(p->data.d());
    for (conlasso_index j = 0; j < p->data.d(); ++j) ww[j] = w[j];
    p->data.weights = std::move(ww);
    return CONLASSO_OK;
  });
}

int conlasso_problem_set_formulation(conlasso_problem* p, const char* kind, double rho,
                                     double rho_class) {
  return guarded([&]() {
    if (!p || !kind) throw Error(ErrorCode::InvalidArgument, "null argument");
    auto k = formulation_from_string(kind);
    if (!k) throw Error(ErrorCode::InvalidArgument, std::string("unknown formulation ") + kind);
    p->formulation.kind = *k;
    if (rho > 0.0) p->formulation.rho = rho;
    if (rho_class < 1.0) p->formulation.rho_class = rho_class;
    return CONLASSO_OK;
  });
}

int conlasso_problem_set_solver(conlasso_problem* p, const char* method, int64_t max_iter,
                                double tol, double lam_min_ratio) {
  return guarded([&]() {
    if (!p) throw Error(ErrorCode::InvalidArgument, "null problem");
    if (method && std::strlen(method) > 0 && std::string(method) != "auto") {
      auto m = method_from_string(method);
      if (!m) throw Error(ErrorCode::InvalidArgument, std::string("unknown method ") + method);
      p->method_override = *m;
    } else {
      p->method_override.reset();
    }
    if (max_iter > 0) p->config.max_iter = max_iter;
    if (tol > 0.0) p->config.tol = tol;
    if (lam_min_ratio > 0.0 && lam_min_ratio < 1.0)
      p->config.path_lambda_min_ratio = lam_min_ratio;
    return CONLASSO_OK;
  });
}

int conlasso_problem_set_threads(conlasso_problem* p, int threads) {
  return guarded([&]() {
    if (!p) throw Error(ErrorCode::InvalidArgument, "null problem");
    p->threads = threads;
    return CONLASSO_OK;
  });
}

int conlasso_problem_validate(const conlasso_problem* p) {
  return guarded([&]() {
    if (!p) throw Error(ErrorCode::InvalidArgument, "null problem");
    validate(p->data, p->formulation);
    return CONLASSO_OK;
  });
}

conlasso_index conlasso_problem_n(const conlasso_problem* p) { return p ? p->data.n() : 0; }
conlasso_index conlasso_problem_d(const conlasso_problem* p) { return p ? p->data.d() : 0; }
conlasso_index conlasso_problem_k(const conlasso_problem* p) { return p ? p->data.k() : 0; }

int conlasso_lambda_max(const conlasso_problem* p, double* out) {
  return guarded([&]() {
    if (!p || !out) throw Error(ErrorCode::InvalidArgument, "null argument");
    validate(p->data, p->formulation);
    *out = compute_lambda_max(p->data, p->formulation);
    return CONLASSO_OK;
  });
}

namespace {

int finish_result(conlasso_problem* p, conlasso::ResultBox box, conlasso_result** out,
                  double seconds, bool converged) {
  box.runtime_seconds = seconds;
  box.converged = converged;
  box.formulation = to_string(p->formulation.kind);
  box.feature_names = p->feature_names;
  box.lambda_max = compute_lambda_max(p->data, p->formulation);
  *out = new conlasso_result{std::move(box)};
  if (!converged) {
    g_last_error = "iteration limit reached before the tolerance";
    return CONLASSO_ERR_MAX_ITER;
  }
  return CONLASSO_OK;
}

}  // namespace

int conlasso_solve_fixed(conlasso_problem* p, double lam, int rescaled, int theory,
                         uint64_t seed, conlasso_result** out) {
  return guarded([&]() {
    if (!p || !out) throw Error(ErrorCode::InvalidArgument, "null argument");
    const auto t0 = std::chrono::steady_clock::now();
    FixedLambdaPlan plan;
    plan.lam = lam;
    plan.rescaled = rescaled != 0;
    plan.theory = theory != 0;
    Solution sol =
        run_fixed_lambda(p->data, p->formulation, plan, p->config, p->method_override);
    ResultBox box;
    box.kind = ResultBox::Kind::Fixed;
    box.task = "fixed";
    box.method = sol.diagnostics.solver;
    box.lambda = sol.lambda;
    box.seed = seed;
    const bool ok = sol.diagnostics.converged;
    box.solution = std::move(sol);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return finish_result(p, std::move(box), out, secs, ok);
  });
}

int conlasso_solve_path(conlasso_problem* p, double lam_min_ratio, conlasso_index num_grid,
                        uint64_t seed, conlasso_result** out) {
  return guarded([&]() {
    if (!p || !out) throw Error(ErrorCode::InvalidArgument, "null argument");
    const auto t0 = std::chrono::steady_clock::now();
    PathPlan plan;
    if (lam_min_ratio > 0.0 && lam_min_ratio < 1.0) plan.lambda_min_ratio = lam_min_ratio;
    if (num_grid > 1) plan.num_grid = static_cast<int>(num_grid);
    PathResult path = run_path(p->data, p->formulation, plan, p->config, p->method_override);
    ResultBox box;
    box.kind = ResultBox::Kind::Path;
    box.task = "path";
    box.method = path.diagnostics.solver;
    box.seed = seed;
    const bool ok = path.diagnostics.converged;
    box.path = std::move(path);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return finish_result(p, std::move(box), out, secs, ok);
  });
}

int conlasso_run_cv(conlasso_problem* p, conlasso_index folds, conlasso_index grid_size,
                    const char* rule, double lam_min_ratio, uint64_t seed,
                    conlasso_result** out) {
  return guarded([&]() {
    if (!p || !out) throw Error(ErrorCode::InvalidArgument, "null argument");
    const auto t0 = std::chrono::steady_clock::now();
    CVPlan plan;
    if (folds > 0) plan.folds = static_cast<int>(folds);
    if (grid_size > 1) plan.grid_size = static_cast<int>(grid_size);
    if (rule && std::string(rule) == "1se") plan.rule = CVRule::OneSE;
    if (lam_min_ratio > 0.0 && lam_min_ratio < 1.0) plan.lambda_min_ratio = lam_min_ratio;
    plan.seed = seed;
    CVResult cv =
        run_cv(p->data, p->formulation, plan, p->config, p->threads, p->method_override);
    ResultBox box;
    box.kind = ResultBox::Kind::CV;
    box.task = "cv";
    box.method = cv.refit.diagnostics.solver;
    box.lambda = cv.refit.lambda;
    box.seed = seed;
    const bool ok = cv.refit.diagnostics.converged;
    box.cv = std::move(cv);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return finish_result(p, std::move(box), out, secs, ok);
  });
}

int conlasso_run_stabsel(conlasso_problem* p, const char* mode, conlasso_index q,
                         conlasso_index B, double fraction, double threshold, double lam,
                         int rescaled, double lam_min_ratio, uint64_t seed,
                         conlasso_result** out) {
  return guarded([&]() {
    if (!p || !out) throw Error(ErrorCode::InvalidArgument, "null argument");
    const auto t0 = std::chrono::steady_clock::now();
    StabSelPlan plan;
    if (mode && std::strlen(mode) > 0) {
      auto m = stabsel_mode_from_string(mode);
      if (!m) throw Error(ErrorCode::InvalidArgument, std::string("unknown mode ") + mode);
      plan.mode = *m;
    }
    if (q > 0) plan.q = static_cast<int>(q);
    if (B > 0) plan.B = static_cast<int>(B);
    if (fraction > 0.0 && fraction <= 1.0) plan.subsample_fraction = fraction;
    if (threshold >= 0.0 && threshold <= 1.0) plan.threshold = threshold;
    if (lam >= 0.0) plan.lam = lam;
    plan.rescaled = rescaled != 0;
    if (lam_min_ratio > 0.0 && lam_min_ratio < 1.0) plan.lambda_min_ratio = lam_min_ratio;
    plan.seed = seed;
    StabSelResult ss = run_stability_selection(p->data, p->formulation, plan, p->config,
                                               p->threads, p->method_override);
    ResultBox box;
    box.kind = ResultBox::Kind::StabSel;
    box.task = "stabsel";
    box.method = p->method_override
                     ? to_string(*p->method_override)
                     : to_string(default_method_for(p->formulation.kind, Task::StabSel, 1.0));
    if (plan.mode == StabSelMode::FixedLam) box.lambda = ss.lambda;
    box.seed = seed;
    box.stabsel = std::move(ss);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return finish_result(p, std::move(box), out, secs, true);
  });
}

int conlasso_result_kind(const conlasso_result* r) {
  if (!r) return -1;
  switch (r->box.kind) {
    case ResultBox::Kind::Fixed: return 0;
    case ResultBox::Kind::Path: return 1;
    case ResultBox::Kind::CV: return 2;
    case ResultBox::Kind::StabSel: return 3;
  }
  return -1;
}

conlasso_index conlasso_result_dim(const conlasso_result* r) {
  if (!r) return 0;
  switch (r->box.kind) {
    case ResultBox::Kind::Fixed: return r->box.solution.beta.size();
    case ResultBox::Kind::Path: return r->box.path.betas.rows();
    case ResultBox::Kind::CV: return r->box.cv.refit.beta.size();
    case ResultBox::Kind::StabSel: return r->box.stabsel.frequency.size();
  }
  return 0;
}

int conlasso_result_beta(const conlasso_result* r, double* buf, conlasso_index len) {
  return guarded([&]() {
    if (!r || !buf) throw Error(ErrorCode::InvalidArgument, "null argument");
    const Vector* b = nullptr;
    if (r->box.kind == ResultBox::Kind::Fixed)
      b = &r->box.solution.beta;
    else if (r->box.kind == ResultBox::Kind::CV)
      b = &r->box.cv.refit.beta;
    else
      throw Error(ErrorCode::InvalidArgument, "result holds no single coefficient vector");
    if (len < b->size()) throw Error(ErrorCode::InvalidArgument, "buffer too small");
    for (Index j = 0; j < b->size(); ++j) buf[j] = (*b)[j];
    return CONLASSO_OK;
  });
}

conlasso_index conlasso_result_path_points(const conlasso_result* r) {
  if (!r || r->box.kind != ResultBox::Kind::Path) return 0;
  return r->box.path.num_points();
}

int conlasso_result_path_lambdas(const conlasso_result* r, double* buf, conlasso_index len) {
  return guarded([&]() {
    if (!r || !buf || r->box.kind != ResultBox::Kind::Path)
      throw Error(ErrorCode::InvalidArgument, "not a path result");
    const auto& l = r->box.path.lambdas;
    if (len < conlasso_index(l.size()))
      throw Error(ErrorCode::InvalidArgument, "buffer too small");
    for (std::size_t i = 0; i < l.size(); ++i) buf[i] = l[i];
    return CONLASSO_OK;
  });
}

int conlasso_result_path_betas(const conlasso_result* r, double* buf, conlasso_index len) {
  return guarded([&]() {
    if (!r || !buf || r->box.kind != ResultBox::Kind::Path)
      throw Error(ErrorCode::InvalidArgument, "not a path result");
    const Matrix& B = r->box.path.betas;
    const conlasso_index need = B.rows() * B.cols();
    if (len < need) throw Error(ErrorCode::InvalidArgument, "buffer too small");
    for (Index pt = 0; pt < B.cols(); ++pt)
      for (Index j = 0; j < B.rows(); ++j) buf[pt * B.rows() + j] = B(j, pt);
    return CONLASSO_OK;
  });
}

int conlasso_result_frequencies(const conlasso_result* r, double* buf, conlasso_index len) {
  return guarded([&]() {
    if (!r || !buf || r->box.kind != ResultBox::Kind::StabSel)
      throw Error(ErrorCode::InvalidArgument, "not a stability result");
    const Vector& f = r->box.stabsel.frequency;
    if (len < f.size()) throw Error(ErrorCode::InvalidArgument, "buffer too small");
    for (Index j = 0; j < f.size(); ++j) buf[j] = f[j];
    return CONLASSO_OK;
  });
}

int conlasso_result_selected(const conlasso_result* r, conlasso_index* buf, conlasso_index len,
                             conlasso_index* count) {
  return guarded([&]() {
    if (!r || !count) throw Error(ErrorCode::InvalidArgument, "null argument");
    std::vector<Index> sel = r->box.selected();
    *count = conlasso_index(sel.size());
    if (buf) {
      if (len < conlasso_index(sel.size()))
        throw Error(ErrorCode::InvalidArgument, "buffer too small");
      for (std::size_t i = 0; i < sel.size(); ++i) buf[i] = sel[i];
    }
    return CONLASSO_OK;
  });
}

char* conlasso_result_summary_json(const conlasso_result* r) {
  return guarded_ptr([&]() -> char* {
    if (!r) throw Error(ErrorCode::InvalidArgument, "null result");
    std::string s = summary_json(r->box);
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
  });
}

int conlasso_result_save(const conlasso_result* r, const char* out_dir) {
  return guarded([&]() {
    if (!r || !out_dir) throw Error(ErrorCode::InvalidArgument, "null argument");
    save_results(r->box, out_dir);
    return CONLASSO_OK;
  });
}

void conlasso_result_free(conlasso_result* r) { delete r; }
void conlasso_string_free(char* s) { delete[] s; }

int conlasso_synth_write(conlasso_index n, conlasso_index d, conlasso_index d_nonzero,
                         conlasso_index k, double sigma, int zerosum, uint64_t seed,
                         const char* out_dir) {
  return guarded([&]() {
    if (!out_dir) throw Error(ErrorCode::InvalidArgument, "null output directory");
    SyntheticSpec spec{n, d, d_nonzero, k, sigma, zerosum != 0, seed};
    SyntheticData data = conlasso::random_data(spec);
    write_synthetic(data, spec, out_dir);
    return CONLASSO_OK;
  });
}

int conlasso_plotdata(const char* result_dir, const char* kind, const char* out_csv) {
  return guarded([&]() {
    if (!result_dir || !kind || !out_csv)
      throw Error(ErrorCode::InvalidArgument, "null argument");
    emit_plotdata(result_dir, kind, out_csv);
    return CONLASSO_OK;
  });
}

}  // extern "C"
