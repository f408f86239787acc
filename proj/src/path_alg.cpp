#include "conlasso/losses.hpp"
#include "conlasso/solvers.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <functional>

namespace conlasso {

namespace {

constexpr double kTieRel = 1e-12;

enum class SampleState : char { Quad, Lin, Off };

struct EngineResult {
  std::vector<double> lambdas;
  std::vector<Vector> zs;
  std::vector<Vector> mus;
  std::vector<Index> entry_order;
  long events = 0;
  bool truncated = false;
  double lambda_start = 0.0;
};

// Homotopy for min ||H_q z - t_q||^2 + lin^T z + sum_j (a_j lam + b_j)|z_j|
// subject to G z = 0, traced downward in lam. Regression runs with every
// row permanently quadratic; classification rows move between quadratic,
// linear and inactive branches at margin knees. Coordinates with a_j = 0
// (the mean-shift block) are identity columns whose activation does not
// depend on lam; they are initialized in closed form.
class PathEngine {
 public:
  PathEngine(const Matrix& H, const Vector& t, const Matrix& G, Vector a, Vector b,
             Index shift_offset, bool margin_mode, double knee_lin, long max_breakpoints,
             int stop_after_entries)
      : H_(H),
        t_(t),
        G_(G),
        a_(std::move(a)),
        b_(std::move(b)),
        shift_offset_(shift_offset),
        margin_mode_(margin_mode),
        knee_lin_(knee_lin),
        max_breakpoints_(max_breakpoints),
        stop_after_entries_(stop_after_entries) {
    D_ = H_.cols();
    rows_ = H_.rows();
    k_ = G_.rows();
    in_active_.assign(D_, 0);
    sign_ = Vector::Zero(D_);
    entered_.assign(D_, false);
    if (!margin_mode_) {
      gram_ = 2.0 * (H_.transpose() * H_);
      lin_fixed_ = -2.0 * (H_.transpose() * t_);
    }
    sstate_.assign(rows_, SampleState::Quad);
  }

  // called after every recorded point; returning false stops the trace
  std::function<bool(double lam, const Vector& z, const Vector& mu)> on_record;

  EngineResult run(double lambda_floor);

 private:
  const Matrix& H_;
  const Vector& t_;
  const Matrix& G_;
  Vector a_, b_;
  Index shift_offset_;
  bool margin_mode_;
  double knee_lin_;
  long max_breakpoints_;
  int stop_after_entries_;

  Index D_ = 0, rows_ = 0, k_ = 0;
  Matrix gram_;       // 2 H^T H (regression only)
  Vector lin_fixed_;  // -2 H^T t (regression only)

  std::vector<Index> active_;
  std::vector<int> in_active_;  // position+1, 0 = inactive
  Vector sign_;
  std::vector<SampleState> sstate_;
  std::vector<bool> entered_;

  Vector z0_, z1_, mu0_, mu1_, c0_, c1_, m0_, m1_;

  EngineResult res_;
  bool stop_requested_ = false;

  Vector z_at(double lam) const { return z0_ + lam * z1_; }
  Vector mu_at(double lam) const { return k_ > 0 ? Vector(mu0_ + lam * mu1_) : Vector(0); }

  void mark_entry(Index j) {
    if (a_[j] <= 0.0) return;  // shift coordinates are not features
    if (entered_[j]) return;
    entered_[j] = true;
    res_.entry_order.push_back(j);
  }

  void add_active(Index j, double s) {
    active_.push_back(j);
    in_active_[j] = static_cast<int>(active_.size());
    sign_[j] = s;
  }

  void drop_active(Index j) {
    const int pos = in_active_[j] - 1;
    const Index last = active_.back();
    active_[pos] = last;
    in_active_[last] = pos + 1;
    active_.pop_back();
    in_active_[j] = 0;
    sign_[j] = 0.0;
  }

  // gradient offset: -2 H_q^T t_q (+ linear drift of the Lin branch)
  Vector linear_term() const {
    if (!margin_mode_) return lin_fixed_;
    Vector L = Vector::Zero(D_);
    const double slope = 1.0 - knee_lin_;
    for (Index i = 0; i < rows_; ++i) {
      if (sstate_[i] == SampleState::Quad)
        L -= 2.0 * t_[i] * H_.row(i).transpose();
      else if (sstate_[i] == SampleState::Lin)
        L -= 2.0 * slope * H_.row(i).transpose();
    }
    return L;
  }

  bool refresh_segment() {
    const Index m = static_cast<Index>(active_.size());
    Matrix K = Matrix::Zero(m + k_, m + k_);
    if (!margin_mode_) {
      for (Index p = 0; p < m; ++p)
        for (Index q = 0; q < m; ++q) K(p, q) = gram_(active_[p], active_[q]);
    } else {
      for (Index i = 0; i < rows_; ++i) {
        if (sstate_[i] != SampleState::Quad) continue;
        for (Index p = 0; p < m; ++p) {
          const double hp = H_(i, active_[p]);
          if (hp == 0.0) continue;
          for (Index q = 0; q < m; ++q) K(p, q) += 2.0 * hp * H_(i, active_[q]);
        }
      }
    }
    for (Index r = 0; r < k_; ++r)
      for (Index p = 0; p < m; ++p) {
        K(m + r, p) = G_(r, active_[p]);
        K(p, m + r) = G_(r, active_[p]);
      }

    const Vector L = linear_term();
    Matrix rhs = Matrix::Zero(m + k_, 2);
    for (Index p = 0; p < m; ++p) {
      const Index j = active_[p];
      rhs(p, 0) = -L[j] - b_[j] * sign_[j];
      rhs(p, 1) = -a_[j] * sign_[j];
    }

    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(K);
    Matrix sol = cod.solve(rhs);
    const double scale = K.cwiseAbs().maxCoeff() + rhs.cwiseAbs().maxCoeff() + 1.0;
    if (((K * sol - rhs).cwiseAbs().maxCoeff()) > 1e-8 * scale) return false;

    z0_ = Vector::Zero(D_);
    z1_ = Vector::Zero(D_);
    for (Index p = 0; p < m; ++p) {
      z0_[active_[p]] = sol(p, 0);
      z1_[active_[p]] = sol(p, 1);
    }
    mu0_ = sol.block(m, 0, k_, 1);
    mu1_ = sol.block(m, 1, k_, 1);

    c0_ = gradient_of(z0_) + L;
    c1_ = gradient_dir(z1_);
    if (k_ > 0) {
      c0_ += G_.transpose() * mu0_;
      c1_ += G_.transpose() * mu1_;
    }
    if (margin_mode_) {
      m0_ = H_ * z0_;
      m1_ = H_ * z1_;
    }
    return true;
  }

  // 2 H_q^T H_q z for sparse z (no linear term)
  Vector gradient_of(const Vector& z) const {
    if (!margin_mode_) {
      Vector g = Vector::Zero(D_);
      for (Index j : active_)
        if (z[j] != 0.0) g += z[j] * gram_.col(j);
      return g;
    }
    Vector w = H_ * z;
    Vector g = Vector::Zero(D_);
    for (Index i = 0; i < rows_; ++i)
      if (sstate_[i] == SampleState::Quad && w[i] != 0.0) g += 2.0 * w[i] * H_.row(i).transpose();
    return g;
  }
  Vector gradient_dir(const Vector& z) const { return gradient_of(z); }

  struct Event {
    enum Kind { Leave, Enter, Knee } kind;
    Index idx;          // coordinate or sample
    double sign;        // Enter: new coefficient sign
    SampleState to;     // Knee: new state
    double lam;
  };

  // largest event lambda strictly below lam_cur (within the tie window)
  std::vector<Event> next_events(double lam_cur, double floor) const {
    const double tie = kTieRel * std::max(lam_cur, 1e-300);
    const double hi = lam_cur - tie;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<Event> found;

    auto offer = [&](Event e) {
      if (!std::isfinite(e.lam)) return;
      if (e.lam > hi || e.lam < floor) return;
      if (e.lam > best + tie) {
        best = e.lam;
        found.clear();
        found.push_back(e);
      } else if (e.lam >= best - tie) {
        found.push_back(e);
        if (e.lam > best) best = e.lam;
      }
    };

    for (Index j : active_) {
      if (z1_[j] == 0.0) continue;
      offer({Event::Leave, j, 0.0, SampleState::Quad, -z0_[j] / z1_[j]});
    }
    for (Index j = 0; j < D_; ++j) {
      if (in_active_[j]) continue;
      const double denom_p = c1_[j] - a_[j];
      if (std::abs(denom_p) > 1e-300)
        offer({Event::Enter, j, -1.0, SampleState::Quad, (b_[j] - c0_[j]) / denom_p});
      const double denom_m = c1_[j] + a_[j];
      if (std::abs(denom_m) > 1e-300)
        offer({Event::Enter, j, +1.0, SampleState::Quad, -(b_[j] + c0_[j]) / denom_m});
    }
    if (margin_mode_) {
      for (Index i = 0; i < rows_; ++i) {
        if (m1_[i] == 0.0) continue;
        const double lam1 = (1.0 - m0_[i]) / m1_[i];
        // margin moves by -m1 as lam decreases
        if (m1_[i] > 0.0 && sstate_[i] == SampleState::Off)
          offer({Event::Knee, i, 0.0, SampleState::Quad, lam1});
        if (m1_[i] < 0.0 && sstate_[i] == SampleState::Quad)
          offer({Event::Knee, i, 0.0, SampleState::Off, lam1});
        if (std::isfinite(knee_lin_)) {
          const double lam2 = (knee_lin_ - m0_[i]) / m1_[i];
          if (m1_[i] > 0.0 && sstate_[i] == SampleState::Quad)
            offer({Event::Knee, i, 0.0, SampleState::Lin, lam2});
          if (m1_[i] < 0.0 && sstate_[i] == SampleState::Lin)
            offer({Event::Knee, i, 0.0, SampleState::Quad, lam2});
        }
      }
    }
    return found;
  }

  // re-entry of a coordinate whose constraint is violated right below
  // lam_cur (a leave immediately followed by an enter with flipped sign)
  bool violated_reentry(double lam_cur, Event* ev) const {
    const double tie = kTieRel * std::max(lam_cur, 1e-300);
    const double probe = lam_cur - 2.0 * tie;
    double worst = 0.0;
    Index jworst = -1;
    for (Index j = 0; j < D_; ++j) {
      if (in_active_[j]) continue;
      const double c = c0_[j] + probe * c1_[j];
      const double p = a_[j] * probe + b_[j];
      const double viol = std::abs(c) - p;
      if (viol > worst + 1e-11 * (1.0 + p)) {
        worst = viol;
        jworst = j;
      }
    }
    if (jworst < 0 || worst <= 1e-9 * (1.0 + lam_cur)) return false;
    const double c = c0_[jworst] + probe * c1_[jworst];
    *ev = {Event::Enter, jworst, c > 0 ? -1.0 : 1.0, SampleState::Quad, lam_cur};
    return true;
  }

  void record(double lam) {
    if (!res_.lambdas.empty() &&
        std::abs(res_.lambdas.back() - lam) <= 1e-14 * std::max(1.0, res_.lambdas.back())) {
      res_.zs.back() = z_at(lam);
      res_.mus.back() = mu_at(lam);
      return;
    }
    res_.lambdas.push_back(lam);
    res_.zs.push_back(z_at(lam));
    res_.mus.push_back(mu_at(lam));
    if (on_record && !on_record(lam, res_.zs.back(), res_.mus.back())) stop_requested_ = true;
  }
};

EngineResult PathEngine::run(double lambda_floor) {
  // closed-form start for the lam-independent shift block
  Vector z_init = Vector::Zero(D_);
  if (shift_offset_ >= 0) {
    for (Index j = shift_offset_; j < D_; ++j) {
      const Index row = j - shift_offset_;
      const double tau = 0.5 * b_[j];
      const double yv = t_[row];
      const double mag = std::abs(yv) - tau;
      if (mag > 0.0) {
        z_init[j] = yv > 0 ? mag : -mag;
        add_active(j, yv > 0 ? 1.0 : -1.0);
      }
    }
  }
  if (margin_mode_ && std::isfinite(knee_lin_) && knee_lin_ > 0.0)
    sstate_.assign(rows_, SampleState::Lin);

  // lambda_max of the feature block given the shift block solved
  Vector L = linear_term();
  Vector raw = gradient_of(z_init) + L;
  Vector v(D_);
  Vector wfeat(D_);
  for (Index j = 0; j < D_; ++j) {
    v[j] = -raw[j];
    wfeat[j] = a_[j] > 0.0 ? a_[j] : 1.0;
    if (a_[j] <= 0.0) v[j] = 0.0;  // shift block does not gate lambda_max
  }
  ChebyshevMin cheb = weighted_chebyshev_min(v, G_, wfeat);
  res_.lambda_start = cheb.value;

  z0_ = z_init;
  z1_ = Vector::Zero(D_);
  mu0_ = cheb.mu;
  mu1_ = Vector::Zero(k_);
  record(res_.lambda_start);
  if (res_.lambda_start <= lambda_floor || res_.lambda_start <= 0.0 || stop_requested_)
    return std::move(res_);

  for (Index j : cheb.argmax) {
    if (a_[j] <= 0.0 || in_active_[j]) continue;
    double t = v[j];
    if (k_ > 0) t -= G_.col(j).dot(cheb.mu);
    add_active(j, t >= 0 ? 1.0 : -1.0);
    mark_entry(j);
  }
  if (stop_after_entries_ >= 0 &&
      static_cast<int>(res_.entry_order.size()) >= stop_after_entries_)
    return std::move(res_);

  if (!refresh_segment()) {
    res_.truncated = true;
    return std::move(res_);
  }

  double lam = res_.lambda_start;
  long stall = 0;
  while (true) {
    std::vector<Event> evs = next_events(lam, lambda_floor);
    Event reentry{};
    if (evs.empty() && violated_reentry(lam, &reentry)) evs.push_back(reentry);
    if (evs.empty()) {
      record(lambda_floor);
      break;
    }

    const double lam_next = evs.front().lam;
    if (lam_next >= lam - kTieRel * std::max(lam, 1e-300) * 4.0) {
      if (++stall > 4 * (D_ + rows_))
        throw Error(ErrorCode::DegeneratePath, "homotopy cycling at lambda = " + std::to_string(lam));
    } else {
      stall = 0;
    }

    record(lam_next);
    if (stop_requested_) break;

    // leaves first, then knees, then a single enter (lowest index)
    bool any_leave = false, any_knee = false;
    for (const Event& e : evs) any_leave = any_leave || e.kind == Event::Leave;
    for (const Event& e : evs) any_knee = any_knee || e.kind == Event::Knee;

    if (any_leave) {
      std::vector<Index> to_drop;
      for (const Event& e : evs)
        if (e.kind == Event::Leave) to_drop.push_back(e.idx);
      std::sort(to_drop.begin(), to_drop.end());
      for (Index j : to_drop)
        if (in_active_[j]) drop_active(j);
    } else if (any_knee) {
      for (const Event& e : evs)
        if (e.kind == Event::Knee) sstate_[e.idx] = e.to;
    } else {
      const Event* pick = nullptr;
      for (const Event& e : evs)
        if (e.kind == Event::Enter && (!pick || e.idx < pick->idx)) pick = &e;
      if (pick) {
        add_active(pick->idx, pick->sign);
        mark_entry(pick->idx);
        if (stop_after_entries_ >= 0 &&
            static_cast<int>(res_.entry_order.size()) >= stop_after_entries_)
          break;
      }
    }
    ++res_.events;
    if (res_.events > max_breakpoints_)
      throw Error(ErrorCode::MaxBreakpointsExceeded,
                  "homotopy exceeded the breakpoint cap of " + std::to_string(max_breakpoints_));

    const Vector z_before = z_at(lam_next);
    if (!refresh_segment()) {
      res_.truncated = true;
      break;
    }
    // continuity check: a jump means the new active system is degenerate
    const Vector z_after = z_at(lam_next);
    const double zscale = 1.0 + z_before.cwiseAbs().maxCoeff();
    if ((z_after - z_before).cwiseAbs().maxCoeff() > 1e-6 * zscale) {
      res_.truncated = true;
      break;
    }
    // coordinates sitting at zero must move out with their declared sign
    bool bad_direction = false;
    for (Index j : active_) {
      if (std::abs(z0_[j] + lam_next * z1_[j]) > 1e-10 * zscale) continue;
      if (-z1_[j] * sign_[j] < -1e-12 * (1.0 + std::abs(z1_[j]))) bad_direction = true;
    }
    if (bad_direction) {
      res_.truncated = true;
      break;
    }
    lam = lam_next;
  }
  return std::move(res_);
}

struct EngineInputs {
  Matrix H;
  Vector t;
  Matrix G;
  Vector a, b;
  Index shift_offset = -1;
  bool margin_mode = false;
  double knee_lin = -std::numeric_limits<double>::infinity();
};

EngineInputs engine_inputs(const ProblemData& problem, const Formulation& formulation) {
  EngineInputs in;
  const Index n = problem.n(), d = problem.d();
  switch (formulation.kind) {
    case FormulationKind::R1:
    case FormulationKind::R3: {  // R3 is traced as R1 and reparametrized
      in.H = problem.X;
      in.t = problem.y;
      in.G = problem.C;
      in.a = problem.weights;
      in.b = Vector::Zero(d);
      break;
    }
    case FormulationKind::R2: {
      in.H = Matrix(n, d + n);
      in.H.leftCols(d) = problem.X;
      in.H.rightCols(n) = Matrix::Identity(n, n);
      in.t = problem.y;
      in.G = Matrix(problem.k(), d + n);
      if (problem.k() > 0) {
        in.G.leftCols(d) = problem.C;
        in.G.rightCols(n).setZero();
      }
      in.a = Vector::Zero(d + n);
      in.a.head(d) = problem.weights;
      in.b = Vector::Zero(d + n);
      in.b.tail(n).setConstant(2.0 * formulation.rho);
      in.shift_offset = d;
      break;
    }
    case FormulationKind::C1:
    case FormulationKind::C2: {
      in.H = problem.y.asDiagonal() * problem.X;
      in.t = Vector::Ones(n);
      in.G = problem.C;
      in.a = problem.weights;
      in.b = Vector::Zero(d);
      in.margin_mode = true;
      if (formulation.kind == FormulationKind::C2) in.knee_lin = formulation.rho_class;
      break;
    }
    case FormulationKind::R4:
      throw Error(ErrorCode::IncompatibleMethod, "R4 has no homotopy; use dr");
  }
  return in;
}

PathResult package_path(const ProblemData& problem, const Formulation& formulation,
                        EngineResult er) {
  const Index d = problem.d();
  PathResult out;
  out.kind = PathKind::Breakpoints;
  out.truncated = er.truncated;
  out.num_events = er.events;
  out.entry_order = std::move(er.entry_order);
  out.diagnostics.solver = "path-alg";
  out.diagnostics.iterations = er.events;

  const bool concomitant = formulation.kind == FormulationKind::R3;
  const Index npts = static_cast<Index>(er.lambdas.size());
  out.betas = Matrix(d, npts);
  for (Index i = 0; i < npts; ++i) out.betas.col(i) = er.zs[i].head(d);

  if (!concomitant) {
    out.lambdas = er.lambdas;
    out.aux_param = er.lambdas;
    out.lambda_max = er.lambda_start;
    return out;
  }

  // concomitant reparametrization: the R1 trace at lam' solves R3 at
  // lam = lam' / sigma(beta(lam')); keep the strictly decreasing prefix
  out.lambdas.clear();
  out.aux_param.clear();
  Matrix betas(d, npts);
  Index kept = 0;
  for (Index i = 0; i < npts; ++i) {
    Vector beta = er.zs[i].head(d);
    const double s = std::max(concomitant_sigma(problem.X * beta - problem.y, problem.n()), 1e-12);
    const double lam = er.lambdas[i] / s;
    if (kept > 0 && lam >= out.lambdas.back()) continue;
    out.lambdas.push_back(lam);
    out.aux_param.push_back(er.lambdas[i]);
    out.sigmas.push_back(s);
    betas.col(kept++) = beta;
  }
  out.betas = betas.leftCols(kept);
  out.lambda_max = out.lambdas.empty() ? 0.0 : out.lambdas.front();
  return out;
}

EngineResult run_engine(const ProblemData& problem, const Formulation& formulation,
                        const SolverConfig&, double lambda_floor, int stop_after_entries,
                        std::function<bool(double, const Vector&, const Vector&)> cb) {
  EngineInputs in = engine_inputs(problem, formulation);
  const long cap = 50 * std::max<Index>(in.H.cols(), 1);
  PathEngine eng(in.H, in.t, in.G, in.a, in.b, in.shift_offset, in.margin_mode, in.knee_lin, cap,
                 stop_after_entries);
  eng.on_record = std::move(cb);
  return eng.run(lambda_floor);
}

}  // namespace

PathResult path_alg(const ProblemData& problem, const Formulation& formulation,
                    const SolverConfig& config) {
  validate(problem, formulation);
  if (!method_legal(formulation.kind, SolverMethod::PathAlg))
    throw Error(ErrorCode::IncompatibleMethod,
                std::string("path-alg does not support ") + to_string(formulation.kind));

  if (formulation.kind == FormulationKind::R3) {
    // stop once the reparametrized lambda drops below the floor or sigma
    // collapses (the interpolation regime, where the trace ends)
    const double lam_max_r3 = lambda_zero_threshold(problem, formulation);
    const double floor_r3 = config.path_lambda_min_ratio * lam_max_r3;
    EngineResult er = run_engine(
        problem, formulation, config, 0.0, -1,
        [&](double lam, const Vector& z, const Vector&) {
          Vector beta = z.head(problem.d());
          const double s =
              std::max(concomitant_sigma(problem.X * beta - problem.y, problem.n()), 1e-12);
          return lam / s > floor_r3 && s > 1e-10;
        });
    PathResult out = package_path(problem, formulation, std::move(er));

    // trim the overshoot to an exact endpoint at the floor
    if (out.lambdas.size() >= 2 && out.lambdas.back() < floor_r3) {
      const Index last = static_cast<Index>(out.lambdas.size()) - 1;
      double ahi = out.aux_param[last - 1], alo = out.aux_param[last];
      Vector bhi = out.betas.col(last - 1), blo = out.betas.col(last);
      Vector rhi = problem.X * bhi - problem.y, rlo = problem.X * blo - problem.y;
      double th = 0.0, tl = 1.0;
      for (int it = 0; it < 200; ++it) {
        const double tm = 0.5 * (th + tl);
        Vector r = (1.0 - tm) * rhi + tm * rlo;
        const double ap = (1.0 - tm) * ahi + tm * alo;
        const double s = std::max(concomitant_sigma(r, problem.n()), 1e-12);
        if (ap / s > floor_r3)
          th = tm;
        else
          tl = tm;
      }
      const double tm = 0.5 * (th + tl);
      Vector beta = (1.0 - tm) * bhi + tm * blo;
      const double ap = (1.0 - tm) * ahi + tm * alo;
      const double s =
          std::max(concomitant_sigma(problem.X * beta - problem.y, problem.n()), 1e-12);
      out.betas.col(last) = beta;
      out.aux_param[last] = ap;
      out.lambdas[last] = ap / s;
      out.sigmas[last] = s;
    }
    out.diagnostics.converged = !out.truncated;
    return out;
  }

  const double lam_start = lambda_zero_threshold(problem, formulation);
  const double floor = config.path_lambda_min_ratio * lam_start;
  EngineResult er = run_engine(problem, formulation, config, floor, -1, nullptr);
  PathResult out = package_path(problem, formulation, std::move(er));
  out.diagnostics.converged = !out.truncated;
  return out;
}

PathResult path_alg_first_entries(const ProblemData& problem, const Formulation& formulation,
                                  const SolverConfig& config, int max_entries) {
  validate(problem, formulation);
  if (!method_legal(formulation.kind, SolverMethod::PathAlg))
    throw Error(ErrorCode::IncompatibleMethod,
                std::string("path-alg does not support ") + to_string(formulation.kind));
  const double lam_start = lambda_zero_threshold(problem, formulation);
  const double floor = config.path_lambda_min_ratio * lam_start;
  EngineResult er = run_engine(problem, formulation, config, floor, max_entries, nullptr);
  return package_path(problem, formulation, std::move(er));
}

Solution path_alg_solve(const ProblemData& problem, const Formulation& formulation, double lambda,
                        const SolverConfig& config) {
  validate(problem, formulation);
  if (!method_legal(formulation.kind, SolverMethod::PathAlg))
    throw Error(ErrorCode::IncompatibleMethod,
                std::string("path-alg does not support ") + to_string(formulation.kind));
  if (lambda < 0) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");

  Solution sol;
  sol.lambda = lambda;
  sol.diagnostics.solver = "path-alg";

  if (formulation.kind == FormulationKind::R3) {
    EngineResult er = run_engine(problem, formulation, config, 0.0, -1,
                                 [&](double lam, const Vector& z, const Vector&) {
                                   Vector beta = z.head(problem.d());
                                   const double s = std::max(
                                       concomitant_sigma(problem.X * beta - problem.y,
                                                         problem.n()),
                                       1e-12);
                                   return lam / s > lambda && s > 1e-10;
                                 });
    PathResult path = package_path(problem, formulation, std::move(er));
    const Index last = path.num_points() - 1;
    Vector beta;
    double aux;
    if (last == 0 || path.lambdas[last] > lambda) {
      beta = path.betas.col(last);  // floor never crossed (lambda above start)
      aux = path.aux_param[last];
      if (path.lambdas[0] <= lambda) beta = Vector::Zero(problem.d());
    } else {
      // bisect the final segment for lam'(lambda)
      Vector bhi = path.betas.col(last - 1), blo = path.betas.col(last);
      double ahi = path.aux_param[last - 1], alo = path.aux_param[last];
      Vector rhi = problem.X * bhi - problem.y, rlo = problem.X * blo - problem.y;
      double th = 0.0, tl = 1.0;
      for (int it = 0; it < 200; ++it) {
        const double tm = 0.5 * (th + tl);
        Vector r = (1.0 - tm) * rhi + tm * rlo;
        const double ap = (1.0 - tm) * ahi + tm * alo;
        const double s = std::max(concomitant_sigma(r, problem.n()), 1e-12);
        if (ap / s > lambda)
          th = tm;
        else
          tl = tm;
      }
      const double tm = 0.5 * (th + tl);
      beta = (1.0 - tm) * bhi + tm * blo;
      aux = (1.0 - tm) * ahi + tm * alo;
    }
    sol.beta = beta;
    sol.sigma = optimal_sigma(problem, formulation, beta);
    sol.diagnostics.iterations = path.num_events;
    sol.diagnostics.converged = !path.truncated;
    sol.objective = objective_value(problem, formulation, sol.beta, sol.sigma, lambda);
    sol.diagnostics.feasibility =
        problem.k() > 0 ? (problem.C * sol.beta).cwiseAbs().maxCoeff() : 0.0;
    KktCertificate cert = kkt_certificate(problem, formulation, sol.beta, sol.sigma, lambda);
    sol.diagnostics.kkt_residual = cert.residual;
    sol.dual_mu = cert.mu;
    return sol;
  }

  EngineResult er = run_engine(problem, formulation, config, lambda, -1, nullptr);
  const Vector& z = er.zs.back();
  sol.beta = z.head(problem.d());
  if (er.lambdas.back() > lambda) {
    // the trace could not reach lambda (degenerate active system); the
    // last point is returned with converged = false
    sol.diagnostics.converged = false;
  } else {
    sol.diagnostics.converged = !er.truncated;
  }
  sol.sigma = optimal_sigma(problem, formulation, sol.beta);
  sol.diagnostics.iterations = er.events;
  sol.objective = objective_value(problem, formulation, sol.beta, sol.sigma, lambda);
  sol.diagnostics.feasibility =
      problem.k() > 0 ? (problem.C * sol.beta).cwiseAbs().maxCoeff() : 0.0;
  KktCertificate cert = kkt_certificate(problem, formulation, sol.beta, sol.sigma, lambda);
  sol.diagnostics.kkt_residual = cert.residual;
  sol.dual_mu = cert.mu;
  return sol;
}

Vector path_beta_at(const PathResult& path, const ProblemData& problem,
                    const Formulation& formulation, double lambda) {
  const Index npts = path.num_points();
  if (npts == 0) return Vector::Zero(problem.d());
  if (lambda >= path.lambdas.front()) {
    if (lambda > path.lambda_max) return Vector::Zero(problem.d());
    return path.betas.col(0);
  }
  if (lambda <= path.lambdas.back()) return path.betas.col(npts - 1);

  Index i = 0;
  while (i + 1 < npts && path.lambdas[i + 1] > lambda) ++i;
  const double hi = path.lambdas[i], lo = path.lambdas[i + 1];

  if (formulation.kind != FormulationKind::R3 || path.kind == PathKind::Grid) {
    const double th = (lambda - lo) / (hi - lo);
    return th * path.betas.col(i) + (1.0 - th) * path.betas.col(i + 1);
  }

  // R3 breakpoints are affine in the auxiliary parameter, not in lambda
  Vector bhi = path.betas.col(i), blo = path.betas.col(i + 1);
  Vector rhi = problem.X * bhi - problem.y, rlo = problem.X * blo - problem.y;
  const double ahi = path.aux_param[i], alo = path.aux_param[i + 1];
  double th = 0.0, tl = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double tm = 0.5 * (th + tl);
    Vector r = (1.0 - tm) * rhi + tm * rlo;
    const double ap = (1.0 - tm) * ahi + tm * alo;
    const double s = std::max(concomitant_sigma(r, static_cast<Index>(r.size())), 1e-12);
    if (ap / s > lambda)
      th = tm;
    else
      tl = tm;
  }
  const double tm = 0.5 * (th + tl);
  return (1.0 - tm) * bhi + tm * blo;
}

}  // namespace conlasso
