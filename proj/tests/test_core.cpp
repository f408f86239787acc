#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "conlasso/losses.hpp"
#include "conlasso/prox.hpp"
#include "conlasso/rng.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace conlasso;

namespace {

Matrix random_matrix(Rng& rng, Index r, Index c) {
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.next_normal();
  return m;
}

Vector random_vector(Rng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.next_normal();
  return v;
}

ProblemData toy_problem() {
  Matrix X(3, 2);
  X << 1, 0, 0, 1, 1, 1;
  Vector y(3);
  y << 1, 2, 3;
  return ProblemData::make(X, y);
}

}  // namespace

TEST_CASE("validate accepts well-formed input") {
  CHECK_NOTHROW(validate(toy_problem(), Formulation{}));
}

TEST_CASE("validate rejects a response length mismatch") {
  ProblemData p = toy_problem();
  p.y = Vector::Ones(4);
  try {
    validate(p, Formulation{});
    FAIL("expected a dimension error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("validate rejects non +-1 labels for classification") {
  ProblemData p = toy_problem();
  p.y << 0.5, 1, -1;
  Formulation f;
  f.kind = FormulationKind::C1;
  try {
    validate(p, f);
    FAIL("expected a label error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadLabels);
  }
}

TEST_CASE("validate rejects nonpositive weights and non-finite entries") {
  ProblemData p = toy_problem();
  p.weights[0] = 0.0;
  CHECK_THROWS_AS(validate(p, Formulation{}), Error);
  p = toy_problem();
  p.X(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate(p, Formulation{}), Error);
}

TEST_CASE("huber value on both branches") {
  Vector r1(1);
  r1 << 1.0;
  CHECK(huber_value(r1, 1.345) == doctest::Approx(1.0).epsilon(1e-14));

  Vector r2(1);
  r2 << 2.0;
  // linear branch: 2*rho*|t| - rho^2 = 2*1.345*2 - 1.345^2
  CHECK(huber_value(r2, 1.345) == doctest::Approx(3.570975).epsilon(1e-12));

  Vector z = Vector::Zero(3);
  CHECK(huber_value(z, 0.7) == 0.0);
}

TEST_CASE("huber equals the infimal convolution with 2 rho |s|") {
  // phi(t) = min_s (t-s)^2 + 2 rho |s|, checked per coordinate by golden
  // section on the independent objective
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const double rho = 0.3 + 2.0 * rng.next_uniform();
    Vector r = random_vector(rng, 4) * 2.0;
    double expected = 0.0;
    for (Index i = 0; i < r.size(); ++i) {
      const double t = r[i];
      auto f = [&](double s) { return (t - s) * (t - s) + 2.0 * rho * std::abs(s); };
      const double s_star = oracles::golden_min(f, -2.0 * std::abs(t) - 1.0,
                                                2.0 * std::abs(t) + 1.0);
      expected += f(s_star);
    }
    CHECK(huber_value(r, rho) == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("huber tends to the squared norm for large rho") {
  Rng rng(12);
  Vector r = random_vector(rng, 6);
  const double rho = 10.0 * r.cwiseAbs().maxCoeff();
  CHECK(huber_value(r, rho) == doctest::Approx(r.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("squared hinge piecewise values") {
  Vector m(1);
  m << 2.0;
  CHECK(squared_hinge_value(m) == 0.0);
  m << 0.5;
  CHECK(squared_hinge_value(m) == doctest::Approx(0.25));
  m << -1.0;
  CHECK(squared_hinge_value(m) == doctest::Approx(4.0));
}

TEST_CASE("huberized hinge three branches") {
  Vector m(1);
  m << 1.5;
  CHECK(huberized_hinge_value(m, -1.0) == 0.0);
  m << 0.0;
  CHECK(huberized_hinge_value(m, -1.0) == doctest::Approx(1.0));
  m << -2.0;
  // (1-rho)(1+rho-2r) with rho=-1, r=-2
  CHECK(huberized_hinge_value(m, -1.0) == doctest::Approx(8.0));
}

TEST_CASE("huberized hinge is C1 at both knees") {
  for (double rho : {-1.0, -0.3, 0.4}) {
    for (double knee : {rho, 1.0}) {
      auto f = [&](double r) {
        Vector m(1);
        m << r;
        return huberized_hinge_value(m, rho);
      };
      const double h = 1e-6;
      const double left = oracles::numeric_derivative(f, knee - 10 * h, h);
      const double right = oracles::numeric_derivative(f, knee + 10 * h, h);
      CHECK(std::abs(left - right) < 1e-4);
      // continuity
      CHECK(std::abs(f(knee - 1e-9) - f(knee + 1e-9)) < 1e-7);
    }
  }
}

TEST_CASE("objective value special cases") {
  ProblemData p = toy_problem();
  Formulation f;
  Vector beta = Vector::Zero(2);

  f.kind = FormulationKind::R1;
  CHECK(objective_value(p, f, beta, std::nullopt, 3.0) ==
        doctest::Approx(p.y.squaredNorm()));

  // R3 with ||y||^2 = 4, n = 2, sigma = 1, lambda = 0: 4/1 + (2/2)*1 = 5
  Matrix X2(2, 2);
  X2 << 1, 0, 0, 1;
  Vector y2(2);
  y2 << 2, 0;
  ProblemData p2 = ProblemData::make(X2, y2);
  f.kind = FormulationKind::R3;
  CHECK(objective_value(p2, f, beta, 1.0, 0.0) == doctest::Approx(5.0));

  f.kind = FormulationKind::R4;
  const double expected = huber_value(-p2.y, f.rho) + 2.0;
  CHECK(objective_value(p2, f, beta, 1.0, 0.0) == doctest::Approx(expected));

  CHECK_THROWS_AS(objective_value(p2, f, beta, std::nullopt, 0.0), Error);
  CHECK_THROWS_AS(objective_value(p2, f, beta, 0.0, 0.0), Error);
}

TEST_CASE("concomitant sigma closed form") {
  Vector r(2);
  r << 1, 1;
  CHECK(concomitant_sigma(r, 2) == doctest::Approx(1.41421356).epsilon(1e-8));
  CHECK(concomitant_sigma(Vector::Zero(3), 3) == 0.0);

  Vector r2(2);
  r2 << 3, 4;
  CHECK(concomitant_sigma(r2, 25) == doctest::Approx(1.41421356).epsilon(1e-8));
  // cross-check by grid minimization of ||r||^2/s + (n/2) s
  auto f = [&](double s) { return r2.squaredNorm() / s + 12.5 * s; };
  const double s_star = oracles::golden_min(f, 1e-6, 10.0);
  CHECK(concomitant_sigma(r2, 25) == doctest::Approx(s_star).epsilon(1e-7));
}

TEST_CASE("sigma partial minimization dominates any other sigma") {
  Rng rng(21);
  Matrix X = random_matrix(rng, 8, 4);
  Vector y = random_vector(rng, 8);
  ProblemData p = ProblemData::make(X, y);
  Formulation f;
  f.kind = FormulationKind::R3;
  for (int t = 0; t < 30; ++t) {
    Vector beta = random_vector(rng, 4);
    const double s_opt = std::max(concomitant_sigma(p.X * beta - p.y, p.n()), 1e-12);
    const double s_other = 0.05 + 3.0 * rng.next_uniform();
    CHECK(objective_value(p, f, beta, s_other, 0.7) >=
          objective_value(p, f, beta, s_opt, 0.7) - 1e-10);
  }
}

TEST_CASE("huber concomitant sigma matches golden-section search") {
  Rng rng(22);
  for (int t = 0; t < 20; ++t) {
    Vector r = random_vector(rng, 9) * (0.5 + 2.0 * rng.next_uniform());
    const double rho = 0.5 + 1.5 * rng.next_uniform();
    const Index n = 9;
    auto f = [&](double s) {
      Vector rs = r / std::max(s, 1e-12);
      return (huber_value(rs, rho) + double(n)) * std::max(s, 1e-12);
    };
    const double s_gold = oracles::golden_min(f, 1e-12, 2.0 * r.norm() + 1.0);
    const double s_exact = concomitant_sigma_huber(r, rho, n);
    CHECK(f(s_exact) <= f(s_gold) + 1e-9 * (1.0 + std::abs(f(s_gold))));
  }
}

TEST_CASE("objective is convex along random segments for all kinds") {
  Rng rng(23);
  Matrix X = random_matrix(rng, 10, 5);
  Vector yr = random_vector(rng, 10);
  Vector yc(10);
  for (Index i = 0; i < 10; ++i) yc[i] = rng.next_uniform() < 0.5 ? -1.0 : 1.0;

  for (FormulationKind kind : {FormulationKind::R1, FormulationKind::R2, FormulationKind::R3,
                               FormulationKind::R4, FormulationKind::C1, FormulationKind::C2}) {
    ProblemData p = ProblemData::make(X, is_classification(kind) ? yc : yr);
    Formulation f;
    f.kind = kind;
    std::optional<double> sigma =
        is_concomitant(kind) ? std::optional<double>(1.0) : std::nullopt;
    for (int t = 0; t < 20; ++t) {
      Vector a = random_vector(rng, 5), b = random_vector(rng, 5);
      const double fa = objective_value(p, f, a, sigma, 0.8);
      const double fb = objective_value(p, f, b, sigma, 0.8);
      const double fm = objective_value(p, f, Vector(0.5 * (a + b)), sigma, 0.8);
      CHECK(fm <= 0.5 * (fa + fb) + 1e-10);
    }
  }
}

TEST_CASE("soft threshold formula and optimality") {
  Vector v(3);
  v << 3, -1, 0.5;
  Vector out = soft_threshold(v, 1.0);
  CHECK(out[0] == doctest::Approx(2.0));
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 0.0);

  Vector any(4);
  any << 0.3, -2.5, 7, 0;
  CHECK((soft_threshold(any, 0.0) - any).cwiseAbs().maxCoeff() == 0.0);

  Vector neg(1);
  neg << -2.0;
  CHECK(soft_threshold(neg, 5.0)[0] == 0.0);

  // exact minimizer of 0.5||x-v||^2 + tau ||x||_1 against a local grid
  Rng rng(31);
  for (int t = 0; t < 10; ++t) {
    Vector vv = random_vector(rng, 5) * 2.0;
    const double tau = rng.next_uniform() * 1.5;
    Vector x = soft_threshold(vv, tau);
    auto obj = [&](const Vector& z) {
      return 0.5 * (z - vv).squaredNorm() + tau * z.cwiseAbs().sum();
    };
    const double fx = obj(x);
    for (Index j = 0; j < 5; ++j)
      for (int g = -100; g <= 100; ++g) {
        Vector z = x;
        z[j] += g * 0.01;
        CHECK(fx <= obj(z) + 1e-12);
      }
  }
}

TEST_CASE("constraint projector: zero-sum row mean-centers") {
  Matrix C(1, 3);
  C << 1, 1, 1;
  ConstraintProjector proj(C, 3);
  Vector v(3);
  v << 1, 2, 3;
  Vector pv = proj.project(v);
  CHECK(pv[0] == doctest::Approx(-1.0));
  CHECK(pv[1] == doctest::Approx(0.0));
  CHECK(pv[2] == doctest::Approx(1.0));
}

TEST_CASE("duplicated constraint rows change nothing") {
  Matrix C1(1, 4);
  C1 << 1, -2, 0.5, 3;
  Matrix C2(3, 4);
  C2.row(0) = C1.row(0);
  C2.row(1) = C1.row(0);
  C2.row(2) = 2.0 * C1.row(0);
  ConstraintProjector p1(C1, 4), p2(C2, 4);
  CHECK(p1.rank() == 1);
  CHECK(p2.rank() == 1);
  Rng rng(41);
  for (int t = 0; t < 5; ++t) {
    Vector v = random_vector(rng, 4);
    CHECK((p1.project(v) - p2.project(v)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("projector equals the dense pseudo-inverse construction") {
  Rng rng(42);
  Matrix C = random_matrix(rng, 2, 6);
  ConstraintProjector proj(C, 6);
  Matrix P = oracles::pinv_projector(C, 6);
  for (int t = 0; t < 20; ++t) {
    Vector v = random_vector(rng, 6);
    Vector a = proj.project(v);
    CHECK((C * a).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + v.norm()));
    CHECK((a - P * v).cwiseAbs().maxCoeff() < 1e-10);
    // idempotent, nonexpansive
    CHECK((proj.project(a) - a).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(a.norm() <= v.norm() + 1e-12);
  }
  // fixed points of the projector are exactly the feasible vectors
  Vector z = proj.null_basis() * random_vector(rng, 4);
  CHECK((proj.project(z) - z).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("perspective prox: boundary, fixed point, cubic root") {
  Vector u1(2);
  u1 << 1, 1;
  PerspectiveProx r1 = prox_perspective_sq(-1.0, u1, 1.0);
  CHECK(r1.sigma == 0.0);
  CHECK(r1.p.cwiseAbs().maxCoeff() == 0.0);

  Vector u2 = Vector::Zero(2);
  PerspectiveProx r2 = prox_perspective_sq(1.0, u2, 1.0);
  CHECK(r2.sigma == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r2.p.cwiseAbs().maxCoeff() == 0.0);

  Vector u3(2);
  u3 << 2, 0;
  PerspectiveProx r3 = prox_perspective_sq(0.0, u3, 0.5);
  // root of s (s+1)^2 = 0.5*4 = 2 by bisection
  auto cubic = [](double s) { return s * (s + 1) * (s + 1) - 2.0; };
  double lo = 0.0, hi = 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (cubic(mid) > 0 ? hi : lo) = mid;
  }
  CHECK(r3.sigma == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-9));
  CHECK(r3.sigma == doctest::Approx(0.69562).epsilon(1e-4));
  CHECK(r3.p[0] == doctest::Approx(u3[0] * r3.sigma / (r3.sigma + 1.0)).epsilon(1e-9));
}

TEST_CASE("perspective prox satisfies the variational inequality") {
  // prox objective at the output beats 500 random perturbations
  Rng rng(51);
  auto pval = [](double s, const Vector& q) {
    if (s > 0) return q.squaredNorm() / s;
    if (s == 0 && q.cwiseAbs().maxCoeff() == 0) return 0.0;
    return std::numeric_limits<double>::infinity();
  };
  for (int trial = 0; trial < 10; ++trial) {
    const double eta = 2.0 * rng.next_normal();
    const double gamma = 0.2 + rng.next_uniform();
    Vector u = random_vector(rng, 3);
    PerspectiveProx r = prox_perspective_sq(eta, u, gamma);
    const double base = pval(r.sigma, r.p) +
                        ((r.sigma - eta) * (r.sigma - eta) + (r.p - u).squaredNorm()) /
                            (2.0 * gamma);
    for (int k = 0; k < 500; ++k) {
      const double scale = std::pow(10.0, -3.0 * rng.next_uniform());
      double s = r.sigma + scale * rng.next_normal();
      Vector q = r.p + scale * random_vector(rng, 3);
      if (s < 0) s = 0.0;
      const double val =
          pval(s, q) + ((s - eta) * (s - eta) + (q - u).squaredNorm()) / (2.0 * gamma);
      CHECK(base <= val + 1e-9);
    }
  }
}

TEST_CASE("mean shift augmentation shapes and weights") {
  Rng rng(61);
  Matrix X = random_matrix(rng, 4, 3);
  Vector y = random_vector(rng, 4);
  Matrix C(1, 3);
  C << 1, 1, 1;
  ProblemData p = ProblemData::make(X, y, C);
  Formulation f;
  f.kind = FormulationKind::R2;
  f.rho = 1.5;
  AugmentedProblem aug = mean_shift_augment(p, f, 0.5);
  CHECK(aug.data.d() == 7);
  CHECK(aug.data.X.rightCols(4).isApprox(Matrix::Identity(4, 4)));
  CHECK(aug.data.C.rightCols(4).cwiseAbs().maxCoeff() == 0.0);
  CHECK(aug.data.weights.tail(4).minCoeff() == doctest::Approx(2.0 * 1.5 / 0.5));
  CHECK_THROWS_AS(mean_shift_augment(p, Formulation{}, 0.5), Error);
}

TEST_CASE("spectral norm squared") {
  CHECK(spectral_norm_sq(Matrix::Identity(3, 3)) == doctest::Approx(1.0).epsilon(1e-9));
  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = 3.0;
  D(1, 1) = 1.0;
  CHECK(spectral_norm_sq(D) == doctest::Approx(9.0).epsilon(1e-9));

  Rng rng(71);
  Matrix X = random_matrix(rng, 10, 7);
  const auto sv = oracles::jacobi_singular_values(X);
  CHECK(spectral_norm_sq(X) == doctest::Approx(sv[0] * sv[0]).epsilon(1e-6));

  std::vector<double> history;
  spectral_norm_sq(X, &history);
  for (std::size_t i = 1; i < history.size(); ++i)
    CHECK(history[i] >= history[i - 1] - 1e-10 * (1.0 + history[i]));

  CHECK(spectral_norm_sq(Matrix::Zero(4, 4)) == 0.0);
}

TEST_CASE("rng determinism and moments") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng r(2024);
  const int N = 20000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < N; ++i) {
    const double z = r.next_normal();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / N;
  const double var = sumsq / N - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);

  Rng s(9);
  for (int i = 0; i < 1000; ++i) CHECK(s.next_below(17) < 17);
  auto idx = Rng(5).sample_without_replacement(10, 10);
  std::sort(idx.begin(), idx.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(idx[i] == i);
}
