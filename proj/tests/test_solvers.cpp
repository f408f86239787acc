#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "conlasso/data_io.hpp"
#include "conlasso/rng.hpp"
#include "conlasso/losses.hpp"
#include "conlasso/solvers.hpp"
#include "oracles.hpp"

#include <cmath>
#include <cstring>

using namespace conlasso;

namespace {

ProblemData zero_sum_instance(std::uint64_t seed, Index n = 20, Index d = 10) {
  SyntheticSpec spec;
  spec.n = n;
  spec.d = d;
  spec.d_nonzero = std::min<Index>(4, d);
  spec.k = 1;
  spec.sigma = 0.5;
  spec.zerosum = true;
  spec.seed = seed;
  SyntheticData data = conlasso::random_data(spec);
  return ProblemData::make(data.X, data.y, data.C);
}

SolverConfig tight(double tol = 1e-10) {
  SolverConfig c;
  c.tol = tol;
  c.max_iter = 200000;
  return c;
}

}  // namespace

TEST_CASE("lambda max without constraints is the max ratio") {
  Matrix X = Matrix::Identity(3, 3);
  Vector y(3);
  y << 1, -2, 3;
  ProblemData p = ProblemData::make(X, y);
  // v = 2 X^T y = (2, -4, 6)
  CHECK(compute_lambda_max(p, Formulation{}) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("lambda max with a zero-sum row is the midrange reduction") {
  Matrix X = Matrix::Identity(3, 3);
  Vector y(3);
  y << 1, -2, 3;
  Matrix C(1, 3);
  C << 1, 1, 1;
  ProblemData p = ProblemData::make(X, y, C);
  // min_mu ||(2,-4,6) - mu 1||_inf = (6 - (-4)) / 2 = 5 at mu = 1
  Vector v = lambda_max_gradient(p, Formulation{});
  ChebyshevMin cm = weighted_chebyshev_min(v, p.C, p.weights);
  CHECK(cm.value == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(cm.mu[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(compute_lambda_max(p, Formulation{}) == doctest::Approx(5.0).epsilon(1e-10));
}

TEST_CASE("lambda max of zero data is zero") {
  Matrix X = Matrix::Identity(3, 3);
  ProblemData p = ProblemData::make(X, Vector::Zero(3));
  CHECK(compute_lambda_max(p, Formulation{}) == 0.0);
}

TEST_CASE("lambda max matches brute-force mu grids") {
  Rng rng(101);
  for (int trial = 0; trial < 8; ++trial) {
    ProblemData p = zero_sum_instance(200 + trial);
    Vector v = lambda_max_gradient(p, Formulation{});
    const double mine = compute_lambda_max(p, Formulation{});
    const double radius = 2.0 * v.cwiseAbs().maxCoeff() + 1.0;
    const double brute =
        oracles::brute_chebyshev_k1(v, p.C.row(0).transpose(), p.weights, radius);
    CHECK(mine == doctest::Approx(brute).epsilon(1e-6));
  }
  // k = 2
  for (int trial = 0; trial < 3; ++trial) {
    SyntheticSpec spec;
    spec.n = 15;
    spec.d = 8;
    spec.d_nonzero = 3;
    spec.k = 2;
    spec.sigma = 0.4;
    spec.zerosum = true;
    spec.seed = 300 + trial;
    SyntheticData data = conlasso::random_data(spec);
    ProblemData p = ProblemData::make(data.X, data.y, data.C);
    Vector v = lambda_max_gradient(p, Formulation{});
    const double mine = compute_lambda_max(p, Formulation{});
    const double radius = 2.0 * v.cwiseAbs().maxCoeff() + 1.0;
    const double brute = oracles::brute_chebyshev_k2(v, p.C, p.weights, radius);
    CHECK(mine == doctest::Approx(brute).epsilon(1e-6));
  }
}

TEST_CASE("classification lambda max uses the margin-loss gradient") {
  Rng rng(102);
  Matrix X(6, 3);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 3; ++j) X(i, j) = rng.next_normal();
  Vector y(6);
  for (Index i = 0; i < 6; ++i) y[i] = i % 2 == 0 ? 1.0 : -1.0;
  ProblemData p = ProblemData::make(X, y);

  Formulation c1;
  c1.kind = FormulationKind::C1;
  Vector v1 = lambda_max_gradient(p, c1);
  CHECK((v1 - 2.0 * (X.transpose() * y)).cwiseAbs().maxCoeff() < 1e-12);

  Formulation c2;
  c2.kind = FormulationKind::C2;
  c2.rho_class = 0.5;  // margins 0 sit on the linear branch
  Vector v2 = lambda_max_gradient(p, c2);
  CHECK((v2 - 2.0 * (1.0 - 0.5) * (X.transpose() * y)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("orthogonal design path has the closed-form breakpoints") {
  Matrix X = Matrix::Identity(3, 3);
  Vector y(3);
  y << 3, 1, 0;
  ProblemData p = ProblemData::make(X, y);
  SolverConfig c;
  c.path_lambda_min_ratio = 0.01;
  PathResult path = path_alg(p, Formulation{}, c);

  REQUIRE(path.num_points() >= 3);
  CHECK(path.lambdas[0] == doctest::Approx(6.0).epsilon(1e-10));
  CHECK(path.betas.col(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(path.lambdas[1] == doctest::Approx(2.0).epsilon(1e-10));
  Vector at2 = path_beta_at(path, p, Formulation{}, 2.0);
  CHECK(at2[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(std::abs(at2[1]) < 1e-12);
  CHECK(std::abs(at2[2]) < 1e-12);

  // every sampled lambda matches the soft-threshold closed form
  for (double lam : {5.0, 3.3, 1.7, 0.9, 0.2}) {
    Vector mine = path_beta_at(path, p, Formulation{}, lam);
    Vector exact = oracles::orthogonal_lasso(y, lam);
    CHECK((mine - exact).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("constrained path breakpoints beat a long-run oracle") {
  ProblemData p = zero_sum_instance(404);
  SolverConfig c;
  c.path_lambda_min_ratio = 0.05;
  PathResult path = path_alg(p, Formulation{}, c);
  REQUIRE(path.num_points() >= 3);
  for (Index i = 1; i < path.num_points(); i += std::max<Index>(1, path.num_points() / 4)) {
    const double lam = path.lambdas[i];
    Vector beta = path.betas.col(i);
    Solution ref = oracle_solve(p, Formulation{}, lam, 60000);
    const double mine = objective_value(p, Formulation{}, beta, std::nullopt, lam);
    CHECK(mine <= ref.objective + 1e-5 * (1.0 + std::abs(ref.objective)));
    CHECK(std::abs(mine - ref.objective) <= 1e-5 * (1.0 + std::abs(ref.objective)));
  }
}

TEST_CASE("path points and midpoints carry KKT certificates") {
  for (FormulationKind kind : {FormulationKind::R1, FormulationKind::R2}) {
    ProblemData p = zero_sum_instance(505);
    Formulation f;
    f.kind = kind;
    SolverConfig c;
    c.path_lambda_min_ratio = 0.05;
    PathResult path = path_alg(p, f, c);
    REQUIRE(path.num_points() >= 3);
    CHECK(path.betas.col(0).cwiseAbs().maxCoeff() == 0.0);
    for (Index i = 0; i + 1 < path.num_points(); ++i) {
      const double lam_mid = 0.5 * (path.lambdas[i] + path.lambdas[i + 1]);
      Vector beta_mid = path_beta_at(path, p, f, lam_mid);
      CHECK(kkt_certificate(p, f, beta_mid, std::nullopt, lam_mid).residual <=
            1e-5 * lam_mid);
      CHECK(kkt_certificate(p, f, path.betas.col(i), std::nullopt, path.lambdas[i]).residual <=
            1e-5 * path.lambdas[i]);
    }
  }
}

TEST_CASE("all solvers return zero above lambda max") {
  ProblemData p = zero_sum_instance(606);
  const double lam = 1.001 * compute_lambda_max(p, Formulation{});
  SolverConfig c = tight(1e-12);

  c.method = SolverMethod::PathAlg;
  CHECK(path_alg_solve(p, Formulation{}, lam, c).beta.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(douglas_rachford(p, Formulation{}, lam, c).beta.cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(ppds(p, Formulation{}, lam, c).beta.cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(pfpds(p, Formulation{}, lam, c).beta.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("cross-solver agreement on R1 and R2") {
  for (std::uint64_t seed : {701, 702, 703}) {
    ProblemData p = zero_sum_instance(seed, 30, 20);
    for (FormulationKind kind : {FormulationKind::R1, FormulationKind::R2}) {
      Formulation f;
      f.kind = kind;
      const double lam = 0.3 * compute_lambda_max(p, f);
      SolverConfig c = tight(1e-10);
      Solution a = path_alg_solve(p, f, lam, c);
      Solution b = douglas_rachford(p, f, lam, c);
      Solution d = ppds(p, f, lam, c);
      Solution e = pfpds(p, f, lam, c);
      const double ref = a.objective;
      for (const Solution* s : {&b, &d, &e}) {
        CHECK(std::abs(s->objective - ref) <= 1e-5 * (1.0 + std::abs(ref)));
        CHECK((s->beta - a.beta).norm() <= 1e-4 * (1.0 + a.beta.norm()));
      }
    }
  }
}

TEST_CASE("ppds with no constraints reproduces plain proximal gradient") {
  Rng rng(801);
  Matrix X(12, 6);
  for (Index i = 0; i < 12; ++i)
    for (Index j = 0; j < 6; ++j) X(i, j) = rng.next_normal();
  Vector y(12);
  for (Index i = 0; i < 12; ++i) y[i] = rng.next_normal();
  ProblemData p = ProblemData::make(X, y);
  const double lam = 0.2 * compute_lambda_max(p, Formulation{});
  const double tau = 0.9 / (2.0 * spectral_norm_sq(p.X));

  SolverConfig c;
  c.tol = 1e-300;
  c.max_iter = 10;
  Solution mine = ppds(p, Formulation{}, lam, c);
  Vector ref = oracles::ista_reference(p.X, p.y, p.weights, lam, tau, false, 0.0, 10);
  CHECK((mine.beta - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ppds at lambda zero finds the least squares fit") {
  Rng rng(802);
  Matrix X(15, 4);
  for (Index i = 0; i < 15; ++i)
    for (Index j = 0; j < 4; ++j) X(i, j) = rng.next_normal();
  Vector y(15);
  for (Index i = 0; i < 15; ++i) y[i] = rng.next_normal();
  ProblemData p = ProblemData::make(X, y);
  Solution s = ppds(p, Formulation{}, 0.0, tight(1e-12));
  Vector grad = 2.0 * (X.transpose() * (X * s.beta - y));
  CHECK(grad.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("pfpds agrees with ppds when unconstrained") {
  Rng rng(803);
  Matrix X(10, 5);
  for (Index i = 0; i < 10; ++i)
    for (Index j = 0; j < 5; ++j) X(i, j) = rng.next_normal();
  Vector y(10);
  for (Index i = 0; i < 10; ++i) y[i] = rng.next_normal();
  ProblemData p = ProblemData::make(X, y);
  const double lam = 0.25 * compute_lambda_max(p, Formulation{});
  Solution a = ppds(p, Formulation{}, lam, tight(1e-11));
  Solution b = pfpds(p, Formulation{}, lam, tight(1e-11));
  CHECK(std::abs(a.objective - b.objective) <= 1e-6 * (1.0 + std::abs(a.objective)));
}

TEST_CASE("pfpds on a zero-sum instance matches the homotopy") {
  ProblemData p = zero_sum_instance(804);
  const double lam = 0.4 * compute_lambda_max(p, Formulation{});
  Solution a = path_alg_solve(p, Formulation{}, lam, tight());
  Solution b = pfpds(p, Formulation{}, lam, tight(1e-11));
  CHECK(std::abs(a.objective - b.objective) <= 1e-4 * (1.0 + std::abs(a.objective)));
  CHECK(b.diagnostics.feasibility <= 1e-6 * (1.0 + b.beta.cwiseAbs().maxCoeff()));
}

TEST_CASE("mean-shift equivalence: direct huber vs augmented least squares") {
  for (std::uint64_t seed : {901, 902, 903, 904}) {
    ProblemData p = zero_sum_instance(seed);
    Formulation f;
    f.kind = FormulationKind::R2;
    const double lam = 0.3 * compute_lambda_max(p, f);
    Solution direct = ppds(p, f, lam, tight(1e-11));     // huber gradient route
    Solution aug = douglas_rachford(p, f, lam, tight()); // mean-shift route
    CHECK(std::abs(direct.objective - aug.objective) <=
          1e-5 * (1.0 + std::abs(direct.objective)));
  }
}

TEST_CASE("huge rho huber reduces to least squares lasso") {
  ProblemData p = zero_sum_instance(905);
  Formulation r2;
  r2.kind = FormulationKind::R2;
  r2.rho = 1e6;
  const double lam = 0.3 * compute_lambda_max(p, Formulation{});
  Solution huber = douglas_rachford(p, r2, lam, tight());
  Solution ls = path_alg_solve(p, Formulation{}, lam, tight());
  CHECK((huber.beta - ls.beta).cwiseAbs().maxCoeff() < 1e-5 * (1.0 + ls.beta.norm()));
}

TEST_CASE("one-sample toy splits between coefficient and shift") {
  Matrix X(1, 1);
  X << 1;
  Vector y(1);
  y << 2;
  ProblemData p = ProblemData::make(X, y);
  Formulation f;
  f.kind = FormulationKind::R2;
  f.rho = 50.0;  // outlier threshold far above the data: o = 0, beta = y
  Solution s = douglas_rachford(p, f, 0.0, tight(1e-12));
  CHECK(s.beta[0] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("concomitant solutions return the exact scale") {
  for (std::uint64_t seed : {1001, 1002}) {
    ProblemData p = zero_sum_instance(seed);
    Formulation f;
    f.kind = FormulationKind::R3;
    const double lam = 0.3 * compute_lambda_max(p, f);
    Solution s = douglas_rachford(p, f, lam, tight());
    REQUIRE(s.sigma.has_value());
    const double expected = concomitant_sigma(p.X * s.beta - p.y, p.n());
    CHECK(*s.sigma == doctest::Approx(expected).epsilon(1e-6));

    // homotopy route agrees with the splitting route
    Solution hs = path_alg_solve(p, f, lam, tight());
    CHECK(std::abs(hs.objective - s.objective) <= 1e-5 * (1.0 + std::abs(s.objective)));
    CHECK(kkt_certificate(p, f, s.beta, s.sigma, lam).residual <= 1e-5 * lam);
  }
}

TEST_CASE("r4 sigma passes golden-section optimality") {
  ProblemData p = zero_sum_instance(1003);
  Formulation f;
  f.kind = FormulationKind::R4;
  const double lam = 0.3 * compute_lambda_max(p, f);
  Solution s = douglas_rachford(p, f, lam, tight());
  REQUIRE(s.sigma.has_value());
  Vector r = p.X * s.beta - p.y;
  auto f1d = [&](double sg) {
    Vector rs = r / std::max(sg, 1e-12);
    return (huber_value(rs, f.rho) + double(p.n())) * std::max(sg, 1e-12);
  };
  const double s_gold = oracles::golden_min(f1d, 1e-12, 2.0 * r.norm() + 1.0);
  CHECK(f1d(*s.sigma) <= f1d(s_gold) + 1e-5 * (1.0 + std::abs(f1d(s_gold))));

  Solution ref = oracle_solve(p, f, lam, 60000);
  CHECK(std::abs(s.objective - ref.objective) <= 1e-4 * (1.0 + std::abs(ref.objective)));
}

TEST_CASE("compatibility table is enforced") {
  ProblemData p = zero_sum_instance(1100);
  Formulation r4;
  r4.kind = FormulationKind::R4;
  SolverConfig c;
  c.method = SolverMethod::PathAlg;
  CHECK_THROWS_AS((void)solve_fixed(p, r4, 1.0, c), Error);
  CHECK_THROWS_AS((void)path_alg(p, r4, c), Error);

  Vector yc(p.n());
  for (Index i = 0; i < p.n(); ++i) yc[i] = i % 2 ? 1.0 : -1.0;
  ProblemData pc = ProblemData::make(p.X, yc, p.C);
  Formulation c1;
  c1.kind = FormulationKind::C1;
  CHECK_THROWS_AS((void)douglas_rachford(pc, c1, 1.0, c), Error);
  CHECK_THROWS_AS((void)ppds(pc, c1, 1.0, c), Error);
  try {
    c.method = SolverMethod::DR;
    (void)solve_fixed(pc, c1, 1.0, c);
    FAIL("expected incompatibility");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IncompatibleMethod);
  }
}

TEST_CASE("oracle matches the orthogonal closed form and is monotone") {
  Matrix X = Matrix::Identity(4, 4);
  Vector y(4);
  y << 3, -2, 0.7, 0;
  ProblemData p = ProblemData::make(X, y);
  const double lam = 1.4;
  Solution s = oracle_solve(p, Formulation{}, lam, 20000);
  Vector exact = oracles::orthogonal_lasso(y, lam);
  const double f_exact = objective_value(p, Formulation{}, exact, std::nullopt, lam);
  CHECK(std::abs(s.objective - f_exact) <= 1e-4 * (1.0 + std::abs(f_exact)));

  double prev = std::numeric_limits<double>::infinity();
  for (long budget : {50L, 500L, 5000L}) {
    Solution t = oracle_solve(p, Formulation{}, lam, budget);
    CHECK(t.objective <= prev + 1e-12);
    prev = t.objective;
  }
}

TEST_CASE("classification paths: tiny instance against a grid oracle") {
  Rng rng(1200);
  Matrix X(6, 3);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 3; ++j) X(i, j) = rng.next_normal();
  Vector y(6);
  for (Index i = 0; i < 6; ++i) y[i] = i < 3 ? 1.0 : -1.0;
  ProblemData p = ProblemData::make(X, y);
  Formulation c1;
  c1.kind = FormulationKind::C1;
  const double lam = 0.3 * compute_lambda_max(p, c1);

  Solution s = path_alg_solve(p, c1, lam, SolverConfig{});
  CHECK(kkt_certificate(p, c1, s.beta, std::nullopt, lam).residual <= 1e-5 * lam);

  // coarse exhaustive grid (the acceptance suite runs the fine one)
  double best = std::numeric_limits<double>::infinity();
  const double step = 0.05;
  for (double b0 = -3.0; b0 <= 3.0; b0 += step)
    for (double b1 = -3.0; b1 <= 3.0; b1 += step)
      for (double b2 = -3.0; b2 <= 3.0; b2 += step) {
        Vector beta(3);
        beta << b0, b1, b2;
        best = std::min(best, objective_value(p, c1, beta, std::nullopt, lam));
      }
  CHECK(s.objective <= best + 2e-2);

  Solution ref = oracle_solve(p, c1, lam, 60000);
  CHECK(std::abs(s.objective - ref.objective) <= 2e-2 * (1.0 + std::abs(ref.objective)));
}

TEST_CASE("c2 path tracks knee events with certificates") {
  Rng rng(1300);
  Matrix X(14, 4);
  for (Index i = 0; i < 14; ++i)
    for (Index j = 0; j < 4; ++j) X(i, j) = rng.next_normal();
  Vector y(14);
  for (Index i = 0; i < 14; ++i) y[i] = i % 2 ? 1.0 : -1.0;
  ProblemData p = ProblemData::make(X, y);
  Formulation c2;
  c2.kind = FormulationKind::C2;
  SolverConfig c;
  c.path_lambda_min_ratio = 0.05;
  PathResult path = path_alg(p, c2, c);
  REQUIRE(path.num_points() >= 2);
  CHECK(path.betas.col(0).cwiseAbs().maxCoeff() == 0.0);
  for (Index i = 0; i < path.num_points(); ++i) {
    const double lam = path.lambdas[i];
    CHECK(kkt_certificate(p, c2, path.betas.col(i), std::nullopt, lam).residual <=
          1e-5 * lam);
  }
  for (Index i = 0; i + 1 < path.num_points(); ++i) {
    const double lam_mid = 0.5 * (path.lambdas[i] + path.lambdas[i + 1]);
    Vector beta_mid = path_beta_at(path, p, c2, lam_mid);
    CHECK(kkt_certificate(p, c2, beta_mid, std::nullopt, lam_mid).residual <= 1e-5 * lam_mid);
  }
}

TEST_CASE("solvers are bit-deterministic") {
  ProblemData p = zero_sum_instance(1400);
  const double lam = 0.3 * compute_lambda_max(p, Formulation{});
  Solution a = douglas_rachford(p, Formulation{}, lam, tight());
  Solution b = douglas_rachford(p, Formulation{}, lam, tight());
  CHECK(std::memcmp(a.beta.data(), b.beta.data(), sizeof(double) * a.beta.size()) == 0);

  SolverConfig c;
  PathResult p1 = path_alg(p, Formulation{}, c);
  PathResult p2 = path_alg(p, Formulation{}, c);
  REQUIRE(p1.num_points() == p2.num_points());
  CHECK(std::memcmp(p1.betas.data(), p2.betas.data(),
                    sizeof(double) * p1.betas.size()) == 0);
}

TEST_CASE("solution objective equals a recomputation from beta") {
  ProblemData p = zero_sum_instance(1500);
  for (FormulationKind kind : {FormulationKind::R1, FormulationKind::R2, FormulationKind::R3,
                               FormulationKind::R4}) {
    Formulation f;
    f.kind = kind;
    const double lam = 0.25 * compute_lambda_max(p, f);
    Solution s = douglas_rachford(p, f, lam, tight());
    const double again = objective_value(p, f, s.beta, s.sigma, lam);
    CHECK(std::abs(s.objective - again) <= 1e-10 * (1.0 + std::abs(again)));
    CHECK(s.diagnostics.feasibility <= 1e-8 * (1.0 + s.beta.cwiseAbs().maxCoeff()));
  }
}
