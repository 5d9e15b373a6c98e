#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cilo/smoothing.hpp"
#include "test_helpers.hpp"

using namespace cilo;
using cilo::testing::SimplexFixture;

namespace {

// Independent prox oracle: subgradient descent on
//   F(theta) = max_{u in -V} theta.u + 0.5 ||lambda - theta||^2,
// strongly convex; returns the best objective value seen.
struct ProxOracleResult {
  Vec theta;
  double value;
};

ProxOracleResult prox_by_subgradient(const Vec& lambda, const Dataset& data, const Polyhedron& W,
                                     int iters) {
  const auto& hyp = data.hypothesis();
  Vec theta = lambda;
  Vec best_theta = theta;
  double best = std::numeric_limits<double>::infinity();
  std::vector<SimplexBasis> bases(data.n());
  for (int t = 0; t < iters; ++t) {
    Vec sub = theta - lambda;
    double g = 0.0;
    for (int i = 0; i < data.n(); ++i) {
      Vec pred = hyp.predict_from_features(theta, data.phi(i));
      LPSolution s = W.minimize(pred, &bases[i]);
      g -= s.value;
      sub -= hyp.apply_transpose(data.phi(i), s.point) / data.n();
    }
    g /= data.n();
    double f = g + 0.5 * (lambda - theta).squaredNorm();
    if (f < best) {
      best = f;
      best_theta = theta;
    }
    theta -= (2.0 / (t + 2.0)) * sub;
  }
  return {best_theta, best};
}

Dataset small_dataset(std::mt19937_64& rng, int d, int n, double scale = 0.6) {
  LinearHypothesis hyp(d, FeatureMap(2, 1));
  std::vector<Vec> xs, cs;
  for (int i = 0; i < n; ++i) {
    xs.push_back(cilo::testing::random_vec(rng, 2, scale));
    cs.push_back(cilo::testing::random_vec(rng, d));
  }
  return Dataset(std::move(xs), std::move(cs), hyp);
}

}  // namespace

TEST_CASE("fixture projections") {
  SimplexFixture fx;
  Dataset data = cilo::testing::ex1_dataset();

  ProjectionResult p = project_moment_set(Vec::Zero(3), data, fx.W, std::nullopt, 1e-12);
  CHECK(p.converged);
  CHECK(p.distance == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-6));
  for (int q = 0; q < 3; ++q) CHECK(p.point(q) == doctest::Approx(-1.0 / 3.0).epsilon(1e-5));

  ProjectionResult pb = project_moment_set(Vec::Zero(3), data, fx.W, 1.0, 1e-12);
  CHECK(pb.distance == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(pb.point(0) == doctest::Approx(-1.0));
  CHECK(pb.point(1) == doctest::Approx(0.0));
  CHECK(pb.point(2) == doctest::Approx(0.0));

  Vec inside = Vec::Constant(3, -1.0 / 3.0);
  ProjectionResult pi = project_moment_set(inside, data, fx.W, std::nullopt, 1e-12);
  CHECK(pi.distance <= 2e-6);
}

TEST_CASE("projection witness reproduces the point") {
  std::mt19937_64 rng(73);
  for (int t = 0; t < 12; ++t) {
    int d = 2 + static_cast<int>(rng() % 4);
    Polyhedron W = cilo::testing::random_polyhedron(rng, d, static_cast<int>(rng() % 2));
    Dataset data = small_dataset(rng, d, 1 + static_cast<int>(rng() % 5));
    const auto& hyp = data.hypothesis();
    Vec lambda = cilo::testing::random_vec(rng, hyp.param_dim());
    BetaBounds bb = beta_bounds(data, W);
    bool budget = (t % 2 == 0) && bb.beta_max > bb.beta_min + 1e-6;
    std::optional<double> beta =
        budget ? std::optional<double>(0.5 * (bb.beta_min + bb.beta_max)) : std::nullopt;
    ProjectionResult p = project_moment_set(lambda, data, W, beta, 1e-9);
    Vec rebuilt = Vec::Zero(hyp.param_dim());
    for (int i = 0; i < data.n(); ++i)
      rebuilt -= hyp.apply_transpose(data.phi(i), p.witness.row(i).transpose()) / data.n();
    CHECK((rebuilt - p.point).norm() < 1e-8 * (1.0 + p.point.norm()));
    CHECK(std::abs(p.distance - (lambda - p.point).norm()) < 1e-10);
    CHECK(p.fw_gap <= 1e-9);
  }
}

TEST_CASE("fixture prox pair and surrogate values") {
  SimplexFixture fx;
  Dataset data = cilo::testing::ex1_dataset();

  ProxPair pp = prox_pair(Vec::Zero(3), 1.0, data, fx.W, 1e-12);
  for (int q = 0; q < 3; ++q) CHECK(pp.theta_plain(q) == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
  CHECK(pp.theta_budget(0) == doctest::Approx(1.0));
  CHECK(pp.theta_budget(1) == doctest::Approx(0.0));
  CHECK(pp.theta_budget(2) == doctest::Approx(0.0));

  auto [val, grad] = s_cilo(Vec::Zero(3), 1.0, data, fx.W, 1e-12);
  CHECK(val == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  CHECK(grad(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-5));
  CHECK(grad(1) == doctest::Approx(-1.0 / 3.0).epsilon(1e-5));
  CHECK(grad(2) == doctest::Approx(-1.0 / 3.0).epsilon(1e-5));

  auto [lval, lgrad] = log_cilo(Vec::Zero(3), 1.0, data, fx.W, 1e-12);
  CHECK(lval == doctest::Approx(0.5 * std::log(3.0)).epsilon(1e-6));
  (void)lgrad;

  // Slack budget: both sets coincide, surrogates vanish.
  double bmax = beta_bounds(data, fx.W).beta_max;
  auto [v0, g0] = s_cilo(Vec::Ones(3), bmax, data, fx.W, 1e-12);
  CHECK(std::abs(v0) < 1e-6);
  CHECK(g0.norm() < 1e-4);
  auto [lv0, lg0] = log_cilo(Vec::Ones(3), bmax, data, fx.W, 1e-12);
  CHECK(std::abs(lv0) < 1e-4);
  (void)lg0;
}

TEST_CASE("log_cilo rejects boundary points") {
  SimplexFixture fx;
  Dataset data = cilo::testing::ex1_dataset();
  Vec inside = Vec::Constant(3, -1.0 / 3.0);
  CHECK_THROWS_AS(log_cilo(inside, 1.0, data, fx.W, 1e-12), OnBoundary);
}

TEST_CASE("gradients match finite differences on 100 random probes") {
  std::mt19937_64 rng(79);
  int done = 0;
  double max_rel_s = 0.0, max_rel_log = 0.0;
  while (done < 100) {
    int d = 2 + static_cast<int>(rng() % 5);  // d <= 6
    Polyhedron W = cilo::testing::random_polyhedron(rng, d, static_cast<int>(rng() % 2));
    Dataset data = small_dataset(rng, d, 1 + static_cast<int>(rng() % 8));
    BetaBounds bb = beta_bounds(data, W);
    if (bb.beta_max - bb.beta_min < 1e-3) continue;
    std::uniform_real_distribution<double> unif(0.15, 0.85);
    double beta = bb.beta_min + unif(rng) * (bb.beta_max - bb.beta_min);
    const int m = data.hypothesis().param_dim();
    Vec lambda = cilo::testing::random_vec(rng, m);

    CiloSmoothing sm(data, W, beta);
    const double tol = 1e-11;
    auto [val, grad] = sm.s_cilo(lambda, tol);
    CHECK(val >= -1e-6);
    const double h = 1e-4 * (1.0 + lambda.norm());
    Vec fd(m);
    for (int q = 0; q < m; ++q) {
      Vec lp = lambda, lm = lambda;
      lp[q] += h;
      lm[q] -= h;
      fd[q] = (sm.s_cilo(lp, tol).first - sm.s_cilo(lm, tol).first) / (2.0 * h);
    }
    double rel = (fd - grad).norm() / (1.0 + grad.norm());
    max_rel_s = std::max(max_rel_s, rel);
    CHECK(rel <= 1e-3);

    // log-CILO at exterior lambdas only.
    try {
      auto [lv, lg] = sm.log_cilo(lambda, tol);
      CHECK(lv >= -1e-6);
      Vec lfd(m);
      bool ok = true;
      for (int q = 0; q < m && ok; ++q) {
        Vec lp = lambda, lm = lambda;
        lp[q] += h;
        lm[q] -= h;
        try {
          lfd[q] = (sm.log_cilo(lp, tol).first - sm.log_cilo(lm, tol).first) / (2.0 * h);
        } catch (const OnBoundary&) {
          ok = false;
        }
      }
      if (ok) {
        double lrel = (lfd - lg).norm() / (1.0 + lg.norm());
        max_rel_log = std::max(max_rel_log, lrel);
        CHECK(lrel <= 1e-3);
      }
    } catch (const OnBoundary&) {
      // interior probe; nothing to difference
    }
    ++done;
  }
  MESSAGE("max rel err s_cilo=", max_rel_s, " log_cilo=", max_rel_log);
}

TEST_CASE("set nesting keeps the budgeted distance larger") {
  std::mt19937_64 rng(83);
  for (int t = 0; t < 20; ++t) {
    int d = 2 + static_cast<int>(rng() % 4);
    Polyhedron W = cilo::testing::random_polyhedron(rng, d, static_cast<int>(rng() % 2));
    Dataset data = small_dataset(rng, d, 1 + static_cast<int>(rng() % 5));
    BetaBounds bb = beta_bounds(data, W);
    if (bb.beta_max - bb.beta_min < 1e-3) continue;
    double beta = bb.beta_min + 0.3 * (bb.beta_max - bb.beta_min);
    Vec lambda = cilo::testing::random_vec(rng, data.hypothesis().param_dim());
    const double tol = 1e-9;
    CiloSmoothing sm(data, W, beta);
    double dp = sm.project_plain(lambda, tol).distance;
    double db = sm.project_budget(lambda, tol).distance;
    CHECK(db >= dp - 2e-4);
  }
}

TEST_CASE("prox pair matches the independent subgradient oracle") {
  std::mt19937_64 rng(89);
  for (int t = 0; t < 20; ++t) {
    int d = 2 + static_cast<int>(rng() % 2);  // d <= 3
    Polyhedron W = cilo::testing::random_polyhedron(rng, d, static_cast<int>(rng() % 2));
    Dataset data = small_dataset(rng, d, 1 + static_cast<int>(rng() % 4), 0.5);
    Vec lambda = cilo::testing::random_vec(rng, data.hypothesis().param_dim(), 0.3);
    BetaBounds bb = beta_bounds(data, W);
    double beta = 0.5 * (bb.beta_min + bb.beta_max);
    ProxPair pp = prox_pair(lambda, beta, data, W, 1e-11);
    ProxOracleResult oracle = prox_by_subgradient(lambda, data, W, 100000);
    CHECK(std::abs(pp.envelope_plain - oracle.value) <=
          1e-3 * (1.0 + std::abs(pp.envelope_plain)));
    CHECK((pp.theta_plain - oracle.theta).norm() <= 0.05 * (1.0 + pp.theta_plain.norm()));
  }
}

TEST_CASE("boundary escape") {
  SimplexFixture fx;
  Dataset data = cilo::testing::ex1_dataset();

  Vec lambda = Vec::Constant(3, 0.01);
  Vec esc = boundary_escape(lambda, data, fx.W, 3.0);
  Vec expect = lambda + std::sqrt(3.0) * Vec::Ones(3);
  CHECK((esc - expect).norm() < 1e-5);

  Vec inside = Vec::Constant(3, -1.0 / 3.0);
  CHECK_THROWS_AS(boundary_escape(inside, data, fx.W, 3.0), DirectionUndefined);
}

TEST_CASE("escape lands in the certified norm band") {
  std::mt19937_64 rng(97);
  int done = 0;
  while (done < 20) {
    int d = 2 + static_cast<int>(rng() % 4);
    Polyhedron W = cilo::testing::random_polyhedron(rng, d, static_cast<int>(rng() % 2));
    Dataset data = small_dataset(rng, d, 1 + static_cast<int>(rng() % 5));
    BetaBounds bb = beta_bounds(data, W);
    if (bb.beta_max - bb.beta_min < 1e-3) continue;
    double beta = bb.beta_min + 0.4 * (bb.beta_max - bb.beta_min);
    CiloSmoothing sm(data, W, beta);
    double scale = sm.scale();

    // Near-boundary probe: a point of -V nudged outward.
    Vec lambda = cilo::testing::random_vec(rng, data.hypothesis().param_dim(), 0.5);
    ProjectionResult p = sm.project_plain(lambda, 1e-11);
    if (p.distance < 1e-6) continue;
    Vec probe = p.point + (0.01 * scale / p.distance) * (lambda - p.point);

    Vec esc = sm.boundary_escape(probe, 3.0, 1e-11);
    ProxPair pp = sm.prox(esc, 1e-11);
    double norm = pp.theta_budget.norm();
    CHECK(norm >= scale * (1.0 - 1e-6));
    CHECK(norm <= 11.0 * scale * (1.0 + 1e-6));
    ++done;
  }
}
