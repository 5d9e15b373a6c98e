#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cstdio>
#include <random>

#include "test_helpers.hpp"

using namespace cilo;

namespace {

// Spectral norm via power iteration on M^T M, written independently of the
// library's shortcut.
double power_iteration_norm(const Mat& M, std::mt19937_64& rng) {
  Vec v = cilo::testing::random_vec(rng, static_cast<int>(M.cols()));
  v.normalize();
  for (int it = 0; it < 2000; ++it) {
    Vec w = M.transpose() * (M * v);
    double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
  }
  return (M * v).norm();
}

}  // namespace

TEST_CASE("subset products in binary-counter order") {
  Vec x(2);
  x << 2, 3;
  Vec f = subset_product_features(x, 2);
  REQUIRE(f.size() == 3);
  CHECK(f(0) == doctest::Approx(2));
  CHECK(f(1) == doctest::Approx(3));
  CHECK(f(2) == doctest::Approx(6));

  Vec ones = Vec::Ones(5);
  Vec g = subset_product_features(ones, 5);
  REQUIRE(g.size() == 31);
  CHECK(g.minCoeff() == doctest::Approx(1.0));
  CHECK(g.maxCoeff() == doctest::Approx(1.0));

  Vec xz(2);
  xz << 0, 5;
  Vec h = subset_product_features(xz, 2);
  CHECK(h(0) == doctest::Approx(0));
  CHECK(h(1) == doctest::Approx(5));
  CHECK(h(2) == doctest::Approx(0));

  CHECK_THROWS_AS(subset_product_features(x, 3), DimensionMismatch);
}

TEST_CASE("feature matrix block structure") {
  {
    LinearHypothesis hyp(1, FeatureMap(2));
    Vec x(2);
    x << 2, 3;
    Mat Phi = hyp.feature_matrix(x);
    REQUIRE(Phi.rows() == 1);
    REQUIRE(Phi.cols() == 3);
    CHECK((Phi.row(0).transpose() - subset_product_features(x, 2)).norm() < 1e-15);
  }
  {
    LinearHypothesis hyp(3, FeatureMap(1));
    Mat Phi = hyp.feature_matrix(Vec::Ones(1));
    CHECK((Phi - Mat::Identity(3, 3)).norm() < 1e-15);
  }
  {
    LinearHypothesis hyp(20, FeatureMap(5));
    CHECK(hyp.param_dim() == 620);
    Mat Phi = hyp.feature_matrix(Vec::Ones(5));
    CHECK(Phi.rows() == 20);
    CHECK(Phi.cols() == 620);
  }
}

TEST_CASE("predict") {
  LinearHypothesis hyp(3, FeatureMap(1));
  Vec x = Vec::Ones(1);
  CHECK(hyp.predict(Vec::Zero(3), x).norm() == 0.0);

  Vec theta(3);
  theta << 10, 1.1, 1;
  Vec c = hyp.predict(theta, x);
  CHECK(c(0) == doctest::Approx(10));
  CHECK(c(1) == doctest::Approx(1.1));
  CHECK(c(2) == doctest::Approx(1));

  LinearHypothesis h1(1, FeatureMap(3));
  Vec x3(3);
  x3 << 2, 5, 7;
  Vec e1 = Vec::Zero(h1.param_dim());
  e1(0) = 1.0;
  CHECK(h1.predict(e1, x3)(0) == doctest::Approx(subset_product_features(x3, 3)(0)));
}

TEST_CASE("predict linearity and spectral bound inequality") {
  std::mt19937_64 rng(41);
  LinearHypothesis hyp(4, FeatureMap(3));
  std::vector<Vec> xs, cs;
  for (int i = 0; i < 6; ++i) {
    xs.push_back(cilo::testing::random_vec(rng, 3));
    cs.push_back(cilo::testing::random_vec(rng, 4));
  }
  Dataset data(xs, cs, hyp);
  double bphi = feature_spectral_bound(data);

  for (int t = 0; t < 30; ++t) {
    Vec th1 = cilo::testing::random_vec(rng, hyp.param_dim());
    Vec th2 = cilo::testing::random_vec(rng, hyp.param_dim());
    double a = 2.0 * (static_cast<double>(rng() % 1000) / 1000.0) - 1.0;
    double b = 2.0 * (static_cast<double>(rng() % 1000) / 1000.0) - 1.0;
    int i = static_cast<int>(rng() % 6);
    Vec lhs = data.predict(Vec(a * th1 + b * th2), i);
    Vec rhs = a * data.predict(th1, i) + b * data.predict(th2, i);
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-12 * (1.0 + rhs.norm()));
    CHECK(data.predict(th1, i).norm() <= bphi * th1.norm() * (1.0 + 1e-12));
  }
}

TEST_CASE("feature_spectral_bound") {
  Dataset ex1 = cilo::testing::ex1_dataset();
  CHECK(feature_spectral_bound(ex1) == doctest::Approx(1.0));

  {
    // Single sample with feature vector (3, 4): use k=2 and x=(3, 4/3) so the
    // kept pair (x1, x2*x1...) -- simpler: d=2, k=1 gives phi=(x1); build the
    // (3,4) case with k=2, s=1 removing the product term.
    LinearHypothesis hyp(2, FeatureMap(2, 1));
    Vec x(2);
    x << 3, 4;
    Dataset data({x}, {Vec::Zero(2)}, hyp);
    CHECK(feature_spectral_bound(data) == doctest::Approx(5.0));
  }

  std::mt19937_64 rng(43);
  LinearHypothesis hyp(3, FeatureMap(4, 2));
  std::vector<Vec> xs, cs;
  for (int i = 0; i < 5; ++i) {
    xs.push_back(cilo::testing::random_vec(rng, 4));
    cs.push_back(cilo::testing::random_vec(rng, 3));
  }
  Dataset data(xs, cs, hyp);
  double expect = 0.0;
  for (int i = 0; i < data.n(); ++i)
    expect = std::max(expect, power_iteration_norm(hyp.feature_matrix(xs[i]), rng));
  CHECK(feature_spectral_bound(data) == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("truncation removes largest subsets first and nests") {
  const int k = 4, p = 15;
  for (int s = 1; s < p; ++s) {
    FeatureMap coarse(k, s);
    FeatureMap fine(k, s - 1);
    // Nesting: kept masks at level s are a subset of level s-1.
    for (unsigned m : coarse.kept_masks()) {
      bool found = false;
      for (unsigned m2 : fine.kept_masks())
        if (m2 == m) found = true;
      CHECK(found);
    }
    // Every kept mask has cardinality <= every dropped mask.
    int max_kept = 0;
    for (unsigned m : coarse.kept_masks()) max_kept = std::max(max_kept, std::popcount(m));
    std::vector<bool> kept(p + 1, false);
    for (unsigned m : coarse.kept_masks()) kept[m] = true;
    for (unsigned m = 1; m <= static_cast<unsigned>(p); ++m)
      if (!kept[m]) CHECK(std::popcount(m) >= max_kept);
  }
  // s=0 reproduces the full map.
  FeatureMap full(k, 0);
  Vec x(4);
  x << 1.5, -2, 0.5, 3;
  CHECK((full(x) - subset_product_features(x, k)).norm() < 1e-15);
}

TEST_CASE("csv round trip") {
  std::mt19937_64 rng(47);
  LinearHypothesis hyp(3, FeatureMap(2));
  std::vector<Vec> xs, cs;
  for (int i = 0; i < 4; ++i) {
    xs.push_back(cilo::testing::random_vec(rng, 2));
    cs.push_back(cilo::testing::random_vec(rng, 3));
  }
  Dataset data(xs, cs, hyp);
  const std::string path = "model_roundtrip.csv";
  data.export_csv(path);
  Dataset back = Dataset::import_csv(path, hyp);
  REQUIRE(back.n() == data.n());
  for (int i = 0; i < data.n(); ++i) {
    CHECK((back.x(i) - data.x(i)).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((back.c(i) - data.c(i)).lpNorm<Eigen::Infinity>() == 0.0);
  }
  std::remove(path.c_str());
}
