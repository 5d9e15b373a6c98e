#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <random>
#include <vector>

#include "cilo/model.hpp"
#include "cilo/polyhedron.hpp"
#include "cilo/types.hpp"

namespace cilo::testing {

// Simplex fixture in R^3 with a single sample: c = (1,2,2), Phi = I_3,
// theta1 = (10,1.1,1), theta2 = (1,3,100), budget beta = 1.
struct SimplexFixture {
  Polyhedron W;
  Vec c, theta1, theta2;
  double beta = 1.0;

  SimplexFixture()
      : W(make_simplex()), c(3), theta1(3), theta2(3) {
    c << 1, 2, 2;
    theta1 << 10, 1.1, 1;
    theta2 << 1, 3, 100;
  }

  static Polyhedron make_simplex() {
    Mat A(1, 3);
    A << 1, 1, 1;
    Vec b(1), lo = Vec::Zero(3), hi = Vec::Ones(3);
    b << 1;
    return Polyhedron(A, b, lo, hi);
  }
};

// Single-sample dataset matching SimplexFixture: d=3, k=1, x=(1) makes the
// feature matrix the identity, so theta IS the predicted cost.
inline Dataset ex1_dataset() {
  LinearHypothesis hyp(3, FeatureMap(1, 0));
  Vec x = Vec::Ones(1);
  Vec c(3);
  c << 1, 2, 2;
  return Dataset({x}, {c}, hyp);
}

inline Dataset random_dataset(std::mt19937_64& rng, const LinearHypothesis& hyp, int n,
                              double cost_scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vec> xs, cs;
  for (int i = 0; i < n; ++i) {
    Vec x(hyp.feature_map().context_dim());
    for (int t = 0; t < x.size(); ++t) x[t] = gauss(rng);
    Vec c(hyp.decision_dim());
    for (int r = 0; r < c.size(); ++r) c[r] = cost_scale * gauss(rng);
    xs.push_back(std::move(x));
    cs.push_back(std::move(c));
  }
  return Dataset(std::move(xs), std::move(cs), hyp);
}

// Draws a bounded feasible polyhedron: random equality rows through a random
// box point, bounds [0, 1].
inline Polyhedron random_polyhedron(std::mt19937_64& rng, int d, int j) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  Mat A(j, d);
  for (int r = 0; r < j; ++r)
    for (int q = 0; q < d; ++q) A(r, q) = gauss(rng);
  Vec w0(d);
  for (int q = 0; q < d; ++q) w0[q] = unif(rng);
  Vec b = (j > 0) ? Vec(A * w0) : Vec(0);
  return Polyhedron(A, b, Vec::Zero(d), Vec::Ones(d));
}

inline Vec random_vec(std::mt19937_64& rng, int d, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Vec v(d);
  for (int q = 0; q < d; ++q) v[q] = gauss(rng);
  return v;
}

// Brute-force vertex enumeration written independently of the library's
// version: for each choice of j basic columns and bound assignment of the
// rest, solve the square system and keep feasible points.
inline std::vector<Vec> brute_force_vertices(const Polyhedron& W) {
  const int d = W.dim();
  const int j = W.rows();
  const Mat& A = W.eq_matrix();
  const Vec& b = W.eq_rhs();
  std::vector<Vec> out;
  std::vector<int> idx(d);
  for (int q = 0; q < d; ++q) idx[q] = q;

  std::vector<int> subset;
  auto visit = [&](const std::vector<int>& basic) {
    std::vector<int> rest;
    for (int q = 0; q < d; ++q)
      if (std::find(basic.begin(), basic.end(), q) == basic.end()) rest.push_back(q);
    Mat AB(j, j);
    for (int r = 0; r < j; ++r) AB.col(r) = A.col(basic[r]);
    Eigen::FullPivLU<Mat> lu(AB);
    if (j > 0 && lu.rank() < j) return;
    const int nfree = d - j;
    for (long mask = 0; mask < (1L << nfree); ++mask) {
      Vec x(d);
      Vec rhs = b;
      for (int t = 0; t < nfree; ++t) {
        int q = rest[t];
        x[q] = (mask >> t & 1) ? W.upper()[q] : W.lower()[q];
        if (j > 0) rhs -= A.col(q) * x[q];
      }
      if (j > 0) {
        Vec xb = lu.solve(rhs);
        bool ok = true;
        for (int r = 0; r < j; ++r) {
          if (xb[r] < W.lower()[basic[r]] - 1e-9 || xb[r] > W.upper()[basic[r]] + 1e-9) {
            ok = false;
            break;
          }
          x[basic[r]] = xb[r];
        }
        if (!ok) continue;
      }
      bool dup = false;
      for (const Vec& v : out)
        if ((v - x).lpNorm<Eigen::Infinity>() < 1e-8) {
          dup = true;
          break;
        }
      if (!dup) out.push_back(x);
    }
  };

  std::vector<bool> pick(d, false);
  std::fill(pick.begin(), pick.begin() + j, true);
  std::sort(pick.begin(), pick.end());  // lexicographic mask iteration
  do {
    std::vector<int> basic;
    for (int q = 0; q < d; ++q)
      if (pick[q]) basic.push_back(q);
    if (static_cast<int>(basic.size()) == j) visit(basic);
  } while (std::next_permutation(pick.begin(), pick.end()));
  return out;
}

}  // namespace cilo::testing
