#include "cilo/polyhedron.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace cilo {

namespace {

constexpr double kPivTol = 1e-10;
constexpr double kRatioTieTol = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Dense bounded-variable revised simplex over the extended system
// [A | S] (w, a) = b where S holds one signed artificial column per row.
// Structural variables carry the polyhedron bounds; artificials are free to
// [0, inf) during phase 1 and pinned to [0, 0] afterwards.
struct Simplex {
  const Mat& A;
  const Vec& b;
  int d, j, N;
  Vec lo, hi;                     // size N
  std::vector<double> art_sign;   // size j
  std::vector<int> basis;         // size j
  std::vector<VarStatus> status;  // size N
  Vec x;                          // size N
  long degen_pivots = 0;
  Eigen::PartialPivLU<Mat> lu;
  Mat Bmat;

  Simplex(const Mat& A_, const Vec& b_, const Vec& lower, const Vec& upper)
      : A(A_), b(b_), d(static_cast<int>(lower.size())), j(static_cast<int>(b_.size())),
        N(d + j), lo(N), hi(N), art_sign(j, 1.0), basis(), status(N, VarStatus::AtLower),
        x(Vec::Zero(N)), Bmat(j, j) {
    lo.head(d) = lower;
    hi.head(d) = upper;
    lo.tail(j).setZero();
    hi.tail(j).setZero();
  }

  double col_entry(int q, int row) const {
    if (q < d) return A(row, q);
    return (q - d == row) ? art_sign[q - d] : 0.0;
  }

  Vec column(int q) const {
    if (q < d) return A.col(q);
    Vec e = Vec::Zero(j);
    e[q - d] = art_sign[q - d];
    return e;
  }

  bool factor() {
    if (j == 0) return true;
    for (int r = 0; r < j; ++r) Bmat.col(r) = column(basis[r]);
    lu.compute(Bmat);
    double mind = 1.0;
    // PartialPivLU has no rank query; probe the diagonal of U.
    for (int r = 0; r < j; ++r) mind = std::min(mind, std::abs(lu.matrixLU()(r, r)));
    return mind > 1e-13 * (1.0 + Bmat.cwiseAbs().maxCoeff());
  }

  // Recompute basic values from nonbasic statuses; requires factor().
  void restore_basics() {
    Vec rhs = b;
    for (int q = 0; q < N; ++q) {
      if (status[q] == VarStatus::Basic) continue;
      x[q] = (status[q] == VarStatus::AtLower) ? lo[q] : hi[q];
      if (x[q] != 0.0) rhs -= column(q) * x[q];
    }
    if (j == 0) return;
    Vec xb = lu.solve(rhs);
    for (int r = 0; r < j; ++r) x[basis[r]] = xb[r];
  }

  bool basics_feasible(double tol) const {
    for (int r = 0; r < j; ++r) {
      int q = basis[r];
      if (x[q] < lo[q] - tol || x[q] > hi[q] + tol) return false;
    }
    return true;
  }

  // Minimize c^T x from the current basic feasible state.
  void optimize(const Vec& c, long pivot_cap) {
    long pivots = 0;
    const long bland_after = 5L * d;
    for (;;) {
      if (++pivots > pivot_cap) throw NumericalFailure("simplex: cycling guard exceeded");
      if (!factor()) throw NumericalFailure("simplex: singular basis");
      restore_basics();

      Vec y = Vec::Zero(j);
      if (j > 0) {
        Vec cB(j);
        for (int r = 0; r < j; ++r) cB[r] = c[basis[r]];
        y = lu.matrixLU().triangularView<Eigen::Upper>().transpose().solve(cB);
        y = lu.matrixLU().triangularView<Eigen::UnitLower>().transpose().solve(y);
        y = lu.permutationP().transpose() * y;
      }

      const bool bland = degen_pivots >= bland_after;
      int enter = -1;
      double best = Polyhedron::kTieTol;
      for (int q = 0; q < N; ++q) {
        if (status[q] == VarStatus::Basic || lo[q] >= hi[q]) continue;
        double dq = c[q] - ((q < d) ? y.dot(A.col(q)) : y[q - d] * art_sign[q - d]);
        double viol = (status[q] == VarStatus::AtLower) ? -dq : dq;
        if (viol <= Polyhedron::kTieTol) continue;
        if (bland) {
          enter = q;
          break;
        }
        if (viol > best + 1e-15) {
          best = viol;
          enter = q;
        }
      }
      if (enter < 0) return;  // optimal

      const double sigma = (status[enter] == VarStatus::AtLower) ? 1.0 : -1.0;
      Vec dB = (j > 0) ? Vec(lu.solve(column(enter))) : Vec(0);

      double tstar = hi[enter] - lo[enter];  // bound-flip limit
      int leave = -1;
      double leave_delta = 0.0;
      for (int r = 0; r < j; ++r) {
        const double delta = -sigma * dB[r];
        const int vb = basis[r];
        double lim;
        if (delta > kPivTol)
          lim = (hi[vb] - x[vb]) / delta;
        else if (delta < -kPivTol)
          lim = (lo[vb] - x[vb]) / delta;
        else
          continue;
        if (lim < 0.0) lim = 0.0;
        if (lim < tstar - kRatioTieTol) {
          tstar = lim;
          leave = r;
          leave_delta = delta;
        } else if (lim <= tstar + kRatioTieTol && leave >= 0 && vb < basis[leave]) {
          leave = r;
          leave_delta = delta;
        } else if (lim <= tstar + kRatioTieTol && leave < 0) {
          // Ties the bound flip; prefer leaving the basis.
          tstar = std::min(tstar, lim);
          leave = r;
          leave_delta = delta;
        }
      }
      if (!std::isfinite(tstar)) throw NumericalFailure("simplex: unbounded direction");
      if (tstar <= kRatioTieTol) ++degen_pivots;

      x[enter] += sigma * tstar;
      for (int r = 0; r < j; ++r) x[basis[r]] -= sigma * dB[r] * tstar;
      if (leave < 0) {
        status[enter] = (status[enter] == VarStatus::AtLower) ? VarStatus::AtUpper : VarStatus::AtLower;
        x[enter] = (status[enter] == VarStatus::AtLower) ? lo[enter] : hi[enter];
      } else {
        int out = basis[leave];
        status[out] = (leave_delta > 0.0) ? VarStatus::AtUpper : VarStatus::AtLower;
        x[out] = (status[out] == VarStatus::AtLower) ? lo[out] : hi[out];
        basis[leave] = enter;
        status[enter] = VarStatus::Basic;
      }
    }
  }

  // Phase 1: start all structurals at the bound closer to zero, load artificials.
  // Returns the residual infeasibility.
  double phase1(long pivot_cap) {
    for (int q = 0; q < d; ++q) {
      status[q] = (std::abs(lo[q]) <= std::abs(hi[q])) ? VarStatus::AtLower : VarStatus::AtUpper;
      x[q] = (status[q] == VarStatus::AtLower) ? lo[q] : hi[q];
    }
    Vec r = b;
    for (int q = 0; q < d; ++q)
      if (x[q] != 0.0) r -= A.col(q) * x[q];
    basis.resize(j);
    for (int i = 0; i < j; ++i) {
      art_sign[i] = (r[i] >= 0.0) ? 1.0 : -1.0;
      basis[i] = d + i;
      status[d + i] = VarStatus::Basic;
      x[d + i] = std::abs(r[i]);
      hi[d + i] = kInf;
    }
    Vec c = Vec::Zero(N);
    c.tail(j).setOnes();
    optimize(c, pivot_cap);

    double infeas = 0.0;
    for (int i = 0; i < j; ++i) infeas += std::max(0.0, x[d + i]);

    // Drive artificials that linger in the basis at level zero out of it.
    for (int r2 = 0; r2 < j; ++r2) {
      if (basis[r2] < d) continue;
      if (!factor()) break;
      Vec er = Vec::Zero(j);
      er[r2] = 1.0;
      Vec row = lu.matrixLU().triangularView<Eigen::Upper>().transpose().solve(er);
      row = lu.matrixLU().triangularView<Eigen::UnitLower>().transpose().solve(row);
      row = lu.permutationP().transpose() * row;
      int pick = -1;
      for (int q = 0; q < d; ++q) {
        if (status[q] == VarStatus::Basic) continue;
        if (std::abs(row.dot(A.col(q))) > 1e-7) {
          pick = q;
          break;
        }
      }
      if (pick >= 0) {
        int art = basis[r2];
        basis[r2] = pick;
        status[pick] = VarStatus::Basic;
        status[art] = VarStatus::AtLower;
        x[art] = 0.0;
      }
      // else: redundant row, artificial stays basic pinned at zero.
    }
    // Pin all artificials for phase 2.
    for (int i = 0; i < j; ++i) {
      hi[d + i] = 0.0;
      if (status[d + i] != VarStatus::Basic) x[d + i] = 0.0;
    }
    return infeas;
  }

  bool try_warm(const SimplexBasis& warm) {
    if (!warm.valid || static_cast<int>(warm.status.size()) != d ||
        static_cast<int>(warm.basis.size()) != j)
      return false;
    for (int idx : warm.basis)
      if (idx < 0 || idx >= d) return false;
    basis = warm.basis;
    for (int q = 0; q < d; ++q) status[q] = warm.status[q];
    for (int i = 0; i < j; ++i) {
      status[d + i] = VarStatus::AtLower;
      x[d + i] = 0.0;
      hi[d + i] = 0.0;
    }
    if (!factor()) return false;
    restore_basics();
    return basics_feasible(Polyhedron::kFeasTol);
  }
};

long pivot_cap_for(int d, int j) { return 2000L + 200L * (d + j); }

}  // namespace

Polyhedron::Polyhedron(Mat A, Vec b, Vec lower, Vec upper)
    : A_(std::move(A)), b_(std::move(b)), lower_(std::move(lower)), upper_(std::move(upper)) {
  const int d = dim();
  const int j = rows();
  if (A_.rows() != j || (j > 0 && A_.cols() != d))
    throw DimensionMismatch("Polyhedron: A/b dimensions disagree");
  if (upper_.size() != d) throw DimensionMismatch("Polyhedron: bound lengths disagree");
  if (j > d) throw DimensionMismatch("Polyhedron: more equality rows than variables");
  for (int q = 0; q < d; ++q) {
    if (!std::isfinite(lower_[q]) || !std::isfinite(upper_[q]))
      throw DimensionMismatch("Polyhedron: bounds must be finite");
    if (lower_[q] > upper_[q]) throw InfeasiblePolyhedron("Polyhedron: lower > upper");
  }
  if (A_.cols() != d) A_.resize(0, d);

  Simplex s(A_, b_, lower_, upper_);
  double infeas = s.phase1(pivot_cap_for(d, j));
  if (infeas > kFeasTol * (1.0 + b_.cwiseAbs().sum()))
    throw InfeasiblePolyhedron("Polyhedron: phase-1 residual " + std::to_string(infeas));

  if (d <= 8) {
    double r = 0.0;
    for (const Vec& v : enumerate_vertices()) r = std::max(r, v.norm());
    ball_radius_ = r;
  } else {
    ball_radius_ = lower_.cwiseAbs().cwiseMax(upper_.cwiseAbs()).norm();
  }
}

LPSolution Polyhedron::minimize(const Vec& objective) const { return minimize(objective, nullptr); }

LPSolution Polyhedron::minimize(const Vec& objective, SimplexBasis* warm) const {
  const int d = dim();
  const int j = rows();
  if (objective.size() != d) throw DimensionMismatch("lp_minimize: objective length != dim");
  if (!objective.allFinite()) throw DimensionMismatch("lp_minimize: objective not finite");

  Simplex s(A_, b_, lower_, upper_);
  bool warmed = warm != nullptr && s.try_warm(*warm);
  if (!warmed) {
    double infeas = s.phase1(pivot_cap_for(d, j));
    if (infeas > kFeasTol * (1.0 + b_.cwiseAbs().sum()))
      throw InfeasiblePolyhedron("lp_minimize: infeasible polyhedron");
  }
  Vec c = Vec::Zero(s.N);
  c.head(d) = objective;
  s.optimize(c, pivot_cap_for(d, j));

  LPSolution sol;
  sol.point = s.x.head(d);
  sol.value = objective.dot(sol.point);
  sol.basis.assign(s.basis.begin(), s.basis.end());
  for (int& idx : sol.basis)
    if (idx >= d) idx = -1;

  // Uniqueness: a nonbasic movable variable with a reduced cost inside the tie
  // tolerance signals an alternative optimal vertex.
  sol.is_unique = true;
  {
    if (s.factor()) {
      Vec y = Vec::Zero(j);
      if (j > 0) {
        Vec cB(j);
        for (int r = 0; r < j; ++r) cB[r] = c[s.basis[r]];
        y = s.lu.matrixLU().triangularView<Eigen::Upper>().transpose().solve(cB);
        y = s.lu.matrixLU().triangularView<Eigen::UnitLower>().transpose().solve(y);
        y = s.lu.permutationP().transpose() * y;
      }
      for (int q = 0; q < d; ++q) {
        if (s.status[q] == VarStatus::Basic || s.lo[q] >= s.hi[q]) continue;
        double dq = c[q] - y.dot(A_.col(q));
        if (std::abs(dq) <= kTieTol) {
          sol.is_unique = false;
          break;
        }
      }
    }
  }

  if (warm != nullptr) {
    bool all_structural = true;
    for (int idx : s.basis)
      if (idx >= d) all_structural = false;
    if (all_structural) {
      warm->basis.assign(s.basis.begin(), s.basis.end());
      warm->status.assign(s.status.begin(), s.status.begin() + d);
      warm->valid = true;
    } else {
      warm->valid = false;
    }
  }
  return sol;
}

std::vector<Vec> Polyhedron::enumerate_vertices() const {
  const int d = dim();
  const int j = rows();
  if (d > 16) throw NumericalFailure("enumerate_vertices: dimension too large");
  std::vector<Vec> out;

  std::vector<int> comb(j);
  std::vector<int> nonbasic;
  Vec x(d);

  auto emit_candidates = [&]() {
    const int nfree = d - j;
    Eigen::FullPivLU<Mat> lu;
    if (j > 0) {
      Mat AB(j, j);
      for (int r = 0; r < j; ++r) AB.col(r) = A_.col(comb[r]);
      lu.compute(AB);
      if (lu.rank() < j) return;
    }
    for (long mask = 0; mask < (1L << nfree); ++mask) {
      Vec rhs = b_;
      for (int t = 0; t < nfree; ++t) {
        int q = nonbasic[t];
        x[q] = (mask >> t & 1) ? upper_[q] : lower_[q];
        if (j > 0 && x[q] != 0.0) rhs -= A_.col(q) * x[q];
      }
      if (j > 0) {
        Vec xb = lu.solve(rhs);
        bool ok = true;
        for (int r = 0; r < j; ++r) {
          int q = comb[r];
          if (xb[r] < lower_[q] - 1e-9 || xb[r] > upper_[q] + 1e-9) {
            ok = false;
            break;
          }
          x[q] = std::clamp(xb[r], lower_[q], upper_[q]);
        }
        if (!ok) continue;
      }
      bool dup = false;
      for (const Vec& v : out)
        if ((v - x).lpNorm<Eigen::Infinity>() < 1e-9) {
          dup = true;
          break;
        }
      if (!dup) out.push_back(x);
    }
  };

  if (j == 0) {
    nonbasic.resize(d);
    for (int q = 0; q < d; ++q) nonbasic[q] = q;
    emit_candidates();
    return out;
  }

  // Iterate over all size-j subsets of columns.
  for (int r = 0; r < j; ++r) comb[r] = r;
  for (;;) {
    nonbasic.clear();
    for (int q = 0, r = 0; q < d; ++q) {
      if (r < j && comb[r] == q)
        ++r;
      else
        nonbasic.push_back(q);
    }
    emit_candidates();
    int r = j - 1;
    while (r >= 0 && comb[r] == d - j + r) --r;
    if (r < 0) break;
    ++comb[r];
    for (int t = r + 1; t < j; ++t) comb[t] = comb[t - 1] + 1;
  }
  return out;
}

double ball_radius(const Polyhedron& W) { return W.ball_radius(); }

LPSolution lp_minimize(const Vec& objective, const Polyhedron& W) { return W.minimize(objective); }

double optimal_face_worst_case(const Vec& pred, const Vec& true_cost, const Polyhedron& W) {
  LPSolution s1 = W.minimize(pred);
  const int j = W.rows();
  const int d = W.dim();
  Mat A2(j + 1, d);
  if (j > 0) A2.topRows(j) = W.eq_matrix();
  A2.row(j) = pred.transpose();
  Vec b2(j + 1);
  b2.head(j) = W.eq_rhs();
  b2[j] = s1.value;
  Polyhedron face(A2, b2, W.lower(), W.upper());
  LPSolution s2 = face.minimize(-true_cost);
  return -s2.value;
}

// ---------------------------------------------------------------------------
// Budget-constrained profile LP
// ---------------------------------------------------------------------------

struct BudgetOracle::DualEval {
  double y = 0.0;
  double pred_mean = 0.0;    // (1/n) sum pred_i . w_i
  double budget_mean = 0.0;  // (1/n) sum true_i . w_i
  Mat profile;               // n x d
  double dual(double beta) const { return pred_mean + y * (budget_mean - beta); }
};

BudgetOracle::BudgetOracle(const Polyhedron& W, std::vector<Vec> true_costs, double beta,
                           double cert_tol_rel)
    : W_(W), true_costs_(std::move(true_costs)), beta_(beta), cert_tol_rel_(cert_tol_rel) {
  const int n = static_cast<int>(true_costs_.size());
  if (n == 0) throw DimensionMismatch("BudgetOracle: no samples");
  sample_bases_.resize(n);
  min_true_profile_.resize(n, W_.dim());
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    LPSolution s = W_.minimize(true_costs_[i]);
    acc += s.value;
    min_true_profile_.row(i) = s.point.transpose();
  }
  beta_min_ = acc / n;
}

BudgetOracle::DualEval BudgetOracle::eval_dual(const std::vector<Vec>& pred, double y) {
  const int n = static_cast<int>(true_costs_.size());
  DualEval e;
  e.y = y;
  e.profile.resize(n, W_.dim());
  for (int i = 0; i < n; ++i) {
    Vec obj = pred[i] + y * true_costs_[i];
    LPSolution s = W_.minimize(obj, &sample_bases_[i]);
    e.profile.row(i) = s.point.transpose();
    e.pred_mean += pred[i].dot(s.point);
    e.budget_mean += true_costs_[i].dot(s.point);
  }
  e.pred_mean /= n;
  e.budget_mean /= n;
  return e;
}

BudgetSolution BudgetOracle::solve_tight(const std::vector<Vec>& pred) {
  // Budget pinned to beta_min: every sample must attain its true-cost minimum,
  // so minimize pred over each per-sample optimal face.
  const int n = static_cast<int>(true_costs_.size());
  const int d = W_.dim();
  const int j = W_.rows();
  BudgetSolution out;
  out.witness.resize(n, d);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double vmin = true_costs_[i].dot(min_true_profile_.row(i).transpose());
    Mat A2(j + 1, d);
    if (j > 0) A2.topRows(j) = W_.eq_matrix();
    A2.row(j) = true_costs_[i].transpose();
    Vec b2(j + 1);
    b2.head(j) = W_.eq_rhs();
    b2[j] = vmin;
    Polyhedron face(A2, b2, W_.lower(), W_.upper());
    LPSolution s = face.minimize(pred[i]);
    out.witness.row(i) = s.point.transpose();
    acc += s.value;
  }
  out.value = acc / n;
  out.dual_value = out.value;
  out.dual_y = 0.0;
  out.gap = 0.0;
  return out;
}

BudgetSolution BudgetOracle::solve(const std::vector<Vec>& pred) {
  const double scale = 1.0 + std::abs(beta_min_);
  if (beta_ < beta_min_ - 1e-9 * scale)
    throw BudgetInfeasible("lp_minimize_budget: beta below beta_min");
  if (beta_ - beta_min_ <= 1e-9 * scale) return solve_tight(pred);

  DualEval e0 = eval_dual(pred, 0.0);
  if (e0.budget_mean <= beta_) {
    BudgetSolution out;
    out.value = e0.pred_mean;
    out.dual_value = e0.pred_mean;
    out.dual_y = 0.0;
    out.gap = 0.0;
    out.witness = std::move(e0.profile);
    last_y_ = 0.0;
    return out;
  }

  const int n = static_cast<int>(true_costs_.size());
  double pred_at_true = 0.0;
  for (int i = 0; i < n; ++i) pred_at_true += pred[i].dot(min_true_profile_.row(i).transpose());
  pred_at_true /= n;
  double ymax = std::max(0.0, (pred_at_true - e0.pred_mean) / (beta_ - beta_min_)) + 1.0;
  if (last_y_ > 0.0) ymax = std::min(ymax, std::max(last_y_ * 2.0, 1e-3));

  DualEval etop = eval_dual(pred, ymax);
  int expand = 0;
  while (etop.budget_mean > beta_ && expand++ < 120) {
    ymax *= 4.0;
    etop = eval_dual(pred, ymax);
  }
  if (etop.budget_mean > beta_)
    throw DualUnbounded("lp_minimize_budget: dual bracket expansion failed");

  DualEval above = std::move(e0);  // budget_mean >= beta
  DualEval below = std::move(etop);  // budget_mean <= beta
  double best_dual = std::max(above.dual(beta_), below.dual(beta_));
  double best_dual_y = above.dual(beta_) >= below.dual(beta_) ? above.y : below.y;

  auto note = [&](DualEval&& e) {
    double dv = e.dual(beta_);
    if (dv > best_dual) {
      best_dual = dv;
      best_dual_y = e.y;
    }
    if (e.budget_mean >= beta_) {
      if (e.y > above.y) above = std::move(e);
    } else {
      if (e.y < below.y) below = std::move(e);
    }
  };

  auto recover = [&]() -> BudgetSolution {
    double ta = above.budget_mean, tb = below.budget_mean;
    double alpha = (ta - tb > 1e-15) ? (beta_ - tb) / (ta - tb) : 0.0;
    alpha = std::clamp(alpha, 0.0, 1.0);
    BudgetSolution out;
    out.value = alpha * above.pred_mean + (1.0 - alpha) * below.pred_mean;
    out.witness = alpha * above.profile + (1.0 - alpha) * below.profile;
    if (below.pred_mean < out.value) {
      out.value = below.pred_mean;
      out.witness = below.profile;
    }
    out.dual_value = best_dual;
    out.dual_y = best_dual_y;
    out.gap = out.value - out.dual_value;
    return out;
  };

  // The dual is concave piecewise linear in y, so the optimum sits at the
  // breakpoint where the mean budget of the minimizing profile crosses beta.
  // Bisect on that sign; once the straddling evaluations lie on adjacent
  // segments the mixed primal is exact and the certificate closes the gap.
  for (int it = 0; it < 300; ++it) {
    BudgetSolution cand = recover();
    if (cand.gap <= cert_tol_rel_ * (1.0 + std::abs(cand.value))) {
      last_y_ = cand.dual_y;
      return cand;
    }
    if (below.y - above.y < 1e-15 * (1.0 + below.y)) break;
    double ymid = 0.5 * (above.y + below.y);
    note(eval_dual(pred, ymid));
  }
  BudgetSolution cand = recover();
  if (cand.gap <= 10.0 * cert_tol_rel_ * (1.0 + std::abs(cand.value))) {
    last_y_ = cand.dual_y;
    return cand;
  }
  throw NumericalFailure("lp_minimize_budget: duality gap not certified");
}

BudgetSolution lp_minimize_budget(const std::vector<Vec>& pred, const std::vector<Vec>& true_costs,
                                  double beta, const Polyhedron& W) {
  BudgetOracle oracle(W, true_costs, beta);
  return oracle.solve(pred);
}

}  // namespace cilo
