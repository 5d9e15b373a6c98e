#pragma once

#include <optional>
#include <vector>

#include "cilo/errors.hpp"
#include "cilo/types.hpp"

namespace cilo {

enum class VarStatus : unsigned char { Basic, AtLower, AtUpper };

/// Caller-owned warm-start state for repeated solves over the same polyhedron.
/// Passing an invalid or stale basis is safe; the solver falls back to a cold
/// start whenever the stored basis is not primal feasible.
struct SimplexBasis {
  std::vector<int> basis;         // row -> structural variable index
  std::vector<VarStatus> status;  // per structural variable
  bool valid = false;
};

struct LPSolution {
  Vec point;               // vertex of the polyhedron
  double value = 0.0;      // objective at the vertex
  bool is_unique = true;   // false when a nonbasic reduced cost sits below tie tolerance
  std::vector<int> basis;  // basic structural variable indices (may include slots of -1
                           // for artificial rows kept by redundant equalities)
};

/// Bounded polyhedron W = { w : A w = b, lower <= w <= upper }.
///
/// Construction runs a phase-1 feasibility solve and throws
/// InfeasiblePolyhedron when the set is empty. Immutable afterwards; all
/// solves use caller-owned scratch so concurrent solves are safe.
class Polyhedron {
 public:
  Polyhedron(Mat A, Vec b, Vec lower, Vec upper);

  int dim() const { return static_cast<int>(lower_.size()); }
  int rows() const { return static_cast<int>(b_.size()); }

  const Mat& eq_matrix() const { return A_; }
  const Vec& eq_rhs() const { return b_; }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }

  /// Upper bound on sup ||w||_2 over W: exact max over enumerated vertices
  /// when dim() <= 8, otherwise the clamp-box corner norm. Cached.
  double ball_radius() const { return ball_radius_; }

  /// Minimize objective^T w over W. Returns a vertex; deterministic under the
  /// fixed tie-breaking rule (lowest-index entering variable on ties, Bland's
  /// rule after 5*d degenerate pivots).
  LPSolution minimize(const Vec& objective) const;
  LPSolution minimize(const Vec& objective, SimplexBasis* warm) const;

  /// All vertices (basic feasible points). Only intended for small dimensions;
  /// cost grows as C(d,j) * 2^(d-j).
  std::vector<Vec> enumerate_vertices() const;

  static constexpr double kFeasTol = 1e-8;
  static constexpr double kTieTol = 1e-9;

 private:
  Mat A_;
  Vec b_;
  Vec lower_;
  Vec upper_;
  double ball_radius_ = 0.0;
};

double ball_radius(const Polyhedron& W);

LPSolution lp_minimize(const Vec& objective, const Polyhedron& W);

/// Max of true_cost^T w over the optimal face argmin_w pred^T w, via a second
/// LP that pins pred^T w to its minimum and maximizes true_cost.
double optimal_face_worst_case(const Vec& pred, const Vec& true_cost, const Polyhedron& W);

struct BudgetSolution {
  double value = 0.0;       // primal witness objective (1/n) sum pred_i . w_i
  double dual_y = 0.0;      // multiplier of the budget constraint at the certified dual
  double dual_value = 0.0;  // certified lower bound on value
  double gap = 0.0;         // value - dual_value
  Mat witness;              // n x d, row i is w_i (a convex combination of at most two vertices)
};

/// Budget-constrained profile LP with a fixed right-hand structure:
///   min over (w_1..w_n) in W^n of (1/n) sum pred_i . w_i
///   s.t. (1/n) sum true_i . w_i <= beta.
/// Solved through the scalar concave dual y -> (1/n) sum min_w (pred_i + y true_i).w - y beta,
/// maximized by bisection on the budget residual of the dual minimizers, with
/// primal recovery by mixing the two vertex profiles bracketing the budget. Reusable across calls with varying
/// pred (true costs and beta fixed); per-sample warm bases and the last dual
/// point are kept internally, so one oracle instance is not thread-safe.
class BudgetOracle {
 public:
  BudgetOracle(const Polyhedron& W, std::vector<Vec> true_costs, double beta,
               double cert_tol_rel = 1e-6);

  BudgetSolution solve(const std::vector<Vec>& pred);

  double beta_min() const { return beta_min_; }
  double beta() const { return beta_; }

 private:
  struct DualEval;
  DualEval eval_dual(const std::vector<Vec>& pred, double y);
  BudgetSolution solve_tight(const std::vector<Vec>& pred);

  const Polyhedron& W_;
  std::vector<Vec> true_costs_;
  double beta_;
  double cert_tol_rel_;
  double beta_min_ = 0.0;        // (1/n) sum min_w true_i . w
  Mat min_true_profile_;         // n x d, per-sample minimizers of true_i
  std::vector<SimplexBasis> sample_bases_;
  double last_y_ = -1.0;
};

BudgetSolution lp_minimize_budget(const std::vector<Vec>& pred, const std::vector<Vec>& true_costs,
                                  double beta, const Polyhedron& W);

}  // namespace cilo
