#pragma once

#include <optional>
#include <vector>

#include "cilo/losses.hpp"
#include "cilo/model.hpp"
#include "cilo/polyhedron.hpp"

namespace cilo {

struct ProjectionResult {
  Vec point;              // projection of lambda onto the (negated) moment set
  Mat witness;            // n x d decision profile reproducing the point
  double distance = 0.0;  // ||lambda - point||
  double fw_gap = 0.0;    // final Frank-Wolfe duality gap
  bool converged = true;  // false when the iteration cap was hit first
};

struct ProxPair {
  Vec theta_plain;   // lambda - projection residual w.r.t. -V
  Vec theta_budget;  // same w.r.t. -Vbar^beta
  double envelope_plain = 0.0;
  double envelope_budget = 0.0;
};

/// Frank-Wolfe projector onto -V (no budget) or -Vbar^beta (budget present),
/// where V = { (1/n) sum_i Phi(x_i)^T w_i : w_i in W } and Vbar^beta adds the
/// true-cost budget (1/n) sum_i c_i . w_i <= beta. Away steps, exact quadratic
/// line search, and periodic fully corrective (min-norm-point) passes over the
/// atom set; keeps its atom set across calls as a warm start, so an instance
/// is not thread-safe (distinct instances are independent).
class MomentProjector {
 public:
  MomentProjector(const Dataset& data, const Polyhedron& W, std::optional<double> beta);

  /// tol <= 0 selects the default 1e-6 * (1 + ||lambda||^2).
  ProjectionResult project(const Vec& lambda, double tol = -1.0);

  void clear_warm_start() { atoms_.clear(); }

 private:
  struct Atom {
    Vec v;        // point of the negated moment set
    Mat profile;  // n x d decision profile realizing v
    double weight;
  };

  Vec lmo(const Vec& grad, Mat* profile);
  void correct(const Vec& lambda, Vec& v);

  const Dataset& data_;
  const Polyhedron& W_;
  std::optional<double> beta_;
  std::optional<BudgetOracle> oracle_;
  std::vector<SimplexBasis> bases_;
  std::vector<Atom> atoms_;
};

/// Bundles the two projectors for one (data, W, beta) triple and evaluates the
/// smoothed losses; reuses warm starts across calls along an optimization path.
class CiloSmoothing {
 public:
  CiloSmoothing(const Dataset& data, const Polyhedron& W, double beta);

  ProjectionResult project_plain(const Vec& lambda, double tol = -1.0);
  ProjectionResult project_budget(const Vec& lambda, double tol = -1.0);

  ProxPair prox(const Vec& lambda, double tol = -1.0);

  /// Half squared-distance gap: value = d(l,-Vbar)^2/2 - d(l,-V)^2/2,
  /// grad = theta_budget - theta_plain.
  std::pair<double, Vec> s_cilo(const Vec& lambda, double tol = -1.0);

  /// Log-distance gap; throws OnBoundary when either distance < 1e-10.
  std::pair<double, Vec> log_cilo(const Vec& lambda, double tol = -1.0);

  /// lambda + r_factor * B_W * B_Phi * unit(lambda - F_V(lambda)).
  Vec boundary_escape(const Vec& lambda, double r_factor = 3.0, double tol = -1.0);

  double scale() const { return bw_bphi_; }  // B_W * B_Phi
  double beta() const { return beta_; }

 private:
  MomentProjector plain_;
  MomentProjector budget_;
  double beta_;
  double bw_bphi_;
};

// One-shot conveniences (fresh projector per call).
ProjectionResult project_moment_set(const Vec& lambda, const Dataset& data, const Polyhedron& W,
                                    std::optional<double> beta, double tol = -1.0);
ProxPair prox_pair(const Vec& lambda, double beta, const Dataset& data, const Polyhedron& W,
                   double tol = -1.0);
std::pair<double, Vec> s_cilo(const Vec& lambda, double beta, const Dataset& data,
                              const Polyhedron& W, double tol = -1.0);
std::pair<double, Vec> log_cilo(const Vec& lambda, double beta, const Dataset& data,
                                const Polyhedron& W, double tol = -1.0);
Vec boundary_escape(const Vec& lambda, const Dataset& data, const Polyhedron& W,
                    double r_factor = 3.0);

}  // namespace cilo
