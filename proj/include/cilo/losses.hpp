#pragma once

#include <optional>
#include <vector>

#include "cilo/model.hpp"
#include "cilo/polyhedron.hpp"

namespace cilo {

struct LossReport {
  double value = 0.0;
  std::optional<Vec> subgradient;
  std::optional<std::vector<double>> per_sample;
};

struct BetaBounds {
  double beta_min = 0.0;
  double beta_max = 0.0;
};

/// Tie handling for the induced decision: the LP oracle's deterministic vertex,
/// or the worst true cost over the whole optimal face.
enum class TieMode { Vertex, WorstCase };

/// Mean true cost of the decision induced by the predicted costs.
LossReport target_loss(const Vec& theta, const Dataset& data, const Polyhedron& W,
                       TieMode mode = TieMode::Vertex);

/// target_loss (vertex mode) minus the full-information optimum beta_min.
double regret(const Vec& theta, const Dataset& data, const Polyhedron& W);

/// Budget-constrained minus unconstrained mean predicted-cost minimum;
/// non-negative and zero iff the predictor's decisions meet the budget.
LossReport cilo_loss(const Vec& theta, double beta, const Dataset& data, const Polyhedron& W);

/// mean_i [ max_w (c_i - 2 c_theta(x_i)) . w + 2 c_theta(x_i) . w(c_i) ],
/// with a subgradient from the inner maximizer.
LossReport spo_plus_loss(const Vec& theta, const Dataset& data, const Polyhedron& W);

/// Mean squared prediction error with exact gradient.
LossReport slo_loss(const Vec& theta, const Dataset& data);

BetaBounds beta_bounds(const Dataset& data, const Polyhedron& W);

/// Empirical misspecification estimates over a supplied candidate set:
/// (min worst-case regret, sqrt of min squared-error loss).
std::pair<double, double> gamma_hats(const std::vector<Vec>& candidates, const Dataset& data,
                                     const Polyhedron& W);

}  // namespace cilo
