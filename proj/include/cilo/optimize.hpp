#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "cilo/losses.hpp"
#include "cilo/smoothing.hpp"

namespace cilo {

struct GDConfig {
  int max_iters = 500;
  double grad_tol = -1.0;  // <= 0 selects 1e-5 * B_W * B_Phi where a scale is known
  double init_step = 1.0;
  double backtrack_factor = 0.5;
  double sufficient_decrease = 1e-4;
  unsigned long long seed = 0;
  int selection_stride = 1;  // validation-scoring cadence inside train_cilo
};

struct TraceEntry {
  int iter = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

enum class TrainPhase { SCilo, LogCilo, Escaped, Baseline };

struct TrainResult {
  Vec theta;
  std::optional<double> beta_used;
  std::vector<TraceEntry> trace;
  TrainPhase phase = TrainPhase::Baseline;
  bool line_search_stalled = false;
};

/// Differentiable scalar field: returns (value, gradient). May report +inf to
/// reject a trial point (the line search then backtracks past it).
using Objective = std::function<std::pair<double, Vec>(const Vec&)>;

struct GDResult {
  Vec point;
  double value = 0.0;
  Vec grad;
  std::vector<TraceEntry> trace;
  bool stalled = false;    // line-search step underflowed 1e-16
  bool observer_stop = false;
};

/// Gradient descent with Armijo backtracking. The observer runs after every
/// accepted step (and once at the start); returning false stops the descent.
GDResult gd_backtracking(const Objective& objective, const Vec& lambda0, const GDConfig& cfg,
                         const std::function<bool(int, const Vec&, double, const Vec&)>& observer =
                             nullptr);

/// Surrogate training over an evenly spaced budget grid: descend the smoothed
/// surrogate per budget, switch to the log variant when iterates sink into the
/// moment set, escape from the common boundary if needed, and keep the iterate
/// with the smallest selection-set decision loss.
TrainResult train_cilo(const Dataset& train, const Dataset& selection, const Polyhedron& W,
                       double beta_low, double beta_high, int beta_count, const GDConfig& cfg);

/// Subgradient descent with step init_step/sqrt(t+1) and suffix-half averaging.
TrainResult train_spo_plus(const Dataset& train, const Polyhedron& W, const GDConfig& cfg);

/// Ridge-regularized least squares via the shared-Gram normal equations.
TrainResult train_slo(const Dataset& train, const GDConfig& cfg);

}  // namespace cilo
