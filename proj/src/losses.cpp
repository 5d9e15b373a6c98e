#include "cilo/losses.hpp"

#include <cmath>

namespace cilo {

LossReport target_loss(const Vec& theta, const Dataset& data, const Polyhedron& W, TieMode mode) {
  LossReport rep;
  std::vector<double> per(data.n());
  for (int i = 0; i < data.n(); ++i) {
    Vec pred = data.predict(theta, i);
    if (mode == TieMode::Vertex)
      per[i] = data.c(i).dot(W.minimize(pred).point);
    else
      per[i] = optimal_face_worst_case(pred, data.c(i), W);
    rep.value += per[i];
  }
  rep.value /= data.n();
  rep.per_sample = std::move(per);
  return rep;
}

double regret(const Vec& theta, const Dataset& data, const Polyhedron& W) {
  return target_loss(theta, data, W).value - beta_bounds(data, W).beta_min;
}

LossReport cilo_loss(const Vec& theta, double beta, const Dataset& data, const Polyhedron& W) {
  std::vector<Vec> preds, trues;
  preds.reserve(data.n());
  trues.reserve(data.n());
  double unconstrained = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    preds.push_back(data.predict(theta, i));
    trues.push_back(data.c(i));
    unconstrained += W.minimize(preds.back()).value;
  }
  unconstrained /= data.n();
  BudgetSolution bs = lp_minimize_budget(preds, trues, beta, W);
  LossReport rep;
  rep.value = bs.value - unconstrained;
  return rep;
}

LossReport spo_plus_loss(const Vec& theta, const Dataset& data, const Polyhedron& W) {
  const auto& hyp = data.hypothesis();
  LossReport rep;
  std::vector<double> per(data.n());
  Vec sub = Vec::Zero(hyp.param_dim());
  for (int i = 0; i < data.n(); ++i) {
    Vec pred = data.predict(theta, i);
    Vec w_true = W.minimize(data.c(i)).point;
    // max_w (c - 2 pred) . w = -min_w (2 pred - c) . w
    LPSolution inner = W.minimize(Vec(2.0 * pred - data.c(i)));
    per[i] = -inner.value + 2.0 * pred.dot(w_true);
    sub += hyp.apply_transpose(data.phi(i), Vec(2.0 * (w_true - inner.point)));
    rep.value += per[i];
  }
  rep.value /= data.n();
  rep.subgradient = sub / data.n();
  rep.per_sample = std::move(per);
  return rep;
}

LossReport slo_loss(const Vec& theta, const Dataset& data) {
  const auto& hyp = data.hypothesis();
  LossReport rep;
  std::vector<double> per(data.n());
  Vec grad = Vec::Zero(hyp.param_dim());
  for (int i = 0; i < data.n(); ++i) {
    Vec resid = data.predict(theta, i) - data.c(i);
    per[i] = resid.squaredNorm();
    rep.value += per[i];
    grad += hyp.apply_transpose(data.phi(i), Vec(2.0 * resid));
  }
  rep.value /= data.n();
  rep.subgradient = grad / data.n();
  rep.per_sample = std::move(per);
  return rep;
}

BetaBounds beta_bounds(const Dataset& data, const Polyhedron& W) {
  BetaBounds bb;
  for (int i = 0; i < data.n(); ++i) {
    bb.beta_min += W.minimize(data.c(i)).value;
    bb.beta_max += -W.minimize(Vec(-data.c(i))).value;
  }
  bb.beta_min /= data.n();
  bb.beta_max /= data.n();
  return bb;
}

std::pair<double, double> gamma_hats(const std::vector<Vec>& candidates, const Dataset& data,
                                     const Polyhedron& W) {
  if (candidates.empty()) throw EmptyCandidateSet("gamma_hats: no candidates");
  double beta_min = beta_bounds(data, W).beta_min;
  double gm = std::numeric_limits<double>::infinity();
  double gc = std::numeric_limits<double>::infinity();
  for (const Vec& theta : candidates) {
    gm = std::min(gm, target_loss(theta, data, W, TieMode::WorstCase).value - beta_min);
    gc = std::min(gc, slo_loss(theta, data).value);
  }
  return {gm, std::sqrt(std::max(0.0, gc))};
}

}  // namespace cilo
