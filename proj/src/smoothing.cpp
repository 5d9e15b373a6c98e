#include "cilo/smoothing.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace cilo {

namespace {

constexpr double kBoundaryTol = 1e-10;

double default_tol(const Vec& lambda, double tol) {
  return (tol > 0.0) ? tol : 1e-6 * (1.0 + lambda.squaredNorm());
}

}  // namespace

MomentProjector::MomentProjector(const Dataset& data, const Polyhedron& W,
                                 std::optional<double> beta)
    : data_(data), W_(W), beta_(beta) {
  if (beta_) {
    std::vector<Vec> trues;
    trues.reserve(data_.n());
    for (int i = 0; i < data_.n(); ++i) trues.push_back(data_.c(i));
    oracle_.emplace(W_, std::move(trues), *beta_);
    if (*beta_ < oracle_->beta_min() - 1e-9 * (1.0 + std::abs(oracle_->beta_min())))
      throw BudgetInfeasible("MomentProjector: beta below beta_min");
  } else {
    bases_.resize(data_.n());
  }
}

Vec MomentProjector::lmo(const Vec& grad, Mat* profile) {
  const auto& hyp = data_.hypothesis();
  const int n = data_.n();
  const int d = hyp.decision_dim();
  profile->resize(n, d);
  // Linearized objective over v = -(1/n) sum Phi_i^T w_i is
  // (1/n) sum (-Phi_i grad) . w_i, a profile LP.
  if (oracle_) {
    std::vector<Vec> preds;
    preds.reserve(n);
    for (int i = 0; i < n; ++i) preds.push_back(-hyp.predict_from_features(grad, data_.phi(i)));
    BudgetSolution bs = oracle_->solve(preds);
    *profile = std::move(bs.witness);
  } else {
    for (int i = 0; i < n; ++i) {
      Vec pred = -hyp.predict_from_features(grad, data_.phi(i));
      profile->row(i) = W_.minimize(pred, &bases_[i]).point.transpose();
    }
  }
  Vec v = Vec::Zero(hyp.param_dim());
  for (int i = 0; i < n; ++i)
    v -= hyp.apply_transpose(data_.phi(i), profile->row(i).transpose());
  return v / n;
}

// Fully corrective step (min-norm-point inner loop): reoptimize the weights
// over the current atoms exactly, minimizing ||sum_a w_a v_a - lambda||^2 over
// the simplex, and drop atoms whose weight hits zero. Keeps the support at most
// m + 1 atoms and resynchronizes the iterate exactly.
void MomentProjector::correct(const Vec& lambda, Vec& v) {
  double wsum = 0.0;
  for (const Atom& a : atoms_) wsum += a.weight;
  for (Atom& a : atoms_) a.weight /= wsum;

  // Gram entries are cached once; drop passes only shrink the index set.
  const int p0 = static_cast<int>(atoms_.size());
  Mat gram(p0, p0);
  Vec proj(p0);
  for (int a = 0; a < p0; ++a) {
    for (int b = a; b < p0; ++b) gram(a, b) = gram(b, a) = atoms_[a].v.dot(atoms_[b].v);
    proj[a] = atoms_[a].v.dot(lambda);
  }
  std::vector<int> live(p0);
  for (int a = 0; a < p0; ++a) live[a] = a;

  for (int pass = 0; pass < p0 + 2; ++pass) {
    const int p = static_cast<int>(live.size());
    if (p == 1) {
      atoms_[live[0]].weight = 1.0;
      break;
    }
    // Affine minimizer over the live atoms: KKT system for the sum-to-one
    // equality-constrained least squares, with a tiny ridge for duplicates.
    Mat kkt = Mat::Zero(p + 1, p + 1);
    Vec rhs(p + 1);
    for (int a = 0; a < p; ++a) {
      for (int b = 0; b < p; ++b) kkt(a, b) = gram(live[a], live[b]);
      rhs[a] = proj[live[a]];
      kkt(a, p) = kkt(p, a) = 1.0;
    }
    rhs[p] = 1.0;
    double ridge = 1e-12 * (1.0 + kkt.topLeftCorner(p, p).trace() / p);
    for (int a = 0; a < p; ++a) kkt(a, a) += ridge;
    Vec alpha = Eigen::LDLT<Mat>(kkt).solve(rhs).head(p);

    if (alpha.minCoeff() >= -1e-12) {
      for (int a = 0; a < p; ++a) atoms_[live[a]].weight = std::max(0.0, alpha[a]);
      break;
    }
    // Step from the current weights toward the affine minimizer until the
    // first weight hits zero, then drop the zeroed atoms.
    double step = 1.0;
    for (int a = 0; a < p; ++a) {
      double w = atoms_[live[a]].weight;
      if (alpha[a] < w) step = std::min(step, w / (w - alpha[a]));
    }
    std::vector<int> kept;
    kept.reserve(p);
    for (int a = 0; a < p; ++a) {
      double w = atoms_[live[a]].weight;
      w += step * (alpha[a] - w);
      atoms_[live[a]].weight = w;
      if (w > 1e-12) kept.push_back(live[a]);
    }
    live = std::move(kept);
  }

  // Erase the dropped atoms (weight zeroed by the passes above).
  for (size_t a = 0; a < atoms_.size();) {
    if (atoms_[a].weight <= 1e-12)
      atoms_.erase(atoms_.begin() + a);
    else
      ++a;
  }

  double ws = 0.0;
  for (const Atom& a : atoms_) ws += a.weight;
  v.setZero();
  for (Atom& a : atoms_) {
    a.weight /= ws;
    v += a.weight * a.v;
  }
}

ProjectionResult MomentProjector::project(const Vec& lambda, double tol) {
  tol = default_tol(lambda, tol);
  const int m = static_cast<int>(lambda.size());
  const long cap =
      std::min<long>(200000, static_cast<long>(10.0 * m / std::sqrt(tol)) + 50);

  if (atoms_.empty()) {
    Atom a;
    a.v = lmo(-lambda, &a.profile);
    a.weight = 1.0;
    atoms_.push_back(std::move(a));
  }
  // Reoptimize the warm-started weights for the new target point.
  Vec v = Vec::Zero(m);
  correct(lambda, v);

  double gap = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (long it = 0; it < cap; ++it) {
    Vec grad = v - lambda;
    Mat sprof;
    Vec s = lmo(grad, &sprof);
    gap = grad.dot(v - s);
    if (gap <= tol) {
      converged = true;
      break;
    }

    // Away atom: the stored atom most aligned with the gradient.
    int away = -1;
    double away_score = -std::numeric_limits<double>::infinity();
    for (size_t a = 0; a < atoms_.size(); ++a) {
      double sc = grad.dot(atoms_[a].v);
      if (sc > away_score) {
        away_score = sc;
        away = static_cast<int>(a);
      }
    }
    const double fw_score = grad.dot(Vec(v - s));           // = gap
    const double away_gain = away_score - grad.dot(v);      // grad . (v_a - v)

    bool use_away = away >= 0 && atoms_.size() > 1 && away_gain > fw_score;
    if (use_away) {
      Atom& aa = atoms_[away];
      Vec dir = v - aa.v;
      double denom = dir.squaredNorm();
      if (denom <= 1e-30) {
        use_away = false;
      } else {
        double gamma_max = aa.weight / (1.0 - aa.weight);
        double gamma = std::min(gamma_max, away_gain / denom);
        if (gamma <= 0.0) {
          use_away = false;
        } else {
          v += gamma * dir;
          for (Atom& b : atoms_) b.weight *= (1.0 + gamma);
          aa.weight -= gamma;
          if (aa.weight < 1e-14) atoms_.erase(atoms_.begin() + away);
        }
      }
    }
    if (!use_away) {
      Vec dir = s - v;
      double denom = dir.squaredNorm();
      if (denom <= 1e-30) {
        converged = true;
        break;
      }
      double gamma = std::min(1.0, gap / denom);
      v += gamma * dir;
      for (Atom& b : atoms_) b.weight *= (1.0 - gamma);
      // Merge with an existing atom when the LMO returns one already stored.
      int hit = -1;
      for (size_t a = 0; a < atoms_.size(); ++a)
        if ((atoms_[a].v - s).lpNorm<Eigen::Infinity>() < 1e-12) {
          hit = static_cast<int>(a);
          break;
        }
      if (hit >= 0) {
        atoms_[hit].weight += gamma;
      } else {
        Atom na;
        na.v = std::move(s);
        na.profile = std::move(sprof);
        na.weight = gamma;
        atoms_.push_back(std::move(na));
      }
      if (gamma == 1.0) {
        for (size_t a = 0; a < atoms_.size();) {
          if (atoms_[a].weight < 1e-14)
            atoms_.erase(atoms_.begin() + a);
          else
            ++a;
        }
      }
    }
    // Periodic fully corrective pass; also resynchronizes the iterate exactly.
    if ((it & 15) == 15) correct(lambda, v);
  }

  ProjectionResult res;
  res.converged = converged;
  res.fw_gap = gap;
  // Report the exact convex combination of the stored atoms.
  res.point = Vec::Zero(m);
  res.witness = Mat::Zero(data_.n(), W_.dim());
  double ws = 0.0;
  for (const Atom& a : atoms_) ws += a.weight;
  for (const Atom& a : atoms_) {
    res.point += (a.weight / ws) * a.v;
    res.witness += (a.weight / ws) * a.profile;
  }
  res.distance = (lambda - res.point).norm();
  return res;
}

CiloSmoothing::CiloSmoothing(const Dataset& data, const Polyhedron& W, double beta)
    : plain_(data, W, std::nullopt),
      budget_(data, W, beta),
      beta_(beta),
      bw_bphi_(ball_radius(W) * feature_spectral_bound(data)) {}

ProjectionResult CiloSmoothing::project_plain(const Vec& lambda, double tol) {
  return plain_.project(lambda, tol);
}

ProjectionResult CiloSmoothing::project_budget(const Vec& lambda, double tol) {
  return budget_.project(lambda, tol);
}

ProxPair CiloSmoothing::prox(const Vec& lambda, double tol) {
  ProjectionResult p = plain_.project(lambda, tol);
  ProjectionResult q = budget_.project(lambda, tol);
  ProxPair out;
  out.theta_plain = lambda - p.point;
  out.theta_budget = lambda - q.point;
  out.envelope_plain = 0.5 * lambda.squaredNorm() - 0.5 * p.distance * p.distance;
  out.envelope_budget = 0.5 * lambda.squaredNorm() - 0.5 * q.distance * q.distance;
  return out;
}

std::pair<double, Vec> CiloSmoothing::s_cilo(const Vec& lambda, double tol) {
  ProjectionResult p = plain_.project(lambda, tol);
  ProjectionResult q = budget_.project(lambda, tol);
  double value = 0.5 * q.distance * q.distance - 0.5 * p.distance * p.distance;
  // grad = F_V(lambda) - F_Vbar(lambda) = theta_budget - theta_plain.
  Vec grad = p.point - q.point;
  return {value, std::move(grad)};
}

std::pair<double, Vec> CiloSmoothing::log_cilo(const Vec& lambda, double tol) {
  ProjectionResult p = plain_.project(lambda, tol);
  ProjectionResult q = budget_.project(lambda, tol);
  if (p.distance < kBoundaryTol || q.distance < kBoundaryTol)
    throw OnBoundary("log_cilo: lambda within 1e-10 of a moment set");
  double value = std::log(q.distance) - std::log(p.distance);
  Vec grad = (lambda - q.point) / (q.distance * q.distance) -
             (lambda - p.point) / (p.distance * p.distance);
  return {value, std::move(grad)};
}

Vec CiloSmoothing::boundary_escape(const Vec& lambda, double r_factor, double tol) {
  ProjectionResult p = plain_.project(lambda, tol);
  if (p.distance < kBoundaryTol)
    throw DirectionUndefined("boundary_escape: lambda is on or inside the moment set");
  Vec dir = (lambda - p.point) / p.distance;
  return lambda + (r_factor * bw_bphi_) * dir;
}

ProjectionResult project_moment_set(const Vec& lambda, const Dataset& data, const Polyhedron& W,
                                    std::optional<double> beta, double tol) {
  MomentProjector proj(data, W, beta);
  return proj.project(lambda, tol);
}

ProxPair prox_pair(const Vec& lambda, double beta, const Dataset& data, const Polyhedron& W,
                   double tol) {
  CiloSmoothing sm(data, W, beta);
  return sm.prox(lambda, tol);
}

std::pair<double, Vec> s_cilo(const Vec& lambda, double beta, const Dataset& data,
                              const Polyhedron& W, double tol) {
  CiloSmoothing sm(data, W, beta);
  return sm.s_cilo(lambda, tol);
}

std::pair<double, Vec> log_cilo(const Vec& lambda, double beta, const Dataset& data,
                                const Polyhedron& W, double tol) {
  CiloSmoothing sm(data, W, beta);
  return sm.log_cilo(lambda, tol);
}

Vec boundary_escape(const Vec& lambda, const Dataset& data, const Polyhedron& W, double r_factor) {
  MomentProjector proj(data, W, std::nullopt);
  ProjectionResult p = proj.project(lambda);
  if (p.distance < kBoundaryTol)
    throw DirectionUndefined("boundary_escape: lambda is on or inside the moment set");
  double scale = ball_radius(W) * feature_spectral_bound(data);
  return lambda + (r_factor * scale) * Vec((lambda - p.point) / p.distance);
}

}  // namespace cilo
